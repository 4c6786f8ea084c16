use chaos_tomography::linalg::{frobenius, CMatrix, C64};
use chaos_tomography::rng::task_rng;
use chaos_tomography::spin::{random_pure_state, BlochVector, DensityMatrix, OperatorBasis};
use chaos_tomography::tomography::{project_simplex, project_to_physical};
use nalgebra::DVector;
use proptest::prelude::*;

fn bloch(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #[test]
    fn pack_then_coordinates_round_trips(d in 2usize..7, seed in any::<u64>()) {
        let basis = OperatorBasis::gell_mann(d).unwrap();
        let rho = random_pure_state(d, &mut task_rng(seed, 0)).unwrap();
        let r = basis.expand(&rho).unwrap();
        let back = basis.pack(&r).unwrap();
        prop_assert!(frobenius(&(back - rho.matrix())) < 1e-12);
    }

    #[test]
    fn coordinates_then_combine_round_trips(values in bloch(15)) {
        let basis = OperatorBasis::gell_mann(4).unwrap();
        let c = DVector::from_vec(values);
        let op = basis.combine(&c).unwrap();
        let back = basis.coordinates(&op).unwrap();
        prop_assert!((back - c).norm() < 1e-12);
    }

    #[test]
    fn simplex_projection_is_a_distribution(v in prop::collection::vec(-3.0f64..3.0, 1..30)) {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let again = project_simplex(&p);
        for (a, b) in p.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_projection_preserves_order(v in prop::collection::vec(-3.0f64..3.0, 2..30)) {
        let p = project_simplex(&v);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn physical_projection_is_physical(values in bloch(24)) {
        let basis = OperatorBasis::gell_mann(5).unwrap();
        let r = BlochVector(DVector::from_vec(values));
        let rho = project_to_physical(&r, &basis).unwrap();
        prop_assert!(rho.is_physical(1e-10));
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        let again = project_to_physical(&basis.expand(&rho).unwrap(), &basis).unwrap();
        prop_assert!(frobenius(&(again.matrix() - rho.matrix())) < 1e-10);
    }
}

#[test]
fn projection_is_frobenius_closest_among_random_states() {
    let d = 4;
    let basis = OperatorBasis::gell_mann(d).unwrap();
    let mut rng = task_rng(5, 0);
    for trial in 0..10 {
        let r = BlochVector(DVector::from_fn(basis.len(), |i, _| {
            ((i * 7 + trial * 13) % 11) as f64 / 11.0 - 0.5
        }));
        let target = basis.pack(&r).unwrap();
        let best = project_to_physical(&r, &basis).unwrap();
        let best_dist = frobenius(&(best.matrix() - &target));
        for _ in 0..100 {
            // random rank-two mixtures cover the interior and the boundary
            let a = random_pure_state(d, &mut rng).unwrap();
            let b = random_pure_state(d, &mut rng).unwrap();
            let w = 0.3 * (trial as f64 / 10.0);
            let m: CMatrix = a.matrix() * C64::new(1.0 - w, 0.0) + b.matrix() * C64::new(w, 0.0);
            let other = DensityMatrix::new(m).unwrap();
            assert!(frobenius(&(other.matrix() - &target)) >= best_dist - 1e-12);
        }
    }
}
