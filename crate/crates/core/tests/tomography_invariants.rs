use chaos_tomography::ensembles::{sample_haar, sample_parity_block_coe};
use chaos_tomography::floquet::{
    heisenberg_sequence, kicked_top_no_tr, kicked_top_tr, per_step_haar_sequence, Driving,
    FloquetMap, NoTrParams,
};
use chaos_tomography::metrics::{collective_fisher, covariance_entropy, log_inverse_volume};
use chaos_tomography::rng::task_rng;
use chaos_tomography::spin::{random_pure_ket, random_pure_state, OperatorBasis, SpinSystem};
use chaos_tomography::tomography::{
    accumulate_gram, invert_record, run_tomography, simulate_record, Estimator, GramAccumulator,
    RunOptions,
};

fn maps(s: &SpinSystem) -> Vec<Driving> {
    let mut rng = task_rng(3, 0);
    vec![
        Driving::from_map(&kicked_top_tr(s, 1.4, 7.0)),
        Driving::from_map(&kicked_top_tr(s, 1.4, 0.5)),
        Driving::from_map(&kicked_top_no_tr(s, &NoTrParams::default())),
        Driving::from_map(&FloquetMap::sampled(
            sample_haar(s.dim(), &mut rng).unwrap(),
        )),
        Driving::HaarPerStep { dim: s.dim() },
    ]
}

#[test]
fn trace_of_inverse_covariance_grows_by_norm_of_observable() {
    let s = SpinSystem::new(3.0).unwrap();
    let basis = OperatorBasis::gell_mann(7).unwrap();
    // Tr(Jz²) = j(j+1)(2j+1)/3
    let norm = 3.0 * 4.0 * 7.0 / 3.0;
    for drv in maps(&s) {
        let mut acc = GramAccumulator::new(basis.len());
        for (i, o) in drv.observables(s.jz().clone(), 1).take(60).enumerate() {
            acc.push(&basis.coordinates(&o).unwrap());
            let n = (i + 1) as f64;
            let tr = acc.gram().trace();
            assert!((tr - n * norm).abs() < 1e-9 * n * norm);
        }
    }
}

#[test]
fn fisher_and_volume_obey_am_gm() {
    let s = SpinSystem::new(3.0).unwrap();
    let basis = OperatorBasis::gell_mann(7).unwrap();
    for drv in maps(&s) {
        for n in [1, 5, 30, 80] {
            let cov = accumulate_gram(&drv, s.jz(), &basis, n, 2).summary(1e-10);
            let sigma = 0.3;
            let vol = log_inverse_volume(&cov, sigma).unwrap().value;
            let measured: f64 = cov.measured_eigenvalues().iter().sum();
            let k = cov.rank as f64;
            let bound = 0.5 * k * (measured / (k * sigma * sigma)).ln();
            assert!(vol <= bound + 1e-9, "{vol} > {bound}");
            // harmonic mean ≤ arithmetic mean
            let f = collective_fisher(&cov, sigma).unwrap().value;
            assert!(f <= measured / (k * k * sigma * sigma) + 1e-9);
            let h = covariance_entropy(&cov).unwrap();
            assert!(h >= 0.0 && h <= k.ln() + 1e-9);
        }
    }
}

#[test]
fn rank_and_measured_volume_grow_with_record_length() {
    let s = SpinSystem::new(2.0).unwrap();
    let basis = OperatorBasis::gell_mann(5).unwrap();
    for drv in maps(&s) {
        let mut last_rank = 0;
        let mut acc = GramAccumulator::new(basis.len());
        for o in drv.observables(s.jz().clone(), 4).take(40) {
            acc.push(&basis.coordinates(&o).unwrap());
            let cov = acc.summary(1e-10);
            assert!(cov.rank >= last_rank);
            last_rank = cov.rank;
        }
    }
}

#[test]
fn concatenated_records_add_inverse_covariances() {
    let s = SpinSystem::new(2.0).unwrap();
    let basis = OperatorBasis::gell_mann(5).unwrap();
    let drv = Driving::from_map(&kicked_top_tr(&s, 1.4, 7.0));
    let mut a = accumulate_gram(&drv, s.jz(), &basis, 30, 0);
    let mut b = accumulate_gram(&drv, s.jz(), &basis, 30, 0);
    let single = a.gram().clone();
    let f1 = collective_fisher(&a.summary(1e-10), 1.0).unwrap().value;
    a.merge(&mut b);
    assert_eq!(a.records(), 60);
    assert!((a.gram() - &single * 2.0).norm() < 1e-9);
    let f2 = collective_fisher(&a.summary(1e-10), 1.0).unwrap().value;
    assert!((f2 - 2.0 * f1).abs() < 1e-9 * f2);
}

#[test]
fn informationally_complete_noiseless_records_recover_the_state() {
    let s = SpinSystem::new(1.5).unwrap();
    let basis = OperatorBasis::gell_mann(4).unwrap();
    let mut rng = task_rng(6, 0);
    for _ in 0..5 {
        let seq = per_step_haar_sequence(&s, s.jz(), 40, &mut rng).unwrap();
        let rho = random_pure_state(4, &mut rng).unwrap();
        let rec = simulate_record(&seq, &rho, &basis, 0.0, 0).unwrap();
        let (r, cov) = invert_record(&rec).unwrap();
        assert_eq!(cov.rank, 15);
        assert!((r.0 - basis.expand(&rho).unwrap().0).norm() < 1e-8);
    }
}

#[test]
fn one_kick_gives_rank_one() {
    let s = SpinSystem::new(2.0).unwrap();
    let basis = OperatorBasis::gell_mann(5).unwrap();
    let mut rng = task_rng(8, 0);
    let u = sample_parity_block_coe(&s, &mut rng).unwrap();
    let seq = heisenberg_sequence(&FloquetMap::sampled(u), s.jz(), 1).unwrap();
    let rho = random_pure_state(5, &mut rng).unwrap();
    let (_, cov) = invert_record(&simulate_record(&seq, &rho, &basis, 0.1, 1).unwrap()).unwrap();
    assert_eq!(cov.rank, 1);
}

#[test]
fn engine_matches_materialised_record() {
    let s = SpinSystem::new(2.0).unwrap();
    let basis = OperatorBasis::gell_mann(5).unwrap();
    let map = kicked_top_tr(&s, 1.4, 3.0);
    let psi = random_pure_ket(5, &mut task_rng(9, 0)).unwrap();
    let run = run_tomography(
        &Driving::from_map(&map),
        s.jz(),
        &basis,
        std::slice::from_ref(&psi),
        &RunOptions {
            checkpoints: vec![12],
            estimator: Estimator::Projected,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let seq = heisenberg_sequence(&map, s.jz(), 12).unwrap();
    let rho = chaos_tomography::spin::DensityMatrix::from_ket(&psi);
    let (r, cov) = invert_record(&simulate_record(&seq, &rho, &basis, 0.0, 0).unwrap()).unwrap();
    assert_eq!(cov.rank, run.final_covariance.rank);
    assert!((r.0 - &run.final_results[0].r_ml.0).norm() < 1e-9);
}

#[test]
fn noisy_runs_are_reproducible_and_seed_dependent() {
    let s = SpinSystem::new(1.0).unwrap();
    let basis = OperatorBasis::gell_mann(3).unwrap();
    let drv = Driving::from_map(&kicked_top_tr(&s, 1.4, 7.0));
    let states: Vec<_> = (0..3)
        .map(|i| random_pure_ket(3, &mut task_rng(10, i)).unwrap())
        .collect();
    let run = |seed| {
        let opts = RunOptions {
            sigma: 0.2,
            checkpoints: vec![5, 20],
            noise_seed: seed,
            estimator: Estimator::Projected,
            ..RunOptions::default()
        };
        run_tomography(&drv, s.jz(), &basis, &states, &opts)
            .unwrap()
            .checkpoints
            .iter()
            .flat_map(|c| c.fidelities.clone())
            .collect::<Vec<f64>>()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}
