//! Spin-j angular momentum, the su(d) operator basis and state coordinates.
//!
//! The standard basis is ordered by descending magnetic quantum number,
//! m = j, j−1, …, −j, so the highest-weight state |j,j⟩ is basis vector 0.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::linalg::{self, CMatrix, CVector, C64};
use crate::rng::complex_normal;
use crate::{Error, Result};

/// Tolerance used when validating user-supplied density matrices.
pub const STATE_TOL: f64 = 1e-10;

/// Angular-momentum operators of a single spin j in units of ħ.
#[derive(Clone, Debug)]
pub struct SpinSystem {
    twice_j: usize,
    jx: CMatrix,
    jy: CMatrix,
    jz: CMatrix,
}

impl SpinSystem {
    /// Builds the spin-`j` operators. `2j` must be a non-negative integer.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !j.is_finite() || j < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self::from_twice_j(twice.round() as usize))
    }

    pub fn from_twice_j(twice_j: usize) -> Self {
        let d = twice_j + 1;
        let j = twice_j as f64 / 2.0;
        let m = |k: usize| j - k as f64;

        // J+ |m⟩ = √(j(j+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits one index lower.
        let mut jplus = DMatrix::<f64>::zeros(d, d);
        for k in 1..d {
            let mk = m(k);
            jplus[(k - 1, k)] = (j * (j + 1.0) - mk * (mk + 1.0)).sqrt();
        }
        let jminus = jplus.transpose();
        let jx = linalg::real_to_complex(&((&jplus + &jminus) * 0.5));
        let jy = (&jplus - &jminus).map(|x| C64::new(0.0, -0.5 * x));
        let jz = CMatrix::from_diagonal(&DVector::from_iterator(
            d,
            (0..d).map(|k| C64::new(m(k), 0.0)),
        ));
        Self {
            twice_j,
            jx,
            jy,
            jz,
        }
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn twice_j(&self) -> usize {
        self.twice_j
    }

    pub fn is_integer_spin(&self) -> bool {
        self.twice_j.is_multiple_of(2)
    }

    /// Hilbert-space dimension d = 2j + 1.
    pub fn dim(&self) -> usize {
        self.twice_j + 1
    }

    pub fn jx(&self) -> &CMatrix {
        &self.jx
    }

    pub fn jy(&self) -> &CMatrix {
        &self.jy
    }

    pub fn jz(&self) -> &CMatrix {
        &self.jz
    }

    /// Magnetic quantum number of basis vector `k`.
    pub fn m(&self, k: usize) -> f64 {
        self.j() - k as f64
    }

    /// |j, j⟩
    pub fn highest_weight(&self) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// e^{−iφJz} e^{−iθJy} |j,j⟩, the coherent state pointing along (θ, φ).
    pub fn coherent_ket(&self, theta: f64, phi: f64) -> CVector {
        let ry = linalg::exp_hermitian(&self.jy, theta).expect("Jy is Hermitian");
        let mut psi = ry * self.highest_weight();
        // Jz is diagonal, so the azimuthal rotation is a phase per component
        for k in 0..self.dim() {
            psi[k] *= C64::from_polar(1.0, -phi * self.m(k));
        }
        psi
    }
}

/// Coherent state as a density matrix.
pub fn spin_coherent_state(system: &SpinSystem, theta: f64, phi: f64) -> DensityMatrix {
    DensityMatrix::from_ket(&system.coherent_ket(theta, phi))
}

/// Which generalized Gell-Mann generator an element of the basis is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// (|a⟩⟨b| + |b⟩⟨a|)/√2, a < b
    Symmetric(usize, usize),
    /// (−i|a⟩⟨b| + i|b⟩⟨a|)/√2, a < b
    Antisymmetric(usize, usize),
    /// (Σ_{k<l}|k⟩⟨k| − l|l⟩⟨l|)/√(l(l+1)), 1 ≤ l < d
    Diagonal(usize),
}

/// Orthonormal traceless Hermitian basis {E_α} of su(d), α = 1..d²−1.
///
/// Ordering: symmetric pairs in row-major order, then antisymmetric pairs,
/// then the d−1 diagonal generators.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    dim: usize,
    generators: Vec<Generator>,
}

impl OperatorBasis {
    pub fn gell_mann(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: d });
        }
        let mut generators = Vec::with_capacity(d * d - 1);
        for a in 0..d {
            for b in a + 1..d {
                generators.push(Generator::Symmetric(a, b));
            }
        }
        for a in 0..d {
            for b in a + 1..d {
                generators.push(Generator::Antisymmetric(a, b));
            }
        }
        generators.extend((1..d).map(Generator::Diagonal));
        Ok(Self { dim: d, generators })
    }

    /// Hilbert-space dimension d.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, d² − 1.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// Dense matrix of element `alpha`.
    pub fn element(&self, alpha: usize) -> CMatrix {
        let d = self.dim;
        let mut e = CMatrix::zeros(d, d);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self.generators[alpha] {
            Generator::Symmetric(a, b) => {
                e[(a, b)] = C64::new(s, 0.0);
                e[(b, a)] = C64::new(s, 0.0);
            }
            Generator::Antisymmetric(a, b) => {
                e[(a, b)] = C64::new(0.0, -s);
                e[(b, a)] = C64::new(0.0, s);
            }
            Generator::Diagonal(l) => {
                let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
                for k in 0..l {
                    e[(k, k)] = C64::new(norm, 0.0);
                }
                e[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
            }
        }
        e
    }

    pub fn elements(&self) -> Vec<CMatrix> {
        (0..self.len()).map(|a| self.element(a)).collect()
    }

    /// Coordinates Tr(O E_α) of a Hermitian operator.
    ///
    /// Uses the sparsity of the generators, so this costs O(d²) rather than
    /// O(d⁴).
    pub fn coordinates(&self, op: &CMatrix) -> Result<DVector<f64>> {
        self.check_dim(op)?;
        Ok(self.coordinates_unchecked(op))
    }

    pub(crate) fn coordinates_unchecked(&self, op: &CMatrix) -> DVector<f64> {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut prefix = 0.0;
        let mut diag_prefix = vec![0.0; self.dim];
        for (l, slot) in diag_prefix.iter_mut().enumerate() {
            *slot = prefix;
            prefix += op[(l, l)].re;
        }
        DVector::from_iterator(
            self.len(),
            self.generators.iter().map(|g| match *g {
                Generator::Symmetric(a, b) => sqrt2 * 0.5 * (op[(a, b)] + op[(b, a)]).re,
                Generator::Antisymmetric(a, b) => {
                    // i(O_ab − O_ba)/√2
                    let diff = op[(a, b)] - op[(b, a)];
                    -diff.im / sqrt2
                }
                Generator::Diagonal(l) => {
                    (diag_prefix[l] - l as f64 * op[(l, l)].re) / ((l * (l + 1)) as f64).sqrt()
                }
            }),
        )
    }

    /// Σ_α c_α E_α
    pub fn combine(&self, coeffs: &DVector<f64>) -> Result<CMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let d = self.dim;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::zeros(d, d);
        for (g, &c) in self.generators.iter().zip(coeffs.iter()) {
            match *g {
                Generator::Symmetric(a, b) => {
                    m[(a, b)] += C64::new(c * s, 0.0);
                    m[(b, a)] += C64::new(c * s, 0.0);
                }
                Generator::Antisymmetric(a, b) => {
                    m[(a, b)] += C64::new(0.0, -c * s);
                    m[(b, a)] += C64::new(0.0, c * s);
                }
                Generator::Diagonal(l) => {
                    let norm = c / ((l * (l + 1)) as f64).sqrt();
                    for k in 0..l {
                        m[(k, k)] += C64::new(norm, 0.0);
                    }
                    m[(l, l)] -= C64::new(l as f64 * norm, 0.0);
                }
            }
        }
        Ok(m)
    }

    /// r_α = Tr(ρ E_α)
    pub fn expand(&self, rho: &DensityMatrix) -> Result<BlochVector> {
        self.coordinates(rho.matrix()).map(BlochVector)
    }

    /// ρ = I/d + Σ r_α E_α. The result is Hermitian with unit trace but is
    /// not necessarily positive.
    pub fn pack(&self, r: &BlochVector) -> Result<CMatrix> {
        let mut m = self.combine(&r.0)?;
        let inv_d = 1.0 / self.dim as f64;
        for k in 0..self.dim {
            m[(k, k)] += C64::new(inv_d, 0.0);
        }
        Ok(m)
    }

    fn check_dim(&self, op: &CMatrix) -> Result<()> {
        if op.nrows() != self.dim || op.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: op.nrows().max(op.ncols()),
            });
        }
        Ok(())
    }
}

/// Bloch-vector coordinates of a state in an [`OperatorBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector(pub DVector<f64>);

impl BlochVector {
    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Unit-trace Hermitian matrix. Positivity is not enforced on construction;
/// use [`DensityMatrix::is_physical`].
#[derive(Clone, Debug)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                got: rho.ncols(),
            });
        }
        let herm = linalg::hermiticity_residual(&rho);
        if herm > STATE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(tr));
        }
        Ok(Self(rho))
    }

    /// |ψ⟩⟨ψ| / ⟨ψ|ψ⟩
    pub fn from_ket(psi: &CVector) -> Self {
        let norm2 = psi.norm_squared();
        Self(psi * psi.adjoint() / C64::new(norm2, 0.0))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(CMatrix::identity(d, d) / C64::new(d as f64, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Tr(ρ²)
    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.0, &self.0)
    }

    /// Tr(ρ O) for Hermitian O.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        linalg::trace_product(&self.0, op)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.0).0
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.eigenvalues().first().is_some_and(|&e| e >= -tol)
    }
}

/// Haar-random ket: a normalised vector of iid complex Gaussians.
pub fn random_pure_ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CVector> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: d });
    }
    let z = CVector::from_iterator(d, (0..d).map(|_| complex_normal(rng)));
    let norm = z.norm();
    Ok(z / C64::new(norm, 0.0))
}

pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DensityMatrix> {
    random_pure_ket(d, rng).map(|psi| DensityMatrix::from_ket(&psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, frobenius, hermiticity_residual, trace_product};
    use crate::rng::task_rng;
    use std::f64::consts::PI;

    fn i() -> C64 {
        C64::new(0.0, 1.0)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let s = SpinSystem::new(0.5).unwrap();
        assert_eq!(s.dim(), 2);
        assert!((s.jz()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((s.jz()[(1, 1)].re + 0.5).abs() < 1e-15);
        assert!((s.jx()[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!((s.jx()[(1, 0)].re - 0.5).abs() < 1e-15);
        assert!((s.jy()[(0, 1)] - C64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn commutation_relations_hold() {
        for twice in 0..=30 {
            let s = SpinSystem::from_twice_j(twice);
            let res_z = frobenius(&(commutator(s.jx(), s.jy()) - s.jz() * i()));
            let res_x = frobenius(&(commutator(s.jy(), s.jz()) - s.jx() * i()));
            let res_y = frobenius(&(commutator(s.jz(), s.jx()) - s.jy() * i()));
            assert!(res_x.max(res_y).max(res_z) < 1e-12, "2j={twice}");
            for op in [s.jx(), s.jy(), s.jz()] {
                assert!(hermiticity_residual(op) < 1e-14);
            }
        }
    }

    #[test]
    fn jz_squared_trace_at_spin_ten() {
        let s = SpinSystem::new(10.0).unwrap();
        assert_eq!(s.dim(), 21);
        // Σ m² over m = −10..10, computed independently
        let expected: f64 = (-10..=10).map(|m| (m * m) as f64).sum();
        assert_eq!(expected, 770.0);
        assert!((trace_product(s.jz(), s.jz()) - expected).abs() < 1e-10);
        // Casimir J² = j(j+1) I
        let j2 = s.jx() * s.jx() + s.jy() * s.jy() + s.jz() * s.jz();
        assert!(frobenius(&(j2 - CMatrix::identity(21, 21) * C64::new(110.0, 0.0))) < 1e-10);
    }

    #[test]
    fn rejects_bad_spin() {
        assert!(matches!(SpinSystem::new(-1.0), Err(Error::InvalidSpin(_))));
        assert!(matches!(SpinSystem::new(0.3), Err(Error::InvalidSpin(_))));
        assert!(matches!(
            SpinSystem::new(f64::NAN),
            Err(Error::InvalidSpin(_))
        ));
        assert!(SpinSystem::new(1.5).is_ok());
    }

    #[test]
    fn gell_mann_sizes_and_gram_matrix() {
        for d in [2usize, 3, 4, 21] {
            let basis = OperatorBasis::gell_mann(d).unwrap();
            assert_eq!(basis.len(), d * d - 1);
            let elems = basis.elements();
            for (a, ea) in elems.iter().enumerate() {
                assert!(ea.trace().norm() < 1e-14);
                assert!(hermiticity_residual(ea) < 1e-15);
                // the O(d²) coordinate path must agree with explicit traces
                let fast = basis.coordinates(ea).unwrap();
                for (b, eb) in elems.iter().enumerate() {
                    let g = trace_product(ea, eb);
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-12, "d={d} a={a} b={b}");
                    assert!((fast[b] - want).abs() < 1e-12);
                }
            }
        }
        assert!(OperatorBasis::gell_mann(1).is_err());
    }

    #[test]
    fn two_dimensional_basis_is_scaled_pauli() {
        let basis = OperatorBasis::gell_mann(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = basis.elements();
        assert!((e[0][(0, 1)].re - s).abs() < 1e-15); // σx/√2
        assert!((e[1][(0, 1)] - C64::new(0.0, -s)).norm() < 1e-15); // σy/√2
        assert!((e[2][(0, 0)].re - s).abs() < 1e-15); // σz/√2
        assert!((e[2][(1, 1)].re + s).abs() < 1e-15);
    }

    #[test]
    fn expand_maximally_mixed_is_zero() {
        let basis = OperatorBasis::gell_mann(5).unwrap();
        let r = basis.expand(&DensityMatrix::maximally_mixed(5)).unwrap();
        assert!(r.0.norm() < 1e-15);
    }

    #[test]
    fn purity_identity_for_highest_weight() {
        let s = SpinSystem::new(10.0).unwrap();
        let basis = OperatorBasis::gell_mann(21).unwrap();
        let rho = DensityMatrix::from_ket(&s.highest_weight());
        let r = basis.expand(&rho).unwrap();
        assert!((r.0.norm_squared() - (1.0 - 1.0 / 21.0)).abs() < 1e-12);
    }

    #[test]
    fn expand_rejects_dimension_mismatch() {
        let basis = OperatorBasis::gell_mann(3).unwrap();
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(matches!(
            basis.expand(&rho),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(basis.pack(&BlochVector::zeros(5)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(
            DensityMatrix::new(m.clone()),
            Err(Error::NotHermitian(_))
        ));
        let m2 = CMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(m2),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn random_states_are_pure_and_seeded() {
        let a = random_pure_state(21, &mut task_rng(11, 0)).unwrap();
        let b = random_pure_state(21, &mut task_rng(11, 0)).unwrap();
        assert!((a.purity() - 1.0).abs() < 1e-12);
        assert!((a.matrix().trace().re - 1.0).abs() < 1e-12);
        assert_eq!(a.matrix(), b.matrix());
        assert!(random_pure_ket(1, &mut task_rng(0, 0)).is_err());
    }

    #[test]
    fn haar_states_have_no_preferred_direction() {
        // Monte Carlo oracle: the Bloch vector averages to zero.
        let basis = OperatorBasis::gell_mann(2).unwrap();
        let mut rng = task_rng(2024, 0);
        let mut mean = DVector::<f64>::zeros(3);
        let draws = 100_000;
        for _ in 0..draws {
            let rho = random_pure_state(2, &mut rng).unwrap();
            mean += basis.expand(&rho).unwrap().0;
        }
        mean /= draws as f64;
        assert!(mean.norm() < 0.02, "{}", mean.norm());
    }

    #[test]
    fn coherent_state_poles() {
        let s = SpinSystem::new(10.0).unwrap();
        let north = spin_coherent_state(&s, 0.0, 0.3);
        assert!((north.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        let south = spin_coherent_state(&s, PI, 0.0);
        assert!((south.matrix()[(20, 20)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_expectations_follow_direction() {
        let s = SpinSystem::new(10.0).unwrap();
        for (k, theta) in [0.2, 0.9, 1.7, 2.8].into_iter().enumerate() {
            let phi = 0.4 * k as f64 - 0.5;
            let rho = spin_coherent_state(&s, theta, phi);
            let j = s.j();
            assert!((rho.expectation(s.jz()) - j * theta.cos()).abs() < 1e-10);
            assert!((rho.expectation(s.jx()) - j * theta.sin() * phi.cos()).abs() < 1e-10);
            assert!((rho.expectation(s.jy()) - j * theta.sin() * phi.sin()).abs() < 1e-10);
        }
    }
}
