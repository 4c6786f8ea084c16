//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Hermiticity tolerance applied to generators before exponentiation.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint()))
}

/// ‖U†U − I‖_F
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let d = u.nrows();
    frobenius(&(u.adjoint() * u - CMatrix::identity(d, d)))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Real trace of a product of two Hermitian matrices, Tr(AB).
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// U† O U
pub fn conjugate_by(o: &CMatrix, u: &CMatrix) -> CMatrix {
    u.adjoint() * o * u
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// The input is symmetrised first so that roundoff in the anti-Hermitian
/// part does not leak into the eigenvectors.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues descending.
pub fn eigh_real_desc(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// e^{−iHt} for Hermitian H, built from the eigendecomposition of H.
pub fn exp_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let residual = hermiticity_residual(h);
    if residual > HERMITIAN_TOL * frobenius(h).max(1.0) {
        return Err(Error::NotHermitian(residual));
    }
    let (values, vectors) = eigh(h);
    let phases = DVector::from_iterator(
        values.len(),
        values.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    );
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    Ok(scaled * vectors.adjoint())
}

/// Eigenvectors of a unitary matrix via complex Schur decomposition.
///
/// Returns the eigenphases in (−π, π] and the unitary eigenvector matrix.
/// For normal matrices the Schur form is diagonal, so the Schur vectors are
/// the eigenvectors.
pub fn unitary_eigen(u: &CMatrix) -> (Vec<f64>, CMatrix) {
    let d = u.nrows();
    if d == 1 {
        return (vec![u[(0, 0)].arg()], CMatrix::identity(1, 1));
    }
    let (q, t) = u.clone().schur().unpack();
    let phases = (0..d).map(|i| t[(i, i)].arg()).collect();
    (phases, q)
}
