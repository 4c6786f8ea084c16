//! Circular random-matrix ensembles and their entropy predictions.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::floquet::parity_operator;
use crate::linalg::{self, CMatrix, C64};
use crate::rng::ginibre;
use crate::spin::SpinSystem;
use crate::{Error, Result};

/// 2 − γ − ln 2: expected entropy deficit of the squared components of a
/// random real unit vector, relative to the uniform distribution.
pub const REAL_ENTROPY_DEFICIT: f64 = 0.729637;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Eigenvalue clustering tolerance for the parity sectors.
const PARITY_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnsembleKind {
    CUE,
    COE,
    ParityBlockCOE,
    HaarPerStep,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CUE => "CUE",
            Self::COE => "COE",
            Self::ParityBlockCOE => "ParityBlockCOE",
            Self::HaarPerStep => "HaarPerStep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    /// (a, d − a) for the parity-block ensemble.
    pub block_sizes: Option<(usize, usize)>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { min: 2, got: dim });
        }
        let block_sizes = match kind {
            EnsembleKind::ParityBlockCOE => {
                if dim.is_multiple_of(2) {
                    return Err(Error::Unsupported(
                        "parity blocks need integer spin (odd dimension)".into(),
                    ));
                }
                Some((dim.div_ceil(2), (dim - 1) / 2))
            }
            _ => None,
        };
        Ok(Self {
            kind,
            dim,
            block_sizes,
        })
    }
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// diag(R) moved into Q.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: d });
    }
    Ok(haar_unchecked(d, rng))
}

fn haar_unchecked<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        if norm > 0.0 {
            col *= rjj / norm;
        }
    }
    q
}

/// COE member W Wᵀ with W Haar. Symmetric and unitary.
pub fn sample_coe<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    let w = sample_haar(d, rng)?;
    Ok(&w * w.transpose())
}

/// Orthonormal eigenbasis of R = e^{−iπJx}, grouped by sector.
#[derive(Clone, Debug)]
pub struct ParityBasis {
    /// Columns: the +1 sector first, then the −1 sector.
    pub vectors: CMatrix,
    pub plus_dim: usize,
    pub minus_dim: usize,
}

impl ParityBasis {
    pub fn plus(&self) -> CMatrix {
        self.vectors.columns(0, self.plus_dim).into_owned()
    }

    pub fn minus(&self) -> CMatrix {
        self.vectors
            .columns(self.plus_dim, self.minus_dim)
            .into_owned()
    }
}

/// Parity sectors of an integer spin.
///
/// For integer j the parity operator is real symmetric, so the eigenbasis is
/// taken from the real part of (R + R†)/2; the resulting sector bases are
/// real, which keeps the COE blocks built on them time-reversal symmetric
/// with respect to plain complex conjugation.
pub fn parity_eigenbasis(system: &SpinSystem) -> Result<ParityBasis> {
    if !system.is_integer_spin() {
        return Err(Error::Unsupported(
            "parity sectors are ±1 only for integer spin".into(),
        ));
    }
    let d = system.dim();
    let r = parity_operator(system);
    let herm = (&r + r.adjoint()) * C64::new(0.5, 0.0);
    let imag = herm.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-10 {
        return Err(Error::Unsupported(format!(
            "parity operator has imaginary part {imag:e}"
        )));
    }
    let real: DMatrix<f64> = herm.map(|z| z.re);
    let (values, vectors) = linalg::eigh_real_desc(&real);
    let plus: Vec<usize> = (0..d)
        .filter(|&k| (values[k] - 1.0).abs() < PARITY_CLUSTER_TOL)
        .collect();
    let minus: Vec<usize> = (0..d)
        .filter(|&k| (values[k] + 1.0).abs() < PARITY_CLUSTER_TOL)
        .collect();
    let expected = (d.div_ceil(2), (d - 1) / 2);
    let got = (plus.len(), minus.len());
    let balanced = got == expected || got == (expected.1, expected.0);
    if plus.len() + minus.len() != d || !balanced {
        return Err(Error::ParitySectors { expected, got });
    }
    let columns: Vec<_> = plus
        .iter()
        .chain(&minus)
        .map(|&k| vectors.column(k).into_owned())
        .collect();
    let mut basis = DMatrix::from_columns(&columns);
    // re-orthonormalise within each degenerate sector
    for (start, len) in [(0, plus.len()), (plus.len(), minus.len())] {
        let block = basis.columns(start, len).into_owned();
        let q = block.qr().q();
        basis.columns_mut(start, len).copy_from(&q);
    }
    Ok(ParityBasis {
        vectors: linalg::real_to_complex(&basis),
        plus_dim: plus.len(),
        minus_dim: minus.len(),
    })
}

/// Independent COE blocks on the two parity sectors, returned in the
/// standard basis. The result commutes with R.
pub fn sample_parity_block_coe<R: Rng + ?Sized>(
    system: &SpinSystem,
    rng: &mut R,
) -> Result<CMatrix> {
    let basis = parity_eigenbasis(system)?;
    sample_parity_block_coe_in(&basis, rng)
}

/// As [`sample_parity_block_coe`], reusing a precomputed parity basis.
pub fn sample_parity_block_coe_in<R: Rng + ?Sized>(
    basis: &ParityBasis,
    rng: &mut R,
) -> Result<CMatrix> {
    let mut u = CMatrix::zeros(basis.vectors.nrows(), basis.vectors.nrows());
    for sector in [basis.plus(), basis.minus()] {
        let block = match sector.ncols() {
            0 => continue,
            1 => {
                let w = C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
                CMatrix::from_element(1, 1, w * w)
            }
            n => sample_coe(n, rng)?,
        };
        u += &sector * block * sector.adjoint();
    }
    Ok(u)
}

/// Draws one repeated-map unitary for the ensembles that have one.
pub fn sample_unitary<R: Rng + ?Sized>(
    kind: EnsembleKind,
    system: &SpinSystem,
    parity: Option<&ParityBasis>,
    rng: &mut R,
) -> Result<CMatrix> {
    match kind {
        EnsembleKind::CUE => sample_haar(system.dim(), rng),
        EnsembleKind::COE => sample_coe(system.dim(), rng),
        EnsembleKind::ParityBlockCOE => match parity {
            Some(basis) => sample_parity_block_coe_in(basis, rng),
            None => sample_parity_block_coe(system, rng),
        },
        EnsembleKind::HaarPerStep => Err(Error::Unsupported(
            "HaarPerStep draws a new unitary each step".into(),
        )),
    }
}

/// Closed-form expected entropy (nats) of the normalised asymptotic
/// inverse-covariance spectrum.
pub fn wootters_entropy_prediction(kind: EnsembleKind, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: d });
    }
    let full = (d * d - 1) as f64;
    match kind {
        EnsembleKind::ParityBlockCOE => Ok((full / 2.0).ln() - REAL_ENTROPY_DEFICIT),
        EnsembleKind::CUE => Ok(full.ln() - REAL_ENTROPY_DEFICIT),
        EnsembleKind::HaarPerStep => Ok(full.ln()),
        EnsembleKind::COE => Err(Error::Unsupported(
            "no closed form for the COE without parity structure".into(),
        )),
    }
}
