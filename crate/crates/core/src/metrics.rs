//! Information-gain metrics and the asymptotic inverse-covariance predictor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensembles::ParityBasis;
use crate::floquet::FloquetMap;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::spin::{DensityMatrix, OperatorBasis};
use crate::tomography::CovarianceSummary;
use crate::{Error, Result};

/// Eigenphase spacing below which the time-average argument fails.
pub const DEGENERATE_PHASE_TOL: f64 = 1e-10;

/// Relative threshold for counting nonzero matrix elements.
pub const NONZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsPoint {
    pub n: usize,
    /// Mean over the reconstructed states, if any.
    pub fidelity: Option<f64>,
    pub fidelity_sem: Option<f64>,
    pub entropy: f64,
    pub fisher: f64,
    pub log_inv_volume: f64,
    pub rank: usize,
    pub trace_inv_cov: f64,
    pub units: NoiseUnits,
}

impl MetricsPoint {
    pub fn evaluate(
        n: usize,
        cov: &CovarianceSummary,
        sigma: f64,
        fidelities: &[f64],
    ) -> Result<Self> {
        let (fidelity, fidelity_sem) = match mean_and_sem(fidelities) {
            Some((m, s)) => (Some(m), Some(s)),
            None => (None, None),
        };
        let fisher = collective_fisher(cov, sigma)?;
        Ok(Self {
            n,
            fidelity,
            fidelity_sem,
            entropy: covariance_entropy(cov)?,
            fisher: fisher.value,
            log_inv_volume: log_inverse_volume(cov, sigma)?.value,
            rank: cov.rank,
            trace_inv_cov: cov.trace() / noise_variance(sigma).0,
            units: fisher.units,
        })
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_sem(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// ⟨ψ|ρ|ψ⟩ for a normalised ket.
pub fn fidelity(psi: &CVector, rho: &DensityMatrix) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: psi.len(),
        });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalizedKet(norm));
    }
    Ok((psi.adjoint() * rho.matrix() * psi)[(0, 0)].re)
}

/// Fidelity against a density-matrix target, which must be pure.
pub fn fidelity_to_target(target: &DensityMatrix, rho: &DensityMatrix) -> Result<f64> {
    let purity = target.purity();
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::MixedTarget(purity));
    }
    let (_, vectors) = linalg::eigh(target.matrix());
    let psi = vectors.column(target.dim() - 1).into_owned();
    fidelity(&psi, rho)
}

/// Shannon entropy (nats) of a non-negative spectrum after normalisation.
/// Roundoff negatives are treated as zero.
pub fn spectral_entropy(values: &[f64]) -> Result<f64> {
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::EmptySpectrum);
    }
    Ok(values
        .iter()
        .map(|v| v.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

pub fn covariance_entropy(cov: &CovarianceSummary) -> Result<f64> {
    spectral_entropy(&cov.eigenvalues)
}

/// Whether a value carries physical noise units or was computed with σ² ≡ 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseUnits {
    Absolute,
    SigmaScaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledValue {
    pub value: f64,
    pub units: NoiseUnits,
}

fn noise_variance(sigma: f64) -> (f64, NoiseUnits) {
    if sigma > 0.0 {
        (sigma * sigma, NoiseUnits::Absolute)
    } else {
        (1.0, NoiseUnits::SigmaScaled)
    }
}

/// 1/Tr(C) with C = σ²(ÕᵀÕ)⁺ on the measured subspace.
pub fn collective_fisher(cov: &CovarianceSummary, sigma: f64) -> Result<ScaledValue> {
    let measured = cov.measured_eigenvalues();
    if measured.is_empty() {
        return Err(Error::NoInformation);
    }
    let (var, units) = noise_variance(sigma);
    let harmonic: f64 = measured.iter().map(|l| 1.0 / l).sum();
    Ok(ScaledValue {
        value: 1.0 / (var * harmonic),
        units,
    })
}

/// −½ log det C = ½ Σ ln(λ_k/σ²) on the measured subspace.
pub fn log_inverse_volume(cov: &CovarianceSummary, sigma: f64) -> Result<ScaledValue> {
    let measured = cov.measured_eigenvalues();
    if measured.is_empty() {
        return Err(Error::NoInformation);
    }
    let (var, units) = noise_variance(sigma);
    Ok(ScaledValue {
        value: 0.5 * measured.iter().map(|l| (l / var).ln()).sum::<f64>(),
        units,
    })
}

/// Long-time limit of ÕᵀÕ/n for a repeated Floquet map.
#[derive(Clone, Debug)]
pub struct AsymptoticSpectrum {
    /// Eigenvalues of the limit, descending, zeros included up to d² − 1.
    pub spectrum: Vec<f64>,
    pub entropy: f64,
    /// Entries of O₀ in the eigenbasis above the relative threshold.
    pub nonzero_terms: usize,
    /// Smallest gap between distinct eigenphases (mod 2π).
    pub min_phase_gap: f64,
    /// True when two eigenphases coincide, where the prediction is unreliable.
    pub degenerate: bool,
    /// Floquet eigenvectors as columns, aligned with `phases`.
    pub eigenvectors: CMatrix,
    pub phases: Vec<f64>,
    /// O₀ in the eigenbasis.
    pub observable: CMatrix,
}

impl AsymptoticSpectrum {
    /// The predicted limit as a matrix in Bloch coordinates.
    pub fn predicted_matrix(&self, basis: &OperatorBasis) -> DMatrix<f64> {
        let d = self.observable.nrows();
        let v = &self.eigenvectors;
        let dim = basis.len();
        let mut out = DMatrix::zeros(dim, dim);
        let mut diag_op = CMatrix::zeros(d, d);
        for k in 0..d {
            let vk = v.column(k);
            diag_op += vk * vk.adjoint() * self.observable[(k, k)];
        }
        let c = basis.coordinates_unchecked(&diag_op);
        out += &c * c.transpose();
        for k in 0..d {
            for l in (k + 1)..d {
                let w = self.observable[(k, l)].norm_sqr();
                if w == 0.0 {
                    continue;
                }
                let e = v.column(k) * v.column(l).adjoint();
                let a = basis.coordinates_unchecked(&(&e + e.adjoint()));
                let b = basis.coordinates_unchecked(&((&e - e.adjoint()) * C64::new(0.0, 1.0)));
                out += (&a * a.transpose() + &b * b.transpose()) * (0.5 * w);
            }
        }
        out
    }
}

/// Predicts the normalised asymptotic inverse-covariance spectrum from the
/// Floquet eigenbasis. With a parity basis the map is diagonalised within
/// each sector, giving eigenvectors that are also parity eigenstates.
pub fn asymptotic_inv_covariance(
    map: &FloquetMap,
    o0: &CMatrix,
    parity: Option<&ParityBasis>,
) -> Result<AsymptoticSpectrum> {
    let u = map.unitary();
    let d = u.nrows();
    if o0.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: o0.nrows(),
        });
    }
    let residual = linalg::hermiticity_residual(o0);
    if residual > linalg::HERMITIAN_TOL {
        return Err(Error::NotHermitian(residual));
    }
    let (phases, vectors) = match parity {
        None => linalg::unitary_eigen(u),
        Some(p) => {
            if p.vectors.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.vectors.nrows(),
                });
            }
            let mut phases = Vec::with_capacity(d);
            let mut columns = Vec::with_capacity(d);
            for sector in [p.plus(), p.minus()] {
                if sector.ncols() == 0 {
                    continue;
                }
                let block = sector.adjoint() * u * &sector;
                let (ph, q) = linalg::unitary_eigen(&block);
                let lifted = &sector * q;
                phases.extend(ph);
                columns.extend(lifted.column_iter().map(|c| c.into_owned()));
            }
            (phases, CMatrix::from_columns(&columns))
        }
    };
    let observable = vectors.adjoint() * o0 * &vectors;

    let mut sorted = phases.clone();
    sorted.sort_by(f64::total_cmp);
    let mut min_phase_gap = f64::INFINITY;
    for w in sorted.windows(2) {
        min_phase_gap = min_phase_gap.min(w[1] - w[0]);
    }
    if let (Some(first), Some(last)) = (sorted.first(), sorted.last()) {
        if sorted.len() > 1 {
            min_phase_gap = min_phase_gap.min(first + std::f64::consts::TAU - last);
        }
    }

    let largest = observable.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let nonzero_terms = observable
        .iter()
        .filter(|z| z.norm() > NONZERO_TOL * largest)
        .count();

    let mut spectrum = Vec::with_capacity(d * d - 1);
    for k in 0..d {
        for l in (k + 1)..d {
            let w = observable[(k, l)].norm_sqr();
            spectrum.push(w);
            spectrum.push(w);
        }
    }
    let diag: DVector<f64> = DVector::from_fn(d, |k, _| observable[(k, k)].re);
    spectrum.push(diag.norm_squared() - diag.sum().powi(2) / d as f64);
    spectrum.resize(d * d - 1, 0.0);
    spectrum.sort_by(|a, b| b.total_cmp(a));

    Ok(AsymptoticSpectrum {
        entropy: spectral_entropy(&spectrum)?,
        spectrum,
        nonzero_terms,
        degenerate: min_phase_gap < DEGENERATE_PHASE_TOL,
        min_phase_gap,
        eigenvectors: vectors,
        phases,
        observable,
    })
}
