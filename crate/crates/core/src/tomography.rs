//! Simulated measurement records and their inversion.
//!
//! The record is the linear model M = Õ r + σW, with Õ_{iα} = Tr(O_i E_α).
//! The inverse covariance ÕᵀÕ (in units of 1/σ²) is accumulated kick by
//! kick; at each evaluation point it is eigendecomposed once and shared by
//! every state being reconstructed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::floquet::{Driving, ObservableSequence};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::metrics::{self, MetricsPoint};
use crate::rng::task_rng;
use crate::spin::{BlochVector, DensityMatrix, OperatorBasis};
use crate::{Error, Result};

/// Eigenvalues of ÕᵀÕ below this fraction of the largest are treated as
/// unmeasured directions.
pub const PINV_REL_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    /// M_i, one per kick.
    pub values: DVector<f64>,
    /// Õ, n × (d² − 1).
    pub design: DMatrix<f64>,
    /// Tr(O_i)/d, the part of each record value not carried by r.
    pub offsets: DVector<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be a finite non-negative number, got {sigma}"),
        });
    }
    Ok(())
}

/// M_i = Tr(O_i ρ₀) + σ w_i with w_i iid standard normal.
pub fn simulate_record(
    seq: &ObservableSequence,
    rho0: &DensityMatrix,
    basis: &OperatorBasis,
    sigma: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    check_sigma(sigma)?;
    let d = basis.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    let n = seq.len();
    let mut rng = task_rng(seed, 0);
    let mut design = DMatrix::zeros(n, basis.len());
    let mut values = DVector::zeros(n);
    let mut offsets = DVector::zeros(n);
    for (i, o) in seq.observables.iter().enumerate() {
        let row = basis.coordinates(o)?;
        design.row_mut(i).copy_from(&row.transpose());
        let w: f64 = rng.sample(StandardNormal);
        values[i] = rho0.expectation(o) + sigma * w;
        offsets[i] = o.trace().re / d as f64;
    }
    Ok(MeasurementRecord {
        values,
        design,
        offsets,
        sigma,
        seed,
    })
}

/// Spectral summary of the inverse covariance ÕᵀÕ.
#[derive(Clone, Debug)]
pub struct CovarianceSummary {
    pub inv_cov: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub rank: usize,
    pub records: usize,
    /// Absolute eigenvalue cutoff that defined `rank`.
    pub cutoff: f64,
}

impl CovarianceSummary {
    pub fn from_gram(inv_cov: DMatrix<f64>, records: usize, rel_threshold: f64) -> Self {
        let (eigenvalues, eigenvectors) = linalg::eigh_real_desc(&inv_cov);
        let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let cutoff = rel_threshold * top;
        let rank = if top > 0.0 {
            eigenvalues.iter().take_while(|&&e| e > cutoff).count()
        } else {
            0
        };
        Self {
            inv_cov,
            eigenvalues,
            eigenvectors,
            rank,
            records,
            cutoff,
        }
    }

    pub fn dim(&self) -> usize {
        self.inv_cov.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.inv_cov.trace()
    }

    /// Eigenvalues of the measured subspace.
    pub fn measured_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.rank]
    }

    /// (ÕᵀÕ)⁺ v
    pub fn pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let basis = self.eigenvectors.columns(0, self.rank);
        let mut proj = basis.tr_mul(v);
        for (k, c) in proj.iter_mut().enumerate() {
            *c /= self.eigenvalues[k];
        }
        basis * proj
    }
}

/// Unconstrained maximum-likelihood estimate via the pseudo-inverse.
pub fn invert_record(rec: &MeasurementRecord) -> Result<(BlochVector, CovarianceSummary)> {
    invert_record_with(rec, PINV_REL_THRESHOLD)
}

pub fn invert_record_with(
    rec: &MeasurementRecord,
    rel_threshold: f64,
) -> Result<(BlochVector, CovarianceSummary)> {
    if rec.is_empty() || rec.design.iter().all(|&x| x == 0.0) {
        return Err(Error::NoInformation);
    }
    let gram = rec.design.tr_mul(&rec.design);
    let cov = CovarianceSummary::from_gram(gram, rec.len(), rel_threshold);
    let rhs = rec.design.tr_mul(&(&rec.values - &rec.offsets));
    Ok((BlochVector(cov.pinv_apply(&rhs)), cov))
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x - shift).max(0.0)).collect()
}

/// Closest density matrix in Frobenius norm with the same eigenvectors: the
/// spectrum of I/d + Σ r_α E_α is projected onto the simplex.
pub fn project_to_physical(r: &BlochVector, basis: &OperatorBasis) -> Result<DensityMatrix> {
    let rho = basis.pack(r)?;
    Ok(project_matrix(&rho))
}

pub(crate) fn project_matrix(rho: &CMatrix) -> DensityMatrix {
    let (values, vectors) = linalg::eigh(rho);
    let p = project_simplex(&values);
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::new(p[j], 0.0);
    }
    let out = scaled * vectors.adjoint();
    // restore exact Hermiticity lost to roundoff in the product
    let out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(out).expect("simplex projection yields a unit-trace Hermitian matrix")
}

/// How the unconstrained estimate is turned into a physical state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Spectrum of ρ_ML projected onto the simplex (Frobenius-closest).
    Projected,
    /// Likelihood maximised over physical states: minimises
    /// (r − r_ML)ᵀ ÕᵀÕ (r − r_ML) subject to ρ ≥ 0, the state closest to
    /// ρ_ML in the metric set by the measurement.
    #[default]
    Constrained,
}

#[derive(Clone, Copy, Debug)]
pub struct ConstrainedOptions {
    pub max_iter: usize,
    /// Stop when the iterate moves less than this (Bloch-vector norm).
    pub tol: f64,
}

impl Default for ConstrainedOptions {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            tol: 1e-7,
        }
    }
}

/// Positivity-constrained least squares by accelerated projected gradient
/// with adaptive restart. `rhs` is Õᵀ(M − offsets).
pub fn constrained_estimate(
    cov: &CovarianceSummary,
    rhs: &DVector<f64>,
    basis: &OperatorBasis,
    opts: &ConstrainedOptions,
) -> Result<(DensityMatrix, usize)> {
    if cov.rank == 0 {
        return Err(Error::NoInformation);
    }
    let step = 1.0 / cov.eigenvalues[0];
    let start = BlochVector(cov.pinv_apply(rhs));
    let to_bloch = |rho: &DensityMatrix| BlochVector(basis.coordinates_unchecked(rho.matrix()));
    let mut x = to_bloch(&project_to_physical(&start, basis)?).0;
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut rho = basis.pack(&BlochVector(x.clone()))?;
    for it in 0..opts.max_iter {
        let grad = &cov.inv_cov * &y - rhs;
        let trial = BlochVector(&y - grad * step);
        let next_rho = project_to_physical(&trial, basis)?;
        let z = to_bloch(&next_rho).0;
        let moved = (&z - &x).norm();
        // gradient-based restart: momentum is pointing uphill
        let restart = (&y - &z).dot(&(&z - &x)) > 0.0;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if restart {
            y = z.clone();
            t = 1.0;
        } else {
            y = &z + (&z - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = z;
        rho = next_rho.into_matrix();
        if moved < opts.tol {
            return Ok((DensityMatrix::new(rho)?, it + 1));
        }
    }
    Ok((DensityMatrix::new(rho)?, opts.max_iter))
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub r_ml: BlochVector,
    pub rho_physical: DensityMatrix,
    pub fidelity: f64,
}

/// Physical estimate from accumulated normal equations.
pub fn reconstruct(
    cov: &CovarianceSummary,
    rhs: &DVector<f64>,
    basis: &OperatorBasis,
    estimator: Estimator,
) -> Result<(BlochVector, DensityMatrix)> {
    let r_ml = BlochVector(cov.pinv_apply(rhs));
    let rho = match estimator {
        Estimator::Projected => project_to_physical(&r_ml, basis)?,
        Estimator::Constrained => {
            constrained_estimate(cov, rhs, basis, &ConstrainedOptions::default())?.0
        }
    };
    Ok((r_ml, rho))
}

/// Running ÕᵀÕ. Rows are buffered and folded in with one matrix product
/// per batch, which is the same sum of rank-one updates done cache-friendly.
#[derive(Clone, Debug)]
pub struct GramAccumulator {
    gram: DMatrix<f64>,
    pending: Vec<f64>,
    pending_rows: usize,
    records: usize,
    batch: usize,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            gram: DMatrix::zeros(dim, dim),
            pending: Vec::new(),
            pending_rows: 0,
            records: 0,
            batch: 256,
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn push(&mut self, row: &DVector<f64>) {
        debug_assert_eq!(row.len(), self.dim());
        self.pending.extend(row.iter());
        self.pending_rows += 1;
        self.records += 1;
        if self.pending_rows >= self.batch {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending_rows == 0 {
            return;
        }
        let rows = DMatrix::from_row_slice(self.pending_rows, self.dim(), &self.pending);
        self.gram.gemm_tr(1.0, &rows, &rows, 1.0);
        self.pending.clear();
        self.pending_rows = 0;
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn gram(&mut self) -> &DMatrix<f64> {
        self.flush();
        &self.gram
    }

    /// Adds another accumulator's rows (records concatenate).
    pub fn merge(&mut self, other: &mut GramAccumulator) {
        other.flush();
        self.flush();
        self.gram += &other.gram;
        self.records += other.records;
    }

    pub fn summary(&mut self, rel_threshold: f64) -> CovarianceSummary {
        let records = self.records;
        CovarianceSummary::from_gram(self.gram().clone(), records, rel_threshold)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub sigma: f64,
    /// Kick counts at which to invert and report, ascending.
    pub checkpoints: Vec<usize>,
    pub estimator: Estimator,
    pub rel_threshold: f64,
    /// Seed of the detector-noise streams (one stream per state).
    pub noise_seed: u64,
    /// Seed of per-step random unitaries.
    pub driving_seed: u64,
}

impl RunOptions {
    pub fn every_kick(n: usize) -> Self {
        Self {
            checkpoints: (1..=n).collect(),
            ..Self::default()
        }
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            checkpoints: Vec::new(),
            estimator: Estimator::default(),
            rel_threshold: PINV_REL_THRESHOLD,
            noise_seed: 0,
            driving_seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub metrics: MetricsPoint,
    pub fidelities: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TomographyRun {
    pub checkpoints: Vec<Checkpoint>,
    /// Reconstructions at the last checkpoint, one per state.
    pub final_results: Vec<ReconstructionResult>,
    pub final_covariance: CovarianceSummary,
}

/// Drives the observable, records every state's signal, and reconstructs
/// all states at each checkpoint.
pub fn run_tomography(
    driving: &Driving,
    o0: &CMatrix,
    basis: &OperatorBasis,
    states: &[CVector],
    opts: &RunOptions,
) -> Result<TomographyRun> {
    check_sigma(opts.sigma)?;
    let d = basis.dim();
    if driving.dim() != d || o0.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if o0.nrows() != d {
                o0.nrows()
            } else {
                driving.dim()
            },
        });
    }
    if let Some(psi) = states.iter().find(|psi| psi.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: psi.len(),
        });
    }
    let n_max = match opts.checkpoints.last() {
        Some(&n) if n > 0 => n,
        _ => return Err(Error::NoKicks),
    };
    if opts.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "checkpoints",
            reason: "must be strictly increasing".into(),
        });
    }

    let mut gram = GramAccumulator::new(basis.len());
    let mut rhs: Vec<DVector<f64>> = vec![DVector::zeros(basis.len()); states.len()];
    let mut noise: Vec<_> = (0..states.len())
        .map(|s| task_rng(opts.noise_seed, s as u64))
        .collect();
    let mut stream = driving.observables(o0.clone(), opts.driving_seed);
    let mut next_checkpoint = opts.checkpoints.iter().peekable();
    let mut checkpoints = Vec::with_capacity(opts.checkpoints.len());
    let mut last: Option<(Vec<ReconstructionResult>, CovarianceSummary)> = None;

    for n in 1..=n_max {
        let o = stream.next().expect("observable stream is infinite");
        let row = basis.coordinates_unchecked(&o);
        let offset = o.trace().re / d as f64;
        for ((psi, b), rng) in states.iter().zip(rhs.iter_mut()).zip(noise.iter_mut()) {
            let signal = (psi.adjoint() * &o * psi)[(0, 0)].re;
            let w: f64 = rng.sample(StandardNormal);
            let m = signal + opts.sigma * w;
            b.axpy(m - offset, &row, 1.0);
        }
        gram.push(&row);

        if next_checkpoint.peek() == Some(&&n) {
            next_checkpoint.next();
            let cov = gram.summary(opts.rel_threshold);
            let results: Vec<ReconstructionResult> = states
                .par_iter()
                .zip(rhs.par_iter())
                .map(|(psi, b)| {
                    let (r_ml, rho) = reconstruct(&cov, b, basis, opts.estimator)?;
                    let fidelity = metrics::fidelity(psi, &rho)?;
                    Ok(ReconstructionResult {
                        r_ml,
                        rho_physical: rho,
                        fidelity,
                    })
                })
                .collect::<Result<_>>()?;
            let fidelities: Vec<f64> = results.iter().map(|r| r.fidelity).collect();
            let point = MetricsPoint::evaluate(n, &cov, opts.sigma, &fidelities)?;
            checkpoints.push(Checkpoint {
                metrics: point,
                fidelities,
            });
            last = Some((results, cov));
        }
    }
    let (final_results, final_covariance) = last.expect("at least one checkpoint");
    Ok(TomographyRun {
        checkpoints,
        final_results,
        final_covariance,
    })
}

/// ÕᵀÕ after `n` kicks, without any state or reconstruction.
pub fn accumulate_gram(
    driving: &Driving,
    o0: &CMatrix,
    basis: &OperatorBasis,
    n: usize,
    seed: u64,
) -> GramAccumulator {
    let mut gram = GramAccumulator::new(basis.len());
    for o in driving.observables(o0.clone(), seed).take(n) {
        gram.push(&basis.coordinates_unchecked(&o));
    }
    gram
}
