//! Kicked-top Floquet maps, their symmetries, and Heisenberg-picture
//! observable sequences.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles;
use crate::linalg::{self, CMatrix, C64};
use crate::spin::SpinSystem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    KickedTopTR,
    KickedTopNoTR,
    SampledUnitary,
}

/// One period of the driving.
#[derive(Clone, Debug)]
pub struct FloquetMap {
    unitary: CMatrix,
    kind: MapKind,
    params: BTreeMap<String, f64>,
}

impl FloquetMap {
    /// Wraps an externally sampled unitary (e.g. a COE or CUE draw).
    pub fn sampled(unitary: CMatrix) -> Self {
        Self {
            unitary,
            kind: MapKind::SampledUnitary,
            params: BTreeMap::new(),
        }
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }
}

/// U = e^{−iλJz²/(2j)} e^{−iαJx}: precession about x, then the kick.
pub fn kicked_top_tr(system: &SpinSystem, alpha: f64, lambda: f64) -> FloquetMap {
    let twist = system.jz() * system.jz() * C64::new(1.0 / (2.0 * system.j()), 0.0);
    let kick = linalg::exp_hermitian(&twist, lambda).expect("Jz² is Hermitian");
    let precession = linalg::exp_hermitian(system.jx(), alpha).expect("Jx is Hermitian");
    let mut params = BTreeMap::new();
    params.insert("alpha".to_owned(), alpha);
    params.insert("lambda".to_owned(), lambda);
    FloquetMap {
        unitary: kick * precession,
        kind: MapKind::KickedTopTR,
        params,
    }
}

/// Normalisation of the quadratic torsion terms in the three-axis top.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadraticScaling {
    /// λ J_i² / (2j), the same convention as the time-reversal-symmetric top.
    #[default]
    PerSpin,
    /// λ J_i² with no spin-dependent factor.
    Bare,
}

/// Parameters of the three-axis kicked top
/// U = e^{−i(λ₁Jx²·s + α₁Jx)} e^{−i(λ₂Jy²·s + α₂Jy)} e^{−i(λ₃Jz²·s + α₃Jz)}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoTrParams {
    pub lambda: [f64; 3],
    pub alpha: [f64; 3],
    pub scaling: QuadraticScaling,
}

impl Default for NoTrParams {
    /// Deep in the chaotic regime. Unequal linear terms avoid the extra
    /// axis-cycling symmetry that equal parameters carry.
    fn default() -> Self {
        Self {
            lambda: [7.0, 7.0, 7.0],
            alpha: [1.1, 1.0, 0.9],
            scaling: QuadraticScaling::PerSpin,
        }
    }
}

/// Kicked top without time-reversal symmetry.
pub fn kicked_top_no_tr(system: &SpinSystem, p: &NoTrParams) -> FloquetMap {
    let s = match p.scaling {
        QuadraticScaling::PerSpin => 1.0 / (2.0 * system.j()),
        QuadraticScaling::Bare => 1.0,
    };
    let axes = [system.jx(), system.jy(), system.jz()];
    let mut u = CMatrix::identity(system.dim(), system.dim());
    for (axis, (&lam, &alpha)) in axes.iter().zip(p.lambda.iter().zip(p.alpha.iter())) {
        let generator = *axis * *axis * C64::new(lam * s, 0.0) + *axis * C64::new(alpha, 0.0);
        u *= linalg::exp_hermitian(&generator, 1.0).expect("generator is Hermitian");
    }
    let mut params = BTreeMap::new();
    for (i, name) in ["1", "2", "3"].iter().enumerate() {
        params.insert(format!("lambda{name}"), p.lambda[i]);
        params.insert(format!("alpha{name}"), p.alpha[i]);
    }
    FloquetMap {
        unitary: u,
        kind: MapKind::KickedTopNoTR,
        params,
    }
}

/// ‖T U T⁻¹ − U†‖_F for T = e^{iαJx} K, i.e. ‖e^{iαJx} Ū e^{−iαJx} − U†‖_F.
pub fn time_reversal_residual(map: &FloquetMap, system: &SpinSystem, alpha: f64) -> f64 {
    let v = linalg::exp_hermitian(system.jx(), -alpha).expect("Jx is Hermitian");
    let reversed = &v * map.unitary().conjugate() * v.adjoint();
    linalg::frobenius(&(reversed - map.unitary().adjoint()))
}

/// R = e^{−iπJx}
pub fn parity_operator(system: &SpinSystem) -> CMatrix {
    linalg::exp_hermitian(system.jx(), PI).expect("Jx is Hermitian")
}

/// Heisenberg-picture observables O_i, i = 1..n.
#[derive(Clone, Debug)]
pub struct ObservableSequence {
    pub initial: CMatrix,
    pub observables: Vec<CMatrix>,
}

impl ObservableSequence {
    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }
}

/// O_i = U† O_{i−1} U by iterated conjugation.
pub fn heisenberg_sequence(map: &FloquetMap, o0: &CMatrix, n: usize) -> Result<ObservableSequence> {
    if n == 0 {
        return Err(Error::NoKicks);
    }
    let observables = Driving::Repeated(map.unitary().clone())
        .observables(o0.clone(), 0)
        .take(n)
        .collect();
    Ok(ObservableSequence {
        initial: o0.clone(),
        observables,
    })
}

/// O_i = V_i† O_{i−1} V_i with an independent Haar unitary V_i at every step.
///
/// The effective evolution after i steps is the product V_1 V_2 ⋯ V_i.
pub fn per_step_haar_sequence<R: Rng + ?Sized>(
    system: &SpinSystem,
    o0: &CMatrix,
    n: usize,
    rng: &mut R,
) -> Result<ObservableSequence> {
    if n == 0 {
        return Err(Error::NoKicks);
    }
    let d = system.dim();
    let mut current = o0.clone();
    let mut observables = Vec::with_capacity(n);
    for _ in 0..n {
        let v = ensembles::sample_haar(d, rng)?;
        current = linalg::conjugate_by(&current, &v);
        observables.push(current.clone());
    }
    Ok(ObservableSequence {
        initial: o0.clone(),
        observables,
    })
}

/// Source of the per-kick unitaries, consumed lazily by the tomography
/// engine so that long records never materialise the full sequence.
#[derive(Clone, Debug)]
pub enum Driving {
    /// The same Floquet unitary every kick.
    Repeated(CMatrix),
    /// A fresh Haar unitary of the given dimension every kick.
    HaarPerStep { dim: usize },
}

impl Driving {
    pub fn from_map(map: &FloquetMap) -> Self {
        Self::Repeated(map.unitary().clone())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Repeated(u) => u.nrows(),
            Self::HaarPerStep { dim } => *dim,
        }
    }

    /// Infinite stream of O_1, O_2, …; `seed` drives the per-step unitaries
    /// and is ignored for repeated maps.
    pub fn observables(&self, o0: CMatrix, seed: u64) -> ObservableStream {
        ObservableStream {
            driving: self.clone(),
            current: o0,
            rng: crate::rng::task_rng(seed, 0),
        }
    }
}

pub struct ObservableStream {
    driving: Driving,
    current: CMatrix,
    rng: crate::rng::TaskRng,
}

impl Iterator for ObservableStream {
    type Item = CMatrix;

    fn next(&mut self) -> Option<CMatrix> {
        let next = match &self.driving {
            Driving::Repeated(u) => linalg::conjugate_by(&self.current, u),
            Driving::HaarPerStep { dim } => {
                let v = ensembles::sample_haar(*dim, &mut self.rng).expect("dim ≥ 2");
                linalg::conjugate_by(&self.current, &v)
            }
        };
        self.current = next;
        Some(self.current.clone())
    }
}
