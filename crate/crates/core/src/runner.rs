//! Experiment configuration and orchestration.
//!
//! A run is described by a flat JSON object, executed deterministically from
//! its master seed, and written out as one CSV table plus one JSON summary.
//! Every random draw comes from a stream keyed by (seed, group, task index),
//! so the output does not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classical::{self, grid_coverage, trajectory_points, trajectory_scatter};
use crate::ensembles::{self, parity_eigenbasis, EnsembleKind, ParityBasis};
use crate::floquet::{
    kicked_top_no_tr, kicked_top_tr, Driving, FloquetMap, NoTrParams, QuadraticScaling,
};
use crate::metrics::{self, asymptotic_inv_covariance, MetricsPoint};
use crate::rng::{group_seed, subtask_rng};
use crate::spin::{random_pure_ket, OperatorBasis, SpinSystem};
use crate::tomography::{run_tomography, Estimator, RunOptions};
use crate::Error;

const GROUP_STATES: u64 = 1;
const GROUP_NOISE: u64 = 2;
const GROUP_ENSEMBLE: u64 = 3;
const GROUP_DRIVING: u64 = 4;
const GROUP_PORTRAIT: u64 = 5;

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [0.5, 2.5, 3.0, 7.0];

/// Points recorded before a trajectory counts as settled.
pub const PORTRAIT_TRANSIENT: usize = 25;
pub const SCATTER_NEIGHBOURS: usize = 4;
pub const SCATTER_MIN_POINTS: usize = 20;
pub const COVERAGE_GRID: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    PhasePortrait,
    FidelitySweep,
    EntropySweep,
    FisherSweep,
    EnsembleCompare,
    AnalyticTable,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Self::PhasePortrait,
        Self::FidelitySweep,
        Self::EntropySweep,
        Self::FisherSweep,
        Self::EnsembleCompare,
        Self::AnalyticTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PhasePortrait => "PhasePortrait",
            Self::FidelitySweep => "FidelitySweep",
            Self::EntropySweep => "EntropySweep",
            Self::FisherSweep => "FisherSweep",
            Self::EnsembleCompare => "EnsembleCompare",
            Self::AnalyticTable => "AnalyticTable",
        }
    }

    /// Stem of the output files.
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::PhasePortrait => "phase_portrait",
            Self::FidelitySweep => "fidelity_sweep",
            Self::EntropySweep => "entropy_sweep",
            Self::FisherSweep => "fisher_sweep",
            Self::EnsembleCompare => "ensemble_compare",
            Self::AnalyticTable => "analytic_table",
        }
    }

    fn default_kicks(self) -> usize {
        match self {
            Self::PhasePortrait => 500,
            Self::FidelitySweep => 100,
            Self::EntropySweep => 500,
            Self::FisherSweep => 200,
            Self::EnsembleCompare | Self::AnalyticTable => 1000,
        }
    }

    fn default_eval_every(self) -> usize {
        match self {
            Self::FidelitySweep => 25,
            Self::EntropySweep => 10,
            Self::FisherSweep => 1,
            Self::EnsembleCompare => 100,
            Self::PhasePortrait | Self::AnalyticTable => 1,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub j: f64,
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub lambda_list: Vec<f64>,
    pub n_kicks: usize,
    /// Kicks between evaluation points; the last kick is always evaluated.
    pub eval_every: usize,
    pub n_states: usize,
    pub sigma: f64,
    pub seed: u64,
    pub ensemble: EnsembleKind,
    pub n_samples: usize,
    /// Record length for the per-step Haar row of the analytic table.
    pub haar_kicks: usize,
    pub n_trajectories: usize,
    pub estimator: Estimator,
    pub output: Option<PathBuf>,
    /// Normalisation of the quadratic terms of the three-axis top.
    pub quadratic_scaling: QuadraticScaling,
}

impl ExperimentConfig {
    fn no_tr_params(&self) -> NoTrParams {
        NoTrParams {
            scaling: self.quadratic_scaling,
            ..NoTrParams::default()
        }
    }
}

const KNOWN_KEYS: [&str; 17] = [
    "experiment",
    "j",
    "alpha",
    "lambda",
    "lambda_list",
    "n_kicks",
    "eval_every",
    "n_states",
    "sigma",
    "seed",
    "ensemble",
    "n_samples",
    "haar_kicks",
    "n_trajectories",
    "estimator",
    "output",
    "quadratic_scaling",
];

/// Configuration problem, pointing at the offending key or text position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.to_owned()),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.field, self.line) {
            (Some(field), _) => write!(f, "config field `{field}`: {}", self.message),
            (None, Some(line)) => write!(
                f,
                "config line {line} column {}: {}",
                self.column.unwrap_or(0),
                self.message
            ),
            (None, None) => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn take<T: serde::de::DeserializeOwned>(
    map: &Map<String, Value>,
    key: &str,
) -> Result<Option<T>, ConfigError> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| ConfigError::field(key, e.to_string())),
    }
}

/// Parses a flat JSON object; `experiment` is required.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses a config, taking the experiment from `selected` when the document
/// does not name one. A document naming a different experiment is rejected.
pub fn parse_config_for(
    text: &str,
    selected: Option<Experiment>,
) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        field: None,
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(map) = value else {
        return Err(ConfigError {
            field: None,
            line: None,
            column: None,
            message: "expected a JSON object".into(),
        });
    };
    if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(ConfigError::field(key, "unknown key"));
    }

    let named: Option<Experiment> = take(&map, "experiment")?;
    let experiment = match (named, selected) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::field(
                "experiment",
                format!("config names {a} but {b} was requested"),
            ))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(ConfigError::field("experiment", "missing required key")),
    };

    let j: f64 = take(&map, "j")?.unwrap_or(10.0);
    SpinSystem::new(j).map_err(|e| ConfigError::field("j", e.to_string()))?;
    let alpha: f64 = take(&map, "alpha")?.unwrap_or(1.4);
    finite("alpha", alpha)?;
    let lambda: Option<f64> = take(&map, "lambda")?;
    if let Some(l) = lambda {
        finite("lambda", l)?;
    }
    let lambda_list: Option<Vec<f64>> = take(&map, "lambda_list")?;
    if let Some(list) = &lambda_list {
        if list.is_empty() {
            return Err(ConfigError::field("lambda_list", "must not be empty"));
        }
        for &l in list {
            finite("lambda_list", l)?;
        }
    }
    let n_kicks: usize = take(&map, "n_kicks")?.unwrap_or(experiment.default_kicks());
    positive("n_kicks", n_kicks)?;
    let eval_every: usize = take(&map, "eval_every")?.unwrap_or(experiment.default_eval_every());
    positive("eval_every", eval_every)?;
    let n_states: usize = take(&map, "n_states")?.unwrap_or(100);
    positive("n_states", n_states)?;
    let sigma: f64 = take(&map, "sigma")?.unwrap_or(0.0);
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ConfigError::field(
            "sigma",
            "must be finite and non-negative",
        ));
    }
    let seed: u64 = take(&map, "seed")?.unwrap_or(0);
    let ensemble: EnsembleKind = take(&map, "ensemble")?.unwrap_or(EnsembleKind::ParityBlockCOE);
    let n_samples: usize = take(&map, "n_samples")?.unwrap_or(100);
    positive("n_samples", n_samples)?;
    let haar_kicks: usize = take(&map, "haar_kicks")?.unwrap_or(20_000);
    positive("haar_kicks", haar_kicks)?;
    let n_trajectories: usize = take(&map, "n_trajectories")?.unwrap_or(50);
    positive("n_trajectories", n_trajectories)?;
    let estimator: Estimator = take(&map, "estimator")?.unwrap_or_default();
    let output: Option<PathBuf> = take(&map, "output")?;
    let quadratic_scaling: QuadraticScaling = take(&map, "quadratic_scaling")?.unwrap_or_default();

    let lambda_list = match (experiment, lambda_list) {
        (Experiment::FidelitySweep, None) => {
            return Err(ConfigError::field(
                "lambda_list",
                "required for FidelitySweep",
            ))
        }
        (_, Some(list)) => list,
        (_, None) => DEFAULT_LAMBDA_GRID.to_vec(),
    };
    if experiment == Experiment::PhasePortrait && lambda.is_none() {
        return Err(ConfigError::field("lambda", "required for PhasePortrait"));
    }
    let integer_spin = ((2.0 * j).round() as usize).is_multiple_of(2);
    let needs_parity = matches!(
        experiment,
        Experiment::EnsembleCompare | Experiment::AnalyticTable
    ) && (ensemble == EnsembleKind::ParityBlockCOE
        || experiment == Experiment::AnalyticTable);
    if needs_parity && !integer_spin {
        return Err(ConfigError::field(
            "j",
            "parity-block ensembles need integer spin",
        ));
    }

    Ok(ExperimentConfig {
        experiment,
        j,
        alpha,
        lambda,
        lambda_list,
        n_kicks,
        eval_every,
        n_states,
        sigma,
        seed,
        ensemble,
        n_samples,
        haar_kicks,
        n_trajectories,
        estimator,
        output,
        quadratic_scaling,
    })
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::field(field, "must be finite"))
    }
}

fn positive(field: &str, v: usize) -> Result<(), ConfigError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(ConfigError::field(field, "must be at least 1"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl RunnerError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

/// One comparison recorded in the summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// How `empirical` is compared: "abs_diff", "lower_bound",
    /// "upper_bound" or "ordering".
    pub comparison: String,
    pub analytic: Option<f64>,
    pub empirical: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn abs_diff(name: impl Into<String>, analytic: f64, empirical: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            comparison: "abs_diff".into(),
            analytic: Some(analytic),
            empirical,
            tolerance: Some(tolerance),
            pass: (empirical - analytic).abs() <= tolerance,
        }
    }

    fn lower_bound(name: impl Into<String>, bound: f64, empirical: f64) -> Self {
        Self {
            name: name.into(),
            comparison: "lower_bound".into(),
            analytic: None,
            empirical,
            tolerance: Some(bound),
            pass: empirical > bound,
        }
    }

    fn upper_bound(name: impl Into<String>, bound: f64, empirical: f64) -> Self {
        Self {
            name: name.into(),
            comparison: "upper_bound".into(),
            analytic: None,
            empirical,
            tolerance: Some(bound),
            pass: empirical < bound,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub seed: u64,
    pub csv: String,
    pub checks: Vec<Check>,
    /// Every check passed.
    pub pass: bool,
    /// Final values keyed by curve or row name.
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub csv: String,
    pub summary: Summary,
}

/// Runs an experiment and writes `<stem>.csv` and `<stem>_summary.json`
/// into `out_dir`. `workers` fixes the thread count of the pool used for
/// states and ensemble samples.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<ExperimentOutput, RunnerError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| RunnerError::Pool(e.to_string()))?;
    let (csv, checks, values) = pool.install(|| compute(config))?;

    let stem = config.experiment.file_stem();
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let summary_path = out_dir.join(format!("{stem}_summary.json"));
    let summary = Summary {
        experiment: config.experiment,
        seed: config.seed,
        csv: format!("{stem}.csv"),
        pass: checks.iter().all(|c| c.pass),
        checks,
        values,
    };
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunnerError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    std::fs::write(&csv_path, &csv).map_err(io(&csv_path))?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    std::fs::write(&summary_path, json + "\n").map_err(io(&summary_path))?;
    Ok(ExperimentOutput {
        csv_path,
        summary_path,
        csv,
        summary,
    })
}

type Computed = (String, Vec<Check>, BTreeMap<String, f64>);

fn compute(config: &ExperimentConfig) -> Result<Computed, Error> {
    match config.experiment {
        Experiment::PhasePortrait => phase_portrait(config),
        Experiment::FidelitySweep => fidelity_sweep(config),
        Experiment::EntropySweep => entropy_sweep(config),
        Experiment::FisherSweep => fisher_sweep(config),
        Experiment::EnsembleCompare => ensemble_compare(config),
        Experiment::AnalyticTable => analytic_table(config),
    }
}

/// Evaluation points eval_every, 2·eval_every, … and always n_kicks.
pub fn checkpoint_schedule(n_kicks: usize, eval_every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=n_kicks / eval_every).map(|k| k * eval_every).collect();
    if out.last() != Some(&n_kicks) {
        out.push(n_kicks);
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const METRICS_HEADER: &str =
    "curve,n,fidelity,fidelity_sem,entropy,fisher,log_inv_volume,trace_inv_cov,rank";

fn push_metrics_row(csv: &mut String, curve: &str, m: &MetricsPoint) {
    writeln!(
        csv,
        "{curve},{},{},{},{},{},{},{},{}",
        m.n,
        opt(m.fidelity),
        opt(m.fidelity_sem),
        m.entropy,
        m.fisher,
        m.log_inv_volume,
        m.trace_inv_cov,
        m.rank
    )
    .expect("writing to a String");
}

struct Setup {
    system: SpinSystem,
    basis: OperatorBasis,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self, Error> {
        let system = SpinSystem::new(config.j)?;
        let basis = OperatorBasis::gell_mann(system.dim())?;
        Ok(Self { system, basis })
    }

    fn curve(
        &self,
        driving: &Driving,
        config: &ExperimentConfig,
        states: &[crate::linalg::CVector],
        n_kicks: usize,
        eval_every: usize,
        driving_seed: u64,
    ) -> Result<Vec<MetricsPoint>, Error> {
        let opts = RunOptions {
            sigma: config.sigma,
            checkpoints: checkpoint_schedule(n_kicks, eval_every),
            estimator: config.estimator,
            noise_seed: group_seed(config.seed, GROUP_NOISE),
            driving_seed,
            ..RunOptions::default()
        };
        let run = run_tomography(driving, self.system.jz(), &self.basis, states, &opts)?;
        Ok(run.checkpoints.into_iter().map(|c| c.metrics).collect())
    }
}

fn curve_name(lambda: f64) -> String {
    format!("lambda={lambda}")
}

fn phase_portrait(config: &ExperimentConfig) -> Result<Computed, Error> {
    let lambda = config.lambda.expect("validated");
    let mut rng = subtask_rng(config.seed, GROUP_PORTRAIT, 0);
    let points = classical::phase_portrait(
        config.alpha,
        lambda,
        config.n_trajectories,
        config.n_kicks,
        &mut rng,
    );
    let mut csv = String::from("traj_id,step,y,z\n");
    for p in &points {
        writeln!(csv, "{},{},{},{}", p.traj_id, p.step, p.y, p.z).expect("writing to a String");
    }
    let mut worst: f64 = 0.0;
    let mut measured = 0usize;
    for id in 0..config.n_trajectories {
        let traj = trajectory_points(&points, id, PORTRAIT_TRANSIENT);
        if let Some(s) = trajectory_scatter(&traj, SCATTER_NEIGHBOURS, SCATTER_MIN_POINTS) {
            worst = worst.max(s);
            measured += 1;
        }
    }
    let all: Vec<(f64, f64)> = points.iter().map(|p| (p.y, p.z)).collect();
    let coverage = grid_coverage(&all, COVERAGE_GRID);
    let checks = vec![
        Check::upper_bound("max_trajectory_scatter", 0.05, worst),
        Check::lower_bound("grid_coverage", 0.8, coverage),
    ];
    let mut values = BTreeMap::new();
    values.insert("max_trajectory_scatter".into(), worst);
    values.insert("grid_coverage".into(), coverage);
    values.insert("trajectories_measured".into(), measured as f64);
    values.insert("points".into(), points.len() as f64);
    Ok((csv, checks, values))
}

fn sweep_states(
    setup: &Setup,
    config: &ExperimentConfig,
) -> Result<Vec<crate::linalg::CVector>, Error> {
    (0..config.n_states)
        .into_par_iter()
        .map(|s| {
            let mut rng = subtask_rng(config.seed, GROUP_STATES, s as u64);
            random_pure_ket(setup.system.dim(), &mut rng)
        })
        .collect()
}

fn fidelity_sweep(config: &ExperimentConfig) -> Result<Computed, Error> {
    let setup = Setup::new(config)?;
    let states = sweep_states(&setup, config)?;
    let mut csv = format!("{METRICS_HEADER}\n");
    let mut finals = Vec::new();
    let mut values = BTreeMap::new();
    for &lambda in &config.lambda_list {
        let map = kicked_top_tr(&setup.system, config.alpha, lambda);
        let curve = setup.curve(
            &Driving::from_map(&map),
            config,
            &states,
            config.n_kicks,
            config.eval_every,
            0,
        )?;
        let name = curve_name(lambda);
        for m in &curve {
            push_metrics_row(&mut csv, &name, m);
        }
        let last = curve.last().expect("at least one checkpoint");
        let (f, sem) = (
            last.fidelity.expect("states given"),
            last.fidelity_sem.unwrap_or(0.0),
        );
        values.insert(format!("fidelity[{name}]"), f);
        finals.push((lambda, f, sem));
    }
    let mut checks = Vec::new();
    let mut ordered = finals.clone();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in ordered.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let gap = hi.1 - lo.1;
        let se = (lo.2 * lo.2 + hi.2 * hi.2).sqrt();
        checks.push(Check {
            name: format!(
                "fidelity_order[{} > {}]",
                curve_name(hi.0),
                curve_name(lo.0)
            ),
            comparison: "ordering".into(),
            analytic: None,
            empirical: gap,
            tolerance: Some(se),
            pass: gap > se,
        });
    }
    Ok((csv, checks, values))
}

/// Curves shared by the entropy and Fisher sweeps: the time-reversal
/// symmetric top at every λ, the three-axis top and per-step Haar driving.
fn standard_curves(
    setup: &Setup,
    config: &ExperimentConfig,
) -> Vec<(String, Driving, Option<FloquetMap>)> {
    let mut curves: Vec<(String, Driving, Option<FloquetMap>)> = config
        .lambda_list
        .iter()
        .map(|&lambda| {
            let map = kicked_top_tr(&setup.system, config.alpha, lambda);
            (curve_name(lambda), Driving::from_map(&map), Some(map))
        })
        .collect();
    let no_tr = kicked_top_no_tr(&setup.system, &config.no_tr_params());
    curves.push((
        "no_time_reversal".into(),
        Driving::from_map(&no_tr),
        Some(no_tr),
    ));
    curves.push((
        "haar_per_step".into(),
        Driving::HaarPerStep {
            dim: setup.system.dim(),
        },
        None,
    ));
    curves
}

fn parity_if_integer(system: &SpinSystem) -> Result<Option<ParityBasis>, Error> {
    if system.is_integer_spin() {
        parity_eigenbasis(system).map(Some)
    } else {
        Ok(None)
    }
}

fn entropy_sweep(config: &ExperimentConfig) -> Result<Computed, Error> {
    let setup = Setup::new(config)?;
    let parity = parity_if_integer(&setup.system)?;
    let d = setup.system.dim();
    let mut csv = format!("{METRICS_HEADER}\n");
    let mut checks = Vec::new();
    let mut values = BTreeMap::new();
    for (name, driving, map) in standard_curves(&setup, config) {
        let curve = setup.curve(
            &driving,
            config,
            &[],
            config.n_kicks,
            config.eval_every,
            group_seed(config.seed, GROUP_DRIVING),
        )?;
        for m in &curve {
            push_metrics_row(&mut csv, &name, m);
        }
        let last = curve.last().expect("at least one checkpoint");
        values.insert(format!("entropy[{name}]"), last.entropy);
        let analytic = match &map {
            Some(map) => {
                let p = if map.kind() == crate::floquet::MapKind::KickedTopTR {
                    parity.as_ref()
                } else {
                    None
                };
                asymptotic_inv_covariance(map, setup.system.jz(), p)?.entropy
            }
            None => ((d * d - 1) as f64).ln(),
        };
        values.insert(format!("predicted_entropy[{name}]"), analytic);
        checks.push(Check::abs_diff(
            format!("asymptotic_entropy[{name}]"),
            analytic,
            last.entropy,
            0.15,
        ));
    }
    Ok((csv, checks, values))
}

fn fisher_sweep(config: &ExperimentConfig) -> Result<Computed, Error> {
    let setup = Setup::new(config)?;
    let mut csv = format!("{METRICS_HEADER}\n");
    let mut by_lambda = Vec::new();
    let mut values = BTreeMap::new();
    for (name, driving, map) in standard_curves(&setup, config) {
        let curve = setup.curve(
            &driving,
            config,
            &[],
            config.n_kicks,
            config.eval_every,
            group_seed(config.seed, GROUP_DRIVING),
        )?;
        for m in &curve {
            push_metrics_row(&mut csv, &name, m);
        }
        let last = curve.last().expect("at least one checkpoint");
        values.insert(format!("fisher[{name}]"), last.fisher);
        if let Some(lambda) = map.as_ref().and_then(|m| m.param("lambda")) {
            by_lambda.push((lambda, curve));
        }
    }
    let mut checks = Vec::new();
    by_lambda.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let (Some(low), Some(high)) = (by_lambda.first(), by_lambda.last()) {
        if high.0 > low.0 {
            let ratio = high
                .1
                .iter()
                .zip(&low.1)
                .filter(|(h, _)| h.n >= 20)
                .map(|(h, l)| h.fisher / l.fisher)
                .fold(f64::INFINITY, f64::min);
            if ratio.is_finite() {
                checks.push(Check::lower_bound(
                    format!(
                        "fisher_ratio_min_n20[{} / {}]",
                        curve_name(high.0),
                        curve_name(low.0)
                    ),
                    1.0,
                    ratio,
                ));
            }
        }
    }
    Ok((csv, checks, values))
}

/// Entropy curves for `n_samples` draws of an ensemble, in sample order.
fn ensemble_curves(
    setup: &Setup,
    config: &ExperimentConfig,
    kind: EnsembleKind,
    parity: Option<&ParityBasis>,
    n_kicks: usize,
    eval_every: usize,
) -> Result<Vec<Vec<MetricsPoint>>, Error> {
    let group = GROUP_ENSEMBLE * 16 + kind as u64;
    (0..config.n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = subtask_rng(config.seed, group, s as u64);
            let driving = match kind {
                EnsembleKind::HaarPerStep => Driving::HaarPerStep {
                    dim: setup.system.dim(),
                },
                _ => Driving::Repeated(ensembles::sample_unitary(
                    kind,
                    &setup.system,
                    parity,
                    &mut rng,
                )?),
            };
            let driving_seed = group_seed(group_seed(config.seed, group), s as u64 + 1);
            setup.curve(&driving, config, &[], n_kicks, eval_every, driving_seed)
        })
        .collect()
}

fn mean_curve(curves: &[Vec<MetricsPoint>]) -> Vec<(usize, f64, f64)> {
    let len = curves.first().map_or(0, |c| c.len());
    (0..len)
        .map(|k| {
            let xs: Vec<f64> = curves.iter().map(|c| c[k].entropy).collect();
            let (m, s) = metrics::mean_and_sem(&xs).expect("non-empty");
            (curves[0][k].n, m, s)
        })
        .collect()
}

/// The single map whose entropy should track the ensemble.
fn companion_map(
    setup: &Setup,
    config: &ExperimentConfig,
    kind: EnsembleKind,
) -> Option<FloquetMap> {
    let lambda = config.lambda.unwrap_or(7.0);
    match kind {
        EnsembleKind::ParityBlockCOE | EnsembleKind::COE => {
            Some(kicked_top_tr(&setup.system, config.alpha, lambda))
        }
        EnsembleKind::CUE => Some(kicked_top_no_tr(&setup.system, &config.no_tr_params())),
        EnsembleKind::HaarPerStep => None,
    }
}

fn ensemble_compare(config: &ExperimentConfig) -> Result<Computed, Error> {
    let setup = Setup::new(config)?;
    let parity = parity_if_integer(&setup.system)?;
    let kind = config.ensemble;
    let d = setup.system.dim();
    let mut csv = String::from("curve,n,entropy,entropy_sem,samples\n");
    let mut values = BTreeMap::new();
    let mut checks = Vec::new();

    let samples = ensemble_curves(
        &setup,
        config,
        kind,
        parity.as_ref(),
        config.n_kicks,
        config.eval_every,
    )?;
    let mean = mean_curve(&samples);
    let ensemble_name = format!("ensemble[{}]", kind.name());
    for &(n, m, s) in &mean {
        writeln!(csv, "{ensemble_name},{n},{m},{s},{}", samples.len())
            .expect("writing to a String");
    }
    let &(_, ens_final, _) = mean.last().expect("at least one checkpoint");
    values.insert(format!("entropy[{ensemble_name}]"), ens_final);

    if let Some(map) = companion_map(&setup, config, kind) {
        let curve = setup.curve(
            &Driving::from_map(&map),
            config,
            &[],
            config.n_kicks,
            config.eval_every,
            0,
        )?;
        let name = match map.kind() {
            crate::floquet::MapKind::KickedTopTR => "kicked_top",
            _ => "kicked_top_no_time_reversal",
        };
        for m in &curve {
            writeln!(csv, "{name},{},{},,1", m.n, m.entropy).expect("writing to a String");
        }
        let last = curve.last().expect("at least one checkpoint").entropy;
        values.insert(format!("entropy[{name}]"), last);
        checks.push(Check::abs_diff(
            format!("{name}_vs_ensemble"),
            ens_final,
            last,
            0.15,
        ));
    }
    if let Ok(w) = ensembles::wootters_entropy_prediction(kind, d) {
        values.insert("wootters".into(), w);
        checks.push(Check::abs_diff("ensemble_vs_wootters", w, ens_final, 0.07));
    }
    Ok((csv, checks, values))
}

fn analytic_table(config: &ExperimentConfig) -> Result<Computed, Error> {
    let setup = Setup::new(config)?;
    let parity = parity_if_integer(&setup.system)?;
    let d = setup.system.dim();
    let mut csv = String::from("row,analytic,empirical,empirical_sem,n_kicks,samples\n");
    let mut values = BTreeMap::new();
    let mut checks = Vec::new();

    for kind in [
        EnsembleKind::ParityBlockCOE,
        EnsembleKind::CUE,
        EnsembleKind::HaarPerStep,
    ] {
        let analytic = ensembles::wootters_entropy_prediction(kind, d)?;
        let (n_kicks, samples) = match kind {
            EnsembleKind::HaarPerStep => (config.haar_kicks, 1),
            _ => (config.n_kicks, config.n_samples),
        };
        let sub = ExperimentConfig {
            n_samples: samples,
            ..config.clone()
        };
        let curves = ensemble_curves(&setup, &sub, kind, parity.as_ref(), n_kicks, n_kicks)?;
        let &(_, m, s) = mean_curve(&curves).last().expect("one checkpoint");
        writeln!(
            csv,
            "{},{analytic},{m},{s},{n_kicks},{samples}",
            kind.name()
        )
        .expect("writing to a String");
        values.insert(format!("wootters[{}]", kind.name()), analytic);
        values.insert(format!("entropy[{}]", kind.name()), m);
        checks.push(match kind {
            EnsembleKind::HaarPerStep => {
                Check::lower_bound(format!("{}_saturation", kind.name()), analytic - 0.02, m)
            }
            _ => Check::abs_diff(format!("{}_vs_wootters", kind.name()), analytic, m, 0.07),
        });
    }

    let lambda = config.lambda.unwrap_or(7.0);
    let companions = [
        (
            "KickedTopTR",
            kicked_top_tr(&setup.system, config.alpha, lambda),
            parity.as_ref(),
        ),
        (
            "KickedTopNoTR",
            kicked_top_no_tr(&setup.system, &config.no_tr_params()),
            None,
        ),
    ];
    for (row, map, p) in companions {
        let predicted = asymptotic_inv_covariance(&map, setup.system.jz(), p)?.entropy;
        let curve = setup.curve(
            &Driving::from_map(&map),
            config,
            &[],
            config.n_kicks,
            config.n_kicks,
            0,
        )?;
        let empirical = curve.last().expect("one checkpoint").entropy;
        writeln!(csv, "{row},{predicted},{empirical},,{},1", config.n_kicks)
            .expect("writing to a String");
        values.insert(format!("predicted_entropy[{row}]"), predicted);
        values.insert(format!("entropy[{row}]"), empirical);
        checks.push(Check::abs_diff(
            format!("{row}_vs_prediction"),
            predicted,
            empirical,
            0.15,
        ));
    }
    Ok((csv, checks, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(r#"{"experiment":"PhasePortrait","lambda":0.5}"#).unwrap();
        assert_eq!(c.j, 10.0);
        assert_eq!(c.alpha, 1.4);
        assert_eq!(c.sigma, 0.0);
        assert_eq!(c.n_states, 100);
        assert_eq!(c.lambda, Some(0.5));
        assert_eq!(c.n_trajectories, 50);
        assert_eq!(c.quadratic_scaling, QuadraticScaling::PerSpin);
    }

    #[test]
    fn quadratic_scaling_flag() {
        let c =
            parse_config(r#"{"experiment":"EntropySweep","quadratic_scaling":"Bare"}"#).unwrap();
        assert_eq!(c.no_tr_params().scaling, QuadraticScaling::Bare);
        let e = parse_config(r#"{"experiment":"EntropySweep","quadratic_scaling":"Half"}"#)
            .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("quadratic_scaling"));
    }

    #[test]
    fn missing_lambda_list_is_named() {
        let e = parse_config(r#"{"experiment":"FidelitySweep"}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("lambda_list"));
    }

    #[test]
    fn negative_spin_is_rejected() {
        let e = parse_config(r#"{"j": -1}"#).unwrap_err();
        assert!(e.field.is_some());
        let e = parse_config_for(r#"{"j": -1}"#, Some(Experiment::EntropySweep)).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("j"));
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let e = parse_config(r#"{"experiment":"EntropySweep","kicks":3}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("kicks"));
        let e = parse_config(r#"{"experiment":"EntropySweep","n_kicks":-3}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("n_kicks"));
        let e = parse_config(r#"{"experiment":"EntropySweep","n_states":0}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("n_states"));
        let e = parse_config("{\n \"experiment\": \n}").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_config("[1, 2]").unwrap_err();
        assert!(e.field.is_none());
    }

    #[test]
    fn selected_experiment_must_agree() {
        let c = parse_config_for(r#"{"lambda":7}"#, Some(Experiment::PhasePortrait)).unwrap();
        assert_eq!(c.experiment, Experiment::PhasePortrait);
        let e = parse_config_for(
            r#"{"experiment":"EntropySweep"}"#,
            Some(Experiment::FisherSweep),
        )
        .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("experiment"));
    }

    #[test]
    fn half_integer_spin_cannot_use_parity_blocks() {
        let e = parse_config(r#"{"experiment":"EnsembleCompare","j":2.5}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("j"));
        assert!(
            parse_config(r#"{"experiment":"EnsembleCompare","j":2.5,"ensemble":"CUE"}"#).is_ok()
        );
    }

    #[test]
    fn schedule_ends_at_last_kick() {
        assert_eq!(checkpoint_schedule(10, 4), vec![4, 8, 10]);
        assert_eq!(checkpoint_schedule(9, 3), vec![3, 6, 9]);
        assert_eq!(checkpoint_schedule(2, 5), vec![2]);
    }

    #[test]
    fn exit_codes() {
        let cfg = RunnerError::Config(ConfigError::field("j", "bad"));
        assert_eq!(cfg.exit_code(), 2);
        assert_eq!(RunnerError::Compute(Error::NoKicks).exit_code(), 1);
    }
}
