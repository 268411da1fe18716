//! Sweeps over the transverse field: energy and bond-entropy tables with
//! oracle columns, the optimised-parameter store, and the validation suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{self, OptimizeMode, OptimizedAnsatz, OptimizedRecord, OptimizerConfig};
use crate::circuit::{self, Basis, Circuit, Purpose, ShotRecord, LEAK_LABEL};
use crate::estimation::{self, Tomogram};
use crate::linalg::{self, CMatrix};
use crate::mps::{self, BoundaryState, MpsTensor, SelectionStatus};
use crate::noise::{self, NoiseModel};
use crate::tfim::{self, TfimParams};

mod validation;

pub use validation::{run_validation, run_validation_with, CheckResult, Fault, ValidationReport};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SweepError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub lambda_grid: Vec<f64>,
    pub n_b: usize,
    pub mode: OptimizeMode,
    pub shots: usize,
    pub noise: Option<NoiseModel>,
    pub zne: bool,
    pub postselect: bool,
    pub restricted_tomography: bool,
    /// Replace sampling by exact density-matrix expectations.
    pub exact: bool,
    pub seed: u64,
    pub burn_in_tol: f64,
    pub bootstrap_b: usize,
    pub format: OutputFormat,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_grid: energy_grid(),
            n_b: 1,
            mode: OptimizeMode::Ansatz,
            shots: 5000,
            noise: None,
            zne: false,
            postselect: false,
            restricted_tomography: false,
            exact: false,
            seed: 7,
            burn_in_tol: 1e-4,
            bootstrap_b: 1000,
            format: OutputFormat::Csv,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SweepError::Config(msg));
        if self.lambda_grid.is_empty() {
            return bad("empty lambda grid".into());
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return bad(format!("lambda {l} must be finite and non-negative"));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lambda grid must be strictly increasing".into());
        }
        if !(1..=2).contains(&self.n_b) {
            return bad(format!("n_b = {} (supported: 1, 2)", self.n_b));
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if !(self.burn_in_tol > 0.0 && self.burn_in_tol < 1.0) {
            return bad(format!("burn-in tolerance {} outside (0, 1)", self.burn_in_tol));
        }
        if self.bootstrap_b < 100 {
            return bad(format!("bootstrap size {} below 100", self.bootstrap_b));
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| SweepError::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn noise_model(&self) -> NoiseModel {
        self.noise.unwrap_or_else(NoiseModel::noiseless)
    }
}

/// `steps` evenly spaced points on `[min, max]`, rounded to 12 decimals so
/// that grid values print as their decimal form.
pub fn lambda_grid(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|k| {
                let t = k as f64 / (steps - 1) as f64;
                ((min + (max - min) * t) * 1e12).round() / 1e12
            })
            .collect(),
    }
}

pub fn energy_grid() -> Vec<f64> {
    lambda_grid(0.0, 2.0, 11)
}

pub fn entropy_grid_chi2() -> Vec<f64> {
    lambda_grid(0.2, 2.0, 10)
}

pub fn entropy_grid_chi4() -> Vec<f64> {
    vec![1.01, 1.05, 1.1, 1.15, 1.2]
}

// ---------------------------------------------------------------------------
// Parameter store

const BUNDLED: &str = include_str!("../data/optimized_params.json");

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ParamKey {
    lambda: String,
    n_b: usize,
    mode: String,
}

impl ParamKey {
    fn new(lambda: f64, n_b: usize, mode: OptimizeMode) -> Self {
        Self { lambda: format!("{lambda:.9}"), n_b, mode: mode.to_string() }
    }
}

/// Optimised parameters keyed by `(λ, n_b, mode)`. Starts from the table
/// shipped with the crate; missing entries are optimised on demand.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    records: BTreeMap<ParamKey, OptimizedRecord>,
    optimizer: OptimizerConfig,
}

impl ParamStore {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bundled() -> Self {
        let mut store = Self::empty();
        let records: Vec<OptimizedRecord> = serde_json::from_str(BUNDLED).expect("bundled parameter table parses");
        store.extend(records);
        store
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerConfig) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = OptimizedRecord>) {
        for r in records {
            self.records.insert(ParamKey::new(r.lambda, r.n_b, r.mode), r);
        }
    }

    /// Merge a cache file if it exists.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        if path.exists() {
            let records: Vec<OptimizedRecord> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            self.extend(records);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let records: Vec<&OptimizedRecord> = self.records.values().collect();
        serde_json::to_string_pretty(&records).expect("records serialise") + "\n"
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, lambda: f64, n_b: usize, mode: OptimizeMode) -> Option<OptimizedAnsatz> {
        let record = self.records.get(&ParamKey::new(lambda, n_b, mode))?;
        OptimizedAnsatz::from_record(record).ok()
    }

    /// Look up or optimise every requested point; new results are stored.
    /// Returns one entry per point in input order.
    pub fn ensure(&mut self, points: &[(f64, usize, OptimizeMode)]) -> Vec<std::result::Result<OptimizedAnsatz, String>> {
        let missing: Vec<(f64, usize, OptimizeMode)> = {
            let mut seen = std::collections::BTreeSet::new();
            points
                .iter()
                .filter(|&&(l, n, m)| self.get(l, n, m).is_none() && seen.insert(ParamKey::new(l, n, m)))
                .copied()
                .collect()
        };
        let fresh: Vec<_> = missing
            .par_iter()
            .map(|&(l, n, m)| ansatz::variational_optimize(l, n, m, &self.optimizer))
            .collect();
        let mut failures = BTreeMap::new();
        for (&(l, n, m), result) in missing.iter().zip(fresh) {
            match result {
                Ok(opt) => self.extend([opt.record()]),
                Err(e) => {
                    failures.insert(ParamKey::new(l, n, m), e.to_string());
                }
            }
        }
        points
            .iter()
            .map(|&(l, n, m)| match failures.get(&ParamKey::new(l, n, m)) {
                Some(e) => Err(e.clone()),
                None => self.get(l, n, m).ok_or_else(|| "stored record failed to rebuild".to_string()),
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Result rows

/// One λ point of a sweep. Energy sweeps fill `e*`, entropy sweeps fill
/// `entropy*`; `raw`/`folded` hold the unmitigated and noise-amplified tiers
/// of whichever quantity the sweep measures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub chi: usize,
    pub e: Option<f64>,
    pub e_sigma: Option<f64>,
    pub entropy: Option<f64>,
    pub entropy_sigma: Option<f64>,
    pub mitigated: bool,
    pub retention: Option<f64>,
    pub shots: usize,
    pub iterations: Option<usize>,
    pub raw: Option<f64>,
    pub raw_sigma: Option<f64>,
    pub folded: Option<f64>,
    pub folded_sigma: Option<f64>,
    /// Classical MPS value for the circuit as built (finite `j`, same boundary).
    pub mps_circuit: Option<f64>,
    /// Classical MPS bulk value at the channel fixed point.
    pub mps_bulk: Option<f64>,
    /// Thermodynamic-limit oracle: exact energy density or high-χ entropy.
    pub oracle: Option<f64>,
    pub boundary: Option<String>,
    pub symmetry_warning: Option<bool>,
    pub error: Option<String>,
    pub schmidt_spectrum: Option<Vec<f64>>,
    pub mps_schmidt_spectrum: Option<Vec<f64>>,
}

const CSV_COLUMNS: [&str; 20] = [
    "lambda",
    "chi",
    "e",
    "e_sigma",
    "entropy",
    "entropy_sigma",
    "mitigated",
    "retention",
    "shots",
    "iterations",
    "raw",
    "raw_sigma",
    "folded",
    "folded_sigma",
    "mps_circuit",
    "mps_bulk",
    "oracle",
    "boundary",
    "symmetry_warning",
    "error",
];

fn cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            r.lambda.to_string(),
            r.chi.to_string(),
            cell(&r.e),
            cell(&r.e_sigma),
            cell(&r.entropy),
            cell(&r.entropy_sigma),
            r.mitigated.to_string(),
            cell(&r.retention),
            r.shots.to_string(),
            cell(&r.iterations),
            cell(&r.raw),
            cell(&r.raw_sigma),
            cell(&r.folded),
            cell(&r.folded_sigma),
            cell(&r.mps_circuit),
            cell(&r.mps_bulk),
            cell(&r.oracle),
            quote(&cell(&r.boundary)),
            cell(&r.symmetry_warning),
            quote(&cell(&r.error)),
        ];
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn rows_to_json(rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialise") + "\n"
}

pub fn render(rows: &[SweepRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => rows_to_csv(rows),
        OutputFormat::Json => rows_to_json(rows),
    }
}

// ---------------------------------------------------------------------------
// Per-point pipeline

/// Independent seed for `(point, stream)` derived from the sweep seed.
pub fn derive_seed(seed: u64, point: usize, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 16) | stream);
    rng.next_u64()
}

const STREAM_BASE: u64 = 0;
const STREAM_FOLDED: u64 = 1;
const STREAM_BOOTSTRAP: u64 = 2;
const STREAM_SETTING: u64 = 0x100;
const STREAM_SETTING_FOLDED: u64 = 0x200;

/// Everything about a λ point that does not depend on the measurement.
pub struct PointSetup {
    pub opt: OptimizedAnsatz,
    pub tensor: MpsTensor,
    pub gate: circuit::GateSpec,
    pub boundary: BoundaryState,
    pub prep: ansatz::BoundaryPrep,
    pub burn_in: usize,
    pub boundary_status: &'static str,
    pub fixed_point: CMatrix,
    pub channel: mps::BondChannel,
}

/// Boundary selection and burn-in from the transfer spectrum. A degenerate
/// fixed point (e.g. the ordered `λ = 0` tensor) has no decaying mode to
/// suppress; the computational zero state and a single iteration are used.
pub fn setup_point(opt: OptimizedAnsatz, burn_in_tol: f64) -> std::result::Result<PointSetup, String> {
    let tensor = opt.tensor();
    let channel = mps::bond_channel(&tensor).map_err(|e| e.to_string())?;
    let spectrum = mps::transfer_spectrum(&channel);
    let (boundary, burn_in, boundary_status) = if spectrum.degenerate || spectrum.subdominant_mode.is_none() {
        (BoundaryState::basis(tensor.chi(), 0), 1, "degenerate")
    } else {
        let sel = mps::select_boundary(&spectrum).map_err(|e| e.to_string())?;
        let j = mps::burn_in_from_spectrum(&spectrum, burn_in_tol).map_err(|e| e.to_string())?;
        let status = match sel.status {
            SelectionStatus::Converged => "converged",
            SelectionStatus::BestEffort => "best_effort",
        };
        (sel.boundary, j, status)
    };
    let prep = ansatz::boundary_prep(&boundary).map_err(|e| e.to_string())?;
    let gate = circuit::embedding_gate(&opt).map_err(|e| e.to_string())?;
    Ok(PointSetup {
        fixed_point: spectrum.fixed_point.clone(),
        opt,
        tensor,
        gate,
        boundary,
        prep,
        burn_in,
        boundary_status,
        channel,
    })
}

fn sample(circuit: &Circuit, noise: &NoiseModel, shots: usize, seed: u64, postselect: bool) -> std::result::Result<(Vec<ShotRecord>, f64), String> {
    let records = circuit::sample_shots(circuit, noise, shots, seed);
    let (kept, retention) = noise::leakage_postselect(&records, LEAK_LABEL).map_err(|e| e.to_string())?;
    Ok(if postselect { (kept, retention) } else { (records, retention) })
}

fn fold(circuit: &Circuit) -> std::result::Result<Circuit, String> {
    noise::fold_circuit(circuit).map_err(|e| e.to_string())
}

fn energy_point(config: &SweepConfig, point: usize, setup: &PointSetup) -> std::result::Result<SweepRow, String> {
    let lambda = setup.opt.lambda;
    // X at iteration j−2, then Z, Z: the first measured site follows the burn-in.
    let j = setup.burn_in + 2;
    let circuit = circuit::build_state_prep_circuit(&setup.gate, &setup.prep, j, &Purpose::energy(), Some(lambda))
        .map_err(|e| e.to_string())?;
    let noise = config.noise_model();

    let z = linalg::Pauli::Z.matrix();
    let x = mps::expectation_local(&setup.tensor, &setup.boundary, j - 2, &linalg::Pauli::X.matrix()).map_err(|e| e.to_string())?;
    let zz = mps::expectation_nn(&setup.tensor, &setup.boundary, j - 1, &z, &z).map_err(|e| e.to_string())?;

    let mut row = SweepRow {
        lambda,
        chi: setup.tensor.chi(),
        shots: config.shots,
        iterations: Some(j),
        mitigated: config.zne,
        mps_circuit: Some(estimation::energy_from_expectations(x, zz, lambda)),
        mps_bulk: Some(setup.opt.energy),
        oracle: TfimParams::new(lambda).ok().and_then(|p| tfim::exact_energy_density(p).energy_density),
        boundary: Some(setup.boundary_status.to_string()),
        ..SweepRow::default()
    };

    let measure = |c: &Circuit, stream: u64| -> std::result::Result<(f64, f64, f64), String> {
        if config.exact {
            let out = circuit::simulate_exact(c, &noise);
            let mx = out.marginals[&circuit::measurement_label(Basis::X, j - 2)];
            let mzz = out
                .pair(&circuit::measurement_label(Basis::Z, j - 1), &circuit::measurement_label(Basis::Z, j))
                .ok_or("missing ZZ pair")?;
            Ok((estimation::energy_from_expectations(mx, mzz, lambda), 0.0, out.retention))
        } else {
            let (shots, retention) = sample(c, &noise, config.shots, derive_seed(config.seed, point, stream), config.postselect)?;
            let est = estimation::energy_from_records(&shots, lambda).map_err(|e| e.to_string())?;
            Ok((est.e, est.sigma, retention))
        }
    };

    let (e1, s1, retention) = measure(&circuit, STREAM_BASE)?;
    row.retention = Some(retention);
    row.raw = Some(e1);
    row.raw_sigma = Some(s1);
    if config.zne {
        let (e3, s3, _) = measure(&fold(&circuit)?, STREAM_FOLDED)?;
        row.folded = Some(e3);
        row.folded_sigma = Some(s3);
        row.e = Some(noise::extrapolate(e1, e3));
        row.e_sigma = Some((2.25 * s1 * s1 + 0.25 * s3 * s3).sqrt());
    } else {
        row.e = Some(e1);
        row.e_sigma = Some(s1);
    }
    Ok(row)
}

fn tomography_data(
    config: &SweepConfig,
    point: usize,
    circuits: &[Circuit],
    stream: u64,
) -> std::result::Result<(Tomogram, f64), String> {
    let noise = config.noise_model();
    let n_b = config.n_b;
    let sampled: Vec<_> = circuits
        .par_iter()
        .enumerate()
        .map(|(s, c)| sample(c, &noise, config.shots, derive_seed(config.seed, point, stream + s as u64), config.postselect))
        .collect();
    let mut tomogram = Tomogram::new(n_b, config.restricted_tomography && n_b == 2);
    let mut kept = 0.0;
    for (c, result) in circuits.iter().zip(sampled) {
        let (shots, retention) = result?;
        let setting = c.meta.setting.as_ref().ok_or("tomography circuit without setting")?;
        tomogram.add_shots(setting, &shots).map_err(|e| e.to_string())?;
        kept += retention;
    }
    Ok((tomogram, kept / circuits.len() as f64))
}

fn exact_bond_expectations(circuit: &Circuit, noise: &NoiseModel, n_b: usize) -> (BTreeMap<estimation::PauliOp, (f64, f64)>, f64) {
    let out = circuit::simulate_exact(circuit, noise);
    let frame = circuit::readout_frame(n_b);
    let framed = &frame * &out.bond_state * frame.adjoint();
    (estimation::exact_expectations(&framed), out.retention)
}

fn entropy_point(config: &SweepConfig, point: usize, setup: &PointSetup) -> std::result::Result<SweepRow, String> {
    let lambda = setup.opt.lambda;
    let n_b = config.n_b;
    let restricted = config.restricted_tomography && n_b == 2;
    let j = setup.burn_in;
    let circuits = circuit::tomography_circuits(&setup.gate, &setup.prep, j, restricted, Some(lambda)).map_err(|e| e.to_string())?;

    let classical = mps::half_chain_entropy(&setup.tensor, &setup.boundary, j).map_err(|e| e.to_string())?;
    let bulk = mps::entanglement_entropy(&mps::normalise_density(&setup.fixed_point)).map_err(|e| e.to_string())?;
    let mut row = SweepRow {
        lambda,
        chi: setup.tensor.chi(),
        shots: config.shots,
        iterations: Some(j),
        mitigated: config.zne,
        mps_circuit: Some(classical.entropy_bits),
        mps_bulk: Some(bulk.entropy_bits),
        oracle: oracle_entropy(lambda),
        boundary: Some(setup.boundary_status.to_string()),
        mps_schmidt_spectrum: Some(classical.schmidt_spectrum),
        ..SweepRow::default()
    };

    let map_err = |e: estimation::EstimationError| e.to_string();
    let mitigated;
    if config.exact {
        let noise = config.noise_model();
        // every setting sees the same pre-readout state
        let (exp, retention) = exact_bond_expectations(&circuits[0], &noise, n_b);
        row.retention = Some(retention);
        let exp3 = if config.zne { Some(exact_bond_expectations(&fold(&circuits[0])?, &noise, n_b).0) } else { None };
        let raw = estimation::entropy_exact(&exp, None, n_b, restricted).map_err(map_err)?;
        row.raw = Some(raw.entropy);
        row.raw_sigma = Some(0.0);
        if let Some(e3) = &exp3 {
            row.folded = Some(estimation::entropy_exact(e3, None, n_b, restricted).map_err(map_err)?.entropy);
            row.folded_sigma = Some(0.0);
        }
        mitigated = estimation::entropy_exact(&exp, exp3.as_ref(), n_b, restricted).map_err(map_err)?;
        let fexp = match &exp3 {
            Some(e3) => extrapolated(&exp, e3),
            None => exp,
        };
        let density = estimation::reconstruct_exact(&fexp, n_b, restricted);
        row.schmidt_spectrum = Some(spectrum_of(&density.rho));
    } else {
        let (tomogram, retention) = tomography_data(config, point, &circuits, STREAM_SETTING)?;
        row.retention = Some(retention);
        let boot = derive_seed(config.seed, point, STREAM_BOOTSTRAP);
        let raw = estimation::entropy_with_ci(&tomogram, None, restricted, config.bootstrap_b, boot).map_err(map_err)?;
        row.raw = Some(raw.entropy);
        row.raw_sigma = Some(raw.sigma);
        let folded_tomogram = if config.zne {
            let folded: Vec<Circuit> = circuits.iter().map(fold).collect::<std::result::Result<_, _>>()?;
            let (t3, _) = tomography_data(config, point, &folded, STREAM_SETTING_FOLDED)?;
            let f = estimation::entropy_with_ci(&t3, None, restricted, config.bootstrap_b, boot).map_err(map_err)?;
            row.folded = Some(f.entropy);
            row.folded_sigma = Some(f.sigma);
            Some(t3)
        } else {
            None
        };
        mitigated = match &folded_tomogram {
            Some(t3) => estimation::entropy_with_ci(&tomogram, Some(t3), restricted, config.bootstrap_b, boot).map_err(map_err)?,
            None => raw,
        };
        let density = estimation::reconstruct(&tomogram, folded_tomogram.as_ref(), restricted).map_err(map_err)?;
        row.schmidt_spectrum = Some(spectrum_of(&density.rho));
        if n_b == 2 {
            let check = estimation::reconstruct(&tomogram, None, restricted).map_err(map_err)?;
            row.symmetry_warning = check.symmetry_violation.map(|_| check.symmetry_warning());
        }
    }
    row.entropy = Some(mitigated.entropy);
    row.entropy_sigma = Some(mitigated.sigma);
    Ok(row)
}

fn extrapolated(
    base: &BTreeMap<estimation::PauliOp, (f64, f64)>,
    folded: &BTreeMap<estimation::PauliOp, (f64, f64)>,
) -> BTreeMap<estimation::PauliOp, (f64, f64)> {
    base.iter()
        .map(|(op, &(e1, s))| (op.clone(), (noise::extrapolate(e1, folded.get(op).map_or(e1, |v| v.0)), s)))
        .collect()
}

fn spectrum_of(rho: &CMatrix) -> Vec<f64> {
    mps::entanglement_entropy(rho).map(|r| r.schmidt_spectrum).unwrap_or_default()
}

/// High-χ entropy oracle of the infinite chain; `None` at the critical
/// point. Results are memoised for the lifetime of the process.
pub fn oracle_entropy_result(lambda: f64) -> Option<tfim::OracleResult> {
    static MEMO: OnceLock<Mutex<BTreeMap<u64, Option<tfim::OracleResult>>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if let Some(v) = memo.lock().expect("memo lock").get(&lambda.to_bits()) {
        return v.clone();
    }
    let value = TfimParams::new(lambda).ok().and_then(|p| tfim::exact_half_chain_entropy(p).ok());
    memo.lock().expect("memo lock").insert(lambda.to_bits(), value.clone());
    value
}

pub fn oracle_entropy(lambda: f64) -> Option<f64> {
    oracle_entropy_result(lambda).and_then(|r| r.entropy_bits)
}

fn failed(lambda: f64, chi: usize, shots: usize, error: String) -> SweepRow {
    SweepRow { lambda, chi, shots, error: Some(error), ..SweepRow::default() }
}

fn run_sweep(
    config: &SweepConfig,
    store: &mut ParamStore,
    point_fn: fn(&SweepConfig, usize, &PointSetup) -> std::result::Result<SweepRow, String>,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let points: Vec<_> = config.lambda_grid.iter().map(|&l| (l, config.n_b, config.mode)).collect();
    let optimized = store.ensure(&points);
    let chi = 1 << config.n_b;
    Ok(config
        .lambda_grid
        .par_iter()
        .zip(optimized)
        .enumerate()
        .map(|(k, (&lambda, opt))| {
            opt.and_then(|o| setup_point(o, config.burn_in_tol))
                .and_then(|setup| point_fn(config, k, &setup))
                .unwrap_or_else(|e| failed(lambda, chi, config.shots, e))
        })
        .collect())
}

/// Energy per site from the `X, Z, Z` measurement schedule at every grid
/// point. Failures are reported in the row's `error` column.
pub fn run_energy_sweep(config: &SweepConfig, store: &mut ParamStore) -> Result<Vec<SweepRow>> {
    run_sweep(config, store, energy_point)
}

/// Bond-register entropy after burn-in from tomography at every grid point.
pub fn run_entropy_sweep(config: &SweepConfig, store: &mut ParamStore) -> Result<Vec<SweepRow>> {
    run_sweep(config, store, entropy_point)
}

/// Oracle curves: exact energy density (quadrature), high-χ entropy and,
/// from the parameter store, the χ-level classical MPS values. `method` and
/// `convergence_estimate` describe the entropy column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub lambda: f64,
    pub energy_density: Option<f64>,
    pub entropy_bits: Option<f64>,
    pub method: String,
    pub convergence_estimate: Option<f64>,
    pub chi: usize,
    pub mps_energy: Option<f64>,
    pub mps_entropy: Option<f64>,
}

pub fn run_oracle(grid: &[f64], n_b: usize, mode: OptimizeMode, store: &mut ParamStore) -> Vec<OracleRow> {
    let points: Vec<_> = grid.iter().map(|&l| (l, n_b, mode)).collect();
    let optimized = store.ensure(&points);
    grid.par_iter()
        .zip(optimized)
        .map(|(&lambda, opt)| {
            let opt = opt.ok();
            let mps_entropy = opt.as_ref().and_then(|o| {
                let channel = mps::bond_channel(&o.tensor()).ok()?;
                let fp = mps::transfer_spectrum(&channel).fixed_point;
                mps::entanglement_entropy(&mps::normalise_density(&fp)).ok().map(|r| r.entropy_bits)
            });
            let entropy = oracle_entropy_result(lambda);
            OracleRow {
                lambda,
                energy_density: TfimParams::new(lambda).ok().and_then(|p| tfim::exact_energy_density(p).energy_density),
                entropy_bits: entropy.as_ref().and_then(|r| r.entropy_bits),
                method: tfim::OracleMethod::HighChiMps.to_string(),
                convergence_estimate: entropy.map(|r| r.convergence_estimate),
                chi: 1 << n_b,
                mps_energy: opt.as_ref().map(|o| o.energy),
                mps_entropy,
            }
        })
        .collect()
}

pub fn oracle_to_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from("lambda,energy_density,entropy_bits,method,convergence_estimate,chi,mps_energy,mps_entropy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.lambda,
            cell(&r.energy_density),
            cell(&r.entropy_bits),
            r.method,
            cell(&r.convergence_estimate),
            r.chi,
            cell(&r.mps_energy),
            cell(&r.mps_entropy)
        );
    }
    out
}

#[cfg(test)]
mod tests;
