//! Sequential measure-and-reset circuits: construction, exact
//! density-matrix evolution and shot-by-shot trajectory sampling.
//!
//! Wire 0 is the system qubit, wires `1..=n_b` the bond register.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{self, gates, Axis, BoundaryPrep, NativeCircuitFragment, NativeOp, UnitaryGate};
use crate::linalg::{self, c, CMatrix, CVector, Pauli, C64, ONE, ZERO};
use crate::noise::{self, NoiseModel};

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("schedule of length {schedule} exceeds {iterations} iterations")]
    Schedule { schedule: usize, iterations: usize },
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("tomography supports at most two bond qubits, got {0}")]
    BondQubits(usize),
    #[error("setting has {got} bases for {expected} bond wires")]
    Setting { expected: usize, got: usize },
    #[error("wire {0} out of range")]
    Wire(usize),
    #[error("gate on wires {wires:?} has dimension {dim}")]
    GateShape { wires: Vec<usize>, dim: usize },
    #[error("malformed op record: {0}")]
    Record(String),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn pauli(self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
            Basis::Z => Pauli::Z,
        }
    }

    /// Unitary taking the `±1` eigenvectors of the Pauli to `|0⟩, |1⟩`.
    pub fn rotation(self) -> CMatrix {
        match self {
            Basis::X => gates::hadamard(),
            Basis::Y => gates::hadamard() * CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, -linalg::I])),
            Basis::Z => CMatrix::identity(2, 2),
        }
    }

    pub fn symbol(self) -> char {
        self.pauli().symbol()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateSpec {
    Unitary(CMatrix),
    /// Fragment wires index into the gate's own wire list.
    Native(NativeCircuitFragment),
}

impl GateSpec {
    pub fn matrix(&self) -> CMatrix {
        match self {
            GateSpec::Unitary(m) => m.clone(),
            GateSpec::Native(f) => f.matrix(),
        }
    }

    pub fn uzz_count(&self) -> usize {
        match self {
            GateSpec::Unitary(_) => 0,
            GateSpec::Native(f) => f.uzz_count(),
        }
    }
}

/// Gate carrying an optimised embedding unitary. Ansatz results compile
/// tile by tile; unrestricted unitaries compile when they act on two qubits
/// and are otherwise kept as a dense matrix.
pub fn embedding_gate(opt: &ansatz::OptimizedAnsatz) -> ansatz::Result<GateSpec> {
    match opt.params() {
        Some(params) => Ok(GateSpec::Native(ansatz::compile_embedding(&params)?)),
        None if opt.unitary.n_qubits() <= 2 => Ok(GateSpec::Native(ansatz::decompose_to_native(&opt.unitary)?)),
        None => Ok(GateSpec::Unitary(opt.unitary.matrix().clone())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpRecord", into = "OpRecord")]
pub enum CircuitOp {
    Gate { wires: Vec<usize>, gate: GateSpec },
    Measure { wire: usize, basis: Basis, label: String },
    Reset { wire: usize },
    LeakCheck { wires: Vec<usize>, label: String },
}

/// Flat JSON form `{type, wires, basis?, label?, matrix?|fragment?}`; matrix
/// entries are `[re, im]` pairs, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct OpRecord {
    #[serde(rename = "type")]
    kind: String,
    wires: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Basis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fragment: Option<NativeCircuitFragment>,
}

impl From<CircuitOp> for OpRecord {
    fn from(op: CircuitOp) -> Self {
        let blank = |kind: &str, wires: Vec<usize>| OpRecord {
            kind: kind.to_string(),
            wires,
            basis: None,
            label: None,
            matrix: None,
            fragment: None,
        };
        match op {
            CircuitOp::Gate { wires, gate } => {
                let mut r = blank("gate", wires);
                match gate {
                    GateSpec::Unitary(m) => {
                        r.matrix = Some((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
                    }
                    GateSpec::Native(f) => r.fragment = Some(f),
                }
                r
            }
            CircuitOp::Measure { wire, basis, label } => OpRecord { basis: Some(basis), label: Some(label), ..blank("measure", vec![wire]) },
            CircuitOp::Reset { wire } => blank("reset", vec![wire]),
            CircuitOp::LeakCheck { wires, label } => OpRecord { label: Some(label), ..blank("leak_check", wires) },
        }
    }
}

impl TryFrom<OpRecord> for CircuitOp {
    type Error = CircuitError;

    fn try_from(r: OpRecord) -> Result<Self> {
        let missing = |what: &str| CircuitError::Record(format!("{} op without {what}", r.kind));
        let single = |wires: &[usize]| match wires {
            [w] => Ok(*w),
            _ => Err(CircuitError::Record(format!("{} op expects one wire", r.kind))),
        };
        Ok(match r.kind.as_str() {
            "gate" => {
                let gate = match (&r.fragment, &r.matrix) {
                    (Some(f), _) => GateSpec::Native(f.clone()),
                    (None, Some(rows)) => {
                        let n = rows.len();
                        if rows.iter().any(|row| row.len() != n) {
                            return Err(CircuitError::Record("gate matrix is not square".into()));
                        }
                        GateSpec::Unitary(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
                    }
                    (None, None) => return Err(missing("matrix or fragment")),
                };
                CircuitOp::Gate { wires: r.wires, gate }
            }
            "measure" => CircuitOp::Measure {
                wire: single(&r.wires)?,
                basis: r.basis.ok_or_else(|| missing("basis"))?,
                label: r.label.clone().ok_or_else(|| missing("label"))?,
            },
            "reset" => CircuitOp::Reset { wire: single(&r.wires)? },
            "leak_check" => CircuitOp::LeakCheck { wires: r.wires.clone(), label: r.label.clone().ok_or_else(|| missing("label"))? },
            other => return Err(CircuitError::Record(format!("unknown op type {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurposeKind {
    Energy,
    Tomography,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Bases measured on the system wire in the final iterations.
    Energy { schedule: Vec<Basis> },
    /// Terminal measurement basis for each bond wire.
    Tomography { setting: Vec<Basis> },
}

impl Purpose {
    pub fn energy() -> Self {
        Purpose::Energy { schedule: vec![Basis::X, Basis::Z, Basis::Z] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitMeta {
    pub lambda: Option<f64>,
    pub chi: usize,
    pub iterations: usize,
    pub purpose: PurposeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Vec<Basis>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_wires: usize,
    pub ops: Vec<CircuitOp>,
    pub meta: CircuitMeta,
    /// Index of the first op of the terminal bond-readout block.
    #[serde(default)]
    pub readout_start: Option<usize>,
}

pub const LEAK_LABEL: &str = "leak";

impl Circuit {
    pub fn uzz_count(&self) -> usize {
        self.ops
            .iter()
            .map(|op| match op {
                CircuitOp::Gate { gate, .. } => gate.uzz_count(),
                _ => 0,
            })
            .sum()
    }

    pub fn measure_labels(&self) -> Vec<&str> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                CircuitOp::Measure { label, .. } => Some(label.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for op in &self.ops {
            let wires: Vec<usize> = match op {
                CircuitOp::Gate { wires, gate } => {
                    let dim = gate.matrix().nrows();
                    if dim != 1 << wires.len() {
                        return Err(CircuitError::GateShape { wires: wires.clone(), dim });
                    }
                    wires.clone()
                }
                CircuitOp::Measure { wire, .. } | CircuitOp::Reset { wire } => vec![*wire],
                CircuitOp::LeakCheck { wires, .. } => wires.clone(),
            };
            if let Some(&w) = wires.iter().find(|&&w| w >= self.n_wires) {
                return Err(CircuitError::Wire(w));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serialises")
    }
}

/// Label of a system measurement: basis letter and iteration index.
pub fn measurement_label(basis: Basis, iteration: usize) -> String {
    format!("{basis}{iteration}")
}

/// Label of the terminal measurement on bond wire `w`.
pub fn readout_label(wire: usize) -> String {
    format!("b{wire}")
}

/// Boundary preparation on the bond register, then `j` rounds of
/// [reset system, apply `U`, optional system measurement]. Energy schedules
/// occupy the last `schedule.len()` iterations; tomography circuits end with
/// the frame change and basis measurements on the bond wires. A final
/// `LeakCheck` covers every wire.
pub fn build_state_prep_circuit(u: &GateSpec, prep: &BoundaryPrep, j: usize, purpose: &Purpose, lambda: Option<f64>) -> Result<Circuit> {
    if j == 0 {
        return Err(CircuitError::NoIterations);
    }
    let chi = prep.target_state.chi();
    let n_b = chi.trailing_zeros() as usize;
    let n_wires = n_b + 1;
    let all_wires: Vec<usize> = (0..n_wires).collect();
    let bond_wires: Vec<usize> = (1..n_wires).collect();
    let dim = u.matrix().nrows();
    if dim != 1 << n_wires {
        return Err(CircuitError::GateShape { wires: all_wires, dim });
    }

    let mut ops = Vec::new();
    if !prep.fragment.ops.is_empty() {
        ops.push(CircuitOp::Gate { wires: bond_wires.clone(), gate: GateSpec::Native(prep.fragment.clone()) });
    }
    let schedule: &[Basis] = match purpose {
        Purpose::Energy { schedule } => schedule,
        Purpose::Tomography { .. } => &[],
    };
    if schedule.len() > j {
        return Err(CircuitError::Schedule { schedule: schedule.len(), iterations: j });
    }
    let first_measured = j - schedule.len() + 1;
    for it in 1..=j {
        ops.push(CircuitOp::Reset { wire: 0 });
        ops.push(CircuitOp::Gate { wires: all_wires.clone(), gate: u.clone() });
        if it >= first_measured {
            let basis = schedule[it - first_measured];
            ops.push(CircuitOp::Measure { wire: 0, basis, label: measurement_label(basis, it) });
        }
    }

    let mut readout_start = None;
    let setting = match purpose {
        Purpose::Tomography { setting } => {
            if setting.len() != n_b {
                return Err(CircuitError::Setting { expected: n_b, got: setting.len() });
            }
            readout_start = Some(ops.len());
            for (k, frame) in ansatz::symmetry_frame(n_b).into_iter().enumerate() {
                if linalg::frobenius_distance(&frame, &CMatrix::identity(2, 2)) > 0.0 {
                    let fragment = ansatz::decompose_to_native(&UnitaryGate::new(frame).expect("Clifford"))
                        .expect("single-qubit synthesis");
                    ops.push(CircuitOp::Gate { wires: vec![k + 1], gate: GateSpec::Native(fragment) });
                }
            }
            for (k, &basis) in setting.iter().enumerate() {
                ops.push(CircuitOp::Measure { wire: k + 1, basis, label: readout_label(k + 1) });
            }
            Some(setting.clone())
        }
        Purpose::Energy { .. } => None,
    };
    ops.push(CircuitOp::LeakCheck { wires: (0..n_wires).collect(), label: LEAK_LABEL.to_string() });

    let circuit = Circuit {
        n_wires,
        ops,
        meta: CircuitMeta {
            lambda,
            chi,
            iterations: j,
            purpose: match purpose {
                Purpose::Energy { .. } => PurposeKind::Energy,
                Purpose::Tomography { .. } => PurposeKind::Tomography,
            },
            setting,
        },
        readout_start,
    };
    circuit.validate()?;
    Ok(circuit)
}

/// Measurement settings for bond-register tomography. The restricted
/// two-qubit set reads out `IX, XI, XX` from `(X, X)` and `YZ`, `ZY` from
/// the other two settings.
pub fn tomography_settings(n_b: usize, restricted: bool) -> Result<Vec<Vec<Basis>>> {
    match (n_b, restricted) {
        (1, _) => Ok(Basis::ALL.iter().map(|&b| vec![b]).collect()),
        (2, false) => Ok(Basis::ALL.iter().flat_map(|&a| Basis::ALL.iter().map(move |&b| vec![a, b])).collect()),
        (2, true) => Ok(vec![vec![Basis::X, Basis::X], vec![Basis::Y, Basis::Z], vec![Basis::Z, Basis::Y]]),
        (n, _) => Err(CircuitError::BondQubits(n)),
    }
}

/// One circuit per tomography setting.
pub fn tomography_circuits(u: &GateSpec, prep: &BoundaryPrep, j: usize, restricted: bool, lambda: Option<f64>) -> Result<Vec<Circuit>> {
    let n_b = prep.target_state.chi().trailing_zeros() as usize;
    tomography_settings(n_b, restricted)?
        .into_iter()
        .map(|setting| build_state_prep_circuit(u, prep, j, &Purpose::Tomography { setting }, lambda))
        .collect()
}

/// Product of the frame changes applied before bond readout.
pub fn readout_frame(n_b: usize) -> CMatrix {
    linalg::kron_all(&ansatz::symmetry_frame(n_b))
}

// ---------------------------------------------------------------------------
// Exact density-matrix evolution

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairProduct {
    pub first: String,
    pub second: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct ExactOutcome {
    /// Bond-register state after the last iteration, before any readout.
    pub bond_state: CMatrix,
    /// Full register state at the end of the circuit.
    pub final_state: CMatrix,
    /// `⟨P⟩` for each labelled measurement.
    pub marginals: BTreeMap<String, f64>,
    /// `⟨P_a P_b⟩` for consecutive labelled measurements.
    pub pair_products: Vec<PairProduct>,
    /// Probability that no leakage occurred; the states above are
    /// conditioned on that event.
    pub retention: f64,
}

impl ExactOutcome {
    pub fn pair(&self, first: &str, second: &str) -> Option<f64> {
        self.pair_products.iter().find(|p| p.first == first && p.second == second).map(|p| p.value)
    }
}

struct Branch {
    last: f64,
    rho: CMatrix,
}

/// Deterministic evolution. Measurements branch on their outcome, keeping
/// only the most recent one so that consecutive pair products are exact;
/// every branch sees the same later gates.
pub fn simulate_exact(circuit: &Circuit, noise: &NoiseModel) -> ExactOutcome {
    let n = circuit.n_wires;
    let dim = 1 << n;
    let mut rho0 = CMatrix::zeros(dim, dim);
    rho0[(0, 0)] = ONE;
    let mut branches = vec![Branch { last: 0.0, rho: rho0 }];
    let mut marginals = BTreeMap::new();
    let mut pair_products = Vec::new();
    let mut previous: Option<String> = None;
    let mut retention = 1.0;
    let mut bond_state = None;

    let for_each = |branches: &mut Vec<Branch>, f: &dyn Fn(&CMatrix) -> CMatrix| {
        for b in branches.iter_mut() {
            b.rho = f(&b.rho);
        }
    };

    for (idx, op) in circuit.ops.iter().enumerate() {
        if circuit.readout_start == Some(idx) {
            bond_state = Some(bond_marginal(&branches, n));
        }
        match op {
            CircuitOp::Gate { wires, gate } => match gate {
                GateSpec::Unitary(m) => {
                    let full = linalg::embed(m, wires, n);
                    for_each(&mut branches, &|r| &full * r * full.adjoint());
                }
                GateSpec::Native(fragment) => {
                    for nop in &fragment.ops {
                        let (full, targets, p) = native_step(nop, wires, n, noise);
                        for_each(&mut branches, &|r| noise::depolarize(&(&full * r * full.adjoint()), &targets, p));
                        if matches!(nop, NativeOp::Uzz { .. }) {
                            retention *= (1.0 - noise.p_leak).powi(2);
                        }
                    }
                }
            },
            CircuitOp::Measure { wire, basis, label } => {
                let rot = linalg::embed(&basis.rotation(), &[*wire], n);
                let mask = 1usize << (n - 1 - wire);
                let mut merged = [CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim)];
                let (mut mean, mut pair) = (0.0, 0.0);
                for b in &branches {
                    let rotated = &rot * &b.rho * rot.adjoint();
                    for (m, slot) in merged.iter_mut().enumerate() {
                        let keep = |i: usize| ((i & mask != 0) as usize) == m;
                        let projected = CMatrix::from_fn(dim, dim, |i, k| if keep(i) && keep(k) { rotated[(i, k)] } else { ZERO });
                        let prob = projected.trace().re;
                        let sign = if m == 0 { 1.0 } else { -1.0 };
                        mean += sign * prob;
                        pair += b.last * sign * prob;
                        *slot += rot.adjoint() * projected * &rot;
                    }
                }
                marginals.insert(label.clone(), mean);
                if let Some(prev) = previous.replace(label.clone()) {
                    pair_products.push(PairProduct { first: prev, second: label.clone(), value: pair });
                }
                let [plus, minus] = merged;
                branches = vec![Branch { last: 1.0, rho: plus }, Branch { last: -1.0, rho: minus }];
                if *wire == 0 {
                    let bond: Vec<usize> = (1..n).collect();
                    for_each(&mut branches, &|r| crosstalk(r, &bond, noise.eps_meas));
                }
            }
            CircuitOp::Reset { wire } => {
                for_each(&mut branches, &|r| reset_wire(r, *wire, n));
                if *wire == 0 {
                    let bond: Vec<usize> = (1..n).collect();
                    for_each(&mut branches, &|r| crosstalk(r, &bond, noise.eps_reset));
                }
            }
            CircuitOp::LeakCheck { .. } => {}
        }
    }
    let final_state = branches.iter().fold(CMatrix::zeros(dim, dim), |acc, b| acc + &b.rho);
    let bond_state = bond_state.unwrap_or_else(|| bond_marginal(&branches, n));
    ExactOutcome { bond_state, final_state, marginals, pair_products, retention }
}

fn bond_marginal(branches: &[Branch], n: usize) -> CMatrix {
    let dim = 1 << n;
    let total = branches.iter().fold(CMatrix::zeros(dim, dim), |acc, b| acc + &b.rho);
    let bond: Vec<usize> = (1..n).collect();
    linalg::partial_trace_keep(&total, &bond, n)
}

fn crosstalk(rho: &CMatrix, wires: &[usize], eps: f64) -> CMatrix {
    wires.iter().fold(rho.clone(), |r, &w| noise::depolarize(&r, &[w], eps))
}

/// Embedded matrix of a native op, the wires its noise acts on, and the
/// depolarising probability. `R_z` is a frame update and stays noiseless.
fn native_step(op: &NativeOp, wires: &[usize], n: usize, noise: &NoiseModel) -> (CMatrix, Vec<usize>, f64) {
    match *op {
        NativeOp::Rotation { axis, angle, wire } => {
            let p = if axis == Axis::Z { 0.0 } else { noise.p1 };
            (linalg::embed(&gates::rotation(axis, angle), &[wires[wire]], n), vec![wires[wire]], p)
        }
        NativeOp::Uzz { wires: [a, b] } => {
            let targets = vec![wires[a], wires[b]];
            (linalg::embed(&gates::uzz(), &targets, n), targets, noise.p2)
        }
    }
}

/// Trace out `wire` and replace it by `|0⟩`.
fn reset_wire(rho: &CMatrix, wire: usize, n: usize) -> CMatrix {
    let dim = 1 << n;
    let mask = 1usize << (n - 1 - wire);
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for k in 0..dim {
            let v = rho[(i, k)];
            if v != ZERO && (i & mask) == (k & mask) {
                out[(i & !mask, k & !mask)] += v;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Trajectory sampling

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub outcomes: BTreeMap<String, i8>,
    pub leaked: bool,
    pub seed: u64,
}

/// Independent shots; shot `k` draws from a generator seeded with
/// `seed + k`, so results do not depend on scheduling.
pub fn sample_shots(circuit: &Circuit, noise: &NoiseModel, n_shots: usize, seed: u64) -> Vec<ShotRecord> {
    let steps = compile(circuit);
    (0..n_shots as u64)
        .into_par_iter()
        .map(|k| run_shot(&steps, circuit.n_wires, noise, seed.wrapping_add(k)))
        .collect()
}

type Mat2 = [C64; 4];

fn mat2(m: &CMatrix) -> Mat2 {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// Circuit flattened for repeated trajectory runs.
enum Step<'a> {
    Dense { wires: &'a [usize], m: CMatrix },
    Rotation { wire: usize, m: Mat2, noisy: bool },
    Uzz { a: usize, b: usize },
    Measure { wire: usize, rot: Mat2, inv: Mat2, label: &'a str },
    Reset { wire: usize },
    LeakCheck { wires: &'a [usize], label: &'a str },
}

fn compile(circuit: &Circuit) -> Vec<Step<'_>> {
    let n = circuit.n_wires;
    let mut steps = Vec::new();
    for op in &circuit.ops {
        match op {
            CircuitOp::Gate { wires, gate: GateSpec::Unitary(m) } => {
                steps.push(Step::Dense { wires, m: linalg::embed(m, wires, n) });
            }
            CircuitOp::Gate { wires, gate: GateSpec::Native(fragment) } => {
                for nop in &fragment.ops {
                    steps.push(match *nop {
                        NativeOp::Rotation { axis, angle, wire } => {
                            Step::Rotation { wire: wires[wire], m: mat2(&gates::rotation(axis, angle)), noisy: axis != Axis::Z }
                        }
                        NativeOp::Uzz { wires: [a, b] } => Step::Uzz { a: wires[a], b: wires[b] },
                    });
                }
            }
            CircuitOp::Measure { wire, basis, label } => {
                let rot = basis.rotation();
                steps.push(Step::Measure { wire: *wire, rot: mat2(&rot), inv: mat2(&rot.adjoint()), label });
            }
            CircuitOp::Reset { wire } => steps.push(Step::Reset { wire: *wire }),
            CircuitOp::LeakCheck { wires, label } => steps.push(Step::LeakCheck { wires, label }),
        }
    }
    steps
}

struct Trajectory<'a> {
    n: usize,
    psi: CVector,
    leaked: Vec<bool>,
    ever_leaked: Vec<bool>,
    rng: ChaCha8Rng,
    noise: &'a NoiseModel,
}

const PAULIS: [Mat2; 4] = [[ONE, ZERO, ZERO, ONE], [ZERO, ONE, ONE, ZERO], [ZERO, C64 { re: -0.0, im: -1.0 }, linalg::I, ZERO], [ONE, ZERO, ZERO, C64 { re: -1.0, im: -0.0 }]];

fn run_shot(steps: &[Step], n: usize, noise: &NoiseModel, seed: u64) -> ShotRecord {
    let mut psi = CVector::zeros(1 << n);
    psi[0] = ONE;
    let mut t = Trajectory {
        n,
        psi,
        leaked: vec![false; n],
        ever_leaked: vec![false; n],
        rng: ChaCha8Rng::seed_from_u64(seed),
        noise,
    };
    let mut outcomes = BTreeMap::new();
    let mut leaked = false;
    for step in steps {
        match step {
            Step::Dense { wires, m } => {
                if wires.iter().all(|&w| !t.leaked[w]) {
                    t.psi = m * &t.psi;
                }
            }
            Step::Rotation { wire, m, noisy } => t.rotation(*wire, m, *noisy),
            Step::Uzz { a, b } => t.uzz(*a, *b),
            Step::Measure { wire, rot, inv, label } => {
                let outcome = t.measure(*wire, rot, inv);
                outcomes.insert(label.to_string(), outcome);
                if *wire == 0 {
                    t.crosstalk(noise.eps_meas);
                }
            }
            Step::Reset { wire } => {
                t.reset(*wire);
                if *wire == 0 {
                    t.crosstalk(noise.eps_reset);
                }
            }
            Step::LeakCheck { wires, label } => {
                let fired = wires.iter().any(|&w| t.ever_leaked[w]);
                leaked |= fired;
                outcomes.insert(label.to_string(), if fired { -1 } else { 1 });
            }
        }
    }
    ShotRecord { outcomes, leaked, seed }
}

impl Trajectory<'_> {
    fn mask(&self, wire: usize) -> usize {
        1usize << (self.n - 1 - wire)
    }

    fn apply_1q(&mut self, wire: usize, m: &Mat2) {
        let mask = self.mask(wire);
        for i in 0..self.psi.len() {
            if i & mask == 0 {
                let (a, b) = (self.psi[i], self.psi[i | mask]);
                self.psi[i] = m[0] * a + m[1] * b;
                self.psi[i | mask] = m[2] * a + m[3] * b;
            }
        }
    }

    fn random_pauli(&mut self, wire: usize) {
        let k = self.rng.random_range(0..4);
        if k > 0 {
            self.apply_1q(wire, &PAULIS[k]);
        }
    }

    fn rotation(&mut self, w: usize, m: &Mat2, noisy: bool) {
        if self.leaked[w] {
            return;
        }
        self.apply_1q(w, m);
        if noisy && self.rng.random::<f64>() < self.noise.p1 {
            self.random_pauli(w);
        }
    }

    fn uzz(&mut self, wa: usize, wb: usize) {
        match (self.leaked[wa], self.leaked[wb]) {
            (false, false) => {
                let (ma, mb) = (self.mask(wa), self.mask(wb));
                let phase = c(0.0, std::f64::consts::FRAC_PI_4).exp();
                for i in 0..self.psi.len() {
                    let parity = ((i & ma != 0) as u8) ^ ((i & mb != 0) as u8);
                    self.psi[i] *= if parity == 0 { phase } else { phase.conj() };
                }
                if self.rng.random::<f64>() < self.noise.p2 {
                    self.random_pauli(wa);
                    self.random_pauli(wb);
                }
            }
            (true, false) => self.random_pauli(wb),
            (false, true) => self.random_pauli(wa),
            (true, true) => {}
        }
        for w in [wa, wb] {
            if !self.leaked[w] && self.rng.random::<f64>() < self.noise.p_leak {
                self.collapse_to_zero(w);
                self.leaked[w] = true;
                self.ever_leaked[w] = true;
            }
        }
    }

    /// Sample a `Z` outcome on `wire`, collapse, and return `(bit, state)`.
    fn collapse(&mut self, wire: usize) -> usize {
        let mask = self.mask(wire);
        let p1: f64 = self.psi.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, a)| a.norm_sqr()).sum();
        let bit = usize::from(self.rng.random::<f64>() < p1);
        let norm = if bit == 1 { p1 } else { 1.0 - p1 }.sqrt();
        for i in 0..self.psi.len() {
            if ((i & mask != 0) as usize) == bit {
                self.psi[i] /= c(norm, 0.0);
            } else {
                self.psi[i] = ZERO;
            }
        }
        bit
    }

    fn collapse_to_zero(&mut self, wire: usize) {
        if self.collapse(wire) == 1 {
            self.apply_1q(wire, &PAULIS[1]);
        }
    }

    fn measure(&mut self, wire: usize, rot: &Mat2, inv: &Mat2) -> i8 {
        if self.leaked[wire] {
            return if self.rng.random::<bool>() { 1 } else { -1 };
        }
        self.apply_1q(wire, rot);
        let bit = self.collapse(wire);
        self.apply_1q(wire, inv);
        if bit == 0 {
            1
        } else {
            -1
        }
    }

    fn reset(&mut self, wire: usize) {
        if self.leaked[wire] {
            self.leaked[wire] = false;
        } else {
            self.collapse_to_zero(wire);
        }
    }

    fn crosstalk(&mut self, eps: f64) {
        if eps == 0.0 {
            return;
        }
        for w in 1..self.n {
            if !self.leaked[w] && self.rng.random::<f64>() < eps {
                self.random_pauli(w);
            }
        }
    }
}

/// Shot table as CSV: one row per shot, one column per label, then the
/// leak flag and the shot seed.
pub fn shots_to_csv(shots: &[ShotRecord]) -> String {
    let mut labels: Vec<&String> = shots.iter().flat_map(|s| s.outcomes.keys()).collect();
    labels.sort();
    labels.dedup();
    let mut out = String::new();
    for l in &labels {
        out.push_str(l);
        out.push(',');
    }
    out.push_str("leaked,seed\n");
    for s in shots {
        for l in &labels {
            if let Some(v) = s.outcomes.get(*l) {
                out.push_str(&v.to_string());
            }
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", u8::from(s.leaked), s.seed));
    }
    out
}
