//! Unitary embeddings of MPS tensors, the tiled gate ansatz, the variational
//! energy optimizer and compilation to single-qubit rotations plus `U_zz`.
//!
//! Embedding unitaries act on `1 + n_b` wires ordered (system, bond
//! register), so `V_σ^{αβ} = (⟨σ|⊗⟨β|) U (|0⟩⊗|α⟩)`.

pub mod gates;
mod kak;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, CMatrix, CVector, Pauli, ONE};
use crate::mps::{self, BoundaryState, MpsError, MpsTensor};
use crate::optimize::{coordinate_polish, NelderMead};

pub use gates::{gxy_gate, gzy_gate, Axis};
pub use kak::{decompose_to_native, NativeCircuitFragment, NativeOp};

#[derive(Debug, Error, PartialEq)]
pub enum AnsatzError {
    #[error("expected a {expected}-qubit unitary, got dimension {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("wire {wire} outside [0, {n_b}]")]
    Wire { wire: usize, n_b: usize },
    #[error("layout needs {expected} angles, got {got}")]
    AngleCount { expected: usize, got: usize },
    #[error("unsupported bond register size {0}")]
    BondQubits(usize),
    #[error("direct synthesis is limited to one- and two-qubit gates, got {0} qubits")]
    TooManyQubits(usize),
    #[error(transparent)]
    Mps(#[from] MpsError),
}

pub type Result<T> = std::result::Result<T, AnsatzError>;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGate {
    n_qubits: usize,
    matrix: CMatrix,
}

impl UnitaryGate {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if dim < 2 || !dim.is_power_of_two() || matrix.ncols() != dim {
            return Err(AnsatzError::Dimension { expected: 0, got: dim });
        }
        let defect = (matrix.adjoint() * &matrix - CMatrix::identity(dim, dim)).norm();
        if defect > UNITARITY_TOL {
            return Err(AnsatzError::NotUnitary(defect));
        }
        Ok(Self { n_qubits: dim.trailing_zeros() as usize, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateFamily {
    Gxy,
    Gzy,
    Rotation(Axis),
}

impl GateFamily {
    pub fn n_params(self) -> usize {
        match self {
            GateFamily::Gxy | GateFamily::Gzy => 2,
            GateFamily::Rotation(_) => 1,
        }
    }

    fn arity(self) -> usize {
        match self {
            GateFamily::Gxy | GateFamily::Gzy => 2,
            GateFamily::Rotation(_) => 1,
        }
    }

    pub fn matrix(self, angles: &[f64]) -> CMatrix {
        match self {
            GateFamily::Gxy => gxy_gate(angles[0], angles[1]),
            GateFamily::Gzy => gzy_gate(angles[0], angles[1]),
            GateFamily::Rotation(axis) => gates::rotation(axis, angles[0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub family: GateFamily,
    pub wires: Vec<usize>,
}

impl Tile {
    pub fn gxy(a: usize, b: usize) -> Self {
        Self { family: GateFamily::Gxy, wires: vec![a, b] }
    }

    pub fn gzy(a: usize, b: usize) -> Self {
        Self { family: GateFamily::Gzy, wires: vec![a, b] }
    }

    pub fn ry(w: usize) -> Self {
        Self { family: GateFamily::Rotation(Axis::Y), wires: vec![w] }
    }
}

/// Ordered gate tiles on `1 + n_b` wires; the first tile acts first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateLayout {
    pub n_b: usize,
    pub tiles: Vec<Tile>,
}

impl GateLayout {
    pub fn new(n_b: usize, tiles: Vec<Tile>) -> Result<Self> {
        let layout = Self { n_b, tiles };
        layout.validate()?;
        Ok(layout)
    }

    /// Default tiling: an entangler between the system qubit and each bond
    /// qubit (innermost bond qubit last), entanglers between neighbouring
    /// bond qubits, then a `R_y` on every wire. Switching off every tile that
    /// touches the outer bond qubits recovers the `n_b = 1` layout.
    pub fn standard(n_b: usize) -> Result<Self> {
        let mut tiles = Self::entanglers(n_b)?;
        tiles.extend((0..=n_b).map(Tile::ry));
        Self::new(n_b, tiles)
    }

    /// The standard entanglers followed by a system rotation only. Every tile
    /// is real and commutes with the `Z`-parity of the bond register, so the
    /// bond channel is covariant under that parity and under conjugation.
    pub fn symmetric(n_b: usize) -> Result<Self> {
        let mut tiles = Self::entanglers(n_b)?;
        tiles.push(Tile::ry(0));
        Self::new(n_b, tiles)
    }

    fn entanglers(n_b: usize) -> Result<Vec<Tile>> {
        if n_b == 0 {
            return Err(AnsatzError::BondQubits(n_b));
        }
        let mut tiles: Vec<Tile> = (1..=n_b).rev().map(|b| Tile::gxy(0, b)).collect();
        tiles.extend((1..n_b).map(|b| Tile::gxy(b, b + 1)));
        Ok(tiles)
    }

    pub fn n_wires(&self) -> usize {
        self.n_b + 1
    }

    pub fn n_params(&self) -> usize {
        self.tiles.iter().map(|t| t.family.n_params()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 {
            return Err(AnsatzError::BondQubits(0));
        }
        for tile in &self.tiles {
            if tile.wires.len() != tile.family.arity() {
                return Err(AnsatzError::Dimension { expected: tile.family.arity(), got: tile.wires.len() });
            }
            if let Some(&wire) = tile.wires.iter().find(|&&w| w > self.n_b) {
                return Err(AnsatzError::Wire { wire, n_b: self.n_b });
            }
            if tile.wires.len() == 2 && tile.wires[0] == tile.wires[1] {
                return Err(AnsatzError::Wire { wire: tile.wires[0], n_b: self.n_b });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    pub angles: Vec<f64>,
    pub layout: GateLayout,
}

impl AnsatzParams {
    pub fn new(angles: Vec<f64>, layout: GateLayout) -> Result<Self> {
        layout.validate()?;
        if angles.len() != layout.n_params() {
            return Err(AnsatzError::AngleCount { expected: layout.n_params(), got: angles.len() });
        }
        Ok(Self { angles, layout })
    }

    pub fn zeros(layout: GateLayout) -> Self {
        Self { angles: vec![0.0; layout.n_params()], layout }
    }
}

/// Compose the tiles in layout order into a `(1 + n_b)`-qubit unitary.
pub fn build_ansatz_unitary(params: &AnsatzParams) -> Result<UnitaryGate> {
    let params = AnsatzParams::new(params.angles.clone(), params.layout.clone())?;
    UnitaryGate::new(compose(&params.layout, &params.angles))
}

fn compose(layout: &GateLayout, angles: &[f64]) -> CMatrix {
    let n = layout.n_wires();
    let mut u = CMatrix::identity(1 << n, 1 << n);
    let mut offset = 0;
    for tile in &layout.tiles {
        let k = tile.family.n_params();
        let gate = tile.family.matrix(&angles[offset..offset + k]);
        offset += k;
        u = linalg::embed(&gate, &tile.wires, n) * u;
    }
    u
}

/// Native gate sequence for the ansatz: each tile is compiled on its own
/// and its wires are mapped onto the full register.
pub fn compile_embedding(params: &AnsatzParams) -> Result<NativeCircuitFragment> {
    let params = AnsatzParams::new(params.angles.clone(), params.layout.clone())?;
    let mut ops = Vec::new();
    let mut offset = 0;
    for tile in &params.layout.tiles {
        let k = tile.family.n_params();
        let angles = &params.angles[offset..offset + k];
        offset += k;
        if let GateFamily::Rotation(axis) = tile.family {
            if angles[0] != 0.0 {
                ops.push(NativeOp::Rotation { axis, angle: angles[0], wire: tile.wires[0] });
            }
            continue;
        }
        let fragment = decompose_to_native(&UnitaryGate::new(tile.family.matrix(angles))?)?;
        ops.extend(fragment.ops.into_iter().map(|op| match op {
            NativeOp::Rotation { axis, angle, wire } => NativeOp::Rotation { axis, angle, wire: tile.wires[wire] },
            NativeOp::Uzz { wires: [a, b] } => NativeOp::Uzz { wires: [tile.wires[a], tile.wires[b]] },
        }));
    }
    Ok(NativeCircuitFragment { n_qubits: params.layout.n_wires(), ops })
}

/// Read the MPS tensor off the columns of `U` with the system input in `|0⟩`.
pub fn extract_isometry(u: &UnitaryGate, n_b: usize) -> Result<MpsTensor> {
    if n_b == 0 || u.n_qubits() != n_b + 1 {
        return Err(AnsatzError::Dimension { expected: n_b + 1, got: u.n_qubits() });
    }
    Ok(isometry_of(u.matrix(), 1 << n_b)?)
}

fn isometry_of(u: &CMatrix, chi: usize) -> std::result::Result<MpsTensor, MpsError> {
    let v = |sigma: usize| CMatrix::from_fn(chi, chi, |alpha, beta| u[(sigma * chi + beta, alpha)]);
    MpsTensor::new(v(0), v(1))
}

/// Unitary whose `|0⟩⊗|α⟩` columns carry the tensor; the remaining columns
/// are completed by Gram–Schmidt over the canonical basis in index order.
pub fn complete_isometry(tensor: &MpsTensor) -> Result<UnitaryGate> {
    if !mps::is_isometry(tensor, 1e-8) {
        return Err(MpsError::NotIsometric(tensor.isometry_defect()).into());
    }
    let chi = tensor.chi();
    let dim = 2 * chi;
    let mut columns: Vec<CVector> = (0..chi)
        .map(|alpha| {
            CVector::from_fn(dim, |row, _| {
                let (sigma, beta) = (row / chi, row % chi);
                tensor.site(sigma)[(alpha, beta)]
            })
        })
        .collect();
    columns = gram_schmidt_complete(columns, dim);
    UnitaryGate::new(CMatrix::from_columns(&columns))
}

/// Extend orthonormal columns to a basis by orthogonalising `e_0, e_1, …`
/// in turn, skipping vectors already in the span.
fn gram_schmidt_complete(mut columns: Vec<CVector>, dim: usize) -> Vec<CVector> {
    let project_out = |v: &mut CVector, basis: &[CVector]| {
        for _ in 0..2 {
            for b in basis {
                let overlap = b.dotc(v);
                *v -= b * overlap;
            }
        }
    };
    let fixed = columns.len();
    for k in 0..fixed {
        let (done, rest) = columns.split_at_mut(k);
        project_out(&mut rest[0], done);
        let n = rest[0].norm();
        rest[0] /= c(n, 0.0);
    }
    for k in 0..dim {
        if columns.len() == dim {
            break;
        }
        let mut e = CVector::zeros(dim);
        e[k] = ONE;
        project_out(&mut e, &columns);
        let n = e.norm();
        if n > 1e-6 {
            columns.push(e / c(n, 0.0));
        }
    }
    columns
}

/// Bulk TFIM energy density `−(⟨ZZ⟩ + λ⟨X⟩)` at the channel fixed point.
pub fn variational_energy(tensor: &MpsTensor, lambda: f64) -> Result<f64> {
    let channel = mps::bond_channel(tensor)?;
    let rho = mps::transfer_spectrum(&channel).fixed_point;
    let z = Pauli::Z.matrix();
    Ok(-(mps::bulk_nn(&channel, &rho, &z, &z) + lambda * mps::bulk_local(&channel, &rho, &Pauli::X.matrix())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    Ansatz,
    FullUnitary,
}

impl fmt::Display for OptimizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizeMode::Ansatz => "ansatz",
            OptimizeMode::FullUnitary => "full_unitary",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeStatus {
    Converged,
    BestEffort,
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub seed: u64,
    pub simplex: NelderMead,
    pub polish_tol: f64,
    /// Used as the starting point of restart 0 when its length fits.
    pub warm_start: Option<Vec<f64>>,
    /// Overrides the layout chosen for `mode = ansatz`.
    pub layout: Option<GateLayout>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0x0a75_a72e,
            simplex: NelderMead::default(),
            polish_tol: 1e-10,
            warm_start: None,
            layout: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizedAnsatz {
    pub lambda: f64,
    pub n_b: usize,
    pub mode: OptimizeMode,
    pub angles: Vec<f64>,
    pub energy: f64,
    /// Present in ansatz mode.
    pub layout: Option<GateLayout>,
    pub unitary: UnitaryGate,
    pub status: OptimizeStatus,
}

/// Serialised form of an optimisation result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedRecord {
    pub lambda: f64,
    pub n_b: usize,
    pub mode: OptimizeMode,
    pub angles: Vec<f64>,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<GateLayout>,
}

impl OptimizedAnsatz {
    pub fn tensor(&self) -> MpsTensor {
        isometry_of(self.unitary.matrix(), 1 << self.n_b).expect("optimizer output is an embedding")
    }

    pub fn params(&self) -> Option<AnsatzParams> {
        self.layout.clone().map(|layout| AnsatzParams { angles: self.angles.clone(), layout })
    }

    pub fn record(&self) -> OptimizedRecord {
        OptimizedRecord {
            lambda: self.lambda,
            n_b: self.n_b,
            mode: self.mode,
            angles: self.angles.clone(),
            energy: self.energy,
            layout: self.layout.clone(),
        }
    }

    /// Rebuild from a serialised record, recomputing the unitary and energy.
    pub fn from_record(record: &OptimizedRecord) -> Result<Self> {
        let (unitary, layout) = match record.mode {
            OptimizeMode::Ansatz => {
                let layout = match &record.layout {
                    Some(l) => l.clone(),
                    None => GateLayout::standard(record.n_b)?,
                };
                let params = AnsatzParams::new(record.angles.clone(), layout.clone())?;
                (build_ansatz_unitary(&params)?, Some(layout))
            }
            OptimizeMode::FullUnitary => {
                let basis = PauliBasis::new(record.n_b + 1);
                if record.angles.len() != basis.len() {
                    return Err(AnsatzError::AngleCount { expected: basis.len(), got: record.angles.len() });
                }
                (UnitaryGate::new(basis.unitary(&record.angles))?, None)
            }
        };
        let tensor = isometry_of(unitary.matrix(), 1 << record.n_b)?;
        let energy = variational_energy(&tensor, record.lambda)?;
        Ok(Self {
            lambda: record.lambda,
            n_b: record.n_b,
            mode: record.mode,
            angles: record.angles.clone(),
            energy,
            layout,
            unitary,
            status: OptimizeStatus::Converged,
        })
    }
}

/// Hermitian generators for the unrestricted parameterisation
/// `U = exp(−i Σ_k θ_k P_k)` over all non-identity Pauli strings.
struct PauliBasis {
    strings: Vec<CMatrix>,
}

impl PauliBasis {
    fn new(n_qubits: usize) -> Self {
        let count = 1usize << (2 * n_qubits);
        let strings = (1..count)
            .map(|code| {
                let factors: Vec<CMatrix> = (0..n_qubits)
                    .map(|q| Pauli::ALL[(code >> (2 * (n_qubits - 1 - q))) & 3].matrix())
                    .collect();
                linalg::kron_all(&factors)
            })
            .collect();
        Self { strings }
    }

    fn len(&self) -> usize {
        self.strings.len()
    }

    fn unitary(&self, theta: &[f64]) -> CMatrix {
        let dim = self.strings[0].nrows();
        let mut h = CMatrix::zeros(dim, dim);
        for (p, &t) in self.strings.iter().zip(theta) {
            h += p * c(t, 0.0);
        }
        let (vals, vecs) = linalg::hermitian_eigen(&h);
        let phases = CMatrix::from_diagonal(&CVector::from_iterator(dim, vals.iter().map(|&v| c(0.0, -v).exp())));
        &vecs * phases * vecs.adjoint()
    }
}

/// Minimise the bulk energy over the ansatz angles (or over all of
/// `U(2^{1+n_b})` in full-unitary mode). Restarts run in parallel; the lowest
/// energy wins with ties going to the lowest restart index.
///
/// For `n_b = 2` in ansatz mode without an explicit layout, the symmetric
/// tiling is kept whenever it improves on the `n_b = 1` optimum. Otherwise
/// the standard tiling is optimised from the embedded `n_b = 1` angles, which
/// cannot end above the `n_b = 1` energy.
pub fn variational_optimize(lambda: f64, n_b: usize, mode: OptimizeMode, config: &OptimizerConfig) -> Result<OptimizedAnsatz> {
    if !(1..=2).contains(&n_b) {
        return Err(AnsatzError::BondQubits(n_b));
    }
    match mode {
        OptimizeMode::FullUnitary => {
            let basis = PauliBasis::new(n_b + 1);
            let chi = 1 << n_b;
            let objective = |x: &[f64]| energy_or_penalty(isometry_of(&basis.unitary(x), chi), lambda);
            let (angles, _, converged) = run_restarts(&objective, basis.len(), config);
            let unitary = UnitaryGate::new(basis.unitary(&angles))?;
            let energy = variational_energy(&isometry_of(unitary.matrix(), chi)?, lambda)?;
            Ok(finish(lambda, n_b, mode, angles, energy, None, unitary, converged))
        }
        OptimizeMode::Ansatz => {
            if let Some(layout) = &config.layout {
                if layout.n_b != n_b {
                    return Err(AnsatzError::BondQubits(layout.n_b));
                }
                return optimize_layout(lambda, layout.clone(), config);
            }
            if n_b == 1 {
                return optimize_layout(lambda, GateLayout::standard(1)?, config);
            }
            let single = optimize_layout(lambda, GateLayout::standard(1)?, &OptimizerConfig { warm_start: None, ..config.clone() })?;
            let symmetric = optimize_layout(lambda, GateLayout::symmetric(2)?, &OptimizerConfig { warm_start: None, ..config.clone() })?;
            if symmetric.energy < single.energy - 1e-9 {
                return Ok(symmetric);
            }
            let seed = embed_single_angles(&single.angles);
            optimize_layout(lambda, GateLayout::standard(2)?, &OptimizerConfig { warm_start: Some(seed), ..config.clone() })
        }
    }
}

/// `n_b = 1` standard angles `[GXY(0,1), R_y0, R_y1]` mapped onto the
/// `n_b = 2` standard layout `[GXY(0,2), GXY(0,1), GXY(1,2), R_y0, R_y1, R_y2]`.
fn embed_single_angles(angles: &[f64]) -> Vec<f64> {
    vec![0.0, 0.0, angles[0], angles[1], 0.0, 0.0, angles[2], angles[3], 0.0]
}

fn optimize_layout(lambda: f64, layout: GateLayout, config: &OptimizerConfig) -> Result<OptimizedAnsatz> {
    layout.validate()?;
    let chi = 1 << layout.n_b;
    let objective = |x: &[f64]| energy_or_penalty(isometry_of(&compose(&layout, x), chi), lambda);
    let (angles, _, converged) = run_restarts(&objective, layout.n_params(), config);
    let unitary = UnitaryGate::new(compose(&layout, &angles))?;
    let energy = variational_energy(&isometry_of(unitary.matrix(), chi)?, lambda)?;
    Ok(finish(lambda, layout.n_b, OptimizeMode::Ansatz, angles, energy, Some(layout), unitary, converged))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    lambda: f64,
    n_b: usize,
    mode: OptimizeMode,
    angles: Vec<f64>,
    energy: f64,
    layout: Option<GateLayout>,
    unitary: UnitaryGate,
    converged: bool,
) -> OptimizedAnsatz {
    OptimizedAnsatz {
        lambda,
        n_b,
        mode,
        angles,
        energy,
        layout,
        unitary,
        status: if converged { OptimizeStatus::Converged } else { OptimizeStatus::BestEffort },
    }
}

/// Objective used inside the optimizer: the fixed point comes from one
/// linear solve with the trace constraint replacing a row of `T − 1`. When
/// that system is singular (degenerate fixed points) the lazy channel
/// `(ρ + E(ρ))/2` is iterated from the maximally mixed state instead.
fn energy_or_penalty(tensor: std::result::Result<MpsTensor, MpsError>, lambda: f64) -> f64 {
    let Ok(tensor) = tensor else { return f64::INFINITY };
    let Ok(channel) = mps::bond_channel(&tensor) else { return f64::INFINITY };
    let rho = solve_fixed_point(&channel).unwrap_or_else(|| lazy_fixed_point(&channel));
    let z = Pauli::Z.matrix();
    -(mps::bulk_nn(&channel, &rho, &z, &z) + lambda * mps::bulk_local(&channel, &rho, &Pauli::X.matrix()))
}

fn solve_fixed_point(channel: &mps::BondChannel) -> Option<CMatrix> {
    let chi = channel.chi();
    let d = chi * chi;
    let t = channel.transfer();
    let mut a = t - CMatrix::identity(d, d);
    for k in 0..d {
        a[(0, k)] = if k % (chi + 1) == 0 { ONE } else { c(0.0, 0.0) };
    }
    let mut rhs = CVector::zeros(d);
    rhs[0] = ONE;
    let v = a.lu().solve(&rhs)?;
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || (t * &v - &v).norm() > 1e-10 {
        return None;
    }
    Some(mps::normalise_density(&linalg::unvec(&v, chi)))
}

fn lazy_fixed_point(channel: &mps::BondChannel) -> CMatrix {
    let chi = channel.chi();
    let mut rho = CMatrix::identity(chi, chi).unscale(chi as f64);
    for _ in 0..2_000 {
        let next = (channel.iterate(&rho, 1) + &rho).scale(0.5);
        let change = linalg::frobenius_distance(&next, &rho);
        rho = next;
        if change < 1e-14 {
            break;
        }
    }
    rho
}

fn run_restarts(objective: &(dyn Fn(&[f64]) -> f64 + Sync), n_params: usize, config: &OptimizerConfig) -> (Vec<f64>, f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let starts: Vec<Vec<f64>> = (0..config.restarts.max(1))
        .map(|k| match (&config.warm_start, k) {
            (Some(w), 0) if w.len() == n_params => w.clone(),
            _ => (0..n_params).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect(),
        })
        .collect();
    let results: Vec<(Vec<f64>, f64, bool)> = starts
        .par_iter()
        .map(|x0| {
            let first = config.simplex.minimize(objective, x0);
            let second = config.simplex.minimize(objective, &first.x);
            let polished = coordinate_polish(objective, &second.x, 1e-3, config.polish_tol, 20_000);
            let (x, v) = if polished.value <= second.value { (polished.x, polished.value) } else { (second.x, second.value) };
            (x, v, second.converged || polished.converged)
        })
        .collect();
    let mut best = 0;
    for (k, r) in results.iter().enumerate() {
        if r.1 < results[best].1 {
            best = k;
        }
    }
    let converged = results[best].2 && results[best].1.is_finite();
    let (x, v, _) = results.into_iter().nth(best).expect("at least one restart");
    (x, v, converged)
}

/// State-preparation unitary for the boundary register.
#[derive(Clone, Debug)]
pub struct BoundaryPrep {
    pub w_unitary: UnitaryGate,
    pub target_state: BoundaryState,
    pub fragment: NativeCircuitFragment,
}

/// `W` with first column equal to the target and the rest completed by
/// Gram–Schmidt over the canonical basis, the last column rephased so that
/// `det W = 1`; compiled to native gates.
pub fn boundary_prep(target: &BoundaryState) -> Result<BoundaryPrep> {
    let chi = target.chi();
    if chi != 2 && chi != 4 {
        return Err(AnsatzError::Dimension { expected: 2, got: chi });
    }
    let mut columns = gram_schmidt_complete(vec![target.vector().clone()], chi);
    let det = CMatrix::from_columns(&columns).determinant();
    columns[chi - 1] *= det.conj() / c(det.norm(), 0.0);
    let w = UnitaryGate::new(CMatrix::from_columns(&columns))?;
    let fragment = decompose_to_native(&w)?;
    Ok(BoundaryPrep { w_unitary: w, target_state: target.clone(), fragment })
}

/// Single-qubit frame changes applied to the bond register ahead of
/// tomography so that a state symmetric under `Z⊗Z` parity and complex
/// conjugation is read out in the `{II, IX, XI, XX, YZ, ZY}` support.
pub fn symmetry_frame(n_b: usize) -> Vec<CMatrix> {
    match n_b {
        2 => vec![gates::axis_cycle().adjoint(), gates::hadamard()],
        _ => vec![CMatrix::identity(2, 2); n_b],
    }
}

#[cfg(test)]
mod tests;
