//! Uniform matrix product states viewed as quantum channels on the bond space.
//!
//! A site tensor `V_σ^{αβ}` (σ physical, α/β bond) defines a left-to-right
//! bond channel with Kraus operators `K_σ = V_σᵀ`, i.e. `(K_σ)_{βα} = V_σ^{αβ}`.
//! Iterating the channel from a boundary state `|L⟩⟨L|` yields the reduced
//! density matrix of the bond register after each site, whose spectrum is the
//! half-chain entanglement spectrum of the state built so far.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{self, c, CMatrix, CVector, C64, ONE, ZERO};
use crate::optimize::NelderMead;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error("bond dimension {0} is not a power of two")]
    BondDimension(usize),
    #[error("site matrices must be {chi}x{chi}, got {rows}x{cols}")]
    Shape { chi: usize, rows: usize, cols: usize },
    #[error("tensor is not an isometry (defect {0:.3e})")]
    NotIsometric(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("trace {0:.6} is not 1")]
    Trace(f64),
    #[error("density matrix has eigenvalue {0:.3e} below the clipping floor")]
    NegativeEigenvalue(f64),
    #[error("channel has a degenerate fixed point; choose the iteration count manually")]
    DegenerateFixedPoint,
    #[error("boundary vector is not normalised (norm {0})")]
    BoundaryNorm(f64),
}

pub type Result<T> = std::result::Result<T, MpsError>;

/// Site tensor of a uniform MPS with physical dimension 2.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsTensor {
    chi: usize,
    /// `sites[σ][(α, β)] = V_σ^{αβ}`
    sites: [CMatrix; 2],
}

impl MpsTensor {
    pub fn new(v0: CMatrix, v1: CMatrix) -> Result<Self> {
        let chi = v0.nrows();
        if chi == 0 || !chi.is_power_of_two() {
            return Err(MpsError::BondDimension(chi));
        }
        for v in [&v0, &v1] {
            if v.nrows() != chi || v.ncols() != chi {
                return Err(MpsError::Shape { chi, rows: v.nrows(), cols: v.ncols() });
            }
        }
        Ok(Self { chi, sites: [v0, v1] })
    }

    /// Build from Kraus operators, `V_σ = K_σᵀ`.
    pub fn from_kraus(k0: &CMatrix, k1: &CMatrix) -> Result<Self> {
        Self::new(k0.transpose(), k1.transpose())
    }

    /// `V_σ = δ_{σ0} 𝟙`: every site in |0⟩, identity bond channel.
    pub fn product_zero(chi: usize) -> Result<Self> {
        Self::new(CMatrix::identity(chi, chi), CMatrix::zeros(chi, chi))
    }

    /// Exact λ = 0 Ising ground state: `K_σ = |σ⟩⟨σ|`, a Z-basis dephasing
    /// channel on one bond qubit.
    pub fn ising_ordered() -> Self {
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        Self::from_kraus(&k0, &k1).expect("valid shape")
    }

    /// λ → ∞ limit: every site in |+⟩, `V_σ = 𝟙/√2`.
    pub fn paramagnet(chi: usize) -> Result<Self> {
        let v = CMatrix::identity(chi, chi).scale(std::f64::consts::FRAC_1_SQRT_2);
        Self::new(v.clone(), v)
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn n_bond_qubits(&self) -> usize {
        self.chi.trailing_zeros() as usize
    }

    /// `V_σ` with rows α and columns β.
    pub fn site(&self, sigma: usize) -> &CMatrix {
        &self.sites[sigma]
    }

    pub fn kraus(&self, sigma: usize) -> CMatrix {
        self.sites[sigma].transpose()
    }

    /// `‖Σ_σ V_σ V_σ† − 𝟙‖_F`
    pub fn isometry_defect(&self) -> f64 {
        let sum = self.sites.iter().fold(CMatrix::zeros(self.chi, self.chi), |acc, v| acc + v * v.adjoint());
        (sum - CMatrix::identity(self.chi, self.chi)).norm()
    }

    /// Gauge transform acting on the bond indices of the Kraus operators:
    /// `K_σ → G K_σ G†`. The physical state is unchanged.
    pub fn gauge(&self, g: &CMatrix) -> Self {
        let k: Vec<CMatrix> = (0..2).map(|s| g * self.kraus(s) * g.adjoint()).collect();
        Self::from_kraus(&k[0], &k[1]).expect("gauge keeps shape")
    }
}

pub fn is_isometry(tensor: &MpsTensor, tol: f64) -> bool {
    tensor.isometry_defect() <= tol
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    chi: usize,
    data: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Serialize for MpsTensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let data = self
            .sites
            .iter()
            .map(|v| {
                (0..self.chi)
                    .map(|a| (0..self.chi).map(|b| [v[(a, b)].re, v[(a, b)].im]).collect())
                    .collect()
            })
            .collect();
        TensorRecord { chi: self.chi, data }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MpsTensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let rec = TensorRecord::deserialize(d)?;
        if rec.data.len() != 2 {
            return Err(D::Error::custom("expected two physical slices"));
        }
        let mut mats = Vec::with_capacity(2);
        for slice in &rec.data {
            if slice.len() != rec.chi || slice.iter().any(|row| row.len() != rec.chi) {
                return Err(D::Error::custom("slice shape does not match chi"));
            }
            mats.push(CMatrix::from_fn(rec.chi, rec.chi, |a, b| c(slice[a][b][0], slice[a][b][1])));
        }
        let v1 = mats.pop().expect("two slices");
        let v0 = mats.pop().expect("two slices");
        MpsTensor::new(v0, v1).map_err(D::Error::custom)
    }
}

/// Pure left-boundary state of the bond register.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryState {
    vector: CVector,
}

impl BoundaryState {
    pub fn new(vector: CVector) -> Result<Self> {
        let n = vector.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(MpsError::BoundaryNorm(n));
        }
        Ok(Self { vector })
    }

    /// Normalise an arbitrary nonzero vector.
    pub fn normalized(vector: CVector) -> Self {
        let n = vector.norm();
        Self { vector: vector / c(n, 0.0) }
    }

    pub fn basis(chi: usize, k: usize) -> Self {
        let mut v = CVector::zeros(chi);
        v[k] = ONE;
        Self { vector: v }
    }

    /// `|+⟩^{⊗n_b}`, the uniform superposition.
    pub fn uniform(chi: usize) -> Self {
        Self::normalized(CVector::from_element(chi, ONE))
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn chi(&self) -> usize {
        self.vector.len()
    }

    pub fn density(&self) -> CMatrix {
        linalg::projector(&self.vector)
    }
}

/// Bond-space channel `ρ ↦ Σ_σ K_σ ρ K_σ†` together with its transfer matrix
/// acting on row-major vectorised operators.
#[derive(Clone, Debug)]
pub struct BondChannel {
    kraus: [CMatrix; 2],
    transfer: CMatrix,
}

impl BondChannel {
    pub fn kraus(&self) -> &[CMatrix; 2] {
        &self.kraus
    }

    pub fn transfer(&self) -> &CMatrix {
        &self.transfer
    }

    pub fn chi(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// `‖Σ_σ K_σ† K_σ − 𝟙‖_F`
    pub fn trace_preservation_defect(&self) -> f64 {
        let chi = self.chi();
        let sum = self.kraus.iter().fold(CMatrix::zeros(chi, chi), |acc, k| acc + k.adjoint() * k);
        (sum - CMatrix::identity(chi, chi)).norm()
    }

    fn apply_unchecked(&self, rho: &CMatrix) -> CMatrix {
        self.kraus.iter().fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
    }

    /// `Σ_{σσ'} O_{σ'σ} K_σ ρ K_σ'†`: the bond operator left after inserting
    /// the single-site observable `O` on the next site and tracing it out.
    pub fn apply_with_observable(&self, rho: &CMatrix, op: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for s in 0..2 {
            for t in 0..2 {
                let w = op[(t, s)];
                if w != ZERO {
                    out += (&self.kraus[s] * rho * self.kraus[t].adjoint()) * w;
                }
            }
        }
        out
    }

    /// Iterate the channel `n` times.
    pub fn iterate(&self, rho: &CMatrix, n: usize) -> CMatrix {
        (0..n).fold(rho.clone(), |r, _| self.apply_unchecked(&r))
    }
}

pub fn bond_channel(tensor: &MpsTensor) -> Result<BondChannel> {
    let defect = tensor.isometry_defect();
    if defect > 1e-8 {
        return Err(MpsError::NotIsometric(defect));
    }
    let kraus = [tensor.kraus(0), tensor.kraus(1)];
    let transfer = kraus.iter().fold(CMatrix::zeros(tensor.chi.pow(2), tensor.chi.pow(2)), |acc, k| {
        acc + linalg::kron(k, &k.map(|z| z.conj()))
    });
    Ok(BondChannel { kraus, transfer })
}

pub fn apply_channel(channel: &BondChannel, rho: &CMatrix) -> Result<CMatrix> {
    let chi = channel.chi();
    if rho.nrows() != chi || rho.ncols() != chi {
        return Err(MpsError::Dimension { expected: chi, got: rho.nrows() });
    }
    Ok(channel.apply_unchecked(rho))
}

/// Full spectral data of the transfer matrix.
#[derive(Clone, Debug)]
pub struct ChannelSpectrum {
    /// Sorted by descending modulus.
    pub eigenvalues: Vec<C64>,
    /// Hermitian, PSD, unit trace.
    pub fixed_point: CMatrix,
    /// Eigen-operator of the largest-modulus eigenvalue strictly inside the
    /// unit circle, when the fixed point is unique.
    pub subdominant_mode: Option<CMatrix>,
    pub subdominant_eigenvalue: Option<C64>,
    /// More than one eigenvalue on the unit circle.
    pub degenerate: bool,
}

impl ChannelSpectrum {
    pub fn chi(&self) -> usize {
        self.fixed_point.nrows()
    }

    /// `|μ₂|`, zero when every other eigenvalue vanishes.
    pub fn subdominant_modulus(&self) -> Option<f64> {
        if self.degenerate {
            None
        } else {
            Some(self.subdominant_eigenvalue.map_or(0.0, |m| m.norm()))
        }
    }
}

const UNIT_CIRCLE_TOL: f64 = 1e-8;

/// Spectrum seeded with the maximally mixed state for degenerate channels.
pub fn transfer_spectrum(channel: &BondChannel) -> ChannelSpectrum {
    let chi = channel.chi();
    transfer_spectrum_seeded(channel, &CMatrix::identity(chi, chi).scale(1.0 / chi as f64))
}

/// Spectrum of the transfer matrix. When several eigenvalues sit on the unit
/// circle the fixed point is the one reached from `seed` under repeated
/// (lazy) application of the channel.
pub fn transfer_spectrum_seeded(channel: &BondChannel, seed: &CMatrix) -> ChannelSpectrum {
    let chi = channel.chi();
    let eigenvalues = linalg::eigenvalues(&channel.transfer);
    let on_circle = eigenvalues.iter().filter(|m| m.norm() > 1.0 - UNIT_CIRCLE_TOL).count();
    let degenerate = on_circle > 1;

    let raw_fixed = if degenerate {
        unvec_fixed_from_seed(channel, seed)
    } else {
        let v = linalg::eigenvector_near(&channel.transfer, ONE);
        linalg::unvec(&v, chi)
    };
    let fixed_point = normalise_density(&raw_fixed);

    let (subdominant_mode, subdominant_eigenvalue) = if degenerate {
        (None, None)
    } else {
        match eigenvalues.iter().skip(1).find(|m| m.norm() < 1.0 - UNIT_CIRCLE_TOL) {
            Some(&mu) if mu.norm() > 1e-13 => {
                let v = linalg::eigenvector_near(&channel.transfer, mu);
                (Some(linalg::unvec(&v, chi)), Some(mu))
            }
            _ => (None, None),
        }
    };

    ChannelSpectrum {
        eigenvalues,
        fixed_point,
        subdominant_mode,
        subdominant_eigenvalue,
        degenerate,
    }
}

/// Apply `((1 + T)/2)^(2^48)` to `vec(seed)` by repeated squaring. The lazy
/// map has the same fixed points as `T` and no other unit-modulus eigenvalue.
fn unvec_fixed_from_seed(channel: &BondChannel, seed: &CMatrix) -> CMatrix {
    let d = channel.transfer.nrows();
    let mut t = (&channel.transfer + CMatrix::identity(d, d)).scale(0.5);
    for _ in 0..48 {
        t = &t * &t;
    }
    linalg::unvec(&(t * linalg::vec_of(seed)), channel.chi())
}

/// Hermitise, clip negative eigenvalues and renormalise to unit trace.
pub fn normalise_density(m: &CMatrix) -> CMatrix {
    let mut h = linalg::hermitize(m);
    let tr = h.trace().re;
    if tr.abs() > 0.0 {
        h /= c(tr, 0.0);
    }
    let (vals, vecs) = linalg::hermitian_eigen(&h);
    if vals.iter().all(|&v| v >= 0.0) {
        return h;
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(clipped.len(), clipped.iter().map(|&v| c(v / total, 0.0))));
    &vecs * diag * vecs.adjoint()
}

/// Base-2 von Neumann entropy and the descending spectrum it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub entropy_bits: f64,
    pub schmidt_spectrum: Vec<f64>,
}

/// Entropy of a spectrum, 0·log 0 = 0.
pub fn entropy_of_spectrum(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum::<f64>().max(0.0)
}

pub fn entanglement_entropy(rho: &CMatrix) -> Result<EntropyResult> {
    if !rho.is_square() {
        return Err(MpsError::Dimension { expected: rho.nrows(), got: rho.ncols() });
    }
    let herm = (rho - rho.adjoint()).norm();
    if herm > 1e-8 {
        return Err(MpsError::NotHermitian(herm));
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(MpsError::Trace(tr));
    }
    let vals = linalg::hermitian_eigenvalues(rho);
    if let Some(&low) = vals.last() {
        if low < -1e-8 {
            return Err(MpsError::NegativeEigenvalue(low));
        }
    }
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let schmidt_spectrum: Vec<f64> = clipped.iter().map(|v| v / total).collect();
    Ok(EntropyResult { entropy_bits: entropy_of_spectrum(&schmidt_spectrum), schmidt_spectrum })
}

fn check_boundary(tensor: &MpsTensor, boundary: &BoundaryState) -> Result<()> {
    if boundary.chi() != tensor.chi() {
        return Err(MpsError::Dimension { expected: tensor.chi(), got: boundary.chi() });
    }
    Ok(())
}

/// Bond density matrix after `j` sites have been generated from `|L⟩`.
pub fn bond_state(tensor: &MpsTensor, boundary: &BoundaryState, j: usize) -> Result<CMatrix> {
    check_boundary(tensor, boundary)?;
    let channel = bond_channel(tensor)?;
    Ok(channel.iterate(&boundary.density(), j))
}

/// Entanglement entropy across the cut right after site `j`.
pub fn half_chain_entropy(tensor: &MpsTensor, boundary: &BoundaryState, j: usize) -> Result<EntropyResult> {
    let rho = bond_state(tensor, boundary, j)?;
    entanglement_entropy(&normalise_density(&rho))
}

/// `⟨O_j⟩` for sites numbered from 1.
pub fn expectation_local(tensor: &MpsTensor, boundary: &BoundaryState, j: usize, op: &CMatrix) -> Result<f64> {
    let channel = bond_channel(tensor)?;
    check_boundary(tensor, boundary)?;
    let rho = channel.iterate(&boundary.density(), j.saturating_sub(1));
    Ok(channel.apply_with_observable(&rho, op).trace().re)
}

/// `⟨A_j B_{j+1}⟩` for sites numbered from 1.
pub fn expectation_nn(
    tensor: &MpsTensor,
    boundary: &BoundaryState,
    j: usize,
    op_a: &CMatrix,
    op_b: &CMatrix,
) -> Result<f64> {
    let channel = bond_channel(tensor)?;
    check_boundary(tensor, boundary)?;
    let rho = channel.iterate(&boundary.density(), j.saturating_sub(1));
    let after_a = channel.apply_with_observable(&rho, op_a);
    Ok(channel.apply_with_observable(&after_a, op_b).trace().re)
}

/// Bulk (translation-invariant) expectation values evaluated at the fixed
/// point of the channel.
pub fn bulk_local(channel: &BondChannel, fixed_point: &CMatrix, op: &CMatrix) -> f64 {
    channel.apply_with_observable(fixed_point, op).trace().re
}

pub fn bulk_nn(channel: &BondChannel, fixed_point: &CMatrix, op_a: &CMatrix, op_b: &CMatrix) -> f64 {
    let after_a = channel.apply_with_observable(fixed_point, op_a);
    channel.apply_with_observable(&after_a, op_b).trace().re
}

/// Smallest `j ≥ 1` with `|μ₂|^j ≤ tol`.
pub fn burn_in_length(channel: &BondChannel, tol: f64) -> Result<usize> {
    burn_in_from_spectrum(&transfer_spectrum(channel), tol)
}

pub fn burn_in_from_spectrum(spectrum: &ChannelSpectrum, tol: f64) -> Result<usize> {
    let mu = spectrum.subdominant_modulus().ok_or(MpsError::DegenerateFixedPoint)?;
    Ok(burn_in_for_modulus(mu, tol))
}

pub fn burn_in_for_modulus(mu: f64, tol: f64) -> usize {
    if mu <= 1e-15 || tol >= 1.0 {
        return 1;
    }
    let j = (tol.ln() / mu.ln() - 1e-9).ceil();
    (j.max(1.0)) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionStatus {
    /// The overlap reached the numerical zero.
    Converged,
    /// Returned the best state found; the overlap is bounded away from 0.
    BestEffort,
}

#[derive(Clone, Debug)]
pub struct BoundarySelection {
    pub boundary: BoundaryState,
    /// `|Tr(E₂† |L⟩⟨L|)|` with `E₂` scaled to unit Frobenius norm.
    pub overlap: f64,
    pub status: SelectionStatus,
}

/// Pure boundary state with minimal Hilbert–Schmidt overlap onto the slowest
/// decaying eigen-operator. Deterministic: restarts come from a fixed seed.
///
/// Real states inside a single computational `Z`-parity sector of the bond
/// register are tried first; they keep a parity-covariant real channel in
/// its symmetric sector. The unrestricted complex search runs only when no
/// sector state reaches the numerical zero.
pub fn select_boundary(spectrum: &ChannelSpectrum) -> Result<BoundarySelection> {
    let mode = spectrum.subdominant_mode.as_ref().ok_or(MpsError::DegenerateFixedPoint)?;
    let chi = mode.nrows();
    let mut best: Option<BoundarySelection> = None;
    for parity in 0..2u32 {
        let sector: Vec<usize> = (0..chi).filter(|k| k.count_ones() % 2 == parity).collect();
        let sel = minimise_sector_overlap(mode, &sector, 16, BOUNDARY_SEED);
        if sel.status == SelectionStatus::Converged && best.as_ref().is_none_or(|b| sel.overlap < b.overlap) {
            best = Some(sel);
        }
    }
    Ok(match best {
        Some(sel) => sel,
        None => minimise_pure_overlap(mode, 16, BOUNDARY_SEED),
    })
}

const BOUNDARY_SEED: u64 = 0x005e_edb0;

fn scaled_mode(mode: &CMatrix) -> CMatrix {
    mode.scale(1.0 / mode.norm().max(f64::MIN_POSITIVE)).adjoint()
}

fn selection(v: CVector, overlap: f64) -> BoundarySelection {
    BoundarySelection {
        boundary: BoundaryState::normalized(v),
        overlap,
        status: if overlap <= 1e-8 { SelectionStatus::Converged } else { SelectionStatus::BestEffort },
    }
}

/// Real unit vectors supported on `sector`.
fn minimise_sector_overlap(mode: &CMatrix, sector: &[usize], restarts: usize, seed: u64) -> BoundarySelection {
    let chi = mode.nrows();
    let e_dag = scaled_mode(mode);
    let to_state = |x: &[f64]| -> CVector {
        let mut v = CVector::zeros(chi);
        for (&k, &a) in sector.iter().zip(x) {
            v[k] = c(a, 0.0);
        }
        let n = v.norm().max(f64::MIN_POSITIVE);
        v / c(n, 0.0)
    };
    let overlap = |x: &[f64]| (to_state(x).adjoint() * &e_dag * to_state(x))[(0, 0)].norm();
    if sector.len() == 1 {
        return selection(to_state(&[1.0]), overlap(&[1.0]));
    }
    let nm = NelderMead { xatol: 1e-13, fatol: 1e-30, max_evals: 10_000, initial_step: 0.3 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..restarts {
        let x0: Vec<f64> = (0..sector.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = nm.minimize(|x| overlap(x).powi(2), &x0);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (x, _) = best.expect("at least one restart");
    // fix the sign so that the largest component is positive
    let mut v = to_state(&x);
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
    if pivot.re < 0.0 {
        v.neg_mut();
    }
    selection(v, overlap(&x))
}

pub(crate) fn minimise_pure_overlap(mode: &CMatrix, restarts: usize, seed: u64) -> BoundarySelection {
    let chi = mode.nrows();
    let e_dag = scaled_mode(mode);
    let to_state = |x: &[f64]| -> CVector {
        let v = CVector::from_fn(chi, |k, _| c(x[2 * k], x[2 * k + 1]));
        let n = v.norm().max(f64::MIN_POSITIVE);
        v / c(n, 0.0)
    };
    let overlap = |x: &[f64]| -> f64 {
        let v = to_state(x);
        (v.adjoint() * &e_dag * &v)[(0, 0)].norm()
    };
    let objective = |x: &[f64]| overlap(x).powi(2);

    let nm = NelderMead { xatol: 1e-12, fatol: 1e-30, max_evals: 40_000, initial_step: 0.3 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..restarts {
        let start = linalg::random_state(chi, &mut rng);
        let x0: Vec<f64> = start.iter().flat_map(|z| [z.re, z.im]).collect();
        let m = nm.minimize(objective, &x0);
        let m = nm.minimize(objective, &m.x);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (x, _) = best.expect("at least one restart");
    let value = overlap(&x);
    selection(to_state(&x), value)
}

impl fmt::Display for EntropyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} bits", self.entropy_bits)
    }
}

/// Real-matrix helper used by tests and oracles.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    DMatrix::from_row_slice(rows, cols, data).map(|x| c(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Pauli;

    fn rho_plus() -> CMatrix {
        real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5])
    }

    #[test]
    fn isometry_examples() {
        let product = MpsTensor::product_zero(2).unwrap();
        assert!(is_isometry(&product, 1e-12));
        let doubled = MpsTensor::new(CMatrix::identity(2, 2), CMatrix::identity(2, 2)).unwrap();
        assert!(!is_isometry(&doubled, 1e-3));
        assert!(MpsTensor::new(CMatrix::identity(3, 3), CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn non_isometric_channel_rejected() {
        let doubled = MpsTensor::new(CMatrix::identity(2, 2), CMatrix::identity(2, 2)).unwrap();
        assert!(matches!(bond_channel(&doubled), Err(MpsError::NotIsometric(_))));
    }

    #[test]
    fn identity_channel_spectrum_is_degenerate() {
        let ch = bond_channel(&MpsTensor::product_zero(2).unwrap()).unwrap();
        let rho = rho_plus();
        assert!(linalg::frobenius_distance(&apply_channel(&ch, &rho).unwrap(), &rho) < 1e-15);
        let spec = transfer_spectrum(&ch);
        assert!(spec.degenerate);
        assert_eq!(spec.eigenvalues.len(), 4);
        assert!(spec.eigenvalues.iter().all(|m| (m - ONE).norm() < 1e-12));
        assert!(burn_in_length(&ch, 1e-3).is_err());
    }

    #[test]
    fn dephasing_channel() {
        let ch = bond_channel(&MpsTensor::ising_ordered()).unwrap();
        let out = apply_channel(&ch, &rho_plus()).unwrap();
        assert!(linalg::frobenius_distance(&out, &CMatrix::identity(2, 2).scale(0.5)) < 1e-15);
        let spec = transfer_spectrum(&ch);
        let moduli: Vec<f64> = spec.eigenvalues.iter().map(|m| m.norm()).collect();
        assert!((moduli[0] - 1.0).abs() < 1e-12 && (moduli[1] - 1.0).abs() < 1e-12);
        assert!(moduli[2] < 1e-12 && moduli[3] < 1e-12);
        assert!(spec.degenerate);
        // Seeded from a symmetric boundary the fixed point is the cat branch.
        let seeded = transfer_spectrum_seeded(&ch, &rho_plus());
        assert!(linalg::frobenius_distance(&seeded.fixed_point, &CMatrix::identity(2, 2).scale(0.5)) < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let half = CMatrix::identity(2, 2).scale(0.5);
        assert!((entanglement_entropy(&half).unwrap().entropy_bits - 1.0).abs() < 1e-14);
        assert!(entanglement_entropy(&rho_plus()).unwrap().entropy_bits.abs() < 1e-12);
        let d = real_matrix(2, 2, &[0.9, 0.0, 0.0, 0.1]);
        // -0.9 log2 0.9 - 0.1 log2 0.1
        let expect = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
        let got = entanglement_entropy(&d).unwrap();
        assert!((got.entropy_bits - expect).abs() < 1e-14);
        assert!((got.entropy_bits - 0.468996).abs() < 1e-6);
        assert_eq!(got.schmidt_spectrum, vec![0.9, 0.1]);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        let not_herm = real_matrix(2, 2, &[0.5, 0.3, 0.0, 0.5]);
        assert!(matches!(entanglement_entropy(&not_herm), Err(MpsError::NotHermitian(_))));
        let bad_trace = real_matrix(2, 2, &[0.7, 0.0, 0.0, 0.7]);
        assert!(matches!(entanglement_entropy(&bad_trace), Err(MpsError::Trace(_))));
        let negative = real_matrix(2, 2, &[1.1, 0.0, 0.0, -0.1]);
        assert!(matches!(entanglement_entropy(&negative), Err(MpsError::NegativeEigenvalue(_))));
    }

    #[test]
    fn half_chain_entropy_examples() {
        let t = MpsTensor::ising_ordered();
        let plus = BoundaryState::uniform(2);
        assert!(half_chain_entropy(&t, &plus, 0).unwrap().entropy_bits.abs() < 1e-12);
        for j in 1..5 {
            assert!((half_chain_entropy(&t, &plus, j).unwrap().entropy_bits - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_tensor_expectations() {
        let x = Pauli::X.matrix();
        let z = Pauli::Z.matrix();
        let ordered = MpsTensor::ising_ordered();
        let plus = BoundaryState::uniform(2);
        for j in 1..4 {
            assert!((expectation_nn(&ordered, &plus, j, &z, &z).unwrap() - 1.0).abs() < 1e-12);
            assert!(expectation_local(&ordered, &plus, j, &x).unwrap().abs() < 1e-12);
        }
        let para = MpsTensor::paramagnet(2).unwrap();
        let b = BoundaryState::basis(2, 0);
        assert!((expectation_local(&para, &b, 3, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(expectation_nn(&para, &b, 3, &z, &z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn burn_in_examples() {
        assert_eq!(burn_in_for_modulus(0.0, 1e-3), 1);
        assert_eq!(burn_in_for_modulus(0.5, 1e-3), 10);
        assert_eq!(burn_in_for_modulus(0.5, 0.25), 2);
    }

    #[test]
    fn select_boundary_zero_overlap_for_z_mode() {
        let spec = ChannelSpectrum {
            eigenvalues: vec![ONE, c(0.5, 0.0)],
            fixed_point: CMatrix::identity(2, 2).scale(0.5),
            subdominant_mode: Some(Pauli::Z.matrix()),
            subdominant_eigenvalue: Some(c(0.5, 0.0)),
            degenerate: false,
        };
        let sel = select_boundary(&spec).unwrap();
        assert_eq!(sel.status, SelectionStatus::Converged);
        assert!(sel.overlap < 1e-8);
        let v = sel.boundary.vector();
        assert!((v[0].norm_sqr() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn select_boundary_reports_nonzero_floor() {
        // 𝟙 + Z/2 is positive definite: no pure state has zero overlap.
        let mode = real_matrix(2, 2, &[1.5, 0.0, 0.0, 0.5]);
        let sel = minimise_pure_overlap(&mode, 4, 1);
        assert_eq!(sel.status, SelectionStatus::BestEffort);
        let floor = 0.5 / mode.norm();
        assert!((sel.overlap - floor).abs() < 1e-6);
    }

    #[test]
    fn tensor_json_layout() {
        let t = MpsTensor::ising_ordered();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["chi"], 2);
        assert_eq!(json["data"][1][1][1], serde_json::json!([1.0, 0.0]));
        assert_eq!(json["data"][0][0][0], serde_json::json!([1.0, 0.0]));
        let back: MpsTensor = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
    }
}
