//! From shot records to physics: energies from the `X, Z, Z` schedule,
//! bond-register tomography, positivity repair, entropies and bootstrap
//! error bars.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{readout_label, Basis, ShotRecord};
use crate::linalg::{self, c, CMatrix, Pauli};
use crate::mps;
use crate::noise::{self, ZnePair};

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("no shots to estimate from")]
    NoShots,
    #[error("missing measurement label {0:?}")]
    MissingLabel(String),
    #[error("tomogram lacks setting {0}")]
    MissingSetting(String),
    #[error("setting {setting} has only {shots} shots (minimum {minimum})")]
    InsufficientShots { setting: String, shots: u64, minimum: u64 },
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    Bootstrap(usize),
    #[error("tomograms are not matched: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

/// Tensor product of single-qubit Paulis, one label per wire.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliOp(pub Vec<Pauli>);

impl PauliOp {
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|ch| match ch {
                'I' => Some(Pauli::I),
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(PauliOp)
    }

    pub fn identity(n: usize) -> Self {
        PauliOp(vec![Pauli::I; n])
    }

    pub fn matrix(&self) -> CMatrix {
        let factors: Vec<CMatrix> = self.0.iter().map(|p| p.matrix()).collect();
        linalg::kron_all(&factors)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Every Pauli string on `n` wires, identity first.
    pub fn all(n: usize) -> Vec<Self> {
        (0..1usize << (2 * n))
            .map(|code| PauliOp((0..n).map(|q| Pauli::ALL[(code >> (2 * (n - 1 - q))) & 3]).collect()))
            .collect()
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Pauli strings allowed by the `ℤ₂` symmetry in the readout frame.
pub fn symmetric_support() -> Vec<PauliOp> {
    ["II", "IX", "XI", "XX", "YZ", "ZY"].iter().filter_map(|s| PauliOp::parse(s)).collect()
}

// ---------------------------------------------------------------------------
// Energy

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub e: f64,
    pub sigma: f64,
    pub n_shots: usize,
    pub mean_x: f64,
    pub mean_zz: f64,
}

/// Labels of the `X` outcome and of the two consecutive `Z` outcomes,
/// read from the `<basis><iteration>` measurement labels.
pub fn energy_labels(shot: &ShotRecord) -> Result<(String, String, String)> {
    let pick = |basis: char| -> Vec<(usize, String)> {
        let mut v: Vec<(usize, String)> = shot
            .outcomes
            .keys()
            .filter_map(|k| {
                let mut chars = k.chars();
                (chars.next() == Some(basis)).then(|| chars.as_str().parse::<usize>().ok().map(|it| (it, k.clone())))?
            })
            .collect();
        v.sort();
        v
    };
    let xs = pick('X');
    let zs = pick('Z');
    let x = xs.last().ok_or_else(|| EstimationError::MissingLabel("X".into()))?.1.clone();
    if zs.len() < 2 {
        return Err(EstimationError::MissingLabel("Z".into()));
    }
    let (z1, z2) = (&zs[zs.len() - 2], &zs[zs.len() - 1]);
    if z2.0 != z1.0 + 1 {
        return Err(EstimationError::MissingLabel(format!("Z{}", z1.0 + 1)));
    }
    Ok((x, z1.1.clone(), z2.1.clone()))
}

/// `e = −(⟨ZZ⟩ + λ⟨X⟩)` with the standard error of the per-shot values.
pub fn energy_from_records(shots: &[ShotRecord], lambda: f64) -> Result<EnergyEstimate> {
    let first = shots.first().ok_or(EstimationError::NoShots)?;
    let (x, z1, z2) = energy_labels(first)?;
    let get = |s: &ShotRecord, l: &str| s.outcomes.get(l).copied().ok_or_else(|| EstimationError::MissingLabel(l.to_string()));
    let mut sum_x = 0i64;
    let mut sum_zz = 0i64;
    // counts of the four (x, zz) combinations make the result order independent
    let mut combos = [[0u64; 2]; 2];
    for s in shots {
        let xv = get(s, &x)?;
        let zz = get(s, &z1)? * get(s, &z2)?;
        sum_x += i64::from(xv);
        sum_zz += i64::from(zz);
        combos[usize::from(xv < 0)][usize::from(zz < 0)] += 1;
    }
    let n = shots.len() as f64;
    let mean_x = sum_x as f64 / n;
    let mean_zz = sum_zz as f64 / n;
    let e = -(mean_zz + lambda * mean_x);
    // a quarter pseudo-count per cell keeps sigma non-zero when every shot agrees
    let mut var = 0.0;
    for (i, row) in combos.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let xv = if i == 0 { 1.0 } else { -1.0 };
            let zz = if j == 0 { 1.0 } else { -1.0 };
            let ei = -(zz + lambda * xv);
            var += (count as f64 + 0.25) * (ei - e).powi(2);
        }
    }
    let sigma = if shots.len() > 1 { (var / n / n).sqrt() } else { 0.0 };
    Ok(EnergyEstimate { e, sigma, n_shots: shots.len(), mean_x, mean_zz })
}

/// Energy from exact marginals.
pub fn energy_from_expectations(mean_x: f64, mean_zz: f64, lambda: f64) -> f64 {
    -(mean_zz + lambda * mean_x)
}

// ---------------------------------------------------------------------------
// Tomography

fn setting_key(setting: &[Basis]) -> String {
    setting.iter().map(|b| b.symbol()).collect()
}

fn parse_setting(key: &str) -> Vec<Basis> {
    key.chars()
        .map(|ch| match ch {
            'X' => Basis::X,
            'Y' => Basis::Y,
            _ => Basis::Z,
        })
        .collect()
}

/// Outcome counts per measurement setting. Outcome strings hold one
/// character per bond wire, `0` for eigenvalue `+1` and `1` for `−1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tomogram {
    pub n_qubits: usize,
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub restricted: bool,
    pub mitigated: bool,
}

impl Tomogram {
    pub fn new(n_qubits: usize, restricted: bool) -> Self {
        Self { n_qubits, counts: BTreeMap::new(), restricted, mitigated: false }
    }

    /// Tally the bond readout labels of each shot.
    pub fn add_shots(&mut self, setting: &[Basis], shots: &[ShotRecord]) -> Result<()> {
        let table = self.counts.entry(setting_key(setting)).or_default();
        for s in shots {
            let mut key = String::with_capacity(setting.len());
            for w in 1..=setting.len() {
                let label = readout_label(w);
                let v = s.outcomes.get(&label).ok_or(EstimationError::MissingLabel(label))?;
                key.push(if *v > 0 { '0' } else { '1' });
            }
            *table.entry(key).or_default() += 1;
        }
        Ok(())
    }

    pub fn shots(&self, setting: &str) -> u64 {
        self.counts.get(setting).map_or(0, |t| t.values().sum())
    }

    pub fn min_shots(&self) -> u64 {
        self.counts.keys().map(|k| self.shots(k)).min().unwrap_or(0)
    }

    /// Pooled estimates of every Pauli string readable from the settings,
    /// each with its standard error.
    pub fn expectations(&self) -> BTreeMap<PauliOp, (f64, f64)> {
        let mut sums: BTreeMap<PauliOp, (f64, f64, f64)> = BTreeMap::new();
        for (key, table) in &self.counts {
            let setting = parse_setting(key);
            let k = setting.len();
            for subset in 1..(1usize << k) {
                let op = PauliOp((0..k).map(|q| if subset >> (k - 1 - q) & 1 == 1 { setting[q].pauli() } else { Pauli::I }).collect());
                let entry = sums.entry(op).or_insert((0.0, 0.0, 0.0));
                for (outcome, &count) in table {
                    let odd = outcome.chars().enumerate().filter(|&(q, ch)| subset >> (k - 1 - q) & 1 == 1 && ch == '1').count() % 2;
                    let v = if odd == 0 { 1.0 } else { -1.0 };
                    entry.0 += v * count as f64;
                    entry.1 += count as f64;
                }
            }
        }
        sums.into_iter()
            .map(|(op, (s, n, _))| {
                let mean = s / n;
                (op, (mean, ((1.0 - mean * mean).max(0.0) / n).sqrt()))
            })
            .collect()
    }

    /// Multinomial resample of every setting with its own total.
    fn resample(&self, rng: &mut ChaCha8Rng) -> Tomogram {
        let counts = self
            .counts
            .iter()
            .map(|(key, table)| {
                let total: u64 = table.values().sum();
                let mut remaining = total;
                let mut mass = 1.0f64;
                let mut out = BTreeMap::new();
                let n_outcomes = table.len();
                for (idx, (outcome, &count)) in table.iter().enumerate() {
                    let p = count as f64 / total as f64;
                    let draw = if idx + 1 == n_outcomes || remaining == 0 {
                        remaining
                    } else {
                        let q = (p / mass).clamp(0.0, 1.0);
                        Binomial::new(remaining, q).expect("valid binomial").sample(rng)
                    };
                    remaining -= draw;
                    mass -= p;
                    out.insert(outcome.clone(), draw);
                }
                (key.clone(), out)
            })
            .collect();
        Tomogram { counts, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub rho: CMatrix,
    pub psd_projected: bool,
    pub raw_min_eigenvalue: f64,
    /// Largest `|⟨P⟩|/σ` over measured Pauli strings outside the symmetric
    /// support (restricted two-qubit reconstructions only).
    pub symmetry_violation: Option<f64>,
}

impl DensityEstimate {
    pub fn symmetry_warning(&self) -> bool {
        self.symmetry_violation.is_some_and(|v| v > 3.0)
    }

    pub fn entropy_bits(&self) -> f64 {
        mps::entropy_of_spectrum(&linalg::hermitian_eigenvalues(&self.rho))
    }
}

/// `ρ = 2^{−n} Σ_P ⟨P⟩ P` from the given expectations (`⟨I⟩ = 1`), then
/// projected onto the PSD cone. Strings absent from the map count as zero.
pub fn density_from_expectations(n_qubits: usize, expectations: &BTreeMap<PauliOp, f64>) -> DensityEstimate {
    let dim = 1usize << n_qubits;
    let mut rho = CMatrix::identity(dim, dim);
    for (op, &v) in expectations {
        if op.weight() > 0 {
            rho += op.matrix() * c(v, 0.0);
        }
    }
    project_psd(&(rho / c(dim as f64, 0.0)))
}

pub fn reconstruct_1q(tomogram: &Tomogram) -> Result<DensityEstimate> {
    for b in ["X", "Y", "Z"] {
        if tomogram.shots(b) == 0 {
            return Err(EstimationError::MissingSetting(b.into()));
        }
    }
    let exp: BTreeMap<PauliOp, f64> = tomogram.expectations().into_iter().map(|(k, (v, _))| (k, v)).collect();
    Ok(density_from_expectations(1, &exp))
}

pub fn required_settings(restricted: bool) -> Vec<String> {
    if restricted {
        vec!["XX".into(), "YZ".into(), "ZY".into()]
    } else {
        Basis::ALL.iter().flat_map(|a| Basis::ALL.iter().map(move |b| format!("{a}{b}"))).collect()
    }
}

/// Linear inversion over all 16 strings (full) or over the symmetric
/// support only (restricted).
pub fn reconstruct_2q(tomogram: &Tomogram, restricted: bool) -> Result<DensityEstimate> {
    for s in required_settings(restricted) {
        if tomogram.shots(&s) == 0 {
            return Err(EstimationError::MissingSetting(s));
        }
    }
    let measured = tomogram.expectations();
    Ok(two_qubit_estimate(&measured, restricted))
}

fn two_qubit_estimate(measured: &BTreeMap<PauliOp, (f64, f64)>, restricted: bool) -> DensityEstimate {
    let support = symmetric_support();
    let mut violation: Option<f64> = None;
    let exp: BTreeMap<PauliOp, f64> = measured
        .iter()
        .filter_map(|(op, &(v, err))| {
            if restricted && !support.contains(op) {
                let z = if err > 0.0 { v.abs() / err } else if v.abs() > 1e-12 { f64::INFINITY } else { 0.0 };
                violation = Some(violation.map_or(z, |w: f64| w.max(z)));
                None
            } else {
                Some((op.clone(), v))
            }
        })
        .collect();
    let mut est = density_from_expectations(2, &exp);
    est.symmetry_violation = violation;
    est
}

/// Eigenvalues above `-PSD_SLACK` count as nonnegative (rounding noise).
const PSD_SLACK: f64 = 1e-14;

/// Nearest unit-trace PSD matrix by eigenvalue water-filling: negative
/// eigenvalues are zeroed from the bottom up and their total is spread
/// evenly over the surviving ones.
pub fn project_psd(rho: &CMatrix) -> DensityEstimate {
    let h = linalg::hermitize(rho);
    let tr = h.trace().re;
    let h = if tr.abs() > 0.0 { h / c(tr, 0.0) } else { h };
    let (mut vals, vecs) = linalg::hermitian_eigen(&h);
    let raw_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if raw_min >= -PSD_SLACK {
        return DensityEstimate { rho: h, psd_projected: false, raw_min_eigenvalue: raw_min, symmetry_violation: None };
    }
    // `vals` is sorted in descending order
    let d = vals.len();
    let mut deficit = 0.0;
    let mut kept = d;
    while kept > 0 && vals[kept - 1] + deficit / (kept as f64) < 0.0 {
        deficit += vals[kept - 1];
        vals[kept - 1] = 0.0;
        kept -= 1;
    }
    for v in vals.iter_mut().take(kept) {
        *v += deficit / kept as f64;
    }
    let diag = CMatrix::from_diagonal(&linalg::CVector::from_iterator(d, vals.iter().map(|&v| c(v, 0.0))));
    let out = &vecs * diag * vecs.adjoint();
    DensityEstimate { rho: linalg::hermitize(&out), psd_projected: true, raw_min_eigenvalue: raw_min, symmetry_violation: None }
}

/// Reconstruction of a tomogram, optionally zero-noise extrapolated against
/// its folded twin (extrapolation acts on the Pauli expectations before
/// the density matrix is assembled and projected).
pub fn reconstruct(tomogram: &Tomogram, folded: Option<&Tomogram>, restricted: bool) -> Result<DensityEstimate> {
    let mut measured = tomogram.expectations();
    if let Some(f) = folded {
        let f_exp = f.expectations();
        let pair = ZnePair {
            base: measured.iter().map(|(k, v)| (k.to_string(), v.0)).collect(),
            folded: f_exp.iter().map(|(k, v)| (k.to_string(), v.0)).collect(),
        };
        let mitigated = noise::zne_extrapolate(&pair).map_err(|e| EstimationError::Mismatch(e.to_string()))?;
        for (op, entry) in measured.iter_mut() {
            let e3 = f_exp[op];
            entry.0 = mitigated[&op.to_string()];
            // σ of E₁ − (E₃ − E₁)/2 for independent E₁, E₃
            entry.1 = (2.25 * entry.1 * entry.1 + 0.25 * e3.1 * e3.1).sqrt();
        }
    }
    match tomogram.n_qubits {
        1 => {
            let exp = measured.into_iter().map(|(k, (v, _))| (k, v)).collect();
            Ok(density_from_expectations(1, &exp))
        }
        _ => Ok(two_qubit_estimate(&measured, restricted)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub entropy: f64,
    pub sigma: f64,
}

pub const MIN_SHOTS_PER_SETTING: u64 = 50;

/// Point estimate from the full data and the standard deviation over
/// `bootstrap_b` per-setting multinomial resamples. Resample `r` uses the
/// generator seeded with `seed + r` (for the folded tomogram, an offset
/// stream), so the result is independent of thread scheduling.
pub fn entropy_with_ci(
    tomogram: &Tomogram,
    folded: Option<&Tomogram>,
    restricted: bool,
    bootstrap_b: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if bootstrap_b < 100 {
        return Err(EstimationError::Bootstrap(bootstrap_b));
    }
    for t in std::iter::once(tomogram).chain(folded) {
        for key in t.counts.keys() {
            let shots = t.shots(key);
            if shots < MIN_SHOTS_PER_SETTING {
                return Err(EstimationError::InsufficientShots { setting: key.clone(), shots, minimum: MIN_SHOTS_PER_SETTING });
            }
        }
        if t.counts.is_empty() {
            return Err(EstimationError::NoShots);
        }
    }
    if let Some(f) = folded {
        if f.counts.keys().ne(tomogram.counts.keys()) {
            return Err(EstimationError::Mismatch("settings differ".into()));
        }
    }
    let entropy = reconstruct(tomogram, folded, restricted)?.entropy_bits();
    let samples: Vec<f64> = (0..bootstrap_b as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            let base = tomogram.resample(&mut rng);
            let fold = folded.map(|f| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r) ^ 0x9e37_79b9_7f4a_7c15);
                f.resample(&mut rng)
            });
            reconstruct(&base, fold.as_ref(), restricted).map(|d| d.entropy_bits()).unwrap_or(f64::NAN)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    Ok(EntropyEstimate { entropy, sigma: var.sqrt() })
}

/// Entropy from exact (infinite-shot) expectations, optionally zero-noise
/// extrapolated against a folded set. There is no sampling spread.
pub fn entropy_exact(
    expectations: &BTreeMap<PauliOp, (f64, f64)>,
    folded: Option<&BTreeMap<PauliOp, (f64, f64)>>,
    n_qubits: usize,
    restricted: bool,
) -> Result<EntropyEstimate> {
    let mut exp = expectations.clone();
    if let Some(f) = folded {
        for (op, entry) in exp.iter_mut() {
            let e3 = f.get(op).ok_or_else(|| EstimationError::Mismatch(op.to_string()))?;
            entry.0 = noise::extrapolate(entry.0, e3.0);
        }
    }
    let entropy = reconstruct_exact(&exp, n_qubits, restricted).entropy_bits();
    Ok(EntropyEstimate { entropy, sigma: 0.0 })
}

/// Exact Pauli expectations of a bond state, in the same form
/// [`Tomogram::expectations`] produces (zero standard error).
pub fn exact_expectations(rho: &CMatrix) -> BTreeMap<PauliOp, (f64, f64)> {
    let n = rho.nrows().trailing_zeros() as usize;
    PauliOp::all(n)
        .into_iter()
        .filter(|op| op.weight() > 0)
        .map(|op| {
            let v = (op.matrix() * rho).trace().re;
            (op, (v, 0.0))
        })
        .collect()
}

/// Reconstruction from exact expectations, restricted to the strings a
/// given set of settings can read out.
pub fn reconstruct_exact(expectations: &BTreeMap<PauliOp, (f64, f64)>, n_qubits: usize, restricted: bool) -> DensityEstimate {
    if n_qubits == 1 {
        return density_from_expectations(1, &expectations.iter().map(|(k, v)| (k.clone(), v.0)).collect());
    }
    let readable: Vec<PauliOp> = required_settings(restricted)
        .iter()
        .flat_map(|s| {
            let setting = parse_setting(s);
            (1..4usize).map(move |subset| {
                PauliOp((0..2).map(|q| if subset >> (1 - q) & 1 == 1 { setting[q].pauli() } else { Pauli::I }).collect())
            })
        })
        .collect();
    let filtered = expectations.iter().filter(|(k, _)| readable.contains(k)).map(|(k, v)| (k.clone(), *v)).collect();
    two_qubit_estimate(&filtered, restricted)
}

#[cfg(test)]
mod tests;
