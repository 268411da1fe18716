//! Error channels for the trapped-ion error budget, gate folding and
//! zero-noise extrapolation, and leakage post-selection.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{NativeCircuitFragment, NativeOp};
use crate::circuit::{Circuit, CircuitOp, GateSpec, ShotRecord};
use crate::ansatz::Axis;
use crate::linalg::{self, c, CMatrix, Pauli};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("circuit contains a non-native gate at op {0}")]
    NonNative(usize),
    #[error("zne pair mismatch: {0}")]
    Mismatch(String),
    #[error("leak check label {0:?} absent from shot records")]
    MissingLabel(String),
    #[error("cannot read noise profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed noise profile: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NoiseError>;

/// Per-operation error probabilities. Depolarising noise follows each
/// physical gate; `eps_meas`/`eps_reset` hit every bond wire whenever the
/// system wire is measured or reset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p2: f64,
    pub p1: f64,
    pub p_leak: f64,
    pub eps_meas: f64,
    pub eps_reset: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { p2: 0.008, p1: 0.0003, p_leak: 0.001, eps_meas: 0.002, eps_reset: 0.0004 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { p2: 0.0, p1: 0.0, p_leak: 0.0, eps_meas: 0.0, eps_reset: 0.0 }
    }

    pub fn is_noiseless(&self) -> bool {
        *self == Self::noiseless()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("p2", self.p2),
            ("p1", self.p1),
            ("p_leak", self.p_leak),
            ("eps_meas", self.eps_meas),
            ("eps_reset", self.eps_reset),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::Probability { name, value });
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.validate()?;
        Ok(model)
    }
}

/// `ρ → (1−p)ρ + p (𝟙/d ⊗ Tr_wires ρ)`, implemented as a uniform Pauli
/// twirl over the listed wires.
pub fn depolarize(rho: &CMatrix, wires: &[usize], p: f64) -> CMatrix {
    if p == 0.0 || wires.is_empty() {
        return rho.clone();
    }
    let n = rho.nrows().trailing_zeros() as usize;
    let k = wires.len();
    let count = 1usize << (2 * k);
    let mut twirled = CMatrix::zeros(rho.nrows(), rho.ncols());
    for code in 0..count {
        let factors: Vec<CMatrix> = (0..k).map(|q| Pauli::ALL[(code >> (2 * q)) & 3].matrix()).collect();
        let p_full = linalg::embed(&linalg::kron_all(&factors), wires, n);
        twirled += &p_full * rho * &p_full;
    }
    rho * c(1.0 - p, 0.0) + twirled * c(p / count as f64, 0.0)
}

/// Replace every `U_zz` by `Z⊗Z` followed by three `U_zz`; since
/// `U_zz² = i Z⊗Z` the replacement equals the original up to phase.
pub fn fold_circuit(circuit: &Circuit) -> Result<Circuit> {
    let mut folded = circuit.clone();
    for (idx, op) in folded.ops.iter_mut().enumerate() {
        if let CircuitOp::Gate { gate, .. } = op {
            let fragment = match gate {
                GateSpec::Native(f) => f,
                GateSpec::Unitary(_) => return Err(NoiseError::NonNative(idx)),
            };
            *fragment = fold_fragment(fragment);
        }
    }
    Ok(folded)
}

fn fold_fragment(fragment: &NativeCircuitFragment) -> NativeCircuitFragment {
    let mut ops = Vec::with_capacity(fragment.ops.len());
    for op in &fragment.ops {
        match *op {
            NativeOp::Uzz { wires } => {
                for wire in wires {
                    ops.push(NativeOp::Rotation { axis: Axis::Z, angle: std::f64::consts::PI, wire });
                }
                ops.extend([*op; 3]);
            }
            NativeOp::Rotation { .. } => ops.push(*op),
        }
    }
    NativeCircuitFragment { n_qubits: fragment.n_qubits, ops }
}

/// Matched expectation values from the base circuit and its folded copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZnePair {
    pub base: BTreeMap<String, f64>,
    pub folded: BTreeMap<String, f64>,
}

/// `E₀ = E₁ − (E₃ − E₁)/2` for every label.
pub fn zne_extrapolate(pair: &ZnePair) -> Result<BTreeMap<String, f64>> {
    if pair.base.len() != pair.folded.len() {
        return Err(NoiseError::Mismatch(format!("{} vs {} entries", pair.base.len(), pair.folded.len())));
    }
    pair.base
        .iter()
        .map(|(label, &e1)| {
            let e3 = *pair.folded.get(label).ok_or_else(|| NoiseError::Mismatch(label.clone()))?;
            Ok((label.clone(), extrapolate(e1, e3)))
        })
        .collect()
}

pub fn extrapolate(e1: f64, e3: f64) -> f64 {
    e1 - 0.5 * (e3 - e1)
}

/// Drop shots whose leak check fired. Returns the survivors and the
/// retained fraction.
pub fn leakage_postselect(shots: &[ShotRecord], check_label: &str) -> Result<(Vec<ShotRecord>, f64)> {
    if shots.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let mut kept = Vec::with_capacity(shots.len());
    for shot in shots {
        let flag = shot.outcomes.get(check_label).ok_or_else(|| NoiseError::MissingLabel(check_label.to_string()))?;
        if *flag > 0 {
            kept.push(shot.clone());
        }
    }
    let fraction = kept.len() as f64 / shots.len() as f64;
    Ok((kept, fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_state, projector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rho(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = projector(&random_state(1 << n, &mut rng));
        let b = projector(&random_state(1 << n, &mut rng));
        a * c(0.7, 0.0) + b * c(0.3, 0.0)
    }

    #[test]
    fn depolarize_limits() {
        let rho = random_rho(2, 1);
        assert_eq!(depolarize(&rho, &[0], 0.0), rho);
        let full = depolarize(&rho, &[1], 1.0);
        let marginal = linalg::partial_trace_keep(&full, &[1], 2);
        assert!(linalg::frobenius_distance(&marginal, &CMatrix::identity(2, 2).scale(0.5)) < 1e-14);
        // the other wire is untouched
        let keep0 = linalg::partial_trace_keep(&rho, &[0], 2);
        assert!(linalg::frobenius_distance(&linalg::partial_trace_keep(&full, &[0], 2), &keep0) < 1e-14);
        assert!((full.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn depolarize_composes() {
        let rho = random_rho(2, 2);
        let twice = depolarize(&depolarize(&rho, &[0, 1], 0.008), &[0, 1], 0.008);
        let once = depolarize(&rho, &[0, 1], 1.0 - (1.0 - 0.008f64).powi(2));
        assert!(linalg::frobenius_distance(&twice, &once) < 1e-12);
        assert!((1.0 - (1.0 - 0.008f64).powi(2) - 0.015936).abs() < 1e-15);
    }

    #[test]
    fn depolarize_commutes_with_disjoint_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_rho(3, 3);
        let u = linalg::embed(&linalg::random_unitary(4, &mut rng), &[0, 2], 3);
        let a = depolarize(&(&u * &rho * u.adjoint()), &[1], 0.3);
        let b = &u * depolarize(&rho, &[1], 0.3) * u.adjoint();
        assert!(linalg::frobenius_distance(&a, &b) < 1e-12);
    }

    #[test]
    fn extrapolation_identities() {
        assert_eq!(extrapolate(0.4, 0.4), 0.4);
        let (e_star, alpha, p) = (0.7, -3.0, 0.01);
        assert!((extrapolate(e_star + alpha * p, e_star + alpha * 3.0 * p) - e_star).abs() < 1e-15);
        let pair = ZnePair {
            base: BTreeMap::from([("a".to_string(), 1.0)]),
            folded: BTreeMap::from([("b".to_string(), 1.0)]),
        };
        assert!(zne_extrapolate(&pair).is_err());
    }

    #[test]
    fn profile_round_trip_and_validation() {
        let json = serde_json::to_string(&NoiseModel::default()).unwrap();
        let back: NoiseModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, NoiseModel::default());
        assert!(NoiseModel { p2: 1.5, ..NoiseModel::default() }.validate().is_err());
    }

    fn sample_circuit() -> Circuit {
        use crate::ansatz::{boundary_prep, compile_embedding, AnsatzParams, GateLayout};
        use crate::circuit::{build_state_prep_circuit, Purpose};
        use crate::mps::BoundaryState;
        let layout = GateLayout::standard(1).unwrap();
        let params = AnsatzParams::new(vec![0.41, -0.73, 0.52, -0.18], layout).unwrap();
        let gate = GateSpec::Native(compile_embedding(&params).unwrap());
        let prep = boundary_prep(&BoundaryState::uniform(2)).unwrap();
        build_state_prep_circuit(&gate, &prep, 6, &Purpose::energy(), Some(1.2)).unwrap()
    }

    #[test]
    fn folding_triples_entanglers_and_is_an_identity() {
        use crate::circuit::simulate_exact;
        let circuit = sample_circuit();
        let folded = fold_circuit(&circuit).unwrap();
        assert_eq!(folded.uzz_count(), 3 * circuit.uzz_count());
        let a = simulate_exact(&circuit, &NoiseModel::noiseless());
        let b = simulate_exact(&folded, &NoiseModel::noiseless());
        assert!(linalg::frobenius_distance(&a.bond_state, &b.bond_state) < 1e-12);
        for (label, v) in &a.marginals {
            assert!((v - b.marginals[label]).abs() < 1e-12);
        }
        let dense = Circuit {
            ops: vec![CircuitOp::Gate { wires: vec![0, 1], gate: GateSpec::Unitary(CMatrix::identity(4, 4)) }],
            ..circuit
        };
        assert!(matches!(fold_circuit(&dense), Err(NoiseError::NonNative(0))));
    }

    #[test]
    fn folded_bias_is_three_times_larger_to_first_order() {
        use crate::circuit::simulate_exact;
        let circuit = sample_circuit();
        let folded = fold_circuit(&circuit).unwrap();
        let ideal = simulate_exact(&circuit, &NoiseModel::noiseless());
        let ratios = |p2: f64| -> Vec<(f64, f64, f64)> {
            let noise = NoiseModel { p2, ..NoiseModel::noiseless() };
            let base = simulate_exact(&circuit, &noise);
            let three = simulate_exact(&folded, &noise);
            ["X4", "Z5"]
                .iter()
                .map(|&l| {
                    let (e0, e1, e3) = (ideal.marginals[l], base.marginals[l], three.marginals[l]);
                    ((e3 - e0) / (e1 - e0), (e1 - e0).abs(), (extrapolate(e1, e3) - e0).abs())
                })
                .collect()
        };
        let coarse = ratios(0.008);
        assert!((2.7..=3.3).contains(&coarse[0].0), "{coarse:?}");
        for (ratio, bias, residual) in ratios(0.0005) {
            assert!((2.9..=3.1).contains(&ratio), "{ratio}");
            assert!(residual < 0.1 * bias);
        }
        assert!(coarse.iter().all(|&(_, bias, residual)| residual < bias));
    }

    #[test]
    fn postselection_contract() {
        use crate::circuit::{sample_shots, LEAK_LABEL};
        let circuit = sample_circuit();
        let clean = sample_shots(&circuit, &NoiseModel { p_leak: 0.0, ..NoiseModel::default() }, 200, 5);
        let (kept, fraction) = leakage_postselect(&clean, LEAK_LABEL).unwrap();
        assert_eq!(fraction, 1.0);
        assert_eq!(kept, clean);
        let lost = sample_shots(&circuit, &NoiseModel { p_leak: 1.0, ..NoiseModel::noiseless() }, 20, 5);
        let (kept, fraction) = leakage_postselect(&lost, LEAK_LABEL).unwrap();
        assert!(kept.is_empty());
        assert_eq!(fraction, 0.0);
        assert!(matches!(leakage_postselect(&clean, "nope"), Err(NoiseError::MissingLabel(_))));
    }
}
