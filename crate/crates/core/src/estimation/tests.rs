use super::*;
use crate::linalg::{projector, random_state, CVector, ONE};
use rand::Rng;

fn shot(pairs: &[(&str, i8)]) -> ShotRecord {
    ShotRecord { outcomes: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(), leaked: false, seed: 0 }
}

fn bases(key: &str) -> Vec<Basis> {
    parse_setting(key)
}

/// Outcome distribution of `rho` measured in `setting`, indexed like the
/// tomogram outcome strings.
fn setting_probabilities(rho: &CMatrix, setting: &[Basis]) -> Vec<(String, f64)> {
    let rot = linalg::kron_all(&setting.iter().map(|b| b.rotation()).collect::<Vec<_>>());
    let rotated = &rot * rho * rot.adjoint();
    let k = setting.len();
    (0..1usize << k).map(|i| (format!("{i:0k$b}"), rotated[(i, i)].re.max(0.0))).collect()
}

fn sampled_tomogram(rho: &CMatrix, settings: &[Vec<Basis>], shots: u64, seed: u64) -> Tomogram {
    let n = settings[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tomogram::new(n, false);
    for setting in settings {
        let probs = setting_probabilities(rho, setting);
        let table = t.counts.entry(setting_key(setting)).or_default();
        for _ in 0..shots {
            let mut u: f64 = rng.random();
            let mut pick = probs.len() - 1;
            for (idx, (_, p)) in probs.iter().enumerate() {
                if u < *p {
                    pick = idx;
                    break;
                }
                u -= p;
            }
            *table.entry(probs[pick].0.clone()).or_default() += 1;
        }
    }
    t
}

fn all_settings(n: usize, restricted: bool) -> Vec<Vec<Basis>> {
    match n {
        1 => Basis::ALL.iter().map(|&b| vec![b]).collect(),
        _ => required_settings(restricted).iter().map(|s| bases(s)).collect(),
    }
}

fn random_mixed(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 1 << n;
    let a = projector(&random_state(d, &mut rng));
    let b = projector(&random_state(d, &mut rng));
    a * c(0.8, 0.0) + b * c(0.2, 0.0)
}

/// Real state in the even sector of the readout-frame symmetry.
fn symmetric_state() -> CMatrix {
    let frame = linalg::kron_all(&crate::ansatz::symmetry_frame(2));
    let psi = CVector::from_vec(vec![c(0.8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.6, 0.0)]);
    let phi = CVector::from_vec(vec![c(0.0, 0.0), c(0.6, 0.0), c(-0.8, 0.0), c(0.0, 0.0)]);
    let rho = projector(&psi) * c(0.7, 0.0) + projector(&phi) * c(0.3, 0.0);
    &frame * rho * frame.adjoint()
}

#[test]
fn pauli_strings() {
    assert_eq!(PauliOp::all(2).len(), 16);
    assert_eq!(PauliOp::all(2)[0], PauliOp::identity(2));
    let yz = PauliOp::parse("YZ").unwrap();
    assert_eq!(yz.to_string(), "YZ");
    assert_eq!(yz.weight(), 2);
    assert!(PauliOp::parse("XQ").is_none());
    assert_eq!(symmetric_support().len(), 6);
}

#[test]
fn energy_trivial_cases() {
    let shots = vec![shot(&[("X3", 1), ("Z4", 1), ("Z5", 1)]); 10];
    let e = energy_from_records(&shots, 0.5).unwrap();
    assert_eq!(e.e, -1.5);
    assert!(e.sigma > 0.0 && e.sigma < 2.0 / 10.0, "{}", e.sigma);
    assert_eq!(e.n_shots, 10);

    let n = 5000;
    let coin: Vec<ShotRecord> = (0..n).map(|k| shot(&[("X1", if k % 2 == 0 { 1 } else { -1 }), ("Z2", -1), ("Z3", -1)])).collect();
    let e = energy_from_records(&coin, 1.0).unwrap();
    assert!((e.e + 1.0).abs() < 1e-12);
    assert!((e.sigma - 1.0 / (n as f64).sqrt()).abs() < 1e-4);
}

#[test]
fn energy_errors_and_order_invariance() {
    assert_eq!(energy_from_records(&[], 1.0), Err(EstimationError::NoShots));
    assert!(matches!(energy_from_records(&[shot(&[("Z1", 1), ("Z2", 1)])], 1.0), Err(EstimationError::MissingLabel(_))));
    assert!(matches!(energy_from_records(&[shot(&[("X1", 1), ("Z2", 1), ("Z4", 1)])], 1.0), Err(EstimationError::MissingLabel(_))));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut shots: Vec<ShotRecord> = (0..999)
        .map(|_| {
            let s = |r: &mut ChaCha8Rng| if r.random::<bool>() { 1 } else { -1 };
            shot(&[("X7", s(&mut rng)), ("Z8", s(&mut rng)), ("Z9", s(&mut rng))])
        })
        .collect();
    let a = energy_from_records(&shots, 0.9).unwrap();
    shots.reverse();
    shots.swap(3, 500);
    let b = energy_from_records(&shots, 0.9).unwrap();
    assert_eq!(a.e.to_bits(), b.e.to_bits());
    assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
}

#[test]
fn single_qubit_examples() {
    let mut plus = Tomogram::new(1, false);
    plus.counts.insert("X".into(), BTreeMap::from([("0".to_string(), 100)]));
    plus.counts.insert("Y".into(), BTreeMap::from([("0".to_string(), 50), ("1".to_string(), 50)]));
    plus.counts.insert("Z".into(), BTreeMap::from([("0".to_string(), 50), ("1".to_string(), 50)]));
    let est = reconstruct_1q(&plus).unwrap();
    let target = CMatrix::from_element(2, 2, c(0.5, 0.0));
    assert!(linalg::frobenius_distance(&est.rho, &target) < 1e-14);

    let mut mixed = plus.clone();
    mixed.counts.insert("X".into(), BTreeMap::from([("0".to_string(), 50), ("1".to_string(), 50)]));
    let est = reconstruct_1q(&mixed).unwrap();
    assert!(linalg::frobenius_distance(&est.rho, &CMatrix::identity(2, 2).scale(0.5)) < 1e-14);
    assert!((est.entropy_bits() - 1.0).abs() < 1e-12);

    mixed.counts.remove("Y");
    assert_eq!(reconstruct_1q(&mixed), Err(EstimationError::MissingSetting("Y".into())));
}

#[test]
fn exact_expectations_reproduce_the_state() {
    for n in [1, 2] {
        let rho = random_mixed(n, 10 + n as u64);
        let est = reconstruct_exact(&exact_expectations(&rho), n, false);
        assert!(linalg::frobenius_distance(&est.rho, &rho) < 1e-10);
        assert!(!est.psd_projected);
    }
    let plus = CVector::from_element(4, c(0.5, 0.0));
    let est = reconstruct_exact(&exact_expectations(&projector(&plus)), 2, false);
    assert!(linalg::frobenius_distance(&est.rho, &projector(&plus)) < 1e-12);
}

#[test]
fn measurement_rotations_recover_complex_states() {
    // huge shot counts turn sampled frequencies into exact ones
    for n in [1, 2] {
        let rho = random_mixed(n, 40 + n as u64);
        let mut t = Tomogram::new(n, false);
        for setting in all_settings(n, false) {
            let table = setting_probabilities(&rho, &setting)
                .into_iter()
                .map(|(k, p)| (k, (p * 1e13).round() as u64))
                .collect();
            t.counts.insert(setting_key(&setting), table);
        }
        let est = if n == 1 { reconstruct_1q(&t).unwrap() } else { reconstruct_2q(&t, false).unwrap() };
        assert!(linalg::trace_distance(&est.rho, &rho) < 1e-10);
    }
}

#[test]
fn restricted_equals_full_on_symmetric_states() {
    let rho = symmetric_state();
    let exp = exact_expectations(&rho);
    let full = reconstruct_exact(&exp, 2, false);
    let restricted = reconstruct_exact(&exp, 2, true);
    assert!(linalg::trace_distance(&full.rho, &restricted.rho) < 1e-10);
    assert!(linalg::trace_distance(&full.rho, &rho) < 1e-10);
    assert!(!restricted.symmetry_warning());

    let asym = random_mixed(2, 5);
    assert!(reconstruct_exact(&exact_expectations(&asym), 2, true).symmetry_warning());
}

#[test]
fn restricted_settings_flag_symmetry_breaking_data() {
    let settings = all_settings(2, true);
    let ok = sampled_tomogram(&symmetric_state(), &settings, 5000, 1);
    assert!(!reconstruct_2q(&ok, true).unwrap().symmetry_warning());
    let bad = sampled_tomogram(&random_mixed(2, 8), &settings, 5000, 1);
    assert!(reconstruct_2q(&bad, true).unwrap().symmetry_warning());
    assert!(matches!(reconstruct_2q(&ok, false), Err(EstimationError::MissingSetting(_))));
}

#[test]
fn sampled_reconstruction_converges() {
    let rho = random_mixed(2, 21);
    let settings = all_settings(2, false);
    let dist: Vec<f64> = [500, 5000, 50_000]
        .iter()
        .map(|&shots| {
            (0..4)
                .map(|seed| linalg::trace_distance(&reconstruct_2q(&sampled_tomogram(&rho, &settings, shots, seed), false).unwrap().rho, &rho))
                .sum::<f64>()
                / 4.0
        })
        .collect();
    assert!(dist[0] > dist[1] && dist[1] > dist[2], "{dist:?}");
}

#[test]
fn psd_projection_examples() {
    let rho = random_mixed(2, 2);
    let out = project_psd(&rho);
    assert!(!out.psd_projected);
    assert!(linalg::frobenius_distance(&out.rho, &rho) < 1e-12);

    let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.1, 0.0), c(-0.1, 0.0)]));
    let out = project_psd(&m);
    assert!(out.psd_projected);
    assert!((out.raw_min_eigenvalue + 0.1).abs() < 1e-15);
    assert!((out.rho[(0, 0)].re - 1.0).abs() < 1e-15 && out.rho[(1, 1)].norm() < 1e-15);

    let skew = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.6, 0.0), c(0.5, 0.0), c(-0.05, 0.0), c(-0.05, 0.0)]));
    let once = project_psd(&skew);
    let twice = project_psd(&once.rho);
    assert!(linalg::frobenius_distance(&once.rho, &twice.rho) < 1e-12);
    assert!((once.rho.trace().re - 1.0).abs() < 1e-12);
    assert!(linalg::hermitian_eigenvalues(&once.rho).iter().all(|&v| v >= -1e-12));
}

#[test]
fn water_filling_beats_clipping() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 1000;
    let mut wins = 0;
    for _ in 0..trials {
        let psi = random_state(4, &mut rng);
        let truth = projector(&psi);
        let noise = linalg::hermitize(&CMatrix::from_fn(4, 4, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
        let noise = &noise - CMatrix::identity(4, 4) * (noise.trace() / c(4.0, 0.0));
        let noisy = &truth + noise * c(0.15, 0.0);
        let projected = project_psd(&noisy).rho;
        let (vals, vecs) = linalg::hermitian_eigen(&noisy);
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(4, clipped.iter().map(|&v| c(v / total, 0.0))));
        let naive = &vecs * diag * vecs.adjoint();
        if linalg::trace_distance(&projected, &truth) <= linalg::trace_distance(&naive, &truth) {
            wins += 1;
        }
    }
    assert!(wins as f64 >= 0.9 * trials as f64, "{wins}");
}

#[test]
fn entropy_of_exact_expectations() {
    let pure = projector(&CVector::from_vec(vec![ONE, c(0.0, 0.0)]));
    let est = entropy_exact(&exact_expectations(&pure), None, 1, false).unwrap();
    assert!(est.entropy.abs() < 1e-12 && est.sigma == 0.0);
    let mixed = CMatrix::identity(2, 2).scale(0.5);
    let est = entropy_exact(&exact_expectations(&mixed), None, 1, false).unwrap();
    assert!((est.entropy - 1.0).abs() < 1e-12 && est.sigma == 0.0);
    let exp = exact_expectations(&mixed);
    assert!((entropy_exact(&exp, Some(&exp), 1, false).unwrap().entropy - 1.0).abs() < 1e-12);
}

#[test]
fn bootstrap_contract() {
    let rho = random_mixed(1, 4);
    let t = sampled_tomogram(&rho, &all_settings(1, false), 2000, 9);
    assert_eq!(entropy_with_ci(&t, None, false, 99, 0), Err(EstimationError::Bootstrap(99)));
    let thin = sampled_tomogram(&rho, &all_settings(1, false), 49, 9);
    assert!(matches!(entropy_with_ci(&thin, None, false, 100, 0), Err(EstimationError::InsufficientShots { .. })));
    let a = entropy_with_ci(&t, None, false, 200, 5).unwrap();
    let b = entropy_with_ci(&t, None, false, 200, 5).unwrap();
    assert_eq!(a, b);
    assert!(a.sigma > 0.0);
    let resampled = t.resample(&mut ChaCha8Rng::seed_from_u64(1));
    for key in t.counts.keys() {
        assert_eq!(resampled.shots(key), t.shots(key));
    }
}

#[test]
fn bootstrap_sigma_scales_with_shots() {
    let rho = random_mixed(2, 31) * c(0.6, 0.0) + CMatrix::identity(4, 4) * c(0.1, 0.0);
    let settings = all_settings(2, false);
    let sigmas: Vec<f64> = [1250u64, 5000, 20_000]
        .iter()
        .map(|&shots| {
            (0..4).map(|seed| entropy_with_ci(&sampled_tomogram(&rho, &settings, shots, seed), None, false, 400, seed).unwrap().sigma).sum::<f64>()
                / 4.0
        })
        .collect();
    for w in sigmas.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "{sigmas:?}");
    }
}

#[test]
fn zne_on_tomograms() {
    let ideal = CMatrix::from_element(2, 2, c(0.5, 0.0));
    let shrink = |p: f64| &ideal * c(1.0 - p, 0.0) + CMatrix::identity(2, 2) * c(0.5 * p, 0.0);
    let exact = |rho: &CMatrix| {
        let mut t = Tomogram::new(1, false);
        for setting in all_settings(1, false) {
            let table = setting_probabilities(rho, &setting).into_iter().map(|(k, p)| (k, (p * 1e12).round() as u64)).collect();
            t.counts.insert(setting_key(&setting), table);
        }
        t
    };
    let (base, folded) = (exact(&shrink(0.1)), exact(&shrink(0.3)));
    let est = reconstruct(&base, Some(&folded), false).unwrap();
    assert!(linalg::frobenius_distance(&est.rho, &ideal) < 1e-9);
    let mut other = folded.clone();
    other.counts.remove("Z");
    assert!(entropy_with_ci(&base, Some(&other), false, 100, 0).is_err());
}
