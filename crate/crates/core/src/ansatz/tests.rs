use super::*;
use crate::mps::SelectionStatus;
use crate::tfim::{exact_energy_density, TfimParams};

fn random_gate(dim: usize, seed: u64) -> UnitaryGate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    UnitaryGate::new(linalg::random_unitary(dim, &mut rng)).unwrap()
}

fn tensor_distance(a: &MpsTensor, b: &MpsTensor) -> f64 {
    (0..2).map(|s| linalg::frobenius_distance(a.site(s), b.site(s))).fold(0.0, f64::max)
}

fn exact(lambda: f64) -> f64 {
    exact_energy_density(TfimParams::new(lambda).unwrap()).energy_density.unwrap()
}

/// Best product-state energy, `−(m² + λ√(1−m²))` minimised over `m`.
fn mean_field(lambda: f64) -> f64 {
    if lambda >= 2.0 {
        -lambda
    } else {
        -(1.0 + lambda * lambda / 4.0)
    }
}

fn quick() -> OptimizerConfig {
    OptimizerConfig { restarts: 4, ..OptimizerConfig::default() }
}

#[test]
fn extract_identity_and_cnot() {
    let id = UnitaryGate::new(CMatrix::identity(4, 4)).unwrap();
    let t = extract_isometry(&id, 1).unwrap();
    assert!(linalg::frobenius_distance(t.site(0), &CMatrix::identity(2, 2)) < 1e-15);
    assert!(t.site(1).norm() < 1e-15);

    // bond wire controls the system wire
    let cnot = linalg::embed(&gates::cnot(), &[1, 0], 2);
    let t = extract_isometry(&UnitaryGate::new(cnot).unwrap(), 1).unwrap();
    assert!(tensor_distance(&t, &MpsTensor::ising_ordered()) < 1e-15);
    assert!(mps::is_isometry(&t, 1e-10));

    assert!(matches!(extract_isometry(&id, 2), Err(AnsatzError::Dimension { .. })));
}

#[test]
fn isometry_round_trips() {
    for (dim, n_b, seed) in [(4, 1, 1), (4, 1, 2), (8, 2, 3), (8, 2, 4)] {
        let t = extract_isometry(&random_gate(dim, seed), n_b).unwrap();
        let u = complete_isometry(&t).unwrap();
        assert!(linalg::is_unitary(u.matrix(), 1e-12));
        let back = extract_isometry(&u, n_b).unwrap();
        assert!(tensor_distance(&t, &back) < 1e-12);
        let again = extract_isometry(&complete_isometry(&back).unwrap(), n_b).unwrap();
        assert!(tensor_distance(&back, &again) < 1e-12);
    }
    let product = MpsTensor::product_zero(2).unwrap();
    let u = complete_isometry(&product).unwrap();
    assert!(tensor_distance(&extract_isometry(&u, 1).unwrap(), &product) < 1e-15);

    let u = complete_isometry(&MpsTensor::ising_ordered()).unwrap();
    let cnot = linalg::embed(&gates::cnot(), &[1, 0], 2);
    for alpha in 0..2 {
        assert!((u.matrix().column(alpha) - cnot.column(alpha)).norm() < 1e-15);
    }
    let broken = MpsTensor::new(CMatrix::identity(2, 2), CMatrix::identity(2, 2)).unwrap();
    assert!(matches!(complete_isometry(&broken), Err(AnsatzError::Mps(_))));
}

#[test]
fn one_iteration_is_one_channel_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (dim, n_b) in [(4, 1), (8, 2)] {
        let u = random_gate(dim, 30 + n_b as u64);
        let chi = 1 << n_b;
        let rho = linalg::projector(&linalg::random_state(chi, &mut rng));
        let mut zero = CMatrix::zeros(2, 2);
        zero[(0, 0)] = ONE;
        let full = linalg::kron(&zero, &rho);
        let out = u.matrix() * full * u.matrix().adjoint();
        let bond: Vec<usize> = (1..=n_b).collect();
        let reduced = linalg::partial_trace_keep(&out, &bond, n_b + 1);
        let channel = mps::bond_channel(&extract_isometry(&u, n_b).unwrap()).unwrap();
        let stepped = mps::apply_channel(&channel, &rho).unwrap();
        assert!(linalg::frobenius_distance(&reduced, &stepped) < 1e-12);
    }
}

#[test]
fn ansatz_unitaries() {
    for n_b in [1, 2] {
        let layout = GateLayout::standard(n_b).unwrap();
        let u = build_ansatz_unitary(&AnsatzParams::zeros(layout.clone())).unwrap();
        let dim = 1 << (n_b + 1);
        assert!(gates::distance_up_to_phase(u.matrix(), &CMatrix::identity(dim, dim)) < 1e-12);
        let angles: Vec<f64> = (0..layout.n_params()).map(|k| (k as f64 * 0.7).sin()).collect();
        let u = build_ansatz_unitary(&AnsatzParams::new(angles, layout).unwrap()).unwrap();
        assert!(linalg::is_unitary(u.matrix(), 1e-12));
    }
    let single = GateLayout::new(1, vec![Tile::gxy(0, 1)]).unwrap();
    let u = build_ansatz_unitary(&AnsatzParams::new(vec![0.3, -1.2], single).unwrap()).unwrap();
    assert!(linalg::frobenius_distance(u.matrix(), &gxy_gate(0.3, -1.2)) < 1e-15);

    assert!(matches!(GateLayout::new(1, vec![Tile::gxy(0, 2)]), Err(AnsatzError::Wire { wire: 2, .. })));
    assert!(matches!(
        AnsatzParams::new(vec![0.0], GateLayout::standard(1).unwrap()),
        Err(AnsatzError::AngleCount { expected: 4, got: 1 })
    ));
    assert_eq!(GateLayout::standard(2).unwrap().n_params(), 9);
    assert_eq!(GateLayout::symmetric(2).unwrap().n_params(), 7);
}

#[test]
fn symmetric_layout_keeps_channel_real_and_parity_covariant() {
    let layout = GateLayout::symmetric(2).unwrap();
    let angles: Vec<f64> = (0..layout.n_params()).map(|k| 0.4 - 0.31 * k as f64).collect();
    let u = build_ansatz_unitary(&AnsatzParams::new(angles, layout).unwrap()).unwrap();
    let t = extract_isometry(&u, 2).unwrap();
    let parity = linalg::kron(&Pauli::Z.matrix(), &Pauli::Z.matrix());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho = linalg::projector(&linalg::random_state(4, &mut rng));
    let channel = mps::bond_channel(&t).unwrap();
    let a = mps::apply_channel(&channel, &(&parity * &rho * &parity)).unwrap();
    let b = &parity * mps::apply_channel(&channel, &rho).unwrap() * &parity;
    assert!(linalg::frobenius_distance(&a, &b) < 1e-12);
    assert!(u.matrix().iter().all(|z| z.im.abs() < 1e-12));
}

#[test]
fn compiled_layout_reconstructs() {
    for n_b in [1, 2] {
        let layout = GateLayout::standard(n_b).unwrap();
        let angles: Vec<f64> = (0..layout.n_params()).map(|k| (1.3 * k as f64).cos()).collect();
        let params = AnsatzParams::new(angles, layout).unwrap();
        let fragment = compile_embedding(&params).unwrap();
        let u = build_ansatz_unitary(&params).unwrap();
        assert!(gates::distance_up_to_phase(&fragment.matrix(), u.matrix()) < 1e-10);
        assert_eq!(fragment.n_qubits, n_b + 1);
    }
}

#[test]
fn boundary_prep_examples() {
    let zero = boundary_prep(&BoundaryState::basis(2, 0)).unwrap();
    assert!(linalg::frobenius_distance(zero.w_unitary.matrix(), &CMatrix::identity(2, 2)) < 1e-15);
    assert!(zero.fragment.ops.is_empty());

    let plus = boundary_prep(&BoundaryState::uniform(2)).unwrap();
    assert_eq!(plus.fragment.ops.len(), 1);
    assert!(matches!(plus.fragment.ops[0], NativeOp::Rotation { axis: Axis::Y, .. }));
    assert!(gates::distance_up_to_phase(&plus.fragment.matrix(), &gates::ry(std::f64::consts::FRAC_PI_2)) < 1e-12);

    let layout = GateLayout::symmetric(2).unwrap();
    let angles = vec![0.3, -0.2, 0.61, -0.44, 0.15, 0.27, 0.38];
    let t = extract_isometry(&build_ansatz_unitary(&AnsatzParams::new(angles, layout).unwrap()).unwrap(), 2).unwrap();
    let sel = mps::select_boundary(&mps::transfer_spectrum(&mps::bond_channel(&t).unwrap())).unwrap();
    assert_eq!(sel.status, SelectionStatus::Converged);
    let prep = boundary_prep(&sel.boundary).unwrap();
    let prepared = prep.fragment.matrix().column(0).into_owned();
    let fidelity = sel.boundary.vector().dotc(&prepared).norm_sqr();
    assert!(fidelity >= 1.0 - 1e-10);
    assert!((prep.w_unitary.matrix().column(0) - sel.boundary.vector()).norm() < 1e-10);
}

#[test]
fn optimizer_trivial_limits() {
    let zero = variational_optimize(0.0, 1, OptimizeMode::Ansatz, &quick()).unwrap();
    assert!((zero.energy + 1.0).abs() < 1e-8, "{}", zero.energy);

    // second-order perturbation theory about the paramagnet
    let lambda = 100.0;
    let big = variational_optimize(lambda, 1, OptimizeMode::Ansatz, &quick()).unwrap();
    assert!((big.energy + lambda + 1.0 / (4.0 * lambda)).abs() < 1e-4, "{}", big.energy);
    assert!(big.energy >= exact(lambda) - 1e-9);
    assert!(matches!(variational_optimize(1.0, 3, OptimizeMode::Ansatz, &quick()), Err(AnsatzError::BondQubits(3))));
}

#[test]
fn single_bond_qubit_is_variational() {
    for lambda in [0.4, 0.9, 1.3, 2.0] {
        let opt = variational_optimize(lambda, 1, OptimizeMode::Ansatz, &quick()).unwrap();
        assert!(opt.energy >= exact(lambda) - 1e-9);
        assert!(opt.energy <= mean_field(lambda) + 1e-9);
        assert!((opt.energy - exact(lambda)).abs() / exact(lambda).abs() < 0.025);
    }
}

#[test]
fn records_round_trip() {
    let opt = variational_optimize(0.7, 1, OptimizeMode::Ansatz, &quick()).unwrap();
    let json = serde_json::to_string(&opt.record()).unwrap();
    let record: OptimizedRecord = serde_json::from_str(&json).unwrap();
    let back = OptimizedAnsatz::from_record(&record).unwrap();
    assert_eq!(back.energy.to_bits(), opt.energy.to_bits());
    assert!(linalg::frobenius_distance(back.unitary.matrix(), opt.unitary.matrix()) < 1e-15);
}

#[test]
fn optimizer_is_deterministic() {
    let a = variational_optimize(1.2, 1, OptimizeMode::Ansatz, &quick()).unwrap();
    let b = variational_optimize(1.2, 1, OptimizeMode::Ansatz, &quick()).unwrap();
    assert_eq!(a.angles, b.angles);
    assert_eq!(a.energy.to_bits(), b.energy.to_bits());
}
