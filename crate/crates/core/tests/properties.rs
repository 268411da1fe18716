use mcmr_mps::ansatz::{self, UnitaryGate};
use mcmr_mps::circuit::{self, GateSpec, Purpose};
use mcmr_mps::estimation;
use mcmr_mps::linalg::{self, CMatrix};
use mcmr_mps::mps::{self, BoundaryState};
use mcmr_mps::noise::{self, NoiseModel};
use mcmr_mps::sweep;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_density(dim: usize, rank: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho = CMatrix::zeros(dim, dim);
    for _ in 0..rank {
        rho += linalg::projector(&linalg::random_state(dim, &mut rng));
    }
    rho.unscale(rank as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_projection_is_idempotent(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4]), noise in 0.0..0.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let h = linalg::hermitize(&linalg::random_unitary(dim, &mut rng));
        let mut rho = random_density(dim, 1, seed) + h.scale(noise);
        let shift = rho.trace() - linalg::c(1.0, 0.0);
        for k in 0..dim {
            rho[(k, k)] -= shift / linalg::c(dim as f64, 0.0);
        }
        let once = estimation::project_psd(&rho);
        prop_assert!((once.rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::hermitian_eigenvalues(&once.rho).iter().all(|&v| v >= -1e-12));
        let twice = estimation::project_psd(&once.rho);
        prop_assert!(linalg::frobenius_distance(&once.rho, &twice.rho) < 1e-12);
    }

    #[test]
    fn embedding_round_trips(seed in any::<u64>(), n_b in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = UnitaryGate::new(linalg::random_unitary(2 << n_b, &mut rng)).unwrap();
        let t = ansatz::extract_isometry(&u, n_b).unwrap();
        prop_assert!(mps::is_isometry(&t, 1e-10));
        let back = ansatz::extract_isometry(&ansatz::complete_isometry(&t).unwrap(), n_b).unwrap();
        for s in 0..2 {
            prop_assert!(linalg::frobenius_distance(t.site(s), back.site(s)) < 1e-12);
        }
    }

    #[test]
    fn bond_channel_maps_states_to_states(seed in any::<u64>(), n_b in 1usize..=2, steps in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = UnitaryGate::new(linalg::random_unitary(2 << n_b, &mut rng)).unwrap();
        let channel = mps::bond_channel(&ansatz::extract_isometry(&u, n_b).unwrap()).unwrap();
        let rho = channel.iterate(&random_density(1 << n_b, 2, seed), steps);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(linalg::is_hermitian(&rho, 1e-12));
        prop_assert!(linalg::hermitian_eigenvalues(&rho).iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn circuit_bond_state_matches_classical_iteration(seed in any::<u64>(), j in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_unitary(4, &mut rng);
        let tensor = ansatz::extract_isometry(&UnitaryGate::new(u.clone()).unwrap(), 1).unwrap();
        let boundary = BoundaryState::normalized(linalg::random_state(2, &mut rng));
        let prep = ansatz::boundary_prep(&boundary).unwrap();
        let c = circuit::build_state_prep_circuit(&GateSpec::Unitary(u), &prep, j, &Purpose::Tomography { setting: vec![circuit::Basis::Z] }, None).unwrap();
        let out = circuit::simulate_exact(&c, &NoiseModel::noiseless());
        let classical = mps::bond_state(&tensor, &boundary, j).unwrap();
        prop_assert!(linalg::frobenius_distance(&out.bond_state, &classical) < 1e-10);
    }

    #[test]
    fn energy_estimate_ignores_shot_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = linalg::random_unitary(4, &mut rng);
        let prep = ansatz::boundary_prep(&BoundaryState::basis(2, 0)).unwrap();
        let c = circuit::build_state_prep_circuit(&GateSpec::Unitary(u), &prep, 3, &Purpose::energy(), Some(0.9)).unwrap();
        let mut shots = circuit::sample_shots(&c, &NoiseModel::default(), 300, seed);
        let a = estimation::energy_from_records(&shots, 0.9).unwrap();
        shots.shuffle(&mut rng);
        let b = estimation::energy_from_records(&shots, 0.9).unwrap();
        prop_assert_eq!(a.e.to_bits(), b.e.to_bits());
        prop_assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
    }

    #[test]
    fn extrapolation_removes_linear_bias(base in -2.0..2.0f64, slope in -0.5..0.5f64) {
        prop_assert!((noise::extrapolate(base + slope, base + 3.0 * slope) - base).abs() < 1e-12);
    }

    #[test]
    fn grids_are_sorted_and_span_the_interval(min in 0.0..1.0f64, width in 0.1..3.0f64, steps in 2usize..40) {
        let g = sweep::lambda_grid(min, min + width, steps);
        prop_assert_eq!(g.len(), steps);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!((g[0] - min).abs() < 1e-12 && (g[steps - 1] - min - width).abs() < 1e-11);
    }
}
