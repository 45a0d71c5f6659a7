mod common;

use common::{dense_stationary, random_generator, random_params, random_simplex};
use mobsis::dynamics::{integrate, FractionTable, IntegrationOptions, ModelState};
use mobsis::equilibria::{endemic_fixed_point, DEFAULT_TOL};
use mobsis::mobility::{make_graph, metropolis_hastings_rates, mobility_laplacian, stationary_distribution};
use mobsis::spectral::{classify, symmetrized_spectrum, MobilityEquilibrium};
use mobsis::{Error, GraphKind, PopulationDistribution, StabilityReport, Verdict};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_distribution_is_a_positive_null_vector(seed in any::<u64>(), n in 1usize..10) {
        let g = random_generator(&mut seeded(seed), n, 0.3);
        let v = stationary_distribution(&g).unwrap();
        prop_assert!(v.as_slice().iter().all(|&x| x > 0.0));
        prop_assert!((v.vector().sum() - 1.0).abs() <= 1e-12);
        prop_assert!((g.matrix().transpose() * v.vector()).amax() <= 1e-12);
        prop_assert!((v.vector() - dense_stationary(g.matrix())).amax() <= 1e-9);
    }

    #[test]
    fn laplacian_annihilates_ones_and_stationary_weights(seed in any::<u64>(), n in 1usize..10) {
        let g = random_generator(&mut seeded(seed), n, 0.3);
        let v = stationary_distribution(&g).unwrap();
        let lstar = mobility_laplacian(&g, v.as_slice()).unwrap();
        prop_assert!((lstar.matrix() * DVector::from_element(n, 1.0)).amax() <= 1e-12);
        prop_assert!((lstar.matrix().transpose() * v.vector()).amax() <= 1e-12);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert!(lstar.matrix()[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetrized_spectrum_has_simple_zero(seed in any::<u64>(), n in 2usize..10) {
        let g = random_generator(&mut seeded(seed), n, 0.3);
        let eq = MobilityEquilibrium::new(&g).unwrap();
        let v = stationary_distribution(&g).unwrap();
        let spectrum = symmetrized_spectrum(&eq.lstar, &v).unwrap();
        prop_assert!(spectrum[0].abs() <= 1e-12);
        prop_assert!(spectrum[1] > 1e-12);
        prop_assert!((eq.lambda2 - spectrum[1]).abs() <= 1e-15);
    }

    #[test]
    fn metropolis_hastings_balances_any_target(seed in any::<u64>(), n in 3usize..12, kind in 0usize..4, base in 0.05f64..2.0) {
        let mut rng = seeded(seed);
        let kind = GraphKind::ALL[kind];
        let target = PopulationDistribution::new(random_simplex(&mut rng, n)).unwrap();
        let g = metropolis_hastings_rates(&make_graph(kind, n).unwrap(), &target, base).unwrap();
        let t = target.as_slice();
        for i in 0..n {
            prop_assert!(g.exit_rate(i) <= base * (1.0 + 1e-12));
            for j in 0..n {
                prop_assert!((t[i] * g.rate(i, j) - t[j] * g.rate(j, i)).abs() <= 1e-12);
            }
        }
        let v = stationary_distribution(&g).unwrap();
        prop_assert!((v.vector() - target.vector()).amax() <= 1e-9);
    }

    #[test]
    fn verdict_agrees_with_endemic_solver(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = seeded(seed);
        let g = random_generator(&mut rng, n, 0.3);
        let params = random_params(&mut rng, n, (0.0, 1.0), (0.01, 1.0));
        let report = classify(&params, &g).unwrap();
        if report.verdict == Verdict::DiseaseFreeStable {
            prop_assert!(report.condition_i && report.condition_ii);
        }
        if report.condition_iii || report.condition_iv {
            prop_assert_eq!(report.verdict, Verdict::DiseaseFreeStable);
        }
        match endemic_fixed_point(&params, &g, DEFAULT_TOL) {
            Ok(solution) => {
                prop_assert_eq!(report.verdict, Verdict::EndemicStable);
                prop_assert!(solution.p_star.iter().all(|&p| p > 0.0 && p < 1.0));
            }
            Err(Error::NotEndemicRegime { .. }) => prop_assert_eq!(report.verdict, Verdict::DiseaseFreeStable),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn report_json_round_trips(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = seeded(seed);
        let g = random_generator(&mut rng, n, 0.3);
        let params = random_params(&mut rng, n, (0.0, 1.0), (0.01, 1.0));
        let report = classify(&params, &g).unwrap();
        let back: StabilityReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = seeded(seed);
        let g = random_generator(&mut rng, n, 0.3);
        let params = random_params(&mut rng, n, (0.0, 1.0), (0.0, 1.0));
        let initial = ModelState::new(random_simplex(&mut rng, n), random_simplex(&mut rng, n)).unwrap();
        let options = IntegrationOptions { t_end: 3.0, dt: 0.01, output_stride: 7 };
        let table = integrate(&initial, &params, &g, &options).unwrap().table();
        let parsed = FractionTable::from_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(parsed, table);
    }
}

#[test]
fn generator_validation_rejects_bad_matrices() {
    let bad_sign = DMatrix::from_row_slice(2, 2, &[0.1, -0.1, 0.2, -0.2]);
    assert!(matches!(
        mobsis::mobility::validate_generator(bad_sign),
        Err(Error::NegativeOffDiagonal { row: 0, col: 1 })
    ));
    let bad_sum = DMatrix::from_row_slice(2, 2, &[-0.1, 0.2, 0.2, -0.2]);
    assert!(matches!(
        mobsis::mobility::validate_generator(bad_sum),
        Err(Error::NonzeroRowSum { row: 0, .. })
    ));
}
