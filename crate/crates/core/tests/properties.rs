use approx::assert_relative_eq;
use proptest::prelude::*;

use dualprice::harness::{run_ensemble, EnsembleConfig};
use dualprice::metrics::{error_report, Oracle};
use dualprice::response::{
    best_response_all, dual_value, dual_value_via_responses, lagrangian, utility,
};
use dualprice::scenarios::{table1_analytic, Scenario};
use dualprice::{aggregate_demand, route_price, validate, Allocation, Network, Population, PriceVector, QuadraticUtility};

fn instance() -> impl Strategy<Value = (Network, Population)> {
    (1usize..4, 2usize..10).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(0.5f64..3.0, m),
            prop::collection::vec(prop::collection::btree_set(0..m, 1..=m), n),
            prop::collection::vec((0.0f64..1.0, 1.0f64..2.0), n),
            2.0f64..20.0,
            0.5f64..2.0,
        )
            .prop_map(|(caps, routes, users, bound, sigma)| {
                let routes: Vec<Vec<usize>> = routes.into_iter().map(|r| r.into_iter().collect()).collect();
                let users = users
                    .into_iter()
                    .map(|(a, s)| QuadraticUtility::new(a * bound, s * sigma))
                    .collect();
                (Network::new(caps, routes).unwrap(), Population::new(users, bound, sigma))
            })
    })
}

fn prices(m: usize, bound: f64) -> impl Strategy<Value = PriceVector> {
    prop::collection::vec(0.0f64..1.0, m).prop_map(move |v| PriceVector(v.into_iter().map(|x| x * bound).collect()))
}

proptest! {
    #[test]
    fn demand_is_linear_in_rates(
        (network, _) in instance(),
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
    ) {
        let n = network.users();
        let x: Vec<f64> = (0..n).map(|i| ((seed >> (i % 60)) & 7) as f64 * 0.1).collect();
        let y: Vec<f64> = (0..n).map(|i| ((seed >> ((i + 7) % 60)) & 5) as f64 * 0.3).collect();
        let combined: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + alpha * b).collect();
        let dx = aggregate_demand(&network, &Allocation(x)).unwrap();
        let dy = aggregate_demand(&network, &Allocation(y)).unwrap();
        let dc = aggregate_demand(&network, &Allocation(combined)).unwrap();
        for j in 0..network.links() {
            prop_assert!((dc[j] - (dx[j] + alpha * dy[j])).abs() <= 1e-12 * (1.0 + dc[j].abs()));
        }
    }

    #[test]
    fn route_price_is_adjoint_of_demand(
        (network, population) in instance(),
        p in prices(4, 10.0),
    ) {
        let m = network.links();
        let price = PriceVector(p[..m].to_vec());
        let rates = best_response_all(&network, &population, &price);
        let lhs: f64 = (0..network.users())
            .map(|i| rates[i] * route_price(&network, i, &price).unwrap())
            .sum();
        let demand = aggregate_demand(&network, &rates).unwrap();
        let rhs: f64 = demand.iter().zip(price.iter()).map(|(d, l)| d * l).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn weak_duality_and_conjugate_formulas(
        (network, population) in instance(),
        p in prices(4, 1.0),
    ) {
        let m = network.links();
        let price = PriceVector(p[..m].iter().map(|v| v * population.value_bound()).collect());
        let q = dual_value(&network, &population, &price);
        prop_assert!((q - dual_value_via_responses(&network, &population, &price)).abs() <= 1e-10 * (1.0 + q.abs()));
        // any feasible allocation has utility at most q
        let scale = network
            .capacities()
            .iter()
            .fold(f64::INFINITY, |acc, &b| acc.min(b))
            / network.users() as f64;
        let feasible = Allocation(vec![scale; network.users()]);
        prop_assert!(aggregate_demand(&network, &feasible).unwrap().iter().zip(network.capacities()).all(|(d, b)| *d <= b + 1e-12));
        prop_assert!(utility(&population, &feasible).unwrap() <= q + 1e-10);
        let l = lagrangian(&network, &population, &best_response_all(&network, &population, &price), &price).unwrap();
        prop_assert!((l - q).abs() <= 1e-10 * (1.0 + q.abs()));
    }

    #[test]
    fn best_responses_stay_below_free_demand(
        (network, population) in instance(),
        p in prices(4, 30.0),
    ) {
        let m = network.links();
        let price = PriceVector(p[..m].to_vec());
        let n = network.users() as f64;
        for (x, u) in best_response_all(&network, &population, &price).iter().zip(population.users()) {
            prop_assert!(*x >= 0.0);
            prop_assert!(*x <= population.value_bound() / (n * u.sigma) + 1e-15);
        }
    }

    #[test]
    fn error_report_ignores_user_order(
        (network, population) in instance(),
        p in prices(4, 1.0),
        rotate in 0usize..10,
    ) {
        let m = network.links();
        let n = network.users();
        let price = PriceVector(p[..m].iter().map(|v| v * population.value_bound()).collect());
        let oracle_price = PriceVector(vec![0.5 * population.value_bound(); m]);
        let oracle = Oracle::from_price(&network, &population, oracle_price.clone(), dualprice::metrics::OracleKind::Supplied);
        let base = error_report(&network, &population, &price, &oracle);

        let order: Vec<usize> = (0..n).map(|i| (i + rotate) % n).collect();
        let routes: Vec<Vec<usize>> = order.iter().map(|&i| network.route(i).to_vec()).collect();
        let relabeled = Network::new(network.capacities().to_vec(), routes).unwrap();
        let permuted = population.permuted(&order);
        let oracle2 = Oracle::from_price(&relabeled, &permuted, oracle_price, dualprice::metrics::OracleKind::Supplied);
        let other = error_report(&relabeled, &permuted, &price, &oracle2);
        for j in 0..m {
            prop_assert!((base.price_err[j] - other.price_err[j]).abs() <= 1e-12);
            prop_assert!((base.demand_err[j] - other.demand_err[j]).abs() <= 1e-10);
        }
        prop_assert!((base.utility_err - other.utility_err).abs() <= 1e-10);
    }
}

#[test]
fn three_user_solution_is_continuous_across_regimes() {
    for sigma in [0.5, 1.0, 2.0] {
        for ratio in [1.5, 4.5, 9.0] {
            let a = ratio * sigma;
            let below = table1_analytic(a * (1.0 - 1e-12), sigma);
            let above = table1_analytic(a * (1.0 + 1e-12), sigma);
            for (l, r) in below.prices.iter().zip(&above.prices) {
                assert_relative_eq!(l, r, epsilon = 1e-9);
            }
            for (l, r) in below.rates.iter().zip(&above.rates) {
                assert_relative_eq!(l, r, epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn generated_scenarios_are_valid() {
    for scenario in [
        Scenario::example1(),
        Scenario::single_link(3000, 100.0, 5.0, 1.0, 3, 2),
        Scenario::two_link(3000, 12.0, 1.0, 3, 2),
    ] {
        for k in 0..scenario.populations {
            let (network, population) = scenario.generate_population(k).unwrap();
            assert!(validate(&network, &population).is_ok());
        }
    }
}

/// Errors fall as the budget grows, allowing one inversion along the sequence.
#[test]
fn two_link_errors_mostly_decrease() {
    let checkpoints = vec![1000, 2000, 4000, 8000];
    for b in [100.0, 12.0] {
        let scenario = Scenario::two_link(12_000, b, 1.0, 10, 17);
        let table = run_ensemble(&scenario, &EnsembleConfig::sgd(checkpoints.clone())).unwrap();
        for column in ["price_err_mean_1", "price_err_mean_2", "utility_err_mean"] {
            let series = table.column(column).unwrap();
            let inversions = series.windows(2).filter(|w| w[1] > w[0]).count();
            assert!(inversions <= 1, "B={b} {column}: {series:?}");
            assert!(series[3] < series[0], "B={b} {column}: {series:?}");
        }
    }
}

#[test]
fn csv_and_sidecar_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let table = run_ensemble(&Scenario::single_link(2000, 100.0, 5.0, 1.0, 2, 3), &EnsembleConfig::sgd(vec![50])).unwrap();
    table.write_csv(dir.path(), "run").unwrap();
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("T,iterations_mean,"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["populations"].as_array().unwrap().len(), 2);
    assert_eq!(meta["master_seed"], 3);
    assert!(meta["rng_algorithm"].as_str().unwrap().starts_with("ChaCha8"));
}
