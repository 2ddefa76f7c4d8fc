//! Runtime invariant checks: identities of the dual, properties of the
//! projection, and the theoretical error bounds on simulated ensembles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{run_ensemble, EnsembleConfig, ResultTable};
use crate::metrics::{gradient_norm_bound, Oracle};
use crate::network::{Network, Population, PriceVector};
use crate::numeric::{distance, norm};
use crate::response::{
    best_response_all, dual_gradient, dual_value, dual_value_via_responses, kkt_residual, stochastic_gradient,
    utility,
};
use crate::rng::{derive_seed, rng_from_seed, ExperimentRng};
use crate::scenarios::{table1_analytic, Scenario};
use crate::solvers::project;
use crate::utility::QuadraticUtility;

const STREAM_VERIFY: u64 = 0x7665_7269_6679_0000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Largest observed value of the checked quantity, relative to its limit
    /// where that makes sense.
    pub worst: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, worst: f64, limit: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: worst <= limit,
            worst,
            detail,
        }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random instances or price pairs per deterministic check.
    pub trials: usize,
    /// Populations per ensemble.
    pub populations: usize,
    /// Users in the single-link ensemble.
    pub single_link_users: usize,
    /// Users in the two-link ensembles; must be divisible by 3.
    pub two_link_users: usize,
    pub sgd_iterations: Vec<usize>,
    pub fast_gradient_iterations: Vec<usize>,
    /// Fast gradient iterations of the reference used to judge fast gradient runs.
    pub fast_gradient_reference: usize,
    pub threads: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            populations: 30,
            single_link_users: 100_000,
            two_link_users: 120_000,
            sgd_iterations: vec![1000, 4000],
            fast_gradient_iterations: vec![10, 50, 200],
            fast_gradient_reference: 2000,
            threads: None,
        }
    }
}

impl VerifyConfig {
    /// Small ensembles, for smoke tests.
    pub fn quick() -> Self {
        Self {
            trials: 200,
            populations: 4,
            single_link_users: 5000,
            two_link_users: 6000,
            ..Self::default()
        }
    }
}

/// Run every check. Failures are reported in the outcomes rather than as errors;
/// `Err` means a check could not be carried out.
pub fn run_invariant_suite(config: &VerifyConfig) -> Result<Vec<CheckOutcome>> {
    let mut rng = rng_from_seed(derive_seed(config.seed, STREAM_VERIFY, 0));
    let small: Vec<(Network, Population)> = (0..config.trials.div_ceil(10).max(1))
        .map(|_| random_instance(&mut rng))
        .collect();
    let mut out = vec![
        check_unbiasedness(&small),
        check_finite_differences(&small, &mut rng),
        check_convexity_and_smoothness(&small, config.trials, &mut rng),
        check_projection(config.trials, &mut rng),
        check_table1_kkt(config.trials, &mut rng),
        check_gradient_bound(&small, config.trials, &mut rng),
    ];

    let single = Scenario::single_link(config.single_link_users, 100.0, 5.0, 1.0, config.populations, config.seed);
    out.push(check_strong_duality(&single)?);
    let two_link = |b| Scenario::two_link(config.two_link_users, b, 1.0, config.populations, config.seed);
    for (label, scenario) in [
        ("single link", single.clone()),
        ("two links, B=100", two_link(100.0)),
        ("two links, B=12", two_link(12.0)),
    ] {
        let mut sgd = EnsembleConfig::sgd(config.sgd_iterations.clone());
        sgd.threads = config.threads;
        out.extend(expectation_bounds(label, &run_ensemble(&scenario, &sgd)?));
        if scenario.links() > 1 {
            let mut fg = EnsembleConfig::fast_gradient(config.fast_gradient_iterations.clone())
                .with_oracle_iterations(config.fast_gradient_reference);
            fg.threads = config.threads;
            out.extend(deterministic_bounds(label, &run_ensemble(&scenario, &fg)?));
        }
    }
    Ok(out)
}

/// One row per check: `name,passed,worst,detail`.
pub fn outcomes_to_csv(outcomes: &[CheckOutcome]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["name", "passed", "worst", "detail"])?;
    for o in outcomes {
        writer.write_record([
            o.name.clone(),
            o.passed.to_string(),
            crate::harness::format_float(o.worst),
            o.detail.clone(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A network with 1 to 4 links and 2 to 12 users on random non-empty routes.
pub fn random_instance(rng: &mut ExperimentRng) -> (Network, Population) {
    let m = rng.gen_range(1..=4);
    let n = rng.gen_range(2..=12);
    let capacities: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..3.0)).collect();
    let routes: Vec<Vec<usize>> = (0..n)
        .map(|_| loop {
            let route: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
            if !route.is_empty() {
                break route;
            }
        })
        .collect();
    let value_bound = rng.gen_range(2.0..20.0);
    let sigma_floor = rng.gen_range(0.5..2.0);
    let users = (0..n)
        .map(|_| {
            QuadraticUtility::new(
                rng.gen_range(0.0..value_bound),
                sigma_floor * rng.gen_range(1.0..2.0),
            )
        })
        .collect();
    let network = Network::new(capacities, routes).expect("routes are in range");
    (network, Population::new(users, value_bound, sigma_floor))
}

fn random_price(rng: &mut ExperimentRng, links: usize, bound: f64) -> PriceVector {
    PriceVector((0..links).map(|_| rng.gen_range(0.0..bound)).collect())
}

fn check_unbiasedness(instances: &[(Network, Population)]) -> CheckOutcome {
    let mut worst = 0.0_f64;
    let mut rng = rng_from_seed(1);
    for (network, population) in instances {
        let n = network.users();
        let price = random_price(&mut rng, network.links(), population.value_bound());
        let exact = dual_gradient(network, population, &price);
        let mut mean = vec![0.0; network.links()];
        for i in 0..n {
            let g = stochastic_gradient(network, population, &price, i).expect("valid user");
            for (acc, v) in mean.iter_mut().zip(&g) {
                *acc += v / n as f64;
            }
        }
        let scale = norm(&exact).max(1.0);
        worst = worst.max(distance(&mean, &exact) / scale);
    }
    CheckOutcome::new(
        "stochastic gradient unbiased",
        worst,
        1e-12,
        format!("max |mean_i g_i - grad q| = {worst:.3e} over {} instances", instances.len()),
    )
}

fn near_kink(network: &Network, population: &Population, price: &PriceVector, h: f64) -> bool {
    (0..network.users()).any(|i| {
        let p: f64 = network.route(i).iter().map(|&j| price[j]).sum();
        (population.user(i).a - p).abs() < 10.0 * h * network.route(i).len() as f64
    })
}

fn check_finite_differences(instances: &[(Network, Population)], rng: &mut ExperimentRng) -> CheckOutcome {
    let h = 1e-5;
    let mut worst = 0.0_f64;
    let mut compared = 0usize;
    for (network, population) in instances {
        for _ in 0..5 {
            let price = random_price(rng, network.links(), population.value_bound());
            if near_kink(network, population, &price, h) || price.iter().any(|&p| p < h) {
                continue;
            }
            let g = dual_gradient(network, population, &price);
            let scale = norm(&g).max(1.0);
            for (j, gj) in g.iter().enumerate() {
                let mut up = price.clone();
                let mut down = price.clone();
                up.0[j] += h;
                down.0[j] -= h;
                let fd = (dual_value(network, population, &up) - dual_value(network, population, &down)) / (2.0 * h);
                worst = worst.max((fd - gj).abs() / scale);
            }
            compared += 1;
        }
    }
    CheckOutcome::new(
        "dual gradient matches central differences",
        worst,
        1e-6,
        format!("max relative error {worst:.3e} at {compared} points"),
    )
}

fn check_convexity_and_smoothness(
    instances: &[(Network, Population)],
    pairs: usize,
    rng: &mut ExperimentRng,
) -> CheckOutcome {
    let mut convexity = f64::NEG_INFINITY;
    let mut smoothness = 0.0_f64;
    let mut formulas = 0.0_f64;
    for k in 0..pairs {
        let (network, population) = &instances[k % instances.len()];
        let m = network.links();
        let bound = population.value_bound();
        let lambda = random_price(rng, m, bound);
        let mu = random_price(rng, m, bound);
        let mid = PriceVector(lambda.iter().zip(mu.iter()).map(|(a, b)| 0.5 * (a + b)).collect());
        let (ql, qm, qmid) = (
            dual_value(network, population, &lambda),
            dual_value(network, population, &mu),
            dual_value(network, population, &mid),
        );
        let scale = ql.abs().max(qm.abs()).max(1.0);
        convexity = convexity.max(qmid - 0.5 * (ql + qm));
        formulas = formulas.max((ql - dual_value_via_responses(network, population, &lambda)).abs() / scale);

        let gap = distance(&lambda, &mu);
        if gap > 0.0 {
            let lipschitz = m as f64 / population.sigma_floor();
            let dg = distance(
                &dual_gradient(network, population, &lambda),
                &dual_gradient(network, population, &mu),
            );
            smoothness = smoothness.max(dg / (lipschitz * gap));
        }
    }
    let worst = (convexity / 1e-12).max(smoothness - 1e-12).max(formulas / 1e-12);
    CheckOutcome {
        name: "dual convex and smooth".into(),
        passed: convexity <= 1e-12 && smoothness <= 1.0 + 1e-12 && formulas <= 1e-12,
        worst,
        detail: format!(
            "midpoint excess {convexity:.3e}, gradient Lipschitz ratio {smoothness:.6}, \
             conjugate formulas differ by {formulas:.3e}, over {pairs} pairs"
        ),
    }
}

fn check_projection(pairs: usize, rng: &mut ExperimentRng) -> CheckOutcome {
    let mut idempotence = 0.0_f64;
    let mut expansion = 0.0_f64;
    let mut outside = 0usize;
    for _ in 0..pairs {
        let m = rng.gen_range(1..=5);
        let bound = rng.gen_range(0.1..50.0);
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0 * bound..2.0 * bound)).collect();
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0 * bound..2.0 * bound)).collect();
        let px = project(&x, bound);
        let py = project(&y, bound);
        outside += usize::from(!px.in_box(bound));
        idempotence = idempotence.max(distance(&project(&px, bound), &px));
        expansion = expansion.max(distance(&px, &py) - distance(&x, &y));
    }
    CheckOutcome {
        name: "projection onto the price box".into(),
        passed: idempotence == 0.0 && expansion <= 1e-12 && outside == 0,
        worst: idempotence.max(expansion),
        detail: format!(
            "idempotence defect {idempotence:.3e}, expansion {expansion:.3e}, {outside} outside the box"
        ),
    }
}

fn check_table1_kkt(trials: usize, rng: &mut ExperimentRng) -> CheckOutcome {
    let network = Network::new(vec![2.0, 1.0], [vec![0, 1], vec![0], vec![1]]).expect("static routes");
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let sigma = rng.gen_range(0.1..10.0);
        let a = sigma * rng.gen_range(0.01..15.0);
        let population = Population::with_common_sigma(&[a; 3], sigma, a);
        let s = table1_analytic(a, sigma);
        let r = kkt_residual(&network, &population, &PriceVector(s.prices.to_vec()), &s.rates.to_vec().into());
        worst = worst.max(r.max_norm());
    }
    CheckOutcome::new(
        "three-user closed form satisfies KKT",
        worst,
        1e-12,
        format!("max residual {worst:.3e} over {trials} random (a, sigma)"),
    )
}

fn check_gradient_bound(instances: &[(Network, Population)], trials: usize, rng: &mut ExperimentRng) -> CheckOutcome {
    let mut worst = 0.0_f64;
    for k in 0..trials {
        let (network, population) = &instances[k % instances.len()];
        let l = gradient_norm_bound(network, population).exact;
        let price = random_price(rng, network.links(), population.value_bound());
        let user = rng.gen_range(0..network.users());
        let g = stochastic_gradient(network, population, &price, user).expect("valid user");
        worst = worst.max(norm(&g) / l);
    }
    CheckOutcome::new(
        "stochastic gradients within the norm bound",
        worst,
        1.0,
        format!("max |g| / L = {worst:.6} over {trials} samples"),
    )
}

fn check_strong_duality(scenario: &Scenario) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    for index in 0..scenario.populations {
        let (network, population) = scenario.generate_population(index)?;
        let oracle = Oracle::reference(&network, &population)?;
        let q = dual_value(&network, &population, &oracle.price);
        let u = utility(&population, &best_response_all(&network, &population, &oracle.price))?;
        worst = worst.max((q - u).abs() / oracle.utility.abs());
    }
    Ok(CheckOutcome::new(
        "strong duality at the bisection optimum",
        worst,
        1e-6,
        format!("max |q - u| / u* = {worst:.3e} over {} populations", scenario.populations),
    ))
}

fn link_count(table: &ResultTable) -> usize {
    (1..).take_while(|j| table.column_index(&format!("violation_mean_{j}")).is_some()).count()
}

fn expectation_bounds(label: &str, table: &ResultTable) -> Vec<CheckOutcome> {
    let m = link_count(table);
    let mut out = Vec::new();
    for row in 0..table.rows.len() {
        let t = table.value(row, "T").unwrap_or(f64::NAN);
        let bound = table.value(row, "violation_bound").unwrap_or(f64::NAN);
        let violation = (1..=m)
            .map(|j| table.value(row, &format!("violation_mean_{j}")).unwrap_or(f64::NAN))
            .fold(0.0_f64, f64::max);
        out.push(CheckOutcome::new(
            &format!("{label}, T={t}: mean violation"),
            violation / bound,
            1.0,
            format!("{violation:.4e} <= {bound:.4e}"),
        ));
        let gap = table.value(row, "utility_gap_mean").unwrap_or(f64::NAN);
        let gap_bound = table.value(row, "utility_gap_bound").unwrap_or(f64::NAN);
        out.push(CheckOutcome::new(
            &format!("{label}, T={t}: mean utility gap"),
            gap / gap_bound,
            1.0,
            format!("{gap:.4e} <= {gap_bound:.4e}"),
        ));
        let dual_gap = table.value(row, "dual_gap_mean").unwrap_or(f64::NAN);
        let regret = table.value(row, "regret_bound").unwrap_or(f64::NAN);
        out.push(CheckOutcome::new(
            &format!("{label}, T={t}: mean dual gap"),
            dual_gap / regret,
            1.0,
            format!("{dual_gap:.4e} <= {regret:.4e}"),
        ));
    }
    out
}

fn deterministic_bounds(label: &str, table: &ResultTable) -> Vec<CheckOutcome> {
    let m = link_count(table);
    let mut out = Vec::new();
    for row in 0..table.rows.len() {
        let t = table.value(row, "T").unwrap_or(f64::NAN);
        let bound = table.value(row, "violation_bound").unwrap_or(f64::NAN);
        let violation = (1..=m)
            .map(|j| table.value(row, &format!("violation_max_{j}")).unwrap_or(f64::NAN))
            .fold(0.0_f64, f64::max);
        out.push(CheckOutcome::new(
            &format!("{label}, fast gradient T={t}: worst violation"),
            violation / bound,
            1.0,
            format!("{violation:.4e} <= {bound:.4e}"),
        ));
        let gap = table.value(row, "utility_gap_max").unwrap_or(f64::NAN);
        let gap_bound = table.value(row, "utility_gap_bound").unwrap_or(f64::NAN);
        out.push(CheckOutcome::new(
            &format!("{label}, fast gradient T={t}: worst utility gap"),
            gap / gap_bound,
            1.0,
            format!("{gap:.4e} <= {gap_bound:.4e}"),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let outcomes = run_invariant_suite(&VerifyConfig::quick()).unwrap();
        let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.to_string()).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(outcomes.len() > 20);
    }

    #[test]
    fn nan_never_passes() {
        assert!(!CheckOutcome::new("x", f64::NAN, 1.0, String::new()).passed);
    }

    #[test]
    fn random_instances_are_well_formed() {
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let (network, population) = random_instance(&mut rng);
            assert_eq!(network.users(), population.len());
            assert!(network.routes().all(|r| !r.is_empty()));
        }
    }
}
