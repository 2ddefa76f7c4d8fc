use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::stopping::relative_change;
use super::{project_in_place, step_constant, validate_checkpoints, Method, Snapshot, SolverReport, StepSchedule};
use crate::error::{Error, Result};
use crate::network::{Network, Population, PriceVector};
use crate::response::{dual_gradient_into, stochastic_gradient_into};
use crate::rng::{rng_from_seed, uniform_index, ExperimentRng, RNG_ALGORITHM};

/// Hard iteration limit for runs that only stop through the stopping rule.
pub const DEFAULT_SAFETY_CAP: usize = 1_000_000;

/// Source of (possibly stochastic) dual gradients for [`run_projected_descent`].
pub trait GradientOracle {
    /// Write the gradient estimate at `prices` into `out`.
    fn gradient(&mut self, network: &Network, population: &Population, prices: &[f64], out: &mut [f64]);

    /// Individual user reactions consumed by one call.
    fn measurements_per_call(&self, network: &Network) -> u64;
}

/// One uniformly sampled user per call.
#[derive(Clone, Debug)]
pub struct SampledUser {
    rng: ExperimentRng,
}

impl SampledUser {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: rng_from_seed(seed),
        }
    }
}

impl GradientOracle for SampledUser {
    #[inline]
    fn gradient(&mut self, network: &Network, population: &Population, prices: &[f64], out: &mut [f64]) {
        let user = uniform_index(&mut self.rng, network.users());
        stochastic_gradient_into(network, population, prices, user, out);
    }

    fn measurements_per_call(&self, _network: &Network) -> u64 {
        1
    }
}

/// The exact dual gradient.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactGradient;

impl GradientOracle for ExactGradient {
    fn gradient(&mut self, network: &Network, population: &Population, prices: &[f64], out: &mut [f64]) {
        dual_gradient_into(network, population, prices, out);
    }

    fn measurements_per_call(&self, network: &Network) -> u64 {
        network.users() as u64
    }
}

/// Settings shared by the projected descent methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    /// Iteration budget `T`; zero means run until the stopping rule fires.
    pub iterations: usize,
    pub schedule: StepSchedule,
    /// Stopping threshold on the relative change of the averaged price.
    pub delta: Option<f64>,
    /// Iterations at which the reported estimate is recorded.
    pub checkpoints: Vec<usize>,
    /// Starting price `lambda_1`; zero when absent.
    pub initial: Option<Vec<f64>>,
    pub safety_cap: usize,
}

impl DescentConfig {
    fn check(&self, links: usize) -> Result<()> {
        let step_ok = match self.schedule {
            StepSchedule::InverseSqrt { k } => k > 0.0 && k.is_finite(),
            StepSchedule::Constant { eta } => eta > 0.0 && eta.is_finite(),
        };
        if !step_ok {
            return Err(Error::InvalidConfig("step sizes must be positive".into()));
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0) {
                return Err(Error::InvalidConfig("delta must be positive".into()));
            }
        }
        if self.iterations == 0 && self.delta.is_none() {
            return Err(Error::InvalidConfig(
                "an iteration budget or a stopping threshold is required".into(),
            ));
        }
        if self.safety_cap == 0 {
            return Err(Error::InvalidConfig("safety cap must be positive".into()));
        }
        if let Some(init) = &self.initial {
            if init.len() != links {
                return Err(Error::DimensionMismatch {
                    what: "initial price",
                    expected: links,
                    found: init.len(),
                });
            }
        }
        validate_checkpoints(&self.checkpoints, self.iterations)
    }
}

/// Configuration of a stochastic descent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub iterations: usize,
    /// `K` in `eta_t = K / sqrt(t)`.
    pub step_constant: f64,
    pub delta: Option<f64>,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub safety_cap: usize,
}

impl SgdConfig {
    /// Fixed budget with the default step constant `sigma / sqrt(2)`.
    pub fn new(population: &Population, iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            step_constant: step_constant(population),
            delta: None,
            seed,
            checkpoints: Vec::new(),
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<usize>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn descent(&self) -> DescentConfig {
        DescentConfig {
            iterations: self.iterations,
            schedule: StepSchedule::InverseSqrt {
                k: self.step_constant,
            },
            delta: self.delta,
            checkpoints: self.checkpoints.clone(),
            initial: None,
            safety_cap: self.safety_cap,
        }
    }
}

/// Configuration of a deterministic projected gradient run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub checkpoints: Vec<usize>,
    pub initial: Option<Vec<f64>>,
}

impl PgdConfig {
    pub fn new(iterations: usize, schedule: StepSchedule) -> Self {
        Self {
            iterations,
            schedule,
            checkpoints: Vec::new(),
            initial: None,
        }
    }

    pub fn descent(&self) -> DescentConfig {
        DescentConfig {
            iterations: self.iterations,
            schedule: self.schedule,
            delta: None,
            checkpoints: self.checkpoints.clone(),
            initial: self.initial.clone(),
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }
}

/// `lambda_{t+1} = clamp_[0,B](lambda_t - eta_t g_t)`, with the running average
/// `avg_t = avg_{t-1} + (lambda_t - avg_{t-1}) / t`.
///
/// The returned report's `final_price` is the running average; wrappers that
/// report the last iterate overwrite it.
pub fn run_projected_descent<O: GradientOracle>(
    network: &Network,
    population: &Population,
    config: &DescentConfig,
    oracle: &mut O,
) -> Result<SolverReport> {
    let m = network.links();
    config.check(m)?;
    let started = Instant::now();
    let bound = population.value_bound();
    let budget = if config.iterations > 0 {
        config.iterations
    } else {
        config.safety_cap
    };

    let mut price = match &config.initial {
        Some(init) => init.clone(),
        None => vec![0.0; m],
    };
    project_in_place(&mut price, bound);
    let mut average = vec![0.0; m];
    let mut previous = vec![0.0; m];
    let mut gradient = vec![0.0; m];
    let mut snapshots = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = config.checkpoints.iter().peekable();
    let mut gradient_evaluations = 0usize;
    let mut stopped_by_rule = false;
    let mut t = 1usize;

    loop {
        previous.copy_from_slice(&average);
        let weight = 1.0 / t as f64;
        for (a, &p) in average.iter_mut().zip(&price) {
            *a += (p - *a) * weight;
        }

        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            snapshots.push(Snapshot {
                iteration: t,
                price: PriceVector(average.clone()),
            });
        }

        if let Some(delta) = config.delta {
            if t >= 2 && relative_change(&average, &previous) < delta {
                stopped_by_rule = true;
                break;
            }
        }
        if t == budget {
            break;
        }

        oracle.gradient(network, population, &price, &mut gradient);
        gradient_evaluations += 1;
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }
        let eta = config.schedule.step(t);
        for (p, g) in price.iter_mut().zip(&gradient) {
            *p -= eta * g;
        }
        project_in_place(&mut price, bound);
        debug_assert!(price.iter().all(|&p| (0.0..=bound).contains(&p)));
        t += 1;
    }

    let safety_cap_hit = config.iterations == 0 && !stopped_by_rule;
    let averaged = PriceVector(average);
    Ok(SolverReport {
        method: Method::StochasticGradient,
        final_price: averaged.clone(),
        averaged_price: Some(averaged),
        last_iterate: PriceVector(price),
        iterations_used: t,
        gradient_evaluations,
        measurements: gradient_evaluations as u64 * oracle.measurements_per_call(network),
        snapshots,
        seed: None,
        rng_algorithm: None,
        stopped_by_rule,
        safety_cap_hit,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Projected stochastic gradient descent from `lambda_1 = 0` with
/// `eta_t = K / sqrt(t)`; returns the averaged price.
pub fn run_sgd(network: &Network, population: &Population, config: &SgdConfig) -> Result<SolverReport> {
    let mut oracle = SampledUser::new(config.seed);
    let mut report = run_projected_descent(network, population, &config.descent(), &mut oracle)?;
    report.seed = Some(config.seed);
    report.rng_algorithm = Some(RNG_ALGORITHM.to_string());
    Ok(report)
}

/// Full-gradient projected descent; `final_price` is the last iterate, with
/// the running average kept in `averaged_price`.
pub fn run_pgd(network: &Network, population: &Population, config: &PgdConfig) -> Result<SolverReport> {
    let mut report = run_projected_descent(network, population, &config.descent(), &mut ExactGradient)?;
    report.method = Method::ProjectedGradient;
    report.final_price = report.last_iterate.clone();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::dual_gradient;

    fn example1() -> (Network, Population) {
        let network = Network::new(vec![2.0, 1.0], [vec![0, 1], vec![0], vec![1]]).unwrap();
        (network, Population::with_common_sigma(&[6.0; 3], 1.0, 12.0))
    }

    #[test]
    fn pgd_converges_on_example1() {
        let (network, population) = example1();
        for schedule in [
            StepSchedule::Constant { eta: 1.0 },
            StepSchedule::InverseSqrt { k: 1.0 },
        ] {
            let report = run_pgd(&network, &population, &PgdConfig::new(5000, schedule)).unwrap();
            let err = (report.final_price[0] - 1.0)
                .abs()
                .max((report.final_price[1] - 4.0).abs());
            assert!(err < 1e-6, "{schedule:?}: {:?}", report.final_price);
            assert_eq!(report.method, Method::ProjectedGradient);
        }
    }

    #[test]
    fn pgd_two_user_single_link() {
        let network = Network::single_link(3.0, 2);
        let population = Population::with_common_sigma(&[4.0, 8.0], 1.0, 8.0);
        let report = run_pgd(&network, &population, &PgdConfig::new(2000, StepSchedule::Constant { eta: 1.0 })).unwrap();
        assert!((report.final_price[0] - 3.0).abs() < 1e-9, "{:?}", report.final_price);
    }

    #[test]
    fn pgd_fixed_point() {
        let (network, population) = example1();
        let mut config = PgdConfig::new(50, StepSchedule::Constant { eta: 0.5 });
        config.initial = Some(vec![1.0, 4.0]);
        let report = run_pgd(&network, &population, &config).unwrap();
        assert!((report.final_price[0] - 1.0).abs() < 1e-13);
        assert!((report.final_price[1] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn sgd_with_one_user_equals_pgd() {
        let network = Network::single_link(2.0, 1);
        let population = Population::with_common_sigma(&[5.0], 1.0, 5.0);
        let sgd = SgdConfig::new(&population, 300, 9).with_checkpoints(vec![10, 100, 300]);
        let a = run_sgd(&network, &population, &sgd).unwrap();
        let pgd = PgdConfig {
            checkpoints: vec![10, 100, 300],
            ..PgdConfig::new(300, StepSchedule::InverseSqrt { k: sgd.step_constant })
        };
        let b = run_pgd(&network, &population, &pgd).unwrap();
        assert_eq!(a.last_iterate, b.last_iterate);
        assert_eq!(a.averaged_price, b.averaged_price);
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn driver_with_exact_mean_matches_pgd_bit_for_bit() {
        struct EnumeratedMean;
        impl GradientOracle for EnumeratedMean {
            fn gradient(&mut self, network: &Network, population: &Population, prices: &[f64], out: &mut [f64]) {
                out.copy_from_slice(&dual_gradient(network, population, &PriceVector(prices.to_vec())));
            }
            fn measurements_per_call(&self, network: &Network) -> u64 {
                network.users() as u64
            }
        }
        let (network, population) = example1();
        let config = PgdConfig {
            checkpoints: vec![1, 7, 40],
            ..PgdConfig::new(40, StepSchedule::InverseSqrt { k: 0.7 })
        };
        let a = run_projected_descent(&network, &population, &config.descent(), &mut EnumeratedMean).unwrap();
        let mut b = run_pgd(&network, &population, &config).unwrap();
        b.method = a.method;
        b.final_price = b.averaged_price.clone().unwrap();
        assert!(a.same_outcome(&b));
    }

    #[test]
    fn sgd_is_deterministic_given_seed() {
        let network = Network::single_link(1.0, 50);
        let values: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let population = Population::with_common_sigma(&values, 1.0, 50.0);
        let config = SgdConfig::new(&population, 500, 42).with_checkpoints(vec![100, 500]);
        let a = run_sgd(&network, &population, &config).unwrap();
        let b = run_sgd(&network, &population, &config).unwrap();
        assert!(a.same_outcome(&b));
        let c = run_sgd(&network, &population, &SgdConfig { seed: 43, ..config }).unwrap();
        assert!(!a.same_outcome(&c));
        assert_eq!(a.iterations_used, 500);
        assert_eq!(a.measurements, 499);
        assert!(a.final_price.in_box(50.0));
    }

    #[test]
    fn stopping_rule_with_huge_delta_stops_at_two() {
        let network = Network::single_link(1.0, 50);
        let values: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let population = Population::with_common_sigma(&values, 1.0, 50.0);
        let config = SgdConfig::new(&population, 0, 5).with_delta(1.0);
        let report = run_sgd(&network, &population, &config).unwrap();
        assert!(report.stopped_by_rule);
        // lambda_bar_1 = 0 makes the ratio at t = 2 infinite, so t = 3 is the
        // earliest stop unless the first sampled user has a zero response
        assert!(report.iterations_used >= 2 && report.iterations_used <= 4, "{}", report.iterations_used);
    }

    #[test]
    fn config_errors() {
        let (network, population) = example1();
        let mut config = SgdConfig::new(&population, 0, 1);
        assert!(matches!(run_sgd(&network, &population, &config), Err(Error::InvalidConfig(_))));
        config.iterations = 10;
        config.step_constant = 0.0;
        assert!(run_sgd(&network, &population, &config).is_err());
        config.step_constant = 1.0;
        config.delta = Some(-1.0);
        assert!(run_sgd(&network, &population, &config).is_err());
        config.delta = None;
        config.checkpoints = vec![20];
        assert!(run_sgd(&network, &population, &config).is_err());
    }

    #[test]
    fn non_finite_values_are_reported() {
        let network = Network::single_link(f64::INFINITY, 2);
        let population = Population::with_common_sigma(&[1.0, 2.0], 1.0, 2.0);
        let err = run_sgd(&network, &population, &SgdConfig::new(&population, 10, 1)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration: 1 }));
    }

    #[test]
    fn safety_cap_is_reported() {
        let (network, population) = example1();
        let mut config = SgdConfig::new(&population, 0, 1).with_delta(1e-300);
        config.safety_cap = 200;
        let report = run_sgd(&network, &population, &config).unwrap();
        assert!(report.safety_cap_hit);
        assert_eq!(report.iterations_used, 200);
    }
}
