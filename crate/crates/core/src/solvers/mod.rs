//! Price-finding procedures.
//!
//! * [`run_sgd`]: projected stochastic gradient descent driven by the reaction
//!   of one randomly sampled user per iteration.
//! * [`run_pgd`]: the full-gradient counterpart.
//! * [`run_fast_gradient`]: Nesterov's accelerated method.
//! * [`solve_single_link_bisection`]: root of the monotone dual gradient for `m = 1`.
//!
//! Iterations are numbered from one. A budget of `T` iterations produces the
//! iterates `lambda_1 = 0, ..., lambda_T` and their running average.

mod bisection;
mod descent;
mod fast;
mod stopping;

use serde::{Deserialize, Serialize};

use crate::network::{Population, PriceVector};

pub use bisection::{solve_single_link_bisection, BISECTION_RELATIVE_TOLERANCE};
pub use descent::{
    run_pgd, run_projected_descent, run_sgd, DescentConfig, ExactGradient, GradientOracle, PgdConfig,
    SampledUser, SgdConfig, DEFAULT_SAFETY_CAP,
};
pub use fast::{run_fast_gradient, FastGradientConfig, MomentumSequence};
pub use stopping::{relative_change, stopping_time};

/// `K = sigma / sqrt(2)`, the step constant minimizing the expected error bound
/// with the simplified gradient bound.
pub fn step_constant(population: &Population) -> f64 {
    population.sigma_floor() * std::f64::consts::FRAC_1_SQRT_2
}

/// Step sizes `eta_t`, indexed from `t = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `eta_t = k / sqrt(t)`.
    InverseSqrt { k: f64 },
    Constant { eta: f64 },
}

impl StepSchedule {
    #[inline]
    pub fn step(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            StepSchedule::InverseSqrt { k } => k / (t as f64).sqrt(),
            StepSchedule::Constant { eta } => eta,
        }
    }
}

/// Componentwise clamp onto the box `[0, bound]^m`.
pub fn project(raw: &[f64], bound: f64) -> PriceVector {
    let mut out = raw.to_vec();
    project_in_place(&mut out, bound);
    PriceVector(out)
}

#[inline]
pub fn project_in_place(values: &mut [f64], bound: f64) {
    for v in values {
        *v = v.clamp(0.0, bound);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    StochasticGradient,
    ProjectedGradient,
    FastGradient,
    Bisection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    /// The estimate the method would return if stopped at this iteration.
    pub price: PriceVector,
}

/// Outcome of one solver run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: Method,
    /// Averaged iterate for SGD, last iterate for PGD and fast gradient.
    pub final_price: PriceVector,
    /// Running average of the iterates, for the descent methods.
    pub averaged_price: Option<PriceVector>,
    pub last_iterate: PriceVector,
    pub iterations_used: usize,
    pub gradient_evaluations: usize,
    /// Individual user reactions consumed: one per SGD step, `N` per full gradient.
    pub measurements: u64,
    pub snapshots: Vec<Snapshot>,
    pub seed: Option<u64>,
    pub rng_algorithm: Option<String>,
    pub stopped_by_rule: bool,
    pub safety_cap_hit: bool,
    pub wall_time: f64,
}

impl SolverReport {
    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let bits = |p: &PriceVector| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        self.method == other.method
            && bits(&self.final_price) == bits(&other.final_price)
            && self.averaged_price.as_ref().map(bits) == other.averaged_price.as_ref().map(bits)
            && bits(&self.last_iterate) == bits(&other.last_iterate)
            && self.iterations_used == other.iterations_used
            && self.gradient_evaluations == other.gradient_evaluations
            && self.measurements == other.measurements
            && self.snapshots.len() == other.snapshots.len()
            && self
                .snapshots
                .iter()
                .zip(&other.snapshots)
                .all(|(a, b)| a.iteration == b.iteration && bits(&a.price) == bits(&b.price))
            && self.seed == other.seed
            && self.rng_algorithm == other.rng_algorithm
            && self.stopped_by_rule == other.stopped_by_rule
            && self.safety_cap_hit == other.safety_cap_hit
    }

    pub fn snapshot(&self, iteration: usize) -> Option<&PriceVector> {
        self.snapshots
            .iter()
            .find(|s| s.iteration == iteration)
            .map(|s| &s.price)
    }
}

pub(crate) fn validate_checkpoints(checkpoints: &[usize], budget: usize) -> crate::Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::InvalidConfig(
            "checkpoints must be strictly ascending".into(),
        ));
    }
    if checkpoints.first() == Some(&0) {
        return Err(crate::Error::InvalidConfig("checkpoints start at iteration 1".into()));
    }
    if budget > 0 && checkpoints.last().is_some_and(|&c| c > budget) {
        return Err(crate::Error::InvalidConfig(format!(
            "checkpoint {} exceeds the iteration budget {budget}",
            checkpoints.last().unwrap()
        )));
    }
    Ok(())
}
