//! Error metrics against a reference solution and the theoretical bounds used
//! to check solver runs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{aggregate_demand_unchecked, Network, Population, PriceVector};
use crate::numeric::positive_part;
use crate::response::{best_response_slice, utility_unchecked};
use crate::solvers::{run_fast_gradient, solve_single_link_bisection, FastGradientConfig};

/// Fast gradient iterations treated as exact on multi-link networks.
pub const REFERENCE_FAST_GRADIENT_ITERATIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleKind {
    Bisection,
    FastGradient { iterations: usize },
    Analytic,
    Supplied,
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleKind::Bisection => write!(f, "bisection"),
            OracleKind::FastGradient { iterations } => write!(f, "fast-gradient(T={iterations})"),
            OracleKind::Analytic => write!(f, "analytic"),
            OracleKind::Supplied => write!(f, "supplied"),
        }
    }
}

/// Reference optimum: dual price and the utility of the induced allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub price: PriceVector,
    pub utility: f64,
    pub kind: OracleKind,
}

impl Oracle {
    pub fn from_price(network: &Network, population: &Population, price: PriceVector, kind: OracleKind) -> Self {
        let rates = best_response_slice(network, population, &price);
        let utility = utility_unchecked(population, &rates);
        Self { price, utility, kind }
    }

    /// Bisection on a single link, otherwise 200 fast gradient iterations.
    pub fn reference(network: &Network, population: &Population) -> Result<Self> {
        if network.links() == 1 {
            let price = solve_single_link_bisection(network, population, None)?;
            Ok(Self::from_price(network, population, price, OracleKind::Bisection))
        } else {
            Self::fast_gradient(network, population, REFERENCE_FAST_GRADIENT_ITERATIONS)
        }
    }

    pub fn fast_gradient(network: &Network, population: &Population, iterations: usize) -> Result<Self> {
        let report = run_fast_gradient(network, population, &FastGradientConfig::new(iterations))?;
        Ok(Self::from_price(
            network,
            population,
            report.final_price,
            OracleKind::FastGradient { iterations },
        ))
    }
}

/// Relative errors of a price estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `|lambda_j - lambda*_j| / lambda*_j`, or the absolute error where flagged.
    pub price_err: Vec<f64>,
    /// Links whose reference price is zero; their price error is absolute.
    pub price_err_absolute: Vec<bool>,
    /// `|(R x(lambda))_j - b_j| / b_j`.
    pub demand_err: Vec<f64>,
    /// `|u(x(lambda)) - u*| / u*`, absolute when `u* = 0`.
    pub utility_err: f64,
    pub utility_err_absolute: bool,
    pub oracle: OracleKind,
}

pub fn error_report(network: &Network, population: &Population, estimate: &PriceVector, oracle: &Oracle) -> ErrorReport {
    let (price_err, price_err_absolute) = estimate
        .iter()
        .zip(oracle.price.iter())
        .map(|(&p, &star)| {
            let diff = (p - star).abs();
            if star != 0.0 {
                (diff / star.abs(), false)
            } else {
                (diff, true)
            }
        })
        .unzip();
    let rates = best_response_slice(network, population, estimate);
    let demand = aggregate_demand_unchecked(network, &rates);
    let demand_err = demand
        .iter()
        .zip(network.capacities())
        .map(|(d, b)| (d - b).abs() / b)
        .collect();
    let gap = (utility_unchecked(population, &rates) - oracle.utility).abs();
    let (utility_err, utility_err_absolute) = if oracle.utility != 0.0 {
        (gap / oracle.utility.abs(), false)
    } else {
        (gap, true)
    };
    ErrorReport {
        price_err,
        price_err_absolute,
        demand_err,
        utility_err,
        utility_err_absolute,
        oracle: oracle.kind,
    }
}

/// Bound on the dual gradient norm over the price box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientNormBound {
    /// `(sum_j max{b_j, B/sigma - b_j}^2)^(1/2)`.
    pub exact: f64,
    /// `(B/sigma) sqrt(m)`, present when `B/sigma >= 2 max_j b_j`.
    pub simplified: Option<f64>,
}

pub fn gradient_norm_bound(network: &Network, population: &Population) -> GradientNormBound {
    let ratio = population.value_bound() / population.sigma_floor();
    let exact = network
        .capacities()
        .iter()
        .map(|&b| {
            let side = b.max(ratio - b);
            side * side
        })
        .sum::<f64>()
        .sqrt();
    let max_capacity = network.capacities().iter().fold(0.0_f64, |m, &b| m.max(b));
    let simplified = (ratio >= 2.0 * max_capacity).then(|| ratio * (network.links() as f64).sqrt());
    GradientNormBound { exact, simplified }
}

/// Theoretical bound values for `T` iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub iterations: usize,
    pub step_constant: f64,
    /// Gradient-norm bound `L` used below.
    pub gradient_bound: f64,
    /// `D = m B^2 / (2K) + K L^2`.
    pub d: f64,
    /// `sqrt(2D/sigma) T^(-1/4)`, bounding the expected per-link violation.
    pub violation_bound: f64,
    /// `B sqrt(2D/sigma) T^(-1/4)`, bounding the expected utility gap.
    pub utility_gap_bound: f64,
    /// `(1/T)(m B^2 / (2 eta_T) + (L^2/2) sum_t eta_t)` with `eta_t = K/sqrt(t)`.
    pub regret_bound: f64,
    /// `2 m B^2 / (sigma T)`, the fast gradient utility gap bound.
    pub fg_utility_bound: f64,
    /// `2 m B / (sigma T)`, the fast gradient violation bound.
    pub fg_violation_bound: f64,
}

/// Bounds with the exact gradient-norm bound `L`.
pub fn theorem1_bounds(network: &Network, population: &Population, step_constant: f64, iterations: usize) -> BoundReport {
    let l = gradient_norm_bound(network, population).exact;
    bounds_with_gradient_bound(network, population, step_constant, iterations, l)
}

pub fn bounds_with_gradient_bound(
    network: &Network,
    population: &Population,
    step_constant: f64,
    iterations: usize,
    gradient_bound: f64,
) -> BoundReport {
    assert!(step_constant > 0.0 && iterations >= 1);
    let m = network.links() as f64;
    let b = population.value_bound();
    let sigma = population.sigma_floor();
    let t = iterations as f64;
    let k = step_constant;
    let l2 = gradient_bound * gradient_bound;

    let d = m * b * b / (2.0 * k) + k * l2;
    let violation_bound = (2.0 * d / sigma).sqrt() * t.powf(-0.25);
    let step_sum: f64 = (1..=iterations).map(|s| k / (s as f64).sqrt()).sum();
    let last_step = k / t.sqrt();
    let regret_bound = (m * b * b / (2.0 * last_step) + 0.5 * l2 * step_sum) / t;

    BoundReport {
        iterations,
        step_constant,
        gradient_bound,
        d,
        violation_bound,
        utility_gap_bound: b * violation_bound,
        regret_bound,
        fg_utility_bound: 2.0 * m * b * b / (sigma * t),
        fg_violation_bound: 2.0 * m * b / (sigma * t),
    }
}

/// Empirical counterparts of the bounds at a price estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationGap {
    /// Per link, `((R x(lambda))_j - b_j)^+`.
    pub violation: Vec<f64>,
    /// `u* - u(x(lambda))`; may be negative for infeasible allocations.
    pub utility_gap: f64,
}

pub fn violation_and_gap(network: &Network, population: &Population, estimate: &PriceVector, optimal_utility: f64) -> ViolationGap {
    let rates = best_response_slice(network, population, estimate);
    let demand = aggregate_demand_unchecked(network, &rates);
    ViolationGap {
        violation: demand
            .iter()
            .zip(network.capacities())
            .map(|(d, b)| positive_part(d - b))
            .collect(),
        utility_gap: optimal_utility - utility_unchecked(population, &rates),
    }
}
