//! Best responses, primal utility, the dual objective and its gradients.
//!
//! With prices `lambda`, user `i` answers with
//! `x_i = (a_i - <lambda, R_i>)^+ / (N sigma_i)`, the dual objective is
//! `q(lambda) = <lambda, b> + sum_i ((a_i - <lambda, R_i>)^+)^2 / (2 N sigma_i)`
//! and its gradient is `q'(lambda) = b - R x(lambda)`.
//!
//! Functions without an error path assume `prices.len() == network.links()`
//! and a population matching the network; they panic otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{aggregate_demand_unchecked, check_len, Allocation, Network, Population, PriceVector};
use crate::numeric::{dot, positive_part, CompensatedSum};
use crate::utility::StronglyConcaveUtility;

/// Default absolute tolerance for [`KktResidual::is_optimal`].
pub const KKT_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn best_response(network: &Network, population: &Population, user: usize, prices: &PriceVector) -> f64 {
    let price = network.route_price_unchecked(user, prices);
    population.user(user).best_response(price, network.users())
}

pub fn best_response_all(network: &Network, population: &Population, prices: &PriceVector) -> Allocation {
    Allocation(best_response_slice(network, population, prices))
}

pub(crate) fn best_response_slice(network: &Network, population: &Population, prices: &[f64]) -> Vec<f64> {
    let n = network.users();
    (0..n)
        .map(|i| {
            let price = network.route_price_unchecked(i, prices);
            population.user(i).best_response(price, n)
        })
        .collect()
}

/// Aggregate utility `u(x) = sum_i u_i(x_i)`.
pub fn utility(population: &Population, rates: &Allocation) -> Result<f64> {
    check_len("allocation", population.len(), rates.len())?;
    Ok(utility_unchecked(population, rates))
}

pub(crate) fn utility_unchecked(population: &Population, rates: &[f64]) -> f64 {
    let n = population.len();
    population
        .users()
        .iter()
        .zip(rates)
        .map(|(u, &x)| u.value(x, n))
        .collect::<CompensatedSum>()
        .value()
}

/// Lagrangian `L(x, lambda) = u(x) + <lambda, b - R x>`.
pub fn lagrangian(network: &Network, population: &Population, rates: &Allocation, prices: &PriceVector) -> Result<f64> {
    check_len("allocation", network.users(), rates.len())?;
    check_len("price vector", network.links(), prices.len())?;
    let demand = aggregate_demand_unchecked(network, rates);
    let slack: Vec<f64> = network
        .capacities()
        .iter()
        .zip(&demand)
        .map(|(b, d)| b - d)
        .collect();
    Ok(utility_unchecked(population, rates) + dot(prices, &slack))
}

/// Dual objective `q(lambda)` through the closed-form conjugate.
pub fn dual_value(network: &Network, population: &Population, prices: &PriceVector) -> f64 {
    let n = network.users();
    let mut acc = CompensatedSum::new();
    acc.add(dot(prices, network.capacities()));
    for i in 0..n {
        let price = network.route_price_unchecked(i, prices);
        acc.add(population.user(i).surplus(price, n));
    }
    acc.value()
}

/// Dual objective evaluated as `<lambda, b> + sum_i [u_i(x_i) - <lambda, R_i> x_i]`
/// at the best responses; an independent route to [`dual_value`].
pub fn dual_value_via_responses(network: &Network, population: &Population, prices: &PriceVector) -> f64 {
    let n = network.users();
    let mut acc = CompensatedSum::new();
    acc.add(dot(prices, network.capacities()));
    for i in 0..n {
        let price = network.route_price_unchecked(i, prices);
        let u = population.user(i);
        let x = u.best_response(price, n);
        acc.add(u.value(x, n));
        acc.add(-price * x);
    }
    acc.value()
}

/// `q'(lambda) = b - R x(lambda)`.
pub fn dual_gradient(network: &Network, population: &Population, prices: &PriceVector) -> Vec<f64> {
    let mut out = vec![0.0; network.links()];
    dual_gradient_into(network, population, prices, &mut out);
    out
}

pub(crate) fn dual_gradient_into(network: &Network, population: &Population, prices: &[f64], out: &mut [f64]) {
    let n = network.users();
    let mut sums = vec![CompensatedSum::new(); network.links()];
    for i in 0..n {
        let route = network.route(i);
        let mut price = 0.0;
        for &j in route {
            price += prices[j];
        }
        let x = population.user(i).best_response(price, n);
        if x > 0.0 {
            for &j in route {
                sums[j].add(x);
            }
        }
    }
    for ((o, b), s) in out.iter_mut().zip(network.capacities()).zip(&sums) {
        *o = b - s.value();
    }
}

/// Single-user estimate `b - N R_xi x_xi(lambda)` of the dual gradient.
pub fn stochastic_gradient(
    network: &Network,
    population: &Population,
    prices: &PriceVector,
    user: usize,
) -> Result<Vec<f64>> {
    if user >= network.users() {
        return Err(Error::UserOutOfRange {
            index: user,
            users: network.users(),
        });
    }
    let mut out = vec![0.0; network.links()];
    stochastic_gradient_into(network, population, prices, user, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn stochastic_gradient_into(
    network: &Network,
    population: &Population,
    prices: &[f64],
    user: usize,
    out: &mut [f64],
) {
    let n = network.users();
    let route = network.route(user);
    let price = network.route_price_unchecked(user, prices);
    let scaled = n as f64 * population.user(user).best_response(price, n);
    out.copy_from_slice(network.capacities());
    for &j in route {
        out[j] -= scaled;
    }
}

/// Residuals of the optimality system for a price/rate pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// Per user, `max(0, u_i'(x_i) - <R_i, lambda>)`.
    pub marginal_excess: Vec<f64>,
    /// Per user, `|x_i (u_i'(x_i) - <R_i, lambda>)|`.
    pub stationarity: Vec<f64>,
    /// Per link, `|lambda_j (b_j - (R x)_j)|`.
    pub complementarity: Vec<f64>,
    /// Per link, `max(0, (R x)_j - b_j)`.
    pub feasibility: Vec<f64>,
}

impl KktResidual {
    pub fn max_norm(&self) -> f64 {
        self.marginal_excess
            .iter()
            .chain(&self.stationarity)
            .chain(&self.complementarity)
            .chain(&self.feasibility)
            .fold(0.0_f64, |m, &v| m.max(v))
    }

    pub fn is_optimal(&self, tolerance: f64) -> bool {
        self.max_norm() <= tolerance
    }
}

pub fn kkt_residual(network: &Network, population: &Population, prices: &PriceVector, rates: &Allocation) -> KktResidual {
    let n = network.users();
    let mut marginal_excess = Vec::with_capacity(n);
    let mut stationarity = Vec::with_capacity(n);
    for i in 0..n {
        let price = network.route_price_unchecked(i, prices);
        let gap = population.user(i).marginal(rates[i], n) - price;
        marginal_excess.push(positive_part(gap));
        stationarity.push((rates[i] * gap).abs());
    }
    let demand = aggregate_demand_unchecked(network, rates);
    let (complementarity, feasibility) = network
        .capacities()
        .iter()
        .zip(&demand)
        .zip(prices.iter())
        .map(|((b, d), p)| ((p * (b - d)).abs(), positive_part(d - b)))
        .unzip();
    KktResidual {
        marginal_excess,
        stationarity,
        complementarity,
        feasibility,
    }
}
