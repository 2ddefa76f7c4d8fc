//! User utility functions.
//!
//! Utilities are `(N sigma)`-strongly concave with `u(0) = 0` and a finite
//! marginal value at zero. The curvature is scaled by the population size `N`,
//! which is passed to every method instead of being stored.

use serde::{Deserialize, Serialize};

use crate::numeric::positive_part;

/// Interface for a strongly concave user utility.
///
/// Only [`QuadraticUtility`] is provided.
pub trait StronglyConcaveUtility {
    fn value(&self, rate: f64, users: usize) -> f64;

    fn marginal(&self, rate: f64, users: usize) -> f64;

    /// Maximizer of `u(x) - price * x` over `x >= 0`.
    fn best_response(&self, route_price: f64, users: usize) -> f64;

    /// `sup_{x >= 0} u(x) - price * x`, the conjugate term of the dual.
    fn surplus(&self, route_price: f64, users: usize) -> f64;

    /// Upper bound on the marginal utility, `u'(0)`.
    fn marginal_at_zero(&self) -> f64;
}

/// `u(x) = a x - (N sigma / 2) x^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticUtility {
    pub a: f64,
    pub sigma: f64,
}

impl QuadraticUtility {
    pub fn new(a: f64, sigma: f64) -> Self {
        Self { a, sigma }
    }

    /// Demand at zero price, `a / (N sigma)`.
    pub fn free_demand(&self, users: usize) -> f64 {
        self.best_response(0.0, users)
    }
}

impl StronglyConcaveUtility for QuadraticUtility {
    #[inline]
    fn value(&self, rate: f64, users: usize) -> f64 {
        self.a * rate - 0.5 * users as f64 * self.sigma * rate * rate
    }

    #[inline]
    fn marginal(&self, rate: f64, users: usize) -> f64 {
        self.a - users as f64 * self.sigma * rate
    }

    #[inline]
    fn best_response(&self, route_price: f64, users: usize) -> f64 {
        positive_part(self.a - route_price) / (users as f64 * self.sigma)
    }

    #[inline]
    fn surplus(&self, route_price: f64, users: usize) -> f64 {
        let gap = positive_part(self.a - route_price);
        gap * gap / (2.0 * users as f64 * self.sigma)
    }

    fn marginal_at_zero(&self) -> f64 {
        self.a
    }
}
