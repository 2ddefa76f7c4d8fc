use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{validate_checkpoints, Method, Snapshot, SolverReport};
use crate::error::{Error, Result};
use crate::network::{Network, Population, PriceVector};
use crate::numeric::positive_part;
use crate::response::dual_gradient_into;

/// Momentum scalars `tau_1 = 1`, `tau_{t+1} = (1 + sqrt(1 + 4 tau_t^2)) / 2`.
#[derive(Clone, Debug)]
pub struct MomentumSequence {
    next: f64,
}

impl Default for MomentumSequence {
    fn default() -> Self {
        Self { next: 1.0 }
    }
}

impl Iterator for MomentumSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let tau = self.next;
        self.next = (1.0 + (1.0 + 4.0 * tau * tau).sqrt()) / 2.0;
        Some(tau)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastGradientConfig {
    pub iterations: usize,
    pub checkpoints: Vec<usize>,
}

impl FastGradientConfig {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            checkpoints: Vec::new(),
        }
    }
}

/// Nesterov's fast gradient method on the dual, started at `lambda_hat_0 = 0`
/// with step `sigma / m`:
///
/// ```text
/// lambda_hat_t = [mu_t - (sigma/m) q'(mu_t)]^+
/// mu_{t+1} = lambda_hat_t + ((tau_t - 1) / tau_{t+1}) (lambda_hat_t - lambda_hat_{t-1})
/// ```
///
/// The projection keeps prices nonnegative but applies no upper bound.
pub fn run_fast_gradient(network: &Network, population: &Population, config: &FastGradientConfig) -> Result<SolverReport> {
    if config.iterations == 0 {
        return Err(Error::InvalidConfig("fast gradient needs at least one iteration".into()));
    }
    validate_checkpoints(&config.checkpoints, config.iterations)?;
    let started = Instant::now();
    let m = network.links();
    let step = population.sigma_floor() / m as f64;

    let mut previous = vec![0.0; m];
    let mut current = vec![0.0; m];
    let mut extrapolated = vec![0.0; m];
    let mut gradient = vec![0.0; m];
    let mut momentum = MomentumSequence::default();
    let mut tau = momentum.next().unwrap();
    let mut snapshots = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = config.checkpoints.iter().peekable();

    for t in 1..=config.iterations {
        dual_gradient_into(network, population, &extrapolated, &mut gradient);
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }
        for ((c, mu), g) in current.iter_mut().zip(&extrapolated).zip(&gradient) {
            *c = positive_part(mu - step * g);
        }
        let tau_next = momentum.next().unwrap();
        let weight = (tau - 1.0) / tau_next;
        for ((mu, c), p) in extrapolated.iter_mut().zip(&current).zip(&previous) {
            *mu = c + weight * (c - p);
        }
        previous.copy_from_slice(&current);
        tau = tau_next;

        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            snapshots.push(Snapshot {
                iteration: t,
                price: PriceVector(current.clone()),
            });
        }
    }

    let final_price = PriceVector(current);
    Ok(SolverReport {
        method: Method::FastGradient,
        final_price: final_price.clone(),
        averaged_price: None,
        last_iterate: final_price,
        iterations_used: config.iterations,
        gradient_evaluations: config.iterations,
        measurements: config.iterations as u64 * network.users() as u64,
        snapshots,
        seed: None,
        rng_algorithm: None,
        stopped_by_rule: false,
        safety_cap_hit: false,
        wall_time: started.elapsed().as_secs_f64(),
    })
}
