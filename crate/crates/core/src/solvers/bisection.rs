use crate::error::{Error, Result};
use crate::network::{Network, Population, PriceVector};
use crate::response::dual_gradient_into;

/// Default bracket width as a fraction of the value bound `B`.
pub const BISECTION_RELATIVE_TOLERANCE: f64 = 1e-12;

const MAX_HALVINGS: usize = 400;

/// Price on a single link solving `b = sum_i (a_i - lambda)^+ / (N sigma_i)`.
///
/// The dual gradient is continuous and nondecreasing in the price, so plain
/// bisection on `[0, B]` converges. `tolerance` is the final bracket width and
/// defaults to `1e-12 B`. Returns zero when the free demand fits the capacity.
pub fn solve_single_link_bisection(
    network: &Network,
    population: &Population,
    tolerance: Option<f64>,
) -> Result<PriceVector> {
    if network.links() != 1 {
        return Err(Error::NotSingleLink {
            links: network.links(),
        });
    }
    let max_value = population.users().iter().fold(0.0_f64, |m, u| m.max(u.a));
    let upper = population.value_bound().max(max_value);
    let tolerance = tolerance.unwrap_or(BISECTION_RELATIVE_TOLERANCE * upper);
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig("bisection tolerance must be positive".into()));
    }

    let mut g = [0.0];
    let mut slope = |price: f64| {
        dual_gradient_into(network, population, &[price], &mut g);
        g[0]
    };
    if slope(0.0) >= 0.0 {
        return Ok(PriceVector(vec![0.0]));
    }

    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..MAX_HALVINGS {
        if hi - lo <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PriceVector(vec![0.5 * (lo + hi)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::dual_gradient;

    #[test]
    fn two_users() {
        let network = Network::single_link(3.0, 2);
        let population = Population::with_common_sigma(&[4.0, 8.0], 1.0, 8.0);
        let price = solve_single_link_bisection(&network, &population, None).unwrap();
        assert!((price[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn ample_capacity_gives_zero_price() {
        // free demand (4 + 8) / 2 = 6
        let network = Network::single_link(6.0, 2);
        let population = Population::with_common_sigma(&[4.0, 8.0], 1.0, 8.0);
        assert_eq!(solve_single_link_bisection(&network, &population, None).unwrap().0, vec![0.0]);
    }

    #[test]
    fn residual_is_within_slope_times_tolerance() {
        let values: Vec<f64> = (1..=1000).map(|i| (i as f64 * 0.7919).fract() * 100.0 + 1e-3).collect();
        let network = Network::single_link(5.0, values.len());
        let population = Population::with_common_sigma(&values, 1.0, 100.0);
        let tol = 1e-9;
        let price = solve_single_link_bisection(&network, &population, Some(tol)).unwrap();
        let residual = dual_gradient(&network, &population, &price)[0];
        // slope of q' is the fraction of active users over sigma, at most 1
        assert!(residual.abs() <= tol, "{residual}");
    }

    #[test]
    fn rejects_multi_link_networks() {
        let network = Network::new(vec![1.0, 1.0], [vec![0], vec![1]]).unwrap();
        let population = Population::with_common_sigma(&[1.0, 1.0], 1.0, 1.0);
        assert!(matches!(
            solve_single_link_bisection(&network, &population, None),
            Err(Error::NotSingleLink { links: 2 })
        ));
    }
}
