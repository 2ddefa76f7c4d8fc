//! Experiment instances: the three-user network with its closed-form optimum,
//! random single-link populations and random two-link populations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{validate, InstanceFile, Network, Population};
use crate::rng::{derive_seed, open_uniform, rng_from_seed, STREAM_POPULATION};

/// Capacities of the two-link, three-route network.
pub const TWO_LINK_CAPACITIES: [f64; 2] = [2.0, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Three users with a common value coefficient: user 1 on both links,
    /// users 2 and 3 on links 1 and 2. Deterministic.
    ThreeUser { a: f64 },
    /// `N` users on one link, `a_i ~ U(0, B)`.
    SingleLink,
    /// `N` users split in thirds over the routes {1, 2}, {1}, {2}; `a_i ~ U(0, B)`.
    TwoLink,
    /// A fixed instance read from a scenario file.
    Custom { instance: Box<InstanceFile> },
}

/// A generator of problem instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Number of users `N`.
    pub users: usize,
    /// Value bound `B`; value coefficients are drawn from `(0, B)`.
    pub value_bound: f64,
    pub sigma: f64,
    pub capacities: Vec<f64>,
    /// Number of populations `k` in an ensemble.
    pub populations: usize,
    /// Master seed.
    pub seed: u64,
}

impl Scenario {
    pub fn three_user(a: f64, sigma: f64, value_bound: f64) -> Self {
        Self {
            kind: ScenarioKind::ThreeUser { a },
            users: 3,
            value_bound,
            sigma,
            capacities: TWO_LINK_CAPACITIES.to_vec(),
            populations: 1,
            seed: 0,
        }
    }

    pub fn single_link(users: usize, value_bound: f64, capacity: f64, sigma: f64, populations: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::SingleLink,
            users,
            value_bound,
            sigma,
            capacities: vec![capacity],
            populations,
            seed,
        }
    }

    pub fn two_link(users: usize, value_bound: f64, sigma: f64, populations: usize, seed: u64) -> Self {
        Self {
            kind: ScenarioKind::TwoLink,
            users,
            value_bound,
            sigma,
            capacities: TWO_LINK_CAPACITIES.to_vec(),
            populations,
            seed,
        }
    }

    pub fn custom(instance: InstanceFile) -> Self {
        Self {
            users: instance.n,
            value_bound: instance.value_bound,
            sigma: instance.sigma_floor,
            capacities: instance.capacities.clone(),
            kind: ScenarioKind::Custom {
                instance: Box::new(instance),
            },
            populations: 1,
            seed: 0,
        }
    }

    /// `a = 6`, `sigma = 1`, `B = 12`: the regime where both links are priced.
    pub fn example1() -> Self {
        Self::three_user(6.0, 1.0, 12.0)
    }

    /// `N = 10^5`, `B = 100`, `b = 5`, `sigma = 1`, `k = 30`.
    pub fn example2(seed: u64) -> Self {
        Self::single_link(100_000, 100.0, 5.0, 1.0, 30, seed)
    }

    /// `N = 1.2 * 10^5`, `sigma = 1`, `k = 30`, capacities `(2, 1)`.
    pub fn example3(value_bound: f64, seed: u64) -> Self {
        Self::two_link(120_000, value_bound, 1.0, 30, seed)
    }

    pub fn links(&self) -> usize {
        self.capacities.len()
    }

    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidScenario(msg));
        if self.populations == 0 {
            return fail("at least one population is required".into());
        }
        if self.users == 0 {
            return fail("at least one user is required".into());
        }
        if !(self.sigma > 0.0) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.value_bound > 0.0 && self.value_bound.is_finite()) {
            return fail(format!("B must be positive, got {}", self.value_bound));
        }
        if self.capacities.iter().any(|&b| !(b > 0.0)) {
            return fail("capacities must be positive".into());
        }
        match &self.kind {
            ScenarioKind::ThreeUser { a } => {
                if self.users != 3 || self.links() != 2 {
                    return fail("the three-user network has 3 users and 2 links".into());
                }
                if !(*a > 0.0 && *a <= self.value_bound) {
                    return fail(format!("a = {a} must lie in (0, B]"));
                }
            }
            ScenarioKind::SingleLink => {
                if self.links() != 1 {
                    return fail("single-link scenarios have one capacity".into());
                }
            }
            ScenarioKind::TwoLink => {
                if self.links() != 2 {
                    return fail("two-link scenarios have two capacities".into());
                }
                if !self.users.is_multiple_of(3) {
                    return fail(format!("N = {} is not divisible by 3", self.users));
                }
            }
            ScenarioKind::Custom { instance } => {
                if instance.n != self.users {
                    return fail("custom instance size disagrees with the scenario".into());
                }
            }
        }
        Ok(())
    }

    /// Seed of population `index`.
    pub fn population_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, STREAM_POPULATION, index as u64)
    }

    /// Build population `index`. Random kinds draw `a_i` i.i.d. from `(0, B)`
    /// with a generator seeded by [`Scenario::population_seed`].
    pub fn generate_population(&self, index: usize) -> Result<(Network, Population)> {
        self.check()?;
        let n = self.users;
        let draw_values = || {
            let mut rng = rng_from_seed(self.population_seed(index));
            (0..n)
                .map(|_| open_uniform(&mut rng, self.value_bound))
                .collect::<Vec<f64>>()
        };
        let (network, population) = match &self.kind {
            ScenarioKind::ThreeUser { a } => (
                Network::new(self.capacities.clone(), [vec![0, 1], vec![0], vec![1]])?,
                Population::with_common_sigma(&[*a; 3], self.sigma, self.value_bound),
            ),
            ScenarioKind::SingleLink => (
                Network::single_link(self.capacities[0], n),
                Population::with_common_sigma(&draw_values(), self.sigma, self.value_bound),
            ),
            ScenarioKind::TwoLink => {
                let third = n / 3;
                let routes = (0..n).map(|i| match i / third {
                    0 => vec![0, 1],
                    1 => vec![0],
                    _ => vec![1],
                });
                (
                    Network::new(self.capacities.clone(), routes)?,
                    Population::with_common_sigma(&draw_values(), self.sigma, self.value_bound),
                )
            }
            ScenarioKind::Custom { instance } => instance.build()?,
        };
        let report = validate(&network, &population);
        if !report.is_ok() {
            return Err(Error::InvalidScenario(report.to_string()));
        }
        Ok((network, population))
    }
}

/// Which of the four price regimes of the three-user network applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table1Regime {
    /// `a/sigma <= 3/2`: both links free.
    BothFree,
    /// `3/2 <= a/sigma <= 9/2`: only link 2 priced.
    SecondPriced,
    /// `9/2 <= a/sigma <= 9`: both links priced, all users served.
    BothPriced,
    /// `a/sigma >= 9`: the two-link user is priced out.
    LongRouteExcluded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Solution {
    pub prices: [f64; 2],
    pub rates: [f64; 3],
    pub regime: Table1Regime,
}

/// Closed-form optimum of the three-user network with capacities `(2, 1)` and
/// identical utilities `a x - (3 sigma / 2) x^2`.
pub fn table1_analytic(a: f64, sigma: f64) -> Table1Solution {
    assert!(a > 0.0 && sigma > 0.0, "a and sigma must be positive");
    let r = a / sigma;
    if r <= 1.5 {
        let x = a / (3.0 * sigma);
        Table1Solution {
            prices: [0.0, 0.0],
            rates: [x, x, x],
            regime: Table1Regime::BothFree,
        }
    } else if r <= 4.5 {
        Table1Solution {
            prices: [0.0, a - 1.5 * sigma],
            rates: [0.5, a / (3.0 * sigma), 0.5],
            regime: Table1Regime::SecondPriced,
        }
    } else if r <= 9.0 {
        Table1Solution {
            prices: [2.0 * a / 3.0 - 3.0 * sigma, 2.0 * a / 3.0],
            rates: [1.0 - a / (9.0 * sigma), 1.0 + a / (9.0 * sigma), a / (9.0 * sigma)],
            regime: Table1Regime::BothPriced,
        }
    } else {
        Table1Solution {
            prices: [a - 6.0 * sigma, a - 3.0 * sigma],
            rates: [0.0, 2.0, 1.0],
            regime: Table1Regime::LongRouteExcluded,
        }
    }
}
