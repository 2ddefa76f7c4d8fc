//! Network and user-population data model.
//!
//! Links and users are indexed from zero in code and in scenario files.
//! Human-readable messages (validation reports) number them from one.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::utility::QuadraticUtility;

/// Link capacities plus one route (set of links) per user.
///
/// Routes are stored as sparse columns of the routing matrix in a single
/// compressed buffer: user `i` uses `links[offsets[i]..offsets[i + 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    capacities: Vec<f64>,
    offsets: Vec<usize>,
    links: Vec<usize>,
}

impl Network {
    /// Build a network. Route entries must be valid, distinct link indices;
    /// empty routes are accepted here and reported by [`validate`].
    pub fn new<R, I>(capacities: Vec<f64>, routes: R) -> Result<Self>
    where
        R: IntoIterator<Item = I>,
        I: AsRef<[usize]>,
    {
        let m = capacities.len();
        let mut offsets = vec![0];
        let mut links = Vec::new();
        for (user, route) in routes.into_iter().enumerate() {
            let start = links.len();
            for &link in route.as_ref() {
                if link >= m {
                    return Err(Error::LinkOutOfRange { user, link, links: m });
                }
                if links[start..].contains(&link) {
                    return Err(Error::DuplicateLink { user, link });
                }
                links.push(link);
            }
            links[start..].sort_unstable();
            offsets.push(links.len());
        }
        Ok(Self {
            capacities,
            offsets,
            links,
        })
    }

    /// A network in which every user crosses the same single link.
    pub fn single_link(capacity: f64, users: usize) -> Self {
        Self {
            capacities: vec![capacity],
            offsets: (0..=users).collect(),
            links: vec![0; users],
        }
    }

    /// Number of links `m`.
    pub fn links(&self) -> usize {
        self.capacities.len()
    }

    /// Number of users `N`.
    pub fn users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    #[inline]
    pub fn route(&self, user: usize) -> &[usize] {
        &self.links[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn routes(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.offsets.windows(2).map(|w| &self.links[w[0]..w[1]])
    }

    /// Number of users crossing each link.
    pub fn link_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.links()];
        for &j in &self.links {
            loads[j] += 1;
        }
        loads
    }

    #[inline]
    pub(crate) fn route_price_unchecked(&self, user: usize, prices: &[f64]) -> f64 {
        let mut total = 0.0;
        for &j in self.route(user) {
            total += prices[j];
        }
        total
    }
}

/// Per-user utility parameters plus the population-wide constants `B` and `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population {
    users: Vec<QuadraticUtility>,
    value_bound: f64,
    sigma_floor: f64,
}

impl Population {
    pub fn new(users: Vec<QuadraticUtility>, value_bound: f64, sigma_floor: f64) -> Self {
        Self {
            users,
            value_bound,
            sigma_floor,
        }
    }

    /// Users that differ only in their value coefficient.
    pub fn with_common_sigma(values: &[f64], sigma: f64, value_bound: f64) -> Self {
        let users = values
            .iter()
            .map(|&a| QuadraticUtility::new(a, sigma))
            .collect();
        Self::new(users, value_bound, sigma)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn users(&self) -> &[QuadraticUtility] {
        &self.users
    }

    #[inline]
    pub fn user(&self, i: usize) -> &QuadraticUtility {
        &self.users[i]
    }

    /// The global marginal-utility bound `B`.
    pub fn value_bound(&self) -> f64 {
        self.value_bound
    }

    /// The common curvature floor `sigma`.
    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    /// Reorder users; `order[k]` is the old index of the new user `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            users: order.iter().map(|&i| self.users[i]).collect(),
            ..self.clone()
        }
    }
}

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

vector_newtype!(
    /// Per-link prices `lambda`.
    PriceVector
);

vector_newtype!(
    /// Per-user transmission rates `x`.
    Allocation
);

impl PriceVector {
    /// Whether every component lies in `[0, bound]`.
    pub fn in_box(&self, bound: f64) -> bool {
        self.0.iter().all(|&p| (0.0..=bound).contains(&p))
    }
}

/// One violated structural assumption.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NoLinks,
    NoUsers,
    ZeroRoute { user: usize },
    NonPositiveCapacity { link: usize, capacity: f64 },
    UnusedLink { link: usize },
    PopulationSizeMismatch { network: usize, population: usize },
    NonPositiveSigmaFloor { sigma_floor: f64 },
    NonPositiveValueBound { value_bound: f64 },
    ValueOutOfRange { user: usize, a: f64, value_bound: f64 },
    CurvatureBelowFloor { user: usize, sigma: f64, sigma_floor: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoLinks => write!(f, "network has no links"),
            Violation::NoUsers => write!(f, "network has no users"),
            Violation::ZeroRoute { user } => write!(f, "route {} is zero", user + 1),
            Violation::NonPositiveCapacity { link, capacity } => {
                write!(f, "capacity of link {} not positive ({capacity})", link + 1)
            }
            Violation::UnusedLink { link } => write!(f, "link {} is used by no user", link + 1),
            Violation::PopulationSizeMismatch {
                network,
                population,
            } => write!(
                f,
                "network has {network} routes but population has {population} users"
            ),
            Violation::NonPositiveSigmaFloor { sigma_floor } => {
                write!(f, "curvature floor not positive ({sigma_floor})")
            }
            Violation::NonPositiveValueBound { value_bound } => {
                write!(f, "value bound not positive ({value_bound})")
            }
            Violation::ValueOutOfRange {
                user,
                a,
                value_bound,
            } => write!(
                f,
                "value coefficient of user {} is {a}, outside (0, {value_bound}]",
                user + 1
            ),
            Violation::CurvatureBelowFloor {
                user,
                sigma,
                sigma_floor,
            } => write!(
                f,
                "curvature of user {} is {sigma}, below the floor {sigma_floor}",
                user + 1
            ),
        }
    }
}

/// Outcome of [`validate`]; empty means every assumption holds.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check the structural assumptions on a network and its population.
pub fn validate(network: &Network, population: &Population) -> ValidationReport {
    let mut violations = Vec::new();
    if network.links() == 0 {
        violations.push(Violation::NoLinks);
    }
    if network.users() == 0 {
        violations.push(Violation::NoUsers);
    }
    for (user, route) in network.routes().enumerate() {
        if route.is_empty() {
            violations.push(Violation::ZeroRoute { user });
        }
    }
    for (link, &capacity) in network.capacities().iter().enumerate() {
        // also rejects NaN
        if !(capacity > 0.0) {
            violations.push(Violation::NonPositiveCapacity { link, capacity });
        }
    }
    for (link, &load) in network.link_loads().iter().enumerate() {
        if load == 0 {
            violations.push(Violation::UnusedLink { link });
        }
    }
    if network.users() != population.len() {
        violations.push(Violation::PopulationSizeMismatch {
            network: network.users(),
            population: population.len(),
        });
    }
    let sigma_floor = population.sigma_floor();
    let value_bound = population.value_bound();
    if !(sigma_floor > 0.0) {
        violations.push(Violation::NonPositiveSigmaFloor { sigma_floor });
    }
    if !(value_bound > 0.0) {
        violations.push(Violation::NonPositiveValueBound { value_bound });
    }
    for (user, u) in population.users().iter().enumerate() {
        if !(u.a > 0.0 && u.a <= value_bound) {
            violations.push(Violation::ValueOutOfRange {
                user,
                a: u.a,
                value_bound,
            });
        }
        if !(u.sigma >= sigma_floor) {
            violations.push(Violation::CurvatureBelowFloor {
                user,
                sigma: u.sigma,
                sigma_floor,
            });
        }
    }
    ValidationReport { violations }
}

/// `<lambda, R_i>`: the total price along user `i`'s route.
pub fn route_price(network: &Network, user: usize, prices: &PriceVector) -> Result<f64> {
    if user >= network.users() {
        return Err(Error::UserOutOfRange {
            index: user,
            users: network.users(),
        });
    }
    check_len("price vector", network.links(), prices.len())?;
    Ok(network.route_price_unchecked(user, prices))
}

/// `R x`: per-link aggregate demand.
pub fn aggregate_demand(network: &Network, rates: &Allocation) -> Result<Vec<f64>> {
    check_len("allocation", network.users(), rates.len())?;
    Ok(aggregate_demand_unchecked(network, rates))
}

pub(crate) fn aggregate_demand_unchecked(network: &Network, rates: &[f64]) -> Vec<f64> {
    let mut sums = vec![CompensatedSum::new(); network.links()];
    for (route, &x) in network.routes().zip(rates) {
        for &j in route {
            sums[j].add(x);
        }
    }
    sums.iter().map(CompensatedSum::value).collect()
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// One user entry of a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub a: f64,
    pub sigma: f64,
    pub route: Vec<usize>,
}

/// Explicit problem instance as stored in a scenario file.
///
/// ```json
/// {"m": 2, "N": 3, "capacities": [2, 1], "B": 12, "sigma_floor": 1,
///  "users": [{"a": 6, "sigma": 1, "route": [0, 1]}, ...]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub capacities: Vec<f64>,
    #[serde(rename = "B")]
    pub value_bound: f64,
    pub sigma_floor: f64,
    pub users: Vec<UserRecord>,
}

impl InstanceFile {
    pub fn from_parts(network: &Network, population: &Population) -> Self {
        Self {
            m: network.links(),
            n: network.users(),
            capacities: network.capacities().to_vec(),
            value_bound: population.value_bound(),
            sigma_floor: population.sigma_floor(),
            users: network
                .routes()
                .zip(population.users())
                .map(|(route, u)| UserRecord {
                    a: u.a,
                    sigma: u.sigma,
                    route: route.to_vec(),
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<(Network, Population)> {
        check_len("capacities", self.m, self.capacities.len())?;
        check_len("users", self.n, self.users.len())?;
        let network = Network::new(
            self.capacities.clone(),
            self.users.iter().map(|u| u.route.as_slice()),
        )?;
        let population = Population::new(
            self.users
                .iter()
                .map(|u| QuadraticUtility::new(u.a, u.sigma))
                .collect(),
            self.value_bound,
            self.sigma_floor,
        );
        Ok((network, population))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
