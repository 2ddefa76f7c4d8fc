//! Monte Carlo ensembles over generated populations and their result tables.
//!
//! Populations are solved independently (optionally on a thread pool) and the
//! per-population outcomes are folded in population-index order, so the
//! output does not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    error_report, theorem1_bounds, violation_and_gap, ErrorReport, Oracle, ViolationGap,
    REFERENCE_FAST_GRADIENT_ITERATIONS,
};
use crate::network::{Network, Population, PriceVector};
use crate::numeric::CompensatedSum;
use crate::response::{best_response_slice, dual_value, kkt_residual};
use crate::rng::{derive_seed, RNG_ALGORITHM, STREAM_SGD};
use crate::scenarios::{table1_analytic, Scenario};
use crate::solvers::{
    run_fast_gradient, run_pgd, run_sgd, step_constant, FastGradientConfig, PgdConfig, SgdConfig, SolverReport,
    StepSchedule, DEFAULT_SAFETY_CAP,
};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Price-finding method run on every population of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleSolver {
    /// Stochastic descent; `step_constant` defaults to `sigma / sqrt(2)`.
    Sgd { step_constant: Option<f64> },
    Pgd { schedule: StepSchedule },
    FastGradient,
}

impl std::fmt::Display for EnsembleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleSolver::Sgd { step_constant: Some(k) } => write!(f, "sgd(K={k})"),
            EnsembleSolver::Sgd { step_constant: None } => write!(f, "sgd(K=sigma/sqrt(2))"),
            EnsembleSolver::Pgd { schedule } => write!(f, "pgd({schedule:?})"),
            EnsembleSolver::FastGradient => write!(f, "fast-gradient"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub solver: EnsembleSolver,
    /// Iteration counts reported as table rows; sorted and deduplicated.
    pub checkpoints: Vec<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Fast gradient iterations for the multi-link reference price;
    /// `None` uses the default oracle.
    pub oracle_iterations: Option<usize>,
}

impl EnsembleConfig {
    pub fn sgd(checkpoints: Vec<usize>) -> Self {
        Self {
            solver: EnsembleSolver::Sgd { step_constant: None },
            checkpoints,
            threads: None,
            oracle_iterations: None,
        }
    }

    pub fn fast_gradient(checkpoints: Vec<usize>) -> Self {
        Self {
            solver: EnsembleSolver::FastGradient,
            checkpoints,
            threads: None,
            oracle_iterations: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn with_oracle_iterations(mut self, iterations: usize) -> Self {
        self.oracle_iterations = Some(iterations);
        self
    }

    fn oracle_label(&self, links: usize) -> String {
        if links == 1 {
            "bisection".into()
        } else {
            let t = self.oracle_iterations.unwrap_or(REFERENCE_FAST_GRADIENT_ITERATIONS);
            format!("fast-gradient(T={t})")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub deltas: Vec<f64>,
    pub step_constant: Option<f64>,
    pub safety_cap: usize,
    pub threads: Option<usize>,
}

impl StoppingConfig {
    pub fn new(deltas: Vec<f64>) -> Self {
        Self {
            deltas,
            step_constant: None,
            safety_cap: DEFAULT_SAFETY_CAP,
            threads: None,
        }
    }
}

/// A table cell: counts print as integers, everything else with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Int(v) => v as f64,
            Cell::Float(v) => v,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{}", format_float(v)),
        }
    }
}

/// Scientific notation with 17 significant digits, enough to round-trip an f64.
pub fn format_float(value: f64) -> String {
    format!("{value:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteClassMean {
    pub route: Vec<usize>,
    pub users: usize,
    pub mean_rate: f64,
}

/// Reference solution and bookkeeping for one population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub index: usize,
    pub population_seed: u64,
    pub solver_seed: Option<u64>,
    pub oracle_price: Vec<f64>,
    pub oracle_utility: f64,
    /// Per-link demand at zero price.
    pub free_demand: Vec<f64>,
    /// Largest `|(R x*)_j - b_j|` at the reference price.
    pub oracle_discrepancy: f64,
    pub route_class_means: Vec<RouteClassMean>,
    /// Per-run notes, e.g. a single run exceeding an expectation bound.
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub title: String,
    pub scenario: Option<Scenario>,
    pub master_seed: Option<u64>,
    pub solver: String,
    pub oracle: String,
    pub rng_algorithm: String,
    pub code_version: String,
    pub populations: Vec<PopulationSummary>,
}

/// Rows keyed by iteration count (or threshold), columns named in `columns`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: TableMetadata,
}

impl ResultTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        let k = self.column_index(name)?;
        self.rows.get(row).map(|r| r[k].as_f64())
    }

    /// Index of the row whose first column equals `key`.
    pub fn row_for(&self, key: f64) -> Option<usize> {
        self.rows.iter().position(|r| r[0].as_f64() == key)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::to_string))?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    /// Write `<stem>.csv` plus the `<stem>.json` metadata sidecar.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv()?)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.metadata)?,
        )?;
        Ok(())
    }

    /// Write the whole table, metadata included, as `<stem>.json`.
    pub fn write_json(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn run_indexed<T, F>(count: usize, threads: Option<usize>, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let collect = || (0..count).into_par_iter().map(&work).collect::<Vec<_>>();
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(collect),
        None => collect(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|source| Error::Population {
                index,
                source: Box::new(source),
            })
        })
        .collect()
}

fn summarize(
    scenario: &Scenario,
    index: usize,
    solver_seed: Option<u64>,
    network: &Network,
    population: &Population,
    oracle: &Oracle,
) -> PopulationSummary {
    let n = network.users();
    let mut free = vec![CompensatedSum::new(); network.links()];
    for (route, u) in network.routes().zip(population.users()) {
        let x = u.free_demand(n);
        for &j in route {
            free[j].add(x);
        }
    }
    let optimal = best_response_slice(network, population, &oracle.price);
    let demand_gap = crate::network::aggregate_demand_unchecked(network, &optimal)
        .iter()
        .zip(network.capacities())
        .fold(0.0_f64, |m, (d, b)| m.max((d - b).abs()));

    let mut classes: BTreeMap<&[usize], (usize, CompensatedSum)> = BTreeMap::new();
    for (route, &x) in network.routes().zip(&optimal) {
        let entry = classes.entry(route).or_default();
        entry.0 += 1;
        entry.1.add(x);
    }
    PopulationSummary {
        index,
        population_seed: scenario.population_seed(index),
        solver_seed,
        oracle_price: oracle.price.to_vec(),
        oracle_utility: oracle.utility,
        free_demand: free.iter().map(CompensatedSum::value).collect(),
        oracle_discrepancy: demand_gap,
        route_class_means: classes
            .into_iter()
            .map(|(route, (users, sum))| RouteClassMean {
                route: route.to_vec(),
                users,
                mean_rate: sum.value() / users as f64,
            })
            .collect(),
        notes: Vec::new(),
    }
}

fn solver_seed(scenario: &Scenario, index: usize) -> u64 {
    derive_seed(scenario.seed, STREAM_SGD, index as u64)
}

struct CheckpointOutcome {
    errors: ErrorReport,
    violation: ViolationGap,
    violation_bound: f64,
    utility_gap_bound: f64,
    dual_gap: f64,
    regret_bound: f64,
    measurements: u64,
}

struct PopulationOutcome {
    summary: PopulationSummary,
    checkpoints: Vec<CheckpointOutcome>,
}

fn solve_fixed_budget(scenario: &Scenario, index: usize, config: &EnsembleConfig, checkpoints: &[usize]) -> Result<PopulationOutcome> {
    let (network, population) = scenario.generate_population(index)?;
    let oracle = match config.oracle_iterations {
        Some(t) if network.links() > 1 => Oracle::fast_gradient(&network, &population, t)?,
        _ => Oracle::reference(&network, &population)?,
    };
    let dual_star = dual_value(&network, &population, &oracle.price);
    let budget = *checkpoints.last().expect("checkpoints are non-empty");
    let k = match &config.solver {
        EnsembleSolver::Sgd { step_constant: Some(k) } => *k,
        _ => step_constant(&population),
    };
    let (report, seed): (SolverReport, Option<u64>) = match &config.solver {
        EnsembleSolver::Sgd { .. } => {
            let seed = solver_seed(scenario, index);
            let sgd = SgdConfig {
                step_constant: k,
                ..SgdConfig::new(&population, budget, seed).with_checkpoints(checkpoints.to_vec())
            };
            (run_sgd(&network, &population, &sgd)?, Some(seed))
        }
        EnsembleSolver::Pgd { schedule } => {
            let pgd = PgdConfig {
                checkpoints: checkpoints.to_vec(),
                ..PgdConfig::new(budget, *schedule)
            };
            (run_pgd(&network, &population, &pgd)?, None)
        }
        EnsembleSolver::FastGradient => {
            let fg = FastGradientConfig {
                iterations: budget,
                checkpoints: checkpoints.to_vec(),
            };
            (run_fast_gradient(&network, &population, &fg)?, None)
        }
    };

    let mut summary = summarize(scenario, index, seed, &network, &population, &oracle);
    let per_call = report.measurements.checked_div(report.gradient_evaluations as u64).unwrap_or(0);
    let mut outcomes = Vec::with_capacity(checkpoints.len());
    for snapshot in &report.snapshots {
        let t = snapshot.iteration;
        let bounds = theorem1_bounds(&network, &population, k, t);
        let (violation_bound, utility_gap_bound) = match config.solver {
            EnsembleSolver::FastGradient => (bounds.fg_violation_bound, bounds.fg_utility_bound),
            _ => (bounds.violation_bound, bounds.utility_gap_bound),
        };
        let errors = error_report(&network, &population, &snapshot.price, &oracle);
        let violation = violation_and_gap(&network, &population, &snapshot.price, oracle.utility);
        let worst = violation.violation.iter().fold(0.0_f64, |m, &v| m.max(v));
        if worst > violation_bound {
            summary
                .notes
                .push(format!("T={t}: violation {worst} exceeds bound {violation_bound}"));
        }
        if violation.utility_gap > utility_gap_bound {
            summary.notes.push(format!(
                "T={t}: utility gap {} exceeds bound {utility_gap_bound}",
                violation.utility_gap
            ));
        }
        // fast gradient evaluates from t = 1; descent methods from t = 2
        let evaluations = match config.solver {
            EnsembleSolver::FastGradient => t,
            _ => t - 1,
        };
        outcomes.push(CheckpointOutcome {
            errors,
            violation,
            violation_bound,
            utility_gap_bound,
            dual_gap: dual_value(&network, &population, &snapshot.price) - dual_star,
            regret_bound: match config.solver {
                EnsembleSolver::Sgd { .. } => bounds.regret_bound,
                _ => f64::NAN,
            },
            measurements: evaluations as u64 * per_call,
        });
    }
    Ok(PopulationOutcome {
        summary,
        checkpoints: outcomes,
    })
}

#[derive(Clone, Default)]
struct Stat {
    sum: CompensatedSum,
    max: f64,
    min: f64,
    count: usize,
}

impl Stat {
    fn push(&mut self, v: f64) {
        if self.count == 0 {
            self.max = v;
            self.min = v;
        } else {
            self.max = self.max.max(v);
            self.min = self.min.min(v);
        }
        self.sum.add(v);
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        self.sum.value() / self.count as f64
    }
}

fn link_columns(prefix: &str, links: usize, stats: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    for stat in stats {
        for j in 1..=links {
            out.push(format!("{prefix}_{stat}_{j}"));
        }
    }
    out
}

fn sorted_checkpoints(checkpoints: &[usize]) -> Result<Vec<usize>> {
    let mut c = checkpoints.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.is_empty() || c[0] == 0 {
        return Err(Error::InvalidConfig("checkpoints must be positive and non-empty".into()));
    }
    Ok(c)
}

/// Solve every population with the configured method and tabulate mean and
/// maximum errors at each checkpoint.
///
/// Columns: `T`, `iterations_mean`, `measurements_mean`, per-link
/// `price_err_{mean,max}_j` and `demand_err_{mean,max}_j`,
/// `utility_err_{mean,max}`, per-link `violation_{mean,max}_j`,
/// `utility_gap_{mean,max}`, `violation_bound`, `utility_gap_bound`,
/// `dual_gap_mean`, `regret_bound` (stochastic runs only, NaN otherwise),
/// `abs_fallbacks`.
pub fn run_ensemble(scenario: &Scenario, config: &EnsembleConfig) -> Result<ResultTable> {
    scenario.check()?;
    let checkpoints = sorted_checkpoints(&config.checkpoints)?;
    let outcomes = run_indexed(scenario.populations, config.threads, |index| {
        solve_fixed_budget(scenario, index, config, &checkpoints)
    })?;

    let m = scenario.links();
    let mut columns = vec!["T".to_string(), "iterations_mean".into(), "measurements_mean".into()];
    columns.extend(link_columns("price_err", m, &["mean", "max"]));
    columns.extend(link_columns("demand_err", m, &["mean", "max"]));
    columns.extend(["utility_err_mean".into(), "utility_err_max".into()]);
    columns.extend(link_columns("violation", m, &["mean", "max"]));
    columns.extend([
        "utility_gap_mean".into(),
        "utility_gap_max".into(),
        "violation_bound".into(),
        "utility_gap_bound".into(),
        "dual_gap_mean".into(),
        "regret_bound".into(),
        "abs_fallbacks".into(),
    ]);

    let mut rows = Vec::with_capacity(checkpoints.len());
    for (row, &t) in checkpoints.iter().enumerate() {
        let mut price = vec![Stat::default(); m];
        let mut demand = vec![Stat::default(); m];
        let mut violation = vec![Stat::default(); m];
        let mut utility = Stat::default();
        let mut gap = Stat::default();
        let mut measurements = Stat::default();
        let mut violation_bound = 0.0_f64;
        let mut gap_bound = 0.0_f64;
        let mut dual_gap = Stat::default();
        let mut regret_bound = f64::NAN;
        let mut fallbacks = 0u64;
        for outcome in &outcomes {
            let c = &outcome.checkpoints[row];
            for j in 0..m {
                price[j].push(c.errors.price_err[j]);
                demand[j].push(c.errors.demand_err[j]);
                violation[j].push(c.violation.violation[j]);
            }
            fallbacks += c.errors.price_err_absolute.iter().filter(|&&f| f).count() as u64
                + u64::from(c.errors.utility_err_absolute);
            utility.push(c.errors.utility_err);
            gap.push(c.violation.utility_gap);
            measurements.push(c.measurements as f64);
            violation_bound = violation_bound.max(c.violation_bound);
            gap_bound = gap_bound.max(c.utility_gap_bound);
            dual_gap.push(c.dual_gap);
            regret_bound = regret_bound.max(c.regret_bound);
        }
        let mut cells = vec![
            Cell::Int(t as u64),
            Cell::Float(t as f64),
            Cell::Float(measurements.mean()),
        ];
        cells.extend(price.iter().map(|s| Cell::Float(s.mean())));
        cells.extend(price.iter().map(|s| Cell::Float(s.max)));
        cells.extend(demand.iter().map(|s| Cell::Float(s.mean())));
        cells.extend(demand.iter().map(|s| Cell::Float(s.max)));
        cells.extend([Cell::Float(utility.mean()), Cell::Float(utility.max)]);
        cells.extend(violation.iter().map(|s| Cell::Float(s.mean())));
        cells.extend(violation.iter().map(|s| Cell::Float(s.max)));
        cells.extend([
            Cell::Float(gap.mean()),
            Cell::Float(gap.max),
            Cell::Float(violation_bound),
            Cell::Float(gap_bound),
            Cell::Float(dual_gap.mean()),
            Cell::Float(regret_bound),
            Cell::Int(fallbacks),
        ]);
        rows.push(cells);
    }

    let oracle = config.oracle_label(m);
    Ok(ResultTable {
        columns,
        rows,
        metadata: TableMetadata {
            title: format!("{} ensemble", config.solver),
            scenario: Some(scenario.clone()),
            master_seed: Some(scenario.seed),
            solver: config.solver.to_string(),
            oracle,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            code_version: CODE_VERSION.to_string(),
            populations: outcomes.into_iter().map(|o| o.summary).collect(),
        },
    })
}

struct StoppingOutcome {
    summary: PopulationSummary,
    per_delta: Vec<(SolverReport, ErrorReport)>,
}

/// Run the stochastic method until the averaged-price stopping rule fires, once
/// per threshold, and tabulate stopping times and errors.
///
/// Columns: `delta`, `iterations_{mean,max,min}`, per-link
/// `price_err_{mean,max}_j`, per-link `demand_err_mean_j`,
/// `utility_err_mean`, `cap_hits`.
pub fn run_stopping_ensemble(scenario: &Scenario, config: &StoppingConfig) -> Result<ResultTable> {
    scenario.check()?;
    if config.deltas.is_empty() || config.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidConfig("thresholds must be positive and non-empty".into()));
    }
    let outcomes = run_indexed(scenario.populations, config.threads, |index| {
        let (network, population) = scenario.generate_population(index)?;
        let oracle = Oracle::reference(&network, &population)?;
        let seed = solver_seed(scenario, index);
        let mut summary = summarize(scenario, index, Some(seed), &network, &population, &oracle);
        let mut per_delta = Vec::with_capacity(config.deltas.len());
        for &delta in &config.deltas {
            let mut sgd = SgdConfig::new(&population, 0, seed).with_delta(delta);
            sgd.safety_cap = config.safety_cap;
            if let Some(k) = config.step_constant {
                sgd.step_constant = k;
            }
            let report = run_sgd(&network, &population, &sgd)?;
            if report.safety_cap_hit {
                summary
                    .notes
                    .push(format!("delta={delta}: safety cap of {} iterations hit", config.safety_cap));
            }
            let errors = error_report(&network, &population, &report.final_price, &oracle);
            per_delta.push((report, errors));
        }
        Ok(StoppingOutcome { summary, per_delta })
    })?;

    let m = scenario.links();
    let mut columns = vec![
        "delta".to_string(),
        "iterations_mean".into(),
        "iterations_max".into(),
        "iterations_min".into(),
    ];
    columns.extend(link_columns("price_err", m, &["mean", "max"]));
    columns.extend(link_columns("demand_err", m, &["mean"]));
    columns.extend(["utility_err_mean".into(), "cap_hits".into()]);

    let mut rows = Vec::new();
    for (row, &delta) in config.deltas.iter().enumerate() {
        let mut iterations = Stat::default();
        let mut price = vec![Stat::default(); m];
        let mut demand = vec![Stat::default(); m];
        let mut utility = Stat::default();
        let mut cap_hits = 0u64;
        for outcome in &outcomes {
            let (report, errors) = &outcome.per_delta[row];
            iterations.push(report.iterations_used as f64);
            cap_hits += u64::from(report.safety_cap_hit);
            for j in 0..m {
                price[j].push(errors.price_err[j]);
                demand[j].push(errors.demand_err[j]);
            }
            utility.push(errors.utility_err);
        }
        let mut cells = vec![
            Cell::Float(delta),
            Cell::Float(iterations.mean()),
            Cell::Int(iterations.max as u64),
            Cell::Int(iterations.min as u64),
        ];
        cells.extend(price.iter().map(|s| Cell::Float(s.mean())));
        cells.extend(price.iter().map(|s| Cell::Float(s.max)));
        cells.extend(demand.iter().map(|s| Cell::Float(s.mean())));
        cells.extend([Cell::Float(utility.mean()), Cell::Int(cap_hits)]);
        rows.push(cells);
    }

    Ok(ResultTable {
        columns,
        rows,
        metadata: TableMetadata {
            title: "stopping-rule ensemble".into(),
            scenario: Some(scenario.clone()),
            master_seed: Some(scenario.seed),
            solver: format!(
                "sgd(K={}) with stopping rule",
                config
                    .step_constant
                    .map_or_else(|| "sigma/sqrt(2)".to_string(), |k| k.to_string())
            ),
            oracle: if m == 1 { "bisection".into() } else { "fast-gradient(T=200)".into() },
            rng_algorithm: RNG_ALGORITHM.to_string(),
            code_version: CODE_VERSION.to_string(),
            populations: outcomes.into_iter().map(|o| o.summary).collect(),
        },
    })
}

/// Closed-form optimum of the three-user network over a grid of `a / sigma`,
/// with the largest KKT residual of each row.
pub fn table1_table(ratios: &[f64], sigma: f64) -> Result<ResultTable> {
    if !(sigma > 0.0) || ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidConfig("a/sigma and sigma must be positive".into()));
    }
    let columns = [
        "a_over_sigma", "sigma", "a", "lambda_1", "lambda_2", "x_1", "x_2", "x_3", "kkt_max",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for &ratio in ratios {
        let a = ratio * sigma;
        let solution = table1_analytic(a, sigma);
        let (network, population) = Scenario::three_user(a, sigma, a).generate_population(0)?;
        let residual = kkt_residual(
            &network,
            &population,
            &PriceVector(solution.prices.to_vec()),
            &solution.rates.to_vec().into(),
        );
        let mut row = vec![Cell::Float(ratio), Cell::Float(sigma), Cell::Float(a)];
        row.extend(solution.prices.iter().chain(&solution.rates).map(|&v| Cell::Float(v)));
        row.push(Cell::Float(residual.max_norm()));
        rows.push(row);
    }
    Ok(ResultTable {
        columns,
        rows,
        metadata: TableMetadata {
            title: "three-user network, closed-form optimum".into(),
            scenario: None,
            master_seed: None,
            solver: "analytic".into(),
            oracle: "analytic".into(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            code_version: CODE_VERSION.to_string(),
            populations: Vec::new(),
        },
    })
}
