use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use dualprice::harness::{
    run_ensemble, run_stopping_ensemble, table1_table, Cell, EnsembleConfig, EnsembleSolver, ResultTable,
    StoppingConfig, TableMetadata, CODE_VERSION,
};
use dualprice::metrics::{error_report, Oracle};
use dualprice::network::InstanceFile;
use dualprice::rng::RNG_ALGORITHM;
use dualprice::scenarios::Scenario;
use dualprice::solvers::{
    run_fast_gradient, run_pgd, run_sgd, solve_single_link_bisection, step_constant, FastGradientConfig, PgdConfig,
    SgdConfig, StepSchedule,
};
use dualprice::verify::{outcomes_to_csv, run_invariant_suite, VerifyConfig};
use dualprice::{aggregate_demand, response::best_response_all, Network, Population};

#[derive(Parser)]
#[command(name = "dualprice", version, about = "Congestion prices by dual stochastic gradient descent")]
struct Cli {
    /// Directory for result files; tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Sgd,
    Pgd,
    Fast,
    Bisect,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnsembleArg {
    Sgd,
    Fast,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form optimum of the three-user network.
    Table1 {
        #[arg(long = "a-over-sigma", value_delimiter = ',', num_args = 1.., default_values_t = [1.0, 3.0, 6.0, 12.0])]
        a_over_sigma: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Single shared link with uniformly drawn values.
    Example2 {
        #[arg(long = "N", default_value_t = 100_000)]
        n: usize,
        #[arg(long = "B", default_value_t = 100.0)]
        value_bound: f64,
        #[arg(long = "b", default_value_t = 5.0)]
        capacity: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 30)]
        k: usize,
        #[arg(long = "T", value_delimiter = ',', num_args = 1.., default_values_t = [1000, 2000, 4000])]
        t: Vec<usize>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Sgd)]
        solver: EnsembleArg,
    },
    /// Two links shared by three equal user classes.
    Example3 {
        #[arg(long = "B", default_value_t = 100.0)]
        value_bound: f64,
        #[arg(long = "N", default_value_t = 120_000)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 30)]
        k: usize,
        #[arg(long = "T", value_delimiter = ',', num_args = 1.., default_values_t = [1000, 2000, 4000, 8000])]
        t: Vec<usize>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Sgd)]
        solver: EnsembleArg,
    },
    /// Stochastic descent stopped by the averaged-price rule, on the single-link setup.
    Stopping {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1e-6, 1e-7, 1e-8])]
        delta: Vec<f64>,
        #[arg(long = "N", default_value_t = 100_000)]
        n: usize,
        #[arg(long = "B", default_value_t = 100.0)]
        value_bound: f64,
        #[arg(long = "b", default_value_t = 5.0)]
        capacity: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 30)]
        k: usize,
    },
    /// Solve one instance read from a JSON file.
    Solve {
        #[arg(long = "scenario-file")]
        scenario_file: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverArg::Sgd)]
        solver: SolverArg,
        /// Iteration budget; 0 with --delta runs until the stopping rule fires.
        #[arg(long = "T", default_value_t = 4000)]
        t: usize,
        #[arg(long)]
        delta: Option<f64>,
        /// Population index when the file describes a generator.
        #[arg(long, default_value_t = 0)]
        population: usize,
    },
    /// Run the invariant and bound checks; exits with status 2 if any fails.
    VerifyBounds {
        /// Small ensembles instead of the full-size ones.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn emit(cli: &Cli, table: &ResultTable, stem: &str) -> anyhow::Result<()> {
    match (&cli.out, cli.format) {
        (Some(dir), Format::Csv) => table.write_csv(dir, stem)?,
        (Some(dir), Format::Json) => table.write_json(dir, stem)?,
        (None, Format::Csv) => print!("{}", table.to_csv()?),
        (None, Format::Json) => println!("{}", serde_json::to_string_pretty(table)?),
    }
    Ok(())
}

fn ensemble_solver(arg: EnsembleArg) -> EnsembleSolver {
    match arg {
        EnsembleArg::Sgd => EnsembleSolver::Sgd { step_constant: None },
        EnsembleArg::Fast => EnsembleSolver::FastGradient,
    }
}

fn ensemble(cli: &Cli, scenario: &Scenario, solver: EnsembleArg, t: &[usize], stem: &str) -> anyhow::Result<()> {
    let config = EnsembleConfig {
        solver: ensemble_solver(solver),
        checkpoints: t.to_vec(),
        threads: cli.threads,
        oracle_iterations: None,
    };
    emit(cli, &run_ensemble(scenario, &config)?, stem)
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Table1 { a_over_sigma, sigma } => emit(cli, &table1_table(a_over_sigma, *sigma)?, "table1")?,
        Command::Example2 {
            n,
            value_bound,
            capacity,
            sigma,
            k,
            t,
            solver,
        } => {
            let scenario = Scenario::single_link(*n, *value_bound, *capacity, *sigma, *k, cli.seed);
            ensemble(cli, &scenario, *solver, t, "example2")?;
        }
        Command::Example3 {
            value_bound,
            n,
            sigma,
            k,
            t,
            solver,
        } => {
            let scenario = Scenario::two_link(*n, *value_bound, *sigma, *k, cli.seed);
            ensemble(cli, &scenario, *solver, t, &format!("example3_B{value_bound}"))?;
        }
        Command::Stopping {
            delta,
            n,
            value_bound,
            capacity,
            sigma,
            k,
        } => {
            let scenario = Scenario::single_link(*n, *value_bound, *capacity, *sigma, *k, cli.seed);
            let config = StoppingConfig {
                threads: cli.threads,
                ..StoppingConfig::new(delta.clone())
            };
            emit(cli, &run_stopping_ensemble(&scenario, &config)?, "stopping")?;
        }
        Command::Solve {
            scenario_file,
            solver,
            t,
            delta,
            population,
        } => solve(cli, scenario_file, *solver, *t, *delta, *population)?,
        Command::VerifyBounds { quick } => {
            let config = VerifyConfig {
                seed: cli.seed,
                threads: cli.threads,
                ..if *quick { VerifyConfig::quick() } else { VerifyConfig::default() }
            };
            let outcomes = run_invariant_suite(&config)?;
            for outcome in &outcomes {
                println!("{outcome}");
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                match cli.format {
                    Format::Csv => std::fs::write(dir.join("verify.csv"), outcomes_to_csv(&outcomes)?)?,
                    Format::Json => std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&outcomes)?)?,
                }
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", outcomes.len());
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_instance(path: &Path, population: usize) -> anyhow::Result<(Network, Population, Option<Scenario>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("kind").is_some() {
        let scenario: Scenario = serde_json::from_value(value)?;
        if population >= scenario.populations {
            bail!("population {population} out of range (scenario has {})", scenario.populations);
        }
        let (network, pop) = scenario.generate_population(population)?;
        Ok((network, pop, Some(scenario)))
    } else {
        let (network, pop) = serde_json::from_value::<InstanceFile>(value)?.build()?;
        Ok((network, pop, None))
    }
}

fn solve(
    cli: &Cli,
    path: &Path,
    solver: SolverArg,
    t: usize,
    delta: Option<f64>,
    population: usize,
) -> anyhow::Result<()> {
    let (network, pop, scenario) = load_instance(path, population)?;
    let seed = scenario.as_ref().map_or(cli.seed, |s| {
        dualprice::rng::derive_seed(s.seed, dualprice::rng::STREAM_SGD, population as u64)
    });
    let (price, report) = match solver {
        SolverArg::Sgd => {
            let mut config = SgdConfig::new(&pop, t, seed);
            config.delta = delta;
            let report = run_sgd(&network, &pop, &config)?;
            (report.final_price.clone(), Some(report))
        }
        SolverArg::Pgd => {
            let schedule = StepSchedule::InverseSqrt { k: step_constant(&pop) };
            let report = run_pgd(&network, &pop, &PgdConfig::new(t, schedule))?;
            (report.final_price.clone(), Some(report))
        }
        SolverArg::Fast => {
            let report = run_fast_gradient(&network, &pop, &FastGradientConfig::new(t))?;
            (report.final_price.clone(), Some(report))
        }
        SolverArg::Bisect => (solve_single_link_bisection(&network, &pop, None)?, None),
    };
    let oracle = Oracle::reference(&network, &pop)?;
    let errors = error_report(&network, &pop, &price, &oracle);
    let demand = aggregate_demand(&network, &best_response_all(&network, &pop, &price))?;

    let columns = ["link", "price", "oracle_price", "price_err", "demand", "capacity"]
        .map(String::from)
        .to_vec();
    let rows = (0..network.links())
        .map(|j| {
            vec![
                Cell::Int(j as u64 + 1),
                Cell::Float(price[j]),
                Cell::Float(oracle.price[j]),
                Cell::Float(errors.price_err[j]),
                Cell::Float(demand[j]),
                Cell::Float(network.capacities()[j]),
            ]
        })
        .collect();
    let table = ResultTable {
        columns,
        rows,
        metadata: TableMetadata {
            title: format!("solve {}", path.display()),
            scenario,
            master_seed: report.as_ref().and_then(|r| r.seed),
            solver: report
                .as_ref()
                .map_or_else(|| "bisection".to_string(), |r| format!("{:?}", r.method)),
            oracle: oracle.kind.to_string(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            code_version: CODE_VERSION.to_string(),
            populations: Vec::new(),
        },
    };
    emit(cli, &table, "solve")?;
    if let (Some(dir), Some(report)) = (&cli.out, &report) {
        let summary = serde_json::json!({
            "report": report,
            "errors": errors,
            "oracle_utility": oracle.utility,
        });
        std::fs::write(dir.join("solve_report.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(())
}
