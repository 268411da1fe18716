use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcmr_mps::ansatz::{OptimizeMode, OptimizerConfig};
use mcmr_mps::noise::NoiseModel;
use mcmr_mps::sweep::{self, OutputFormat, ParamStore, SweepConfig};

const WORKERS_ENV: &str = "MCMR_MPS_WORKERS";

#[derive(Parser)]
#[command(name = "mcmr-mps", version, about = "Uniform MPS on mid-circuit measure-and-reset circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise the embedding unitary on a λ grid and write the parameter records.
    Optimize(OptimizeArgs),
    /// Exact energy density, high-χ entropy and χ-level classical MPS curves.
    Oracle(OracleArgs),
    /// Energy per site from sampled (or exact) X, Z, Z measurements.
    EnergySweep(SweepArgs),
    /// Bond-register entropy from tomography after burn-in.
    EntropySweep(SweepArgs),
    /// Cross-module invariant suite; exits 1 when any check fails.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, requires_all = ["lambda_max", "steps"], conflicts_with = "lambda_list")]
    lambda_min: Option<f64>,
    #[arg(long, requires = "lambda_min")]
    lambda_max: Option<f64>,
    #[arg(long, requires = "lambda_min")]
    steps: Option<usize>,
    /// Comma-separated λ values.
    #[arg(long, visible_alias = "lambda", value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
}

impl GridArgs {
    fn grid(&self, default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
        match (&self.lambda_list, self.lambda_min, self.lambda_max, self.steps) {
            (Some(list), ..) => list.clone(),
            (None, Some(min), Some(max), Some(steps)) => sweep::lambda_grid(min, max, steps),
            _ => default(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ansatz,
    FullUnitary,
}

impl From<Mode> for OptimizeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ansatz => OptimizeMode::Ansatz,
            Mode::FullUnitary => OptimizeMode::FullUnitary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Bond qubits; repeat for several.
    #[arg(long, default_values_t = [1usize])]
    nb: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Ansatz)]
    mode: Mode,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Records already in this file are kept and skipped.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    nb: usize,
    #[arg(long, value_enum, default_value_t = Mode::Ansatz)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "MCMR_MPS_PARAM_CACHE")]
    param_cache: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    nb: usize,
    #[arg(long, value_enum, default_value_t = Mode::Ansatz)]
    mode: Mode,
    /// Shots per circuit (per tomography setting).
    #[arg(long, default_value_t = 5000)]
    shots: usize,
    /// JSON noise model, or `default` for the built-in error budget.
    #[arg(long)]
    noise_profile: Option<String>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    pleak: Option<f64>,
    #[arg(long)]
    eps_meas: Option<f64>,
    #[arg(long)]
    eps_reset: Option<f64>,
    #[arg(long)]
    zne: bool,
    #[arg(long)]
    postselect: bool,
    #[arg(long)]
    restricted_tomo: bool,
    /// Exact density-matrix expectations instead of sampling.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    burn_in_tol: f64,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimised parameters are read from and added to this file.
    #[arg(long, env = "MCMR_MPS_PARAM_CACHE")]
    param_cache: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Negative control: break the Kraus convention on the classical side.
    #[arg(long)]
    inject_fault: bool,
}

enum Failure {
    Config(String),
    Validation,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.to_string())
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn noise_model(args: &SweepArgs) -> Result<Option<NoiseModel>, Failure> {
    let mut model = match args.noise_profile.as_deref() {
        Some("default") => Some(NoiseModel::default()),
        Some(path) => Some(NoiseModel::from_json_file(Path::new(path))?),
        None => None,
    };
    let overrides = [args.p2, args.p1, args.pleak, args.eps_meas, args.eps_reset];
    if overrides.iter().any(Option::is_some) {
        let m = model.get_or_insert_with(NoiseModel::noiseless);
        m.p2 = args.p2.unwrap_or(m.p2);
        m.p1 = args.p1.unwrap_or(m.p1);
        m.p_leak = args.pleak.unwrap_or(m.p_leak);
        m.eps_meas = args.eps_meas.unwrap_or(m.eps_meas);
        m.eps_reset = args.eps_reset.unwrap_or(m.eps_reset);
    }
    Ok(model)
}

fn store_with_cache(cache: Option<&Path>) -> Result<ParamStore, Failure> {
    let mut store = ParamStore::bundled();
    if let Some(path) = cache {
        store.load(path)?;
    }
    Ok(store)
}

fn run_sweep(args: &SweepArgs, entropy: bool) -> Result<(), Failure> {
    let default_grid = || match (entropy, args.nb) {
        (false, _) => sweep::energy_grid(),
        (true, 1) => sweep::entropy_grid_chi2(),
        (true, _) => sweep::entropy_grid_chi4(),
    };
    let config = SweepConfig {
        lambda_grid: args.grid.grid(default_grid),
        n_b: args.nb,
        mode: args.mode.into(),
        shots: args.shots,
        noise: noise_model(args)?,
        zne: args.zne,
        postselect: args.postselect,
        restricted_tomography: args.restricted_tomo,
        exact: args.exact,
        seed: args.seed,
        burn_in_tol: args.burn_in_tol,
        bootstrap_b: args.bootstrap,
        format: args.format.into(),
    };
    config.validate()?;
    let mut store = store_with_cache(args.param_cache.as_deref())?;
    let rows = if entropy {
        sweep::run_entropy_sweep(&config, &mut store)?
    } else {
        sweep::run_energy_sweep(&config, &mut store)?
    };
    if let Some(path) = &args.param_cache {
        store.save(path)?;
    }
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("λ = {}: {}", row.lambda, row.error.as_deref().unwrap_or_default());
    }
    emit(&sweep::render(&rows, config.format), args.out.as_deref())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Optimize(args) => {
            let grid = args.grid.grid(sweep::energy_grid);
            if let Some(&nb) = args.nb.iter().find(|&&n| !(1..=2).contains(&n)) {
                return Err(Failure::Config(format!("n_b = {nb} (supported: 1, 2)")));
            }
            let optimizer = OptimizerConfig { restarts: args.restarts.max(1), ..OptimizerConfig::default() };
            let mut store = ParamStore::empty().with_optimizer(optimizer);
            store.load(&args.out)?;
            let mode: OptimizeMode = args.mode.into();
            let points: Vec<_> = args.nb.iter().flat_map(|&nb| grid.iter().map(move |&l| (l, nb, mode))).collect();
            // one point at a time so an interrupted run keeps its progress
            for point in &points {
                match store.ensure(std::slice::from_ref(point)).remove(0) {
                    Ok(opt) => eprintln!("λ = {}, n_b = {}: e = {:.10} ({:?})", point.0, point.1, opt.energy, opt.status),
                    Err(e) => eprintln!("λ = {}, n_b = {}: {e}", point.0, point.1),
                }
                store.save(&args.out)?;
            }
            Ok(())
        }
        Command::Oracle(args) => {
            let grid = args.grid.grid(sweep::energy_grid);
            if !(1..=2).contains(&args.nb) {
                return Err(Failure::Config(format!("n_b = {} (supported: 1, 2)", args.nb)));
            }
            let mut store = store_with_cache(args.param_cache.as_deref())?;
            let rows = sweep::run_oracle(&grid, args.nb, args.mode.into(), &mut store);
            if let Some(path) = &args.param_cache {
                store.save(path)?;
            }
            let text = match args.format {
                Format::Csv => sweep::oracle_to_csv(&rows),
                Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
            };
            emit(&text, args.out.as_deref())
        }
        Command::EnergySweep(args) => run_sweep(&args, false),
        Command::EntropySweep(args) => run_sweep(&args, true),
        Command::Validate(args) => {
            let fault = args.inject_fault.then_some(sweep::Fault::KrausConvention);
            let report = sweep::run_validation_with(args.seed, fault);
            for c in &report.checks {
                eprintln!("{} {} (worst {:.3e}, tol {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.worst, c.tolerance);
            }
            emit(&report.to_json(), args.out.as_deref())?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn configure_workers() -> Result<(), Failure> {
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let n: usize = value.parse().map_err(|_| Failure::Config(format!("{WORKERS_ENV}={value} is not a count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_workers().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
