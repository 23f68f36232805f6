mod config;
mod data;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mvalse::bench::{generate_trial, run_monte_carlo_detailed, EstimatorPrior, Preset, ScenarioConfig};
use mvalse::engine::Options;
use mvalse::parallel::{run_parallel, SnapshotKernel};
use mvalse::sequential::{partition, run_sequential_traced_with, SequentialOptions};
use mvalse::{run, Estimate, Executor, MeasurementSet, PriorConfig, PriorMatching, VonMises};

use config::ConfigFile;
use data::Format;

const FORMATS: &str = "\
DATA FILES
  CSV: M lines of 2L comma-separated numbers, re and im of each snapshot in
  turn (re_1, im_1, re_2, im_2, ...). Lines starting with '#' are comments.
  An optional first line '# mvalse-csv v1 M=<M> L=<L>' is checked.
  Binary: 'MVLS', u32 version = 1, u64 M, u64 L, then M*L (re, im) pairs of
  f64, row by row. All integers and floats little-endian.
  Files starting with 'MVLS' are read as binary; '.bin' outputs are written
  as binary, anything else as CSV.

All angles are radians unless --doa is given.";

#[derive(Parser)]
#[command(name = "mvalse", version, about = "Variational line spectral estimation from multiple snapshots", after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate frequencies and weights from a data file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo sweep and write aggregate tables.
    Bench(BenchArgs),
    /// Draw one synthetic data file and its ground truth.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorKind {
    None,
    Grid,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum Matching {
    Nearest,
    InOrder,
}

#[derive(Args)]
struct EngineArgs {
    /// Iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative change of the reconstructed signal that ends the run.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Never switch an active component off.
    #[arg(long)]
    no_deactivate: bool,
    /// Split the snapshots into G consecutive groups processed in turn.
    #[arg(long)]
    groups: Option<usize>,
    /// Start each group from the previous group's noise and weight parameters.
    #[arg(long)]
    carry_hyperparams: bool,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

impl EngineArgs {
    fn apply(&self, options: &mut Options) {
        if let Some(n) = self.max_iters {
            options.max_iterations = n;
        }
        if let Some(t) = self.tolerance {
            options.tolerance = t;
        }
        if self.no_deactivate {
            options.allow_deactivation = false;
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Data file (CSV or binary).
    input: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Candidate components N [default: max(1, M - 1)].
    #[arg(long)]
    components: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    prior: PriorKind,
    /// Concentration of the grid prior.
    #[arg(long, default_value_t = 1e4)]
    kappa0: f64,
    /// With --prior file: CSV of `mean_rad,kappa` lines, one per component.
    #[arg(long)]
    prior_file: Option<PathBuf>,
    /// How priors are paired with components at the start.
    #[arg(long, value_enum, default_value = "nearest")]
    matching: Matching,
    /// Also report arrival angles in degrees, asin(theta/pi).
    #[arg(long)]
    doa: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario file (flat TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset, used when no config file sets one.
    #[arg(long)]
    preset: Option<String>,
    /// Output prefix: writes <prefix>.csv, <prefix>.json and with --per-trial <prefix>.trials.csv.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    prior: Option<PriorKind>,
    #[arg(long)]
    kappa0: Option<f64>,
    /// Also write every trial.
    #[arg(long)]
    per_trial: bool,
    /// Record wall-clock time per trial (otherwise zero, keeping outputs reproducible).
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (flat TOML); sweep keys are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data file to write; the ground truth goes to <output>.truth.json.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Trial index selecting the random stream.
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

fn executor(workers: Option<usize>, default: usize) -> Result<Executor> {
    Ok(Executor::new(workers.unwrap_or(default))?)
}

fn read_prior_file(path: &Path) -> Result<Vec<VonMises>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut priors = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            bail!("{} line {line}: expected `mean_rad,kappa`", path.display());
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .with_context(|| format!("{} line {line}: `{}` is not a number", path.display(), &record[i]))
        };
        priors.push(VonMises::new(num(0)?, num(1)?).with_context(|| format!("{} line {line}", path.display()))?);
    }
    if priors.is_empty() {
        bail!("{}: no priors", path.display());
    }
    Ok(priors)
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let y = MeasurementSet::new(data::read(&args.input)?)?;
    let m = y.samples();
    let size = args.components.unwrap_or(m.saturating_sub(1).max(1));
    let priors = match args.prior {
        PriorKind::None => PriorConfig::uninformative(size)?,
        PriorKind::Grid => PriorConfig::grid(size, args.kappa0)?,
        PriorKind::File => {
            let path = args.prior_file.as_ref().context("--prior file needs --prior-file")?;
            let list = read_prior_file(path)?;
            if args.components.is_some_and(|n| n != list.len()) {
                bail!("--components {size} disagrees with {} priors in {}", list.len(), path.display());
            }
            PriorConfig::new(list, 0.5, PriorMatching::Nearest)?
        }
    };
    let priors = priors.with_matching(match args.matching {
        Matching::Nearest => PriorMatching::Nearest,
        Matching::InOrder => PriorMatching::InOrder,
    });
    let mut options = Options::default();
    args.engine.apply(&mut options);
    let groups = args.engine.groups.unwrap_or(1);
    let exec = executor(args.engine.workers, 1)?;
    let est: Estimate = if groups == 1 {
        if exec.is_parallel() {
            run_parallel(&y, &priors, &options, &exec)?
        } else {
            run(&y, &priors, &options)?
        }
    } else {
        let plan = partition(y.snapshots(), groups)?;
        let seq = SequentialOptions {
            engine: options,
            carry_hyperparams: args.engine.carry_hyperparams,
        };
        let trace = if exec.is_parallel() {
            run_sequential_traced_with(&y, &priors, &plan, &seq, &SnapshotKernel::new(&exec))?
        } else {
            run_sequential_traced_with(&y, &priors, &plan, &seq, &mvalse::engine::BatchKernel)?
        };
        trace.into_iter().last().expect("at least one group")
    };
    let rep = report::EstimateReport::new(&est, m, priors.components(), groups, args.doa);
    match &args.output {
        Some(path) => report::write_json(path, &rep),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
            Ok(out.flush()?)
        }
    }
}

fn bench(args: &BenchArgs) -> Result<()> {
    let mut file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if file.preset.is_none() {
        file.preset = args.preset.clone();
    }
    if let Some(p) = &file.preset {
        Preset::parse(p)?;
    }
    let mut cfg = file.scenario()?;
    let sweep = file.sweep()?;
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    match args.prior {
        Some(PriorKind::None) => cfg.prior = EstimatorPrior::Uninformative,
        Some(PriorKind::Grid) => {
            cfg.prior = EstimatorPrior::Grid {
                kappa0: args.kappa0.unwrap_or(1e4),
            }
        }
        Some(PriorKind::File) => bail!("bench scenarios take --prior none or grid"),
        None => {
            if let (Some(k), EstimatorPrior::Grid { .. }) = (args.kappa0, cfg.prior) {
                cfg.prior = EstimatorPrior::Grid { kappa0: k };
            }
        }
    }
    args.engine.apply(&mut cfg.options);
    if let Some(g) = args.engine.groups {
        cfg.groups = g;
    }
    cfg.carry_hyperparams |= args.engine.carry_hyperparams;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let exec = executor(args.engine.workers, default_workers)?;
    let points = run_monte_carlo_detailed(&cfg, &sweep, &exec, args.timing)?;
    let vars = sweep.variables();
    let prefixed = |suffix: &str| {
        let mut s = args.output.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    let csv_path = prefixed(".csv");
    std::fs::write(&csv_path, report::aggregate_csv(&vars, &points, cfg.rng_seed)?)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    report::write_json(&prefixed(".json"), &report::aggregate_json(&cfg, &vars, &points))?;
    if args.per_trial {
        let path = prefixed(".trials.csv");
        std::fs::write(&path, report::trials_csv(&vars, &points)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg: ScenarioConfig = match &args.config {
        Some(path) => ConfigFile::load(path)?.scenario()?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    let (y, truth) = generate_trial(&cfg, &mut cfg.rng_for_trial(args.trial))?;
    data::write(&args.output, y.y(), Format::from_path(&args.output))?;
    let mut sidecar = args.output.clone().into_os_string();
    sidecar.push(".truth.json");
    report::write_json(Path::new(&sidecar), &report::truth_json(&truth, &cfg, args.trial))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
