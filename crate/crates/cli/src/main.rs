//! `shapprune` command-line driver.

mod commands;
mod config;
mod failure;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use shapprune::pruning::PayoffSplit;
use shapprune::report::write_json;
use shapprune::SamplingMethod;

use config::{read_config, DatasetSource, Manifest, RunConfig};
use failure::ConfigError;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "SHAPPRUNE_OUT";
const DEFAULT_OUT: &str = "shapprune-out";

#[derive(Parser, Debug)]
#[command(name = "shapprune", version, about = "Shapley-value neuron attribution and pruning")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a root model and save it as JSON.
    Train(TrainArgs),
    /// Estimate Shapley values of a saved model's hidden neurons.
    Shapley(ShapleyArgs),
    /// Run repeated pruning walks for one or more strategies.
    Prune(PruneArgs),
    /// Train fresh models over a grid of sizes and epoch budgets.
    Grid(GridArgs),
    /// Exact and sampled Shapley values on a benchmark game.
    Games(GamesArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Run configuration or a manifest from a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's, then $SHAPPRUNE_OUT, then ./shapprune-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Use a CSV dataset (label first) instead of the configured one.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// The CSV dataset has a header row.
    #[arg(long, requires = "csv")]
    csv_header: bool,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Hidden neurons of the root model.
    #[arg(long)]
    hidden: Option<usize>,
    /// Root training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SamplingArgs {
    /// `permutation` or `subset`.
    #[arg(long)]
    method: Option<SamplingMethod>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sampling_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct ShapleyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Saved model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset split supplying the payoff: `validation` or `test`.
    #[arg(long, value_parser = parse_split)]
    split: Option<PayoffSplit>,
    /// Also compute exact values (at most 20 hidden neurons).
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct PruneArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Strategy as `name:param`, e.g. `sv_bucket:0.2`; repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Repetitions (each with its own root model).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    retrain_epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated hidden sizes.
    #[arg(long, value_delimiter = ',')]
    players: Option<Vec<usize>>,
    /// Comma-separated epoch budgets.
    #[arg(long, value_delimiter = ',')]
    epochs: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args, Debug)]
struct GamesArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// `example3`, `unsc` or `perturbed`.
    #[arg(long, conflicts_with = "table")]
    name: Option<String>,
    /// Payoff table JSON.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Players of the perturbed-uniform game.
    #[arg(long)]
    players: Option<usize>,
    /// Noise width of the perturbed-uniform game.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seed of the perturbed-uniform game.
    #[arg(long)]
    game_seed: Option<u64>,
}

fn parse_split(s: &str) -> std::result::Result<PayoffSplit, String> {
    match s {
        "validation" | "val" => Ok(PayoffSplit::Validation),
        "test" => Ok(PayoffSplit::Test),
        other => Err(format!("unknown split {other:?}; expected validation or test")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        set(&mut config.seed, self.seed);
        if let Some(path) = &self.csv {
            config.dataset = DatasetSource::Csv {
                path: path.clone(),
                header: self.csv_header,
            };
        }
        Ok(config)
    }

    /// Output directory: flag, then config, then environment, then default.
    fn out_dir(&self, config: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| config.output.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

impl ModelArgs {
    fn apply(&self, config: &mut RunConfig) {
        set(&mut config.hidden, self.hidden);
        set(&mut config.train.epochs, self.epochs);
        set(&mut config.train.learning_rate, self.learning_rate);
        set(&mut config.train.batch_size, self.batch_size);
    }
}

impl SamplingArgs {
    fn apply(&self, config: &mut RunConfig) {
        set(&mut config.sampling.method, self.method);
        set(&mut config.sampling.samples, self.samples);
        set(&mut config.sampling.seed, self.sampling_seed);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(ConfigError::new("--jobs must be at least 1").into());
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let (name, common, mut config) = match &cli.command {
        Command::Train(a) => {
            let mut c = a.common.load()?;
            a.model.apply(&mut c);
            ("train", &a.common, c)
        }
        Command::Shapley(a) => {
            let mut c = a.common.load()?;
            a.sampling.apply(&mut c);
            set(&mut c.model, a.model.clone().map(Some));
            set(&mut c.payoff_split, a.split);
            c.exact |= a.exact;
            ("shapley", &a.common, c)
        }
        Command::Prune(a) => {
            let mut c = a.common.load()?;
            a.model.apply(&mut c);
            a.sampling.apply(&mut c);
            if !a.strategies.is_empty() {
                c.strategies = a.strategies.clone();
            }
            set(&mut c.repetitions, a.reps);
            set(&mut c.theta, a.theta);
            set(&mut c.retrain_epochs, a.retrain_epochs);
            set(&mut c.max_steps, a.max_steps.map(Some));
            ("prune", &a.common, c)
        }
        Command::Grid(a) => {
            let mut c = a.common.load()?;
            set(&mut c.grid.players, a.players.clone());
            set(&mut c.grid.epochs, a.epochs.clone());
            set(&mut c.grid.repetitions, a.reps);
            set(&mut c.train.learning_rate, a.learning_rate);
            set(&mut c.train.batch_size, a.batch_size);
            ("grid", &a.common, c)
        }
        Command::Games(a) => {
            let mut c = a.common.load()?;
            a.sampling.apply(&mut c);
            if a.name.is_some() || a.table.is_some() {
                c.game.name = a.name.clone();
                c.game.table = a.table.clone();
            }
            set(&mut c.game.players, a.players);
            set(&mut c.game.epsilon, a.epsilon);
            set(&mut c.game.seed, a.game_seed);
            ("games", &a.common, c)
        }
    };
    config.validate()?;

    let dir = common.out_dir(&config);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let outcome = match &cli.command {
        Command::Train(_) => commands::train(&config, &dir)?,
        Command::Shapley(_) => commands::shapley(&config, &dir)?,
        Command::Prune(_) => commands::prune(&config, &dir)?,
        Command::Grid(_) => commands::grid(&config, &dir)?,
        Command::Games(_) => commands::games(&config, &dir)?,
    };

    // The output directory is not part of the recorded config, so a rerun
    // into another directory reproduces the manifest byte for byte.
    config.output = None;
    let manifest = Manifest {
        tool: "shapprune".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        config,
        seeds: outcome.seeds,
        outputs: outcome.outputs,
    };
    write_manifest(&dir, name, &manifest)
}

fn write_manifest(dir: &Path, name: &str, manifest: &Manifest) -> Result<()> {
    let path = dir.join(format!("{name}_manifest.json"));
    write_json(&path, manifest).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, category) = failure::classify(&err);
            eprintln!("shapprune: {category}: {err:#}");
            ExitCode::from(code as u8)
        }
    }
}
