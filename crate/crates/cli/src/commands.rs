//! Subcommand bodies. Each returns the files it wrote, relative to the output
//! directory, plus the seeds worth recording in the manifest.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use shapprune::estimator::{estimate, EstimateReport};
use shapprune::experiments::{
    compare_strategies, grid_search, run_repetitions, summarize_grid, summarize_walks, GridSpec,
    RepetitionSpec, RunStats,
};
use shapprune::game::{make_perturbed_uniform, make_un_security_council, three_player_example, TABLE_LIMIT};
use shapprune::nn::{as_game, EvalResult};
use shapprune::pruning::{train_root, DerivationConfig, PayoffSplit};
use shapprune::report::{write_csv, write_json};
use shapprune::rng::derive_seed;
use shapprune::{shapley_exact_subsets, CoalitionalGame, MlpModel, PayoffTable, ShapleyVector};

use crate::config::{require_file, RunConfig};
use crate::failure::ConfigError;

pub struct Outcome {
    pub outputs: Vec<String>,
    pub seeds: Vec<(String, u64)>,
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<String>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Self {
        Writer { dir, outputs: Vec::new() }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        write_json(&path, value).with_context(|| format!("writing {}", path.display()))
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.path(name);
        write_csv(&path, rows).with_context(|| format!("writing {}", path.display()))
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn derivation(config: &RunConfig) -> DerivationConfig {
    DerivationConfig {
        theta: config.theta,
        root_epochs: config.train.epochs,
        retrain_epochs: config.retrain_epochs,
        train: config.train,
        sampling: config.sampling,
        payoff_split: config.payoff_split,
        max_steps: config.max_steps,
        log_removed_sv: config.log_removed_sv,
        seed: config.seed,
    }
}

#[derive(Serialize)]
struct TrainMetrics {
    hidden: usize,
    epochs: usize,
    train: EvalResult,
    validation: EvalResult,
    test: EvalResult,
}

pub fn train(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let splits = config.load_splits()?;
    let model = train_root(&splits, config.hidden, &derivation(config), config.seed)?;
    let metrics = TrainMetrics {
        hidden: config.hidden,
        epochs: config.train.epochs,
        train: model.evaluate(&splits.train, None)?,
        validation: model.evaluate(&splits.validation, None)?,
        test: model.evaluate(&splits.test, None)?,
    };
    println!(
        "trained {} hidden neurons for {} epochs: train {:.4}  validation {:.4}  test {:.4}",
        metrics.hidden,
        metrics.epochs,
        metrics.train.accuracy,
        metrics.validation.accuracy,
        metrics.test.accuracy
    );
    let mut w = Writer::new(dir);
    let path = w.path("model.json");
    model.save(&path).with_context(|| format!("writing {}", path.display()))?;
    w.json("train_metrics.json", &metrics)?;
    Ok(Outcome {
        outputs: w.outputs,
        seeds: vec![
            ("seed".into(), config.seed),
            ("init".into(), derive_seed(config.seed, &[0])),
            ("shuffle".into(), derive_seed(config.seed, &[1])),
        ],
    })
}

#[derive(Serialize)]
struct ShapleyOutput {
    players: usize,
    payoff_split: PayoffSplit,
    empty_accuracy: f64,
    grand_payoff: f64,
    report: EstimateReport,
    exact: Option<ShapleyVector>,
}

pub fn shapley(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let model_path = config
        .model
        .as_ref()
        .ok_or_else(|| ConfigError::new("shapley needs a model (--model or \"model\" in the config)"))?;
    require_file(model_path)?;
    let model = MlpModel::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let splits = config.load_splits()?;
    let data = match config.payoff_split {
        PayoffSplit::Validation => &splits.validation,
        PayoffSplit::Test => &splits.test,
    };
    let game = as_game(&model, data)?;
    let report = estimate(&game, &config.sampling)?;
    let exact = if config.exact {
        if game.players() > TABLE_LIMIT {
            return Err(ConfigError::new(format!(
                "exact values need at most {TABLE_LIMIT} hidden neurons, the model has {}",
                game.players()
            ))
            .into());
        }
        Some(shapley_exact_subsets(&game)?)
    } else {
        None
    };
    let out = ShapleyOutput {
        players: game.players(),
        payoff_split: config.payoff_split,
        empty_accuracy: game.empty_accuracy(),
        grand_payoff: game.payoff(game.grand()),
        report,
        exact,
    };
    println!(
        "{} players, v(U) = {:.4}, {} samples, {} payoff evaluations",
        out.players, out.grand_payoff, out.report.samples_used, out.report.payoff_evaluations
    );
    for (i, v) in out.report.estimates.iter().enumerate() {
        match &out.exact {
            Some(e) => println!("  {i:>3}  {v:>10.6}  exact {:>10.6}", e[i]),
            None => println!("  {i:>3}  {v:>10.6}"),
        }
    }
    let mut w = Writer::new(dir);
    w.json("shapley_report.json", &out)?;
    Ok(Outcome {
        outputs: w.outputs,
        seeds: vec![("sampling".into(), config.sampling.seed)],
    })
}

/// File-name friendly strategy label, e.g. `sv_bucket-0.2`.
pub fn strategy_slug(name: &str) -> String {
    name.replace(':', "-")
}

pub fn prune(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let strategies = config.strategies()?;
    let splits = config.load_splits()?;
    let spec = RepetitionSpec {
        hidden: config.hidden,
        repetitions: config.repetitions,
        seed: config.seed,
        derivation: derivation(config),
    };
    let sets = run_repetitions(&splits, &strategies, &spec)?;

    let mut w = Writer::new(dir);
    for set in &sets {
        let slug = strategy_slug(&set.strategy.to_string());
        for (rep, walk) in set.walks.iter().enumerate() {
            let path = w.path(&format!("walk_{slug}_r{rep:03}.csv"));
            let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            walk.write_csv(BufWriter::new(file))?;
        }
    }
    let stats: Vec<RunStats> = sets
        .iter()
        .map(|s| summarize_walks(&s.walks, config.theta))
        .collect::<shapprune::Result<_>>()?;
    w.json("walks.json", &sets)?;
    w.json("stats.json", &stats)?;
    w.csv("stats.csv", &stats.iter().map(RunStats::row).collect::<Vec<_>>())?;
    w.text("comparison.csv", &compare_strategies(&sets).to_csv_string()?)?;

    println!("{:<18} {:>9} {:>10} {:>9}", "strategy", "avg steps", "avg epochs", "avg found");
    for s in &stats {
        let found = s.found.map_or("-".to_string(), |f| format!("{:.2}", f.avg));
        println!("{:<18} {:>9.2} {:>10.2} {:>9}", s.strategy.to_string(), s.steps.avg, s.epochs.avg, found);
    }

    let mut seeds = vec![("seed".into(), config.seed), ("sampling".into(), config.sampling.seed)];
    for r in 0..config.repetitions {
        let rep_seed = derive_seed(config.seed, &[r as u64]);
        seeds.push((format!("rep{r}"), rep_seed));
        seeds.push((format!("rep{r}_walk"), derive_seed(rep_seed, &[2])));
    }
    Ok(Outcome { outputs: w.outputs, seeds })
}

pub fn grid(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let splits = config.load_splits()?;
    let spec = GridSpec {
        player_counts: config.grid.players.clone(),
        epoch_counts: config.grid.epochs.clone(),
        repetitions: config.grid.repetitions,
        seed: config.seed,
        train: config.train,
    };
    let cells = grid_search(&spec, &splits.train, &splits.test)?;
    let summary = summarize_grid(&cells);
    println!("{:>7} {:>6} {:>8} {:>8} {:>8}", "players", "epochs", "min", "mean", "max");
    for row in &summary {
        println!(
            "{:>7} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            row.players, row.epochs, row.min, row.mean, row.max
        );
    }
    let mut w = Writer::new(dir);
    w.csv("grid.csv", &cells)?;
    w.json("grid.json", &cells)?;
    w.csv("grid_summary.csv", &summary)?;
    w.json("grid_summary.json", &summary)?;
    Ok(Outcome {
        outputs: w.outputs,
        seeds: vec![("seed".into(), config.seed)],
    })
}

#[derive(Serialize)]
struct GamesOutput {
    game: String,
    players: usize,
    grand_payoff: f64,
    exact: Option<ShapleyVector>,
    estimate: EstimateReport,
    mean_abs_error: Option<f64>,
    max_abs_error: Option<f64>,
    /// Mean absolute error as a fraction of `v(U)`.
    relative_error: Option<f64>,
}

fn games_report<G: CoalitionalGame>(label: String, game: &G, config: &RunConfig) -> Result<GamesOutput> {
    let n = game.players();
    let exact = if n <= TABLE_LIMIT {
        Some(shapley_exact_subsets(game)?)
    } else {
        None
    };
    let estimate = estimate(game, &config.sampling)?;
    let grand_payoff = game.payoff(game.grand());
    let errors: Option<Vec<f64>> = exact
        .as_ref()
        .map(|e| e.iter().zip(estimate.estimates.iter()).map(|(a, b)| (a - b).abs()).collect());
    let mean_abs_error = errors.as_ref().map(|e| e.iter().sum::<f64>() / n as f64);
    Ok(GamesOutput {
        game: label,
        players: n,
        grand_payoff,
        max_abs_error: errors.as_ref().map(|e| e.iter().copied().fold(0.0, f64::max)),
        relative_error: mean_abs_error.map(|m| m / grand_payoff.abs()),
        mean_abs_error,
        exact,
        estimate,
    })
}

pub fn games(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let g = &config.game;
    let out = match (&g.name, &g.table) {
        (Some(_), Some(_)) => return Err(ConfigError::new("give either a game name or a table, not both").into()),
        (None, None) => return Err(ConfigError::new("games needs --name or --table").into()),
        (None, Some(path)) => {
            require_file(path)?;
            let table = PayoffTable::load(path).with_context(|| format!("loading {}", path.display()))?;
            games_report(path.display().to_string(), &table, config)?
        }
        (Some(name), None) => match name.as_str() {
            "example3" => games_report(name.clone(), &three_player_example(), config)?,
            "unsc" => games_report(name.clone(), &make_un_security_council(), config)?,
            "perturbed" => {
                let table = make_perturbed_uniform(g.players, g.epsilon, g.seed)?;
                games_report(format!("perturbed(n={}, eps={}, seed={})", g.players, g.epsilon, g.seed), &table, config)?
            }
            other => {
                return Err(ConfigError::new(format!(
                    "unknown game {other:?}; expected example3, unsc or perturbed"
                ))
                .into())
            }
        },
    };

    println!("{}: {} players, v(U) = {}", out.game, out.players, out.grand_payoff);
    println!("{:>6} {:>12} {:>12}", "player", "exact", "sampled");
    for (i, s) in out.estimate.estimates.iter().enumerate() {
        let e = out.exact.as_ref().map_or("-".to_string(), |e| format!("{:.6}", e[i]));
        println!("{i:>6} {e:>12} {s:>12.6}");
    }
    if let (Some(mae), Some(rel)) = (out.mean_abs_error, out.relative_error) {
        println!("mean absolute error {mae:.6} ({:.2}% of v(U))", 100.0 * rel);
    }

    let mut w = Writer::new(dir);
    w.json("games.json", &out)?;
    Ok(Outcome {
        outputs: w.outputs,
        seeds: vec![("sampling".into(), config.sampling.seed), ("game".into(), g.seed)],
    })
}
