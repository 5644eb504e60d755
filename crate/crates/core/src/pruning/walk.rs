use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::select::{
    select_random_k, select_sv_bottom_k, select_sv_bottom_p, select_sv_bucket, select_w_bottom_k,
};
use super::Strategy;
use crate::coalition::Coalition;
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::estimator::{estimate, SamplingPlan};
use crate::nn::{as_game, train, MlpModel, TrainConfig};
use crate::rng::derive_seed;

/// Which split supplies the payoff accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffSplit {
    #[default]
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationConfig {
    /// Accuracy threshold for `found`.
    pub theta: f64,
    /// Epochs already spent on the root model.
    pub root_epochs: usize,
    /// Fine-tuning epochs after every pruning step.
    pub retrain_epochs: usize,
    /// Learning rate and batch size for retraining (epochs and seed are
    /// taken from this config instead).
    pub train: TrainConfig,
    pub sampling: SamplingPlan,
    #[serde(default)]
    pub payoff_split: PayoffSplit,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Estimate Shapley values for non-Shapley strategies too, so every walk
    /// records the value it removed.
    #[serde(default = "yes")]
    pub log_removed_sv: bool,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            theta: 0.9,
            root_epochs: 20,
            retrain_epochs: 2,
            train: TrainConfig::default(),
            sampling: SamplingPlan::default(),
            payoff_split: PayoffSplit::Validation,
            max_steps: None,
            log_removed_sv: true,
            seed: 0,
        }
    }
}

impl DerivationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::domain(format!("theta must be in (0, 1), got {}", self.theta)));
        }
        self.train.validate()?;
        self.sampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub players_before: usize,
    pub players_after: usize,
    /// Indices of the removed neurons in the root model.
    pub pruned: Vec<usize>,
    /// Sum of the removed neurons' estimated Shapley values, when estimated.
    pub removed_sv_sum: Option<f64>,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub cumulative_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningWalk {
    pub strategy: Strategy,
    pub seed: u64,
    pub theta: f64,
    pub root_players: usize,
    pub root_val_accuracy: f64,
    pub root_test_accuracy: f64,
    pub root_epochs: usize,
    pub steps: Vec<StepRecord>,
    /// Smallest player count (root included) whose validation accuracy is at
    /// least `theta`.
    pub found: Option<usize>,
}

/// Compact JSON summary of a walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub strategy: String,
    pub seed: u64,
    pub theta: f64,
    pub root_players: usize,
    pub found: Option<usize>,
    pub steps: usize,
    pub total_epochs: usize,
    pub root_val_accuracy: f64,
    pub final_players: usize,
    pub final_val_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct StepRow {
    step: usize,
    players_before: usize,
    players_after: usize,
    pruned_ids: String,
    removed_sv_sum: Option<f64>,
    val_accuracy: f64,
    test_accuracy: f64,
    cumulative_epochs: usize,
}

impl PruningWalk {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn total_epochs(&self) -> usize {
        self.steps.last().map_or(self.root_epochs, |s| s.cumulative_epochs)
    }

    /// `(players, validation accuracy)` for the root and after every step.
    pub fn accuracy_by_players(&self) -> Vec<(usize, f64)> {
        std::iter::once((self.root_players, self.root_val_accuracy))
            .chain(self.steps.iter().map(|s| (s.players_after, s.val_accuracy)))
            .collect()
    }

    fn compute_found(&self) -> Option<usize> {
        self.accuracy_by_players()
            .into_iter()
            .filter(|&(_, acc)| acc >= self.theta)
            .map(|(players, _)| players)
            .min()
    }

    pub fn summary(&self) -> WalkSummary {
        let last = self.accuracy_by_players().last().copied().expect("root entry");
        WalkSummary {
            strategy: self.strategy.to_string(),
            seed: self.seed,
            theta: self.theta,
            root_players: self.root_players,
            found: self.found,
            steps: self.step_count(),
            total_epochs: self.total_epochs(),
            root_val_accuracy: self.root_val_accuracy,
            final_players: last.0,
            final_val_accuracy: last.1,
        }
    }

    /// One row per step: `step, players_before, players_after, pruned_ids`
    /// (`;`-joined), `removed_sv_sum, val_accuracy, test_accuracy,
    /// cumulative_epochs`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.steps.is_empty() {
            w.write_record([
                "step",
                "players_before",
                "players_after",
                "pruned_ids",
                "removed_sv_sum",
                "val_accuracy",
                "test_accuracy",
                "cumulative_epochs",
            ])?;
        }
        for s in &self.steps {
            w.serialize(StepRow {
                step: s.step,
                players_before: s.players_before,
                players_after: s.players_after,
                pruned_ids: s
                    .pruned
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
                removed_sv_sum: s.removed_sv_sum,
                val_accuracy: s.val_accuracy,
                test_accuracy: s.test_accuracy,
                cumulative_epochs: s.cumulative_epochs,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv_steps<R: Read>(reader: R) -> Result<Vec<StepRecord>> {
        let mut r = csv::Reader::from_reader(reader);
        r.deserialize::<StepRow>()
            .map(|row| {
                let row = row?;
                let pruned = if row.pruned_ids.is_empty() {
                    Vec::new()
                } else {
                    row.pruned_ids
                        .split(';')
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::domain(format!("bad pruned id {s:?}")))
                        })
                        .collect::<Result<_>>()?
                };
                Ok(StepRecord {
                    step: row.step,
                    players_before: row.players_before,
                    players_after: row.players_after,
                    pruned,
                    removed_sv_sum: row.removed_sv_sum,
                    val_accuracy: row.val_accuracy,
                    test_accuracy: row.test_accuracy,
                    cumulative_epochs: row.cumulative_epochs,
                })
            })
            .collect()
    }
}

/// Initialises a `hidden`-neuron model with `seed` and trains it for
/// `config.root_epochs` on the training split.
pub fn train_root(splits: &Splits, hidden: usize, config: &DerivationConfig, seed: u64) -> Result<MlpModel> {
    let train_set = &splits.train;
    let classes = train_set
        .classes()
        .max(splits.validation.classes())
        .max(splits.test.classes());
    let model = MlpModel::init(train_set.dim(), hidden, classes, derive_seed(seed, &[0]))?;
    let cfg = TrainConfig {
        epochs: config.root_epochs,
        seed: derive_seed(seed, &[1]),
        ..config.train
    };
    train(&model, train_set, &cfg)
}

fn clamp_k(k: usize, n: usize) -> usize {
    k.min(n - 1)
}

/// Repeatedly estimates contributions on the current model, prunes the
/// selected neurons, fine-tunes for `retrain_epochs` and records the result,
/// until one neuron is left or `max_steps` is reached.
///
/// Fixed-size strategies prune `min(k, n - 1)` neurons so the walk always
/// ends on the one-neuron floor.
pub fn run_derivation(
    root: &MlpModel,
    splits: &Splits,
    strategy: Strategy,
    config: &DerivationConfig,
) -> Result<PruningWalk> {
    config.validate()?;
    strategy.validate()?;
    let payoff_data: &Dataset = match config.payoff_split {
        PayoffSplit::Validation => &splits.validation,
        PayoffSplit::Test => &splits.test,
    };

    let mut model = root.clone();
    let mut ids: Vec<usize> = (0..root.hidden_dim()).collect();
    let mut cumulative = config.root_epochs;
    let mut steps = Vec::new();
    let max_steps = config.max_steps.unwrap_or(usize::MAX);

    while ids.len() > 1 && steps.len() < max_steps {
        let step = steps.len() + 1;
        let n = ids.len();
        let sv = if strategy.uses_shapley() || config.log_removed_sv {
            let game = as_game(&model, payoff_data)?;
            let plan = config
                .sampling
                .with_seed(derive_seed(config.sampling.seed, &[config.seed, step as u64]));
            Some(estimate(&game, &plan)?.estimates)
        } else {
            None
        };
        let sv_ref = || sv.as_deref().expect("estimated for shapley strategies");
        let selected = match strategy {
            Strategy::SvBottomK { k } => select_sv_bottom_k(sv_ref(), clamp_k(k, n))?,
            Strategy::SvBottomP { p } => select_sv_bottom_p(sv_ref(), p)?,
            Strategy::SvBucket { p } => select_sv_bucket(sv_ref(), p)?,
            Strategy::RandomK { k } => {
                select_random_k(n, clamp_k(k, n), derive_seed(config.seed, &[step as u64, 2]))?
            }
            Strategy::WBottomK { k } => select_w_bottom_k(&model.weight_norms(), clamp_k(k, n))?,
        };
        let removed_sv_sum = sv.as_ref().map(|v| selected.iter().map(|&i| v[i]).sum());

        let remove = Coalition::from_members(n, selected.iter().copied())?;
        let pruned_model = model.prune_neurons(&remove)?;
        let retrain = TrainConfig {
            epochs: config.retrain_epochs,
            seed: derive_seed(config.seed, &[step as u64, 1]),
            ..config.train
        };
        model = train(&pruned_model, &splits.train, &retrain)?;
        cumulative += config.retrain_epochs;

        let pruned: Vec<usize> = selected.iter().map(|&i| ids[i]).collect();
        ids = remove.complement().members().map(|i| ids[i]).collect();
        steps.push(StepRecord {
            step,
            players_before: n,
            players_after: ids.len(),
            pruned,
            removed_sv_sum,
            val_accuracy: model.evaluate(&splits.validation, None)?.accuracy,
            test_accuracy: model.evaluate(&splits.test, None)?.accuracy,
            cumulative_epochs: cumulative,
        });
    }

    let mut walk = PruningWalk {
        strategy,
        seed: config.seed,
        theta: config.theta,
        root_players: root.hidden_dim(),
        root_val_accuracy: root.evaluate(&splits.validation, None)?.accuracy,
        root_test_accuracy: root.evaluate(&splits.test, None)?.accuracy,
        root_epochs: config.root_epochs,
        steps,
        found: None,
    };
    walk.found = walk.compute_found();
    Ok(walk)
}
