//! Run configuration, dataset loading and run manifests.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use shapprune::data::{self, Splits};
use shapprune::pruning::PayoffSplit;
use shapprune::{SamplingPlan, Strategy, TrainConfig};

use crate::failure::{ConfigError, MissingFile};

/// Where the rows come from. Exactly one source per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synth {
        classes: usize,
        dims: usize,
        per_class: usize,
        spread: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
    /// IDX image/label pairs. With a test pair, the training pair is split
    /// into train and validation only.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default)]
        test_images: Option<PathBuf>,
        #[serde(default)]
        test_labels: Option<PathBuf>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synth {
            classes: 3,
            dims: 8,
            per_class: 100,
            spread: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
    /// Keep only the first rows of the test split.
    pub test_limit: Option<usize>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            fractions: [0.6, 0.2, 0.2],
            seed: 0,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    pub players: Vec<usize>,
    pub epochs: Vec<usize>,
    pub repetitions: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            players: (1..=8).collect(),
            epochs: vec![10, 20],
            repetitions: 3,
        }
    }
}

/// Benchmark game for `games`: a named game or a payoff table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSettings {
    pub name: Option<String>,
    pub table: Option<PathBuf>,
    /// Players and noise width of the perturbed-uniform game.
    pub players: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for GameSettings {
    fn default() -> Self {
        GameSettings {
            name: None,
            table: None,
            players: 10,
            epsilon: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    pub hidden: usize,
    /// Root training; `train.epochs` is the root epoch budget.
    pub train: TrainConfig,
    pub sampling: SamplingPlan,
    /// `name:param` strategy specs.
    pub strategies: Vec<String>,
    pub theta: f64,
    pub retrain_epochs: usize,
    pub max_steps: Option<usize>,
    pub payoff_split: PayoffSplit,
    pub log_removed_sv: bool,
    pub repetitions: usize,
    pub grid: GridSettings,
    pub game: GameSettings,
    /// Saved model used by `shapley`.
    pub model: Option<PathBuf>,
    /// Whether `shapley` also computes exact values.
    pub exact: bool,
    pub output: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSource::default(),
            split: SplitSpec::default(),
            hidden: 16,
            train: TrainConfig::default(),
            sampling: SamplingPlan::default(),
            strategies: vec!["sv_bucket:0.2".into()],
            theta: 0.9,
            retrain_epochs: 2,
            max_steps: None,
            payoff_split: PayoffSplit::Validation,
            log_removed_sv: true,
            repetitions: 1,
            grid: GridSettings::default(),
            game: GameSettings::default(),
            model: None,
            exact: false,
            output: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        if self.strategies.is_empty() {
            return Err(ConfigError::new("at least one strategy is required").into());
        }
        self.strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(|e| ConfigError::new(e.to_string()).into()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ConfigError::new(m).into());
        if self.hidden == 0 {
            return fail("hidden must be at least 1".into());
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1".into());
        }
        if let Err(e) = self.train.validate().and(self.sampling.validate()) {
            return fail(e.to_string());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return fail(format!("theta must be in (0, 1), got {}", self.theta));
        }
        Ok(())
    }

    /// Splits the configured dataset into train, validation and test.
    pub fn load_splits(&self) -> Result<Splits> {
        let [f0, f1, _] = self.split.fractions;
        let mut splits = match &self.dataset {
            DatasetSource::Synth { classes, dims, per_class, spread, seed } => {
                let ds = data::synth_blobs(*classes, *dims, *per_class, *spread, *seed)?;
                data::split(&ds, self.split.fractions, self.split.seed)?
            }
            DatasetSource::Csv { path, header } => {
                require_file(path)?;
                let ds = data::load_csv(path, *header)?;
                data::split(&ds, self.split.fractions, self.split.seed)?
            }
            DatasetSource::Idx { train_images, train_labels, test_images, test_labels } => {
                require_file(train_images)?;
                require_file(train_labels)?;
                let ds = data::load_idx(train_images, train_labels)?;
                match (test_images, test_labels) {
                    (Some(ti), Some(tl)) => {
                        require_file(ti)?;
                        require_file(tl)?;
                        let test = data::load_idx(ti, tl)?;
                        let (train, validation) = data::holdout(&ds, f0 / (f0 + f1), self.split.seed)?;
                        let classes = train.classes().max(validation.classes()).max(test.classes());
                        Splits {
                            train: train.with_classes(classes)?,
                            validation: validation.with_classes(classes)?,
                            test: test.with_classes(classes)?,
                        }
                    }
                    (None, None) => data::split(&ds, self.split.fractions, self.split.seed)?,
                    _ => {
                        return Err(ConfigError::new("test_images and test_labels go together").into());
                    }
                }
            }
        };
        if let Some(limit) = self.split.test_limit {
            splits.test = splits.test.head(limit);
        }
        Ok(splits)
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(MissingFile(path.to_path_buf()).into())
    }
}

/// Record of one run: enough to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub seeds: Vec<(String, u64)>,
    pub outputs: Vec<String>,
}

/// Reads either a plain [`RunConfig`] or a [`Manifest`], whose config is
/// used as is.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new(format!("{}: {e}", path.display())))?;
    let parsed = if value.get("tool").is_some() && value.get("config").is_some() {
        serde_json::from_value::<Manifest>(value).map(|m| m.config)
    } else {
        serde_json::from_value::<RunConfig>(value)
    };
    parsed.map_err(|e| ConfigError::new(format!("{}: {e}", path.display())).into())
}
