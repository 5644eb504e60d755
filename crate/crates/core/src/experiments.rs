//! Grid-search baseline, repeated derivation walks and the statistics
//! reported over them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::nn::{train, MlpModel, TrainConfig};
use crate::par;
use crate::pruning::{run_derivation, train_root, DerivationConfig, PruningWalk, Strategy};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub player_counts: Vec<usize>,
    pub epoch_counts: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    /// Learning rate and batch size; epochs and seed come from the cell.
    #[serde(default)]
    pub train: TrainConfig,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::domain("grid needs at least one repetition"));
        }
        if self.player_counts.is_empty() || self.epoch_counts.is_empty() {
            return Err(Error::domain("grid player and epoch lists must be non-empty"));
        }
        if self.player_counts.contains(&0) {
            return Err(Error::domain("grid player counts must be positive"));
        }
        self.train.validate()
    }

    /// Seed of one grid cell, independent of every other cell.
    pub fn cell_seed(&self, players: usize, epochs: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[players as u64, epochs as u64, rep as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub players: usize,
    pub epochs: usize,
    pub rep: usize,
    pub seed: u64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummaryRow {
    pub players: usize,
    pub epochs: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Trains a fresh model per `(players, epochs, rep)` cell and records its
/// test accuracy. Cells are ordered by players, then epochs, then rep.
pub fn grid_search(spec: &GridSpec, train_set: &Dataset, test_set: &Dataset) -> Result<Vec<GridCell>> {
    spec.validate()?;
    let classes = train_set.classes().max(test_set.classes());
    let jobs: Vec<(usize, usize, usize)> = spec
        .player_counts
        .iter()
        .flat_map(|&p| {
            spec.epoch_counts
                .iter()
                .flat_map(move |&e| (0..spec.repetitions).map(move |r| (p, e, r)))
        })
        .collect();
    par::map_slice(&jobs, |&(players, epochs, rep)| {
        let seed = spec.cell_seed(players, epochs, rep);
        let model = MlpModel::init(train_set.dim(), players, classes, derive_seed(seed, &[0]))?;
        let cfg = TrainConfig {
            epochs,
            seed: derive_seed(seed, &[1]),
            ..spec.train
        };
        let model = train(&model, train_set, &cfg)?;
        Ok(GridCell {
            players,
            epochs,
            rep,
            seed,
            test_accuracy: model.evaluate(test_set, None)?.accuracy,
        })
    })
    .into_iter()
    .collect()
}

/// Min / mean / max test accuracy per `(players, epochs)`.
pub fn summarize_grid(cells: &[GridCell]) -> Vec<GridSummaryRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.players, c.epochs)).or_default().push(c.test_accuracy);
    }
    groups
        .into_iter()
        .map(|((players, epochs), accs)| GridSummaryRow {
            players,
            epochs,
            min: accs.iter().copied().fold(f64::INFINITY, f64::min),
            mean: accs.iter().sum::<f64>() / accs.len() as f64,
            max: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

/// Repeated, independent derivation walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSpec {
    pub hidden: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub derivation: DerivationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyWalks {
    pub strategy: Strategy,
    pub walks: Vec<PruningWalk>,
}

/// Runs every strategy once per repetition. Repetition `r` trains its own
/// root model (seeded from `(seed, r)`), which all strategies then share, so
/// strategies are compared on paired roots.
pub fn run_repetitions(
    splits: &Splits,
    strategies: &[Strategy],
    spec: &RepetitionSpec,
) -> Result<Vec<StrategyWalks>> {
    if spec.repetitions == 0 {
        return Err(Error::domain("need at least one repetition"));
    }
    spec.derivation.validate()?;
    let per_rep: Vec<Result<Vec<PruningWalk>>> = par::map_range(spec.repetitions, |r| {
        let rep_seed = derive_seed(spec.seed, &[r as u64]);
        let root = train_root(splits, spec.hidden, &spec.derivation, rep_seed)?;
        let config = DerivationConfig {
            seed: derive_seed(rep_seed, &[2]),
            ..spec.derivation.clone()
        };
        strategies
            .iter()
            .map(|&s| run_derivation(&root, splits, s, &config))
            .collect()
    });
    let per_rep: Vec<Vec<PruningWalk>> = per_rep.into_iter().collect::<Result<_>>()?;
    Ok(strategies
        .iter()
        .enumerate()
        .map(|(i, &strategy)| StrategyWalks {
            strategy,
            walks: per_rep.iter().map(|walks| walks[i].clone()).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

impl Triple {
    fn of(values: &[f64]) -> Option<Triple> {
        if values.is_empty() {
            return None;
        }
        Some(Triple {
            avg: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

/// Steps, total epochs and `found` statistics over repeated walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub strategy: Strategy,
    pub theta: f64,
    pub walks: usize,
    pub steps: Triple,
    pub epochs: Triple,
    /// Over walks that reached `theta` at all.
    pub found: Option<Triple>,
    pub walks_without_found: usize,
}

/// Flat CSV row of [`RunStats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub strategy: String,
    pub avg_steps: f64,
    pub max_steps: f64,
    pub min_steps: f64,
    pub avg_epochs: f64,
    pub max_epochs: f64,
    pub min_epochs: f64,
    pub avg_found: Option<f64>,
    pub max_found: Option<f64>,
    pub min_found: Option<f64>,
}

impl RunStats {
    pub fn row(&self) -> StatsRow {
        StatsRow {
            strategy: self.strategy.to_string(),
            avg_steps: self.steps.avg,
            max_steps: self.steps.max,
            min_steps: self.steps.min,
            avg_epochs: self.epochs.avg,
            max_epochs: self.epochs.max,
            min_epochs: self.epochs.min,
            avg_found: self.found.map(|t| t.avg),
            max_found: self.found.map(|t| t.max),
            min_found: self.found.map(|t| t.min),
        }
    }
}

pub fn summarize_walks(walks: &[PruningWalk], theta: f64) -> Result<RunStats> {
    let first = walks.first().ok_or_else(|| Error::domain("no walks to summarise"))?;
    if let Some(w) = walks.iter().find(|w| w.strategy != first.strategy) {
        return Err(Error::domain(format!(
            "walks mix strategies {} and {}",
            first.strategy, w.strategy
        )));
    }
    if let Some(w) = walks.iter().find(|w| w.theta != theta) {
        return Err(Error::domain(format!(
            "walk recorded with theta {} but summarised with {theta}",
            w.theta
        )));
    }
    let steps: Vec<f64> = walks.iter().map(|w| w.step_count() as f64).collect();
    let epochs: Vec<f64> = walks.iter().map(|w| w.total_epochs() as f64).collect();
    let found: Vec<f64> = walks.iter().filter_map(|w| w.found).map(|f| f as f64).collect();
    Ok(RunStats {
        strategy: first.strategy,
        theta,
        walks: walks.len(),
        steps: Triple::of(&steps).expect("non-empty"),
        epochs: Triple::of(&epochs).expect("non-empty"),
        found: Triple::of(&found),
        walks_without_found: walks.len() - found.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyStat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single walk).
    pub std: f64,
    pub walks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub players: usize,
    /// One entry per strategy, `None` where no walk visited this count.
    pub cells: Vec<Option<AccuracyStat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub strategies: Vec<String>,
    /// Descending player count.
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, players: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.players == players)
    }

    /// `players,<s>_mean,<s>_std,<s>_walks,...`, blank cells where absent.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["players".to_string()];
        for s in &self.strategies {
            header.extend([format!("{s}_mean"), format!("{s}_std"), format!("{s}_walks")]);
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.players.to_string()];
            for cell in &row.cells {
                match cell {
                    Some(c) => rec.extend([c.mean.to_string(), c.std.to_string(), c.walks.to_string()]),
                    None => rec.extend([String::new(), String::new(), String::new()]),
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Aligns walks on player count and reports validation-accuracy mean and
/// standard deviation per strategy.
pub fn compare_strategies(sets: &[StrategyWalks]) -> ComparisonTable {
    let mut per_count: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for (i, set) in sets.iter().enumerate() {
        for walk in &set.walks {
            for (players, acc) in walk.accuracy_by_players() {
                per_count
                    .entry(players)
                    .or_insert_with(|| vec![Vec::new(); sets.len()])[i]
                    .push(acc);
            }
        }
    }
    let rows = per_count
        .into_iter()
        .rev()
        .map(|(players, accs)| ComparisonRow {
            players,
            cells: accs
                .iter()
                .map(|a| {
                    if a.is_empty() {
                        return None;
                    }
                    let n = a.len() as f64;
                    let mean = a.iter().sum::<f64>() / n;
                    let std = if a.len() > 1 {
                        (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    Some(AccuracyStat {
                        mean,
                        std,
                        walks: a.len(),
                    })
                })
                .collect(),
        })
        .collect();
    ComparisonTable {
        strategies: sets.iter().map(|s| s.strategy.to_string()).collect(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::pruning::StepRecord;

    fn fake_walk(strategy: Strategy, counts: &[usize], accs: &[f64], theta: f64) -> PruningWalk {
        let steps = counts
            .windows(2)
            .zip(&accs[1..])
            .enumerate()
            .map(|(i, (w, &acc))| StepRecord {
                step: i + 1,
                players_before: w[0],
                players_after: w[1],
                pruned: (0..w[0] - w[1]).collect(),
                removed_sv_sum: None,
                val_accuracy: acc,
                test_accuracy: acc,
                cumulative_epochs: 20 + 2 * (i + 1),
            })
            .collect();
        let mut walk = PruningWalk {
            strategy,
            seed: 0,
            theta,
            root_players: counts[0],
            root_val_accuracy: accs[0],
            root_test_accuracy: accs[0],
            root_epochs: 20,
            steps,
            found: None,
        };
        walk.found = walk
            .accuracy_by_players()
            .into_iter()
            .filter(|&(_, a)| a >= theta)
            .map(|(p, _)| p)
            .min();
        walk
    }

    fn walk_with_steps(n_steps: usize) -> PruningWalk {
        let counts: Vec<usize> = (0..=n_steps).map(|i| n_steps + 1 - i).collect();
        let accs = vec![0.95; n_steps + 1];
        fake_walk(Strategy::SvBucket { p: 0.2 }, &counts, &accs, 0.9)
    }

    #[test]
    fn stats_arithmetic() {
        let walks = vec![walk_with_steps(12), walk_with_steps(12), walk_with_steps(13)];
        let stats = summarize_walks(&walks, 0.9).unwrap();
        assert!((stats.steps.avg - 37.0 / 3.0).abs() < 1e-12);
        assert_eq!((stats.steps.min, stats.steps.max), (12.0, 13.0));
        assert_eq!(stats.epochs.max, 20.0 + 26.0);
        let single = summarize_walks(&walks[..1], 0.9).unwrap();
        for t in [single.steps, single.epochs, single.found.unwrap()] {
            assert!(t.avg == t.min && t.min == t.max);
        }
        assert!(summarize_walks(&[], 0.9).is_err());
        assert!(summarize_walks(&walks, 0.8).is_err());
        let mut mixed = walks.clone();
        mixed[0].strategy = Strategy::RandomK { k: 1 };
        assert!(summarize_walks(&mixed, 0.9).is_err());
    }

    #[test]
    fn comparison_recount() {
        let s = Strategy::SvBucket { p: 0.2 };
        let r = Strategy::RandomK { k: 1 };
        let sv_walks = vec![
            fake_walk(s, &[6, 4, 2, 1], &[0.9, 0.8, 0.7, 0.5], 0.9),
            fake_walk(s, &[6, 3, 1], &[0.92, 0.75, 0.4], 0.9),
            fake_walk(s, &[6, 4, 1], &[0.91, 0.85, 0.45], 0.9),
        ];
        let rnd_walks = vec![fake_walk(r, &[6, 5, 4, 3, 2, 1], &[0.9, 0.88, 0.7, 0.6, 0.5, 0.3], 0.9)];
        let table = compare_strategies(&[
            StrategyWalks { strategy: s, walks: sv_walks },
            StrategyWalks { strategy: r, walks: rnd_walks },
        ]);
        let players: Vec<usize> = table.rows.iter().map(|r| r.players).collect();
        assert_eq!(players, vec![6, 5, 4, 3, 2, 1]);
        // hand recount at 4 players: sv walks 1 and 3 -> (0.8 + 0.85) / 2
        let four = table.row(4).unwrap().cells[0].unwrap();
        assert_eq!(four.walks, 2);
        assert!((four.mean - 0.825).abs() < 1e-12);
        assert!((four.std - (2.0f64 * 0.025 * 0.025).sqrt()).abs() < 1e-12);
        // 1 player: (0.5 + 0.4 + 0.45) / 3
        let one = table.row(1).unwrap().cells[0].unwrap();
        assert!((one.mean - 0.45).abs() < 1e-12);
        assert!(table.row(5).unwrap().cells[0].is_none());
        assert_eq!(table.row(5).unwrap().cells[1].unwrap().mean, 0.88);
        let csv = table.to_csv_string().unwrap();
        assert!(csv.starts_with("players,sv_bucket:0.2_mean,"));
    }

    #[test]
    fn identical_sets_give_identical_columns() {
        let s = Strategy::SvBucket { p: 0.2 };
        let walks = vec![fake_walk(s, &[4, 2, 1], &[0.9, 0.8, 0.6], 0.9)];
        let set = StrategyWalks { strategy: s, walks };
        let table = compare_strategies(&[set.clone(), set]);
        for row in &table.rows {
            assert_eq!(row.cells[0], row.cells[1]);
            let c = row.cells[0].unwrap();
            assert!((0.0..=1.0).contains(&c.mean));
        }
    }

    #[test]
    fn grid_is_deterministic_and_summarised() {
        let ds = synth_blobs(3, 4, 20, 0.3, 1).unwrap();
        let spec = GridSpec {
            player_counts: vec![2, 3],
            epoch_counts: vec![3],
            repetitions: 2,
            seed: 5,
            train: TrainConfig::default(),
        };
        let a = grid_search(&spec, &ds, &ds).unwrap();
        assert_eq!(a, grid_search(&spec, &ds, &ds).unwrap());
        assert_eq!(a.len(), 4);
        assert_eq!((a[0].players, a[0].rep, a[3].players, a[3].rep), (2, 0, 3, 1));
        let summary = summarize_grid(&a);
        assert_eq!(summary.len(), 2);
        for row in &summary {
            assert!(row.min <= row.mean && row.mean <= row.max);
        }
        let bad = GridSpec { repetitions: 0, ..spec };
        assert!(grid_search(&bad, &ds, &ds).is_err());
    }
}
