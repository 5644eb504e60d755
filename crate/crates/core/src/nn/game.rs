//! A trained network seen as a coalitional game over its hidden neurons.

use super::{argmax, MlpModel};
use crate::coalition::Coalition;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::game::CoalitionalGame;

/// Payoff `v(S) = m(S) - m(∅)`, where `m(S)` is the accuracy on the payoff
/// dataset with only the neurons in `S` active.
///
/// Hidden activations do not depend on the mask (a masked neuron is simply
/// skipped), so they are computed once up front; each payoff evaluation only
/// re-runs the output layer.
pub struct NetworkGame<'a> {
    model: &'a MlpModel,
    labels: &'a [usize],
    hidden: Vec<f64>,
    empty_accuracy: f64,
}

pub fn as_game<'a>(model: &'a MlpModel, data: &'a Dataset) -> Result<NetworkGame<'a>> {
    NetworkGame::new(model, data)
}

impl<'a> NetworkGame<'a> {
    pub fn new(model: &'a MlpModel, data: &'a Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "feature width",
                expected: model.input_dim(),
                found: data.dim(),
            });
        }
        Coalition::empty(model.hidden_dim())?;
        let h = model.hidden_dim();
        let mut hidden = vec![0.0; data.len() * h];
        for (i, out) in hidden.chunks_exact_mut(h).enumerate() {
            model.hidden_into(data.row(i), None, out);
        }
        let mut game = NetworkGame {
            model,
            labels: data.labels(),
            hidden,
            empty_accuracy: 0.0,
        };
        game.empty_accuracy = game.accuracy(Coalition::empty(h)?);
        Ok(game)
    }

    /// `m(S)`.
    pub fn accuracy(&self, coalition: Coalition) -> f64 {
        let h = self.model.hidden_dim();
        let mut logits = vec![0.0; self.model.output_dim()];
        let correct = self
            .hidden
            .chunks_exact(h)
            .zip(self.labels)
            .filter(|(a, &y)| {
                self.model.logits_into(a, Some(&coalition), &mut logits);
                argmax(&logits) == y
            })
            .count();
        correct as f64 / self.labels.len() as f64
    }

    /// `m(∅)`: accuracy of the bias-only network.
    pub fn empty_accuracy(&self) -> f64 {
        self.empty_accuracy
    }
}

impl CoalitionalGame for NetworkGame<'_> {
    fn players(&self) -> usize {
        self.model.hidden_dim()
    }

    fn payoff(&self, coalition: Coalition) -> f64 {
        if coalition.is_empty() {
            return 0.0;
        }
        self.accuracy(coalition) - self.empty_accuracy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::exact::shapley_exact_subsets;
    use crate::nn::{train, TrainConfig};

    fn trained(h: usize) -> (MlpModel, Dataset) {
        let ds = synth_blobs(3, 5, 30, 0.35, 2).unwrap();
        let m = MlpModel::init(5, h, 3, 2).unwrap();
        let m = train(&m, &ds, &TrainConfig { epochs: 15, ..TrainConfig::default() }).unwrap();
        (m, ds)
    }

    #[test]
    fn payoffs_match_direct_evaluation() {
        let (m, ds) = trained(6);
        let g = as_game(&m, &ds).unwrap();
        let empty = Coalition::empty(6).unwrap();
        let full = Coalition::full(6).unwrap();
        assert_eq!(g.payoff(empty), 0.0);
        let direct =
            m.evaluate(&ds, Some(&full)).unwrap().accuracy - m.evaluate(&ds, Some(&empty)).unwrap().accuracy;
        assert_eq!(g.payoff(full), direct);
        for bits in 0..64u128 {
            let s = Coalition::from_bits(6, bits).unwrap();
            let v = g.payoff(s);
            assert!((-1.0..=1.0).contains(&v));
            assert_eq!(g.accuracy(s), m.evaluate(&ds, Some(&s)).unwrap().accuracy);
        }
    }

    #[test]
    fn efficiency_on_small_network() {
        let (m, ds) = trained(3);
        let g = as_game(&m, &ds).unwrap();
        let sv = shapley_exact_subsets(&g).unwrap();
        assert!((sv.total() - g.payoff(g.grand())).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_or_mismatched_data() {
        let (m, ds) = trained(3);
        assert!(as_game(&m, &ds.head(0)).is_err());
        let other = synth_blobs(3, 4, 5, 0.1, 0).unwrap();
        assert!(as_game(&m, &other).is_err());
    }
}
