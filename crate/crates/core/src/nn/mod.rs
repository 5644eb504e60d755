//! Single-hidden-layer ReLU classifier with per-neuron masking.
//!
//! A mask is a [`Coalition`] over the hidden neurons. A neuron outside the
//! mask contributes nothing: its activation is treated as exactly zero and it
//! is skipped in the output accumulation. Pruning a neuron removes its row of
//! `W1`/`b1` and its column of `W2`; the output accumulation visits the
//! survivors in the same order, so a pruned model and the correspondingly
//! masked original produce bit-identical outputs.

mod game;
mod io;
mod train;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::rng;

pub use game::{as_game, NetworkGame};
pub use io::MODEL_FORMAT;
pub use train::{train, Gradients, TrainConfig};

/// Rows per work item when evaluating a dataset.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    /// `hidden_dim x input_dim`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// `output_dim x hidden_dim`, row-major.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub cross_entropy: f64,
    pub correct: usize,
    pub total: usize,
}

#[inline]
fn active(mask: Option<&Coalition>, j: usize) -> bool {
    mask.is_none_or(|m| m.contains(j))
}

impl MlpModel {
    /// Uniform Glorot initialisation, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(Error::domain("layer sizes must be positive"));
        }
        let mut r = rng::rng_from_seed(seed);
        let mut glorot = |fan_in: usize, fan_out: usize, count: usize| -> Vec<f64> {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..count).map(|_| r.random_range(-limit..limit)).collect()
        };
        let w1 = glorot(input_dim, hidden_dim, hidden_dim * input_dim);
        let w2 = glorot(hidden_dim, output_dim, output_dim * hidden_dim);
        Ok(MlpModel {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; output_dim],
        })
    }

    pub fn from_parameters(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let model = MlpModel {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1,
            w2,
            b2,
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidModel("layer sizes must be positive".into()));
        }
        let shapes = [
            ("w1", self.w1.len(), self.hidden_dim * self.input_dim),
            ("b1", self.b1.len(), self.hidden_dim),
            ("w2", self.w2.len(), self.output_dim * self.hidden_dim),
            ("b2", self.b2.len(), self.output_dim),
        ];
        for (name, found, expected) in shapes {
            if found != expected {
                return Err(Error::InvalidModel(format!(
                    "{name} has {found} values, expected {expected}"
                )));
            }
        }
        if self.parameters().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub(crate) fn parameters_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn check_mask(&self, mask: Option<&Coalition>) -> Result<()> {
        match mask {
            Some(m) if m.players() != self.hidden_dim => Err(Error::DimensionMismatch {
                what: "mask players",
                expected: self.hidden_dim,
                found: m.players(),
            }),
            _ => Ok(()),
        }
    }

    fn check_features(&self, features: &[f64]) -> Result<usize> {
        if !features.len().is_multiple_of(self.input_dim) {
            return Err(Error::DimensionMismatch {
                what: "feature width",
                expected: self.input_dim,
                found: features.len() % self.input_dim,
            });
        }
        Ok(features.len() / self.input_dim)
    }

    /// ReLU activations of the neurons in `mask` (all when `None`); the rest
    /// are set to zero.
    #[inline]
    pub(crate) fn hidden_into(&self, x: &[f64], mask: Option<&Coalition>, out: &mut [f64]) {
        for (j, a) in out.iter_mut().enumerate() {
            *a = if active(mask, j) {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                let z = row
                    .iter()
                    .zip(x)
                    .fold(self.b1[j], |acc, (w, xi)| acc + w * xi);
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            } else {
                0.0
            };
        }
    }

    /// Output logits, accumulating only neurons in `mask`, in index order.
    #[inline]
    pub(crate) fn logits_into(&self, hidden: &[f64], mask: Option<&Coalition>, out: &mut [f64]) {
        let h = self.hidden_dim;
        for (c, z) in out.iter_mut().enumerate() {
            let row = &self.w2[c * h..(c + 1) * h];
            let mut acc = self.b2[c];
            for j in 0..h {
                if active(mask, j) {
                    acc += row[j] * hidden[j];
                }
            }
            *z = acc;
        }
    }

    /// Class probabilities for a row-major batch, `rows x output_dim`.
    pub fn forward(&self, features: &[f64], mask: Option<&Coalition>) -> Result<Vec<f64>> {
        self.check_mask(mask)?;
        let rows = self.check_features(features)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; rows * self.output_dim];
        for (x, probs) in features
            .chunks_exact(self.input_dim)
            .zip(out.chunks_exact_mut(self.output_dim))
        {
            self.hidden_into(x, mask, &mut hidden);
            self.logits_into(&hidden, mask, probs);
            softmax_in_place(probs);
        }
        Ok(out)
    }

    /// Accuracy and mean cross-entropy under `mask`.
    pub fn evaluate(&self, data: &Dataset, mask: Option<&Coalition>) -> Result<EvalResult> {
        self.check_mask(mask)?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "feature width",
                expected: self.input_dim,
                found: data.dim(),
            });
        }
        let chunks = data.len().div_ceil(EVAL_CHUNK);
        let partials = par::map_range(chunks, |c| {
            let start = c * EVAL_CHUNK;
            let end = (start + EVAL_CHUNK).min(data.len());
            let mut hidden = vec![0.0; self.hidden_dim];
            let mut logits = vec![0.0; self.output_dim];
            let mut correct = 0usize;
            let mut ce = 0.0;
            for i in start..end {
                self.hidden_into(data.row(i), mask, &mut hidden);
                self.logits_into(&hidden, mask, &mut logits);
                let label = data.labels()[i];
                if argmax(&logits) == label {
                    correct += 1;
                }
                ce += log_sum_exp(&logits) - logits[label];
            }
            (correct, ce)
        });
        let (correct, ce) = partials
            .into_iter()
            .fold((0, 0.0), |(a, b), (c, d)| (a + c, b + d));
        Ok(EvalResult {
            accuracy: correct as f64 / data.len() as f64,
            cross_entropy: ce / data.len() as f64,
            correct,
            total: data.len(),
        })
    }

    /// Euclidean norm of neuron `j`'s incoming weights (bias excluded).
    pub fn weight_norm(&self, j: usize) -> Result<f64> {
        if j >= self.hidden_dim {
            return Err(Error::domain(format!(
                "neuron {j} out of range 0..{}",
                self.hidden_dim
            )));
        }
        let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
        Ok(row.iter().map(|w| w * w).sum::<f64>().sqrt())
    }

    pub fn weight_norms(&self) -> Vec<f64> {
        (0..self.hidden_dim)
            .map(|j| self.weight_norm(j).expect("in range"))
            .collect()
    }

    /// Structurally removes the neurons in `to_remove`, keeping survivors in
    /// their original order.
    pub fn prune_neurons(&self, to_remove: &Coalition) -> Result<MlpModel> {
        self.check_mask(Some(to_remove))?;
        if to_remove.len() >= self.hidden_dim {
            return Err(Error::domain("cannot prune every hidden neuron"));
        }
        let keep: Vec<usize> = to_remove.complement().members().collect();
        let h = keep.len();
        let mut w1 = Vec::with_capacity(h * self.input_dim);
        let mut b1 = Vec::with_capacity(h);
        for &j in &keep {
            w1.extend_from_slice(&self.w1[j * self.input_dim..(j + 1) * self.input_dim]);
            b1.push(self.b1[j]);
        }
        let mut w2 = Vec::with_capacity(self.output_dim * h);
        for c in 0..self.output_dim {
            w2.extend(keep.iter().map(|&j| self.w2[c * self.hidden_dim + j]));
        }
        Ok(MlpModel {
            input_dim: self.input_dim,
            hidden_dim: h,
            output_dim: self.output_dim,
            w1,
            b1,
            w2,
            b2: self.b2.clone(),
        })
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;

    fn hand_model() -> MlpModel {
        // 2-2-2 network
        MlpModel::from_parameters(
            2,
            2,
            2,
            vec![1.0, -2.0, 0.5, 0.25],
            vec![0.1, -0.3],
            vec![0.7, -1.1, -0.4, 0.9],
            vec![0.05, -0.05],
        )
        .unwrap()
    }

    #[test]
    fn init_bounds_and_determinism() {
        let m = MlpModel::init(784, 40, 10, 1).unwrap();
        assert_eq!(m.w1().len(), 40 * 784);
        assert!(m.w1().iter().all(|w| w.abs() < 0.1));
        assert_eq!(m, MlpModel::init(784, 40, 10, 1).unwrap());
        let small = MlpModel::init(2, 1, 2, 3).unwrap();
        assert_eq!(small.b1(), &[0.0]);
        assert_eq!(small.b2(), &[0.0, 0.0]);
        assert!(MlpModel::init(0, 1, 1, 0).is_err());
    }

    #[test]
    fn forward_matches_scalar_recomputation() {
        let m = hand_model();
        let x = [0.3, -0.6];
        // independent scalar walk-through
        let z0: f64 = 0.1 + 1.0 * 0.3 + (-2.0) * (-0.6);
        let z1: f64 = -0.3 + 0.5 * 0.3 + 0.25 * (-0.6);
        let (a0, a1) = (z0.max(0.0), z1.max(0.0));
        let o0 = 0.05 + 0.7 * a0 + (-1.1) * a1;
        let o1 = -0.05 + (-0.4) * a0 + 0.9 * a1;
        let e0 = o0.exp();
        let e1 = o1.exp();
        let expected = [e0 / (e0 + e1), e1 / (e0 + e1)];
        let got = m.forward(&x, None).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn full_and_empty_masks() {
        let m = MlpModel::init(5, 6, 3, 2).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let full = Coalition::full(6).unwrap();
        assert_eq!(m.forward(&xs, None).unwrap(), m.forward(&xs, Some(&full)).unwrap());

        let empty = Coalition::empty(6).unwrap();
        let out = m.forward(&xs, Some(&empty)).unwrap();
        let mut expected = m.b2().to_vec();
        softmax_in_place(&mut expected);
        for row in out.chunks(3) {
            assert_eq!(row, expected.as_slice());
        }
        for row in m.forward(&xs, None).unwrap().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_rejects_bad_shapes() {
        let m = hand_model();
        assert!(matches!(
            m.forward(&[1.0, 2.0, 3.0], None),
            Err(Error::DimensionMismatch { .. })
        ));
        let wrong = Coalition::full(3).unwrap();
        assert!(m.forward(&[1.0, 2.0], Some(&wrong)).is_err());
    }

    #[test]
    fn weight_norms() {
        let m = MlpModel::from_parameters(
            2,
            2,
            1,
            vec![3.0, 4.0, 0.0, 0.0],
            vec![9.0, 9.0],
            vec![1.0, 1.0],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(m.weight_norm(0).unwrap(), 5.0);
        assert_eq!(m.weight_norm(1).unwrap(), 0.0);
        assert!(m.weight_norm(2).is_err());

        let r = MlpModel::init(7, 4, 2, 9).unwrap();
        for j in 0..4 {
            let mut sq = 0.0;
            for k in 0..7 {
                sq += r.w1()[j * 7 + k] * r.w1()[j * 7 + k];
            }
            assert!((r.weight_norm(j).unwrap() - sq.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn prune_shapes_and_equivalence() {
        let m = MlpModel::init(6, 40, 3, 4).unwrap();
        let remove = Coalition::from_members(40, [0, 17, 39]).unwrap();
        let p = m.prune_neurons(&remove).unwrap();
        assert_eq!(p.hidden_dim(), 37);
        assert_eq!(p.w2().len(), 3 * 37);
        assert_eq!(m.prune_neurons(&Coalition::empty(40).unwrap()).unwrap(), m);
        assert!(m.prune_neurons(&Coalition::full(40).unwrap()).is_err());

        let xs: Vec<f64> = (0..600).map(|i| ((i * 7919) % 1000) as f64 / 500.0 - 1.0).collect();
        let keep = remove.complement();
        assert_eq!(p.forward(&xs, None).unwrap(), m.forward(&xs, Some(&keep)).unwrap());
    }

    #[test]
    fn evaluate_constant_predictor_and_recount() {
        // zero weights, bias favouring class 2: always predicts 2
        let m = MlpModel::from_parameters(
            8,
            2,
            3,
            vec![0.0; 16],
            vec![0.0; 2],
            vec![0.0; 6],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let ds = synth_blobs(3, 8, 20, 0.3, 1).unwrap();
        let r = m.evaluate(&ds, None).unwrap();
        assert_eq!(r.correct, 20);
        assert_eq!(r.accuracy, 1.0 / 3.0);

        let m = MlpModel::init(8, 5, 3, 8).unwrap();
        let probs = m.forward(ds.features(), None).unwrap();
        let recount = probs
            .chunks(3)
            .zip(ds.labels())
            .filter(|(p, &l)| argmax(p) == l)
            .count();
        let r = m.evaluate(&ds, None).unwrap();
        assert_eq!(r.correct, recount);
        assert!(r.cross_entropy >= 0.0);
        let full = Coalition::full(5).unwrap();
        assert_eq!(m.evaluate(&ds, Some(&full)).unwrap(), r);
        assert!(m.evaluate(&ds.head(0), None).is_err());
    }
}
