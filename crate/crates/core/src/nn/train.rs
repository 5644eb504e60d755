use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, softmax_in_place, MlpModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.1,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Parameter gradients with the same layout as [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Gradients {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    /// `max |a - b| / max(|a|, |b|, floor)` over all entries.
    pub fn max_relative_error(&self, other: &Gradients, floor: f64) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

fn check_batch(model: &MlpModel, features: &[f64], labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.len() != labels.len() * model.input_dim {
        return Err(Error::DimensionMismatch {
            what: "batch features",
            expected: labels.len() * model.input_dim,
            found: features.len(),
        });
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= model.output_dim) {
        return Err(Error::domain(format!(
            "label {l} not below output size {}",
            model.output_dim
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Mean cross-entropy over a row-major batch.
    pub fn loss(&self, features: &[f64], labels: &[usize]) -> Result<f64> {
        check_batch(self, features, labels)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut logits = vec![0.0; self.output_dim];
        let mut total = 0.0;
        for (x, &y) in features.chunks_exact(self.input_dim).zip(labels) {
            self.hidden_into(x, None, &mut hidden);
            self.logits_into(&hidden, None, &mut logits);
            total += log_sum_exp(&logits) - logits[y];
        }
        Ok(total / labels.len() as f64)
    }

    /// Backpropagated gradient of the mean cross-entropy.
    pub fn gradient(&self, features: &[f64], labels: &[usize]) -> Result<Gradients> {
        check_batch(self, features, labels)?;
        let (d, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        let mut g = Gradients::zeros_like(self);
        let mut hidden = vec![0.0; h];
        let mut delta_out = vec![0.0; o];
        let mut delta_hidden = vec![0.0; h];
        for (x, &y) in features.chunks_exact(d).zip(labels) {
            self.hidden_into(x, None, &mut hidden);
            self.logits_into(&hidden, None, &mut delta_out);
            softmax_in_place(&mut delta_out);
            delta_out[y] -= 1.0;

            delta_hidden.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..o {
                let dc = delta_out[c];
                g.b2[c] += dc;
                let row = c * h;
                for j in 0..h {
                    g.w2[row + j] += dc * hidden[j];
                    delta_hidden[j] += self.w2[row + j] * dc;
                }
            }
            for j in 0..h {
                // relu'(z) = 1 iff the activation is positive
                if hidden[j] <= 0.0 {
                    continue;
                }
                let dj = delta_hidden[j];
                g.b1[j] += dj;
                for (gw, xi) in g.w1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *gw += dj * xi;
                }
            }
        }
        let scale = 1.0 / labels.len() as f64;
        for buf in [&mut g.w1, &mut g.b1, &mut g.w2, &mut g.b2] {
            buf.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(g)
    }

    /// Central-difference estimate of [`MlpModel::gradient`], perturbing one
    /// parameter at a time by `±step`.
    pub fn finite_diff_gradient(
        &self,
        features: &[f64],
        labels: &[usize],
        step: f64,
    ) -> Result<Gradients> {
        if step.is_nan() || step <= 0.0 {
            return Err(Error::domain(format!("finite-difference step must be positive, got {step}")));
        }
        check_batch(self, features, labels)?;
        let mut probe = self.clone();
        let mut out = Gradients::zeros_like(self);
        let targets = [&mut out.w1, &mut out.b1, &mut out.w2, &mut out.b2];
        for (k, target) in targets.into_iter().enumerate() {
            for i in 0..target.len() {
                let original = probe.parameters_mut()[k][i];
                probe.parameters_mut()[k][i] = original + step;
                let plus = probe.loss(features, labels)?;
                probe.parameters_mut()[k][i] = original - step;
                let minus = probe.loss(features, labels)?;
                probe.parameters_mut()[k][i] = original;
                target[i] = (plus - minus) / (2.0 * step);
            }
        }
        Ok(out)
    }

    fn apply(&mut self, g: &Gradients, learning_rate: f64) {
        let grads = [&g.w1, &g.b1, &g.w2, &g.b2];
        for (params, grad) in self.parameters_mut().into_iter().zip(grads) {
            for (p, d) in params.iter_mut().zip(grad) {
                *p -= learning_rate * d;
            }
        }
    }
}

/// Mini-batch SGD on the mean cross-entropy, starting from `model`'s
/// weights. Each epoch shuffles the rows with a substream of `config.seed`.
pub fn train(model: &MlpModel, data: &Dataset, config: &TrainConfig) -> Result<MlpModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            what: "feature width",
            expected: model.input_dim,
            found: data.dim(),
        });
    }
    if data.classes() > model.output_dim {
        return Err(Error::DimensionMismatch {
            what: "class count",
            expected: model.output_dim,
            found: data.classes(),
        });
    }
    let mut model = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut features = Vec::with_capacity(config.batch_size * data.dim());
    let mut labels = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::substream(config.seed, &[epoch as u64]));
        for batch in order.chunks(config.batch_size) {
            features.clear();
            labels.clear();
            for &i in batch {
                features.extend_from_slice(data.row(i));
                labels.push(data.labels()[i]);
            }
            let g = model.gradient(&features, &labels)?;
            model.apply(&g, config.learning_rate);
        }
    }
    model.validate()?;
    Ok(model)
}
