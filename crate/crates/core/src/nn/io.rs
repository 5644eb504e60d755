//! JSON model files. Parameters are stored as the 16-digit hex encoding of
//! their IEEE-754 bit patterns, so a save/load round trip is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MlpModel;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "shapprune-mlp/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    w1: Vec<String>,
    b1: Vec<String>,
    w2: Vec<String>,
    b2: Vec<String>,
}

fn encode(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
}

fn decode(name: &str, values: &[String]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|s| {
            u64::from_str_radix(s, 16)
                .ok()
                .filter(|_| s.len() == 16)
                .map(f64::from_bits)
                .ok_or_else(|| Error::InvalidModel(format!("{name}: bad hex float {s:?}")))
        })
        .collect()
}

impl MlpModel {
    pub fn to_json_string(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            output_dim: self.output_dim,
            w1: encode(&self.w1),
            b1: encode(&self.b1),
            w2: encode(&self.w2),
            b2: encode(&self.b2),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::InvalidModel(format!(
                "unsupported format {:?}, expected {MODEL_FORMAT:?}",
                file.format
            )));
        }
        MlpModel::from_parameters(
            file.input_dim,
            file.hidden_dim,
            file.output_dim,
            decode("w1", &file.w1)?,
            decode("b1", &file.b1)?,
            decode("w2", &file.w2)?,
            decode("b2", &file.b2)?,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
