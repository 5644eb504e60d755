//! Pruning strategies and the iterative derivation walk.

mod select;
mod walk;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use select::{
    ascending_order, select_random_k, select_sv_bottom_k, select_sv_bottom_p, select_sv_bucket,
    select_w_bottom_k,
};
pub use walk::{
    run_derivation, train_root, DerivationConfig, PayoffSplit, PruningWalk, StepRecord, WalkSummary,
};

/// A rule choosing which hidden neurons to remove in one derivation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// The `k` players with the smallest Shapley value.
    SvBottomK { k: usize },
    /// Players whose Shapley value is below `p / n`.
    SvBottomP { p: f64 },
    /// The longest run of smallest-valued players whose values sum below `p`.
    SvBucket { p: f64 },
    /// `k` players chosen uniformly at random.
    RandomK { k: usize },
    /// The `k` players with the smallest incoming-weight norm.
    WBottomK { k: usize },
}

impl Strategy {
    /// Whether selection needs a Shapley estimate.
    pub fn uses_shapley(&self) -> bool {
        matches!(
            self,
            Strategy::SvBottomK { .. } | Strategy::SvBottomP { .. } | Strategy::SvBucket { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::SvBottomK { k } | Strategy::RandomK { k } | Strategy::WBottomK { k } if k == 0 => {
                Err(Error::domain(format!("{self}: k must be at least 1")))
            }
            Strategy::SvBottomP { p } | Strategy::SvBucket { p } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::domain(format!("{self}: p must be positive")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::SvBottomK { k } => write!(f, "sv_bottom_k:{k}"),
            Strategy::SvBottomP { p } => write!(f, "sv_bottom_p:{p}"),
            Strategy::SvBucket { p } => write!(f, "sv_bucket:{p}"),
            Strategy::RandomK { k } => write!(f, "random_k:{k}"),
            Strategy::WBottomK { k } => write!(f, "w_bottom_k:{k}"),
        }
    }
}

/// Parses `name:param`, e.g. `sv_bucket:0.2` or `random:3`.
impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("strategy {s:?} must look like name:param")))?;
        let int = || {
            param
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::domain(format!("strategy {s:?}: {param:?} is not a count")))
        };
        let real = || {
            param
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("strategy {s:?}: {param:?} is not a number")))
        };
        let strategy = match name.trim().to_ascii_lowercase().as_str() {
            "sv_bottom_k" | "svbottomk" => Strategy::SvBottomK { k: int()? },
            "sv_bottom_p" | "svbottomp" => Strategy::SvBottomP { p: real()? },
            "sv_bucket" | "svbucket" => Strategy::SvBucket { p: real()? },
            "random" | "random_k" => Strategy::RandomK { k: int()? },
            "w_bottom" | "w_bottom_k" | "wbottom" => Strategy::WBottomK { k: int()? },
            other => return Err(Error::domain(format!("unknown strategy {other:?}"))),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}
