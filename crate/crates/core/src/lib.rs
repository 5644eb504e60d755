//! Shapley-value attribution for the hidden neurons of a feed-forward
//! classifier, and pruning strategies driven by those attributions.
//!
//! The crate is organised bottom-up:
//!
//! - [`coalition`] and [`game`]: coalitional games over a bitset of players,
//!   including the benchmark games used to validate the estimators.
//! - [`exact`]: exact Shapley values by subset enumeration and by permutation
//!   enumeration.
//! - [`estimator`]: Monte Carlo estimates by random subsets and random
//!   permutations, with a coalition payoff cache and cost accounting.
//! - [`nn`]: a single-hidden-layer network with per-neuron masking,
//!   SGD training, structural pruning and the payoff adapter
//!   ([`nn::NetworkGame`]).
//! - [`data`]: IDX / CSV ingestion, synthetic blobs and seeded splits.
//! - [`pruning`]: selection rules and the iterative derivation walk.
//! - [`experiments`]: grid search, repeated walks and report tables.
//!
//! With the default `parallel` feature, data-parallel loops (coalition
//! enumeration, sampling batches, dataset evaluation, grid cells, repeated
//! walks) run on rayon. Every reduction is performed in a fixed order, so
//! results are bit-identical with the feature disabled and independent of the
//! thread count.

pub mod coalition;
pub mod data;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod experiments;
pub mod game;
pub mod nn;
pub mod par;
pub mod pruning;
pub mod report;
pub mod rng;

pub use coalition::Coalition;
pub use data::Dataset;
pub use error::{Error, Result};
pub use estimator::{EstimateReport, SamplingMethod, SamplingPlan};
pub use exact::{shapley_exact_permutations, shapley_exact_subsets, ShapleyVector};
pub use game::{CoalitionalGame, PayoffTable};
pub use nn::{EvalResult, MlpModel, NetworkGame, TrainConfig};
pub use pruning::{DerivationConfig, PruningWalk, StepRecord, Strategy};
