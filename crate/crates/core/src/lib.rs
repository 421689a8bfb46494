//! Poisson additive co-clustering (PACO) of user–item ratings and review text.
//!
//! A model is a sum of *stencils*: block-constant co-clusterings of the
//! rating matrix. Text stencils also carry Poisson language models per
//! block, per user cluster and per item cluster; together with a background
//! model and a per-item model they add up to the expected word counts of a
//! review. Learning is a Gibbs sampler that thins observed word counts over
//! the active Poisson components.
//!
//! The crate is organised as:
//!
//! - [`corpus`]: loading, tokenisation, vocabulary pruning, splitting, centring.
//! - [`model`]: parameter state, predictions, rates, model size, file format.
//! - [`sampler`]: k-means initialisation and the Gibbs learner.
//! - [`eval`]: RMSE, perplexity, joint NLL, cold-start buckets, top-word reports.
//! - [`cli`]: the batch `prepare` / `train` / `evaluate` / `inspect` commands.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod sampler;

pub use corpus::{RatingsCorpus, Vocabulary};
pub use error::{Error, Result};
pub use model::{Hyperparameters, PacoModel, Stencil};
pub use sampler::{train, PosteriorSummary, Probe};
