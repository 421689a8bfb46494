//! Gibbs sampler: initialisation, conditional updates and posterior
//! averaging.

pub mod allocation;
pub mod assign;
pub mod caches;
pub mod checkpoint;
pub mod gamma;
pub mod gibbs;
pub mod kmeans;
pub mod objective;
pub mod ratings;
pub mod summary;
pub mod synthetic;

pub use allocation::{thin_all, CountAllocation, ReviewIndex};
pub use caches::{AssignmentCaches, Side};
pub use checkpoint::Checkpoint;
pub use gibbs::{GibbsSampler, IterationStats, Phase};
pub use kmeans::init_kmeans;
pub use objective::{log_joint, LogJoint};
pub use ratings::ResidualRatings;
pub use summary::{Accumulator, MeanRate, PosteriorSummary, Probe};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticSpec, Truth};

use crate::corpus::RatingsCorpus;
use crate::error::Result;
use crate::model::{Hyperparameters, PacoModel};
use crate::rng::Streams;

/// k-means start, `burn_in` discarded iterations, then `samples` iterations
/// averaged over `probe`. Returns the final state and the averages.
pub fn train(
    train: &RatingsCorpus,
    hyper: &Hyperparameters,
    probe: &Probe,
) -> Result<(PacoModel, PosteriorSummary)> {
    probe.validate(train.n_users(), train.n_items())?;
    let model = init_kmeans(train, hyper, &Streams::new(hyper.seed))?;
    let mut sampler = GibbsSampler::new(train, model)?;
    let mut acc = Accumulator::new(probe);
    for it in 0..hyper.burn_in + hyper.samples {
        sampler.step();
        if it >= hyper.burn_in {
            acc.add(sampler.model());
        }
    }
    let (model, _) = sampler.into_parts();
    let summary = acc.finish(model.global_mean);
    Ok((model, summary))
}
