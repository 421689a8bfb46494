//! One Gibbs iteration over the full state.

use super::allocation::{thin_all, CountAllocation, ReviewIndex};
use super::assign::{compact, sweep, SweepStats};
use super::caches::{review_weights, Side};
use super::gamma::{sample_background, sample_items, sample_stencil_rates};
use super::ratings::{sample_block_variances, sample_noise_variance, update_block_means, ResidualRatings};
use crate::corpus::RatingsCorpus;
use crate::error::{Error, Result};
use crate::model::{slot, PacoModel};
use crate::rng::Streams;

const TAG_THIN: u64 = 0x7412;

/// Step boundaries reported to observers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Thin,
    Background,
    BlockMeans(usize),
    Rethin(usize),
    StencilRates(usize),
    Users(usize),
    Items(usize),
    Compact(usize),
    ItemRates,
    Variances,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationStats {
    /// Per stencil: user and item sweep outcomes.
    pub sweeps: Vec<(SweepStats, SweepStats)>,
}

pub struct GibbsSampler<'a> {
    corpus: &'a RatingsCorpus,
    index: ReviewIndex,
    weights: Vec<f64>,
    streams: Streams,
    model: PacoModel,
    allocation: CountAllocation,
    residuals: ResidualRatings,
    iteration: u64,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(corpus: &'a RatingsCorpus, model: PacoModel) -> Result<Self> {
        let allocation = CountAllocation::new(corpus, model.text_stencils());
        Self::resume(corpus, model, allocation, 0)
    }

    /// Continues from a saved state; `iteration` counts completed iterations.
    pub fn resume(
        corpus: &'a RatingsCorpus,
        model: PacoModel,
        allocation: CountAllocation,
        iteration: u64,
    ) -> Result<Self> {
        model.validate()?;
        if model.n_users() != corpus.n_users()
            || model.n_items() != corpus.n_items()
            || model.vocab_size() != corpus.vocab_size()
        {
            return Err(Error::Data("model and corpus dimensions differ".into()));
        }
        if allocation.slots() != slot::count(model.text_stencils()) {
            return Err(Error::Format("allocation slot count does not match the model".into()));
        }
        allocation.check_conservation(corpus)?;
        let index = ReviewIndex::new(corpus);
        let weights = review_weights(&index, model.hyper.text_weighting);
        let residuals = ResidualRatings::new(&model, corpus);
        Ok(GibbsSampler {
            corpus,
            index,
            weights,
            streams: Streams::new(model.hyper.seed),
            model,
            allocation,
            residuals,
            iteration,
        })
    }

    pub fn model(&self) -> &PacoModel {
        &self.model
    }

    pub fn allocation(&self) -> &CountAllocation {
        &self.allocation
    }

    pub fn corpus(&self) -> &RatingsCorpus {
        self.corpus
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Running fit `Σ_ℓ T` per training review.
    pub fn fit(&self) -> &[f64] {
        self.residuals.fit()
    }

    pub fn into_parts(self) -> (PacoModel, CountAllocation) {
        (self.model, self.allocation)
    }

    pub fn step(&mut self) -> IterationStats {
        self.step_with(|_, _| {})
    }

    /// Runs one iteration, calling `observe` after every phase.
    pub fn step_with<F: FnMut(Phase, &GibbsSampler)>(&mut self, mut observe: F) -> IterationStats {
        let it = self.iteration;
        let corpus = self.corpus;
        let s0 = self.model.text_stencils();
        let mut stats = IterationStats::default();

        thin_all(&self.model, corpus, &mut self.allocation, &self.streams, &[it, TAG_THIN, 0]);
        observe(Phase::Thin, self);
        sample_background(&mut self.model, corpus, &self.allocation, &self.streams, it);
        observe(Phase::Background, self);

        for l in 0..self.model.stencils.len() {
            self.residuals.begin(&self.model, corpus, l);
            update_block_means(&mut self.model, corpus, l, self.residuals.residuals(), &self.streams, it);
            observe(Phase::BlockMeans(l), self);
            if l > 0 && l < s0 {
                thin_all(&self.model, corpus, &mut self.allocation, &self.streams, &[it, TAG_THIN, l as u64]);
                observe(Phase::Rethin(l), self);
            }
            if l < s0 {
                sample_stencil_rates(&mut self.model, corpus, &self.allocation, &self.streams, it, l);
                observe(Phase::StencilRates(l), self);
            }
            let mut side_stats = [SweepStats::default(); 2];
            for (i, side) in [Side::Users, Side::Items].into_iter().enumerate() {
                side_stats[i] = sweep(
                    &mut self.model,
                    corpus,
                    &self.index,
                    &self.allocation,
                    self.residuals.residuals(),
                    &self.weights,
                    &self.streams,
                    it,
                    l,
                    side,
                );
                observe(if i == 0 { Phase::Users(l) } else { Phase::Items(l) }, self);
            }
            stats.sweeps.push((side_stats[0], side_stats[1]));
            compact(&mut self.model, l);
            self.residuals.end(&self.model, corpus);
            observe(Phase::Compact(l), self);
        }

        sample_items(&mut self.model, corpus, &self.index, &self.allocation, &self.streams, it);
        observe(Phase::ItemRates, self);
        self.residuals.refresh(&self.model, corpus);
        if self.model.hyper.resample_noise {
            sample_noise_variance(&mut self.model, corpus, self.residuals.fit(), &self.streams, it);
        }
        if self.model.hyper.resample_block_variance {
            sample_block_variances(&mut self.model, &self.streams, it);
        }
        self.iteration += 1;
        observe(Phase::Variances, self);
        stats
    }

    /// Checks every structural invariant of the current state.
    pub fn check(&self) -> Result<()> {
        self.model.validate()?;
        self.allocation.check_conservation(self.corpus)?;
        self.residuals.check(&self.model, self.corpus, 1e-9)
    }
}
