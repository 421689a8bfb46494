//! Gamma-posterior draws of Poisson rate vectors from thinned counts.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use super::allocation::{CountAllocation, ReviewIndex};
use crate::corpus::RatingsCorpus;
use crate::model::{slot, GammaPrior, PacoModel, RateVector, RATE_FLOOR};
use crate::rng::Streams;

/// Which words get an explicit draw.
#[derive(Debug, Clone, Copy)]
pub enum Support<'a> {
    /// Every word of the vocabulary; yields a dense vector.
    All,
    /// Only these sorted words (a superset of the credited words); every
    /// other word takes the posterior mean `α / (β + |R|)`.
    Words(&'a [u32]),
}

#[inline]
fn draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
        .max(RATE_FLOOR)
}

/// Draws `μ_x ~ Γ(α + Σ n̂_x, β + |R|)` for every word.
///
/// `credited` holds `(word, Σ n̂)` sorted by word without duplicates;
/// `n_reviews` is |R|, the number of reviews the component is active in.
pub fn sample_rates<R: Rng + ?Sized>(
    credited: &[(u32, u64)],
    n_reviews: u64,
    prior: GammaPrior,
    vocab_size: usize,
    support: Support,
    rng: &mut R,
) -> RateVector {
    let rate = prior.rate + n_reviews as f64;
    match support {
        Support::All => {
            let mut out = Vec::with_capacity(vocab_size);
            let mut next = credited.iter().peekable();
            for x in 0..vocab_size as u32 {
                let n = match next.peek() {
                    Some(&&(w, n)) if w == x => {
                        next.next();
                        n
                    }
                    _ => 0,
                };
                out.push(draw(prior.shape + n as f64, rate, rng));
            }
            RateVector::Dense(out)
        }
        Support::Words(words) => {
            let mut entries = Vec::with_capacity(words.len());
            let mut next = credited.iter().peekable();
            for &x in words {
                let n = match next.peek() {
                    Some(&&(w, n)) if w == x => {
                        next.next();
                        n
                    }
                    _ => 0,
                };
                entries.push((x, draw(prior.shape + n as f64, rate, rng)));
            }
            debug_assert!(next.next().is_none(), "credited word outside support");
            RateVector::Sparse {
                len: vocab_size as u32,
                default: (prior.shape / rate).max(RATE_FLOOR),
                entries,
            }
        }
    }
}

/// Sums the counts credited to `slot_index` over a set of reviews.
pub fn gather_credits(
    corpus: &RatingsCorpus,
    allocation: &CountAllocation,
    reviews: &[u32],
    slot_index: usize,
) -> Vec<(u32, u64)> {
    let obs = corpus.observations();
    let mut pairs: Vec<(u32, u64)> = Vec::new();
    for &r in reviews {
        let r = r as usize;
        pairs.extend(
            allocation
                .slot_counts(&obs[r], r, slot_index)
                .map(|(x, n)| (x, n as u64)),
        );
    }
    pairs.sort_unstable_by_key(|p| p.0);
    let mut merged: Vec<(u32, u64)> = Vec::with_capacity(pairs.len());
    for (x, n) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == x => last.1 += n,
            _ => merged.push((x, n)),
        }
    }
    merged
}

// Phase tags for random streams.
pub(crate) const TAG_BACKGROUND: u64 = 0xB6;
pub(crate) const TAG_ITEMS: u64 = 0x17E;
pub(crate) const TAG_BLOCK: u64 = 0xB10C;
pub(crate) const TAG_UCLUSTER: u64 = 0xC1A;
pub(crate) const TAG_ICLUSTER: u64 = 0xC1B;

pub fn sample_background(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    allocation: &CountAllocation,
    streams: &Streams,
    iteration: u64,
) {
    let all: Vec<u32> = (0..corpus.len() as u32).collect();
    let credits = gather_credits(corpus, allocation, &all, slot::BACKGROUND);
    let mut rng = streams.rng(&[iteration, TAG_BACKGROUND]);
    model.rates.background = sample_rates(
        &credits,
        corpus.len() as u64,
        model.hyper.priors.background,
        model.vocab_size(),
        Support::All,
        &mut rng,
    );
}

/// Per-item models, sparse over each item's training vocabulary.
pub fn sample_items(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    index: &ReviewIndex,
    allocation: &CountAllocation,
    streams: &Streams,
    iteration: u64,
) {
    let prior = model.hyper.priors.item;
    let w = model.vocab_size();
    model.rates.items = (0..model.n_items())
        .into_par_iter()
        .map(|m| {
            let reviews = &index.by_item[m];
            let credits = gather_credits(corpus, allocation, reviews, slot::ITEM);
            let mut rng = streams.rng(&[iteration, TAG_ITEMS, m as u64]);
            sample_rates(
                &credits,
                reviews.len() as u64,
                prior,
                w,
                Support::Words(&index.item_support[m]),
                &mut rng,
            )
        })
        .collect();
}

/// Block, user-cluster and item-cluster models of text stencil `l`.
pub fn sample_stencil_rates(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    allocation: &CountAllocation,
    streams: &Streams,
    iteration: u64,
    l: usize,
) {
    let st = &model.stencils[l];
    let (ku, ki) = (st.k_users, st.k_items);
    let mut by_block = vec![Vec::new(); ku * ki];
    let mut by_ucl = vec![Vec::new(); ku];
    let mut by_icl = vec![Vec::new(); ki];
    for (r, o) in corpus.observations().iter().enumerate() {
        let a = st.user_clusters[o.user as usize] as usize;
        let b = st.item_clusters[o.item as usize] as usize;
        by_block[a * ki + b].push(r as u32);
        by_ucl[a].push(r as u32);
        by_icl[b].push(r as u32);
    }
    let priors = model.hyper.priors;
    let w = model.vocab_size();
    let l64 = l as u64;
    let draw_group = |groups: &[Vec<u32>], slot_index: usize, prior: GammaPrior, tag: u64| {
        groups
            .par_iter()
            .enumerate()
            .map(|(k, reviews)| {
                let credits = gather_credits(corpus, allocation, reviews, slot_index);
                let mut rng = streams.rng(&[iteration, tag, l64, k as u64]);
                sample_rates(&credits, reviews.len() as u64, prior, w, Support::All, &mut rng)
            })
            .collect::<Vec<_>>()
    };
    let blocks = draw_group(&by_block, slot::block(l), priors.block, TAG_BLOCK);
    let user_clusters = draw_group(&by_ucl, slot::user_cluster(l), priors.user_cluster, TAG_UCLUSTER);
    let item_clusters = draw_group(&by_icl, slot::item_cluster(l), priors.item_cluster, TAG_ICLUSTER);
    let text = &mut model.rates.stencils[l];
    text.blocks = blocks;
    text.user_clusters = user_clusters;
    text.item_clusters = item_clusters;
}

/// Draws a vector from the prior Γ(α, β).
pub fn sample_prior<R: Rng + ?Sized>(prior: GammaPrior, vocab_size: usize, rng: &mut R) -> RateVector {
    sample_rates(&[], 0, prior, vocab_size, Support::All, rng)
}
