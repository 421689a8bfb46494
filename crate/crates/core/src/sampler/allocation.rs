//! Thinned word counts: every observed count `n_{u,m,x}` split over the
//! active Poisson components of its review.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::corpus::{Observation, RatingsCorpus};
use crate::error::{Error, Result};
use crate::model::{slot, PacoModel};
use crate::rng::Streams;

/// Per-review lookup tables derived from a training corpus.
#[derive(Debug, Clone)]
pub struct ReviewIndex {
    pub by_user: Vec<Vec<u32>>,
    pub by_item: Vec<Vec<u32>>,
    /// `1 / |n_{u,m}|₁`, or zero for a review without in-vocabulary words.
    pub length_weights: Vec<f64>,
    /// Sorted words that occur in at least one review of each item.
    pub item_support: Vec<Vec<u32>>,
}

impl ReviewIndex {
    pub fn new(corpus: &RatingsCorpus) -> Self {
        let mut by_user = vec![Vec::new(); corpus.n_users()];
        let mut by_item = vec![Vec::new(); corpus.n_items()];
        let mut item_support: Vec<Vec<u32>> = vec![Vec::new(); corpus.n_items()];
        let mut length_weights = Vec::with_capacity(corpus.len());
        for (r, o) in corpus.observations().iter().enumerate() {
            by_user[o.user as usize].push(r as u32);
            by_item[o.item as usize].push(r as u32);
            item_support[o.item as usize].extend(o.words.iter().map(|w| w.0));
            let total = o.word_total();
            length_weights.push(if total == 0 { 0.0 } else { 1.0 / total as f64 });
        }
        for s in &mut item_support {
            s.sort_unstable();
            s.dedup();
        }
        ReviewIndex {
            by_user,
            by_item,
            length_weights,
            item_support,
        }
    }
}

/// Credited counts, stored per review as a `words × slots` row-major table
/// aligned with [`Observation::words`].
///
/// Counts are keyed by *slot*, not by component identity: when a user or
/// item changes cluster, the counts of its reviews follow it to the new
/// block and cluster models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountAllocation {
    slots: usize,
    counts: Vec<Vec<u32>>,
}

impl CountAllocation {
    /// Every count credited to the background model.
    pub fn new(corpus: &RatingsCorpus, text_stencils: usize) -> Self {
        let slots = slot::count(text_stencils);
        let counts = corpus
            .observations()
            .iter()
            .map(|o| {
                let mut v = vec![0u32; o.words.len() * slots];
                for (j, &(_, n)) in o.words.iter().enumerate() {
                    v[j * slots + slot::BACKGROUND] = n;
                }
                v
            })
            .collect();
        CountAllocation { slots, counts }
    }

    pub fn from_parts(slots: usize, counts: Vec<Vec<u32>>) -> Self {
        CountAllocation { slots, counts }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn n_reviews(&self) -> usize {
        self.counts.len()
    }

    /// Row-major `words × slots` table of review `r`.
    pub fn review(&self, r: usize) -> &[u32] {
        &self.counts[r]
    }

    pub fn review_mut(&mut self, r: usize) -> &mut [u32] {
        &mut self.counts[r]
    }

    pub fn credited(&self, r: usize, word_pos: usize, slot_index: usize) -> u32 {
        self.counts[r][word_pos * self.slots + slot_index]
    }

    /// Non-zero `(word, count)` pairs credited to `slot_index` in review `r`.
    pub fn slot_counts<'a>(
        &'a self,
        obs: &'a Observation,
        r: usize,
        slot_index: usize,
    ) -> impl Iterator<Item = (u32, u32)> + 'a {
        let row = &self.counts[r];
        let slots = self.slots;
        obs.words
            .iter()
            .enumerate()
            .map(move |(j, &(x, _))| (x, row[j * slots + slot_index]))
            .filter(|&(_, n)| n > 0)
    }

    /// Checks `Σ_i n̂⁽ⁱ⁾ = n` for every review and word.
    pub fn check_conservation(&self, corpus: &RatingsCorpus) -> Result<()> {
        if self.counts.len() != corpus.len() {
            return Err(Error::Invariant(format!(
                "allocation covers {} reviews, corpus has {}",
                self.counts.len(),
                corpus.len()
            )));
        }
        for (r, (o, row)) in corpus.observations().iter().zip(&self.counts).enumerate() {
            if row.len() != o.words.len() * self.slots {
                return Err(Error::Invariant(format!("allocation row {r} has wrong shape")));
            }
            for (j, &(x, n)) in o.words.iter().enumerate() {
                let s: u64 = row[j * self.slots..(j + 1) * self.slots]
                    .iter()
                    .map(|&c| c as u64)
                    .sum();
                if s != n as u64 {
                    return Err(Error::Invariant(format!(
                        "count conservation broken at review {r}, word {x}: {s} != {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<u32>] {
        &mut self.counts
    }

    pub(crate) fn rows(&self) -> &[Vec<u32>] {
        &self.counts
    }
}

/// Splits `n` over components with the given (unnormalised) rates,
/// `Multi(rates / Σ rates, n)`, written into `out`.
pub fn split_count<R: Rng + ?Sized>(n: u32, rates: &[f64], out: &mut [u32], rng: &mut R) {
    debug_assert_eq!(rates.len(), out.len());
    out.iter_mut().for_each(|o| *o = 0);
    if n == 0 {
        return;
    }
    if rates.len() == 1 {
        out[0] = n;
        return;
    }
    let total: f64 = rates.iter().sum();
    if n == 1 {
        let mut u = rng.gen::<f64>() * total;
        for (i, &p) in rates.iter().enumerate() {
            if u < p {
                out[i] = 1;
                return;
            }
            u -= p;
        }
        out[rates.len() - 1] = 1;
        return;
    }
    let mut left = n as u64;
    let mut mass = total;
    let last = rates.len() - 1;
    for (i, &p) in rates.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            out[i] = left as u32;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[i] = k as u32;
        left -= k;
        mass -= p;
        if mass <= 0.0 {
            out[i] += left as u32;
            left = 0;
        }
    }
}

/// Thins one review against the current rates.
pub fn thin_review<R: Rng + ?Sized>(
    model: &PacoModel,
    obs: &Observation,
    row: &mut [u32],
    rng: &mut R,
) {
    let active = model.active_rates(obs.user as usize, obs.item as usize);
    let slots = active.len();
    let mut rates = vec![0.0; slots];
    for (j, &(x, n)) in obs.words.iter().enumerate() {
        for (p, r) in rates.iter_mut().zip(&active) {
            *p = r.get(x);
        }
        split_count(n, &rates, &mut row[j * slots..(j + 1) * slots], rng);
    }
}

/// Re-thins every review. Each review draws from its own stream keyed by
/// `tags` plus the review index.
pub fn thin_all(
    model: &PacoModel,
    corpus: &RatingsCorpus,
    allocation: &mut CountAllocation,
    streams: &Streams,
    tags: &[u64],
) {
    assert_eq!(allocation.slots(), slot::count(model.text_stencils()));
    allocation
        .rows_mut()
        .par_iter_mut()
        .zip(corpus.observations().par_iter())
        .enumerate()
        .for_each(|(r, (row, obs))| {
            let mut key = tags.to_vec();
            key.push(r as u64);
            let mut rng = streams.rng(&key);
            thin_review(model, obs, row, &mut rng);
        });
}
