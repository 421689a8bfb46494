//! Sufficient statistics for cluster-assignment moves.
//!
//! For a user `u` and candidate cluster `a` of text stencil ℓ the text term
//! is evaluated in condensed form
//!
//! ```text
//! Δ_{u,a} = Σ_b [ −η_{u,b} (μ̃_{a,b} + μ̃_a) + ⟨η̂_{u,b}, ln μ_{a,b}⟩ ] + ⟨η̂_u, ln μ_a⟩
//! ```
//!
//! where `μ̃` are rate totals, `η_{u,b}` the (weighted) number of the user's
//! reviews whose item sits in item cluster `b`, `η̂_{u,b}` the weighted counts
//! the user credits to block models and `η̂_u` those credited to its own
//! cluster model. Items use the same structures with the roles swapped.

use rayon::prelude::*;

use super::allocation::{CountAllocation, ReviewIndex};
use crate::corpus::RatingsCorpus;
use crate::model::{slot, PacoModel, RateVector, TextWeighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Users,
    Items,
}

impl Side {
    pub fn tag(self) -> u64 {
        match self {
            Side::Users => 0,
            Side::Items => 1,
        }
    }
}

/// Per-review text weights under a weighting scheme.
pub fn review_weights(index: &ReviewIndex, weighting: TextWeighting) -> Vec<f64> {
    match weighting {
        TextWeighting::Unit => vec![1.0; index.length_weights.len()],
        TextWeighting::ReviewLength => index.length_weights.clone(),
    }
}

/// Statistics of one entity against the clusters of the other side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityStats {
    /// Reviews per other-side cluster.
    pub n: Vec<u32>,
    /// Σ r̃ and Σ r̃² per other-side cluster.
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    /// Weighted review count η per other-side cluster.
    pub eta: Vec<f64>,
    /// η̂ of block-credited counts per other-side cluster, sorted by word.
    pub block: Vec<Vec<(u32, f64)>>,
    /// η̂ of counts credited to the entity's own cluster model.
    pub own: Vec<(u32, f64)>,
}

fn merge_sorted(mut pairs: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    pairs.sort_by_key(|p| p.0);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
    for (x, v) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += v,
            _ => out.push((x, v)),
        }
    }
    out
}

/// Log-rate tables and totals for one stencil, laid out candidate-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TextTables {
    /// `ln μ_{a,b}` as dense vectors, index `a * k_other + b`.
    pub ln_block: Vec<Vec<f64>>,
    /// `μ̃_{a,b} = Σ_x μ_{a,b,x}`.
    pub tilde_block: Vec<f64>,
    pub ln_own: Vec<Vec<f64>>,
    pub tilde_own: Vec<f64>,
}

impl TextTables {
    fn push(&mut self, blocks: &[&RateVector], own: &RateVector) {
        for b in blocks {
            self.ln_block.push(b.ln_dense());
            self.tilde_block.push(b.total());
        }
        self.ln_own.push(own.ln_dense());
        self.tilde_own.push(own.total());
    }
}

/// Parameters proposed for a cluster that does not exist yet.
#[derive(Debug, Clone, PartialEq)]
pub struct NewCluster {
    /// Block means against every other-side cluster.
    pub means: Vec<f64>,
    /// Block rate vectors against every other-side cluster (text stencils).
    pub blocks: Vec<RateVector>,
    pub own: Option<RateVector>,
}

#[derive(Debug, Clone)]
pub struct AssignmentCaches {
    pub side: Side,
    pub stencil: usize,
    /// Existing clusters on the side being sampled.
    pub k: usize,
    pub k_other: usize,
    /// Block means, candidate-major; row `k` is the new-cluster proposal.
    pub means: Vec<f64>,
    pub text: Option<TextTables>,
    pub sizes: Vec<usize>,
    pub current: Vec<u32>,
    pub entities: Vec<EntityStats>,
    pub has_new: bool,
    pub noise_variance: f64,
}

impl AssignmentCaches {
    /// Gathers every table for one side of stencil `l`. `residuals` are the
    /// backfitting residuals of stencil `l`, in review order.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        model: &PacoModel,
        corpus: &RatingsCorpus,
        index: &ReviewIndex,
        allocation: &CountAllocation,
        residuals: &[f64],
        weights: &[f64],
        l: usize,
        side: Side,
        new_cluster: Option<&NewCluster>,
    ) -> Self {
        let st = &model.stencils[l];
        let (k, k_other, current, other_of, reviews) = match side {
            Side::Users => (st.k_users, st.k_items, &st.user_clusters, &st.item_clusters, &index.by_user),
            Side::Items => (st.k_items, st.k_users, &st.item_clusters, &st.user_clusters, &index.by_item),
        };
        let cand_mean = |a: usize, b: usize| match side {
            Side::Users => st.mean(a, b),
            Side::Items => st.mean(b, a),
        };
        let mut means = Vec::with_capacity((k + 1) * k_other);
        for a in 0..k {
            means.extend((0..k_other).map(|b| cand_mean(a, b)));
        }
        if let Some(nc) = new_cluster {
            assert_eq!(nc.means.len(), k_other);
            means.extend_from_slice(&nc.means);
        }

        let text = (l < model.text_stencils()).then(|| {
            let tr = &model.rates.stencils[l];
            let mut t = TextTables {
                ln_block: Vec::new(),
                tilde_block: Vec::new(),
                ln_own: Vec::new(),
                tilde_own: Vec::new(),
            };
            for a in 0..k {
                let blocks: Vec<&RateVector> = (0..k_other)
                    .map(|b| match side {
                        Side::Users => &tr.blocks[st.block_index(a, b)],
                        Side::Items => &tr.blocks[st.block_index(b, a)],
                    })
                    .collect();
                let own = match side {
                    Side::Users => &tr.user_clusters[a],
                    Side::Items => &tr.item_clusters[a],
                };
                t.push(&blocks, own);
            }
            if let Some(nc) = new_cluster {
                let blocks: Vec<&RateVector> = nc.blocks.iter().collect();
                t.push(&blocks, nc.own.as_ref().expect("text stencil proposal needs own model"));
            }
            t
        });

        let (block_slot, own_slot) = match side {
            Side::Users => (slot::block(l), slot::user_cluster(l)),
            Side::Items => (slot::block(l), slot::item_cluster(l)),
        };
        let has_text = text.is_some();
        let obs = corpus.observations();
        let entities = reviews
            .par_iter()
            .map(|rs| {
                let mut e = EntityStats {
                    n: vec![0; k_other],
                    sum: vec![0.0; k_other],
                    sum_sq: vec![0.0; k_other],
                    eta: vec![0.0; k_other],
                    block: vec![Vec::new(); k_other],
                    own: Vec::new(),
                };
                let mut own = Vec::new();
                for &r in rs {
                    let r = r as usize;
                    let o = &obs[r];
                    let other = match side {
                        Side::Users => o.item,
                        Side::Items => o.user,
                    };
                    let b = other_of[other as usize] as usize;
                    let rt = residuals[r];
                    e.n[b] += 1;
                    e.sum[b] += rt;
                    e.sum_sq[b] += rt * rt;
                    if has_text {
                        let w = weights[r];
                        e.eta[b] += w;
                        if w > 0.0 {
                            e.block[b].extend(
                                allocation
                                    .slot_counts(o, r, block_slot)
                                    .map(|(x, c)| (x, w * c as f64)),
                            );
                            own.extend(
                                allocation
                                    .slot_counts(o, r, own_slot)
                                    .map(|(x, c)| (x, w * c as f64)),
                            );
                        }
                    }
                }
                e.block = e.block.into_iter().map(merge_sorted).collect();
                e.own = merge_sorted(own);
                e
            })
            .collect();

        let mut sizes = vec![0usize; k];
        for &c in current.iter() {
            sizes[c as usize] += 1;
        }
        AssignmentCaches {
            side,
            stencil: l,
            k,
            k_other,
            means,
            text,
            sizes,
            current: current.clone(),
            entities,
            has_new: new_cluster.is_some(),
            noise_variance: model.noise_variance,
        }
    }

    /// Candidates open to entity `e`: existing clusters plus, if proposed,
    /// the new one (index `k`).
    pub fn n_candidates(&self) -> usize {
        self.k + self.has_new as usize
    }

    #[inline]
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        self.means[a * self.k_other + b]
    }

    /// Condensed text term Δ_{e,a}; zero for stencils without text.
    pub fn delta(&self, e: usize, a: usize) -> f64 {
        let Some(t) = &self.text else { return 0.0 };
        let s = &self.entities[e];
        let mut acc = 0.0;
        for b in 0..self.k_other {
            let i = a * self.k_other + b;
            acc -= s.eta[b] * (t.tilde_block[i] + t.tilde_own[a]);
            let ln = &t.ln_block[i];
            acc += s.block[b].iter().map(|&(x, v)| v * ln[x as usize]).sum::<f64>();
        }
        let ln = &t.ln_own[a];
        acc + s.own.iter().map(|&(x, v)| v * ln[x as usize]).sum::<f64>()
    }

    /// Gaussian log-likelihood of the entity's residuals under candidate
    /// `a`, up to terms that do not depend on `a`.
    pub fn rating_term(&self, e: usize, a: usize) -> f64 {
        let s = &self.entities[e];
        let mut ss = 0.0;
        for b in 0..self.k_other {
            if s.n[b] == 0 {
                continue;
            }
            let t = self.mean(a, b);
            ss += s.sum_sq[b] - 2.0 * t * s.sum[b] + s.n[b] as f64 * t * t;
        }
        -ss / (2.0 * self.noise_variance)
    }

    /// Unnormalised log posterior over candidates for entity `e`, with
    /// `None` for candidates that are closed to it.
    pub fn log_weights(&self, e: usize, concentration: f64) -> Vec<Option<f64>> {
        let own = self.current[e] as usize;
        let singleton = self.sizes[own] == 1;
        let mut out = Vec::with_capacity(self.n_candidates());
        for a in 0..self.k {
            let n = self.sizes[a] - (a == own) as usize;
            let prior = if a == own && singleton {
                concentration
            } else {
                n as f64
            };
            out.push((prior > 0.0).then(|| prior.ln() + self.rating_term(e, a) + self.delta(e, a)));
        }
        if self.has_new {
            // A singleton's own cluster already plays the role of a new one.
            out.push((!singleton).then(|| {
                concentration.ln() + self.rating_term(e, self.k) + self.delta(e, self.k)
            }));
        }
        out
    }
}

/// Draws an index from unnormalised log weights.
pub fn sample_log_weights<R: rand::Rng + ?Sized>(weights: &[Option<f64>], rng: &mut R) -> usize {
    let max = weights
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite());
    let probs: Vec<f64> = weights
        .iter()
        .map(|w| w.map_or(0.0, |w| (w - max).exp()))
        .collect();
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            if u < p {
                return i;
            }
            u -= p;
            last = i;
        }
    }
    last
}
