//! CRP assignment sweeps over users and items, plus cluster compaction.
//!
//! A sweep samples every entity of one side against a snapshot of the
//! stencil, in parallel, each entity on its own random stream. At most one
//! new cluster is proposed per sweep; every entity that picks it joins the
//! same cluster.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::allocation::{CountAllocation, ReviewIndex};
use super::caches::{sample_log_weights, AssignmentCaches, NewCluster, Side};
use super::gamma::sample_prior;
use crate::corpus::RatingsCorpus;
use crate::model::{PacoModel, RateVector};
use crate::rng::Streams;

pub(crate) const TAG_PROPOSAL: u64 = 0x9E3C;
pub(crate) const TAG_ASSIGN: u64 = 0xA551;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub moved: usize,
    pub opened: bool,
}

/// Draws new-cluster parameters from the priors, or `None` at the cap.
pub fn propose_cluster(
    model: &PacoModel,
    l: usize,
    side: Side,
    streams: &Streams,
    iteration: u64,
) -> Option<NewCluster> {
    let st = &model.stencils[l];
    let (k, k_other) = match side {
        Side::Users => (st.k_users, st.k_items),
        Side::Items => (st.k_items, st.k_users),
    };
    if k >= model.hyper.max_clusters {
        return None;
    }
    let mut rng = streams.rng(&[iteration, TAG_PROPOSAL, l as u64, side.tag()]);
    let normal = Normal::new(0.0, st.block_variance.sqrt()).expect("finite block variance");
    let means = (0..k_other).map(|_| normal.sample(&mut rng)).collect();
    let (blocks, own) = if l < model.text_stencils() {
        let p = model.hyper.priors;
        let w = model.vocab_size();
        let blocks = (0..k_other).map(|_| sample_prior(p.block, w, &mut rng)).collect();
        let own_prior = match side {
            Side::Users => p.user_cluster,
            Side::Items => p.item_cluster,
        };
        (blocks, Some(sample_prior(own_prior, w, &mut rng)))
    } else {
        (Vec::new(), None)
    };
    Some(NewCluster { means, blocks, own })
}

/// Samples a fresh cluster for every entity from the snapshot in `caches`.
pub fn sample_choices(caches: &AssignmentCaches, concentration: f64, streams: &Streams, iteration: u64) -> Vec<u32> {
    let l = caches.stencil as u64;
    let side = caches.side.tag();
    (0..caches.entities.len())
        .into_par_iter()
        .map(|e| {
            let w = caches.log_weights(e, concentration);
            let mut rng = streams.rng(&[iteration, TAG_ASSIGN, l, side, e as u64]);
            sample_log_weights(&w, &mut rng) as u32
        })
        .collect()
}

/// Writes the sampled choices into the model, materialising the proposed
/// cluster if anyone picked it.
pub fn apply_choices(
    model: &mut PacoModel,
    l: usize,
    side: Side,
    choices: &[u32],
    proposal: Option<NewCluster>,
) -> SweepStats {
    let st = &model.stencils[l];
    let k = match side {
        Side::Users => st.k_users,
        Side::Items => st.k_items,
    };
    let opened = choices.iter().any(|&c| c as usize == k);
    if opened {
        let nc = proposal.expect("new cluster chosen without a proposal");
        add_cluster(model, l, side, nc);
    }
    let st = &mut model.stencils[l];
    let target = match side {
        Side::Users => &mut st.user_clusters,
        Side::Items => &mut st.item_clusters,
    };
    let moved = target.iter().zip(choices).filter(|(a, b)| a != b).count();
    target.copy_from_slice(choices);
    SweepStats { moved, opened }
}

fn add_cluster(model: &mut PacoModel, l: usize, side: Side, nc: NewCluster) {
    let st = &mut model.stencils[l];
    let (ku, ki) = (st.k_users, st.k_items);
    let text = model.rates.stencils.get_mut(l);
    match side {
        Side::Users => {
            st.means.extend_from_slice(&nc.means);
            st.k_users += 1;
            if let Some(tr) = text {
                tr.blocks.extend(nc.blocks);
                tr.user_clusters.push(nc.own.expect("own model"));
            }
        }
        Side::Items => {
            let mut means = Vec::with_capacity(ku * (ki + 1));
            for a in 0..ku {
                means.extend_from_slice(&st.means[a * ki..(a + 1) * ki]);
                means.push(nc.means[a]);
            }
            st.means = means;
            st.k_items += 1;
            if let Some(tr) = text {
                let mut old = std::mem::take(&mut tr.blocks).into_iter();
                let mut fresh = nc.blocks.into_iter();
                let mut blocks: Vec<RateVector> = Vec::with_capacity(ku * (ki + 1));
                for _ in 0..ku {
                    blocks.extend(old.by_ref().take(ki));
                    blocks.push(fresh.next().expect("block per user cluster"));
                }
                tr.blocks = blocks;
                tr.item_clusters.push(nc.own.expect("own model"));
            }
        }
    }
}

/// One full sweep over `side` of stencil `l`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    index: &ReviewIndex,
    allocation: &CountAllocation,
    residuals: &[f64],
    weights: &[f64],
    streams: &Streams,
    iteration: u64,
    l: usize,
    side: Side,
) -> SweepStats {
    let proposal = propose_cluster(model, l, side, streams, iteration);
    let caches = AssignmentCaches::build(
        model,
        corpus,
        index,
        allocation,
        residuals,
        weights,
        l,
        side,
        proposal.as_ref(),
    );
    let choices = sample_choices(&caches, model.hyper.concentration, streams, iteration);
    drop(caches);
    apply_choices(model, l, side, &choices, proposal)
}

/// Removes empty clusters of stencil `l`, keeping the relative order of the
/// rest. Block means and language models go with their clusters.
pub fn compact(model: &mut PacoModel, l: usize) {
    let st = &model.stencils[l];
    let keep_u: Vec<usize> = st
        .user_cluster_sizes()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(a, _)| a)
        .collect();
    let keep_i: Vec<usize> = st
        .item_cluster_sizes()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(b, _)| b)
        .collect();
    // An empty side (no entities) still keeps one cluster.
    let keep_u = if keep_u.is_empty() { vec![0] } else { keep_u };
    let keep_i = if keep_i.is_empty() { vec![0] } else { keep_i };
    if keep_u.len() == st.k_users && keep_i.len() == st.k_items {
        return;
    }
    let relabel = |keep: &[usize], k: usize| {
        let mut map = vec![u32::MAX; k];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new as u32;
        }
        map
    };
    let map_u = relabel(&keep_u, st.k_users);
    let map_i = relabel(&keep_i, st.k_items);
    let old_ki = st.k_items;

    let st = &mut model.stencils[l];
    st.means = keep_u
        .iter()
        .flat_map(|&a| keep_i.iter().map(move |&b| (a, b)))
        .map(|(a, b)| st.means[a * old_ki + b])
        .collect();
    st.user_clusters.iter_mut().for_each(|c| *c = map_u[*c as usize]);
    st.item_clusters.iter_mut().for_each(|d| *d = map_i[*d as usize]);
    st.k_users = keep_u.len();
    st.k_items = keep_i.len();

    if let Some(tr) = model.rates.stencils.get_mut(l) {
        let mut blocks: Vec<Option<RateVector>> = std::mem::take(&mut tr.blocks).into_iter().map(Some).collect();
        tr.blocks = keep_u
            .iter()
            .flat_map(|&a| keep_i.iter().map(move |&b| a * old_ki + b))
            .map(|i| blocks[i].take().expect("block kept once"))
            .collect();
        let mut ucl: Vec<Option<RateVector>> = std::mem::take(&mut tr.user_clusters).into_iter().map(Some).collect();
        tr.user_clusters = keep_u.iter().map(|&a| ucl[a].take().expect("kept once")).collect();
        let mut icl: Vec<Option<RateVector>> = std::mem::take(&mut tr.item_clusters).into_iter().map(Some).collect();
        tr.item_clusters = keep_i.iter().map(|&b| icl[b].take().expect("kept once")).collect();
    }
}
