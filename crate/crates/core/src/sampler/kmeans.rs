//! Greedy stencil-by-stencil initialisation with sparse k-means.

use rand::Rng;

use super::assign::compact;
use crate::corpus::RatingsCorpus;
use crate::error::Result;
use crate::model::{Hyperparameters, PacoModel, Stencil, StencilRates};
use crate::rng::Streams;

const TAG_KMEANS: u64 = 0x6BEA;
const MAX_LLOYD: usize = 100;

/// Lloyd's algorithm on sparse points of dimension `dim` (missing
/// coordinates are zero), seeded by k-means++. Returns a label per point.
/// Fewer than `k` clusters are used when the points run out of distinct
/// positions.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<(u32, f64)>], dim: usize, k: usize, rng: &mut R) -> Vec<u32> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n);
    let norms: Vec<f64> = points
        .iter()
        .map(|p| p.iter().map(|(_, v)| v * v).sum())
        .collect();
    let dist = |i: usize, c: &[f64], cn: f64| -> f64 {
        let dot: f64 = points[i].iter().map(|&(j, v)| v * c[j as usize]).sum();
        (norms[i] - 2.0 * dot + cn).max(0.0)
    };
    let densify = |i: usize| {
        let mut c = vec![0.0; dim];
        for &(j, v) in &points[i] {
            c[j as usize] = v;
        }
        c
    };

    let mut centers: Vec<Vec<f64>> = vec![densify(rng.gen_range(0..n))];
    let mut cnorms: Vec<f64> = vec![centers[0].iter().map(|v| v * v).sum()];
    let mut d2: Vec<f64> = (0..n).map(|i| dist(i, &centers[0], cnorms[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        let c = densify(pick);
        let cn = c.iter().map(|v| v * v).sum();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist(i, &c, cn));
        }
        centers.push(c);
        cnorms.push(cn);
    }

    let k = centers.len();
    let mut labels = vec![u32::MAX; n];
    for _ in 0..MAX_LLOYD {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0u32);
            for (a, c) in centers.iter().enumerate() {
                let d = dist(i, c, cnorms[a]);
                if d < best.0 {
                    best = (d, a as u32);
                }
            }
            if *label != best.1 {
                *label = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in labels.iter().enumerate() {
            counts[a as usize] += 1;
            for &(j, v) in &points[i] {
                sums[a as usize][j as usize] += v;
            }
        }
        for a in 0..k {
            if counts[a] > 0 {
                let inv = 1.0 / counts[a] as f64;
                centers[a] = sums[a].iter().map(|s| s * inv).collect();
                cnorms[a] = centers[a].iter().map(|v| v * v).sum();
            }
        }
    }
    labels
}

/// Builds the starting state: each stencil in turn clusters users and
/// items on the current residual matrix, takes per-block residual means as
/// its table and passes the remaining residual on. Every rate vector starts
/// at one.
pub fn init_kmeans(train: &RatingsCorpus, hyper: &Hyperparameters, streams: &Streams) -> Result<PacoModel> {
    let mut model = PacoModel::empty(train, hyper)?;
    let (n, m) = (train.n_users(), train.n_items());
    let k = hyper.max_clusters.min(hyper.init_clusters);
    let obs = train.observations();
    let mut residual: Vec<f64> = obs.iter().map(|o| o.rating).collect();

    for l in 0..hyper.stencils {
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); m];
        for (o, &r) in obs.iter().zip(&residual) {
            rows[o.user as usize].push((o.item, r));
            cols[o.item as usize].push((o.user, r));
        }
        let c = kmeans(&rows, m, k, &mut streams.rng(&[TAG_KMEANS, l as u64, 0]));
        let d = kmeans(&cols, n, k, &mut streams.rng(&[TAG_KMEANS, l as u64, 1]));
        let ku = c.iter().copied().max().map_or(1, |x| x as usize + 1);
        let ki = d.iter().copied().max().map_or(1, |x| x as usize + 1);
        let mut sums = vec![0.0; ku * ki];
        let mut counts = vec![0usize; ku * ki];
        for (o, &r) in obs.iter().zip(&residual) {
            let b = c[o.user as usize] as usize * ki + d[o.item as usize] as usize;
            sums[b] += r;
            counts[b] += 1;
        }
        let means = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let c = if c.is_empty() { vec![0; n] } else { c };
        let d = if d.is_empty() { vec![0; m] } else { d };
        model.stencils[l] = Stencil::new(ku, ki, means, c, d, hyper.block_variance)?;
        if l < hyper.text_stencils {
            model.rates.stencils[l] = StencilRates::constant(ku, ki, train.vocab_size(), 1.0);
        }
        compact(&mut model, l);
        let st = &model.stencils[l];
        for (o, r) in obs.iter().zip(residual.iter_mut()) {
            *r -= st.value(o.user as usize, o.item as usize);
        }
    }
    model.validate()?;
    Ok(model)
}
