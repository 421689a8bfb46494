//! Unnormalised log posterior of a training state.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::allocation::ReviewIndex;
use super::caches::review_weights;
use crate::corpus::RatingsCorpus;
use crate::model::{GammaPrior, InvGammaPrior, PacoModel, RateVector};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogJoint {
    /// Σ ln N(r | fit, σ²) over training ratings.
    pub rating: f64,
    /// Weighted Poisson log-likelihood of the observed counts under λ.
    pub text: f64,
    /// Log priors of block means, rates, partitions and variances.
    pub prior: f64,
    pub total: f64,
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn gamma_log_density(prior: GammaPrior, v: &RateVector) -> f64 {
    let (a, b) = (prior.shape, prior.rate);
    let norm = a * b.ln() - ln_gamma(a);
    let at = |x: f64| norm + (a - 1.0) * x.ln() - b * x;
    match v {
        RateVector::Dense(xs) => xs.iter().map(|&x| at(x)).sum(),
        RateVector::Sparse { len, default, entries } => {
            entries.iter().map(|&(_, x)| at(x)).sum::<f64>()
                + (*len as usize - entries.len()) as f64 * at(*default)
        }
    }
}

fn inv_gamma_log_density(prior: InvGammaPrior, v: f64) -> f64 {
    let (a, b) = (prior.shape, prior.scale);
    a * b.ln() - ln_gamma(a) - (a + 1.0) * v.ln() - b / v
}

/// Log probability of a partition under a CRP with concentration δ.
pub fn crp_log_prob(sizes: &[usize], concentration: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let k = sizes.iter().filter(|&&s| s > 0).count();
    k as f64 * concentration.ln()
        + sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| ln_gamma(s as f64))
            .sum::<f64>()
        + ln_gamma(concentration)
        - ln_gamma(concentration + n as f64)
}

/// Evaluates the training objective. Word counts enter through their
/// marginal `Poisson(n | λ_{u,m,x})`, so the value does not depend on the
/// current thinning.
pub fn log_joint(model: &PacoModel, corpus: &RatingsCorpus) -> LogJoint {
    let sigma2 = model.noise_variance;
    let index = ReviewIndex::new(corpus);
    let weights = review_weights(&index, model.hyper.text_weighting);
    let (rating, text) = corpus
        .observations()
        .par_iter()
        .zip(&weights)
        .map(|(o, &w)| {
            let (u, m) = (o.user as usize, o.item as usize);
            let e = o.rating - model.stencil_sum(u, m);
            let rating = -0.5 * (LN_2PI + sigma2.ln() + e * e / sigma2);
            let text = if w == 0.0 {
                0.0
            } else {
                let ll: f64 = o
                    .words
                    .iter()
                    .map(|&(x, n)| n as f64 * model.rate_at(u, m, x).ln() - ln_factorial(n))
                    .sum::<f64>()
                    - model.rate_total(u, m);
                w * ll
            };
            (rating, text)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));

    let h = &model.hyper;
    let mut prior = 0.0;
    for st in &model.stencils {
        let v = st.block_variance;
        prior += st
            .means
            .iter()
            .map(|t| -0.5 * (LN_2PI + v.ln() + t * t / v))
            .sum::<f64>();
        prior += crp_log_prob(&st.user_cluster_sizes(), h.concentration);
        prior += crp_log_prob(&st.item_cluster_sizes(), h.concentration);
        if h.resample_block_variance {
            prior += inv_gamma_log_density(h.block_variance_prior, v);
        }
    }
    if h.resample_noise {
        prior += inv_gamma_log_density(h.noise_prior, sigma2);
    }
    let p = h.priors;
    let r = &model.rates;
    prior += gamma_log_density(p.background, &r.background);
    prior += r.items.iter().map(|v| gamma_log_density(p.item, v)).sum::<f64>();
    for s in &r.stencils {
        prior += s.blocks.iter().map(|v| gamma_log_density(p.block, v)).sum::<f64>();
        prior += s.user_clusters.iter().map(|v| gamma_log_density(p.user_cluster, v)).sum::<f64>();
        prior += s.item_clusters.iter().map(|v| gamma_log_density(p.item_cluster, v)).sum::<f64>();
    }
    LogJoint {
        rating,
        text,
        prior,
        total: rating + text + prior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crp_of_one_entity_is_certain() {
        assert!(crp_log_prob(&[1], 0.7).abs() < 1e-12);
    }

    #[test]
    fn crp_two_entities() {
        // P(together) = 1/(1+δ), P(apart) = δ/(1+δ).
        let d: f64 = 2.0;
        assert!((crp_log_prob(&[2], d) - (1.0 / (1.0 + d)).ln()).abs() < 1e-12);
        assert!((crp_log_prob(&[1, 1], d) - (d / (1.0 + d)).ln()).abs() < 1e-12);
    }

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-12);
    }
}
