//! Gaussian side of the sampler: residuals, block means, variances.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::corpus::RatingsCorpus;
use crate::error::{Error, Result};
use crate::model::{InvGammaPrior, PacoModel, Stencil};
use crate::rng::Streams;

pub(crate) const TAG_MEANS: u64 = 0x3EA5;
pub(crate) const TAG_NOISE: u64 = 0x4015E;
pub(crate) const TAG_BLOCK_VAR: u64 = 0xB7A2;

/// Running fit `Σ_ℓ T^(ℓ)[c_u][d_m]` per review, and the backfitting
/// residual of the stencil being updated.
#[derive(Debug, Clone)]
pub struct ResidualRatings {
    fit: Vec<f64>,
    /// `Σ_{ℓ' ≠ ℓ}` part of the fit while stencil ℓ is open.
    others: Vec<f64>,
    residual: Vec<f64>,
    open: Option<usize>,
}

impl ResidualRatings {
    pub fn new(model: &PacoModel, corpus: &RatingsCorpus) -> Self {
        ResidualRatings {
            fit: full_fit(model, corpus),
            others: Vec::new(),
            residual: Vec::new(),
            open: None,
        }
    }

    pub fn fit(&self) -> &[f64] {
        &self.fit
    }

    /// Residuals `r̃ = r − Σ_{ℓ'≠ℓ} T^(ℓ')` of the open stencil.
    pub fn residuals(&self) -> &[f64] {
        &self.residual
    }

    pub fn open_stencil(&self) -> Option<usize> {
        self.open
    }

    pub fn begin(&mut self, model: &PacoModel, corpus: &RatingsCorpus, l: usize) {
        let st = &model.stencils[l];
        self.others = corpus
            .observations()
            .iter()
            .zip(&self.fit)
            .map(|(o, f)| f - st.value(o.user as usize, o.item as usize))
            .collect();
        self.residual = corpus
            .observations()
            .iter()
            .zip(&self.others)
            .map(|(o, x)| o.rating - x)
            .collect();
        self.open = Some(l);
    }

    /// Closes the open stencil, folding its current values into the fit.
    pub fn end(&mut self, model: &PacoModel, corpus: &RatingsCorpus) {
        let l = self.open.take().expect("no stencil open");
        let st = &model.stencils[l];
        for ((f, x), o) in self.fit.iter_mut().zip(&self.others).zip(corpus.observations()) {
            *f = x + st.value(o.user as usize, o.item as usize);
        }
        self.others.clear();
        self.residual.clear();
    }

    /// Compares the maintained fit, or the open stencil's residuals, with a
    /// fresh recomputation.
    pub fn check(&self, model: &PacoModel, corpus: &RatingsCorpus, tol: f64) -> Result<()> {
        // While a stencil is open its table may differ from the fit.
        if self.open.is_none() {
            let fresh = full_fit(model, corpus);
            for (r, (a, b)) in self.fit.iter().zip(&fresh).enumerate() {
                if (a - b).abs() > tol {
                    return Err(Error::Invariant(format!(
                        "residual drift at review {r}: {a} vs {b}"
                    )));
                }
            }
        }
        if let Some(l) = self.open {
            let fresh = stencil_residuals(model, corpus, l);
            for (r, (a, b)) in self.residual.iter().zip(&fresh).enumerate() {
                if (a - b).abs() > tol {
                    return Err(Error::Invariant(format!(
                        "stencil {l} residual drift at review {r}: {a} vs {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn refresh(&mut self, model: &PacoModel, corpus: &RatingsCorpus) {
        debug_assert!(self.open.is_none());
        self.fit = full_fit(model, corpus);
    }
}

pub fn full_fit(model: &PacoModel, corpus: &RatingsCorpus) -> Vec<f64> {
    corpus
        .observations()
        .iter()
        .map(|o| model.stencil_sum(o.user as usize, o.item as usize))
        .collect()
}

/// `r − Σ_{ℓ'≠ℓ} T^(ℓ')` computed from scratch.
pub fn stencil_residuals(model: &PacoModel, corpus: &RatingsCorpus, l: usize) -> Vec<f64> {
    corpus
        .observations()
        .iter()
        .map(|o| {
            let (u, m) = (o.user as usize, o.item as usize);
            let others: f64 = model
                .stencils
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != l)
                .map(|(_, s)| s.value(u, m))
                .sum();
            o.rating - others
        })
        .collect()
}

/// Per-block observation counts and residual sums, in review order.
pub fn block_sums(st: &Stencil, corpus: &RatingsCorpus, residuals: &[f64]) -> (Vec<u64>, Vec<f64>) {
    let mut n = vec![0u64; st.k_users * st.k_items];
    let mut s = vec![0.0; st.k_users * st.k_items];
    for (o, r) in corpus.observations().iter().zip(residuals) {
        let k = st.block_index(
            st.user_clusters[o.user as usize] as usize,
            st.item_clusters[o.item as usize] as usize,
        );
        n[k] += 1;
        s[k] += r;
    }
    (n, s)
}

/// Normal posterior of one block mean: prior N(0, σ_ℓ²), `n` residuals
/// summing to `sum`, noise σ². Returns `(mean, variance)`.
pub fn block_posterior(n: u64, sum: f64, noise_variance: f64, block_variance: f64) -> (f64, f64) {
    let v = 1.0 / (1.0 / block_variance + n as f64 / noise_variance);
    (v * sum / noise_variance, v)
}

/// Redraws every block mean of stencil `l` from its Normal posterior over
/// the backfitting residuals. Empty blocks draw from the prior.
pub fn update_block_means(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    l: usize,
    residuals: &[f64],
    streams: &Streams,
    iteration: u64,
) {
    let sigma2 = model.noise_variance;
    let st = &mut model.stencils[l];
    let (n, s) = block_sums(st, corpus, residuals);
    for k in 0..st.means.len() {
        let (mean, var) = block_posterior(n[k], s[k], sigma2, st.block_variance);
        let mut rng = streams.rng(&[iteration, TAG_MEANS, l as u64, k as u64]);
        st.means[k] = Normal::new(mean, var.sqrt()).expect("finite normal").sample(&mut rng);
    }
}

/// Draws a variance from the inverse-gamma posterior given `n` zero-mean
/// deviations with squared sum `sum_sq`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(
    prior: InvGammaPrior,
    n: usize,
    sum_sq: f64,
    rng: &mut R,
) -> f64 {
    let shape = prior.shape + n as f64 / 2.0;
    let scale = prior.scale + sum_sq / 2.0;
    let precision = Gamma::new(shape, 1.0 / scale)
        .expect("positive gamma parameters")
        .sample(rng);
    1.0 / precision
}

/// σ² given the residuals of the full model.
pub fn sample_noise_variance(
    model: &mut PacoModel,
    corpus: &RatingsCorpus,
    fit: &[f64],
    streams: &Streams,
    iteration: u64,
) {
    let sum_sq: f64 = corpus
        .observations()
        .iter()
        .zip(fit)
        .map(|(o, f)| (o.rating - f).powi(2))
        .sum();
    let mut rng = streams.rng(&[iteration, TAG_NOISE]);
    model.noise_variance =
        sample_inverse_gamma(model.hyper.noise_prior, corpus.len(), sum_sq, &mut rng);
}

/// σ_ℓ² of every stencil given its block means.
pub fn sample_block_variances(model: &mut PacoModel, streams: &Streams, iteration: u64) {
    let prior = model.hyper.block_variance_prior;
    for (l, st) in model.stencils.iter_mut().enumerate() {
        let sum_sq: f64 = st.means.iter().map(|t| t * t).sum();
        let mut rng = streams.rng(&[iteration, TAG_BLOCK_VAR, l as u64]);
        st.block_variance = sample_inverse_gamma(prior, st.means.len(), sum_sq, &mut rng);
    }
}
