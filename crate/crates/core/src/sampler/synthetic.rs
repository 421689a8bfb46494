//! Synthetic corpora drawn from the generative model.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::gamma::sample_prior;
use crate::corpus::{IdMap, Observation, RatingsCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{LanguageModelSet, LanguagePriors, RateVector, Stencil, StencilRates};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub vocab_size: usize,
    /// Fraction of cells observed, in (0, 1].
    pub density: f64,
    pub stencils: usize,
    pub text_stencils: usize,
    /// CRP concentration for both sides of every stencil.
    pub concentration: f64,
    pub max_clusters: usize,
    /// Standard deviation of rating noise.
    pub noise_sd: f64,
    /// Standard deviation of block means.
    pub block_sd: f64,
    pub priors: LanguagePriors,
    pub global_mean: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 200,
            n_items: 100,
            vocab_size: 50,
            density: 0.15,
            stencils: 2,
            text_stencils: 1,
            concentration: 0.5,
            max_clusters: 32,
            noise_sd: 0.5,
            block_sd: 1.0,
            priors: LanguagePriors::default(),
            global_mean: 0.0,
        }
    }
}

/// Ground truth behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub stencils: Vec<Stencil>,
    pub rates: LanguageModelSet,
    pub global_mean: f64,
    pub noise_sd: f64,
}

impl Truth {
    /// Noise-free rating of a cell.
    pub fn mean_rating(&self, user: usize, item: usize) -> f64 {
        self.global_mean + self.stencils.iter().map(|s| s.value(user, item)).sum::<f64>()
    }

    /// `λ_{u,m}` in the fixed summation order.
    pub fn rate_vector(&self, user: usize, item: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.rates.vocab_size];
        self.rates.background.add_into(&mut acc);
        self.rates.items[item].add_into(&mut acc);
        for (tr, st) in self.rates.stencils.iter().zip(&self.stencils) {
            let a = st.user_clusters[user] as usize;
            let b = st.item_clusters[item] as usize;
            tr.blocks[st.block_index(a, b)].add_into(&mut acc);
            tr.item_clusters[b].add_into(&mut acc);
            tr.user_clusters[a].add_into(&mut acc);
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Uncentred corpus with `rating == raw`.
    pub corpus: RatingsCorpus,
    pub truth: Truth,
}

/// Sequential CRP draw, capped at `max_clusters` tables.
pub fn sample_crp<R: Rng + ?Sized>(n: usize, concentration: f64, max_clusters: usize, rng: &mut R) -> Vec<u32> {
    let mut sizes: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let open = sizes.len() < max_clusters;
        let total = i as f64 + if open { concentration } else { 0.0 };
        let mut u = rng.gen::<f64>() * total;
        let mut pick = None;
        for (a, &s) in sizes.iter().enumerate() {
            if u < s as f64 {
                pick = Some(a);
                break;
            }
            u -= s as f64;
        }
        let a = match pick {
            Some(a) => a,
            None if open => {
                sizes.push(0);
                sizes.len() - 1
            }
            None => sizes.len() - 1,
        };
        sizes[a] += 1;
        out.push(a as u32);
    }
    out
}

/// Draws assignments, block means and rate vectors from the priors.
pub fn sample_truth<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Truth> {
    if spec.text_stencils > spec.stencils {
        return Err(Error::Config("text_stencils exceeds stencils".into()));
    }
    let w = spec.vocab_size;
    let normal = Normal::new(0.0, spec.block_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut stencils = Vec::with_capacity(spec.stencils);
    let mut text = Vec::with_capacity(spec.text_stencils);
    for l in 0..spec.stencils {
        let c = sample_crp(spec.n_users, spec.concentration, spec.max_clusters, rng);
        let d = sample_crp(spec.n_items, spec.concentration, spec.max_clusters, rng);
        let ku = c.iter().max().map_or(1, |&x| x as usize + 1);
        let ki = d.iter().max().map_or(1, |&x| x as usize + 1);
        let means = (0..ku * ki).map(|_| normal.sample(rng)).collect();
        stencils.push(Stencil::new(ku, ki, means, c, d, spec.block_sd * spec.block_sd)?);
        if l < spec.text_stencils {
            let p = spec.priors;
            text.push(StencilRates {
                blocks: (0..ku * ki).map(|_| sample_prior(p.block, w, rng)).collect(),
                user_clusters: (0..ku).map(|_| sample_prior(p.user_cluster, w, rng)).collect(),
                item_clusters: (0..ki).map(|_| sample_prior(p.item_cluster, w, rng)).collect(),
            });
        }
    }
    let rates = LanguageModelSet {
        vocab_size: w,
        background: sample_prior(spec.priors.background, w, rng),
        items: (0..spec.n_items).map(|_| sample_prior(spec.priors.item, w, rng)).collect(),
        stencils: text,
    };
    Ok(Truth {
        stencils,
        rates,
        global_mean: spec.global_mean,
        noise_sd: spec.noise_sd,
    })
}

/// Emits `round(density · N · M)` distinct cells, uniformly at random, with
/// Gaussian ratings and Poisson word counts.
pub fn sample_corpus<R: Rng + ?Sized>(truth: &Truth, n_users: usize, n_items: usize, density: f64, rng: &mut R) -> Result<RatingsCorpus> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("density must lie in (0, 1], got {density}")));
    }
    let cells = n_users * n_items;
    let count = ((density * cells as f64).round() as usize).min(cells);
    let mut picked = sample_indices(rng, cells, count).into_vec();
    picked.sort_unstable();
    let noise = Normal::new(0.0, truth.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut obs = Vec::with_capacity(count);
    for cell in picked {
        let (u, m) = (cell / n_items, cell % n_items);
        let rating = truth.mean_rating(u, m) + noise.sample(rng);
        let lambda = truth.rate_vector(u, m);
        let mut words = Vec::new();
        for (x, &l) in lambda.iter().enumerate() {
            let n = if l > 0.0 {
                Poisson::new(l).expect("positive rate").sample(rng) as u32
            } else {
                0
            };
            if n > 0 {
                words.push((x as u32, n));
            }
        }
        obs.push(Observation {
            user: u as u32,
            item: m as u32,
            raw: rating,
            rating,
            words,
        });
    }
    let users = IdMap::from((0..n_users).map(|u| format!("u{u}")).collect::<Vec<_>>());
    let items = IdMap::from((0..n_items).map(|m| format!("i{m}")).collect::<Vec<_>>());
    let vocab = Vocabulary::from_words((0..truth.rates.vocab_size).map(|x| format!("w{x:04}")).collect());
    RatingsCorpus::new(users, items, vocab, obs)
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic> {
    let mut rng = Streams::new(seed).rng(&[0x5E7]);
    let truth = sample_truth(spec, &mut rng)?;
    let corpus = sample_corpus(&truth, spec.n_users, spec.n_items, spec.density, &mut rng)?;
    Ok(Synthetic { corpus, truth })
}

/// Replaces every rate vector with a dense copy (handy when editing a truth).
pub fn densify(v: &RateVector) -> RateVector {
    RateVector::Dense(v.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn no_stencils_no_noise_gives_global_mean() {
        let spec = SyntheticSpec {
            n_users: 4,
            n_items: 3,
            vocab_size: 2,
            density: 1.0,
            stencils: 0,
            text_stencils: 0,
            noise_sd: 1e-300,
            ..Default::default()
        };
        let s = generate_synthetic(&spec, 1).unwrap();
        assert_eq!(s.corpus.len(), 12);
        assert!(s.corpus.observations().iter().all(|o| o.raw.abs() < 1e-200));
    }

    #[test]
    fn tiny_concentration_gives_one_cluster() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c = sample_crp(500, 1e-12, 32, &mut rng);
        assert!(c.iter().all(|&x| x == 0));
    }

    #[test]
    fn crp_respects_cap() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let c = sample_crp(500, 50.0, 4, &mut rng);
        assert!(c.iter().all(|&x| x < 4));
    }

    #[test]
    fn word_count_matches_rate_total() {
        let spec = SyntheticSpec {
            n_users: 100,
            n_items: 100,
            vocab_size: 5,
            density: 1.0,
            stencils: 1,
            text_stencils: 1,
            ..Default::default()
        };
        let s = generate_synthetic(&spec, 3).unwrap();
        let (mut observed, mut expected) = (0.0, 0.0);
        for o in s.corpus.observations() {
            observed += o.word_total() as f64;
            expected += s.truth.rate_vector(o.user as usize, o.item as usize).iter().sum::<f64>();
        }
        // Sum of independent Poissons: variance equals the mean.
        assert!((observed - expected).abs() < 3.0 * expected.sqrt(), "{observed} vs {expected}");
    }
}
