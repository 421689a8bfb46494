//! Model state: hyperparameters, stencils, language models, predictions.

pub(crate) mod format;
pub mod rates;

use serde::{Deserialize, Serialize};

pub use format::{read_model, write_model, FORMAT_VERSION, MAGIC};
pub use rates::{slot, Component, LanguageModelSet, RateVector, StencilRates, RATE_FLOOR};

use crate::corpus::{IdMap, RatingsCorpus, Vocabulary};
use crate::error::{Error, Result};

/// Gamma prior with shape α and rate β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const fn new(shape: f64, rate: f64) -> Self {
        GammaPrior { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior::new(1.0, 1.0)
    }
}

/// Inverse-gamma hyperprior on a variance, with shape and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InvGammaPrior {
    fn default() -> Self {
        InvGammaPrior {
            shape: 2.0,
            scale: 1.0,
        }
    }
}

/// Per-review weight on the text log-likelihood in assignment moves and
/// the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextWeighting {
    /// Every review counts once.
    Unit,
    /// `1 / |n_{u,m}|₁`; reviews without in-vocabulary words weigh zero.
    #[default]
    ReviewLength,
}

/// Gamma priors per class of language model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguagePriors {
    pub background: GammaPrior,
    pub item: GammaPrior,
    pub block: GammaPrior,
    pub user_cluster: GammaPrior,
    pub item_cluster: GammaPrior,
}

impl LanguagePriors {
    pub fn uniform(prior: GammaPrior) -> Self {
        LanguagePriors {
            background: prior,
            item: prior,
            block: prior,
            user_cluster: prior,
            item_cluster: prior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    /// Number of stencils S.
    pub stencils: usize,
    /// The first `text_stencils` stencils carry language models (S0 ≤ S).
    pub text_stencils: usize,
    /// Cap on clusters per side of a stencil.
    pub max_clusters: usize,
    /// Clusters per side for the k-means initialisation.
    pub init_clusters: usize,
    /// CRP concentration δ.
    pub concentration: f64,
    pub priors: LanguagePriors,
    pub text_weighting: TextWeighting,
    /// Initial rating noise variance σ².
    pub noise_variance: f64,
    /// Initial block-mean prior variance σ_ℓ² of every stencil.
    pub block_variance: f64,
    pub noise_prior: InvGammaPrior,
    pub block_variance_prior: InvGammaPrior,
    pub resample_noise: bool,
    pub resample_block_variance: bool,
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            stencils: 2,
            text_stencils: 1,
            max_clusters: 32,
            init_clusters: 8,
            concentration: 1.0,
            priors: LanguagePriors::default(),
            text_weighting: TextWeighting::default(),
            noise_variance: 1.0,
            block_variance: 1.0,
            noise_prior: InvGammaPrior::default(),
            block_variance_prior: InvGammaPrior::default(),
            resample_noise: true,
            resample_block_variance: true,
            burn_in: 100,
            samples: 100,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.stencils == 0 {
            return fail("stencils must be at least 1".into());
        }
        if self.text_stencils > self.stencils {
            return fail(format!(
                "text_stencils ({}) exceeds stencils ({})",
                self.text_stencils, self.stencils
            ));
        }
        if self.max_clusters == 0 || self.init_clusters == 0 {
            return fail("cluster counts must be positive".into());
        }
        let positive = [
            ("concentration", self.concentration),
            ("noise_variance", self.noise_variance),
            ("block_variance", self.block_variance),
            ("noise_prior.shape", self.noise_prior.shape),
            ("noise_prior.scale", self.noise_prior.scale),
            ("block_variance_prior.shape", self.block_variance_prior.shape),
            ("block_variance_prior.scale", self.block_variance_prior.scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let p = &self.priors;
        for (name, g) in [
            ("background", p.background),
            ("item", p.item),
            ("block", p.block),
            ("user_cluster", p.user_cluster),
            ("item_cluster", p.item_cluster),
        ] {
            if !(g.shape.is_finite() && g.shape > 0.0 && g.rate.is_finite() && g.rate > 0.0) {
                return fail(format!("priors.{name} needs positive shape and rate"));
            }
        }
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        Ok(())
    }
}

/// One co-clustering layer: block means plus user and item assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub k_users: usize,
    pub k_items: usize,
    /// Row-major `k_users × k_items` block means.
    pub means: Vec<f64>,
    pub user_clusters: Vec<u32>,
    pub item_clusters: Vec<u32>,
    /// Prior variance σ_ℓ² of the block means.
    pub block_variance: f64,
}

impl Stencil {
    pub fn new(
        k_users: usize,
        k_items: usize,
        means: Vec<f64>,
        user_clusters: Vec<u32>,
        item_clusters: Vec<u32>,
        block_variance: f64,
    ) -> Result<Self> {
        let s = Stencil {
            k_users,
            k_items,
            means,
            user_clusters,
            item_clusters,
            block_variance,
        };
        s.validate()?;
        Ok(s)
    }

    /// A single-block stencil with mean zero.
    pub fn trivial(n_users: usize, n_items: usize, block_variance: f64) -> Self {
        Stencil {
            k_users: 1,
            k_items: 1,
            means: vec![0.0],
            user_clusters: vec![0; n_users],
            item_clusters: vec![0; n_items],
            block_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_users == 0 || self.k_items == 0 {
            return Err(Error::Invariant("stencil with zero clusters".into()));
        }
        if self.means.len() != self.k_users * self.k_items {
            return Err(Error::Invariant("block table has wrong size".into()));
        }
        if self.means.iter().any(|t| !t.is_finite()) {
            return Err(Error::Invariant("non-finite block mean".into()));
        }
        if self.user_clusters.iter().any(|&c| c as usize >= self.k_users)
            || self.item_clusters.iter().any(|&d| d as usize >= self.k_items)
        {
            return Err(Error::Invariant("cluster id out of range".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn block_index(&self, a: usize, b: usize) -> usize {
        a * self.k_items + b
    }

    #[inline]
    pub fn mean(&self, a: usize, b: usize) -> f64 {
        self.means[a * self.k_items + b]
    }

    /// `T[c_u][d_m]`.
    #[inline]
    pub fn value(&self, user: usize, item: usize) -> f64 {
        self.mean(
            self.user_clusters[user] as usize,
            self.item_clusters[item] as usize,
        )
    }

    /// `N ⌈log₂ k_n⌉ + M ⌈log₂ k_m⌉ + 32 k_n k_m`.
    pub fn size_bits(&self) -> u64 {
        fn ceil_log2(k: usize) -> u64 {
            if k <= 1 {
                0
            } else {
                (usize::BITS - (k - 1).leading_zeros()) as u64
            }
        }
        self.user_clusters.len() as u64 * ceil_log2(self.k_users)
            + self.item_clusters.len() as u64 * ceil_log2(self.k_items)
            + 32 * (self.k_users * self.k_items) as u64
    }

    pub fn user_cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_users];
        for &c in &self.user_clusters {
            sizes[c as usize] += 1;
        }
        sizes
    }

    pub fn item_cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_items];
        for &d in &self.item_clusters {
            sizes[d as usize] += 1;
        }
        sizes
    }
}

/// Complete parameter state; what gets written to a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct PacoModel {
    pub hyper: Hyperparameters,
    pub stencils: Vec<Stencil>,
    pub rates: LanguageModelSet,
    pub global_mean: f64,
    pub rating_scale: f64,
    /// Current rating noise variance σ².
    pub noise_variance: f64,
    /// Native-scale clipping range for predictions.
    pub rating_bounds: (f64, f64),
    pub users: IdMap,
    pub items: IdMap,
    pub vocabulary: Vocabulary,
}

impl PacoModel {
    /// Trivial model over a corpus: one-block stencils with zero means and
    /// every rate vector equal to one.
    pub fn empty(corpus: &RatingsCorpus, hyper: &Hyperparameters) -> Result<Self> {
        hyper.validate()?;
        let (n, m, w) = (corpus.n_users(), corpus.n_items(), corpus.vocab_size());
        let stencils = (0..hyper.stencils)
            .map(|_| Stencil::trivial(n, m, hyper.block_variance))
            .collect();
        let rates = LanguageModelSet {
            vocab_size: w,
            background: RateVector::dense(w, 1.0),
            items: vec![RateVector::sparse(w, 1.0); m],
            stencils: (0..hyper.text_stencils)
                .map(|_| StencilRates::constant(1, 1, w, 1.0))
                .collect(),
        };
        Ok(PacoModel {
            hyper: hyper.clone(),
            stencils,
            rates,
            global_mean: corpus.global_mean(),
            rating_scale: corpus.rating_scale(),
            noise_variance: hyper.noise_variance,
            rating_bounds: corpus.rating_range().unwrap_or((f64::MIN, f64::MAX)),
            users: corpus.users.clone(),
            items: corpus.items.clone(),
            vocabulary: corpus.vocabulary.clone(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.rates.vocab_size
    }

    pub fn text_stencils(&self) -> usize {
        self.rates.stencils.len()
    }

    fn check_pair(&self, user: usize, item: usize) -> Result<()> {
        if user >= self.n_users() || item >= self.n_items() {
            return Err(Error::OutOfRange(format!(
                "pair ({user}, {item}) outside {} users x {} items",
                self.n_users(),
                self.n_items()
            )));
        }
        Ok(())
    }

    /// `Σ_ℓ T^(ℓ)[c_u][d_m]` on the centred scale, unclipped.
    #[inline]
    pub fn stencil_sum(&self, user: usize, item: usize) -> f64 {
        self.stencils.iter().map(|s| s.value(user, item)).sum()
    }

    /// Predicted rating on the native scale, clipped into `rating_bounds`.
    pub fn predict_rating(&self, user: usize, item: usize) -> Result<f64> {
        self.check_pair(user, item)?;
        Ok(self.predict_unchecked(user, item))
    }

    pub(crate) fn predict_unchecked(&self, user: usize, item: usize) -> f64 {
        let raw = self.global_mean + self.stencil_sum(user, item) / self.rating_scale;
        raw.clamp(self.rating_bounds.0, self.rating_bounds.1)
    }

    /// Active rate vectors of review `(user, item)` in slot order.
    pub fn active_rates(&self, user: usize, item: usize) -> Vec<&RateVector> {
        let mut out = Vec::with_capacity(slot::count(self.text_stencils()));
        out.push(&self.rates.background);
        out.push(&self.rates.items[item]);
        for (s, st) in self.rates.stencils.iter().zip(&self.stencils) {
            let a = st.user_clusters[user] as usize;
            let b = st.item_clusters[item] as usize;
            out.push(&s.blocks[st.block_index(a, b)]);
            out.push(&s.item_clusters[b]);
            out.push(&s.user_clusters[a]);
        }
        out
    }

    /// Component occupying `slot_index` for review `(user, item)`.
    pub fn component(&self, slot_index: usize, user: usize, item: usize) -> Component {
        match slot_index {
            slot::BACKGROUND => Component::Background,
            slot::ITEM => Component::Item(item as u32),
            s => {
                let l = (s - 2) / 3;
                let st = &self.stencils[l];
                let a = st.user_clusters[user];
                let b = st.item_clusters[item];
                match (s - 2) % 3 {
                    0 => Component::Block {
                        stencil: l as u32,
                        user_cluster: a,
                        item_cluster: b,
                    },
                    1 => Component::ItemCluster {
                        stencil: l as u32,
                        cluster: b,
                    },
                    _ => Component::UserCluster {
                        stencil: l as u32,
                        cluster: a,
                    },
                }
            }
        }
    }

    /// `λ_{u,m}`: sum of the active components' rates.
    pub fn rate_vector(&self, user: usize, item: usize) -> Result<Vec<f64>> {
        self.check_pair(user, item)?;
        let mut acc = vec![0.0; self.vocab_size()];
        for r in self.active_rates(user, item) {
            r.add_into(&mut acc);
        }
        Ok(acc)
    }

    /// `λ_{u,m,x}` for a single word.
    #[inline]
    pub fn rate_at(&self, user: usize, item: usize, word: u32) -> f64 {
        let mut acc = self.rates.background.get(word) + self.rates.items[item].get(word);
        for (s, st) in self.rates.stencils.iter().zip(&self.stencils) {
            let a = st.user_clusters[user] as usize;
            let b = st.item_clusters[item] as usize;
            acc += s.blocks[st.block_index(a, b)].get(word);
            acc += s.item_clusters[b].get(word);
            acc += s.user_clusters[a].get(word);
        }
        acc
    }

    /// `Σ_x λ_{u,m,x}`.
    pub fn rate_total(&self, user: usize, item: usize) -> f64 {
        self.active_rates(user, item).iter().map(|r| r.total()).sum()
    }

    /// Rating-model size in bits, summed over stencils. Language models are
    /// not counted.
    pub fn model_size_bits(&self) -> u64 {
        self.stencils.iter().map(Stencil::size_bits).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stencils.len() != self.hyper.stencils {
            return Err(Error::Invariant("stencil count does not match S".into()));
        }
        if self.rates.stencils.len() != self.hyper.text_stencils {
            return Err(Error::Invariant("text stencil count does not match S0".into()));
        }
        let (n, m, w) = (self.n_users(), self.n_items(), self.vocab_size());
        if self.vocabulary.len() != w || self.rates.items.len() != m {
            return Err(Error::Invariant("language model dimensions mismatch".into()));
        }
        for st in &self.stencils {
            st.validate()?;
            if st.user_clusters.len() != n || st.item_clusters.len() != m {
                return Err(Error::Invariant("assignment vector length mismatch".into()));
            }
        }
        for (tr, st) in self.rates.stencils.iter().zip(&self.stencils) {
            if tr.blocks.len() != st.k_users * st.k_items
                || tr.user_clusters.len() != st.k_users
                || tr.item_clusters.len() != st.k_items
            {
                return Err(Error::Invariant("stencil language models out of sync".into()));
            }
        }
        let all = std::iter::once(&self.rates.background)
            .chain(&self.rates.items)
            .chain(self.rates.stencils.iter().flat_map(|s| {
                s.blocks.iter().chain(&s.user_clusters).chain(&s.item_clusters)
            }));
        for r in all {
            if r.len() != w {
                return Err(Error::Invariant("rate vector length mismatch".into()));
            }
            if r.min_rate() < RATE_FLOOR {
                return Err(Error::Invariant("rate below floor".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{vectorize, RawObservation};
    use proptest::prelude::*;

    fn toy_corpus(n: usize, m: usize, w: usize) -> RatingsCorpus {
        let mut raw = Vec::new();
        for u in 0..n {
            for i in 0..m {
                raw.push(RawObservation {
                    user: format!("u{u}"),
                    item: format!("i{i}"),
                    rating: 1.0 + ((u + i) % 5) as f64,
                    text: String::new(),
                });
            }
        }
        let vocab = Vocabulary::from_words((0..w).map(|x| format!("w{x}")).collect());
        vectorize(&raw, &vocab).unwrap()
    }

    fn hyper(s: usize, s0: usize) -> Hyperparameters {
        Hyperparameters {
            stencils: s,
            text_stencils: s0,
            ..Default::default()
        }
    }

    #[test]
    fn prediction_adds_block_means_and_clips() {
        let c = toy_corpus(2, 2, 1);
        let mut m = PacoModel::empty(&c, &hyper(1, 0)).unwrap();
        m.global_mean = 3.0;
        m.rating_bounds = (1.0, 5.0);
        m.stencils[0].means[0] = 2.0;
        assert_eq!(m.predict_rating(0, 0).unwrap(), 5.0);
        m.stencils[0].means[0] = 0.5;
        assert_eq!(m.predict_rating(1, 1).unwrap(), 3.5);
        m.stencils[0].means[0] = 4.2;
        assert_eq!(m.predict_rating(1, 1).unwrap(), 5.0);
    }

    #[test]
    fn zero_tables_predict_global_mean() {
        let c = toy_corpus(3, 2, 1);
        let mut m = PacoModel::empty(&c, &hyper(3, 0)).unwrap();
        m.global_mean = 2.5;
        assert_eq!(m.predict_rating(2, 1).unwrap(), 2.5);
    }

    #[test]
    fn out_of_range_pair_is_an_error() {
        let c = toy_corpus(2, 2, 1);
        let m = PacoModel::empty(&c, &hyper(1, 1)).unwrap();
        assert!(matches!(m.predict_rating(2, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(m.rate_vector(0, 5), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn rate_vector_sums_components() {
        let c = toy_corpus(1, 1, 2);
        let mut m = PacoModel::empty(&c, &hyper(1, 1)).unwrap();
        m.rates.background = RateVector::Dense(vec![1.0, 1.0]);
        m.rates.items[0] = RateVector::Dense(vec![RATE_FLOOR, 2.0]);
        let s = &mut m.rates.stencils[0];
        s.blocks[0] = RateVector::Dense(vec![1.0, RATE_FLOOR]);
        s.user_clusters[0] = RateVector::dense(2, 0.0);
        s.item_clusters[0] = RateVector::dense(2, 0.0);
        let lambda = m.rate_vector(0, 0).unwrap();
        assert!((lambda[0] - 2.0).abs() < 1e-11);
        assert!((lambda[1] - 3.0).abs() < 1e-11);
    }

    #[test]
    fn floor_rates_add_up() {
        let c = toy_corpus(1, 1, 3);
        let mut m = PacoModel::empty(&c, &hyper(1, 1)).unwrap();
        m.rates.background = RateVector::dense(3, 0.0);
        m.rates.items[0] = RateVector::sparse(3, 0.0);
        let s = &mut m.rates.stencils[0];
        s.blocks[0] = RateVector::dense(3, 0.0);
        s.user_clusters[0] = RateVector::dense(3, 0.0);
        s.item_clusters[0] = RateVector::dense(3, 0.0);
        for r in m.rate_vector(0, 0).unwrap() {
            assert_eq!(r, 5.0 * RATE_FLOOR);
        }
    }

    #[test]
    fn no_text_stencils_is_background_plus_item() {
        let c = toy_corpus(1, 1, 2);
        let mut m = PacoModel::empty(&c, &hyper(2, 0)).unwrap();
        m.rates.background = RateVector::Dense(vec![0.5, 1.5]);
        m.rates.items[0] = RateVector::Dense(vec![2.0, 0.25]);
        assert_eq!(m.rate_vector(0, 0).unwrap(), vec![2.5, 1.75]);
    }

    #[test]
    fn bits_fixture() {
        let s = Stencil::new(
            4,
            4,
            vec![0.0; 16],
            (0..1000).map(|u| (u % 4) as u32).collect(),
            (0..500).map(|m| (m % 4) as u32).collect(),
            1.0,
        )
        .unwrap();
        assert_eq!(s.size_bits(), 3512);
        assert_eq!(Stencil::trivial(1000, 500, 1.0).size_bits(), 32);
    }

    #[test]
    fn bits_round_log_up() {
        let s = Stencil::new(3, 5, vec![0.0; 15], vec![0, 1, 2], vec![4; 7], 1.0).unwrap();
        assert_eq!(s.size_bits(), 3 * 2 + 7 * 3 + 32 * 15);
    }

    #[test]
    fn two_identical_stencils_double_the_bits() {
        let c = toy_corpus(10, 6, 1);
        let mut m = PacoModel::empty(&c, &hyper(1, 0)).unwrap();
        m.stencils[0] = Stencil::new(
            2,
            3,
            vec![0.0; 6],
            [0, 1].repeat(5),
            vec![0, 1, 2, 0, 1, 2],
            1.0,
        )
        .unwrap();
        let one = m.model_size_bits();
        m.stencils.push(m.stencils[0].clone());
        assert_eq!(m.model_size_bits(), 2 * one);
    }

    #[test]
    fn fresh_model_is_valid() {
        let c = toy_corpus(3, 3, 4);
        PacoModel::empty(&c, &hyper(2, 2)).unwrap().validate().unwrap();
    }

    #[test]
    fn hyper_validation() {
        assert!(hyper(1, 2).validate().is_err());
        let bad = Hyperparameters {
            concentration: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(Hyperparameters::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn rate_is_sum_of_components(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c = toy_corpus(2, 2, 4);
            let mut m = PacoModel::empty(&c, &hyper(2, 2)).unwrap();
            let mut fill = |r: &mut RateVector| {
                *r = RateVector::Dense((0..4).map(|_| rng.gen_range(0.01..3.0)).collect());
            };
            fill(&mut m.rates.background);
            m.rates.items.iter_mut().for_each(&mut fill);
            for s in &mut m.rates.stencils {
                s.blocks
                    .iter_mut()
                    .chain(&mut s.user_clusters)
                    .chain(&mut s.item_clusters)
                    .for_each(&mut fill);
            }
            let lambda = m.rate_vector(1, 0).unwrap();
            for x in 0..4u32 {
                let mut acc = 0.0;
                for r in m.active_rates(1, 0) {
                    acc += r.get(x);
                }
                prop_assert_eq!(lambda[x as usize], acc);
                prop_assert_eq!(m.rate_at(1, 0, x), acc);
            }
        }

        #[test]
        fn bits_invariant_under_label_permutation(
            assign in prop::collection::vec(0u32..4, 12),
            shift in 1u32..4,
        ) {
            let a = Stencil::new(4, 2, vec![0.0; 8], assign.clone(), vec![0, 1, 1], 1.0).unwrap();
            let permuted: Vec<u32> = assign.iter().map(|c| (c + shift) % 4).collect();
            let b = Stencil::new(4, 2, vec![0.0; 8], permuted, vec![1, 0, 0], 1.0).unwrap();
            prop_assert_eq!(a.size_bits(), b.size_bits());
        }

        #[test]
        fn editing_one_block_shifts_prediction_exactly(delta in -3.0f64..3.0) {
            let c = toy_corpus(4, 4, 1);
            let mut m = PacoModel::empty(&c, &hyper(2, 0)).unwrap();
            m.stencils[0] = Stencil::new(
                2, 2, vec![0.3, -0.7, 1.1, 0.2], vec![0, 1, 0, 1], vec![1, 1, 0, 0], 1.0,
            ).unwrap();
            m.stencils[1].means[0] = 0.45;
            let before = m.stencil_sum(2, 1);
            let old = m.stencils[0].mean(0, 1);
            m.stencils[0].means[1] += delta;
            let after = m.stencil_sum(2, 1);
            prop_assert!((after - before - (m.stencils[0].mean(0, 1) - old)).abs() < 1e-12);
        }
    }
}
