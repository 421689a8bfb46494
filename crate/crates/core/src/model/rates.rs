//! Poisson rate vectors and the set of language models of a model.

use serde::{Deserialize, Serialize};

/// Lower bound on every stored Poisson rate, so `ln(rate)` stays finite.
pub const RATE_FLOOR: f64 = 1e-12;

/// A vector of per-word Poisson rates.
///
/// `Sparse` stores explicit rates for a subset of words and one shared
/// value for every other word; it backs the per-item models whose support
/// is a handful of words out of the whole vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateVector {
    Dense(Vec<f64>),
    Sparse {
        len: u32,
        default: f64,
        /// Sorted by word index, no duplicates.
        entries: Vec<(u32, f64)>,
    },
}

impl RateVector {
    pub fn dense(len: usize, value: f64) -> Self {
        RateVector::Dense(vec![value.max(RATE_FLOOR); len])
    }

    pub fn sparse(len: usize, default: f64) -> Self {
        RateVector::Sparse {
            len: len as u32,
            default: default.max(RATE_FLOOR),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RateVector::Dense(v) => v.len(),
            RateVector::Sparse { len, .. } => *len as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, word: u32) -> f64 {
        match self {
            RateVector::Dense(v) => v[word as usize],
            RateVector::Sparse {
                default, entries, ..
            } => match entries.binary_search_by_key(&word, |e| e.0) {
                Ok(i) => entries[i].1,
                Err(_) => *default,
            },
        }
    }

    /// `Σ_x rate[x]`, summed in word order.
    pub fn total(&self) -> f64 {
        match self {
            RateVector::Dense(v) => v.iter().sum(),
            RateVector::Sparse {
                len,
                default,
                entries,
            } => {
                let implicit = (*len as usize - entries.len()) as f64 * default;
                entries.iter().map(|e| e.1).sum::<f64>() + implicit
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            RateVector::Dense(v) => v.clone(),
            RateVector::Sparse {
                len,
                default,
                entries,
            } => {
                let mut v = vec![*default; *len as usize];
                for &(x, r) in entries {
                    v[x as usize] = r;
                }
                v
            }
        }
    }

    /// `acc[x] += rate[x]` for every word.
    pub fn add_into(&self, acc: &mut [f64]) {
        match self {
            RateVector::Dense(v) => acc.iter_mut().zip(v).for_each(|(a, r)| *a += r),
            RateVector::Sparse {
                default, entries, ..
            } => {
                let mut next = entries.iter().peekable();
                for (x, a) in acc.iter_mut().enumerate() {
                    match next.peek() {
                        Some(&&(w, r)) if w as usize == x => {
                            *a += r;
                            next.next();
                        }
                        _ => *a += default,
                    }
                }
            }
        }
    }

    /// `ln(rate)` for every word.
    pub fn ln_dense(&self) -> Vec<f64> {
        self.to_dense().into_iter().map(f64::ln).collect()
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            RateVector::Dense(v) => v.iter_mut().for_each(|r| *r = (*r * factor).max(RATE_FLOOR)),
            RateVector::Sparse {
                default, entries, ..
            } => {
                *default = (*default * factor).max(RATE_FLOOR);
                entries
                    .iter_mut()
                    .for_each(|e| e.1 = (e.1 * factor).max(RATE_FLOOR));
            }
        }
    }

    pub fn min_rate(&self) -> f64 {
        match self {
            RateVector::Dense(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            RateVector::Sparse {
                default, entries, ..
            } => entries.iter().map(|e| e.1).fold(*default, f64::min),
        }
    }
}

/// Language models attached to one text stencil. Block models are stored
/// row-major over `(user cluster, item cluster)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilRates {
    pub blocks: Vec<RateVector>,
    pub user_clusters: Vec<RateVector>,
    pub item_clusters: Vec<RateVector>,
}

impl StencilRates {
    pub fn constant(k_users: usize, k_items: usize, vocab: usize, value: f64) -> Self {
        StencilRates {
            blocks: vec![RateVector::dense(vocab, value); k_users * k_items],
            user_clusters: vec![RateVector::dense(vocab, value); k_users],
            item_clusters: vec![RateVector::dense(vocab, value); k_items],
        }
    }
}

/// All Poisson language models: background, per item, and per text stencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageModelSet {
    pub vocab_size: usize,
    pub background: RateVector,
    pub items: Vec<RateVector>,
    pub stencils: Vec<StencilRates>,
}

/// Slot layout of the active components of a review. The same order is
/// used to sum rates, so λ is reproducible bit for bit.
pub mod slot {
    pub const BACKGROUND: usize = 0;
    pub const ITEM: usize = 1;

    pub const fn count(text_stencils: usize) -> usize {
        2 + 3 * text_stencils
    }
    pub const fn block(stencil: usize) -> usize {
        2 + 3 * stencil
    }
    pub const fn item_cluster(stencil: usize) -> usize {
        3 + 3 * stencil
    }
    pub const fn user_cluster(stencil: usize) -> usize {
        4 + 3 * stencil
    }
}

/// Identity of one Poisson component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Background,
    Item(u32),
    Block { stencil: u32, user_cluster: u32, item_cluster: u32 },
    ItemCluster { stencil: u32, cluster: u32 },
    UserCluster { stencil: u32, cluster: u32 },
}
