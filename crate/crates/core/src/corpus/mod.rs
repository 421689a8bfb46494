//! Review corpus ingestion: raw records, vocabulary, sparse count vectors,
//! train/test split and rating centring.

mod io;
mod split;
mod tokenize;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use io::{load_observations, read_corpus, write_corpus, InputFormat, Loaded};
pub use split::split_train_test;
pub use tokenize::{
    build_vocabulary, build_vocabulary_with_stats, default_stopwords, tokenize, PruneStats,
    VocabOptions, DEFAULT_STOPWORDS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub text: String,
}

/// Keeps the last record for every `(user, item)` pair, preserving the file
/// order of the survivors. Returns the number of records dropped.
pub fn deduplicate(observations: Vec<RawObservation>) -> (Vec<RawObservation>, usize) {
    let mut last: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, o) in observations.iter().enumerate() {
        last.insert((o.user.as_str(), o.item.as_str()), i);
    }
    let keep: Vec<bool> = observations
        .iter()
        .enumerate()
        .map(|(i, o)| last[&(o.user.as_str(), o.item.as_str())] == i)
        .collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    let out = observations
        .into_iter()
        .zip(keep)
        .filter_map(|(o, k)| k.then_some(o))
        .collect();
    (out, dropped)
}

/// Dense string ↔ index map. Indices follow insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

impl From<Vec<String>> for IdMap {
    fn from(ids: Vec<String>) -> Self {
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        IdMap { ids, index }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(m: IdMap) -> Self {
        m.ids
    }
}

/// Ordered word list; indices are dense and stable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(IdMap);

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Self {
        Vocabulary(IdMap::from(words))
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.0.get(word)
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.0.name(index)
    }

    pub fn words(&self) -> &[String] {
        self.0.ids()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One observed cell of the rating matrix with its review as sparse counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub user: u32,
    pub item: u32,
    /// Rating on the native scale.
    pub raw: f64,
    /// `(raw - global_mean) * rating_scale`.
    pub rating: f64,
    /// `(word index, count)` sorted by word index; counts are always ≥ 1.
    pub words: Vec<(u32, u32)>,
}

impl Observation {
    pub fn word_total(&self) -> u64 {
        self.words.iter().map(|&(_, n)| n as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsCorpus {
    pub users: IdMap,
    pub items: IdMap,
    pub vocabulary: Vocabulary,
    observations: Vec<Observation>,
    global_mean: f64,
    rating_scale: f64,
}

impl RatingsCorpus {
    /// Builds a corpus from observations; they are sorted by `(user, item)`
    /// and the last duplicate of a pair wins.
    pub fn new(
        users: IdMap,
        items: IdMap,
        vocabulary: Vocabulary,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        let mut by_pair: BTreeMap<(u32, u32), Observation> = BTreeMap::new();
        for o in observations {
            if o.user as usize >= users.len() || o.item as usize >= items.len() {
                return Err(Error::Data(format!(
                    "observation ({}, {}) outside {}x{} index space",
                    o.user,
                    o.item,
                    users.len(),
                    items.len()
                )));
            }
            if !o.raw.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite rating for ({}, {})",
                    o.user, o.item
                )));
            }
            if o.words.iter().any(|&(x, n)| x as usize >= vocabulary.len() || n == 0) {
                return Err(Error::Data(format!(
                    "bad word counts for ({}, {})",
                    o.user, o.item
                )));
            }
            by_pair.insert((o.user, o.item), o);
        }
        Ok(RatingsCorpus {
            users,
            items,
            vocabulary,
            observations: by_pair.into_values().collect(),
            global_mean: 0.0,
            rating_scale: 1.0,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn rating_scale(&self) -> f64 {
        self.rating_scale
    }

    /// Position of `(user, item)` in [`observations`](Self::observations).
    pub fn position(&self, user: u32, item: u32) -> Option<usize> {
        self.observations
            .binary_search_by(|o| (o.user, o.item).cmp(&(user, item)))
            .ok()
    }

    pub fn get(&self, user: u32, item: u32) -> Option<&Observation> {
        self.position(user, item).map(|i| &self.observations[i])
    }

    /// Copy with the same index spaces and a subset of observations.
    pub fn with_observations(&self, observations: Vec<Observation>) -> Self {
        let mut observations = observations;
        observations.sort_by_key(|o| (o.user, o.item));
        RatingsCorpus {
            users: self.users.clone(),
            items: self.items.clone(),
            vocabulary: self.vocabulary.clone(),
            observations,
            global_mean: self.global_mean,
            rating_scale: self.rating_scale,
        }
    }

    /// Native-scale range of the raw ratings.
    pub fn rating_range(&self) -> Option<(f64, f64)> {
        self.observations.iter().fold(None, |acc, o| match acc {
            None => Some((o.raw, o.raw)),
            Some((lo, hi)) => Some((lo.min(o.raw), hi.max(o.raw))),
        })
    }

    pub fn total_words(&self) -> u64 {
        self.observations.iter().map(Observation::word_total).sum()
    }

    fn recenter(&mut self, global_mean: f64, rating_scale: f64) {
        self.global_mean = global_mean;
        self.rating_scale = rating_scale;
        for o in &mut self.observations {
            o.rating = (o.raw - global_mean) * rating_scale;
        }
    }
}

/// Counts in-vocabulary tokens of every observation. The result is
/// uncentred: `rating == raw` and `global_mean == 0`.
pub fn vectorize(observations: &[RawObservation], vocab: &Vocabulary) -> Result<RatingsCorpus> {
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut out = Vec::with_capacity(observations.len());
    for raw in observations {
        let user = users.get_or_insert(&raw.user);
        let item = items.get_or_insert(&raw.item);
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for tok in tokenize(&raw.text) {
            if let Some(x) = vocab.index_of(&tok) {
                *counts.entry(x).or_default() += 1;
            }
        }
        out.push(Observation {
            user,
            item,
            raw: raw.rating,
            rating: raw.rating,
            words: counts.into_iter().collect(),
        });
    }
    RatingsCorpus::new(users, items, vocab.clone(), out)
}

/// Subtracts the training mean from both corpora. The test set never
/// contributes to the mean.
pub fn center_ratings(
    train: &RatingsCorpus,
    test: &RatingsCorpus,
) -> Result<(RatingsCorpus, RatingsCorpus, f64)> {
    center_ratings_scaled(train, test, 1.0)
}

/// As [`center_ratings`], then multiplies centred ratings by `scale`.
pub fn center_ratings_scaled(
    train: &RatingsCorpus,
    test: &RatingsCorpus,
    scale: f64,
) -> Result<(RatingsCorpus, RatingsCorpus, f64)> {
    if train.is_empty() {
        return Err(Error::Data("cannot centre an empty training set".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!("rating scale must be positive, got {scale}")));
    }
    let mean = train.observations.iter().map(|o| o.raw).sum::<f64>() / train.len() as f64;
    let mut train = train.clone();
    let mut test = test.clone();
    train.recenter(mean, scale);
    test.recenter(mean, scale);
    Ok((train, test, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(u: &str, m: &str, r: f64, text: &str) -> RawObservation {
        RawObservation {
            user: u.into(),
            item: m.into(),
            rating: r,
            text: text.into(),
        }
    }

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_words(words.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn vectorize_counts_in_vocab_tokens() {
        let c = vectorize(&[raw("a", "x", 1.0, "tea tea good")], &vocab(&["good", "tea"])).unwrap();
        assert_eq!(c.observations()[0].words, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn vectorize_keeps_reviews_without_vocab_words() {
        let v = vocab(&["good"]);
        let c = vectorize(&[raw("a", "x", 1.0, "bad"), raw("b", "x", 2.0, "")], &v).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.observations().iter().all(|o| o.words.is_empty()));
    }

    #[test]
    fn dedup_keeps_last() {
        let (out, dropped) = deduplicate(vec![
            raw("a", "x", 1.0, "first"),
            raw("b", "x", 2.0, ""),
            raw("a", "x", 3.0, "second"),
        ]);
        assert_eq!(dropped, 1);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].text, "second");
    }

    #[test]
    fn centering_uses_train_only() {
        let v = vocab(&[]);
        let train = vectorize(
            &[raw("a", "x", 1.0, ""), raw("b", "x", 3.0, ""), raw("c", "x", 5.0, "")],
            &v,
        )
        .unwrap();
        let test = train.with_observations(vec![Observation {
            user: 0,
            item: 0,
            raw: 4.0,
            rating: 4.0,
            words: vec![],
        }]);
        let (tr, te, mean) = center_ratings(&train, &test).unwrap();
        assert_eq!(mean, 3.0);
        let centred: Vec<f64> = tr.observations().iter().map(|o| o.rating).collect();
        assert_eq!(centred, vec![-2.0, 0.0, 2.0]);
        assert_eq!(te.observations()[0].rating, 1.0);
        assert_eq!(tr.global_mean(), 3.0);
    }

    #[test]
    fn constant_ratings_center_to_zero() {
        let data: Vec<_> = (0..4).map(|i| raw(&i.to_string(), "x", 3.7, "")).collect();
        let c = vectorize(&data, &vocab(&[])).unwrap();
        let (tr, _, _) = center_ratings(&c, &c.with_observations(vec![])).unwrap();
        assert!(tr.observations().iter().all(|o| o.rating == 0.0));
    }

    #[test]
    fn empty_train_cannot_be_centred() {
        let c = vectorize(&[], &vocab(&[])).unwrap();
        assert!(center_ratings(&c, &c).is_err());
    }

    proptest! {
        #[test]
        fn retokenizing_reproduces_retained_token_count(text in "[a-c ,.]{0,40}") {
            let v = vocab(&["aa", "ab", "abc", "bca", "c"]);
            let c = vectorize(&[raw("u", "i", 0.0, &text)], &v).unwrap();
            let retained = tokenize(&text).filter(|t| v.index_of(t).is_some()).count() as u64;
            prop_assert_eq!(c.observations()[0].word_total(), retained);
        }

        #[test]
        fn centering_is_invertible(ratings in prop::collection::vec(-1e3f64..1e3, 1..30)) {
            let data: Vec<_> = ratings.iter().enumerate()
                .map(|(i, &r)| raw(&i.to_string(), "x", r, "")).collect();
            let c = vectorize(&data, &vocab(&[])).unwrap();
            let (tr, _, mean) = center_ratings(&c, &c).unwrap();
            for (o, &r) in tr.observations().iter().zip(&ratings) {
                prop_assert_eq!(o.raw, r);
                prop_assert!((o.rating + mean - r).abs() <= 1e-12 * r.abs().max(1.0));
            }
        }
    }
}
