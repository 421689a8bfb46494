use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{RawObservation, Vocabulary};

/// Built-in English stopword list. Overridable from a file in the run config.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "also", "and", "any", "are", "aren",
    "because", "been", "before", "being", "below", "between", "both", "but", "can", "cannot",
    "could", "couldn", "did", "didn", "does", "doesn", "doing", "don", "down", "during", "each",
    "even", "ever", "few", "for", "from", "further", "get", "got", "had", "hadn", "has", "hasn",
    "have", "haven", "having", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "into", "isn", "its", "itself", "just", "let", "like", "many", "may", "more", "most", "much",
    "must", "mustn", "myself", "nor", "not", "now", "off", "once", "one", "only", "other",
    "ought", "our", "ours", "ourselves", "out", "over", "own", "really", "same", "shan", "she",
    "should", "shouldn", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "too", "under",
    "until", "very", "was", "wasn", "were", "weren", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "won", "would", "wouldn", "you", "your", "yours",
    "yourself", "yourselves",
];

pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

#[derive(Debug, Clone)]
pub struct VocabOptions {
    pub min_word_len: usize,
    /// Minimum number of documents a word must occur in.
    pub min_freq: usize,
    pub stopwords: HashSet<String>,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions {
            min_word_len: 3,
            min_freq: 5,
            stopwords: default_stopwords(),
        }
    }
}

/// Token counts before and after pruning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStats {
    pub tokens: u64,
    pub distinct_tokens: usize,
    pub dropped_short: usize,
    pub dropped_stopword: usize,
    pub dropped_rare: usize,
    pub kept: usize,
}

pub fn build_vocabulary(observations: &[RawObservation], opts: &VocabOptions) -> Vocabulary {
    build_vocabulary_with_stats(observations, opts).0
}

pub fn build_vocabulary_with_stats(
    observations: &[RawObservation],
    opts: &VocabOptions,
) -> (Vocabulary, PruneStats) {
    let min_len = opts.min_word_len.max(1);
    let min_freq = opts.min_freq.max(1);

    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    let mut stats = PruneStats::default();
    for obs in observations {
        let mut seen = HashSet::new();
        for tok in tokenize(&obs.text) {
            stats.tokens += 1;
            if seen.insert(tok.clone()) {
                *doc_freq.entry(tok).or_default() += 1;
            }
        }
    }
    stats.distinct_tokens = doc_freq.len();

    let mut words = Vec::new();
    for (word, df) in doc_freq {
        if word.chars().count() < min_len {
            stats.dropped_short += 1;
        } else if opts.stopwords.contains(&word) {
            stats.dropped_stopword += 1;
        } else if df < min_freq {
            stats.dropped_rare += 1;
        } else {
            words.push(word);
        }
    }
    stats.kept = words.len();
    if words.is_empty() {
        log::warn!("vocabulary is empty after pruning");
    }
    (Vocabulary::from_words(words), stats)
}
