//! Held-out metrics: RMSE, perplexity, joint negative log-likelihood,
//! cold-start buckets and cluster agreement. Logs are natural; text
//! metrics are in nats per word.

pub mod report;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::RatingsCorpus;
use crate::error::{Error, Result};
use crate::sampler::PosteriorSummary;

pub use report::{
    block_words, item_cluster_words, item_words, pair_words, render_blocks, render_item_clusters,
    render_items, top_words, BlockWords, ClusterWords, EntityWords,
};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn missing(u: u32, m: u32) -> Error {
    Error::Data(format!("posterior summary has no entry for pair ({u}, {m})"))
}

/// `sqrt(mean (raw − prediction)²)` on the native scale.
pub fn rmse(summary: &PosteriorSummary, test: &RatingsCorpus) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let mut ss = 0.0;
    for o in test.observations() {
        let p = summary.prediction(o.user, o.item).ok_or_else(|| missing(o.user, o.item))?;
        ss += (o.raw - p).powi(2);
    }
    Ok((ss / test.len() as f64).sqrt())
}

/// RMSE of an arbitrary predictor over `test`.
pub fn rmse_with<F: Fn(u32, u32) -> Option<f64>>(test: &RatingsCorpus, predict: F) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let mut ss = 0.0;
    for o in test.observations() {
        let p = predict(o.user, o.item).ok_or_else(|| missing(o.user, o.item))?;
        ss += (o.raw - p).powi(2);
    }
    Ok((ss / test.len() as f64).sqrt())
}

/// `−(1/N_w) Σ n ln θ` with `θ = λ / Σλ` from the averaged rates.
pub fn perplexity(summary: &PosteriorSummary, test: &RatingsCorpus) -> Result<f64> {
    let mut n_words = 0u64;
    let mut acc = 0.0;
    for o in test.observations() {
        if o.words.is_empty() {
            continue;
        }
        let rate = summary.rate(o.user, o.item).ok_or_else(|| missing(o.user, o.item))?;
        for &(x, n) in &o.words {
            let theta = rate.theta(x).ok_or_else(|| {
                Error::Data(format!("word {x} not tracked for pair ({}, {})", o.user, o.item))
            })?;
            acc += n as f64 * theta.ln();
            n_words += n as u64;
        }
    }
    if n_words == 0 {
        return Err(Error::Data("no evaluable text".into()));
    }
    Ok(-acc / n_words as f64)
}

/// Mean of `−ln N(r | r̂, σ²)` over test pairs, on the training scale.
pub fn rating_nll(summary: &PosteriorSummary, test: &RatingsCorpus, noise_variance: f64) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let scale = test.rating_scale();
    let mut acc = 0.0;
    for o in test.observations() {
        let p = summary.prediction(o.user, o.item).ok_or_else(|| missing(o.user, o.item))?;
        let e = (o.raw - p) * scale;
        acc += HALF_LN_2PI + 0.5 * noise_variance.ln() + e * e / (2.0 * noise_variance);
    }
    Ok(acc / test.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointNll {
    pub log_ppx: f64,
    pub rating: f64,
    pub total: f64,
}

pub fn joint_nll(summary: &PosteriorSummary, test: &RatingsCorpus, noise_variance: f64) -> Result<JointNll> {
    let log_ppx = perplexity(summary, test)?;
    let rating = rating_nll(summary, test, noise_variance)?;
    Ok(JointNll {
        log_ppx,
        rating,
        total: log_ppx + rating,
    })
}

/// Training-count buckets for cold-start analysis.
pub const BUCKETS: [(u64, u64, &str); 5] = [
    (1, 2, "1-2"),
    (3, 5, "3-5"),
    (6, 10, "6-10"),
    (11, 20, "11-20"),
    (21, u64::MAX, "21+"),
];

/// Bucket index of a training count; `None` for zero.
pub fn bucket_of(count: u64) -> Option<usize> {
    BUCKETS.iter().position(|&(lo, hi, _)| count >= lo && count <= hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    pub label: &'static str,
    pub count: usize,
    pub rmse_model: f64,
    pub rmse_baseline: f64,
    /// `rmse_model − rmse_baseline`; negative when the model wins.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdStart {
    pub by_item: Vec<BucketRow>,
    pub by_user: Vec<BucketRow>,
}

fn bucket_rows(
    test: &RatingsCorpus,
    key_count: impl Fn(u32, u32) -> u64,
    model: &dyn Fn(u32, u32) -> Option<f64>,
    baseline: &dyn Fn(u32, u32) -> Option<f64>,
) -> Result<Vec<BucketRow>> {
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); BUCKETS.len()];
    for o in test.observations() {
        let Some(b) = bucket_of(key_count(o.user, o.item)) else { continue };
        let p = model(o.user, o.item).ok_or_else(|| missing(o.user, o.item))?;
        let q = baseline(o.user, o.item)
            .ok_or_else(|| Error::Data(format!("baseline has no prediction for pair ({}, {})", o.user, o.item)))?;
        acc[b].0 += 1;
        acc[b].1 += (o.raw - p).powi(2);
        acc[b].2 += (o.raw - q).powi(2);
    }
    Ok(acc
        .into_iter()
        .zip(BUCKETS)
        .map(|((n, a, b), (_, _, label))| {
            let (rm, rb) = if n == 0 {
                (0.0, 0.0)
            } else {
                ((a / n as f64).sqrt(), (b / n as f64).sqrt())
            };
            BucketRow {
                label,
                count: n,
                rmse_model: rm,
                rmse_baseline: rb,
                delta: rm - rb,
            }
        })
        .collect())
}

/// RMSE deltas against a baseline, bucketed by the training counts of the
/// item and, separately, of the user.
pub fn cold_start_buckets(
    summary: &PosteriorSummary,
    baseline: &HashMap<(u32, u32), f64>,
    train: &RatingsCorpus,
    test: &RatingsCorpus,
) -> Result<ColdStart> {
    let mut item_counts = vec![0u64; train.n_items()];
    let mut user_counts = vec![0u64; train.n_users()];
    for o in train.observations() {
        item_counts[o.item as usize] += 1;
        user_counts[o.user as usize] += 1;
    }
    let model = |u: u32, m: u32| summary.prediction(u, m);
    let base = |u: u32, m: u32| baseline.get(&(u, m)).copied();
    Ok(ColdStart {
        by_item: bucket_rows(test, |_, m| item_counts[m as usize], &model, &base)?,
        by_user: bucket_rows(test, |u, _| user_counts[u as usize], &model, &base)?,
    })
}

/// Reads `user<TAB>item<TAB>prediction` lines keyed by the corpus indices.
pub fn read_baseline(path: &Path, corpus: &RatingsCorpus) -> Result<HashMap<(u32, u32), f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |why: &str| Error::Data(format!("{}:{}: {why}", path.display(), i + 1));
        let mut f = line.split('\t');
        let (Some(u), Some(m), Some(p)) = (f.next(), f.next(), f.next()) else {
            return Err(bad("expected user, item and prediction"));
        };
        let p: f64 = p.trim().parse().map_err(|_| bad("prediction is not a number"))?;
        let (Some(u), Some(m)) = (corpus.users.get(u), corpus.items.get(m)) else {
            continue;
        };
        out.insert((u, m), p);
    }
    Ok(out)
}

/// Adjusted Rand index between two labelings of the same entities.
pub fn adjusted_rand_index(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as f64;
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(u32, u32), u64> = HashMap::new();
    let mut rows: HashMap<u32, u64> = HashMap::new();
    let mut cols: HashMap<u32, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v as f64)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v as f64)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v as f64)).sum();
    let expected = sa * sb / choose2(n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_test: usize,
    pub n_words: u64,
    pub rmse: f64,
    pub log_ppx: Option<f64>,
    pub rating_nll: f64,
    pub joint_nll: Option<f64>,
    pub noise_variance: f64,
    pub cold_start: Option<ColdStart>,
}

impl EvalReport {
    /// Every metric the test set supports; text metrics are skipped when
    /// the test reviews carry no in-vocabulary words.
    pub fn compute(summary: &PosteriorSummary, test: &RatingsCorpus, noise_variance: f64) -> Result<Self> {
        let n_words = test.total_words();
        let log_ppx = if n_words > 0 { Some(perplexity(summary, test)?) } else { None };
        let rating = rating_nll(summary, test, noise_variance)?;
        Ok(EvalReport {
            n_test: test.len(),
            n_words,
            rmse: rmse(summary, test)?,
            log_ppx,
            rating_nll: rating,
            joint_nll: log_ppx.map(|p| p + rating),
            noise_variance,
            cold_start: None,
        })
    }

    /// `key=value` lines with full-precision reals.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:?}"));
        writeln!(s, "n_test={}", self.n_test).unwrap();
        writeln!(s, "n_words={}", self.n_words).unwrap();
        writeln!(s, "rmse={:?}", self.rmse).unwrap();
        writeln!(s, "log_ppx_nats_per_word={}", opt(self.log_ppx)).unwrap();
        writeln!(s, "rating_nll={:?}", self.rating_nll).unwrap();
        writeln!(s, "joint_nll={}", opt(self.joint_nll)).unwrap();
        writeln!(s, "noise_variance={:?}", self.noise_variance).unwrap();
        if let Some(cs) = &self.cold_start {
            for (side, rows) in [("item", &cs.by_item), ("user", &cs.by_user)] {
                for r in rows.iter() {
                    writeln!(s, "cold_start.{side}.{}.count={}", r.label, r.count).unwrap();
                    writeln!(s, "cold_start.{side}.{}.delta={:?}", r.label, r.delta).unwrap();
                }
            }
        }
        s
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        writeln!(s, "{:<28}{:>14}", "metric", "value").unwrap();
        writeln!(s, "{:<28}{:>14}", "test pairs", self.n_test).unwrap();
        writeln!(s, "{:<28}{:>14}", "test words", self.n_words).unwrap();
        writeln!(s, "{:<28}{:>14.4}", "RMSE", self.rmse).unwrap();
        writeln!(s, "{:<28}{:>14}", "log perplexity (nats/word)", opt(self.log_ppx)).unwrap();
        writeln!(s, "{:<28}{:>14.4}", "rating NLL", self.rating_nll).unwrap();
        writeln!(s, "{:<28}{:>14}", "joint NLL", opt(self.joint_nll)).unwrap();
        writeln!(s, "{:<28}{:>14.4}", "noise variance", self.noise_variance).unwrap();
        if let Some(cs) = &self.cold_start {
            for (side, rows) in [("item", &cs.by_item), ("user", &cs.by_user)] {
                writeln!(s).unwrap();
                writeln!(
                    s,
                    "{:<8}{:>8}{:>12}{:>12}{:>12}",
                    format!("{side}s"),
                    "count",
                    "model",
                    "baseline",
                    "delta"
                )
                .unwrap();
                for r in rows.iter() {
                    writeln!(
                        s,
                        "{:<8}{:>8}{:>12.4}{:>12.4}{:>12.4}",
                        r.label, r.count, r.rmse_model, r.rmse_baseline, r.delta
                    )
                    .unwrap();
                }
            }
        }
        s
    }
}
