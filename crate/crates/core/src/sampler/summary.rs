//! Posterior averages over post-burn-in Gibbs states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::RatingsCorpus;
use crate::error::{Error, Result};
use crate::model::PacoModel;

/// The `(user, item)` pairs to average over, sorted and unique, with the
/// words whose rates are tracked for each (`None` tracks the full vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pairs: Vec<(u32, u32)>,
    words: Vec<Option<Vec<u32>>>,
}

impl Probe {
    pub fn new(mut entries: Vec<((u32, u32), Option<Vec<u32>>)>) -> Self {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        let (pairs, words) = entries.into_iter().unzip();
        Probe { pairs, words }
    }

    /// Every pair of `test`, tracking the words of its review.
    pub fn from_corpus(test: &RatingsCorpus) -> Self {
        Probe::new(
            test.observations()
                .iter()
                .map(|o| ((o.user, o.item), Some(o.words.iter().map(|w| w.0).collect())))
                .collect(),
        )
    }

    /// Pairs with full rate vectors.
    pub fn full(pairs: Vec<(u32, u32)>) -> Self {
        Probe::new(pairs.into_iter().map(|p| (p, None)).collect())
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self, n_users: usize, n_items: usize) -> Result<()> {
        match self
            .pairs
            .iter()
            .find(|(u, m)| *u as usize >= n_users || *m as usize >= n_items)
        {
            Some((u, m)) => Err(Error::OutOfRange(format!(
                "probe pair ({u}, {m}) outside {n_users} users x {n_items} items"
            ))),
            None => Ok(()),
        }
    }
}

/// Averaged λ for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRate {
    /// Average of `Σ_x λ_x` over the full vocabulary.
    pub total: f64,
    /// Tracked words; `None` means `rates` covers the whole vocabulary.
    pub words: Option<Vec<u32>>,
    pub rates: Vec<f64>,
}

impl MeanRate {
    pub fn get(&self, word: u32) -> Option<f64> {
        match &self.words {
            None => self.rates.get(word as usize).copied(),
            Some(ws) => ws.binary_search(&word).ok().map(|i| self.rates[i]),
        }
    }

    /// Normalised probability `θ_x = λ_x / Σ λ`.
    pub fn theta(&self, word: u32) -> Option<f64> {
        self.get(word).map(|r| r / self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub pairs: Vec<(u32, u32)>,
    /// Averaged native-scale prediction minus `global_mean`.
    pub mean_prediction: Vec<f64>,
    pub mean_rate: Vec<MeanRate>,
    pub n_samples_used: usize,
    pub global_mean: f64,
}

impl PosteriorSummary {
    pub fn position(&self, user: u32, item: u32) -> Option<usize> {
        self.pairs.binary_search(&(user, item)).ok()
    }

    /// Averaged native-scale prediction.
    pub fn prediction(&self, user: u32, item: u32) -> Option<f64> {
        self.position(user, item)
            .map(|i| self.global_mean + self.mean_prediction[i])
    }

    pub fn rate(&self, user: u32, item: u32) -> Option<&MeanRate> {
        self.position(user, item).map(|i| &self.mean_rate[i])
    }

    /// Summary of a single state.
    pub fn from_model(model: &PacoModel, probe: &Probe) -> Self {
        let mut acc = Accumulator::new(probe);
        acc.add(model);
        acc.finish(model.global_mean)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("summary serialises")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("posterior summary: {e}")))
    }
}

/// Running sums of predictions and tracked rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    probe: Probe,
    prediction: Vec<f64>,
    total: Vec<f64>,
    rates: Vec<Vec<f64>>,
    samples: usize,
}

impl Accumulator {
    pub fn new(probe: &Probe) -> Self {
        Accumulator {
            probe: probe.clone(),
            prediction: vec![0.0; probe.len()],
            total: vec![0.0; probe.len()],
            rates: probe.words.iter().map(|_| Vec::new()).collect(),
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn add(&mut self, model: &PacoModel) {
        let w = model.vocab_size();
        let draws: Vec<(f64, f64, Vec<f64>)> = self
            .probe
            .pairs
            .par_iter()
            .zip(&self.probe.words)
            .map(|(&(u, m), words)| {
                let (u, m) = (u as usize, m as usize);
                let pred = model.predict_unchecked(u, m) - model.global_mean;
                let rates = match words {
                    None => {
                        let mut acc = vec![0.0; w];
                        for r in model.active_rates(u, m) {
                            r.add_into(&mut acc);
                        }
                        acc
                    }
                    Some(ws) => ws.iter().map(|&x| model.rate_at(u, m, x)).collect(),
                };
                (pred, model.rate_total(u, m), rates)
            })
            .collect();
        for (i, (pred, total, rates)) in draws.into_iter().enumerate() {
            self.prediction[i] += pred;
            self.total[i] += total;
            if self.rates[i].is_empty() {
                self.rates[i] = rates;
            } else {
                self.rates[i].iter_mut().zip(&rates).for_each(|(a, b)| *a += b);
            }
        }
        self.samples += 1;
    }

    pub fn finish(&self, global_mean: f64) -> PosteriorSummary {
        let k = self.samples.max(1) as f64;
        PosteriorSummary {
            pairs: self.probe.pairs.clone(),
            mean_prediction: self.prediction.iter().map(|p| p / k).collect(),
            mean_rate: self
                .rates
                .iter()
                .zip(&self.total)
                .zip(&self.probe.words)
                .map(|((r, t), ws)| MeanRate {
                    total: t / k,
                    words: ws.clone(),
                    rates: r.iter().map(|x| x / k).collect(),
                })
                .collect(),
            n_samples_used: self.samples,
            global_mean,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IdMap, Observation, Vocabulary};
    use crate::model::Hyperparameters;

    fn model() -> PacoModel {
        let users = IdMap::from(vec!["a".to_string()]);
        let items = IdMap::from(vec!["x".to_string(), "y".to_string()]);
        let vocab = Vocabulary::from_words(vec!["p".into(), "q".into()]);
        let obs = vec![Observation { user: 0, item: 0, raw: 3.0, rating: 0.0, words: vec![(1, 2)] }];
        let c = RatingsCorpus::new(users, items, vocab, obs).unwrap();
        let mut m = PacoModel::empty(&c, &Hyperparameters { stencils: 1, text_stencils: 1, ..Default::default() }).unwrap();
        m.global_mean = 3.0;
        m.rating_bounds = (1.0, 5.0);
        m
    }

    #[test]
    fn two_states_average() {
        let mut m = model();
        let probe = Probe::full(vec![(0, 1)]);
        let mut acc = Accumulator::new(&probe);
        m.stencils[0].means[0] = -1.0;
        acc.add(&m);
        m.stencils[0].means[0] = 1.0;
        acc.add(&m);
        let s = acc.finish(m.global_mean);
        assert_eq!(s.prediction(0, 1), Some(3.0));
        assert_eq!(s.n_samples_used, 2);
    }

    #[test]
    fn single_state_is_exact() {
        let mut m = model();
        m.stencils[0].means[0] = 0.37;
        let probe = Probe::new(vec![((0, 0), Some(vec![1]))]);
        let s = PosteriorSummary::from_model(&m, &probe);
        assert_eq!(s.prediction(0, 0), Some(m.predict_rating(0, 0).unwrap()));
        let r = s.rate(0, 0).unwrap();
        assert_eq!(r.get(1), Some(m.rate_at(0, 0, 1)));
        assert_eq!(r.get(0), None);
        assert_eq!(r.total, m.rate_total(0, 0));
    }

    #[test]
    fn json_round_trip() {
        let m = model();
        let s = PosteriorSummary::from_model(&m, &Probe::full(vec![(0, 0), (0, 1)]));
        assert_eq!(PosteriorSummary::from_json(&s.to_json()).unwrap(), s);
    }
}
