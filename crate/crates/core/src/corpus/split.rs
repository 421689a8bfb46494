use rand::seq::SliceRandom;

use super::RatingsCorpus;
use crate::error::{Error, Result};
use crate::rng::Streams;

/// Random train/test partition in which every user and every item of the
/// test set keeps at least one training observation.
///
/// Observations are visited in a seeded random order and moved to the test
/// set while the target size `round(test_fraction * n)` is not reached and
/// both the user and the item would keep a training observation.
pub fn split_train_test(
    corpus: &RatingsCorpus,
    test_fraction: f64,
    seed: u64,
) -> Result<(RatingsCorpus, RatingsCorpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let obs = corpus.observations();
    let target = (test_fraction * obs.len() as f64).round() as usize;

    let mut user_left = vec![0usize; corpus.n_users()];
    let mut item_left = vec![0usize; corpus.n_items()];
    for o in obs {
        user_left[o.user as usize] += 1;
        item_left[o.item as usize] += 1;
    }

    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.shuffle(&mut Streams::new(seed).rng(&[0x5971_7e57]));

    let mut in_test = vec![false; obs.len()];
    let mut n_test = 0;
    for i in order {
        if n_test == target {
            break;
        }
        let (u, m) = (obs[i].user as usize, obs[i].item as usize);
        if user_left[u] > 1 && item_left[m] > 1 {
            user_left[u] -= 1;
            item_left[m] -= 1;
            in_test[i] = true;
            n_test += 1;
        }
    }
    if n_test == 0 && target > 0 {
        log::warn!("corpus too small for a covered test split; using all observations for training");
    } else if n_test < target {
        log::warn!("coverage constraint limited the test set to {n_test} of {target} observations");
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (o, t) in obs.iter().zip(in_test) {
        if t {
            test.push(o.clone());
        } else {
            train.push(o.clone());
        }
    }
    Ok((corpus.with_observations(train), corpus.with_observations(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{vectorize, RawObservation, Vocabulary};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus(pairs: &[(u32, u32)]) -> RatingsCorpus {
        let raw: Vec<_> = pairs
            .iter()
            .map(|&(u, m)| RawObservation {
                user: format!("u{u}"),
                item: format!("i{m}"),
                rating: (u + m) as f64,
                text: String::new(),
            })
            .collect();
        vectorize(&raw, &Vocabulary::default()).unwrap()
    }

    fn check_coverage(train: &RatingsCorpus, test: &RatingsCorpus) -> bool {
        let users: HashSet<u32> = train.observations().iter().map(|o| o.user).collect();
        let items: HashSet<u32> = train.observations().iter().map(|o| o.item).collect();
        test.observations()
            .iter()
            .all(|o| users.contains(&o.user) && items.contains(&o.item))
    }

    #[test]
    fn ten_observations() {
        let pairs: Vec<_> = (0..10).map(|i| (i % 3, i % 4)).collect();
        let c = corpus(&pairs);
        let (tr, te) = split_train_test(&c, 0.2, 11).unwrap();
        assert!(te.len() <= 2);
        assert_eq!(tr.len() + te.len(), c.len());
        assert!(check_coverage(&tr, &te));
    }

    #[test]
    fn single_observation_stays_in_train() {
        let c = corpus(&[(0, 0)]);
        let (tr, te) = split_train_test(&c, 0.5, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (1, 0));
    }

    #[test]
    fn deterministic_given_seed() {
        let pairs: Vec<_> = (0..40).map(|i| (i % 7, i % 5)).collect();
        let c = corpus(&pairs);
        assert_eq!(split_train_test(&c, 0.3, 5).unwrap(), split_train_test(&c, 0.3, 5).unwrap());
    }

    #[test]
    fn fraction_must_be_open_interval() {
        let c = corpus(&[(0, 0)]);
        assert!(split_train_test(&c, 0.0, 1).is_err());
        assert!(split_train_test(&c, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_coverage(
            pairs in prop::collection::btree_set((0u32..8, 0u32..8), 1..50),
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let pairs: Vec<_> = pairs.into_iter().collect();
            let c = corpus(&pairs);
            let (tr, te) = split_train_test(&c, frac, seed).unwrap();
            let mut all: Vec<_> = tr.observations().iter().chain(te.observations())
                .map(|o| (o.user, o.item)).collect();
            all.sort();
            let orig: Vec<_> = c.observations().iter().map(|o| (o.user, o.item)).collect();
            prop_assert_eq!(all, orig);
            prop_assert!(check_coverage(&tr, &te));
        }
    }
}
