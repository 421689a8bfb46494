//! Top-words reports. Words are ranked by rate, highest first; equal rates
//! are broken by the word itself in ascending byte order.

use std::fmt::Write as _;

use crate::corpus::{RatingsCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{PacoModel, RateVector};

/// The `k` highest-rate words of `rates` (dense over the vocabulary).
pub fn top_words(rates: &[f64], vocab: &Vocabulary, k: usize) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| {
        rates[b]
            .total_cmp(&rates[a])
            .then_with(|| vocab.words()[a].cmp(&vocab.words()[b]))
    });
    order
        .into_iter()
        .take(k)
        .map(|x| (vocab.words()[x].clone(), rates[x]))
        .collect()
}

fn top_of(v: &RateVector, vocab: &Vocabulary, k: usize) -> Vec<(String, f64)> {
    top_words(&v.to_dense(), vocab, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWords {
    pub user_cluster: usize,
    pub item_cluster: usize,
    /// Block mean on the native scale.
    pub mean: f64,
    pub reviews: usize,
    pub words: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWords {
    pub cluster: usize,
    /// Member ids, most-rated first.
    pub members: Vec<String>,
    pub size: usize,
    pub words: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityWords {
    pub id: String,
    pub words: Vec<(String, f64)>,
}

fn text_stencil_check(model: &PacoModel, l: usize) -> Result<()> {
    if l >= model.text_stencils() {
        return Err(Error::OutOfRange(format!(
            "stencil {l} has no language models; valid text stencils are 0..{}",
            model.text_stencils()
        )));
    }
    Ok(())
}

/// Every block of text stencil `l`. `train` supplies review counts when given.
pub fn block_words(model: &PacoModel, l: usize, k: usize, train: Option<&RatingsCorpus>) -> Result<Vec<BlockWords>> {
    text_stencil_check(model, l)?;
    let st = &model.stencils[l];
    let mut reviews = vec![0usize; st.k_users * st.k_items];
    if let Some(c) = train {
        for o in c.observations() {
            reviews[st.block_index(st.user_clusters[o.user as usize] as usize, st.item_clusters[o.item as usize] as usize)] += 1;
        }
    }
    let tr = &model.rates.stencils[l];
    let mut out = Vec::with_capacity(reviews.len());
    for a in 0..st.k_users {
        for b in 0..st.k_items {
            let i = st.block_index(a, b);
            out.push(BlockWords {
                user_cluster: a,
                item_cluster: b,
                mean: st.means[i] / model.rating_scale,
                reviews: reviews[i],
                words: top_of(&tr.blocks[i], &model.vocabulary, k),
            });
        }
    }
    Ok(out)
}

/// Item clusters of text stencil `l` with their best-known members.
pub fn item_cluster_words(
    model: &PacoModel,
    l: usize,
    k: usize,
    max_members: usize,
    train: Option<&RatingsCorpus>,
) -> Result<Vec<ClusterWords>> {
    text_stencil_check(model, l)?;
    let st = &model.stencils[l];
    let mut freq = vec![0usize; model.n_items()];
    if let Some(c) = train {
        for o in c.observations() {
            freq[o.item as usize] += 1;
        }
    }
    let tr = &model.rates.stencils[l];
    Ok((0..st.k_items)
        .map(|b| {
            let mut members: Vec<usize> = (0..model.n_items())
                .filter(|&m| st.item_clusters[m] as usize == b)
                .collect();
            let size = members.len();
            members.sort_by(|&x, &y| freq[y].cmp(&freq[x]).then(x.cmp(&y)));
            ClusterWords {
                cluster: b,
                members: members
                    .into_iter()
                    .take(max_members)
                    .map(|m| model.items.name(m).unwrap_or_default().to_string())
                    .collect(),
                size,
                words: top_of(&tr.item_clusters[b], &model.vocabulary, k),
            }
        })
        .collect())
}

pub fn item_words(model: &PacoModel, item: usize, k: usize) -> Result<EntityWords> {
    let v = model.rates.items.get(item).ok_or_else(|| {
        Error::OutOfRange(format!("item {item} outside 0..{}", model.n_items()))
    })?;
    Ok(EntityWords {
        id: model.items.name(item).unwrap_or_default().to_string(),
        words: top_of(v, &model.vocabulary, k),
    })
}

/// Top words of `λ_{u,m}`.
pub fn pair_words(model: &PacoModel, user: usize, item: usize, k: usize) -> Result<EntityWords> {
    let lambda = model.rate_vector(user, item)?;
    Ok(EntityWords {
        id: format!(
            "{} / {}",
            model.users.name(user).unwrap_or_default(),
            model.items.name(item).unwrap_or_default()
        ),
        words: top_words(&lambda, &model.vocabulary, k),
    })
}

fn word_list(words: &[(String, f64)]) -> String {
    words.iter().map(|w| w.0.as_str()).collect::<Vec<_>>().join(" ")
}

pub fn render_blocks(l: usize, blocks: &[BlockWords]) -> String {
    let mut s = String::new();
    writeln!(s, "# stencil {l}: blocks by mean rating").unwrap();
    writeln!(s, "{:<10}{:>10}{:>9}  words", "block", "mean", "reviews").unwrap();
    let mut sorted: Vec<&BlockWords> = blocks.iter().collect();
    sorted.sort_by(|x, y| y.mean.total_cmp(&x.mean));
    for b in sorted {
        writeln!(
            s,
            "{:<10}{:>+10.3}{:>9}  {}",
            format!("{},{}", b.user_cluster, b.item_cluster),
            b.mean,
            b.reviews,
            word_list(&b.words)
        )
        .unwrap();
    }
    s
}

pub fn render_item_clusters(l: usize, clusters: &[ClusterWords]) -> String {
    let mut s = String::new();
    writeln!(s, "# stencil {l}: item clusters").unwrap();
    for c in clusters {
        writeln!(s, "cluster {} ({} items)", c.cluster, c.size).unwrap();
        writeln!(s, "  items: {}", c.members.join(", ")).unwrap();
        writeln!(s, "  words: {}", word_list(&c.words)).unwrap();
    }
    s
}

pub fn render_items(items: &[EntityWords]) -> String {
    let mut s = String::new();
    for e in items {
        writeln!(s, "{:<20}  {}", e.id, word_list(&e.words)).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(vec!["apple".into(), "berry".into(), "cider".into(), "dark".into()])
    }

    #[test]
    fn dominant_word_first() {
        let top = top_words(&[0.1, 0.2, 9.0, 0.3], &vocab(), 2);
        assert_eq!(top[0].0, "cider");
        assert_eq!(top[1].0, "dark");
    }

    #[test]
    fn ties_break_lexicographically() {
        let top = top_words(&[1.0, 1.0, 1.0, 1.0], &vocab(), 4);
        let words: Vec<_> = top.iter().map(|w| w.0.as_str()).collect();
        assert_eq!(words, ["apple", "berry", "cider", "dark"]);
        let top = top_words(&[0.5, 2.0, 0.5, 2.0], &vocab(), 3);
        let words: Vec<_> = top.iter().map(|w| w.0.as_str()).collect();
        assert_eq!(words, ["berry", "dark", "apple"]);
    }
}
