use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AgentError, Exemplar};
use crate::grounding::Embedder;

/// Text-similarity hook used to rank exemplars.
pub trait Scorer: Send + Sync {
    /// One score per candidate, higher is more similar.
    fn scores(&self, query: &str, candidates: &[&str]) -> Vec<f64>;

    fn identity(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Similarity,
    /// The first k pool entries regardless of the query.
    Fixed,
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unigram and bigram term frequencies of lowercased word tokens.
pub fn term_frequencies(text: &str) -> BTreeMap<String, u32> {
    let toks = tokens(text);
    let mut tf = BTreeMap::new();
    for t in &toks {
        *tf.entry(t.clone()).or_insert(0) += 1;
    }
    for pair in toks.windows(2) {
        *tf.entry(format!("{} {}", pair[0], pair[1])).or_insert(0) += 1;
    }
    tf
}

fn tf_cosine(a: &BTreeMap<String, u32>, b: &BTreeMap<String, u32>) -> f64 {
    let dot: u64 = a.iter().filter_map(|(k, &x)| b.get(k).map(|&y| u64::from(x) * u64::from(y))).sum();
    let na: u64 = a.values().map(|&x| u64::from(x).pow(2)).sum();
    let nb: u64 = b.values().map(|&x| u64::from(x).pow(2)).sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    dot as f64 / ((na as f64) * (nb as f64)).sqrt()
}

/// Cosine over TF-weighted unigrams and bigrams.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfCosineScorer;

impl Scorer for TfCosineScorer {
    fn scores(&self, query: &str, candidates: &[&str]) -> Vec<f64> {
        let q = term_frequencies(query);
        candidates.iter().map(|c| tf_cosine(&q, &term_frequencies(c))).collect()
    }

    fn identity(&self) -> String {
        "tf-cosine-uni-bi".into()
    }
}

/// Sentence similarity through an embedding model.
pub struct EmbeddingScorer(pub Arc<dyn Embedder>);

impl Scorer for EmbeddingScorer {
    fn scores(&self, query: &str, candidates: &[&str]) -> Vec<f64> {
        let mut texts = vec![query.to_lowercase()];
        texts.extend(candidates.iter().map(|c| c.to_lowercase()));
        match self.0.embed_batch(&texts) {
            Ok(vectors) => vectors[1..].iter().map(|v| vectors[0].cosine(v)).collect(),
            Err(e) => {
                log::warn!("embedding scorer failed, falling back to term overlap: {e}");
                TfCosineScorer.scores(query, candidates)
            }
        }
    }

    fn identity(&self) -> String {
        format!("embedding:{}", self.0.identity())
    }
}

/// Top-k exemplars by descending score, ties to the smaller id. Without a
/// scorer the first k pool entries are returned.
pub fn select_exemplars<'a>(
    query: &str,
    pool: &'a [Exemplar],
    k: usize,
    scorer: Option<&dyn Scorer>,
) -> Result<Vec<&'a Exemplar>, AgentError> {
    if k > pool.len() {
        return Err(AgentError::PoolTooSmall { requested: k, available: pool.len() });
    }
    let Some(scorer) = scorer else {
        return Ok(pool.iter().take(k).collect());
    };
    let texts: Vec<&str> = pool.iter().map(|e| e.instruction.as_str()).collect();
    let scores = scorer.scores(query, &texts);
    let mut ranked: Vec<(f64, &Exemplar)> = scores.into_iter().zip(pool).collect();
    ranked.sort_by(|(sa, a), (sb, b)| sb.partial_cmp(sa).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id)));
    Ok(ranked.into_iter().take(k).map(|(_, e)| e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<Exemplar> {
        ["pick up the stapler", "move the lamp to the desk", "grab the umbrella", "pick up the stapler"]
            .iter()
            .enumerate()
            .map(|(i, t)| Exemplar::new(format!("e-{:02}", 4 - i), *t, "1. done()"))
            .collect()
    }

    #[test]
    fn self_match_first_and_ties_by_id() {
        let pool = pool();
        let picked = select_exemplars("pick up the stapler", &pool, 2, Some(&TfCosineScorer)).unwrap();
        assert_eq!(picked.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(), vec!["e-01", "e-04"]);
    }

    #[test]
    fn fixed_mode_and_pool_size() {
        let pool = pool();
        let fixed = select_exemplars("anything", &pool, 3, None).unwrap();
        assert_eq!(fixed[0].id, "e-04");
        assert_eq!(fixed.len(), 3);
        assert_eq!(
            select_exemplars("x", &pool, 5, None).unwrap_err(),
            AgentError::PoolTooSmall { requested: 5, available: 4 }
        );
    }

    #[test]
    fn bigrams_count() {
        let tf = term_frequencies("Pick up the pick up");
        assert_eq!(tf["pick up"], 2);
        assert_eq!(tf["up the"], 1);
        assert_eq!(tf["pick"], 2);
    }
}
