//! Maps free-text plan arguments onto the environment vocabulary by cosine
//! similarity between term vectors.
//!
//! The default embedder counts character trigrams of the normalized term
//! padded with one space on each side. Object arguments are grounded only
//! against object names and location arguments only against location names.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::plan_dsl::{normalize_arg, Action, ParamRole, Plan, SkillRegistry, UNSPECIFIED};

pub const DEFAULT_THRESHOLD: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroundingError {
    #[error("term is empty after normalization")]
    EmptyTerm,
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("embedding endpoint failed: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// Trigram counts.
    Trigrams(BTreeMap<String, u32>),
    /// Unit-length dense vector.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermVector {
    pub term: String,
    pub features: Features,
}

impl TermVector {
    /// Components scaled to unit L2 norm.
    pub fn unit_values(&self) -> Vec<f64> {
        match &self.features {
            Features::Dense(v) => v.clone(),
            Features::Trigrams(counts) => {
                let norm = (counts.values().map(|&c| u64::from(c) * u64::from(c)).sum::<u64>() as f64).sqrt();
                counts.values().map(|&c| f64::from(c) / norm).collect()
            }
        }
    }

    /// Cosine similarity. Vectors from different embedders score 0.
    pub fn cosine(&self, other: &TermVector) -> f64 {
        match (&self.features, &other.features) {
            (Features::Trigrams(a), Features::Trigrams(b)) => {
                let dot: u64 = a
                    .iter()
                    .filter_map(|(k, &x)| b.get(k).map(|&y| u64::from(x) * u64::from(y)))
                    .sum();
                let na: u64 = a.values().map(|&c| u64::from(c).pow(2)).sum();
                let nb: u64 = b.values().map(|&c| u64::from(c).pow(2)).sum();
                dot as f64 / ((na as f64) * (nb as f64)).sqrt()
            }
            (Features::Dense(a), Features::Dense(b)) if a.len() == b.len() => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            _ => 0.0,
        }
    }
}

pub trait Embedder: Send + Sync {
    /// Embeds a batch of already-normalized, non-empty terms.
    fn embed_batch(&self, terms: &[String]) -> Result<Vec<TermVector>, GroundingError>;

    fn identity(&self) -> String;
}

/// Normalizes `term` and embeds it.
pub fn embed(term: &str, embedder: &dyn Embedder) -> Result<TermVector, GroundingError> {
    let term = normalize_arg(term);
    if term.is_empty() {
        return Err(GroundingError::EmptyTerm);
    }
    Ok(embedder.embed_batch(&[term])?.remove(0))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl TrigramEmbedder {
    pub fn trigrams(term: &str) -> BTreeMap<String, u32> {
        let padded: Vec<char> = format!(" {term} ").chars().collect();
        let mut counts = BTreeMap::new();
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect()).or_insert(0) += 1;
        }
        counts
    }
}

impl Embedder for TrigramEmbedder {
    fn embed_batch(&self, terms: &[String]) -> Result<Vec<TermVector>, GroundingError> {
        Ok(terms
            .iter()
            .map(|t| TermVector { term: t.clone(), features: Features::Trigrams(Self::trigrams(t)) })
            .collect())
    }

    fn identity(&self) -> String {
        "trigram-tf".into()
    }
}

/// Sentence encoder served behind an embeddings endpoint
/// (`POST {base_url}/v1/embeddings` with `{"input": [...]}`).
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingData>,
}

impl Embedder for RemoteEmbedder {
    fn embed_batch(&self, terms: &[String]) -> Result<Vec<TermVector>, GroundingError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/v1/embeddings", self.base_url.trim_end_matches('/'));
        let mut request = agent.post(&url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "input": terms, "model": self.model });
        let mut response = request
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(|e| GroundingError::Remote(e.to_string()))?;
        if !response.status().is_success() {
            return Err(GroundingError::Remote(format!("status {}", response.status().as_u16())));
        }
        let text = response.body_mut().read_to_string().map_err(|e| GroundingError::Remote(e.to_string()))?;
        let parsed: EmbeddingResponse = serde_json::from_str(&text).map_err(|e| GroundingError::Remote(e.to_string()))?;
        if parsed.data.len() != terms.len() {
            return Err(GroundingError::Remote(format!("expected {} vectors, got {}", terms.len(), parsed.data.len())));
        }
        Ok(terms
            .iter()
            .zip(parsed.data)
            .map(|(t, d)| {
                let norm = d.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
                let unit = if norm > 0.0 { d.embedding.iter().map(|x| x / norm).collect() } else { d.embedding };
                TermVector { term: t.clone(), features: Features::Dense(unit) }
            })
            .collect())
    }

    fn identity(&self) -> String {
        format!("remote:{}@{}", self.model, self.base_url)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Exact,
    Nearest,
    BelowThreshold,
    /// The `unspecified` placeholder, never grounded.
    Reserved,
    /// An object argument naming a location (`move_to('couch')`), kept as is.
    CrossRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingDecision {
    pub original: String,
    pub chosen: String,
    pub score: f64,
    pub accepted: bool,
    pub kind: DecisionKind,
}

impl GroundingDecision {
    fn passthrough(term: String, score: f64, kind: DecisionKind) -> Self {
        Self { chosen: term.clone(), original: term, score, accepted: false, kind }
    }
}

/// Vocabulary with precomputed vectors.
#[derive(Debug, Clone)]
pub struct VocabIndex {
    vectors: Vec<TermVector>,
}

impl VocabIndex {
    pub fn new(names: &[String], embedder: &dyn Embedder) -> Result<Self, GroundingError> {
        let terms: Vec<String> = names.iter().map(|n| normalize_arg(n)).filter(|n| !n.is_empty()).collect();
        if terms.is_empty() {
            return Err(GroundingError::EmptyVocabulary);
        }
        Ok(Self { vectors: embedder.embed_batch(&terms)? })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vectors.iter().map(|v| v.term.as_str())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.names().any(|n| n == term)
    }

    /// Best entry for `term`: exact match first, otherwise highest cosine with
    /// ties to the lower index; accepted when the score reaches `threshold`.
    pub fn ground(&self, term: &str, embedder: &dyn Embedder, threshold: f64) -> Result<GroundingDecision, GroundingError> {
        let term = normalize_arg(term);
        if term.is_empty() {
            return Err(GroundingError::EmptyTerm);
        }
        if term == UNSPECIFIED {
            return Ok(GroundingDecision::passthrough(term, 1.0, DecisionKind::Reserved));
        }
        if self.contains(&term) {
            return Ok(GroundingDecision {
                chosen: term.clone(),
                original: term,
                score: 1.0,
                accepted: true,
                kind: DecisionKind::Exact,
            });
        }
        let query = embedder.embed_batch(std::slice::from_ref(&term))?.remove(0);
        let (best, score) = self
            .vectors
            .iter()
            .map(|v| query.cosine(v))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bs), (i, s)| if s > bs { (i, s) } else { (bi, bs) });
        if score >= threshold {
            Ok(GroundingDecision {
                original: term,
                chosen: self.vectors[best].term.clone(),
                score,
                accepted: true,
                kind: DecisionKind::Nearest,
            })
        } else {
            Ok(GroundingDecision::passthrough(term, score, DecisionKind::BelowThreshold))
        }
    }
}

/// Single-term grounding against an ad hoc vocabulary.
pub fn ground_term(
    term: &str,
    vocabulary: &[String],
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<GroundingDecision, GroundingError> {
    VocabIndex::new(vocabulary, embedder)?.ground(term, embedder, threshold)
}

/// Role-aware grounder for one world.
#[derive(Clone)]
pub struct Grounder {
    objects: VocabIndex,
    locations: VocabIndex,
    embedder: Arc<dyn Embedder>,
    pub threshold: f64,
}

impl std::fmt::Debug for Grounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grounder")
            .field("embedder", &self.embedder.identity())
            .field("threshold", &self.threshold)
            .finish()
    }
}

impl Grounder {
    pub fn new(
        object_vocab: &[String],
        location_vocab: &[String],
        embedder: Arc<dyn Embedder>,
        threshold: f64,
    ) -> Result<Self, GroundingError> {
        Ok(Self {
            objects: VocabIndex::new(object_vocab, embedder.as_ref())?,
            locations: VocabIndex::new(location_vocab, embedder.as_ref())?,
            embedder,
            threshold,
        })
    }

    pub fn ground_arg(&self, term: &str, role: ParamRole) -> Result<GroundingDecision, GroundingError> {
        let normalized = normalize_arg(term);
        if role == ParamRole::Object && self.locations.contains(&normalized) && !self.objects.contains(&normalized) {
            return Ok(GroundingDecision::passthrough(normalized, 1.0, DecisionKind::CrossRole));
        }
        let index = match role {
            ParamRole::Object => &self.objects,
            ParamRole::Location => &self.locations,
        };
        index.ground(term, self.embedder.as_ref(), self.threshold)
    }

    /// Grounds every argument by its parameter role. Skill names and
    /// actions unknown to `registry` are left untouched.
    pub fn ground_plan(&self, plan: &Plan, registry: &SkillRegistry) -> Result<(Plan, Vec<GroundingDecision>), GroundingError> {
        let mut decisions = Vec::new();
        let mut actions = Vec::with_capacity(plan.actions.len());
        for action in &plan.actions {
            let Some(schema) = registry.lookup(&action.skill).filter(|s| s.arity() == action.args.len()) else {
                actions.push(action.clone());
                continue;
            };
            let mut args = Vec::with_capacity(action.args.len());
            for (arg, &role) in action.args.iter().zip(&schema.params) {
                let decision = self.ground_arg(arg, role)?;
                args.push(decision.chosen.clone());
                decisions.push(decision);
            }
            actions.push(Action { skill: action.skill.clone(), args });
        }
        Ok((Plan::new(actions, plan.terminated), decisions))
    }
}

/// Free-function form of [`Grounder::ground_plan`].
pub fn ground_plan(
    plan: &Plan,
    registry: &SkillRegistry,
    object_vocab: &[String],
    location_vocab: &[String],
    embedder: Arc<dyn Embedder>,
    threshold: f64,
) -> Result<(Plan, Vec<GroundingDecision>), GroundingError> {
    Grounder::new(object_vocab, location_vocab, embedder, threshold)?.ground_plan(plan, registry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn cos(a: &str, b: &str) -> f64 {
        let e = TrigramEmbedder;
        embed(a, &e).unwrap().cosine(&embed(b, &e).unwrap())
    }

    #[test]
    fn unit_norm_and_self_similarity() {
        let v = embed("Green Apple", &TrigramEmbedder).unwrap();
        let norm: f64 = v.unit_values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!((cos("apple", "apple") - 1.0).abs() < 1e-12);
        assert!(cos("green apple", "apple") > cos("green apple", "drawer"));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(embed("  ''  ", &TrigramEmbedder), Err(GroundingError::EmptyTerm));
        assert!(matches!(ground_term("x", &[], &TrigramEmbedder, 0.3), Err(GroundingError::EmptyVocabulary)));
    }

    #[test]
    fn exact_and_reserved() {
        let vocab = names(&["pillow", "couch", "drawer"]);
        let d = ground_term("Pillow", &vocab, &TrigramEmbedder, 0.35).unwrap();
        assert_eq!((d.chosen.as_str(), d.score, d.accepted), ("pillow", 1.0, true));
        let u = ground_term("unspecified", &vocab, &TrigramEmbedder, 0.35).unwrap();
        assert_eq!((u.chosen.as_str(), u.accepted, u.kind), ("unspecified", false, DecisionKind::Reserved));
    }

    #[test]
    fn nearest_and_threshold() {
        let vocab = names(&["pillow", "couch", "drawer"]);
        let d = ground_term("pillows", &vocab, &TrigramEmbedder, 0.35).unwrap();
        assert_eq!(d.chosen, "pillow");
        assert!(d.accepted);
        let never = ground_term("pillows", &vocab, &TrigramEmbedder, 1.01).unwrap();
        assert_eq!(never.chosen, "pillows");
        assert!(!never.accepted);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let vocab = names(&["abz", "abq"]);
        let d = ground_term("abc", &vocab, &TrigramEmbedder, 0.0).unwrap();
        assert_eq!(d.chosen, "abz");
    }

    #[test]
    fn role_separation() {
        let g = Grounder::new(&names(&["flour", "pillow"]), &names(&["floor", "couch"]), Arc::new(TrigramEmbedder), 0.35)
            .unwrap();
        let registry = SkillRegistry::household();
        let plan = Plan::new(
            vec![
                Action::new("move_to", ["flour", "flor"]),
                Action::new("move_to", ["couch", "unspecified"]),
            ],
            true,
        );
        let (grounded, log) = g.ground_plan(&plan, &registry).unwrap();
        assert_eq!(grounded.actions[0], Action::new("move_to", ["flour", "floor"]));
        assert_eq!(grounded.actions[1], Action::new("move_to", ["couch", "unspecified"]));
        assert_eq!(log[2].kind, DecisionKind::CrossRole);
        assert_eq!(log.len(), 4);
    }
}
