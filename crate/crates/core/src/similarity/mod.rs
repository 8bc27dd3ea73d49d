//! Aggregated semantic similarity between two documents and the acceptance
//! gate built on it.
//!
//! Both documents are reduced to their accessible content, the concatenated
//! texts are embedded by an [`EmbeddingProvider`], and the cosine of the two
//! vectors is the score. The deterministic [`LexicalEmbedder`] (term
//! frequencies over a vocabulary shared by the compared texts) is the default;
//! [`RemoteEmbedder`] talks to an embeddings endpoint.

mod links;
mod remote;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use links::{find_missing_links, normalize_href, reinsert_links, MissingAnchor};
pub use remote::RemoteEmbedder;

use crate::extract::AccessibleContent;

/// Default acceptance threshold for transformed pages.
pub const DEFAULT_THRESHOLD: f64 = 0.90;

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("embedding provider returned {got} vectors for {expected} inputs")]
    Count { expected: usize, got: usize },
    #[error("embedding vectors differ in dimension ({0} vs {1})")]
    Dimension(usize, usize),
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Embed a batch of texts. All returned vectors have the same dimension.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError>;
}

/// Case-folded word tokens, split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn term_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

/// Term-frequency vector over the text's own sorted vocabulary.
pub fn lexical_embed(text: &str) -> Vec<f64> {
    term_counts(text).into_values().map(f64::from).collect()
}

/// Term-frequency vectors over the sorted union vocabulary of `texts`.
pub fn lexical_embed_batch(texts: &[&str]) -> Vec<Vec<f64>> {
    let counts: Vec<BTreeMap<String, u32>> = texts.iter().map(|t| term_counts(t)).collect();
    let vocabulary: BTreeSet<&String> = counts.iter().flat_map(|c| c.keys()).collect();
    counts
        .iter()
        .map(|c| {
            vocabulary
                .iter()
                .map(|term| f64::from(c.get(*term).copied().unwrap_or(0)))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalEmbedder;

impl EmbeddingProvider for LexicalEmbedder {
    fn name(&self) -> &str {
        "lexical"
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        Ok(lexical_embed_batch(texts))
    }
}

/// Cosine similarity clamped to `[0, 1]`; a zero vector scores 0.
///
/// Computed as `dot / sqrt(|a|² |b|²)` so that identical integer-count
/// vectors give exactly 1.0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
}

/// Similarity of two accessible-content extractions.
///
/// Both empty scores 1.0, exactly one empty scores 0.0.
pub fn aggregated_similarity(
    a: &AccessibleContent,
    b: &AccessibleContent,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, SimilarityError> {
    text_similarity(&a.concatenated, &b.concatenated, provider)
}

pub fn text_similarity(
    a: &str,
    b: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, SimilarityError> {
    match (a.trim().is_empty(), b.trim().is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let vectors = provider.embed(&[a, b])?;
    let [va, vb] = vectors.as_slice() else {
        return Err(SimilarityError::Count {
            expected: 2,
            got: vectors.len(),
        });
    };
    if va.len() != vb.len() {
        return Err(SimilarityError::Dimension(va.len(), vb.len()));
    }
    Ok(cosine(va, vb))
}

/// Inclusive threshold check.
pub fn gate(score: f64, threshold: f64) -> bool {
    score >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub score: f64,
    pub threshold: f64,
    pub pass: bool,
    pub provider: String,
    pub missing_anchors: Vec<MissingAnchor>,
}

impl SimilarityReport {
    pub fn new(score: f64, threshold: f64, provider: &str) -> Self {
        SimilarityReport {
            score,
            threshold,
            pass: gate(score, threshold),
            provider: provider.to_string(),
            missing_anchors: Vec::new(),
        }
    }
}
