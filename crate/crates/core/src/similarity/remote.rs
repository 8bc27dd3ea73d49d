use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{EmbeddingProvider, SimilarityError};

/// Client for an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    base_url: String,
    api_key: String,
    model: String,
    name: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, api_key: &str, model: &str) -> Result<Self, SimilarityError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| SimilarityError::Provider(e.to_string()))?;
        Ok(RemoteEmbedder {
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            model: model.to_string(),
            name: format!("remote:{model}"),
            client,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let url = format!("{}/embeddings", self.base_url);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&json!({ "model": self.model, "input": texts }))
            .send()
            .map_err(|e| SimilarityError::Provider(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(SimilarityError::Provider(format!(
                "{url} returned {status}: {}",
                body.chars().take(300).collect::<String>()
            )));
        }
        let mut parsed: EmbeddingResponse = response
            .json()
            .map_err(|e| SimilarityError::Provider(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(SimilarityError::Count {
                expected: texts.len(),
                got: parsed.data.len(),
            });
        }
        parsed.data.sort_by_key(|d| d.index);
        let vectors: Vec<Vec<f64>> = parsed.data.into_iter().map(|d| d.embedding).collect();
        if let Some(first) = vectors.first() {
            if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
                return Err(SimilarityError::Dimension(first.len(), bad.len()));
            }
        }
        Ok(vectors)
    }
}
