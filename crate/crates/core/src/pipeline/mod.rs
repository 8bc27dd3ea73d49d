//! Option 1 (regenerate) and Option 2 (reorganize) end to end.

pub mod fixer;
pub mod patch;
pub mod rebuild;
pub mod records;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, AuditReport};
use crate::chunker::{chunk_document, stitch_documents, ChunkError, DEFAULT_BUDGET, MIN_BUDGET};
use crate::dom::{parse, Document, NodeId};
use crate::extract::{extract_accessible, AccessibleContent};
use crate::llm::{
    extract_html_payload, run_sequence, ChatProvider, MockProvider, ModelParams, Mode,
    PromptTemplate, RemoteChatProvider, SequenceError, MAX_BUDGET,
};
use crate::similarity::{
    aggregated_similarity, find_missing_links, reinsert_links, EmbeddingProvider, LexicalEmbedder,
    RemoteEmbedder, SimilarityReport, DEFAULT_THRESHOLD,
};

pub use fixer::offline_reorganize;
pub use patch::{apply_patches, parse_patches, ParsedPatches, PatchError, Rejection, TagPatch};
pub use rebuild::offline_regenerate;
pub use records::{record_parts, serialize_tag_records, tag_records, TagRecord};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Mock,
    Offline,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Remote => "remote",
            ProviderKind::Mock => "mock",
            ProviderKind::Offline => "offline",
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote" => Ok(ProviderKind::Remote),
            "mock" => Ok(ProviderKind::Mock),
            "offline" => Ok(ProviderKind::Offline),
            other => Err(format!("unknown provider {other:?} (expected remote, mock or offline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    pub mode: Mode,
    pub provider: ProviderKind,
    pub threshold: f64,
    pub budget: usize,
    pub max_attempts: u32,
    pub params: ModelParams,
}

impl TransformOptions {
    pub fn new(mode: Mode, provider: ProviderKind) -> Self {
        TransformOptions {
            mode,
            provider,
            threshold: DEFAULT_THRESHOLD,
            budget: DEFAULT_BUDGET,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            params: ModelParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let invalid = |m: String| Err(TransformError::InvalidOptions(m));
        if !(0.0..=1.0).contains(&self.threshold) {
            return invalid(format!("threshold {} is outside [0, 1]", self.threshold));
        }
        if self.max_attempts == 0 {
            return invalid("max_attempts must be at least 1".into());
        }
        if !(MIN_BUDGET..=MAX_BUDGET).contains(&self.budget) {
            return invalid(format!("budget {} is outside [{MIN_BUDGET}, {MAX_BUDGET}]", self.budget));
        }
        Ok(())
    }
}

/// Connection settings for the remote provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    /// Embedding model; lexical similarity is used when unset.
    pub embed_model: Option<String>,
    pub timeout: Duration,
}

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            embed_model: None,
            timeout: Duration::from_secs(300),
        }
    }
}

/// Model and embedder used by one run.
#[derive(Clone)]
pub struct Backend {
    pub chat: Option<Arc<dyn ChatProvider>>,
    pub embedder: Arc<dyn EmbeddingProvider>,
}

impl Backend {
    pub fn offline() -> Self {
        Backend {
            chat: None,
            embedder: Arc::new(LexicalEmbedder),
        }
    }

    pub fn with_chat(chat: Arc<dyn ChatProvider>) -> Self {
        Backend {
            chat: Some(chat),
            ..Backend::offline()
        }
    }

    /// Backend for `kind`. `mock` echoes each part back unchanged.
    pub fn for_provider(kind: ProviderKind, config: &ProviderConfig) -> Result<Self, TransformError> {
        match kind {
            ProviderKind::Offline => Ok(Backend::offline()),
            ProviderKind::Mock => Ok(Backend::with_chat(Arc::new(MockProvider::echo()))),
            ProviderKind::Remote => {
                let key = config
                    .api_key
                    .as_deref()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| TransformError::Unavailable("no API key configured".into()))?;
                let chat = RemoteChatProvider::new(&config.base_url, key, config.timeout)
                    .map_err(|e| TransformError::Unavailable(e.to_string()))?;
                let embedder: Arc<dyn EmbeddingProvider> = match &config.embed_model {
                    Some(model) => Arc::new(
                        RemoteEmbedder::new(&config.base_url, key, model)
                            .map_err(|e| TransformError::Unavailable(e.to_string()))?,
                    ),
                    None => Arc::new(LexicalEmbedder),
                };
                Ok(Backend {
                    chat: Some(Arc::new(chat)),
                    embedder,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub html: String,
    pub patches: Option<Vec<TagPatch>>,
    pub similarity: SimilarityReport,
    pub audit_before: AuditReport,
    pub audit_after: AuditReport,
    pub attempts: u32,
    pub chunks: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error("provider failed on part {index}: {message}")]
    Provider { index: usize, message: String },
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("similarity gate failed after {attempts} attempt(s): {reason}")]
    GateFailed {
        best_score: Option<f64>,
        threshold: f64,
        attempts: u32,
        reason: String,
    },
}

impl From<SequenceError> for TransformError {
    fn from(e: SequenceError) -> Self {
        TransformError::Provider {
            index: e.index,
            message: e.source.to_string(),
        }
    }
}

/// Remove scripts, style sheets and inline event handlers.
pub fn sanitize(doc: &mut Document) {
    let all: Vec<NodeId> = doc.descendants(doc.root()).collect();
    let mut drop = Vec::new();
    for id in all {
        if matches!(doc.tag(id), Some("script" | "style")) {
            drop.push(id);
            continue;
        }
        let handlers: Vec<String> = doc
            .node(id)
            .attrs()
            .iter()
            .filter(|(n, _)| n.starts_with("on"))
            .map(|(n, _)| n.clone())
            .collect();
        for name in handlers {
            doc.remove_attr(id, &name).expect("element");
        }
    }
    for id in drop {
        // Nested drops may already be gone with an ancestor.
        let _ = doc.detach(id);
    }
}

struct Gate<'a> {
    original: AccessibleContent,
    embedder: &'a dyn EmbeddingProvider,
    threshold: f64,
}

impl Gate<'_> {
    fn score(&self, candidate: &Document) -> Result<SimilarityReport, TransformError> {
        let score = aggregated_similarity(&self.original, &extract_accessible(candidate), self.embedder)
            .map_err(|e| TransformError::Embedding(e.to_string()))?;
        Ok(SimilarityReport::new(score, self.threshold, self.embedder.name()))
    }
}

/// Outcome of attempts until one passes the gate.
struct Attempts<T> {
    best: Option<f64>,
    made: u32,
    last_reason: String,
    passed: Option<(T, SimilarityReport)>,
}

/// One attempt: a scored candidate, or the reason it could not be scored.
type Attempt<T> = Result<Result<(T, SimilarityReport), String>, TransformError>;

fn attempt_loop<T>(
    max_attempts: u32,
    threshold: f64,
    mut attempt: impl FnMut(u32) -> Attempt<T>,
) -> Result<(T, SimilarityReport, u32), TransformError> {
    let mut state: Attempts<T> = Attempts {
        best: None,
        made: 0,
        last_reason: String::new(),
        passed: None,
    };
    while state.made < max_attempts && state.passed.is_none() {
        state.made += 1;
        match attempt(state.made)? {
            Ok((value, report)) => {
                state.best = Some(state.best.map_or(report.score, |b: f64| b.max(report.score)));
                if report.pass {
                    state.passed = Some((value, report));
                } else {
                    tracing::info!(attempt = state.made, score = report.score, "similarity below threshold");
                    state.last_reason = format!("score {:.4} below threshold {threshold}", report.score);
                }
            }
            Err(reason) => {
                tracing::info!(attempt = state.made, %reason, "attempt produced no usable output");
                state.last_reason = reason;
            }
        }
    }
    match state.passed {
        Some((value, report)) => Ok((value, report, state.made)),
        None => Err(TransformError::GateFailed {
            best_score: state.best,
            threshold,
            attempts: state.made,
            reason: state.last_reason,
        }),
    }
}

fn chat<'a>(backend: &'a Backend, opts: &TransformOptions) -> Result<&'a dyn ChatProvider, TransformError> {
    backend
        .chat
        .as_deref()
        .ok_or_else(|| TransformError::Unavailable(format!("no chat provider for {}", opts.provider)))
}

/// Option 1: rebuild the page as text-only HTML.
pub fn regenerate(doc: &Document, opts: &TransformOptions, backend: &Backend) -> Result<TransformResult, TransformError> {
    opts.validate()?;
    let gate = Gate {
        original: extract_accessible(doc),
        embedder: backend.embedder.as_ref(),
        threshold: opts.threshold,
    };
    let (candidate, mut similarity, attempts, chunks) = if opts.provider == ProviderKind::Offline {
        // Deterministic, so one attempt says everything.
        let (candidate, report, attempts) = attempt_loop(1, opts.threshold, |_| {
            let candidate = parse(&offline_regenerate(doc));
            let report = gate.score(&candidate)?;
            Ok(Ok((candidate, report)))
        })?;
        (candidate, report, attempts, 0)
    } else {
        let provider = chat(backend, opts)?;
        let chunks = chunk_document(doc, opts.budget)?;
        let parts: Vec<String> = chunks.into_iter().map(|c| c.html).collect();
        let template = PromptTemplate::builtin(Mode::Regenerate);
        let (candidate, report, attempts) = attempt_loop(opts.max_attempts, opts.threshold, |_| {
            let output = run_sequence(&parts, &template, provider, &opts.params)?;
            let payloads: Vec<&str> = output.responses.iter().map(|r| extract_html_payload(r)).collect();
            let mut candidate = stitch_documents(&payloads);
            sanitize(&mut candidate);
            let report = gate.score(&candidate)?;
            Ok(Ok((candidate, report)))
        })?;
        (candidate, report, attempts, parts.len())
    };
    let missing = find_missing_links(doc, &candidate);
    let final_doc = reinsert_links(&candidate, &missing);
    similarity.missing_anchors = missing;
    Ok(TransformResult {
        html: final_doc.to_html(),
        patches: None,
        similarity,
        audit_before: run_audit(doc),
        audit_after: run_audit(&final_doc),
        attempts,
        chunks,
    })
}

/// Option 2: keep the page and its text, change tags and attributes only.
pub fn reorganize(doc: &Document, opts: &TransformOptions, backend: &Backend) -> Result<TransformResult, TransformError> {
    opts.validate()?;
    let gate = Gate {
        original: extract_accessible(doc),
        embedder: backend.embedder.as_ref(),
        threshold: opts.threshold,
    };
    let apply = |patches: Vec<TagPatch>| -> Attempt<(Document, Vec<TagPatch>)> {
        let patched = match apply_patches(doc, &patches) {
            Ok(d) => d,
            Err(e) => return Ok(Err(e.to_string())),
        };
        let report = gate.score(&patched)?;
        Ok(Ok(((patched, patch::with_paths(doc, patches)), report)))
    };
    let ((patched, patches), similarity, attempts, chunks) = if opts.provider == ProviderKind::Offline {
        let (value, report, attempts) = attempt_loop(1, opts.threshold, |_| apply(offline_reorganize(doc)))?;
        (value, report, attempts, 0)
    } else {
        let provider = chat(backend, opts)?;
        let parts = record_parts(&tag_records(doc), opts.budget);
        let template = PromptTemplate::builtin(Mode::Reorganize);
        let (value, report, attempts) = attempt_loop(opts.max_attempts, opts.threshold, |_| {
            let output = run_sequence(&parts, &template, provider, &opts.params)?;
            let mut patches = Vec::new();
            for (i, response) in output.responses.iter().enumerate() {
                match parse_patches(response, doc) {
                    Ok(parsed) => {
                        for r in &parsed.rejected {
                            tracing::debug!(part = i + 1, entry = r.entry, reason = %r.reason, "patch rejected");
                        }
                        patches.extend(parsed.patches);
                    }
                    Err(e) => return Ok(Err(format!("part {}: {e}", i + 1))),
                }
            }
            apply(patches)
        })?;
        (value, report, attempts, parts.len())
    };
    Ok(TransformResult {
        html: patched.to_html(),
        patches: Some(patches),
        similarity,
        audit_before: run_audit(doc),
        audit_after: run_audit(&patched),
        attempts,
        chunks,
    })
}

pub fn transform(doc: &Document, opts: &TransformOptions, backend: &Backend) -> Result<TransformResult, TransformError> {
    match opts.mode {
        Mode::Regenerate => regenerate(doc, opts, backend),
        Mode::Reorganize => reorganize(doc, opts, backend),
    }
}
