//! Uniform scoring interface over the built-in reference systems and
//! external black-box systems.

pub mod builtin;
pub mod conformance;
pub mod http;
pub mod worker;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ScoredRecord, SentimentScore};
use crate::retry::RetryPolicy;

pub use builtin::{tokenize, SentimentLexicon};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

#[derive(Debug, Error)]
pub enum SasError {
    #[error("text is empty")]
    EmptyText,
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("worker crashed: {0}")]
    WorkerCrashed(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("score {score} for {id} is outside [-1, 1]")]
    ScoreOutOfRange { id: String, score: f64 },
    #[error("no response within {0} ms")]
    Timeout(u64),
    #[error("adapter error: {0}")]
    AdapterError(String),
    #[error("no label for record {0}")]
    MissingLabel(String),
    #[error("duplicate record id {0}")]
    DuplicateRecord(String),
    #[error("{0} scores whole record batches, not single texts")]
    BatchOnly(String),
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT_MS
}

fn default_max_in_flight() -> usize {
    DEFAULT_MAX_IN_FLIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum SasKind {
    /// `+1` when any female marker occurs as a token, `-1` otherwise.
    BiasedFemale { female_markers: BTreeSet<String> },
    /// Uniform draw in `[-1, 1]` keyed on `(seed, text)`.
    Random { seed: u64 },
    /// Mean lexicon value of the matched tokens.
    Lexicon { lexicon: SentimentLexicon },
    /// Subprocess speaking newline-delimited JSON on stdin/stdout.
    ExternalWorker {
        command: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
    },
    /// Service accepting `POST /score`.
    ExternalHttp {
        endpoint: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
        #[serde(default)]
        retry: RetryPolicy,
    },
    /// Precomputed scores keyed by record id, e.g. aggregated human labels.
    Labels { labels: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SasDescriptor {
    pub sas_id: String,
    #[serde(flatten)]
    pub kind: SasKind,
}

impl SasDescriptor {
    pub fn new(sas_id: &str, kind: SasKind) -> Self {
        Self { sas_id: sas_id.to_string(), kind }
    }

    pub fn validate(&self) -> Result<(), SasError> {
        match &self.kind {
            SasKind::Lexicon { lexicon } => lexicon.validate(),
            SasKind::BiasedFemale { female_markers } => {
                if female_markers.iter().any(|m| m.is_empty() || *m != m.to_lowercase()) {
                    return Err(SasError::InvalidLexicon("female markers must be nonempty lowercase".into()));
                }
                Ok(())
            }
            SasKind::ExternalWorker { command, max_in_flight, .. } => {
                if command.trim().is_empty() {
                    return Err(SasError::AdapterError("empty worker command".into()));
                }
                if *max_in_flight == 0 {
                    return Err(SasError::AdapterError("max_in_flight must be positive".into()));
                }
                Ok(())
            }
            SasKind::ExternalHttp { endpoint, max_in_flight, .. } => {
                if endpoint.is_empty() {
                    return Err(SasError::AdapterError("empty endpoint".into()));
                }
                if *max_in_flight == 0 {
                    return Err(SasError::AdapterError("max_in_flight must be positive".into()));
                }
                Ok(())
            }
            SasKind::Labels { labels } => {
                for (id, &v) in labels {
                    SentimentScore::new(v).map_err(|_| SasError::ScoreOutOfRange { id: id.clone(), score: v })?;
                }
                Ok(())
            }
            SasKind::Random { .. } => Ok(()),
        }
    }
}

/// Scores one text with an in-process system.
pub fn score(sas: &SasDescriptor, text: &str) -> Result<SentimentScore, SasError> {
    if text.is_empty() {
        return Err(SasError::EmptyText);
    }
    let v = match &sas.kind {
        SasKind::BiasedFemale { female_markers } => builtin::biased_female(female_markers, text),
        SasKind::Random { seed } => builtin::random(*seed, text),
        SasKind::Lexicon { lexicon } => lexicon.score(text),
        _ => return Err(SasError::BatchOnly(sas.sas_id.clone())),
    };
    SentimentScore::new(v).map_err(|_| SasError::ScoreOutOfRange { id: sas.sas_id.clone(), score: v })
}

/// One `(record_id, text)` pair to be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub text: String,
}

/// Scores a batch with any kind of system. Output is sorted by record id
/// regardless of the order in which external systems answer.
pub fn score_records(sas: &SasDescriptor, requests: &[ScoreRequest]) -> Result<Vec<ScoredRecord>, SasError> {
    sas.validate()?;
    let mut seen = BTreeSet::new();
    for r in requests {
        if !seen.insert(r.id.as_str()) {
            return Err(SasError::DuplicateRecord(r.id.clone()));
        }
    }
    let pairs: Vec<(String, SentimentScore)> = match &sas.kind {
        SasKind::ExternalWorker { command, timeout_ms, max_in_flight } => {
            worker::score_worker(command, requests, *timeout_ms, *max_in_flight)?
        }
        SasKind::ExternalHttp { endpoint, timeout_ms, max_in_flight, retry } => {
            http::score_http(endpoint, requests, *timeout_ms, *max_in_flight, retry)?
        }
        SasKind::Labels { labels } => requests
            .iter()
            .map(|r| {
                let v = *labels.get(&r.id).ok_or_else(|| SasError::MissingLabel(r.id.clone()))?;
                let s = SentimentScore::new(v).map_err(|_| SasError::ScoreOutOfRange { id: r.id.clone(), score: v })?;
                Ok((r.id.clone(), s))
            })
            .collect::<Result<_, SasError>>()?,
        _ => requests.iter().map(|r| Ok((r.id.clone(), score(sas, &r.text)?))).collect::<Result<_, SasError>>()?,
    };
    let mut out: Vec<ScoredRecord> = pairs
        .into_iter()
        .map(|(record_id, score)| ScoredRecord { record_id, sas_id: sas.sas_id.clone(), score })
        .collect();
    out.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    Ok(out)
}

/// Parses one response object and validates it against the outstanding
/// request ids. Shared by the worker and HTTP adapters.
pub(crate) fn parse_response(line: &str) -> Result<(String, f64), SasError> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| SasError::ProtocolViolation(format!("malformed response {line:?}: {e}")))?;
    let obj =
        value.as_object().ok_or_else(|| SasError::ProtocolViolation(format!("response is not an object: {line}")))?;
    if let Some(err) = obj.get("error") {
        return Err(SasError::ProtocolViolation(format!("worker reported error: {err}")));
    }
    let id = obj
        .get("id")
        .and_then(|v| v.as_str())
        .ok_or_else(|| SasError::ProtocolViolation(format!("response without string id: {line}")))?;
    let score = obj
        .get("score")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| SasError::ProtocolViolation(format!("response without numeric score: {line}")))?;
    Ok((id.to_string(), score))
}

pub(crate) fn validate_score(id: &str, score: f64) -> Result<SentimentScore, SasError> {
    SentimentScore::new(score).map_err(|_| SasError::ScoreOutOfRange { id: id.to_string(), score })
}
