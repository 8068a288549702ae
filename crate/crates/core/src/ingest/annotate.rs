//! Majority-vote aggregation of three annotators' sentiment labels.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub annotator: String,
    pub labels: BTreeMap<String, i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationAggregate {
    pub labels: BTreeMap<String, i8>,
    /// Percent of records on which all annotators agree.
    pub agreement: f64,
    /// Records resolved by the random three-way-split rule.
    pub three_way_splits: Vec<String>,
}

fn parse_label(raw: &str) -> Option<i8> {
    match raw.trim() {
        "-1" => Some(-1),
        "0" => Some(0),
        "1" | "+1" => Some(1),
        _ => None,
    }
}

/// Reads a `record_id,label` CSV with labels in `{-1, 0, +1}`.
pub fn read_annotations(path: &Path) -> Result<AnnotationSet, IngestError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: name.clone(), source })?;
    let annotator = path.file_stem().and_then(|s| s.to_str()).unwrap_or("annotator").to_string();
    parse_annotations(&text, &annotator, &name)
}

pub fn parse_annotations(text: &str, annotator: &str, path: &str) -> Result<AnnotationSet, IngestError> {
    let schema = |line: u64, message: String| IngestError::Schema { path: path.to_string(), line, message };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    let id_col =
        headers.iter().position(|h| h == "record_id").ok_or_else(|| schema(1, "missing record_id column".into()))?;
    let label_col =
        headers.iter().position(|h| h == "label").ok_or_else(|| schema(1, "missing label column".into()))?;
    let mut labels = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(id_col).unwrap_or_default().to_string();
        let raw = rec.get(label_col).unwrap_or_default();
        let label = parse_label(raw).ok_or_else(|| schema(line, format!("label {raw:?} is not -1, 0 or +1")))?;
        if id.is_empty() {
            return Err(schema(line, "empty record_id".into()));
        }
        if labels.insert(id.clone(), label).is_some() {
            return Err(schema(line, format!("duplicate record_id {id}")));
        }
    }
    Ok(AnnotationSet { annotator: annotator.to_string(), labels })
}

fn tie_rng(seed: u64, record_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(record_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Majority label per record. When all three annotators disagree, one of
/// the three labels is drawn from a stream keyed on `(seed, record_id)`, so
/// the result does not depend on annotator order.
pub fn aggregate_annotations(sets: &[AnnotationSet], seed: u64) -> Result<AnnotationAggregate, IngestError> {
    if sets.len() != 3 {
        return Err(IngestError::AnnotatorCount(sets.len()));
    }
    for s in &sets[1..] {
        if s.labels.keys().ne(sets[0].labels.keys()) {
            let missing = sets[0]
                .labels
                .keys()
                .find(|k| !s.labels.contains_key(*k))
                .or_else(|| s.labels.keys().find(|k| !sets[0].labels.contains_key(*k)))
                .cloned()
                .unwrap_or_default();
            return Err(IngestError::CoverageMismatch(format!(
                "{} and {} differ at {missing}",
                sets[0].annotator, s.annotator
            )));
        }
    }
    let mut labels = BTreeMap::new();
    let mut agree = 0usize;
    let mut splits = Vec::new();
    for id in sets[0].labels.keys() {
        let mut votes: Vec<i8> = sets.iter().map(|s| s.labels[id]).collect();
        votes.sort_unstable();
        let label = if votes[0] == votes[2] {
            agree += 1;
            votes[0]
        } else if votes[0] == votes[1] || votes[1] == votes[2] {
            votes[1]
        } else {
            splits.push(id.clone());
            *votes.choose(&mut tie_rng(seed, id)).expect("three votes")
        };
        labels.insert(id.clone(), label);
    }
    let n = labels.len();
    let agreement = if n == 0 { 100.0 } else { agree as f64 / n as f64 * 100.0 };
    Ok(AnnotationAggregate { labels, agreement, three_way_splits: splits })
}
