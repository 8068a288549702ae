//! Reference systems: the biased-female scorer, the random scorer and a
//! lexicon scorer.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SasError;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentLexicon {
    pub entries: BTreeMap<String, f64>,
    #[serde(default)]
    pub female_markers: BTreeSet<String>,
}

impl SentimentLexicon {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../data/lexicon.json")).expect("builtin lexicon parses")
    }

    pub fn validate(&self) -> Result<(), SasError> {
        for (k, &v) in &self.entries {
            if k.is_empty() || *k != k.to_lowercase() {
                return Err(SasError::InvalidLexicon(format!("entry {k:?} must be nonempty lowercase")));
            }
            if !v.is_finite() || !(-1.0..=1.0).contains(&v) {
                return Err(SasError::InvalidLexicon(format!("entry {k:?} has value {v} outside [-1, 1]")));
            }
        }
        if let Some(m) = self.female_markers.iter().find(|m| m.is_empty() || **m != m.to_lowercase()) {
            return Err(SasError::InvalidLexicon(format!("marker {m:?} must be nonempty lowercase")));
        }
        Ok(())
    }

    /// Arithmetic mean over matched tokens, counting repeats; `0.0` when
    /// nothing matches.
    pub fn score(&self, text: &str) -> f64 {
        let matched: Vec<f64> = tokenize(text).iter().filter_map(|t| self.entries.get(t).copied()).collect();
        if matched.is_empty() {
            0.0
        } else {
            matched.iter().sum::<f64>() / matched.len() as f64
        }
    }
}

pub fn biased_female(markers: &BTreeSet<String>, text: &str) -> f64 {
    if tokenize(text).iter().any(|t| markers.contains(t)) {
        1.0
    } else {
        -1.0
    }
}

/// Draw keyed on `sha256(seed || text)` so the score does not depend on
/// the position of the text in a batch.
pub fn random(seed: u64, text: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(text.as_bytes());
    let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
    rng.gen_range(-1.0..=1.0)
}
