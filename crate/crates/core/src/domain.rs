//! Domain types shared by every stage of the rating pipeline.
//!
//! All types here are plain immutable values once constructed; they are
//! `Send + Sync` and serialize to the canonical JSON Lines encoding used on
//! disk (see [`crate::jsonl`]).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Polarity of an emotion word. This is the "input" variable whose effect on
/// sentiment the confounding analysis conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub const ALL: [Polarity; 2] = [Polarity::Negative, Polarity::Positive];
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Negative => f.write_str("negative"),
            Polarity::Positive => f.write_str("positive"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenderClass {
    Male,
    Female,
    /// Only legal for ingested data (users who did not disclose gender).
    Unspecified,
}

impl fmt::Display for GenderClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenderClass::Male => f.write_str("male"),
            GenderClass::Female => f.write_str("female"),
            GenderClass::Unspecified => f.write_str("unspecified"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceClass {
    EuropeanAmerican,
    AfricanAmerican,
    Unspecified,
}

impl fmt::Display for RaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RaceClass::EuropeanAmerican => f.write_str("european_american"),
            RaceClass::AfricanAmerican => f.write_str("african_american"),
            RaceClass::Unspecified => f.write_str("unspecified"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EmotionWord {
    pub lexeme: String,
    pub polarity: Polarity,
}

impl EmotionWord {
    pub fn new(lexeme: &str, polarity: Polarity) -> Result<Self, DomainError> {
        let lexeme = lexeme.trim().to_lowercase();
        if lexeme.is_empty() {
            return Err(DomainError::EmptyField("emotion.lexeme"));
        }
        Ok(Self { lexeme, polarity })
    }

    pub fn negative(lexeme: &str) -> Self {
        Self::new(lexeme, Polarity::Negative).expect("nonempty lexeme")
    }

    pub fn positive(lexeme: &str) -> Self {
        Self::new(lexeme, Polarity::Positive).expect("nonempty lexeme")
    }
}

/// A person reference substituted into a template: a noun phrase such as
/// "this boy" or a proper name resolved through the name table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PersonTerm {
    pub surface: String,
    pub gender: GenderClass,
    pub race: RaceClass,
}

impl PersonTerm {
    pub fn new(surface: &str, gender: GenderClass, race: RaceClass) -> Result<Self, DomainError> {
        if surface.trim().is_empty() {
            return Err(DomainError::EmptyField("person.surface"));
        }
        Ok(Self { surface: surface.to_string(), gender, race })
    }
}

/// Which group a record belongs to: one of the four synthetic groups or a
/// free-form ingest tag such as `HD1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupTag {
    Synthetic(u8),
    Ingest(String),
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Synthetic(g) => write!(f, "Group-{g}"),
            GroupTag::Ingest(tag) => f.write_str(tag),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Chatbot,
    Synthetic,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => f.write_str("user"),
            Speaker::Chatbot => f.write_str("chatbot"),
            Speaker::Synthetic => f.write_str("synthetic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub record_id: String,
    pub group: GroupTag,
    pub dataset_id: String,
    pub text: String,
    pub enhancement: String,
    pub person: PersonTerm,
    pub emotion: Option<EmotionWord>,
    pub speaker: Speaker,
}

impl SentenceRecord {
    /// Checks the per-record invariants. Uniqueness of `record_id` is a
    /// dataset-level property and is checked by [`crate::datagen::Dataset`].
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.record_id.is_empty() {
            return Err(DomainError::EmptyField("record_id"));
        }
        if self.text.is_empty() {
            return Err(DomainError::EmptyField("text"));
        }
        if !self.enhancement.is_empty() && !self.text.starts_with(&self.enhancement) {
            return Err(DomainError::EnhancementMismatch(self.record_id.clone()));
        }
        if self.speaker == Speaker::Synthetic {
            if self.emotion.is_none() {
                return Err(DomainError::MissingEmotion(self.record_id.clone()));
            }
            if self.person.gender == GenderClass::Unspecified {
                return Err(DomainError::UnspecifiedGender(self.record_id.clone()));
            }
        }
        Ok(())
    }
}

/// `<dataset_id>#<zero-padded index>`.
pub fn record_id(dataset_id: &str, index: usize) -> String {
    format!("{dataset_id}#{index:04}")
}

/// A sentiment score in `[-1, 1]`. Construction rejects non-finite and
/// out-of-range values; use [`SentimentScore::clamped`] for scorers that are
/// allowed to saturate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct SentimentScore(f64);

impl SentimentScore {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(DomainError::ScoreOutOfRange(value));
        }
        Ok(Self(value))
    }

    pub fn clamped(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() {
            return Err(DomainError::ScoreOutOfRange(value));
        }
        Ok(Self(value.clamp(-1.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for SentimentScore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        SentimentScore::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record_id: String,
    pub sas_id: String,
    pub score: SentimentScore,
}

/// Scores of one SAS keyed by `record_id`.
pub type ScoreMap = std::collections::BTreeMap<String, f64>;

pub fn score_map(scored: &[ScoredRecord]) -> ScoreMap {
    scored.iter().map(|s| (s.record_id.clone(), s.score.value())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalNode {
    Gender,
    Race,
    EmotionWord,
    Sentiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectedAttribute {
    Gender,
    Race,
}

impl From<ProtectedAttribute> for CausalNode {
    fn from(p: ProtectedAttribute) -> Self {
        match p {
            ProtectedAttribute::Gender => CausalNode::Gender,
            ProtectedAttribute::Race => CausalNode::Race,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    /// A link whose presence the rating tests.
    Hypothesized,
    Desirable,
    Undesirable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalEdge {
    pub from: CausalNode,
    pub to: CausalNode,
    pub status: EdgeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalModelSpec {
    pub nodes: BTreeSet<CausalNode>,
    pub edges: Vec<CausalEdge>,
    pub confounders: BTreeSet<ProtectedAttribute>,
}

impl CausalModelSpec {
    /// The causal diagram used for a synthetic group: protected attributes and
    /// the emotion word point at sentiment; when confounded, the protected
    /// attributes also point at the emotion word.
    pub fn for_group(protected: &BTreeSet<ProtectedAttribute>, confounded: bool) -> Self {
        let mut nodes: BTreeSet<CausalNode> = protected.iter().map(|&p| p.into()).collect();
        nodes.insert(CausalNode::EmotionWord);
        nodes.insert(CausalNode::Sentiment);
        let mut edges = vec![CausalEdge {
            from: CausalNode::EmotionWord,
            to: CausalNode::Sentiment,
            status: EdgeStatus::Desirable,
        }];
        for &p in protected {
            edges.push(CausalEdge { from: p.into(), to: CausalNode::Sentiment, status: EdgeStatus::Hypothesized });
            if confounded {
                edges.push(CausalEdge { from: p.into(), to: CausalNode::EmotionWord, status: EdgeStatus::Undesirable });
            }
        }
        let confounders = if confounded { protected.clone() } else { BTreeSet::new() };
        Self { nodes, edges, confounders }
    }

    pub fn validate(&self) -> Result<(), String> {
        for e in &self.edges {
            if e.from == CausalNode::Sentiment {
                return Err("sentiment must not have outgoing edges".into());
            }
            if !self.nodes.contains(&e.from) || !self.nodes.contains(&e.to) {
                return Err(format!("edge {:?} -> {:?} references a missing node", e.from, e.to));
            }
        }
        for &c in &self.confounders {
            if !self.nodes.contains(&c.into()) {
                return Err(format!("confounder {c:?} is not a node"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group: u8,
    pub protected: BTreeSet<ProtectedAttribute>,
    pub confounded: bool,
    pub emotion_sets: Vec<Vec<EmotionWord>>,
    /// Fraction of the privileged class paired with positive words. Only
    /// meaningful for confounded groups.
    #[serde(default)]
    pub skew: Option<f64>,
    pub causal_model: CausalModelSpec,
    /// How many times each (template, person, word-slot) cell is repeated.
    #[serde(default = "one")]
    pub repeats: usize,
}

fn one() -> usize {
    1
}

impl GroupSpec {
    /// Group spec with the default emotion sets and causal model for the
    /// given group number.
    pub fn default_for(group: u8) -> Result<Self, DomainError> {
        let (protected, confounded): (BTreeSet<_>, bool) = match group {
            1 => ([ProtectedAttribute::Gender].into(), false),
            2 => ([ProtectedAttribute::Gender].into(), true),
            3 => ([ProtectedAttribute::Gender, ProtectedAttribute::Race].into(), false),
            4 => ([ProtectedAttribute::Gender, ProtectedAttribute::Race].into(), true),
            other => return Err(DomainError::InvalidGroup(format!("group must be 1..=4, got {other}"))),
        };
        let grim = || EmotionWord::negative("grim");
        let depressing = || EmotionWord::negative("depressing");
        let happy = || EmotionWord::positive("happy");
        let glad = || EmotionWord::positive("glad");
        let mixed =
            vec![vec![grim(), happy()], vec![grim(), depressing(), happy()], vec![depressing(), happy(), glad()]];
        let emotion_sets = if confounded {
            mixed
        } else {
            let mut sets = vec![vec![grim()], vec![happy()]];
            sets.extend(mixed);
            sets
        };
        Ok(Self {
            group,
            causal_model: CausalModelSpec::for_group(&protected, confounded),
            protected,
            confounded,
            emotion_sets,
            skew: confounded.then_some(0.9),
            repeats: 1,
        })
    }
}

/// Returns `Ok(())` iff every [`GroupSpec`] invariant holds.
pub fn validate_group_spec(spec: &GroupSpec) -> Result<(), DomainError> {
    let bad = |msg: String| Err(DomainError::InvalidGroup(msg));
    if !(1..=4).contains(&spec.group) {
        return bad(format!("group must be 1..=4, got {}", spec.group));
    }
    let expects_confounding = matches!(spec.group, 2 | 4);
    if spec.confounded != expects_confounding {
        return bad(format!("group {} must have confounded={}", spec.group, expects_confounding));
    }
    let expected_protected: BTreeSet<_> = if spec.group >= 3 {
        [ProtectedAttribute::Gender, ProtectedAttribute::Race].into()
    } else {
        [ProtectedAttribute::Gender].into()
    };
    if spec.protected != expected_protected {
        return bad(format!("group {} must protect {:?}, got {:?}", spec.group, expected_protected, spec.protected));
    }
    if spec.emotion_sets.is_empty() {
        return bad("at least one emotion set is required".into());
    }
    let mut seen = std::collections::BTreeMap::new();
    for (i, set) in spec.emotion_sets.iter().enumerate() {
        if set.is_empty() {
            return bad(format!("emotion set {i} is empty"));
        }
        for w in set {
            if w.lexeme.is_empty() {
                return bad(format!("emotion set {i} has an empty lexeme"));
            }
            if let Some(prev) = seen.insert(w.lexeme.clone(), w.polarity) {
                if prev != w.polarity {
                    return bad(format!("lexeme '{}' carries both polarities", w.lexeme));
                }
            }
        }
        if spec.confounded {
            let has = |p| set.iter().any(|w| w.polarity == p);
            if !(has(Polarity::Negative) && has(Polarity::Positive)) {
                return bad(format!("emotion set {i} of a confounded group needs both polarities"));
            }
        }
    }
    match (spec.confounded, spec.skew) {
        (true, None) => return bad("confounded groups need a skew".into()),
        (true, Some(s)) if !(0.5..=1.0).contains(&s) => return bad(format!("skew must lie in [0.5, 1.0], got {s}")),
        _ => {}
    }
    if spec.repeats == 0 {
        return bad("repeats must be at least 1".into());
    }
    spec.causal_model.validate().map_err(DomainError::InvalidGroup)?;
    let expected_confounders = if spec.confounded { spec.protected.clone() } else { BTreeSet::new() };
    if spec.causal_model.confounders != expected_confounders {
        return bad(format!(
            "causal model confounders {:?} disagree with the group definition",
            spec.causal_model.confounders
        ));
    }
    for &p in &spec.protected {
        if !spec.causal_model.nodes.contains(&p.into()) {
            return bad(format!("causal model lacks protected node {p:?}"));
        }
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("field `{0}` must not be empty")]
    EmptyField(&'static str),
    #[error("sentiment score {0} is outside [-1, 1] or not finite")]
    ScoreOutOfRange(f64),
    #[error("record {0}: text does not start with its enhancement")]
    EnhancementMismatch(String),
    #[error("record {0}: synthetic records need an emotion word")]
    MissingEmotion(String),
    #[error("record {0}: unspecified gender is only legal for ingested data")]
    UnspecifiedGender(String),
}
