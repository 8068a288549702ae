//! Template-based synthetic corpora for the four data groups.
//!
//! Groups 1 and 3 take the full cartesian product of templates, person terms
//! and emotion words, so every protected class sees exactly the same emotion
//! words. Groups 2 and 4 pair each (template, person) slot with a polarity
//! drawn so that the privileged class is mostly positive and the
//! disadvantaged class mostly negative, which makes the protected attribute a
//! confounder of the emotion-word/sentiment relation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    record_id, validate_group_spec, DomainError, EmotionWord, GenderClass, GroupSpec, GroupTag, PersonTerm, Polarity,
    ProtectedAttribute, RaceClass, SentenceRecord, Speaker,
};

pub const PERSON_SLOT: &str = "<person>";
pub const EMOTION_SLOT: &str = "<emotion>";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error(transparent)]
    InvalidGroup(#[from] DomainError),
    #[error("emotion lexicon is empty")]
    EmptyLexicon,
    #[error("template {index} ({template:?}) must contain <person> and <emotion> exactly once")]
    InvalidTemplate { index: usize, template: String },
    #[error("invalid name table: {0}")]
    InvalidNames(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub templates: Vec<String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self { templates: vec!["I made <person> feel <emotion>.".to_string(), "<person> feels <emotion>.".to_string()] }
    }
}

impl TemplateSet {
    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.templates.is_empty() {
            return Err(DatagenError::InvalidTemplate { index: 0, template: String::new() });
        }
        for (index, t) in self.templates.iter().enumerate() {
            if t.matches(PERSON_SLOT).count() != 1 || t.matches(EMOTION_SLOT).count() != 1 {
                return Err(DatagenError::InvalidTemplate { index, template: t.clone() });
            }
        }
        Ok(())
    }
}

/// Fills a template. A sentence that starts with the person term gets its
/// first letter capitalized.
pub fn render(template: &str, person: &str, emotion: &str) -> String {
    let filled = template.replace(PERSON_SLOT, person).replace(EMOTION_SLOT, emotion);
    let mut chars = filled.chars();
    match chars.next() {
        Some(c) if template.starts_with(PERSON_SLOT) => c.to_uppercase().chain(chars).collect(),
        _ => filled,
    }
}

/// Inverse of [`render`]: recovers `(person, emotion)` from a sentence built
/// from `template`, or `None` if the sentence does not match.
pub fn parse_back(template: &str, text: &str) -> Option<(String, String)> {
    let p = template.find(PERSON_SLOT)?;
    let e = template.find(EMOTION_SLOT)?;
    let person_first = p < e;
    let (first, second) = if person_first { (p, e) } else { (e, p) };
    let first_len = if person_first { PERSON_SLOT.len() } else { EMOTION_SLOT.len() };
    let second_len = if person_first { EMOTION_SLOT.len() } else { PERSON_SLOT.len() };
    let prefix = &template[..first];
    let middle = &template[first + first_len..second];
    let suffix = &template[second + second_len..];

    let body = text.strip_suffix(suffix)?;
    let rest = if prefix.is_empty() { body } else { body.strip_prefix(prefix)? };
    let split = rest.rfind(middle).filter(|_| !middle.is_empty())?;
    let a = &rest[..split];
    let b = &rest[split + middle.len()..];
    let (mut person, emotion) =
        if person_first { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
    if template.starts_with(PERSON_SLOT) {
        // undo sentence capitalization
        let mut chars = person.chars();
        if let Some(c) = chars.next() {
            person = c.to_lowercase().chain(chars).collect();
        }
    }
    Some((person, emotion))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameEntry {
    pub name: String,
    pub gender: GenderClass,
    pub race: RaceClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NameTable {
    pub entries: Vec<NameEntry>,
}

impl NameTable {
    /// Illustrative default names; not a reproduction of any published list.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/names.json")).expect("builtin name table parses")
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if e.name.trim().is_empty() {
                return Err(DatagenError::InvalidNames("empty name".into()));
            }
            if !seen.insert(e.name.to_lowercase()) {
                return Err(DatagenError::InvalidNames(format!("duplicate name {}", e.name)));
            }
            if e.gender == GenderClass::Unspecified || e.race == RaceClass::Unspecified {
                return Err(DatagenError::InvalidNames(format!("{} must have gender and race", e.name)));
            }
        }
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&NameEntry> {
        self.entries.iter().find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn person_terms(&self) -> Vec<PersonTerm> {
        self.entries.iter().map(|e| PersonTerm { surface: e.name.clone(), gender: e.gender, race: e.race }).collect()
    }
}

pub fn builtin_noun_phrases() -> Vec<PersonTerm> {
    serde_json::from_str(include_str!("../data/noun_phrases.json")).expect("builtin noun phrases parse")
}

/// Lowercased markers that identify a female person term: the head word of
/// every female noun phrase and every female name.
pub fn female_markers(noun_phrases: &[PersonTerm], names: &NameTable) -> BTreeSet<String> {
    let heads = noun_phrases
        .iter()
        .filter(|p| p.gender == GenderClass::Female)
        .filter_map(|p| p.surface.split_whitespace().last().map(str::to_lowercase));
    let names = names.entries.iter().filter(|e| e.gender == GenderClass::Female).map(|e| e.name.to_lowercase());
    heads.chain(names).collect()
}

/// Where a derived dataset came from (set by the round-trip pipeline).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_dataset_id: String,
    pub pivot: String,
    pub engine_id: String,
    /// Records whose enhancement prefix did not survive translation.
    pub prefix_lost: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dataset_id: String,
    pub group: GroupTag,
    /// Protected attributes acting as confounders; empty for unconfounded data.
    #[serde(default)]
    pub confounders: BTreeSet<ProtectedAttribute>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    pub records: Vec<SentenceRecord>,
}

impl Dataset {
    pub fn new(dataset_id: String, group: GroupTag, records: Vec<SentenceRecord>) -> Result<Self, DatagenError> {
        let ds = Self { dataset_id, group, confounders: BTreeSet::new(), provenance: None, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_confounders(mut self, confounders: BTreeSet<ProtectedAttribute>) -> Self {
        self.confounders = confounders;
        self
    }

    pub fn is_confounded(&self) -> bool {
        !self.confounders.is_empty()
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.records.is_empty() {
            return Err(DatagenError::InvalidDataset(format!("{} has no records", self.dataset_id)));
        }
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if r.group != self.group || r.dataset_id != self.dataset_id {
                return Err(DatagenError::InvalidDataset(format!(
                    "record {} does not belong to {}",
                    r.record_id, self.dataset_id
                )));
            }
            if !ids.insert(r.record_id.as_str()) {
                return Err(DatagenError::InvalidDataset(format!("duplicate record id {}", r.record_id)));
            }
            r.validate().map_err(DatagenError::InvalidGroup)?;
        }
        Ok(())
    }
}

/// Class a person falls into for skew assignment.
type ClassKey = (RaceClass, GenderClass);

fn class_of(group: u8, p: &PersonTerm) -> ClassKey {
    if group >= 3 {
        (p.race, p.gender)
    } else {
        (RaceClass::Unspecified, p.gender)
    }
}

fn privileged(group: u8) -> ClassKey {
    if group >= 3 {
        (RaceClass::EuropeanAmerican, GenderClass::Male)
    } else {
        (RaceClass::Unspecified, GenderClass::Male)
    }
}

fn disadvantaged(group: u8) -> ClassKey {
    if group >= 3 {
        (RaceClass::AfricanAmerican, GenderClass::Female)
    } else {
        (RaceClass::Unspecified, GenderClass::Female)
    }
}

fn required_classes(group: u8) -> Vec<ClassKey> {
    if group >= 3 {
        let mut v = Vec::new();
        for race in [RaceClass::EuropeanAmerican, RaceClass::AfricanAmerican] {
            for gender in [GenderClass::Male, GenderClass::Female] {
                v.push((race, gender));
            }
        }
        v
    } else {
        vec![(RaceClass::Unspecified, GenderClass::Male), (RaceClass::Unspecified, GenderClass::Female)]
    }
}

/// Number of positive slots in a class of `n` slots when a fraction
/// `positive_share` of them should be positive.
pub fn positive_count(positive_share: f64, n: usize) -> usize {
    // tolerance absorbs binary rounding such as 0.57 * 100 = 56.999...
    ((positive_share * n as f64) + 1e-9).floor() as usize
}

fn dataset_seed(seed: u64, set_index: usize) -> u64 {
    seed ^ (set_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Generates one dataset per emotion set of `spec`.
///
/// Groups 1/2 draw person terms from `noun_phrases`, Groups 3/4 from `names`.
pub fn generate_group(
    spec: &GroupSpec,
    templates: &TemplateSet,
    names: &NameTable,
    noun_phrases: &[PersonTerm],
    seed: u64,
) -> Result<Vec<Dataset>, DatagenError> {
    if spec.emotion_sets.is_empty() || spec.emotion_sets.iter().any(Vec::is_empty) {
        return Err(DatagenError::EmptyLexicon);
    }
    validate_group_spec(spec)?;
    templates.validate()?;

    let persons: Vec<PersonTerm> = if spec.group >= 3 {
        names.validate()?;
        names.person_terms()
    } else {
        noun_phrases.to_vec()
    };
    let mut per_class: BTreeMap<ClassKey, usize> = BTreeMap::new();
    for p in &persons {
        if p.surface.trim().is_empty() {
            return Err(DomainError::EmptyField("person.surface").into());
        }
        if p.gender == GenderClass::Unspecified {
            return Err(DomainError::InvalidGroup(format!("person '{}' has unspecified gender", p.surface)).into());
        }
        *per_class.entry(class_of(spec.group, p)).or_default() += 1;
    }
    for class in required_classes(spec.group) {
        if !per_class.contains_key(&class) {
            return Err(DomainError::InvalidGroup(format!(
                "group {} needs at least one person term for {:?}",
                spec.group, class
            ))
            .into());
        }
    }
    if !spec.confounded {
        let counts: BTreeSet<usize> = per_class.values().copied().collect();
        if counts.len() > 1 {
            return Err(DomainError::InvalidGroup(format!(
                "group {} needs the same number of person terms per class for a uniform design, got {:?}",
                spec.group, per_class
            ))
            .into());
        }
    }

    spec.emotion_sets
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let dataset_id = format!("g{}-set{}", spec.group, i + 1);
            let cells = if spec.confounded {
                skewed_cells(spec, templates, &persons, set, dataset_seed(seed, i))
            } else {
                uniform_cells(spec, templates, &persons, set)
            };
            let group = GroupTag::Synthetic(spec.group);
            let records = cells
                .into_iter()
                .enumerate()
                .map(|(idx, (template, person, word))| SentenceRecord {
                    record_id: record_id(&dataset_id, idx),
                    group: group.clone(),
                    dataset_id: dataset_id.clone(),
                    text: render(template, &person.surface, &word.lexeme),
                    enhancement: String::new(),
                    person: person.clone(),
                    emotion: Some(word.clone()),
                    speaker: Speaker::Synthetic,
                })
                .collect();
            Dataset::new(dataset_id, group, records).map(|d| d.with_confounders(spec.causal_model.confounders.clone()))
        })
        .collect()
}

type Cell<'a> = (&'a str, &'a PersonTerm, &'a EmotionWord);

fn uniform_cells<'a>(
    spec: &GroupSpec,
    templates: &'a TemplateSet,
    persons: &'a [PersonTerm],
    set: &'a [EmotionWord],
) -> Vec<Cell<'a>> {
    let mut cells = Vec::new();
    for t in &templates.templates {
        for p in persons {
            for w in set {
                for _ in 0..spec.repeats {
                    cells.push((t.as_str(), p, w));
                }
            }
        }
    }
    cells
}

fn skewed_cells<'a>(
    spec: &GroupSpec,
    templates: &'a TemplateSet,
    persons: &'a [PersonTerm],
    set: &'a [EmotionWord],
    seed: u64,
) -> Vec<Cell<'a>> {
    let skew = spec.skew.unwrap_or(0.5);
    let words_of = |pol: Polarity| -> Vec<&EmotionWord> { set.iter().filter(|w| w.polarity == pol).collect() };
    let positives = words_of(Polarity::Positive);
    let negatives = words_of(Polarity::Negative);

    // Slots in (template, person, word position, repeat) order.
    let mut slots: Vec<(&str, &PersonTerm, usize)> = Vec::new();
    for t in &templates.templates {
        for p in persons {
            for k in 0..set.len() {
                for _ in 0..spec.repeats {
                    slots.push((t.as_str(), p, k));
                }
            }
        }
    }

    let mut by_class: BTreeMap<ClassKey, Vec<usize>> = BTreeMap::new();
    for (i, (_, p, _)) in slots.iter().enumerate() {
        by_class.entry(class_of(spec.group, p)).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut polarity = vec![Polarity::Negative; slots.len()];
    for (class, members) in &by_class {
        let share = if *class == privileged(spec.group) {
            skew
        } else if *class == disadvantaged(spec.group) {
            1.0 - skew
        } else {
            0.5
        };
        let n = members.len();
        // the disadvantaged class mirrors the privileged rounding
        let n_pos =
            if *class == disadvantaged(spec.group) { n - positive_count(skew, n) } else { positive_count(share, n) };
        let mut labels: Vec<Polarity> = std::iter::repeat_n(Polarity::Positive, n_pos)
            .chain(std::iter::repeat_n(Polarity::Negative, n - n_pos))
            .collect();
        labels.shuffle(&mut rng);
        for (&slot, label) in members.iter().zip(labels) {
            polarity[slot] = label;
        }
    }

    slots
        .iter()
        .zip(polarity)
        .map(|(&(t, p, k), pol)| {
            let pool = if pol == Polarity::Positive { &positives } else { &negatives };
            (t, p, pool[k % pool.len()])
        })
        .collect()
}

/// Prefixes an utterance with a gendered salutation.
pub fn apply_gender_proxy(text: &str, gender: GenderClass) -> (String, String) {
    let enhancement = match gender {
        GenderClass::Male => "Hey boy, ",
        GenderClass::Female => "Hey girl, ",
        GenderClass::Unspecified => "Hey, ",
    };
    (format!("{enhancement}{text}"), enhancement.to_string())
}

/// File-backed generation settings. Every field is optional; missing fields
/// fall back to the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default)]
    pub templates: Option<Vec<String>>,
    #[serde(default)]
    pub names: Option<Vec<NameEntry>>,
    #[serde(default)]
    pub noun_phrases: Option<Vec<PersonTerm>>,
    /// Lexeme/polarity pairs the emotion sets may reference.
    #[serde(default)]
    pub emotion_lexicon: Option<Vec<EmotionWord>>,
    /// Emotion sets by lexeme; replaces the group's default sets.
    #[serde(default)]
    pub emotion_sets: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub skew: Option<f64>,
    #[serde(default)]
    pub repeats: Option<usize>,
}

/// Everything `generate_group` needs, resolved from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGeneration {
    pub spec: GroupSpec,
    pub templates: TemplateSet,
    pub names: NameTable,
    pub noun_phrases: Vec<PersonTerm>,
}

impl GenerationConfig {
    pub fn resolve(&self, group: u8) -> Result<ResolvedGeneration, DatagenError> {
        let mut spec = GroupSpec::default_for(group)?;
        if let Some(sets) = &self.emotion_sets {
            let lexicon: BTreeMap<String, Polarity> = match &self.emotion_lexicon {
                Some(words) => words.iter().map(|w| (w.lexeme.to_lowercase(), w.polarity)).collect(),
                None => spec.emotion_sets.iter().flatten().map(|w| (w.lexeme.clone(), w.polarity)).collect(),
            };
            if lexicon.is_empty() || sets.is_empty() {
                return Err(DatagenError::EmptyLexicon);
            }
            spec.emotion_sets = sets
                .iter()
                .map(|set| {
                    set.iter()
                        .map(|lexeme| {
                            let key = lexeme.to_lowercase();
                            lexicon.get(&key).map(|&polarity| EmotionWord { lexeme: key.clone(), polarity }).ok_or_else(
                                || {
                                    DomainError::InvalidGroup(format!("emotion word '{lexeme}' is not in the lexicon"))
                                        .into()
                                },
                            )
                        })
                        .collect::<Result<Vec<_>, DatagenError>>()
                })
                .collect::<Result<_, _>>()?;
        }
        if spec.confounded {
            if let Some(s) = self.skew {
                spec.skew = Some(s);
            }
        }
        if let Some(r) = self.repeats {
            spec.repeats = r;
        }
        Ok(ResolvedGeneration {
            spec,
            templates: self.templates.clone().map(|templates| TemplateSet { templates }).unwrap_or_default(),
            names: self.names.clone().map(|entries| NameTable { entries }).unwrap_or_else(NameTable::builtin),
            noun_phrases: self.noun_phrases.clone().unwrap_or_else(builtin_noun_phrases),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boy_girl() -> Vec<PersonTerm> {
        vec![
            PersonTerm::new("this boy", GenderClass::Male, RaceClass::Unspecified).unwrap(),
            PersonTerm::new("this girl", GenderClass::Female, RaceClass::Unspecified).unwrap(),
        ]
    }

    #[test]
    fn group1_grim_single_template() {
        let mut spec = GroupSpec::default_for(1).unwrap();
        spec.emotion_sets = vec![vec![EmotionWord::negative("grim")]];
        let templates = TemplateSet { templates: vec!["I made <person> feel <emotion>".into()] };
        let out = generate_group(&spec, &templates, &NameTable::builtin(), &boy_girl(), 7).unwrap();
        assert_eq!(out.len(), 1);
        let texts: Vec<&str> = out[0].records.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(texts, ["I made this boy feel grim", "I made this girl feel grim"]);
        assert_eq!(out[0].records[0].record_id, "g1-set1#0000");
    }

    #[test]
    fn group1_is_seed_independent() {
        let mut spec = GroupSpec::default_for(1).unwrap();
        spec.skew = Some(0.9);
        let a =
            generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &builtin_noun_phrases(), 1).unwrap();
        let b =
            generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &builtin_noun_phrases(), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group4_skew_ninety_percent_of_hundred() {
        // 25 European-American male names x 1 template x 2 words x 2 repeats = 100 slots
        let mut entries = Vec::new();
        for (race, tag) in [(RaceClass::EuropeanAmerican, "ea"), (RaceClass::AfricanAmerican, "aa")] {
            for (gender, g) in [(GenderClass::Male, "m"), (GenderClass::Female, "f")] {
                for i in 0..25 {
                    entries.push(NameEntry { name: format!("{tag}{g}{i}"), gender, race });
                }
            }
        }
        let names = NameTable { entries };
        let mut spec = GroupSpec::default_for(4).unwrap();
        spec.emotion_sets = vec![vec![EmotionWord::negative("grim"), EmotionWord::positive("happy")]];
        spec.repeats = 2;
        let templates = TemplateSet { templates: vec!["<person> feels <emotion>.".into()] };
        let ds = &generate_group(&spec, &templates, &names, &[], 3).unwrap()[0];
        let count = |race, gender, pol| {
            ds.records
                .iter()
                .filter(|r| r.person.race == race && r.person.gender == gender)
                .filter(|r| r.emotion.as_ref().unwrap().polarity == pol)
                .count()
        };
        assert_eq!(count(RaceClass::EuropeanAmerican, GenderClass::Male, Polarity::Positive), 90);
        assert_eq!(count(RaceClass::EuropeanAmerican, GenderClass::Male, Polarity::Negative), 10);
        assert_eq!(count(RaceClass::AfricanAmerican, GenderClass::Female, Polarity::Negative), 90);
        assert_eq!(count(RaceClass::AfricanAmerican, GenderClass::Female, Polarity::Positive), 10);
        assert_eq!(count(RaceClass::EuropeanAmerican, GenderClass::Female, Polarity::Positive), 50);
    }

    #[test]
    fn skew_shuffle_depends_on_seed() {
        let spec = GroupSpec::default_for(2).unwrap();
        let gen = |seed| {
            generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &builtin_noun_phrases(), seed)
                .unwrap()
        };
        assert_eq!(gen(5), gen(5));
        assert_ne!(gen(5), gen(6));
    }

    #[test]
    fn gender_proxy_prefixes() {
        assert_eq!(
            apply_gender_proxy("rotate left", GenderClass::Male),
            ("Hey boy, rotate left".to_string(), "Hey boy, ".to_string())
        );
        assert_eq!(
            apply_gender_proxy("rotate left", GenderClass::Unspecified),
            ("Hey, rotate left".to_string(), "Hey, ".to_string())
        );
        assert_eq!(apply_gender_proxy("x", GenderClass::Female), ("Hey girl, x".to_string(), "Hey girl, ".to_string()));
    }

    #[test]
    fn templates_need_both_slots_once() {
        let bad = TemplateSet { templates: vec!["<person> and <person> feel <emotion>".into()] };
        assert!(matches!(bad.validate(), Err(DatagenError::InvalidTemplate { index: 0, .. })));
        assert!(TemplateSet { templates: vec!["<person> is here".into()] }.validate().is_err());
    }

    #[test]
    fn render_and_parse_back() {
        let t = "<person> feels <emotion>.";
        let text = render(t, "this boy", "grim");
        assert_eq!(text, "This boy feels grim.");
        assert_eq!(parse_back(t, &text), Some(("this boy".into(), "grim".into())));
        assert_eq!(
            parse_back("I made <person> feel <emotion>.", "I made Adam feel happy."),
            Some(("Adam".into(), "happy".into()))
        );
        assert_eq!(parse_back(t, "something else"), None);
    }

    #[test]
    fn empty_emotion_set_is_empty_lexicon() {
        let mut spec = GroupSpec::default_for(1).unwrap();
        spec.emotion_sets = vec![vec![]];
        let err = generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &builtin_noun_phrases(), 0)
            .unwrap_err();
        assert_eq!(err, DatagenError::EmptyLexicon);
    }

    #[test]
    fn group3_requires_every_cell() {
        let spec = GroupSpec::default_for(3).unwrap();
        let names = NameTable {
            entries: NameTable::builtin()
                .entries
                .into_iter()
                .filter(|e| e.race == RaceClass::EuropeanAmerican)
                .collect(),
        };
        let err = generate_group(&spec, &TemplateSet::default(), &names, &[], 0).unwrap_err();
        assert!(matches!(err, DatagenError::InvalidGroup(_)), "{err}");
    }

    #[test]
    fn unbalanced_uniform_group_is_rejected() {
        let spec = GroupSpec::default_for(1).unwrap();
        let mut persons = boy_girl();
        persons.push(PersonTerm::new("this man", GenderClass::Male, RaceClass::Unspecified).unwrap());
        assert!(generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &persons, 0).is_err());
    }

    #[test]
    fn config_resolves_sets_from_lexicon() {
        let cfg: GenerationConfig = serde_json::from_str(
            r#"{"emotion_lexicon":[{"lexeme":"bleak","polarity":"negative"},{"lexeme":"glad","polarity":"positive"}],
                "emotion_sets":[["bleak","glad"]],"skew":0.8}"#,
        )
        .unwrap();
        let r = cfg.resolve(2).unwrap();
        assert_eq!(r.spec.emotion_sets, vec![vec![EmotionWord::negative("bleak"), EmotionWord::positive("glad")]]);
        assert_eq!(r.spec.skew, Some(0.8));
        assert_eq!(r.spec.protected, [ProtectedAttribute::Gender].into());
        assert!(cfg.resolve(1).is_ok());
        let missing: GenerationConfig = serde_json::from_str(r#"{"emotion_sets":[["nope"]]}"#).unwrap();
        assert!(missing.resolve(1).is_err());
    }

    #[test]
    fn female_markers_cover_phrases_and_names() {
        let m = female_markers(&builtin_noun_phrases(), &NameTable::builtin());
        assert!(m.contains("girl") && m.contains("woman") && m.contains("ebony"));
        assert!(!m.contains("boy") && !m.contains("adam"));
    }
}
