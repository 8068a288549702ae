//! Turns scored datasets into a rating report: one section per group and
//! protected attribute, each with raw scores, ratings and audit data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::causal::{group_die, CausalError, GroupDieResult, DEFAULT_ZERO_TOL};
use crate::datagen::Dataset;
use crate::domain::{GroupTag, ProtectedAttribute, ScoreMap, Speaker};
use crate::jsonl::{to_canonical, JsonlError};
use crate::rating::{complete_order, overall_rating, partial_order, PartialOrder, RatingError, RawScore};
use crate::sas::SasDescriptor;
use crate::stats::{group_statistical_bias, AttributeSelector, GroupStatResult, StatsError};

pub const DEFAULT_LEVELS: u32 = 3;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error("{group}: datasets disagree on whether they are confounded")]
    MixedMetric { group: String },
    #[error("no datasets to rate")]
    NoDatasets,
    #[error("no systems to rate")]
    NoSystems,
    #[error(transparent)]
    Encoding(#[from] JsonlError),
}

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// sha256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub sas: Vec<SasDescriptor>,
    pub dataset_ids: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(
        config: &C,
        seeds: BTreeMap<String, u64>,
        sas: Vec<SasDescriptor>,
        dataset_ids: Vec<String>,
    ) -> Result<Self, JsonlError> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config)?,
            seeds,
            sas,
            dataset_ids,
        })
    }
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String, JsonlError> {
    Ok(hex::encode(Sha256::digest(to_canonical(config)?.as_bytes())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Wrs,
    Die,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SasAudit {
    pub sas_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistical: Option<GroupStatResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounding: Option<GroupDieResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSection {
    pub label: String,
    pub group: GroupTag,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<AttributeSelector>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub confounders: BTreeSet<ProtectedAttribute>,
    pub partial_order: PartialOrder,
    pub complete_order: BTreeMap<String, u32>,
    pub levels: u32,
    pub audit: Vec<SasAudit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub manifest: RunManifest,
    /// Round-trip tag of the rated data, empty for original data.
    #[serde(default)]
    pub variant: String,
    pub levels: u32,
    pub sections: Vec<ReportSection>,
    /// Worst fine-grained rating of each system across sections.
    pub overall: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub levels: u32,
    pub zero_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { levels: DEFAULT_LEVELS, zero_tol: DEFAULT_ZERO_TOL }
    }
}

/// One unit of rating: a set of datasets and how to measure them.
struct Plan {
    label: String,
    group: GroupTag,
    datasets: Vec<Dataset>,
    measure: Measure,
}

enum Measure {
    Wrs(AttributeSelector),
    Die(BTreeSet<ProtectedAttribute>),
}

/// `RD`, `RS`, ... when every round-tripped dataset used the same pivot,
/// `R*` for mixed pivots, empty for original data.
pub fn roundtrip_variant(datasets: &[Dataset]) -> String {
    let pivots: BTreeSet<&str> =
        datasets.iter().filter_map(|d| d.provenance.as_ref()).map(|p| p.pivot.as_str()).collect();
    match pivots.iter().next() {
        Some(p) if pivots.len() == 1 => {
            let id = crate::roundtrip::roundtrip_dataset_id("", p);
            id.trim_start_matches('-').to_string()
        }
        Some(_) => "R*".to_string(),
        None => String::new(),
    }
}

/// Pools every conversation of an ingest corpus into one dataset per
/// speaker, keeping record ids.
fn pool_by_speaker(tag: &str, datasets: &[Dataset]) -> Vec<(Speaker, Dataset)> {
    let mut by_speaker: BTreeMap<Speaker, Vec<_>> = BTreeMap::new();
    for ds in datasets {
        for r in &ds.records {
            by_speaker.entry(r.speaker).or_default().push(r.clone());
        }
    }
    by_speaker
        .into_iter()
        .map(|(speaker, mut records)| {
            let id = format!("{tag}-{speaker}");
            for r in &mut records {
                r.dataset_id = id.clone();
            }
            let group = GroupTag::Ingest(tag.to_string());
            (speaker, Dataset { dataset_id: id, group, confounders: BTreeSet::new(), provenance: None, records })
        })
        .collect()
}

fn plan(datasets: &[Dataset]) -> Result<Vec<Plan>, ReportError> {
    let mut groups: BTreeMap<GroupTag, Vec<Dataset>> = BTreeMap::new();
    for ds in datasets {
        groups.entry(ds.group.clone()).or_default().push(ds.clone());
    }
    let mut plans = Vec::new();
    for (group, mut members) in groups {
        members.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
        let confounded: BTreeSet<bool> = members.iter().map(Dataset::is_confounded).collect();
        if confounded.len() > 1 {
            return Err(ReportError::MixedMetric { group: group.to_string() });
        }
        match &group {
            GroupTag::Ingest(tag) => {
                for (speaker, ds) in pool_by_speaker(tag, &members) {
                    let label = format!("{tag} {}", speaker_label(speaker));
                    plans.push(Plan {
                        label,
                        group: group.clone(),
                        datasets: vec![ds],
                        measure: Measure::Wrs(AttributeSelector::Gender),
                    });
                }
            }
            GroupTag::Synthetic(g) => {
                let base = group.to_string();
                if confounded.contains(&true) {
                    let confounders = members[0].confounders.clone();
                    if members.iter().any(|d| d.confounders != confounders) {
                        return Err(ReportError::MixedMetric { group: group.to_string() });
                    }
                    plans.push(Plan {
                        label: base,
                        group: group.clone(),
                        datasets: members,
                        measure: Measure::Die(confounders),
                    });
                } else if *g >= 3 {
                    for attr in [AttributeSelector::Race, AttributeSelector::Gender, AttributeSelector::RaceGender] {
                        plans.push(Plan {
                            label: format!("{base} ({})", attr.suffix()),
                            group: group.clone(),
                            datasets: members.clone(),
                            measure: Measure::Wrs(attr),
                        });
                    }
                } else {
                    plans.push(Plan {
                        label: base,
                        group: group.clone(),
                        datasets: members,
                        measure: Measure::Wrs(AttributeSelector::Gender),
                    });
                }
            }
        }
    }
    Ok(plans)
}

fn speaker_label(s: Speaker) -> &'static str {
    match s {
        Speaker::User => "User",
        Speaker::Chatbot => "Chatbot",
        Speaker::Synthetic => "Synthetic",
    }
}

/// Rates every system on every section. `scores` maps each system id to
/// its scores; iteration order of systems follows the map.
pub fn build_report(
    manifest: RunManifest,
    datasets: &[Dataset],
    scores: &BTreeMap<String, ScoreMap>,
    opts: RateOptions,
) -> Result<RatingReport, ReportError> {
    if datasets.is_empty() {
        return Err(ReportError::NoDatasets);
    }
    if scores.is_empty() {
        return Err(ReportError::NoSystems);
    }
    let mut sections = Vec::new();
    let mut fine: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for p in plan(datasets)? {
        let mut raws = Vec::new();
        let mut audit = Vec::new();
        for (sas_id, map) in scores {
            match &p.measure {
                Measure::Wrs(attr) => {
                    let r = group_statistical_bias(&p.datasets, map, *attr)?;
                    raws.push((sas_id.clone(), RawScore::Wrs(r.wrs.value())));
                    audit.push(SasAudit { sas_id: sas_id.clone(), statistical: Some(r), confounding: None });
                }
                Measure::Die(conf) => {
                    let r = group_die(&p.datasets, map, conf, opts.zero_tol)?;
                    raws.push((sas_id.clone(), r.raw));
                    audit.push(SasAudit { sas_id: sas_id.clone(), statistical: None, confounding: Some(r) });
                }
            }
        }
        let po = partial_order(&raws)?;
        let co = complete_order(&po, opts.levels)?;
        for (id, &r) in &co.ratings {
            fine.entry(id.clone()).or_default().push(r);
        }
        let (metric, attribute, confounders) = match p.measure {
            Measure::Wrs(a) => (Metric::Wrs, Some(a), BTreeSet::new()),
            Measure::Die(c) => (Metric::Die, None, c),
        };
        sections.push(ReportSection {
            label: p.label,
            group: p.group,
            metric,
            attribute,
            confounders,
            partial_order: po,
            complete_order: co.ratings,
            levels: co.levels,
            audit,
        });
    }
    let overall = fine.iter().map(|(id, f)| (id.clone(), overall_rating(f).expect("nonempty"))).collect();
    Ok(RatingReport { manifest, variant: roundtrip_variant(datasets), levels: opts.levels, sections, overall })
}

/// Compact number: at most two decimals, trailing zeros removed.
pub fn fmt_raw(raw: &RawScore) -> String {
    match raw.value() {
        None => "undefined".to_string(),
        Some(v) => {
            let s = format!("{v:.2}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" {
                "0".to_string()
            } else {
                s.to_string()
            }
        }
    }
}

/// Markdown table with one row per section: raw scores in partial order
/// and ratings in the same order, followed by the overall ratings.
pub fn render_markdown(report: &RatingReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Bias rating report\n");
    if !report.variant.is_empty() {
        let _ = writeln!(out, "Round-trip variant: {}\n", report.variant);
    }
    let _ = writeln!(out, "Rating levels: {}\n", report.levels);
    let _ = writeln!(out, "| Group | Metric | Raw scores (partial order) | Ratings (complete order) |");
    let _ = writeln!(out, "|---|---|---|---|");
    for s in &report.sections {
        let raw = s
            .partial_order
            .entries
            .iter()
            .map(|e| format!("{}: {}", e.sas_id, fmt_raw(&e.raw)))
            .collect::<Vec<_>>()
            .join(", ");
        let rated = s
            .partial_order
            .entries
            .iter()
            .map(|e| format!("{}: {}", e.sas_id, s.complete_order[&e.sas_id]))
            .collect::<Vec<_>>()
            .join(", ");
        let metric = match s.metric {
            Metric::Wrs => "WRS",
            Metric::Die => "DIE%",
        };
        let _ = writeln!(out, "| {} | {metric} | {{{raw}}} | {{{rated}}} |", s.label);
    }
    let _ = writeln!(out, "\n## Overall ratings\n");
    let _ = writeln!(out, "| System | Rating |");
    let _ = writeln!(out, "|---|---|");
    for (id, r) in &report.overall {
        let _ = writeln!(out, "| {id} | {r} |");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{builtin_noun_phrases, female_markers, generate_group, NameTable, TemplateSet};
    use crate::domain::{score_map, GroupSpec, ScoredRecord};
    use crate::sas::{score_records, SasKind, ScoreRequest, SentimentLexicon};

    fn gen(group: u8) -> Vec<Dataset> {
        let spec = GroupSpec::default_for(group).unwrap();
        generate_group(&spec, &TemplateSet::default(), &NameTable::builtin(), &builtin_noun_phrases(), 11).unwrap()
    }

    fn run(sas: &SasDescriptor, datasets: &[Dataset]) -> ScoreMap {
        let reqs: Vec<ScoreRequest> = datasets
            .iter()
            .flat_map(|d| d.records.iter().map(|r| ScoreRequest { id: r.record_id.clone(), text: r.text.clone() }))
            .collect();
        let scored: Vec<ScoredRecord> = score_records(sas, &reqs).unwrap();
        score_map(&scored)
    }

    fn systems() -> Vec<SasDescriptor> {
        vec![
            SasDescriptor::new(
                "S_b",
                SasKind::BiasedFemale {
                    female_markers: female_markers(&builtin_noun_phrases(), &NameTable::builtin()),
                },
            ),
            SasDescriptor::new("S_r", SasKind::Random { seed: 3 }),
            SasDescriptor::new("S_t", SasKind::Lexicon { lexicon: SentimentLexicon::builtin() }),
        ]
    }

    fn report(datasets: &[Dataset]) -> RatingReport {
        let sas = systems();
        let scores = sas.iter().map(|s| (s.sas_id.clone(), run(s, datasets))).collect();
        let ids = datasets.iter().map(|d| d.dataset_id.clone()).collect();
        let manifest = RunManifest::new(&"test", BTreeMap::new(), sas, ids).unwrap();
        build_report(manifest, datasets, &scores, RateOptions::default()).unwrap()
    }

    #[test]
    fn group_one_has_one_gender_section() {
        let r = report(&gen(1));
        assert_eq!(r.sections.len(), 1);
        let s = &r.sections[0];
        assert_eq!((s.label.as_str(), s.metric), ("Group-1", Metric::Wrs));
        let raw: BTreeMap<&str, Option<f64>> =
            s.partial_order.entries.iter().map(|e| (e.sas_id.as_str(), e.raw.value())).collect();
        assert_eq!(raw["S_t"], Some(0.0));
        assert_eq!(raw["S_b"], Some(2.4 * 5.0));
        assert_eq!(s.complete_order["S_b"], 3);
    }

    #[test]
    fn group_three_has_race_gender_sections() {
        let r = report(&gen(3));
        let labels: Vec<&str> = r.sections.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["Group-3 (R)", "Group-3 (G)", "Group-3 (RG)"]);
    }

    #[test]
    fn confounded_groups_use_die() {
        let r = report(&gen(4));
        assert_eq!(r.sections.len(), 1);
        assert_eq!(r.sections[0].metric, Metric::Die);
        assert_eq!(r.sections[0].confounders.len(), 2);
        assert!(r.sections[0].audit.iter().all(|a| a.confounding.is_some()));
    }

    #[test]
    fn mixed_confoundedness_is_rejected() {
        let mut ds = gen(2);
        ds[0].confounders.clear();
        for d in &mut ds[1..] {
            d.group = GroupTag::Synthetic(2);
        }
        assert!(matches!(plan(&ds), Err(ReportError::MixedMetric { .. })));
    }

    #[test]
    fn ingest_groups_pool_per_speaker() {
        use crate::domain::GenderClass;
        use crate::ingest::{into_datasets, preprocess, ConversationRow, PreprocessOptions};
        let mut rows = Vec::new();
        for c in 0..6u64 {
            let g = if c % 2 == 0 { GenderClass::Male } else { GenderClass::Female };
            for (ub, t) in [(1u8, "hello there"), (0, "welcome back"), (1, "I am happy")] {
                rows.push(ConversationRow {
                    c_num: c,
                    ub,
                    original: t.into(),
                    enhancement: String::new(),
                    text: t.into(),
                    user_gender: g,
                });
            }
        }
        let ds = into_datasets(preprocess(&rows, &PreprocessOptions::new("HD1"))).unwrap();
        let r = report(&ds);
        let labels: Vec<&str> = r.sections.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["HD1 User", "HD1 Chatbot"]);
        for s in &r.sections {
            let b = s.partial_order.entries.iter().find(|e| e.sas_id == "S_b").unwrap();
            assert_eq!(b.raw, RawScore::Wrs(2.4));
        }
    }

    #[test]
    fn markdown_mirrors_orders() {
        let md = render_markdown(&report(&gen(1)));
        assert!(md.contains("| Group-1 | WRS | {"), "{md}");
        assert!(md.contains("S_b: 12}"), "{md}");
        assert!(md.contains("| S_b | 3 |"));
    }

    #[test]
    fn raw_formatting() {
        assert_eq!(fmt_raw(&RawScore::Wrs(2.4)), "2.4");
        assert_eq!(fmt_raw(&RawScore::Die(128.5)), "128.5");
        assert_eq!(fmt_raw(&RawScore::Die(83.3333)), "83.33");
        assert_eq!(fmt_raw(&RawScore::Wrs(0.0)), "0");
        assert_eq!(fmt_raw(&RawScore::Undefined), "undefined");
    }
}
