//! Chatbot conversation logs: parsing, preprocessing into sentence records,
//! conversation statistics and annotation aggregation.

pub mod annotate;
pub mod stats;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{apply_gender_proxy, DatagenError, Dataset};
use crate::domain::{record_id, GenderClass, GroupTag, PersonTerm, RaceClass, SentenceRecord, Speaker};

pub use annotate::{aggregate_annotations, read_annotations, AnnotationAggregate, AnnotationSet};
pub use stats::{conversation_stats, stopwords, AgentStats, Summary};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: line {line}: {message}")]
    Schema { path: String, line: u64, message: String },
    #[error("{path}: {message}")]
    Encoding { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("annotators do not cover the same records: {0}")]
    CoverageMismatch(String),
    #[error("expected 3 annotation sets, got {0}")]
    AnnotatorCount(usize),
    #[error(transparent)]
    Dataset(#[from] DatagenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// `.jsonl` and `.ndjson` are JSON Lines, anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

/// One utterance of a logged conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationRow {
    #[serde(rename = "C_num")]
    pub c_num: u64,
    /// 0 for the chatbot, 1 for the user.
    #[serde(rename = "UB")]
    pub ub: u8,
    #[serde(rename = "Original")]
    pub original: String,
    #[serde(rename = "Enhancement")]
    pub enhancement: String,
    #[serde(rename = "Text")]
    pub text: String,
    #[serde(rename = "User_gender")]
    pub user_gender: GenderClass,
}

impl ConversationRow {
    pub fn speaker(&self) -> Speaker {
        if self.ub == 1 {
            Speaker::User
        } else {
            Speaker::Chatbot
        }
    }
}

pub const COLUMNS: [&str; 6] = ["C_num", "UB", "Original", "Enhancement", "Text", "User_gender"];

/// Accepts `0`/`1`/`2` (unspecified, male, female) and the usual words.
pub fn parse_gender(raw: &str) -> Option<GenderClass> {
    match raw.trim().to_lowercase().as_str() {
        "1" | "m" | "male" | "boy" | "man" => Some(GenderClass::Male),
        "2" | "f" | "female" | "girl" | "woman" => Some(GenderClass::Female),
        "0" | "" | "na" | "n/a" | "none" | "unknown" | "unspecified" => Some(GenderClass::Unspecified),
        _ => None,
    }
}

fn build_row(fields: &BTreeMap<&str, String>, path: &str, line: u64) -> Result<ConversationRow, IngestError> {
    let schema = |message: String| IngestError::Schema { path: path.to_string(), line, message };
    let get = |name: &str| fields.get(name).cloned().ok_or_else(|| schema(format!("missing field {name}")));
    let c_raw = get("C_num")?;
    let c_num =
        c_raw.trim().parse::<u64>().map_err(|_| schema(format!("C_num {c_raw:?} is not a conversation number")))?;
    let ub = match get("UB")?.trim() {
        "0" => 0,
        "1" => 1,
        other => return Err(schema(format!("UB must be 0 or 1, got {other:?}"))),
    };
    let original = get("Original")?;
    let enhancement = get("Enhancement")?;
    let mut text = get("Text")?;
    let g_raw = get("User_gender")?;
    let user_gender = parse_gender(&g_raw).ok_or_else(|| schema(format!("unknown User_gender {g_raw:?}")))?;
    if original.trim().is_empty() {
        return Err(schema("Original is empty".into()));
    }
    if enhancement.is_empty() {
        if text.is_empty() {
            text = original.clone();
        }
    } else if text != format!("{enhancement}{original}") {
        return Err(schema("Text must equal Enhancement followed by Original".into()));
    }
    Ok(ConversationRow { c_num, ub, original, enhancement, text, user_gender })
}

fn parse_csv(text: &str, delimiter: u8, path: &str) -> Result<Vec<ConversationRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).flexible(true).from_reader(text.as_bytes());
    let schema = |line: u64, message: String| IngestError::Schema { path: path.to_string(), line, message };
    let headers = reader.headers().map_err(|e| schema(1, e.to_string()))?.clone();
    let mut index = BTreeMap::new();
    for col in COLUMNS {
        let i = headers
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| schema(1, format!("header lacks column {col}")))?;
        index.insert(col, i);
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let fields: BTreeMap<&str, String> =
            index.iter().filter_map(|(&col, &i)| rec.get(i).map(|v| (col, v.to_string()))).collect();
        rows.push(build_row(&fields, path, line)?);
    }
    Ok(rows)
}

fn parse_jsonl(text: &str, path: &str) -> Result<Vec<ConversationRow>, IngestError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let schema = |message: String| IngestError::Schema { path: path.to_string(), line, message };
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| schema(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| schema("row is not an object".into()))?;
        let mut fields = BTreeMap::new();
        for col in COLUMNS {
            match obj.get(col) {
                Some(serde_json::Value::String(s)) => fields.insert(col, s.clone()),
                Some(serde_json::Value::Number(n)) => fields.insert(col, n.to_string()),
                Some(serde_json::Value::Null) if col == "User_gender" => fields.insert(col, String::new()),
                Some(other) => return Err(schema(format!("{col} has unexpected value {other}"))),
                None => return Err(schema(format!("missing field {col}"))),
            };
        }
        rows.push(build_row(&fields, path, line)?);
    }
    Ok(rows)
}

/// Parses conversation rows from in-memory text. Extra columns are ignored.
pub fn parse_conversations(
    text: &str,
    format: InputFormat,
    delimiter: u8,
    path: &str,
) -> Result<Vec<ConversationRow>, IngestError> {
    match format {
        InputFormat::Csv => parse_csv(text, delimiter, path),
        InputFormat::Jsonl => parse_jsonl(text, path),
    }
}

pub fn read_conversations(
    path: &Path,
    format: InputFormat,
    delimiter: u8,
) -> Result<Vec<ConversationRow>, IngestError> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io { path: name.clone(), source })?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::Encoding {
        path: name.clone(),
        message: format!("invalid UTF-8 at byte {}", e.utf8_error().valid_up_to()),
    })?;
    parse_conversations(text.trim_start_matches('\u{feff}'), format, delimiter, &name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessOptions {
    /// Corpus tag such as `HD1`; prefixes dataset ids.
    pub corpus: String,
    /// Drop conversations whose user gender is unspecified.
    #[serde(default = "yes")]
    pub drop_na: bool,
}

fn yes() -> bool {
    true
}

impl PreprocessOptions {
    pub fn new(corpus: &str) -> Self {
        Self { corpus: corpus.to_string(), drop_na: true }
    }
}

/// Row-level preprocessing: drops unspecified-gender conversations, merges
/// consecutive same-speaker utterances and prefixes every utterance that has
/// no enhancement with the gender proxy. Idempotent. Output is ordered by
/// conversation number, then original row order.
pub fn preprocess_rows(rows: &[ConversationRow], opts: &PreprocessOptions) -> Vec<ConversationRow> {
    let mut by_conv: BTreeMap<u64, Vec<&ConversationRow>> = BTreeMap::new();
    for r in rows {
        by_conv.entry(r.c_num).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, conv) in by_conv {
        if opts.drop_na && conv.iter().any(|r| r.user_gender == GenderClass::Unspecified) {
            continue;
        }
        let mut blocks: Vec<Vec<&ConversationRow>> = Vec::new();
        for r in conv {
            match blocks.last_mut() {
                Some(b) if b[0].ub == r.ub => b.push(r),
                _ => blocks.push(vec![r]),
            }
        }
        for block in blocks {
            let first = block[0];
            let original = block.iter().map(|r| r.original.trim()).collect::<Vec<_>>().join(" ");
            let (text, enhancement) = if first.enhancement.is_empty() {
                apply_gender_proxy(&original, first.user_gender)
            } else {
                (format!("{}{original}", first.enhancement), first.enhancement.clone())
            };
            out.push(ConversationRow {
                c_num: first.c_num,
                ub: first.ub,
                original,
                enhancement,
                text,
                user_gender: first.user_gender,
            });
        }
    }
    out
}

pub fn conversation_dataset_id(corpus: &str, c_num: u64) -> String {
    format!("{corpus}-c{c_num}")
}

/// Preprocesses rows and turns each utterance into a sentence record of
/// dataset `<corpus>-c<c_num>`.
pub fn preprocess(rows: &[ConversationRow], opts: &PreprocessOptions) -> Vec<SentenceRecord> {
    let mut counters: BTreeMap<u64, usize> = BTreeMap::new();
    preprocess_rows(rows, opts)
        .into_iter()
        .map(|r| {
            let dataset_id = conversation_dataset_id(&opts.corpus, r.c_num);
            let idx = counters.entry(r.c_num).or_default();
            *idx += 1;
            SentenceRecord {
                record_id: record_id(&dataset_id, *idx),
                group: GroupTag::Ingest(opts.corpus.clone()),
                dataset_id,
                text: r.text.clone(),
                enhancement: r.enhancement.clone(),
                person: PersonTerm { surface: "user".into(), gender: r.user_gender, race: RaceClass::Unspecified },
                emotion: None,
                speaker: r.speaker(),
            }
        })
        .collect()
}

/// Groups preprocessed records into one dataset per conversation.
pub fn into_datasets(records: Vec<SentenceRecord>) -> Result<Vec<Dataset>, IngestError> {
    let mut by_id: BTreeMap<String, (GroupTag, Vec<SentenceRecord>)> = BTreeMap::new();
    for r in records {
        by_id.entry(r.dataset_id.clone()).or_insert_with(|| (r.group.clone(), Vec::new())).1.push(r);
    }
    let mut out: Vec<Dataset> =
        by_id.into_iter().map(|(id, (group, recs))| Dataset::new(id, group, recs)).collect::<Result<_, _>>()?;
    // numeric conversation order rather than lexicographic id order
    out.sort_by_key(|d| conversation_number(&d.dataset_id));
    Ok(out)
}

fn conversation_number(dataset_id: &str) -> (u64, String) {
    let n = dataset_id.rsplit_once("-c").and_then(|(_, n)| n.parse().ok()).unwrap_or(u64::MAX);
    (n, dataset_id.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "C_num,UB,Original,Enhancement,Text,User_gender\n";

    fn csv(body: &str) -> Result<Vec<ConversationRow>, IngestError> {
        parse_conversations(&format!("{HEADER}{body}"), InputFormat::Csv, b',', "t.csv")
    }

    fn row(c: u64, ub: u8, original: &str, g: GenderClass) -> ConversationRow {
        ConversationRow {
            c_num: c,
            ub,
            original: original.into(),
            enhancement: String::new(),
            text: original.into(),
            user_gender: g,
        }
    }

    #[test]
    fn well_formed_csv() {
        let rows = csv("1,1,solve cross,,solve cross,1\n1,0,ok,,ok,1\n2,1,hi,Hey girl, ,Hey girl, hi,2\n");
        assert!(rows.is_err(), "unquoted comma in enhancement splits the field");
        let rows =
            csv("1,1,solve cross,,solve cross,1\n1,0,ok,,ok,1\n2,1,hi,\"Hey girl, \",\"Hey girl, hi\",2\n").unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].user_gender, GenderClass::Female);
        assert_eq!(rows[1].speaker(), Speaker::Chatbot);
    }

    #[test]
    fn bad_ub_names_the_line() {
        match csv("1,1,a,,a,1\n1,2,b,,b,1\n") {
            Err(IngestError::Schema { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("UB"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_is_reported() {
        let err = parse_conversations("C_num,UB,Original\n1,1,a\n", InputFormat::Csv, b',', "t.csv").unwrap_err();
        assert!(matches!(err, IngestError::Schema { line: 1, .. }));
    }

    #[test]
    fn pipe_delimited_with_extra_columns() {
        let text = "C_num|UB|Intent|Original|Enhancement|Text|User_gender\n4|1|greet|hello there||hello there|male\n";
        let rows = parse_conversations(text, InputFormat::Csv, b'|', "hd2.txt").unwrap();
        assert_eq!(rows, vec![row(4, 1, "hello there", GenderClass::Male)]);
    }

    #[test]
    fn jsonl_rows() {
        let text =
            r#"{"C_num":3,"UB":1,"Original":"left","Enhancement":"","Text":"left","User_gender":"female","extra":1}"#;
        let rows = parse_conversations(text, InputFormat::Jsonl, b',', "x.jsonl").unwrap();
        assert_eq!(rows, vec![row(3, 1, "left", GenderClass::Female)]);
    }

    #[test]
    fn merge_and_proxy() {
        let rows = vec![
            row(1, 1, "left", GenderClass::Male),
            row(1, 1, "rotate", GenderClass::Male),
            row(1, 0, "done", GenderClass::Male),
            row(1, 1, "solve cross", GenderClass::Male),
        ];
        let out = preprocess_rows(&rows, &PreprocessOptions::new("HD1"));
        let texts: Vec<&str> = out.iter().map(|r| r.text.as_str()).collect();
        assert_eq!(texts, ["Hey boy, left rotate", "Hey boy, done", "Hey boy, solve cross"]);
        assert_eq!(out[0].original, "left rotate");
    }

    #[test]
    fn na_conversations_are_dropped() {
        let rows = vec![row(1, 1, "hi", GenderClass::Unspecified), row(2, 1, "hi", GenderClass::Female)];
        let recs = preprocess(&rows, &PreprocessOptions::new("HD1"));
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].dataset_id, "HD1-c2");
        assert_eq!(recs[0].record_id, "HD1-c2#0001");
        let keep = PreprocessOptions { corpus: "HD1".into(), drop_na: false };
        assert_eq!(preprocess(&rows, &keep)[0].text, "Hey, hi");
    }

    #[test]
    fn preprocessing_is_idempotent() {
        let rows = vec![
            row(2, 0, "welcome", GenderClass::Female),
            row(2, 0, "to the game", GenderClass::Female),
            row(1, 1, "a", GenderClass::Male),
            row(2, 1, "thanks", GenderClass::Female),
        ];
        let opts = PreprocessOptions::new("HD2");
        let once = preprocess_rows(&rows, &opts);
        assert_eq!(preprocess_rows(&once, &opts), once);
        assert_eq!(preprocess(&once, &opts), preprocess(&rows, &opts));
    }

    #[test]
    fn datasets_follow_conversation_number() {
        let rows = vec![row(10, 1, "a", GenderClass::Male), row(9, 1, "b", GenderClass::Female)];
        let ds = into_datasets(preprocess(&rows, &PreprocessOptions::new("HD1"))).unwrap();
        assert_eq!(ds.iter().map(|d| d.dataset_id.as_str()).collect::<Vec<_>>(), ["HD1-c9", "HD1-c10"]);
    }

    #[test]
    fn gender_codes() {
        assert_eq!(parse_gender("1"), Some(GenderClass::Male));
        assert_eq!(parse_gender("Female"), Some(GenderClass::Female));
        assert_eq!(parse_gender("NA"), Some(GenderClass::Unspecified));
        assert_eq!(parse_gender("7"), None);
    }
}
