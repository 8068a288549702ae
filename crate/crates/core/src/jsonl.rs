//! Canonical JSON and JSON Lines encoding.
//!
//! Objects are written with keys in sorted order and no insignificant
//! whitespace, so equal values always produce identical bytes.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

pub fn canonical_value(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string keys serialize"));
                out.push(':');
                write_value(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(v, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&serde_json::to_string(scalar).expect("scalars serialize")),
    }
}

pub fn to_canonical<T: Serialize>(value: &T) -> Result<String, JsonlError> {
    let v = serde_json::to_value(value).map_err(|e| JsonlError::Serialize(e.to_string()))?;
    Ok(canonical_value(&v))
}

/// Pretty-printed variant with sorted keys, for human-facing reports.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String, JsonlError> {
    let v = serde_json::to_value(value).map_err(|e| JsonlError::Serialize(e.to_string()))?;
    let sorted = sort_keys(v);
    serde_json::to_string_pretty(&sorted).map_err(|e| JsonlError::Serialize(e.to_string()))
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn encode_lines<T: Serialize>(items: &[T]) -> Result<String, JsonlError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_canonical(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn decode_lines<T: DeserializeOwned>(text: &str, path: &str) -> Result<Vec<T>, JsonlError> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| JsonlError::Parse {
            path: path.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let p = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| JsonlError::Io { path: p.clone(), source })?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io { path: p.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: p.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(items)
}

/// Writes `contents` to `path` via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), JsonlError> {
    let p = path.display().to_string();
    let io_err = |source| JsonlError::Io { path: p.clone(), source };
    if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    write_atomic(path, encode_lines(items)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_are_sorted_recursively() {
        let v = json!({"b": 1, "a": {"z": [1, {"y": 2, "x": 3}], "c": null}});
        assert_eq!(canonical_value(&v), r#"{"a":{"c":null,"z":[1,{"x":3,"y":2}]},"b":1}"#);
    }

    #[test]
    fn decode_reports_line_numbers() {
        let err = decode_lines::<Value>("{}\n\nnot json\n", "f.jsonl").unwrap_err();
        assert!(matches!(err, JsonlError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn atomic_write_creates_parent_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.jsonl");
        write_jsonl(&path, &[json!({"k": 1})]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "{\"k\":1}\n");
    }
}
