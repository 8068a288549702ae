//! On-disk layout: a data directory holds `manifest.json` plus one
//! `<dataset_id>.jsonl` of sentence records per dataset; a scores directory
//! holds `systems.json` plus one `<sas_id>.jsonl` of scored records per
//! system.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sasrate::datagen::{Dataset, Provenance};
use sasrate::domain::{GroupTag, ProtectedAttribute, ScoredRecord, SentenceRecord};
use sasrate::jsonl::{read_jsonl, to_canonical_pretty, write_atomic, write_jsonl};
use sasrate::sas::SasDescriptor;

use crate::error::{io_error, CliError};

pub const MANIFEST: &str = "manifest.json";
pub const SYSTEMS: &str = "systems.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dataset_id: String,
    pub group: GroupTag,
    #[serde(default)]
    pub confounders: BTreeSet<ProtectedAttribute>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    pub file: String,
    pub records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataManifest {
    pub tool_version: String,
    /// Config hash of every step that wrote into the directory.
    #[serde(default)]
    pub config_hashes: BTreeMap<String, String>,
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    pub datasets: Vec<DatasetMeta>,
}

/// Ids become file names, so they are restricted to a portable alphabet.
pub fn check_file_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("id {id:?} may only use letters, digits, '-', '_' and '.'")))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = to_canonical_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> Result<DataManifest, CliError> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(CliError::Data(format!("{} is not a data directory (no {MANIFEST})", dir.display())));
    }
    read_json(&path)
}

/// Writes datasets and merges them into the directory's manifest. Entries
/// with the same dataset id are replaced.
pub fn write_data(
    dir: &Path,
    datasets: &[Dataset],
    step: &str,
    config_hash: &str,
    seed: Option<u64>,
) -> Result<DataManifest, CliError> {
    let mut manifest = if dir.join(MANIFEST).exists() { read_manifest(dir)? } else { DataManifest::default() };
    manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
    manifest.config_hashes.insert(step.to_string(), config_hash.to_string());
    if let Some(s) = seed {
        manifest.seeds.insert(step.to_string(), s);
    }
    for ds in datasets {
        check_file_id(&ds.dataset_id)?;
        let file = format!("{}.jsonl", ds.dataset_id);
        write_jsonl(&dir.join(&file), &ds.records)?;
        manifest.datasets.retain(|m| m.dataset_id != ds.dataset_id);
        manifest.datasets.push(DatasetMeta {
            dataset_id: ds.dataset_id.clone(),
            group: ds.group.clone(),
            confounders: ds.confounders.clone(),
            provenance: ds.provenance.clone(),
            file,
            records: ds.records.len(),
        });
    }
    manifest.datasets.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_data(dir: &Path) -> Result<(DataManifest, Vec<Dataset>), CliError> {
    let manifest = read_manifest(dir)?;
    let mut out = Vec::with_capacity(manifest.datasets.len());
    for meta in &manifest.datasets {
        let records: Vec<SentenceRecord> = read_jsonl(&dir.join(&meta.file))?;
        if records.len() != meta.records {
            return Err(CliError::Data(format!(
                "{}: manifest lists {} records, file has {}",
                meta.file,
                meta.records,
                records.len()
            )));
        }
        let ds = Dataset {
            dataset_id: meta.dataset_id.clone(),
            group: meta.group.clone(),
            confounders: meta.confounders.clone(),
            provenance: meta.provenance.clone(),
            records,
        };
        ds.validate().map_err(|e| CliError::Data(format!("{}: {e}", meta.file)))?;
        out.push(ds);
    }
    Ok((manifest, out))
}

pub fn default_scores_dir(data: &Path) -> PathBuf {
    data.join("scores")
}

/// Writes one system's scores and merges its descriptor into `systems.json`.
pub fn write_scores(dir: &Path, sas: &SasDescriptor, scores: &[ScoredRecord]) -> Result<(), CliError> {
    check_file_id(&sas.sas_id)?;
    write_jsonl(&dir.join(format!("{}.jsonl", sas.sas_id)), scores)?;
    let path = dir.join(SYSTEMS);
    let mut systems: Vec<SasDescriptor> = if path.exists() { read_json(&path)? } else { Vec::new() };
    systems.retain(|s| s.sas_id != sas.sas_id);
    systems.push(sas.clone());
    systems.sort_by(|a, b| a.sas_id.cmp(&b.sas_id));
    write_json(&path, &systems)
}

pub fn read_scores(dir: &Path) -> Result<Vec<(SasDescriptor, Vec<ScoredRecord>)>, CliError> {
    let path = dir.join(SYSTEMS);
    if !path.exists() {
        return Err(CliError::Data(format!("{} has no {SYSTEMS}; run evaluate first", dir.display())));
    }
    let systems: Vec<SasDescriptor> = read_json(&path)?;
    systems
        .into_iter()
        .map(|s| {
            let scores = read_jsonl(&dir.join(format!("{}.jsonl", s.sas_id)))?;
            Ok((s, scores))
        })
        .collect()
}
