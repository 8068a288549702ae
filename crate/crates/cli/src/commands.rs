use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use sasrate::causal::DEFAULT_ZERO_TOL;
use sasrate::datagen::{generate_group, GenerationConfig};
use sasrate::domain::score_map;
use sasrate::ingest::{
    aggregate_annotations, conversation_stats, into_datasets, preprocess, read_annotations, read_conversations,
    AgentStats, InputFormat, PreprocessOptions, Summary,
};
use sasrate::jsonl::write_atomic;
use sasrate::report::{
    build_report, config_hash, render_markdown, RateOptions, RatingReport, RunManifest, DEFAULT_LEVELS,
};
use sasrate::roundtrip::{
    compare_bias, round_trip_dataset, HttpClient, IdentityClient, MockClient, PercentChange, TranslationCache,
    TranslatorClient,
};
use sasrate::sas::{score_records, ScoreRequest, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT_MS};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::sas_spec::{parse_sas, AdapterDefaults};
use crate::store::{self, default_scores_dir, read_data, read_json, read_scores, write_data, write_json, write_scores};
use crate::{
    EvaluateArgs, FormatArg, GenerateArgs, IngestArgs, LogInput, RateArgs, RoundtripArgs, StatsArgs, TranslatorKind,
};

#[derive(Serialize)]
struct GenerateConfig<'a> {
    group: u8,
    seed: u64,
    generation: &'a GenerationConfig,
}

pub fn generate(args: &GenerateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    if !(1..=4).contains(&args.group) {
        return Err(CliError::Usage(format!("--group must be 1 to 4, got {}", args.group)));
    }
    let mut generation = match &args.gen_config {
        Some(p) => read_json::<GenerationConfig>(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => cfg.generation(),
    };
    if let Some(s) = args.skew {
        if args.group % 2 == 1 {
            return Err(CliError::Usage(format!("--skew applies to groups 2 and 4, not group {}", args.group)));
        }
        generation.skew = Some(s);
    }
    if let Some(r) = args.repeats {
        generation.repeats = Some(r);
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let resolved = generation.resolve(args.group)?;
    let datasets = generate_group(&resolved.spec, &resolved.templates, &resolved.names, &resolved.noun_phrases, seed)?;
    let hash = config_hash(&GenerateConfig { group: args.group, seed, generation: &generation })?;
    write_data(&args.out, &datasets, &format!("generate:group-{}", args.group), &hash, Some(seed))?;
    let records: usize = datasets.iter().map(|d| d.records.len()).sum();
    println!("wrote {} datasets ({records} records) to {}", datasets.len(), args.out.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let defaults = AdapterDefaults {
        timeout_ms: args.timeout_ms.or(cfg.timeout_ms).unwrap_or(DEFAULT_TIMEOUT_MS),
        max_in_flight: args.max_in_flight.or(cfg.max_in_flight).unwrap_or(DEFAULT_MAX_IN_FLIGHT),
    };
    let generation = cfg.generation();
    let systems = args.sas.iter().map(|s| parse_sas(s, &generation, &defaults)).collect::<Result<Vec<_>, _>>()?;
    let mut ids = std::collections::BTreeSet::new();
    for s in &systems {
        if !ids.insert(&s.sas_id) {
            return Err(CliError::Usage(format!("system id {} given twice", s.sas_id)));
        }
    }
    let (_, datasets) = read_data(&args.data)?;
    let requests: Vec<ScoreRequest> = datasets
        .iter()
        .flat_map(|d| d.records.iter().map(|r| ScoreRequest { id: r.record_id.clone(), text: r.text.clone() }))
        .collect();
    let out = args.out.clone().unwrap_or_else(|| default_scores_dir(&args.data));
    let mut failures = Vec::new();
    for sas in &systems {
        match score_records(sas, &requests) {
            Ok(scores) => {
                write_scores(&out, sas, &scores)?;
                println!("{}: scored {} records", sas.sas_id, scores.len());
            }
            Err(e) => {
                eprintln!("{}: {e}", sas.sas_id);
                failures.push(format!("{}: {e}", sas.sas_id));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Adapter(format!(
            "{} system(s) failed, their scores were not written: {}",
            failures.len(),
            failures.join("; ")
        )))
    }
}

#[derive(Serialize)]
struct RateConfig<'a> {
    levels: u32,
    zero_tol: f64,
    data_config: &'a BTreeMap<String, String>,
}

pub fn rate(args: &RateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let levels = args.levels.or(cfg.levels).unwrap_or(DEFAULT_LEVELS);
    let zero_tol = args.zero_tol.or(cfg.zero_tol).unwrap_or(DEFAULT_ZERO_TOL);
    if levels < 2 {
        return Err(CliError::Usage(format!("--levels must be at least 2, got {levels}")));
    }
    if !(zero_tol.is_finite() && zero_tol >= 0.0) {
        return Err(CliError::Usage(format!("--zero-tol must be a finite non-negative number, got {zero_tol}")));
    }
    let (manifest, datasets) = read_data(&args.data)?;
    let scores_dir = args.scores.clone().unwrap_or_else(|| default_scores_dir(&args.data));
    let mut systems = read_scores(&scores_dir)?;
    if !args.sas.is_empty() {
        for id in &args.sas {
            if !systems.iter().any(|(s, _)| &s.sas_id == id) {
                return Err(CliError::Data(format!("no scores for system {id} in {}", scores_dir.display())));
            }
        }
        systems.retain(|(s, _)| args.sas.contains(&s.sas_id));
    }
    let scores = systems.iter().map(|(s, recs)| (s.sas_id.clone(), score_map(recs))).collect();
    let run = RunManifest::new(
        &RateConfig { levels, zero_tol, data_config: &manifest.config_hashes },
        manifest.seeds.clone(),
        systems.iter().map(|(s, _)| s.clone()).collect(),
        manifest.datasets.iter().map(|d| d.dataset_id.clone()).collect(),
    )?;
    let report = build_report(run, &datasets, &scores, RateOptions { levels, zero_tol })?;
    let out = args.out.clone().unwrap_or_else(|| args.data.join("report.json"));
    let md_path = args.markdown.clone().unwrap_or_else(|| out.with_extension("md"));
    write_json(&out, &report)?;
    let md = render_markdown(&report);
    write_atomic(&md_path, md.as_bytes())?;
    print!("{md}");
    Ok(())
}

fn translator(args: &RoundtripArgs, cfg: &FileConfig) -> Result<Box<dyn TranslatorClient>, CliError> {
    Ok(match args.translator {
        TranslatorKind::Identity => Box::new(IdentityClient),
        TranslatorKind::Mock => {
            let base = match &args.mock_table {
                Some(p) => MockClient::new(read_json(p).map_err(|e| CliError::Usage(e.to_string()))?),
                None => MockClient::builtin(),
            };
            if !(0.0..=1.0).contains(&args.drop_rate) {
                return Err(CliError::Usage(format!("--drop-rate must lie in [0, 1], got {}", args.drop_rate)));
            }
            Box::new(base.with_dropping(args.drop_rate, args.seed.or(cfg.seed).unwrap_or(0)))
        }
        TranslatorKind::Http => {
            let endpoint = args
                .endpoint
                .clone()
                .or_else(|| cfg.translator_endpoint.clone())
                .ok_or_else(|| CliError::Usage("--translator http needs --endpoint".into()))?;
            Box::new(HttpClient::from_env(&endpoint))
        }
    })
}

#[derive(Serialize)]
struct RoundtripConfig<'a> {
    via: &'a str,
    engine: String,
}

pub fn roundtrip(args: &RoundtripArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let need =
        |v: &Option<PathBuf>, flag: &str| v.clone().ok_or_else(|| CliError::Usage(format!("roundtrip needs {flag}")));
    let data = need(&args.data, "--data")?;
    let out = need(&args.out, "--out")?;
    let via = args.via.clone().ok_or_else(|| CliError::Usage("roundtrip needs --via".into()))?;
    let client = translator(args, cfg)?;
    let (source, datasets) = read_data(&data)?;
    let cache_path = args.cache.clone().unwrap_or_else(|| out.join("translation-cache.jsonl"));
    let cache = TranslationCache::open(&cache_path)?;
    let translated = datasets
        .iter()
        .map(|d| round_trip_dataset(d, &via, client.as_ref(), &cache, args.parallelism))
        .collect::<Result<Vec<_>, _>>()?;
    if !out.join(store::MANIFEST).exists() {
        // carry the source's seeds and config hashes into the new directory
        let mut base = source.clone();
        base.datasets.clear();
        write_json(&out.join(store::MANIFEST), &base)?;
    }
    let hash = config_hash(&RoundtripConfig { via: &via, engine: client.engine_id() })?;
    write_data(&out, &translated, &format!("roundtrip:{via}"), &hash, None)?;
    let lost: usize = translated.iter().filter_map(|d| d.provenance.as_ref()).map(|p| p.prefix_lost.len()).sum();
    println!("round-tripped {} datasets via {via} into {}", translated.len(), out.display());
    if lost > 0 {
        println!("{lost} record(s) lost their enhancement prefix in translation");
    }
    Ok(())
}

fn fmt_pct(p: PercentChange) -> String {
    match p {
        PercentChange::Value(v) => format!("{v:.1}%"),
        PercentChange::Undefined => "undefined".to_string(),
    }
}

pub fn compare(before: &Path, after: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let a: RatingReport = read_json(before)?;
    let b: RatingReport = read_json(after)?;
    let deltas = compare_bias(&a, &b)?;
    if let Some(p) = out {
        write_json(p, &deltas)?;
    }
    let mut md = String::from("| Group | System | Before | After | Change |\n|---|---|---|---|---|\n");
    for d in &deltas {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            d.section,
            d.sas_id,
            sasrate::report::fmt_raw(&d.before),
            sasrate::report::fmt_raw(&d.after),
            fmt_pct(d.percent_change)
        );
    }
    print!("{md}");
    Ok(())
}

fn input_format(log: &LogInput) -> Result<(InputFormat, u8), CliError> {
    let format = match log.format {
        Some(FormatArg::Csv) => InputFormat::Csv,
        Some(FormatArg::Jsonl) => InputFormat::Jsonl,
        None => InputFormat::from_path(&log.input),
    };
    if !log.delimiter.is_ascii() {
        return Err(CliError::Usage(format!("--delimiter must be an ASCII character, got {:?}", log.delimiter)));
    }
    Ok((format, log.delimiter as u8))
}

pub fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let (format, delimiter) = input_format(&args.log)?;
    store::check_file_id(&args.corpus)?;
    let rows = read_conversations(&args.log.input, format, delimiter)?;
    let opts = PreprocessOptions { corpus: args.corpus.clone(), drop_na: !args.keep_na };
    let datasets = into_datasets(preprocess(&rows, &opts))?;
    let hash = config_hash(&opts)?;
    write_data(&args.out, &datasets, &format!("ingest:{}", args.corpus), &hash, None)?;
    println!("ingested {} rows into {} conversation datasets in {}", rows.len(), datasets.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct AggregateSummary<'a> {
    annotators: Vec<&'a str>,
    seed: u64,
    records: usize,
    agreement: f64,
    three_way_splits: &'a [String],
}

pub fn aggregate(inputs: &[PathBuf], seed: u64, out: &Path, summary: Option<&Path>) -> Result<(), CliError> {
    if inputs.len() != 3 {
        return Err(CliError::Usage(format!("annotate aggregate needs exactly 3 --input files, got {}", inputs.len())));
    }
    let sets = inputs.iter().map(|p| read_annotations(p)).collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate_annotations(&sets, seed)?;
    let mut csv = String::from("record_id,label\n");
    for (id, label) in &agg.labels {
        let _ = writeln!(csv, "{id},{label}");
    }
    write_atomic(out, csv.as_bytes())?;
    if let Some(p) = summary {
        write_json(
            p,
            &AggregateSummary {
                annotators: sets.iter().map(|s| s.annotator.as_str()).collect(),
                seed,
                records: agg.labels.len(),
                agreement: agg.agreement,
                three_way_splits: &agg.three_way_splits,
            },
        )?;
    }
    println!(
        "{} records, agreement {:.1}%, {} three-way split(s)",
        agg.labels.len(),
        agg.agreement,
        agg.three_way_splits.len()
    );
    Ok(())
}

fn fmt_summary(s: &Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:.2} / {} / {}", s.avg, s.min, s.max),
        None => "-".to_string(),
    }
}

fn stats_table(stats: &[AgentStats]) -> String {
    let mut md = String::from(
        "| Agent | Gender | Conversations | Words per utterance | Stopwords per utterance | Utterances per conversation | Turns per conversation |\n|---|---|---|---|---|---|---|\n",
    );
    for s in stats {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            s.agent,
            s.gender,
            s.conversations,
            fmt_summary(&s.words_per_utterance),
            fmt_summary(&s.stopwords_per_utterance),
            fmt_summary(&s.utterances_per_conversation),
            fmt_summary(&s.turns_per_conversation)
        );
    }
    md
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let (format, delimiter) = input_format(&args.log)?;
    let rows = read_conversations(&args.log.input, format, delimiter)?;
    let stats = conversation_stats(&rows);
    if let Some(p) = &args.out {
        write_json(p, &stats)?;
    }
    print!("{}", stats_table(&stats));
    Ok(())
}
