//! Parsing of `--sas [NAME=]SPEC` arguments.

use std::collections::BTreeMap;
use std::path::Path;

use sasrate::datagen::{female_markers, GenerationConfig};
use sasrate::ingest::annotate::read_annotations;
use sasrate::retry::RetryPolicy;
use sasrate::sas::{SasDescriptor, SasKind, SentimentLexicon};

use crate::error::CliError;
use crate::store::{check_file_id, read_json};

pub struct AdapterDefaults {
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

/// Splits off a `NAME=` prefix. A prefix containing `:` belongs to the spec
/// itself (URLs and commands may contain `=`).
fn split_name(arg: &str) -> (Option<&str>, &str) {
    match arg.split_once('=') {
        Some((name, spec)) if !name.contains(':') && !name.is_empty() => (Some(name), spec),
        _ => (None, arg),
    }
}

pub fn parse_sas(
    arg: &str,
    generation: &GenerationConfig,
    defaults: &AdapterDefaults,
) -> Result<SasDescriptor, CliError> {
    let usage = |m: String| CliError::Usage(format!("--sas {arg:?}: {m}"));
    let (name, spec) = split_name(arg);
    let (scheme, rest) = spec.split_once(':').ok_or_else(|| usage("expected SCHEME:VALUE".into()))?;
    let (default_id, kind) = match (scheme, rest) {
        ("builtin", "biased") => {
            let resolved = generation.resolve(1)?;
            ("S_b", SasKind::BiasedFemale { female_markers: female_markers(&resolved.noun_phrases, &resolved.names) })
        }
        ("builtin", r) if r.starts_with("random") => {
            let seed = r
                .strip_prefix("random:")
                .ok_or_else(|| usage("builtin:random needs a seed, e.g. builtin:random:7".into()))?;
            let seed = seed.parse().map_err(|_| usage(format!("seed {seed:?} is not an integer")))?;
            ("S_r", SasKind::Random { seed })
        }
        ("builtin", "lexicon") => ("S_t", SasKind::Lexicon { lexicon: SentimentLexicon::builtin() }),
        ("builtin", r) if r.starts_with("lexicon:") => {
            let lexicon: SentimentLexicon = read_json(Path::new(&r["lexicon:".len()..]))?;
            ("S_t", SasKind::Lexicon { lexicon })
        }
        ("worker", cmd) if !cmd.trim().is_empty() => (
            "S_w",
            SasKind::ExternalWorker {
                command: cmd.to_string(),
                timeout_ms: defaults.timeout_ms,
                max_in_flight: defaults.max_in_flight,
            },
        ),
        ("http", url) if !url.is_empty() => (
            "S_http",
            SasKind::ExternalHttp {
                endpoint: url.to_string(),
                timeout_ms: defaults.timeout_ms,
                max_in_flight: defaults.max_in_flight,
                retry: RetryPolicy::default(),
            },
        ),
        ("labels", file) if !file.is_empty() => {
            let set = read_annotations(Path::new(file))?;
            let labels: BTreeMap<String, f64> = set.labels.into_iter().map(|(k, v)| (k, f64::from(v))).collect();
            ("S_h", SasKind::Labels { labels })
        }
        _ => return Err(usage(format!("unknown system spec {spec:?}"))),
    };
    let id = name.unwrap_or(default_id);
    check_file_id(id)?;
    let sas = SasDescriptor::new(id, kind);
    sas.validate().map_err(|e| usage(e.to_string()))?;
    Ok(sas)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: AdapterDefaults = AdapterDefaults { timeout_ms: 5, max_in_flight: 2 };

    #[test]
    fn builtin_specs() {
        let g = GenerationConfig::default();
        assert_eq!(parse_sas("builtin:biased", &g, &D).unwrap().sas_id, "S_b");
        assert_eq!(parse_sas("builtin:random:9", &g, &D).unwrap().kind, SasKind::Random { seed: 9 });
        assert_eq!(parse_sas("Lex=builtin:lexicon", &g, &D).unwrap().sas_id, "Lex");
        assert!(parse_sas("builtin:random", &g, &D).is_err());
        assert!(parse_sas("nope", &g, &D).is_err());
    }

    #[test]
    fn urls_keep_their_equals_signs() {
        let s = parse_sas("http:http://h/score?a=b", &GenerationConfig::default(), &D).unwrap();
        match s.kind {
            SasKind::ExternalHttp { endpoint, timeout_ms, .. } => {
                assert_eq!(endpoint, "http://h/score?a=b");
                assert_eq!(timeout_ms, 5);
            }
            other => panic!("{other:?}"),
        }
        let w = parse_sas("W=worker:python3 w.py --x=1", &GenerationConfig::default(), &D).unwrap();
        assert_eq!(w.sas_id, "W");
    }
}
