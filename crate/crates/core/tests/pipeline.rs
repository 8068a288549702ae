use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use sasrate::datagen::{generate_group, Dataset, GenerationConfig};
use sasrate::domain::Speaker;
use sasrate::ingest::{into_datasets, preprocess, read_conversations, InputFormat, PreprocessOptions};
use sasrate::roundtrip::{
    round_trip, round_trip_dataset, HttpClient, MockClient, RoundTripError, TranslationCache, TranslatorClient,
};

fn group(g: u8, seed: u64) -> Vec<Dataset> {
    let r = GenerationConfig::default().resolve(g).unwrap();
    generate_group(&r.spec, &r.templates, &r.names, &r.noun_phrases, seed).unwrap()
}

/// Uppercases on the way out and lowercases on the way back. Answers with
/// `fail_first` 503s first, and 400 for Klingon.
fn translator(fail_first: usize) -> (String, Arc<AtomicUsize>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let v: Value = serde_json::from_str(&body).unwrap();
            let (status, reply) = if n < fail_first {
                (503, json!({"error": "busy"}))
            } else if v["dst"] == "tlh" {
                (400, json!({"error": "unsupported"}))
            } else {
                let text = v["text"].as_str().unwrap();
                let out = if v["src"] == "en" { text.to_uppercase() } else { text.to_lowercase() };
                (200, json!({ "text": out }))
            };
            let resp = tiny_http::Response::from_string(reply.to_string()).with_status_code(status);
            let _ = req.respond(resp);
        }
    });
    (url, hits)
}

#[test]
fn http_translator_round_trips_and_caches() {
    let (url, hits) = translator(0);
    let client = HttpClient::from_env(&url);
    let cache = TranslationCache::in_memory();
    assert_eq!(round_trip("I made this girl feel grim", "da", &client, &cache).unwrap(), "i made this girl feel grim");
    assert_eq!(hits.load(Ordering::SeqCst), 2);
    round_trip("I made this girl feel grim", "da", &client, &cache).unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 2, "second call is served from the cache");
}

#[test]
fn http_translator_retries_server_errors() {
    let (url, hits) = translator(2);
    let client = HttpClient::from_env(&url);
    let out = client.translate("glad", "en", "es").unwrap();
    assert_eq!(out, "GLAD");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn http_translator_maps_400_to_unsupported_language() {
    let (url, hits) = translator(0);
    let err = HttpClient::from_env(&url).translate("glad", "en", "tlh").unwrap_err();
    assert!(matches!(err, RoundTripError::UnsupportedLanguage(_)), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 1, "client errors are not retried");
}

#[test]
fn unreachable_translator_is_unavailable() {
    let err = HttpClient::from_env("http://127.0.0.1:1").translate("glad", "en", "es").unwrap_err();
    assert!(matches!(err, RoundTripError::TranslatorUnavailable(_)), "{err:?}");
}

#[test]
fn mock_round_trip_is_deterministic_and_keeps_ids() {
    let datasets = group(4, 9);
    let client = MockClient::builtin().with_dropping(0.3, 5);
    let run = || {
        let cache = TranslationCache::in_memory();
        datasets.iter().map(|d| round_trip_dataset(d, "es", &client, &cache, 3).unwrap()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    for (src, out) in datasets.iter().zip(&a) {
        assert_eq!(out.dataset_id, format!("{}-RS", src.dataset_id));
        assert_eq!(out.confounders, src.confounders);
        let ids = |d: &Dataset| d.records.iter().map(|r| r.record_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(out), ids(src));
        out.validate().unwrap();
    }
    assert!(datasets.iter().zip(&a).any(|(s, o)| s.records.iter().zip(&o.records).any(|(x, y)| x.text != y.text)));
}

/// Drops the first word of every English output.
struct Truncating;

impl TranslatorClient for Truncating {
    fn engine_id(&self) -> String {
        "truncating".into()
    }

    fn translate(&self, text: &str, _src: &str, dst: &str) -> Result<String, RoundTripError> {
        if dst == "en" {
            Ok(text.split_once(' ').map_or(text, |(_, rest)| rest).to_string())
        } else {
            Ok(text.to_string())
        }
    }
}

const LOG: &str = concat!(
    "\u{feff}",
    r#"C_num,UB,Original,Enhancement,Text,User_gender
1,1,i am tired,,i am tired,2
1,0,you should rest,,you should rest,2
2,1,great news today,"My boyfriend says, ","My boyfriend says, great news today",1
2,0,congratulations,,congratulations,1
2,0,well done,,well done,1
"#
);

#[test]
fn ingest_fixture_to_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("log.csv");
    std::fs::write(&path, LOG).unwrap();
    let rows = read_conversations(&path, InputFormat::from_path(&path), b',').unwrap();
    assert_eq!(rows.len(), 5, "byte-order mark is stripped from the header");
    let records = preprocess(&rows, &PreprocessOptions::new("HD1"));
    assert_eq!(records.len(), 4, "consecutive chatbot rows are merged");
    let merged = records.iter().find(|r| r.text.ends_with("congratulations well done")).unwrap();
    assert_eq!(merged.speaker, Speaker::Chatbot);
    let kept = records.iter().find(|r| r.text.contains("great news")).unwrap();
    assert_eq!(kept.enhancement, "My boyfriend says, ");
    assert!(records.iter().filter(|r| r.enhancement.is_empty()).count() == 0, "every utterance carries a proxy");

    let datasets = into_datasets(records).unwrap();
    assert_eq!(datasets.iter().map(|d| d.dataset_id.as_str()).collect::<Vec<_>>(), ["HD1-c1", "HD1-c2"]);
    let cache = TranslationCache::in_memory();
    let out = round_trip_dataset(&datasets[1], "da", &Truncating, &cache, 2).unwrap();
    let prov = out.provenance.as_ref().unwrap();
    assert_eq!(prov.prefix_lost.len(), 2);
    assert!(out.records.iter().all(|r| r.enhancement.is_empty()));
    out.validate().unwrap();
}
