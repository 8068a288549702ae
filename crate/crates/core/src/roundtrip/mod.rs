//! Round-trip translation: English to a pivot language and back, with a
//! persistent cache and per-record prefix checks.

pub mod cache;
pub mod client;
pub mod compare;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use thiserror::Error;

use crate::datagen::{DatagenError, Dataset, Provenance};

pub use cache::{CacheKey, TranslationCache};
pub use client::{HttpClient, IdentityClient, MockClient, TranslatorClient};
pub use compare::{compare_bias, BiasDelta, PercentChange};

pub const SOURCE_LANG: &str = "en";
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum RoundTripError {
    #[error("translator unavailable: {0}")]
    TranslatorUnavailable(String),
    #[error("unsupported language: {0}")]
    UnsupportedLanguage(String),
    #[error("translation cache: {0}")]
    Cache(String),
    #[error("reports do not match: {0}")]
    MismatchedReports(String),
    #[error(transparent)]
    Dataset(#[from] DatagenError),
}

fn check_pivot(pivot: &str) -> Result<(), RoundTripError> {
    let ok = !pivot.is_empty() && pivot != SOURCE_LANG && pivot.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
    if ok {
        Ok(())
    } else {
        Err(RoundTripError::UnsupportedLanguage(pivot.to_string()))
    }
}

/// `-R` plus the pivot's one-letter tag (`D` for Danish, `S` for Spanish)
/// or the uppercased code for any other pivot.
pub fn roundtrip_dataset_id(dataset_id: &str, pivot: &str) -> String {
    let tag = match pivot {
        "da" => "D".to_string(),
        "es" => "S".to_string(),
        other => other.to_uppercase(),
    };
    format!("{dataset_id}-R{tag}")
}

fn translate_cached(
    client: &dyn TranslatorClient,
    cache: &TranslationCache,
    text: &str,
    src: &str,
    dst: &str,
) -> Result<String, RoundTripError> {
    let key = CacheKey::new(&client.engine_id(), src, dst, text);
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let out = client.translate(text, src, dst)?;
    cache.put(key, &out)
}

/// Translates `text` to `pivot` and back to English, caching each leg.
pub fn round_trip(
    text: &str,
    pivot: &str,
    client: &dyn TranslatorClient,
    cache: &TranslationCache,
) -> Result<String, RoundTripError> {
    check_pivot(pivot)?;
    let there = translate_cached(client, cache, text, SOURCE_LANG, pivot)?;
    translate_cached(client, cache, &there, pivot, SOURCE_LANG)
}

/// Round-trips every record of `ds`. Record ids, metadata and order are
/// kept; only text changes. A record whose enhancement prefix did not
/// survive keeps the translated text, loses its enhancement field and is
/// listed in the provenance.
pub fn round_trip_dataset(
    ds: &Dataset,
    pivot: &str,
    client: &dyn TranslatorClient,
    cache: &TranslationCache,
    parallelism: usize,
) -> Result<Dataset, RoundTripError> {
    check_pivot(pivot)?;
    let n = ds.records.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<String, RoundTripError>>>> = Mutex::new((0..n).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..parallelism.max(1).min(n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = round_trip(&ds.records[i].text, pivot, client, cache);
                slots.lock().expect("slots lock")[i] = Some(r);
            });
        }
    });
    let new_id = roundtrip_dataset_id(&ds.dataset_id, pivot);
    let mut prefix_lost = Vec::new();
    let mut records = Vec::with_capacity(n);
    for (rec, slot) in ds.records.iter().zip(slots.into_inner().expect("slots lock")) {
        let text = slot.expect("every slot filled")?;
        let mut r = rec.clone();
        r.dataset_id = new_id.clone();
        if !r.enhancement.is_empty() && !text.starts_with(&r.enhancement) {
            prefix_lost.push(r.record_id.clone());
            r.enhancement.clear();
        }
        r.text = text;
        records.push(r);
    }
    let mut out = Dataset::new(new_id, ds.group.clone(), records)?.with_confounders(ds.confounders.clone());
    out.provenance = Some(Provenance {
        source_dataset_id: ds.dataset_id.clone(),
        pivot: pivot.to_string(),
        engine_id: client.engine_id(),
        prefix_lost,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Counting<'a>(&'a AtomicUsize);

    impl TranslatorClient for Counting<'_> {
        fn engine_id(&self) -> String {
            "counting".into()
        }
        fn translate(&self, text: &str, _: &str, _: &str) -> Result<String, RoundTripError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(text.to_string())
        }
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let calls = AtomicUsize::new(0);
        let cache = TranslationCache::in_memory();
        let c = Counting(&calls);
        round_trip("I feel grim", "da", &c, &cache).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        round_trip("I feel grim", "da", &c, &cache).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn english_pivot_is_rejected() {
        let cache = TranslationCache::in_memory();
        assert!(matches!(round_trip("x", "en", &IdentityClient, &cache), Err(RoundTripError::UnsupportedLanguage(_))));
        assert!(matches!(round_trip("x", "", &IdentityClient, &cache), Err(RoundTripError::UnsupportedLanguage(_))));
    }

    #[test]
    fn mock_round_trip_example() {
        let cache = TranslationCache::in_memory();
        let m = MockClient::symmetric(&[("grim", "bleak")]);
        assert_eq!(round_trip("I feel grim", "es", &m, &cache).unwrap(), "I feel bleak");
    }

    #[test]
    fn dataset_naming() {
        assert_eq!(roundtrip_dataset_id("HD1", "da"), "HD1-RD");
        assert_eq!(roundtrip_dataset_id("HD1", "es"), "HD1-RS");
        assert_eq!(roundtrip_dataset_id("SD", "fr"), "SD-RFR");
    }
}
