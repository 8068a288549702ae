//! Translator clients: identity, an offline mock, and an HTTP service.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RoundTripError;
use crate::retry::{Attempt, RetryPolicy};

pub trait TranslatorClient: Send + Sync {
    /// Stable name used as part of the cache key.
    fn engine_id(&self) -> String;

    fn translate(&self, text: &str, src: &str, dst: &str) -> Result<String, RoundTripError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityClient;

impl TranslatorClient for IdentityClient {
    fn engine_id(&self) -> String {
        "identity".to_string()
    }

    fn translate(&self, text: &str, _src: &str, _dst: &str) -> Result<String, RoundTripError> {
        Ok(text.to_string())
    }
}

/// Offline stand-in for a real translator. On the English-to-pivot leg it
/// swaps words through a synonym table and may drop stopwords; the return
/// leg is the identity. Both steps are deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockClient {
    pub synonyms: BTreeMap<String, String>,
    /// Probability of dropping each stopword, drawn from a stream keyed on
    /// `(seed, text)`. Zero disables dropping.
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MockClient {
    pub fn new(synonyms: BTreeMap<String, String>) -> Self {
        Self { synonyms, drop_rate: 0.0, seed: 0 }
    }

    /// Symmetric table: each pair maps both ways.
    pub fn symmetric(pairs: &[(&str, &str)]) -> Self {
        let mut synonyms = BTreeMap::new();
        for &(a, b) in pairs {
            synonyms.insert(a.to_lowercase(), b.to_lowercase());
            synonyms.insert(b.to_lowercase(), a.to_lowercase());
        }
        Self::new(synonyms)
    }

    pub fn builtin() -> Self {
        Self::symmetric(&[("grim", "bleak"), ("glad", "pleased"), ("sad", "gloomy")])
    }

    pub fn with_dropping(mut self, drop_rate: f64, seed: u64) -> Self {
        self.drop_rate = drop_rate;
        self.seed = seed;
        self
    }

    fn substitute(&self, text: &str) -> String {
        let stopwords = crate::ingest::stopwords();
        let mut rng = {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(text.as_bytes());
            ChaCha8Rng::from_seed(h.finalize().into())
        };
        let mut out = String::with_capacity(text.len());
        let mut word = String::new();
        let mut pending_space = false;
        let mut flush = |word: &mut String, out: &mut String, pending_space: &mut bool| {
            if word.is_empty() {
                return;
            }
            let lower = word.to_lowercase();
            let dropped = self.drop_rate > 0.0 && stopwords.contains(lower.as_str()) && rng.gen_bool(self.drop_rate);
            if dropped {
                // swallow the following space as well
                *pending_space = true;
            } else if let Some(rep) = self.synonyms.get(&lower) {
                out.push_str(&match_case(word, rep));
            } else {
                out.push_str(word);
            }
            word.clear();
        };
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
            } else {
                flush(&mut word, &mut out, &mut pending_space);
                if pending_space && ch == ' ' {
                    pending_space = false;
                    continue;
                }
                pending_space = false;
                out.push(ch);
            }
        }
        flush(&mut word, &mut out, &mut pending_space);
        out
    }
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut c = replacement.chars();
        c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
    } else {
        replacement.to_string()
    }
}

impl TranslatorClient for MockClient {
    fn engine_id(&self) -> String {
        let table = serde_json::to_string(self).expect("mock config serializes");
        let digest = Sha256::digest(table.as_bytes());
        format!("mock-{}", &hex::encode(digest)[..12])
    }

    fn translate(&self, text: &str, src: &str, _dst: &str) -> Result<String, RoundTripError> {
        if src == super::SOURCE_LANG {
            Ok(self.substitute(text))
        } else {
            Ok(text.to_string())
        }
    }
}

/// Client for a service exposing `POST <endpoint>/translate` with body
/// `{"text","src","dst"}` and reply `{"text"}`.
#[derive(Debug, Clone)]
pub struct HttpClient {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

pub const API_KEY_ENV: &str = "SASRATE_TRANSLATOR_KEY";

impl HttpClient {
    /// Reads the API key from `API_KEY_ENV` when it is set.
    pub fn from_env(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(30),
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/translate") {
            base.to_string()
        } else {
            format!("{base}/translate")
        }
    }
}

impl TranslatorClient for HttpClient {
    fn engine_id(&self) -> String {
        format!("http:{}", self.url())
    }

    fn translate(&self, text: &str, src: &str, dst: &str) -> Result<String, RoundTripError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let url = self.url();
        let unavailable = |m: String| RoundTripError::TranslatorUnavailable(m);
        let body = self.retry.run(|_| {
            let mut req = agent.post(&url);
            if let Some(key) = &self.api_key {
                req = req.set("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(serde_json::json!({"text": text, "src": src, "dst": dst})) {
                Ok(resp) => resp.into_string().map_err(|e| Attempt::Transient(unavailable(e.to_string()))),
                Err(ureq::Error::Status(400, _)) => {
                    Err(Attempt::Fatal(RoundTripError::UnsupportedLanguage(format!("{src}->{dst}"))))
                }
                Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                    Err(Attempt::Transient(unavailable(format!("{url} returned {code}"))))
                }
                Err(ureq::Error::Status(code, _)) => Err(Attempt::Fatal(unavailable(format!("{url} returned {code}")))),
                Err(ureq::Error::Transport(t)) => Err(Attempt::Transient(unavailable(t.to_string()))),
            }
        })?;
        #[derive(Deserialize)]
        struct Reply {
            text: String,
        }
        serde_json::from_str::<Reply>(&body)
            .map(|r| r.text)
            .map_err(|e| unavailable(format!("malformed reply from {url}: {e}")))
    }
}
