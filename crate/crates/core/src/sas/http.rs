//! HTTP adapter: one `POST <endpoint>/score` per record, retried on
//! transport failures and 5xx responses.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{parse_response, validate_score, SasError, ScoreRequest};
use crate::domain::SentimentScore;
use crate::retry::{Attempt, RetryPolicy};

pub fn score_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/score") {
        base.to_string()
    } else {
        format!("{base}/score")
    }
}

fn score_one(
    agent: &ureq::Agent,
    url: &str,
    req: &ScoreRequest,
    retry: &RetryPolicy,
) -> Result<SentimentScore, SasError> {
    let body = retry.run(|_| match agent.post(url).send_json(serde_json::json!({"id": req.id, "text": req.text})) {
        Ok(resp) => {
            resp.into_string().map_err(|e| Attempt::Transient(SasError::AdapterError(format!("reading response: {e}"))))
        }
        Err(ureq::Error::Status(code, _)) if code >= 500 => {
            Err(Attempt::Transient(SasError::AdapterError(format!("{url} returned {code}"))))
        }
        Err(ureq::Error::Status(code, _)) => {
            Err(Attempt::Fatal(SasError::AdapterError(format!("{url} returned {code}"))))
        }
        Err(ureq::Error::Transport(t)) => Err(Attempt::Transient(SasError::AdapterError(t.to_string()))),
    })?;
    let (id, score) = parse_response(body.trim())?;
    if id != req.id {
        return Err(SasError::ProtocolViolation(format!("asked for {:?}, got {id:?}", req.id)));
    }
    validate_score(&id, score)
}

/// Scores `requests` with up to `max_in_flight` concurrent connections.
pub fn score_http(
    endpoint: &str,
    requests: &[ScoreRequest],
    timeout_ms: u64,
    max_in_flight: usize,
    retry: &RetryPolicy,
) -> Result<Vec<(String, SentimentScore)>, SasError> {
    let url = score_url(endpoint);
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(timeout_ms)).build();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results = Mutex::new(Vec::with_capacity(requests.len()));
    let first_error: Mutex<Option<(usize, SasError)>> = Mutex::new(None);
    thread::scope(|s| {
        for _ in 0..max_in_flight.max(1).min(requests.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= requests.len() || failed.load(Ordering::SeqCst) {
                    break;
                }
                match score_one(&agent, &url, &requests[i], retry) {
                    Ok(score) => results.lock().expect("results lock").push((requests[i].id.clone(), score)),
                    Err(e) => {
                        failed.store(true, Ordering::SeqCst);
                        let mut slot = first_error.lock().expect("error lock");
                        // report the earliest failing request for stable messages
                        if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                            *slot = Some((i, e));
                        }
                    }
                }
            });
        }
    });
    if let Some((_, e)) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let mut out = results.into_inner().expect("results lock");
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
