//! Subprocess adapter: newline-delimited JSON over the worker's stdin and
//! stdout, at most `max_in_flight` outstanding requests.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{parse_response, validate_score, SasError, ScoreRequest};
use crate::domain::SentimentScore;

/// Kills the child on every exit path that did not reap it.
struct ChildGuard(Child);

impl Drop for ChildGuard {
    fn drop(&mut self) {
        if let Ok(None) = self.0.try_wait() {
            let _ = self.0.kill();
            let _ = self.0.wait();
        }
    }
}

fn spawn(command: &str) -> Result<ChildGuard, SasError> {
    let argv = shlex::split(command)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| SasError::AdapterError(format!("cannot parse worker command {command:?}")))?;
    let child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SasError::AdapterError(format!("cannot spawn {:?}: {e}", argv[0])))?;
    Ok(ChildGuard(child))
}

fn crash_report(guard: &mut ChildGuard, stderr: thread::JoinHandle<String>) -> SasError {
    let status = guard.0.wait().map(|s| s.to_string()).unwrap_or_else(|e| e.to_string());
    let tail: String = stderr.join().unwrap_or_default();
    let tail = tail.trim();
    if tail.is_empty() {
        SasError::WorkerCrashed(status)
    } else {
        SasError::WorkerCrashed(format!("{status}: {tail}"))
    }
}

fn send(stdin: &mut ChildStdin, req: &ScoreRequest) -> std::io::Result<()> {
    let line = serde_json::json!({"id": req.id, "text": req.text}).to_string();
    stdin.write_all(line.as_bytes())?;
    stdin.write_all(b"\n")?;
    stdin.flush()
}

/// Scores `requests` through a worker process. Responses may come back in
/// any order; they are re-associated by id.
pub fn score_worker(
    command: &str,
    requests: &[ScoreRequest],
    timeout_ms: u64,
    max_in_flight: usize,
) -> Result<Vec<(String, SentimentScore)>, SasError> {
    let mut guard = spawn(command)?;
    let mut stdin = guard.0.stdin.take();
    let stdout = guard.0.stdout.take().expect("piped stdout");
    let mut stderr_pipe = guard.0.stderr.take().expect("piped stderr");
    let stderr = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr_pipe.read_to_string(&mut s);
        s
    });
    let (tx, rx) = mpsc::channel::<std::io::Result<String>>();
    thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });

    let timeout = Duration::from_millis(timeout_ms);
    let mut pending: BTreeSet<String> = BTreeSet::new();
    let mut results: BTreeMap<String, SentimentScore> = BTreeMap::new();
    let mut next = 0;
    while results.len() < requests.len() {
        while next < requests.len() && pending.len() < max_in_flight.max(1) {
            let req = &requests[next];
            let pipe = stdin.as_mut().expect("stdin open while requests remain");
            if send(pipe, req).is_err() {
                drop(stdin.take());
                return Err(crash_report(&mut guard, stderr));
            }
            pending.insert(req.id.clone());
            next += 1;
        }
        if next == requests.len() {
            drop(stdin.take());
        }
        let line = match rx.recv_timeout(timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(SasError::ProtocolViolation(format!("unreadable worker output: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(SasError::Timeout(timeout_ms)),
            Err(RecvTimeoutError::Disconnected) => {
                drop(stdin.take());
                return Err(crash_report(&mut guard, stderr));
            }
        };
        let (id, score) = parse_response(&line)?;
        if !pending.remove(&id) {
            return Err(SasError::ProtocolViolation(format!("response for unknown or answered id {id:?}")));
        }
        results.insert(id.clone(), validate_score(&id, score)?);
    }
    drop(stdin.take());

    // Anything printed after the last answer is also a protocol breach.
    match rx.recv_timeout(timeout) {
        Ok(Ok(line)) => {
            return Err(SasError::ProtocolViolation(format!("unexpected output after last response: {line}")))
        }
        Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => {}
        Err(RecvTimeoutError::Timeout) => return Err(SasError::Timeout(timeout_ms)),
    }
    let _ = guard.0.wait();
    let _ = stderr.join();
    Ok(results.into_iter().collect())
}
