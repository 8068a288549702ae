//! Reference worker loop for the stdin/stdout protocol. It scores with a
//! lexicon, so its output must match the in-process lexicon system bit for
//! bit. Fault switches let tests exercise the adapter's error paths.

use std::io::{self, BufRead, Write};

use serde::Deserialize;

use super::SentimentLexicon;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StubBehavior {
    /// Answer only after end of input, last request first.
    pub reverse: bool,
    /// Add 2.0 to every score.
    pub out_of_range: bool,
    /// Exit with status 3 after this many answers.
    pub crash_after: Option<usize>,
    /// Print a non-JSON line instead of the first answer.
    pub garbage: bool,
    /// Omit `id` from every answer.
    pub missing_id: bool,
    /// Sleep this long before every answer.
    pub delay_ms: u64,
}

impl StubBehavior {
    pub fn from_args<I: IntoIterator<Item = String>>(args: I) -> Result<Self, String> {
        let mut b = StubBehavior::default();
        let mut it = args.into_iter();
        while let Some(a) = it.next() {
            match a.as_str() {
                "--reverse" => b.reverse = true,
                "--out-of-range" => b.out_of_range = true,
                "--garbage" => b.garbage = true,
                "--missing-id" => b.missing_id = true,
                "--crash-after" => {
                    let n = it.next().ok_or("--crash-after needs a count")?;
                    b.crash_after = Some(n.parse().map_err(|_| format!("bad count {n:?}"))?);
                }
                "--delay-ms" => {
                    let n = it.next().ok_or("--delay-ms needs a value")?;
                    b.delay_ms = n.parse().map_err(|_| format!("bad delay {n:?}"))?;
                }
                other => return Err(format!("unknown flag {other:?}")),
            }
        }
        Ok(b)
    }
}

#[derive(Deserialize)]
struct Request {
    id: String,
    text: String,
}

/// Serves requests until end of input. Returns `Some(code)` when the
/// behavior asks the process to exit early.
pub fn serve<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    lexicon: &SentimentLexicon,
    behavior: &StubBehavior,
) -> io::Result<Option<i32>> {
    let mut answered = 0usize;
    let mut held = Vec::new();
    let answer = |id: &str, text: &str, answered: usize| -> String {
        if behavior.garbage && answered == 0 {
            return "this is not json".to_string();
        }
        let mut score = lexicon.score(text);
        if behavior.out_of_range {
            score += 2.0;
        }
        if behavior.missing_id {
            serde_json::json!({ "score": score }).to_string()
        } else {
            serde_json::json!({ "id": id, "score": score }).to_string()
        }
    };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                writeln!(output, "{}", serde_json::json!({"id": null, "error": e.to_string()}))?;
                output.flush()?;
                continue;
            }
        };
        if behavior.reverse {
            held.push(req);
            continue;
        }
        if behavior.crash_after == Some(answered) {
            return Ok(Some(3));
        }
        if behavior.delay_ms > 0 {
            std::thread::sleep(std::time::Duration::from_millis(behavior.delay_ms));
        }
        writeln!(output, "{}", answer(&req.id, &req.text, answered))?;
        output.flush()?;
        answered += 1;
    }
    for req in held.iter().rev() {
        if behavior.crash_after == Some(answered) {
            return Ok(Some(3));
        }
        writeln!(output, "{}", answer(&req.id, &req.text, answered))?;
        output.flush()?;
        answered += 1;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str, b: &StubBehavior) -> (String, Option<i32>) {
        let mut out = Vec::new();
        let code = serve(input.as_bytes(), &mut out, &SentimentLexicon::builtin(), b).unwrap();
        (String::from_utf8(out).unwrap(), code)
    }

    #[test]
    fn answers_every_request() {
        let (out, code) = run(
            "{\"id\":\"a\",\"text\":\"I feel happy\"}\n{\"id\":\"b\",\"text\":\"qwxz\"}\n",
            &StubBehavior::default(),
        );
        assert_eq!(out, "{\"id\":\"a\",\"score\":0.8}\n{\"id\":\"b\",\"score\":0.0}\n");
        assert_eq!(code, None);
    }

    #[test]
    fn garbage_input_yields_error_object() {
        let (out, _) = run("garbage\n{\"id\":\"a\",\"text\":\"x\"}\n", &StubBehavior::default());
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("{\"error\":") && lines[0].contains("\"id\":null"));
        assert_eq!(lines[1], "{\"id\":\"a\",\"score\":0.0}");
    }

    #[test]
    fn reverse_and_crash() {
        let b = StubBehavior { reverse: true, ..Default::default() };
        let (out, _) = run("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"x\"}\n", &b);
        assert!(out.starts_with("{\"id\":\"b\""));
        let b = StubBehavior { crash_after: Some(1), ..Default::default() };
        let (out, code) = run("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"x\"}\n", &b);
        assert_eq!((out.lines().count(), code), (1, Some(3)));
    }

    #[test]
    fn flag_parsing() {
        let b = StubBehavior::from_args(["--reverse".to_string(), "--crash-after".into(), "2".into()]).unwrap();
        assert!(b.reverse && b.crash_after == Some(2));
        assert!(StubBehavior::from_args(["--nope".to_string()]).is_err());
    }
}
