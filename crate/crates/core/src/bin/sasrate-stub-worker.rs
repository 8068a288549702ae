//! Lexicon-backed worker used to exercise the subprocess adapter.

use std::io::{self, BufWriter};
use std::process::ExitCode;

use sasrate::sas::conformance::{serve, StubBehavior};
use sasrate::sas::SentimentLexicon;

fn main() -> ExitCode {
    let behavior = match StubBehavior::from_args(std::env::args().skip(1)) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("sasrate-stub-worker: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    match serve(stdin, stdout, &SentimentLexicon::builtin(), &behavior) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => {
            eprintln!("sasrate-stub-worker: exiting early as requested");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("sasrate-stub-worker: {e}");
            ExitCode::FAILURE
        }
    }
}
