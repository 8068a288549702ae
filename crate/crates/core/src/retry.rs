//! Bounded exponential backoff shared by the HTTP scorer and translator.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay_ms: 200 }
    }
}

/// Outcome of one attempt: either give up immediately or allow another try.
#[derive(Debug)]
pub enum Attempt<E> {
    Fatal(E),
    Transient(E),
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1u64 << attempt.min(16)))
    }

    /// Runs `op` until it succeeds, fails fatally, or the attempts run out.
    /// The last transient error is returned on exhaustion.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Result<T, Attempt<E>>) -> Result<T, E> {
        let attempts = self.attempts.max(1);
        let mut attempt = 0;
        loop {
            match op(attempt) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) => {
                    attempt += 1;
                    if attempt >= attempts {
                        return Err(e);
                    }
                    thread::sleep(self.delay(attempt - 1));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAST: RetryPolicy = RetryPolicy { attempts: 3, base_delay_ms: 0 };

    #[test]
    fn transient_errors_are_retried_up_to_the_limit() {
        let mut calls = 0;
        let r: Result<(), &str> = FAST.run(|_| {
            calls += 1;
            Err(Attempt::Transient("busy"))
        });
        assert_eq!(r, Err("busy"));
        assert_eq!(calls, 3);
    }

    #[test]
    fn fatal_errors_stop_immediately() {
        let mut calls = 0;
        let r: Result<(), &str> = FAST.run(|_| {
            calls += 1;
            Err(Attempt::Fatal("bad request"))
        });
        assert_eq!(r, Err("bad request"));
        assert_eq!(calls, 1);
    }

    #[test]
    fn recovers_after_transient_failure() {
        let r: Result<u32, &str> = FAST.run(|a| if a < 2 { Err(Attempt::Transient("busy")) } else { Ok(a) });
        assert_eq!(r, Ok(2));
    }

    #[test]
    fn delays_double() {
        let p = RetryPolicy { attempts: 3, base_delay_ms: 100 };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(400));
    }
}
