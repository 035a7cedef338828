//! Retry with exponential backoff for transient HTTP failures.

use std::time::Duration;

/// Statuses worth retrying: rate limiting and gateway/server hiccups.
pub const TRANSIENT_STATUSES: &[u16] = &[429, 500, 502, 503, 504];

pub fn is_transient_status(status: u16) -> bool {
    TRANSIENT_STATUSES.contains(&status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// Whether a failed attempt may be repeated.
pub enum Attempt<T, E> {
    Done(T),
    Retryable(E),
    Fatal(E),
}

impl RetryPolicy {
    pub fn no_delay() -> Self {
        RetryPolicy {
            base_delay: Duration::ZERO,
            ..Self::default()
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }

    /// Runs `op` until it succeeds, fails fatally, or attempts run out.
    /// Returns the result and the number of retries performed.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Attempt<T, E>) -> (Result<T, E>, u32) {
        let mut retries = 0;
        loop {
            match op(retries + 1) {
                Attempt::Done(v) => return (Ok(v), retries),
                Attempt::Fatal(e) => return (Err(e), retries),
                Attempt::Retryable(e) => {
                    if retries + 1 >= self.max_attempts.max(1) {
                        return (Err(e), retries);
                    }
                    retries += 1;
                    tracing::warn!(retry = retries, "transient failure, backing off");
                    std::thread::sleep(self.delay(retries));
                }
            }
        }
    }
}
