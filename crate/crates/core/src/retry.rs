//! Bounded exponential backoff shared by the HTTP clients.

use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Outcome of one attempt, as judged by the caller.
pub enum Attempt<T, E> {
    Done(T),
    Retry(E, Option<Duration>),
    Fail(E),
}

/// Runs `op` until it succeeds, fails terminally, or retries run out. The
/// closure receives the attempt number.
pub fn with_retries<T, E>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Attempt<T, E>,
) -> Result<T, E> {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fail(e) => return Err(e),
            Attempt::Retry(e, hint) => {
                if attempt >= policy.max_retries {
                    return Err(e);
                }
                let wait = hint
                    .map(|h| h.min(policy.max_delay))
                    .unwrap_or_else(|| policy.delay(attempt));
                tracing::debug!(attempt, ?wait, "retrying request");
                std::thread::sleep(wait);
                attempt += 1;
            }
        }
    }
}
