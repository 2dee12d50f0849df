//! Bounded retry with exponential backoff, shared by every network adapter.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_base_delay_ms")]
    pub base_delay_ms: u64,
    #[serde(default = "default_max_delay_ms")]
    pub max_delay_ms: u64,
}

fn default_max_attempts() -> u32 {
    4
}
fn default_base_delay_ms() -> u64 {
    500
}
fn default_max_delay_ms() -> u64 {
    8_000
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: default_max_attempts(),
            base_delay_ms: default_base_delay_ms(),
            max_delay_ms: default_max_delay_ms(),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` is 1-based.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let shift = attempt.saturating_sub(1).min(30);
        let ms = self.base_delay_ms.saturating_mul(1u64 << shift);
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

/// Outcome of one attempt: a permanent failure stops retrying immediately.
pub enum Attempt<T, E> {
    Done(T),
    Transient(E),
    Permanent(E),
}

/// The final error together with the number of attempts spent.
#[derive(Debug)]
pub struct Exhausted<E> {
    pub error: E,
    pub attempts: u32,
}

/// Runs `op` until it succeeds, fails permanently, or the policy is spent.
/// Returns the value and the number of attempts used.
pub fn with_retry<T, E>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Attempt<T, E>,
) -> Result<(T, u32), Exhausted<E>> {
    let max = policy.max_attempts.max(1);
    let mut attempt = 1;
    loop {
        match op(attempt) {
            Attempt::Done(value) => return Ok((value, attempt)),
            Attempt::Permanent(error) => return Err(Exhausted { error, attempts: attempt }),
            Attempt::Transient(error) => {
                if attempt >= max {
                    return Err(Exhausted { error, attempts: attempt });
                }
                log::debug!("attempt {attempt} failed, backing off");
                std::thread::sleep(policy.delay_after(attempt));
                attempt += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 10,
            base_delay_ms: 100,
            max_delay_ms: 1000,
        };
        assert_eq!(p.delay_after(1), Duration::from_millis(100));
        assert_eq!(p.delay_after(2), Duration::from_millis(200));
        assert_eq!(p.delay_after(4), Duration::from_millis(800));
        assert_eq!(p.delay_after(5), Duration::from_millis(1000));
        assert_eq!(p.delay_after(64), Duration::from_millis(1000));
    }

    #[test]
    fn succeeds_after_transient_failures() {
        let (value, attempts) = with_retry(&fast(5), |n| {
            if n < 3 {
                Attempt::Transient("boom")
            } else {
                Attempt::Done(n * 10)
            }
        })
        .unwrap();
        assert_eq!((value, attempts), (30, 3));
    }

    #[test]
    fn gives_up_at_limit() {
        let err = with_retry::<(), _>(&fast(3), |_| Attempt::Transient("down")).unwrap_err();
        assert_eq!(err.attempts, 3);
    }

    #[test]
    fn permanent_stops_immediately() {
        let err = with_retry::<(), _>(&fast(9), |_| Attempt::Permanent("bad request")).unwrap_err();
        assert_eq!(err.attempts, 1);
    }
}
