//! Time source and retry policy for the job executor.

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::engine::{InstanceId, JobId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("the wall clock cannot be set")]
    RealClock,
    #[error("simulated time cannot move backwards ({requested} < {now})")]
    Backwards {
        now: DateTime<Utc>,
        requested: DateTime<Utc>,
    },
}

#[derive(Debug)]
enum Mode {
    Real,
    Simulated(Mutex<DateTime<Utc>>),
}

/// Shared clock; every component reads time through one of these.
#[derive(Debug, Clone)]
pub struct Clock(Arc<Mode>);

impl Clock {
    pub fn real() -> Clock {
        Clock(Arc::new(Mode::Real))
    }

    pub fn simulated(start: DateTime<Utc>) -> Clock {
        Clock(Arc::new(Mode::Simulated(Mutex::new(start))))
    }

    pub fn is_simulated(&self) -> bool {
        matches!(*self.0, Mode::Simulated(_))
    }

    pub fn now(&self) -> DateTime<Utc> {
        match &*self.0 {
            Mode::Real => Utc::now(),
            Mode::Simulated(t) => *t.lock(),
        }
    }

    pub fn set(&self, to: DateTime<Utc>) -> Result<(), ClockError> {
        match &*self.0 {
            Mode::Real => Err(ClockError::RealClock),
            Mode::Simulated(t) => {
                let mut now = t.lock();
                if to < *now {
                    return Err(ClockError::Backwards {
                        now: *now,
                        requested: to,
                    });
                }
                *now = to;
                Ok(())
            }
        }
    }

    pub fn advance(&self, by: Duration) -> Result<DateTime<Utc>, ClockError> {
        let to = self.now() + by;
        self.set(to)?;
        Ok(to)
    }
}

/// Bounded exponential retry: attempt `k` failing at its due time `d` is
/// retried at `d + initial * base^(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_secs: i64,
    pub base: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_secs: 30,
            base: 2,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = (self.base as i64).saturating_pow(attempt.saturating_sub(1));
        Duration::seconds(self.initial_backoff_secs.saturating_mul(factor))
    }

    pub fn next_due(&self, due: DateTime<Utc>, attempt: u32) -> DateTime<Utc> {
        due + self.backoff(attempt)
    }
}

/// What happened when a due job was executed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum JobOutcome {
    TimerFired {
        job: JobId,
        instance: Option<InstanceId>,
    },
    Succeeded {
        job: JobId,
        connector: String,
        attempt: u32,
    },
    Retrying {
        job: JobId,
        connector: String,
        attempt: u32,
        next_due: DateTime<Utc>,
        error: String,
    },
    Exhausted {
        job: JobId,
        connector: String,
        attempt: u32,
        error: String,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn spacing_doubles_from_thirty_seconds() {
        let p = RetryPolicy::default();
        let d0 = Utc.with_ymd_and_hms(2025, 5, 1, 6, 0, 0).unwrap();
        let mut due = d0;
        let mut gaps = Vec::new();
        for k in 1..=4 {
            let next = p.next_due(due, k);
            gaps.push((next - due).num_seconds());
            due = next;
        }
        assert_eq!(gaps, vec![30, 60, 120, 240]);
    }

    #[test]
    fn simulated_clock_is_monotone() {
        let t = Utc.with_ymd_and_hms(2025, 5, 1, 0, 0, 0).unwrap();
        let c = Clock::simulated(t);
        c.advance(Duration::hours(1)).unwrap();
        assert!(matches!(c.set(t), Err(ClockError::Backwards { .. })));
        assert_eq!(c.now(), t + Duration::hours(1));
        assert_eq!(Clock::real().set(t), Err(ClockError::RealClock));
    }
}
