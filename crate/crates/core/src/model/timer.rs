//! Timer start definitions: ISO-8601 repeating intervals and fixed dates.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Days, Months, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

/// A calendar-aware ISO-8601 duration (`PnYnMnWnDTnHnMnS`, integer fields only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IsoDuration {
    pub years: u32,
    pub months: u32,
    pub weeks: u32,
    pub days: u32,
    pub hours: u32,
    pub minutes: u32,
    pub seconds: u32,
}

impl IsoDuration {
    fn total_months(&self) -> u32 {
        self.years * 12 + self.months
    }

    fn total_days(&self) -> u32 {
        self.weeks * 7 + self.days
    }

    fn clock_seconds(&self) -> i64 {
        self.hours as i64 * 3600 + self.minutes as i64 * 60 + self.seconds as i64
    }

    pub fn is_at_least_one_minute(&self) -> bool {
        self.total_months() > 0 || self.total_days() > 0 || self.clock_seconds() >= 60
    }

    /// `start + times × self`, adding calendar months, then days, then clock time.
    pub fn add_to(&self, start: DateTime<Utc>, times: u32) -> Option<DateTime<Utc>> {
        let months = self.total_months().checked_mul(times)?;
        let days = self.total_days().checked_mul(times)? as u64;
        let secs = self.clock_seconds().checked_mul(times as i64)?;
        start
            .checked_add_months(Months::new(months))?
            .checked_add_days(Days::new(days))?
            .checked_add_signed(TimeDelta::try_seconds(secs)?)
    }
}

impl fmt::Display for IsoDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("P")?;
        for (v, u) in [(self.years, 'Y'), (self.months, 'M'), (self.weeks, 'W'), (self.days, 'D')] {
            if v > 0 {
                write!(f, "{v}{u}")?;
            }
        }
        if self.clock_seconds() > 0 {
            f.write_str("T")?;
            for (v, u) in [(self.hours, 'H'), (self.minutes, 'M'), (self.seconds, 'S')] {
                if v > 0 {
                    write!(f, "{v}{u}")?;
                }
            }
        }
        if *self == IsoDuration::default() {
            f.write_str("T0S")?;
        }
        Ok(())
    }
}

impl FromStr for IsoDuration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_prefix('P')
            .ok_or_else(|| format!("duration '{s}' must start with 'P'"))?;
        let mut d = IsoDuration::default();
        let mut in_time = false;
        let mut number = String::new();
        let mut seen_any = false;
        for c in body.chars() {
            match c {
                'T' if !in_time && number.is_empty() => in_time = true,
                '0'..='9' => number.push(c),
                unit => {
                    if number.is_empty() {
                        return Err(format!("duration '{s}': missing number before '{unit}'"));
                    }
                    let n: u32 = number
                        .parse()
                        .map_err(|_| format!("duration '{s}': number too large"))?;
                    number.clear();
                    seen_any = true;
                    let slot = match (in_time, unit) {
                        (false, 'Y') => &mut d.years,
                        (false, 'M') => &mut d.months,
                        (false, 'W') => &mut d.weeks,
                        (false, 'D') => &mut d.days,
                        (true, 'H') => &mut d.hours,
                        (true, 'M') => &mut d.minutes,
                        (true, 'S') => &mut d.seconds,
                        _ => return Err(format!("duration '{s}': unexpected '{unit}'")),
                    };
                    *slot = n;
                }
            }
        }
        if !number.is_empty() || !seen_any {
            return Err(format!("duration '{s}' is incomplete"));
        }
        Ok(d)
    }
}

/// `R[n]/[start/]duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSpec {
    pub repetitions: Option<u32>,
    pub start: Option<DateTime<Utc>>,
    pub period: IsoDuration,
}

impl CycleSpec {
    /// Time of the `k`-th firing (0-based) for a timer deployed at `deployed_at`.
    ///
    /// Without an explicit start the cycle is anchored at deployment and first
    /// fires one full period later. With a start, firings at or before the
    /// deployment instant are skipped.
    pub fn firing(&self, deployed_at: DateTime<Utc>, k: u32) -> Option<DateTime<Utc>> {
        if self.repetitions.is_some_and(|n| k >= n) {
            return None;
        }
        match self.start {
            None => self.period.add_to(deployed_at, k.checked_add(1)?),
            Some(start) => {
                let mut skipped = 0u32;
                while self.period.add_to(start, skipped)? <= deployed_at {
                    skipped = skipped.checked_add(1)?;
                }
                if self.repetitions.is_some_and(|n| k + skipped >= n) {
                    return None;
                }
                self.period.add_to(start, skipped.checked_add(k)?)
            }
        }
    }
}

impl fmt::Display for CycleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("R")?;
        if let Some(n) = self.repetitions {
            write!(f, "{n}")?;
        }
        if let Some(start) = self.start {
            write!(f, "/{}", start.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true))?;
        }
        write!(f, "/{}", self.period)
    }
}

impl FromStr for CycleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('/').collect();
        let reps = parts[0]
            .strip_prefix('R')
            .ok_or_else(|| format!("cycle '{s}' must start with 'R'"))?;
        let repetitions = if reps.is_empty() {
            None
        } else {
            Some(reps.parse::<u32>().map_err(|_| format!("cycle '{s}': bad repetition count"))?)
        };
        let (start, period) = match parts.as_slice() {
            [_, p] => (None, *p),
            [_, st, p] => {
                let start = DateTime::parse_from_rfc3339(st)
                    .map_err(|e| format!("cycle '{s}': bad start '{st}': {e}"))?
                    .with_timezone(&Utc);
                (Some(start), *p)
            }
            _ => return Err(format!("cycle '{s}' must look like R[n]/[start/]duration")),
        };
        let period: IsoDuration = period.parse()?;
        Ok(CycleSpec {
            repetitions,
            start,
            period,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimerSpec {
    /// Kept with its source text so serialization reproduces it verbatim.
    Cycle { text: String, cycle: CycleSpec },
    Date(DateTime<Utc>),
}

impl TimerSpec {
    pub fn cycle(text: &str) -> Result<TimerSpec, String> {
        let cycle: CycleSpec = text.parse()?;
        if !cycle.period.is_at_least_one_minute() {
            return Err(format!("cycle '{text}': period must be at least one minute"));
        }
        Ok(TimerSpec::Cycle {
            text: text.trim().to_string(),
            cycle,
        })
    }

    pub fn date(text: &str) -> Result<TimerSpec, String> {
        DateTime::parse_from_rfc3339(text.trim())
            .map(|d| TimerSpec::Date(d.with_timezone(&Utc)))
            .map_err(|e| format!("timer date '{}': {e}", text.trim()))
    }

    /// Time of the `k`-th firing after deployment.
    pub fn firing(&self, deployed_at: DateTime<Utc>, k: u32) -> Option<DateTime<Utc>> {
        match self {
            TimerSpec::Cycle { cycle, .. } => cycle.firing(deployed_at, k),
            TimerSpec::Date(at) => (k == 0 && *at > deployed_at).then_some(*at),
        }
    }

    pub fn text(&self) -> String {
        match self {
            TimerSpec::Cycle { text, .. } => text.clone(),
            TimerSpec::Date(at) => at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TimerRepr {
    Cycle { cycle: String },
    Date { date: String },
}

impl Serialize for TimerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TimerSpec::Cycle { text, .. } => TimerRepr::Cycle { cycle: text.clone() },
            TimerSpec::Date(_) => TimerRepr::Date { date: self.text() },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match TimerRepr::deserialize(d)? {
            TimerRepr::Cycle { cycle } => TimerSpec::cycle(&cycle),
            TimerRepr::Date { date } => TimerSpec::date(&date),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    #[test]
    fn parses_durations() {
        let d: IsoDuration = "P1Y2M3DT4H5M6S".parse().unwrap();
        assert_eq!((d.years, d.months, d.days, d.hours, d.minutes, d.seconds), (1, 2, 3, 4, 5, 6));
        assert_eq!(d.to_string(), "P1Y2M3DT4H5M6S");
        assert!("P".parse::<IsoDuration>().is_err());
        assert!("PT".parse::<IsoDuration>().is_err());
        assert!("1D".parse::<IsoDuration>().is_err());
        assert!("P1H".parse::<IsoDuration>().is_err());
    }

    #[test]
    fn daily_cycle_fires_one_period_after_deployment() {
        let t = TimerSpec::cycle("R/P1D").unwrap();
        let deployed = at(2025, 4, 30, 6);
        assert_eq!(t.firing(deployed, 0), Some(at(2025, 5, 1, 6)));
        assert_eq!(t.firing(deployed, 30), Some(at(2025, 5, 31, 6)));
        assert_eq!(t.text(), "R/P1D");
    }

    #[test]
    fn yearly_and_bounded_cycles() {
        let t = TimerSpec::cycle("R/P1Y").unwrap();
        assert_eq!(t.firing(at(2025, 4, 30, 6), 0), Some(at(2026, 4, 30, 6)));
        let t = TimerSpec::cycle("R2/PT1H").unwrap();
        assert!(t.firing(at(2025, 1, 1, 0), 1).is_some());
        assert_eq!(t.firing(at(2025, 1, 1, 0), 2), None);
    }

    #[test]
    fn explicit_start_skips_past_firings() {
        let t = TimerSpec::cycle("R/2025-05-01T06:00:00Z/P1D").unwrap();
        assert_eq!(t.firing(at(2025, 4, 1, 0), 0), Some(at(2025, 5, 1, 6)));
        assert_eq!(t.firing(at(2025, 5, 3, 7), 0), Some(at(2025, 5, 4, 6)));
    }

    #[test]
    fn sub_minute_periods_are_rejected() {
        assert!(TimerSpec::cycle("R/PT30S").is_err());
        assert!(TimerSpec::cycle("R/PT60S").is_ok());
        assert!(TimerSpec::cycle("R/PT1M").is_ok());
    }

    #[test]
    fn date_timer_fires_once_if_in_future() {
        let t = TimerSpec::date("2025-06-01T00:00:00Z").unwrap();
        assert_eq!(t.firing(at(2025, 5, 1, 0), 0), Some(at(2025, 6, 1, 0)));
        assert_eq!(t.firing(at(2025, 5, 1, 0), 1), None);
        assert_eq!(t.firing(at(2025, 7, 1, 0), 0), None);
    }

    #[test]
    fn serde_keeps_cycle_text() {
        let t = TimerSpec::cycle("R/P1D").unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"kind":"cycle","cycle":"R/P1D"}"#);
        assert_eq!(serde_json::from_str::<TimerSpec>(&json).unwrap(), t);
    }
}
