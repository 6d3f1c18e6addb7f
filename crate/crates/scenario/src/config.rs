//! Simulation settings and their TOML file format.
//!
//! ```toml
//! seed = 42
//! start = "2025-05-01"
//! days = 31
//! location = "vineyard"
//!
//! [agents]
//! drone_on_disease = true
//!
//! [day.7]
//! t_max = 36.2
//!
//! [day.9]
//! disease_warning = true
//! qc_needed = true
//! ```
//!
//! Every key is optional. `day.N` tables force values for day `N`
//! (1-based): the weather fields replace what the simulated providers would
//! report, `qc_needed` and `drone_sensing` replace the scripted
//! viticulturist's decisions. The parcel set is the bundled three-parcel
//! vineyard; its band raster for each day is derived from the seed.

use std::collections::BTreeMap;
use std::path::Path;

use agriflow_core::connectors::{DayOverride, Fixture};
use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ScenarioError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DayOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precipitation_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hail_expected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disease_warning: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qc_needed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drone_sensing: Option<bool>,
}

impl DayOverrides {
    fn weather(&self) -> Option<DayOverride> {
        let o = DayOverride {
            t_max: self.t_max,
            precipitation_total: self.precipitation_total,
            hail_expected: self.hail_expected,
            disease_warning: self.disease_warning,
        };
        (o != DayOverride::default()).then_some(o)
    }

    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let bad = |what: &str| ScenarioError::Config(format!("{key}: '{value}' is not {what}"));
        let num = || value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("a number"));
        let flag = || value.parse::<bool>().map_err(|_| bad("true or false"));
        match key {
            "t_max" => self.t_max = Some(num()?),
            "precipitation_total" => self.precipitation_total = Some(num()?),
            "hail_expected" => self.hail_expected = Some(flag()?),
            "disease_warning" => self.disease_warning = Some(flag()?),
            "qc_needed" => self.qc_needed = Some(flag()?),
            "drone_sensing" => self.drone_sensing = Some(flag()?),
            _ => return Err(ScenarioError::Config(format!("unknown override key '{key}'"))),
        }
        Ok(())
    }
}

/// Defaults for the scripted agents' decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentPolicy {
    /// The viticulturist requests drone sensing whenever a disease warning
    /// is active.
    pub drone_on_disease: bool,
    /// The viticulturist asks for a QC analysis every `n` days, counted from
    /// day 1; `None` never.
    pub qc_every: Option<u32>,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        AgentPolicy {
            drone_on_disease: true,
            qc_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start: NaiveDate,
    #[serde(rename = "days")]
    pub n_days: u32,
    pub location: String,
    pub agents: AgentPolicy,
    #[serde(rename = "day", skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<u32, DayOverrides>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            start: NaiveDate::from_ymd_opt(2025, 5, 1).expect("valid date"),
            n_days: 31,
            location: "vineyard".into(),
            agents: AgentPolicy::default(),
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    seed: Option<u64>,
    start: Option<NaiveDate>,
    days: Option<u32>,
    location: Option<String>,
    agents: Option<AgentPolicy>,
}

impl ScenarioConfig {
    pub fn new(seed: u64, n_days: u32) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            n_days,
            ..ScenarioConfig::default()
        }
    }

    pub fn with(mut self, day: u32, key: &str, value: &str) -> Result<ScenarioConfig, ScenarioError> {
        self.overrides.entry(day).or_default().set(key, value)?;
        Ok(self)
    }

    /// Parses the TOML format shown in the module docs.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Config(e.to_string()))?;
        let days_table = table.remove("day");
        let head: File = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Config(e.to_string()))?;
        let mut config = ScenarioConfig::default();
        if let Some(v) = head.seed {
            config.seed = v;
        }
        if let Some(v) = head.start {
            config.start = v;
        }
        if let Some(v) = head.days {
            config.n_days = v;
        }
        if let Some(v) = head.location {
            config.location = v;
        }
        if let Some(v) = head.agents {
            config.agents = v;
        }
        if let Some(days_table) = days_table {
            let toml::Value::Table(days) = days_table else {
                return Err(ScenarioError::Config("day must be a table of day numbers".into()));
            };
            for (key, value) in days {
                let day: u32 = key
                    .parse()
                    .map_err(|_| ScenarioError::Config(format!("day.{key}: not a day number")))?;
                let o: DayOverrides = value
                    .try_into()
                    .map_err(|e: toml::de::Error| ScenarioError::Config(format!("day.{key}: {e}")))?;
                config.overrides.insert(day, o);
            }
        }
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        ScenarioConfig::parse(&text)
    }

    /// Applies a command-line `day:key=value` override.
    pub fn apply_override(&mut self, text: &str) -> Result<(), ScenarioError> {
        let bad = || ScenarioError::Config(format!("override '{text}' is not of the form day:key=value"));
        let (day, assignment) = text.split_once(':').ok_or_else(bad)?;
        let (key, value) = assignment.split_once('=').ok_or_else(bad)?;
        let day: u32 = day.trim().parse().map_err(|_| bad())?;
        self.overrides.entry(day).or_default().set(key.trim(), value.trim())
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.n_days == 0 {
            return Err(ScenarioError::Config("days must be at least 1".into()));
        }
        if self.location.trim().is_empty() {
            return Err(ScenarioError::Config("location must not be empty".into()));
        }
        if self.agents.qc_every == Some(0) {
            return Err(ScenarioError::Config("agents.qc_every must be at least 1".into()));
        }
        if let Some(day) = self.overrides.keys().find(|d| !(1..=self.n_days).contains(*d)) {
            return Err(ScenarioError::Config(format!(
                "override for day {day} is outside 1..={}",
                self.n_days
            )));
        }
        Ok(())
    }

    pub fn date(&self, day: u32) -> NaiveDate {
        self.start + Duration::days(i64::from(day) - 1)
    }

    pub fn day_overrides(&self, day: u32) -> DayOverrides {
        self.overrides.get(&day).cloned().unwrap_or_default()
    }

    /// The simulated providers' world with this configuration's forced days.
    pub fn fixture(&self) -> Fixture {
        let mut f = Fixture::vineyard(self.seed);
        f.location = self.location.clone();
        for (day, o) in &self.overrides {
            if let Some(w) = o.weather() {
                f = f.with_override(self.date(*day), w);
            }
        }
        f
    }

    pub fn qc_needed(&self, day: u32) -> bool {
        self.day_overrides(day)
            .qc_needed
            .unwrap_or_else(|| self.agents.qc_every.is_some_and(|n| (day - 1) % n == 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_format() {
        let c = ScenarioConfig::parse(
            r#"
seed = 7
start = "2025-05-01"
days = 10

[agents]
qc_every = 5

[day.7]
t_max = 36.2

[day.9]
disease_warning = true
qc_needed = false
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.n_days, 10);
        assert_eq!(c.overrides[&7].t_max, Some(36.2));
        assert_eq!(c.overrides[&9].disease_warning, Some(true));
        assert!(c.qc_needed(1) && c.qc_needed(6) && !c.qc_needed(9));
        assert_eq!(c.date(7).to_string(), "2025-05-07");
        let f = c.fixture();
        assert_eq!(f.overrides.len(), 2);
        assert_eq!(f.overrides[&c.date(9)].disease_warning, Some(true));
    }

    #[test]
    fn rejects_out_of_range_days_and_unknown_keys() {
        assert!(ScenarioConfig::parse("days = 3\n[day.4]\nt_max = 40.0\n").is_err());
        assert!(ScenarioConfig::parse("[day.0]\nt_max = 40.0\n").is_err());
        assert!(ScenarioConfig::parse("[day.2]\nwind = 4.0\n").is_err());
        assert!(ScenarioConfig::parse("colour = 1\n").is_err());
        let mut c = ScenarioConfig::default();
        c.apply_override("3:precipitation_total=6.1").unwrap();
        assert_eq!(c.overrides[&3].precipitation_total, Some(6.1));
        assert!(c.apply_override("3:t_max=hot").is_err());
        assert!(c.apply_override("t_max=3").is_err());
    }
}
