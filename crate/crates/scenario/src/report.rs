//! What a simulation did, day by day.

use std::collections::BTreeMap;
use std::fmt::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Connector outputs the weather-event gateway decides on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    pub t_max: Option<f64>,
    pub precipitation_total: Option<f64>,
    pub hail_expected: Option<bool>,
    pub disease_warning: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: u32,
    pub date: NaiveDate,
    /// The daily instance started by the timer, if it fired.
    pub instance: Option<u64>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub conditions: Conditions,
    /// Flows taken out of the decision gateways, in the order taken.
    pub branches: Vec<String>,
    /// Sub-processes entered, in order.
    pub subprocesses: Vec<String>,
    /// Task nodes completed, in order.
    pub completed: Vec<String>,
    pub tasks_created: BTreeMap<String, u32>,
    pub tasks_completed: BTreeMap<String, u32>,
    pub tasks_pending: BTreeMap<String, u32>,
    /// Attempts per connector kind, failed ones included.
    pub connector_calls: BTreeMap<String, u32>,
    /// Whether the drone final report was among the variables shown to the
    /// viticulturist reading it; `None` when no drone report was read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drone_report_visible: Option<bool>,
    /// Agent actions the platform refused.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_errors: Vec<String>,
}

impl DayReport {
    pub fn took(&self, branch: &str) -> bool {
        self.branches.iter().any(|b| b == branch)
    }

    pub fn entered(&self, subprocess: &str) -> bool {
        self.subprocesses.iter().any(|s| s == subprocess)
    }

    pub fn completed_count(&self, node: &str) -> usize {
        self.completed.iter().filter(|n| *n == node).count()
    }

    pub fn total(map: &BTreeMap<String, u32>) -> u32 {
        map.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualReport {
    pub instance: u64,
    pub date: NaiveDate,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub daily_instances: u32,
    pub completed: u32,
    pub failed: u32,
    pub unfinished: u32,
    pub annual_instances: u32,
    pub journal_records: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: Vec<DayReport>,
    pub annual: Vec<AnnualReport>,
    pub summary: Summary,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".into(), T::to_string)
}

fn dec(v: &Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:?}"))
}

fn counts(map: &BTreeMap<String, u32>) -> String {
    if map.is_empty() {
        return "-".into();
    }
    map.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        "-".into()
    } else {
        items.join(" ")
    }
}

impl SimulationReport {
    pub fn all_completed(&self) -> bool {
        self.summary.completed == self.summary.daily_instances
            && self.days.iter().all(|d| d.instance.is_some())
    }

    pub fn day(&self, day: u32) -> &DayReport {
        &self.days[(day - 1) as usize]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "agriflow vineyard simulation: seed {} start {} days {}",
            self.seed,
            self.start,
            self.days.len()
        );
        for d in &self.days {
            let _ = writeln!(
                out,
                "day {:>2} {} instance {} {}",
                d.day,
                d.date,
                opt(&d.instance),
                d.status
            );
            if let Some(f) = &d.failure {
                let _ = writeln!(out, "  failure      {f}");
            }
            let c = &d.conditions;
            let _ = writeln!(
                out,
                "  conditions   t_max={} precipitation_total={} hail_expected={} disease_warning={}",
                dec(&c.t_max),
                dec(&c.precipitation_total),
                opt(&c.hail_expected),
                opt(&c.disease_warning)
            );
            let _ = writeln!(out, "  branches     {}", list(&d.branches));
            let _ = writeln!(out, "  subprocesses {}", list(&d.subprocesses));
            let _ = writeln!(out, "  completed    {}", list(&d.completed));
            let _ = writeln!(out, "  created      {}", counts(&d.tasks_created));
            let _ = writeln!(out, "  done         {}", counts(&d.tasks_completed));
            let _ = writeln!(out, "  pending      {}", counts(&d.tasks_pending));
            let _ = writeln!(out, "  connectors   {}", counts(&d.connector_calls));
            for e in &d.agent_errors {
                let _ = writeln!(out, "  agent error  {e}");
            }
            if let Some(v) = d.drone_report_visible {
                let _ = writeln!(out, "  drone report visible to viticulturist: {v}");
            }
        }
        for a in &self.annual {
            let _ = writeln!(out, "annual {} instance {} {}", a.date, a.instance, a.status);
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "summary: {} daily instances, {} completed, {} failed, {} unfinished; {} annual; {} journal records",
            s.daily_instances, s.completed, s.failed, s.unfinished, s.annual_instances, s.journal_records
        );
        out
    }
}
