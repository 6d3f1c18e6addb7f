use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{EventRecord, InstanceId};

/// Selects journal records. All present criteria must hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryFilter {
    #[serde(default)]
    pub instance: Option<InstanceId>,
    /// Event kinds to include; empty means all.
    #[serde(default)]
    pub kinds: Vec<String>,
    /// Inclusive lower bound on the record time.
    #[serde(default)]
    pub from: Option<DateTime<Utc>>,
    /// Exclusive upper bound on the record time.
    #[serde(default)]
    pub to: Option<DateTime<Utc>>,
    /// `(name, value)`: some field called `name` anywhere in the payload
    /// must render as `value`.
    #[serde(default)]
    pub field: Option<(String, String)>,
}

impl HistoryFilter {
    pub fn kind(kind: &str) -> HistoryFilter {
        HistoryFilter {
            kinds: vec![kind.to_string()],
            ..HistoryFilter::default()
        }
    }

    pub fn instance(mut self, id: InstanceId) -> Self {
        self.instance = Some(id);
        self
    }

    pub fn between(mut self, from: DateTime<Utc>, to: DateTime<Utc>) -> Self {
        self.from = Some(from);
        self.to = Some(to);
        self
    }

    pub fn with_field(mut self, name: &str, value: &str) -> Self {
        self.field = Some((name.to_string(), value.to_string()));
        self
    }

    pub fn matches(&self, rec: &EventRecord) -> bool {
        if self.instance.is_some() && rec.instance_id != self.instance {
            return false;
        }
        if !self.kinds.is_empty() && !self.kinds.iter().any(|k| k == rec.kind()) {
            return false;
        }
        if self.from.is_some_and(|f| rec.at < f) || self.to.is_some_and(|t| rec.at >= t) {
            return false;
        }
        match &self.field {
            None => true,
            Some((name, value)) => has_field(&rec.payload_json(), name, value),
        }
    }
}

fn scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        // Typed variable values: {"type": .., "value": ..}
        serde_json::Value::Object(m) if m.contains_key("type") => m.get("value").and_then(scalar),
        _ => None,
    }
}

fn has_field(v: &serde_json::Value, name: &str, value: &str) -> bool {
    match v {
        serde_json::Value::Object(m) => m.iter().any(|(k, child)| {
            (k == name && scalar(child).as_deref() == Some(value)) || has_field(child, name, value)
        }),
        serde_json::Value::Array(items) => items.iter().any(|c| has_field(c, name, value)),
        _ => false,
    }
}
