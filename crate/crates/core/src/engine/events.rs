use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{FormField, ProcessDefinition};
use crate::role::Role;
use crate::value::{DocRef, Value, VariableMap};

macro_rules! id_type {
    ($($name:ident),*) => {$(
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    )*};
}

id_type!(InstanceId, TokenId, TaskId, JobId, NotificationId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StartTrigger {
    Manual { user: String },
    Timer { node: String, job: JobId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobKind {
    ServiceCall {
        instance: InstanceId,
        token: TokenId,
        node: String,
        connector: String,
        inputs: VariableMap,
    },
    TimerFire {
        definition_id: String,
        version: u32,
        node: String,
        /// Zero-based index of this firing since deployment.
        fire_index: u32,
        deployed_at: DateTime<Utc>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Alert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationSource {
    Engine,
    Connector,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Recipient {
    Role(Role),
    User(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Contact {
    pub name: String,
    /// Channel address, e.g. `mailto:expert@example.org`; unique per user.
    pub address: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub source: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalDataView {
    pub view_id: String,
    pub owner: String,
    #[serde(default)]
    pub title: String,
    pub entries: Vec<ViewEntry>,
}

/// Every state change the platform makes. Applying a journal's events in
/// order to an empty state reproduces the live state exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    DefinitionDeployed {
        definition: Arc<ProcessDefinition>,
        by: String,
    },
    InstanceStarted {
        instance: InstanceId,
        definition_id: String,
        version: u32,
        trigger: StartTrigger,
        variables: VariableMap,
    },
    TokenCreated {
        instance: InstanceId,
        token: TokenId,
        node: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<TokenId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via: Option<String>,
    },
    TokenMoved {
        instance: InstanceId,
        token: TokenId,
        from: String,
        flow: String,
        to: String,
    },
    TokenConsumed {
        instance: InstanceId,
        token: TokenId,
        node: String,
    },
    SubprocessEntered {
        instance: InstanceId,
        token: TokenId,
        node: String,
    },
    SubprocessCompleted {
        instance: InstanceId,
        token: TokenId,
        node: String,
    },
    VariableSet {
        instance: InstanceId,
        name: String,
        value: Value,
    },
    TaskCreated {
        task: TaskId,
        instance: InstanceId,
        token: TokenId,
        node: String,
        name: String,
        candidate_role: Role,
        form_fields: Vec<FormField>,
    },
    TaskAssigned {
        task: TaskId,
        instance: InstanceId,
        user: String,
    },
    TaskCompleted {
        task: TaskId,
        instance: InstanceId,
        node: String,
        user: String,
        values: VariableMap,
    },
    JobEnqueued {
        job: JobId,
        #[serde(flatten)]
        kind: JobKind,
        due_at: DateTime<Utc>,
        max_attempts: u32,
    },
    JobFailed {
        job: JobId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance: Option<InstanceId>,
        attempt: u32,
        error: String,
        /// `None` once the job has exhausted its attempts.
        next_due: Option<DateTime<Utc>>,
    },
    JobCompleted {
        job: JobId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance: Option<InstanceId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        connector: Option<String>,
        attempt: u32,
        outputs: VariableMap,
    },
    JobCancelled {
        job: JobId,
        reason: String,
    },
    InstanceCompleted {
        instance: InstanceId,
    },
    InstanceFailed {
        instance: InstanceId,
        reason: String,
    },
    InstanceTerminated {
        instance: InstanceId,
        by: String,
    },
    NotificationEmitted {
        notification: NotificationId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        instance: Option<InstanceId>,
        recipient: Recipient,
        severity: Severity,
        source: NotificationSource,
        body: String,
    },
    NotificationForwarded {
        notification: NotificationId,
        by: String,
        contacts: Vec<Contact>,
    },
    NotificationRead {
        notification: NotificationId,
        user: String,
    },
    ContactAdded {
        user: String,
        contact: Contact,
    },
    ViewSaved {
        view: ExternalDataView,
    },
    FileIngested {
        document: DocRef,
        kind: String,
        size: u64,
        fields: VariableMap,
        #[serde(default)]
        metadata: BTreeMap<String, String>,
        by: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::DefinitionDeployed { .. } => "definition_deployed",
            Event::InstanceStarted { .. } => "instance_started",
            Event::TokenCreated { .. } => "token_created",
            Event::TokenMoved { .. } => "token_moved",
            Event::TokenConsumed { .. } => "token_consumed",
            Event::SubprocessEntered { .. } => "subprocess_entered",
            Event::SubprocessCompleted { .. } => "subprocess_completed",
            Event::VariableSet { .. } => "variable_set",
            Event::TaskCreated { .. } => "task_created",
            Event::TaskAssigned { .. } => "task_assigned",
            Event::TaskCompleted { .. } => "task_completed",
            Event::JobEnqueued { .. } => "job_enqueued",
            Event::JobFailed { .. } => "job_failed",
            Event::JobCompleted { .. } => "job_completed",
            Event::JobCancelled { .. } => "job_cancelled",
            Event::InstanceCompleted { .. } => "instance_completed",
            Event::InstanceFailed { .. } => "instance_failed",
            Event::InstanceTerminated { .. } => "instance_terminated",
            Event::NotificationEmitted { .. } => "notification_emitted",
            Event::NotificationForwarded { .. } => "notification_forwarded",
            Event::NotificationRead { .. } => "notification_read",
            Event::ContactAdded { .. } => "contact_added",
            Event::ViewSaved { .. } => "view_saved",
            Event::FileIngested { .. } => "file_ingested",
        }
    }

    pub const KINDS: [&'static str; 24] = [
        "definition_deployed",
        "instance_started",
        "token_created",
        "token_moved",
        "token_consumed",
        "subprocess_entered",
        "subprocess_completed",
        "variable_set",
        "task_created",
        "task_assigned",
        "task_completed",
        "job_enqueued",
        "job_failed",
        "job_completed",
        "job_cancelled",
        "instance_completed",
        "instance_failed",
        "instance_terminated",
        "notification_emitted",
        "notification_forwarded",
        "notification_read",
        "contact_added",
        "view_saved",
        "file_ingested",
    ];

    pub fn instance(&self) -> Option<InstanceId> {
        match self {
            Event::InstanceStarted { instance, .. }
            | Event::TokenCreated { instance, .. }
            | Event::TokenMoved { instance, .. }
            | Event::TokenConsumed { instance, .. }
            | Event::SubprocessEntered { instance, .. }
            | Event::SubprocessCompleted { instance, .. }
            | Event::VariableSet { instance, .. }
            | Event::TaskCreated { instance, .. }
            | Event::TaskAssigned { instance, .. }
            | Event::TaskCompleted { instance, .. }
            | Event::InstanceCompleted { instance }
            | Event::InstanceFailed { instance, .. }
            | Event::InstanceTerminated { instance, .. } => Some(*instance),
            Event::JobEnqueued {
                kind: JobKind::ServiceCall { instance, .. },
                ..
            } => Some(*instance),
            Event::JobFailed { instance, .. }
            | Event::JobCompleted { instance, .. }
            | Event::NotificationEmitted { instance, .. } => *instance,
            _ => None,
        }
    }
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(default)]
    pub instance_id: Option<InstanceId>,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn new(seq: u64, at: DateTime<Utc>, event: Event) -> EventRecord {
        EventRecord {
            seq,
            at,
            instance_id: event.instance(),
            event,
        }
    }

    pub fn kind(&self) -> &'static str {
        self.event.kind()
    }

    pub fn payload_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.event).unwrap_or_default();
        v.get_mut("payload").map(serde_json::Value::take).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn record_line_shape_and_round_trip() {
        let at = Utc.with_ymd_and_hms(2025, 5, 1, 6, 0, 0).unwrap();
        let events = vec![
            Event::VariableSet {
                instance: InstanceId(3),
                name: "t_max".into(),
                value: Value::Decimal(36.2),
            },
            Event::JobEnqueued {
                job: JobId(1),
                kind: JobKind::ServiceCall {
                    instance: InstanceId(3),
                    token: TokenId(9),
                    node: "weather".into(),
                    connector: "weather.forecast".into(),
                    inputs: VariableMap::new().with("date", "2025-05-01"),
                },
                due_at: at,
                max_attempts: 3,
            },
            Event::InstanceCompleted { instance: InstanceId(3) },
        ];
        for (i, e) in events.into_iter().enumerate() {
            let rec = EventRecord::new(i as u64 + 1, at, e);
            let line = serde_json::to_string(&rec).unwrap();
            assert!(line.starts_with(&format!("{{\"seq\":{},\"at\":", i + 1)), "{line}");
            assert!(line.contains("\"instance_id\":3"));
            let back: EventRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(back, rec);
        }
    }
}
