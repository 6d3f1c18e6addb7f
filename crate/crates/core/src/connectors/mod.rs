//! External data providers behind a uniform descriptor contract.
//!
//! Every provider here is a deterministic simulator or a file-upload kind;
//! the descriptor and schema checks are the same ones a network client
//! would sit behind.

mod docs;
mod report;
mod sim;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use docs::{digest, DocumentStore};
pub use report::{parse_report, write_report, Report};
pub use sim::{
    simulate_weather_stream, derive_rng, DayOverride, Fixture, WeatherForecast, DiseaseWarning,
    FarmHistory, IotHistory, SatelliteBands, SimulatedDisease, SimulatedWeather,
};

use crate::engine::{EventRecord, FieldError, HistoryFilter, Recipient, Severity};
use crate::value::{ValueType, VariableMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ApiCall,
    FileUpload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ValueType,
}

pub fn params(fields: &[(&str, ValueType)]) -> Vec<Param> {
    fields.iter()
        .map(|(n, t)| Param {
            name: n.to_string(),
            ty: *t,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectorDescriptor {
    pub kind: String,
    pub title: String,
    pub mode: Mode,
    pub inputs: Vec<Param>,
    pub outputs: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub recipient: Recipient,
    pub severity: Severity,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectorResult {
    pub outputs: VariableMap,
    pub alerts: Vec<Alert>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConnectorError {
    #[error("unknown connector kind '{0}'")]
    UnknownKind(String),
    #[error("connector '{kind}' is {mode:?}; it cannot be {action}")]
    WrongMode {
        kind: String,
        mode: Mode,
        action: &'static str,
    },
    #[error("schema violation for '{kind}' {side}: {}", describe(.details))]
    Schema {
        kind: String,
        side: &'static str,
        details: Vec<FieldError>,
    },
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("malformed file: {}", describe(.0))]
    Malformed(Vec<FieldError>),
    #[error("storage error: {0}")]
    Storage(String),
}

fn describe(d: &[FieldError]) -> String {
    d.iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Read access to the journal for providers that report farm history.
pub trait HistorySource {
    fn history(&self, filter: &HistoryFilter) -> Vec<EventRecord>;
}

impl HistorySource for crate::engine::Engine {
    fn history(&self, filter: &HistoryFilter) -> Vec<EventRecord> {
        self.query_history(filter).into_iter().cloned().collect()
    }
}

pub struct CallContext<'a> {
    pub now: DateTime<Utc>,
    /// 1-based attempt number of the job making this call.
    pub attempt: u32,
    pub history: &'a dyn HistorySource,
    pub documents: &'a DocumentStore,
}

pub trait Connector: Send + Sync {
    fn descriptor(&self) -> &ConnectorDescriptor;
    fn call(&self, inputs: &VariableMap, ctx: &CallContext) -> Result<ConnectorResult, ConnectorError>;
}

/// Checks `values` against a closed schema, coercing where lossless.
pub fn check_schema(kind: &str, side: &'static str, schema: &[Param], values: &VariableMap) -> Result<VariableMap, ConnectorError> {
    let mut details = Vec::new();
    let mut out = VariableMap::new();
    for (name, value) in values.iter() {
        match schema.iter().find(|p| p.name == *name) {
            None => details.push(FieldError {
                field: name.clone(),
                message: "not in schema".into(),
            }),
            Some(p) => match value.clone().coerce(p.ty) {
                Ok(v) => {
                    let _ = out.insert(name.clone(), v);
                }
                Err(v) => details.push(FieldError {
                    field: name.clone(),
                    message: format!("expected {}, got {}", p.ty, v.value_type()),
                }),
            },
        }
    }
    for p in schema {
        if !values.contains(&p.name) {
            details.push(FieldError {
                field: p.name.clone(),
                message: "missing".into(),
            });
        }
    }
    if details.is_empty() {
        Ok(out)
    } else {
        Err(ConnectorError::Schema {
            kind: kind.to_string(),
            side,
            details,
        })
    }
}

/// Scripted provider outage: attempts up to `fail_first` fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub fail_first: u32,
}

impl FaultPlan {
    pub const ALWAYS: FaultPlan = FaultPlan { fail_first: u32::MAX };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorConfig {
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Default)]
pub struct Registry {
    connectors: BTreeMap<String, Arc<dyn Connector>>,
    faults: BTreeMap<String, FaultPlan>,
}

/// File-upload kinds and their declared report fields.
pub fn upload_descriptors() -> Vec<ConnectorDescriptor> {
    use ValueType::*;
    vec![
        ConnectorDescriptor {
            kind: "drone.report".into(),
            title: "Drone sensing final report".into(),
            mode: Mode::FileUpload,
            inputs: Vec::new(),
            outputs: params(&[
                ("parcel", Text),
                ("drone_ndvi_mean", Decimal),
                ("stress_detected", Boolean),
                ("summary", Text),
            ]),
        },
        ConnectorDescriptor {
            kind: "qc.analysis".into(),
            title: "Portable quality-control analysis".into(),
            mode: Mode::FileUpload,
            inputs: Vec::new(),
            outputs: params(&[("sugar_content", Decimal), ("acidity", Decimal)]),
        },
    ]
}

struct Upload(ConnectorDescriptor);

impl Connector for Upload {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.0
    }

    fn call(&self, _: &VariableMap, _: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        Err(ConnectorError::WrongMode {
            kind: self.0.kind.clone(),
            mode: Mode::FileUpload,
            action: "called",
        })
    }
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// Every built-in kind, simulators sharing `fixture`.
    pub fn simulated(fixture: Arc<Fixture>) -> Registry {
        let mut r = Registry::empty();
        r.register(Arc::new(SimulatedWeather::new(fixture.clone())));
        r.register(Arc::new(SimulatedDisease::new(fixture.clone())));
        r.register(Arc::new(IotHistory::new(fixture.clone())));
        r.register(Arc::new(SatelliteBands::new(fixture)));
        r.register(Arc::new(FarmHistory::new()));
        for d in upload_descriptors() {
            r.register(Arc::new(Upload(d)));
        }
        r
    }

    /// Only the kinds listed, each with its own seed override.
    pub fn from_config(entries: &[ConnectorConfig], fixture: Arc<Fixture>) -> Result<Registry, ConnectorError> {
        let all = Registry::simulated(fixture.clone());
        let mut r = Registry::empty();
        for e in entries {
            let f = match e.seed {
                Some(seed) if seed != fixture.seed => Arc::new(Fixture {
                    seed,
                    ..(*fixture).clone()
                }),
                _ => fixture.clone(),
            };
            let one = Registry::simulated(f);
            let c = one
                .connectors
                .get(&e.kind)
                .or_else(|| all.connectors.get(&e.kind))
                .ok_or_else(|| ConnectorError::UnknownKind(e.kind.clone()))?;
            r.register(c.clone());
        }
        Ok(r)
    }

    pub fn register(&mut self, c: Arc<dyn Connector>) {
        self.connectors.insert(c.descriptor().kind.clone(), c);
    }

    pub fn remove(&mut self, kind: &str) {
        self.connectors.remove(kind);
    }

    pub fn set_fault(&mut self, kind: &str, plan: Option<FaultPlan>) {
        match plan {
            Some(p) => self.faults.insert(kind.to_string(), p),
            None => self.faults.remove(kind),
        };
    }

    pub fn kinds(&self) -> Vec<&str> {
        self.connectors.keys().map(String::as_str).collect()
    }

    pub fn descriptor(&self, kind: &str) -> Option<&ConnectorDescriptor> {
        self.connectors.get(kind).map(|c| c.descriptor())
    }

    pub fn descriptors(&self) -> Vec<&ConnectorDescriptor> {
        self.connectors.values().map(|c| c.descriptor()).collect()
    }

    /// Validates inputs, calls the provider and validates its outputs.
    pub fn call(&self, kind: &str, inputs: &VariableMap, ctx: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        let c = self
            .connectors
            .get(kind)
            .ok_or_else(|| ConnectorError::UnknownKind(kind.to_string()))?;
        let d = c.descriptor();
        if d.mode != Mode::ApiCall {
            return Err(ConnectorError::WrongMode {
                kind: kind.to_string(),
                mode: d.mode,
                action: "called",
            });
        }
        let inputs = check_schema(kind, "inputs", &d.inputs, inputs)?;
        if let Some(f) = self.faults.get(kind) {
            if ctx.attempt <= f.fail_first {
                return Err(ConnectorError::Provider(format!(
                    "{kind} unavailable (scripted outage, attempt {})",
                    ctx.attempt
                )));
            }
        }
        let mut result = c.call(&inputs, ctx)?;
        result.outputs = check_schema(kind, "outputs", &d.outputs, &result.outputs)?;
        Ok(result)
    }

    /// Parses an uploaded report of a file-upload kind, stores it and returns
    /// its reference with the extracted fields.
    pub fn parse_upload(&self, kind: &str, bytes: &[u8]) -> Result<VariableMap, ConnectorError> {
        let d = self
            .descriptor(kind)
            .ok_or_else(|| ConnectorError::UnknownKind(kind.to_string()))?;
        if d.mode != Mode::FileUpload {
            return Err(ConnectorError::WrongMode {
                kind: kind.to_string(),
                mode: d.mode,
                action: "uploaded",
            });
        }
        let report = parse_report(bytes).map_err(ConnectorError::Malformed)?;
        let mut errors = Vec::new();
        if report.kind != kind {
            errors.push(FieldError {
                field: "kind".into(),
                message: format!("report is '{}', upload is '{kind}'", report.kind),
            });
        }
        let declared: Vec<Param> = report
            .fields
            .iter()
            .map(|(n, t)| Param {
                name: n.clone(),
                ty: *t,
            })
            .collect();
        for p in &d.outputs {
            match declared.iter().find(|x| x.name == p.name) {
                None => errors.push(FieldError {
                    field: p.name.clone(),
                    message: "not declared in the fields header".into(),
                }),
                Some(x) if x.ty != p.ty => errors.push(FieldError {
                    field: p.name.clone(),
                    message: format!("declared {}, expected {}", x.ty, p.ty),
                }),
                Some(_) => {}
            }
        }
        for x in &declared {
            if !d.outputs.iter().any(|p| p.name == x.name) {
                errors.push(FieldError {
                    field: x.name.clone(),
                    message: format!("not a field of {kind}"),
                });
            }
        }
        if !errors.is_empty() {
            return Err(ConnectorError::Malformed(errors));
        }
        Ok(report.values)
    }
}
