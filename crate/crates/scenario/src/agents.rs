//! Scripted stand-ins for the people who work the vineyard's tasks.

use agriflow_api::service::TaskView;
use agriflow_core::connectors::{derive_rng, write_report};
use agriflow_core::role::Role;
use agriflow_core::value::{ValueType, VariableMap};
use chrono::NaiveDate;
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::config::{DayOverrides, ScenarioConfig};

/// A file the agent uploads before completing, bound to `field`.
pub struct Upload {
    pub field: String,
    pub kind: String,
    pub bytes: Vec<u8>,
}

pub struct Decision {
    pub form: Map<String, Value>,
    pub uploads: Vec<Upload>,
}

impl Decision {
    fn form(form: Value) -> Decision {
        let Value::Object(form) = form else { unreachable!("forms are objects") };
        Decision {
            form,
            uploads: Vec::new(),
        }
    }
}

/// The configured users each role's agent acts as.
pub fn user_for(role: Role, day: u32) -> &'static str {
    match role {
        Role::FarmManager => "maria",
        Role::Viticulturist => "nikos",
        Role::FieldWorker if day % 2 == 0 => "anna",
        Role::FieldWorker => "giorgos",
        Role::DroneOperator => "dimitris",
        Role::QcDeviceUser => "sofia",
        Role::ExternalProvider => "provider",
    }
}

/// Roles with scripted agents, in the order they get to act each round.
pub const ACTING_ROLES: [Role; 4] = [
    Role::Viticulturist,
    Role::QcDeviceUser,
    Role::DroneOperator,
    Role::FieldWorker,
];

/// The weather event the viticulturist reads from the task context, in the
/// same order the process evaluates them.
pub fn observed_event(ctx: &Value) -> Option<&'static str> {
    let num = |k: &str| ctx.get(k).and_then(Value::as_f64);
    let flag = |k: &str| ctx.get(k).and_then(Value::as_bool) == Some(true);
    if num("t_max").is_some_and(|t| t > 35.0) {
        Some("heat")
    } else if num("precipitation_total").is_some_and(|p| p > 6.0) {
        Some("heavy_rain")
    } else if flag("hail_expected") {
        Some("hail")
    } else if flag("disease_warning") {
        Some("disease")
    } else {
        None
    }
}

/// Action template per event; hail shares the heavy-rain template.
pub fn action_for(event: Option<&str>) -> (&'static str, &'static str) {
    match event {
        Some("heat") => ("irrigation", "Irrigate the exposed parcels early in the morning"),
        Some("heavy_rain") | Some("hail") => (
            "spraying",
            "Inspect for damage and apply preventive copper spraying once the rain stops",
        ),
        Some("disease") => ("spraying", "Apply targeted fungicide spraying on the affected parcels"),
        _ => ("canopy_management", "Routine canopy management"),
    }
}

pub struct Agents<'a> {
    pub config: &'a ScenarioConfig,
}

impl Agents<'_> {
    /// What the agent enters on `task` of `day`.
    pub fn decide(&self, task: &TaskView, day: u32, date: NaiveDate) -> Decision {
        let ctx = &task.context;
        let o: DayOverrides = self.config.day_overrides(day);
        match task.node.as_str() {
            "qc_need" => Decision::form(json!({ "qc_needed": self.config.qc_needed(day) })),
            "onsite" => Decision::form(json!({
                "assessment_notes": format!("{date}: canopy and bunches inspected, no anomalies"),
            })),
            "review" => {
                let disease = ctx.get("disease_warning").and_then(Value::as_bool) == Some(true);
                let drone = o
                    .drone_sensing
                    .unwrap_or(self.config.agents.drone_on_disease && disease);
                Decision::form(json!({
                    "drone_sensing": drone,
                    "planned_action": action_for(observed_event(ctx)).0,
                }))
            }
            "read_drone_report" => Decision::form(json!({ "report_reviewed": true })),
            "action_define" => {
                let action = ctx.get("planned_action").and_then(Value::as_str).unwrap_or("canopy_management");
                let instructions = match action {
                    "irrigation" => action_for(Some("heat")).1,
                    "spraying" if ctx.get("disease_warning").and_then(Value::as_bool) == Some(true) => {
                        action_for(Some("disease")).1
                    }
                    "spraying" => action_for(Some("heavy_rain")).1,
                    _ => action_for(None).1,
                };
                Decision::form(json!({ "action_instructions": instructions }))
            }
            "action_execute" => Decision::form(json!({
                "action": ctx.get("planned_action").and_then(Value::as_str).unwrap_or("canopy_management"),
                "action_done": true,
            })),
            "qc_sample" => Decision::form(json!({ "sample_parcel": format!("P{}", 1 + day % 3) })),
            "qc_measure" => {
                let mut rng = derive_rng(self.config.seed, "qc.analysis", date);
                let sugar = (rng.random_range(17.0..24.0_f64) * 10.0).round() / 10.0;
                let acidity = (rng.random_range(4.5..7.5_f64) * 10.0).round() / 10.0;
                let bytes = write_report(
                    "qc.analysis",
                    &[("sugar_content".into(), ValueType::Decimal), ("acidity".into(), ValueType::Decimal)],
                    &VariableMap::new().with("sugar_content", sugar).with("acidity", acidity),
                );
                Decision {
                    form: Map::new(),
                    uploads: vec![Upload {
                        field: "qc_report".into(),
                        kind: "qc.analysis".into(),
                        bytes,
                    }],
                }
            }
            "drone_config" => Decision::form(json!({ "drone_configuration": "multispectral camera, 60 m above ground" })),
            "drone_mission" => Decision::form(json!({ "flight_plan": format!("{date}: lawnmower pattern over P1-P3, 75% overlap") })),
            "drone_debrief" => Decision::form(json!({ "debrief_notes": "flight nominal, full coverage" })),
            "drone_assess" => Decision::form(json!({ "stress_assessment": "localised stress on the south parcel" })),
            "drone_report" => {
                let ndvi = ctx.get("ndvi_mean").and_then(Value::as_f64).unwrap_or(0.6);
                let bytes = write_report(
                    "drone.report",
                    &[
                        ("parcel".into(), ValueType::Text),
                        ("drone_ndvi_mean".into(), ValueType::Decimal),
                        ("stress_detected".into(), ValueType::Boolean),
                        ("summary".into(), ValueType::Text),
                    ],
                    &VariableMap::new()
                        .with("parcel", "P2")
                        .with("drone_ndvi_mean", (ndvi * 1000.0).round() / 1000.0)
                        .with("stress_detected", true)
                        .with("summary", format!("{date}: stress patches mapped on P2")),
                );
                Decision {
                    form: Map::new(),
                    uploads: vec![Upload {
                        field: "drone_report".into(),
                        kind: "drone.report".into(),
                        bytes,
                    }],
                }
            }
            "plan_pruning" => Decision::form(json!({ "pruning_plan": "spur pruning, two buds per spur" })),
            "prune" => Decision::form(json!({ "action": "pruning", "rows_pruned": 40 })),
            // Tasks of a deployment the agents do not know: submit required
            // fields with neutral values.
            _ => {
                let mut form = Map::new();
                for f in task.form.iter().filter(|f| f.required) {
                    let v = match f.ty {
                        ValueType::Boolean => json!(false),
                        ValueType::Integer => json!(0),
                        ValueType::Decimal => json!(0.0),
                        ValueType::Text => json!("done"),
                        ValueType::Document => continue,
                    };
                    form.insert(f.name.clone(), v);
                }
                Decision { form, uploads: Vec::new() }
            }
        }
    }
}
