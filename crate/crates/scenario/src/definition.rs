//! The bundled vineyard process definitions.

use agriflow_core::model::{parse_definition, validate_definition, ProcessDefinition};

pub const DAILY_XML: &str = include_str!("../assets/vineyard_daily.bpmn");
pub const PRUNING_XML: &str = include_str!("../assets/vineyard_pruning.bpmn");

pub const DAILY_ID: &str = "vineyard_daily";
pub const PRUNING_ID: &str = "vineyard_pruning";

/// Exclusive gateways whose outgoing flow is a decision worth reporting.
pub const DECISION_GATEWAYS: [&str; 3] = ["qc_decision", "weather_event", "drone_decision"];

/// Outgoing flows of the weather-event gateway, in evaluation order, with
/// their conditions; `no_event` is the default.
pub const WEATHER_BRANCHES: [(&str, &str); 4] = [
    ("heat", "t_max > 35"),
    ("heavy_rain", "precipitation_total > 6"),
    ("hail", "hail_expected == true"),
    ("disease_outbreak", "disease_warning == true"),
];
pub const NO_EVENT: &str = "no_event";

pub const QC_SUBPROCESS: &str = "qc_analysis";
pub const DRONE_SUBPROCESS: &str = "drone_sensing";
pub const ACTION_SUBPROCESS: &str = "specific_action";

/// The drone operator's steps, in order.
pub const DRONE_STEPS: [&str; 5] = ["drone_config", "drone_mission", "drone_debrief", "drone_assess", "drone_report"];

fn build(xml: &str) -> ProcessDefinition {
    let def = parse_definition(xml.as_bytes()).expect("bundled definition parses");
    validate_definition(&def).expect("bundled definition validates");
    def
}

/// The daily vineyard cycle: a timer start every day, the four daily actions
/// in parallel, the weather-event decision and the three sub-processes.
pub fn build_scenario_definition() -> ProcessDefinition {
    build(DAILY_XML)
}

/// Annual pruning, started by a yearly timer.
pub fn build_pruning_definition() -> ProcessDefinition {
    build(PRUNING_XML)
}
