use std::collections::BTreeMap;
use std::sync::Arc;

use agriflow_core::connectors::{
    simulate_weather_stream, CallContext, ConnectorError, DayOverride, DocumentStore, FaultPlan, Fixture,
    HistorySource, IotHistory, Registry,
};
use agriflow_core::engine::{Engine, HistoryFilter, EventRecord};
use agriflow_core::value::{Value, VariableMap};
use chrono::{NaiveDate, TimeZone, Utc};

struct NoHistory;

impl HistorySource for NoHistory {
    fn history(&self, _: &HistoryFilter) -> Vec<EventRecord> {
        Vec::new()
    }
}

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn call(r: &Registry, kind: &str, inputs: VariableMap, attempt: u32) -> Result<VariableMap, ConnectorError> {
    let docs = DocumentStore::in_memory();
    let ctx = CallContext {
        now: Utc.with_ymd_and_hms(2025, 5, 12, 6, 0, 0).unwrap(),
        attempt,
        history: &NoHistory,
        documents: &docs,
    };
    r.call(kind, &inputs, &ctx).map(|x| x.outputs)
}

fn at(day: &str) -> VariableMap {
    VariableMap::new().with("location", "vineyard").with("date", day)
}

#[test]
fn forecast_is_a_pure_function_of_inputs_and_seed() {
    let r = Registry::simulated(Arc::new(Fixture::vineyard(5)));
    let a = call(&r, "weather.forecast", at("2025-05-12"), 1).unwrap();
    let b = call(&r, "weather.forecast", at("2025-05-12"), 1).unwrap();
    assert_eq!(a, b);
    let stream = simulate_weather_stream(5, date("2025-05-01"), 31, &BTreeMap::new());
    assert_eq!(a.get("t_max"), Some(&Value::Decimal(stream[11].t_max)));
    let other = Registry::simulated(Arc::new(Fixture::vineyard(6)));
    assert_ne!(call(&other, "weather.forecast", at("2025-05-12"), 1).unwrap(), a);
}

#[test]
fn schemas_are_closed() {
    let r = Registry::simulated(Arc::new(Fixture::vineyard(5)));
    let extra = at("2025-05-12").with("units", "metric");
    match call(&r, "weather.forecast", extra, 1) {
        Err(ConnectorError::Schema { side, details, .. }) => {
            assert_eq!(side, "inputs");
            assert_eq!(details[0].field, "units");
        }
        other => panic!("{other:?}"),
    }
    let missing = VariableMap::new().with("location", "vineyard");
    assert!(matches!(call(&r, "weather.forecast", missing, 1), Err(ConnectorError::Schema { .. })));
    assert!(matches!(call(&r, "nope", at("2025-05-12"), 1), Err(ConnectorError::UnknownKind(_))));
    assert!(matches!(
        call(&r, "qc.analysis", VariableMap::new(), 1),
        Err(ConnectorError::WrongMode { .. })
    ));
}

#[test]
fn forced_disease_warning() {
    let f = Fixture::vineyard(5).with_override(
        date("2025-05-09"),
        DayOverride {
            disease_warning: Some(true),
            ..DayOverride::default()
        },
    );
    let r = Registry::simulated(Arc::new(f));
    let out = call(&r, "disease.warning", at("2025-05-09"), 1).unwrap();
    assert_eq!(out.get("disease_warning"), Some(&Value::Boolean(true)));
    let quiet = call(&r, "disease.warning", at("2025-05-10"), 1).unwrap();
    assert_eq!(quiet.get("disease_warning"), Some(&Value::Boolean(false)));
}

#[test]
fn iot_history_returns_requested_days() {
    let iot = IotHistory::new(Arc::new(Fixture::vineyard(5)));
    let recs = iot.records(date("2025-05-12"), 5);
    assert_eq!(recs.len(), 5);
    assert_eq!(recs[0].date, date("2025-05-07"));
    assert_eq!(recs[4].date, date("2025-05-11"));
    let r = Registry::simulated(Arc::new(Fixture::vineyard(5)));
    let out = call(&r, "iot.history", at("2025-05-12").with("days", 5i64), 1).unwrap();
    assert_eq!(out.get("iot_days"), Some(&Value::Integer(5)));
}

#[test]
fn fault_plan_counts_attempts() {
    let mut r = Registry::simulated(Arc::new(Fixture::vineyard(5)));
    r.set_fault("weather.forecast", Some(FaultPlan { fail_first: 2 }));
    assert!(matches!(call(&r, "weather.forecast", at("2025-05-12"), 1), Err(ConnectorError::Provider(_))));
    assert!(call(&r, "weather.forecast", at("2025-05-12"), 2).is_err());
    assert!(call(&r, "weather.forecast", at("2025-05-12"), 3).is_ok());
}

#[test]
fn satellite_stores_its_raster() {
    let r = Registry::simulated(Arc::new(Fixture::vineyard(5)));
    let docs = DocumentStore::in_memory();
    let engine = Engine::in_memory();
    let ctx = CallContext {
        now: Utc.with_ymd_and_hms(2025, 5, 12, 6, 0, 0).unwrap(),
        attempt: 1,
        history: &engine,
        documents: &docs,
    };
    let out = r.call("satellite.bands", &at("2025-05-12"), &ctx).unwrap().outputs;
    let Some(Value::Document(d)) = out.get("satellite_raster") else {
        panic!("{out:?}")
    };
    let text = String::from_utf8(docs.get(d).unwrap()).unwrap();
    let raster = agriflow_geo::BandRaster::parse(&text).unwrap();
    assert_eq!(raster.geometry.width, 40);
}

#[test]
fn registry_from_config_selects_kinds() {
    use agriflow_core::connectors::ConnectorConfig;
    let f = Arc::new(Fixture::vineyard(5));
    let cfg = vec![ConnectorConfig {
        kind: "weather.forecast".into(),
        seed: Some(99),
    }];
    let r = Registry::from_config(&cfg, f.clone()).unwrap();
    assert_eq!(r.kinds(), vec!["weather.forecast"]);
    let a = call(&r, "weather.forecast", at("2025-05-12"), 1).unwrap();
    let b = call(&Registry::simulated(Arc::new(Fixture::vineyard(99))), "weather.forecast", at("2025-05-12"), 1).unwrap();
    assert_eq!(a, b);
    let bad = vec![ConnectorConfig {
        kind: "graniot".into(),
        seed: None,
    }];
    assert!(Registry::from_config(&bad, f).is_err());
}
