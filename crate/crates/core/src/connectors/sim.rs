//! Seeded simulators for the api_call connector kinds.
//!
//! Every value is a pure function of `(seed, kind, date)` plus the fixture's
//! per-day overrides, so two runs with the same fixture agree bit for bit.

use std::collections::BTreeMap;
use std::sync::Arc;

use agriflow_geo::{compute_index, zonal_stats, Band, BandRaster, GridGeometry, IndexKind, Parcel};
use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    params, Alert, CallContext, Connector, ConnectorDescriptor, ConnectorError, ConnectorResult, Mode,
};
use crate::engine::{HistoryFilter, Recipient, Severity};
use crate::role::Role;
use crate::value::{Value, ValueType, VariableMap};

/// Forced values for one simulated day.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DayOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precipitation_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hail_expected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disease_warning: Option<bool>,
}

/// Shared world the simulators read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub seed: u64,
    pub location: String,
    #[serde(default)]
    pub overrides: BTreeMap<NaiveDate, DayOverride>,
    pub parcels: Vec<Parcel>,
    pub geometry: GridGeometry,
}

impl Fixture {
    /// Three vineyard parcels on a 40x30 grid of 10 m cells, origin top-left.
    pub fn vineyard(seed: u64) -> Fixture {
        let p = |id: &str, name: &str, ring: Vec<(f64, f64)>| Parcel::new(id, name, ring).expect("fixture parcel");
        Fixture {
            seed,
            location: "vineyard".into(),
            overrides: BTreeMap::new(),
            parcels: vec![
                p(
                    "P1",
                    "Agiorgitiko north",
                    vec![(20.0, 160.0), (180.0, 160.0), (180.0, 280.0), (20.0, 280.0)],
                ),
                p(
                    "P2",
                    "Agiorgitiko south",
                    vec![(20.0, 20.0), (180.0, 20.0), (180.0, 140.0), (20.0, 140.0)],
                ),
                p(
                    "P3",
                    "Moschofilero terrace",
                    vec![(210.0, 30.0), (380.0, 60.0), (370.0, 270.0), (230.0, 250.0)],
                ),
            ],
            geometry: GridGeometry::new(40, 30, 10.0, (0.0, 300.0)),
        }
    }

    pub fn with_override(mut self, date: NaiveDate, o: DayOverride) -> Fixture {
        self.overrides.insert(date, o);
        self
    }

    fn day(&self, date: NaiveDate) -> Option<&DayOverride> {
        self.overrides.get(&date)
    }
}

/// Independent RNG stream for one `(seed, kind, date)` triple.
pub fn derive_rng(seed: u64, kind: &str, date: NaiveDate) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_be_bytes());
    h.update(kind.as_bytes());
    h.update([0]);
    h.update(date.to_string().as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn round(v: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (v * f).round() / f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherForecast {
    pub date: NaiveDate,
    pub t_max: f64,
    pub precipitation_total: f64,
    pub hail_expected: bool,
    pub dew_point: f64,
    pub humidity: f64,
    pub temperature: f64,
}

impl WeatherForecast {
    /// Quiet early-summer weather: t_max 18..32 °C, at most 4 mm of rain, no hail.
    pub fn generate(seed: u64, date: NaiveDate, o: Option<&DayOverride>) -> WeatherForecast {
        let mut rng = derive_rng(seed, "weather.forecast", date);
        let mut t_max = round(rng.random_range(18.0..32.0), 1);
        let mut precipitation_total = if rng.random_bool(0.3) {
            round(rng.random_range(0.2..4.0), 1)
        } else {
            0.0
        };
        let mut hail_expected = false;
        let humidity = round(rng.random_range(40.0..85.0), 1);
        let spread = rng.random_range(6.0..10.0);
        if let Some(o) = o {
            t_max = o.t_max.unwrap_or(t_max);
            precipitation_total = o.precipitation_total.unwrap_or(precipitation_total).max(0.0);
            hail_expected = o.hail_expected.unwrap_or(hail_expected);
        }
        let temperature = round(t_max - spread, 1);
        let dew_point = round(temperature - (100.0 - humidity) / 5.0, 1);
        WeatherForecast {
            date,
            t_max,
            precipitation_total,
            hail_expected,
            dew_point,
            humidity,
            temperature,
        }
    }

    pub fn to_variables(&self) -> VariableMap {
        VariableMap::new()
            .with("date", self.date.to_string())
            .with("t_max", self.t_max)
            .with("precipitation_total", self.precipitation_total)
            .with("hail_expected", self.hail_expected)
            .with("dew_point", self.dew_point)
            .with("humidity", self.humidity)
            .with("temperature", self.temperature)
    }
}

pub fn simulate_weather_stream(
    seed: u64,
    start: NaiveDate,
    n: usize,
    overrides: &BTreeMap<NaiveDate, DayOverride>,
) -> Vec<WeatherForecast> {
    (0..n)
        .map(|i| {
            let d = start + Duration::days(i as i64);
            WeatherForecast::generate(seed, d, overrides.get(&d))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseWarning {
    pub date: NaiveDate,
    pub warning: bool,
    pub pathogen: String,
    pub risk: f64,
}

impl DiseaseWarning {
    /// Background risk stays below the 0.5 warning level unless forced.
    pub fn generate(seed: u64, date: NaiveDate, o: Option<&DayOverride>) -> DiseaseWarning {
        let mut rng = derive_rng(seed, "disease.warning", date);
        let mut risk = round(rng.random_range(0.02..0.45), 2);
        let forced = o.and_then(|o| o.disease_warning);
        if forced == Some(true) {
            risk = round(rng.random_range(0.7..0.95), 2);
        }
        let warning = forced.unwrap_or(risk >= 0.5);
        DiseaseWarning {
            date,
            warning,
            pathogen: if warning { "downy mildew" } else { "none" }.into(),
            risk,
        }
    }
}

fn text_input<'a>(inputs: &'a VariableMap, name: &str) -> &'a str {
    inputs.get(name).and_then(Value::as_text).unwrap_or_default()
}

fn date_input(inputs: &VariableMap) -> Result<NaiveDate, ConnectorError> {
    let raw = text_input(inputs, "date");
    raw.parse()
        .map_err(|_| ConnectorError::Provider(format!("date '{raw}' is not YYYY-MM-DD")))
}

fn location_check(f: &Fixture, inputs: &VariableMap) -> Result<(), ConnectorError> {
    let loc = text_input(inputs, "location");
    if loc != f.location {
        return Err(ConnectorError::Provider(format!("no coverage for location '{loc}'")));
    }
    Ok(())
}

fn to_viticulturist(severity: Severity, body: String) -> Alert {
    Alert {
        recipient: Recipient::Role(Role::Viticulturist),
        severity,
        body,
    }
}

pub struct SimulatedWeather {
    fixture: Arc<Fixture>,
    descriptor: ConnectorDescriptor,
}

impl SimulatedWeather {
    pub fn new(fixture: Arc<Fixture>) -> Self {
        use ValueType::*;
        SimulatedWeather {
            fixture,
            descriptor: ConnectorDescriptor {
                kind: "weather.forecast".into(),
                title: "Daily weather forecast".into(),
                mode: Mode::ApiCall,
                inputs: params(&[("location", Text), ("date", Text)]),
                outputs: params(&[
                    ("date", Text),
                    ("t_max", Decimal),
                    ("precipitation_total", Decimal),
                    ("hail_expected", Boolean),
                    ("dew_point", Decimal),
                    ("humidity", Decimal),
                    ("temperature", Decimal),
                ]),
            },
        }
    }
}

impl Connector for SimulatedWeather {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.descriptor
    }

    fn call(&self, inputs: &VariableMap, _: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        location_check(&self.fixture, inputs)?;
        let date = date_input(inputs)?;
        let w = WeatherForecast::generate(self.fixture.seed, date, self.fixture.day(date));
        let mut alerts = Vec::new();
        if w.t_max > 35.0 {
            alerts.push(to_viticulturist(
                Severity::Warning,
                format!("{date}: intense heat expected, t_max {} °C", w.t_max),
            ));
        }
        if w.precipitation_total > 6.0 {
            alerts.push(to_viticulturist(
                Severity::Warning,
                format!("{date}: heavy rain expected, {} mm", w.precipitation_total),
            ));
        }
        if w.hail_expected {
            alerts.push(to_viticulturist(Severity::Alert, format!("{date}: hailstorm expected")));
        }
        Ok(ConnectorResult {
            outputs: w.to_variables(),
            alerts,
        })
    }
}

pub struct SimulatedDisease {
    fixture: Arc<Fixture>,
    descriptor: ConnectorDescriptor,
}

impl SimulatedDisease {
    pub fn new(fixture: Arc<Fixture>) -> Self {
        use ValueType::*;
        SimulatedDisease {
            fixture,
            descriptor: ConnectorDescriptor {
                kind: "disease.warning".into(),
                title: "Disease outbreak probability warning".into(),
                mode: Mode::ApiCall,
                inputs: params(&[("location", Text), ("date", Text)]),
                outputs: params(&[("disease_warning", Boolean), ("pathogen", Text), ("risk", Decimal)]),
            },
        }
    }
}

impl Connector for SimulatedDisease {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.descriptor
    }

    fn call(&self, inputs: &VariableMap, _: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        location_check(&self.fixture, inputs)?;
        let date = date_input(inputs)?;
        let d = DiseaseWarning::generate(self.fixture.seed, date, self.fixture.day(date));
        let alerts = if d.warning {
            vec![to_viticulturist(
                Severity::Alert,
                format!("{date}: {} outbreak probability {:.0}%", d.pathogen, d.risk * 100.0),
            )]
        } else {
            Vec::new()
        };
        Ok(ConnectorResult {
            outputs: VariableMap::new()
                .with("disease_warning", d.warning)
                .with("pathogen", d.pathogen)
                .with("risk", d.risk),
            alerts,
        })
    }
}

/// Daily field-sensor record; mirrors the forecast of the same day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IotRecord {
    pub date: NaiveDate,
    pub temperature: f64,
    pub humidity: f64,
    pub precipitation: f64,
}

pub struct IotHistory {
    fixture: Arc<Fixture>,
    descriptor: ConnectorDescriptor,
}

impl IotHistory {
    pub fn new(fixture: Arc<Fixture>) -> Self {
        use ValueType::*;
        IotHistory {
            fixture,
            descriptor: ConnectorDescriptor {
                kind: "iot.history".into(),
                title: "Field sensor history".into(),
                mode: Mode::ApiCall,
                inputs: params(&[("location", Text), ("date", Text), ("days", Integer)]),
                outputs: params(&[
                    ("iot_days", Integer),
                    ("iot_temperature_mean", Decimal),
                    ("iot_temperature_max", Decimal),
                    ("iot_humidity_mean", Decimal),
                    ("iot_precipitation_total", Decimal),
                    ("iot_records", Document),
                ]),
            },
        }
    }

    /// The `days` whole days before `date`, oldest first.
    pub fn records(&self, date: NaiveDate, days: u32) -> Vec<IotRecord> {
        (1..=days as i64)
            .rev()
            .map(|back| {
                let d = date - Duration::days(back);
                let w = WeatherForecast::generate(self.fixture.seed, d, self.fixture.day(d));
                IotRecord {
                    date: d,
                    temperature: w.temperature,
                    humidity: w.humidity,
                    precipitation: w.precipitation_total,
                }
            })
            .collect()
    }
}

impl Connector for IotHistory {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.descriptor
    }

    fn call(&self, inputs: &VariableMap, ctx: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        location_check(&self.fixture, inputs)?;
        let date = date_input(inputs)?;
        let days = match inputs.get("days") {
            Some(Value::Integer(n)) if (1..=366).contains(n) => *n as u32,
            other => {
                return Err(ConnectorError::Provider(format!(
                    "days must be between 1 and 366, got {other:?}"
                )))
            }
        };
        let recs = self.records(date, days);
        let n = recs.len() as f64;
        let json = serde_json::to_vec(&recs).map_err(|e| ConnectorError::Provider(e.to_string()))?;
        let doc = ctx.documents.put(&json).map_err(|e| ConnectorError::Storage(e.to_string()))?;
        Ok(ConnectorResult {
            outputs: VariableMap::new()
                .with("iot_days", days as i64)
                .with(
                    "iot_temperature_mean",
                    round(recs.iter().map(|r| r.temperature).sum::<f64>() / n, 2),
                )
                .with(
                    "iot_temperature_max",
                    recs.iter().map(|r| r.temperature).fold(f64::MIN, f64::max),
                )
                .with("iot_humidity_mean", round(recs.iter().map(|r| r.humidity).sum::<f64>() / n, 2))
                .with(
                    "iot_precipitation_total",
                    round(recs.iter().map(|r| r.precipitation).sum::<f64>(), 1),
                )
                .with("iot_records", doc),
            alerts: Vec::new(),
        })
    }
}

pub struct SatelliteBands {
    fixture: Arc<Fixture>,
    descriptor: ConnectorDescriptor,
}

impl SatelliteBands {
    pub fn new(fixture: Arc<Fixture>) -> Self {
        use ValueType::*;
        SatelliteBands {
            fixture,
            descriptor: ConnectorDescriptor {
                kind: "satellite.bands".into(),
                title: "Satellite multispectral acquisition".into(),
                mode: Mode::ApiCall,
                inputs: params(&[("location", Text), ("date", Text)]),
                outputs: params(&[
                    ("ndvi_mean", Decimal),
                    ("ndmi_mean", Decimal),
                    ("osavi_mean", Decimal),
                    ("satellite_raster", Document),
                ]),
            },
        }
    }

    /// RED/NIR/SWIR reflectance for `date`; canopy inside parcels, bare soil
    /// elsewhere, and a few cloud-masked cells.
    pub fn raster(&self, date: NaiveDate) -> BandRaster {
        let f = &self.fixture;
        let g = f.geometry;
        let mut rng = derive_rng(f.seed, "satellite.bands", date);
        let vigor: Vec<f64> = f.parcels.iter().map(|_| rng.random_range(0.55..1.0)).collect();
        let (mut red, mut nir, mut swir) = (Vec::new(), Vec::new(), Vec::new());
        for row in 0..g.height {
            for col in 0..g.width {
                if rng.random_bool(0.02) {
                    red.push(None);
                    nir.push(None);
                    swir.push(None);
                    continue;
                }
                let c = g.cell_center(col, row);
                let v = f
                    .parcels
                    .iter()
                    .position(|p| p.contains(c))
                    .map(|i| (vigor[i] * rng.random_range(0.6..1.1)).min(1.0))
                    .unwrap_or(0.0);
                red.push(Some(round(0.16 - 0.12 * v + rng.random_range(0.0..0.02), 4)));
                nir.push(Some(round(0.22 + 0.38 * v + rng.random_range(0.0..0.03), 4)));
                swir.push(Some(round(0.30 - 0.15 * v + rng.random_range(0.0..0.02), 4)));
            }
        }
        BandRaster::new(g, -1.0)
            .with_band(Band::Red, red)
            .and_then(|r| r.with_band(Band::Nir, nir))
            .and_then(|r| r.with_band(Band::Swir, swir))
            .expect("reflectances within range")
    }

    /// Mean of an index over every cell covered by any parcel.
    pub fn parcel_mean(&self, raster: &BandRaster, kind: IndexKind) -> Result<f64, ConnectorError> {
        let grid = compute_index(raster, kind).map_err(|e| ConnectorError::Provider(e.to_string()))?;
        let (mut sum, mut n) = (0.0, 0usize);
        for p in &self.fixture.parcels {
            let s = zonal_stats(&grid, p);
            if let Some(m) = s.mean {
                sum += m * s.count as f64;
                n += s.count;
            }
        }
        if n == 0 {
            return Err(ConnectorError::Provider("no valid cells over the parcels".into()));
        }
        Ok(round(sum / n as f64, 4))
    }
}

impl Connector for SatelliteBands {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.descriptor
    }

    fn call(&self, inputs: &VariableMap, ctx: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        location_check(&self.fixture, inputs)?;
        let date = date_input(inputs)?;
        let raster = self.raster(date);
        let doc = ctx
            .documents
            .put(raster.to_text().as_bytes())
            .map_err(|e| ConnectorError::Storage(e.to_string()))?;
        Ok(ConnectorResult {
            outputs: VariableMap::new()
                .with("ndvi_mean", self.parcel_mean(&raster, IndexKind::Ndvi)?)
                .with("ndmi_mean", self.parcel_mean(&raster, IndexKind::Ndmi)?)
                .with("osavi_mean", self.parcel_mean(&raster, IndexKind::Osavi)?)
                .with("satellite_raster", doc),
            alerts: Vec::new(),
        })
    }
}

/// Farm operational history read back from the journal: last irrigation and
/// spraying (completed field tasks with that `action`) and the forecasts
/// fetched over the last `days` calendar days, today included.
pub struct FarmHistory {
    descriptor: ConnectorDescriptor,
}

impl Default for FarmHistory {
    fn default() -> Self {
        FarmHistory::new()
    }
}

impl FarmHistory {
    pub fn new() -> Self {
        use ValueType::*;
        FarmHistory {
            descriptor: ConnectorDescriptor {
                kind: "farm.history".into(),
                title: "Irrigation and spraying history".into(),
                mode: Mode::ApiCall,
                inputs: params(&[("location", Text), ("days", Integer)]),
                outputs: params(&[
                    ("last_irrigation", Text),
                    ("last_spraying", Text),
                    ("recent_days", Integer),
                    ("recent_t_max", Decimal),
                    ("recent_precipitation", Decimal),
                ]),
            },
        }
    }
}

impl Connector for FarmHistory {
    fn descriptor(&self) -> &ConnectorDescriptor {
        &self.descriptor
    }

    fn call(&self, inputs: &VariableMap, ctx: &CallContext) -> Result<ConnectorResult, ConnectorError> {
        let days = match inputs.get("days") {
            Some(Value::Integer(n)) if (1..=366).contains(n) => *n,
            other => {
                return Err(ConnectorError::Provider(format!(
                    "days must be between 1 and 366, got {other:?}"
                )))
            }
        };
        let last = |action: &str| {
            let f = HistoryFilter::kind("task_completed").with_field("action", action);
            ctx.history
                .history(&f)
                .last()
                .map(|r| r.at.date_naive().to_string())
                .unwrap_or_else(|| "none".into())
        };
        let from = (ctx.now.date_naive() - Duration::days(days - 1))
            .and_hms_opt(0, 0, 0)
            .expect("midnight")
            .and_utc();
        let recent = ctx.history.history(
            &HistoryFilter::kind("job_completed")
                .between(from, ctx.now + Duration::seconds(1))
                .with_field("connector", "weather.forecast"),
        );
        let (mut t_max, mut rain) = (f64::MIN, 0.0);
        for r in &recent {
            if let crate::engine::Event::JobCompleted { outputs, .. } = &r.event {
                let num = |n: &str| outputs.get(n).and_then(Value::as_f64).unwrap_or(0.0);
                t_max = t_max.max(num("t_max"));
                rain += num("precipitation_total");
            }
        }
        Ok(ConnectorResult {
            outputs: VariableMap::new()
                .with("last_irrigation", last("irrigation"))
                .with("last_spraying", last("spraying"))
                .with("recent_days", recent.len() as i64)
                .with("recent_t_max", if recent.is_empty() { 0.0 } else { t_max })
                .with("recent_precipitation", round(rain, 1)),
            alerts: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn stream_is_deterministic_and_overridable() {
        let start = d("2025-05-01");
        let mut o = BTreeMap::new();
        assert!(simulate_weather_stream(7, start, 0, &o).is_empty());
        let a = simulate_weather_stream(7, start, 31, &o);
        assert_eq!(a, simulate_weather_stream(7, start, 31, &o));
        assert!(a
            .iter()
            .all(|w| w.t_max <= 35.0 && w.precipitation_total <= 6.0 && !w.hail_expected));
        assert!(a.iter().all(|w| (0.0..=100.0).contains(&w.humidity)));
        o.insert(
            d("2025-05-03"),
            DayOverride {
                t_max: Some(36.2),
                ..DayOverride::default()
            },
        );
        let b = simulate_weather_stream(7, start, 31, &o);
        assert_eq!(b[2].t_max, 36.2);
        assert_eq!(b[3], a[3]);
        assert_ne!(simulate_weather_stream(8, start, 31, &BTreeMap::new()), a);
    }

    #[test]
    fn disease_quiet_unless_forced() {
        let f = Fixture::vineyard(1).with_override(
            d("2025-05-09"),
            DayOverride {
                disease_warning: Some(true),
                ..DayOverride::default()
            },
        );
        for day in 1..=31 {
            let date = NaiveDate::from_ymd_opt(2025, 5, day).unwrap();
            let w = DiseaseWarning::generate(f.seed, date, f.day(date));
            assert_eq!(w.warning, day == 9, "day {day}");
        }
    }

    #[test]
    fn raster_reflectances_valid() {
        let s = SatelliteBands::new(Arc::new(Fixture::vineyard(3)));
        let r = s.raster(d("2025-05-01"));
        assert_eq!(r, s.raster(d("2025-05-01")));
        let ndvi = s.parcel_mean(&r, IndexKind::Ndvi).unwrap();
        assert!((0.2..0.9).contains(&ndvi), "{ndvi}");
    }
}
