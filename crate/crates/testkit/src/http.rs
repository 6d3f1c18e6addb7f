//! An in-process HTTP harness over the API router, and the role fuzz.

use std::sync::Arc;

use agriflow_api::{router, Api, Endpoint, ServiceConfig};
use agriflow_core::connectors::{write_report, Fixture};
use agriflow_core::model::{AGRI_NS, BPMN_NS};
use agriflow_core::platform::Platform;
use agriflow_core::role::Role;
use agriflow_core::scheduler::Clock;
use agriflow_core::value::{ValueType, VariableMap};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn xml(id: &str, body: &str) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<bpmn:definitions xmlns:bpmn="{BPMN_NS}" xmlns:agri="{AGRI_NS}" id="defs">
  <bpmn:process id="{id}" name="Daily plan">
{body}
  </bpmn:process>
</bpmn:definitions>"#
    )
}

/// Satellite fetch, then a viticulturist assessment and a field-worker
/// action in parallel.
pub const PLAN: &str = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:serviceTask id="sat" name="Satellite indices" agri:connector="satellite.bands">
      <bpmn:extensionElements>
        <agri:input param="location" value="vineyard" type="text"/>
        <agri:input param="date" variable="trigger_date"/>
      </bpmn:extensionElements>
    </bpmn:serviceTask>
    <bpmn:parallelGateway id="fork"/>
    <bpmn:userTask id="assess" name="On-site assessment" agri:candidateRole="viticulturist">
      <bpmn:extensionElements>
        <agri:formField name="notes" type="text" required="true"/>
      </bpmn:extensionElements>
    </bpmn:userTask>
    <bpmn:userTask id="act" name="Specific action" agri:candidateRole="field_worker"/>
    <bpmn:parallelGateway id="join"/>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="sat"/>
    <bpmn:sequenceFlow id="f2" sourceRef="sat" targetRef="fork"/>
    <bpmn:sequenceFlow id="f3" sourceRef="fork" targetRef="assess"/>
    <bpmn:sequenceFlow id="f4" sourceRef="fork" targetRef="act"/>
    <bpmn:sequenceFlow id="f5" sourceRef="assess" targetRef="join"/>
    <bpmn:sequenceFlow id="f6" sourceRef="act" targetRef="join"/>
    <bpmn:sequenceFlow id="f7" sourceRef="join" targetRef="e"/>
"#;

pub const OFFICE: &str = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:userTask id="review" name="Review" agri:candidateRole="farm_manager"/>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="review"/>
    <bpmn:sequenceFlow id="f2" sourceRef="review" targetRef="e"/>
"#;

pub const MANAGER: &str = "tok-manager";
pub const VITI: &str = "tok-viticulturist";
pub const WORKER: &str = "tok-worker-1";
pub const DRONE: &str = "tok-drone";

pub struct Env {
    pub api: Api,
    pub app: Router,
}

pub fn env() -> Env {
    let t0 = Utc.with_ymd_and_hms(2025, 5, 7, 6, 0, 0).unwrap();
    let platform = Arc::new(Platform::in_memory(Clock::simulated(t0), Arc::new(Fixture::vineyard(3))));
    let api = Api::new(platform, ServiceConfig::vineyard()).unwrap();
    let app = router(api.clone());
    Env { api, app }
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or(Value::Null)
    }
}

pub const BOUNDARY: &str = "agriflow-test-boundary";

/// `(name, file name, data)` parts.
pub fn multipart(parts: &[(&str, Option<&str>, &[u8])]) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, file, data) in parts {
        out.extend(format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"").bytes());
        if let Some(f) = file {
            out.extend(format!("; filename=\"{f}\"").bytes());
        }
        out.extend(b"\r\n\r\n");
        out.extend(*data);
        out.extend(b"\r\n");
    }
    out.extend(format!("--{BOUNDARY}--\r\n").bytes());
    out
}

pub enum Payload {
    None,
    Json(Value),
    Raw(Vec<u8>),
    Multipart(Vec<u8>),
}

pub fn qc_report(sugar: f64, acidity: f64) -> Vec<u8> {
    write_report(
        "qc.analysis",
        &[("sugar_content".into(), ValueType::Decimal), ("acidity".into(), ValueType::Decimal)],
        &VariableMap::new().with("sugar_content", sugar).with("acidity", acidity),
    )
}

impl Env {
    pub async fn call(&self, method: &str, path: &str, token: Option<&str>, payload: Payload) -> Reply {
        let mut req = Request::builder().method(method).uri(format!("/api/v1{path}"));
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match payload {
            Payload::None => Body::empty(),
            Payload::Json(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            Payload::Raw(b) => {
                req = req.header("content-type", "application/xml");
                Body::from(b)
            }
            Payload::Multipart(b) => {
                req = req.header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"));
                Body::from(b)
            }
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply {
            status,
            content_type,
            bytes,
        }
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.call("GET", path, Some(token), Payload::None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> Reply {
        self.call("POST", path, Some(token), Payload::Json(body)).await
    }

    /// Deploys the plan, starts one instance and runs its satellite job.
    pub async fn seeded(&self) -> u64 {
        let r = self
            .call("POST", "/definitions", Some(MANAGER), Payload::Raw(xml("plan", PLAN).into_bytes()))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
        let r = self.post("/instances", MANAGER, json!({ "definition_id": "plan" })).await;
        assert_eq!(r.status, StatusCode::CREATED);
        self.api.platform().run_due_jobs();
        r.json()["instance"].as_u64().unwrap()
    }

    pub async fn task_of(&self, token: &str, node: &str) -> u64 {
        let r = self.get("/tasks", token).await;
        r.json()
            .as_array()
            .unwrap()
            .iter()
            .find(|t| t["node"] == node)
            .unwrap_or_else(|| panic!("no {node} task in {}", r.json()))["id"]
            .as_u64()
            .unwrap()
    }

    pub fn journal_len(&self) -> usize {
        self.api.journal_len()
    }
}

/// One request per endpoint, aimed at objects that belong to the
/// viticulturist where the endpoint acts on a single object.
async fn probe(e: &Env, endpoint: Endpoint, token: &str, instance: u64, task: u64, note: u64) -> Reply {
    let report = qc_report(20.0, 5.0);
    let (method, template) = endpoint.route();
    let id = match endpoint {
        Endpoint::ClaimTask | Endpoint::CompleteTask => task.to_string(),
        Endpoint::ReadNotification | Endpoint::ForwardNotification => note.to_string(),
        Endpoint::PutView => "main".into(),
        _ => instance.to_string(),
    };
    let mut path = template
        .replace("{id}", &id)
        .replace("{instance}", &instance.to_string())
        .replace("{index}", "ndvi");
    if endpoint == Endpoint::History {
        path.push_str("?kind=task_created");
    }
    let payload = match endpoint {
        Endpoint::CompleteTask => Payload::Json(json!({ "notes": "ok" })),
        Endpoint::ForwardNotification => Payload::Json(json!({ "contacts": ["mailto:ekarra@example.org"] })),
        Endpoint::AddContact => Payload::Json(json!({ "name": "X", "address": "mailto:x@example.org" })),
        Endpoint::PutView => Payload::Json(json!({ "entries": [{ "source": "weather" }] })),
        Endpoint::StartInstance => Payload::Json(json!({ "definition_id": "plan" })),
        Endpoint::Deploy => Payload::Raw(xml("office", OFFICE).into_bytes()),
        Endpoint::UploadFile => Payload::Multipart(multipart(&[
            ("kind", None, b"qc.analysis"),
            ("file", Some("qc.txt"), &report),
        ])),
        Endpoint::ClaimTask | Endpoint::ReadNotification | Endpoint::TerminateInstance => Payload::Json(json!({})),
        _ => Payload::None,
    };
    e.call(method, &path, Some(token), payload).await
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub pairs: usize,
    pub denied: usize,
    /// Pairs whose outcome broke the access rules, described.
    pub violations: Vec<String>,
}

/// Calls every endpoint as every configured user, each on a fresh platform.
/// A call the rules refuse must answer 403 and leave the journal untouched;
/// a call they admit must succeed.
pub async fn rbac_fuzz() -> FuzzReport {
    let users = ServiceConfig::vineyard().users;
    let mut report = FuzzReport::default();
    for endpoint in Endpoint::ALL {
        for user in &users {
            let e = env();
            let instance = e.seeded().await;
            let task = e.task_of(VITI, "assess").await;
            let note = e.get("/notifications", VITI).await.json()[0]["id"].as_u64().unwrap();
            let object_denied = match endpoint {
                Endpoint::ClaimTask
                | Endpoint::CompleteTask
                | Endpoint::ReadNotification
                | Endpoint::ForwardNotification => !user.roles.contains(&Role::Viticulturist),
                _ => false,
            };
            let should_deny = !endpoint.admits(&user.roles) || object_denied;
            let before = e.api.platform().engine().journal().records().to_vec();
            let r = probe(&e, endpoint, &user.token, instance, task, note).await;
            let after = e.api.platform().engine().journal().records().to_vec();
            report.pairs += 1;
            let what = format!("{endpoint:?} as {}", user.id);
            if should_deny {
                report.denied += 1;
                if r.status != StatusCode::FORBIDDEN || r.json()["code"] != "forbidden" {
                    report.violations.push(format!("{what}: expected 403, got {}", r.status));
                }
                if before != after {
                    report.violations.push(format!("{what}: journal changed"));
                }
            } else if !r.status.is_success() {
                report.violations.push(format!(
                    "{what}: expected success, got {} {}",
                    r.status,
                    String::from_utf8_lossy(&r.bytes)
                ));
            }
        }
    }
    report
}
