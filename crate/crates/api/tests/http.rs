use std::collections::BTreeSet;

use agriflow_testkit::http::{env, multipart, qc_report, rbac_fuzz, xml, Payload, DRONE, MANAGER, OFFICE, PLAN, VITI, WORKER};
use axum::http::StatusCode;
use serde_json::json;

#[tokio::test]
async fn missing_or_unknown_token_is_401_with_envelope() {
    let e = env();
    let r = e.call("GET", "/tasks", None, Payload::None).await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    assert_eq!(r.json()["code"], "unauthenticated");
    assert!(r.json()["details"].is_array());
    let r = e.get("/tasks", "nope").await;
    assert_eq!(r.status, StatusCode::UNAUTHORIZED);
    let r = e.get("/nowhere", MANAGER).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    assert_eq!(r.json()["code"], "not_found");
}

#[tokio::test]
async fn whoami_lists_reachable_endpoints() {
    let e = env();
    let me = e.get("/whoami", WORKER).await.json();
    assert_eq!(me["user"], "giorgos");
    assert_eq!(me["roles"], json!(["field_worker"]));
    let eps: Vec<&str> = me["endpoints"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(eps.contains(&"GET /tasks"));
    assert!(!eps.contains(&"POST /definitions"));
}

#[tokio::test]
async fn task_lifecycle_over_http() {
    let e = env();
    let id = e.seeded().await;
    assert!(e.get("/tasks", DRONE).await.json().as_array().unwrap().is_empty());
    let viti_tasks = e.get("/tasks", VITI).await.json();
    assert_eq!(viti_tasks.as_array().unwrap().len(), 1);
    assert_eq!(viti_tasks[0]["form"][0]["name"], "notes");
    assert!(viti_tasks[0]["context"]["ndvi_mean"].is_number());
    let assess = e.task_of(VITI, "assess").await;

    let r = e.post(&format!("/tasks/{assess}/complete"), WORKER, json!({ "notes": "x" })).await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    assert_eq!(r.json()["code"], "forbidden");

    let r = e.post(&format!("/tasks/{assess}/complete"), VITI, json!({})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["details"][0]["field"], "notes");

    let r = e.post(&format!("/tasks/{assess}/complete"), VITI, json!({ "notes": "leaves fine" })).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["instance_status"], "running");

    let r = e.post(&format!("/tasks/{assess}/complete"), VITI, json!({ "notes": "again" })).await;
    assert_eq!(r.status, StatusCode::CONFLICT);

    let act = e.task_of(WORKER, "act").await;
    let r = e.post(&format!("/tasks/{act}/claim"), WORKER, json!({})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["assignee"], "giorgos");
    assert_eq!(e.get("/tasks", "tok-worker-2").await.json()[0]["assignee"], "giorgos");
    let r = e.post(&format!("/tasks/{act}/claim"), "tok-worker-2", json!({})).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    let r = e.post(&format!("/tasks/{act}/complete"), WORKER, json!({})).await;
    assert_eq!(r.json()["instance_status"], "completed");

    let m = e.get(&format!("/instances/{id}"), MANAGER).await.json();
    assert_eq!(m["status"], "completed");
    assert_eq!(m["progress"], 1.0);
    assert_eq!(m["variables"]["notes"], "leaves fine");
}

#[tokio::test]
async fn monitor_scopes_field_workers_to_their_instances() {
    let e = env();
    let plan = e.seeded().await;
    let r = e
        .call("POST", "/definitions", Some(VITI), Payload::Raw(xml("office", OFFICE).into_bytes()))
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    let office = e.post("/instances", VITI, json!({ "definition_id": "office" })).await.json()["instance"]
        .as_u64()
        .unwrap();

    let all = e.get("/monitor/processes", MANAGER).await.json();
    assert_eq!(all.as_array().unwrap().len(), 2);
    let first = &all[0];
    assert_eq!(first["definition_name"], "Daily plan");
    assert_eq!(first["status"], "running");
    let acts: Vec<(&str, &str)> = first["activities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["node"].as_str().unwrap(), a["state"].as_str().unwrap()))
        .collect();
    assert!(acts.contains(&("sat", "completed")));
    assert!(acts.contains(&("assess", "active")));
    assert!((first["progress"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let mine = e.get("/monitor/processes", WORKER).await.json();
    let ids: Vec<u64> = mine.as_array().unwrap().iter().map(|p| p["instance"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![plan]);
    assert_eq!(e.get(&format!("/instances/{office}"), WORKER).await.status, StatusCode::FORBIDDEN);
    assert_eq!(e.get("/monitor/processes", DRONE).await.status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn forwarding_uses_the_contact_list_and_is_idempotent() {
    let e = env();
    e.seeded().await;
    let notes = e.get("/notifications", VITI).await.json();
    let n = notes
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["body"].as_str().unwrap().contains("On-site assessment"))
        .unwrap()["id"]
        .as_u64()
        .unwrap();
    let expert = "mailto:ekarra@example.org";
    let r = e.post(&format!("/notifications/{n}/forward"), VITI, json!({ "contacts": ["mailto:who@nowhere"] })).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["details"][0]["field"], "mailto:who@nowhere");
    let r = e.post(&format!("/notifications/{n}/forward"), VITI, json!({ "contacts": [expert] })).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["forwarded_to"].as_array().unwrap().len(), 1);
    let before = e.journal_len();
    let r = e.post(&format!("/notifications/{n}/forward"), VITI, json!({ "contacts": [expert] })).await;
    assert_eq!(r.json()["forwarded_to"].as_array().unwrap().len(), 1);
    assert_eq!(e.journal_len(), before);
    assert_eq!(e.post("/notifications/999/forward", VITI, json!({ "contacts": [expert] })).await.status, StatusCode::NOT_FOUND);

    let r = e.post(&format!("/notifications/{n}/read"), VITI, json!({})).await;
    assert!(r.json()["read_by"].as_array().unwrap().contains(&json!("nikos")));

    let r = e.post("/contacts", WORKER, json!({ "name": "Agronomist", "address": "mailto:a@example.org" })).await;
    assert_eq!(r.json().as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn views_are_per_user_and_catalog_bound() {
    let e = env();
    let cat = e.get("/views/catalog", WORKER).await.json();
    assert!(cat.as_array().unwrap().iter().any(|c| c["id"] == "weather"));
    let put = |tok: &'static str, source: &'static str| {
        let body = json!({ "title": "Morning", "entries": [{ "source": source }] });
        e.call("PUT", "/views/main", Some(tok), Payload::Json(body))
    };
    let r = put(VITI, "weather").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["entries"].as_array().unwrap().len(), 1);
    let r = put(VITI, "twitter").await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["details"][0]["field"], "entries[0].source");
    assert_eq!(put(MANAGER, "meteo-gr").await.status, StatusCode::OK);
    let v = e.get("/views", VITI).await.json();
    assert_eq!(v[0]["entries"][0]["source"], "weather");
    let m = e.get("/views", MANAGER).await.json();
    assert_eq!(m[0]["entries"][0]["source"], "meteo-gr");
}

#[tokio::test]
async fn deployment_is_restricted_and_reports_diagnostics() {
    let e = env();
    let r = e
        .call("POST", "/definitions", Some(WORKER), Payload::Raw(xml("plan", PLAN).into_bytes()))
        .await;
    assert_eq!(r.status, StatusCode::FORBIDDEN);
    let broken = xml("bad", r#"<bpmn:startEvent id="s"/><bpmn:sequenceFlow id="f" sourceRef="s" targetRef="ghost"/>"#);
    let r = e.call("POST", "/definitions", Some(MANAGER), Payload::Raw(broken.into_bytes())).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["code"], "invalid_definition");
    assert!(r.json()["details"].as_array().unwrap().iter().any(|d| d["flow"] == "f"));
    let r = e.call("POST", "/definitions", Some(MANAGER), Payload::Raw(b"<oops".to_vec())).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(r.json()["details"][0]["line"].is_number());

    let body = multipart(&[("file", Some("plan.bpmn"), xml("plan", PLAN).as_bytes())]);
    let r = e.call("POST", "/definitions", Some(VITI), Payload::Multipart(body)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.json()["version"], 1);
    let defs = e.get("/definitions", WORKER).await.json();
    assert_eq!(defs[0]["id"], "plan");
}

#[tokio::test]
async fn upload_extracts_fields() {
    let e = env();
    let report = qc_report(21.5, 6.1);
    let body = multipart(&[
        ("kind", None, b"qc.analysis"),
        ("parcel", None, b"P1"),
        ("file", Some("qc.txt"), &report),
    ]);
    let r = e.call("POST", "/files", Some("tok-qc"), Payload::Multipart(body.clone())).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    let doc = r.json();
    assert_eq!(doc["fields"]["sugar_content"]["value"], 21.5);
    assert_eq!(doc["metadata"]["parcel"], "P1");
    assert_eq!(e.call("POST", "/files", Some(WORKER), Payload::Multipart(body)).await.status, StatusCode::FORBIDDEN);

    let bad = multipart(&[("kind", None, b"qc.analysis"), ("file", Some("qc.txt"), b"garbage")]);
    let r = e.call("POST", "/files", Some("tok-qc"), Payload::Multipart(bad)).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn map_endpoint_returns_ppm_and_legend() {
    let e = env();
    let id = e.seeded().await;
    let r = e.get(&format!("/maps/{id}/ndvi"), DRONE).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type.as_deref(), Some("image/x-portable-pixmap"));
    let (w, h, _) = agriflow_geo::decode_ppm(&r.bytes).unwrap();
    assert_eq!((w, h), (40, 30));
    let legend = e.get(&format!("/maps/{id}/ndvi/legend?mode=parcel_mean"), MANAGER).await.json();
    assert_eq!(legend["index"], "NDVI");
    assert_eq!(legend["parcels"].as_array().unwrap().len(), 3);
    assert_eq!(e.get(&format!("/maps/{id}/evi"), MANAGER).await.status, StatusCode::NOT_FOUND);
    assert_eq!(e.get(&format!("/maps/{id}/ndvi"), WORKER).await.status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn history_filters_the_journal() {
    let e = env();
    let id = e.seeded().await;
    let r = e.get(&format!("/history?kind=task_created&instance={id}"), MANAGER).await.json();
    assert_eq!(r.as_array().unwrap().len(), 2);
    let r = e.get("/history?field=node&value=assess", VITI).await.json();
    assert!(r.as_array().unwrap().iter().all(|rec| rec["instance_id"] == id));
}

#[tokio::test]
async fn task_lists_cover_every_pending_task() {
    let e = env();
    e.seeded().await;
    e.seeded().await;
    let mut union = BTreeSet::new();
    for u in &e.api.config().users {
        for t in e.get("/tasks", &u.token).await.json().as_array().unwrap() {
            union.insert(t["id"].as_u64().unwrap());
        }
    }
    let pending: BTreeSet<u64> = e.api.platform().engine().state().pending_tasks().map(|t| t.id.0).collect();
    assert_eq!(union, pending);
    assert_eq!(pending.len(), 4);
}

#[tokio::test]
async fn rbac_fuzz_every_endpoint_and_role() {
    let report = rbac_fuzz().await;
    assert!(report.violations.is_empty(), "{:#?}", report.violations);
    assert_eq!(report.pairs, 22 * 7);
    assert!(report.denied > 40, "{}", report.denied);
}
