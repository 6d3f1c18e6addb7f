use std::collections::BTreeMap;
use std::sync::Arc;

use agriflow_core::connectors::{write_report, FaultPlan, Fixture};
use agriflow_core::engine::{
    Actor, EngineError, Event, HistoryFilter, InstanceId, InstanceStatus, JobStatus, Recipient, Severity,
    TaskId, TaskState,
};
use agriflow_core::journal::{replay, state_from_records};
use agriflow_core::model::{AGRI_NS, BPMN_NS};
use agriflow_core::platform::Platform;
use agriflow_core::role::Role;
use agriflow_core::scheduler::{Clock, JobOutcome, RetryPolicy};
use agriflow_core::value::{Value, ValueType, VariableMap};
use chrono::{DateTime, Duration, TimeZone, Utc};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 4, 30, 6, 0, 0).unwrap()
}

fn wrap(body: &str) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<bpmn:definitions xmlns:bpmn="{BPMN_NS}" xmlns:agri="{AGRI_NS}" id="d">
  <bpmn:process id="p" name="Test">
{body}
  </bpmn:process>
</bpmn:definitions>"#
    )
}

fn platform() -> Platform {
    Platform::in_memory(Clock::simulated(t0()), Arc::new(Fixture::vineyard(11)))
}

fn manager() -> Actor {
    Actor::new("maria", [Role::FarmManager])
}

fn viti() -> Actor {
    Actor::new("vasilis", [Role::Viticulturist])
}

fn worker() -> Actor {
    Actor::new("fotis", [Role::FieldWorker])
}

fn deploy(p: &Platform, body: &str) {
    p.deploy_xml(wrap(body).as_bytes(), &manager()).unwrap();
}

fn status(p: &Platform, id: InstanceId) -> InstanceStatus {
    p.engine().state().instances[&id].status
}

fn pending(p: &Platform, id: InstanceId) -> Vec<(TaskId, String)> {
    p.engine()
        .state()
        .pending_tasks()
        .filter(|t| t.instance == id)
        .map(|t| (t.id, t.node.clone()))
        .collect()
}

fn task(id: &str, role: &str) -> String {
    format!(r#"<bpmn:userTask id="{id}" name="{id}" agri:candidateRole="{role}"/>"#)
}

fn flow(id: &str, from: &str, to: &str) -> String {
    format!(r#"<bpmn:sequenceFlow id="{id}" sourceRef="{from}" targetRef="{to}"/>"#)
}

fn cond_flow(id: &str, from: &str, to: &str, cond: &str) -> String {
    format!(
        r#"<bpmn:sequenceFlow id="{id}" sourceRef="{from}" targetRef="{to}"><bpmn:conditionExpression>{cond}</bpmn:conditionExpression></bpmn:sequenceFlow>"#
    )
}

fn assert_replays(p: &Platform) {
    let engine = p.engine();
    let bytes = engine.journal().bytes().unwrap();
    let r = replay(&bytes, None).unwrap();
    assert!(r.corruption.is_none());
    assert_eq!(r.state.canonical(), engine.state().canonical());
}

#[test]
fn start_to_end_completes() {
    let p = platform();
    deploy(
        &p,
        &[r#"<bpmn:startEvent id="s"/><bpmn:endEvent id="e"/>"#.to_string(), flow("f", "s", "e")].concat(),
    );
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Completed);
    {
        let e = p.engine();
        let inst = &e.state().instances[&id];
        assert_eq!(inst.progress(), 1.0);
        assert_eq!(inst.variables.get("trigger_date"), Some(&Value::from("2025-04-30")));
    }
    assert_replays(&p);
}

const FORM_TASK: &str = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:userTask id="assess" name="On-site assessment" agri:candidateRole="viticulturist">
      <bpmn:extensionElements>
        <agri:formField name="assessment_notes" type="text" required="true"/>
        <agri:formField name="vigor" type="integer" required="false"/>
      </bpmn:extensionElements>
    </bpmn:userTask>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="assess"/>
    <bpmn:sequenceFlow id="f2" sourceRef="assess" targetRef="e"/>
"#;

#[test]
fn user_task_checks_in_order() {
    let p = platform();
    deploy(&p, FORM_TASK);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let tasks = pending(&p, id);
    assert_eq!(tasks.len(), 1);
    let tid = tasks[0].0;
    {
        let e = p.engine();
        let n: Vec<_> = e.state().notifications.values().collect();
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].recipient, Recipient::Role(Role::Viticulturist));
        assert_eq!(n[0].severity, Severity::Info);
    }

    let missing = p.complete(TaskId(999), VariableMap::new(), &viti());
    assert!(matches!(missing, Err(agriflow_core::platform::PlatformError::Engine(EngineError::NotFound(_)))));
    let forbidden = p.complete(tid, VariableMap::new().with("assessment_notes", "x"), &worker());
    assert!(matches!(forbidden, Err(agriflow_core::platform::PlatformError::Engine(EngineError::Forbidden(_)))));
    match p.complete(tid, VariableMap::new().with("vigor", "high").with("extra", 1i64), &viti()) {
        Err(agriflow_core::platform::PlatformError::Engine(EngineError::Validation { details, .. })) => {
            let mut fields: Vec<_> = details.iter().map(|d| d.field.as_str()).collect();
            fields.sort();
            assert_eq!(fields, vec!["assessment_notes", "extra", "vigor"]);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(status(&p, id), InstanceStatus::Running);

    let done = p
        .complete(
            tid,
            VariableMap::new().with("assessment_notes", "leaves fine").with("vigor", 4i64),
            &viti(),
        )
        .unwrap();
    assert_eq!(done, InstanceStatus::Completed);
    let again = p.complete(tid, VariableMap::new().with("assessment_notes", "y"), &viti());
    assert!(matches!(again, Err(agriflow_core::platform::PlatformError::Engine(EngineError::Conflict(_)))));
    let e = p.engine();
    let inst = &e.state().instances[&id];
    assert_eq!(inst.variables.get("vigor"), Some(&Value::Integer(4)));
    assert_eq!(e.state().tasks[&tid].completed_by.as_deref(), Some("vasilis"));
}

#[test]
fn claim_locks_out_other_holders() {
    let p = platform();
    deploy(&p, FORM_TASK);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let tid = pending(&p, id)[0].0;
    p.claim(tid, &viti()).unwrap();
    p.claim(tid, &viti()).unwrap();
    let other = Actor::new("eleni", [Role::Viticulturist]);
    assert!(matches!(
        p.claim(tid, &other),
        Err(agriflow_core::platform::PlatformError::Engine(EngineError::Conflict(_)))
    ));
    assert_eq!(p.engine().state().tasks[&tid].state, TaskState::Assigned);
}

fn fork_join() -> String {
    [
        r#"<bpmn:startEvent id="s"/><bpmn:parallelGateway id="split"/><bpmn:parallelGateway id="join"/><bpmn:endEvent id="e"/>"#.to_string(),
        task("a", "viticulturist"),
        task("b", "field_worker"),
        flow("f1", "s", "split"),
        flow("f2", "split", "a"),
        flow("f3", "split", "b"),
        flow("f4", "a", "join"),
        flow("f5", "b", "join"),
        flow("f6", "join", "e"),
    ]
    .concat()
}

#[test]
fn join_waits_for_both_branches_in_either_order() {
    for first_a in [true, false] {
        let p = platform();
        deploy(&p, &fork_join());
        let id = p.start("p", VariableMap::new(), &manager()).unwrap();
        let tasks = pending(&p, id);
        assert_eq!(tasks.iter().map(|t| t.1.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        let (ta, tb) = (tasks[0].0, tasks[1].0);
        let order = if first_a {
            [(ta, viti()), (tb, worker())]
        } else {
            [(tb, worker()), (ta, viti())]
        };
        let s1 = p.complete(order[0].0, VariableMap::new(), &order[0].1).unwrap();
        assert_eq!(s1, InstanceStatus::Running);
        // One token parked at the join, one still at the other task.
        assert_eq!(p.engine().state().instances[&id].tokens.len(), 2);
        let s2 = p.complete(order[1].0, VariableMap::new(), &order[1].1).unwrap();
        assert_eq!(s2, InstanceStatus::Completed);
        assert!(p.engine().state().instances[&id].tokens.is_empty());
        assert_replays(&p);
    }
}

fn weather_gateway(with_default: bool) -> String {
    let default = if with_default { r#" default="calm""# } else { "" };
    [
        format!(r#"<bpmn:startEvent id="s"/><bpmn:exclusiveGateway id="g"{default}/>"#),
        task("heat", "viticulturist"),
        task("rain", "viticulturist"),
        r#"<bpmn:endEvent id="e"/><bpmn:endEvent id="e2"/>"#.to_string(),
        flow("f0", "s", "g"),
        cond_flow("fh", "g", "heat", "t_max &gt; 35"),
        cond_flow("fr", "g", "rain", "precipitation_total &gt; 6"),
        if with_default {
            [r#"<bpmn:endEvent id="e3"/>"#.to_string(), flow("calm", "g", "e3")].concat()
        } else {
            String::new()
        },
        flow("f1", "heat", "e"),
        flow("f2", "rain", "e2"),
    ]
    .concat()
}

fn weather(t_max: f64, rain: f64) -> VariableMap {
    VariableMap::new()
        .with("t_max", t_max)
        .with("precipitation_total", rain)
}

#[test]
fn exclusive_gateway_takes_first_true_condition_or_default() {
    let p = platform();
    deploy(&p, &weather_gateway(true));
    let cases = [
        (36.2, 0.0, Some("heat")),
        (35.0, 0.0, None),
        (35.1, 0.0, Some("heat")),
        (20.0, 6.0, None),
        (20.0, 6.1, Some("rain")),
        (36.0, 9.0, Some("heat")),
    ];
    for (t, r, expect) in cases {
        let id = p.start("p", weather(t, r), &manager()).unwrap();
        let got = pending(&p, id).first().map(|x| x.1.clone());
        assert_eq!(got.as_deref(), expect, "t_max={t} rain={r}");
        if expect.is_none() {
            assert_eq!(status(&p, id), InstanceStatus::Completed);
        }
    }
}

#[test]
fn exclusive_gateway_without_viable_flow_fails_instance() {
    let p = platform();
    deploy(&p, &weather_gateway(false));
    let id = p.start("p", weather(20.0, 0.0), &manager()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Failed);
    let e = p.engine();
    let inst = &e.state().instances[&id];
    assert!(inst.failure.as_deref().unwrap().contains("no viable"));
    assert!(e
        .state()
        .notifications
        .values()
        .any(|n| n.recipient == Recipient::Role(Role::FarmManager) && n.severity == Severity::Alert));

    // A missing variable is an evaluation error, which also fails the instance.
    drop(e);
    let id = p.start("p", VariableMap::new().with("t_max", 20.0), &manager()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Failed);
}

const SUB: &str = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:subProcess id="drone" name="Drone sensing">
      <bpmn:startEvent id="ds"/>
      <bpmn:userTask id="plan" name="Mission planning" agri:candidateRole="drone_operator"/>
      <bpmn:userTask id="report" name="Final report" agri:candidateRole="drone_operator">
        <bpmn:extensionElements>
          <agri:formField name="drone_report" type="document" required="true"/>
        </bpmn:extensionElements>
      </bpmn:userTask>
      <bpmn:endEvent id="de"/>
      <bpmn:sequenceFlow id="d1" sourceRef="ds" targetRef="plan"/>
      <bpmn:sequenceFlow id="d2" sourceRef="plan" targetRef="report"/>
      <bpmn:sequenceFlow id="d3" sourceRef="report" targetRef="de"/>
    </bpmn:subProcess>
    <bpmn:userTask id="review" name="Review" agri:candidateRole="viticulturist"/>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="drone"/>
    <bpmn:sequenceFlow id="f2" sourceRef="drone" targetRef="review"/>
    <bpmn:sequenceFlow id="f3" sourceRef="review" targetRef="e"/>
"#;

fn drone_report(stress: bool) -> Vec<u8> {
    let fields = vec![
        ("parcel".to_string(), ValueType::Text),
        ("drone_ndvi_mean".to_string(), ValueType::Decimal),
        ("stress_detected".to_string(), ValueType::Boolean),
        ("summary".to_string(), ValueType::Text),
    ];
    let values = VariableMap::new()
        .with("parcel", "P1")
        .with("drone_ndvi_mean", 0.61)
        .with("stress_detected", stress)
        .with("summary", "uniform canopy");
    write_report("drone.report", &fields, &values)
}

#[test]
fn subprocess_runs_to_completion_and_binds_upload() {
    let p = platform();
    deploy(&p, SUB);
    let op = Actor::new("dimitris", [Role::DroneOperator]);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let plan = pending(&p, id);
    assert_eq!(plan[0].1, "plan");
    p.complete(plan[0].0, VariableMap::new(), &op).unwrap();
    let report = pending(&p, id);
    assert_eq!(report[0].1, "report");

    let bytes = drone_report(true);
    let info = p.ingest_file("drone.report", &bytes, BTreeMap::new(), &op).unwrap();
    let again = p.ingest_file("drone.report", &bytes, BTreeMap::new(), &op).unwrap();
    assert_eq!(info.document, again.document);
    let ingested = p
        .engine()
        .query_history(&HistoryFilter::kind("file_ingested"))
        .len();
    assert_eq!(ingested, 1);

    p.complete(
        report[0].0,
        VariableMap::new().with("drone_report", info.document.clone()),
        &op,
    )
    .unwrap();
    let review = pending(&p, id);
    assert_eq!(review[0].1, "review");
    {
        let e = p.engine();
        let inst = &e.state().instances[&id];
        assert_eq!(inst.variables.get("drone_report"), Some(&Value::Document(info.document)));
        assert_eq!(inst.variables.get("stress_detected"), Some(&Value::Boolean(true)));
        let kinds: Vec<&str> = e.journal().records().iter().map(|r| r.kind()).collect();
        assert!(kinds.contains(&"subprocess_entered"));
        assert!(kinds.contains(&"subprocess_completed"));
    }
    p.complete(review[0].0, VariableMap::new(), &viti()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Completed);
    assert_replays(&p);
}

#[test]
fn malformed_upload_reports_fields() {
    let p = platform();
    let bad = String::from_utf8(drone_report(true))
        .unwrap()
        .replace("drone_ndvi_mean=0.61", "drone_ndvi_mean=lush");
    match p.ingest_file("drone.report", bad.as_bytes(), BTreeMap::new(), &manager()) {
        Err(agriflow_core::platform::PlatformError::Connector(
            agriflow_core::connectors::ConnectorError::Malformed(d),
        )) => {
            assert_eq!(d[0].field, "drone_ndvi_mean");
        }
        other => panic!("{other:?}"),
    }
    assert!(p.ingest_file("weather.forecast", b"x", BTreeMap::new(), &manager()).is_err());
}

const SERVICE: &str = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:serviceTask id="fetch" name="Fetch forecast" agri:connector="weather.forecast">
      <bpmn:extensionElements>
        <agri:input param="location" value="vineyard" type="text"/>
        <agri:input param="date" variable="trigger_date"/>
      </bpmn:extensionElements>
    </bpmn:serviceTask>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="fetch"/>
    <bpmn:sequenceFlow id="f2" sourceRef="fetch" targetRef="e"/>
"#;

#[test]
fn service_job_delivers_forecast() {
    let p = platform();
    deploy(&p, SERVICE);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Running);
    let out = p.run_due_jobs();
    assert_eq!(out.len(), 1);
    assert!(matches!(&out[0], JobOutcome::Succeeded { attempt: 1, connector, .. } if connector == "weather.forecast"));
    assert_eq!(status(&p, id), InstanceStatus::Completed);
    let e = p.engine();
    let vars = &e.state().instances[&id].variables;
    for name in ["t_max", "precipitation_total", "hail_expected", "humidity", "dew_point", "temperature"] {
        assert!(vars.contains(name), "{name}");
    }
}

#[test]
fn retries_are_spaced_and_bounded() {
    let p = platform();
    deploy(&p, SERVICE);
    p.registry_mut().set_fault("weather.forecast", Some(FaultPlan { fail_first: 2 }));
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let out = p.advance_to(t0() + Duration::hours(1)).unwrap();
    let attempts: Vec<u32> = out
        .iter()
        .map(|o| match o {
            JobOutcome::Retrying { attempt, .. } | JobOutcome::Succeeded { attempt, .. } => *attempt,
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(attempts, vec![1, 2, 3]);
    assert_eq!(status(&p, id), InstanceStatus::Completed);
    let e = p.engine();
    let failures: Vec<_> = e
        .journal()
        .records()
        .iter()
        .filter_map(|r| match &r.event {
            Event::JobFailed { next_due, .. } => *next_due,
            _ => None,
        })
        .collect();
    assert_eq!(failures, vec![t0() + Duration::seconds(30), t0() + Duration::seconds(90)]);
    let completions = e.query_history(&HistoryFilter::kind("job_completed")).len();
    assert_eq!(completions, 1);
}

#[test]
fn exhausted_retries_fail_the_instance() {
    let p = platform();
    deploy(&p, SERVICE);
    p.registry_mut().set_fault("weather.forecast", Some(FaultPlan::ALWAYS));
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let out = p.advance_to(t0() + Duration::hours(1)).unwrap();
    assert_eq!(out.len(), 3);
    assert!(matches!(out[2], JobOutcome::Exhausted { attempt: 3, .. }));
    assert_eq!(status(&p, id), InstanceStatus::Failed);
    let e = p.engine();
    assert!(e.state().jobs.values().all(|j| j.status != JobStatus::Pending));
    assert!(e.state().instances[&id]
        .failure
        .as_deref()
        .unwrap()
        .contains("after 3 attempts"));
}

#[test]
fn unbound_input_fails_the_instance() {
    let p = platform();
    deploy(&p, &SERVICE.replace(r#"variable="trigger_date""#, r#"variable="nope""#));
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    assert_eq!(status(&p, id), InstanceStatus::Failed);
}

const DAILY: &str = r#"
    <bpmn:startEvent id="daily">
      <bpmn:timerEventDefinition><bpmn:timeCycle>R/P1D</bpmn:timeCycle></bpmn:timerEventDefinition>
    </bpmn:startEvent>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="daily" targetRef="e"/>
"#;

fn started(p: &Platform) -> usize {
    p.engine().query_history(&HistoryFilter::kind("instance_started")).len()
}

#[test]
fn daily_timer_fires_once_per_period() {
    let p = platform();
    deploy(&p, DAILY);
    p.advance_to(t0()).unwrap();
    assert_eq!(started(&p), 0);
    p.advance_to(t0() + Duration::days(31)).unwrap();
    assert_eq!(started(&p), 31);
    let e = p.engine();
    let dates: Vec<String> = e
        .state()
        .instances
        .values()
        .map(|i| i.variables.get("trigger_date").unwrap().to_string())
        .collect();
    assert_eq!(dates.first().unwrap(), "2025-05-01");
    assert_eq!(dates.last().unwrap(), "2025-05-31");
}

#[test]
fn redeploy_triggers_only_newest_version() {
    let p = platform();
    deploy(&p, DAILY);
    p.advance_to(t0() + Duration::hours(12)).unwrap();
    deploy(&p, DAILY);
    p.advance_to(t0() + Duration::days(3)).unwrap();
    let e = p.engine();
    let versions: Vec<u32> = e.state().instances.values().map(|i| i.version).collect();
    assert_eq!(versions, vec![2, 2]);
}

#[test]
fn yearly_timer() {
    let p = platform();
    deploy(&p, &DAILY.replace("R/P1D", "R/P1Y"));
    p.advance_to(t0() + Duration::days(366)).unwrap();
    assert_eq!(started(&p), 1);
}

#[test]
fn concurrent_completion_has_one_winner() {
    let p = Arc::new(platform());
    deploy(&p, FORM_TASK);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let tid = pending(&p, id)[0].0;
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let p = p.clone();
            std::thread::spawn(move || {
                let a = Actor::new(&format!("v{i}"), [Role::Viticulturist]);
                p.complete(tid, VariableMap::new().with("assessment_notes", format!("by {i}")), &a)
                    .is_ok()
            })
        })
        .collect();
    let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|w| *w).count();
    assert_eq!(wins, 1);
    let e = p.engine();
    assert_eq!(e.query_history(&HistoryFilter::kind("task_completed")).len(), 1);
}

#[test]
fn farm_history_reads_the_journal() {
    let body = r#"
    <bpmn:startEvent id="s"/>
    <bpmn:userTask id="act" name="Specific action" agri:candidateRole="field_worker">
      <bpmn:extensionElements>
        <agri:formField name="action" type="text" required="true"/>
      </bpmn:extensionElements>
    </bpmn:userTask>
    <bpmn:serviceTask id="hist" name="History" agri:connector="farm.history">
      <bpmn:extensionElements>
        <agri:input param="location" value="vineyard" type="text"/>
        <agri:input param="days" value="5" type="integer"/>
      </bpmn:extensionElements>
    </bpmn:serviceTask>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f1" sourceRef="s" targetRef="act"/>
    <bpmn:sequenceFlow id="f2" sourceRef="act" targetRef="hist"/>
    <bpmn:sequenceFlow id="f3" sourceRef="hist" targetRef="e"/>
"#;
    let p = platform();
    deploy(&p, body);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    let tid = pending(&p, id)[0].0;
    p.clock().set(t0() + Duration::days(2)).unwrap();
    p.complete(tid, VariableMap::new().with("action", "irrigation"), &worker()).unwrap();
    p.run_due_jobs();
    let e = p.engine();
    let vars = &e.state().instances[&id].variables;
    assert_eq!(vars.get("last_irrigation"), Some(&Value::from("2025-05-02")));
    assert_eq!(vars.get("last_spraying"), Some(&Value::from("none")));
    assert_eq!(vars.get("recent_days"), Some(&Value::Integer(0)));
}

#[test]
fn reopened_data_dir_continues_the_journal() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Arc::new(Fixture::vineyard(11));
    let live = {
        let p = Platform::open(dir.path(), Clock::simulated(t0()), fixture.clone(), RetryPolicy::default()).unwrap();
        deploy(&p, FORM_TASK);
        p.start("p", VariableMap::new(), &manager()).unwrap();
        p.checkpoint().unwrap();
        let e = p.engine();
        (e.state().canonical(), e.journal().next_seq())
    };
    let p = Platform::open(dir.path(), Clock::simulated(t0()), fixture, RetryPolicy::default()).unwrap();
    assert_eq!(p.engine().state().canonical(), live.0);
    assert_eq!(p.engine().journal().next_seq(), live.1);
    let id = p.start("p", VariableMap::new(), &manager()).unwrap();
    assert_eq!(id, InstanceId(2));
    let records = p.engine().journal().records().to_vec();
    assert_eq!(state_from_records(&records).canonical(), p.engine().state().canonical());
}
