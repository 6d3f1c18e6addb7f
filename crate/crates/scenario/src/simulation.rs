//! The multi-day harness: owns the simulated clock, lets the timers fire,
//! and has the scripted agents work every task through the service layer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use agriflow_api::service::{HistoryQuery, TaskView};
use agriflow_api::{Api, Caller, ServiceConfig};
use agriflow_core::engine::{Event, InstanceId, JobKind, TaskId};
use agriflow_core::platform::Platform;
use agriflow_core::role::Role;
use agriflow_core::scheduler::{Clock, RetryPolicy};
use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Utc};
use serde_json::Value;

use crate::agents::{user_for, Agents, ACTING_ROLES};
use crate::config::ScenarioConfig;
use crate::definition::{DAILY_ID, DAILY_XML, DECISION_GATEWAYS, PRUNING_ID, PRUNING_XML};
use crate::report::{AnnualReport, Conditions, DayReport, SimulationReport, Summary};
use crate::ScenarioError;

/// The daily timer fires at this time of day.
pub const DAY_START: NaiveTime = match NaiveTime::from_hms_opt(6, 0, 0) {
    Some(t) => t,
    None => unreachable!(),
};

const MAX_ROUNDS: usize = 100;

pub struct Simulation {
    config: ScenarioConfig,
    api: Api,
}

fn status_text(v: impl serde::Serialize) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl Simulation {
    /// The instant the definitions are deployed: one day before the first
    /// simulated morning, so the daily timer first fires on day 1.
    pub fn origin(config: &ScenarioConfig) -> DateTime<Utc> {
        (config.start - Duration::days(1)).and_time(DAY_START).and_utc()
    }

    pub fn in_memory(config: ScenarioConfig) -> Result<Simulation, ScenarioError> {
        config.check()?;
        let platform = Platform::in_memory(Clock::simulated(Self::origin(&config)), Arc::new(config.fixture()));
        Simulation::on(config, platform)
    }

    /// A simulation whose journal and documents persist in `dir`, which must
    /// not hold a journal yet.
    pub fn persistent(config: ScenarioConfig, dir: &Path) -> Result<Simulation, ScenarioError> {
        config.check()?;
        let journal = agriflow_core::platform::journal_path(dir);
        if journal.exists() && std::fs::metadata(&journal).map(|m| m.len() > 0).unwrap_or(true) {
            return Err(ScenarioError::Config(format!(
                "{} already holds a journal",
                dir.display()
            )));
        }
        let platform = Platform::open(
            dir,
            Clock::simulated(Self::origin(&config)),
            Arc::new(config.fixture()),
            RetryPolicy::default(),
        )?;
        Simulation::on(config, platform)
    }

    fn on(config: ScenarioConfig, platform: Platform) -> Result<Simulation, ScenarioError> {
        let api = Api::new(Arc::new(platform), ServiceConfig::vineyard())?;
        Ok(Simulation { config, api })
    }

    pub fn api(&self) -> &Api {
        &self.api
    }

    pub fn platform(&self) -> &Arc<Platform> {
        self.api.platform()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    fn caller(&self, user: &str) -> Result<Caller, ScenarioError> {
        Ok(self.api.caller(user)?)
    }

    fn manager(&self) -> Result<Caller, ScenarioError> {
        self.caller(user_for(Role::FarmManager, 0))
    }

    /// Deploys the daily and the annual definitions as the farm manager.
    pub fn deploy(&self) -> Result<(), ScenarioError> {
        let m = self.manager()?;
        self.api.deploy(&m, DAILY_XML.as_bytes())?;
        self.api.deploy(&m, PRUNING_XML.as_bytes())?;
        Ok(())
    }

    /// Deploys, runs every configured day and reports.
    pub fn run(&mut self) -> Result<SimulationReport, ScenarioError> {
        self.deploy()?;
        let mut days = Vec::new();
        let mut annual = Vec::new();
        for day in 1..=self.config.n_days {
            let (report, started_annual) = self.run_day(day)?;
            days.push(report);
            annual.extend(started_annual);
        }
        // Annual instances may finish after the day they started.
        let m = self.manager()?;
        for a in &mut annual {
            a.status = status_text(self.api.instance(&m, InstanceId(a.instance))?.overview.status);
        }
        let count = |s: &str| days.iter().filter(|d| d.instance.is_some() && d.status == s).count() as u32;
        let summary = Summary {
            daily_instances: days.iter().filter(|d| d.instance.is_some()).count() as u32,
            completed: count("completed"),
            failed: count("failed"),
            unfinished: days.iter().filter(|d| d.instance.is_some() && d.status == "running").count() as u32,
            annual_instances: annual.len() as u32,
            journal_records: self.api.journal_len() as u64,
        };
        Ok(SimulationReport {
            seed: self.config.seed,
            start: self.config.start,
            days,
            annual,
            summary,
        })
    }

    fn instances(&self) -> Result<BTreeMap<u64, String>, ScenarioError> {
        Ok(self
            .api
            .monitor(&self.manager()?)?
            .into_iter()
            .map(|p| (p.instance.0, p.definition_id))
            .collect())
    }

    /// Moves the clock to the morning of `day`, lets the agents work until
    /// nothing is left for them and reports on the day's instance.
    pub fn run_day(&mut self, day: u32) -> Result<(DayReport, Vec<AnnualReport>), ScenarioError> {
        let date = self.config.date(day);
        let before = self.instances()?;
        self.platform().advance_to(date.and_time(DAY_START).and_utc())?;
        let started: Vec<(u64, String)> = self
            .instances()?
            .into_iter()
            .filter(|(id, _)| !before.contains_key(id))
            .collect();
        let log = self.work(day, date)?;
        let daily = started.iter().find(|(_, d)| d == DAILY_ID).map(|(id, _)| *id);
        let report = self.day_report(day, date, daily, log)?;
        let annual = started
            .iter()
            .filter(|(_, d)| d == PRUNING_ID)
            .map(|(id, _)| AnnualReport {
                instance: *id,
                date,
                status: String::new(),
            })
            .collect();
        Ok((report, annual))
    }

    fn step(&self, minutes: i64) -> Result<(), ScenarioError> {
        let now = self.platform().now();
        self.platform().advance_to(now + Duration::minutes(minutes))?;
        Ok(())
    }

    /// Agents act in rounds until a round in which nobody had anything to do.
    fn work(&self, day: u32, date: NaiveDate) -> Result<WorkLog, ScenarioError> {
        let agents = Agents { config: &self.config };
        let mut log = WorkLog::default();
        for _ in 0..MAX_ROUNDS {
            self.platform().run_due_jobs();
            let mut acted = false;
            for role in ACTING_ROLES {
                let user = user_for(role, day);
                let caller = self.caller(user)?;
                let tasks: Vec<TaskView> = self
                    .api
                    .tasks(&caller)?
                    .into_iter()
                    .filter(|t| t.candidate_role == role)
                    .filter(|t| t.assignee.as_deref().is_none_or(|a| a == user))
                    .filter(|t| !log.gave_up.contains(&t.id))
                    .collect();
                for t in tasks {
                    acted = true;
                    if let Err(e) = self.handle(&caller, &t, &agents, day, date, &mut log) {
                        log.gave_up.insert(t.id);
                        log.errors.push(format!("{} task {} ({}): {e}", user, t.id.0, t.node));
                    }
                }
            }
            if !acted {
                break;
            }
        }
        Ok(log)
    }

    fn handle(
        &self,
        caller: &Caller,
        task: &TaskView,
        agents: &Agents,
        day: u32,
        date: NaiveDate,
        log: &mut WorkLog,
    ) -> Result<(), ScenarioError> {
        if task.assignee.is_none() {
            self.api.claim(caller, task.id)?;
        }
        self.step(2)?;
        if task.node == "read_drone_report" {
            let seen = task
                .context
                .get("drone_report")
                .and_then(Value::as_str)
                .is_some_and(|d| d.starts_with("sha256:"));
            log.drone_report_visible.insert(task.instance.0, seen);
        }
        let mut decision = agents.decide(task, day, date);
        for u in decision.uploads {
            let metadata = BTreeMap::from([("task".to_string(), task.id.0.to_string())]);
            let info = self.api.upload(caller, &u.kind, &u.bytes, metadata)?;
            decision.form.insert(u.field, Value::String(info.document.0));
        }
        self.api.complete(caller, task.id, &decision.form)?;
        self.step(3)?;
        Ok(())
    }

    fn day_report(&self, day: u32, date: NaiveDate, instance: Option<u64>, log: WorkLog) -> Result<DayReport, ScenarioError> {
        let mut report = DayReport {
            day,
            date,
            instance,
            status: "not_started".into(),
            failure: None,
            conditions: Conditions {
                t_max: None,
                precipitation_total: None,
                hail_expected: None,
                disease_warning: None,
            },
            branches: Vec::new(),
            subprocesses: Vec::new(),
            completed: Vec::new(),
            tasks_created: BTreeMap::new(),
            tasks_completed: BTreeMap::new(),
            tasks_pending: BTreeMap::new(),
            connector_calls: BTreeMap::new(),
            drone_report_visible: None,
            agent_errors: log.errors,
        };
        let Some(id) = instance else {
            return Ok(report);
        };
        let m = self.manager()?;
        let detail = self.api.instance(&m, InstanceId(id))?;
        report.status = status_text(detail.overview.status);
        report.failure = detail.overview.failure.clone();
        let v = &detail.variables;
        report.conditions = Conditions {
            t_max: v.get("t_max").and_then(Value::as_f64),
            precipitation_total: v.get("precipitation_total").and_then(Value::as_f64),
            hail_expected: v.get("hail_expected").and_then(Value::as_bool),
            disease_warning: v.get("disease_warning").and_then(Value::as_bool),
        };
        report.drone_report_visible = log.drone_report_visible.get(&id).copied();

        let history = self.api.history(
            &m,
            &HistoryQuery {
                instance: Some(id),
                ..HistoryQuery::default()
            },
        )?;
        let mut roles: BTreeMap<TaskId, Role> = BTreeMap::new();
        let mut connectors = BTreeMap::new();
        for rec in &history {
            match &rec.event {
                Event::TokenMoved { from, flow, .. } if DECISION_GATEWAYS.contains(&from.as_str()) => {
                    report.branches.push(flow.clone());
                }
                Event::SubprocessEntered { node, .. } => report.subprocesses.push(node.clone()),
                Event::TaskCreated {
                    task, candidate_role, ..
                } => {
                    roles.insert(*task, *candidate_role);
                    *report.tasks_created.entry(candidate_role.to_string()).or_default() += 1;
                }
                Event::TaskCompleted { task, node, .. } => {
                    report.completed.push(node.clone());
                    if let Some(r) = roles.get(task) {
                        *report.tasks_completed.entry(r.to_string()).or_default() += 1;
                    }
                }
                Event::JobEnqueued {
                    job,
                    kind: JobKind::ServiceCall { connector, .. },
                    ..
                } => {
                    connectors.insert(*job, connector.clone());
                }
                Event::JobCompleted { job, .. } | Event::JobFailed { job, .. } => {
                    if let Some(c) = connectors.get(job) {
                        *report.connector_calls.entry(c.clone()).or_default() += 1;
                    }
                }
                _ => {}
            }
        }
        for (role, created) in &report.tasks_created {
            let done = report.tasks_completed.get(role).copied().unwrap_or(0);
            if created > &done {
                report.tasks_pending.insert(role.clone(), created - done);
            }
        }
        Ok(report)
    }
}

#[derive(Default)]
struct WorkLog {
    drone_report_visible: BTreeMap<u64, bool>,
    gave_up: BTreeSet<TaskId>,
    errors: Vec<String>,
}

/// Runs `config` on a fresh in-memory platform.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationReport, ScenarioError> {
    Simulation::in_memory(config.clone())?.run()
}
