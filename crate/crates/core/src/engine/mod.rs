//! Token-based execution of process definitions.
//!
//! Every change goes through [`Engine::emit`], which applies the event to the
//! in-memory [`State`] and queues it; a command's events are appended to the
//! journal as one batch when the command finishes. If the append fails the
//! state is rebuilt from the journal, so nothing that was not journaled is
//! ever observable.

mod advance;
mod events;
mod history;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use events::*;
pub use history::HistoryFilter;
pub use state::*;

use crate::journal::{state_from_records, Journal, JournalError};
use crate::model::{validate_connectors, DefinitionError, NodeKind, ProcessDefinition, TimerSpec};
use crate::role::Role;
use crate::scheduler::RetryPolicy;
use crate::value::{Value, VariableMap};

/// Who is performing an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub user: String,
    pub roles: BTreeSet<Role>,
}

impl Actor {
    pub fn new(user: &str, roles: impl IntoIterator<Item = Role>) -> Actor {
        Actor {
            user: user.to_string(),
            roles: roles.into_iter().collect(),
        }
    }

    /// The identity used for timer-driven and simulated system work.
    pub fn system() -> Actor {
        Actor::new("system", Role::ALL)
    }

    pub fn has(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    pub fn can_see(&self, r: &Recipient) -> bool {
        match r {
            Recipient::Role(role) => self.has(*role),
            Recipient::User(u) => *u == self.user,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("validation failed: {message}")]
    Validation {
        message: String,
        details: Vec<FieldError>,
    },
    #[error(transparent)]
    Definition(#[from] DefinitionError),
    #[error(transparent)]
    Storage(#[from] JournalError),
}

impl EngineError {
    fn validation(message: impl Into<String>, details: Vec<FieldError>) -> EngineError {
        EngineError::Validation {
            message: message.into(),
            details,
        }
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;

pub struct Engine {
    state: State,
    journal: Journal,
    pending: Vec<EventRecord>,
    now: DateTime<Utc>,
    retry: RetryPolicy,
    tap: Option<Vec<[u8; 32]>>,
}

impl Engine {
    pub fn new(journal: Journal, state: State, retry: RetryPolicy) -> Engine {
        Engine {
            state,
            journal,
            pending: Vec::new(),
            now: DateTime::<Utc>::UNIX_EPOCH,
            retry,
            tap: None,
        }
    }

    pub fn in_memory() -> Engine {
        Engine::new(Journal::in_memory(), State::default(), RetryPolicy::default())
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn journal_mut(&mut self) -> &mut Journal {
        &mut self.journal
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// Starts recording a SHA-256 of the canonical state after every event.
    /// Events already journaled are replayed to fill in their hashes.
    pub fn record_state_hashes(&mut self) {
        let mut hashes = Vec::with_capacity(self.state.last_seq as usize + 1);
        let mut state = State::default();
        hashes.push(Sha256::digest(state.canonical()).into());
        for rec in self.journal.records() {
            state.apply(rec);
            hashes.push(Sha256::digest(state.canonical()).into());
        }
        self.tap = Some(hashes);
    }

    /// Hash of the canonical state after each sequence number, index 0 being
    /// the empty state.
    pub fn state_hashes(&self) -> Option<&[[u8; 32]]> {
        self.tap.as_deref()
    }

    fn emit(&mut self, event: Event) {
        let rec = EventRecord::new(self.state.last_seq + 1, self.now, event);
        self.state.apply(&rec);
        if let Some(tap) = &mut self.tap {
            tap.push(Sha256::digest(self.state.canonical()).into());
        }
        self.pending.push(rec);
    }

    /// Runs a command: on success its events are committed, on any error the
    /// state returns to the last committed record.
    fn run<T>(&mut self, now: DateTime<Utc>, f: impl FnOnce(&mut Engine) -> Result<T>) -> Result<T> {
        self.now = now;
        let result = f(self);
        let batch = std::mem::take(&mut self.pending);
        if batch.is_empty() {
            return result;
        }
        let committed = match &result {
            Ok(_) => self.journal.append_records(batch),
            Err(_) => Ok(()),
        };
        if result.is_err() || committed.is_err() {
            self.state = state_from_records(self.journal.records());
            if let Some(tap) = &mut self.tap {
                tap.truncate(self.journal.records().len() + 1);
            }
        }
        committed?;
        result
    }

    fn next_instance(&self) -> InstanceId {
        InstanceId(self.state.counters.instance + 1)
    }
    fn next_token(&self) -> TokenId {
        TokenId(self.state.counters.token + 1)
    }
    fn next_task(&self) -> TaskId {
        TaskId(self.state.counters.task + 1)
    }
    fn next_job(&self) -> JobId {
        JobId(self.state.counters.job + 1)
    }
    fn next_notification(&self) -> NotificationId {
        NotificationId(self.state.counters.notification + 1)
    }

    // ---- deployment -------------------------------------------------------

    /// Deploys a parsed definition as the next version of its id and arms its
    /// timer start events. Older versions' pending timers are cancelled.
    pub fn deploy(
        &mut self,
        mut def: ProcessDefinition,
        connectors: &[&str],
        by: &str,
        now: DateTime<Utc>,
    ) -> Result<Arc<ProcessDefinition>> {
        crate::model::validate_definition(&def)?;
        let missing = validate_connectors(&def, connectors);
        if !missing.is_empty() {
            return Err(DefinitionError::Invalid(missing).into());
        }
        for (node, timer) in def.timer_starts() {
            if timer.firing(now, 0).is_none() {
                let msg = match timer {
                    TimerSpec::Date(_) => "timer date is not in the future".to_string(),
                    TimerSpec::Cycle { .. } => "timer cycle has no future firing".to_string(),
                };
                return Err(DefinitionError::Invalid(vec![crate::model::Violation::BadTimer {
                    node: node.id.clone(),
                    message: msg,
                }])
                .into());
            }
        }
        def.version = self.state.latest(&def.id).map_or(1, |d| d.definition.version + 1);
        let def = Arc::new(def);
        self.run(now, |e| {
            let old: Vec<JobId> = e
                .state
                .pending_jobs()
                .filter(|j| matches!(&j.kind, JobKind::TimerFire { definition_id, .. } if *definition_id == def.id))
                .map(|j| j.id)
                .collect();
            for job in old {
                e.emit(Event::JobCancelled {
                    job,
                    reason: format!("superseded by version {}", def.version),
                });
            }
            e.emit(Event::DefinitionDeployed {
                definition: def.clone(),
                by: by.to_string(),
            });
            for (node, timer) in def.timer_starts() {
                if let Some(due) = timer.firing(now, 0) {
                    let job = e.next_job();
                    e.emit(Event::JobEnqueued {
                        job,
                        kind: JobKind::TimerFire {
                            definition_id: def.id.clone(),
                            version: def.version,
                            node: node.id.clone(),
                            fire_index: 0,
                            deployed_at: now,
                        },
                        due_at: due,
                        max_attempts: 1,
                    });
                }
            }
            Ok(def.clone())
        })
    }

    // ---- instances --------------------------------------------------------

    pub fn start_instance(
        &mut self,
        definition_id: &str,
        variables: VariableMap,
        actor: &Actor,
        now: DateTime<Utc>,
    ) -> Result<InstanceId> {
        let dep = self
            .state
            .latest(definition_id)
            .ok_or_else(|| EngineError::NotFound(format!("definition '{definition_id}'")))?;
        let def = dep.definition.clone();
        let mut starts: Vec<String> = def
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::StartEvent { timer: None }))
            .map(|n| n.id.clone())
            .collect();
        if starts.is_empty() {
            starts = def.start_nodes.clone();
        }
        let trigger = StartTrigger::Manual {
            user: actor.user.clone(),
        };
        self.run(now, |e| e.begin(&def, trigger, starts, variables))
    }

    fn begin(
        &mut self,
        def: &ProcessDefinition,
        trigger: StartTrigger,
        starts: Vec<String>,
        mut variables: VariableMap,
    ) -> Result<InstanceId> {
        if !variables.contains("trigger_date") {
            let _ = variables.insert("trigger_date", self.now.format("%Y-%m-%d").to_string());
        }
        let instance = self.next_instance();
        self.emit(Event::InstanceStarted {
            instance,
            definition_id: def.id.clone(),
            version: def.version,
            trigger,
            variables,
        });
        for node in starts {
            let token = self.next_token();
            self.emit(Event::TokenCreated {
                instance,
                token,
                node,
                parent: None,
                via: None,
            });
        }
        self.advance(instance)?;
        Ok(instance)
    }

    pub fn terminate(&mut self, instance: InstanceId, actor: &Actor, now: DateTime<Utc>) -> Result<()> {
        let inst = self
            .state
            .instances
            .get(&instance)
            .ok_or_else(|| EngineError::NotFound(format!("instance {instance}")))?;
        if inst.status != InstanceStatus::Running {
            return Err(EngineError::Conflict(format!(
                "instance {instance} is {:?}",
                inst.status
            )));
        }
        self.run(now, |e| {
            e.emit(Event::InstanceTerminated {
                instance,
                by: actor.user.clone(),
            });
            Ok(())
        })
    }

    fn fail(&mut self, instance: InstanceId, reason: String) {
        log::warn!("instance {instance} failed: {reason}");
        self.emit(Event::InstanceFailed {
            instance,
            reason: reason.clone(),
        });
        let id = self.next_notification();
        self.emit(Event::NotificationEmitted {
            notification: id,
            instance: Some(instance),
            recipient: Recipient::Role(Role::FarmManager),
            severity: Severity::Alert,
            source: NotificationSource::Engine,
            body: format!("Process instance {instance} failed: {reason}"),
        });
    }

    // ---- user tasks -------------------------------------------------------

    fn task(&self, id: TaskId) -> Result<&Task> {
        self.state
            .tasks
            .get(&id)
            .ok_or_else(|| EngineError::NotFound(format!("task {id}")))
    }

    pub fn claim_task(&mut self, id: TaskId, actor: &Actor, now: DateTime<Utc>) -> Result<()> {
        let task = self.task(id)?;
        if !actor.has(task.candidate_role) {
            return Err(EngineError::Forbidden(format!(
                "task {id} requires role {}",
                task.candidate_role
            )));
        }
        match (&task.state, &task.assignee) {
            (TaskState::Completed | TaskState::Cancelled, _) => {
                return Err(EngineError::Conflict(format!("task {id} is closed")))
            }
            (_, Some(u)) if *u == actor.user => return Ok(()),
            (_, Some(u)) => {
                return Err(EngineError::Conflict(format!("task {id} is assigned to {u}")))
            }
            _ => {}
        }
        let instance = task.instance;
        self.run(now, |e| {
            e.emit(Event::TaskAssigned {
                task: id,
                instance,
                user: actor.user.clone(),
            });
            Ok(())
        })
    }

    /// Checks submitted values against the task's form: no unknown fields,
    /// every required field present, every value of (or coercible to) the
    /// declared type, document references known to the store.
    pub fn check_form(&self, task: &Task, values: &VariableMap) -> Result<VariableMap> {
        let mut errors = Vec::new();
        let mut out = VariableMap::new();
        let declared: BTreeMap<&str, _> = task.form_fields.iter().map(|f| (f.name.as_str(), f)).collect();
        for (name, value) in values.iter() {
            let Some(field) = declared.get(name.as_str()) else {
                errors.push(FieldError {
                    field: name.clone(),
                    message: "not a field of this form".into(),
                });
                continue;
            };
            match value.clone().coerce(field.ty) {
                Ok(v) => {
                    if let Value::Document(d) = &v {
                        if !self.state.documents.contains_key(d.digest_hex()) {
                            errors.push(FieldError {
                                field: name.clone(),
                                message: format!("unknown document {d}"),
                            });
                            continue;
                        }
                    }
                    let _ = out.insert(name.clone(), v);
                }
                Err(v) => errors.push(FieldError {
                    field: name.clone(),
                    message: format!("expected {}, got {}", field.ty, v.value_type()),
                }),
            }
        }
        for field in &task.form_fields {
            if field.required && !values.contains(&field.name) {
                errors.push(FieldError {
                    field: field.name.clone(),
                    message: "required".into(),
                });
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            let names: Vec<&str> = errors.iter().map(|e| e.field.as_str()).collect();
            Err(EngineError::validation(
                format!("invalid form values: {}", names.join(", ")),
                errors,
            ))
        }
    }

    pub fn complete_task(
        &mut self,
        id: TaskId,
        values: VariableMap,
        actor: &Actor,
        now: DateTime<Utc>,
    ) -> Result<InstanceStatus> {
        let task = self.task(id)?;
        let authorized = actor.has(task.candidate_role) || task.assignee.as_deref() == Some(&actor.user);
        if !authorized {
            return Err(EngineError::Forbidden(format!(
                "task {id} requires role {}",
                task.candidate_role
            )));
        }
        if !task.state.is_pending() {
            return Err(EngineError::Conflict(format!("task {id} is already {:?}", task.state)));
        }
        let values = self.check_form(task, &values)?;
        let (instance, token, node) = (task.instance, task.token, task.node.clone());
        self.run(now, |e| {
            e.emit(Event::TaskCompleted {
                task: id,
                instance,
                node: node.clone(),
                user: actor.user.clone(),
                values: values.clone(),
            });
            // Fields extracted from a submitted upload are bound alongside it.
            let mut bind = VariableMap::new();
            for (_, value) in values.iter() {
                if let Value::Document(d) = value {
                    if let Some(info) = e.state.documents.get(d.digest_hex()) {
                        bind.extend(&info.fields);
                    }
                }
            }
            bind.extend(&values);
            for (name, value) in bind.iter() {
                e.emit(Event::VariableSet {
                    instance,
                    name: name.clone(),
                    value: value.clone(),
                });
            }
            e.leave(instance, token)?;
            e.advance(instance)?;
            Ok(e.state.instances[&instance].status)
        })
    }

    // ---- jobs -------------------------------------------------------------

    fn pending_job(&self, id: JobId) -> Result<&Job> {
        let job = self
            .state
            .jobs
            .get(&id)
            .ok_or_else(|| EngineError::NotFound(format!("job {id}")))?;
        if job.status != JobStatus::Pending {
            return Err(EngineError::Conflict(format!("job {id} is {:?}", job.status)));
        }
        Ok(job)
    }

    /// Delivers a successful service-call result. `alerts` become
    /// connector notifications.
    pub fn complete_job(
        &mut self,
        id: JobId,
        outputs: VariableMap,
        alerts: Vec<(Recipient, Severity, String)>,
        now: DateTime<Utc>,
    ) -> Result<()> {
        let job = self.pending_job(id)?.clone();
        let JobKind::ServiceCall {
            instance,
            token,
            node,
            connector,
            ..
        } = &job.kind
        else {
            return Err(EngineError::Conflict(format!("job {id} is a timer")));
        };
        let (instance, token) = (*instance, *token);
        let graph = self
            .state
            .instance_graph(instance)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("instance {instance}")))?;
        let mappings = match graph.node(node).map(|n| &n.node.kind) {
            Some(NodeKind::ServiceTask { outputs, .. }) => outputs.clone(),
            _ => Vec::new(),
        };
        self.run(now, |e| {
            e.emit(Event::JobCompleted {
                job: id,
                instance: Some(instance),
                connector: Some(connector.clone()),
                attempt: job.attempts + 1,
                outputs: outputs.clone(),
            });
            for (recipient, severity, body) in alerts {
                let n = e.next_notification();
                e.emit(Event::NotificationEmitted {
                    notification: n,
                    instance: Some(instance),
                    recipient,
                    severity,
                    source: NotificationSource::Connector,
                    body,
                });
            }
            let mut bind = VariableMap::new();
            if mappings.is_empty() {
                bind = outputs.clone();
            } else {
                for m in &mappings {
                    match outputs.get(&m.output) {
                        Some(v) => {
                            let _ = bind.insert(m.variable.clone(), v.clone());
                        }
                        None => {
                            e.fail(
                                instance,
                                format!("connector '{connector}' returned no output '{}'", m.output),
                            );
                            return Ok(());
                        }
                    }
                }
            }
            for (name, value) in bind.iter() {
                e.emit(Event::VariableSet {
                    instance,
                    name: name.clone(),
                    value: value.clone(),
                });
            }
            e.leave(instance, token)?;
            e.advance(instance)
        })
    }

    /// Records a failed attempt. Returns the next due time, or `None` if the
    /// job has run out of attempts (its instance is then failed).
    pub fn fail_job(&mut self, id: JobId, error: &str, now: DateTime<Utc>) -> Result<Option<DateTime<Utc>>> {
        let job = self.pending_job(id)?.clone();
        let attempt = job.attempts + 1;
        let next_due = (attempt < job.max_attempts).then(|| self.retry.next_due(job.due_at, attempt));
        self.run(now, |e| {
            e.emit(Event::JobFailed {
                job: id,
                instance: job.instance(),
                attempt,
                error: error.to_string(),
                next_due,
            });
            if next_due.is_none() {
                if let JobKind::ServiceCall {
                    instance, connector, ..
                } = &job.kind
                {
                    e.fail(
                        *instance,
                        format!("connector '{connector}' failed after {attempt} attempts: {error}"),
                    );
                }
            }
            Ok(next_due)
        })
    }

    /// Runs a due timer: starts an instance of the armed version at the
    /// timer's start event and arms the next firing.
    pub fn fire_timer(&mut self, id: JobId, now: DateTime<Utc>) -> Result<Option<InstanceId>> {
        let job = self.pending_job(id)?.clone();
        let JobKind::TimerFire {
            definition_id,
            version,
            node,
            fire_index,
            deployed_at,
        } = &job.kind
        else {
            return Err(EngineError::Conflict(format!("job {id} is not a timer")));
        };
        let def = self
            .state
            .definitions
            .get(definition_id)
            .and_then(|v| v.iter().find(|d| d.definition.version == *version))
            .map(|d| d.definition.clone())
            .ok_or_else(|| EngineError::NotFound(format!("definition '{definition_id}' v{version}")))?;
        let latest = self.state.latest(definition_id).map(|d| d.definition.version);
        self.run(now, |e| {
            if latest != Some(*version) {
                e.emit(Event::JobCancelled {
                    job: id,
                    reason: "superseded".into(),
                });
                return Ok(None);
            }
            e.emit(Event::JobCompleted {
                job: id,
                instance: None,
                connector: None,
                attempt: job.attempts + 1,
                outputs: VariableMap::new(),
            });
            let timer = def.timer_starts().find(|(n, _)| n.id == *node).map(|(_, t)| t.clone());
            if let Some(due) = timer.and_then(|t| t.firing(*deployed_at, fire_index + 1)) {
                let next = e.next_job();
                e.emit(Event::JobEnqueued {
                    job: next,
                    kind: JobKind::TimerFire {
                        definition_id: definition_id.clone(),
                        version: *version,
                        node: node.clone(),
                        fire_index: fire_index + 1,
                        deployed_at: *deployed_at,
                    },
                    due_at: due,
                    max_attempts: 1,
                });
            }
            let trigger = StartTrigger::Timer {
                node: node.clone(),
                job: id,
            };
            let instance = e.begin(&def, trigger, vec![node.clone()], VariableMap::new())?;
            Ok(Some(instance))
        })
    }

    /// Pending jobs due at or before `now`, earliest first.
    pub fn due_jobs(&self, now: DateTime<Utc>) -> Vec<Job> {
        let mut jobs: Vec<Job> = self
            .state
            .pending_jobs()
            .filter(|j| j.due_at <= now)
            .cloned()
            .collect();
        jobs.sort_by_key(|j| (j.due_at, j.id));
        jobs
    }

    pub fn next_due(&self) -> Option<DateTime<Utc>> {
        self.state.pending_jobs().map(|j| j.due_at).min()
    }

    // ---- notifications, contacts, views, documents -------------------------

    pub fn notify(
        &mut self,
        recipient: Recipient,
        severity: Severity,
        source: NotificationSource,
        body: &str,
        instance: Option<InstanceId>,
        now: DateTime<Utc>,
    ) -> Result<NotificationId> {
        self.run(now, |e| {
            let id = e.next_notification();
            e.emit(Event::NotificationEmitted {
                notification: id,
                instance,
                recipient,
                severity,
                source,
                body: body.to_string(),
            });
            Ok(id)
        })
    }

    fn visible_notification(&self, id: NotificationId, actor: &Actor) -> Result<&Notification> {
        let n = self
            .state
            .notifications
            .get(&id)
            .ok_or_else(|| EngineError::NotFound(format!("notification {id}")))?;
        if !actor.can_see(&n.recipient) {
            return Err(EngineError::Forbidden(format!("notification {id} is not addressed to you")));
        }
        Ok(n)
    }

    pub fn mark_read(&mut self, id: NotificationId, actor: &Actor, now: DateTime<Utc>) -> Result<()> {
        let n = self.visible_notification(id, actor)?;
        if n.read_by.contains(&actor.user) {
            return Ok(());
        }
        self.run(now, |e| {
            e.emit(Event::NotificationRead {
                notification: id,
                user: actor.user.clone(),
            });
            Ok(())
        })
    }

    /// Forwards to entries of the caller's contact list, identified by
    /// address. Already-forwarded contacts are skipped.
    pub fn forward(
        &mut self,
        id: NotificationId,
        addresses: &[String],
        actor: &Actor,
        now: DateTime<Utc>,
    ) -> Result<Notification> {
        let n = self.visible_notification(id, actor)?;
        let mine = self.state.contacts.get(&actor.user).cloned().unwrap_or_default();
        let mut errors = Vec::new();
        let mut fresh: Vec<Contact> = Vec::new();
        for addr in addresses {
            match mine.iter().find(|c| c.address == *addr) {
                None => errors.push(FieldError {
                    field: addr.clone(),
                    message: "not in your contact list".into(),
                }),
                Some(c) => {
                    if !n.forwarded_to.iter().any(|f| f.address == c.address)
                        && !fresh.iter().any(|f| f.address == c.address)
                    {
                        fresh.push(c.clone());
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(EngineError::validation("unknown contacts", errors));
        }
        if !fresh.is_empty() {
            for c in &fresh {
                log::info!("forwarding notification {id} to {} <{}>", c.name, c.address);
            }
            self.run(now, |e| {
                e.emit(Event::NotificationForwarded {
                    notification: id,
                    by: actor.user.clone(),
                    contacts: fresh,
                });
                Ok(())
            })?;
        }
        Ok(self.state.notifications[&id].clone())
    }

    pub fn add_contact(&mut self, actor: &Actor, contact: Contact, now: DateTime<Utc>) -> Result<()> {
        if contact.address.trim().is_empty() || contact.name.trim().is_empty() {
            return Err(EngineError::validation(
                "contact needs a name and an address",
                vec![FieldError {
                    field: "address".into(),
                    message: "required".into(),
                }],
            ));
        }
        if let Some(existing) = self
            .state
            .contacts
            .get(&actor.user)
            .and_then(|cs| cs.iter().find(|c| c.address == contact.address))
        {
            return if *existing == contact {
                Ok(())
            } else {
                Err(EngineError::Conflict(format!(
                    "address {} already saved as '{}'",
                    contact.address, existing.name
                )))
            };
        }
        self.run(now, |e| {
            e.emit(Event::ContactAdded {
                user: actor.user.clone(),
                contact,
            });
            Ok(())
        })
    }

    pub fn save_view(&mut self, view: ExternalDataView, now: DateTime<Utc>) -> Result<()> {
        let current = self.state.views.get(&view.owner).and_then(|v| v.get(&view.view_id));
        if current == Some(&view) {
            return Ok(());
        }
        self.run(now, |e| {
            e.emit(Event::ViewSaved { view });
            Ok(())
        })
    }

    /// Records an ingested document. Re-ingesting known bytes is a no-op.
    pub fn register_document(&mut self, info: DocumentInfo, now: DateTime<Utc>) -> Result<DocumentInfo> {
        if let Some(existing) = self.state.documents.get(info.document.digest_hex()) {
            return Ok(existing.clone());
        }
        let key = info.document.digest_hex().to_string();
        self.run(now, |e| {
            e.emit(Event::FileIngested {
                document: info.document,
                kind: info.kind,
                size: info.size,
                fields: info.fields,
                metadata: info.metadata,
                by: info.ingested_by,
            });
            Ok(e.state.documents[&key].clone())
        })
    }

    /// Journal records matching `filter`, in sequence order.
    pub fn query_history(&self, filter: &HistoryFilter) -> Vec<&EventRecord> {
        self.journal.records().iter().filter(|r| filter.matches(r)).collect()
    }
}
