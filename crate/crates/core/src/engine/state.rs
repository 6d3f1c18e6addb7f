use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::*;
use crate::model::{FormField, Graph, NodeKind, ProcessDefinition};
use crate::role::Role;
use crate::value::{DocRef, VariableMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Running,
    Completed,
    Terminated,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum Wait {
    /// Just arrived; the engine acts on it during the next advance pass.
    Ready,
    Task(TaskId),
    Job(JobId),
    Children,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub id: TokenId,
    pub node: String,
    /// The sub-process token this one runs under; `None` at the top level.
    pub parent: Option<TokenId>,
    /// Flow the token arrived by, used to match parallel joins.
    pub via: Option<String>,
    pub wait: Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityState {
    Active,
    Completed,
    Cancelled,
}

/// One activation of a task or sub-process, kept for progress reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub node: String,
    pub name: String,
    pub kind: String,
    pub token: TokenId,
    pub state: ActivityState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: InstanceId,
    pub definition_id: String,
    pub version: u32,
    pub status: InstanceStatus,
    pub trigger: StartTrigger,
    pub tokens: BTreeMap<TokenId, Token>,
    pub variables: VariableMap,
    pub activities: Vec<Activity>,
    pub created_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub failure: Option<String>,
}

impl Instance {
    /// Completed activities over activated ones; 1.0 when nothing was activated
    /// and the instance has finished.
    pub fn progress(&self) -> f64 {
        let total = self.activities.len();
        if total == 0 {
            return if self.status == InstanceStatus::Running { 0.0 } else { 1.0 };
        }
        let done = self
            .activities
            .iter()
            .filter(|a| a.state == ActivityState::Completed)
            .count();
        done as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Created,
    Assigned,
    Completed,
    Cancelled,
}

impl TaskState {
    pub fn is_pending(self) -> bool {
        matches!(self, TaskState::Created | TaskState::Assigned)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub instance: InstanceId,
    pub token: TokenId,
    pub node: String,
    pub name: String,
    pub candidate_role: Role,
    pub assignee: Option<String>,
    pub state: TaskState,
    pub form_fields: Vec<FormField>,
    pub submitted_values: Option<VariableMap>,
    pub completed_by: Option<String>,
    pub created_at: DateTime<Utc>,
    pub completed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Completed,
    Failed,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub kind: JobKind,
    pub due_at: DateTime<Utc>,
    /// Due time of every attempt so far, followed by the next one if pending.
    pub schedule: Vec<DateTime<Utc>>,
    pub attempts: u32,
    pub max_attempts: u32,
    pub status: JobStatus,
    pub last_error: Option<String>,
}

impl Job {
    pub fn instance(&self) -> Option<InstanceId> {
        match &self.kind {
            JobKind::ServiceCall { instance, .. } => Some(*instance),
            JobKind::TimerFire { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: NotificationId,
    pub instance: Option<InstanceId>,
    pub recipient: Recipient,
    pub severity: Severity,
    pub source: NotificationSource,
    pub body: String,
    pub forwarded_to: Vec<Contact>,
    pub read_by: BTreeSet<String>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub definition: Arc<ProcessDefinition>,
    pub deployed_at: DateTime<Utc>,
    pub deployed_by: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentInfo {
    pub document: DocRef,
    pub kind: String,
    pub size: u64,
    pub fields: VariableMap,
    pub metadata: BTreeMap<String, String>,
    pub ingested_at: DateTime<Utc>,
    pub ingested_by: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub instance: u64,
    pub token: u64,
    pub task: u64,
    pub job: u64,
    pub notification: u64,
}

/// Everything reconstructable from the journal. Its JSON encoding is the
/// canonical snapshot compared byte for byte by replay checks.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct State {
    pub last_seq: u64,
    pub counters: Counters,
    pub definitions: BTreeMap<String, Vec<Deployment>>,
    pub instances: BTreeMap<InstanceId, Instance>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub jobs: BTreeMap<JobId, Job>,
    pub notifications: BTreeMap<NotificationId, Notification>,
    pub contacts: BTreeMap<String, Vec<Contact>>,
    pub views: BTreeMap<String, BTreeMap<String, ExternalDataView>>,
    pub documents: BTreeMap<String, DocumentInfo>,
    #[serde(skip)]
    graphs: BTreeMap<(String, u32), Arc<Graph>>,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl State {
    pub fn canonical(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("state serializes")
    }

    /// Rebuilds derived lookup tables after deserializing a snapshot.
    pub fn reindex(&mut self) {
        self.graphs.clear();
        for deployments in self.definitions.values() {
            for d in deployments {
                let key = (d.definition.id.clone(), d.definition.version);
                self.graphs.insert(key, Arc::new(d.definition.graph()));
            }
        }
    }

    pub fn graph(&self, id: &str, version: u32) -> Option<&Arc<Graph>> {
        self.graphs.get(&(id.to_string(), version))
    }

    pub fn latest(&self, id: &str) -> Option<&Deployment> {
        self.definitions.get(id).and_then(|v| v.last())
    }

    pub fn instance_graph(&self, instance: InstanceId) -> Option<&Arc<Graph>> {
        let inst = self.instances.get(&instance)?;
        self.graph(&inst.definition_id, inst.version)
    }

    pub fn pending_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values().filter(|t| t.state.is_pending())
    }

    pub fn pending_jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.values().filter(|j| j.status == JobStatus::Pending)
    }

    pub fn apply(&mut self, record: &EventRecord) {
        self.last_seq = record.seq;
        let at = record.at;
        match &record.event {
            Event::DefinitionDeployed { definition, by } => {
                let key = (definition.id.clone(), definition.version);
                self.graphs.insert(key, Arc::new(definition.graph()));
                self.definitions
                    .entry(definition.id.clone())
                    .or_default()
                    .push(Deployment {
                        definition: definition.clone(),
                        deployed_at: at,
                        deployed_by: by.clone(),
                    });
            }
            Event::InstanceStarted {
                instance,
                definition_id,
                version,
                trigger,
                variables,
            } => {
                self.counters.instance = self.counters.instance.max(instance.0);
                self.instances.insert(
                    *instance,
                    Instance {
                        id: *instance,
                        definition_id: definition_id.clone(),
                        version: *version,
                        status: InstanceStatus::Running,
                        trigger: trigger.clone(),
                        tokens: BTreeMap::new(),
                        variables: variables.clone(),
                        activities: Vec::new(),
                        created_at: at,
                        ended_at: None,
                        failure: None,
                    },
                );
            }
            Event::TokenCreated {
                instance,
                token,
                node,
                parent,
                via,
            } => {
                self.counters.token = self.counters.token.max(token.0);
                let t = Token {
                    id: *token,
                    node: node.clone(),
                    parent: *parent,
                    via: via.clone(),
                    wait: Wait::Ready,
                };
                self.arrive(*instance, &t);
                if let Some(inst) = self.instances.get_mut(instance) {
                    inst.tokens.insert(*token, t);
                }
            }
            Event::TokenMoved {
                instance,
                token,
                flow,
                to,
                ..
            } => {
                let moved = self.instances.get_mut(instance).and_then(|inst| {
                    let t = inst.tokens.get_mut(token)?;
                    t.node = to.clone();
                    t.via = Some(flow.clone());
                    t.wait = Wait::Ready;
                    Some(t.clone())
                });
                if let Some(t) = moved {
                    self.arrive(*instance, &t);
                }
            }
            Event::TokenConsumed { instance, token, .. } => {
                if let Some(inst) = self.instances.get_mut(instance) {
                    inst.tokens.remove(token);
                }
            }
            Event::SubprocessEntered { instance, token, .. } => {
                self.set_wait(*instance, *token, Wait::Children);
            }
            Event::SubprocessCompleted { instance, token, node } => {
                self.set_wait(*instance, *token, Wait::Ready);
                self.finish_activity(*instance, *token, node);
            }
            Event::VariableSet { instance, name, value } => {
                if let Some(inst) = self.instances.get_mut(instance) {
                    let _ = inst.variables.insert(name.clone(), value.clone());
                }
            }
            Event::TaskCreated {
                task,
                instance,
                token,
                node,
                name,
                candidate_role,
                form_fields,
            } => {
                self.counters.task = self.counters.task.max(task.0);
                self.set_wait(*instance, *token, Wait::Task(*task));
                self.tasks.insert(
                    *task,
                    Task {
                        id: *task,
                        instance: *instance,
                        token: *token,
                        node: node.clone(),
                        name: name.clone(),
                        candidate_role: *candidate_role,
                        assignee: None,
                        state: TaskState::Created,
                        form_fields: form_fields.clone(),
                        submitted_values: None,
                        completed_by: None,
                        created_at: at,
                        completed_at: None,
                    },
                );
            }
            Event::TaskAssigned { task, user, .. } => {
                if let Some(t) = self.tasks.get_mut(task) {
                    t.assignee = Some(user.clone());
                    t.state = TaskState::Assigned;
                }
            }
            Event::TaskCompleted {
                task,
                instance,
                user,
                values,
                ..
            } => {
                let mut finished = None;
                if let Some(t) = self.tasks.get_mut(task) {
                    t.state = TaskState::Completed;
                    t.submitted_values = Some(values.clone());
                    t.completed_by = Some(user.clone());
                    t.completed_at = Some(at);
                    finished = Some((t.token, t.node.clone()));
                }
                if let Some((token, node)) = finished {
                    self.set_wait(*instance, token, Wait::Ready);
                    self.finish_activity(*instance, token, &node);
                }
            }
            Event::JobEnqueued {
                job,
                kind,
                due_at,
                max_attempts,
            } => {
                self.counters.job = self.counters.job.max(job.0);
                if let JobKind::ServiceCall { instance, token, .. } = kind {
                    self.set_wait(*instance, *token, Wait::Job(*job));
                }
                self.jobs.insert(
                    *job,
                    Job {
                        id: *job,
                        kind: kind.clone(),
                        due_at: *due_at,
                        schedule: vec![*due_at],
                        attempts: 0,
                        max_attempts: *max_attempts,
                        status: JobStatus::Pending,
                        last_error: None,
                    },
                );
            }
            Event::JobFailed {
                job,
                attempt,
                error,
                next_due,
                ..
            } => {
                if let Some(j) = self.jobs.get_mut(job) {
                    j.attempts = *attempt;
                    j.last_error = Some(error.clone());
                    match next_due {
                        Some(due) => {
                            j.due_at = *due;
                            j.schedule.push(*due);
                        }
                        None => j.status = JobStatus::Failed,
                    }
                }
            }
            Event::JobCompleted { job, attempt, .. } => {
                let mut resumed = None;
                if let Some(j) = self.jobs.get_mut(job) {
                    j.attempts = *attempt;
                    j.status = JobStatus::Completed;
                    if let JobKind::ServiceCall { instance, token, node, .. } = &j.kind {
                        resumed = Some((*instance, *token, node.clone()));
                    }
                }
                if let Some((instance, token, node)) = resumed {
                    self.set_wait(instance, token, Wait::Ready);
                    self.finish_activity(instance, token, &node);
                }
            }
            Event::JobCancelled { job, .. } => {
                if let Some(j) = self.jobs.get_mut(job) {
                    j.status = JobStatus::Cancelled;
                }
            }
            Event::InstanceCompleted { instance } => {
                if let Some(inst) = self.instances.get_mut(instance) {
                    inst.status = InstanceStatus::Completed;
                    inst.ended_at = Some(at);
                }
            }
            Event::InstanceFailed { instance, reason } => {
                self.halt(*instance, InstanceStatus::Failed, Some(reason.clone()), at);
            }
            Event::InstanceTerminated { instance, .. } => {
                self.halt(*instance, InstanceStatus::Terminated, None, at);
            }
            Event::NotificationEmitted {
                notification,
                instance,
                recipient,
                severity,
                source,
                body,
            } => {
                self.counters.notification = self.counters.notification.max(notification.0);
                self.notifications.insert(
                    *notification,
                    Notification {
                        id: *notification,
                        instance: *instance,
                        recipient: recipient.clone(),
                        severity: *severity,
                        source: *source,
                        body: body.clone(),
                        forwarded_to: Vec::new(),
                        read_by: BTreeSet::new(),
                        at,
                    },
                );
            }
            Event::NotificationForwarded {
                notification,
                contacts,
                ..
            } => {
                if let Some(n) = self.notifications.get_mut(notification) {
                    for c in contacts {
                        if !n.forwarded_to.iter().any(|x| x.address == c.address) {
                            n.forwarded_to.push(c.clone());
                        }
                    }
                }
            }
            Event::NotificationRead { notification, user } => {
                if let Some(n) = self.notifications.get_mut(notification) {
                    n.read_by.insert(user.clone());
                }
            }
            Event::ContactAdded { user, contact } => {
                self.contacts.entry(user.clone()).or_default().push(contact.clone());
            }
            Event::ViewSaved { view } => {
                self.views
                    .entry(view.owner.clone())
                    .or_default()
                    .insert(view.view_id.clone(), view.clone());
            }
            Event::FileIngested {
                document,
                kind,
                size,
                fields,
                metadata,
                by,
            } => {
                self.documents
                    .entry(document.digest_hex().to_string())
                    .or_insert_with(|| DocumentInfo {
                        document: document.clone(),
                        kind: kind.clone(),
                        size: *size,
                        fields: fields.clone(),
                        metadata: metadata.clone(),
                        ingested_at: at,
                        ingested_by: by.clone(),
                    });
            }
        }
    }

    fn set_wait(&mut self, instance: InstanceId, token: TokenId, wait: Wait) {
        if let Some(t) = self
            .instances
            .get_mut(&instance)
            .and_then(|i| i.tokens.get_mut(&token))
        {
            t.wait = wait;
        }
    }

    fn arrive(&mut self, instance: InstanceId, token: &Token) {
        let Some(graph) = self.instance_graph(instance).cloned() else { return };
        let Some(info) = graph.node(&token.node) else { return };
        if !info.node.kind.is_activity() {
            return;
        }
        if let Some(inst) = self.instances.get_mut(&instance) {
            inst.activities.push(Activity {
                node: token.node.clone(),
                name: info.node.display_name().to_string(),
                kind: info.node.kind.label().to_string(),
                token: token.id,
                state: ActivityState::Active,
            });
        }
    }

    fn finish_activity(&mut self, instance: InstanceId, token: TokenId, node: &str) {
        if let Some(inst) = self.instances.get_mut(&instance) {
            if let Some(a) = inst
                .activities
                .iter_mut()
                .rev()
                .find(|a| a.token == token && a.node == node && a.state == ActivityState::Active)
            {
                a.state = ActivityState::Completed;
            }
        }
    }

    /// Failure and termination are terminal: tokens are dropped and any
    /// outstanding work for the instance is cancelled.
    fn halt(
        &mut self,
        instance: InstanceId,
        status: InstanceStatus,
        failure: Option<String>,
        at: DateTime<Utc>,
    ) {
        let Some(inst) = self.instances.get_mut(&instance) else { return };
        inst.status = status;
        inst.failure = failure;
        inst.ended_at = Some(at);
        inst.tokens.clear();
        for a in &mut inst.activities {
            if a.state == ActivityState::Active {
                a.state = ActivityState::Cancelled;
            }
        }
        for t in self.tasks.values_mut() {
            if t.instance == instance && t.state.is_pending() {
                t.state = TaskState::Cancelled;
            }
        }
        for j in self.jobs.values_mut() {
            if j.instance() == Some(instance) && j.status == JobStatus::Pending {
                j.status = JobStatus::Cancelled;
            }
        }
    }
}

pub(crate) fn is_join(graph: &Graph, node: &str) -> bool {
    graph
        .node(node)
        .is_some_and(|n| matches!(n.node.kind, NodeKind::ParallelGateway) && n.incoming.len() > 1)
}
