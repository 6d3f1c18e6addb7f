//! Transport-independent operations behind every endpoint. The HTTP router
//! and the command-line client both go through here, so access checks are
//! the same on either path.

use std::collections::BTreeMap;
use std::sync::Arc;

use agriflow_core::engine::{
    ActivityState, Actor, Contact, DocumentInfo, EventRecord, ExternalDataView, HistoryFilter, Instance,
    InstanceId, InstanceStatus, Notification, NotificationId, Task, TaskId, TaskState, ViewEntry,
};
use agriflow_core::model::FormField;
use agriflow_core::platform::Platform;
use agriflow_core::role::Role;
use agriflow_core::value::{Value, VariableMap};
use agriflow_geo::{IndexKind, RenderMode, Rendered};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::{CatalogEntry, ServiceConfig, UserConfig};
use crate::error::{ApiError, ApiResult};
use crate::rbac::{authorize, Endpoint};

#[derive(Debug, Clone)]
pub struct Caller {
    pub user: UserConfig,
    pub actor: Actor,
}

impl Caller {
    fn of(user: &UserConfig) -> Caller {
        Caller {
            user: user.clone(),
            actor: Actor::new(&user.id, user.roles.iter().copied()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhoAmI {
    pub user: String,
    pub name: String,
    pub roles: Vec<Role>,
    pub groups: Vec<String>,
    /// Endpoints this caller may reach, as `METHOD /path`.
    pub endpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub id: TaskId,
    pub instance: InstanceId,
    pub definition_id: String,
    pub node: String,
    pub name: String,
    pub candidate_role: Role,
    pub assignee: Option<String>,
    pub state: TaskState,
    pub form: Vec<FormField>,
    pub created_at: DateTime<Utc>,
    /// The instance's variables at the time of the request.
    pub context: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub task: TaskId,
    pub instance: InstanceId,
    pub instance_status: InstanceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskChip {
    pub id: TaskId,
    pub node: String,
    pub name: String,
    pub candidate_role: Role,
    pub state: TaskState,
    pub assignee: Option<String>,
    pub completed_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityChip {
    pub node: String,
    pub name: String,
    pub kind: String,
    pub state: ActivityState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessOverview {
    pub instance: InstanceId,
    pub definition_id: String,
    pub definition_name: String,
    pub version: u32,
    pub status: InstanceStatus,
    pub progress: f64,
    pub created_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub failure: Option<String>,
    pub tasks: Vec<TaskChip>,
    pub activities: Vec<ActivityChip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDetail {
    #[serde(flatten)]
    pub overview: ProcessOverview,
    pub variables: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionSummary {
    pub id: String,
    pub name: String,
    pub version: u32,
    pub deployed_at: DateTime<Utc>,
    pub deployed_by: String,
    pub nodes: usize,
    pub sub_processes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewBody {
    #[serde(default)]
    pub title: String,
    pub entries: Vec<ViewEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StartRequest {
    pub definition_id: String,
    #[serde(default)]
    pub variables: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryQuery {
    pub instance: Option<u64>,
    pub kind: Option<String>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
    pub field: Option<String>,
    pub value: Option<String>,
}

pub fn variables_from_json(map: &serde_json::Map<String, serde_json::Value>) -> ApiResult<VariableMap> {
    let mut out = VariableMap::new();
    let mut bad = Vec::new();
    for (k, v) in map {
        let ok = match Value::from_json(v) {
            Some(value) => out.insert(k.clone(), value).is_ok(),
            None => false,
        };
        if !ok {
            bad.push(agriflow_core::engine::FieldError {
                field: k.clone(),
                message: "expected a boolean, number or string".into(),
            });
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(ApiError::invalid("unsupported variable values", &bad))
    }
}

pub fn parse_index(s: &str) -> ApiResult<IndexKind> {
    IndexKind::ALL
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| ApiError::not_found(format!("unknown index '{s}'; expected NDVI, NDMI or OSAVI")))
}

pub fn parse_mode(s: Option<&str>) -> ApiResult<RenderMode> {
    match s {
        None | Some("per_cell") => Ok(RenderMode::PerCell),
        Some("parcel_mean") => Ok(RenderMode::ParcelMean),
        Some(other) => Err(ApiError::bad_request(format!(
            "unknown mode '{other}'; expected per_cell or parcel_mean"
        ))),
    }
}

#[derive(Clone)]
pub struct Api {
    platform: Arc<Platform>,
    config: Arc<ServiceConfig>,
}

impl Api {
    /// Wires the service to a platform and merges configured contacts into
    /// the journaled contact lists.
    pub fn new(platform: Arc<Platform>, config: ServiceConfig) -> ApiResult<Api> {
        let now = platform.now();
        {
            let mut engine = platform.engine();
            for u in &config.users {
                let actor = Actor::new(&u.id, u.roles.iter().copied());
                for c in &u.contacts {
                    match engine.add_contact(&actor, c.clone(), now) {
                        Ok(()) => {}
                        // Renamed since it was first saved; the journal wins.
                        Err(agriflow_core::engine::EngineError::Conflict(m)) => log::warn!("{m}"),
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        Ok(Api {
            platform,
            config: Arc::new(config),
        })
    }

    pub fn platform(&self) -> &Arc<Platform> {
        &self.platform
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn authenticate(&self, bearer: Option<&str>) -> ApiResult<Caller> {
        let token = bearer.ok_or_else(|| ApiError::unauthenticated("missing bearer token"))?;
        self.config
            .user_by_token(token)
            .map(Caller::of)
            .ok_or_else(|| ApiError::unauthenticated("unknown bearer token"))
    }

    /// Looks a user up by id; for trusted local tooling.
    pub fn caller(&self, user: &str) -> ApiResult<Caller> {
        self.config
            .user(user)
            .map(Caller::of)
            .ok_or_else(|| ApiError::unauthenticated(&format!("unknown user '{user}'")))
    }

    pub fn whoami(&self, c: &Caller) -> WhoAmI {
        WhoAmI {
            user: c.user.id.clone(),
            name: c.user.name.clone(),
            roles: c.user.roles.iter().copied().collect(),
            groups: c.user.groups.iter().cloned().collect(),
            endpoints: Endpoint::ALL
                .into_iter()
                .filter(|e| e.admits(&c.actor.roles))
                .map(|e| {
                    let (m, p) = e.route();
                    format!("{m} {p}")
                })
                .collect(),
        }
    }

    fn task_view(&self, t: &Task, inst: Option<&Instance>) -> TaskView {
        TaskView {
            id: t.id,
            instance: t.instance,
            definition_id: inst.map(|i| i.definition_id.clone()).unwrap_or_default(),
            node: t.node.clone(),
            name: t.name.clone(),
            candidate_role: t.candidate_role,
            assignee: t.assignee.clone(),
            state: t.state,
            form: t.form_fields.clone(),
            created_at: t.created_at,
            context: inst.map(|i| i.variables.to_json()).unwrap_or_default(),
        }
    }

    pub fn tasks(&self, c: &Caller) -> ApiResult<Vec<TaskView>> {
        authorize(c, Endpoint::ListTasks)?;
        let engine = self.platform.engine();
        let s = engine.state();
        Ok(s.pending_tasks()
            .filter(|t| c.actor.has(t.candidate_role) || t.assignee.as_deref() == Some(&c.actor.user))
            .map(|t| self.task_view(t, s.instances.get(&t.instance)))
            .collect())
    }

    pub fn claim(&self, c: &Caller, id: TaskId) -> ApiResult<TaskView> {
        authorize(c, Endpoint::ClaimTask)?;
        self.platform.claim(id, &c.actor)?;
        let engine = self.platform.engine();
        let s = engine.state();
        let t = &s.tasks[&id];
        Ok(self.task_view(t, s.instances.get(&t.instance)))
    }

    pub fn complete(
        &self,
        c: &Caller,
        id: TaskId,
        form: &serde_json::Map<String, serde_json::Value>,
    ) -> ApiResult<Completion> {
        authorize(c, Endpoint::CompleteTask)?;
        let values = variables_from_json(form)?;
        let instance_status = self.platform.complete(id, values, &c.actor)?;
        let instance = self.platform.engine().state().tasks[&id].instance;
        Ok(Completion {
            task: id,
            instance,
            instance_status,
        })
    }

    pub fn notifications(&self, c: &Caller) -> ApiResult<Vec<Notification>> {
        authorize(c, Endpoint::ListNotifications)?;
        let engine = self.platform.engine();
        Ok(engine
            .state()
            .notifications
            .values()
            .filter(|n| c.actor.can_see(&n.recipient))
            .cloned()
            .collect())
    }

    pub fn mark_read(&self, c: &Caller, id: NotificationId) -> ApiResult<Notification> {
        authorize(c, Endpoint::ReadNotification)?;
        let now = self.platform.now();
        let mut engine = self.platform.engine();
        engine.mark_read(id, &c.actor, now)?;
        Ok(engine.state().notifications[&id].clone())
    }

    pub fn forward(&self, c: &Caller, id: NotificationId, addresses: &[String]) -> ApiResult<Notification> {
        authorize(c, Endpoint::ForwardNotification)?;
        if addresses.is_empty() {
            return Err(ApiError::invalid(
                "no contacts given",
                &[agriflow_core::engine::FieldError {
                    field: "contacts".into(),
                    message: "at least one address is required".into(),
                }],
            ));
        }
        let now = self.platform.now();
        Ok(self.platform.engine().forward(id, addresses, &c.actor, now)?)
    }

    pub fn contacts(&self, c: &Caller) -> ApiResult<Vec<Contact>> {
        authorize(c, Endpoint::ListContacts)?;
        Ok(self
            .platform
            .engine()
            .state()
            .contacts
            .get(&c.actor.user)
            .cloned()
            .unwrap_or_default())
    }

    pub fn add_contact(&self, c: &Caller, contact: Contact) -> ApiResult<Vec<Contact>> {
        authorize(c, Endpoint::AddContact)?;
        let now = self.platform.now();
        self.platform.engine().add_contact(&c.actor, contact, now)?;
        self.contacts(c)
    }

    /// Field workers only see instances that involve their role or them.
    fn sees_instance(c: &Caller, tasks: &[&Task]) -> bool {
        if c.actor.has(Role::FarmManager) || c.actor.has(Role::Viticulturist) {
            return true;
        }
        tasks.iter().any(|t| {
            c.actor.has(t.candidate_role)
                || t.assignee.as_deref() == Some(&c.actor.user)
                || t.completed_by.as_deref() == Some(&c.actor.user)
        })
    }

    fn overview(&self, inst: &Instance, tasks: &[&Task], name: &str) -> ProcessOverview {
        ProcessOverview {
            instance: inst.id,
            definition_id: inst.definition_id.clone(),
            definition_name: name.to_string(),
            version: inst.version,
            status: inst.status,
            progress: inst.progress(),
            created_at: inst.created_at,
            ended_at: inst.ended_at,
            failure: inst.failure.clone(),
            tasks: tasks
                .iter()
                .map(|t| TaskChip {
                    id: t.id,
                    node: t.node.clone(),
                    name: t.name.clone(),
                    candidate_role: t.candidate_role,
                    state: t.state,
                    assignee: t.assignee.clone(),
                    completed_by: t.completed_by.clone(),
                })
                .collect(),
            activities: inst
                .activities
                .iter()
                .map(|a| ActivityChip {
                    node: a.node.clone(),
                    name: a.name.clone(),
                    kind: a.kind.clone(),
                    state: a.state,
                })
                .collect(),
        }
    }

    fn visible_instances<T>(&self, c: &Caller, pick: impl Fn(&Instance, &[&Task], &str) -> Option<T>) -> Vec<T> {
        let engine = self.platform.engine();
        let s = engine.state();
        let mut by_instance: BTreeMap<InstanceId, Vec<&Task>> = BTreeMap::new();
        for t in s.tasks.values() {
            by_instance.entry(t.instance).or_default().push(t);
        }
        s.instances
            .values()
            .filter_map(|inst| {
                let tasks = by_instance.get(&inst.id).map(Vec::as_slice).unwrap_or(&[]);
                if !Self::sees_instance(c, tasks) {
                    return None;
                }
                let name = s
                    .graph(&inst.definition_id, inst.version)
                    .map(|g| g.definition().name.clone())
                    .unwrap_or_default();
                pick(inst, tasks, &name)
            })
            .collect()
    }

    pub fn monitor(&self, c: &Caller) -> ApiResult<Vec<ProcessOverview>> {
        authorize(c, Endpoint::Monitor)?;
        Ok(self.visible_instances(c, |inst, tasks, name| Some(self.overview(inst, tasks, name))))
    }

    pub fn instance(&self, c: &Caller, id: InstanceId) -> ApiResult<InstanceDetail> {
        authorize(c, Endpoint::InstanceDetail)?;
        if !self.platform.engine().state().instances.contains_key(&id) {
            return Err(ApiError::not_found(format!("instance {id}")));
        }
        self.visible_instances(c, |inst, tasks, name| {
            (inst.id == id).then(|| InstanceDetail {
                overview: self.overview(inst, tasks, name),
                variables: inst.variables.to_json(),
            })
        })
        .pop()
        .ok_or_else(|| ApiError::forbidden(format!("instance {id} does not involve you")))
    }

    pub fn terminate(&self, c: &Caller, id: InstanceId) -> ApiResult<InstanceDetail> {
        authorize(c, Endpoint::TerminateInstance)?;
        self.platform.terminate(id, &c.actor)?;
        self.instance(c, id)
    }

    pub fn catalog(&self, c: &Caller) -> ApiResult<Vec<CatalogEntry>> {
        authorize(c, Endpoint::Catalog)?;
        Ok(self.config.catalog.clone())
    }

    pub fn views(&self, c: &Caller) -> ApiResult<Vec<ExternalDataView>> {
        authorize(c, Endpoint::ListViews)?;
        Ok(self
            .platform
            .engine()
            .state()
            .views
            .get(&c.actor.user)
            .map(|v| v.values().cloned().collect())
            .unwrap_or_default())
    }

    pub fn put_view(&self, c: &Caller, view_id: &str, body: ViewBody) -> ApiResult<ExternalDataView> {
        authorize(c, Endpoint::PutView)?;
        let mut bad = Vec::new();
        if view_id.trim().is_empty() {
            bad.push(agriflow_core::engine::FieldError {
                field: "view_id".into(),
                message: "required".into(),
            });
        }
        for (i, e) in body.entries.iter().enumerate() {
            if self.config.source(&e.source).is_none() {
                bad.push(agriflow_core::engine::FieldError {
                    field: format!("entries[{i}].source"),
                    message: format!("'{}' is not in the catalog", e.source),
                });
            }
        }
        if !bad.is_empty() {
            return Err(ApiError::invalid("invalid view", &bad));
        }
        let view = ExternalDataView {
            view_id: view_id.to_string(),
            owner: c.actor.user.clone(),
            title: body.title,
            entries: body.entries,
        };
        let now = self.platform.now();
        self.platform.engine().save_view(view.clone(), now)?;
        Ok(view)
    }

    pub fn definitions(&self, c: &Caller) -> ApiResult<Vec<DefinitionSummary>> {
        authorize(c, Endpoint::ListDefinitions)?;
        let engine = self.platform.engine();
        Ok(engine
            .state()
            .definitions
            .values()
            .flatten()
            .map(|d| DefinitionSummary {
                id: d.definition.id.clone(),
                name: d.definition.name.clone(),
                version: d.definition.version,
                deployed_at: d.deployed_at,
                deployed_by: d.deployed_by.clone(),
                nodes: d.definition.all_nodes().len(),
                sub_processes: d.definition.graph().sub_process_count(),
            })
            .collect())
    }

    pub fn deploy(&self, c: &Caller, xml: &[u8]) -> ApiResult<DefinitionSummary> {
        authorize(c, Endpoint::Deploy)?;
        let def = self.platform.deploy_xml(xml, &c.actor)?;
        Ok(DefinitionSummary {
            id: def.id.clone(),
            name: def.name.clone(),
            version: def.version,
            deployed_at: self.platform.now(),
            deployed_by: c.actor.user.clone(),
            nodes: def.all_nodes().len(),
            sub_processes: def.graph().sub_process_count(),
        })
    }

    pub fn start(&self, c: &Caller, req: &StartRequest) -> ApiResult<InstanceDetail> {
        authorize(c, Endpoint::StartInstance)?;
        let vars = variables_from_json(&req.variables)?;
        let id = self.platform.start(&req.definition_id, vars, &c.actor)?;
        self.instance(c, id)
    }

    pub fn upload(
        &self,
        c: &Caller,
        kind: &str,
        bytes: &[u8],
        metadata: BTreeMap<String, String>,
    ) -> ApiResult<DocumentInfo> {
        authorize(c, Endpoint::UploadFile)?;
        Ok(self.platform.ingest_file(kind, bytes, metadata, &c.actor)?)
    }

    fn render(&self, c: &Caller, endpoint: Endpoint, instance: InstanceId, index: &str, mode: Option<&str>) -> ApiResult<Rendered> {
        authorize(c, endpoint)?;
        let index = parse_index(index)?;
        let mode = parse_mode(mode)?;
        Ok(self.platform.render_map(instance, index, mode)?)
    }

    /// The colour map as a binary PPM together with its legend.
    pub fn map(&self, c: &Caller, instance: InstanceId, index: &str, mode: Option<&str>) -> ApiResult<Rendered> {
        self.render(c, Endpoint::Map, instance, index, mode)
    }

    pub fn map_legend(
        &self,
        c: &Caller,
        instance: InstanceId,
        index: &str,
        mode: Option<&str>,
    ) -> ApiResult<agriflow_geo::Legend> {
        self.render(c, Endpoint::MapLegend, instance, index, mode).map(|r| r.legend)
    }

    pub fn history(&self, c: &Caller, q: &HistoryQuery) -> ApiResult<Vec<EventRecord>> {
        authorize(c, Endpoint::History)?;
        let mut filter = HistoryFilter {
            instance: q.instance.map(InstanceId),
            from: q.from,
            to: q.to,
            ..HistoryFilter::default()
        };
        if let Some(k) = &q.kind {
            filter.kinds = k.split(',').map(|s| s.trim().to_string()).collect();
        }
        match (&q.field, &q.value) {
            (Some(f), Some(v)) => filter.field = Some((f.clone(), v.clone())),
            (None, None) => {}
            _ => return Err(ApiError::bad_request("field and value go together")),
        }
        let engine = self.platform.engine();
        Ok(engine.query_history(&filter).into_iter().cloned().collect())
    }

    /// Journal length; used to verify that refused calls change nothing.
    pub fn journal_len(&self) -> usize {
        self.platform.engine().journal().records().len()
    }
}
