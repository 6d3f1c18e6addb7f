//! Which roles may call which endpoint.
//!
//! Endpoints open to every authenticated user may still refuse individual
//! objects: tasks are checked against their candidate role and
//! notifications against their recipient.

use agriflow_core::role::Role;

use crate::error::ApiError;
use crate::service::Caller;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Whoami,
    ListTasks,
    ClaimTask,
    CompleteTask,
    ListNotifications,
    ReadNotification,
    ForwardNotification,
    ListContacts,
    AddContact,
    Monitor,
    InstanceDetail,
    TerminateInstance,
    Catalog,
    ListViews,
    PutView,
    ListDefinitions,
    Deploy,
    StartInstance,
    UploadFile,
    Map,
    MapLegend,
    History,
}

const PLANNERS: &[Role] = &[Role::FarmManager, Role::Viticulturist];
const MONITOR: &[Role] = &[Role::FarmManager, Role::Viticulturist, Role::FieldWorker];
const UPLOADERS: &[Role] = &[
    Role::FarmManager,
    Role::Viticulturist,
    Role::DroneOperator,
    Role::QcDeviceUser,
    Role::ExternalProvider,
];
const MAP_READERS: &[Role] = &[Role::FarmManager, Role::Viticulturist, Role::DroneOperator];

impl Endpoint {
    pub const ALL: [Endpoint; 22] = [
        Endpoint::Whoami,
        Endpoint::ListTasks,
        Endpoint::ClaimTask,
        Endpoint::CompleteTask,
        Endpoint::ListNotifications,
        Endpoint::ReadNotification,
        Endpoint::ForwardNotification,
        Endpoint::ListContacts,
        Endpoint::AddContact,
        Endpoint::Monitor,
        Endpoint::InstanceDetail,
        Endpoint::TerminateInstance,
        Endpoint::Catalog,
        Endpoint::ListViews,
        Endpoint::PutView,
        Endpoint::ListDefinitions,
        Endpoint::Deploy,
        Endpoint::StartInstance,
        Endpoint::UploadFile,
        Endpoint::Map,
        Endpoint::MapLegend,
        Endpoint::History,
    ];

    /// Method and path template under `/api/v1`.
    pub fn route(self) -> (&'static str, &'static str) {
        match self {
            Endpoint::Whoami => ("GET", "/whoami"),
            Endpoint::ListTasks => ("GET", "/tasks"),
            Endpoint::ClaimTask => ("POST", "/tasks/{id}/claim"),
            Endpoint::CompleteTask => ("POST", "/tasks/{id}/complete"),
            Endpoint::ListNotifications => ("GET", "/notifications"),
            Endpoint::ReadNotification => ("POST", "/notifications/{id}/read"),
            Endpoint::ForwardNotification => ("POST", "/notifications/{id}/forward"),
            Endpoint::ListContacts => ("GET", "/contacts"),
            Endpoint::AddContact => ("POST", "/contacts"),
            Endpoint::Monitor => ("GET", "/monitor/processes"),
            Endpoint::InstanceDetail => ("GET", "/instances/{id}"),
            Endpoint::TerminateInstance => ("POST", "/instances/{id}/terminate"),
            Endpoint::Catalog => ("GET", "/views/catalog"),
            Endpoint::ListViews => ("GET", "/views"),
            Endpoint::PutView => ("PUT", "/views/{id}"),
            Endpoint::ListDefinitions => ("GET", "/definitions"),
            Endpoint::Deploy => ("POST", "/definitions"),
            Endpoint::StartInstance => ("POST", "/instances"),
            Endpoint::UploadFile => ("POST", "/files"),
            Endpoint::Map => ("GET", "/maps/{instance}/{index}"),
            Endpoint::MapLegend => ("GET", "/maps/{instance}/{index}/legend"),
            Endpoint::History => ("GET", "/history"),
        }
    }

    /// Roles admitted at the door; `None` admits every authenticated user.
    pub fn roles(self) -> Option<&'static [Role]> {
        match self {
            Endpoint::Deploy | Endpoint::StartInstance | Endpoint::TerminateInstance | Endpoint::History => {
                Some(PLANNERS)
            }
            Endpoint::Monitor | Endpoint::InstanceDetail => Some(MONITOR),
            Endpoint::UploadFile => Some(UPLOADERS),
            Endpoint::Map | Endpoint::MapLegend => Some(MAP_READERS),
            _ => None,
        }
    }

    pub fn admits(self, roles: &std::collections::BTreeSet<Role>) -> bool {
        self.roles().is_none_or(|allowed| allowed.iter().any(|r| roles.contains(r)))
    }
}

pub fn authorize(caller: &Caller, endpoint: Endpoint) -> Result<(), ApiError> {
    if endpoint.admits(&caller.actor.roles) {
        Ok(())
    } else {
        let (method, path) = endpoint.route();
        Err(ApiError::forbidden(format!(
            "{method} {path} is not available to user '{}'",
            caller.actor.user
        )))
    }
}
