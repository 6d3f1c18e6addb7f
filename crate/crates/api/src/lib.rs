//! REST/JSON service over the agriflow platform: bearer-token users,
//! role-based access control and a uniform `{code, message, details}` error
//! envelope. All routes live under `/api/v1`.

pub mod config;
pub mod error;
pub mod http;
pub mod rbac;
pub mod service;

pub use config::{CatalogEntry, ServiceConfig, UserConfig};
pub use error::{ApiError, ApiResult, ErrorBody};
pub use http::{router, serve, PREFIX};
pub use rbac::Endpoint;
pub use service::{Api, Caller};
