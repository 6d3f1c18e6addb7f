//! Axum routes under `/api/v1`, each a thin adapter over [`Api`].

use std::collections::BTreeMap;

use agriflow_core::engine::{Contact, InstanceId, NotificationId, TaskId};
use axum::body::Bytes;
use axum::extract::{FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{ApiError, ApiResult};
use crate::rbac::{authorize, Endpoint};
use crate::service::{Api, Caller, HistoryQuery, StartRequest, ViewBody};

pub const PREFIX: &str = "/api/v1";
pub const PPM_CONTENT_TYPE: &str = "image/x-portable-pixmap";

pub struct Auth(pub Caller);

impl FromRequestParts<Api> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, api: &Api) -> Result<Self, Self::Rejection> {
        let bearer = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        api.authenticate(bearer).map(Auth)
    }
}

fn json<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn id<T: std::str::FromStr>(raw: &str, what: &str) -> ApiResult<T> {
    raw.parse().map_err(|_| ApiError::not_found(format!("{what} '{raw}'")))
}

async fn whoami(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    authorize(&c, Endpoint::Whoami)?;
    Ok(Json(api.whoami(&c)).into_response())
}

async fn tasks(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.tasks(&c)?).into_response())
}

async fn claim(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>) -> ApiResult<Response> {
    authorize(&c, Endpoint::ClaimTask)?;
    let task: TaskId = id(&raw, "task")?;
    Ok(Json(api.claim(&c, task)?).into_response())
}

async fn complete(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>, body: Bytes) -> ApiResult<Response> {
    authorize(&c, Endpoint::CompleteTask)?;
    let task: TaskId = id(&raw, "task")?;
    let form: serde_json::Map<String, serde_json::Value> = if body.is_empty() {
        Default::default()
    } else {
        json(&body)?
    };
    Ok(Json(api.complete(&c, task, &form)?).into_response())
}

async fn notifications(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.notifications(&c)?).into_response())
}

async fn read(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>) -> ApiResult<Response> {
    authorize(&c, Endpoint::ReadNotification)?;
    let n: NotificationId = id(&raw, "notification")?;
    Ok(Json(api.mark_read(&c, n)?).into_response())
}

#[derive(Deserialize)]
struct ForwardBody {
    contacts: Vec<String>,
}

async fn forward(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>, body: Bytes) -> ApiResult<Response> {
    authorize(&c, Endpoint::ForwardNotification)?;
    let n: NotificationId = id(&raw, "notification")?;
    let body: ForwardBody = json(&body)?;
    Ok(Json(api.forward(&c, n, &body.contacts)?).into_response())
}

async fn contacts(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.contacts(&c)?).into_response())
}

async fn add_contact(State(api): State<Api>, Auth(c): Auth, body: Bytes) -> ApiResult<Response> {
    authorize(&c, Endpoint::AddContact)?;
    let contact: Contact = json(&body)?;
    Ok(Json(api.add_contact(&c, contact)?).into_response())
}

async fn monitor(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.monitor(&c)?).into_response())
}

async fn instance(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>) -> ApiResult<Response> {
    authorize(&c, Endpoint::InstanceDetail)?;
    let i: InstanceId = id(&raw, "instance")?;
    Ok(Json(api.instance(&c, i)?).into_response())
}

async fn terminate(State(api): State<Api>, Auth(c): Auth, Path(raw): Path<String>) -> ApiResult<Response> {
    authorize(&c, Endpoint::TerminateInstance)?;
    let i: InstanceId = id(&raw, "instance")?;
    Ok(Json(api.terminate(&c, i)?).into_response())
}

async fn catalog(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.catalog(&c)?).into_response())
}

async fn views(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.views(&c)?).into_response())
}

async fn put_view(State(api): State<Api>, Auth(c): Auth, Path(view): Path<String>, body: Bytes) -> ApiResult<Response> {
    authorize(&c, Endpoint::PutView)?;
    let body: ViewBody = json(&body)?;
    Ok(Json(api.put_view(&c, &view, body)?).into_response())
}

async fn definitions(State(api): State<Api>, Auth(c): Auth) -> ApiResult<Response> {
    Ok(Json(api.definitions(&c)?).into_response())
}

fn is_multipart(req: &Request) -> bool {
    req.headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"))
}

/// Multipart parts: the first part with a file name is the payload; named
/// text parts are returned alongside it.
async fn read_multipart(req: Request) -> ApiResult<(Option<Vec<u8>>, BTreeMap<String, String>)> {
    let mut mp = Multipart::from_request(req, &())
        .await
        .map_err(|e| ApiError::bad_request(e.body_text()))?;
    let mut file = None;
    let mut fields = BTreeMap::new();
    while let Some(part) = mp.next_field().await.map_err(|e| ApiError::bad_request(e.body_text()))? {
        let name = part.name().unwrap_or_default().to_string();
        let is_file = part.file_name().is_some() || name == "file";
        let data = part.bytes().await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        if is_file && file.is_none() {
            file = Some(data.to_vec());
        } else {
            fields.insert(name, String::from_utf8_lossy(&data).into_owned());
        }
    }
    Ok((file, fields))
}

async fn deploy(State(api): State<Api>, Auth(c): Auth, req: Request) -> ApiResult<Response> {
    authorize(&c, Endpoint::Deploy)?;
    let xml = if is_multipart(&req) {
        read_multipart(req)
            .await?
            .0
            .ok_or_else(|| ApiError::bad_request("multipart body has no file part"))?
    } else {
        Bytes::from_request(req, &())
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?
            .to_vec()
    };
    Ok((StatusCode::CREATED, Json(api.deploy(&c, &xml)?)).into_response())
}

async fn start(State(api): State<Api>, Auth(c): Auth, body: Bytes) -> ApiResult<Response> {
    authorize(&c, Endpoint::StartInstance)?;
    let req: StartRequest = json(&body)?;
    Ok((StatusCode::CREATED, Json(api.start(&c, &req)?)).into_response())
}

async fn upload(State(api): State<Api>, Auth(c): Auth, req: Request) -> ApiResult<Response> {
    authorize(&c, Endpoint::UploadFile)?;
    if !is_multipart(&req) {
        return Err(ApiError::bad_request("expected multipart/form-data"));
    }
    let (file, mut fields) = read_multipart(req).await?;
    let file = file.ok_or_else(|| ApiError::bad_request("multipart body has no file part"))?;
    let kind = fields
        .remove("kind")
        .ok_or_else(|| ApiError::bad_request("multipart body has no 'kind' part"))?;
    Ok((StatusCode::CREATED, Json(api.upload(&c, &kind, &file, fields)?)).into_response())
}

#[derive(Deserialize)]
struct MapQuery {
    mode: Option<String>,
}

async fn map(
    State(api): State<Api>,
    Auth(c): Auth,
    Path((raw, index)): Path<(String, String)>,
    Query(q): Query<MapQuery>,
) -> ApiResult<Response> {
    authorize(&c, Endpoint::Map)?;
    let i: InstanceId = id(&raw, "instance")?;
    let rendered = api.map(&c, i, &index, q.mode.as_deref())?;
    Ok(([(CONTENT_TYPE, PPM_CONTENT_TYPE)], rendered.image).into_response())
}

async fn legend(
    State(api): State<Api>,
    Auth(c): Auth,
    Path((raw, index)): Path<(String, String)>,
    Query(q): Query<MapQuery>,
) -> ApiResult<Response> {
    authorize(&c, Endpoint::MapLegend)?;
    let i: InstanceId = id(&raw, "instance")?;
    Ok(Json(api.map_legend(&c, i, &index, q.mode.as_deref())?).into_response())
}

async fn history(State(api): State<Api>, Auth(c): Auth, Query(q): Query<HistoryQuery>) -> ApiResult<Response> {
    Ok(Json(api.history(&c, &q)?).into_response())
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(api: Api) -> Router {
    let v1 = Router::new()
        .route("/whoami", get(whoami))
        .route("/tasks", get(tasks))
        .route("/tasks/{id}/claim", post(claim))
        .route("/tasks/{id}/complete", post(complete))
        .route("/notifications", get(notifications))
        .route("/notifications/{id}/read", post(read))
        .route("/notifications/{id}/forward", post(forward))
        .route("/contacts", get(contacts).post(add_contact))
        .route("/monitor/processes", get(monitor))
        .route("/instances", post(start))
        .route("/instances/{id}", get(instance))
        .route("/instances/{id}/terminate", post(terminate))
        .route("/views", get(views))
        .route("/views/catalog", get(catalog))
        .route("/views/{id}", put(put_view))
        .route("/definitions", get(definitions).post(deploy))
        .route("/files", post(upload))
        .route("/maps/{instance}/{index}", get(map))
        .route("/maps/{instance}/{index}/legend", get(legend))
        .route("/history", get(history));
    Router::new().nest(PREFIX, v1).fallback(fallback).with_state(api)
}

/// Serves until ctrl-c.
pub async fn serve(api: Api, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(api))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
