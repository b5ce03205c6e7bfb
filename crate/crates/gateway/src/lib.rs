//! JSON over HTTP for browsers, one protocol request per HTTP request.
//!
//! | route                            | message           |
//! |----------------------------------|-------------------|
//! | `GET /api/services`              | LISTSERV          |
//! | `GET /api/machines`              | LISTPHYMACHSTATUS |
//! | `GET /api/vms?service=SID`       | LISTVM            |
//! | `GET /api/vms/{id}`              | GETVM             |
//! | `POST /api/services/{id}/submit` | SUBMITSERV        |
//! | `POST /api/vms/{id}/stop`        | STOPSERV          |
//!
//! Everything else is served from the asset directory.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use taaroa_core::config::{Config, ConfigError};
use taaroa_core::net::call;
use taaroa_core::protocol::{
    ErrorCode, IsRequest, Listing, Payload, Reply, Request, ScRequest,
};
use tower_http::services::ServeDir;

pub const GW_PORT: u16 = 8080;

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub port: u16,
    pub is_addr: String,
    pub sc_addr: String,
    pub assets_dir: PathBuf,
}

impl GatewayConfig {
    pub fn from_config(cfg: &Config) -> Result<Self, ConfigError> {
        Ok(Self {
            port: cfg.parse_or("GW_PORT", GW_PORT)?,
            is_addr: cfg.get_or("IS_ADDR", "127.0.0.1:7070").to_owned(),
            sc_addr: cfg.get_or("SC_ADDR", "127.0.0.1:7072").to_owned(),
            assets_dir: PathBuf::from(cfg.get_or("GW_ASSETS_DIR", "assets")),
        })
    }
}

#[derive(Debug, Serialize)]
struct Service {
    s_id: u64,
    name: String,
    rm_id: u64,
    rm_ip: String,
    rm_port: u16,
}

#[derive(Debug, Serialize)]
struct Machine {
    phy_id: u64,
    avail_cpu: f64,
    avail_ram: f64,
    avail_disk: f64,
    net_speed: String,
}

#[derive(Debug, Serialize)]
struct Vm {
    vm_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    s_id: Option<u64>,
    phy_id: u64,
    vm_local_id: String,
    virt_ip: String,
    status: &'static str,
}

/// HTTP status for an ERR reply.
pub fn http_status(code: ErrorCode) -> StatusCode {
    match code.0 {
        100..=199 => StatusCode::BAD_REQUEST,
        200..=299 => StatusCode::NOT_FOUND,
        300..=399 => StatusCode::CONFLICT,
        400 => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

enum Failure {
    Err(ErrorCode),
    Unreachable(String),
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        match self {
            Failure::Err(code) => (http_status(code), Json(json!({ "error": code.0 }))).into_response(),
            Failure::Unreachable(msg) => (
                StatusCode::BAD_GATEWAY,
                Json(json!({ "error": ErrorCode::UPSTREAM_FAILURE.0, "message": msg })),
            )
                .into_response(),
        }
    }
}

struct Backend {
    is_addr: String,
    sc_addr: String,
}

type Shared = State<Arc<Backend>>;

async fn send(b: &Backend, req: Request) -> Result<Reply, Failure> {
    let addr = match req {
        Request::Sc(_) => b.sc_addr.clone(),
        _ => b.is_addr.clone(),
    };
    let reply = tokio::task::spawn_blocking(move || call(&addr, req))
        .await
        .map_err(|e| Failure::Unreachable(e.to_string()))?
        .map_err(|e| Failure::Unreachable(e.to_string()))?;
    match reply {
        Reply::Err(code) => Err(Failure::Err(code)),
        ok => Ok(ok),
    }
}

fn unexpected(r: Reply) -> Failure {
    Failure::Unreachable(format!("unexpected reply {r:?}"))
}

async fn services(State(b): Shared) -> Result<Json<Vec<Service>>, Failure> {
    match send(&b, IsRequest::ListServ.into()).await? {
        Reply::List(Listing::Serv(v)) => Ok(Json(
            v.into_iter()
                .map(|s| Service {
                    s_id: s.s_id,
                    name: s.name,
                    rm_id: s.rm_id,
                    rm_ip: s.rm_ip,
                    rm_port: s.rm_port,
                })
                .collect(),
        )),
        r => Err(unexpected(r)),
    }
}

async fn machines(State(b): Shared) -> Result<Json<Vec<Machine>>, Failure> {
    match send(&b, IsRequest::ListPhyMachStatus.into()).await? {
        Reply::List(Listing::PhyMachStatus(v)) => Ok(Json(
            v.into_iter()
                .map(|m| Machine {
                    phy_id: m.phy_id,
                    avail_cpu: m.avail_cpu,
                    avail_ram: m.avail_ram,
                    avail_disk: m.avail_disk,
                    net_speed: m.net_speed.to_string(),
                })
                .collect(),
        )),
        r => Err(unexpected(r)),
    }
}

#[derive(Debug, Deserialize)]
struct VmQuery {
    service: Option<u64>,
}

async fn vms(State(b): Shared, Query(q): Query<VmQuery>) -> Result<Json<Vec<Vm>>, Failure> {
    let s_id = q.service.ok_or(Failure::Err(ErrorCode::MALFORMED_REQUEST))?;
    match send(&b, IsRequest::ListVm { s_id }.into()).await? {
        Reply::List(Listing::Vm(v)) => Ok(Json(
            v.into_iter()
                .map(|e| Vm {
                    vm_id: e.vm_id,
                    s_id: None,
                    phy_id: e.phy_id,
                    vm_local_id: e.vm_local_id,
                    virt_ip: e.virt_ip,
                    status: e.status.name(),
                })
                .collect(),
        )),
        r => Err(unexpected(r)),
    }
}

async fn vm(State(b): Shared, Path(vm_id): Path<u64>) -> Result<Json<Vm>, Failure> {
    match send(&b, IsRequest::GetVm { vm_id }.into()).await? {
        Reply::Ok(Payload::Vm(d)) => Ok(Json(Vm {
            vm_id,
            s_id: Some(d.s_id),
            phy_id: d.phy_id,
            vm_local_id: d.vm_local_id,
            virt_ip: d.virt_ip,
            status: d.status.name(),
        })),
        r => Err(unexpected(r)),
    }
}

async fn id_reply(b: &Backend, req: ScRequest) -> Result<Json<serde_json::Value>, Failure> {
    match send(b, req.into()).await? {
        Reply::Ok(Payload::Id(vm_id)) => Ok(Json(json!({ "vm_id": vm_id }))),
        r => Err(unexpected(r)),
    }
}

async fn submit(State(b): Shared, Path(s_id): Path<u64>) -> Result<Json<serde_json::Value>, Failure> {
    id_reply(&b, ScRequest::SubmitServ { s_id }).await
}

async fn stop(State(b): Shared, Path(vm_id): Path<u64>) -> Result<Json<serde_json::Value>, Failure> {
    id_reply(&b, ScRequest::StopServ { vm_id }).await
}

async fn no_route() -> impl IntoResponse {
    (StatusCode::NOT_FOUND, Json(json!({ "error": "no such endpoint" })))
}

pub fn router(cfg: &GatewayConfig) -> Router {
    let backend = Arc::new(Backend {
        is_addr: cfg.is_addr.clone(),
        sc_addr: cfg.sc_addr.clone(),
    });
    let api = Router::new()
        .route("/services", get(services))
        .route("/machines", get(machines))
        .route("/vms", get(vms))
        .route("/vms/{id}", get(vm))
        .route("/services/{id}/submit", post(submit))
        .route("/vms/{id}/stop", post(stop))
        .fallback(no_route)
        .with_state(backend);
    Router::new()
        .nest("/api", api)
        .fallback_service(ServeDir::new(&cfg.assets_dir))
}
