//! HTTP endpoint that receives profile batches from running agents and
//! stores each one as a digest-named file.

use std::future::Future;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pgo_core::profile::{parse_batch_lenient, write_batch, BATCH_EXTENSION};
use pgo_core::Execution;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::manifest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub accepted: usize,
    pub rejected: usize,
    /// Name stem of the stored file; absent when nothing was accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    /// False when an identical batch was already stored.
    pub stored: bool,
}

#[derive(Debug)]
struct Collector {
    out: PathBuf,
}

pub fn router(out: impl Into<PathBuf>) -> Router {
    let state = Arc::new(Collector { out: out.into() });
    Router::new()
        .route("/v1/batch", post(receive_batch))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(state)
}

/// File name used for a stored batch with canonical text `text`.
pub fn batch_file_name(text: &str) -> String {
    format!("{}.{BATCH_EXTENSION}", sha256_hex(text.as_bytes()))
}

async fn receive_batch(State(c): State<Arc<Collector>>, body: Bytes) -> Response {
    let text = match std::str::from_utf8(&body) {
        Ok(t) if !t.contains('\0') => t,
        _ => return (StatusCode::BAD_REQUEST, "body must be newline-delimited UTF-8 text\n").into_response(),
    };
    let (records, rejected) = parse_batch_lenient(text, Execution::Sequential);
    let mut response = BatchResponse {
        accepted: records.len(),
        rejected: rejected.len(),
        digest: None,
        stored: false,
    };
    if records.is_empty() {
        return (StatusCode::ACCEPTED, Json(response)).into_response();
    }
    let canonical = write_batch(&records);
    let name = batch_file_name(&canonical);
    let out = c.out.clone();
    let stored = tokio::task::spawn_blocking(move || store(&out, &name, &canonical)).await;
    match stored {
        Ok(Ok((digest, written))) => {
            response.digest = Some(digest);
            response.stored = written;
            (StatusCode::ACCEPTED, Json(response)).into_response()
        }
        Ok(Err(e)) => (StatusCode::INSUFFICIENT_STORAGE, format!("cannot store batch: {e}\n")).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, format!("{e}\n")).into_response(),
    }
}

fn store(dir: &Path, name: &str, text: &str) -> std::io::Result<(String, bool)> {
    let digest = name.split('.').next().unwrap_or_default().to_string();
    let path = dir.join(name);
    if path.exists() {
        return Ok((digest, false));
    }
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok((digest, true))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    out: impl Into<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(out))
        .with_graceful_shutdown(shutdown)
        .await
}
