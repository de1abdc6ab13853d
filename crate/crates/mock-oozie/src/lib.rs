//! A mock of the Oozie v1 job submission endpoint.
//!
//! The server accepts `POST /oozie/v1/jobs?action=start` with a Hadoop-style
//! `<configuration>` XML body, records every request, and answers
//! `201 {"id": "..."}`. It runs on its own thread with its own runtime, so
//! blocking clients in ordinary `#[test]` functions can talk to it.

use std::collections::HashMap;
use std::io;
use std::net::{SocketAddr, TcpListener as StdListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::oneshot;

pub const APPLICATION_PATH_KEY: &str = "oozie.wf.application.path";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CapturedRequest {
    pub query: HashMap<String, String>,
    pub content_type: Option<String>,
    pub body: String,
    /// Parsed `<property>` entries, in document order. Empty if the body did not parse.
    pub properties: Vec<(String, String)>,
    /// Status code the mock answered with.
    pub status: u16,
    pub job_id: Option<String>,
}

impl CapturedRequest {
    pub fn property(&self, name: &str) -> Option<&str> {
        self.properties
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn application_path(&self) -> Option<&str> {
        self.property(APPLICATION_PATH_KEY)
    }
}

#[derive(Default)]
struct Inner {
    requests: Vec<CapturedRequest>,
    next_id: u64,
    reject_paths: Vec<String>,
}

#[derive(Clone, Default)]
struct Shared(Arc<Mutex<Inner>>);

/// Parses a `<configuration>` document into (name, value) pairs.
pub fn parse_configuration(body: &str) -> Result<Vec<(String, String)>, String> {
    let doc = roxmltree::Document::parse(body).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "configuration" {
        return Err(format!("root element is <{}>", root.tag_name().name()));
    }
    root.children()
        .filter(|n| n.has_tag_name("property"))
        .map(|prop| {
            let field = |name: &str| {
                prop.children()
                    .find(|c| c.has_tag_name(name))
                    .map(|c| c.text().unwrap_or_default().to_owned())
                    .ok_or_else(|| format!("<property> without <{name}>"))
            };
            Ok((field("name")?, field("value")?))
        })
        .collect()
}

async fn submit_job(
    State(shared): State<Shared>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: String,
) -> impl IntoResponse {
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let parsed = parse_configuration(&body);
    let properties = parsed.clone().unwrap_or_default();

    let mut inner = shared.0.lock().expect("mock state");
    let app_path = properties
        .iter()
        .find(|(k, _)| k == APPLICATION_PATH_KEY)
        .map(|(_, v)| v.clone());

    let (status, reply, job_id) = if query.get("action").map(String::as_str) != Some("start") {
        (StatusCode::BAD_REQUEST, json!({"error": "action=start required"}), None)
    } else if !content_type
        .as_deref()
        .is_some_and(|c| c.starts_with("application/xml"))
    {
        (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            json!({"error": "expected application/xml"}),
            None,
        )
    } else if let Err(e) = &parsed {
        (StatusCode::BAD_REQUEST, json!({"error": format!("bad configuration: {e}")}), None)
    } else if app_path.is_none() {
        (
            StatusCode::BAD_REQUEST,
            json!({"error": format!("{APPLICATION_PATH_KEY} missing")}),
            None,
        )
    } else if inner
        .reject_paths
        .iter()
        .any(|needle| app_path.as_deref().is_some_and(|p| p.contains(needle.as_str())))
    {
        (
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({"error": "rejected by mock"}),
            None,
        )
    } else {
        inner.next_id += 1;
        let id = format!("{:07}-W", inner.next_id);
        (StatusCode::CREATED, json!({ "id": id }), Some(id))
    };

    inner.requests.push(CapturedRequest {
        query,
        content_type,
        body,
        properties,
        status: status.as_u16(),
        job_id,
    });
    (status, Json(reply))
}

async fn admin_status() -> Json<serde_json::Value> {
    Json(json!({"systemMode": "NORMAL"}))
}

async fn list_requests(State(shared): State<Shared>) -> Json<Vec<CapturedRequest>> {
    Json(shared.0.lock().expect("mock state").requests.clone())
}

fn router(shared: Shared) -> Router {
    Router::new()
        .route("/oozie/v1/jobs", post(submit_job))
        .route("/oozie/v1/admin/status", get(admin_status))
        .route("/mock/requests", get(list_requests))
        .with_state(shared)
}

/// Handle to a running mock server; the server stops when the handle is dropped.
pub struct MockOozie {
    addr: SocketAddr,
    shared: Shared,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockOozie {
    /// Starts on an ephemeral port of 127.0.0.1.
    pub fn start() -> io::Result<Self> {
        Self::bind("127.0.0.1:0")
    }

    pub fn bind(addr: &str) -> io::Result<Self> {
        let listener = StdListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Shared::default();
        let app = router(shared.clone());
        let (tx, rx) = oneshot::channel::<()>();

        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let thread = std::thread::Builder::new()
            .name("mock-oozie".into())
            .spawn(move || {
                runtime.block_on(async move {
                    let listener =
                        tokio::net::TcpListener::from_std(listener).expect("listener registers with runtime");
                    axum::serve(listener, app)
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        })
                        .await
                        .expect("mock server");
                });
            })?;

        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn host(&self) -> String {
        self.addr.ip().to_string()
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<CapturedRequest> {
        self.shared.0.lock().expect("mock state").requests.clone()
    }

    /// Answer 500 for submissions whose application path contains `needle`.
    pub fn reject_paths_containing(&self, needle: impl Into<String>) {
        self.shared
            .0
            .lock()
            .expect("mock state")
            .reject_paths
            .push(needle.into());
    }

    /// Blocks until the server thread exits, e.g. after Ctrl-C in the binary.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockOozie {
    fn drop(&mut self) {
        self.stop();
    }
}
