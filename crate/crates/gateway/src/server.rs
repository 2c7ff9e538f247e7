//! Loopback HTTP transport: a single `POST /v1/message` route.

use std::future::Future;
use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::post;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::service::Service;

pub const MESSAGE_PATH: &str = "/v1/message";

/// Pages can be large; the UI posts whole serialized documents.
const BODY_LIMIT: usize = 32 * 1024 * 1024;

pub fn is_loopback(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => v4.is_loopback(),
        IpAddr::V6(v6) => v6.is_loopback() || v6.to_ipv4_mapped().is_some_and(|v4| v4.is_loopback()),
    }
}

/// Binds `addr`, refusing anything that is not a loopback address.
pub async fn bind_loopback(addr: SocketAddr) -> io::Result<TcpListener> {
    if !is_loopback(addr.ip()) {
        return Err(io::Error::new(
            io::ErrorKind::PermissionDenied,
            format!("refusing to listen on non-loopback address {}", addr.ip()),
        ));
    }
    TcpListener::bind(addr).await
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route(MESSAGE_PATH, post(message))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(service)
}

async fn message(
    State(service): State<Arc<Service>>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    body: Bytes,
) -> HttpResponse {
    if !is_loopback(peer.ip()) {
        return (StatusCode::FORBIDDEN, "loopback clients only\n").into_response();
    }
    let responses = match tokio::task::spawn_blocking(move || service.handle_body(&body)).await {
        Ok(r) => r,
        Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, format!("handler failed: {e}\n")).into_response(),
    };
    match responses.as_slice() {
        [one] => ([(header::CONTENT_TYPE, "application/json")], serde_json::to_string(one).expect("response serializes"))
            .into_response(),
        many => {
            let mut out = String::new();
            for r in many {
                out.push_str(&serde_json::to_string(r).expect("response serializes"));
                out.push('\n');
            }
            ([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response()
        }
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(listener: TcpListener, service: Arc<Service>, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
    axum::serve(listener, router(service).into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on the current tokio runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl RunningServer {
    pub async fn start(service: Service, addr: SocketAddr) -> io::Result<RunningServer> {
        let listener = bind_loopback(addr).await?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(serve(listener, Arc::new(service), async {
            let _ = stopped.await;
        }));
        Ok(RunningServer { addr, stop: Some(stop), task })
    }

    pub fn url(&self) -> String {
        format!("http://{}{MESSAGE_PATH}", self.addr)
    }

    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        (&mut self.task).await.map_err(io::Error::other)?
    }
}
