//! HTTP surface of the gateway.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::Stream;
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use crate::gateway::{ChatRequest, ErrorBody, Gateway, TurnError, TurnEvent};

type Shared = Arc<Gateway>;

impl IntoResponse for TurnError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status_code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body())).into_response()
    }
}

fn bad_json(err: impl std::fmt::Display) -> Response {
    TurnError::BadRequest(err.to_string()).into_response()
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(bad_json)
}

async fn chat(State(gateway): State<Shared>, body: axum::body::Bytes) -> Response {
    let request: ChatRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match gateway.handle_chat(request).await {
        Ok(turn) => Json(turn).into_response(),
        Err(err) => err.into_response(),
    }
}

fn sse_event(id: u64, event: &TurnEvent) -> Event {
    let data = match event {
        TurnEvent::Routing(d) => serde_json::to_string(d),
        TurnEvent::Specialist(r) => serde_json::to_string(r),
        TurnEvent::Final(t) => serde_json::to_string(t),
        TurnEvent::Error(e) => serde_json::to_string(e),
    }
    .unwrap_or_else(|e| json!({ "error": "internal", "message": e.to_string() }).to_string());
    Event::default().id(id.to_string()).event(event.name()).data(data)
}

/// Runs a turn in its own task and streams its stage events; the stream ends
/// after `final` or `error`.
pub fn turn_events(gateway: Shared, request: ChatRequest) -> impl Stream<Item = TurnEvent> + Send {
    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        let progress = tx.clone();
        let outcome = gateway
            .run_turn(request, move |event| {
                let _ = progress.send(event);
            })
            .await;
        let last = match outcome {
            Ok(turn) => TurnEvent::Final(Box::new(turn)),
            Err(err) => TurnEvent::Error(err.body()),
        };
        let _ = tx.send(last);
    });
    futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (e, rx)) })
}

async fn chat_stream(State(gateway): State<Shared>, body: axum::body::Bytes) -> Response {
    let request: ChatRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    if request.message.trim().is_empty() {
        return TurnError::BadRequest("message is empty".into()).into_response();
    }
    use futures::StreamExt;
    let stream = turn_events(gateway, request)
        .enumerate()
        .map(|(i, event)| Ok::<_, Infallible>(sse_event(i as u64 + 1, &event)));
    Sse::new(stream).keep_alive(KeepAlive::default()).into_response()
}

#[derive(Deserialize)]
struct RouteBody {
    text: String,
}

async fn route(State(gateway): State<Shared>, body: axum::body::Bytes) -> Response {
    let request: RouteBody = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match gateway.handle_route(&request.text).await {
        Ok(route) => Json(route).into_response(),
        Err(err) => err.into_response(),
    }
}

async fn specialists(State(gateway): State<Shared>) -> Response {
    Json(gateway.specialists()).into_response()
}

async fn session(State(gateway): State<Shared>, Path(id): Path<String>) -> Response {
    match gateway.session(&id).await {
        Some(state) => Json(state).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(ErrorBody {
                error: "not_found".into(),
                message: format!("no session `{id}`"),
                partial: None,
            }),
        )
            .into_response(),
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(gateway: Shared) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/chat/stream", post(chat_stream))
        .route("/v1/router/score", post(route))
        .route("/v1/specialists", get(specialists))
        .route("/v1/sessions/{id}", get(session))
        .route("/healthz", get(healthz))
        .with_state(gateway)
}

/// Binds `addr` and serves until the future is dropped or fails.
pub async fn serve(gateway: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, router(gateway)).await
}

/// Serves on an ephemeral local port in the background; returns the base URL.
pub async fn spawn(gateway: Shared) -> std::io::Result<(String, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let url = format!("http://{}", listener.local_addr()?);
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, router(gateway)).await;
    });
    Ok((url, task))
}
