mod common;

use std::time::{Duration, Instant};

use common::fast_client;
use medroute_gateway::mock::{spawn_mock_backend, FailureMode, Matcher, MockBehavior, RecordedCall, Reply};
use medroute_gateway::model_client::{ChatMessage, ClientError, CompletionRequest};

fn ping() -> CompletionRequest {
    CompletionRequest::new(
        "tiny",
        vec![ChatMessage::system("be brief"), ChatMessage::user("ping")],
        32,
        0.0,
    )
    .unwrap()
}

#[tokio::test]
async fn echo_returns_last_user_message() {
    let mock = spawn_mock_backend(MockBehavior::echo()).await.unwrap();
    let text = fast_client().complete(mock.url(), &ping(), 2_000, 0).await.unwrap();
    assert_eq!(text, "ping");
}

#[tokio::test]
async fn scripted_reply_and_matchers() {
    let behavior = MockBehavior::fixed("X")
        .reply_when(Matcher::SystemContains("pirate".into()), Reply::Text("arr".into()));
    let mock = spawn_mock_backend(behavior).await.unwrap();
    let client = fast_client();
    assert_eq!(client.complete(mock.url(), &ping(), 2_000, 0).await.unwrap(), "X");
    let pirate = CompletionRequest::new(
        "tiny",
        vec![ChatMessage::system("talk like a pirate"), ChatMessage::user("hi")],
        8,
        0.0,
    )
    .unwrap();
    assert_eq!(client.complete(mock.url(), &pirate, 2_000, 0).await.unwrap(), "arr");
}

#[tokio::test]
async fn request_bytes_reach_the_backend_unchanged() {
    let mock = spawn_mock_backend(MockBehavior::echo()).await.unwrap();
    let request = ping();
    fast_client().complete(mock.url(), &request, 2_000, 0).await.unwrap();
    let calls = mock.calls();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].raw.as_bytes(), request.to_wire().as_slice());
    assert_eq!(
        calls[0].raw,
        r#"{"model":"tiny","messages":[{"role":"system","content":"be brief"},{"role":"user","content":"ping"}],"max_tokens":32,"temperature":0.0}"#
    );
    assert_eq!(calls[0].completion().unwrap(), request);
}

#[tokio::test]
async fn persistent_5xx_is_retried_exactly_retries_times() {
    let mock = spawn_mock_backend(MockBehavior::failing(FailureMode::Http500)).await.unwrap();
    let err = fast_client().complete(mock.url(), &ping(), 5_000, 2).await.unwrap_err();
    assert!(matches!(err, ClientError::Backend { attempts: 3, .. }), "{err:?}");
    assert_eq!(mock.call_count(), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;
    use axum::http::StatusCode;
    use axum::routing::post;

    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let app = axum::Router::new().route(
        "/v1/chat/completions",
        post(move || {
            let counter = counter.clone();
            async move {
                counter.fetch_add(1, Ordering::SeqCst);
                (StatusCode::UNPROCESSABLE_ENTITY, "nope")
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });

    let err = fast_client().complete(&url, &ping(), 2_000, 3).await.unwrap_err();
    assert!(matches!(err, ClientError::Backend { attempts: 1, .. }), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn connect_errors_are_retried() {
    let err = fast_client()
        .complete("http://127.0.0.1:9", &ping(), 2_000, 1)
        .await
        .unwrap_err();
    assert!(matches!(err, ClientError::Backend { attempts: 2, .. }), "{err:?}");
}

#[tokio::test]
async fn slow_backend_times_out_near_the_deadline() {
    let mock = spawn_mock_backend(MockBehavior::echo().with_delay(400)).await.unwrap();
    let started = Instant::now();
    let err = fast_client().complete(mock.url(), &ping(), 200, 0).await.unwrap_err();
    let elapsed = started.elapsed();
    assert!(matches!(err, ClientError::Timeout { .. }), "{err:?}");
    assert!(elapsed >= Duration::from_millis(190), "{elapsed:?}");
    assert!(elapsed < Duration::from_millis(380), "{elapsed:?}");
}

#[tokio::test]
async fn hanging_mock_stays_serviceable() {
    let mock = spawn_mock_backend(MockBehavior::failing(FailureMode::Hang)).await.unwrap();
    let client = fast_client();
    let err = client.complete(mock.url(), &ping(), 100, 0).await.unwrap_err();
    assert!(matches!(err, ClientError::Timeout { .. }));
    mock.set_behavior(MockBehavior::fixed("alive"));
    assert_eq!(client.complete(mock.url(), &ping(), 1_000, 0).await.unwrap(), "alive");
    assert_eq!(mock.call_count(), 2);
}

#[tokio::test]
async fn call_log_endpoint_lists_every_request() {
    let mock = spawn_mock_backend(MockBehavior::echo()).await.unwrap();
    let client = fast_client();
    for k in 0..3 {
        let request = CompletionRequest::new("m", vec![ChatMessage::user(format!("q{k}"))], 4, 0.0).unwrap();
        client.complete(mock.url(), &request, 1_000, 0).await.unwrap();
    }
    let log: Vec<RecordedCall> = reqwest::get(format!("{}/__calls", mock.url()))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(log.len(), 3);
    for (k, call) in log.iter().enumerate() {
        assert_eq!(call.completion().unwrap().messages[0].content, format!("q{k}"));
    }
}

#[tokio::test]
async fn bearer_token_is_forwarded() {
    let mock = spawn_mock_backend(MockBehavior::echo()).await.unwrap();
    fast_client()
        .complete_authorized(mock.url(), Some("tok"), &ping(), 1_000, 0)
        .await
        .unwrap();
    assert_eq!(mock.calls()[0].authorization.as_deref(), Some("Bearer tok"));
}

#[tokio::test]
async fn malformed_body_is_a_protocol_error() {
    use axum::routing::post;
    let app = axum::Router::new().route("/v1/chat/completions", post(|| async { "{\"choices\":[]}" }));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let err = fast_client().complete(&url, &ping(), 1_000, 2).await.unwrap_err();
    assert!(matches!(err, ClientError::Protocol(_)), "{err:?}");
}
