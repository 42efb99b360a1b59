use std::sync::{Arc, Mutex};

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use codegraph_agent::{BackendError, ChatBackend, ChatParams, HttpBackend, Message};
use serde_json::{json, Value};

type Seen = Arc<Mutex<Vec<(Option<String>, Value)>>>;

/// Serves `/v1/chat/completions` on a background runtime and returns the
/// base URL.
fn serve(reply: Value, status: StatusCode, seen: Seen) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new().route(
                "/v1/chat/completions",
                post(move |headers: HeaderMap, Json(body): Json<Value>| {
                    let reply = reply.clone();
                    let seen = seen.clone();
                    async move {
                        let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
                        seen.lock().unwrap().push((auth, body));
                        (status, Json(reply))
                    }
                }),
            );
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}/v1", rx.recv().unwrap())
}

fn params() -> ChatParams {
    ChatParams { model: "test-model".into(), temperature: 0.0, max_tokens: Some(64) }
}

#[test]
fn speaks_chat_completions() {
    let seen: Seen = Arc::default();
    let reply = json!({
        "choices": [{"message": {"role": "assistant", "content": "FINISH: hi"}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3}
    });
    let base = serve(reply, StatusCode::OK, seen.clone());
    let backend = HttpBackend::new(format!("{base}/"), Some("secret".into())).unwrap();
    let r = backend.send(&[Message::system("s"), Message::user("u")], &params()).unwrap();
    assert_eq!(r.content, "FINISH: hi");
    assert_eq!((r.prompt_tokens, r.completion_tokens), (Some(11), Some(3)));

    let seen = seen.lock().unwrap();
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer secret"));
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["messages"][1], json!({"role": "user", "content": "u"}));
}

#[test]
fn missing_usage_and_errors() {
    let reply = json!({"choices": [{"message": {"content": "ok"}}]});
    let base = serve(reply, StatusCode::OK, Arc::default());
    let r = HttpBackend::new(base, None).unwrap().send(&[Message::user("u")], &params()).unwrap();
    assert_eq!(r.prompt_tokens, None);

    let base = serve(json!({"error": "overloaded"}), StatusCode::SERVICE_UNAVAILABLE, Arc::default());
    let err = HttpBackend::new(base, None).unwrap().send(&[Message::user("u")], &params()).unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 503, .. }));

    let base = serve(json!({"choices": []}), StatusCode::OK, Arc::default());
    let err = HttpBackend::new(base, None).unwrap().send(&[Message::user("u")], &params()).unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)));

    // Nothing listens on port 9 of localhost.
    let err = HttpBackend::new("http://127.0.0.1:9", None).unwrap().send(&[Message::user("u")], &params()).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)));
}
