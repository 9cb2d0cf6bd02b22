//! Remote backend against a local stub HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde_json::{json, Value};
use teleop_core::agent::Message;
use teleop_core::models::{ModelBackend, ModelError, ModelRequest, RemoteBackend, RemoteConfig, RetryPolicy};

#[derive(Debug, Clone)]
struct Seen {
    auth: Option<String>,
    body: Value,
}

/// Serve one canned (status, body) per connection, in order.
fn stub(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, reply) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().push(Seen {
                auth,
                body: serde_json::from_slice(&body).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn config(url: &str) -> RemoteConfig {
    let mut c = RemoteConfig::new(url, "test-model");
    c.retry = RetryPolicy {
        delays: vec![Duration::from_millis(5); 3],
    };
    c.timeout = Duration::from_secs(5);
    c
}

fn request() -> ModelRequest {
    ModelRequest {
        messages: vec![Message::system("You are a robot."), Message::new(teleop_core::agent::Role::User, "hi", 1)],
        tools: vec![json!({"name": "node_list"})],
    }
}

const OK: &str = r#"{"choices":[{"message":{"content":"Hello."}}]}"#;

#[test]
fn two_failures_then_success_is_three_requests() {
    let (url, seen) = stub(vec![(503, "{}".into()), (500, "{}".into()), (200, OK.into())]);
    let mut b = RemoteBackend::with_key(config(&url), Some("k-123".into()));
    let r = b.complete(&request()).unwrap();
    assert_eq!(r.content, "Hello.");
    assert_eq!(b.requests_sent(), 3);
    let seen = seen.lock();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer k-123"));
    assert_eq!(seen[0].body["model"], "test-model");
    assert_eq!(seen[0].body["messages"][1], json!({"role": "user", "content": "hi"}));
    assert_eq!(seen[0].body["tools"], json!([{"name": "node_list"}]));
}

#[test]
fn retries_are_bounded() {
    let (url, _) = stub(vec![(503, "{}".into()); 4]);
    let mut b = RemoteBackend::with_key(config(&url), Some("k".into()));
    match b.complete(&request()) {
        Err(ModelError::BackendUnavailable { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("{other:?}"),
    }
    assert_eq!(b.requests_sent(), 4);
}

#[test]
fn auth_errors_are_not_retried() {
    let (url, _) = stub(vec![(401, "{}".into()), (200, OK.into())]);
    let mut b = RemoteBackend::with_key(config(&url), Some("bad".into()));
    assert!(matches!(b.complete(&request()), Err(ModelError::AuthError(_))));
    assert_eq!(b.requests_sent(), 1);
}

#[test]
fn provider_tool_calls_are_mapped() {
    let reply = json!({"choices": [{"message": {"content": "", "tool_calls": [
        {"id": "a", "function": {"name": "get_battery_status", "arguments": "{}"}},
        {"id": "b", "function": {"name": "get_cpu_status", "arguments": {}}}
    ]}}]});
    let (url, _) = stub(vec![(200, reply.to_string())]);
    let mut b = RemoteBackend::with_key(config(&url), Some("k".into()));
    let r = b.complete(&request()).unwrap();
    let v: Value = serde_json::from_str(&r.content).unwrap();
    assert_eq!(v["tool_calls"][0]["name"], "get_battery_status");
    assert_eq!(v["tool_calls"][1]["group"], 0);
    assert!(v.get("reasoning").is_none());
}

#[test]
fn unmappable_reply_is_reported() {
    let (url, _) = stub(vec![(200, r#"{"weird": 1}"#.into())]);
    let mut b = RemoteBackend::with_key(config(&url), Some("k".into()));
    assert!(matches!(b.complete(&request()), Err(ModelError::ResponseMappingError(_))));
}
