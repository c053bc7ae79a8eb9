use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use scrub_core::agent::llm::ChatClient;
use scrub_core::agent::{respond_with_retry, tool_specs, Agent, AgentError, Conversation, RetryPolicy};
use serde_json::{json, Value};

/// Serve one canned (status, body) per connection and hand back each
/// request's authorization header and JSON body.
fn serve(responses: Vec<(u16, Value)>) -> (String, mpsc::Receiver<(String, Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let lower = l.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = l["authorization:".len()..].trim().to_string();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            tx.send((auth, serde_json::from_slice(&buf).unwrap())).unwrap();
            let text = body.to_string();
            let mut out = stream;
            write!(out, "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}", text.len())
                .unwrap();
        }
    });
    (url, rx)
}

fn tool_reply() -> Value {
    json!({
        "choices": [{"message": {"role": "assistant", "content": "checking", "tool_calls": [
            {"id": "c1", "type": "function", "function": {"name": "submit_clean_data", "arguments": "{\"path\":\"train_cleaned_v1.csv\"}"}}
        ]}}],
        "usage": {"prompt_tokens": 900, "completion_tokens": 12}
    })
}

#[test]
fn retries_server_errors_then_parses_tool_calls() {
    let (url, rx) = serve(vec![(503, json!({"error": "busy"})), (429, json!({"error": "slow down"})), (200, tool_reply())]);
    let mut client = ChatClient::new(url, "test-model").with_api_key("k123").with_temperature(Some(0.2));
    let policy = RetryPolicy { max_retries: 3, base_delay_ms: 1, max_delay_ms: 4 };
    let reply = respond_with_retry(&mut client, &Conversation::new("p0"), &tool_specs(), &policy).unwrap();
    assert_eq!(reply.content, "checking");
    assert_eq!(reply.tool_calls[0].arg("path"), Some("train_cleaned_v1.csv"));
    assert_eq!(reply.usage.unwrap().total(), 912);

    let requests: Vec<(String, Value)> = rx.iter().take(3).collect();
    for (auth, body) in &requests {
        assert_eq!(auth, "Bearer k123");
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][0], json!({"role": "user", "content": "p0"}));
        assert_eq!(body["tools"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn client_errors_are_not_retried() {
    let (url, _rx) = serve(vec![(401, json!({"error": "bad key"}))]);
    let mut client = ChatClient::new(url, "m");
    let err = client.respond(&Conversation::new("p0"), &tool_specs()).unwrap_err();
    assert!(matches!(err, AgentError::Fatal(ref m) if m.contains("401")), "{err:?}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let err = ChatClient::new(url, "m").respond(&Conversation::new("p0"), &[]).unwrap_err();
    assert!(matches!(err, AgentError::Transport(_)));
}
