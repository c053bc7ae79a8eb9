//! Chat-completions client with function calling.

use std::time::Duration;

use serde_json::{json, Value};

use super::conversation::{Conversation, Role, ToolCall, ToolSpec};
use super::tokens::TokenUsage;
use super::{Agent, AgentError, AgentReply};

pub const API_KEY_ENVS: [&str; 2] = ["SCRUB_LLM_API_KEY", "OPENAI_API_KEY"];
pub const ENDPOINT_ENV: &str = "SCRUB_LLM_ENDPOINT";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone)]
pub struct ChatClient {
    endpoint: String,
    model: String,
    temperature: Option<f64>,
    api_key: Option<String>,
    timeout: Duration,
}

impl ChatClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ChatClient { endpoint: endpoint.into(), model: model.into(), temperature: None, api_key: None, timeout: Duration::from_secs(300) }
    }

    /// Endpoint and key from the environment; an empty `endpoint` falls back
    /// to the environment, then to the public default.
    pub fn from_env(endpoint: &str, model: &str) -> Self {
        let endpoint = if endpoint.is_empty() {
            std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| DEFAULT_ENDPOINT.to_string())
        } else {
            endpoint.to_string()
        };
        let key = API_KEY_ENVS.iter().find_map(|k| std::env::var(k).ok().filter(|v| !v.is_empty()));
        ChatClient { api_key: key, ..Self::new(endpoint, model) }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_temperature(mut self, t: Option<f64>) -> Self {
        self.temperature = t;
        self
    }

    pub fn with_timeout(mut self, t: Duration) -> Self {
        self.timeout = t;
        self
    }

    pub fn request_body(&self, conversation: &Conversation, tools: &[ToolSpec]) -> Value {
        let messages: Vec<Value> = conversation
            .messages
            .iter()
            .map(|m| match m.role {
                Role::User => json!({"role": "user", "content": m.content}),
                Role::Assistant if m.tool_calls.is_empty() => json!({"role": "assistant", "content": m.content}),
                Role::Assistant => json!({
                    "role": "assistant",
                    "content": if m.content.is_empty() { Value::Null } else { Value::String(m.content.clone()) },
                    "tool_calls": m.tool_calls.iter().map(|c| json!({
                        "id": c.id,
                        "type": "function",
                        "function": {"name": c.name, "arguments": c.arguments.to_string()},
                    })).collect::<Vec<_>>(),
                }),
                Role::Tool => json!({
                    "role": "tool",
                    "tool_call_id": m.tool_call_id.clone().unwrap_or_default(),
                    "content": m.content,
                }),
            })
            .collect();
        let tools: Vec<Value> = tools
            .iter()
            .map(|t| json!({"type": "function", "function": {"name": t.name, "description": t.description, "parameters": t.parameters}}))
            .collect();
        let mut body = json!({"model": self.model, "messages": messages, "tools": tools});
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

/// Turn a chat-completions response body into a reply.
pub fn parse_response(v: &Value) -> Result<AgentReply, AgentError> {
    let message = v
        .pointer("/choices/0/message")
        .ok_or_else(|| AgentError::Fatal(format!("response has no choices: {v}")))?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or("").to_string();
    let mut tool_calls = Vec::new();
    for call in message.get("tool_calls").and_then(Value::as_array).into_iter().flatten() {
        let id = call.get("id").and_then(Value::as_str).unwrap_or("").to_string();
        let name = call.pointer("/function/name").and_then(Value::as_str).unwrap_or("").to_string();
        let raw = call.pointer("/function/arguments").cloned().unwrap_or(Value::Null);
        // Arguments arrive as a JSON string; keep unparsable text as-is so the
        // tool can report it.
        let arguments = match raw {
            Value::String(s) => serde_json::from_str(&s).unwrap_or(Value::String(s)),
            other => other,
        };
        tool_calls.push(ToolCall { id, name, arguments });
    }
    let usage = v.get("usage").and_then(|u| {
        let input = u.get("prompt_tokens")?.as_u64()?;
        let output = u.get("completion_tokens")?.as_u64()?;
        Some(TokenUsage::reported(input, output))
    });
    Ok(AgentReply { content, tool_calls, usage })
}

impl Agent for ChatClient {
    fn name(&self) -> String {
        self.model.clone()
    }

    fn respond(&mut self, conversation: &Conversation, tools: &[ToolSpec]) -> Result<AgentReply, AgentError> {
        let body = self.request_body(conversation, tools);
        let mut req = ureq::post(&self.endpoint).timeout(self.timeout).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(resp) => {
                let v: Value = resp.into_json().map_err(|e| AgentError::Transport(format!("unreadable response: {e}")))?;
                parse_response(&v)
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                if code == 429 || code >= 500 {
                    Err(AgentError::Transport(format!("HTTP {code}: {text}")))
                } else {
                    Err(AgentError::Fatal(format!("HTTP {code}: {text}")))
                }
            }
            Err(e) => Err(AgentError::Transport(e.to_string())),
        }
    }
}
