use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const EXECUTE_CODE_TOOL: &str = "execute_code_ipython_shell";
pub const SUBMIT_TOOL: &str = "submit_clean_data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

impl ToolCall {
    pub fn new(id: impl Into<String>, name: &str, arguments: Value) -> Self {
        ToolCall { id: id.into(), name: name.to_string(), arguments }
    }

    pub fn execute_code(id: impl Into<String>, code: &str) -> Self {
        Self::new(id, EXECUTE_CODE_TOOL, json!({ "code": code }))
    }

    pub fn submit(id: impl Into<String>, path: &str) -> Self {
        Self::new(id, SUBMIT_TOOL, json!({ "path": path }))
    }

    /// String argument `key`, if present.
    pub fn arg(&self, key: &str) -> Option<&str> {
        self.arguments.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into(), tool_calls: Vec::new(), tool_call_id: None, name: None }
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Message { role: Role::Assistant, content: content.into(), tool_calls, tool_call_id: None, name: None }
    }

    pub fn tool(call: &ToolCall, content: impl Into<String>) -> Self {
        Message {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call.id.clone()),
            name: Some(call.name.clone()),
        }
    }

    /// Characters that count toward the token estimate: the content plus the
    /// serialized arguments of any tool calls.
    pub fn char_len(&self) -> usize {
        self.content.chars().count()
            + self.tool_calls.iter().map(|c| c.name.chars().count() + c.arguments.to_string().chars().count()).sum::<usize>()
    }
}

/// The full prompt presented to the agent: the initial prompt followed by
/// every earlier output and tool response, in order. Nothing is ever
/// removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<Message>,
}

impl Conversation {
    pub fn new(initial_prompt: &str) -> Self {
        Conversation { messages: vec![Message::user(initial_prompt)] }
    }

    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn initial_prompt(&self) -> &str {
        self.messages.first().map_or("", |m| m.content.as_str())
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn last(&self) -> Option<&Message> {
        self.messages.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// JSON schema of the arguments object.
    pub parameters: Value,
}

/// The two tools every agent is offered.
pub fn tool_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: EXECUTE_CODE_TOOL.into(),
            description: "Execute Python code in a persistent IPython session. Variables and outputs from earlier \
                          runs remain available. Returns the standard output produced during execution."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {"code": {"type": "string", "description": "Python code to execute"}},
                "required": ["code"]
            }),
        },
        ToolSpec {
            name: SUBMIT_TOOL.into(),
            description: "Train the fixed model on the given cleaned training file and return its F1 score on the \
                          held-out test set."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {"path": {"type": "string", "description": "Path of the cleaned CSV, e.g. train_cleaned_v1.csv"}},
                "required": ["path"]
            }),
        },
    ]
}
