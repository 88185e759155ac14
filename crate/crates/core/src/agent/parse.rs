//! Text protocol between the runtime and the model.
//!
//! ```text
//! Thought: <reasoning>
//! Action: <tool_name>[{"arg": "value", ...}]
//! ```
//! or
//! ```text
//! Thought: <reasoning>
//! Final Answer: <answer>
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

const THOUGHT: &str = "Thought:";
const ACTION: &str = "Action:";
const FINAL: &str = "Final Answer:";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool_name: String,
    pub arguments: BTreeMap<String, String>,
}

impl ToolInvocation {
    pub fn new<K, V, I>(tool_name: impl Into<String>, arguments: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            tool_name: tool_name.into(),
            arguments: arguments
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelOutput {
    Action { thought: String, invocation: ToolInvocation },
    Final { thought: String, answer: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparseable model output: {reason}")]
pub struct ParseError {
    pub reason: String,
}

fn is_tool_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses `name[{json}]` at the start of `rest`.
fn parse_action(rest: &str) -> Result<ToolInvocation, String> {
    let rest = rest.trim_start();
    let open = rest.find('[').ok_or("action lacks `[`")?;
    let name = rest[..open].trim();
    if !is_tool_name(name) {
        return Err(format!("bad tool name {name:?}"));
    }
    let after = &rest[open + 1..];
    let mut stream = serde_json::Deserializer::from_str(after).into_iter::<Value>();
    let value = match stream.next() {
        Some(Ok(v)) => v,
        Some(Err(e)) => return Err(format!("arguments are not JSON: {e}")),
        None => return Err("missing arguments object".into()),
    };
    let consumed = stream.byte_offset();
    if !after[consumed..].trim_start().starts_with(']') {
        return Err("arguments not closed by `]`".into());
    }
    let Value::Object(map) = value else {
        return Err("arguments must be a JSON object".into());
    };
    let mut arguments = BTreeMap::new();
    for (k, v) in map {
        let text = match v {
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            other => return Err(format!("argument {k:?} must be a string, got {other}")),
        };
        arguments.insert(k, text);
    }
    Ok(ToolInvocation {
        tool_name: name.to_string(),
        arguments,
    })
}

/// Parses the first well-formed Action or Final Answer block.
pub fn parse_model_output(text: &str) -> Result<ModelOutput, ParseError> {
    let mut offsets = Vec::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        offsets.push((pos, line));
        pos += line.len();
    }

    let mut thought_start: Option<usize> = None;
    let mut last_reason = None;
    for (offset, line) in &offsets {
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        let body_at = offset + indent;
        if trimmed.starts_with(THOUGHT) {
            thought_start = Some(body_at + THOUGHT.len());
            continue;
        }
        let marker = if trimmed.starts_with(ACTION) {
            ACTION
        } else if trimmed.starts_with(FINAL) {
            FINAL
        } else {
            continue;
        };
        let thought = thought_start
            .map(|s| text[s..body_at].trim().to_string())
            .unwrap_or_default();
        let rest = &text[body_at + marker.len()..];
        if marker == FINAL {
            let answer = rest.trim();
            if answer.is_empty() {
                last_reason = Some("empty final answer".to_string());
                continue;
            }
            return Ok(ModelOutput::Final {
                thought,
                answer: answer.to_string(),
            });
        }
        match parse_action(rest) {
            Ok(invocation) => return Ok(ModelOutput::Action { thought, invocation }),
            Err(reason) => last_reason = Some(reason),
        }
    }
    Err(ParseError {
        reason: last_reason.unwrap_or_else(|| "no `Action:` or `Final Answer:` line".to_string()),
    })
}

pub fn render_action(thought: &str, invocation: &ToolInvocation) -> String {
    let args = serde_json::to_string(&invocation.arguments).expect("string map serializes");
    format!("{THOUGHT} {thought}\n{ACTION} {}[{args}]", invocation.tool_name)
}

pub fn render_final(thought: &str, answer: &str) -> String {
    format!("{THOUGHT} {thought}\n{FINAL} {answer}")
}

pub fn render_output(output: &ModelOutput) -> String {
    match output {
        ModelOutput::Action { thought, invocation } => render_action(thought, invocation),
        ModelOutput::Final { thought, answer } => render_final(thought, answer),
    }
}
