//! Rule-file backend that replays canned replies.
//!
//! One rule per line, `pattern => reply`. `\n` in either side stands for a
//! newline and `\\` for a backslash. The pattern `*` matches anything; any
//! other pattern is a literal substring of the last user or tool message.
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use super::{ChatModel, CompletionRequest, GatewayError};

const SEPARATOR: &str = " => ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Any,
    Literal(String),
}

impl Pattern {
    fn matches(&self, text: &str) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Literal(p) => text.contains(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRule {
    pub pattern: Pattern,
    pub reply: String,
}

impl ScriptRule {
    pub fn literal(pattern: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            pattern: Pattern::Literal(pattern.into()),
            reply: reply.into(),
        }
    }

    pub fn catch_all(reply: impl Into<String>) -> Self {
        Self {
            pattern: Pattern::Any,
            reply: reply.into(),
        }
    }
}

fn unescape(raw: &str) -> Result<String, String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('\n', "\\n")
}

/// Parses a rule file. Errors carry the 1-based line number.
pub fn parse_script(text: &str) -> Result<Vec<ScriptRule>, String> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (pattern, reply) = trimmed
            .split_once(SEPARATOR)
            .ok_or_else(|| format!("line {line_no}: missing `{}`", SEPARATOR.trim()))?;
        let pattern = pattern.trim();
        let reply = unescape(reply.trim()).map_err(|e| format!("line {line_no}: {e}"))?;
        if reply.is_empty() {
            return Err(format!("line {line_no}: empty reply"));
        }
        let pattern = match pattern {
            "*" => Pattern::Any,
            "" => return Err(format!("line {line_no}: empty pattern")),
            p => Pattern::Literal(unescape(p).map_err(|e| format!("line {line_no}: {e}"))?),
        };
        rules.push(ScriptRule { pattern, reply });
    }
    Ok(rules)
}

/// Inverse of [`parse_script`].
pub fn render_script(rules: &[ScriptRule]) -> String {
    let mut out = String::new();
    for rule in rules {
        let pattern = match &rule.pattern {
            Pattern::Any => "*".to_string(),
            Pattern::Literal(p) => escape(p),
        };
        out.push_str(&pattern);
        out.push_str(SEPARATOR);
        out.push_str(&escape(&rule.reply));
        out.push('\n');
    }
    out
}

/// Reply of the first rule matching the last user/tool message.
pub fn scripted_match(rules: &[ScriptRule], request: &CompletionRequest) -> Result<String, GatewayError> {
    let last = request.last_input().unwrap_or("");
    rules
        .iter()
        .find(|r| r.pattern.matches(last))
        .map(|r| r.reply.clone())
        .ok_or_else(|| GatewayError::ScriptExhausted(last.chars().take(200).collect()))
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
}

impl ScriptedBackend {
    pub fn from_rules(rules: Vec<ScriptRule>) -> Self {
        Self { rules }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path).map_err(|e| GatewayError::Script {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let rules = parse_script(&text).map_err(|reason| GatewayError::Script {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }
}

impl ChatModel for ScriptedBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        scripted_match(&self.rules, request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;
    use proptest::prelude::*;

    fn req(last: &str) -> CompletionRequest {
        CompletionRequest::new(
            vec![ChatMessage::system("s"), ChatMessage::user(last)],
            0.0,
            16,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn first_matching_rule_wins() {
        let rules = vec![ScriptRule::literal("storm", "A"), ScriptRule::catch_all("B")];
        assert_eq!(scripted_match(&rules, &req("storm risk?")).unwrap(), "A");
        assert_eq!(scripted_match(&rules, &req("news?")).unwrap(), "B");
    }

    #[test]
    fn no_match_is_exhausted() {
        let rules = vec![ScriptRule::literal("x", "A")];
        assert!(matches!(
            scripted_match(&rules, &req("y")),
            Err(GatewayError::ScriptExhausted(_))
        ));
    }

    #[test]
    fn parses_escapes_and_comments() {
        let text = "# comment\n\ntraffic => Thought: check\\nAction: traffic_status[{\"lat\":\"1\"}]\n* => Final Answer: a \\\\ b\n";
        let rules = parse_script(text).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].pattern, Pattern::Literal("traffic".into()));
        assert_eq!(rules[0].reply, "Thought: check\nAction: traffic_status[{\"lat\":\"1\"}]");
        assert_eq!(rules[1].pattern, Pattern::Any);
        assert_eq!(rules[1].reply, "Final Answer: a \\ b");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_script("no separator here").unwrap_err().contains("line 1"));
        assert!(parse_script("a => ok\n => empty pattern").unwrap_err().contains("line 2"));
        assert!(parse_script("a => bad \\q escape").is_err());
    }

    #[test]
    fn replays_traffic_rule_byte_for_byte() {
        let reply = "Thought: look at traffic\nAction: traffic_status[{\"lat\":\"33.712066\",\"lon\":\"-84.236439\"}]";
        let rules = vec![
            ScriptRule::literal("traffic", reply),
            ScriptRule::catch_all("Final Answer: none"),
        ];
        let text = render_script(&rules);
        let backend = ScriptedBackend::from_rules(parse_script(&text).unwrap());
        let out = backend.generate(&req("how is the traffic near hub h001?")).unwrap();
        assert_eq!(out.as_bytes(), reply.as_bytes());
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(
            pattern in "[a-zA-Z0-9 \\\\\n\\[\\]{}:\"=.,-]{1,30}",
            reply in "[a-zA-Z0-9 \\\\\n\\[\\]{}:\"=.,-]{1,60}",
        ) {
            let pattern = pattern.trim().to_string();
            let reply = reply.trim().to_string();
            prop_assume!(!pattern.is_empty() && !reply.is_empty() && pattern != "*");
            prop_assume!(!pattern.contains(" => ") && !pattern.starts_with('#'));
            prop_assume!(!reply.contains(" => "));
            let rules = vec![ScriptRule::literal(pattern, reply)];
            prop_assert_eq!(parse_script(&render_script(&rules)).unwrap(), rules);
        }
    }
}
