use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ToolError;
use crate::agent::ToolInvocation;

/// Flat string arguments of one tool call.
pub type Args = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentSpec {
    pub name: String,
    pub required: bool,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    /// Arguments in declaration order.
    pub arguments: Vec<ArgumentSpec>,
}

impl ToolSpec {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            arguments: Vec::new(),
        }
    }

    pub fn required(self, name: &str, doc: &str) -> Self {
        self.argument(name, true, doc)
    }

    pub fn optional(self, name: &str, doc: &str) -> Self {
        self.argument(name, false, doc)
    }

    fn argument(mut self, name: &str, required: bool, doc: &str) -> Self {
        self.arguments.push(ArgumentSpec {
            name: name.to_string(),
            required,
            doc: doc.to_string(),
        });
        self
    }

    /// Example call line, e.g. `storm_events[{"lat": "..", "lon": ".."}]`.
    pub fn usage(&self) -> String {
        let args: Vec<String> = self
            .arguments
            .iter()
            .map(|a| {
                let opt = if a.required { "" } else { "?" };
                format!("\"{}{opt}\": \"...\"", a.name)
            })
            .collect();
        format!("{}[{{{}}}]", self.name, args.join(", "))
    }

    fn validate(&self, args: &Args) -> Result<(), ToolError> {
        for a in self.arguments.iter().filter(|a| a.required) {
            if args.get(&a.name).is_none_or(|v| v.trim().is_empty()) {
                return Err(ToolError::MissingArgument {
                    tool: self.name.clone(),
                    argument: a.name.clone(),
                    usage: self.usage(),
                });
            }
        }
        if let Some(extra) = args.keys().find(|k| !self.arguments.iter().any(|a| &a.name == *k)) {
            return Err(ToolError::UnexpectedArgument {
                tool: self.name.clone(),
                argument: extra.clone(),
                usage: self.usage(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub records: Value,
    pub narrative: String,
    pub source: Source,
}

impl ToolResult {
    pub fn new(records: Value, narrative: impl Into<String>, source: Source) -> Self {
        Self {
            records,
            narrative: narrative.into(),
            source,
        }
    }
}

pub trait ToolHandler: Send + Sync {
    fn call(&self, args: &Args) -> Result<ToolResult, ToolError>;
}

impl<F> ToolHandler for F
where
    F: Fn(&Args) -> Result<ToolResult, ToolError> + Send + Sync,
{
    fn call(&self, args: &Args) -> Result<ToolResult, ToolError> {
        self(args)
    }
}

#[derive(Clone)]
struct Entry {
    spec: ToolSpec,
    handler: Arc<dyn ToolHandler>,
}

/// Tools by name, in registration order. Cheap to clone.
#[derive(Clone, Default)]
pub struct ToolRegistry {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

impl std::fmt::Debug for ToolRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register<H: ToolHandler + 'static>(&mut self, spec: ToolSpec, handler: H) -> Result<(), ToolError> {
        self.register_arc(spec, Arc::new(handler))
    }

    pub fn register_arc(&mut self, spec: ToolSpec, handler: Arc<dyn ToolHandler>) -> Result<(), ToolError> {
        if self.index.contains_key(&spec.name) {
            return Err(ToolError::DuplicateTool(spec.name));
        }
        self.index.insert(spec.name.clone(), self.entries.len());
        self.entries.push(Entry { spec, handler });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.spec.name.as_str()).collect()
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.index.get(name).map(|&i| &self.entries[i].spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.entries.iter().map(|e| &e.spec)
    }

    /// Validates arguments against the spec, then runs the handler.
    pub fn dispatch(&self, name: &str, args: &Args) -> Result<ToolResult, ToolError> {
        let entry = self
            .index
            .get(name)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| ToolError::UnknownTool {
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        entry.spec.validate(args)?;
        let result = entry.handler.call(args)?;
        if result.narrative.trim().is_empty() {
            return Err(ToolError::Failed(format!("{name} produced an empty narrative")));
        }
        Ok(result)
    }

    /// Observation text for the agent: the narrative, or an `error: ...`
    /// note the model can react to.
    pub fn observe(&self, invocation: &ToolInvocation) -> String {
        match self.dispatch(&invocation.tool_name, &invocation.arguments) {
            Ok(result) => result.narrative,
            Err(e) => format!("error: {e}"),
        }
    }

    /// One `- name: description` line per tool, with its arguments.
    pub fn render_prompt_list(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(out, "- {}: {}", e.spec.name, e.spec.description);
            if !e.spec.arguments.is_empty() {
                let args: Vec<String> = e
                    .spec
                    .arguments
                    .iter()
                    .map(|a| {
                        let kind = if a.required { "required" } else { "optional" };
                        format!("{} ({kind}): {}", a.name, a.doc)
                    })
                    .collect();
                let _ = write!(out, " Arguments: {}.", args.join("; "));
            }
            out.push('\n');
        }
        out.truncate(out.trim_end().len());
        out
    }

    /// A registry holding only `names`, in the order given.
    pub fn restricted_to<S: AsRef<str>>(&self, names: &[S]) -> Result<ToolRegistry, ToolError> {
        let mut sub = ToolRegistry::new();
        for name in names {
            let name = name.as_ref();
            let &i = self.index.get(name).ok_or_else(|| ToolError::UnknownTool {
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
            sub.register_arc(self.entries[i].spec.clone(), self.entries[i].handler.clone())?;
        }
        Ok(sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn constant(text: &'static str) -> impl Fn(&Args) -> Result<ToolResult, ToolError> {
        move |_| Ok(ToolResult::new(json!(null), text, Source::Fixture))
    }

    fn registry_of(n: usize) -> ToolRegistry {
        let mut reg = ToolRegistry::new();
        for i in 0..n {
            reg.register(ToolSpec::new(format!("t{i}"), format!("tool {i}")), constant("ok"))
                .unwrap();
        }
        reg
    }

    #[test]
    fn prompt_list_follows_registration_order() {
        let list = registry_of(7).render_prompt_list();
        let lines: Vec<_> = list.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("- t0:"));
        assert!(lines[6].starts_with("- t6:"));
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut reg = registry_of(1);
        let err = reg.register(ToolSpec::new("t0", "again"), constant("x")).unwrap_err();
        assert!(matches!(err, ToolError::DuplicateTool(n) if n == "t0"));
    }

    #[test]
    fn unknown_tool_observation() {
        let reg = registry_of(2);
        let obs = reg.observe(&ToolInvocation::new("zzz", Vec::<(String, String)>::new()));
        assert_eq!(obs, "error: unknown tool zzz; available: t0, t1");
    }

    #[test]
    fn missing_and_unexpected_arguments_carry_usage() {
        let mut reg = ToolRegistry::new();
        reg.register(
            ToolSpec::new("geo", "d").required("lat", "latitude").optional("r", "radius"),
            constant("ok"),
        )
        .unwrap();
        let obs = reg.observe(&ToolInvocation::new("geo", [("r", "5")]));
        assert!(obs.starts_with("error: missing required argument `lat`"), "{obs}");
        assert!(obs.contains("geo[{\"lat\": \"...\", \"r?\": \"...\"}]"));
        let obs = reg.observe(&ToolInvocation::new("geo", [("lat", "1"), ("x", "2")]));
        assert!(obs.contains("unexpected argument `x`"), "{obs}");
        assert_eq!(reg.observe(&ToolInvocation::new("geo", [("lat", "1")])), "ok");
    }

    #[test]
    fn empty_narrative_is_an_error() {
        let mut reg = ToolRegistry::new();
        reg.register(ToolSpec::new("blank", "d"), constant("  ")).unwrap();
        assert!(reg.dispatch("blank", &Args::new()).is_err());
    }

    #[test]
    fn restriction_keeps_requested_order() {
        let sub = registry_of(4).restricted_to(&["t3", "t1"]).unwrap();
        assert_eq!(sub.names(), ["t3", "t1"]);
        assert!(registry_of(2).restricted_to(&["nope"]).is_err());
    }
}
