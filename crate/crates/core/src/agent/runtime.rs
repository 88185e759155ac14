use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::memory::memory_window;
use super::parse::{parse_model_output, ModelOutput, ToolInvocation};
use crate::gateway::{ChatMessage, ChatModel, CompletionRequest, PIPELINE_TEMPERATURE};
use crate::tools::ToolRegistry;

pub const DEFAULT_MAX_STEPS: usize = 8;
/// Corrective re-prompts allowed per step after unparseable output.
pub const MAX_REPROMPTS: usize = 2;
pub const DEFAULT_SYSTEM_PROMPT: &str = include_str!("../../prompts/system.txt");
pub const OBSERVATION_PREFIX: &str = "Observation: ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Tool(ToolInvocation),
    FinalAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStep {
    pub thought: String,
    pub action: StepAction,
    /// Empty for the final-answer step.
    pub observation: String,
}

impl AgentStep {
    pub fn invocation(&self) -> Option<&ToolInvocation> {
        match &self.action {
            StepAction::Tool(inv) => Some(inv),
            StepAction::FinalAnswer => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Answered,
    StepLimit,
    ProtocolFailure,
}

/// Model output that could not be parsed and was answered with a
/// corrective re-prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedOutput {
    pub step: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub task_id: String,
    pub system_prompt: String,
    pub task_prompt: String,
    pub steps: Vec<AgentStep>,
    pub final_answer: String,
    pub terminated_reason: TerminationReason,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_outputs: Vec<RejectedOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AgentTrace {
    fn new(task_id: &str, system_prompt: String, task_prompt: &str) -> Self {
        Self {
            task_id: task_id.to_string(),
            system_prompt,
            task_prompt: task_prompt.to_string(),
            steps: Vec::new(),
            final_answer: String::new(),
            terminated_reason: TerminationReason::StepLimit,
            rejected_outputs: Vec::new(),
            error: None,
        }
    }

    pub fn answered(&self) -> bool {
        self.terminated_reason == TerminationReason::Answered
    }

    /// Tool invocations in step order.
    pub fn invocations(&self) -> impl Iterator<Item = &ToolInvocation> {
        self.steps.iter().filter_map(AgentStep::invocation)
    }

    fn fail(mut self, error: String) -> Self {
        self.terminated_reason = TerminationReason::ProtocolFailure;
        self.error = Some(error);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub max_steps: usize,
    /// Token budget for the message window sent on each call.
    pub memory_token_budget: usize,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            memory_token_budget: 8_000,
            max_output_tokens: 1_024,
            temperature: PIPELINE_TEMPERATURE,
        }
    }
}

pub fn render_system_prompt(template: &str, registry: &ToolRegistry, task: &str) -> String {
    template
        .replace("{tools}", &registry.render_prompt_list())
        .replace("{task}", task)
}

fn corrective_message(reason: &str) -> String {
    format!(
        "{OBSERVATION_PREFIX}error: {reason}. Reply with `Thought: <reasoning>` followed by either \
         `Action: <tool_name>[{{\"arg\": \"value\"}}]` or `Final Answer: <answer>`."
    )
}

/// The ReAct loop: ask the model, parse, dispatch, observe, repeat.
#[derive(Clone)]
pub struct AgentRuntime {
    model: Arc<dyn ChatModel>,
    system_template: String,
    config: AgentConfig,
}

impl AgentRuntime {
    pub fn new(model: Arc<dyn ChatModel>) -> Self {
        Self {
            model,
            system_template: DEFAULT_SYSTEM_PROMPT.to_string(),
            config: AgentConfig::default(),
        }
    }

    pub fn with_system_template(mut self, template: impl Into<String>) -> Self {
        self.system_template = template.into();
        self
    }

    pub fn with_config(mut self, config: AgentConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    /// Runs one task to completion. Never fails: problems end up in
    /// `terminated_reason`, `error` and the step observations.
    pub fn run(&self, task_id: &str, task_prompt: &str, registry: &ToolRegistry) -> AgentTrace {
        let system = render_system_prompt(&self.system_template, registry, task_prompt);
        let mut trace = AgentTrace::new(task_id, system, task_prompt);
        if registry.is_empty() {
            return trace.fail("tool registry is empty".into());
        }
        if task_prompt.trim().is_empty() {
            return trace.fail("task prompt is empty".into());
        }
        let max_steps = self.config.max_steps.max(1);

        while trace.steps.len() < max_steps {
            let window = match memory_window(&trace, self.config.memory_token_budget) {
                Ok(w) => w,
                Err(e) => return trace.fail(e.to_string()),
            };
            let mut retries: Vec<ChatMessage> = Vec::new();
            let mut parsed = None;
            for _ in 0..=MAX_REPROMPTS {
                let mut messages = window.clone();
                messages.extend(retries.iter().cloned());
                let request = match CompletionRequest::new(
                    messages,
                    self.config.temperature,
                    self.config.max_output_tokens,
                    vec![format!("\n{}", OBSERVATION_PREFIX.trim_end())],
                ) {
                    Ok(r) => r,
                    Err(e) => return trace.fail(e.to_string()),
                };
                let text = match self.model.complete(&request) {
                    Ok(t) => t,
                    Err(e) => return trace.fail(e.to_string()),
                };
                match parse_model_output(&text) {
                    Ok(out) => {
                        parsed = Some(out);
                        break;
                    }
                    Err(e) => {
                        trace.rejected_outputs.push(RejectedOutput {
                            step: trace.steps.len(),
                            text: text.clone(),
                            reason: e.reason.clone(),
                        });
                        retries.push(ChatMessage::assistant(text));
                        retries.push(ChatMessage::user(corrective_message(&e.reason)));
                    }
                }
            }
            let Some(output) = parsed else {
                return trace.fail(format!(
                    "model output unparseable after {MAX_REPROMPTS} corrective re-prompts"
                ));
            };
            match output {
                ModelOutput::Final { thought, answer } => {
                    trace.steps.push(AgentStep {
                        thought,
                        action: StepAction::FinalAnswer,
                        observation: String::new(),
                    });
                    trace.final_answer = answer;
                    trace.terminated_reason = TerminationReason::Answered;
                    return trace;
                }
                ModelOutput::Action { thought, invocation } => {
                    let observation = registry.observe(&invocation);
                    trace.steps.push(AgentStep {
                        thought,
                        action: StepAction::Tool(invocation),
                        observation,
                    });
                }
            }
        }
        trace.terminated_reason = TerminationReason::StepLimit;
        trace
    }
}

/// Runs a single task with default settings and task id `task`.
pub fn run_agent(
    task_prompt: &str,
    registry: &ToolRegistry,
    model: Arc<dyn ChatModel>,
    max_steps: usize,
) -> AgentTrace {
    AgentRuntime::new(model)
        .with_config(AgentConfig {
            max_steps,
            ..AgentConfig::default()
        })
        .run("task", task_prompt, registry)
}
