//! ReAct agent runtime with a token-budgeted memory window and a
//! persistent notebook for long-term storage.

mod memory;
mod notebook;
mod parse;
mod runtime;

pub use memory::{memory_window, step_messages, step_tokens, BudgetTooSmall};
pub use notebook::{notebook_batches, Notebook, NotebookError, NotebookRecord};
pub use parse::{
    parse_model_output, render_action, render_final, render_output, ModelOutput, ParseError,
    ToolInvocation,
};
pub use runtime::{
    render_system_prompt, run_agent, AgentConfig, AgentRuntime, AgentStep, AgentTrace,
    RejectedOutput, StepAction, TerminationReason, DEFAULT_MAX_STEPS, DEFAULT_SYSTEM_PROMPT,
    MAX_REPROMPTS, OBSERVATION_PREFIX,
};
