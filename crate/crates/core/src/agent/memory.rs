use thiserror::Error;

use super::parse::{render_action, render_final};
use super::runtime::{AgentStep, AgentTrace, StepAction, OBSERVATION_PREFIX};
use crate::gateway::{estimate_tokens, ChatMessage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("token budget {budget} is below the {needed} tokens of the system and task prompts")]
pub struct BudgetTooSmall {
    pub needed: usize,
    pub budget: usize,
}

/// The assistant turn (and observation turn, for tool steps) of one step.
pub fn step_messages(step: &AgentStep, final_answer: &str) -> Vec<ChatMessage> {
    match &step.action {
        StepAction::Tool(inv) => vec![
            ChatMessage::assistant(render_action(&step.thought, inv)),
            ChatMessage::tool(format!("{OBSERVATION_PREFIX}{}", step.observation)),
        ],
        StepAction::FinalAnswer => vec![ChatMessage::assistant(render_final(&step.thought, final_answer))],
    }
}

pub fn step_tokens(step: &AgentStep, final_answer: &str) -> usize {
    step_messages(step, final_answer)
        .iter()
        .map(|m| estimate_tokens(&m.content))
        .sum()
}

/// System prompt, task prompt and as many of the most recent whole steps
/// as fit in `token_budget`.
pub fn memory_window(trace: &AgentTrace, token_budget: usize) -> Result<Vec<ChatMessage>, BudgetTooSmall> {
    let fixed = estimate_tokens(&trace.system_prompt) + estimate_tokens(&trace.task_prompt);
    if fixed > token_budget {
        return Err(BudgetTooSmall {
            needed: fixed,
            budget: token_budget,
        });
    }
    let mut remaining = token_budget - fixed;
    let mut kept = 0;
    for step in trace.steps.iter().rev() {
        let cost = step_tokens(step, &trace.final_answer);
        if cost > remaining {
            break;
        }
        remaining -= cost;
        kept += 1;
    }
    let first = trace.steps.len() - kept;
    let mut messages = vec![
        ChatMessage::system(trace.system_prompt.clone()),
        ChatMessage::user(trace.task_prompt.clone()),
    ];
    for step in &trace.steps[first..] {
        messages.extend(step_messages(step, &trace.final_answer));
    }
    Ok(messages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{TerminationReason, ToolInvocation};

    fn trace_with(steps: Vec<AgentStep>) -> AgentTrace {
        AgentTrace {
            task_id: "t".into(),
            system_prompt: "You are a risk analyst.".into(),
            task_prompt: "Assess hub h001.".into(),
            steps,
            final_answer: String::new(),
            terminated_reason: TerminationReason::StepLimit,
            rejected_outputs: vec![],
            error: None,
        }
    }

    /// A tool step whose two messages together estimate to exactly 100 tokens.
    fn step_of_100(i: usize) -> AgentStep {
        let mut step = AgentStep {
            thought: format!("t{i}"),
            action: StepAction::Tool(ToolInvocation::new("echo", [("k", "v")])),
            observation: String::new(),
        };
        let base = step_tokens(&step, "");
        let obs_chars = (100 - base) * 4;
        step.observation = "x".repeat(obs_chars);
        assert_eq!(step_tokens(&step, ""), 100);
        step
    }

    #[test]
    fn small_trace_is_kept_whole() {
        let t = trace_with(vec![step_of_100(0)]);
        let w = memory_window(&t, 10_000).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w[1].content, "Assess hub h001.");
    }

    #[test]
    fn keeps_most_recent_steps_that_fit() {
        let steps: Vec<_> = (0..10).map(step_of_100).collect();
        let t = trace_with(steps);
        let fixed = estimate_tokens(&t.system_prompt) + estimate_tokens(&t.task_prompt);
        let w = memory_window(&t, fixed + 5 * 100 + 50).unwrap();
        // system + task + 5 steps × (assistant + observation)
        assert_eq!(w.len(), 2 + 10);
        assert!(w[2].content.contains("Thought: t5"));
        assert!(w[10].content.contains("Thought: t9"));
    }

    #[test]
    fn budget_below_prompts_is_rejected() {
        let t = trace_with(vec![]);
        assert!(memory_window(&t, 3).is_err());
    }

    #[test]
    fn never_drops_task_prompt() {
        let steps: Vec<_> = (0..3).map(step_of_100).collect();
        let t = trace_with(steps);
        let fixed = estimate_tokens(&t.system_prompt) + estimate_tokens(&t.task_prompt);
        let w = memory_window(&t, fixed).unwrap();
        assert_eq!(w.len(), 2);
    }
}
