use std::sync::Arc;

use super::{validate_text, Proposal, Provenance, SynthesisContext, SynthesisError, Synthesizer};
use crate::prompts;
use crate::reward::catalog_summary;
use crate::transport::{ChatMessage, ChatRequest, ChatTransport, ContentPart};

pub const DEFAULT_RETRY_BUDGET: usize = 5;

/// Program text inside the first fenced block, or the whole answer when there is none.
pub fn extract_program_text(answer: &str) -> &str {
    let Some(start) = answer.find("```") else { return answer.trim() };
    let body = &answer[start + 3..];
    // Skip the info string (for example `reward`).
    let body = body.split_once('\n').map(|(_, rest)| rest).unwrap_or("");
    match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    }
}

pub struct EndpointSynthesizer {
    transport: Arc<dyn ChatTransport>,
    model: String,
    pub retry_budget: usize,
}

impl EndpointSynthesizer {
    pub fn new(transport: Arc<dyn ChatTransport>, model: impl Into<String>) -> Self {
        Self { transport, model: model.into(), retry_budget: DEFAULT_RETRY_BUDGET }
    }

    pub fn prompt(&self, ctx: &SynthesisContext<'_>, index: usize, n: usize) -> String {
        let max_weight = format!("{:?}", ctx.max_weight);
        let mut text = prompts::fill(
            prompts::SYNTHESIS,
            &[
                ("body", &ctx.description.body),
                ("task", &ctx.description.text),
                ("grammar", prompts::GRAMMAR),
                ("catalog", &catalog_summary()),
                ("program", &ctx.incumbent.to_text()),
                ("residual_terms", &ctx.residual_terms()),
                ("feedback_string", &ctx.feedback.to_text()),
                ("max_weight", &max_weight),
            ],
        );
        if n > 1 {
            text.push_str(&format!("\nThis is variant {} of {n}; make it differ from the others.\n", index + 1));
        }
        text
    }
}

impl Synthesizer for EndpointSynthesizer {
    fn propose(&self, ctx: &SynthesisContext<'_>, n: usize, _seed: u64) -> Result<Vec<Proposal>, SynthesisError> {
        if n == 0 {
            return Err(SynthesisError::NoProposals);
        }
        let mut out = Vec::with_capacity(n);
        for index in 0..n {
            let mut messages = vec![ChatMessage::user(vec![ContentPart::text(self.prompt(ctx, index, n))])];
            let mut reason = String::new();
            let budget = self.retry_budget.max(1);
            let mut accepted = None;
            for attempt in 1..=budget {
                let req = ChatRequest { model: self.model.clone(), messages: messages.clone(), temperature: 0.0 };
                let answer = self.transport.complete(&req)?;
                match validate_text(extract_program_text(&answer), ctx.task, ctx.max_weight) {
                    Ok(program) => {
                        accepted = Some(Proposal { program, provenance: Provenance::Endpoint, attempts: attempt });
                        break;
                    }
                    Err(e) => {
                        reason = e;
                        messages.push(ChatMessage {
                            role: "assistant".into(),
                            content: vec![ContentPart::text(answer)],
                        });
                        messages.push(ChatMessage::user(vec![ContentPart::text(format!(
                            "That program was rejected: {reason}\nReply with a corrected complete program."
                        ))]));
                    }
                }
            }
            match accepted {
                Some(p) => out.push(p),
                None => return Err(SynthesisError::Exhausted { index, attempts: budget, reason }),
            }
        }
        Ok(out)
    }
}
