use std::sync::Arc;

use super::{no_incumbent, Action, Choice, Feedback, Judge, JudgeError, MotionDescription, Suggestion, Verdict};
use crate::prompts;
use crate::render::{render_frames, FrameSequence, RenderConfig};
use crate::reward::{catalog_summary, RewardProgram};
use crate::transport::{ChatMessage, ChatRequest, ChatTransport, ContentPart};
use crate::{TaskContext, Trajectory};

/// Attempts per question before giving up on an unparseable answer.
pub const DEFAULT_PARSE_RETRIES: usize = 3;

/// `First`/`Second` when the answer's first word is exactly `first` or
/// `second`, ignoring case and trailing punctuation.
pub fn parse_selection(text: &str) -> Option<Choice> {
    let word = text.split_whitespace().next()?;
    let word = word.trim_end_matches(['.', ',', '!', ':', ';']);
    match word.to_ascii_lowercase().as_str() {
        "first" => Some(Choice::First),
        "second" => Some(Choice::Second),
        _ => None,
    }
}

fn parse_yes_no(s: &str) -> Option<bool> {
    let w = s.split_whitespace().next()?.trim_end_matches(['.', ',', '!', ':', ';']);
    match w.to_ascii_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

fn strip_key<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let t = line.trim_start();
    let head = t.get(..key.len())?;
    head.eq_ignore_ascii_case(key).then(|| t[key.len()..].trim_start_matches(':').trim())
}

fn parse_suggestion(line: &str) -> Option<Suggestion> {
    let (head, hint) = match line.split_once(':') {
        Some((h, rest)) => (h, Some(rest.trim().to_string()).filter(|s| !s.is_empty())),
        None => (line, None),
    };
    let mut words = head.split_whitespace();
    let action = Action::from_word(words.next()?)?;
    let term = words.next()?;
    if !term.chars().next()?.is_ascii_alphabetic() || !term.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    let weight = match (words.next(), words.next()) {
        (Some("to" | "at" | "@"), Some(w)) => Some(w.parse::<f64>().ok()?),
        (Some(w), None) => Some(w.trim_start_matches('@').parse::<f64>().ok()?),
        (None, _) => None,
        _ => return None,
    };
    Some(Suggestion { term_name: term.into(), action, proposed_weight: weight, definition_hint: hint })
}

/// Reads the SUCCESS / ISSUES / SUGGESTIONS layout. A missing YES/NO is an
/// error; suggestion lines that do not parse or do not fit the program are dropped.
pub fn parse_feedback(text: &str, program: &RewardProgram) -> Result<Feedback, String> {
    let mut success = None;
    let mut issues = String::new();
    let mut suggestions = Vec::new();
    let mut in_suggestions = false;
    for line in text.lines() {
        if let Some(v) = strip_key(line, "SUCCESS") {
            success = success.or(parse_yes_no(v));
        } else if let Some(v) = strip_key(line, "ISSUES") {
            issues = v.to_string();
            in_suggestions = false;
        } else if strip_key(line, "SUGGESTIONS").is_some() {
            in_suggestions = true;
        } else if in_suggestions {
            let item = line.trim().trim_start_matches(['-', '*']).trim();
            if let Some(s) = parse_suggestion(item).filter(|s| s.check(program).is_ok()) {
                suggestions.push(s);
            }
        }
    }
    let success = success.or_else(|| parse_yes_no(text)).ok_or("answer has no SUCCESS: YES or NO")?;
    Ok(Feedback { task_success: success, issues, suggestions })
}

pub struct EndpointJudge {
    transport: Arc<dyn ChatTransport>,
    model: String,
    render: RenderConfig,
    pub parse_retries: usize,
}

impl EndpointJudge {
    pub fn new(transport: Arc<dyn ChatTransport>, model: impl Into<String>) -> Self {
        Self { transport, model: model.into(), render: RenderConfig::default(), parse_retries: DEFAULT_PARSE_RETRIES }
    }

    fn frames(&self, traj: &Trajectory, ctx: &TaskContext) -> Result<FrameSequence, JudgeError> {
        Ok(render_frames(traj, ctx, &self.render)?)
    }

    fn request(&self, content: Vec<ContentPart>) -> ChatRequest {
        ChatRequest { model: self.model.clone(), messages: vec![ChatMessage::user(content)], temperature: 0.0 }
    }

    pub fn selection_request(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        challenger: &Trajectory,
        incumbent: &Trajectory,
    ) -> Result<ChatRequest, JudgeError> {
        let a = self.frames(challenger, ctx)?;
        let b = self.frames(incumbent, ctx)?;
        let rate = format!("{:.3}", a.rate);
        let text = prompts::fill(prompts::SELECTION, &[("body", &desc.body), ("task", &desc.text), ("rate", &rate)]);
        let mut content = vec![ContentPart::text(text), ContentPart::text("First clip:")];
        content.extend(a.frames.iter().map(|f| ContentPart::png(&f.to_png())));
        content.push(ContentPart::text("Second clip:"));
        content.extend(b.frames.iter().map(|f| ContentPart::png(&f.to_png())));
        Ok(self.request(content))
    }

    pub fn feedback_request(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        best: &Trajectory,
        program: &RewardProgram,
    ) -> Result<ChatRequest, JudgeError> {
        let frames = self.frames(best, ctx)?;
        let rate = format!("{:.3}", frames.rate);
        let text = prompts::fill(
            prompts::FEEDBACK,
            &[
                ("body", &desc.body),
                ("task", &desc.text),
                ("focus", &desc.focus),
                ("program", &program.to_text()),
                ("catalog", &catalog_summary()),
                ("rate", &rate),
            ],
        );
        let mut content = vec![ContentPart::text(text)];
        content.extend(frames.frames.iter().map(|f| ContentPart::png(&f.to_png())));
        Ok(self.request(content))
    }
}

impl Judge for EndpointJudge {
    fn compare(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        challenger: &Trajectory,
        incumbent: Option<&Trajectory>,
    ) -> Result<Verdict, JudgeError> {
        desc.task()?;
        if challenger.is_empty() {
            return Err(JudgeError::EmptyTrajectory);
        }
        let Some(incumbent) = incumbent else { return Ok(no_incumbent()) };
        let req = self.selection_request(desc, ctx, challenger, incumbent)?;
        let mut last = String::new();
        for _ in 0..self.parse_retries.max(1) {
            let answer = self.transport.complete(&req)?;
            if let Some(choice) = parse_selection(&answer) {
                return Ok(Verdict { choice, justification: answer });
            }
            last = answer;
        }
        log::warn!("unparseable selection answer, keeping the incumbent: {last:?}");
        Ok(Verdict { choice: Choice::Second, justification: format!("unparseable answer: {last}") })
    }

    fn critique(
        &self,
        desc: &MotionDescription,
        ctx: &TaskContext,
        best: &Trajectory,
        program: &RewardProgram,
    ) -> Result<Feedback, JudgeError> {
        desc.task()?;
        let req = self.feedback_request(desc, ctx, best, program)?;
        let attempts = self.parse_retries.max(1);
        let mut detail = String::new();
        for _ in 0..attempts {
            let answer = self.transport.complete(&req)?;
            match parse_feedback(&answer, program) {
                Ok(f) => return Ok(f),
                Err(e) => detail = e,
            }
        }
        Err(JudgeError::Parse { attempts, detail })
    }
}
