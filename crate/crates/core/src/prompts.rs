//! Prompt templates with `{name}` placeholders.

pub const SELECTION: &str = include_str!("../prompts/selection_v1.txt");
pub const FEEDBACK: &str = include_str!("../prompts/feedback_v1.txt");
pub const SYNTHESIS: &str = include_str!("../prompts/synthesis_v1.txt");

pub const GRAMMAR: &str = "\
program := [\"stage\" INT] term*
term    := \"term\" NAME \"{\" expr \"}\" \"@\" WEIGHT
expr    := comparisons, + - * / and unary minus over numbers, features and functions
# starts a comment that runs to the end of the line";

/// Replaces each `{key}` with its value. Unknown placeholders are left alone.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// Placeholder names still present in `text`.
pub fn unfilled(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        rest = &rest[i + 1..];
        let Some(j) = rest.find('}') else { break };
        let name = &rest[..j];
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            out.push(name.to_string());
        }
        rest = &rest[j + 1..];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_every_placeholder() {
        let s = fill("a {x} b {y} {x}", &[("x", "1"), ("y", "2")]);
        assert_eq!(s, "a 1 b 2 1");
        assert_eq!(unfilled("{task} and {feedback_string} but not { x } or {}"), vec!["task", "feedback_string"]);
    }

    #[test]
    fn templates_use_known_placeholders() {
        assert_eq!(unfilled(SELECTION), vec!["body", "task", "rate"]);
        assert_eq!(unfilled(FEEDBACK), vec!["body", "task", "focus", "program", "catalog", "rate"]);
        assert_eq!(
            unfilled(SYNTHESIS),
            vec!["body", "task", "grammar", "catalog", "program", "residual_terms", "feedback_string", "max_weight"]
        );
    }
}
