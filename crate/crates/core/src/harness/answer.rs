//! Answer extraction and normalization.
//!
//! Extraction is total: any string either yields an answer or the NO_ANSWER
//! sentinel (`None`), never an error.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    /// Contents of the last `\boxed{...}`, with balanced-brace scanning.
    Boxed,
    /// Text after the last `The final answer is:` marker, to end of line.
    FinalLine,
}

const FINAL_LINE_MARKER: &str = "The final answer is:";

/// Normalize an answer string for exact-match comparison: trim whitespace,
/// strip commas, strip trailing periods.
pub fn normalize_answer(s: &str) -> String {
    let stripped: String = s.trim().chars().filter(|&c| c != ',').collect();
    stripped.trim_end_matches('.').trim().to_string()
}

/// Extract an answer from raw model output. Returns `None` (NO_ANSWER) when
/// no marker is present or the extracted text normalizes to empty.
pub fn extract_answer(raw_output: &str, format: AnswerFormat) -> Option<String> {
    let candidate = match format {
        AnswerFormat::Boxed => extract_boxed(raw_output)?,
        AnswerFormat::FinalLine => extract_final_line(raw_output)?,
    };
    let normalized = normalize_answer(&candidate);
    if normalized.is_empty() {
        None
    } else {
        Some(normalized)
    }
}

fn extract_boxed(text: &str) -> Option<String> {
    let marker = "\\boxed{";
    let start = text.rfind(marker)? + marker.len();
    let mut depth = 1usize;
    let mut out = String::new();
    for c in text[start..].chars() {
        match c {
            '{' => {
                depth += 1;
                out.push(c);
            }
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(out);
                }
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    None // unbalanced braces
}

fn extract_final_line(text: &str) -> Option<String> {
    let start = text.rfind(FINAL_LINE_MARKER)? + FINAL_LINE_MARKER.len();
    let rest = &text[start..];
    let line = rest.split('\n').next().unwrap_or(rest);
    Some(line.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxed_basic() {
        assert_eq!(extract_answer("thus \\boxed{42}", AnswerFormat::Boxed), Some("42".into()));
    }

    #[test]
    fn boxed_takes_last_and_balances_braces() {
        let raw = "first \\boxed{1} then \\boxed{\\frac{1}{2}} done";
        assert_eq!(
            extract_answer(raw, AnswerFormat::Boxed),
            Some("\\frac{1}{2}".into())
        );
    }

    #[test]
    fn unbalanced_boxed_is_no_answer() {
        assert_eq!(extract_answer("\\boxed{777", AnswerFormat::Boxed), None);
    }

    #[test]
    fn final_line_with_comma_number() {
        assert_eq!(
            extract_answer("#### The final answer is: 1,234", AnswerFormat::FinalLine),
            Some("1234".into())
        );
    }

    #[test]
    fn final_line_stops_at_newline() {
        let raw = "The final answer is: 7\nextra trailing text";
        assert_eq!(extract_answer(raw, AnswerFormat::FinalLine), Some("7".into()));
    }

    #[test]
    fn no_marker_is_no_answer() {
        assert_eq!(extract_answer("no marker here", AnswerFormat::Boxed), None);
        assert_eq!(extract_answer("no marker here", AnswerFormat::FinalLine), None);
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer(" 1,234. "), "1234");
        assert_eq!(normalize_answer("42."), "42");
        assert_eq!(normalize_answer("3.14"), "3.14");
        assert_eq!(normalize_answer("x + 1"), "x + 1");
    }
}
