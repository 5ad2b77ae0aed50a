//! System prompts shipped as data assets.

/// System prompt for MATH-style tasks (boxed answers).
pub const MATH_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/math.txt");

/// System prompt for GSM8K-style tasks ("The final answer is:" lines).
pub const GSM8K_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/gsm8k.txt");

/// System prompt for ARC-Challenge-style tasks (boxed answers).
pub const ARC_C_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/arc_c.txt");

/// Tiny system prompt for desk-scale toy runs.
pub const TOY_SYSTEM_PROMPT: &str = include_str!("../../assets/prompts/toy.txt");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompts_carry_their_answer_markers() {
        assert!(MATH_SYSTEM_PROMPT.contains("\\boxed{answer}"));
        assert!(GSM8K_SYSTEM_PROMPT.contains("#### The final answer is:"));
        assert!(ARC_C_SYSTEM_PROMPT.contains("\\boxed{answer}"));
        assert!(TOY_SYSTEM_PROMPT.contains("\\boxed{answer}"));
    }
}
