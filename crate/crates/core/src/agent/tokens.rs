use serde::{Deserialize, Serialize};

use super::conversation::{Conversation, Message};

/// Fallback token count for text when the provider reports none.
pub fn estimate_tokens(chars: usize) -> u64 {
    chars.div_ceil(4) as u64
}

pub fn estimate_message(m: &Message) -> u64 {
    estimate_tokens(m.char_len())
}

pub fn estimate_conversation(c: &Conversation) -> u64 {
    c.messages.iter().map(estimate_message).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
    /// True when the numbers come from the character estimate.
    #[serde(default)]
    pub estimated: bool,
}

impl TokenUsage {
    pub fn reported(input: u64, output: u64) -> Self {
        TokenUsage { input, output, estimated: false }
    }

    pub fn total(&self) -> u64 {
        self.input + self.output
    }
}

/// Running total against a budget. Crossing the budget never interrupts the
/// turn in flight; it only prevents the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAccount {
    pub budget: u64,
    pub total: u64,
}

impl TokenAccount {
    pub fn new(budget: u64) -> Self {
        TokenAccount { budget, total: 0 }
    }

    /// Add `usage` and report whether the budget is now exhausted.
    pub fn account(&mut self, usage: TokenUsage) -> bool {
        self.total += usage.total();
        self.exhausted()
    }

    pub fn exhausted(&self) -> bool {
        self.total >= self.budget
    }
}
