use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::vocab::{TokenId, Vocab};

/// Half-open token interval `[start, end)`. Spans include their tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Token range strictly between the opening and closing tag.
    pub fn interior(&self) -> std::ops::Range<usize> {
        self.start + 1..self.end.saturating_sub(1).max(self.start + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub prompt_id: u64,
    pub tokens: Vec<TokenId>,
    pub think: Option<Span>,
    pub answer: Option<Span>,
    pub aux: Vec<Span>,
    pub truncated: bool,
}

impl Completion {
    pub fn with_prompt_id(mut self, prompt_id: u64) -> Self {
        self.prompt_id = prompt_id;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn aux_interiors(&self) -> impl Iterator<Item = &[TokenId]> + '_ {
        self.aux.iter().map(|s| &self.tokens[s.interior()])
    }
}

/// Scans `tokens` for think, answer and aux spans.
///
/// Only the prefix up to the first `<eos>` (or `max_len` tokens) is scanned.
/// Each span kind takes the first opening tag and the first matching closing
/// tag after it; an unclosed span is absent. An answer span overlapping the
/// think span, or an aux span outside it, is dropped.
pub fn parse_completion(tokens: &[TokenId], vocab: &Vocab, max_len: usize) -> Result<Completion> {
    for &t in tokens {
        vocab.check(t)?;
    }
    let sp = vocab.specials;
    let window = &tokens[..tokens.len().min(max_len)];
    let eos = window.iter().position(|&t| t == sp.eos);
    let scan = &window[..eos.unwrap_or(window.len())];

    let first_pair = |open: TokenId, close: TokenId| -> Option<Span> {
        let start = scan.iter().position(|&t| t == open)?;
        let end = scan[start + 1..].iter().position(|&t| t == close)? + start + 1;
        Some(Span::new(start, end + 1))
    };
    let think = first_pair(sp.think_open, sp.think_close);
    let answer = first_pair(sp.answer_open, sp.answer_close).filter(|a| think.is_none_or(|t| !t.overlaps(a)));

    let mut aux = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in scan.iter().enumerate() {
        if t == sp.aux_open {
            open = Some(i);
        } else if t == sp.aux_close {
            if let Some(start) = open.take() {
                aux.push(Span::new(start, i + 1));
            }
        }
    }
    if let Some(t) = think {
        aux.retain(|a| t.contains(a));
    }

    Ok(Completion {
        prompt_id: 0,
        tokens: tokens.to_vec(),
        think,
        answer,
        aux,
        truncated: eos.is_none(),
    })
}
