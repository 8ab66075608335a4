//! Constrained-decoding state machine for the completion grammar:
//!
//! ```text
//! <think> [<aux> stmt </aux>] filler* </think> <answer> A </answer> <eos>
//! ```
//!
//! A construction, if any, opens the think span, so whether to construct is
//! a single decision taken right after `<think>`. A block holds one
//! statement: what a construction reveals does not depend on its content.
//! Inside an aux block only statements that are new relative to the base
//! scene and reference declared points are allowed, so every block that
//! closes is a valid construction. Tokens whose shortest completion would
//! overrun the length budget are masked as well.

use crate::scene::{pair_bit, SceneProgram, SegmentSet};
use crate::vocab::{Role, TokenId, TokenSet, Vocab};

use super::SampleMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Start,
    Think,
    StatementStart,
    PointName,
    SegmentFirst,
    SegmentSecond(u8),
    StatementEnd,
    AfterThink,
    AnswerOpen,
    AnswerChosen,
    AfterAnswer,
    Done,
}

/// Tokens needed after `</think>`: `<answer> A </answer> <eos>`.
const ANSWER_TAIL: usize = 4;
/// Tokens needed from inside the think span once no aux is owed.
const THINK_TAIL: usize = 1 + ANSWER_TAIL;
const UNREACHABLE: usize = usize::MAX / 4;

#[derive(Debug, Clone)]
pub struct Grammar<'a> {
    vocab: &'a Vocab,
    answer_choices: usize,
    base_points: u8,
    base_segments: SegmentSet,
    all_points: u8,
    phase: Phase,
    points: u8,
    segments: SegmentSet,
    aux_done: bool,
    think_fresh: bool,
    pos: usize,
}

impl<'a> Grammar<'a> {
    /// `answer_choices` limits the answer span to `A0..A{answer_choices-1}`.
    pub fn new(vocab: &'a Vocab, scene: &SceneProgram, answer_choices: usize) -> Self {
        let all_points = if vocab.num_points() >= 8 {
            u8::MAX
        } else {
            (1u8 << vocab.num_points()) - 1
        };
        let base_points = scene.declared_points();
        let base_segments = scene.segment_set();
        Self {
            vocab,
            answer_choices: answer_choices.min(vocab.num_answers()),
            base_points,
            base_segments,
            all_points,
            phase: Phase::Start,
            points: base_points,
            segments: base_segments,
            aux_done: false,
            think_fresh: false,
            pos: 0,
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn undeclared(&self, points: u8) -> u8 {
        self.all_points & !points
    }

    /// Declared points that still have a partner forming a new segment.
    fn segment_starts(&self, points: u8, segments: SegmentSet) -> u8 {
        let mut out = 0u8;
        for a in 0..8u8 {
            if points & (1 << a) != 0 && self.segment_partners(a, points, segments) != 0 {
                out |= 1 << a;
            }
        }
        out
    }

    fn segment_partners(&self, a: u8, points: u8, segments: SegmentSet) -> u8 {
        let mut out = 0u8;
        for b in 0..8u8 {
            if b != a && points & (1 << b) != 0 && segments & pair_bit(a, b) == 0 {
                out |= 1 << b;
            }
        }
        out
    }

    /// Shortest statement that can be written from a block state.
    fn statement_cost(&self, points: u8, segments: SegmentSet) -> usize {
        if self.undeclared(points) != 0 {
            2
        } else if self.segment_starts(points, segments) != 0 {
            3
        } else {
            UNREACHABLE
        }
    }

    /// Tokens needed to finish from the current state, including `<eos>`.
    fn min_remaining(&self, mode: SampleMode) -> usize {
        let owes_aux = mode == SampleMode::ForcedAux && !self.aux_done;
        let think = || {
            if owes_aux && self.think_fresh {
                1 + self.statement_cost(self.base_points, self.base_segments) + 1 + THINK_TAIL
            } else if owes_aux {
                UNREACHABLE
            } else {
                THINK_TAIL
            }
        };
        // a closing block always satisfies the aux requirement
        let after_block = 1 + THINK_TAIL;
        match self.phase {
            Phase::Start => 1 + think(),
            Phase::Think => think(),
            Phase::StatementStart => self.statement_cost(self.points, self.segments) + after_block,
            Phase::PointName => 1 + after_block,
            Phase::SegmentFirst => 2 + after_block,
            Phase::SegmentSecond(_) => 1 + after_block,
            Phase::StatementEnd => after_block,
            Phase::AfterThink => ANSWER_TAIL,
            Phase::AnswerOpen => ANSWER_TAIL - 1,
            Phase::AnswerChosen => ANSWER_TAIL - 2,
            Phase::AfterAnswer => 1,
            Phase::Done => 0,
        }
    }

    fn point_tokens(&self, mask: u8) -> TokenSet {
        (0..8u8)
            .filter(|p| mask & (1 << p) != 0 && (*p as usize) < self.vocab.num_points())
            .map(|p| self.vocab.point(p as usize))
            .collect()
    }

    /// Tokens the grammar and the mode allow next, ignoring length.
    pub fn grammar_allowed(&self, mode: SampleMode) -> TokenSet {
        let sp = self.vocab.specials;
        let dsl = self.vocab.dsl;
        let mut set = TokenSet::EMPTY;
        match self.phase {
            Phase::Start => set.insert(sp.think_open),
            Phase::Think => {
                let owes_aux = mode == SampleMode::ForcedAux && !self.aux_done;
                let can_build = self.statement_cost(self.base_points, self.base_segments) < UNREACHABLE;
                if self.think_fresh && mode != SampleMode::ForbidAux && can_build {
                    set.insert(sp.aux_open);
                }
                if !owes_aux {
                    for f in self.vocab.filler_tokens() {
                        set.insert(f);
                    }
                    set.insert(sp.think_close);
                }
            }
            Phase::StatementStart => {
                if self.undeclared(self.points) != 0 {
                    set.insert(dsl.point);
                }
                if self.segment_starts(self.points, self.segments) != 0 {
                    set.insert(dsl.segment);
                }
            }
            Phase::PointName => set = self.point_tokens(self.undeclared(self.points)),
            Phase::SegmentFirst => set = self.point_tokens(self.segment_starts(self.points, self.segments)),
            Phase::SegmentSecond(a) => set = self.point_tokens(self.segment_partners(a, self.points, self.segments)),
            Phase::StatementEnd => set.insert(sp.aux_close),
            Phase::AfterThink => set.insert(sp.answer_open),
            Phase::AnswerOpen => {
                for k in 0..self.answer_choices {
                    set.insert(self.vocab.answer(k));
                }
            }
            Phase::AnswerChosen => set.insert(sp.answer_close),
            Phase::AfterAnswer => set.insert(sp.eos),
            Phase::Done => {}
        }
        set
    }

    /// Grammar-allowed tokens that still leave room to finish within
    /// `max_len`. Falls back to the unconstrained grammar set when nothing
    /// fits, so an over-tight budget ends in truncation instead of a dead end.
    pub fn allowed(&self, mode: SampleMode, max_len: usize) -> TokenSet {
        let grammar = self.grammar_allowed(mode);
        let fitting: TokenSet = grammar
            .iter()
            .filter(|&t| {
                let mut next = self.clone();
                next.advance(t);
                self.pos + 1 + next.min_remaining(mode) <= max_len
            })
            .collect();
        if fitting.is_empty() {
            grammar
        } else {
            fitting
        }
    }

    /// Consumes a token. Tokens outside the grammar leave the phase unchanged.
    pub fn advance(&mut self, t: TokenId) {
        let sp = self.vocab.specials;
        let dsl = self.vocab.dsl;
        let point = self.vocab.point_index(t).map(|p| p as u8);
        self.pos += 1;
        let was_fresh = std::mem::replace(&mut self.think_fresh, false);
        self.phase = match self.phase {
            Phase::Start if t == sp.think_open => {
                self.think_fresh = true;
                Phase::Think
            }
            Phase::Think if t == sp.aux_open && was_fresh => {
                self.points = self.base_points;
                self.segments = self.base_segments;
                Phase::StatementStart
            }
            Phase::Think if t == sp.think_close => Phase::AfterThink,
            Phase::Think if self.vocab.role(t) == Role::Filler => Phase::Think,
            Phase::StatementStart if t == dsl.point => Phase::PointName,
            Phase::StatementStart if t == dsl.segment => Phase::SegmentFirst,
            Phase::PointName if point.is_some() => {
                self.points |= 1 << point.unwrap();
                Phase::StatementEnd
            }
            Phase::SegmentFirst if point.is_some() => Phase::SegmentSecond(point.unwrap()),
            Phase::SegmentSecond(a) if point.is_some() => {
                self.segments |= pair_bit(a, point.unwrap());
                Phase::StatementEnd
            }
            Phase::StatementEnd if t == sp.aux_close => {
                self.aux_done = true;
                Phase::Think
            }
            Phase::AfterThink if t == sp.answer_open => Phase::AnswerOpen,
            Phase::AnswerOpen if self.vocab.role(t) == Role::Answer => Phase::AnswerChosen,
            Phase::AnswerChosen if t == sp.answer_close => Phase::AfterAnswer,
            Phase::AfterAnswer if t == sp.eos => Phase::Done,
            other => {
                self.think_fresh = was_fresh && other == Phase::Think;
                other
            }
        };
    }
}
