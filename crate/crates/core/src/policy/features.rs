use std::ops::Range;

use crate::scene::validate_aux_dsl;
use crate::task::{reveal_hint, Task, HINT_ALPHABET, OBSERVABLE_ALPHABET};
use crate::vocab::{TokenId, Vocab};

pub const NUM_PHASE_FLAGS: usize = 4;
pub const NUM_LENGTH_BUCKETS: usize = 4;

/// Index of each phase flag within the phase block.
pub mod phase {
    pub const IN_THINK: usize = 0;
    pub const IN_AUX: usize = 1;
    pub const AUX_DONE: usize = 2;
    pub const ANSWER_OPEN: usize = 3;
}

/// Column layout of the state feature vector:
/// `[category(3) | observable(4) | hint(4) | last token(V) | phase(4) | length bucket(4) | bias]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    vocab_size: usize,
}

impl FeatureLayout {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }

    pub fn category(&self) -> Range<usize> {
        0..3
    }

    pub fn observable(&self) -> Range<usize> {
        3..3 + OBSERVABLE_ALPHABET
    }

    pub fn hint(&self) -> Range<usize> {
        let s = self.observable().end;
        s..s + HINT_ALPHABET
    }

    pub fn last_token(&self) -> Range<usize> {
        let s = self.hint().end;
        s..s + self.vocab_size
    }

    pub fn phase(&self) -> Range<usize> {
        let s = self.last_token().end;
        s..s + NUM_PHASE_FLAGS
    }

    pub fn length_bucket(&self) -> Range<usize> {
        let s = self.phase().end;
        s..s + NUM_LENGTH_BUCKETS
    }

    pub fn bias(&self) -> usize {
        self.length_bucket().end
    }

    pub fn dim(&self) -> usize {
        self.bias() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateFeatures(pub Vec<f64>);

impl StateFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Summary of a token prefix, independent of how it was produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrefixPhase {
    pub in_think: bool,
    pub in_aux: bool,
    pub aux_done: bool,
    pub answer_open: bool,
}

pub fn scan_prefix(task: &Task, history: &[TokenId], vocab: &Vocab) -> PrefixPhase {
    let sp = vocab.specials;
    let mut p = PrefixPhase::default();
    let mut aux_start = None;
    for (i, &t) in history.iter().enumerate() {
        if t == sp.think_open {
            p.in_think = true;
        } else if t == sp.think_close {
            p.in_think = false;
            p.in_aux = false;
            aux_start = None;
        } else if t == sp.aux_open {
            p.in_aux = true;
            aux_start = Some(i);
        } else if t == sp.aux_close {
            if let Some(s) = aux_start.take() {
                if validate_aux_dsl(&history[s + 1..i], vocab, &task.base_scene).is_valid() {
                    p.aux_done = true;
                }
            }
            p.in_aux = false;
        } else if t == sp.answer_open {
            p.answer_open = true;
        } else if t == sp.answer_close {
            p.answer_open = false;
        }
    }
    p
}

/// Length bucket of a prefix of `len` tokens under a `max_len` budget.
pub fn length_bucket(len: usize, max_len: usize) -> usize {
    (len * NUM_LENGTH_BUCKETS / max_len.max(1)).min(NUM_LENGTH_BUCKETS - 1)
}

/// Feature vector of the state reached after `history`.
///
/// The hint block is set only once a valid auxiliary block has closed, and
/// then holds whatever the task reveals.
pub fn encode_state(task: &Task, history: &[TokenId], vocab: &Vocab, max_len: usize) -> StateFeatures {
    let layout = FeatureLayout::new(vocab.len());
    let mut x = vec![0.0; layout.dim()];
    x[layout.category().start + task.category.index()] = 1.0;
    x[layout.observable().start + task.observable as usize] = 1.0;
    let phase = scan_prefix(task, history, vocab);
    if let Some(h) = reveal_hint(task, phase.aux_done) {
        x[layout.hint().start + h as usize] = 1.0;
    }
    if let Some(&last) = history.last() {
        x[layout.last_token().start + last] = 1.0;
    }
    let flags = layout.phase().start;
    x[flags + phase::IN_THINK] = phase.in_think as u8 as f64;
    x[flags + phase::IN_AUX] = phase.in_aux as u8 as f64;
    x[flags + phase::AUX_DONE] = phase.aux_done as u8 as f64;
    x[flags + phase::ANSWER_OPEN] = phase.answer_open as u8 as f64;
    x[layout.length_bucket().start + length_bucket(history.len(), max_len)] = 1.0;
    x[layout.bias()] = 1.0;
    StateFeatures(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SceneProgram, Statement};
    use crate::task::{Answer, Category};

    fn task(category: Category) -> Task {
        Task {
            id: 0,
            category,
            base_scene: SceneProgram::new(vec![Statement::Point(0), Statement::Point(1)]).unwrap(),
            observable: 2,
            hidden_hint: 3,
            truth: Answer(3),
        }
    }

    fn one_hot_count(x: &[f64], r: Range<usize>) -> usize {
        x[r].iter().filter(|&&v| v != 0.0).count()
    }

    #[test]
    fn dimension_matches_layout() {
        let v = Vocab::standard();
        let layout = FeatureLayout::new(v.len());
        assert_eq!(layout.dim(), 3 + 4 + 4 + 29 + 4 + 4 + 1);
    }

    #[test]
    fn empty_history() {
        let v = Vocab::standard();
        let layout = FeatureLayout::new(v.len());
        let x = encode_state(&task(Category::AuxHelps), &[], &v, 64);
        assert_eq!(one_hot_count(&x.0, layout.last_token()), 0);
        assert_eq!(one_hot_count(&x.0, layout.phase()), 0);
        assert_eq!(one_hot_count(&x.0, layout.hint()), 0);
        assert_eq!(x.0[layout.length_bucket().start], 1.0);
        assert_eq!(x.0[layout.bias()], 1.0);
        assert_eq!(x.0[layout.category().start + Category::AuxHelps.index()], 1.0);
        assert_eq!(x.0[layout.observable().start + 2], 1.0);
    }

    #[test]
    fn inside_think() {
        let v = Vocab::standard();
        let layout = FeatureLayout::new(v.len());
        let h = v.encode_str("<think> f").unwrap();
        let x = encode_state(&task(Category::Neutral), &h, &v, 64);
        assert_eq!(x.0[layout.phase().start + phase::IN_THINK], 1.0);
        assert_eq!(x.0[layout.last_token().start + v.id("f").unwrap()], 1.0);
    }

    #[test]
    fn valid_aux_reveals_hint() {
        let v = Vocab::standard();
        let layout = FeatureLayout::new(v.len());
        let h = v.encode_str("<think> <aux> point P2 , segment P0 P2 </aux>").unwrap();
        let t = task(Category::AuxHelps);
        let x = encode_state(&t, &h, &v, 64);
        assert_eq!(x.0[layout.phase().start + phase::AUX_DONE], 1.0);
        assert_eq!(x.0[layout.phase().start + phase::IN_AUX], 0.0);
        let hint = reveal_hint(&t, true).unwrap() as usize;
        assert_eq!(x.0[layout.hint().start + hint], 1.0);
        assert_eq!(one_hot_count(&x.0, layout.hint()), 1);

        // An invalid block reveals nothing.
        let h = v.encode_str("<think> <aux> point P0 , point P1 </aux>").unwrap();
        let h2 = v.encode_str("<think> <aux> segment P0 P6 </aux>").unwrap();
        for hist in [h, h2] {
            let x = encode_state(&t, &hist, &v, 64);
            assert_eq!(x.0[layout.phase().start + phase::AUX_DONE], 0.0);
            assert_eq!(one_hot_count(&x.0, layout.hint()), 0);
        }
    }

    #[test]
    fn buckets() {
        assert_eq!(length_bucket(0, 64), 0);
        assert_eq!(length_bucket(15, 64), 0);
        assert_eq!(length_bucket(16, 64), 1);
        assert_eq!(length_bucket(63, 64), 3);
        assert_eq!(length_bucket(64, 64), 3);
    }
}
