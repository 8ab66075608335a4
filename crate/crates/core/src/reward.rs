//! Verifiable rewards: format, accuracy, auxiliary construction and length,
//! plus their weighted combination.

use serde::{Deserialize, Serialize};

use crate::completion::Completion;
use crate::error::{Error, Result};
use crate::scene::{validate_aux_dsl, SceneProgram};
use crate::vocab::{Role, TokenId, Vocab};

/// Weights of the non-accuracy reward terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Format reward weight.
    pub format: f64,
    /// Auxiliary reward weight (lambda).
    pub aux: f64,
    /// Length reward weight (beta).
    pub length: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            format: 0.5,
            aux: 0.5,
            length: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub accuracy: u8,
    pub format: u8,
    pub aux_raw: u8,
    pub masked_aux: i8,
    pub length: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Replaces the mask sign and recomputes the total.
    pub fn with_mask(self, sign: i8, weights: &RewardWeights) -> Self {
        let masked_aux = sign * self.aux_raw as i8;
        Self {
            masked_aux,
            total: combine(self.accuracy, self.format, masked_aux, self.length, weights),
            ..self
        }
    }
}

/// The answer token of a well-formed answer span, if any.
fn answer_token(c: &Completion, vocab: &Vocab) -> Option<TokenId> {
    let sp = vocab.specials;
    let answer = c.answer?;
    let think = c.think?;
    if c.truncated || think.end > answer.start {
        return None;
    }
    let count = |tok: TokenId| c.tokens.iter().filter(|&&t| t == tok).count();
    if count(sp.think_open) != 1
        || count(sp.think_close) != 1
        || count(sp.answer_open) != 1
        || count(sp.answer_close) != 1
    {
        return None;
    }
    let mut answers = c.tokens[answer.interior()]
        .iter()
        .copied()
        .filter(|&t| vocab.role(t) == Role::Answer);
    match (answers.next(), answers.next()) {
        (Some(a), None) => Some(a),
        _ => None,
    }
}

/// 1 iff there is exactly one closed think span followed by exactly one closed
/// answer span holding exactly one answer symbol, and the completion ended
/// with `<eos>`.
pub fn format_reward(c: &Completion, vocab: &Vocab) -> u8 {
    answer_token(c, vocab).is_some() as u8
}

/// 1 iff the completion is well formed and its answer symbol equals `truth`.
pub fn accuracy_reward(c: &Completion, truth: TokenId, vocab: &Vocab) -> u8 {
    (answer_token(c, vocab) == Some(truth)) as u8
}

/// 1 iff at least one aux span holds a valid construction.
pub fn aux_reward(c: &Completion, base: &SceneProgram, vocab: &Vocab) -> u8 {
    c.aux_interiors()
        .any(|block| validate_aux_dsl(block, vocab, base).is_valid()) as u8
}

/// `min(1, len / l_max)`.
pub fn length_reward(len: usize, l_max: usize) -> Result<f64> {
    if l_max == 0 {
        return Err(Error::InvalidConfig("l_max must be positive".into()));
    }
    Ok((len as f64 / l_max as f64).min(1.0))
}

pub fn combine(accuracy: u8, format: u8, masked_aux: i8, length: f64, w: &RewardWeights) -> f64 {
    accuracy as f64 + w.format * format as f64 + w.aux * masked_aux as f64 + w.length * length
}

/// Scores one completion. `mask_sign` is the contrastive sign in `{-1, 0, 1}`
/// applied to the raw auxiliary reward.
pub fn score_completion(
    c: &Completion,
    truth: TokenId,
    base: &SceneProgram,
    mask_sign: i8,
    l_max: usize,
    weights: &RewardWeights,
    vocab: &Vocab,
) -> Result<RewardBreakdown> {
    let accuracy = accuracy_reward(c, truth, vocab);
    let format = format_reward(c, vocab);
    let aux_raw = aux_reward(c, base, vocab);
    let length = length_reward(c.len(), l_max)?;
    let masked_aux = mask_sign.signum() * aux_raw as i8;
    Ok(RewardBreakdown {
        accuracy,
        format,
        aux_raw,
        masked_aux,
        length,
        total: combine(accuracy, format, masked_aux, length, weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::parse_completion;
    use crate::scene::Statement;

    fn parse(text: &str) -> Completion {
        let v = Vocab::standard();
        parse_completion(&v.encode_str(text).unwrap(), &v, 64).unwrap()
    }

    fn base() -> SceneProgram {
        SceneProgram::new(vec![Statement::Point(0), Statement::Point(1)]).unwrap()
    }

    const WELL_FORMED: &str = "<think> f </think> <answer> A3 </answer> <eos>";

    #[test]
    fn format_cases() {
        let v = Vocab::standard();
        assert_eq!(format_reward(&parse(WELL_FORMED), &v), 1);
        assert_eq!(
            format_reward(&parse("<think> f </think> <answer> A3 A4 </answer> <eos>"), &v),
            0
        );
        let truncated = parse_completion(&v.encode_str(WELL_FORMED).unwrap(), &v, 5).unwrap();
        assert!(truncated.truncated);
        assert_eq!(format_reward(&truncated, &v), 0);
        assert_eq!(
            format_reward(&parse("<answer> A3 </answer> <think> f </think> <eos>"), &v),
            0
        );
        assert_eq!(
            format_reward(
                &parse("<think> f </think> <think> </think> <answer> A3 </answer> <eos>"),
                &v
            ),
            0
        );
        assert_eq!(
            format_reward(&parse("<think> f </think> <answer> f </answer> <eos>"), &v),
            0
        );
    }

    #[test]
    fn accuracy_cases() {
        let v = Vocab::standard();
        let c = parse(WELL_FORMED);
        assert_eq!(accuracy_reward(&c, v.answer(3), &v), 1);
        assert_eq!(accuracy_reward(&c, v.answer(5), &v), 0);
        let no_answer = parse("<think> f </think> <eos>");
        assert_eq!(accuracy_reward(&no_answer, v.answer(0), &v), 0);
    }

    #[test]
    fn aux_truth_table() {
        let v = Vocab::standard();
        let valid = parse("<think> <aux> point P2 , segment P0 P2 </aux> </think> <answer> A0 </answer> <eos>");
        let none = parse("<think> f </think> <answer> A0 </answer> <eos>");
        let invalid = parse("<think> <aux> segment P0 P7 </aux> </think> <answer> A0 </answer> <eos>");
        let mixed =
            parse("<think> <aux> segment P0 P7 </aux> <aux> point P3 </aux> </think> <answer> A0 </answer> <eos>");
        assert_eq!(aux_reward(&valid, &base(), &v), 1);
        assert_eq!(aux_reward(&none, &base(), &v), 0);
        assert_eq!(aux_reward(&invalid, &base(), &v), 0);
        assert_eq!(aux_reward(&mixed, &base(), &v), 1);
    }

    #[test]
    fn length_cases() {
        assert_eq!(length_reward(512, 1024).unwrap(), 0.5);
        assert_eq!(length_reward(2048, 1024).unwrap(), 1.0);
        assert_eq!(length_reward(0, 1024).unwrap(), 0.0);
        assert!(matches!(length_reward(3, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn combine_cases() {
        let w = RewardWeights::default();
        assert_eq!(combine(1, 1, 1, 0.5, &w), 2.25);
        assert_eq!(combine(0, 0, 0, 0.0, &w), 0.0);
        assert_eq!(combine(1, 1, -1, 1.0, &w), 1.5);
        let grpo = RewardWeights {
            aux: 0.0,
            length: 0.0,
            ..w
        };
        assert_eq!(combine(1, 1, 1, 0.9, &grpo), 1.5);
    }

    #[test]
    fn mask_recomputes_total_only() {
        let v = Vocab::standard();
        let c = parse("<think> <aux> point P2 </aux> </think> <answer> A0 </answer> <eos>");
        let w = RewardWeights::default();
        let r = score_completion(&c, v.answer(0), &base(), 0, 64, &w, &v).unwrap();
        assert_eq!((r.accuracy, r.format, r.aux_raw, r.masked_aux), (1, 1, 1, 0));
        let neg = r.with_mask(-1, &w);
        assert_eq!(neg.masked_aux, -1);
        assert_eq!(neg.total, r.total - 0.5);
        assert_eq!((neg.accuracy, neg.format, neg.length), (r.accuracy, r.format, r.length));
    }
}
