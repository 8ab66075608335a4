//! Group contrastive masking of the auxiliary reward.
//!
//! For each prompt, two extra rollout groups are drawn: one that must
//! construct an auxiliary element and one that may not. The gap between their
//! mean accuracies decides whether the free group's auxiliary reward is kept,
//! negated, or zeroed.

use serde::{Deserialize, Serialize};

use crate::completion::Completion;
use crate::error::{Error, Result};
use crate::policy::SampleMode;
use crate::reward::{RewardBreakdown, RewardWeights};

#[derive(Debug, Clone)]
pub struct RolloutGroup {
    kind: SampleMode,
    members: Vec<(Completion, RewardBreakdown)>,
}

impl RolloutGroup {
    /// Forced-aux members must carry an aux span (unless they ran out of
    /// length), forbidden-aux members must carry none.
    pub fn new(kind: SampleMode, members: Vec<(Completion, RewardBreakdown)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyGroup);
        }
        for (i, (c, _)) in members.iter().enumerate() {
            let ok = match kind {
                SampleMode::Free => true,
                SampleMode::ForcedAux => c.truncated || !c.aux.is_empty(),
                SampleMode::ForbidAux => c.aux.is_empty(),
            };
            if !ok {
                return Err(Error::InvalidGroup(format!(
                    "member {i} violates the {kind:?} constraint"
                )));
            }
        }
        Ok(Self { kind, members })
    }

    pub fn kind(&self) -> SampleMode {
        self.kind
    }

    pub fn members(&self) -> &[(Completion, RewardBreakdown)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn rewards(&self) -> impl Iterator<Item = &RewardBreakdown> + '_ {
        self.members.iter().map(|(_, r)| r)
    }
}

/// Free group plus the two contrastive groups for one prompt.
#[derive(Debug, Clone)]
pub struct GroupTriple {
    pub prompt_id: u64,
    pub free: RolloutGroup,
    pub with_aux: RolloutGroup,
    pub without_aux: RolloutGroup,
}

impl GroupTriple {
    pub fn new(prompt_id: u64, free: RolloutGroup, with_aux: RolloutGroup, without_aux: RolloutGroup) -> Result<Self> {
        let kinds = (free.kind, with_aux.kind, without_aux.kind);
        if kinds != (SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux) {
            return Err(Error::InvalidGroup(format!("unexpected group kinds {kinds:?}")));
        }
        let all = free.members.iter().chain(&with_aux.members).chain(&without_aux.members);
        if let Some((c, _)) = all.into_iter().find(|(c, _)| c.prompt_id != prompt_id) {
            return Err(Error::InvalidGroup(format!(
                "completion for prompt {} in triple for prompt {prompt_id}",
                c.prompt_id
            )));
        }
        Ok(Self {
            prompt_id,
            free,
            with_aux,
            without_aux,
        })
    }

    pub fn decide(&self, epsilon: f64) -> Result<MaskDecision> {
        Ok(decide_mask(
            group_mean_accuracy(&self.with_aux)?,
            group_mean_accuracy(&self.without_aux)?,
            epsilon,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskSign {
    Positive,
    Negative,
    Zero,
}

impl MaskSign {
    pub fn value(self) -> i8 {
        match self {
            MaskSign::Positive => 1,
            MaskSign::Negative => -1,
            MaskSign::Zero => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskDecision {
    pub sign: MaskSign,
    pub mean_with: f64,
    pub mean_without: f64,
    pub epsilon: f64,
}

pub fn group_mean_accuracy(g: &RolloutGroup) -> Result<f64> {
    if g.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let hits: u32 = g.rewards().map(|r| r.accuracy as u32).sum();
    Ok(hits as f64 / g.len() as f64)
}

/// Strict three-way comparison; gaps not exceeding `epsilon` yield `Zero`.
pub fn decide_mask(mean_with: f64, mean_without: f64, epsilon: f64) -> MaskDecision {
    let sign = if mean_with > mean_without + epsilon {
        MaskSign::Positive
    } else if mean_without > mean_with + epsilon {
        MaskSign::Negative
    } else {
        MaskSign::Zero
    };
    MaskDecision {
        sign,
        mean_with,
        mean_without,
        epsilon,
    }
}

/// Applies a decision to every member of the free group.
pub fn apply_mask(decision: &MaskDecision, free: &RolloutGroup, weights: &RewardWeights) -> Vec<RewardBreakdown> {
    free.rewards()
        .map(|r| r.with_mask(decision.sign.value(), weights))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskRatioStats {
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_zero: usize,
    pub positive_ratio: f64,
    pub negative_ratio: f64,
    pub zero_ratio: f64,
}

pub fn mask_ratio(decisions: &[MaskDecision]) -> Result<MaskRatioStats> {
    if decisions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let count = |s: MaskSign| decisions.iter().filter(|d| d.sign == s).count();
    let (n_positive, n_negative) = (count(MaskSign::Positive), count(MaskSign::Negative));
    let n_zero = decisions.len() - n_positive - n_negative;
    let total = decisions.len() as f64;
    Ok(MaskRatioStats {
        n_positive,
        n_negative,
        n_zero,
        positive_ratio: n_positive as f64 / total,
        negative_ratio: n_negative as f64 / total,
        zero_ratio: n_zero as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::parse_completion;
    use crate::vocab::Vocab;

    fn member(aux: bool, accuracy: u8, aux_raw: u8) -> (Completion, RewardBreakdown) {
        let v = Vocab::standard();
        let text = if aux {
            "<think> <aux> point P5 </aux> </think> <answer> A0 </answer> <eos>"
        } else {
            "<think> f </think> <answer> A0 </answer> <eos>"
        };
        let c = parse_completion(&v.encode_str(text).unwrap(), &v, 64).unwrap();
        let r = RewardBreakdown {
            accuracy,
            format: 1,
            aux_raw,
            masked_aux: 0,
            length: 0.25,
            total: 0.0,
        };
        (c, r)
    }

    fn free_group(aux_raw: &[u8]) -> RolloutGroup {
        RolloutGroup::new(
            SampleMode::Free,
            aux_raw.iter().map(|&a| member(a == 1, 1, a)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn mean_accuracy() {
        let g = |acc: &[u8]| {
            RolloutGroup::new(SampleMode::Free, acc.iter().map(|&a| member(false, a, 0)).collect()).unwrap()
        };
        assert_eq!(group_mean_accuracy(&g(&[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(group_mean_accuracy(&g(&[1, 1, 1, 1])).unwrap(), 1.0);
        assert_eq!(group_mean_accuracy(&g(&[0])).unwrap(), 0.0);
        assert!(matches!(
            RolloutGroup::new(SampleMode::Free, vec![]),
            Err(Error::EmptyGroup)
        ));
    }

    #[test]
    fn decisions() {
        assert_eq!(decide_mask(0.8, 0.6, 0.05).sign, MaskSign::Positive);
        assert_eq!(decide_mask(0.5, 0.5, 0.05).sign, MaskSign::Zero);
        assert_eq!(decide_mask(0.6, 0.7, 0.05).sign, MaskSign::Negative);
        assert_eq!(decide_mask(0.64, 0.6, 0.05).sign, MaskSign::Zero);
        assert_eq!(decide_mask(1.0, 0.0, 1.0).sign, MaskSign::Zero);
        assert_eq!(decide_mask(0.5, 0.25, 0.0).sign, MaskSign::Positive);
    }

    #[test]
    fn apply_signs() {
        let w = RewardWeights::default();
        let g = free_group(&[1, 0, 1]);
        let masked = |s| -> Vec<i8> {
            let d = MaskDecision {
                sign: s,
                mean_with: 0.0,
                mean_without: 0.0,
                epsilon: 0.05,
            };
            apply_mask(&d, &g, &w).iter().map(|r| r.masked_aux).collect()
        };
        assert_eq!(masked(MaskSign::Positive), vec![1, 0, 1]);
        assert_eq!(masked(MaskSign::Negative), vec![-1, 0, -1]);
        assert_eq!(masked(MaskSign::Zero), vec![0, 0, 0]);
    }

    #[test]
    fn ratios() {
        let d = |s| MaskDecision {
            sign: s,
            mean_with: 0.0,
            mean_without: 0.0,
            epsilon: 0.0,
        };
        use MaskSign::*;
        let s = mask_ratio(&[d(Positive), d(Positive), d(Negative), d(Zero)]).unwrap();
        assert_eq!((s.positive_ratio, s.negative_ratio, s.zero_ratio), (0.5, 0.25, 0.25));
        let s = mask_ratio(&[d(Zero), d(Zero)]).unwrap();
        assert_eq!((s.positive_ratio, s.negative_ratio, s.zero_ratio), (0.0, 0.0, 1.0));
        let s = mask_ratio(&[d(Positive)]).unwrap();
        assert_eq!((s.positive_ratio, s.negative_ratio, s.zero_ratio), (1.0, 0.0, 0.0));
        assert!(matches!(mask_ratio(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn group_kinds_enforced() {
        let with_aux = RolloutGroup::new(SampleMode::ForcedAux, vec![member(false, 1, 0)]);
        assert!(matches!(with_aux, Err(Error::InvalidGroup(_))));
        let without = RolloutGroup::new(SampleMode::ForbidAux, vec![member(true, 1, 1)]);
        assert!(matches!(without, Err(Error::InvalidGroup(_))));
    }

    #[test]
    fn triple_decision() {
        let w = RolloutGroup::new(
            SampleMode::ForcedAux,
            vec![
                member(true, 1, 1),
                member(true, 1, 1),
                member(true, 0, 1),
                member(true, 1, 1),
            ],
        )
        .unwrap();
        let wo = RolloutGroup::new(
            SampleMode::ForbidAux,
            vec![
                member(false, 0, 0),
                member(false, 1, 0),
                member(false, 0, 0),
                member(false, 0, 0),
            ],
        )
        .unwrap();
        let t = GroupTriple::new(0, free_group(&[1, 0]), w, wo).unwrap();
        let d = t.decide(0.05).unwrap();
        assert_eq!((d.mean_with, d.mean_without, d.sign), (0.75, 0.25, MaskSign::Positive));
    }
}
