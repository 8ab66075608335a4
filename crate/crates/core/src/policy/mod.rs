//! Linear-softmax autoregressive policy over the closed vocabulary.
//!
//! At each step the policy scores every token with `theta · phi(state)`,
//! masks the tokens the grammar (and the sampling mode) forbid, and samples
//! from the renormalized softmax. Log-probabilities are always taken under
//! the masked distribution.

mod features;
mod grammar;
mod params;

pub use features::{
    encode_state, length_bucket, phase, scan_prefix, FeatureLayout, PrefixPhase, StateFeatures, NUM_LENGTH_BUCKETS,
    NUM_PHASE_FLAGS,
};
pub use grammar::Grammar;
pub use params::{Matrix, PolicyParams};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::completion::{parse_completion, Completion};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::task::{Task, ANSWER_ALPHABET};
use crate::vocab::{TokenId, TokenSet, Vocab};

/// How a rollout is conditioned. `ForcedAux` must build at least one valid
/// auxiliary construction before closing its reasoning; `ForbidAux` may not
/// open one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SampleMode {
    Free,
    ForcedAux,
    ForbidAux,
}

impl SampleMode {
    pub fn index(self) -> u64 {
        match self {
            SampleMode::Free => 0,
            SampleMode::ForcedAux => 1,
            SampleMode::ForbidAux => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    pub completion: Completion,
    /// Features of the state before each emitted token.
    pub states: Vec<StateFeatures>,
    /// Allowed-token set at each step.
    pub masks: Vec<TokenSet>,
    pub per_step_logp: Vec<f64>,
    pub total_logp: f64,
    pub mode: SampleMode,
}

impl SampledSequence {
    pub fn tokens(&self) -> &[TokenId] {
        &self.completion.tokens
    }

    pub fn len(&self) -> usize {
        self.completion.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.completion.tokens.is_empty()
    }
}

/// Masked softmax over the vocabulary. Disallowed tokens get probability 0.
pub fn step_distribution(params: &PolicyParams, features: &[f64], allowed: TokenSet) -> Result<Vec<f64>> {
    if allowed.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut probs = vec![0.0; params.vocab_size()];
    let mut max = f64::NEG_INFINITY;
    for t in allowed.iter() {
        let z = params.logit(t, features);
        if !z.is_finite() {
            return Err(Error::NumericalError(format!("non-finite logit for token {t}")));
        }
        probs[t] = z;
        max = max.max(z);
    }
    let mut norm = 0.0;
    for t in allowed.iter() {
        let e = (probs[t] - max).exp();
        probs[t] = e;
        norm += e;
    }
    for t in allowed.iter() {
        probs[t] /= norm;
    }
    Ok(probs)
}

/// Log-probability of `token` under the masked softmax, computed with
/// log-sum-exp for stability.
fn masked_log_prob(params: &PolicyParams, features: &[f64], allowed: TokenSet, token: TokenId) -> f64 {
    let logits: Vec<(TokenId, f64)> = allowed.iter().map(|t| (t, params.logit(t, features))).collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &(_, z)| m.max(z));
    let lse = max + logits.iter().map(|&(_, z)| (z - max).exp()).sum::<f64>().ln();
    let z = logits
        .iter()
        .find(|&&(t, _)| t == token)
        .map_or(f64::NEG_INFINITY, |&(_, z)| z);
    z - lse
}

/// Draws one completion for `task` under `mode`.
///
/// Sampling is a pure function of `(params, task, mode, max_len, seed)`.
pub fn sample_sequence(
    params: &PolicyParams,
    task: &Task,
    mode: SampleMode,
    max_len: usize,
    seed: u64,
    vocab: &Vocab,
) -> Result<SampledSequence> {
    if max_len < 8 {
        return Err(Error::InvalidConfig(format!(
            "max_len {max_len} is below the minimum of 8"
        )));
    }
    let mut rng = stream(seed, Stream::Rollout, &[]);
    let mut grammar = Grammar::new(vocab, &task.base_scene, ANSWER_ALPHABET);
    let mut history: Vec<TokenId> = Vec::with_capacity(max_len);
    let mut states = Vec::with_capacity(max_len);
    let mut masks = Vec::with_capacity(max_len);
    let mut per_step_logp = Vec::with_capacity(max_len);

    while history.len() < max_len && !grammar.is_done() {
        let allowed = grammar.allowed(mode, max_len);
        if allowed.is_empty() {
            // nothing can follow; leave the completion unterminated
            break;
        }
        let features = encode_state(task, &history, vocab, max_len);
        let probs = step_distribution(params, features.as_slice(), allowed)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for t in allowed.iter() {
            acc += probs[t];
            chosen = Some(t);
            if u < acc {
                break;
            }
        }
        let token = chosen.expect("allowed set is non-empty");
        per_step_logp.push(masked_log_prob(params, features.as_slice(), allowed, token));
        states.push(features);
        masks.push(allowed);
        grammar.advance(token);
        history.push(token);
    }

    let completion = parse_completion(&history, vocab, max_len)?.with_prompt_id(task.id);
    let total_logp = per_step_logp.iter().sum();
    Ok(SampledSequence {
        completion,
        states,
        masks,
        per_step_logp,
        total_logp,
        mode,
    })
}

/// Recomputes the sequence log-probability under `params`, reusing the stored
/// states and masks.
pub fn sequence_logprob(params: &PolicyParams, seq: &SampledSequence) -> f64 {
    seq.states
        .iter()
        .zip(&seq.masks)
        .zip(seq.tokens())
        .map(|((x, &mask), &t)| masked_log_prob(params, x.as_slice(), mask, t))
        .sum()
}

/// Gradient of `sequence_logprob` with respect to `theta`:
/// `sum_t (e_token - pi_t) phi_t^T`, with `pi_t` the masked distribution.
pub fn grad_logprob(params: &PolicyParams, seq: &SampledSequence) -> Matrix {
    let mut grad = Matrix::zeros(params.vocab_size(), params.feature_dim());
    accumulate_grad_logprob(params, seq, 1.0, &mut grad);
    grad
}

/// `grad += scale * grad_logprob(params, seq)` without allocating.
pub fn accumulate_grad_logprob(params: &PolicyParams, seq: &SampledSequence, scale: f64, grad: &mut Matrix) {
    for ((x, &mask), &token) in seq.states.iter().zip(&seq.masks).zip(seq.tokens()) {
        if mask.len() == 1 {
            continue;
        }
        let Ok(probs) = step_distribution(params, x.as_slice(), mask) else {
            // non-finite logits: poison the gradient so callers' finiteness checks fire
            grad.as_mut_slice().fill(f64::NAN);
            return;
        };
        for t in mask.iter() {
            let coeff = (t == token) as u8 as f64 - probs[t];
            grad.add_to_row(t, x.as_slice(), scale * coeff);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{aux_reward, format_reward};
    use crate::task::{generate_suite, CategoryMix};

    fn random_params(seed: u64, scale: f64) -> PolicyParams {
        let v = Vocab::standard();
        let dim = FeatureLayout::new(v.len()).dim();
        let mut rng = stream(seed, Stream::Eval, &[99]);
        let data = (0..v.len() * dim).map(|_| rng.gen_range(-scale..scale)).collect();
        PolicyParams::new(Matrix::from_vec(v.len(), dim, data).unwrap()).unwrap()
    }

    #[test]
    fn zero_params_give_uniform_over_allowed() {
        let v = Vocab::standard();
        let dim = FeatureLayout::new(v.len()).dim();
        let p = PolicyParams::zeros(v.len(), dim);
        let allowed: TokenSet = [1, 4, 9].into_iter().collect();
        let probs = step_distribution(&p, &vec![1.0; dim], allowed).unwrap();
        assert_eq!(probs.len(), v.len());
        for (t, &p) in probs.iter().enumerate() {
            let want = if allowed.contains(t) { 1.0 / 3.0 } else { 0.0 };
            assert_eq!(p, want);
        }
    }

    #[test]
    fn single_allowed_token_has_probability_one() {
        let p = random_params(1, 1.0);
        let x = vec![0.5; p.feature_dim()];
        let probs = step_distribution(&p, &x, TokenSet::single(7)).unwrap();
        assert_eq!(probs[7], 1.0);
        assert_eq!(probs.iter().sum::<f64>(), 1.0);
        assert!(matches!(
            step_distribution(&p, &x, TokenSet::EMPTY),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn row_shift_scales_relative_weight() {
        let mut p = random_params(2, 1.0);
        let x: Vec<f64> = (0..p.feature_dim()).map(|i| (i % 3) as f64 * 0.5).collect();
        let allowed = TokenSet::all(p.vocab_size());
        let before = step_distribution(&p, &x, allowed).unwrap();
        // adding c to every entry of row 3 raises its logit by c * sum(x)
        let c = 0.3;
        for w in p.theta.row_mut(3) {
            *w += c;
        }
        let shift = c * x.iter().sum::<f64>();
        let after = step_distribution(&p, &x, allowed).unwrap();
        let ratio = |probs: &[f64]| probs[3] / probs[5];
        assert!((ratio(&after) / ratio(&before) / shift.exp() - 1.0).abs() < 1e-12);
        assert!((after[5] / after[8] - before[5] / before[8]).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_mode_compliant() {
        let v = Vocab::standard();
        let suite = generate_suite(20, CategoryMix::default(), 4).unwrap();
        let p = random_params(3, 0.5);
        for (i, task) in suite.tasks.iter().enumerate() {
            for mode in [SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux] {
                let a = sample_sequence(&p, task, mode, 64, i as u64, &v).unwrap();
                let b = sample_sequence(&p, task, mode, 64, i as u64, &v).unwrap();
                assert_eq!(a, b);
                assert!(!a.completion.truncated);
                assert_eq!(format_reward(&a.completion, &v), 1);
                let opened = a.tokens().iter().filter(|&&t| t == v.specials.aux_open).count();
                match mode {
                    SampleMode::ForbidAux => {
                        assert_eq!(opened, 0);
                        assert_eq!(aux_reward(&a.completion, &task.base_scene, &v), 0);
                    }
                    SampleMode::ForcedAux => {
                        assert!(opened >= 1);
                        assert_eq!(aux_reward(&a.completion, &task.base_scene, &v), 1);
                    }
                    SampleMode::Free => {}
                }
                assert!((a.total_logp - a.per_step_logp.iter().sum::<f64>()).abs() == 0.0);
                assert_eq!(a.states.len(), a.len());
            }
        }
    }

    #[test]
    fn short_budget_forced_sequence_is_truncated() {
        let v = Vocab::standard();
        let suite = generate_suite(1, CategoryMix::default(), 4).unwrap();
        let p = PolicyParams::zeros(v.len(), FeatureLayout::new(v.len()).dim());
        let s = sample_sequence(&p, &suite.tasks[0], SampleMode::ForcedAux, 8, 0, &v).unwrap();
        assert!(s.completion.truncated);
        assert_eq!(s.len(), 8);
    }

    #[test]
    fn stored_logprob_matches_recomputation() {
        let v = Vocab::standard();
        let suite = generate_suite(10, CategoryMix::default(), 5).unwrap();
        let p = random_params(4, 0.8);
        for (i, task) in suite.tasks.iter().enumerate() {
            let s = sample_sequence(&p, task, SampleMode::Free, 48, 100 + i as u64, &v).unwrap();
            assert!((sequence_logprob(&p, &s) - s.total_logp).abs() <= 1e-12);
            let forced: f64 = s
                .masks
                .iter()
                .zip(&s.per_step_logp)
                .filter(|(m, _)| m.len() == 1)
                .map(|(_, lp)| *lp)
                .sum();
            assert_eq!(forced, 0.0);
        }
    }

    #[test]
    fn doubled_params_match_stepwise_recomputation() {
        let v = Vocab::standard();
        let suite = generate_suite(5, CategoryMix::default(), 6).unwrap();
        let p = random_params(5, 0.7);
        let mut doubled = p.clone();
        doubled.theta.scale(2.0);
        for task in &suite.tasks {
            let s = sample_sequence(&p, task, SampleMode::Free, 64, task.id, &v).unwrap();
            let stepwise: f64 = s
                .states
                .iter()
                .zip(&s.masks)
                .zip(s.tokens())
                .map(|((x, &m), &t)| step_distribution(&doubled, x.as_slice(), m).unwrap()[t].ln())
                .sum();
            assert!((sequence_logprob(&doubled, &s) - stepwise).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_rows_of_never_allowed_tokens_are_zero() {
        let v = Vocab::standard();
        let suite = generate_suite(3, CategoryMix::default(), 7).unwrap();
        let p = random_params(6, 0.5);
        let s = sample_sequence(&p, &suite.tasks[0], SampleMode::ForbidAux, 64, 1, &v).unwrap();
        let g = grad_logprob(&p, &s);
        let union = s.masks.iter().fold(0u64, |acc, m| acc | m.bits());
        for t in 0..v.len() {
            if union & (1 << t) == 0 {
                assert!(g.row(t).iter().all(|&x| x == 0.0), "row {t}");
            }
        }
        // <aux> is never allowed when forbidden
        assert!(g.row(v.specials.aux_open).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn forced_choice_step_has_zero_gradient() {
        let v = Vocab::standard();
        let suite = generate_suite(1, CategoryMix::default(), 8).unwrap();
        let p = random_params(7, 0.5);
        let mut s = sample_sequence(&p, &suite.tasks[0], SampleMode::Free, 64, 2, &v).unwrap();
        // keep only the first step, which is always the forced `<think>`
        s.states.truncate(1);
        s.masks.truncate(1);
        s.completion.tokens.truncate(1);
        assert_eq!(s.masks[0].len(), 1);
        assert_eq!(grad_logprob(&p, &s).max_abs(), 0.0);
    }
}
