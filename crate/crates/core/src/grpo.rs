//! Group-normalized advantages and the clipped surrogate objective with a KL
//! penalty toward a fixed reference policy.
//!
//! The objective maximized per batch is
//!
//! ```text
//! J(theta) = 1/N sum_i min(rho_i A_i, clip(rho_i, 1 - eps, 1 + eps) A_i) - beta KL(pi_theta || pi_ref)
//! rho_i    = exp(log pi_theta(o_i) - log pi_old(o_i))
//! ```
//!
//! with whole-sequence importance ratios and the KL averaged over the states
//! visited by the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{accumulate_grad_logprob, sequence_logprob, Matrix, PolicyParams, SampledSequence, StateFeatures};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageSet {
    pub values: Vec<f64>,
    /// All rewards were equal; every advantage is zero.
    pub degenerate: bool,
}

/// `A_i = (r_i - mean) / std` with the population standard deviation.
pub fn compute_advantages(rewards: &[f64]) -> Result<AdvantageSet> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NumericalError("non-finite reward".into()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // rewards that differ only by rounding noise carry no signal
    let scale = rewards.iter().fold(1.0f64, |m, r| m.max(r.abs()));
    if std <= 1e-12 * scale {
        return Ok(AdvantageSet {
            values: vec![0.0; rewards.len()],
            degenerate: true,
        });
    }
    Ok(AdvantageSet {
        values: rewards.iter().map(|r| (r - mean) / std).collect(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub clip_eps: f64,
    pub kl_coeff: f64,
    pub learning_rate: f64,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            kl_coeff: 0.0,
            learning_rate: 0.05,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clip_eps must be positive, got {}",
                self.clip_eps
            )));
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kl_coeff must be non-negative, got {}",
                self.kl_coeff
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub surrogate: f64,
    pub kl: f64,
    pub total: f64,
    pub grad_norm: f64,
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// One clipped term and whether the unclipped ratio carries gradient.
fn surrogate_term(log_ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let rho = log_ratio.exp();
    let unclipped = rho * adv;
    let clipped = clip(rho, 1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

pub fn surrogate_objective(logp_new: &[f64], logp_old: &[f64], adv: &AdvantageSet, clip_eps: f64) -> Result<f64> {
    let n = logp_new.len();
    if logp_old.len() != n || adv.values.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} new log-probs, {} old log-probs, {} advantages",
            n,
            logp_old.len(),
            adv.values.len()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = logp_new
        .iter()
        .zip(logp_old)
        .zip(&adv.values)
        .map(|((new, old), a)| surrogate_term(new - old, *a, clip_eps).0)
        .sum();
    Ok(sum / n as f64)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z));
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let norm: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / norm).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &z| m.max(z));
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Exact categorical KL between two distributions given as logits.
pub fn categorical_kl(logits_p: &[f64], logits_q: &[f64]) -> f64 {
    let p = softmax(logits_p);
    let lp = log_softmax(logits_p);
    let lq = log_softmax(logits_q);
    let kl: f64 = p.iter().zip(lp.iter().zip(&lq)).map(|(pi, (a, b))| pi * (a - b)).sum();
    kl.max(0.0)
}

/// Mean over `states` of `KL(pi_theta(.|s) || pi_ref(.|s))`, using the full
/// (unmasked) softmax over the vocabulary.
pub fn kl_term(policy: &PolicyParams, reference: &PolicyParams, states: &[&StateFeatures]) -> Result<f64> {
    if policy.theta.shape() != reference.theta.shape() {
        return Err(Error::ShapeMismatch("policy and reference shapes differ".into()));
    }
    if states.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = states
        .iter()
        .map(|x| categorical_kl(&policy.logits(x.as_slice()), &reference.logits(x.as_slice())))
        .sum();
    Ok(total / states.len() as f64)
}

/// Gradient of `kl_term` with respect to the policy weights.
///
/// For `p = softmax(z)`, `dKL/dz_k = p_k (log p_k - log q_k - KL)`.
pub fn kl_gradient(policy: &PolicyParams, reference: &PolicyParams, states: &[&StateFeatures]) -> Matrix {
    let mut grad = Matrix::zeros(policy.vocab_size(), policy.feature_dim());
    if states.is_empty() {
        return grad;
    }
    let scale = 1.0 / states.len() as f64;
    for x in states {
        let zp = policy.logits(x.as_slice());
        let zq = reference.logits(x.as_slice());
        let p = softmax(&zp);
        let lp = log_softmax(&zp);
        let lq = log_softmax(&zq);
        let kl: f64 = p.iter().zip(lp.iter().zip(&lq)).map(|(pi, (a, b))| pi * (a - b)).sum();
        for k in 0..p.len() {
            let dz = p[k] * (lp[k] - lq[k] - kl);
            grad.add_to_row(k, x.as_slice(), scale * dz);
        }
    }
    grad
}

/// A rollout that enters the update, with its advantage.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub sequence: SampledSequence,
    pub advantage: f64,
}

fn visited_states(batch: &[Rollout]) -> Vec<&StateFeatures> {
    batch.iter().flat_map(|r| r.sequence.states.iter()).collect()
}

/// Objective value at `params`. Old log-probs are the ones stored at sampling
/// time.
pub fn objective(
    params: &PolicyParams,
    reference: &PolicyParams,
    batch: &[Rollout],
    config: &ClipConfig,
) -> Result<ObjectiveReport> {
    let logp_new: Vec<f64> = batch.iter().map(|r| sequence_logprob(params, &r.sequence)).collect();
    let logp_old: Vec<f64> = batch.iter().map(|r| r.sequence.total_logp).collect();
    let adv = AdvantageSet {
        values: batch.iter().map(|r| r.advantage).collect(),
        degenerate: false,
    };
    let surrogate = surrogate_objective(&logp_new, &logp_old, &adv, config.clip_eps)?;
    let kl = if config.kl_coeff > 0.0 {
        kl_term(params, reference, &visited_states(batch))?
    } else {
        0.0
    };
    Ok(ObjectiveReport {
        surrogate,
        kl,
        total: surrogate - config.kl_coeff * kl,
        grad_norm: 0.0,
    })
}

/// Analytic gradient of `objective`. Terms where the clipped branch is
/// selected contribute nothing.
pub fn objective_gradient(
    params: &PolicyParams,
    reference: &PolicyParams,
    batch: &[Rollout],
    config: &ClipConfig,
) -> Matrix {
    let mut grad = Matrix::zeros(params.vocab_size(), params.feature_dim());
    if batch.is_empty() {
        return grad;
    }
    let n = batch.len() as f64;
    for r in batch {
        if r.advantage == 0.0 {
            continue;
        }
        let log_ratio = sequence_logprob(params, &r.sequence) - r.sequence.total_logp;
        let (_, active) = surrogate_term(log_ratio, r.advantage, config.clip_eps);
        if active {
            let scale = log_ratio.exp() * r.advantage / n;
            accumulate_grad_logprob(params, &r.sequence, scale, &mut grad);
        }
    }
    if config.kl_coeff > 0.0 {
        let kl_grad = kl_gradient(params, reference, &visited_states(batch));
        grad.add_scaled(&kl_grad, -config.kl_coeff);
    }
    grad
}

/// One gradient-ascent step. On a non-finite gradient the parameters are left
/// untouched and `NumericalError` is returned.
pub fn policy_gradient_step(
    params: &PolicyParams,
    reference: &PolicyParams,
    batch: &[Rollout],
    config: &ClipConfig,
) -> Result<(PolicyParams, ObjectiveReport)> {
    config.validate()?;
    let mut report = objective(params, reference, batch, config)?;
    let grad = objective_gradient(params, reference, batch, config);
    if !grad.is_finite() || !report.total.is_finite() {
        return Err(Error::NumericalError("non-finite objective or gradient".into()));
    }
    report.grad_norm = grad.frobenius_norm();
    let mut next = params.clone();
    next.theta.add_scaled(&grad, config.learning_rate);
    if !next.theta.is_finite() {
        return Err(Error::NumericalError("update produced non-finite weights".into()));
    }
    next.version += 1;
    Ok((next, report))
}

/// Central finite differences of `f` around `params`, one coordinate at a time.
pub fn finite_diff_gradient<F>(f: F, params: &PolicyParams, h: f64) -> Matrix
where
    F: Fn(&PolicyParams) -> f64,
{
    let (rows, cols) = params.theta.shape();
    let mut grad = Matrix::zeros(rows, cols);
    let mut probe = params.clone();
    for i in 0..rows * cols {
        let orig = probe.theta.as_slice()[i];
        probe.theta.as_mut_slice()[i] = orig + h;
        let up = f(&probe);
        probe.theta.as_mut_slice()[i] = orig - h;
        let down = f(&probe);
        probe.theta.as_mut_slice()[i] = orig;
        grad.as_mut_slice()[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Largest coordinate error relative to the larger gradient's max magnitude.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
