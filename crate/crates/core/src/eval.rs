//! Best-of-n evaluation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{sample_sequence, PolicyParams, SampleMode};
use crate::reward::{score_completion, RewardWeights};
use crate::rng::{derive_seed, Stream};
use crate::task::{Category, Task, TaskSuite};
use crate::vocab::Vocab;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Samples per task.
    pub n: usize,
    pub seed: u64,
    pub max_len: usize,
    pub mode: SampleMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n: 3,
            seed: 0,
            max_len: 64,
            mode: SampleMode::Free,
        }
    }
}

/// Per-sample outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub correct: bool,
    pub used_aux: bool,
}

/// All samples drawn for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: u64,
    pub category: Category,
    pub samples: Vec<SampleOutcome>,
}

impl TaskOutcome {
    /// Best-of-k over the first `k` samples.
    pub fn passes_at(&self, k: usize) -> bool {
        self.samples.iter().take(k).any(|s| s.correct)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub tasks: usize,
    pub pass_rate: f64,
    pub tool_use_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bon_n: usize,
    /// Best-of-`bon_n` pass rate over all tasks.
    pub pass_rate: f64,
    /// `pass_at[k - 1]` is the best-of-k rate on the same samples.
    pub pass_at: Vec<f64>,
    pub tool_use_rate: f64,
    pub per_category: BTreeMap<Category, CategoryReport>,
}

impl EvalReport {
    pub fn category(&self, c: Category) -> Option<&CategoryReport> {
        self.per_category.get(&c)
    }
}

/// Draws `config.n` samples per task. Sample `k` of task `id` uses the
/// seed derived from `(config.seed, Eval, [id, k])`.
pub fn sample_outcomes(params: &PolicyParams, suite: &TaskSuite, config: &EvalConfig) -> Result<Vec<TaskOutcome>> {
    if config.n == 0 {
        return Err(Error::InvalidConfig("eval n must be at least 1".into()));
    }
    let vocab = Vocab::standard();
    let weights = RewardWeights::default();
    suite
        .tasks
        .par_iter()
        .map(|task| task_outcome(params, task, config, &vocab, &weights))
        .collect()
}

fn task_outcome(
    params: &PolicyParams,
    task: &Task,
    config: &EvalConfig,
    vocab: &Vocab,
    weights: &RewardWeights,
) -> Result<TaskOutcome> {
    let truth = vocab.answer(task.truth.0 as usize);
    let samples = (0..config.n)
        .map(|k| {
            let seed = derive_seed(config.seed, Stream::Eval, &[task.id, k as u64]);
            let seq = sample_sequence(params, task, config.mode, config.max_len, seed, vocab)?;
            let r = score_completion(
                &seq.completion,
                truth,
                &task.base_scene,
                0,
                config.max_len,
                weights,
                vocab,
            )?;
            Ok(SampleOutcome {
                correct: r.accuracy == 1,
                used_aux: r.aux_raw == 1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TaskOutcome {
        task_id: task.id,
        category: task.category,
        samples,
    })
}

/// Aggregates outcomes into a report at `bon_n`.
pub fn summarize(outcomes: &[TaskOutcome], bon_n: usize) -> EvalReport {
    let rate = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let pass_at = (1..=bon_n)
        .map(|k| rate(outcomes.iter().filter(|t| t.passes_at(k)).count(), outcomes.len()))
        .collect::<Vec<_>>();
    let tool = |ts: &[&TaskOutcome]| {
        let total: usize = ts.iter().map(|t| t.samples.len().min(bon_n)).sum();
        let used: usize = ts
            .iter()
            .map(|t| t.samples.iter().take(bon_n).filter(|s| s.used_aux).count())
            .sum();
        rate(used, total)
    };
    let all: Vec<&TaskOutcome> = outcomes.iter().collect();
    let mut per_category = BTreeMap::new();
    for c in Category::ALL {
        let ts: Vec<&TaskOutcome> = outcomes.iter().filter(|t| t.category == c).collect();
        if ts.is_empty() {
            continue;
        }
        per_category.insert(
            c,
            CategoryReport {
                tasks: ts.len(),
                pass_rate: rate(ts.iter().filter(|t| t.passes_at(bon_n)).count(), ts.len()),
                tool_use_rate: tool(&ts),
            },
        );
    }
    EvalReport {
        bon_n,
        pass_rate: pass_at.last().copied().unwrap_or(0.0),
        pass_at,
        tool_use_rate: tool(&all),
        per_category,
    }
}

pub fn evaluate(params: &PolicyParams, suite: &TaskSuite, config: &EvalConfig) -> Result<EvalReport> {
    Ok(summarize(&sample_outcomes(params, suite, config)?, config.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::FeatureLayout;
    use crate::task::{generate_suite, CategoryMix};

    fn zeros() -> PolicyParams {
        let v = Vocab::standard();
        PolicyParams::zeros(v.len(), FeatureLayout::new(v.len()).dim())
    }

    #[test]
    fn bon_is_monotone_on_shared_samples() {
        let suite = generate_suite(60, CategoryMix::default(), 1).unwrap();
        let cfg = EvalConfig {
            n: 5,
            ..EvalConfig::default()
        };
        let r = evaluate(&zeros(), &suite, &cfg).unwrap();
        assert_eq!(r.pass_at.len(), 5);
        for w in r.pass_at.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(r.pass_rate, r.pass_at[4]);
        let tasks: usize = r.per_category.values().map(|c| c.tasks).sum();
        assert_eq!(tasks, 60);
    }

    #[test]
    fn zero_n_is_rejected() {
        let suite = generate_suite(4, CategoryMix::default(), 1).unwrap();
        let cfg = EvalConfig {
            n: 0,
            ..EvalConfig::default()
        };
        assert!(matches!(evaluate(&zeros(), &suite, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn forbid_mode_never_uses_aux() {
        let suite = generate_suite(20, CategoryMix::default(), 2).unwrap();
        let cfg = EvalConfig {
            n: 2,
            mode: SampleMode::ForbidAux,
            ..EvalConfig::default()
        };
        let r = evaluate(&zeros(), &suite, &cfg).unwrap();
        assert_eq!(r.tool_use_rate, 0.0);
    }

    #[test]
    fn summary_counts_by_hand() {
        let s = |correct, used_aux| SampleOutcome { correct, used_aux };
        let outcomes = vec![
            TaskOutcome {
                task_id: 0,
                category: Category::AuxHelps,
                samples: vec![s(false, true), s(true, true)],
            },
            TaskOutcome {
                task_id: 1,
                category: Category::AuxHurts,
                samples: vec![s(false, false), s(false, true)],
            },
        ];
        let r = summarize(&outcomes, 2);
        assert_eq!(r.pass_at, vec![0.0, 0.5]);
        assert_eq!(r.tool_use_rate, 0.75);
        assert_eq!(r.category(Category::AuxHelps).unwrap().pass_rate, 1.0);
        assert_eq!(r.category(Category::AuxHurts).unwrap().tool_use_rate, 0.5);
        assert!(r.category(Category::Neutral).is_none());
    }
}
