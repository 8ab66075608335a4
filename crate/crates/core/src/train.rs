//! Training loop: sample, score, mask, normalize, update, log.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{config_hash, Checkpoint};
use crate::error::{Error, Result};
use crate::grpo::{compute_advantages, policy_gradient_step, ClipConfig, ObjectiveReport, Rollout};
use crate::masking::{decide_mask, mask_ratio, MaskDecision};
use crate::policy::{sample_sequence, FeatureLayout, PolicyParams, SampleMode, SampledSequence};
use crate::reward::{score_completion, RewardBreakdown, RewardWeights};
use crate::rng::{derive_seed, stream, Stream};
use crate::task::{generate_suite, Category, CategoryMix, Task, TaskSuite};
use crate::vocab::Vocab;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Reward scheme preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Grpo,
    Torl,
    Gcpo,
}

impl Algorithm {
    pub fn toggles(self) -> Toggles {
        match self {
            Algorithm::Grpo => Toggles {
                aux_reward: false,
                group_contrast: false,
                length_reward: false,
            },
            Algorithm::Torl => Toggles {
                aux_reward: true,
                group_contrast: false,
                length_reward: false,
            },
            Algorithm::Gcpo => Toggles {
                aux_reward: true,
                group_contrast: true,
                length_reward: true,
            },
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Algorithm::Grpo => "grpo",
            Algorithm::Torl => "torl",
            Algorithm::Gcpo => "gcpo",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grpo" => Ok(Algorithm::Grpo),
            "torl" => Ok(Algorithm::Torl),
            "gcpo" => Ok(Algorithm::Gcpo),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// Component switches: auxiliary reward (AR), group contrast (GC) and
/// length reward (LR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub aux_reward: bool,
    pub group_contrast: bool,
    pub length_reward: bool,
}

impl Toggles {
    /// Contrastive groups are only sampled when there is an auxiliary reward
    /// to sign.
    pub fn samples_contrast(&self) -> bool {
        self.aux_reward && self.group_contrast
    }
}

/// Where the training tasks come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Task file; overrides the generation parameters below.
    pub path: Option<PathBuf>,
    pub size: usize,
    pub mix: CategoryMix,
    /// Defaults to a seed derived from the training seed.
    pub seed: Option<u64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            path: None,
            size: 300,
            mix: CategoryMix::default(),
            seed: None,
        }
    }
}

impl SuiteConfig {
    pub fn load(&self, training_seed: u64) -> Result<TaskSuite> {
        match &self.path {
            Some(p) => TaskSuite::load(p),
            None => generate_suite(
                self.size,
                self.mix,
                self.seed
                    .unwrap_or_else(|| derive_seed(training_seed, Stream::TaskGen, &[])),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Algorithm,
    /// Explicit component toggles; each overrides the preset when set.
    pub aux_reward: Option<bool>,
    pub group_contrast: Option<bool>,
    pub length_reward: Option<bool>,
    /// Free rollouts per prompt (G).
    pub group_size: usize,
    /// Rollouts in each contrastive group.
    pub contrast_group_size: usize,
    pub mask_epsilon: f64,
    /// Auxiliary reward weight (lambda).
    pub aux_weight: f64,
    /// Length reward weight (beta).
    pub length_weight: f64,
    pub format_weight: f64,
    pub kl_coeff: f64,
    pub clip_eps: f64,
    /// Toy-scale step size. Large language models use values around 3e-7.
    pub learning_rate: f64,
    /// Completion length cap, also the length-reward normalizer.
    pub max_len: usize,
    pub steps: usize,
    pub prompts_per_step: usize,
    pub seed: u64,
    pub suite: SuiteConfig,
    pub checkpoint_every: usize,
    /// Adds elapsed milliseconds to every metrics record. Off by default so
    /// logs stay byte-reproducible.
    pub log_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Algorithm::Gcpo,
            aux_reward: None,
            group_contrast: None,
            length_reward: None,
            group_size: 8,
            contrast_group_size: 4,
            mask_epsilon: 0.05,
            aux_weight: 0.5,
            length_weight: 0.5,
            format_weight: 0.5,
            kl_coeff: 0.0,
            clip_eps: 0.2,
            learning_rate: 0.05,
            max_len: 64,
            steps: 500,
            prompts_per_step: 8,
            seed: 0,
            suite: SuiteConfig::default(),
            checkpoint_every: 20,
            log_wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn preset(mode: Algorithm) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn toggles(&self) -> Toggles {
        let preset = self.mode.toggles();
        Toggles {
            aux_reward: self.aux_reward.unwrap_or(preset.aux_reward),
            group_contrast: self.group_contrast.unwrap_or(preset.group_contrast),
            length_reward: self.length_reward.unwrap_or(preset.length_reward),
        }
    }

    /// Reward weights with disabled components zeroed.
    pub fn reward_weights(&self) -> RewardWeights {
        let t = self.toggles();
        RewardWeights {
            format: self.format_weight,
            aux: if t.aux_reward { self.aux_weight } else { 0.0 },
            length: if t.length_reward { self.length_weight } else { 0.0 },
        }
    }

    pub fn clip_config(&self) -> ClipConfig {
        ClipConfig {
            clip_eps: self.clip_eps,
            kl_coeff: self.kl_coeff,
            learning_rate: self.learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.group_size < 2 {
            return bad(format!("group_size must be at least 2, got {}", self.group_size));
        }
        if self.toggles().samples_contrast() && self.contrast_group_size < 1 {
            return bad("contrast_group_size must be at least 1".into());
        }
        if !(self.mask_epsilon >= 0.0 && self.mask_epsilon.is_finite()) {
            return bad(format!("mask_epsilon must be non-negative, got {}", self.mask_epsilon));
        }
        for (name, w) in [
            ("aux_weight", self.aux_weight),
            ("length_weight", self.length_weight),
            ("format_weight", self.format_weight),
        ] {
            if !w.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.max_len < 8 {
            return bad(format!("max_len must be at least 8, got {}", self.max_len));
        }
        if self.prompts_per_step < 1 {
            return bad("prompts_per_step must be at least 1".into());
        }
        if self.suite.path.is_none() {
            if self.suite.size < 1 {
                return bad("suite.size must be at least 1".into());
            }
            self.suite.mix.validate()?;
        }
        self.clip_config().validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Per-category rates; `None` when the step drew no task of that category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryRates {
    pub aux_helps: Option<f64>,
    pub aux_hurts: Option<f64>,
    pub neutral: Option<f64>,
}

impl CategoryRates {
    pub fn get(&self, c: Category) -> Option<f64> {
        match c {
            Category::AuxHelps => self.aux_helps,
            Category::AuxHurts => self.aux_hurts,
            Category::Neutral => self.neutral,
        }
    }

    fn from_counts(hits: [usize; 3], totals: [usize; 3]) -> Self {
        let rate = |k: usize| (totals[k] > 0).then(|| hits[k] as f64 / totals[k] as f64);
        Self {
            aux_helps: rate(0),
            aux_hurts: rate(1),
            neutral: rate(2),
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub step: usize,
    pub mean_total_reward: f64,
    pub mean_accuracy: f64,
    pub mean_format: f64,
    pub mean_length_tokens: f64,
    pub mean_aux_raw: f64,
    pub mean_masked_aux: f64,
    /// Mask ratios over this step's prompts; absent when no contrastive
    /// groups were sampled.
    pub positive_mask_ratio: Option<f64>,
    pub negative_mask_ratio: Option<f64>,
    pub zero_mask_ratio: Option<f64>,
    pub tool_use_rate: CategoryRates,
    pub accuracy_rate: CategoryRates,
    pub surrogate: f64,
    pub kl: f64,
    pub objective: f64,
    pub grad_norm: f64,
    /// Rollouts whose rewards entered advantage estimation.
    pub advantage_inputs: usize,
    pub free_rollouts: usize,
    /// Rollouts sampled only to decide masks.
    pub contrastive_rollouts: usize,
    pub degenerate_groups: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
}

/// Everything sampled and scored for one prompt in one step.
#[derive(Debug, Clone)]
pub struct PromptRollouts {
    pub task_index: usize,
    pub free: Vec<(SampledSequence, RewardBreakdown)>,
    pub decision: Option<MaskDecision>,
    pub contrastive_rollouts: usize,
}

pub struct Trainer {
    config: TrainConfig,
    toggles: Toggles,
    weights: RewardWeights,
    suite: TaskSuite,
    vocab: Vocab,
    params: PolicyParams,
    reference: PolicyParams,
    step: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let suite = config.suite.load(config.seed)?;
        Self::with_suite(config, suite)
    }

    pub fn with_suite(config: TrainConfig, suite: TaskSuite) -> Result<Self> {
        config.validate()?;
        if suite.is_empty() {
            return Err(Error::InvalidConfig("task suite is empty".into()));
        }
        let vocab = Vocab::standard();
        let params = PolicyParams::zeros(vocab.len(), FeatureLayout::new(vocab.len()).dim());
        Ok(Self {
            toggles: config.toggles(),
            weights: config.reward_weights(),
            reference: params.clone(),
            config,
            suite,
            vocab,
            params,
            step: 0,
            started: Instant::now(),
        })
    }

    /// Starts from given weights; they also become the KL reference.
    pub fn with_params(mut self, params: PolicyParams) -> Result<Self> {
        if params.theta.shape() != self.params.theta.shape() {
            return Err(Error::ShapeMismatch("initial parameters have the wrong shape".into()));
        }
        self.reference = params.clone();
        self.params = params;
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn suite(&self) -> &TaskSuite {
        &self.suite
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Tasks drawn for `step`, without replacement.
    pub fn batch_indices(&self, step: usize) -> Vec<usize> {
        let mut rng = stream(self.config.seed, Stream::Batch, &[step as u64]);
        let k = self.config.prompts_per_step.min(self.suite.len());
        sample_indices(&mut rng, self.suite.len(), k).into_vec()
    }

    fn rollout_seed(&self, step: usize, slot: usize, mode: SampleMode, i: usize) -> u64 {
        derive_seed(
            self.config.seed,
            Stream::Rollout,
            &[step as u64, slot as u64, mode.index(), i as u64],
        )
    }

    fn sample_group(
        &self,
        task: &Task,
        step: usize,
        slot: usize,
        mode: SampleMode,
        size: usize,
    ) -> Result<Vec<(SampledSequence, RewardBreakdown)>> {
        let truth = self.vocab.answer(task.truth.0 as usize);
        (0..size)
            .map(|i| {
                let seed = self.rollout_seed(step, slot, mode, i);
                let seq = sample_sequence(&self.params, task, mode, self.config.max_len, seed, &self.vocab)?;
                let r = score_completion(
                    &seq.completion,
                    truth,
                    &task.base_scene,
                    0,
                    self.config.max_len,
                    &self.weights,
                    &self.vocab,
                )?;
                Ok((seq, r))
            })
            .collect()
    }

    /// Samples and scores all groups for one prompt and signs the free
    /// group's auxiliary reward.
    pub fn rollout_prompt(&self, step: usize, slot: usize, task_index: usize) -> Result<PromptRollouts> {
        let task = &self.suite.tasks[task_index];
        let mut free = self.sample_group(task, step, slot, SampleMode::Free, self.config.group_size)?;
        let mut decision = None;
        let mut contrastive_rollouts = 0;
        let sign = if !self.toggles.aux_reward {
            0
        } else if self.toggles.samples_contrast() {
            let g = self.config.contrast_group_size;
            let with = self.sample_group(task, step, slot, SampleMode::ForcedAux, g)?;
            let without = self.sample_group(task, step, slot, SampleMode::ForbidAux, g)?;
            contrastive_rollouts = 2 * g;
            let mean = |grp: &[(SampledSequence, RewardBreakdown)]| {
                grp.iter().map(|(_, r)| r.accuracy as f64).sum::<f64>() / grp.len() as f64
            };
            let d = decide_mask(mean(&with), mean(&without), self.config.mask_epsilon);
            decision = Some(d);
            d.sign.value()
        } else {
            1
        };
        for (_, r) in &mut free {
            *r = r.with_mask(sign, &self.weights);
        }
        Ok(PromptRollouts {
            task_index,
            free,
            decision,
            contrastive_rollouts,
        })
    }

    /// Runs one training step and returns its metrics.
    pub fn step(&mut self) -> Result<MetricsRecord> {
        let step = self.step;
        let indices = self.batch_indices(step);
        let prompts: Vec<PromptRollouts> = indices
            .par_iter()
            .enumerate()
            .map(|(slot, &ti)| self.rollout_prompt(step, slot, ti))
            .collect::<Result<_>>()?;

        let mut batch = Vec::new();
        let mut degenerate_groups = 0;
        for p in &prompts {
            let totals: Vec<f64> = p.free.iter().map(|(_, r)| r.total).collect();
            let adv = compute_advantages(&totals)?;
            degenerate_groups += adv.degenerate as usize;
            for ((seq, _), a) in p.free.iter().zip(adv.values) {
                batch.push(Rollout {
                    sequence: seq.clone(),
                    advantage: a,
                });
            }
        }
        let advantage_inputs = batch.len();
        let (next, report) = policy_gradient_step(&self.params, &self.reference, &batch, &self.config.clip_config())?;
        self.params = next;
        self.step += 1;
        Ok(self.metrics(step, &prompts, report, advantage_inputs, degenerate_groups))
    }

    fn metrics(
        &self,
        step: usize,
        prompts: &[PromptRollouts],
        report: ObjectiveReport,
        advantage_inputs: usize,
        degenerate_groups: usize,
    ) -> MetricsRecord {
        let free: Vec<&(SampledSequence, RewardBreakdown)> = prompts.iter().flat_map(|p| &p.free).collect();
        let n = free.len() as f64;
        let mean = |f: &dyn Fn(&(SampledSequence, RewardBreakdown)) -> f64| free.iter().map(|x| f(x)).sum::<f64>() / n;

        let mut tool = [0usize; 3];
        let mut correct = [0usize; 3];
        let mut totals = [0usize; 3];
        for p in prompts {
            let k = self.suite.tasks[p.task_index].category.index();
            for (_, r) in &p.free {
                totals[k] += 1;
                tool[k] += r.aux_raw as usize;
                correct[k] += r.accuracy as usize;
            }
        }
        let decisions: Vec<MaskDecision> = prompts.iter().filter_map(|p| p.decision).collect();
        let ratios = mask_ratio(&decisions).ok();

        MetricsRecord {
            schema_version: METRICS_SCHEMA_VERSION,
            step,
            mean_total_reward: mean(&|(_, r)| r.total),
            mean_accuracy: mean(&|(_, r)| r.accuracy as f64),
            mean_format: mean(&|(_, r)| r.format as f64),
            mean_length_tokens: mean(&|(s, _)| s.len() as f64),
            mean_aux_raw: mean(&|(_, r)| r.aux_raw as f64),
            mean_masked_aux: mean(&|(_, r)| r.masked_aux as f64),
            positive_mask_ratio: ratios.map(|s| s.positive_ratio),
            negative_mask_ratio: ratios.map(|s| s.negative_ratio),
            zero_mask_ratio: ratios.map(|s| s.zero_ratio),
            tool_use_rate: CategoryRates::from_counts(tool, totals),
            accuracy_rate: CategoryRates::from_counts(correct, totals),
            surrogate: report.surrogate,
            kl: report.kl,
            objective: report.total,
            grad_norm: report.grad_norm,
            advantage_inputs,
            free_rollouts: free.len(),
            contrastive_rollouts: prompts.iter().map(|p| p.contrastive_rollouts).sum(),
            degenerate_groups,
            wall_clock_ms: self
                .config
                .log_wall_clock
                .then(|| self.started.elapsed().as_secs_f64() * 1e3),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            config_hash: config_hash(&self.config),
        }
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: Vec<MetricsRecord>,
    pub suite: TaskSuite,
}

/// Runs `config.steps` steps in memory.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone())?;
    let mut log = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        log.push(trainer.step()?);
    }
    Ok(TrainOutcome {
        params: trainer.params.clone(),
        log,
        suite: trainer.suite.clone(),
    })
}

/// Paths written by [`train_to_dir`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub metrics: PathBuf,
    pub final_checkpoint: PathBuf,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs training, streaming `metrics.jsonl` and writing
/// `checkpoints/step_NNNNNN.ckpt` every `checkpoint_every` steps plus
/// `final.ckpt`. If a step fails numerically, the last good parameters are
/// saved to `final.ckpt` before the error is returned.
pub fn train_to_dir(config: &TrainConfig, out_dir: &Path) -> Result<RunFiles> {
    let mut trainer = Trainer::new(config.clone())?;
    let ckpt_dir = out_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let file = std::fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut log = BufWriter::new(file);
    let final_path = out_dir.join("final.ckpt");
    let mut checkpoints = Vec::new();

    for _ in 0..config.steps {
        let record = match trainer.step() {
            Ok(r) => r,
            Err(e) => {
                log.flush().map_err(|err| Error::io(&metrics_path, err))?;
                trainer.checkpoint().save(&final_path)?;
                return Err(e);
            }
        };
        let line = serde_json::to_string(&record).expect("metrics serialize");
        writeln!(log, "{line}").map_err(|e| Error::io(&metrics_path, e))?;
        let done = trainer.steps_done();
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 {
            let path = ckpt_dir.join(format!("step_{done:06}.ckpt"));
            trainer.checkpoint().save(&path)?;
            checkpoints.push(path);
        }
    }
    log.flush().map_err(|e| Error::io(&metrics_path, e))?;
    trainer.checkpoint().save(&final_path)?;
    Ok(RunFiles {
        metrics: metrics_path,
        final_checkpoint: final_path,
        checkpoints,
    })
}

/// Parses a metrics log, reporting the first bad line.
pub fn read_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
