mod common;

use gcpo::grpo::{
    compute_advantages, finite_diff_gradient, max_relative_error, objective, objective_gradient, policy_gradient_step,
    ClipConfig, Rollout,
};
use gcpo::policy::{grad_logprob, sample_sequence, sequence_logprob, PolicyParams, SampleMode};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::train::{SuiteConfig, TrainConfig, Trainer};
use gcpo::vocab::Vocab;

#[test]
fn logprob_gradient_matches_finite_differences() {
    let vocab = Vocab::standard();
    let suite = generate_suite(6, CategoryMix::default(), 4).unwrap();
    for seed in 0..6u64 {
        let params = common::random_params(seed, 0.8);
        for (i, mode) in [SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux]
            .into_iter()
            .enumerate()
        {
            let task = &suite.tasks[(seed as usize + i) % suite.len()];
            let seq = sample_sequence(&params, task, mode, 64, seed * 7 + i as u64, &vocab).unwrap();
            let analytic = grad_logprob(&params, &seq);
            let numeric = finite_diff_gradient(|p| sequence_logprob(p, &seq), &params, 1e-6);
            let err = max_relative_error(&analytic, &numeric);
            assert!(err < 1e-5, "seed {seed} mode {mode:?}: {err:e}");
        }
    }
}

/// Batch drawn exactly as the trainer draws one step of contrastive GCPO.
fn trainer_batch() -> (PolicyParams, Vec<Rollout>) {
    let config = TrainConfig {
        seed: 3,
        suite: SuiteConfig {
            size: 40,
            ..SuiteConfig::default()
        },
        ..TrainConfig::default()
    };
    let trainer = Trainer::new(config)
        .unwrap()
        .with_params(common::random_params(8, 0.4))
        .unwrap();
    let mut batch = Vec::new();
    for (slot, ti) in trainer.batch_indices(0).into_iter().enumerate() {
        let p = trainer.rollout_prompt(0, slot, ti).unwrap();
        let totals: Vec<f64> = p.free.iter().map(|(_, r)| r.total).collect();
        let adv = compute_advantages(&totals).unwrap();
        for ((seq, _), a) in p.free.into_iter().zip(adv.values) {
            batch.push(Rollout {
                sequence: seq,
                advantage: a,
            });
        }
    }
    (trainer.params().clone(), batch)
}

#[test]
fn gcpo_surrogate_gradient_matches_finite_differences() {
    let (old, batch) = trainer_batch();
    let mut params = old.clone();
    params.theta.add_scaled(&common::random_params(99, 0.05).theta, 1.0);
    let reference = common::random_params(5, 0.3);
    for kl_coeff in [0.0, 0.1] {
        let cfg = ClipConfig {
            kl_coeff,
            ..ClipConfig::default()
        };
        let analytic = objective_gradient(&params, &reference, &batch, &cfg);
        let numeric = finite_diff_gradient(|p| objective(p, &reference, &batch, &cfg).unwrap().total, &params, 1e-6);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "kl {kl_coeff}: {err:e}");
    }
}

#[test]
fn small_steps_ascend_the_objective() {
    for seed in 0..100 {
        let case = common::gradient_case(seed, 6);
        let cfg = ClipConfig {
            kl_coeff: if seed % 2 == 0 { 0.0 } else { 0.1 },
            learning_rate: 1e-4,
            ..ClipConfig::default()
        };
        let before = objective(&case.params, &case.reference, &case.batch, &cfg)
            .unwrap()
            .total;
        let (next, report) = policy_gradient_step(&case.params, &case.reference, &case.batch, &cfg).unwrap();
        let after = objective(&next, &case.reference, &case.batch, &cfg).unwrap().total;
        assert_eq!(report.total, before);
        assert!(after >= before, "seed {seed}: {before} -> {after}");
        assert_eq!(next.version, case.params.version + 1);
    }
}
