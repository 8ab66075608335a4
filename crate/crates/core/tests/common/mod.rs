#![allow(dead_code)]

use gcpo::grpo::Rollout;
use gcpo::policy::{sample_sequence, FeatureLayout, Matrix, PolicyParams, SampleMode};
use gcpo::rng::{derive_seed, stream, Stream};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::vocab::Vocab;
use rand::Rng;

pub fn random_params(seed: u64, scale: f64) -> PolicyParams {
    let v = Vocab::standard();
    let cols = FeatureLayout::new(v.len()).dim();
    let mut rng = stream(seed, Stream::Eval, &[0xa11ce]);
    let data = (0..v.len() * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    PolicyParams::new(Matrix::from_vec(v.len(), cols, data).unwrap()).unwrap()
}

/// Seeded off-policy batch: rollouts sampled under `old`, evaluated at a
/// nearby `params`, with a separate random reference policy.
pub struct GradientCase {
    pub params: PolicyParams,
    pub reference: PolicyParams,
    pub batch: Vec<Rollout>,
}

pub fn gradient_case(seed: u64, rollouts: usize) -> GradientCase {
    let vocab = Vocab::standard();
    let suite = generate_suite(rollouts.max(4), CategoryMix::default(), seed).unwrap();
    let old = random_params(seed, 0.5);
    let mut rng = stream(seed, Stream::Eval, &[0xbeef]);
    let modes = [SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux];
    let batch = (0..rollouts)
        .map(|i| {
            let task = &suite.tasks[i % suite.len()];
            let mode = modes[i % 3];
            let s = derive_seed(seed, Stream::Rollout, &[i as u64]);
            Rollout {
                sequence: sample_sequence(&old, task, mode, 64, s, &vocab).unwrap(),
                advantage: rng.gen_range(-2.0..2.0),
            }
        })
        .collect();
    let mut params = old.clone();
    let shift = random_params(seed ^ 0x5eed, 0.04);
    params.theta.add_scaled(&shift.theta, 1.0);
    GradientCase {
        params,
        reference: random_params(seed ^ 0xfeed, 0.5),
        batch,
    }
}
