//! Compares the analytic objective gradient with central finite differences
//! on batches sampled from a random policy.

use anyhow::Result;
use clap::Parser;
use gcpo::grpo::{finite_diff_gradient, max_relative_error, objective, objective_gradient, ClipConfig, Rollout};
use gcpo::policy::{sample_sequence, FeatureLayout, Matrix, PolicyParams, SampleMode};
use gcpo::rng::{derive_seed, stream, Stream};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::vocab::Vocab;
use rand::Rng;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 5)]
    batches: u64,
    #[arg(long, default_value_t = 8)]
    rollouts: usize,
    #[arg(long, default_value_t = 1e-6)]
    h: f64,
}

fn random_params(seed: u64, scale: f64) -> Result<PolicyParams> {
    let v = Vocab::standard();
    let cols = FeatureLayout::new(v.len()).dim();
    let mut rng = stream(seed, Stream::Eval, &[]);
    let data = (0..v.len() * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Ok(PolicyParams::new(Matrix::from_vec(v.len(), cols, data)?)?)
}

fn main() -> Result<()> {
    let args = Args::parse();
    let vocab = Vocab::standard();
    println!("batch  kl_coeff  max_rel_error");
    for b in 0..args.batches {
        let suite = generate_suite(args.rollouts, CategoryMix::default(), b)?;
        let old = random_params(b, 0.5)?;
        let mut rng = stream(b, Stream::Rollout, &[1]);
        let modes = [SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux];
        let batch = suite
            .tasks
            .iter()
            .enumerate()
            .map(|(i, task)| {
                let seed = derive_seed(b, Stream::Rollout, &[i as u64]);
                Ok(Rollout {
                    sequence: sample_sequence(&old, task, modes[i % 3], 64, seed, &vocab)?,
                    advantage: rng.gen_range(-2.0..2.0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut params = old.clone();
        params.theta.add_scaled(&random_params(b + 1000, 0.05)?.theta, 1.0);
        let reference = random_params(b + 2000, 0.5)?;
        for kl_coeff in [0.0, 0.1] {
            let cfg = ClipConfig {
                kl_coeff,
                ..ClipConfig::default()
            };
            let analytic = objective_gradient(&params, &reference, &batch, &cfg);
            let numeric = finite_diff_gradient(
                |p| {
                    objective(p, &reference, &batch, &cfg)
                        .map(|r| r.total)
                        .unwrap_or(f64::NAN)
                },
                &params,
                args.h,
            );
            println!("{b:5}  {kl_coeff:8}  {:.3e}", max_relative_error(&analytic, &numeric));
        }
    }
    Ok(())
}
