//! Evaluates a checkpoint (or a freshly trained policy) at best-of-1 through
//! best-of-n on a held-out suite.

use anyhow::Result;
use clap::Parser;
use gcpo::checkpoint::Checkpoint;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::train::{train, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
    /// Checkpoint to evaluate; trains a short GCPO run when absent.
    #[arg(long)]
    checkpoint: Option<std::path::PathBuf>,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    tasks: usize,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let params = match &args.checkpoint {
        Some(p) => Checkpoint::load(p)?.params,
        None => {
            let config = TrainConfig {
                mode: Algorithm::Gcpo,
                steps: 200,
                learning_rate: 0.2,
                ..TrainConfig::default()
            };
            train(&config)?.params
        }
    };
    let held_out = generate_suite(args.tasks, CategoryMix::default(), 12345)?;
    let report = evaluate(
        &params,
        &held_out,
        &EvalConfig {
            n: args.n,
            seed: 1,
            ..EvalConfig::default()
        },
    )?;
    for (k, rate) in report.pass_at.iter().enumerate() {
        println!("bon@{} {rate:.4}", k + 1);
    }
    for (c, r) in &report.per_category {
        println!(
            "{:<10} pass@{} {:.4} tool use {:.4}",
            c.name(),
            args.n,
            r.pass_rate,
            r.tool_use_rate
        );
    }
    Ok(())
}
