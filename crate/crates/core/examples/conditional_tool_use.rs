//! Trains grpo, torl and gcpo on a 40/40/20 suite and compares when each
//! learns to construct. Each method runs at its own step size by default.

use anyhow::Result;
use clap::Parser;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::task::Category;
use gcpo::train::{train, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// One step size for every method instead of the tuned ones.
    #[arg(long)]
    learning_rate: Option<f64>,
}

fn tuned_lr(mode: Algorithm) -> f64 {
    match mode {
        Algorithm::Grpo => 0.5,
        Algorithm::Torl => 0.1,
        Algorithm::Gcpo => 0.2,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> Result<()> {
    let args = Args::parse();
    println!("mode  lr    seed  bon@3  bon@1  tool(helps) tool(hurts) pass(helps) pass(hurts)");
    for mode in [Algorithm::Grpo, Algorithm::Torl, Algorithm::Gcpo] {
        let lr = args.learning_rate.unwrap_or_else(|| tuned_lr(mode));
        let mut bon3 = Vec::new();
        for seed in 0..args.seeds {
            let config = TrainConfig {
                mode,
                steps: args.steps,
                seed,
                learning_rate: lr,
                ..TrainConfig::default()
            };
            let out = train(&config)?;
            let r = evaluate(
                &out.params,
                &out.suite,
                &EvalConfig {
                    n: 3,
                    seed,
                    ..EvalConfig::default()
                },
            )?;
            let cat = |c| r.category(c).expect("suite covers every category");
            println!(
                "{mode:<5} {lr:<5} {seed:4}  {:.3}  {:.3}  {:11.3} {:11.3} {:11.3} {:11.3}",
                r.pass_rate,
                r.pass_at[0],
                cat(Category::AuxHelps).tool_use_rate,
                cat(Category::AuxHurts).tool_use_rate,
                cat(Category::AuxHelps).pass_rate,
                cat(Category::AuxHurts).pass_rate,
            );
            bon3.push(r.pass_rate);
        }
        println!("{mode:<5} median bon@3 {:.3}", median(bon3));
    }
    Ok(())
}
