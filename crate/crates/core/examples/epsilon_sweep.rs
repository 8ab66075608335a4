//! Sweeps the mask threshold epsilon and reports mask ratios and best-of-3
//! pass rate.

use anyhow::Result;
use clap::Parser;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::report::window_summary;
use gcpo::train::{train, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.15,0.3,1")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.2)]
    learning_rate: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> Result<()> {
    let args = Args::parse();
    println!(
        "epsilon  bon@3  mask+ mask- mask0 (all steps, medians over {} seeds)",
        args.seeds
    );
    for &eps in &args.epsilons {
        let mut rows = Vec::new();
        for seed in 0..args.seeds {
            let config = TrainConfig {
                mode: Algorithm::Gcpo,
                mask_epsilon: eps,
                steps: args.steps,
                learning_rate: args.learning_rate,
                seed,
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
            let w = window_summary(&out.log, out.log.len()).expect("non-empty log");
            rows.push([
                r.pass_rate,
                w.positive_mask_ratio,
                w.negative_mask_ratio,
                w.zero_mask_ratio,
            ]);
        }
        let col = |k: usize| median(rows.iter().map(|r| r[k]).collect());
        println!("{eps:7}  {:.3}  {:.3} {:.3} {:.3}", col(0), col(1), col(2), col(3));
    }
    Ok(())
}
