//! Median best-of-3 per method over a grid of step sizes; the source of the
//! per-method step sizes used in the conditional tool-use comparison.

use anyhow::Result;
use clap::Parser;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::train::{train, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3,0.5,1,2")]
    rates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "grpo,torl,gcpo")]
    modes: Vec<Algorithm>,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> Result<()> {
    let args = Args::parse();
    print!("{:<6}", "lr");
    for m in &args.modes {
        print!("{m:>8}");
    }
    println!();
    for &lr in &args.rates {
        print!("{lr:<6}");
        for &mode in &args.modes {
            let passes = (0..args.seeds)
                .map(|seed| {
                    let config = TrainConfig {
                        mode,
                        steps: args.steps,
                        seed,
                        learning_rate: lr,
                        ..TrainConfig::default()
                    };
                    let out = train(&config)?;
                    Ok(evaluate(
                        &out.params,
                        &out.suite,
                        &EvalConfig {
                            n: 3,
                            seed,
                            ..EvalConfig::default()
                        },
                    )?
                    .pass_rate)
                })
                .collect::<Result<Vec<_>>>()?;
            print!("{:>8.3}", median(passes));
        }
        println!();
    }
    Ok(())
}
