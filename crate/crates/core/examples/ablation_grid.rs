//! Trains every auxiliary-reward / group-contrast / length-reward variant and
//! reports best-of-3 pass rate and tool use per category.

use anyhow::Result;
use clap::Parser;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::task::Category;
use gcpo::train::{train, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
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
    // (name, aux reward, group contrast, length reward)
    let variants = [
        ("grpo", false, false, false),
        ("aux only (torl)", true, false, false),
        ("aux + length", true, false, true),
        ("aux + contrast", true, true, false),
        ("gcpo (all)", true, true, true),
    ];
    println!(
        "{:<18} bon@3  tool(helps) tool(hurts) tool(neutral)   medians over {} seeds",
        "variant", args.seeds
    );
    for (name, ar, gc, lr) in variants {
        let mut rows = Vec::new();
        for seed in 0..args.seeds {
            let config = TrainConfig {
                mode: Algorithm::Gcpo,
                aux_reward: Some(ar),
                group_contrast: Some(gc),
                length_reward: Some(lr),
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
            let tool = |c| r.category(c).map_or(f64::NAN, |x| x.tool_use_rate);
            rows.push([
                r.pass_rate,
                tool(Category::AuxHelps),
                tool(Category::AuxHurts),
                tool(Category::Neutral),
            ]);
        }
        let col = |k: usize| median(rows.iter().map(|r| r[k]).collect());
        println!(
            "{name:<18} {:.3}  {:11.3} {:11.3} {:13.3}",
            col(0),
            col(1),
            col(2),
            col(3)
        );
    }
    Ok(())
}
