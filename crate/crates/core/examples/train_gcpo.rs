//! Trains one GCPO run into a directory and prints the learning curve every
//! 50 steps.

use anyhow::Result;
use clap::Parser;
use gcpo::report::window_summary;
use gcpo::train::{read_metrics, train_to_dir, Algorithm, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "runs/gcpo")]
    out: std::path::PathBuf,
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long, default_value_t = 0.2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let config = TrainConfig {
        mode: Algorithm::Gcpo,
        steps: args.steps,
        learning_rate: args.learning_rate,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let files = train_to_dir(&config, &args.out)?;
    let log = read_metrics(&std::fs::read_to_string(&files.metrics)?)?;
    println!(" step  reward  acc    len   mask+  mask-  tool(helps) tool(hurts)");
    for end in (50..=log.len()).step_by(50) {
        let w = window_summary(&log[..end], 50).expect("non-empty window");
        println!(
            "{end:5}  {:.3}  {:.3}  {:5.2}  {:.3}  {:.3}  {:11.3} {:11.3}",
            w.mean_total_reward,
            w.mean_accuracy,
            w.mean_length_tokens,
            w.positive_mask_ratio,
            w.negative_mask_ratio,
            w.tool_use_aux_helps.unwrap_or(f64::NAN),
            w.tool_use_aux_hurts.unwrap_or(f64::NAN),
        );
    }
    println!("final checkpoint {}", files.final_checkpoint.display());
    Ok(())
}
