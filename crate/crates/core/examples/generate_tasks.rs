//! Generates a task suite, writes it as JSON lines and prints the oracle
//! accuracies per category.

use anyhow::Result;
use clap::Parser;
use gcpo::task::{generate_suite, oracle_policy_value, Category, CategoryMix};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<std::path::PathBuf>,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let suite = generate_suite(args.n, CategoryMix::default(), args.seed)?;
    let [h, u, n] = suite.category_counts();
    println!("{} tasks: {h} AUX_HELPS, {u} AUX_HURTS, {n} NEUTRAL", suite.len());
    println!("category   no-aux   aux(rational)   aux(hint-following)");
    for c in Category::ALL {
        let tasks: Vec<_> = suite.tasks.iter().filter(|t| t.category == c).collect();
        let mean = |f: &dyn Fn(&gcpo::task::Task) -> f64| tasks.iter().map(|t| f(t)).sum::<f64>() / tasks.len() as f64;
        println!(
            "{:<10} {:6.3}   {:13.3}   {:19.3}",
            c.name(),
            mean(&|t| oracle_policy_value(t, false).rational),
            mean(&|t| oracle_policy_value(t, true).rational),
            mean(&|t| oracle_policy_value(t, true).hint_following),
        );
    }
    if let Some(path) = args.output {
        suite.save(&path)?;
        println!("wrote {}", path.display());
    } else {
        print!(
            "{}",
            suite
                .to_jsonl()
                .lines()
                .take(2)
                .map(|l| format!("{l}\n"))
                .collect::<String>()
        );
    }
    Ok(())
}
