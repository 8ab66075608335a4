//! Group-normalized advantages, the clipped surrogate and the KL penalty on
//! small hand-checkable inputs.

use anyhow::Result;
use gcpo::grpo::{categorical_kl, compute_advantages, surrogate_objective, AdvantageSet};

fn main() -> Result<()> {
    for rewards in [
        vec![1.0, 1.0, 0.0, 0.0],
        vec![2.0, 0.0],
        vec![2.25, 1.5, 0.5, 1.5],
        vec![0.7; 4],
    ] {
        let a = compute_advantages(&rewards)?;
        println!(
            "rewards {rewards:?} -> advantages {:?} degenerate {}",
            a.values, a.degenerate
        );
    }

    println!();
    for (ratio, adv) in [(2.0f64, 1.0), (0.5, -1.0), (1.1, 1.0), (0.5, 1.0), (2.0, -1.0)] {
        let a = AdvantageSet {
            values: vec![adv],
            degenerate: false,
        };
        let s = surrogate_objective(&[ratio.ln()], &[0.0], &a, 0.2)?;
        println!(
            "ratio {ratio:4} advantage {adv:+} -> clipped term {s:+.3} (unclipped {:+.3})",
            ratio * adv
        );
    }

    let p = [0.9f64.ln(), 0.1f64.ln()];
    let q = [0.5f64.ln(), 0.5f64.ln()];
    println!("\nKL((0.9, 0.1) || (0.5, 0.5)) = {:.6}", categorical_kl(&p, &q));
    Ok(())
}
