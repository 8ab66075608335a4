//! Samples completions from the untrained policy in each mode and renders
//! them as text.

use anyhow::Result;
use gcpo::policy::{sample_sequence, FeatureLayout, PolicyParams, SampleMode};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::vocab::Vocab;

fn main() -> Result<()> {
    let vocab = Vocab::standard();
    let params = PolicyParams::zeros(vocab.len(), FeatureLayout::new(vocab.len()).dim());
    let suite = generate_suite(3, CategoryMix::default(), 11)?;
    for task in &suite.tasks {
        println!(
            "task {} {} observable {} truth {} scene {}",
            task.id,
            task.category.name(),
            task.observable,
            task.truth,
            vocab.render(&task.base_scene.to_tokens(&vocab))
        );
        for mode in [SampleMode::Free, SampleMode::ForcedAux, SampleMode::ForbidAux] {
            for seed in 0..2 {
                let seq = sample_sequence(&params, task, mode, 64, seed, &vocab)?;
                println!(
                    "  {mode:<9?} logp {:7.3}  {}",
                    seq.total_logp,
                    vocab.render(seq.tokens())
                );
            }
        }
    }
    Ok(())
}
