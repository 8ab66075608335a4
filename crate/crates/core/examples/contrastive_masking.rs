//! Decides mask signs from forced and forbidden rollout groups, then shows
//! how a sign rewrites the free group's rewards.

use anyhow::Result;
use gcpo::masking::{apply_mask, decide_mask, mask_ratio, GroupTriple, RolloutGroup};
use gcpo::policy::{sample_sequence, FeatureLayout, PolicyParams, SampleMode};
use gcpo::reward::{score_completion, RewardWeights};
use gcpo::task::{generate_suite, CategoryMix};
use gcpo::vocab::Vocab;

fn main() -> Result<()> {
    println!("mean_with mean_without  eps   sign");
    for (w, wo, eps) in [
        (0.8, 0.6, 0.05),
        (0.6, 0.7, 0.05),
        (0.64, 0.6, 0.05),
        (1.0, 0.25, 1.0),
        (0.5, 0.5, 0.0),
    ] {
        println!(
            "{w:9.2} {wo:12.2} {eps:5.2}   {:>2}",
            decide_mask(w, wo, eps).sign.value()
        );
    }

    let vocab = Vocab::standard();
    let params = PolicyParams::zeros(vocab.len(), FeatureLayout::new(vocab.len()).dim());
    let weights = RewardWeights::default();
    let suite = generate_suite(8, CategoryMix::default(), 7)?;
    let mut decisions = Vec::new();
    println!("\ntask  category   with  without  sign  free totals");
    for task in &suite.tasks {
        let truth = vocab.answer(task.truth.0 as usize);
        let group = |mode: SampleMode, n: u64| -> Result<RolloutGroup> {
            let members = (0..n)
                .map(|i| {
                    let seq = sample_sequence(&params, task, mode, 64, task.id * 100 + mode.index() * 10 + i, &vocab)?;
                    let r = score_completion(&seq.completion, truth, &task.base_scene, 0, 64, &weights, &vocab)?;
                    Ok((seq.completion, r))
                })
                .collect::<Result<_>>()?;
            Ok(RolloutGroup::new(mode, members)?)
        };
        let triple = GroupTriple::new(
            task.id,
            group(SampleMode::Free, 8)?,
            group(SampleMode::ForcedAux, 4)?,
            group(SampleMode::ForbidAux, 4)?,
        )?;
        let d = triple.decide(0.05)?;
        let totals: Vec<String> = apply_mask(&d, &triple.free, &weights)
            .iter()
            .map(|r| format!("{:.2}", r.total))
            .collect();
        println!(
            "{:4}  {:<9}  {:.2}  {:.2}     {:>2}    {}",
            task.id,
            task.category.name(),
            d.mean_with,
            d.mean_without,
            d.sign.value(),
            totals.join(" ")
        );
        decisions.push(d);
    }
    let r = mask_ratio(&decisions)?;
    println!(
        "\nmask ratios: positive {:.3} negative {:.3} zero {:.3}",
        r.positive_ratio, r.negative_ratio, r.zero_ratio
    );
    Ok(())
}
