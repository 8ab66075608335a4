//! Scores hand-written completions against one task and prints each reward
//! component.

use anyhow::Result;
use gcpo::completion::parse_completion;
use gcpo::reward::{score_completion, RewardWeights};
use gcpo::scene::SceneProgram;
use gcpo::vocab::Vocab;

fn main() -> Result<()> {
    let vocab = Vocab::standard();
    let base: SceneProgram = serde_json::from_str(r#"["point P0", "point P1", "segment P0 P1"]"#)?;
    let truth = vocab.id("A2")?;
    let weights = RewardWeights::default();
    let max_len = 64;

    let cases = [
        ("plain correct", "<think> f </think> <answer> A2 </answer> <eos>"),
        ("plain wrong", "<think> f </think> <answer> A0 </answer> <eos>"),
        (
            "valid construction",
            "<think> <aux> point P2 </aux> </think> <answer> A2 </answer> <eos>",
        ),
        (
            "undeclared point",
            "<think> <aux> segment P0 P6 </aux> </think> <answer> A2 </answer> <eos>",
        ),
        (
            "restates the scene",
            "<think> <aux> segment P0 P1 </aux> </think> <answer> A2 </answer> <eos>",
        ),
        ("no answer", "<think> f </think> <eos>"),
    ];
    println!(
        "{:<20} {:>4} {:>4} {:>4} {:>7}  total at sign +1 / 0 / -1",
        "case", "acc", "fmt", "aux", "length"
    );
    for (name, text) in cases {
        let c = parse_completion(&vocab.encode_str(text)?, &vocab, max_len)?;
        let totals: Vec<String> = [1i8, 0, -1]
            .iter()
            .map(|&s| {
                score_completion(&c, truth, &base, s, max_len, &weights, &vocab).map(|r| format!("{:.4}", r.total))
            })
            .collect::<Result<_, _>>()?;
        let r = score_completion(&c, truth, &base, 1, max_len, &weights, &vocab)?;
        println!(
            "{name:<20} {:>4} {:>4} {:>4} {:>7.4}  {}",
            r.accuracy,
            r.format,
            r.aux_raw,
            r.length,
            totals.join(" / ")
        );
    }
    Ok(())
}
