//! Offline reward scoring of completion files.
//!
//! Input is one JSON object per line:
//!
//! ```json
//! {"prompt_id": 7, "tokens": ["<think>", "f", "</think>", "<answer>", "A2", "</answer>", "<eos>"],
//!  "truth": "A2", "base_scene": ["point P0", "point P1"], "mask_sign": 1}
//! ```
//!
//! `mask_sign` is optional. Each output line repeats the input object with a
//! `reward` field added. A line that cannot be scored becomes
//! `{"line": n, "error": "..."}` and the remaining lines are still scored.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::completion::parse_completion;
use crate::error::{Error, Result};
use crate::reward::{score_completion, RewardBreakdown, RewardWeights};
use crate::scene::SceneProgram;
use crate::task::Answer;
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub prompt_id: u64,
    pub tokens: Vec<String>,
    pub truth: Answer,
    pub base_scene: SceneProgram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_sign: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    /// Length cap and length-reward normalizer.
    pub max_len: usize,
    pub weights: RewardWeights,
    /// Sign applied when a record has no `mask_sign`.
    pub default_mask_sign: i8,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            max_len: 64,
            weights: RewardWeights::default(),
            default_mask_sign: 1,
        }
    }
}

/// Counts from one scoring pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoreSummary {
    pub scored: usize,
    pub errors: usize,
}

impl ScoreSummary {
    pub fn is_clean(&self) -> bool {
        self.errors == 0
    }
}

pub fn score_record(record: &ScoreRecord, options: &ScoreOptions, vocab: &Vocab) -> Result<RewardBreakdown> {
    let sign = record.mask_sign.unwrap_or(options.default_mask_sign);
    if !(-1..=1).contains(&sign) {
        return Err(Error::InvalidConfig(format!(
            "mask_sign must be -1, 0 or 1, got {sign}"
        )));
    }
    let tokens = vocab.encode(&record.tokens)?;
    let completion = parse_completion(&tokens, vocab, options.max_len)?.with_prompt_id(record.prompt_id);
    let truth = vocab.answer(record.truth.0 as usize);
    score_completion(
        &completion,
        truth,
        &record.base_scene,
        sign,
        options.max_len,
        &options.weights,
        vocab,
    )
}

fn score_line(line: &str, options: &ScoreOptions, vocab: &Vocab) -> std::result::Result<Value, String> {
    let mut object: Map<String, Value> = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let record: ScoreRecord = serde_json::from_value(Value::Object(object.clone())).map_err(|e| e.to_string())?;
    let reward = score_record(&record, options, vocab).map_err(|e| e.to_string())?;
    object.insert(
        "reward".into(),
        serde_json::to_value(reward).expect("reward serializes"),
    );
    Ok(Value::Object(object))
}

/// Scores every non-blank line of `input` into `output`.
pub fn score_stream<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    options: &ScoreOptions,
) -> std::io::Result<ScoreSummary> {
    let vocab = Vocab::standard();
    let mut summary = ScoreSummary::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = match score_line(&line, options, &vocab) {
            Ok(v) => {
                summary.scored += 1;
                v
            }
            Err(message) => {
                summary.errors += 1;
                serde_json::json!({ "line": i + 1, "error": message })
            }
        };
        writeln!(output, "{value}")?;
    }
    output.flush()?;
    Ok(summary)
}

pub fn score_file(input: &Path, output: &Path, options: &ScoreOptions) -> Result<ScoreSummary> {
    let reader = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let writer = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
    score_stream(
        std::io::BufReader::new(reader),
        std::io::BufWriter::new(writer),
        options,
    )
    .map_err(|e| Error::io(output, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (Vec<Value>, ScoreSummary) {
        let mut out = Vec::new();
        let summary = score_stream(text.as_bytes(), &mut out, &ScoreOptions::default()).unwrap();
        let values = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        (values, summary)
    }

    const GOOD: &str = r#"{"prompt_id":1,"tokens":["<think>","<aux>","point","P2","</aux>","</think>","<answer>","A2","</answer>","<eos>"],"truth":"A2","base_scene":["point P0","point P1"]}"#;

    #[test]
    fn correct_answer_scores_accuracy() {
        let (values, summary) = run(GOOD);
        assert_eq!(summary, ScoreSummary { scored: 1, errors: 0 });
        let r = &values[0]["reward"];
        assert_eq!(r["accuracy"], 1);
        assert_eq!(r["aux_raw"], 1);
        assert_eq!(r["masked_aux"], 1);
        assert_eq!(values[0]["prompt_id"], 1);
    }

    #[test]
    fn malformed_lines_become_errors() {
        let text = format!(
            "{GOOD}\nnot json\n{{\"prompt_id\":2}}\n\n{}",
            GOOD.replace("\"A2\"]", "\"A9\"]")
        );
        let (values, summary) = run(&text);
        assert_eq!(summary, ScoreSummary { scored: 2, errors: 2 });
        assert_eq!(values[1]["line"], 2);
        assert_eq!(values[2]["line"], 3);
        assert!(values[3]["reward"].is_object());
    }

    #[test]
    fn bad_tokens_and_signs_are_errors() {
        let unknown = GOOD
            .replace("\"f\"", "\"zz\"")
            .replace("\"point\",\"P2\"", "\"point\",\"Q9\"");
        let sign = GOOD.replace("}", ",\"mask_sign\":3}");
        let (values, summary) = run(&format!("{unknown}\n{sign}"));
        assert_eq!(summary.errors, 2);
        assert!(values.iter().all(|v| v.get("error").is_some()));
    }

    #[test]
    fn empty_input_is_clean() {
        let (values, summary) = run("");
        assert!(values.is_empty());
        assert!(summary.is_clean());
    }

    #[test]
    fn explicit_sign_overrides_default() {
        let neg = GOOD.replace("}", ",\"mask_sign\":-1}");
        let (values, _) = run(&neg);
        assert_eq!(values[0]["reward"]["masked_aux"], -1);
        assert_eq!(values[0]["reward"]["total"], 1.0 + 0.5 - 0.5 + 0.5 * 10.0 / 64.0);
    }
}
