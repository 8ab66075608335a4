use std::path::Path;
use std::process::{Command, Output};

fn gcpo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcpo"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gcpo(&["--help"], dir.path())), 0);
    assert_eq!(code(&gcpo(&["--version"], dir.path())), 0);
    assert_eq!(code(&gcpo(&[], dir.path())), 1);
    assert_eq!(code(&gcpo(&["fly"], dir.path())), 1);
    assert_eq!(
        code(&gcpo(&["train", "--out", "r", "--group-size", "x"], dir.path())),
        1
    );
    assert_eq!(
        code(&gcpo(&["train", "--out", "r", "--group-size", "1"], dir.path())),
        1
    );
    assert_eq!(code(&gcpo(&["eval", "--checkpoint", "missing.ckpt"], dir.path())), 1);
}

#[test]
fn gen_tasks_is_deterministic_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a.jsonl", "b.jsonl"] {
        let o = gcpo(&["gen-tasks", "--n", "50", "--seed", "4", "--output", out], p);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(p.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.jsonl")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 50);
    assert_eq!(code(&gcpo(&["gen-tasks", "--n", "0", "--output", "c.jsonl"], p)), 1);
    assert_eq!(
        code(&gcpo(&["gen-tasks", "--mix", "0.5,0.4,0.2", "--output", "c.jsonl"], p)),
        1
    );
    assert!(!p.join("c.jsonl").exists());
}

#[test]
fn train_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("cfg.toml"),
        "mode = \"torl\"\nsteps = 50\nseed = 2\n[suite]\nsize = 30\n",
    )
    .unwrap();
    let o = gcpo(
        &[
            "train",
            "--config",
            "cfg.toml",
            "--steps",
            "6",
            "--checkpoint-every",
            "3",
            "--mode",
            "gcpo",
            "--out",
            "run",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("mode gcpo steps 6 seed 2"));
    for f in [
        "metrics.jsonl",
        "final.ckpt",
        "config.toml",
        "checkpoints/step_000003.ckpt",
        "checkpoints/step_000006.ckpt",
    ] {
        assert!(p.join("run").join(f).exists(), "{f}");
    }
    let resolved = std::fs::read_to_string(p.join("run/config.toml")).unwrap();
    assert!(resolved.contains("size = 30") && resolved.contains("mode = \"gcpo\""));

    let o = gcpo(
        &[
            "eval",
            "--checkpoint",
            "run/final.ckpt",
            "--suite-size",
            "20",
            "--n",
            "2",
            "--output",
            "e.json",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("e.json")).unwrap()).unwrap();
    assert_eq!(report["bon_n"], 2);
    assert_eq!(report["pass_at"].as_array().unwrap().len(), 2);

    let o = gcpo(&["report", "--metrics", "run/metrics.jsonl", "--out", "plots"], p);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("last 6 steps"));
    let rows = std::fs::read_to_string(p.join("plots/length.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 7);

    std::fs::write(p.join("bad.jsonl"), "{\"step\": 0}\n").unwrap();
    assert_eq!(
        code(&gcpo(&["report", "--metrics", "bad.jsonl", "--out", "plots"], p)),
        2
    );
    std::fs::write(p.join("bad.toml"), "steps = 5\nunknown_knob = 1\n").unwrap();
    assert_eq!(code(&gcpo(&["train", "--config", "bad.toml", "--out", "r2"], p)), 1);
}

#[test]
fn score_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("empty.jsonl"), "").unwrap();
    let o = gcpo(&["score", "--input", "empty.jsonl", "--output", "out.jsonl"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(p.join("out.jsonl")).unwrap(), "");

    let good = r#"{"prompt_id":3,"tokens":["<think>","f","</think>","<answer>","A1","</answer>","<eos>"],"truth":"A1","base_scene":["point P0","point P1"]}"#;
    std::fs::write(p.join("in.jsonl"), format!("{good}\n{{\"prompt_id\": 4}}\n")).unwrap();
    let o = gcpo(&["score", "--input", "in.jsonl", "--output", "out.jsonl"], p);
    assert_eq!(code(&o), 2);
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(p.join("out.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["reward"]["accuracy"], 1);
    assert_eq!(lines[0]["reward"]["total"], 1.0 + 0.5 + 0.5 * 7.0 / 64.0);
    assert_eq!(lines[1]["line"], 2);
    assert_eq!(
        code(&gcpo(&["score", "--input", "nope.jsonl", "--output", "o.jsonl"], p)),
        1
    );
}
