use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gcpo::checkpoint::Checkpoint;
use gcpo::eval::{evaluate, EvalConfig};
use gcpo::report::{window_summary, write_report, SUMMARY_WINDOW};
use gcpo::reward::RewardWeights;
use gcpo::scoring::{score_file, ScoreOptions};
use gcpo::task::{generate_suite, CategoryMix, TaskSuite};
use gcpo::train::{read_metrics, train_to_dir, Algorithm, TrainConfig};

#[derive(Parser)]
#[command(
    name = "gcpo",
    version,
    about = "Group contrastive policy optimization on a synthetic tool-use task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics and checkpoints.
    Train(Box<TrainArgs>),
    /// Best-of-n evaluation of a checkpoint.
    Eval(EvalArgs),
    /// Attach reward breakdowns to a file of completions.
    Score(ScoreArgs),
    /// Generate a task suite file.
    GenTasks(GenTasksArgs),
    /// Turn a metrics log into CSV series and a summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics.jsonl, checkpoints and config.toml.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mode: Option<Algorithm>,
    #[arg(long)]
    aux_reward: Option<bool>,
    #[arg(long)]
    group_contrast: Option<bool>,
    #[arg(long)]
    length_reward: Option<bool>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    contrast_group_size: Option<usize>,
    #[arg(long)]
    mask_epsilon: Option<f64>,
    #[arg(long)]
    aux_weight: Option<f64>,
    #[arg(long)]
    length_weight: Option<f64>,
    #[arg(long)]
    format_weight: Option<f64>,
    #[arg(long)]
    kl_coeff: Option<f64>,
    #[arg(long)]
    clip_eps: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    prompts_per_step: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Task file; replaces suite generation.
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    suite_size: Option<usize>,
    /// Category proportions as `helps,hurts,neutral`.
    #[arg(long, value_parser = parse_mix)]
    suite_mix: Option<CategoryMix>,
    #[arg(long)]
    suite_seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    log_wall_clock: Option<bool>,
}

#[derive(Args)]
struct SuiteArgs {
    /// Task file; otherwise a suite is generated.
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    suite_size: usize,
    #[arg(long, value_parser = parse_mix, default_value = "0.4,0.4,0.2")]
    suite_mix: CategoryMix,
    #[arg(long, default_value_t = 1)]
    suite_seed: u64,
}

impl SuiteArgs {
    fn load(&self) -> gcpo::Result<TaskSuite> {
        match &self.suite {
            Some(p) => TaskSuite::load(p),
            None => generate_suite(self.suite_size, self.suite_mix, self.suite_seed),
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    suite: SuiteArgs,
    /// Samples per task.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    /// Writes the report as JSON.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, default_value_t = 0.5)]
    format_weight: f64,
    #[arg(long, default_value_t = 0.5)]
    aux_weight: f64,
    #[arg(long, default_value_t = 0.5)]
    length_weight: f64,
    /// Mask sign for records without `mask_sign`.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    default_mask_sign: i8,
}

#[derive(Args)]
struct GenTasksArgs {
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, value_parser = parse_mix, default_value = "0.4,0.4,0.2")]
    mix: CategoryMix,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    metrics: PathBuf,
    /// Directory for the CSV files.
    #[arg(long)]
    out: PathBuf,
}

fn parse_mix(s: &str) -> Result<CategoryMix, String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let [h, u, n] = parts[..] else {
        return Err(format!(
            "expected three comma-separated proportions, got {}",
            parts.len()
        ));
    };
    CategoryMix::new(h, u, n).map_err(|e| e.to_string())
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<gcpo::Error> for Failure {
    fn from(e: gcpo::Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut c = match &a.config {
        Some(p) => TrainConfig::load(p)
            .with_context(|| format!("loading {}", p.display()))
            .map_err(usage)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { c.$field = v; } )* };
    }
    set!(
        mode,
        group_size,
        contrast_group_size,
        mask_epsilon,
        aux_weight,
        length_weight,
        format_weight,
        kl_coeff,
        clip_eps,
        learning_rate,
        max_len,
        steps,
        prompts_per_step,
        seed,
        checkpoint_every,
        log_wall_clock
    );
    for (slot, value) in [
        (&mut c.aux_reward, a.aux_reward),
        (&mut c.group_contrast, a.group_contrast),
        (&mut c.length_reward, a.length_reward),
    ] {
        if value.is_some() {
            *slot = value;
        }
    }
    if let Some(p) = &a.suite {
        c.suite.path = Some(p.clone());
    }
    if let Some(n) = a.suite_size {
        c.suite.size = n;
    }
    if let Some(m) = a.suite_mix {
        c.suite.mix = m;
    }
    if a.suite_seed.is_some() {
        c.suite.seed = a.suite_seed;
    }
    c.validate()?;
    Ok(c)
}

fn run_train(a: TrainArgs) -> Result<(), Failure> {
    let config = resolve_train_config(&a)?;
    std::fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(runtime)?;
    let resolved = toml::to_string(&config).map_err(runtime)?;
    std::fs::write(a.out.join("config.toml"), resolved).map_err(runtime)?;
    let files = train_to_dir(&config, &a.out)?;
    let text = std::fs::read_to_string(&files.metrics).map_err(runtime)?;
    let log = read_metrics(&text)?;
    println!("mode {} steps {} seed {}", config.mode, log.len(), config.seed);
    if let Some(w) = window_summary(&log, SUMMARY_WINDOW) {
        print_window(&w);
    }
    println!("metrics {}", files.metrics.display());
    println!("checkpoint {}", files.final_checkpoint.display());
    Ok(())
}

fn print_window(w: &gcpo::report::WindowSummary) {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("last {} steps:", w.steps);
    println!("  total reward  {:.4}", w.mean_total_reward);
    println!("  accuracy      {:.4}", w.mean_accuracy);
    println!("  length        {:.2}", w.mean_length_tokens);
    println!(
        "  mask +/-/0    {:.3} / {:.3} / {:.3}",
        w.positive_mask_ratio, w.negative_mask_ratio, w.zero_mask_ratio
    );
    println!(
        "  tool use      helps {} hurts {} neutral {}",
        opt(w.tool_use_aux_helps),
        opt(w.tool_use_aux_hurts),
        opt(w.tool_use_neutral)
    );
}

fn run_eval(a: EvalArgs) -> Result<(), Failure> {
    let ckpt = Checkpoint::load(&a.checkpoint).map_err(usage)?;
    let suite = a.suite.load().map_err(usage)?;
    let config = EvalConfig {
        n: a.n,
        seed: a.seed,
        max_len: a.max_len,
        ..EvalConfig::default()
    };
    let report = evaluate(&ckpt.params, &suite, &config)?;
    println!(
        "tasks {} bon@{} pass rate {:.4}",
        suite.len(),
        report.bon_n,
        report.pass_rate
    );
    for (k, r) in report.pass_at.iter().enumerate() {
        println!("  bon@{} {:.4}", k + 1, r);
    }
    println!("tool use {:.4}", report.tool_use_rate);
    for (c, r) in &report.per_category {
        println!(
            "  {:<10} tasks {:>4} pass {:.4} tool use {:.4}",
            c.name(),
            r.tasks,
            r.pass_rate,
            r.tool_use_rate
        );
    }
    if let Some(out) = &a.output {
        let json = serde_json::to_string_pretty(&report).map_err(runtime)?;
        write_file(out, json)?;
    }
    Ok(())
}

fn write_file(path: &Path, body: String) -> Result<(), Failure> {
    std::fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn run_score(a: ScoreArgs) -> Result<(), Failure> {
    let options = ScoreOptions {
        max_len: a.max_len,
        weights: RewardWeights {
            format: a.format_weight,
            aux: a.aux_weight,
            length: a.length_weight,
        },
        default_mask_sign: a.default_mask_sign,
    };
    if !(-1..=1).contains(&a.default_mask_sign) {
        return Err(usage(anyhow::anyhow!("--default-mask-sign must be -1, 0 or 1")));
    }
    let summary = score_file(&a.input, &a.output, &options).map_err(|e| match e {
        gcpo::Error::Io { .. } => usage(e),
        other => other.into(),
    })?;
    println!("scored {} errors {}", summary.scored, summary.errors);
    if summary.is_clean() {
        Ok(())
    } else {
        Err(runtime(anyhow::anyhow!(
            "{} record(s) could not be scored",
            summary.errors
        )))
    }
}

fn run_gen_tasks(a: GenTasksArgs) -> Result<(), Failure> {
    let suite = generate_suite(a.n, a.mix, a.seed)?;
    suite.save(&a.output)?;
    let [h, u, n] = suite.category_counts();
    println!(
        "wrote {} tasks ({h} helps, {u} hurts, {n} neutral) to {}",
        suite.len(),
        a.output.display()
    );
    Ok(())
}

fn run_report(a: ReportArgs) -> Result<(), Failure> {
    let out = write_report(&a.metrics, &a.out).map_err(|e| match e {
        gcpo::Error::Io { .. } if !a.metrics.exists() => usage(e),
        other => runtime(other),
    })?;
    println!("steps {}", out.steps);
    if let Some(w) = &out.summary {
        print_window(w);
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => run_train(*a),
        Command::Eval(a) => run_eval(a),
        Command::Score(a) => run_score(a),
        Command::GenTasks(a) => run_gen_tasks(a),
        Command::Report(a) => run_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
