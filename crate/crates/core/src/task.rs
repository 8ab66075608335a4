//! Synthetic geometry-style tasks where an auxiliary construction helps,
//! hurts, or is irrelevant.
//!
//! Each task exposes an observable feature and hides a hint. Constructing a
//! valid auxiliary element reveals a hint symbol:
//!
//! * `AUX_HELPS`: the truth is `hint_answer(hidden_hint)` and is independent
//!   of the observable, so without the hint the best accuracy is chance.
//! * `AUX_HURTS`: the truth is `observable_answer(observable)`; the revealed
//!   hint is a decoy pointing at a wrong answer.
//! * `NEUTRAL`: the truth is `observable_answer(observable)` and the revealed
//!   hint agrees with it.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::scene::{SceneProgram, Statement};
use crate::vocab::NUM_POINTS;

/// Answers used by tasks: `A0..A3`.
pub const ANSWER_ALPHABET: usize = 4;
pub const HINT_ALPHABET: usize = 4;
pub const OBSERVABLE_ALPHABET: usize = 4;

/// Observable symbol to answer index, used by `AUX_HURTS` and `NEUTRAL`.
const OBSERVABLE_TO_ANSWER: [u8; OBSERVABLE_ALPHABET] = [2, 0, 3, 1];

/// Answer decoded from a hint symbol. A bijection.
pub fn hint_answer(hint: u8) -> u8 {
    hint
}

fn answer_hint(answer: u8) -> u8 {
    answer
}

/// Answer determined by the observable feature. A bijection.
pub fn observable_answer(observable: u8) -> u8 {
    OBSERVABLE_TO_ANSWER[observable as usize]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    AuxHelps,
    AuxHurts,
    Neutral,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::AuxHelps, Category::AuxHurts, Category::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::AuxHelps => "AUX_HELPS",
            Category::AuxHurts => "AUX_HURTS",
            Category::Neutral => "NEUTRAL",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Answer index serialized as its surface form, e.g. `"A2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Answer(pub u8);

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

impl FromStr for Answer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('A')
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|&n| (n as usize) < crate::vocab::NUM_ANSWER_SYMBOLS)
            .map(Answer)
            .ok_or_else(|| Error::UnknownToken(s.to_string()))
    }
}

impl Serialize for Answer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub category: Category,
    pub base_scene: SceneProgram,
    pub observable: u8,
    pub hidden_hint: u8,
    pub truth: Answer,
}

impl Task {
    fn check(&self) -> Result<()> {
        if self.observable as usize >= OBSERVABLE_ALPHABET
            || self.hidden_hint as usize >= HINT_ALPHABET
            || self.truth.0 as usize >= ANSWER_ALPHABET
        {
            return Err(Error::InvalidConfig(format!(
                "task {} has out-of-range symbols",
                self.id
            )));
        }
        Ok(())
    }
}

/// Category proportions. Must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMix {
    pub aux_helps: f64,
    pub aux_hurts: f64,
    pub neutral: f64,
}

impl CategoryMix {
    pub fn new(aux_helps: f64, aux_hurts: f64, neutral: f64) -> Result<Self> {
        let mix = Self {
            aux_helps,
            aux_hurts,
            neutral,
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mix {parts:?} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("mix {parts:?} sums to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.aux_helps, self.aux_hurts, self.neutral]
    }

    /// Largest-remainder allocation of `n` tasks over the categories.
    pub fn quotas(&self, n: usize) -> [usize; 3] {
        let raw = self.as_array().map(|p| p * n as f64);
        let mut counts = raw.map(|x| (x + 1e-9).floor() as usize);
        let mut left = n.saturating_sub(counts.iter().sum());
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = raw[a] - counts[a] as f64;
            let fb = raw[b] - counts[b] as f64;
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

impl Default for CategoryMix {
    fn default() -> Self {
        Self {
            aux_helps: 0.4,
            aux_hurts: 0.4,
            neutral: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSuite {
    pub tasks: Vec<Task>,
    pub mix: CategoryMix,
    /// Generation seed; `None` for suites loaded from a file.
    pub seed: Option<u64>,
}

impl TaskSuite {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn category_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for t in &self.tasks {
            counts[t.category.index()] += 1;
        }
        counts
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tasks {
            out.push_str(&serde_json::to_string(t).expect("tasks serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut tasks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let task: Task = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            task.check().map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            tasks.push(task);
        }
        if tasks.is_empty() {
            return Err(Error::InvalidConfig("task file holds no tasks".into()));
        }
        let counts = {
            let mut c = [0usize; 3];
            for t in &tasks {
                c[t.category.index()] += 1;
            }
            c
        };
        let n = tasks.len() as f64;
        let mix = CategoryMix {
            aux_helps: counts[0] as f64 / n,
            aux_hurts: counts[1] as f64 / n,
            neutral: counts[2] as f64 / n,
        };
        Ok(Self { tasks, mix, seed: None })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

fn random_scene(rng: &mut ChaCha8Rng) -> SceneProgram {
    let mut names: Vec<u8> = (0..NUM_POINTS as u8).collect();
    names.shuffle(rng);
    let k = rng.gen_range(2..=4);
    let mut points = names[..k].to_vec();
    points.sort_unstable();
    let mut pairs: Vec<(u8, u8)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((points[i], points[j]));
        }
    }
    pairs.shuffle(rng);
    let n_segments = rng.gen_range(1..=2.min(pairs.len()));
    let mut statements: Vec<Statement> = points.iter().map(|&p| Statement::Point(p)).collect();
    statements.extend(pairs[..n_segments].iter().map(|&(a, b)| Statement::Segment(a, b)));
    SceneProgram::new(statements).expect("generated scenes are valid")
}

/// Generates `n` tasks with exact category quotas.
///
/// `AUX_HELPS` tasks are laid out in blocks of four sharing one observable,
/// each block holding every truth once, so observable and truth are exactly
/// independent whenever the category count is a multiple of four.
pub fn generate_suite(n: usize, mix: CategoryMix, seed: u64) -> Result<TaskSuite> {
    if n == 0 {
        return Err(Error::InvalidConfig("suite size must be at least 1".into()));
    }
    mix.validate()?;
    let quotas = mix.quotas(n);
    let mut rng = stream(seed, Stream::TaskGen, &[]);

    let mut tasks = Vec::with_capacity(n);
    let mut push = |category, observable, hidden_hint, truth, rng: &mut ChaCha8Rng| {
        tasks.push(Task {
            id: 0,
            category,
            base_scene: random_scene(rng),
            observable,
            hidden_hint,
            truth: Answer(truth),
        });
    };

    let mut remaining = quotas[Category::AuxHelps.index()];
    while remaining > 0 {
        let block = remaining.min(ANSWER_ALPHABET);
        let observable = rng.gen_range(0..OBSERVABLE_ALPHABET as u8);
        let mut truths: Vec<u8> = (0..ANSWER_ALPHABET as u8).collect();
        truths.shuffle(&mut rng);
        for &truth in &truths[..block] {
            push(Category::AuxHelps, observable, answer_hint(truth), truth, &mut rng);
        }
        remaining -= block;
    }
    for _ in 0..quotas[Category::AuxHurts.index()] {
        let observable = rng.gen_range(0..OBSERVABLE_ALPHABET as u8);
        let truth = observable_answer(observable);
        let decoys: Vec<u8> = (0..HINT_ALPHABET as u8).filter(|&h| hint_answer(h) != truth).collect();
        let hint = *decoys.choose(&mut rng).expect("at least one decoy");
        push(Category::AuxHurts, observable, hint, truth, &mut rng);
    }
    for _ in 0..quotas[Category::Neutral.index()] {
        let observable = rng.gen_range(0..OBSERVABLE_ALPHABET as u8);
        let truth = observable_answer(observable);
        push(Category::Neutral, observable, answer_hint(truth), truth, &mut rng);
    }

    tasks.shuffle(&mut rng);
    for (i, t) in tasks.iter_mut().enumerate() {
        t.id = i as u64;
    }
    Ok(TaskSuite {
        tasks,
        mix,
        seed: Some(seed),
    })
}

/// Hint symbol revealed by a valid auxiliary construction.
pub fn reveal_hint(task: &Task, aux_valid: bool) -> Option<u8> {
    if !aux_valid {
        return None;
    }
    match task.category {
        Category::AuxHelps | Category::Neutral => Some(task.hidden_hint),
        Category::AuxHurts => {
            if hint_answer(task.hidden_hint) != task.truth.0 {
                Some(task.hidden_hint)
            } else {
                // hand-written suites may carry a truthful hint here
                Some((task.hidden_hint + 1) % HINT_ALPHABET as u8)
            }
        }
    }
}

/// Best achievable accuracy given what a solver can see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// Bayes-optimal accuracy using all visible information.
    pub rational: f64,
    /// Accuracy of answering whatever the revealed hint decodes to. Equal to
    /// `rational` when no hint is visible.
    pub hint_following: f64,
}

/// Weighted `(observable, revealed hint, truth)` worlds a category generates.
fn category_worlds(category: Category) -> Vec<(u8, u8, u8, f64)> {
    let mut worlds = Vec::new();
    let o_n = OBSERVABLE_ALPHABET as u8;
    let h_n = HINT_ALPHABET as u8;
    match category {
        Category::AuxHelps => {
            for o in 0..o_n {
                for h in 0..h_n {
                    worlds.push((o, h, hint_answer(h), 1.0));
                }
            }
        }
        Category::AuxHurts => {
            for o in 0..o_n {
                let truth = observable_answer(o);
                let decoys: Vec<u8> = (0..h_n).filter(|&h| hint_answer(h) != truth).collect();
                let w = 1.0 / decoys.len() as f64;
                for h in decoys {
                    worlds.push((o, h, truth, w));
                }
            }
        }
        Category::Neutral => {
            for o in 0..o_n {
                let truth = observable_answer(o);
                worlds.push((o, answer_hint(truth), truth, 1.0));
            }
        }
    }
    worlds
}

/// Enumerates the category's worlds consistent with the task's visible
/// information and scores every answer against the posterior.
pub fn oracle_policy_value(task: &Task, use_aux: bool) -> OracleValue {
    let revealed = reveal_hint(task, use_aux);
    let mut posterior = [0.0f64; ANSWER_ALPHABET];
    for (o, h, truth, w) in category_worlds(task.category) {
        if o != task.observable || revealed.is_some_and(|r| r != h) {
            continue;
        }
        posterior[truth as usize] += w;
    }
    let mass: f64 = posterior.iter().sum();
    if mass == 0.0 {
        // the task itself lies outside its category's model
        return OracleValue {
            rational: 0.0,
            hint_following: 0.0,
        };
    }
    let best = posterior.iter().cloned().fold(0.0, f64::max) / mass;
    let hint_following = match revealed {
        Some(h) => posterior[hint_answer(h) as usize] / mass,
        None => best,
    };
    OracleValue {
        rational: best,
        hint_following,
    }
}
