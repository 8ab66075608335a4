//! Group contrastive policy optimization on a synthetic tool-use task.
//!
//! A tiny autoregressive policy solves geometry-flavoured puzzles. It may
//! write an auxiliary construction in a small drawing language before
//! answering; on some tasks that reveals the answer, on others it reveals a
//! decoy. Training compares three reward schemes:
//!
//! * `grpo`: accuracy and format rewards only;
//! * `torl`: plus an unconditional bonus for a valid construction;
//! * `gcpo`: the construction bonus is signed per prompt by contrasting a
//!   rollout group forced to construct with one forbidden to, plus a length
//!   reward.
//!
//! Module map:
//!
//! | module | contents |
//! |---|---|
//! | [`vocab`], [`completion`], [`scene`], [`reward`] | tokens, span parsing, the drawing language and the verifiable rewards |
//! | [`masking`] | contrastive sign decisions and mask-ratio statistics |
//! | [`grpo`] | advantages, clipped surrogate, KL term, update step, finite differences |
//! | [`policy`] | state features, grammar mask, sampling, log-probs and their gradients |
//! | [`task`] | seeded task suites and brute-force oracles |
//! | [`train`], [`eval`], [`scoring`], [`report`], [`checkpoint`] | the training loop and its file formats |

pub mod checkpoint;
pub mod completion;
pub mod error;
pub mod eval;
pub mod grpo;
pub mod masking;
pub mod policy;
pub mod report;
pub mod reward;
pub mod rng;
pub mod scene;
pub mod scoring;
pub mod task;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
