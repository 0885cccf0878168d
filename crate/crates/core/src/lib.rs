//! Memory-instrumented hidden Markov model decoding.
//!
//! This crate implements three Viterbi decoders that produce bit-identical
//! state paths but manage dynamic-programming memory very differently:
//!
//! * [`trellis::viterbi_full`] — the classical algorithm keeping the whole
//!   back-pointer table (the memory baseline),
//! * [`checkpoint::viterbi_checkpoint`] — two-level checkpointing that keeps
//!   one score column per block and recomputes back pointers block by block,
//! * [`online::StreamDecoder`] — an on-line decoder that maintains a
//!   compressed back-pointer tree, detects coalescence points dynamically,
//!   and emits settled path prefixes before the input ends.
//!
//! Around the decoders sit the tools used to study their memory behaviour:
//! [`randwalk`] holds the analytical run-length and maximum-memory
//! predictions for symmetric two-state models together with a Monte-Carlo
//! walk simulator, [`seqgen`] produces seeded test inputs, and [`metrics`]
//! collects retained-window traces and benchmark reports.
//!
//! All probabilities are handled in natural-log space ([`LogProb`]); ties in
//! every argmax are broken toward the smallest state index so the decoders
//! agree exactly, not just up to probability.

pub mod checkpoint;
pub mod error;
pub mod hmm;
pub mod logprob;
pub mod metrics;
pub mod model_file;
pub mod online;
pub mod randwalk;
pub mod seqgen;
pub mod trellis;

pub use error::{Error, Result};
pub use hmm::{Hmm, StatePath};
pub use logprob::LogProb;

/// State index within a model. Models are limited to 65 536 states, which
/// keeps retained back-pointer columns at two bytes per entry.
pub type State = u16;

/// Dense symbol code in `[0, alphabet_size)`.
pub type Symbol = u8;
