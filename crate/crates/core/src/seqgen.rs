//! Deterministic, seedable input generators.
//!
//! All randomness comes from ChaCha12 seeded with an explicit 64-bit seed
//! (see [`RNG_ALGO`]); published seeds reproduce byte-identical corpora.
//! Symbols are drawn by inverse-CDF lookup on the linear-space
//! probabilities, one `f64` draw per symbol; the model generator draws the
//! emission before the transition at each position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::hmm::{Hmm, StatePath};
use crate::{State, Symbol};

/// Identifier of the pseudo-random generator, echoed into output headers.
pub const RNG_ALGO: &str = "chacha12";

/// Four-symbol i.i.d. stand-in distribution for desk-scale DNA-like inputs.
/// These are round placeholder values, not measured base frequencies.
pub const DEFAULT_DNA_DIST: [f64; 4] = [0.29, 0.21, 0.21, 0.29];

/// What to sample.
#[derive(Clone, Debug)]
pub enum GenKind {
    /// Independent draws from a fixed symbol distribution.
    Iid(Vec<f64>),
    /// The model's own generative process; the true state path is returned
    /// alongside the sequence.
    FromModel(Hmm),
}

/// A fully specified generation task.
#[derive(Clone, Debug)]
pub struct GenSpec {
    pub kind: GenKind,
    pub len: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct GenOutput {
    pub seq: Vec<Symbol>,
    pub true_path: Option<StatePath>,
}

impl GenSpec {
    pub fn iid(dist: Vec<f64>, len: usize, seed: u64) -> GenSpec {
        GenSpec {
            kind: GenKind::Iid(dist),
            len,
            seed,
        }
    }

    pub fn from_model(hmm: Hmm, len: usize, seed: u64) -> GenSpec {
        GenSpec {
            kind: GenKind::FromModel(hmm),
            len,
            seed,
        }
    }

    pub fn generate(&self) -> Result<GenOutput> {
        match &self.kind {
            GenKind::Iid(dist) => Ok(GenOutput {
                seq: gen_iid(dist, self.len, self.seed)?,
                true_path: None,
            }),
            GenKind::FromModel(hmm) => {
                let (seq, path) = gen_from_hmm(hmm, self.len, self.seed)?;
                Ok(GenOutput {
                    seq,
                    true_path: Some(path),
                })
            }
        }
    }
}

fn check_dist(dist: &[f64]) -> Result<()> {
    if dist.is_empty() || dist.len() > Symbol::MAX as usize + 1 {
        return Err(Error::Domain(format!(
            "distribution over {} symbols unsupported",
            dist.len()
        )));
    }
    for &p in dist {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::ProbRange {
                what: "iid distribution",
                value: p,
            });
        }
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::RowSum {
            what: "iid distribution",
            index: 0,
            sum,
            tol: 1e-9,
        });
    }
    Ok(())
}

#[inline]
fn draw_index(probs: impl Iterator<Item = f64>, r: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        last = i;
        acc += p;
        if r < acc {
            return i;
        }
    }
    // Rounding can leave acc marginally below 1; the draw lands on the last
    // symbol with positive mass.
    last
}

/// `len` symbols sampled independently from `dist`.
pub fn gen_iid(dist: &[f64], len: usize, seed: u64) -> Result<Vec<Symbol>> {
    check_dist(dist)?;
    if len == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok((0..len)
        .map(|_| draw_index(dist.iter().copied(), rng.random::<f64>()) as Symbol)
        .collect())
}

/// Runs the model's generative process: initial state from pi, then emit and
/// transition in alternation. Returns the sequence with its generating path.
pub fn gen_from_hmm(hmm: &Hmm, len: usize, seed: u64) -> Result<(Vec<Symbol>, StatePath)> {
    if len == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let m = hmm.num_states();
    let a = hmm.alphabet_size();
    let mut state = draw_index((0..m).map(|j| hmm.initial(j).prob()), rng.random::<f64>());
    let mut seq = Vec::with_capacity(len);
    let mut path = Vec::with_capacity(len);
    for i in 0..len {
        let sym = draw_index((0..a).map(|x| hmm.emit(state, x as Symbol).prob()), rng.random::<f64>());
        seq.push(sym as Symbol);
        path.push(state as State);
        if i + 1 < len {
            state = draw_index((0..m).map(|j| hmm.trans(state, j).prob()), rng.random::<f64>());
        }
    }
    Ok((seq, StatePath(path)))
}

/// Random stochastic model for benchmarks and decoder-agreement corpora.
///
/// Rows are normalized exponential draws; with probability `zero_fraction`
/// an entry is zeroed before normalization (at least one entry per row is
/// kept positive). Deterministic per seed.
pub fn random_hmm(m: usize, alphabet: usize, seed: u64, zero_fraction: f64) -> Result<Hmm> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut row = |len: usize, allow_zero: bool| -> Vec<f64> {
        let mut v: Vec<f64> = (0..len)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        if allow_zero && zero_fraction > 0.0 {
            for x in v.iter_mut() {
                if rng.random::<f64>() < zero_fraction {
                    *x = 0.0;
                }
            }
            if v.iter().all(|&x| x == 0.0) {
                let keep = rng.random_range(0..len);
                v[keep] = 1.0;
            }
        }
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
        v
    };
    let initial = row(m, false);
    let mut transitions = Vec::with_capacity(m * m);
    for _ in 0..m {
        transitions.extend(row(m, true));
    }
    let mut emissions = Vec::with_capacity(m * alphabet);
    for _ in 0..m {
        emissions.extend(row(alphabet, true));
    }
    Hmm::new(m, alphabet, &initial, &transitions, &emissions)
}
