//! Two-level checkpointing Viterbi: square-root memory for a second forward
//! pass.

use crate::error::{Error, Result};
use crate::hmm::{Hmm, StatePath};
use crate::logprob::LogProb;
use crate::metrics::MemoryTrace;
use crate::trellis::{forward_step, initial_column, TrellisColumn};
use crate::{State, Symbol};

/// Partition of positions `[1, n]` into blocks of at most `block_len`
/// symbols; `checkpoints` lists the first position of each block.
#[derive(Clone, Debug)]
pub struct CheckpointPlan {
    pub n: u64,
    pub block_len: usize,
    pub checkpoints: Vec<u64>,
}

impl CheckpointPlan {
    /// Builds a plan, defaulting `block_len` to `ceil(sqrt(n))`.
    pub fn new(n: usize, block_len: Option<usize>) -> Result<CheckpointPlan> {
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        let block_len = match block_len {
            Some(0) => return Err(Error::Domain("block length must be >= 1".into())),
            Some(l) => l,
            None => (n as f64).sqrt().ceil() as usize,
        };
        let checkpoints = (0..n.div_ceil(block_len))
            .map(|b| (b * block_len + 1) as u64)
            .collect();
        Ok(CheckpointPlan {
            n: n as u64,
            block_len,
            checkpoints,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.checkpoints.len()
    }

    /// Inclusive position range of block `b`.
    fn bounds(&self, b: usize) -> (u64, u64) {
        let start = self.checkpoints[b];
        let end = if b + 1 < self.checkpoints.len() {
            self.checkpoints[b + 1] - 1
        } else {
            self.n
        };
        (start, end)
    }
}

/// Decode result carrying the instrumentation the checkpoint contracts are
/// stated in: total forward column computations and the retained-column
/// trace.
#[derive(Clone, Debug)]
pub struct CheckpointDecoded {
    pub path: StatePath,
    pub log_prob: LogProb,
    pub trace: MemoryTrace,
    /// Trellis columns computed in total (initial columns included);
    /// at most `2n` for any block length.
    pub forward_steps: u64,
    pub plan: CheckpointPlan,
}

/// Checkpointing Viterbi.
///
/// The forward pass stores only each block's first score column, plus the
/// back pointers of the block currently being filled; when the pass ends the
/// final block's back pointers are therefore already present and only the
/// earlier blocks are recomputed, right to left. Output is bit-identical to
/// [`crate::trellis::viterbi_full`].
pub fn viterbi_checkpoint(
    hmm: &Hmm,
    seq: &[Symbol],
    block_len: Option<usize>,
) -> Result<CheckpointDecoded> {
    let n = seq.len();
    let plan = CheckpointPlan::new(n, block_len)?;
    let num_blocks = plan.num_blocks();
    let block_of = |pos: u64| ((pos - 1) / plan.block_len as u64) as usize;

    let mut trace = MemoryTrace::auto(n as u64);
    let mut forward_steps: u64 = 0;

    // Forward pass.
    let mut checkpoint_scores: Vec<Vec<LogProb>> = Vec::with_capacity(num_blocks);
    let mut col = initial_column(hmm, seq[0])?;
    forward_steps += 1;
    checkpoint_scores.push(col.scores.clone());
    // Back-pointer columns of the current block, indexed by offset from the
    // block's first position. Position 1 contributes an empty placeholder.
    let mut block_bps: Vec<Vec<State>> = vec![Vec::new()];
    let mut bp_cols: u64 = 0;
    trace.record(checkpoint_scores.len() as u64 + bp_cols + 1);
    for pos in 2..=n as u64 {
        col = forward_step(hmm, &col, seq[pos as usize - 1])?;
        forward_steps += 1;
        if block_of(pos) != block_of(pos - 1) {
            checkpoint_scores.push(col.scores.clone());
            block_bps.clear();
            bp_cols = 0;
        }
        block_bps.push(col.backptrs.clone());
        bp_cols += 1;
        trace.record(checkpoint_scores.len() as u64 + bp_cols + 1);
    }

    // Backward phase: thread the known entry state through the blocks from
    // the last to the first, recomputing back pointers where they were not
    // retained.
    let mut path = vec![0 as State; n];
    let mut state = col.best_state()?;
    let log_prob = col.scores[state as usize];
    path[n - 1] = state;
    let mut known_pos = n as u64;

    for b in (0..num_blocks).rev() {
        let (start, end) = plan.bounds(b);
        let (bps, bps_base) = if b == num_blocks - 1 {
            // Retained from the forward pass; offset 0 is position `start`.
            (std::mem::take(&mut block_bps), start)
        } else {
            // Recompute positions start+1 ..= end+1: the block's own back
            // pointers plus the column entering the next block, which links
            // this block's last state to the already-recovered suffix.
            let mut rcol = TrellisColumn {
                position: start,
                scores: checkpoint_scores[b].clone(),
                backptrs: Vec::new(),
            };
            let mut bps = Vec::with_capacity((end - start) as usize + 1);
            for pos in start + 1..=end + 1 {
                rcol = forward_step(hmm, &rcol, seq[pos as usize - 1])?;
                forward_steps += 1;
                bps.push(rcol.backptrs);
                rcol.backptrs = Vec::new();
                trace.record(num_blocks as u64 + bps.len() as u64 + 1);
            }
            (bps, start + 1)
        };
        for pos in (start + 1..=known_pos).rev() {
            let bp = &bps[(pos - bps_base) as usize];
            state = bp[state as usize];
            path[pos as usize - 2] = state;
        }
        known_pos = start;
    }

    Ok(CheckpointDecoded {
        path: StatePath(path),
        log_prob,
        trace,
        forward_steps,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::viterbi_full;

    fn sym() -> Hmm {
        Hmm::symmetric_two_state(0.1, 0.2).unwrap()
    }

    #[test]
    fn plan_partitions_positions() {
        let p = CheckpointPlan::new(10, Some(3)).unwrap();
        assert_eq!(p.checkpoints, vec![1, 4, 7, 10]);
        assert_eq!(p.bounds(0), (1, 3));
        assert_eq!(p.bounds(3), (10, 10));
        assert!(CheckpointPlan::new(10, Some(0)).is_err());
        assert!(CheckpointPlan::new(0, None).is_err());
    }

    #[test]
    fn default_block_len_is_ceil_sqrt() {
        assert_eq!(CheckpointPlan::new(10_000, None).unwrap().block_len, 100);
        assert_eq!(CheckpointPlan::new(10_001, None).unwrap().block_len, 101);
    }

    #[test]
    fn single_position_matches_full() {
        let h = sym();
        for bl in [None, Some(1), Some(7)] {
            let c = viterbi_checkpoint(&h, &[1], bl).unwrap();
            let f = viterbi_full(&h, &[1]).unwrap();
            assert_eq!(c.path, f.path);
            assert_eq!(c.log_prob.value(), f.log_prob.value());
            assert_eq!(c.forward_steps, 1);
        }
    }

    #[test]
    fn matches_full_for_all_block_lengths() {
        let h = sym();
        let seq: Vec<u8> = (0..37).map(|i| ((i * 7 + 3) % 5 > 2) as u8).collect();
        let f = viterbi_full(&h, &seq).unwrap();
        for bl in [1, 2, 3, 5, 36, 37, 100] {
            let c = viterbi_checkpoint(&h, &seq, Some(bl)).unwrap();
            assert_eq!(c.path, f.path, "block_len {bl}");
            assert_eq!(c.log_prob.value(), f.log_prob.value());
        }
    }

    #[test]
    fn forward_step_counts() {
        let h = sym();
        let seq = vec![0u8; 100];
        // 100 forward columns plus 10 recomputed per non-final block.
        let c = viterbi_checkpoint(&h, &seq, Some(10)).unwrap();
        assert_eq!(c.forward_steps, 190);
        assert!(c.forward_steps <= 200);
        // A single block degenerates to the full decoder.
        let c = viterbi_checkpoint(&h, &seq, Some(100)).unwrap();
        assert_eq!(c.forward_steps, 100);
        // Unit blocks pay the full two-fold price.
        let c = viterbi_checkpoint(&h, &seq, Some(1)).unwrap();
        assert_eq!(c.forward_steps, 199);
        assert!(c.forward_steps <= 200);
    }

    #[test]
    fn peak_retained_columns_bounded() {
        let h = sym();
        let seq: Vec<u8> = (0..10_000).map(|i| (i % 3 == 0) as u8).collect();
        let c = viterbi_checkpoint(&h, &seq, None).unwrap();
        assert_eq!(c.plan.block_len, 100);
        assert!(
            c.trace.peak() <= 201,
            "peak {} exceeds 2*ceil(sqrt(n))+1",
            c.trace.peak()
        );
        for bl in [1usize, 17, 100, 5000] {
            let c = viterbi_checkpoint(&h, &seq, Some(bl)).unwrap();
            let bound = 10_000u64.div_ceil(bl as u64) + bl as u64 + 1;
            assert!(c.trace.peak() <= bound, "L={bl}: {} > {bound}", c.trace.peak());
        }
    }

    #[test]
    fn impossible_sequence_propagates() {
        let h = Hmm::new(1, 2, &[1.0], &[1.0], &[1.0, 0.0]).unwrap();
        let err = viterbi_checkpoint(&h, &[0, 0, 1, 0], Some(2)).unwrap_err();
        assert!(matches!(err, Error::ImpossibleSequence { position: 3 }));
    }
}
