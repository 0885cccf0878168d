//! Shared dynamic-programming kernel and the full-table Viterbi decoder.

use crate::error::{Error, Result};
use crate::hmm::{Hmm, StatePath};
use crate::logprob::LogProb;
use crate::metrics::MemoryTrace;
use crate::{State, Symbol};

/// One column of the Viterbi trellis.
///
/// `scores[j]` is the log-probability of the best path for the prefix ending
/// in state `j`; `backptrs[j]` is the smallest predecessor state attaining
/// it. `backptrs` is empty at position 1, where the recurrence has no
/// predecessor.
#[derive(Clone, Debug)]
pub struct TrellisColumn {
    /// 1-based sequence position.
    pub position: u64,
    pub scores: Vec<LogProb>,
    pub backptrs: Vec<State>,
}

impl TrellisColumn {
    /// Smallest state index attaining the maximum score.
    ///
    /// Errors when every state is unreachable, which means the sequence is
    /// impossible under the model.
    pub fn best_state(&self) -> Result<State> {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (j, s) in self.scores.iter().enumerate() {
            if s.value() > best {
                best = s.value();
                arg = j;
            }
        }
        if best == f64::NEG_INFINITY {
            Err(Error::ImpossibleSequence {
                position: self.position,
            })
        } else {
            Ok(arg as State)
        }
    }
}

/// Scores for position 1: `ln pi(j) + ln e(j, symbol)`.
pub fn initial_column(hmm: &Hmm, symbol: Symbol) -> Result<TrellisColumn> {
    hmm.check_symbol(symbol, 1)?;
    let m = hmm.num_states();
    let mut scores = Vec::with_capacity(m);
    let mut any_finite = false;
    for j in 0..m {
        let s = hmm.initial(j) + hmm.emit(j, symbol);
        any_finite |= !s.is_zero_prob();
        scores.push(s);
    }
    if !any_finite {
        return Err(Error::ImpossibleSequence { position: 1 });
    }
    Ok(TrellisColumn {
        position: 1,
        scores,
        backptrs: Vec::new(),
    })
}

/// One step of the Viterbi recurrence:
/// `scores[j] = max_k(prev[k] + ln t(k, j)) + ln e(j, symbol)`, with the
/// smallest maximizing `k` recorded as the back pointer.
pub fn forward_step(hmm: &Hmm, prev: &TrellisColumn, symbol: Symbol) -> Result<TrellisColumn> {
    let position = prev.position + 1;
    hmm.check_symbol(symbol, position)?;
    let m = hmm.num_states();
    let mut scores = Vec::with_capacity(m);
    let mut backptrs = Vec::with_capacity(m);
    let mut any_finite = false;
    for j in 0..m {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for k in 0..m {
            let cand = prev.scores[k].value() + hmm.trans(k, j).value();
            if cand > best {
                best = cand;
                arg = k;
            }
        }
        let s = best + hmm.emit(j, symbol).value();
        any_finite |= s > f64::NEG_INFINITY;
        scores.push(LogProb(s));
        backptrs.push(arg as State);
    }
    if !any_finite {
        return Err(Error::ImpossibleSequence { position });
    }
    Ok(TrellisColumn {
        position,
        scores,
        backptrs,
    })
}

/// Result of a whole-sequence decode.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub path: StatePath,
    pub log_prob: LogProb,
    pub trace: MemoryTrace,
}

/// Classical Viterbi with the full back-pointer table.
///
/// The memory trace records `i` retained columns at position `i`.
pub fn viterbi_full(hmm: &Hmm, seq: &[Symbol]) -> Result<Decoded> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let n = seq.len();
    let mut trace = MemoryTrace::auto(n as u64);
    let mut columns = Vec::with_capacity(n);
    columns.push(initial_column(hmm, seq[0])?);
    trace.record(1);
    for (i, &x) in seq.iter().enumerate().skip(1) {
        let next = forward_step(hmm, &columns[i - 1], x)?;
        columns.push(next);
        trace.record(i as u64 + 1);
    }

    let last = columns.last().expect("nonempty");
    let mut state = last.best_state()?;
    let log_prob = last.scores[state as usize];
    let mut path = vec![0 as State; n];
    path[n - 1] = state;
    for i in (1..n).rev() {
        state = columns[i].backptrs[state as usize];
        path[i - 1] = state;
    }
    Ok(Decoded {
        path: StatePath(path),
        log_prob,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym() -> Hmm {
        Hmm::symmetric_two_state(0.1, 0.2).unwrap()
    }

    #[test]
    fn initial_column_one_state() {
        let h = Hmm::new(1, 1, &[1.0], &[1.0], &[1.0]).unwrap();
        let c = initial_column(&h, 0).unwrap();
        assert_eq!(c.position, 1);
        assert_eq!(c.scores[0].value(), 0.0);
        assert!(c.backptrs.is_empty());
    }

    #[test]
    fn initial_column_symmetric_values() {
        let c = initial_column(&sym(), 0).unwrap();
        assert!((c.scores[0].value() - 0.4f64.ln()).abs() < 1e-12);
        assert!((c.scores[1].value() - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn initial_column_impossible_symbol() {
        let h = Hmm::new(1, 2, &[1.0], &[1.0], &[1.0, 0.0]).unwrap();
        assert!(matches!(
            initial_column(&h, 1),
            Err(Error::ImpossibleSequence { position: 1 })
        ));
    }

    #[test]
    fn forward_step_one_state_stays_zero() {
        let h = Hmm::new(1, 1, &[1.0], &[1.0], &[1.0]).unwrap();
        let c0 = initial_column(&h, 0).unwrap();
        let c1 = forward_step(&h, &c0, 0).unwrap();
        assert_eq!(c1.position, 2);
        assert_eq!(c1.scores[0].value(), 0.0);
        assert_eq!(c1.backptrs, vec![0]);
    }

    #[test]
    fn forward_step_hand_evaluated_products() {
        // prev = [ln 0.4, ln 0.1]; both states prefer predecessor 0 because
        // 0.4 * 0.9 > 0.1 * 0.1 and 0.4 * 0.1 > 0.1 * 0.9.
        let h = sym();
        let c0 = initial_column(&h, 0).unwrap();
        let c1 = forward_step(&h, &c0, 0).unwrap();
        assert_eq!(c1.backptrs, vec![0, 0]);
        assert!((c1.scores[0].value() - (0.4f64 * 0.9 * 0.8).ln()).abs() < 1e-12);
        assert!((c1.scores[1].value() - (0.4f64 * 0.1 * 0.2).ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_step_single_reachable_predecessor() {
        // Position 1 leaves only state 0 reachable; every back pointer must
        // name it.
        let h = Hmm::new(
            2,
            2,
            &[1.0, 0.0],
            &[0.5, 0.5, 0.5, 0.5],
            &[0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let c0 = initial_column(&h, 0).unwrap();
        let c1 = forward_step(&h, &c0, 1).unwrap();
        assert_eq!(c1.backptrs, vec![0, 0]);
    }

    #[test]
    fn viterbi_full_n1_is_initial_argmax() {
        let d = viterbi_full(&sym(), &[1]).unwrap();
        assert_eq!(d.path.as_slice(), &[1]);
        assert_eq!(d.trace.peak(), 1);
    }

    #[test]
    fn viterbi_full_matches_brute_force_symmetric() {
        let h = sym();
        let d = viterbi_full(&h, &[0, 0, 0]).unwrap();
        let (bp, blp) = h.brute_force_decode(&[0, 0, 0]).unwrap();
        assert_eq!(d.path, bp);
        assert_eq!(d.path.as_slice(), &[0, 0, 0]);
        assert!((d.log_prob.value() - blp.value()).abs() < 1e-9);
    }

    #[test]
    fn viterbi_full_rejects_empty() {
        assert!(matches!(
            viterbi_full(&sym(), &[]),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn full_table_trace_grows_linearly() {
        let seq = vec![0u8; 50];
        let d = viterbi_full(&sym(), &seq).unwrap();
        assert_eq!(d.trace.peak(), 50);
        assert_eq!(d.trace.count(), 50);
    }

    #[test]
    fn score_consistency_with_joint_log_prob() {
        let h = sym();
        let seq = [0u8, 1, 1, 0, 0, 1, 0];
        let d = viterbi_full(&h, &seq).unwrap();
        let lp = h.joint_log_prob(&seq, &d.path).unwrap();
        assert!((lp.value() - d.log_prob.value()).abs() < 1e-9);
    }
}
