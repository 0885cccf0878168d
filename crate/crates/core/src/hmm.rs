//! Model representation, validation, and the exhaustive decoding oracle.

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::{State, Symbol};

/// Tolerance for stochastic row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// A decoded (or generating) state sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatePath(pub Vec<State>);

impl StatePath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[State] {
        &self.0
    }
}

impl std::ops::Deref for StatePath {
    type Target = [State];
    fn deref(&self) -> &[State] {
        &self.0
    }
}

impl From<Vec<State>> for StatePath {
    fn from(states: Vec<State>) -> Self {
        StatePath(states)
    }
}

/// A validated hidden Markov model, stored in natural-log space.
///
/// Rows of the transition matrix are source states; `trans(k, j)` is the
/// log-probability of moving from state `k` to state `j`. Zero probabilities
/// become negative infinity. Construction validates that the initial vector
/// and every row of both matrices sum to one within [`ROW_SUM_TOL`].
#[derive(Clone, Debug)]
pub struct Hmm {
    m: usize,
    alphabet_size: usize,
    initial: Vec<LogProb>,
    transitions: Vec<LogProb>,
    emissions: Vec<LogProb>,
}

fn check_probs(what: &'static str, row: &[f64]) -> Result<()> {
    for &p in row {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbRange { what, value: p });
        }
    }
    Ok(())
}

fn check_row_sum(what: &'static str, index: usize, row: &[f64]) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::RowSum {
            what,
            index,
            sum,
            tol: ROW_SUM_TOL,
        });
    }
    Ok(())
}

impl Hmm {
    /// Builds a model from linear-space probabilities.
    ///
    /// `transitions` is row-major `m x m`, `emissions` row-major
    /// `m x alphabet_size`.
    pub fn new(
        m: usize,
        alphabet_size: usize,
        initial: &[f64],
        transitions: &[f64],
        emissions: &[f64],
    ) -> Result<Hmm> {
        if m == 0 {
            return Err(Error::InvalidModel("state count must be >= 1".into()));
        }
        if m > State::MAX as usize + 1 {
            return Err(Error::InvalidModel(format!(
                "state count {m} exceeds supported maximum {}",
                State::MAX as usize + 1
            )));
        }
        if alphabet_size == 0 {
            return Err(Error::InvalidModel("alphabet must be >= 1".into()));
        }
        if alphabet_size > Symbol::MAX as usize + 1 {
            return Err(Error::InvalidModel(format!(
                "alphabet size {alphabet_size} exceeds supported maximum {}",
                Symbol::MAX as usize + 1
            )));
        }
        if initial.len() != m {
            return Err(Error::InvalidModel(format!(
                "initial has {} entries, expected {m}",
                initial.len()
            )));
        }
        if transitions.len() != m * m {
            return Err(Error::InvalidModel(format!(
                "transition matrix has {} entries, expected {}",
                transitions.len(),
                m * m
            )));
        }
        if emissions.len() != m * alphabet_size {
            return Err(Error::InvalidModel(format!(
                "emission matrix has {} entries, expected {}",
                emissions.len(),
                m * alphabet_size
            )));
        }

        check_probs("initial", initial)?;
        check_row_sum("initial vector", 0, initial)?;
        for k in 0..m {
            let row = &transitions[k * m..(k + 1) * m];
            check_probs("transitions", row)?;
            check_row_sum("transition row", k, row)?;
        }
        for j in 0..m {
            let row = &emissions[j * alphabet_size..(j + 1) * alphabet_size];
            check_probs("emissions", row)?;
            check_row_sum("emission row", j, row)?;
        }

        Ok(Hmm {
            m,
            alphabet_size,
            initial: initial.iter().map(|&p| LogProb::from_prob(p)).collect(),
            transitions: transitions.iter().map(|&p| LogProb::from_prob(p)).collect(),
            emissions: emissions.iter().map(|&p| LogProb::from_prob(p)).collect(),
        })
    }

    /// The symmetric two-state binary model with transition parameter `t`
    /// and emission parameter `e`, both in `(0, 1/2)`.
    ///
    /// State 0 emits symbol 0 with probability `1 - e`, state 1 mirrors it;
    /// cross transitions have probability `t`. The initial distribution is
    /// uniform.
    pub fn symmetric_two_state(t: f64, e: f64) -> Result<Hmm> {
        if !(t > 0.0 && t < 0.5) {
            return Err(Error::Domain(format!(
                "transition parameter t = {t} outside (0, 1/2)"
            )));
        }
        if !(e > 0.0 && e < 0.5) {
            return Err(Error::Domain(format!(
                "emission parameter e = {e} outside (0, 1/2)"
            )));
        }
        Hmm::new(
            2,
            2,
            &[0.5, 0.5],
            &[1.0 - t, t, t, 1.0 - t],
            &[1.0 - e, e, e, 1.0 - e],
        )
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    #[inline]
    pub fn initial(&self, j: usize) -> LogProb {
        self.initial[j]
    }

    /// Log transition probability from `k` to `j`.
    #[inline]
    pub fn trans(&self, k: usize, j: usize) -> LogProb {
        self.transitions[k * self.m + j]
    }

    /// Log emission probability of `symbol` in state `j`.
    #[inline]
    pub fn emit(&self, j: usize, symbol: Symbol) -> LogProb {
        self.emissions[j * self.alphabet_size + symbol as usize]
    }

    pub(crate) fn check_symbol(&self, symbol: Symbol, position: u64) -> Result<()> {
        if (symbol as usize) < self.alphabet_size {
            Ok(())
        } else {
            Err(Error::SymbolRange {
                symbol: symbol as usize,
                position,
            })
        }
    }

    /// Joint log-probability of generating `seq` along `path`.
    ///
    /// Accumulates `ln pi(s1) + ln e(s1, x1) + sum(ln t + ln e)` strictly left
    /// to right, the same association order the decoders use, so reported
    /// decoder scores match this exactly on the decoded path.
    pub fn joint_log_prob(&self, seq: &[Symbol], path: &[State]) -> Result<LogProb> {
        if seq.len() != path.len() {
            return Err(Error::LengthMismatch {
                seq: seq.len(),
                path: path.len(),
            });
        }
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        for (i, &s) in path.iter().enumerate() {
            if s as usize >= self.m {
                return Err(Error::StateRange {
                    state: s as usize,
                    m: self.m,
                });
            }
            self.check_symbol(seq[i], i as u64 + 1)?;
        }

        let mut acc = self.initial(path[0] as usize).value();
        acc += self.emit(path[0] as usize, seq[0]).value();
        for i in 1..seq.len() {
            acc += self.trans(path[i - 1] as usize, path[i] as usize).value();
            acc += self.emit(path[i] as usize, seq[i]).value();
        }
        Ok(LogProb(acc))
    }

    /// Exhaustive decoding oracle: enumerates every state path and returns
    /// the best one.
    ///
    /// Paths are enumerated in ascending order when read from the last
    /// position backwards, and only strictly better scores replace the
    /// incumbent. This makes the winner the same path the back-pointer
    /// decoders select under their smallest-index argmax rule, which breaks
    /// ties from the right. Instances are capped at `m <= 6`, `n <= 12`, and
    /// `m^n <= 2^24`.
    pub fn brute_force_decode(&self, seq: &[Symbol]) -> Result<(StatePath, LogProb)> {
        let m = self.m;
        let n = seq.len();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        let total = (m as f64).powi(n as i32);
        if m > 6 || n > 12 || total > (1u64 << 24) as f64 {
            return Err(Error::BruteForceTooLarge { m, n });
        }
        for (i, &x) in seq.iter().enumerate() {
            self.check_symbol(x, i as u64 + 1)?;
        }

        let total = total as u64;
        let mut path = vec![0 as State; n];
        let mut best_path: Option<Vec<State>> = None;
        let mut best = f64::NEG_INFINITY;
        for mut code in 0..total {
            // Digit 0 (fastest-varying) is position 1, so ascending codes
            // enumerate paths ordered from the final state down.
            for slot in path.iter_mut() {
                *slot = (code % m as u64) as State;
                code /= m as u64;
            }
            let lp = self.joint_log_prob(seq, &path)?.value();
            if lp > best {
                best = lp;
                best_path = Some(path.clone());
            }
        }
        match best_path {
            Some(p) if best > f64::NEG_INFINITY => Ok((StatePath(p), LogProb(best))),
            _ => Err(Error::ImpossibleSequence { position: n as u64 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state() -> Hmm {
        Hmm::new(1, 1, &[1.0], &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn one_state_identity_model_is_all_log_zero() {
        let h = one_state();
        assert_eq!(h.initial(0).value(), 0.0);
        assert_eq!(h.trans(0, 0).value(), 0.0);
        assert_eq!(h.emit(0, 0).value(), 0.0);
    }

    #[test]
    fn bad_row_sum_rejected() {
        let err = Hmm::new(1, 2, &[1.0], &[1.0], &[0.5, 0.4]).unwrap_err();
        assert!(matches!(err, Error::RowSum { .. }), "{err}");
    }

    #[test]
    fn entry_out_of_range_rejected() {
        let err = Hmm::new(1, 2, &[1.0], &[1.0], &[1.5, -0.5]).unwrap_err();
        assert!(matches!(err, Error::ProbRange { .. }), "{err}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(Hmm::new(2, 2, &[1.0], &[0.25; 4], &[0.25; 4]).is_err());
        assert!(Hmm::new(2, 2, &[0.5, 0.5], &[0.25; 3], &[0.25; 4]).is_err());
        assert!(Hmm::new(2, 2, &[0.5, 0.5], &[0.25; 4], &[0.25; 3]).is_err());
        assert!(Hmm::new(0, 1, &[], &[], &[]).is_err());
    }

    #[test]
    fn symmetric_two_state_structure() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        assert_eq!(h.num_states(), 2);
        assert_eq!(h.alphabet_size(), 2);
        assert!((h.trans(0, 0).prob() - 0.9).abs() < 1e-12);
        assert!((h.trans(0, 1).prob() - 0.1).abs() < 1e-12);
        assert!((h.trans(1, 0).prob() - 0.1).abs() < 1e-12);
        assert!((h.emit(0, 0).prob() - 0.8).abs() < 1e-12);
        assert!((h.emit(1, 0).prob() - 0.2).abs() < 1e-12);
        assert!((h.initial(0).prob() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_state_domain() {
        assert!(Hmm::symmetric_two_state(0.5, 0.2).is_err());
        assert!(Hmm::symmetric_two_state(0.0, 0.2).is_err());
        assert!(Hmm::symmetric_two_state(0.1, 0.5).is_err());
    }

    #[test]
    fn log_round_trip_recovers_probabilities() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        for (k, j, expect) in [(0, 0, 0.9), (0, 1, 0.1), (1, 1, 0.9)] {
            let rel = (h.trans(k, j).prob() - expect).abs() / expect;
            assert!(rel < 1e-12);
        }
    }

    #[test]
    fn joint_log_prob_identity_model() {
        let h = one_state();
        assert_eq!(h.joint_log_prob(&[0, 0, 0], &[0, 0, 0]).unwrap().value(), 0.0);
    }

    #[test]
    fn joint_log_prob_zero_transition_is_neg_inf() {
        // Transition 0 -> 1 has probability zero.
        let h = Hmm::new(
            2,
            2,
            &[0.5, 0.5],
            &[1.0, 0.0, 0.5, 0.5],
            &[0.5, 0.5, 0.5, 0.5],
        )
        .unwrap();
        let lp = h.joint_log_prob(&[0, 1], &[0, 1]).unwrap();
        assert!(lp.is_zero_prob());
    }

    #[test]
    fn joint_log_prob_hand_expansion() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        let lp = h.joint_log_prob(&[0, 0], &[0, 0]).unwrap().value();
        let expect = 0.5f64.ln() + 0.8f64.ln() + 0.9f64.ln() + 0.8f64.ln();
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn joint_log_prob_input_validation() {
        let h = one_state();
        assert!(matches!(
            h.joint_log_prob(&[0, 0], &[0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            h.joint_log_prob(&[0], &[1]),
            Err(Error::StateRange { .. })
        ));
        assert!(matches!(
            h.joint_log_prob(&[1], &[0]),
            Err(Error::SymbolRange { .. })
        ));
    }

    #[test]
    fn brute_force_single_state() {
        let h = one_state();
        let (path, lp) = h.brute_force_decode(&[0, 0, 0]).unwrap();
        assert_eq!(path.as_slice(), &[0, 0, 0]);
        assert_eq!(lp.value(), 0.0);
    }

    #[test]
    fn brute_force_symmetric_favors_matching_state() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        let (path, lp) = h.brute_force_decode(&[0, 0, 0]).unwrap();
        assert_eq!(path.as_slice(), &[0, 0, 0]);
        let direct = h.joint_log_prob(&[0, 0, 0], &[0, 0, 0]).unwrap();
        assert_eq!(lp.value(), direct.value());
    }

    #[test]
    fn brute_force_size_guard() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        let seq = vec![0u8; 13];
        assert!(matches!(
            h.brute_force_decode(&seq),
            Err(Error::BruteForceTooLarge { .. })
        ));
    }

    #[test]
    fn brute_force_impossible_sequence() {
        // Symbol 1 cannot be emitted anywhere.
        let h = Hmm::new(1, 2, &[1.0], &[1.0], &[1.0, 0.0]).unwrap();
        assert!(matches!(
            h.brute_force_decode(&[0, 1]),
            Err(Error::ImpossibleSequence { .. })
        ));
    }
}
