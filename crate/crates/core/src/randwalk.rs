//! Random-walk analysis of coalescence behaviour in symmetric two-state
//! models.
//!
//! For a symmetric two-state model the score difference between the states
//! moves like a unit random walk on the interval `(0, K)`; runs between
//! coalescence points are walk excursions between the absorbing barriers.
//! This module carries the analytic side — the barrier parameter `K`, the
//! expected run length `K - 1`, the geometric run-length bounds, and the
//! logarithmic expected-maximum law — plus a Monte-Carlo simulator used to
//! validate all of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::hmm::Hmm;

/// Barrier parameter of the walk:
/// `ceil(2 (ln(1-t) - ln t) / (ln(1-e) - ln e))`.
///
/// Ratios that land within 1e-9 of an integer are snapped before the
/// ceiling, so parameter pairs chosen to make the ratio exactly integral
/// (such as t = 1/17, e = 0.2) are not bumped up by float noise.
pub fn k_parameter(t: f64, e: f64) -> Result<u32> {
    if !(t > 0.0 && t < 0.5) || !(e > 0.0 && e < 0.5) {
        return Err(Error::Domain(format!(
            "k_parameter requires t, e in (0, 1/2); got t = {t}, e = {e}"
        )));
    }
    let ratio = 2.0 * ((1.0 - t).ln() - t.ln()) / ((1.0 - e).ln() - e.ln());
    let k = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round()
    } else {
        ratio.ceil()
    };
    Ok(k as u32)
}

fn check_k(k: u32) -> Result<()> {
    if k < 2 {
        Err(Error::Domain(format!("K = {k} must be >= 2")))
    } else {
        Ok(())
    }
}

/// Expected run length between coalescence points: `K - 1`.
pub fn expected_run_length(k: u32) -> Result<f64> {
    check_k(k)?;
    Ok(k as f64 - 1.0)
}

/// Analytic bounds on `Pr(R_l)`, the probability that a run has length
/// `2l + 1` or `2l + 2`.
///
/// Both bounds decay as `cos^(2l)(pi/K)`. For odd `K` the prefactors are
/// `(4/K) sin^2(pi/K)` and 1; for even `K` they are
/// `(2/K) sin^2(pi/K) (1 + cos(pi/K))` and 2. The upper bound is clamped
/// to 1.
pub fn run_length_prob_bounds(k: u32, l: u32) -> Result<(f64, f64)> {
    check_k(k)?;
    let angle = std::f64::consts::PI / k as f64;
    let decay = angle.cos().powi(2 * l as i32);
    let (lower, upper) = if k % 2 == 1 {
        ((4.0 / k as f64) * angle.sin().powi(2) * decay, decay)
    } else {
        (
            (2.0 / k as f64) * angle.sin().powi(2) * (1.0 + angle.cos()) * decay,
            2.0 * decay,
        )
    };
    Ok((lower, upper.min(1.0)))
}

/// Predicted expected maximum retained-window length for decoding `n`
/// symbols.
#[derive(Clone, Copy, Debug)]
pub struct MemoryPrediction {
    pub k: u32,
    pub n: u64,
    /// `1 / ln(1 / cos(pi/K))`, the exact leading coefficient of `ln n`.
    pub exact_constant: f64,
    /// `2 K^2 / pi^2`, the large-K approximation of the same coefficient.
    pub approx_constant: f64,
    /// `exact_constant * ln n`.
    pub predicted_expected_max: f64,
}

pub fn expected_max_memory(k: u32, n: u64) -> Result<MemoryPrediction> {
    check_k(k)?;
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} must be >= 2")));
    }
    let cos = (std::f64::consts::PI / k as f64).cos();
    let exact = 1.0 / (1.0 / cos).ln();
    let approx = 2.0 * (k as f64).powi(2) / std::f64::consts::PI.powi(2);
    Ok(MemoryPrediction {
        k,
        n,
        exact_constant: exact,
        approx_constant: approx,
        predicted_expected_max: exact * (n as f64).ln(),
    })
}

/// Leading-order expected maximum of geometric-tailed runs totalling `n`:
/// `log_{1/a}(n)` for tail decay base `a`.
pub fn expected_max_of_runs(a: f64, n: u64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("decay base a = {a} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} must be >= 2")));
    }
    Ok((n as f64).ln() / (1.0 / a).ln())
}

/// Observed run lengths from a walk simulation.
#[derive(Clone, Debug)]
pub struct RunLengthDist {
    pub k: u32,
    /// `histogram[len]` counts runs of exactly `len` steps; index 0 unused.
    histogram: Vec<u64>,
    pub total_runs: u64,
}

impl RunLengthDist {
    pub fn count(&self, len: usize) -> u64 {
        self.histogram.get(len).copied().unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.histogram.len().saturating_sub(1)
    }

    pub fn mean(&self) -> Result<f64> {
        if self.total_runs == 0 {
            return Err(Error::Domain("no completed runs observed".into()));
        }
        let sum: u64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(len, &c)| len as u64 * c)
            .sum();
        Ok(sum as f64 / self.total_runs as f64)
    }

    /// Observations in bucket `l`, i.e. runs of length `2l + 1` or `2l + 2`.
    pub fn bucket_count(&self, l: u32) -> u64 {
        self.count(2 * l as usize + 1) + self.count(2 * l as usize + 2)
    }

    /// Empirical `Pr(R_l)`.
    pub fn bucket_prob(&self, l: u32) -> f64 {
        self.bucket_count(l) as f64 / self.total_runs as f64
    }

    pub fn num_buckets(&self) -> u32 {
        (self.max_len() as u32).div_ceil(2)
    }
}

/// Simulates the unit random walk on `(0, K)` with absorbing barriers for
/// `total_steps` uniform steps.
///
/// Each absorption records the run length (steps since the restart) and the
/// walk restarts one step inside the absorbing barrier: at 1 from barrier 0,
/// at K-1 from barrier K. A run whose first step hits the barrier again is
/// recorded with length 1. The trailing incomplete run is discarded.
pub fn simulate_runs(k: u32, total_steps: u64, seed: u64) -> Result<RunLengthDist> {
    check_k(k)?;
    if total_steps == 0 {
        return Err(Error::Domain("total_steps must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut dist = RunLengthDist {
        k,
        histogram: Vec::new(),
        total_runs: 0,
    };
    let mut pos: u32 = 1;
    let mut len: u64 = 0;
    for _ in 0..total_steps {
        pos = if rng.random::<bool>() { pos + 1 } else { pos - 1 };
        len += 1;
        if pos == 0 || pos == k {
            let len_idx = len as usize;
            if dist.histogram.len() <= len_idx {
                dist.histogram.resize(len_idx + 1, 0);
            }
            dist.histogram[len_idx] += 1;
            dist.total_runs += 1;
            pos = if pos == 0 { 1 } else { k - 1 };
            len = 0;
        }
    }
    Ok(dist)
}

/// Maximum run length observed in a window of exactly `n` steps, the
/// trailing incomplete run included.
pub fn simulate_window_max(k: u32, n: u64, seed: u64) -> Result<u64> {
    check_k(k)?;
    if n == 0 {
        return Err(Error::Domain("window must be >= 1 step".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut pos: u32 = 1;
    let mut len: u64 = 0;
    let mut max = 0;
    for _ in 0..n {
        pos = if rng.random::<bool>() { pos + 1 } else { pos - 1 };
        len += 1;
        if pos == 0 || pos == k {
            max = max.max(len);
            pos = if pos == 0 { 1 } else { k - 1 };
            len = 0;
        }
    }
    Ok(max.max(len))
}

/// Back-pointer configuration between consecutive positions of a two-state
/// model, classified from the current column scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoStateConfig {
    /// Both back pointers stay parallel; the run continues.
    Parallel,
    /// Both next-position states point to state 0: a coalescence.
    BothToFirst,
    /// Both point to state 1: a coalescence.
    BothToSecond,
    /// Both cross; cannot occur for cross-transition probability below 1/2.
    Crossed,
}

impl TwoStateConfig {
    pub fn is_coalescence(self) -> bool {
        matches!(self, TwoStateConfig::BothToFirst | TwoStateConfig::BothToSecond)
    }
}

/// Classifies the configuration the next forward step will produce, using
/// the same comparisons (and therefore the same smallest-index tie policy)
/// as the decoder kernel.
pub fn classify_two_state(hmm: &Hmm, score0: f64, score1: f64) -> Result<TwoStateConfig> {
    if hmm.num_states() != 2 {
        return Err(Error::Domain("configuration classifier needs m = 2".into()));
    }
    let stay0 = hmm.trans(0, 0).value();
    let cross01 = hmm.trans(0, 1).value();
    let cross10 = hmm.trans(1, 0).value();
    let stay1 = hmm.trans(1, 1).value();
    let next0_from_first = score0 + stay0 >= score1 + cross10;
    let next1_from_first = score0 + cross01 >= score1 + stay1;
    Ok(match (next0_from_first, next1_from_first) {
        (true, true) => TwoStateConfig::BothToFirst,
        (false, false) => TwoStateConfig::BothToSecond,
        (true, false) => TwoStateConfig::Parallel,
        (false, true) => TwoStateConfig::Crossed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_parameter_examples() {
        // Equal parameters give a unit ratio.
        assert_eq!(k_parameter(0.3, 0.3).unwrap(), 2);
        assert_eq!(k_parameter(0.05, 0.05).unwrap(), 2);
        // ln 16 / ln 4 = 2 exactly.
        assert_eq!(k_parameter(1.0 / 17.0, 0.2).unwrap(), 4);
        // 2 ln 9 / ln 4 = 3.1699...
        assert_eq!(k_parameter(0.1, 0.2).unwrap(), 4);
        assert!(k_parameter(0.5, 0.2).is_err());
        assert!(k_parameter(0.1, 0.0).is_err());
    }

    #[test]
    fn expected_run_length_is_k_minus_one() {
        assert_eq!(expected_run_length(2).unwrap(), 1.0);
        assert_eq!(expected_run_length(4).unwrap(), 3.0);
        assert_eq!(expected_run_length(8).unwrap(), 7.0);
        assert!(expected_run_length(1).is_err());
    }

    #[test]
    fn bound_prefactors() {
        // Odd K at l = 0: lower = (4/5) sin^2(pi/5), upper = 1.
        let (lo, hi) = run_length_prob_bounds(5, 0).unwrap();
        let expect = 0.8 * (std::f64::consts::PI / 5.0).sin().powi(2);
        assert!((lo - expect).abs() < 1e-12);
        assert_eq!(hi, 1.0);
        // Even K at l = 1: raw upper 2 cos^2(pi/4) = 1 exactly hits the clamp.
        let (_, hi) = run_length_prob_bounds(4, 1).unwrap();
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_decay_geometrically() {
        let k = 7;
        let ratio = (std::f64::consts::PI / k as f64).cos().powi(2);
        let mut prev = run_length_prob_bounds(k, 3).unwrap();
        for l in 4..20 {
            let cur = run_length_prob_bounds(k, l).unwrap();
            assert!((cur.0 / prev.0 - ratio).abs() < 1e-12);
            assert!(cur.1 <= prev.1);
            prev = cur;
        }
    }

    #[test]
    fn memory_prediction_constants_for_k4() {
        let p = expected_max_memory(4, 1_000_000).unwrap();
        // cos(pi/4) = 1/sqrt(2), so the exact constant is 2/ln 2.
        assert!((p.exact_constant - 2.0 / std::f64::consts::LN_2).abs() < 1e-12);
        assert!((p.exact_constant - 2.8853900817779268).abs() < 1e-10);
        assert!((p.approx_constant - 32.0 / std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((p.approx_constant - 3.2423).abs() < 1e-4);
        assert!((p.predicted_expected_max - p.exact_constant * 1e6f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn approx_constant_converges_from_above() {
        // The Taylor remainder stays bounded: the gap falls inside a fixed
        // band over three decades of K.
        let mut prev_gap = f64::INFINITY;
        for k in [3u32, 10, 50, 100, 1000] {
            let p = expected_max_memory(k, 100).unwrap();
            let gap = p.approx_constant - p.exact_constant;
            assert!(gap > 0.0 && gap < 1.0, "K={k}: gap {gap}");
            assert!(gap <= prev_gap + 1e-9);
            prev_gap = gap;
        }
        // And the ratio tends to one.
        let p = expected_max_memory(1000, 100).unwrap();
        assert!((p.approx_constant / p.exact_constant - 1.0).abs() < 1e-3);
    }

    #[test]
    fn max_of_runs_examples() {
        assert!((expected_max_of_runs(0.5, 1024).unwrap() - 10.0).abs() < 1e-12);
        // Decay base cos^2(pi/4) = 1/2 matches the K = 4 exact constant:
        // runs shrink by cos^2 per bucket of two lengths, so the per-length
        // constant is twice the per-bucket slope.
        let per_bucket = 1.0 / (2.0f64).ln();
        let k4 = expected_max_memory(4, 100).unwrap().exact_constant;
        assert!((2.0 * per_bucket - k4).abs() < 1e-12);
        assert!(expected_max_of_runs(1.0, 10).is_err());
        assert!(expected_max_of_runs(0.999_999, 10).unwrap() > 1e6);
    }

    #[test]
    fn k2_walk_is_point_mass_at_one() {
        let d = simulate_runs(2, 10_000, 123).unwrap();
        assert_eq!(d.total_runs, 10_000);
        assert_eq!(d.count(1), 10_000);
        assert_eq!(d.mean().unwrap(), 1.0);
    }

    #[test]
    fn walk_mean_matches_lemma_for_k4() {
        let d = simulate_runs(4, 1_000_000, 7).unwrap();
        let mean = d.mean().unwrap();
        assert!((mean - 3.0).abs() / 3.0 < 0.05, "mean {mean}");
    }

    #[test]
    fn walk_is_deterministic_per_seed() {
        let a = simulate_runs(5, 50_000, 99).unwrap();
        let b = simulate_runs(5, 50_000, 99).unwrap();
        assert_eq!(a.total_runs, b.total_runs);
        assert_eq!(a.histogram, b.histogram);
    }

    #[test]
    fn window_max_includes_partial_tail() {
        // One step cannot complete a run for K = 3 (the walk starts at 1 and
        // needs to reach 0 or 3), so the partial run of length 1 is the max.
        let m = simulate_window_max(3, 1, 4).unwrap();
        assert_eq!(m, 1);
    }

    #[test]
    fn classifier_matches_hand_cases() {
        let h = Hmm::symmetric_two_state(0.1, 0.2).unwrap();
        // Equal scores sit mid-interval: parallel pointers.
        assert_eq!(
            classify_two_state(&h, -1.0, -1.0).unwrap(),
            TwoStateConfig::Parallel
        );
        // A decisive advantage for either state coalesces.
        assert_eq!(
            classify_two_state(&h, -1.0, -9.0).unwrap(),
            TwoStateConfig::BothToFirst
        );
        assert_eq!(
            classify_two_state(&h, -9.0, -1.0).unwrap(),
            TwoStateConfig::BothToSecond
        );
    }
}
