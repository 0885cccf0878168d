//! Retained-memory instrumentation and the benchmark harness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::hmm::Hmm;
use crate::online::{StreamDecoder, TreeOpCounters};
use crate::seqgen::{GenKind, GenSpec};
use crate::{checkpoint, online, trellis};

/// Per-position retained-window lengths with exact peak and mean.
///
/// "Window length" is the number of retained back-pointer (or score)
/// columns, the direct analogue of the dynamic table the decoders keep.
/// Samples are kept every `stride` records to bound report size; peak and
/// mean are tracked unstrided.
#[derive(Clone, Debug)]
pub struct MemoryTrace {
    stride: u64,
    count: u64,
    peak: u64,
    sum: u64,
    samples: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceSummary {
    pub peak: u64,
    pub mean: f64,
    pub n: u64,
}

impl MemoryTrace {
    pub fn new(stride: u64) -> MemoryTrace {
        MemoryTrace {
            stride: stride.max(1),
            count: 0,
            peak: 0,
            sum: 0,
            samples: Vec::new(),
        }
    }

    /// Default stride for an `n`-position run: `max(1, n / 10^4)`.
    pub fn auto_stride(n: u64) -> u64 {
        (n / 10_000).max(1)
    }

    pub fn auto(n: u64) -> MemoryTrace {
        MemoryTrace::new(Self::auto_stride(n))
    }

    pub fn record(&mut self, window_len: u64) {
        debug_assert!(window_len >= 1);
        if self.count % self.stride == 0 {
            self.samples.push(window_len);
        }
        self.count += 1;
        self.peak = self.peak.max(window_len);
        self.sum += window_len;
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    /// Number of records so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn summary(&self) -> Result<TraceSummary> {
        if self.count == 0 {
            return Err(Error::Domain("empty memory trace".into()));
        }
        Ok(TraceSummary {
            peak: self.peak,
            mean: self.sum as f64 / self.count as f64,
            n: self.count,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Full,
    Checkpoint,
    Online,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [
        DecoderKind::Full,
        DecoderKind::Checkpoint,
        DecoderKind::Online,
    ];
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Full => "full",
            DecoderKind::Checkpoint => "checkpoint",
            DecoderKind::Online => "online",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<DecoderKind> {
        match s {
            "full" => Ok(DecoderKind::Full),
            "checkpoint" => Ok(DecoderKind::Checkpoint),
            "online" => Ok(DecoderKind::Online),
            other => Err(Error::Domain(format!(
                "unknown algorithm '{other}' (expected full|checkpoint|online)"
            ))),
        }
    }
}

/// One decoder run on one input.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub decoder: DecoderKind,
    pub model_id: String,
    pub n: u64,
    pub seed: u64,
    pub wall: Duration,
    /// Trellis columns computed (initial columns included).
    pub forward_steps: u64,
    pub peak_window: u64,
    pub mean_window: f64,
    pub log_prob: f64,
    pub tree_ops: Option<TreeOpCounters>,
}

impl BenchReport {
    pub const CSV_HEADER: &'static str = "decoder,model,n,seed,wall_ms,forward_steps,peak_window,\
                                          mean_window,log_prob,tree_created,tree_deleted,tree_relink_steps";

    /// Deterministic fields first; wall time is the only row content that
    /// varies between identical runs.
    pub fn csv_row(&self) -> String {
        let (c, d, r) = match self.tree_ops {
            Some(ops) => (
                ops.created.to_string(),
                ops.deleted.to_string(),
                ops.relink_steps.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{:.3},{},{},{:.4},{:.9},{},{},{}",
            self.decoder,
            self.model_id,
            self.n,
            self.seed,
            self.wall.as_secs_f64() * 1e3,
            self.forward_steps,
            self.peak_window,
            self.mean_window,
            self.log_prob,
            c,
            d,
            r
        )
    }
}

/// Running peak of the online window at a prefix length, the raw points of
/// the prefix-growth curve.
#[derive(Clone, Copy, Debug)]
pub struct PrefixSample {
    pub seed: u64,
    pub n_prefix: u64,
    pub max_window: u64,
}

#[derive(Clone, Debug)]
pub struct BenchRun {
    pub reports: Vec<BenchReport>,
    pub prefix_curve: Vec<PrefixSample>,
}

/// Runs every requested decoder on `trial = seeds.len()` generated inputs.
///
/// Inputs come from `gen_kind` with the given length; generation happens
/// outside the timed section. For the online decoder the running peak window
/// is snapshotted at every power-of-ten prefix. All decoders in one trial
/// see the same input, and their reported log-probabilities are asserted to
/// agree within 1e-9. `stride` overrides the online trace sampling stride
/// (default `n / 10^4`).
#[allow(clippy::too_many_arguments)]
pub fn run_benchmark(
    hmm: &Hmm,
    model_id: &str,
    gen_kind: &GenKind,
    n: usize,
    decoders: &[DecoderKind],
    seeds: &[u64],
    block_len: Option<usize>,
    stride: Option<u64>,
) -> Result<BenchRun> {
    if seeds.is_empty() {
        return Err(Error::Domain("benchmark needs at least one trial".into()));
    }
    if decoders.is_empty() {
        return Err(Error::Domain("benchmark needs at least one decoder".into()));
    }
    let mut reports = Vec::with_capacity(seeds.len() * decoders.len());
    let mut prefix_curve = Vec::new();
    for &seed in seeds {
        let spec = GenSpec {
            kind: gen_kind.clone(),
            len: n,
            seed,
        };
        let seq = spec.generate()?.seq;
        let mut log_probs: Vec<f64> = Vec::new();
        for &decoder in decoders {
            let report = match decoder {
                DecoderKind::Full => {
                    let t0 = Instant::now();
                    let d = trellis::viterbi_full(hmm, &seq)?;
                    let wall = t0.elapsed();
                    let s = d.trace.summary()?;
                    BenchReport {
                        decoder,
                        model_id: model_id.into(),
                        n: n as u64,
                        seed,
                        wall,
                        forward_steps: n as u64,
                        peak_window: s.peak,
                        mean_window: s.mean,
                        log_prob: d.log_prob.value(),
                        tree_ops: None,
                    }
                }
                DecoderKind::Checkpoint => {
                    let t0 = Instant::now();
                    let d = checkpoint::viterbi_checkpoint(hmm, &seq, block_len)?;
                    let wall = t0.elapsed();
                    let s = d.trace.summary()?;
                    BenchReport {
                        decoder,
                        model_id: model_id.into(),
                        n: n as u64,
                        seed,
                        wall,
                        forward_steps: d.forward_steps,
                        peak_window: s.peak,
                        mean_window: s.mean,
                        log_prob: d.log_prob.value(),
                        tree_ops: None,
                    }
                }
                DecoderKind::Online => {
                    let stride = stride.unwrap_or_else(|| MemoryTrace::auto_stride(n as u64));
                    let t0 = Instant::now();
                    let mut dec = StreamDecoder::start_with_stride(hmm, seq[0], stride)?;
                    let mut emitted = 0usize;
                    let mut next_checkpoint = 10u64;
                    for &x in &seq[1..] {
                        emitted += dec.feed(x)?.len();
                        if dec.position() == next_checkpoint {
                            prefix_curve.push(PrefixSample {
                                seed,
                                n_prefix: next_checkpoint,
                                max_window: dec.trace().peak(),
                            });
                            next_checkpoint *= 10;
                        }
                    }
                    let (suffix, summary) = dec.finish()?;
                    emitted += suffix.len();
                    let wall = t0.elapsed();
                    debug_assert_eq!(emitted, n);
                    let s = summary.trace.summary()?;
                    BenchReport {
                        decoder,
                        model_id: model_id.into(),
                        n: n as u64,
                        seed,
                        wall,
                        forward_steps: n as u64,
                        peak_window: s.peak,
                        mean_window: s.mean,
                        log_prob: summary.log_prob.value(),
                        tree_ops: Some(summary.ops),
                    }
                }
            };
            log_probs.push(report.log_prob);
            reports.push(report);
        }
        for w in log_probs.windows(2) {
            debug_assert!(
                (w[0] - w[1]).abs() < 1e-9,
                "decoders disagree on log-probability: {} vs {}",
                w[0],
                w[1]
            );
        }
    }
    Ok(BenchRun {
        reports,
        prefix_curve,
    })
}

/// Least-squares fit of `y = slope * ln(n) + intercept`.
#[derive(Clone, Copy, Debug)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Fits mean-max-window points `(n, y)` against `ln n`. Needs at least
/// three points with three distinct `n` values.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<LogFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if points.len() < 3 || distinct.len() < 3 {
        return Err(Error::Domain(format!(
            "log fit needs >= 3 points with distinct n; got {} points, {} distinct",
            points.len(),
            distinct.len()
        )));
    }
    for &(n, _) in points {
        if n <= 0.0 {
            return Err(Error::Domain(format!("n = {n} must be positive")));
        }
    }
    let m = points.len() as f64;
    let xm = points.iter().map(|p| p.0.ln()).sum::<f64>() / m;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(n, y) in points {
        let dx = n.ln() - xm;
        sxx += dx * dx;
        sxy += dx * (y - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss: f64 = points
        .iter()
        .map(|&(n, y)| {
            let r = y - (slope * n.ln() + intercept);
            r * r
        })
        .sum();
    Ok(LogFit {
        slope,
        intercept,
        residual: (ss / m).sqrt(),
    })
}
