use std::fmt::Write as _;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use ovit::metrics::{self, BenchReport, DecoderKind, MemoryTrace};
use ovit::model_file::Model;
use ovit::online::StreamDecoder;
use ovit::randwalk;
use ovit::seqgen::{self, GenKind, GenSpec};
use ovit::{checkpoint, online, trellis, Error, Result, StatePath, Symbol};

#[derive(Parser)]
#[command(
    name = "ovit",
    version,
    about = "Viterbi decoding with instrumented memory: full-table, checkpointing, and on-line decoders"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode a sequence file; writes the state path and a metrics CSV.
    Decode {
        /// Model file.
        #[arg(long)]
        model: PathBuf,
        /// Sequence file (raw symbols; whitespace ignored, '>' lines skipped).
        seq: PathBuf,
        /// full | checkpoint | online.
        #[arg(long, default_value = "full")]
        algorithm: String,
        /// Checkpoint block length (default: ceil(sqrt(n))).
        #[arg(long)]
        block_len: Option<usize>,
        /// Path output file, one state per line.
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV (default: <out>.metrics.csv).
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Write state labels from the model file instead of indices.
        #[arg(long)]
        labels: bool,
    },
    /// Read symbols from stdin, write each settled state as soon as its
    /// coalescence point is reached.
    Stream {
        #[arg(long)]
        model: PathBuf,
    },
    /// Generate a sequence file (and optionally the true state path).
    Gen {
        #[arg(long)]
        model: PathBuf,
        /// hmm: sample from the model; iid: independent symbols.
        #[arg(long, default_value = "hmm")]
        kind: String,
        /// Comma-separated i.i.d. symbol probabilities (default uniform).
        #[arg(long)]
        dist: Option<String>,
        /// Sequence length (accepts forms like 1e6).
        #[arg(long)]
        n: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar file with the generating state path (hmm kind only).
        #[arg(long)]
        true_path_out: Option<PathBuf>,
    },
    /// Run decoders over generated inputs and report memory/time metrics.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "iid")]
        kind: String,
        #[arg(long)]
        dist: Option<String>,
        #[arg(long)]
        n: String,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Memory-trace sampling stride (default n/10^4).
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long)]
        block_len: Option<usize>,
        /// Comma-separated decoder set.
        #[arg(long, default_value = "full,checkpoint,online")]
        algorithms: String,
        /// Per-trial report CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Prefix-growth curve CSV for the online decoder.
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Tabulate run-length and maximum-memory laws for the symmetric
    /// two-state random walk: analytic bounds next to simulation.
    Analyze {
        /// Barrier parameter of the walk.
        #[arg(long = "K")]
        k: u32,
        /// Sequence length for the maximum-memory table.
        #[arg(long)]
        n: String,
        /// Walk steps for the run-length table.
        #[arg(long, default_value = "1e6")]
        steps: String,
        /// Trials for the empirical expected maximum.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <out>.runlen.csv and <out>.maxmem.csv
        /// (default: both tables to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ovit: {e}");
            if e.is_infeasible() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Decode {
            model,
            seq,
            algorithm,
            block_len,
            out,
            metrics,
            labels,
        } => decode(&model, &seq, &algorithm, block_len, &out, metrics, labels),
        Cmd::Stream { model } => stream(&model),
        Cmd::Gen {
            model,
            kind,
            dist,
            n,
            seed,
            out,
            true_path_out,
        } => gen(&model, &kind, dist.as_deref(), &n, seed, &out, true_path_out),
        Cmd::Bench {
            model,
            kind,
            dist,
            n,
            trials,
            seed,
            stride,
            block_len,
            algorithms,
            out,
            curve_out,
        } => bench(
            &model, &kind, dist.as_deref(), &n, trials, seed, stride, block_len, &algorithms,
            out, curve_out,
        ),
        Cmd::Analyze {
            k,
            n,
            steps,
            trials,
            seed,
            out,
        } => analyze(k, &n, &steps, trials, seed, out),
    }
}

/// Parses counts given as plain integers or float forms like `1e6`.
fn parse_count(s: &str) -> Result<u64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Domain(format!("bad count '{s}'")))?;
    if !v.is_finite() || v < 1.0 || v.fract() != 0.0 || v > 1e15 {
        return Err(Error::Domain(format!("bad count '{s}'")));
    }
    Ok(v as u64)
}

fn parse_dist(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad probability '{f}' in --dist")))
        })
        .collect()
}

fn model_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    Ok(std::fs::write(path, content)?)
}

// ----- decode ---------------------------------------------------------------

fn decode(
    model_path: &Path,
    seq_path: &Path,
    algorithm: &str,
    block_len: Option<usize>,
    out: &Path,
    metrics_path: Option<PathBuf>,
    labels: bool,
) -> Result<()> {
    let decoder: DecoderKind = algorithm.parse()?;
    let model = Model::load(model_path)?;
    let text = std::fs::read_to_string(seq_path)?;
    let seq = model.encode_sequence(&text)?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }

    let (path, report) = decode_one(&model.hmm, &model_id(model_path), &seq, decoder, block_len)?;

    let mut path_text = String::with_capacity(path.len() * 2);
    for &s in path.iter() {
        if labels {
            path_text.push_str(&model.state_name(s as usize));
        } else {
            let _ = write!(path_text, "{s}");
        }
        path_text.push('\n');
    }
    write_file(out, &path_text)?;

    let metrics_path = metrics_path.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".metrics.csv");
        PathBuf::from(p)
    });
    let mut csv = format!(
        "# ovit decode model={} seq={} algorithm={decoder} block_len={} out={}\n{}\n",
        model_path.display(),
        seq_path.display(),
        block_len.map_or("auto".into(), |l| l.to_string()),
        out.display(),
        BenchReport::CSV_HEADER,
    );
    csv.push_str(&report.csv_row());
    csv.push('\n');
    write_file(&metrics_path, &csv)?;
    Ok(())
}

/// Runs one decoder over an in-memory sequence, reporting the same metrics
/// row the benchmark harness produces.
fn decode_one(
    hmm: &ovit::Hmm,
    model_id: &str,
    seq: &[Symbol],
    decoder: DecoderKind,
    block_len: Option<usize>,
) -> Result<(StatePath, BenchReport)> {
    let n = seq.len() as u64;
    let t0 = Instant::now();
    let (path, log_prob, trace_summary, forward_steps, tree_ops) = match decoder {
        DecoderKind::Full => {
            let d = trellis::viterbi_full(hmm, seq)?;
            (d.path, d.log_prob, d.trace.summary()?, n, None)
        }
        DecoderKind::Checkpoint => {
            let d = checkpoint::viterbi_checkpoint(hmm, seq, block_len)?;
            (d.path, d.log_prob, d.trace.summary()?, d.forward_steps, None)
        }
        DecoderKind::Online => {
            let d = online::decode_online(hmm, seq)?;
            (d.path, d.log_prob, d.trace.summary()?, n, Some(d.ops))
        }
    };
    let wall = t0.elapsed();
    let report = BenchReport {
        decoder,
        model_id: model_id.into(),
        n,
        seed: 0,
        wall,
        forward_steps,
        peak_window: trace_summary.peak,
        mean_window: trace_summary.mean,
        log_prob: log_prob.value(),
        tree_ops,
    };
    Ok((path, report))
}

// ----- stream ---------------------------------------------------------------

fn stream(model_path: &Path) -> Result<()> {
    let model = Model::load(model_path)?;
    let mut lookup = [None::<Symbol>; 256];
    for (i, &c) in model.alphabet.iter().enumerate() {
        if !c.is_ascii() {
            return Err(Error::Domain(
                "stream mode requires an ASCII model alphabet".into(),
            ));
        }
        lookup[c as usize] = Some(i as Symbol);
    }

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut dec: Option<StreamDecoder> = None;
    let mut position: u64 = 0;

    let mut emit = |out: &mut dyn Write, states: &[u16]| -> Result<()> {
        for s in states {
            writeln!(out, "{s}")?;
        }
        out.flush()?;
        Ok(())
    };

    let mut buf = [0u8; 8192];
    let mut input = stdin.lock();
    loop {
        let read = input.read(&mut buf)?;
        if read == 0 {
            break;
        }
        for &byte in &buf[..read] {
            if byte.is_ascii_whitespace() {
                continue;
            }
            let symbol = match lookup[byte as usize] {
                Some(s) => s,
                None => {
                    eprintln!(
                        "ovit: symbol '{}' not in model alphabet",
                        char::from(byte)
                    );
                    return Err(Error::ImpossibleSequence {
                        position: position + 1,
                    });
                }
            };
            position += 1;
            match dec.as_mut() {
                None => dec = Some(StreamDecoder::start(&model.hmm, symbol)?),
                Some(d) => {
                    let states = d.feed(symbol)?;
                    emit(&mut out, &states)?;
                }
            }
        }
    }
    match dec {
        None => Err(Error::EmptySequence),
        Some(d) => {
            let (suffix, _) = d.finish()?;
            emit(&mut out, &suffix)
        }
    }
}

// ----- gen ------------------------------------------------------------------

fn gen(
    model_path: &Path,
    kind: &str,
    dist: Option<&str>,
    n: &str,
    seed: u64,
    out: &Path,
    true_path_out: Option<PathBuf>,
) -> Result<()> {
    let model = Model::load(model_path)?;
    let n = parse_count(n)? as usize;
    let spec = match kind {
        "hmm" => {
            if dist.is_some() {
                return Err(Error::Domain("--dist only applies to --kind iid".into()));
            }
            GenSpec::from_model(model.hmm.clone(), n, seed)
        }
        "iid" => {
            let dist = match dist {
                Some(s) => parse_dist(s)?,
                None => {
                    let a = model.hmm.alphabet_size();
                    vec![1.0 / a as f64; a]
                }
            };
            if dist.len() != model.hmm.alphabet_size() {
                return Err(Error::Domain(format!(
                    "--dist has {} entries, model alphabet has {}",
                    dist.len(),
                    model.hmm.alphabet_size()
                )));
            }
            GenSpec::iid(dist, n, seed)
        }
        other => {
            return Err(Error::Domain(format!(
                "unknown --kind '{other}' (expected hmm|iid)"
            )))
        }
    };
    if true_path_out.is_some() && kind != "hmm" {
        return Err(Error::Domain(
            "--true-path-out requires --kind hmm".into(),
        ));
    }

    let output = spec.generate()?;
    let mut text = format!(
        ">ovit gen model={} kind={kind} n={n} seed={seed} rng={}\n",
        model_path.display(),
        seqgen::RNG_ALGO
    );
    text.push_str(&model.format_sequence(&output.seq));
    write_file(out, &text)?;

    if let (Some(path_out), Some(states)) = (true_path_out, output.true_path) {
        let mut text = String::with_capacity(states.len() * 2);
        for &s in states.iter() {
            let _ = writeln!(text, "{s}");
        }
        write_file(&path_out, &text)?;
    }
    Ok(())
}

// ----- bench ----------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn bench(
    model_path: &Path,
    kind: &str,
    dist: Option<&str>,
    n: &str,
    trials: usize,
    seed: u64,
    stride: Option<u64>,
    block_len: Option<usize>,
    algorithms: &str,
    out: Option<PathBuf>,
    curve_out: Option<PathBuf>,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("--trials must be >= 1".into()));
    }
    let model = Model::load(model_path)?;
    let n = parse_count(n)? as usize;
    let decoders: Vec<DecoderKind> = algorithms
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    let gen_kind = match kind {
        "hmm" => GenKind::FromModel(model.hmm.clone()),
        "iid" => {
            let dist = match dist {
                Some(s) => parse_dist(s)?,
                None => {
                    let a = model.hmm.alphabet_size();
                    vec![1.0 / a as f64; a]
                }
            };
            GenKind::Iid(dist)
        }
        other => {
            return Err(Error::Domain(format!(
                "unknown --kind '{other}' (expected hmm|iid)"
            )))
        }
    };
    let seeds: Vec<u64> = (0..trials as u64).map(|i| seed + i).collect();
    let run = metrics::run_benchmark(
        &model.hmm,
        &model_id(model_path),
        &gen_kind,
        n,
        &decoders,
        &seeds,
        block_len,
        stride,
    )?;

    let config = format!(
        "# ovit bench model={} kind={kind} n={n} trials={trials} seed={seed} stride={} \
         block_len={} algorithms={algorithms} rng={}\n",
        model_path.display(),
        stride.map_or("auto".into(), |s| s.to_string()),
        block_len.map_or("auto".into(), |l| l.to_string()),
        seqgen::RNG_ALGO
    );
    let mut csv = config.clone();
    csv.push_str(BenchReport::CSV_HEADER);
    csv.push('\n');
    for r in &run.reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    match &out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }

    if let Some(curve_path) = curve_out {
        let mut curve = config;
        curve.push_str("decoder,n_prefix,mean_max,stderr,trials\n");
        let mut prefixes: Vec<u64> = run.prefix_curve.iter().map(|p| p.n_prefix).collect();
        prefixes.sort_unstable();
        prefixes.dedup();
        for p in prefixes {
            let vals: Vec<f64> = run
                .prefix_curve
                .iter()
                .filter(|s| s.n_prefix == p)
                .map(|s| s.max_window as f64)
                .collect();
            let count = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / count;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (count - 1.0).max(1.0);
            let stderr = (var / count).sqrt();
            let _ = writeln!(
                curve,
                "online,{p},{mean:.4},{stderr:.4},{}",
                vals.len()
            );
        }
        write_file(&curve_path, &curve)?;
    }
    Ok(())
}

// ----- analyze --------------------------------------------------------------

fn analyze(
    k: u32,
    n: &str,
    steps: &str,
    trials: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("--trials must be >= 1".into()));
    }
    let n = parse_count(n)?;
    let steps = parse_count(steps)?;

    let dist = randwalk::simulate_runs(k, steps, seed)?;
    let mut runlen = format!(
        "# ovit analyze table=runlen K={k} steps={steps} seed={seed} rng={}\n",
        seqgen::RNG_ALGO
    );
    runlen.push_str("K,l,empirical_prob,lower_bound,upper_bound\n");
    for l in 0..dist.num_buckets() {
        let (lo, hi) = randwalk::run_length_prob_bounds(k, l)?;
        let _ = writeln!(runlen, "{k},{l},{:.9},{lo:.9},{hi:.9}", dist.bucket_prob(l));
    }

    let pred = randwalk::expected_max_memory(k, n)?;
    let mean_max = (0..trials)
        .map(|i| randwalk::simulate_window_max(k, n, seed + 1 + i as u64).map(|m| m as f64))
        .sum::<Result<f64>>()?
        / trials as f64;
    let mut maxmem = format!(
        "# ovit analyze table=maxmem K={k} n={n} trials={trials} seed={seed} rng={}\n",
        seqgen::RNG_ALGO
    );
    maxmem.push_str("K,n,empirical_expected_max,predicted,exact_constant,approx_constant\n");
    let _ = writeln!(
        maxmem,
        "{k},{n},{mean_max:.4},{:.4},{:.4},{:.4}",
        pred.predicted_expected_max, pred.exact_constant, pred.approx_constant
    );

    match out {
        Some(prefix) => {
            let mut runlen_path = prefix.as_os_str().to_owned();
            runlen_path.push(".runlen.csv");
            write_file(Path::new(&runlen_path), &runlen)?;
            let mut maxmem_path = prefix.as_os_str().to_owned();
            maxmem_path.push(".maxmem.csv");
            write_file(Path::new(&maxmem_path), &maxmem)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write!(w, "{runlen}\n{maxmem}")?;
            w.flush()?;
        }
    }
    Ok(())
}
