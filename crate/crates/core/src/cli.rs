//! The `fwalk` command-line front end.
//!
//! Every subcommand is a pure function of its arguments: results depend on
//! `--seed` and the group/law, never on `--threads`. Output goes to `--out`
//! when given, otherwise to stdout.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad arguments or
//! configuration, 3 numeric failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::{g17, F17};
use crate::group::{self, GeneratorSet, HypothesisReport};
use crate::rng::SplitMix64;
use crate::stats::{self, Summary};
use crate::walk::{self, StepLaw, WalkSample};
use crate::words::{self, Word};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Search depth used by `--require-hypotheses` outside `validate`.
const DEFAULT_DEPTH: usize = 6;

#[derive(Parser, Debug)]
#[command(name = "fwalk", version, about = "Random walks on Fuchsian groups and their limit laws")]
struct Cli {
    /// Master seed; sample i uses an independent stream derived from (seed, i).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `sanov`, `pants:L1,L2,L3`, or a path to a group config JSON file.
    #[arg(long, global = true, default_value = "sanov")]
    group: String,
    /// Step weights, comma separated, one per generator (default uniform).
    #[arg(long, global = true, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Worker threads; does not change any result.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fail with exit code 1 unless every hypothesis certificate is Verified.
    #[arg(long, global = true)]
    require_hypotheses: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone, Copy)]
struct BatchArgs {
    /// Walk length.
    #[arg(long = "n", default_value_t = 200)]
    n: usize,
    /// Number of independent walks.
    #[arg(long = "N", default_value_t = 10_000)]
    count: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for the hypothesis certificates and print the report as JSON.
    Validate {
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
    },
    /// Simulate a batch of walks and write the walk CSV.
    Walk {
        #[command(flatten)]
        batch: BatchArgs,
        /// Record the step word of every walk.
        #[arg(long)]
        keep_words: bool,
    },
    /// Estimate λ₁, Φ and the hyperbolic fraction; print the summary JSON.
    Estimate {
        #[command(flatten)]
        batch: BatchArgs,
        /// Read samples from a walk CSV instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// KS statistics of the normalized log-norm and geometric length.
    Clt {
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Large-deviation frequencies at several walk lengths.
    Ldp {
        /// Deviation threshold per step (default λ̂₁/2 at the largest n).
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400])]
        ns: Vec<usize>,
        #[arg(long = "N", default_value_t = 10_000)]
        count: usize,
    },
    /// Local-limit window [λ̂₁n + a1, λ̂₁n + a2].
    Llt {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        a1: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        a2: f64,
    },
    /// One long path normalized by √(2Φn log log n); writes CSV.
    Lil {
        #[arg(long, default_value_t = 1_000_000)]
        nmax: usize,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        /// Use this λ₁ instead of estimating it.
        #[arg(long)]
        lambda1: Option<f64>,
        /// Use this Φ instead of estimating it.
        #[arg(long)]
        phi: Option<f64>,
        /// Walks per calibration batch for λ₁ and Φ.
        #[arg(long, default_value_t = 20_000)]
        calibration_n: usize,
    },
    /// Exact law of the n-step product by enumeration; prints JSON.
    Exact {
        #[arg(long = "n", default_value_t = 4)]
        n: usize,
    },
    /// Print the pants generators and their traces.
    Pants {
        #[arg(long)]
        l1: f64,
        #[arg(long)]
        l2: f64,
        #[arg(long)]
        l3: f64,
    },
    /// Geometric lengths of uniform reduced and cyclically reduced words in
    /// the pants group; writes CSV and a summary on stderr.
    ConjClm {
        #[arg(long)]
        l1: f64,
        #[arg(long)]
        l2: f64,
        #[arg(long)]
        l3: f64,
        #[command(flatten)]
        batch: BatchArgs,
    },
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NumericFailure(_) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: format!("i/o: {e}") }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let threads = cli.threads;
    let outcome = walk::with_threads(threads, || execute(&cli)).map_err(Failure::from).and_then(|r| r);
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("fwalk: {}", f.message);
            f.code
        }
    }
}

/// Resolved group and step law.
struct RunConfig {
    label: String,
    gens: GeneratorSet,
    law: StepLaw,
}

fn resolve(cli: &Cli) -> CliResult<RunConfig> {
    let gens = parse_group(&cli.group)?;
    let law = match &cli.weights {
        Some(w) => StepLaw::new(w)?,
        None => StepLaw::uniform(gens.len())?,
    };
    if law.len() != gens.len() {
        return Err(Error::ValidationError(format!(
            "{} weights given for {} generators",
            law.len(),
            gens.len()
        ))
        .into());
    }
    if cli.require_hypotheses {
        let report = group::validate(&gens, DEFAULT_DEPTH);
        if !report.all_verified() {
            return Err(Failure {
                code: EXIT_VALIDATION,
                message: format!("hypotheses not verified at depth {DEFAULT_DEPTH}"),
            });
        }
    }
    Ok(RunConfig { label: cli.group.clone(), gens, law })
}

fn parse_group(source: &str) -> Result<GeneratorSet> {
    if source == "sanov" {
        return Ok(group::sanov());
    }
    if let Some(rest) = source.strip_prefix("pants:") {
        let lengths = parse_lengths(rest)?;
        return group::pants(lengths[0], lengths[1], lengths[2], true);
    }
    let bytes = fs::read(source).map_err(|e| Error::ParseError(format!("cannot read group file {source}: {e}")))?;
    group::load(&bytes)
}

fn parse_lengths(text: &str) -> Result<[f64; 3]> {
    let values: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::ParseError(format!("length `{t}`: {e}"))))
        .collect::<Result<_>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| Error::ParseError(format!("pants needs three lengths, got {}", v.len())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: EXIT_NUMERIC, message: e.to_string() })?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn execute(cli: &Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate { depth } => {
            let cfg = resolve_without_check(cli)?;
            let report = group::validate(&cfg.gens, *depth);
            emit_json(out, &ValidateJson::new(&cfg, &report))?;
            if cli.require_hypotheses && !report.all_verified() {
                return Err(Failure { code: EXIT_VALIDATION, message: "hypotheses not verified".into() });
            }
            Ok(())
        }
        Command::Walk { batch, keep_words } => {
            let cfg = resolve(cli)?;
            let samples = walk::simulate_batch(&cfg.gens, &cfg.law, batch.n, batch.count, cli.seed, *keep_words)?;
            let mut buf = Vec::new();
            walk::write_csv(&samples, &cfg.gens, &mut buf)?;
            emit(out, &buf)
        }
        Command::Estimate { batch, input } => {
            let cfg = resolve(cli)?;
            let samples = match input {
                Some(path) => walk::read_csv(fs::File::open(path)?, Some(&cfg.gens))?,
                None => walk::simulate_batch(&cfg.gens, &cfg.law, batch.n, batch.count, cli.seed, false)?,
            };
            emit_json(out, &estimate_summary(&cfg.label, cli.seed, &samples)?)
        }
        Command::Clt { batch } => {
            let cfg = resolve(cli)?;
            let samples = walk::simulate_batch(&cfg.gens, &cfg.law, batch.n, batch.count, cli.seed, false)?;
            emit_json(out, &estimate_summary(&cfg.label, cli.seed, &samples)?)
        }
        Command::Ldp { t0, ns, count } => {
            let cfg = resolve(cli)?;
            let batches = ns
                .iter()
                .map(|&n| walk::simulate_batch(&cfg.gens, &cfg.law, n, *count, cli.seed, false))
                .collect::<Result<Vec<_>>>()?;
            let longest = (0..ns.len()).max_by_key(|&i| ns[i]).ok_or_else(|| Error::EmptyInput("no walk lengths".into()))?;
            let est = stats::estimate_laws(&batches[longest])?;
            let t0 = t0.unwrap_or(est.lambda1_hat / 2.0);
            let pairs: Vec<(usize, &[WalkSample])> = ns.iter().copied().zip(batches.iter().map(|b| &b[..])).collect();
            let points = stats::ldp_estimate(&pairs, est.lambda1_hat, t0)?;
            let mut summary = Summary::new(&cfg.label, cli.seed, &est);
            summary.ldp = points.iter().map(|p| stats::LdpJson::new(p, t0)).collect();
            emit_json(out, &summary)
        }
        Command::Llt { batch, a1, a2 } => {
            let cfg = resolve(cli)?;
            let samples = walk::simulate_batch(&cfg.gens, &cfg.law, batch.n, batch.count, cli.seed, false)?;
            let est = stats::estimate_laws(&samples)?;
            let window = stats::llt_window(&samples, est.lambda1_hat, est.phi_hat, *a1, *a2)?;
            let mut summary = Summary::new(&cfg.label, cli.seed, &est);
            summary.llt = Some(window.into());
            emit_json(out, &summary)
        }
        Command::Lil { nmax, stride, lambda1, phi, calibration_n } => {
            let cfg = resolve(cli)?;
            run_lil(cli, &cfg, *nmax, *stride, *lambda1, *phi, *calibration_n)
        }
        Command::Exact { n } => {
            let cfg = resolve(cli)?;
            let dist = stats::exact_distribution(&cfg.gens, &cfg.law, *n)?;
            emit_json(out, &ExactJson::new(&cfg.label, &dist))
        }
        Command::Pants { l1, l2, l3 } => {
            let gens = group::pants(*l1, *l2, *l3, false)?;
            emit(out, pants_report(&gens, [*l1, *l2, *l3]).as_bytes())
        }
        Command::ConjClm { l1, l2, l3, batch } => {
            let gens = group::pants(*l1, *l2, *l3, true)?;
            run_conj_clm(out, &gens, *batch, cli.seed)
        }
    }
}

fn resolve_without_check(cli: &Cli) -> CliResult<RunConfig> {
    let gens = parse_group(&cli.group)?;
    let law = StepLaw::uniform(gens.len())?;
    Ok(RunConfig { label: cli.group.clone(), gens, law })
}

#[derive(Serialize)]
struct ValidateJson {
    group: String,
    moment_ok: bool,
    unbounded: group::Certificate,
    strongly_irreducible: group::Certificate,
    witness_words: Vec<String>,
    search_depth: usize,
}

impl ValidateJson {
    fn new(cfg: &RunConfig, report: &HypothesisReport) -> Self {
        Self {
            group: cfg.label.clone(),
            moment_ok: report.moment_ok,
            unbounded: report.unbounded,
            strongly_irreducible: report.strongly_irreducible,
            witness_words: report.witness_words.iter().map(|w| w.to_text(&cfg.gens)).collect(),
            search_depth: report.search_depth,
        }
    }
}

/// Summary with both KS statistics filled in from the batch's own estimates.
fn estimate_summary(label: &str, seed: u64, samples: &[WalkSample]) -> Result<Summary> {
    let est = stats::estimate_laws(samples)?;
    let mut summary = Summary::new(label, seed, &est);
    if est.phi_hat > 0.0 {
        summary.ks_log_norm = Some(F17(stats::clt_ks(samples, est.lambda1_hat, est.phi_hat, false)?));
        summary.ks_geom = stats::clt_ks(samples, est.lambda1_hat, est.phi_hat, true).ok().map(F17);
    }
    Ok(summary)
}

#[derive(Serialize)]
struct ExactJson<'a> {
    group: &'a str,
    n: usize,
    total_probability: F17,
    mean_log_norm: F17,
    variance_log_norm: F17,
    hyperbolic_probability: F17,
    atoms: &'a [stats::Atom],
}

impl<'a> ExactJson<'a> {
    fn new(group: &'a str, dist: &'a stats::ExactDistribution) -> Self {
        Self {
            group,
            n: dist.n,
            total_probability: F17(dist.total_probability()),
            mean_log_norm: F17(dist.mean_log_norm()),
            variance_log_norm: F17(dist.variance_log_norm()),
            hyperbolic_probability: F17(dist.hyperbolic_probability()),
            atoms: &dist.atoms,
        }
    }
}

fn pants_report(gens: &GeneratorSet, lengths: [f64; 3]) -> String {
    let (x, y) = (gens.mats()[0], gens.mats()[1]);
    let xy = x * y;
    let mut s = String::new();
    for (name, m) in [("X", x), ("Y", y), ("XY", xy)] {
        s.push_str(&format!("{name} = [[{}, {}], [{}, {}]]\n", g17(m.a), g17(m.b), g17(m.c), g17(m.d)));
    }
    for (name, m, l) in [("X", x, lengths[0]), ("Y", y, lengths[1]), ("XY", xy, lengths[2])] {
        s.push_str(&format!(
            "tr {name} = {}  (target ±{})\n",
            g17(m.trace()),
            g17(2.0 * (0.5 * l).cosh())
        ));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn run_lil(
    cli: &Cli,
    cfg: &RunConfig,
    nmax: usize,
    stride: usize,
    lambda1: Option<f64>,
    phi: Option<f64>,
    calibration_n: usize,
) -> CliResult<()> {
    let calibration_seed = cli.seed.wrapping_add(1);
    let lambda1 = match lambda1 {
        Some(l) => l,
        None => {
            let short = walk::simulate_batch(&cfg.gens, &cfg.law, 1000, calibration_n, calibration_seed, false)?;
            let long = walk::simulate_batch(&cfg.gens, &cfg.law, 2000, calibration_n, calibration_seed, false)?;
            stats::estimate_lambda1_increment(&short, &long)?.0
        }
    };
    let phi = match phi {
        Some(p) => p,
        None => {
            let batch = walk::simulate_batch(&cfg.gens, &cfg.law, 400, calibration_n, calibration_seed, false)?;
            stats::estimate_phi(&batch)?
        }
    };
    let traj = walk::simulate_path(&cfg.gens, &cfg.law, nmax, cli.seed, stride)?;
    if traj.aborted {
        return Err(Error::NumericFailure("path aborted by a numeric failure".into()).into());
    }
    let values = stats::lil_normalize(&traj, lambda1, phi)?;
    let mut buf = String::from("n,log_norm,value\n");
    for (c, (_, v)) in traj.checkpoints.iter().filter(|c| c.n >= 3).zip(&values) {
        buf.push_str(&format!("{},{},{}\n", c.n, g17(c.log_norm), g17(*v)));
    }
    emit(cli.out.as_deref(), buf.as_bytes())?;
    let lo = 1000.min(nmax);
    match stats::running_max_abs(&values, lo, nmax) {
        Some(m) => eprintln!("lambda1={} phi={} running_max[{lo},{nmax}]={}", g17(lambda1), g17(phi), g17(m)),
        None => eprintln!("lambda1={} phi={} no checkpoints in [{lo},{nmax}]", g17(lambda1), g17(phi)),
    }
    Ok(())
}

/// Geometric length of the conjugacy class of `w`, or `None` if trivial or
/// not hyperbolic.
fn class_length(w: &Word, gens: &GeneratorSet) -> Result<Option<f64>> {
    let core = words::cyclic_reduce(w, gens)?;
    if core.is_empty() {
        return Ok(None);
    }
    let g = words::evaluate(&core, gens)?;
    Ok(g.geom_length().ok())
}

struct ConjRow {
    index: usize,
    kind: &'static str,
    word: String,
    geom: Option<f64>,
}

fn run_conj_clm(out: Option<&Path>, gens: &GeneratorSet, batch: BatchArgs, seed: u64) -> CliResult<()> {
    let BatchArgs { n, count } = batch;
    if n == 0 || count == 0 {
        return Err(Error::DegenerateInput("conj-clm needs n ≥ 1 and N ≥ 1".into()).into());
    }
    let rank = gens.free_rank().ok_or_else(|| Error::ValidationError("group is not a free alphabet".into()))?;
    let sample = |kind: &'static str, i: usize| -> Result<ConjRow> {
        let word = if kind == "reduced" {
            words::sample_reduced(rank, n, &mut SplitMix64::for_sample(seed, i as u64))
        } else {
            words::sample_cyclic_reduced(rank, n, &mut SplitMix64::for_sample(seed, (count + i) as u64))
        };
        Ok(ConjRow { index: i, kind, word: word.to_text(gens), geom: class_length(&word, gens)? })
    };
    let mut rows = Vec::with_capacity(2 * count);
    for kind in ["reduced", "cyclic"] {
        let part: Vec<ConjRow> = (0..count).into_par_iter().map(|i| sample(kind, i)).collect::<Result<_>>()?;
        rows.extend(part);
    }

    let root_n = (n as f64).sqrt();
    let mut kappa = std::collections::HashMap::new();
    let mut summary = String::new();
    for kind in ["reduced", "cyclic"] {
        let lengths: Vec<f64> = rows.iter().filter(|r| r.kind == kind).filter_map(|r| r.geom).collect();
        if lengths.len() < 2 {
            return Err(Error::DegenerateInput(format!("too few hyperbolic {kind} samples")).into());
        }
        let (mean, var) = stats::mean_variance(&lengths);
        let k = mean / n as f64;
        kappa.insert(kind, k);
        let normalized: Vec<f64> = lengths.iter().map(|g| (g - k * n as f64) / root_n).collect();
        let nu = var / n as f64;
        let ks = stats::ks_normal(&normalized, nu).ok();
        summary.push_str(&format!(
            "{kind}: kappa_hat={} nu_hat={} hyperbolic={}/{} ks={}\n",
            g17(k),
            g17(nu),
            lengths.len(),
            count,
            ks.map(g17).unwrap_or_default()
        ));
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure { code: EXIT_USAGE, message: format!("csv: {e}") };
    w.write_record(["index", "kind", "word", "geom_length", "normalized"]).map_err(io)?;
    for r in &rows {
        let (geom, normalized) = match r.geom {
            Some(g) => (g17(g), g17((g - kappa[r.kind] * n as f64) / root_n)),
            None => (String::new(), String::new()),
        };
        w.write_record([r.index.to_string(), r.kind.to_string(), r.word.clone(), geom, normalized]).map_err(io)?;
    }
    let buf = w.into_inner().map_err(|e| Failure { code: EXIT_USAGE, message: format!("csv: {e}") })?;
    emit(out, &buf)?;
    eprint!("{summary}");
    Ok(())
}
