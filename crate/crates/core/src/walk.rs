//! Deterministic n-step random walks `g = g_n ⋯ g_1` under a step law.
//!
//! Sample `i` of a run seeded with `seed` draws every step from the stream
//! [`SplitMix64::for_sample(seed, i)`](SplitMix64::for_sample), so batches
//! are bit-identical whatever the thread count.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::group::GeneratorSet;
use crate::linalg2::{length_from_log_trace, ElementClass, ScaledMat, CLASSIFY_TOL};
use crate::rng::SplitMix64;
use crate::words::{parse, Word};

/// Header of the walk CSV.
pub const CSV_HEADER: [&str; 8] =
    ["index", "n", "log_norm", "trace_sign", "log_abs_trace", "class", "geom_length", "word"];

/// Positive step probabilities, normalized to sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepLaw {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::ValidationError("step law has no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::ValidationError(format!("step weight {w} must be positive and finite")));
        }
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self { weights, cumulative })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(&vec![1.0; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Inverse-CDF draw: the first index whose cumulative weight exceeds `u`.
    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        self.cumulative.partition_point(|&c| c <= u).min(self.weights.len() - 1)
    }

    #[inline]
    pub fn draw(&self, rng: &mut SplitMix64) -> usize {
        self.index_for(rng.next_f64())
    }
}

/// Observables of one sampled product.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkSample {
    pub index: u64,
    pub n: usize,
    pub log_norm: f64,
    pub trace_sign: i8,
    pub log_abs_trace: f64,
    /// `None` only when the sample hit a numeric failure.
    pub class: Option<ElementClass>,
    /// Present iff the class is hyperbolic.
    pub geom_length: Option<f64>,
    pub word: Option<Word>,
}

impl WalkSample {
    fn observe(index: u64, n: usize, g: &ScaledMat, word: Option<Word>) -> Self {
        let (trace_sign, log_abs_trace) = g.signed_log_trace();
        let class = g.classify(CLASSIFY_TOL);
        match g.log_op_norm() {
            Ok(log_norm) => Self {
                index,
                n,
                log_norm,
                trace_sign,
                log_abs_trace,
                class: Some(class),
                geom_length: (class == ElementClass::Hyperbolic).then(|| length_from_log_trace(log_abs_trace)),
                word,
            },
            Err(_) => Self::failed(index, n, word),
        }
    }

    fn failed(index: u64, n: usize, word: Option<Word>) -> Self {
        Self {
            index,
            n,
            log_norm: f64::NAN,
            trace_sign: 0,
            log_abs_trace: f64::NAN,
            class: None,
            geom_length: None,
            word,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.class.is_none()
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.class == Some(ElementClass::Hyperbolic)
    }
}

fn check_law(gens: &GeneratorSet, law: &StepLaw) -> Result<()> {
    if law.len() != gens.len() {
        return Err(Error::ValidationError(format!(
            "step law has {} weights for {} generators",
            law.len(),
            gens.len()
        )));
    }
    Ok(())
}

fn simulate_one(mats: &[ScaledMat], law: &StepLaw, n: usize, seed: u64, index: u64, keep_words: bool) -> WalkSample {
    let mut rng = SplitMix64::for_sample(seed, index);
    let mut letters = keep_words.then(|| Vec::with_capacity(n));
    let mut g = ScaledMat::identity();
    for _ in 0..n {
        let j = law.draw(&mut rng);
        if let Some(l) = letters.as_mut() {
            l.push(j);
        }
        match mats[j].mul(&g) {
            Ok(next) => g = next,
            Err(_) => {
                // Consume nothing further; the failure is recorded in the sample.
                return WalkSample::failed(index, n, letters.map(Word));
            }
        }
    }
    WalkSample::observe(index, n, &g, letters.map(Word))
}

/// `count` independent `n`-step walks, in sample-index order.
pub fn simulate_batch(
    gens: &GeneratorSet,
    law: &StepLaw,
    n: usize,
    count: usize,
    seed: u64,
    keep_words: bool,
) -> Result<Vec<WalkSample>> {
    check_law(gens, law)?;
    let mats = gens.scaled()?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| simulate_one(&mats, law, n, seed, i, keep_words))
        .collect())
}

/// Runs `f` on a dedicated pool of `threads` workers (`None` uses the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::ValidationError(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub log_norm: f64,
    pub trace_sign: i8,
    pub log_abs_trace: f64,
    pub class: ElementClass,
}

/// Observables of a single walk recorded at every multiple of the stride.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTrajectory {
    pub checkpoints: Vec<Checkpoint>,
    /// Set when a numeric failure cut the walk short.
    pub aborted: bool,
}

/// Extends one walk (stream index 0) to `n_max` steps, recording a
/// checkpoint at each multiple of `stride`.
pub fn simulate_path(
    gens: &GeneratorSet,
    law: &StepLaw,
    n_max: usize,
    seed: u64,
    stride: usize,
) -> Result<PathTrajectory> {
    check_law(gens, law)?;
    if stride == 0 {
        return Err(Error::ValidationError("checkpoint stride must be positive".into()));
    }
    let mats = gens.scaled()?;
    let mut rng = SplitMix64::for_sample(seed, 0);
    let mut g = ScaledMat::identity();
    let mut checkpoints = Vec::with_capacity(n_max / stride);
    for step in 1..=n_max {
        let j = law.draw(&mut rng);
        g = match mats[j].mul(&g) {
            Ok(next) => next,
            Err(_) => return Ok(PathTrajectory { checkpoints, aborted: true }),
        };
        if step % stride == 0 {
            let Ok(log_norm) = g.log_op_norm() else {
                return Ok(PathTrajectory { checkpoints, aborted: true });
            };
            let (trace_sign, log_abs_trace) = g.signed_log_trace();
            checkpoints.push(Checkpoint {
                n: step,
                log_norm,
                trace_sign,
                log_abs_trace,
                class: g.classify(CLASSIFY_TOL),
            });
        }
    }
    Ok(PathTrajectory { checkpoints, aborted: false })
}

/// Writes samples in the walk CSV schema; words are rendered with `gens`.
pub fn write_csv<W: Write>(samples: &[WalkSample], gens: &GeneratorSet, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::NumericFailure(format!("csv write: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for s in samples {
        w.write_record([
            s.index.to_string(),
            s.n.to_string(),
            g17(s.log_norm),
            s.trace_sign.to_string(),
            g17(s.log_abs_trace),
            s.class.map(|c| c.code().to_string()).unwrap_or_default(),
            s.geom_length.map(g17).unwrap_or_default(),
            s.word.as_ref().map(|w| w.to_text(gens)).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::NumericFailure(format!("csv write: {e}")))?;
    Ok(())
}

/// Reads a walk CSV. Words are parsed only when `gens` is given.
pub fn read_csv<R: Read>(input: R, gens: Option<&GeneratorSet>) -> Result<Vec<WalkSample>> {
    let perr = |msg: String| Error::ParseError(msg);
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| perr(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(perr(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let rec = record.map_err(|e| perr(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |name: &str| perr(format!("row {}: bad {name} {:?}", line + 1, field(CSV_HEADER.iter().position(|h| *h == name).unwrap())));
        let float = |i: usize, name: &str| field(i).parse::<f64>().map_err(|_| bad(name));
        let class = match field(5) {
            "" => None,
            code => Some(ElementClass::from_code(code).ok_or_else(|| bad("class"))?),
        };
        let geom_length = match field(6) {
            "" => None,
            _ => Some(float(6, "geom_length")?),
        };
        let word = match (field(7), gens) {
            (_, None) => None,
            ("", Some(_)) => None,
            (text, Some(g)) => Some(parse(text, g)?),
        };
        out.push(WalkSample {
            index: field(0).parse().map_err(|_| bad("index"))?,
            n: field(1).parse().map_err(|_| bad("n"))?,
            log_norm: float(2, "log_norm")?,
            trace_sign: field(3).parse().map_err(|_| bad("trace_sign"))?,
            log_abs_trace: float(4, "log_abs_trace")?,
            class,
            geom_length,
            word,
        });
    }
    Ok(out)
}
