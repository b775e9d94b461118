//! Estimators and empirical checks for the limit laws of `log‖g_n ⋯ g_1‖`,
//! and the exact enumeration oracle for small `n`.
//!
//! Conventions:
//! - `lambda1_hat = mean(log_norm) / n`, `lambda1_se = sd(log_norm) / (n √N)`.
//! - `phi_hat = var(log_norm) / n` (per-step variance, so that
//!   `(log_norm - λ₁n)/√n ≈ Normal(0, Φ)`).
//! - Sample variances use the `N - 1` denominator.
//! - Geometric lengths are centred at `2λ₁n` with variance `4Φ`, since
//!   `geom ≈ 2·log ρ(g)` and `log ρ(g) = log‖g‖ + O(1)` along the walk.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::F17;
use crate::group::GeneratorSet;
use crate::linalg2::{ElementClass, Mat2, CLASSIFY_TOL};
use crate::walk::{PathTrajectory, StepLaw, WalkSample};
use crate::words::{enumerate_words, evaluate_scaled};

/// Summary statistics of one batch at a fixed `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LawEstimates {
    pub lambda1_hat: f64,
    pub lambda1_se: f64,
    pub phi_hat: f64,
    pub n: usize,
    pub count: usize,
    pub hyperbolic_fraction: f64,
}

fn usable(samples: &[WalkSample]) -> impl Iterator<Item = &WalkSample> {
    samples.iter().filter(|s| !s.is_failure())
}

/// Mean and `N - 1` sample variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, if values.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

fn batch_log_norms(samples: &[WalkSample]) -> Result<(usize, Vec<f64>)> {
    let first = samples.first().ok_or_else(|| Error::EmptyInput("no samples".into()))?;
    let n = first.n;
    if n == 0 {
        return Err(Error::DegenerateInput("walk length must be positive".into()));
    }
    if samples.iter().any(|s| s.n != n) {
        return Err(Error::DegenerateInput("samples have different walk lengths".into()));
    }
    let values: Vec<f64> = usable(samples).map(|s| s.log_norm).collect();
    if values.len() < 2 {
        return Err(Error::EmptyInput("need at least two usable samples".into()));
    }
    Ok((n, values))
}

/// `(mean(log_norm)/n, sd(log_norm)/(n√N))`.
pub fn estimate_lambda1(samples: &[WalkSample]) -> Result<(f64, f64)> {
    let (n, values) = batch_log_norms(samples)?;
    let (mean, var) = mean_variance(&values);
    let n = n as f64;
    Ok((mean / n, var.sqrt() / (n * (values.len() as f64).sqrt())))
}

/// `var(log_norm)/n`.
pub fn estimate_phi(samples: &[WalkSample]) -> Result<f64> {
    let (n, values) = batch_log_norms(samples)?;
    Ok(mean_variance(&values).1 / n as f64)
}

/// Growth rate from paired walks at two lengths:
/// `mean(log_norm(n2) - log_norm(n1)) / (n2 - n1)` with its standard error.
///
/// Both batches must come from the same seed so that sample `i` of `short`
/// is a prefix of sample `i` of `long`. The constant offset in
/// `E log‖g_n‖ = λ₁n + c + o(1)` cancels in the difference, which removes
/// the `c/n` bias that `estimate_lambda1` carries.
pub fn estimate_lambda1_increment(short: &[WalkSample], long: &[WalkSample]) -> Result<(f64, f64)> {
    let (n1, _) = batch_log_norms(short)?;
    let (n2, _) = batch_log_norms(long)?;
    if n2 <= n1 {
        return Err(Error::DegenerateInput(format!("need n2 > n1, got n1 = {n1}, n2 = {n2}")));
    }
    if short.len() != long.len() || short.iter().zip(long).any(|(a, b)| a.index != b.index) {
        return Err(Error::DegenerateInput("batches are not paired by sample index".into()));
    }
    let diffs: Vec<f64> = short
        .iter()
        .zip(long)
        .filter(|(a, b)| !a.is_failure() && !b.is_failure())
        .map(|(a, b)| b.log_norm - a.log_norm)
        .collect();
    if diffs.len() < 2 {
        return Err(Error::EmptyInput("need at least two usable pairs".into()));
    }
    let (mean, var) = mean_variance(&diffs);
    let span = (n2 - n1) as f64;
    Ok((mean / span, var.sqrt() / (span * (diffs.len() as f64).sqrt())))
}

pub fn estimate_laws(samples: &[WalkSample]) -> Result<LawEstimates> {
    let (lambda1_hat, lambda1_se) = estimate_lambda1(samples)?;
    Ok(LawEstimates {
        lambda1_hat,
        lambda1_se,
        phi_hat: estimate_phi(samples)?,
        n: samples[0].n,
        count: samples.len(),
        hyperbolic_fraction: hyperbolic_fraction(samples)?,
    })
}

/// Fraction of samples classified hyperbolic.
pub fn hyperbolic_fraction(samples: &[WalkSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples".into()));
    }
    Ok(samples.iter().filter(|s| s.is_hyperbolic()).count() as f64 / samples.len() as f64)
}

/// Error function, Abramowitz & Stegun 7.1.26 (absolute error ≤ 1.5e-7).
pub fn erf(x: f64) -> f64 {
    const P: f64 = 0.327_591_1;
    const A: [f64; 5] = [0.254_829_592, -0.284_496_736, 1.421_413_741, -1.453_152_027, 1.061_405_429];
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (A[0] + t * (A[1] + t * (A[2] + t * (A[3] + t * A[4]))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `values` and
/// `Normal(0, variance)`.
pub fn ks_normal(values: &[f64], variance: f64) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::DegenerateInput(format!("variance {variance} must be positive")));
    }
    if values.is_empty() {
        return Err(Error::DegenerateInput("no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = variance.sqrt();
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, x)| {
        let f = normal_cdf(x / sd);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

/// KS statistic of the CLT-normalized batch.
///
/// With `use_geom = false`: `(log_norm - λ₁n)/√n` against `Normal(0, Φ)`.
/// With `use_geom = true`: hyperbolic samples only,
/// `(geom - 2λ₁n)/√n` against `Normal(0, 4Φ)`.
pub fn clt_ks(samples: &[WalkSample], lambda1: f64, phi: f64, use_geom: bool) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::DegenerateInput(format!("phi {phi} must be positive")));
    }
    let values: Vec<f64> = if use_geom {
        samples
            .iter()
            .filter_map(|s| s.geom_length.map(|l| (l - 2.0 * lambda1 * s.n as f64) / (s.n as f64).sqrt()))
            .collect()
    } else {
        usable(samples)
            .map(|s| (s.log_norm - lambda1 * s.n as f64) / (s.n as f64).sqrt())
            .collect()
    };
    if values.is_empty() {
        return Err(Error::DegenerateInput("no qualifying samples".into()));
    }
    ks_normal(&values, if use_geom { 4.0 * phi } else { phi })
}

/// Large-deviation frequency at one walk length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdpPoint {
    pub n: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub deviations: usize,
    /// Observed frequency, or the rule-of-three bound `3/N` when censored.
    pub p_hat: f64,
    /// `p_hat^{1/n}`.
    pub rate: f64,
    pub censored: bool,
}

impl LdpPoint {
    /// Binomial standard error of the frequency, floored at one count.
    pub fn std_error(&self) -> f64 {
        let p = (self.deviations.max(1) as f64) / self.count as f64;
        (p * (1.0 - p) / self.count as f64).sqrt()
    }
}

/// Frequencies of `|log_norm - λ₁n| ≥ n·t0` for batches at distinct `n`.
pub fn ldp_estimate(batches: &[(usize, &[WalkSample])], lambda1: f64, t0: f64) -> Result<Vec<LdpPoint>> {
    if !(t0 > 0.0) {
        return Err(Error::DegenerateInput(format!("t0 {t0} must be positive")));
    }
    if batches.is_empty() || batches.iter().any(|(_, s)| s.is_empty()) {
        return Err(Error::EmptyInput("empty LDP batch".into()));
    }
    let mut ns: Vec<usize> = batches.iter().map(|(n, _)| *n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::DegenerateInput("LDP needs batches at three or more walk lengths".into()));
    }
    Ok(batches
        .iter()
        .map(|&(n, samples)| {
            let threshold = n as f64 * t0;
            let deviations = usable(samples)
                .filter(|s| (s.log_norm - lambda1 * n as f64).abs() >= threshold)
                .count();
            let count = samples.len();
            let censored = deviations == 0;
            let p_hat = if censored { 3.0 / count as f64 } else { deviations as f64 / count as f64 };
            LdpPoint { n, count, deviations, p_hat, rate: p_hat.powf(1.0 / n as f64), censored }
        })
        .collect())
}

/// Local-limit window: empirical `√n·P(log_norm - λ₁n ∈ [a1, a2])` and the
/// Gaussian prediction `(a2 - a1)/√(2πΦ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LltWindow {
    pub a1: f64,
    pub a2: f64,
    pub empirical: f64,
    pub theoretical: f64,
}

pub fn llt_window(samples: &[WalkSample], lambda1: f64, phi: f64, a1: f64, a2: f64) -> Result<LltWindow> {
    if !(a1 < a2) {
        return Err(Error::DegenerateInput(format!("window [{a1}, {a2}] is empty")));
    }
    if !(phi > 0.0) {
        return Err(Error::DegenerateInput(format!("phi {phi} must be positive")));
    }
    let (n, _) = batch_log_norms(samples)?;
    let hits = usable(samples)
        .filter(|s| {
            let dev = s.log_norm - lambda1 * n as f64;
            a1 <= dev && dev <= a2
        })
        .count();
    let p_hat = hits as f64 / samples.len() as f64;
    Ok(LltWindow {
        a1,
        a2,
        empirical: (n as f64).sqrt() * p_hat,
        theoretical: (a2 - a1) / (2.0 * std::f64::consts::PI * phi).sqrt(),
    })
}

/// `(log_norm(n) - λ₁n)/√(2Φ n log log n)` at every checkpoint with `n ≥ 3`.
pub fn lil_normalize(traj: &PathTrajectory, lambda1: f64, phi: f64) -> Result<Vec<(usize, f64)>> {
    if !(phi > 0.0) {
        return Err(Error::DegenerateInput(format!("phi {phi} must be positive")));
    }
    Ok(traj
        .checkpoints
        .iter()
        .filter(|c| c.n >= 3)
        .map(|c| {
            let n = c.n as f64;
            (c.n, (c.log_norm - lambda1 * n) / (2.0 * phi * n * n.ln().ln()).sqrt())
        })
        .collect())
}

/// Largest `|value|` over checkpoints with `lo ≤ n ≤ hi`.
pub fn running_max_abs(values: &[(usize, f64)], lo: usize, hi: usize) -> Option<f64> {
    values
        .iter()
        .filter(|(n, _)| (lo..=hi).contains(n))
        .map(|(_, v)| v.abs())
        .reduce(f64::max)
}

/// One group element of the exact `n`-step law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    #[serde(serialize_with = "ser_f17")]
    pub log_norm: f64,
    pub trace_sign: i8,
    #[serde(serialize_with = "ser_f17")]
    pub log_abs_trace: f64,
    #[serde(serialize_with = "ser_class")]
    pub class: ElementClass,
    #[serde(serialize_with = "ser_f17")]
    pub probability: f64,
}

fn ser_f17<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    F17(*x).serialize(s)
}

fn ser_class<S: serde::Serializer>(c: &ElementClass, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_char(c.code())
}

/// Law of `g_n ⋯ g_1` by exhaustive enumeration, one atom per distinct
/// PSL₂ element.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub n: usize,
    pub atoms: Vec<Atom>,
}

impl ExactDistribution {
    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.probability).sum()
    }

    /// `E[f(atom)]`.
    pub fn expect(&self, f: impl Fn(&Atom) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.probability * f(a)).sum()
    }

    pub fn mean_log_norm(&self) -> f64 {
        self.expect(|a| a.log_norm)
    }

    /// Population variance of `log_norm`.
    pub fn variance_log_norm(&self) -> f64 {
        let m = self.mean_log_norm();
        self.expect(|a| (a.log_norm - m).powi(2))
    }

    /// Fourth central moment of `log_norm`.
    pub fn central_moment4(&self) -> f64 {
        let m = self.mean_log_norm();
        self.expect(|a| (a.log_norm - m).powi(4))
    }

    pub fn hyperbolic_probability(&self) -> f64 {
        self.expect(|a| if a.class == ElementClass::Hyperbolic { 1.0 } else { 0.0 })
    }
}

fn element_key(m: &Mat2) -> [i128; 4] {
    let mut key = m.entries().map(|x| (x * 1e9).round() as i128);
    if key.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        key.iter_mut().for_each(|x| *x = -*x);
    }
    key
}

/// Enumerates all `kⁿ` words, weighting each by the product of its step
/// probabilities.
pub fn exact_distribution(gens: &GeneratorSet, law: &StepLaw, n: usize) -> Result<ExactDistribution> {
    if law.len() != gens.len() {
        return Err(Error::ValidationError("step law does not match generators".into()));
    }
    let mats = gens.scaled()?;
    let mut index: HashMap<[i128; 4], usize> = HashMap::new();
    let mut atoms: Vec<Atom> = Vec::new();
    for word in enumerate_words(gens.len(), n)? {
        let p: f64 = word.letters().iter().map(|&j| law.weights()[j]).product();
        let g = evaluate_scaled(&word, &mats)?;
        let key = element_key(&g.to_mat());
        if let Some(&i) = index.get(&key) {
            atoms[i].probability += p;
            continue;
        }
        let (trace_sign, log_abs_trace) = g.signed_log_trace();
        index.insert(key, atoms.len());
        atoms.push(Atom {
            log_norm: g.log_op_norm()?,
            trace_sign,
            log_abs_trace,
            class: g.classify(CLASSIFY_TOL),
            probability: p,
        });
    }
    Ok(ExactDistribution { n, atoms })
}

/// Per-run summary written as JSON.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub group: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub seed: u64,
    pub lambda1_hat: F17,
    pub lambda1_se: F17,
    pub phi_hat: F17,
    pub hyperbolic_fraction: F17,
    pub ks_log_norm: Option<F17>,
    pub ks_geom: Option<F17>,
    pub ldp: Vec<LdpJson>,
    pub llt: Option<LltJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LdpJson {
    pub n: usize,
    #[serde(rename = "N")]
    pub count: usize,
    pub t0: F17,
    pub deviations: usize,
    pub p_hat: F17,
    pub rate: F17,
    pub censored: bool,
}

impl LdpJson {
    pub fn new(p: &LdpPoint, t0: f64) -> Self {
        Self {
            n: p.n,
            count: p.count,
            t0: F17(t0),
            deviations: p.deviations,
            p_hat: F17(p.p_hat),
            rate: F17(p.rate),
            censored: p.censored,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LltJson {
    pub a1: F17,
    pub a2: F17,
    pub empirical: F17,
    pub theoretical: F17,
}

impl From<LltWindow> for LltJson {
    fn from(w: LltWindow) -> Self {
        Self { a1: F17(w.a1), a2: F17(w.a2), empirical: F17(w.empirical), theoretical: F17(w.theoretical) }
    }
}

impl Summary {
    pub fn new(group: &str, seed: u64, est: &LawEstimates) -> Self {
        Self {
            group: group.to_string(),
            n: est.n,
            count: est.count,
            seed,
            lambda1_hat: F17(est.lambda1_hat),
            lambda1_se: F17(est.lambda1_se),
            phi_hat: F17(est.phi_hat),
            hyperbolic_fraction: F17(est.hyperbolic_fraction),
            ks_log_norm: None,
            ks_geom: None,
            ldp: Vec::new(),
            llt: None,
        }
    }
}
