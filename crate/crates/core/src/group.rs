//! Generator sets for Fuchsian groups and the random-walk hypothesis check.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::F17;
use crate::linalg2::{projective_distance, ElementClass, Mat2, ScaledMat, CLASSIFY_TOL};
use crate::words::{enumerate_words, evaluate, Word};

/// Determinant and inverse-pairing tolerance, relative to the size of the
/// terms entering the computation.
pub const MATRIX_TOL: f64 = 1e-9;

/// Minimum angular separation of fixed directions in the irreducibility
/// certificate.
pub const DIRECTION_SEPARATION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Provenance {
    Pants { l1: f64, l2: f64, l3: f64 },
    Sanov,
    Custom,
}

/// Named SL₂(ℝ) generators with an optional inverse pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    names: Vec<String>,
    mats: Vec<Mat2>,
    inverses: Option<Vec<Option<usize>>>,
    provenance: Provenance,
}

impl GeneratorSet {
    /// Builds and validates a generator set. `inverse_pairs` lists index pairs
    /// `(i, j)` with `mats[j] = mats[i]⁻¹`.
    pub fn new(
        names: Vec<String>,
        mats: Vec<Mat2>,
        inverse_pairs: Option<&[(usize, usize)]>,
        provenance: Provenance,
    ) -> Result<Self> {
        let k = mats.len();
        if k == 0 {
            return Err(Error::ValidationError("generator set is empty".into()));
        }
        if names.len() != k {
            return Err(Error::ValidationError(format!("{} names for {} matrices", names.len(), k)));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::ValidationError(format!("invalid generator name {name:?}")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::ValidationError(format!("duplicate generator name {name:?}")));
            }
        }
        for (name, m) in names.iter().zip(&mats) {
            if !m.is_finite() {
                return Err(Error::ValidationError(format!("{name}: non-finite entries")));
            }
            let scale = (m.a * m.d).abs().max((m.b * m.c).abs()).max(1.0);
            if (m.det() - 1.0).abs() > MATRIX_TOL * scale {
                return Err(Error::ValidationError(format!("{name}: determinant {} is not 1", m.det())));
            }
        }
        let inverses = match inverse_pairs {
            None => None,
            Some(pairs) => {
                let mut inv: Vec<Option<usize>> = vec![None; k];
                for &(i, j) in pairs {
                    if i >= k || j >= k {
                        return Err(Error::ValidationError(format!("inverse pair ({i}, {j}) out of range")));
                    }
                    for (x, y) in [(i, j), (j, i)] {
                        match inv[x] {
                            Some(prev) if prev != y => {
                                return Err(Error::ValidationError(format!(
                                    "{} paired with both {} and {}",
                                    names[x], names[prev], names[y]
                                )))
                            }
                            _ => inv[x] = Some(y),
                        }
                    }
                    let p = mats[i] * mats[j];
                    let scale = mats[i].max_abs() * mats[j].max_abs();
                    if p.max_abs_diff(&Mat2::IDENTITY) > MATRIX_TOL * scale.max(1.0) {
                        return Err(Error::ValidationError(format!(
                            "{} and {} are not inverse",
                            names[i], names[j]
                        )));
                    }
                }
                Some(inv)
            }
        };
        Ok(Self { names, mats, inverses, provenance })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mats(&self) -> &[Mat2] {
        &self.mats
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn has_pairing(&self) -> bool {
        self.inverses.is_some()
    }

    /// Index of the inverse of generator `i`, if paired.
    pub fn inverse_of(&self, i: usize) -> Option<usize> {
        self.inverses.as_ref().and_then(|inv| inv[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Inverse pairs `(i, j)` with `i <= j`.
    pub fn inverse_pairs(&self) -> Vec<(usize, usize)> {
        match &self.inverses {
            None => Vec::new(),
            Some(inv) => inv
                .iter()
                .enumerate()
                .filter_map(|(i, j)| j.filter(|&j| i <= j).map(|j| (i, j)))
                .collect(),
        }
    }

    /// Whether generators are laid out as a free basis `x_0..x_r` followed by
    /// their inverses, the alphabet convention of [`crate::words::sample_reduced`].
    pub fn free_rank(&self) -> Option<usize> {
        let k = self.len();
        if !k.is_multiple_of(2) {
            return None;
        }
        let r = k / 2;
        (0..k)
            .all(|i| self.inverse_of(i) == Some((i + r) % k))
            .then_some(r)
    }

    pub fn scaled(&self) -> Result<Vec<ScaledMat>> {
        self.mats.iter().map(|m| ScaledMat::from_mat(*m)).collect()
    }

    /// Serializes to the group config JSON.
    pub fn to_json(&self) -> String {
        let config = ConfigOut {
            generators: self
                .names
                .iter()
                .zip(&self.mats)
                .map(|(name, m)| GeneratorOut {
                    name,
                    matrix: [[F17(m.a), F17(m.b)], [F17(m.c), F17(m.d)]],
                })
                .collect(),
            inverse_pairs: self.inverses.as_ref().map(|_| self.inverse_pairs()),
        };
        serde_json::to_string_pretty(&config).expect("config serializes")
    }
}

#[derive(Serialize)]
struct ConfigOut<'a> {
    generators: Vec<GeneratorOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inverse_pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Serialize)]
struct GeneratorOut<'a> {
    name: &'a str,
    matrix: [[F17; 2]; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigIn {
    generators: Vec<GeneratorIn>,
    #[serde(default)]
    inverse_pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorIn {
    name: String,
    matrix: [[f64; 2]; 2],
}

/// Parses a group config:
/// `{"generators":[{"name":..,"matrix":[[a,b],[c,d]]},..], "inverse_pairs":[[i,j],..]}`.
pub fn load(config: &[u8]) -> Result<GeneratorSet> {
    let parsed: ConfigIn = serde_json::from_slice(config).map_err(|e| Error::ParseError(e.to_string()))?;
    let (names, mats) = parsed
        .generators
        .into_iter()
        .map(|g| (g.name, Mat2::from_rows(g.matrix)))
        .unzip();
    GeneratorSet::new(names, mats, parsed.inverse_pairs.as_deref(), Provenance::Custom)
}

fn names_with_inverses() -> Vec<String> {
    ["X", "Y", "X^-1", "Y^-1"].iter().map(|s| s.to_string()).collect()
}

/// The free group generated by `[[1,2],[0,1]]` and `[[1,0],[2,1]]`, with
/// inverses, in the order `X, Y, X^-1, Y^-1`.
pub fn sanov() -> GeneratorSet {
    let x = Mat2::new(1.0, 2.0, 0.0, 1.0);
    let y = Mat2::new(1.0, 0.0, 2.0, 1.0);
    GeneratorSet::new(
        names_with_inverses(),
        vec![x, y, x.adjugate(), y.adjugate()],
        Some(&[(0, 2), (1, 3)]),
        Provenance::Sanov,
    )
    .expect("Sanov generators are valid")
}

/// Pair of pants with boundary geodesics of lengths `l1, l2, l3`.
///
/// `X = diag(e^{l1/2}, e^{-l1/2})` and `Y = [[a, 1], [ad-1, d]]` where
/// `tr Y = 2cosh(l2/2)` and `tr XY = -2cosh(l3/2)`.
pub fn pants(l1: f64, l2: f64, l3: f64, include_inverses: bool) -> Result<GeneratorSet> {
    for l in [l1, l2, l3] {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::DegenerateInput(format!("boundary length {l} must be positive and finite")));
        }
    }
    let t2 = 2.0 * (0.5 * l2).cosh();
    let t3 = 2.0 * (0.5 * l3).cosh();
    let e = (0.5 * l1).exp();
    let e_inv = (-0.5 * l1).exp();
    if !(t2.is_finite() && t3.is_finite() && e.is_finite()) {
        return Err(Error::NumericFailure("boundary length too large".into()));
    }
    // a + d = t2 and e·a + d/e = -t3
    let gap = e - e_inv;
    if gap == 0.0 {
        return Err(Error::DegenerateInput("singular trace system".into()));
    }
    let a = (-t3 - e_inv * t2) / gap;
    let d = t2 - a;
    let x = Mat2::diag(e, e_inv);
    let y = Mat2::new(a, 1.0, a * d - 1.0, d);
    let provenance = Provenance::Pants { l1, l2, l3 };
    if include_inverses {
        GeneratorSet::new(
            names_with_inverses(),
            vec![x, y, Mat2::diag(e_inv, e), y.adjugate()],
            Some(&[(0, 2), (1, 3)]),
            provenance,
        )
    } else {
        GeneratorSet::new(vec!["X".into(), "Y".into()], vec![x, y], None, provenance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Certificate {
    Verified,
    Inconclusive,
}

/// Outcome of the hypothesis certificate search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub moment_ok: bool,
    pub unbounded: Certificate,
    pub strongly_irreducible: Certificate,
    pub witness_words: Vec<Word>,
    pub search_depth: usize,
}

impl HypothesisReport {
    pub fn all_verified(&self) -> bool {
        self.moment_ok
            && self.unbounded == Certificate::Verified
            && self.strongly_irreducible == Certificate::Verified
    }
}

/// Searches products of at most `search_depth` generators for a hyperbolic
/// element (unboundedness) and for two hyperbolic elements with four
/// distinct fixed directions (strong irreducibility: a finite invariant
/// union of lines would have to lie in both fixed sets).
pub fn validate(gens: &GeneratorSet, search_depth: usize) -> HypothesisReport {
    let depth = search_depth.max(1);
    let mut hyperbolic: Vec<(Word, (f64, f64))> = Vec::new();
    let mut irreducible: Option<(Word, Word)> = None;

    'search: for n in 1..=depth {
        let Ok(words) = enumerate_words(gens.len(), n) else { break };
        for w in words {
            let Ok(g) = evaluate(&w, gens) else { continue };
            if g.classify(CLASSIFY_TOL) != ElementClass::Hyperbolic {
                continue;
            }
            let Some(dirs) = g.fixed_directions() else { continue };
            if let Some((other, _)) = hyperbolic.iter().find(|(_, o)| separated(dirs, *o)) {
                irreducible = Some((other.clone(), w));
                break 'search;
            }
            hyperbolic.push((w, dirs));
        }
    }

    let (unbounded, strongly_irreducible, witness_words) = match (irreducible, hyperbolic.first()) {
        (Some((g, h)), _) => (Certificate::Verified, Certificate::Verified, vec![g, h]),
        (None, Some((g, _))) => (Certificate::Verified, Certificate::Inconclusive, vec![g.clone()]),
        (None, None) => (Certificate::Inconclusive, Certificate::Inconclusive, Vec::new()),
    };
    HypothesisReport { moment_ok: true, unbounded, strongly_irreducible, witness_words, search_depth: depth }
}

fn separated(x: (f64, f64), y: (f64, f64)) -> bool {
    let dirs = [x.0, x.1, y.0, y.1];
    (0..4).all(|i| (i + 1..4).all(|j| projective_distance(dirs[i], dirs[j]) > DIRECTION_SEPARATION))
}
