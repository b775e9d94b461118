//! Symbolic words over a generator set.
//!
//! A word lists generator indices in the order the steps are taken; the
//! group element is the product with the last letter leftmost,
//! `g = g_n ⋯ g_1`.

use std::collections::HashSet;

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::GeneratorSet;
use crate::linalg2::{Mat2, ScaledMat};
use crate::rng::SplitMix64;

/// Upper bound on `kⁿ` for exhaustive enumeration.
pub const ENUMERATION_LIMIT: u128 = 100_000_000;
/// Largest BFS radius accepted by [`algebraic_length`].
pub const MAX_BFS_RADIUS: usize = 12;
const BFS_FRONTIER_LIMIT: usize = 10_000_000;
const BFS_KEY_RESOLUTION: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Symbolic length: number of letters, with multiplicity.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    /// Space-joined generator names, the text form accepted by [`parse`].
    pub fn to_text(&self, gens: &GeneratorSet) -> String {
        let names = gens.names();
        self.0.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join(" ")
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

/// Parses whitespace-separated tokens `NAME` or `NAME^k` with `k ≠ 0`.
/// Negative powers expand to the paired inverse: `X^-2 Y` → `X⁻¹ X⁻¹ Y`.
pub fn parse(text: &str, gens: &GeneratorSet) -> Result<Word> {
    let mut letters = Vec::new();
    for token in text.split_whitespace() {
        if let Some(i) = gens.index_of(token) {
            letters.push(i);
            continue;
        }
        let (name, exp) = token
            .rsplit_once('^')
            .ok_or_else(|| Error::ParseError(format!("unknown generator {token:?}")))?;
        let i = gens
            .index_of(name)
            .ok_or_else(|| Error::ParseError(format!("unknown generator {name:?}")))?;
        let exp: i64 = exp
            .parse()
            .map_err(|_| Error::ParseError(format!("malformed exponent in {token:?}")))?;
        if exp == 0 {
            return Err(Error::ParseError(format!("zero exponent in {token:?}")));
        }
        let letter = if exp > 0 {
            i
        } else {
            gens.inverse_of(i).ok_or_else(|| Error::NoInverse(name.to_string()))?
        };
        letters.extend(std::iter::repeat_n(letter, exp.unsigned_abs() as usize));
    }
    Ok(Word(letters))
}

/// Product `g_n ⋯ g_1` of the word's matrices.
pub fn evaluate(w: &Word, gens: &GeneratorSet) -> Result<ScaledMat> {
    let mats = gens.scaled()?;
    evaluate_scaled(w, &mats)
}

pub(crate) fn evaluate_scaled(w: &Word, mats: &[ScaledMat]) -> Result<ScaledMat> {
    w.0.iter().try_fold(ScaledMat::identity(), |g, &i| mats[i].mul(&g))
}

fn pairing(gens: &GeneratorSet) -> Result<impl Fn(usize) -> Option<usize> + '_> {
    if !gens.has_pairing() {
        return Err(Error::NoInverse("generator set has no inverse pairing".into()));
    }
    Ok(move |i| gens.inverse_of(i))
}

/// Deletes adjacent inverse pairs until none remain.
pub fn free_reduce(w: &Word, gens: &GeneratorSet) -> Result<Word> {
    let inv = pairing(gens)?;
    Ok(Word(reduce_with(&w.0, inv)))
}

fn reduce_with(letters: &[usize], inv: impl Fn(usize) -> Option<usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(letters.len());
    for &x in letters {
        match out.last() {
            Some(&y) if inv(y) == Some(x) => {
                out.pop();
            }
            _ => out.push(x),
        }
    }
    out
}

/// Free reduction followed by stripping cancelling first/last letters.
pub fn cyclic_reduce(w: &Word, gens: &GeneratorSet) -> Result<Word> {
    let inv = pairing(gens)?;
    let reduced = reduce_with(&w.0, &inv);
    let (mut lo, mut hi) = (0, reduced.len());
    while hi - lo >= 2 && inv(reduced[lo]) == Some(reduced[hi - 1]) {
        lo += 1;
        hi -= 1;
    }
    Ok(Word(reduced[lo..hi].to_vec()))
}

/// Inverse of letter `i` in the standard free alphabet of rank `rank`:
/// letters `0..rank` are the basis and `rank..2·rank` their inverses.
#[inline]
pub fn free_inverse(rank: usize, i: usize) -> usize {
    (i + rank) % (2 * rank)
}

pub fn is_reduced(rank: usize, w: &Word) -> bool {
    w.0.windows(2).all(|p| p[1] != free_inverse(rank, p[0]))
}

pub fn is_cyclically_reduced(rank: usize, w: &Word) -> bool {
    is_reduced(rank, w)
        && match (w.0.first(), w.0.last()) {
            (Some(&a), Some(&b)) if w.len() > 1 => b != free_inverse(rank, a),
            _ => true,
        }
}

/// Number of reduced words of length `n` in the free group of rank `rank`:
/// `2r·(2r−1)^{n−1}`.
pub fn count_reduced(rank: usize, n: usize) -> BigUint {
    if n == 0 {
        return BigUint::from(1u32);
    }
    BigUint::from(2 * rank) * BigUint::from(2 * rank - 1).pow((n - 1) as u32)
}

/// Uniform reduced word of length `n` in the standard free alphabet.
pub fn sample_reduced(rank: usize, n: usize, rng: &mut SplitMix64) -> Word {
    assert!(rank >= 1, "rank must be positive");
    let k = 2 * rank;
    let mut letters = Vec::with_capacity(n);
    for step in 0..n {
        let letter = if step == 0 {
            rng.below(k)
        } else {
            let forbidden = free_inverse(rank, letters[step - 1]);
            let j = rng.below(k - 1);
            if j >= forbidden {
                j + 1
            } else {
                j
            }
        };
        letters.push(letter);
    }
    Word(letters)
}

/// Uniform cyclically reduced word, by rejection of reduced words whose
/// endpoints cancel. Returns the word and the number of draws used.
pub fn sample_cyclic_reduced_counted(rank: usize, n: usize, rng: &mut SplitMix64) -> (Word, u64) {
    let mut draws = 0;
    loop {
        draws += 1;
        let w = sample_reduced(rank, n, rng);
        if is_cyclically_reduced(rank, &w) {
            return (w, draws);
        }
    }
}

pub fn sample_cyclic_reduced(rank: usize, n: usize, rng: &mut SplitMix64) -> Word {
    sample_cyclic_reduced_counted(rank, n, rng).0
}

/// All `kⁿ` words of length `n` in lexicographic order.
pub fn enumerate_words(k: usize, n: usize) -> Result<WordIter> {
    let total = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!("{k}^{n} words exceed the enumeration limit")));
    }
    Ok(WordIter { k, current: vec![0; n], done: k == 0 && n > 0 })
}

pub struct WordIter {
    k: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let out = Word(self.current.clone());
        // Odometer increment from the last position.
        self.done = true;
        for pos in (0..self.current.len()).rev() {
            self.current[pos] += 1;
            if self.current[pos] < self.k {
                self.done = false;
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}

type MatKey = [i128; 4];

fn psl_key(m: &Mat2) -> MatKey {
    let mut key = m.entries().map(|x| (x / BFS_KEY_RESOLUTION).round() as i128);
    if key.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0) {
        key.iter_mut().for_each(|x| *x = -*x);
    }
    key
}

/// Least number of generators whose product is `±g`, by breadth-first
/// search of radius at most `max_radius`. `None` if not reached.
pub fn algebraic_length(g: &Mat2, gens: &GeneratorSet, max_radius: usize) -> Result<Option<usize>> {
    if max_radius > MAX_BFS_RADIUS {
        return Err(Error::TooLarge(format!("BFS radius {max_radius} exceeds {MAX_BFS_RADIUS}")));
    }
    if !g.is_finite() || (g.det() - 1.0).abs() > 1e-9 {
        return Err(Error::DomainError(format!("{g} is not in SL2(R)")));
    }
    let target = psl_key(g);
    let start = Mat2::IDENTITY;
    if psl_key(&start) == target {
        return Ok(Some(0));
    }
    let mut visited: HashSet<MatKey> = HashSet::from([psl_key(&start)]);
    let mut frontier = vec![start];
    for radius in 1..=max_radius {
        let mut next = Vec::new();
        for h in &frontier {
            for z in gens.mats() {
                let p = *h * *z;
                let key = psl_key(&p);
                if visited.insert(key) {
                    if key == target {
                        return Ok(Some(radius));
                    }
                    next.push(p);
                }
            }
        }
        if next.len() > BFS_FRONTIER_LIMIT {
            return Err(Error::TooLarge(format!("BFS frontier of {} elements", next.len())));
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(None)
}

/// Estimates `ℓ_S(wᵘ)/u` for `u = 1..=max_power`, stopping at the first
/// power whose length exceeds the BFS radius.
pub fn translation_length_profile(
    w: &Word,
    gens: &GeneratorSet,
    max_power: usize,
    max_radius: usize,
) -> Result<Vec<(usize, f64)>> {
    let g = evaluate(w, gens)?.to_mat();
    let mut power = Mat2::IDENTITY;
    let mut out = Vec::new();
    for u in 1..=max_power {
        power = g * power;
        match algebraic_length(&power, gens, max_radius)? {
            Some(len) => out.push((u, len as f64 / u as f64)),
            None => break,
        }
    }
    Ok(out)
}
