//! Overflow-safe SL₂(ℝ) arithmetic.
//!
//! A group element is stored as a [`ScaledMat`]: a 2×2 matrix `m` of unit
//! Frobenius norm together with a natural-log scale `s`, representing
//! `g = e^s · m`. Every product is renormalized, so walks of millions of
//! steps never overflow. Traces and norms are read off in the log domain.

use std::f64::consts::LN_2;
use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};

/// Default tolerance for [`ScaledMat::classify`].
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Above this `log|tr|` the geometric length is evaluated in the log domain.
const LOG_TRACE_SWITCH: f64 = 30.0;

/// Row-major 2×2 real matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Self::new(x, 0.0, 0.0, y)
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, f: f64) -> Self {
        Self::new(self.a * f, self.b * f, self.c * f, self.d * f)
    }

    /// Adjugate `[[d, -b], [-c, a]]`; the inverse for determinant one.
    pub fn adjugate(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    /// PSL₂ representative: sign flipped so the first nonzero entry in
    /// row-major order is positive.
    pub fn psl_canonical(&self) -> Self {
        match self.entries().iter().find(|x| **x != 0.0) {
            Some(x) if *x < 0.0 => self.scale(-1.0),
            _ => *self,
        }
    }

    /// Whether `self = ±other` entrywise within `tol`.
    pub fn psl_eq(&self, other: &Mat2, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol || self.max_abs_diff(&other.scale(-1.0)) <= tol
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Conjugacy type of an SL₂(ℝ) element, by `|tr|` against 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementClass {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl ElementClass {
    /// One-letter code used in CSV output.
    pub fn code(self) -> char {
        match self {
            ElementClass::Identity => 'I',
            ElementClass::Elliptic => 'E',
            ElementClass::Parabolic => 'P',
            ElementClass::Hyperbolic => 'H',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "I" => Some(ElementClass::Identity),
            "E" => Some(ElementClass::Elliptic),
            "P" => Some(ElementClass::Parabolic),
            "H" => Some(ElementClass::Hyperbolic),
            _ => None,
        }
    }
}

/// `g = e^s · m` with `frobenius(m) = 1` up to rounding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledMat {
    m: Mat2,
    s: f64,
}

impl ScaledMat {
    pub fn identity() -> Self {
        Self::from_parts(Mat2::IDENTITY, 0.0).expect("identity is finite")
    }

    pub fn from_mat(m: Mat2) -> Result<Self> {
        Self::from_parts(m, 0.0)
    }

    /// Normalizes `e^s · m` so the unit part has Frobenius norm one.
    pub fn from_parts(m: Mat2, s: f64) -> Result<Self> {
        if !m.is_finite() || !s.is_finite() {
            return Err(Error::NumericFailure(format!("non-finite matrix {m} (scale {s})")));
        }
        let f = m.frobenius();
        if f == 0.0 || !f.is_finite() {
            return Err(Error::NumericFailure(format!("cannot normalize {m}")));
        }
        Ok(Self { m: m.scale(1.0 / f), s: s + f.ln() })
    }

    pub fn unit(&self) -> &Mat2 {
        &self.m
    }

    pub fn log_scale(&self) -> f64 {
        self.s
    }

    /// `e^s · m` as a plain matrix. Overflows to infinity for large scales.
    pub fn to_mat(&self) -> Mat2 {
        self.m.scale(self.s.exp())
    }

    /// Product `self · other`, renormalized.
    #[inline]
    pub fn mul(&self, other: &ScaledMat) -> Result<ScaledMat> {
        let p = self.m * other.m;
        let f2 = p.a * p.a + p.b * p.b + p.c * p.c + p.d * p.d;
        if !f2.is_finite() || f2 == 0.0 {
            return Err(Error::NumericFailure(format!("product {p} cannot be normalized")));
        }
        let f = f2.sqrt();
        Ok(ScaledMat { m: p.scale(1.0 / f), s: self.s + other.s + f.ln() })
    }

    /// Inverse of a determinant-one element: `e^s · adj(m)`.
    pub fn inverse(&self) -> ScaledMat {
        ScaledMat { m: self.m.adjugate(), s: self.s }
    }

    /// `log σ_max(g)`, the log of the operator norm.
    pub fn log_op_norm(&self) -> Result<f64> {
        let f2 = self.m.a * self.m.a + self.m.b * self.m.b + self.m.c * self.m.c + self.m.d * self.m.d;
        let det = self.m.det().abs();
        // F⁴ - 4D² factored to keep precision when the unit part is near-orthogonal.
        let disc = ((f2 - 2.0 * det) * (f2 + 2.0 * det)).max(0.0);
        let sigma2 = 0.5 * (f2 + disc.sqrt());
        let out = self.s + 0.5 * sigma2.ln();
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NumericFailure(format!("log operator norm of {self:?}")))
        }
    }

    /// `(sign(tr g), log|tr g|)`; a traceless element gives `(0, -inf)`.
    pub fn signed_log_trace(&self) -> (i8, f64) {
        let t = self.m.trace();
        if t == 0.0 {
            (0, f64::NEG_INFINITY)
        } else {
            (if t > 0.0 { 1 } else { -1 }, self.s + t.abs().ln())
        }
    }

    /// Classification with `log|tr|` compared against `log 2 ± tol`.
    pub fn classify(&self, tol: f64) -> ElementClass {
        let (_, log_t) = self.signed_log_trace();
        if log_t > LN_2 + tol {
            ElementClass::Hyperbolic
        } else if log_t < LN_2 - tol {
            ElementClass::Elliptic
        } else if self.is_psl_identity(tol) {
            ElementClass::Identity
        } else {
            ElementClass::Parabolic
        }
    }

    fn is_psl_identity(&self, tol: f64) -> bool {
        // Unit part of ±I is ±I/√2, so the scale must be near log √2.
        if (self.s - 0.5 * LN_2).abs() > 1.0 {
            return false;
        }
        self.to_mat().psl_eq(&Mat2::IDENTITY, tol)
    }

    /// Translation length `2·arccosh(|tr g|/2)` of a hyperbolic element.
    pub fn geom_length(&self) -> Result<f64> {
        let class = self.classify(CLASSIFY_TOL);
        if class != ElementClass::Hyperbolic {
            return Err(Error::DomainError(format!("geometric length of a {class:?} element")));
        }
        let (_, log_t) = self.signed_log_trace();
        Ok(length_from_log_trace(log_t))
    }

    /// Attracting and repelling eigendirections of a hyperbolic element, as
    /// angles on the projective line `[0, π)`.
    pub fn fixed_directions(&self) -> Option<(f64, f64)> {
        if self.classify(CLASSIFY_TOL) != ElementClass::Hyperbolic {
            return None;
        }
        let m = &self.m;
        let t = m.trace();
        let det = m.det();
        let disc = t * t - 4.0 * det;
        if disc <= 0.0 {
            return None;
        }
        let big = 0.5 * (t + t.signum() * disc.sqrt());
        let small = det / big;
        Some((eigen_angle(m, big), eigen_angle(m, small)))
    }
}

/// `2·arccosh(T/2)` given `log T`, stable for huge traces.
pub fn length_from_log_trace(log_t: f64) -> f64 {
    if log_t <= LOG_TRACE_SWITCH {
        let half = 0.5 * log_t.exp();
        2.0 * (half + (half * half - 1.0).max(0.0).sqrt()).ln()
    } else {
        2.0 * (log_t - LN_2 + (1.0 + (1.0 - 4.0 * (-2.0 * log_t).exp()).sqrt()).ln())
    }
}

fn eigen_angle(m: &Mat2, lambda: f64) -> f64 {
    let v1 = (m.b, lambda - m.a);
    let v2 = (lambda - m.d, m.c);
    let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    y.atan2(x).rem_euclid(std::f64::consts::PI)
}

/// Distance between two lines through the origin given by their angles.
pub fn projective_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn sm(a: f64, b: f64, c: f64, d: f64) -> ScaledMat {
        ScaledMat::from_mat(Mat2::new(a, b, c, d)).unwrap()
    }

    #[test]
    fn identity_times_identity() {
        let i = ScaledMat::identity();
        let p = i.mul(&i).unwrap();
        assert!((p.log_scale() - 0.5 * LN_2).abs() < 1e-15);
        assert!(p.to_mat().max_abs_diff(&Mat2::IDENTITY) < 1e-12);
    }

    #[test]
    fn diagonal_square() {
        let x = sm(E, 0.0, 0.0, 1.0 / E);
        let p = x.mul(&x).unwrap().to_mat();
        assert!((p.a - E * E).abs() < 1e-12);
        assert!((p.d - 1.0 / (E * E)).abs() < 1e-12);
        assert_eq!(p.b, 0.0);
        assert_eq!(p.c, 0.0);
    }

    #[test]
    fn shear_product() {
        let p = sm(1.0, 2.0, 0.0, 1.0).mul(&sm(1.0, 0.0, 2.0, 1.0)).unwrap().to_mat();
        assert!(p.max_abs_diff(&Mat2::new(5.0, 2.0, 2.0, 1.0)) < 1e-12);
    }

    #[test]
    fn mul_rejects_non_finite() {
        let bad = ScaledMat { m: Mat2::new(f64::NAN, 0.0, 0.0, 1.0), s: 0.0 };
        assert!(matches!(bad.mul(&ScaledMat::identity()), Err(Error::NumericFailure(_))));
        assert!(ScaledMat::from_mat(Mat2::new(f64::INFINITY, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn log_op_norm_examples() {
        assert!(ScaledMat::identity().log_op_norm().unwrap().abs() < 1e-15);
        assert!((sm(E, 0.0, 0.0, 1.0 / E).log_op_norm().unwrap() - 1.0).abs() < 1e-15);
        let expected = 0.5 * (17.0 + 12.0 * 2f64.sqrt()).ln();
        let got = sm(5.0, 2.0, 2.0, 1.0).log_op_norm().unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 1.76275).abs() < 1e-5);
    }

    #[test]
    fn signed_log_trace_examples() {
        let (s, l) = ScaledMat::identity().signed_log_trace();
        assert_eq!(s, 1);
        assert!((l - LN_2).abs() < 1e-15);
        assert_eq!(sm(0.0, -1.0, 1.0, 0.0).signed_log_trace(), (0, f64::NEG_INFINITY));
        let (s, l) = sm(5.0, 2.0, 2.0, 1.0).signed_log_trace();
        assert_eq!(s, 1);
        assert!((l - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(sm(1.0, 1.0, 0.0, 1.0).classify(CLASSIFY_TOL), ElementClass::Parabolic);
        assert_eq!(sm(5.0, 2.0, 2.0, 1.0).classify(CLASSIFY_TOL), ElementClass::Hyperbolic);
        assert_eq!(sm(0.0, -1.0, 1.0, 0.0).classify(CLASSIFY_TOL), ElementClass::Elliptic);
        assert_eq!(ScaledMat::identity().classify(CLASSIFY_TOL), ElementClass::Identity);
        assert_eq!(sm(-1.0, 0.0, 0.0, -1.0).classify(CLASSIFY_TOL), ElementClass::Identity);
        assert_eq!(sm(-1.0, 3.0, 0.0, -1.0).classify(CLASSIFY_TOL), ElementClass::Parabolic);
    }

    #[test]
    fn geom_length_examples() {
        let g = sm(E, 0.0, 0.0, 1.0 / E).geom_length().unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        // trace 4
        let g = sm(2.0, 1.0, 3.0, 2.0).geom_length().unwrap();
        assert!((g - 2.0 * (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12);
        assert!((g - 2.63392).abs() < 1e-5);
        let h = sm(5.0, 2.0, 2.0, 1.0);
        let g = h.geom_length().unwrap();
        assert!((g - 2.0 * (3.0 + 2.0 * 2f64.sqrt()).ln()).abs() < 1e-12);
        assert!((g - 3.52549).abs() < 1e-5);
        assert!((g - 2.0 * h.log_op_norm().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn geom_length_rejects_non_hyperbolic() {
        assert!(matches!(sm(1.0, 1.0, 0.0, 1.0).geom_length(), Err(Error::DomainError(_))));
        assert!(matches!(sm(0.0, -1.0, 1.0, 0.0).geom_length(), Err(Error::DomainError(_))));
    }

    #[test]
    fn log_domain_length_branches_agree() {
        // Both branches evaluated near the switch point.
        let l = LOG_TRACE_SWITCH;
        let direct = 2.0 * (0.5 * l.exp()).acosh();
        assert!((length_from_log_trace(l) - direct).abs() < 1e-12);
        let above = length_from_log_trace(l + 1e-9);
        assert!((above - length_from_log_trace(l)).abs() < 1e-8);
        // Huge trace: arccosh(T/2) ≈ log T.
        assert!((length_from_log_trace(1e4) - 2e4).abs() < 1e-9);
    }

    #[test]
    fn huge_products_stay_finite() {
        let x = sm(E, 0.0, 0.0, 1.0 / E);
        let mut g = ScaledMat::identity();
        for _ in 0..5000 {
            g = x.mul(&g).unwrap();
        }
        assert!((g.log_op_norm().unwrap() - 5000.0).abs() < 1e-9);
        assert!((g.geom_length().unwrap() - 10000.0).abs() < 1e-9);
    }

    #[test]
    fn psl_canonical_sign() {
        assert_eq!(Mat2::new(-1.0, 2.0, 0.0, -1.0).psl_canonical(), Mat2::new(1.0, -2.0, 0.0, 1.0));
        assert_eq!(Mat2::new(0.0, -1.0, 1.0, 0.0).psl_canonical(), Mat2::new(0.0, 1.0, -1.0, 0.0));
    }

    #[test]
    fn fixed_directions_of_symmetric() {
        let (u, v) = sm(5.0, 2.0, 2.0, 1.0).fixed_directions().unwrap();
        // Eigenvectors (1, √2-1) and (1, -√2-1): orthogonal for symmetric matrices.
        assert!((u - (2f64.sqrt() - 1.0).atan()).abs() < 1e-12);
        assert!((projective_distance(u, v) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(sm(1.0, 1.0, 0.0, 1.0).fixed_directions().is_none());
    }

    /// Random SL₂ element with moderate entries: rotation · shear · diagonal.
    fn sl2_strategy(max_shear: f64) -> impl Strategy<Value = Mat2> {
        (0.0..std::f64::consts::TAU, -max_shear..max_shear, 0.5f64..2.0).prop_map(|(th, t, r)| {
            let rot = Mat2::new(th.cos(), -th.sin(), th.sin(), th.cos());
            rot * Mat2::new(1.0, t, 0.0, 1.0) * Mat2::diag(r, 1.0 / r)
        })
    }

    proptest! {
        #[test]
        fn det_preserved_at_small_scale(gens in prop::collection::vec(sl2_strategy(1.5), 1..=30)) {
            prop_assume!(gens.iter().all(|g| g.max_abs() <= 10.0));
            let mut g = ScaledMat::identity();
            for m in &gens {
                g = ScaledMat::from_mat(*m).unwrap().mul(&g).unwrap();
            }
            prop_assume!(g.log_scale() <= 9.0);
            prop_assert!((g.to_mat().det() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn scale_matches_direct_product(gens in prop::collection::vec(sl2_strategy(3.0), 1..=12)) {
            let mut g = ScaledMat::identity();
            let mut direct = Mat2::IDENTITY;
            for m in &gens {
                g = ScaledMat::from_mat(*m).unwrap().mul(&g).unwrap();
                direct = *m * direct;
            }
            let r = g.to_mat();
            prop_assert!(r.max_abs_diff(&direct) <= 1e-9 * direct.max_abs());
        }

        #[test]
        fn submultiplicative(x in sl2_strategy(5.0), y in sl2_strategy(5.0)) {
            let (x, y) = (ScaledMat::from_mat(x).unwrap(), ScaledMat::from_mat(y).unwrap());
            let xy = x.mul(&y).unwrap();
            prop_assert!(xy.log_op_norm().unwrap() <= x.log_op_norm().unwrap() + y.log_op_norm().unwrap() + 1e-9);
        }

        #[test]
        fn symmetric_length_is_twice_log_norm(a in -8.0f64..8.0, b in -8.0f64..8.0) {
            // g = hᵀh scaled to determinant one is symmetric positive definite.
            let h = Mat2::new(1.0, a, 0.0, 1.0) * Mat2::new(1.0, 0.0, b, 1.0);
            let g = ScaledMat::from_mat(h.transpose() * h).unwrap();
            prop_assume!(g.classify(CLASSIFY_TOL) == ElementClass::Hyperbolic);
            let diff = g.geom_length().unwrap() - 2.0 * g.log_op_norm().unwrap();
            prop_assert!(diff.abs() <= 1e-6);
        }

        #[test]
        fn length_conjugation_invariant(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, t in 0.5f64..4.0) {
            prop_assume!(a.abs() >= 0.2);
            let d = (1.0 + b * c) / a;
            prop_assume!(d.abs() <= 5.0);
            let h = ScaledMat::from_mat(Mat2::new(a, b, c, d)).unwrap();
            let g = ScaledMat::from_mat(Mat2::new(1.0, t, 0.0, 1.0) * Mat2::new(1.0, 0.0, t, 1.0)).unwrap();
            let conj = h.mul(&g).unwrap().mul(&h.inverse()).unwrap();
            let diff = conj.geom_length().unwrap() - g.geom_length().unwrap();
            prop_assert!(diff.abs() <= 1e-6);
        }
    }
}
