//! Power-form class-K∞ functions `s ↦ c·s^p`.
//!
//! Every gain produced by quadratic simulation functions is of this form, and
//! the family is closed under composition and inversion, so cycle conditions
//! can be decided exactly on the coefficients.

use std::fmt;

use crate::error::{Error, Result};

/// Default tolerance separating "strictly below identity" from "on it".
pub const STRICT_TOL: f64 = 1e-9;

/// `c·s^p` with `c ≥ 0`, `p > 0`; `c = 0` is the zero function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFn {
    pub c: f64,
    pub p: f64,
}

/// Outcome of comparing a gain with the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdCompare {
    Below,
    Boundary,
    NotBelow,
}

/// Anything that evaluates like a scalar gain.
pub trait Gain {
    fn eval(&self, s: f64) -> f64;
}

impl PowerFn {
    pub fn new(c: f64, p: f64) -> Self {
        assert!(c >= 0.0 && c.is_finite(), "coefficient must be finite and nonnegative, got {c}");
        assert!(p > 0.0 && p.is_finite(), "exponent must be positive, got {p}");
        PowerFn { c, p }
    }

    pub const fn identity() -> Self {
        PowerFn { c: 1.0, p: 1.0 }
    }

    pub const fn zero() -> Self {
        PowerFn { c: 0.0, p: 1.0 }
    }

    pub fn linear(c: f64) -> Self {
        Self::new(c, 1.0)
    }

    pub fn quadratic(c: f64) -> Self {
        Self::new(c, 2.0)
    }

    pub fn is_zero(&self) -> bool {
        self.c == 0.0
    }

    pub fn is_linear(&self) -> bool {
        self.p == 1.0 || self.is_zero()
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.c == 0.0 || s == 0.0 {
            0.0
        } else {
            self.c * s.powf(self.p)
        }
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &PowerFn) -> PowerFn {
        compose(self, g)
    }

    pub fn inverse(&self) -> Result<PowerFn> {
        inverse(self)
    }

    /// `k·f` for a nonnegative scalar `k`.
    pub fn scale(&self, k: f64) -> PowerFn {
        if k == 0.0 || self.is_zero() {
            return PowerFn::zero();
        }
        PowerFn::new(self.c * k, self.p)
    }

    pub fn less_than_identity(&self, strict_tol: f64) -> IdCompare {
        less_than_identity(self, strict_tol)
    }
}

impl Gain for PowerFn {
    fn eval(&self, s: f64) -> f64 {
        PowerFn::eval(self, s)
    }
}

impl fmt::Display for PowerFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "0")
        } else {
            write!(f, "{}*s^{}", self.c, self.p)
        }
    }
}

/// `(f ∘ g)(s) = c_f·(c_g·s^{p_g})^{p_f}`; zero absorbs.
pub fn compose(f: &PowerFn, g: &PowerFn) -> PowerFn {
    if f.is_zero() || g.is_zero() {
        return PowerFn::zero();
    }
    PowerFn::new(f.c * g.c.powf(f.p), f.p * g.p)
}

pub fn inverse(f: &PowerFn) -> Result<PowerFn> {
    if f.is_zero() {
        return Err(Error::NonInvertible);
    }
    Ok(PowerFn::new((1.0 / f.c).powf(1.0 / f.p), 1.0 / f.p))
}

/// Decide `f(s) < s` for all `s > 0`.
///
/// A power function with `p ≠ 1` crosses the identity somewhere, so only
/// linear gains can be strictly below it.
pub fn less_than_identity(f: &PowerFn, strict_tol: f64) -> IdCompare {
    if f.is_zero() {
        return IdCompare::Below;
    }
    if f.p != 1.0 {
        return IdCompare::NotBelow;
    }
    if (f.c - 1.0).abs() <= strict_tol {
        IdCompare::Boundary
    } else if f.c < 1.0 {
        IdCompare::Below
    } else {
        IdCompare::NotBelow
    }
}

/// A power function that dominates some target, possibly only on `[0, s_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub f: PowerFn,
    pub exact: bool,
    /// Upper end of the validity interval; infinite when `exact`.
    pub s_max: f64,
}

/// `Id + f` and `Id + f⁻¹`.
///
/// Exact when `f` is linear. Otherwise the sum of two different powers is
/// bounded on `[0, s_max]` by the power with the smaller exponent after
/// absorbing the other term at `s_max`.
pub fn plus_identity_variants(f: &PowerFn, s_max: f64) -> Result<(Envelope, Envelope)> {
    let finv = inverse(f)?;
    Ok((id_plus(f, s_max), id_plus(&finv, s_max)))
}

fn id_plus(f: &PowerFn, s_max: f64) -> Envelope {
    if f.is_zero() {
        return Envelope { f: PowerFn::identity(), exact: true, s_max: f64::INFINITY };
    }
    if f.p == 1.0 {
        return Envelope { f: PowerFn::linear(1.0 + f.c), exact: true, s_max: f64::INFINITY };
    }
    assert!(s_max > 0.0 && s_max.is_finite(), "envelope needs a finite interval");
    let g = if f.p < 1.0 {
        // s ≤ s_max^{1-p}·s^p on [0, s_max]
        PowerFn::new(s_max.powf(1.0 - f.p) + f.c, f.p)
    } else {
        // c·s^p ≤ c·s_max^{p-1}·s on [0, s_max]
        PowerFn::linear(1.0 + f.c * s_max.powf(f.p - 1.0))
    };
    Envelope { f: g, exact: false, s_max }
}

/// `(λ − Id)⁻¹` for a linear `λ` with slope above one.
pub fn minus_identity_inverse(lambda: &PowerFn) -> Result<PowerFn> {
    if lambda.p != 1.0 || lambda.c <= 1.0 {
        return Err(Error::Precondition(format!("lambda - Id must be K-infinity, got {lambda}")));
    }
    Ok(PowerFn::linear(1.0 / (lambda.c - 1.0)))
}

/// `Id − f` for a linear `f` with slope below one.
pub fn identity_minus(f: &PowerFn) -> Result<PowerFn> {
    if f.is_zero() {
        return Ok(PowerFn::identity());
    }
    if f.p != 1.0 || f.c >= 1.0 {
        return Err(Error::Precondition(format!("Id - f must be K-infinity, got f = {f}")));
    }
    Ok(PowerFn::linear(1.0 - f.c))
}

/// Pointwise maximum of power functions.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxOf(pub Vec<PowerFn>);

/// Pointwise minimum of power functions.
#[derive(Clone, Debug, PartialEq)]
pub struct MinOf(pub Vec<PowerFn>);

impl Gain for MaxOf {
    fn eval(&self, s: f64) -> f64 {
        self.0.iter().map(|f| f.eval(s)).fold(0.0, f64::max)
    }
}

impl Gain for MinOf {
    fn eval(&self, s: f64) -> f64 {
        self.0.iter().map(|f| f.eval(s)).fold(f64::INFINITY, f64::min)
    }
}

impl MaxOf {
    /// Collapse to a single power function when all nonzero terms share an exponent.
    pub fn as_power(&self) -> Option<PowerFn> {
        collapse(&self.0, f64::max)
    }
}

impl MinOf {
    pub fn as_power(&self) -> Option<PowerFn> {
        if self.0.iter().any(|f| f.is_zero()) {
            return Some(PowerFn::zero());
        }
        collapse(&self.0, f64::min)
    }
}

fn collapse(terms: &[PowerFn], pick: fn(f64, f64) -> f64) -> Option<PowerFn> {
    let nz: Vec<&PowerFn> = terms.iter().filter(|f| !f.is_zero()).collect();
    let Some(first) = nz.first() else {
        return Some(PowerFn::zero());
    };
    if nz.iter().any(|f| f.p != first.p) {
        return None;
    }
    let c = nz.iter().map(|f| f.c).reduce(pick).unwrap();
    Some(PowerFn::new(c, first.p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_example() {
        let f = PowerFn::quadratic(0.2);
        let g = PowerFn::new(5f64.sqrt(), 0.5);
        let h = compose(&f, &g);
        assert!((h.c - 1.0).abs() < 1e-12 && h.p == 1.0);
        for k in 1..=10 {
            let s = 0.37 * k as f64;
            assert!((h.eval(s) - f.eval(g.eval(s))).abs() < 1e-12 * s.max(1.0));
        }
    }

    #[test]
    fn compose_identity_and_zero() {
        let f = PowerFn::new(0.3, 1.7);
        assert_eq!(compose(&f, &PowerFn::identity()), f);
        assert!(compose(&PowerFn::zero(), &f).is_zero());
        assert!(compose(&f, &PowerFn::zero()).is_zero());
    }

    #[test]
    fn inverse_examples() {
        let inv = inverse(&PowerFn::quadratic(0.2)).unwrap();
        assert!((inv.c - 5f64.sqrt()).abs() < 1e-12 && inv.p == 0.5);
        assert_eq!(inverse(&PowerFn::identity()).unwrap(), PowerFn::identity());
        assert!(matches!(inverse(&PowerFn::zero()), Err(Error::NonInvertible)));
        // √(5s) undoes s²/5
        let a = PowerFn::quadratic(0.2);
        let ai = inverse(&a).unwrap();
        assert!((ai.eval(3.2) - (5.0 * 3.2f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_comparison() {
        assert_eq!(less_than_identity(&PowerFn::linear(0.99), STRICT_TOL), IdCompare::Below);
        assert_eq!(less_than_identity(&PowerFn::identity(), STRICT_TOL), IdCompare::Boundary);
        assert_eq!(less_than_identity(&PowerFn::new(0.5, 2.0), STRICT_TOL), IdCompare::NotBelow);
        assert_eq!(less_than_identity(&PowerFn::zero(), STRICT_TOL), IdCompare::Below);
        assert_eq!(less_than_identity(&PowerFn::linear(1.5), STRICT_TOL), IdCompare::NotBelow);
    }

    #[test]
    fn plus_identity_linear() {
        let (a, b) = plus_identity_variants(&PowerFn::linear(0.1), 1.0).unwrap();
        assert!(a.exact && (a.f.c - 1.1).abs() < 1e-15);
        assert!((b.f.c - 11.0).abs() < 1e-12);
        let (a, b) = plus_identity_variants(&PowerFn::identity(), 1.0).unwrap();
        assert_eq!((a.f, b.f), (PowerFn::linear(2.0), PowerFn::linear(2.0)));
        assert_eq!(minus_identity_inverse(&PowerFn::linear(2.0)).unwrap(), PowerFn::identity());
    }

    #[test]
    fn plus_identity_envelope_dominates() {
        for f in [PowerFn::new(0.7, 0.5), PowerFn::new(0.3, 2.0)] {
            let (e, _) = plus_identity_variants(&f, 4.0).unwrap();
            assert!(!e.exact);
            for k in 0..=400 {
                let s = 4.0 * k as f64 / 400.0;
                assert!(e.f.eval(s) + 1e-12 >= s + f.eval(s), "{f} at {s}");
            }
        }
    }

    #[test]
    fn max_min_collapse() {
        let m = MaxOf(vec![PowerFn::linear(0.5), PowerFn::linear(0.9), PowerFn::zero()]);
        assert_eq!(m.as_power(), Some(PowerFn::linear(0.9)));
        let mixed = MaxOf(vec![PowerFn::linear(0.5), PowerFn::quadratic(0.9)]);
        assert_eq!(mixed.as_power(), None);
        assert_eq!(mixed.eval(2.0), 3.6);
        let n = MinOf(vec![PowerFn::quadratic(0.2), PowerFn::quadratic(0.04)]);
        assert_eq!(n.as_power(), Some(PowerFn::quadratic(0.04)));
    }
}
