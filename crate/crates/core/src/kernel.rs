//! Radial kernel profiles, horizon and coefficient fields, and the splitting
//! `γ = κ + p^{2K}·χ(|s|<1)` of a singular, truncated profile into a part that is
//! smooth at the horizon edge and a polynomial part that is smooth inside it.
//!
//! Profiles are stored in their unit-normalized form and carry a separate
//! normalization constant `c`; every evaluation scales by it.

use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::quad;

/// Shape of the radial profile `γ(|s|)`, supported on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileFamily {
    /// `c / |s|`
    InverseS,
    /// `c (1 - |s|) / |s|`
    ConicalInverseS,
    /// `c (1/|s| - p^{2k}(|s|))`, which is `C^k` at `|s| = 1`.
    Regularized(u32),
    /// `c p^{2K}(|s|)`, the polynomial matched to `1/|s|` at the edge.
    PolynomialTruncated(u32),
}

impl ProfileFamily {
    /// True when the profile is unbounded at `s = 0`.
    pub fn is_singular(self) -> bool {
        !matches!(self, ProfileFamily::PolynomialTruncated(_))
    }
}

#[derive(Clone)]
pub struct RadialProfile {
    family: ProfileFamily,
    scale: f64,
    poly: Option<Arc<MatchedPolynomial>>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("family", &self.family)
            .field("scale", &self.scale)
            .finish()
    }
}

impl PartialEq for RadialProfile {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.scale == other.scale
    }
}

impl RadialProfile {
    /// Builds a profile with normalization constant `1`.
    pub fn new(family: ProfileFamily) -> Result<Self> {
        Self::with_scale(family, 1.0)
    }

    pub fn with_scale(family: ProfileFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!(
                "normalization constant must be positive, got {scale}"
            )));
        }
        let poly = match family {
            ProfileFamily::Regularized(k) | ProfileFamily::PolynomialTruncated(k) => Some(
                Arc::new(MatchedPolynomial::for_family(ProfileFamily::InverseS, k)?),
            ),
            _ => None,
        };
        Ok(Self {
            family,
            scale,
            poly,
        })
    }

    pub fn inverse_s() -> Self {
        Self::new(ProfileFamily::InverseS).expect("unit scale is valid")
    }

    pub fn conical_inverse_s() -> Self {
        Self::new(ProfileFamily::ConicalInverseS).expect("unit scale is valid")
    }

    pub fn regularized(k: u32) -> Result<Self> {
        Self::new(ProfileFamily::Regularized(k))
    }

    pub fn polynomial_truncated(k: u32) -> Result<Self> {
        Self::new(ProfileFamily::PolynomialTruncated(k))
    }

    pub fn family(&self) -> ProfileFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The matched polynomial behind `Regularized` and `PolynomialTruncated`.
    pub fn matched_polynomial(&self) -> Option<&MatchedPolynomial> {
        self.poly.as_deref()
    }

    /// Evaluates `γ(|s|)`. Exactly zero for `|s| >= 1`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let a = s.abs();
        if a >= 1.0 {
            return Ok(0.0);
        }
        if a == 0.0 && self.family.is_singular() {
            return Err(Error::Domain(format!(
                "{:?} profile is singular at s = 0",
                self.family
            )));
        }
        Ok(self.eval_inside(a))
    }

    /// Evaluation for `0 < a < 1` (or `a = 0` for bounded profiles).
    pub(crate) fn eval_inside(&self, a: f64) -> f64 {
        let c = self.scale;
        match self.family {
            ProfileFamily::InverseS => c / a,
            ProfileFamily::ConicalInverseS => c / a * (1.0 - a),
            ProfileFamily::Regularized(_) => {
                c * self.poly.as_ref().expect("matched").remainder_unit(a)
            }
            ProfileFamily::PolynomialTruncated(_) => {
                c * self.poly.as_ref().expect("matched").eval_unit(a)
            }
        }
    }

    /// `0` outside the support, otherwise [`Self::eval_inside`]. Callers guarantee `s != 0`
    /// for singular profiles.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: f64) -> f64 {
        if a >= 1.0 {
            0.0
        } else {
            self.eval_inside(a)
        }
    }
}

/// Free-function form of [`RadialProfile::eval`].
pub fn eval_profile(profile: &RadialProfile, s: f64) -> Result<f64> {
    profile.eval(s)
}

/// `M₂ = ∫_{-1}^{1} s² γ(|s|) ds`, by adaptive quadrature (relative accuracy 1e-10).
pub fn second_moment(profile: &RadialProfile) -> f64 {
    2.0 * quad::integrate(|s| s * s * profile.eval_inside(s), 0.0, 1.0, 1e-12)
}

/// Even polynomial `p^{2K}(s) = Σ_j c_j s^{2j}` agreeing with a base profile and its first
/// `K` derivatives at `s = 1`.
///
/// The coefficients are solved exactly over the rationals for the unit-normalized base
/// profile. Alongside them we keep the quotient `q` in
/// `γ₁(s) - p₁(s) = (1-s)^{K+1} (1/s - q(s))`, which evaluates the difference near the
/// edge without cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPolynomial {
    order: u32,
    base: ProfileFamily,
    scale: f64,
    exact: Vec<BigRational>,
    unit_coeffs: Vec<f64>,
    quotient: Vec<f64>,
}

/// Beyond this argument the remainder `κ` is evaluated in factored form.
const FACTORED_FROM: f64 = 0.5;

impl MatchedPolynomial {
    fn for_family(base: ProfileFamily, order: u32) -> Result<Self> {
        if !matches!(base, ProfileFamily::InverseS | ProfileFamily::ConicalInverseS) {
            return Err(Error::Construction(format!(
                "polynomial matching is defined for 1/|s|-type profiles, not {base:?}"
            )));
        }
        let k = order as usize;
        let exact = solve_matching_system(base, k)?;
        let quotient = edge_quotient(base, &exact)?;
        Ok(Self {
            order,
            base,
            scale: 1.0,
            unit_coeffs: exact.iter().map(rational_to_f64).collect(),
            quotient: quotient.iter().map(rational_to_f64).collect(),
            exact,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Coefficients `c_0..c_K` of `s^0, s^2, .., s^{2K}`, including the normalization constant.
    pub fn coeffs(&self) -> Vec<f64> {
        self.unit_coeffs.iter().map(|c| c * self.scale).collect()
    }

    /// Exact coefficients of the unit-normalized polynomial.
    pub fn exact_coeffs(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `p^{2K}(s)` as a plain polynomial (no truncation).
    pub fn eval(&self, s: f64) -> f64 {
        self.scale * self.eval_unit(s)
    }

    fn eval_unit(&self, s: f64) -> f64 {
        let s2 = s * s;
        self.unit_coeffs.iter().rev().fold(0.0, |acc, &c| acc * s2 + c)
    }

    fn base_unit(&self, a: f64) -> f64 {
        match self.base {
            ProfileFamily::ConicalInverseS => 1.0 / a * (1.0 - a),
            _ => 1.0 / a,
        }
    }

    /// `γ₁(a) - p₁(a)` for `0 < a < 1`.
    fn remainder_unit(&self, a: f64) -> f64 {
        if a < FACTORED_FROM {
            self.base_unit(a) - self.eval_unit(a)
        } else {
            let t = 1.0 - a;
            let q = self.quotient.iter().rev().fold(0.0, |acc, &c| acc * a + c);
            t.powi(self.order as i32 + 1) * (1.0 / a - q)
        }
    }
}

/// Solves `p^{(m)}(1) = γ^{(m)}(1)`, `m = 0..K`, for the unit-normalized base.
fn solve_matching_system(base: ProfileFamily, k: usize) -> Result<Vec<BigRational>> {
    let n = k + 1;
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    for m in 0..n {
        let mut row = Vec::with_capacity(n + 1);
        for j in 0..n {
            row.push(BigRational::from_integer(falling(2 * j, m)));
        }
        // d^m/ds^m (1/s) at 1 = (-1)^m m!; the conical profile drops the constant term.
        let rhs = if m == 0 && base == ProfileFamily::ConicalInverseS {
            BigRational::zero()
        } else {
            let f = BigRational::from_integer(falling(m, m));
            if m % 2 == 0 {
                f
            } else {
                -f
            }
        };
        row.push(rhs);
        rows.push(row);
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !rows[r][col].is_zero())
            .ok_or_else(|| Error::Construction(format!("singular matching system for K = {k}")))?;
        rows.swap(col, pivot);
        let p = rows[col][col].clone();
        for entry in rows[col].iter_mut() {
            *entry = &*entry / &p;
        }
        for r in 0..n {
            if r != col && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in col..=n {
                    let delta = &factor * &rows[col][c];
                    rows[r][c] = &rows[r][c] - &delta;
                }
            }
        }
    }
    Ok(rows.into_iter().map(|row| row[n].clone()).collect())
}

/// `a (a-1) .. (a-m+1)`, zero when `m > a`.
fn falling(a: usize, m: usize) -> BigInt {
    if m > a {
        return BigInt::zero();
    }
    (0..m).fold(BigInt::one(), |acc, i| acc * BigInt::from(a - i))
}

fn binomial(n: usize, k: usize) -> BigInt {
    falling(n, k) / falling(k, k)
}

/// Quotient `q` with `p₁(s) - T_K(s) = (1-s)^{K+1} q(s)`, `T_K` the Taylor polynomial of the
/// base at `s = 1`. Returned in the monomial basis of `s`.
fn edge_quotient(base: ProfileFamily, even_coeffs: &[BigRational]) -> Result<Vec<BigRational>> {
    let k = even_coeffs.len() - 1;
    let degree = 2 * k;
    let mut poly = vec![BigRational::zero(); degree.max(k) + 1];
    for (j, c) in even_coeffs.iter().enumerate() {
        poly[2 * j] += c.clone();
    }
    // T_K(s) = Σ_{n≤K} (1-s)^n, minus 1 for the conical base.
    for n in 0..=k {
        for i in 0..=n {
            let term = BigRational::from_integer(binomial(n, i));
            if i % 2 == 0 {
                poly[i] -= term;
            } else {
                poly[i] += term;
            }
        }
    }
    if base == ProfileFamily::ConicalInverseS {
        poly[0] += BigRational::one();
    }
    // Divide K+1 times by (1 - s) = -(s - 1) via synthetic division.
    for _ in 0..=k {
        let len = poly.len();
        let mut quotient = vec![BigRational::zero(); len.saturating_sub(1)];
        let mut carry = BigRational::zero();
        for i in (1..len).rev() {
            carry = &carry + &poly[i];
            quotient[i - 1] = -carry.clone();
        }
        let remainder = &carry + &poly[0];
        if !remainder.is_zero() {
            return Err(Error::Construction(
                "matched polynomial does not vanish to full order at s = 1".into(),
            ));
        }
        poly = quotient;
    }
    if poly.is_empty() {
        poly.push(BigRational::zero());
    }
    Ok(poly)
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let sign = if r.is_negative() { -1.0 } else { 1.0 };
        sign * f64::INFINITY
    })
}

/// Constructs `p^{2K}` for a `1/|s|`-type profile (InverseS or ConicalInverseS).
pub fn match_polynomial(profile: &RadialProfile, k: u32) -> Result<MatchedPolynomial> {
    let mut poly = MatchedPolynomial::for_family(profile.family(), k)?;
    poly.scale = profile.scale();
    Ok(poly)
}

/// `γ = κ + p^{2K}·χ(|s|<1)`.
#[derive(Debug, Clone)]
pub struct SplitKernel {
    profile: RadialProfile,
    polynomial: MatchedPolynomial,
}

impl SplitKernel {
    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn polynomial(&self) -> &MatchedPolynomial {
        &self.polynomial
    }

    /// `κ(|s|)`; zero for `|s| >= 1`, domain error at `s = 0`.
    pub fn kappa(&self, s: f64) -> Result<f64> {
        let a = s.abs();
        if a >= 1.0 {
            return Ok(0.0);
        }
        if a == 0.0 {
            return Err(Error::Domain("κ is singular at s = 0".into()));
        }
        Ok(self.kappa_inside(a))
    }

    pub(crate) fn kappa_inside(&self, a: f64) -> f64 {
        let c = self.polynomial.scale;
        if a < FACTORED_FROM {
            // Same expression as γ - p so that κ + p reproduces γ.
            self.profile.eval_inside(a) - c * self.polynomial.eval_unit(a)
        } else {
            c * self.polynomial.remainder_unit(a)
        }
    }

    #[inline]
    pub(crate) fn kappa_unchecked(&self, a: f64) -> f64 {
        if a >= 1.0 {
            0.0
        } else {
            self.kappa_inside(a)
        }
    }

    /// Profile of the polynomial part, `p^{2K}·χ`.
    pub fn truncated_profile(&self) -> Result<RadialProfile> {
        match self.profile.family() {
            ProfileFamily::InverseS => RadialProfile::with_scale(
                ProfileFamily::PolynomialTruncated(self.polynomial.order),
                self.profile.scale(),
            ),
            other => Err(Error::Construction(format!(
                "no truncated-profile family for {other:?}"
            ))),
        }
    }
}

pub fn split(profile: &RadialProfile, k: u32) -> Result<SplitKernel> {
    Ok(SplitKernel {
        profile: profile.clone(),
        polynomial: match_polynomial(profile, k)?,
    })
}

/// Horizon `δ(x)`; the bump depends on the first coordinate only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonField {
    Constant(f64),
    /// `δ₀ (1 + exp(-20 (x - 1/2)²))`
    GaussianBump(f64),
}

impl HorizonField {
    pub fn base(&self) -> f64 {
        match *self {
            HorizonField::Constant(d) | HorizonField::GaussianBump(d) => d,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, HorizonField::Constant(_))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            HorizonField::Constant(d) => d,
            HorizonField::GaussianBump(d) => {
                let t = x[0] - 0.5;
                d * (1.0 + (-20.0 * t * t).exp())
            }
        }
    }

    /// Upper bound `δ₁` over the unit cube.
    pub fn max(&self) -> f64 {
        match *self {
            HorizonField::Constant(d) => d,
            HorizonField::GaussianBump(d) => 2.0 * d,
        }
    }
}

pub type CoefficientFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Diffusion coefficient `C(x, y)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(Arc<CoefficientFn>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Coefficient {
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Field(f) => f(x, y),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryClass {
    /// `C` and `δ` depend on `x` only.
    NonDivergence,
    /// `C` and `δ` symmetric in `(x, y)`; the horizon is `(δ(x) + δ(y)) / 2`.
    Divergence,
}

/// `ω(x, y) = C(x,y) / δ(x,y)^{d+2} · γ(|y - x| / δ(x,y))`
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub dimension: usize,
    pub profile: RadialProfile,
    pub coefficient: Coefficient,
    pub horizon: HorizonField,
    pub symmetry: SymmetryClass,
}

impl KernelSpec {
    /// Non-divergence kernel with `C ≡ 1`.
    pub fn new(dimension: usize, profile: RadialProfile, horizon: HorizonField) -> Result<Self> {
        let spec = Self {
            dimension,
            profile,
            coefficient: Coefficient::Constant(1.0),
            horizon,
            symmetry: SymmetryClass::NonDivergence,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_coefficient(mut self, coefficient: Coefficient) -> Result<Self> {
        self.coefficient = coefficient;
        self.validate()?;
        Ok(self)
    }

    pub fn with_symmetry(mut self, symmetry: SymmetryClass) -> Self {
        self.symmetry = symmetry;
        self
    }

    pub fn with_profile(&self, profile: RadialProfile) -> Self {
        let mut spec = self.clone();
        spec.profile = profile;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::Config(format!(
                "dimension must be 1, 2 or 3, got {}",
                self.dimension
            )));
        }
        let d0 = self.horizon.base();
        if !(d0.is_finite() && d0 > 0.0) {
            return Err(Error::Config(format!("horizon δ₀ must be positive, got {d0}")));
        }
        if let Coefficient::Constant(c) = self.coefficient {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("coefficient must be positive, got {c}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn horizon_at(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.symmetry {
            SymmetryClass::NonDivergence => self.horizon.eval(x),
            SymmetryClass::Divergence => 0.5 * (self.horizon.eval(x) + self.horizon.eval(y)),
        }
    }

    #[inline]
    pub fn coefficient_at(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.symmetry {
            SymmetryClass::NonDivergence => self.coefficient.eval(x, x),
            SymmetryClass::Divergence => self.coefficient.eval(x, y),
        }
    }

    /// True when the operator it induces is symmetric: constant horizon and coefficient,
    /// or the divergence class.
    pub fn is_symmetric(&self) -> bool {
        match self.symmetry {
            SymmetryClass::Divergence => true,
            SymmetryClass::NonDivergence => {
                self.horizon.is_constant() && self.coefficient.is_constant()
            }
        }
    }

    pub fn eval_omega(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dimension || y.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len().max(y.len()),
            });
        }
        let r = distance(x, y);
        if r == 0.0 && self.profile.family().is_singular() {
            return Err(Error::Domain("ω is singular at x = y".into()));
        }
        Ok(self.omega_with(x, y, r, |a| self.profile.eval_unchecked(a)))
    }

    /// `C/δ^{d+2} · f(r/δ)` with `f` zero outside the unit ball.
    #[inline]
    pub(crate) fn omega_with(&self, x: &[f64], y: &[f64], r: f64, f: impl Fn(f64) -> f64) -> f64 {
        let delta = self.horizon_at(x, y);
        if r >= delta {
            return 0.0;
        }
        let c = self.coefficient_at(x, y);
        c / delta.powi(self.dimension as i32 + 2) * f(r / delta)
    }
}

pub fn eval_omega(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval_omega(x, y)
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn profile_values() {
        let inv = RadialProfile::inverse_s();
        assert_eq!(inv.eval(0.5).unwrap(), 2.0);
        assert_eq!(inv.eval(1.2).unwrap(), 0.0);
        assert_eq!(inv.eval(-0.5).unwrap(), 2.0);
        assert!(matches!(inv.eval(0.0), Err(Error::Domain(_))));
        assert_eq!(RadialProfile::conical_inverse_s().eval(0.5).unwrap(), 1.0);
        assert_eq!(inv.eval(1.0).unwrap(), 0.0);
        let t = RadialProfile::polynomial_truncated(0).unwrap();
        assert_eq!(t.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn matched_coefficients_are_exact_rationals() {
        let inv = RadialProfile::inverse_s();
        let expected: [Vec<BigRational>; 4] = [
            vec![rat(1, 1)],
            vec![rat(3, 2), rat(-1, 2)],
            vec![rat(15, 8), rat(-5, 4), rat(3, 8)],
            // Unique solution of the 4x4 system; 17/8 - 2s² + 9/8 s⁴ - 1/4 s⁶ has p'''(1) = -3.
            vec![rat(35, 16), rat(-35, 16), rat(21, 16), rat(-5, 16)],
        ];
        for (k, want) in expected.iter().enumerate() {
            let p = match_polynomial(&inv, k as u32).unwrap();
            assert_eq!(p.exact_coeffs(), want.as_slice(), "K = {k}");
        }
    }

    #[test]
    fn higher_order_matching_is_solvable() {
        let inv = RadialProfile::inverse_s();
        for k in 4..=8 {
            let p = match_polynomial(&inv, k).unwrap();
            assert!((p.eval(1.0) - 1.0).abs() < 1e-9, "K = {k}");
        }
    }

    #[test]
    fn conical_matching_vanishes_at_edge() {
        let p = match_polynomial(&RadialProfile::conical_inverse_s(), 2).unwrap();
        assert!(p.eval(1.0).abs() < 1e-14);
        let s = split(&RadialProfile::conical_inverse_s(), 2).unwrap();
        for i in 1..100 {
            let a = i as f64 / 100.0;
            let direct = (1.0 / a) * (1.0 - a) - p.eval(a);
            assert!((s.kappa(a).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn matching_rejects_non_inverse_profiles() {
        let t = RadialProfile::polynomial_truncated(1).unwrap();
        assert!(matches!(match_polynomial(&t, 1), Err(Error::Construction(_))));
    }

    #[test]
    fn kappa_at_half_matches_direct_formula() {
        let s = split(&RadialProfile::inverse_s(), 3).unwrap();
        let expected =
            2.0 - (35.0 / 16.0 - 35.0 / 16.0 * 0.25 + 21.0 / 16.0 * 0.0625 - 5.0 / 16.0 * 0.015625);
        assert!((s.kappa(0.5).unwrap() - expected).abs() < 1e-15);
        assert_eq!(s.kappa(1.0).unwrap(), 0.0);
        assert!(s.kappa(0.0).is_err());
    }

    #[test]
    fn split_reassembles_k0() {
        let s = split(&RadialProfile::inverse_s(), 0).unwrap();
        let g = RadialProfile::inverse_s();
        for i in 0..1000 {
            let a = (i as f64 + 0.5) / 1000.0;
            let sum = s.kappa(a).unwrap() + s.polynomial().eval(a);
            assert!((sum - g.eval(a).unwrap()).abs() <= 1e-14);
        }
    }

    #[test]
    fn regularized_profile_is_kappa() {
        let r = RadialProfile::regularized(2).unwrap();
        let s = split(&RadialProfile::inverse_s(), 2).unwrap();
        for i in 1..50 {
            let a = i as f64 / 50.0;
            assert_eq!(r.eval(a).unwrap(), s.kappa(a).unwrap());
        }
    }

    #[test]
    fn profiles_are_nonnegative_inside_support() {
        let families = [
            ProfileFamily::InverseS,
            ProfileFamily::ConicalInverseS,
            ProfileFamily::Regularized(0),
            ProfileFamily::Regularized(1),
            ProfileFamily::Regularized(2),
            ProfileFamily::Regularized(3),
            ProfileFamily::PolynomialTruncated(0),
            ProfileFamily::PolynomialTruncated(1),
            ProfileFamily::PolynomialTruncated(2),
            ProfileFamily::PolynomialTruncated(3),
        ];
        for fam in families {
            let p = RadialProfile::new(fam).unwrap();
            for i in 1..1000 {
                let a = i as f64 / 1000.0;
                assert!(p.eval(a).unwrap() >= 0.0, "{fam:?} at {a}");
                assert_eq!(p.eval(a).unwrap(), p.eval(-a).unwrap());
            }
        }
    }

    #[test]
    fn second_moments() {
        let m = second_moment(&RadialProfile::inverse_s());
        assert!((m - 1.0).abs() < 1e-10);
        let m = second_moment(&RadialProfile::conical_inverse_s());
        assert!((m - 1.0 / 3.0).abs() < 1e-10 / 3.0);
        let m = second_moment(&RadialProfile::polynomial_truncated(0).unwrap());
        assert!((m - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn omega_examples() {
        let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(1.0)).unwrap();
        assert_eq!(spec.eval_omega(&[0.0], &[0.5]).unwrap(), 2.0);
        assert!(spec.eval_omega(&[0.3], &[0.3]).is_err());
        let narrow = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(0.25)).unwrap();
        assert_eq!(narrow.eval_omega(&[0.0], &[0.5]).unwrap(), 0.0);
        let bump = HorizonField::GaussianBump(1.0);
        assert_eq!(bump.eval(&[0.5]), 2.0);
        assert!(spec.eval_omega(&[0.0, 0.0], &[0.5]).is_err());
    }

    #[test]
    fn divergence_class_is_symmetric() {
        let c: Arc<CoefficientFn> = Arc::new(|x: &[f64], y: &[f64]| 1.0 + x[0] * y[0]);
        let spec = KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::GaussianBump(0.2))
            .unwrap()
            .with_coefficient(Coefficient::Field(c))
            .unwrap()
            .with_symmetry(SymmetryClass::Divergence);
        for i in 0..40 {
            for j in 0..40 {
                if i == j {
                    continue;
                }
                let x = [i as f64 / 40.0 + 0.01];
                let y = [j as f64 / 40.0 + 0.01];
                assert_eq!(spec.eval_omega(&x, &y).unwrap(), spec.eval_omega(&y, &x).unwrap());
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(KernelSpec::new(4, RadialProfile::inverse_s(), HorizonField::Constant(0.1)).is_err());
        assert!(KernelSpec::new(1, RadialProfile::inverse_s(), HorizonField::Constant(0.0)).is_err());
        assert!(RadialProfile::with_scale(ProfileFamily::InverseS, -1.0).is_err());
    }
}
