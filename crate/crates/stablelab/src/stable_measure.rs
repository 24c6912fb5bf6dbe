//! The α-stable Lévy measure with spectral atoms at ±1, the compensated
//! increment and the nonlocal operator, including its supremum over the
//! square of spectral weights.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Position of α relative to 1; it decides the compensator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SubOne,
    CriticalOne,
    SuperOne,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        if alpha < 1.0 {
            Regime::SubOne
        } else if alpha == 1.0 {
            Regime::CriticalOne
        } else {
            Regime::SuperOne
        }
    }
}

/// Stability index, moment order and regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStableConfig", into = "RawStableConfig")]
pub struct StableConfig {
    alpha: f64,
    delta: f64,
    regime: Regime,
}

#[derive(Serialize, Deserialize)]
struct RawStableConfig {
    alpha: f64,
    delta: f64,
}

impl TryFrom<RawStableConfig> for StableConfig {
    type Error = LabError;
    fn try_from(raw: RawStableConfig) -> Result<Self> {
        StableConfig::new(raw.alpha, raw.delta)
    }
}

impl From<StableConfig> for RawStableConfig {
    fn from(c: StableConfig) -> Self {
        RawStableConfig { alpha: c.alpha, delta: c.delta }
    }
}

impl StableConfig {
    /// Validated constructor. For `alpha > 1` the moment order must be 1.
    pub fn new(alpha: f64, delta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(LabError::Domain(format!("alpha = {alpha} must lie in (0,2)")));
        }
        if !(delta > 0.0 && delta < alpha) {
            return Err(LabError::Domain(format!("delta = {delta} must lie in (0, alpha)")));
        }
        if alpha > 1.0 && delta != 1.0 {
            return Err(LabError::Domain(format!("delta must equal 1 when alpha = {alpha} exceeds 1 (got {delta})")));
        }
        Ok(Self { alpha, delta, regime: Regime::of(alpha) })
    }

    /// Convenience constructor for `alpha > 1`, where `delta = 1`.
    pub fn super_one(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }
}

/// Spectral weights `(k1, k2)` of the atoms at −1 and +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub k1: f64,
    pub k2: f64,
}

impl Corner {
    pub fn new(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }
    pub fn symmetric(c: f64) -> Self {
        Self { k1: c, k2: c }
    }
}

/// Closed square `[lower, upper]²` of admissible spectral weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub lambda_lower: f64,
    pub lambda_upper: f64,
}

impl UncertaintySet {
    pub fn new(lambda_lower: f64, lambda_upper: f64) -> Result<Self> {
        if !(lambda_lower > 0.0 && lambda_lower <= lambda_upper && lambda_upper.is_finite()) {
            return Err(LabError::Domain(format!("need 0 < lambda_lower <= lambda_upper, got [{lambda_lower}, {lambda_upper}]")));
        }
        Ok(Self { lambda_lower, lambda_upper })
    }

    pub fn singleton(c: f64) -> Result<Self> {
        Self::new(c, c)
    }

    pub fn is_singleton(&self) -> bool {
        self.lambda_lower == self.lambda_upper
    }

    /// The distinct corners of the square (one when the set is a singleton).
    pub fn corners(&self) -> Vec<Corner> {
        let (l, u) = (self.lambda_lower, self.lambda_upper);
        if self.is_singleton() {
            vec![Corner::new(l, l)]
        } else {
            vec![Corner::new(l, l), Corner::new(l, u), Corner::new(u, l), Corner::new(u, u)]
        }
    }

    /// A `m × m` lattice covering the square, corners included.
    pub fn lattice(&self, m: usize) -> Vec<Corner> {
        let m = m.max(2);
        let (l, u) = (self.lambda_lower, self.lambda_upper);
        let at = |i: usize| l + (u - l) * i as f64 / (m - 1) as f64;
        (0..m).flat_map(|i| (0..m).map(move |j| Corner::new(at(i), at(j)))).collect()
    }
}

/// Region outside which a test function is exactly constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flat {
    pub lo: f64,
    pub hi: f64,
    pub left: f64,
    pub right: f64,
}

/// A bounded test function with its regularity constants.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// Derivative of order 1..=3 at `x`, if available.
    fn derivative(&self, _order: usize, _x: f64) -> Option<f64> {
        None
    }

    /// `‖φ‖∞`.
    fn sup_norm(&self) -> f64;

    /// Lipschitz constant `C_φ`.
    fn lipschitz(&self) -> f64;

    /// `‖D^k φ‖∞` for `k` in 1..=3, if known.
    fn derivative_norm(&self, _order: usize) -> Option<f64> {
        None
    }

    /// Bounds `(inf φ, sup φ)`.
    fn range(&self) -> (f64, f64) {
        (-self.sup_norm(), self.sup_norm())
    }

    /// Region outside which the function is constant, if any.
    fn flat(&self) -> Option<Flat> {
        None
    }

    fn oscillation(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A test function assembled from closures.
#[derive(Clone)]
pub struct FnTestFunction {
    f: Scalar,
    derivs: Vec<Scalar>,
    norms: Vec<f64>,
    sup: f64,
    lip: f64,
    range: Option<(f64, f64)>,
    flat: Option<Flat>,
}

impl FnTestFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, sup_norm: f64, lipschitz: f64) -> Self {
        Self { f: Arc::new(f), derivs: Vec::new(), norms: Vec::new(), sup: sup_norm, lip: lipschitz, range: None, flat: None }
    }

    /// Attach the next derivative evaluator (first call: order 1) with its norm.
    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static, norm: f64) -> Self {
        self.derivs.push(Arc::new(d));
        self.norms.push(norm);
        self
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn with_flat(mut self, flat: Flat) -> Self {
        self.flat = Some(flat);
        self
    }

    /// The constant function `c`.
    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, c.abs(), 0.0)
            .with_derivative(|_| 0.0, 0.0)
            .with_derivative(|_| 0.0, 0.0)
            .with_derivative(|_| 0.0, 0.0)
            .with_range(c, c)
            .with_flat(Flat { lo: 0.0, hi: 0.0, left: c, right: c })
    }

    /// `cos(ω x)`.
    pub fn cosine(omega: f64) -> Self {
        let w = omega.abs();
        Self::new(move |x| (omega * x).cos(), 1.0, w)
            .with_derivative(move |x| -omega * (omega * x).sin(), w)
            .with_derivative(move |x| -omega * omega * (omega * x).cos(), w * w)
            .with_derivative(move |x| omega.powi(3) * (omega * x).sin(), w.powi(3))
    }
}

impl TestFunction for FnTestFunction {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        order.checked_sub(1).and_then(|i| self.derivs.get(i)).map(|d| d(x))
    }
    fn sup_norm(&self) -> f64 {
        self.sup
    }
    fn lipschitz(&self) -> f64 {
        self.lip
    }
    fn derivative_norm(&self, order: usize) -> Option<f64> {
        order.checked_sub(1).and_then(|i| self.norms.get(i)).copied()
    }
    fn range(&self) -> (f64, f64) {
        self.range.unwrap_or((-self.sup, self.sup))
    }
    fn flat(&self) -> Option<Flat> {
        self.flat
    }
}

/// Density of the Lévy measure at `lambda ≠ 0`.
pub fn levy_density(k: Corner, lambda: f64, alpha: f64) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(LabError::Domain(format!("Levy density is singular or undefined at lambda = {lambda}")));
    }
    let w = if lambda < 0.0 { k.k1 } else { k.k2 };
    Ok(w / lambda.abs().powf(1.0 + alpha))
}

fn need(phi: &dyn TestFunction, order: usize, x: f64) -> Result<f64> {
    phi.derivative(order, x).ok_or_else(|| LabError::Capability(format!("test function lacks a derivative of order {order}")))
}

fn need_norm(phi: &dyn TestFunction, order: usize) -> Result<f64> {
    phi.derivative_norm(order)
        .ok_or_else(|| LabError::Capability(format!("test function lacks the norm of its derivative of order {order}")))
}

/// The compensated increment `δ_λ^α φ(x)`.
pub fn compensated_increment(phi: &dyn TestFunction, x: f64, lambda: f64, cfg: &StableConfig) -> Result<f64> {
    let inc = phi.value(x + lambda) - phi.value(x);
    Ok(match cfg.regime() {
        Regime::SubOne => inc,
        Regime::CriticalOne => {
            let d = need(phi, 1, x)?;
            if lambda.abs() <= 1.0 {
                inc - d * lambda
            } else {
                inc
            }
        }
        Regime::SuperOne => inc - need(phi, 1, x)? * lambda,
    })
}

/// Unit-weight integrals over the two half-lines with their error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfIntegrals {
    pub minus: f64,
    pub plus: f64,
    pub error_minus: f64,
    pub error_plus: f64,
}

impl HalfIntegrals {
    pub fn combine(&self, k: Corner) -> f64 {
        k.k1 * self.minus + k.k2 * self.plus
    }
    pub fn error(&self, k: Corner) -> f64 {
        k.k1 * self.error_minus + k.k2 * self.error_plus
    }
}

/// `∫_0^∞ δ_{sy}^α φ(x) y^{-1-α} dy` for side `s = ±1`, with absolute error
/// at most `tol` (or an accuracy error).
fn half_line(phi: &dyn TestFunction, x: f64, side: f64, cfg: &StableConfig, tol: f64) -> Result<(f64, f64)> {
    let a = cfg.alpha();
    let regime = cfg.regime();
    let d1 = need(phi, 1, x)?;
    let d2 = need(phi, 2, x)?;
    let n3 = need_norm(phi, 3)?;
    let sup = phi.sup_norm();
    let phix = phi.value(x);
    let part = tol / 4.0;

    // Singular cutoff: Taylor remainder n3 r^{3-a} / (6 (3-a)) <= tol/4.
    let scale = if n3 > 0.0 { (part * 6.0 * (3.0 - a) / n3).powf(1.0 / (3.0 - a)) } else { 1.0 };
    let r = scale.min(tol.powf(1.0 / (3.0 - a))).clamp(f64::MIN_POSITIVE, 1.0);
    let taylor_err = n3 * r.powf(3.0 - a) / (6.0 * (3.0 - a));
    let mut value = d2 * r.powf(2.0 - a) / (2.0 * (2.0 - a));
    if regime == Regime::SubOne {
        value += d1 * side * r.powf(1.0 - a) / (1.0 - a);
    }

    // Where does x + s y leave the non-constant region?
    let flat_at =
        phi.flat().map(|fl| if side > 0.0 { ((fl.hi - x).max(0.0), fl.right) } else { ((x - fl.lo).max(0.0), fl.left) });

    let comp_inner = regime != Regime::SubOne;
    let inner = |y: f64| {
        let mut g = phi.value(x + side * y) - phix;
        if comp_inner {
            g -= d1 * side * y;
        }
        g * y.powf(-1.0 - a)
    };
    let outer = |y: f64| (phi.value(x + side * y) - phix) * y.powf(-1.0 - a);

    // Inner region (r, 1], geometric breakpoints.
    let mut pts = vec![r];
    while *pts.last().unwrap() * 2.0 < 1.0 {
        let last = *pts.last().unwrap();
        pts.push(last * 2.0);
    }
    pts.push(1.0);
    let opts = QuadOptions::new(part).with_budget(20_000);
    let mut err = taylor_err;
    if r < 1.0 {
        let qi = integrate(inner, &pts, &opts);
        value += qi.value;
        err += qi.error;
    }

    // Compensator over (1, ∞) for α > 1, analytic.
    if regime == Regime::SuperOne {
        value -= d1 * side / (a - 1.0);
    }

    // Outer region [1, Y].
    let (y_end, tail_value, tail_err) = match flat_at {
        Some((yf, edge)) if yf <= 1.0 => (1.0, (edge - phix) / a, 0.0),
        Some((yf, edge)) => (yf, (edge - phix) * yf.powf(-a) / a, 0.0),
        None => {
            let y_r = (8.0 * sup / (a * part)).powf(1.0 / a).max(1.0);
            (y_r, 0.0, 2.0 * sup * y_r.powf(-a) / a)
        }
    };
    if y_end > 1.0 {
        let mut pts = vec![1.0];
        let mut y = 1.0;
        while y < y_end {
            y = if y < 64.0 { y + 1.0 } else { y * 1.25 };
            pts.push(y.min(y_end));
        }
        let qo = integrate(outer, &pts, &QuadOptions::new(part).with_budget(200_000).with_bound(2.0 * sup));
        value += qo.value;
        err += qo.error;
    }
    value += tail_value;
    err += tail_err;
    if err > tol {
        return Err(LabError::Accuracy { requested: tol, achieved: err });
    }
    Ok((value, err))
}

/// Unit-weight half-line integrals `I₋`, `I₊` each to absolute accuracy `tol/2`.
pub fn half_line_integrals(phi: &dyn TestFunction, x: f64, cfg: &StableConfig, tol: f64) -> Result<HalfIntegrals> {
    let (minus, error_minus) = half_line(phi, x, -1.0, cfg, tol / 2.0)?;
    let (plus, error_plus) = half_line(phi, x, 1.0, cfg, tol / 2.0)?;
    Ok(HalfIntegrals { minus, plus, error_minus, error_plus })
}

/// `∫ δ_λ^α φ(x) F_k(dλ)` with absolute error at most `tol`.
pub fn nonlocal_apply(phi: &dyn TestFunction, x: f64, k: Corner, cfg: &StableConfig, tol: f64) -> Result<f64> {
    let kmax = k.k1.max(k.k2);
    if kmax <= 0.0 {
        return Ok(0.0);
    }
    let h = half_line_integrals(phi, x, cfg, tol / kmax)?;
    Ok(h.combine(k))
}

/// Maximum of the affine map `k ↦ k1 I₋ + k2 I₊` over the square.
pub fn corner_max(h: &HalfIntegrals, set: &UncertaintySet) -> (f64, Corner) {
    let pick = |i: f64| if i >= 0.0 { set.lambda_upper } else { set.lambda_lower };
    let best = Corner::new(pick(h.minus), pick(h.plus));
    (h.combine(best), best)
}

/// `sup_k ∫ δ_λ^α φ(x) F_k(dλ)` over the closed square, error at most `tol`.
pub fn sup_nonlocal(phi: &dyn TestFunction, x: f64, set: &UncertaintySet, cfg: &StableConfig, tol: f64) -> Result<f64> {
    let h = half_line_integrals(phi, x, cfg, tol / set.lambda_upper)?;
    Ok(set.corners().into_iter().map(|k| h.combine(k)).fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clipped_identity(a: f64) -> FnTestFunction {
        FnTestFunction::new(move |x: f64| x.clamp(-a, a), a, 1.0)
            .with_derivative(move |x: f64| if x.abs() < a { 1.0 } else { 0.0 }, 1.0)
    }

    #[test]
    fn density_examples() {
        assert_eq!(levy_density(Corner::new(1.0, 1.0), -1.0, 1.5).unwrap(), 1.0);
        // k2 / λ^{1+α} = 3 / 2² for α = 1.
        assert!((levy_density(Corner::new(2.0, 3.0), 2.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(levy_density(Corner::new(1.0, 1.0), 0.0, 0.5), Err(LabError::Domain(_))));
    }

    #[test]
    fn increment_examples() {
        let cfg = StableConfig::super_one(1.5).unwrap();
        let lin = FnTestFunction::new(|x| 2.0 * x + 1.0, f64::INFINITY, 2.0).with_derivative(|_| 2.0, 2.0);
        assert!(compensated_increment(&lin, 0.3, 0.7, &cfg).unwrap().abs() < 1e-15);

        let one = StableConfig::new(1.0, 0.5).unwrap();
        let clip = clipped_identity(10.0);
        assert_eq!(compensated_increment(&clip, 0.0, 2.0, &one).unwrap(), 2.0);

        let sub = StableConfig::new(0.7, 0.5).unwrap();
        let c = FnTestFunction::cosine(1.0);
        let v = compensated_increment(&c, 0.0, std::f64::consts::PI, &sub).unwrap();
        assert!((v + 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_derivative_is_capability_error() {
        let cfg = StableConfig::super_one(1.5).unwrap();
        let f = FnTestFunction::new(|x: f64| x.sin(), 1.0, 1.0);
        assert!(matches!(compensated_increment(&f, 0.0, 0.5, &cfg), Err(LabError::Capability(_))));
    }

    #[test]
    fn config_invariants() {
        assert!(StableConfig::new(1.5, 0.5).is_err());
        assert!(StableConfig::new(0.5, 0.6).is_err());
        assert!(StableConfig::new(2.0, 1.0).is_err());
        assert_eq!(StableConfig::new(1.0, 0.5).unwrap().regime(), Regime::CriticalOne);
        assert!(StableConfig::try_from(RawStableConfig { alpha: 1.2, delta: 0.3 }).is_err());
    }

    #[test]
    fn constant_has_zero_nonlocal() {
        let c = FnTestFunction::constant(3.0);
        for alpha in [0.5, 1.0, 1.5] {
            let cfg = StableConfig::new(alpha, if alpha > 1.0 { 1.0 } else { 0.25 }).unwrap();
            let v = nonlocal_apply(&c, 0.2, Corner::new(1.0, 2.0), &cfg, 1e-8).unwrap();
            assert!(v.abs() < 1e-8, "alpha {alpha}: {v}");
        }
    }

    #[test]
    fn corner_choice_follows_signs() {
        let h = HalfIntegrals { minus: 2.0, plus: -3.0, error_minus: 0.0, error_plus: 0.0 };
        let set = UncertaintySet::new(1.0, 2.0).unwrap();
        let (v, k) = corner_max(&h, &set);
        assert_eq!(v, 1.0);
        assert_eq!(k, Corner::new(2.0, 1.0));
    }
}
