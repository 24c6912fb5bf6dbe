//! Space–time mollification `v^ε = v * ζ_{ε,p}` with an anisotropic kernel
//! (time scaled by `ε^p`, space by `ε`) and derivative evaluators obtained by
//! differentiating the kernel.
//!
//! The kernel is the tensor product of the bump `exp(−1/(1−y²))` in space
//! and the same bump moved to `[−1, 0]` in time, so `v^ε(t, ·)` averages
//! `v` over `[t, t + ε^p]`. Values past `t = 1` come from the constant-in-time
//! extension `v(t, ·) = v(1, ·)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{gauss_legendre, integrate, QuadOptions};
use crate::stable_measure::TestFunction;

/// A bounded function of `(t, x)`, Lipschitz in `x` and Hölder in `t`.
pub trait SpaceTimeFunction: Send + Sync {
    fn value(&self, t: f64, x: f64) -> f64;

    /// `∂_t v`, if available.
    fn time_derivative(&self, _t: f64, _x: f64) -> Option<f64> {
        None
    }

    /// `∂_x^k v` for `k` in 1..=3, if available.
    fn space_derivative(&self, _order: usize, _t: f64, _x: f64) -> Option<f64> {
        None
    }

    /// Bound on `‖∂_x^k v‖∞`, uniform in time.
    fn space_derivative_norm(&self, _order: usize) -> Option<f64> {
        None
    }

    fn sup_norm(&self) -> f64;

    /// Constant `C` with `|v(t,x) − v(s,y)| ≤ C(|t−s|^{1/p} + |x−y|)`.
    fn modulus_constant(&self) -> f64;
}

/// The slice `x ↦ v(t, x)` as a test function.
pub struct TimeSlice<'a> {
    pub function: &'a dyn SpaceTimeFunction,
    pub t: f64,
}

impl TestFunction for TimeSlice<'_> {
    fn value(&self, x: f64) -> f64 {
        self.function.value(self.t, x)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.function.space_derivative(order, self.t, x)
    }
    fn sup_norm(&self) -> f64 {
        self.function.sup_norm()
    }
    fn lipschitz(&self) -> f64 {
        self.function.space_derivative_norm(1).unwrap_or_else(|| self.function.modulus_constant())
    }
    fn derivative_norm(&self, order: usize) -> Option<f64> {
        self.function.space_derivative_norm(order)
    }
}

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A space–time function built from a closure.
#[derive(Clone)]
pub struct FnSpaceTime {
    f: Field,
    sup: f64,
    constant: f64,
}

impl FnSpaceTime {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, sup_norm: f64, modulus_constant: f64) -> Self {
        Self { f: Arc::new(f), sup: sup_norm, constant: modulus_constant }
    }
}

impl SpaceTimeFunction for FnSpaceTime {
    fn value(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }
    fn sup_norm(&self) -> f64 {
        self.sup
    }
    fn modulus_constant(&self) -> f64 {
        self.constant
    }
}

/// Scale `ε` and time anisotropy `p` of the mollifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierParams {
    pub epsilon: f64,
    pub p: f64,
    /// Gauss–Legendre nodes per kernel factor.
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    64
}

impl MollifierParams {
    pub fn new(epsilon: f64, p: f64) -> Result<Self> {
        let out = Self { epsilon, p, order: default_order() };
        out.validate()?;
        Ok(out)
    }

    pub fn with_order(mut self, order: usize) -> Result<Self> {
        self.order = order;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(LabError::Domain(format!("epsilon = {} must lie in (0,1)", self.epsilon)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(LabError::Domain(format!("p = {} must exceed 1", self.p)));
        }
        if self.order < 8 {
            return Err(LabError::Domain(format!("kernel order {} is below 8", self.order)));
        }
        Ok(())
    }
}

/// The bump `exp(−1/(1−y²))` and its first three derivatives.
pub fn bump(y: f64) -> [f64; 4] {
    if y.abs() >= 1.0 {
        return [0.0; 4];
    }
    let q = 1.0 - y * y;
    let b = (-1.0 / q).exp();
    let g1 = -2.0 * y / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * y * y / (q * q * q);
    let g3 = -24.0 * y / (q * q * q) - 48.0 * y * y * y / (q * q * q * q);
    [b, b * g1, b * (g1 * g1 + g2), b * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3)]
}

/// `∫_{-1}^{1} exp(−1/(1−y²)) dy`.
pub fn bump_mass() -> f64 {
    integrate(|y| bump(y)[0], &[-1.0, -0.5, 0.0, 0.5, 1.0], &QuadOptions::new(1e-15)).value
}

/// Discrete kernel factor: nodes and weights for the value and the
/// derivatives of order 1..=3.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    nodes: Vec<f64>,
    weights: [Vec<f64>; 4],
}

impl Factor {
    /// Factor on `[a, b]` with the bump rescaled to that interval.
    fn new(order: usize, a: f64, b: f64) -> Self {
        let (x, w) = gauss_legendre(order);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mass = bump_mass();
        let nodes: Vec<f64> = x.iter().map(|&u| mid + half * u).collect();
        let mut weights: [Vec<f64>; 4] = Default::default();
        for (&u, &wu) in x.iter().zip(&w) {
            let d = bump(u);
            // density on [a,b] is bump(u)/(mass·half); the GL weight is wu·half.
            for (k, slot) in weights.iter_mut().enumerate() {
                slot.push(wu * d[k] / mass / half.powi(k as i32));
            }
        }
        let total: f64 = weights[0].iter().sum();
        for v in &mut weights[0] {
            *v /= total;
        }
        Self { nodes, weights }
    }
}

/// `v^ε` with its derivative evaluators.
pub struct Mollified<V: SpaceTimeFunction> {
    inner: V,
    params: MollifierParams,
    space: Factor,
    time: Factor,
}

/// Mollifies `v` at scale `params.epsilon`.
pub fn mollify<V: SpaceTimeFunction>(v: V, params: MollifierParams) -> Result<Mollified<V>> {
    params.validate()?;
    Ok(Mollified { inner: v, params, space: Factor::new(params.order, -1.0, 1.0), time: Factor::new(params.order, -1.0, 0.0) })
}

impl<V: SpaceTimeFunction> Mollified<V> {
    pub fn params(&self) -> MollifierParams {
        self.params
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }

    fn extended(&self, t: f64, x: f64) -> f64 {
        self.inner.value(t.min(1.0), x)
    }

    fn combine(&self, t: f64, x: f64, lt: usize, kx: usize) -> f64 {
        let MollifierParams { epsilon, p, .. } = self.params;
        let tau = epsilon.powf(p);
        let mut acc = 0.0;
        for (&s, &ws) in self.time.nodes.iter().zip(&self.time.weights[lt]) {
            if ws == 0.0 {
                continue;
            }
            let tt = t - tau * s;
            let mut row = 0.0;
            for (&y, &wy) in self.space.nodes.iter().zip(&self.space.weights[kx]) {
                row += wy * self.extended(tt, x - epsilon * y);
            }
            acc += ws * row;
        }
        acc * epsilon.powi(-(kx as i32)) * tau.powi(-(lt as i32))
    }

    /// `∂_t^l ∂_x^k v^ε(t, x)` for `l ≤ 1`, `l + k ≤ 3`.
    pub fn derivative(&self, l: usize, k: usize, t: f64, x: f64) -> Result<f64> {
        if l > 1 || l + k > 3 {
            return Err(LabError::Domain(format!("derivative order (l={l}, k={k}) not supported")));
        }
        Ok(self.combine(t, x, l, k))
    }
}

impl<V: SpaceTimeFunction> SpaceTimeFunction for Mollified<V> {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.combine(t, x, 0, 0)
    }
    fn time_derivative(&self, t: f64, x: f64) -> Option<f64> {
        Some(self.combine(t, x, 1, 0))
    }
    fn space_derivative(&self, order: usize, t: f64, x: f64) -> Option<f64> {
        (1..=3).contains(&order).then(|| self.combine(t, x, 0, order))
    }
    fn space_derivative_norm(&self, order: usize) -> Option<f64> {
        derivative_norm_bounds(&self.params, self.inner.modulus_constant()).get(&(0, order)).copied()
    }
    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }
    fn modulus_constant(&self) -> f64 {
        self.inner.modulus_constant()
    }
}

/// The bounds `‖∂_t^l D_x^k v^ε‖∞ ≤ 2Cε^{1−pl−k}` for all `l + k ≤ 3`.
pub fn derivative_norm_bounds(params: &MollifierParams, c: f64) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for l in 0..=3usize {
        for k in 0..=(3 - l) {
            let e = 1.0 - params.p * l as f64 - k as f64;
            out.insert((l, k), 2.0 * c * params.epsilon.powf(e));
        }
    }
    out
}

/// Measured kernel constants `∫|b^{(k)}|/∫b` of the normalized spatial bump,
/// `k = 0..=3`.
pub fn kernel_moment_constants() -> [f64; 4] {
    let mass = bump_mass();
    let mut out = [0.0; 4];
    let pts = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = integrate(|y| bump(y)[k].abs(), &pts, &QuadOptions::new(1e-12).with_budget(20_000)).value / mass;
    }
    out
}

/// First spatial moment `∫ y ζ(y) dy` of the continuous kernel.
pub fn kernel_first_moment() -> f64 {
    integrate(|y| y * bump(y)[0], &[-1.0, 0.0, 1.0], &QuadOptions::new(1e-15)).value / bump_mass()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> MollifierParams {
        MollifierParams::new(eps, 1.5).unwrap()
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for &y in &[-0.7, -0.2, 0.1, 0.55, 0.8] {
            let d = bump(y);
            let h = 1e-5;
            for k in 1..4 {
                let fd = (bump(y + h)[k - 1] - bump(y - h)[k - 1]) / (2.0 * h);
                assert!((fd - d[k]).abs() < 1e-6 * (1.0 + d[k].abs()), "k={k} y={y} {fd} {}", d[k]);
            }
        }
    }

    #[test]
    fn kernel_has_unit_mass_and_zero_first_moment() {
        let f = Factor::new(64, -1.0, 1.0);
        let mass: f64 = f.weights[0].iter().sum();
        assert!((mass - 1.0).abs() < 1e-14);
        let m1: f64 = f.nodes.iter().zip(&f.weights[0]).map(|(y, w)| y * w).sum();
        assert!(m1.abs() < 1e-15);
        assert!(kernel_first_moment().abs() < 1e-15);
        let continuous = integrate(|y| bump(y)[0], &[-1.0, 0.0, 1.0], &QuadOptions::new(1e-15)).value;
        let discrete: f64 = {
            let (x, w) = gauss_legendre(64);
            x.iter().zip(&w).map(|(&u, &wu)| wu * bump(u)[0]).sum()
        };
        assert!((continuous - discrete).abs() < 1e-10 * continuous);
    }

    #[test]
    fn constants_and_linear_functions_are_preserved() {
        let c = mollify(FnSpaceTime::new(|_, _| 2.5, 2.5, 0.0), params(0.1)).unwrap();
        assert!((c.value(0.3, 1.0) - 2.5).abs() < 1e-14);
        let lin = mollify(FnSpaceTime::new(|_, x| x, f64::INFINITY, 1.0), params(0.1)).unwrap();
        for &x in &[-2.0, 0.0, 0.7] {
            assert!((lin.value(0.4, x) - x).abs() < 1e-13);
            assert!((lin.space_derivative(1, 0.4, x).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn evaluators_match_finite_differences() {
        let v = mollify(FnSpaceTime::new(|t, x: f64| (2.0 * x).sin() + t * t, 2.0, 2.0), params(0.2)).unwrap();
        let (t, x, h) = (0.4, 0.25, 1e-4);
        let fd = (v.value(t, x + h) - v.value(t, x - h)) / (2.0 * h);
        assert!((fd - v.space_derivative(1, t, x).unwrap()).abs() < 1e-6);
        let fd2 = (v.space_derivative(1, t, x + h).unwrap() - v.space_derivative(1, t, x - h).unwrap()) / (2.0 * h);
        assert!((fd2 - v.space_derivative(2, t, x).unwrap()).abs() < 1e-5 * (1.0 + fd2.abs()));
        let ft = (v.value(t + h, x) - v.value(t - h, x)) / (2.0 * h);
        assert!((ft - v.time_derivative(t, x).unwrap()).abs() < 1e-5 * (1.0 + ft.abs()));
    }

    #[test]
    fn derivative_bounds_follow_the_power_law() {
        let b = derivative_norm_bounds(&params(0.1), 3.0);
        assert!((b[&(0, 0)] - 0.6).abs() < 1e-15);
        assert!((b[&(1, 0)] - 6.0 * 0.1f64.powf(-0.5)).abs() < 1e-12);
        let one = MollifierParams { epsilon: 1.0, p: 2.0, order: 64 };
        assert!(derivative_norm_bounds(&one, 3.0).values().all(|&v| v == 6.0));
    }

    #[test]
    fn extension_freezes_time_after_one() {
        let v = mollify(FnSpaceTime::new(|t, _| t, 1.0, 1.0), params(0.5)).unwrap();
        assert!((v.value(1.0, 0.0) - 1.0).abs() < 1e-14);
        assert!(v.value(0.99, 0.0) <= 1.0 + 1e-14);
    }
}
