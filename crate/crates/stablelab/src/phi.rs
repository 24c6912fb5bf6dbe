//! Named test functions with trusted regularity constants.
//!
//! Windowed members multiply a smooth core by `w(x/L) = (1 − (x/L)²)⁴` on
//! `|x| < L` (zero outside), which is three times continuously
//! differentiable and vanishes with its first three derivatives at `±L`.
//! Derivative norms are obtained by dense sampling of the exact derivative
//! formulas plus a mesh correction from a crude bound on the next derivative.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::stable_measure::{Flat, TestFunction};

/// Serializable selector for the named test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiSpec {
    /// `x` clipped to `[-clip, clip]`.
    ClippedIdentity { clip: f64 },
    /// `cos(frequency·x)·w(x/half_width)`.
    CosWindow { frequency: f64, half_width: f64 },
    /// `max(0, 1 − |x|/half_width)`.
    Hat { half_width: f64 },
    /// `tanh(x/scale)·w(x/half_width)`.
    TanhWindow { scale: f64, half_width: f64 },
    /// The constant `value`.
    Constant { value: f64 },
}

impl PhiSpec {
    pub fn build(&self) -> Result<NamedPhi> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LabError::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            PhiSpec::ClippedIdentity { clip } => positive("clip", clip)?,
            PhiSpec::CosWindow { frequency, half_width } => {
                positive("half_width", half_width)?;
                if !frequency.is_finite() {
                    return Err(LabError::Domain("frequency must be finite".into()));
                }
            }
            PhiSpec::Hat { half_width } => positive("half_width", half_width)?,
            PhiSpec::TanhWindow { scale, half_width } => {
                positive("scale", scale)?;
                positive("half_width", half_width)?;
            }
            PhiSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(LabError::Domain("constant must be finite".into()));
                }
            }
        }
        Ok(NamedPhi::new(self.clone()))
    }
}

/// Coefficients (ascending powers of s) of the window and its derivatives.
const WINDOW: [&[f64]; 5] = [
    &[1.0, 0.0, -4.0, 0.0, 6.0, 0.0, -4.0, 0.0, 1.0],
    &[0.0, -8.0, 0.0, 24.0, 0.0, -24.0, 0.0, 8.0],
    &[-8.0, 0.0, 72.0, 0.0, -120.0, 0.0, 56.0],
    &[0.0, 144.0, 0.0, -480.0, 0.0, 336.0],
    &[144.0, 0.0, -1440.0, 0.0, 1680.0],
];

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

fn window_derivs(s: f64) -> [f64; 5] {
    if s.abs() >= 1.0 {
        return [0.0; 5];
    }
    let mut out = [0.0; 5];
    for (j, c) in WINDOW.iter().enumerate() {
        out[j] = horner(c, s);
    }
    out
}

fn window_crude(j: usize) -> f64 {
    WINDOW[j].iter().map(|c| c.abs()).sum()
}

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

#[derive(Debug, Clone, Copy)]
enum Core {
    Cos(f64),
    Tanh(f64),
}

impl Core {
    /// Derivatives of orders 0..=4 at x.
    fn derivs(&self, x: f64) -> [f64; 5] {
        match *self {
            Core::Cos(w) => {
                let (s, c) = (w * x).sin_cos();
                [c, -w * s, -w * w * c, w.powi(3) * s, w.powi(4) * c]
            }
            Core::Tanh(sc) => {
                let t = (x / sc).tanh();
                let d = 1.0 - t * t;
                [
                    t,
                    d / sc,
                    -2.0 * t * d / sc.powi(2),
                    -2.0 * d * (1.0 - 3.0 * t * t) / sc.powi(3),
                    8.0 * t * d * (2.0 - 3.0 * t * t) / sc.powi(4),
                ]
            }
        }
    }

    fn crude(&self, k: usize) -> f64 {
        match *self {
            Core::Cos(w) => w.abs().powi(k as i32),
            Core::Tanh(sc) => [1.0, 1.0, 1.0, 2.0, 16.0][k] / sc.powi(k as i32),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Windowed {
    core: Core,
    half_width: f64,
}

impl Windowed {
    fn value(&self, x: f64) -> f64 {
        let s = x / self.half_width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let core = match self.core {
            Core::Cos(w) => (w * x).cos(),
            Core::Tanh(sc) => (x / sc).tanh(),
        };
        let q = 1.0 - s * s;
        let q2 = q * q;
        core * q2 * q2
    }

    fn derivs(&self, x: f64) -> [f64; 5] {
        let l = self.half_width;
        let g = self.core.derivs(x);
        let w = window_derivs(x / l);
        let mut out = [0.0; 5];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..=k).map(|j| BINOM[k][j] * g[k - j] * w[j] / l.powi(j as i32)).sum();
        }
        out
    }

    fn crude(&self, k: usize) -> f64 {
        let l = self.half_width;
        (0..=k).map(|j| BINOM[k][j] * self.core.crude(k - j) * window_crude(j) / l.powi(j as i32)).sum()
    }
}

/// A named test function with precomputed constants.
#[derive(Debug, Clone)]
pub struct NamedPhi {
    spec: PhiSpec,
    windowed: Option<Windowed>,
    norms: [f64; 4],
    range: (f64, f64),
}

impl NamedPhi {
    fn new(spec: PhiSpec) -> Self {
        let windowed = match spec {
            PhiSpec::CosWindow { frequency, half_width } => Some(Windowed { core: Core::Cos(frequency), half_width }),
            PhiSpec::TanhWindow { scale, half_width } => Some(Windowed { core: Core::Tanh(scale), half_width }),
            _ => None,
        };
        let (norms, range) = match (&spec, windowed) {
            (_, Some(w)) => sampled_constants(&w),
            (PhiSpec::ClippedIdentity { clip }, _) => ([*clip, 1.0, f64::NAN, f64::NAN], (-clip, *clip)),
            (PhiSpec::Hat { half_width }, _) => ([1.0, 1.0 / half_width, f64::NAN, f64::NAN], (0.0, 1.0)),
            (PhiSpec::Constant { value }, _) => ([value.abs(), 0.0, 0.0, 0.0], (*value, *value)),
            _ => unreachable!("windowed specs handled above"),
        };
        Self { spec, windowed, norms, range }
    }

    pub fn spec(&self) -> &PhiSpec {
        &self.spec
    }
}

fn sampled_constants(w: &Windowed) -> ([f64; 4], (f64, f64)) {
    let l = w.half_width;
    let m = 200_000usize;
    let dx = 2.0 * l / m as f64;
    let mut norms = [0.0f64; 4];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=m {
        let x = -l + i as f64 * dx;
        let d = w.derivs(x);
        for k in 0..4 {
            norms[k] = norms[k].max(d[k].abs());
        }
        lo = lo.min(d[0]);
        hi = hi.max(d[0]);
    }
    for (k, n) in norms.iter_mut().enumerate() {
        *n += 0.5 * dx * w.crude(k + 1);
    }
    let pad = 0.5 * dx * w.crude(1);
    (norms, (lo.min(0.0) - pad, hi.max(0.0) + pad))
}

impl TestFunction for NamedPhi {
    fn value(&self, x: f64) -> f64 {
        match self.spec {
            PhiSpec::ClippedIdentity { clip } => x.clamp(-clip, clip),
            PhiSpec::Hat { half_width } => (1.0 - x.abs() / half_width).max(0.0),
            PhiSpec::Constant { value } => value,
            _ => self.windowed.map(|w| w.value(x)).unwrap_or(0.0),
        }
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        if !(1..=3).contains(&order) {
            return None;
        }
        match self.spec {
            PhiSpec::ClippedIdentity { clip } => (order == 1).then(|| if x.abs() < clip { 1.0 } else { 0.0 }),
            PhiSpec::Hat { .. } => None,
            PhiSpec::Constant { .. } => Some(0.0),
            _ => self.windowed.map(|w| w.derivs(x)[order]),
        }
    }

    fn sup_norm(&self) -> f64 {
        self.norms[0]
    }

    fn lipschitz(&self) -> f64 {
        self.norms[1]
    }

    fn derivative_norm(&self, order: usize) -> Option<f64> {
        if !(1..=3).contains(&order) {
            return None;
        }
        let v = self.norms[order];
        (!v.is_nan()).then_some(v)
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn flat(&self) -> Option<Flat> {
        Some(match self.spec {
            PhiSpec::ClippedIdentity { clip } => Flat { lo: -clip, hi: clip, left: -clip, right: clip },
            PhiSpec::Hat { half_width } => Flat { lo: -half_width, hi: half_width, left: 0.0, right: 0.0 },
            PhiSpec::Constant { value } => Flat { lo: 0.0, hi: 0.0, left: value, right: value },
            PhiSpec::CosWindow { half_width, .. } | PhiSpec::TanhWindow { half_width, .. } => {
                Flat { lo: -half_width, hi: half_width, left: 0.0, right: 0.0 }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(phi: &NamedPhi, order: usize, x: f64) -> f64 {
        let h = 1e-3;
        let f = |k: usize, y: f64| if k == 0 { phi.value(y) } else { phi.derivative(k, y).unwrap() };
        (f(order - 1, x + h) - f(order - 1, x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for spec in [PhiSpec::CosWindow { frequency: 1.3, half_width: 4.0 }, PhiSpec::TanhWindow { scale: 0.7, half_width: 5.0 }]
        {
            let phi = spec.build().unwrap();
            for &x in &[-3.1, -0.4, 0.0, 0.9, 2.5, 3.9] {
                for order in 1..=3 {
                    let exact = phi.derivative(order, x).unwrap();
                    assert!((exact - fd(&phi, order, x)).abs() < 1e-4, "{spec:?} order {order} at {x}");
                }
            }
        }
    }

    #[test]
    fn window_is_c3_at_the_edge() {
        let phi = PhiSpec::CosWindow { frequency: 2.0, half_width: 3.0 }.build().unwrap();
        for order in 1..=3 {
            assert!(phi.derivative(order, 3.0 - 1e-9).unwrap().abs() < 1e-6);
        }
        assert_eq!(phi.value(3.5), 0.0);
    }

    #[test]
    fn norms_bound_samples() {
        let phi = PhiSpec::TanhWindow { scale: 0.5, half_width: 6.0 }.build().unwrap();
        let mut x = -6.0;
        while x <= 6.0 {
            assert!(phi.value(x).abs() <= phi.sup_norm());
            for k in 1..=3 {
                assert!(phi.derivative(k, x).unwrap().abs() <= phi.derivative_norm(k).unwrap());
            }
            x += 0.0137;
        }
        let cw = PhiSpec::CosWindow { frequency: 1.0, half_width: 8.0 }.build().unwrap();
        assert!((cw.sup_norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(PhiSpec::Hat { half_width: 0.0 }.build().is_err());
        assert!(PhiSpec::TanhWindow { scale: -1.0, half_width: 1.0 }.build().is_err());
    }
}
