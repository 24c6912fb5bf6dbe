//! The sublinear expectation `Ê[f] = sup_k ∫ f dF_{W_k}` over the closed
//! square of spectral weights, and capped estimates of the moment bound `M_δ`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scheme::{run_steps, SchemeParams};
use crate::stable_measure::{half_line_integrals, Corner, FnTestFunction, Regime, StableConfig, TestFunction, UncertaintySet};
use crate::wk_family::{make_example_distribution, TailCoefficients, WkDistribution};

/// The family of distributions indexed by the uncertainty square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublinearSpace {
    pub cfg: StableConfig,
    pub set: UncertaintySet,
    pub tails: TailCoefficients,
    pub quad_tol: f64,
    corners: Vec<WkDistribution>,
}

/// An expectation together with the maximizing weights and error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: f64,
    pub corner: Corner,
    pub error: f64,
}

impl SublinearSpace {
    /// Builds the space; every corner of the square must be a valid member.
    pub fn new(cfg: StableConfig, set: UncertaintySet, tails: TailCoefficients, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(LabError::Domain("quad_tol must be positive".into()));
        }
        let corners = admissible_corners(&set, &cfg)
            .into_iter()
            .map(|k| make_example_distribution(cfg, k, tails))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, set, tails, quad_tol, corners })
    }

    /// Weights at which the supremum over the admissible set is attained.
    pub fn corner_weights(&self) -> Vec<Corner> {
        self.corners.iter().map(|w| w.k).collect()
    }

    /// The member with weights `k` (any point of the square).
    pub fn member(&self, k: Corner) -> Result<WkDistribution> {
        make_example_distribution(self.cfg, k, self.tails)
    }

    /// Members at the distinct corners of the square.
    pub fn corner_members(&self) -> &[WkDistribution] {
        &self.corners
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.alpha()
    }

    pub fn with_quad_tol(&self, quad_tol: f64) -> Self {
        Self { quad_tol, ..self.clone() }
    }
}

/// Extreme points of the admissible weights. For `α ≤ 1` the family is
/// only defined on the diagonal `k1 = k2`, whose endpoints replace the four
/// corners of the square.
pub fn admissible_corners(set: &UncertaintySet, cfg: &StableConfig) -> Vec<Corner> {
    if cfg.regime() == Regime::SuperOne || set.is_singleton() {
        set.corners()
    } else {
        vec![Corner::symmetric(set.lambda_lower), Corner::symmetric(set.lambda_upper)]
    }
}

fn admissible_lattice(space: &SublinearSpace, m: usize) -> Vec<Corner> {
    if space.cfg.regime() == Regime::SuperOne {
        space.set.lattice(m)
    } else {
        let m = m.max(2);
        let (l, u) = (space.set.lambda_lower, space.set.lambda_upper);
        (0..m).map(|i| Corner::symmetric(l + (u - l) * i as f64 / (m - 1) as f64)).collect()
    }
}

fn check_bounded(sup_norm: f64) -> Result<()> {
    if !sup_norm.is_finite() || sup_norm < 0.0 {
        return Err(LabError::Contract(format!("integrand must be bounded, got sup norm {sup_norm}")));
    }
    Ok(())
}

fn member_integral(w: &WkDistribution, f: &dyn Fn(f64) -> f64, sup_norm: f64, tol: f64) -> Result<(f64, f64)> {
    let violation = std::cell::Cell::new(0.0f64);
    let g = |x: f64| {
        let v = f(x);
        if v.abs() > sup_norm * (1.0 + 1e-12) + 1e-300 {
            violation.set(violation.get().max(v.abs()));
        }
        v
    };
    let q = w.integrate(&g, sup_norm.max(f64::MIN_POSITIVE), tol);
    if violation.get() > 0.0 {
        return Err(LabError::Contract(format!(
            "integrand reached {:.6e}, above its declared sup norm {sup_norm:.6e}",
            violation.get()
        )));
    }
    if !q.converged {
        return Err(LabError::Accuracy { requested: tol, achieved: q.error });
    }
    Ok((q.value, q.error))
}

/// `Ê[f]` with the maximizing corner. The map `k ↦ ∫ f dF_{W_k}` is affine,
/// so the maximum over the square is attained at a corner.
pub fn expect_detailed(space: &SublinearSpace, f: &dyn Fn(f64) -> f64, sup_norm: f64) -> Result<Expectation> {
    check_bounded(sup_norm)?;
    let mut best = Expectation { value: f64::NEG_INFINITY, corner: space.corners[0].k, error: 0.0 };
    for w in &space.corners {
        let (v, e) = member_integral(w, f, sup_norm, space.quad_tol)?;
        if v > best.value {
            best = Expectation { value: v, corner: w.k, error: e };
        }
    }
    Ok(best)
}

/// `Ê[f]`.
pub fn expect(space: &SublinearSpace, f: &dyn Fn(f64) -> f64, sup_norm: f64) -> Result<f64> {
    expect_detailed(space, f, sup_norm).map(|e| e.value)
}

/// `Ê[f(x + s^{1/α} Z)]`.
pub fn expect_shifted(space: &SublinearSpace, f: &dyn Fn(f64) -> f64, sup_norm: f64, x: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(LabError::Domain(format!("shift scale s = {s} must lie in (0,1]")));
    }
    let c = s.powf(1.0 / space.alpha());
    expect(space, &|z| f(x + c * z), sup_norm)
}

/// `sup_k ∫ δ_λ^α φ(x) F_k(dλ)` over the admissible weights of `space`, with
/// absolute error at most `tol`.
pub fn sup_generator(space: &SublinearSpace, phi: &dyn TestFunction, x: f64, tol: f64) -> Result<f64> {
    let h = half_line_integrals(phi, x, &space.cfg, tol / space.set.lambda_upper)?;
    Ok(space.corner_weights().into_iter().map(|k| h.combine(k)).fold(f64::NEG_INFINITY, f64::max))
}

/// Largest excess of a lattice scan (`m × m` on the square, `m` points on the
/// diagonal when `α ≤ 1`) over the corner maximum; a guard for the affine
/// structure in `k`.
pub fn lattice_gap(space: &SublinearSpace, f: &dyn Fn(f64) -> f64, sup_norm: f64, m: usize) -> Result<f64> {
    let top = expect(space, f, sup_norm)?;
    let mut worst = f64::NEG_INFINITY;
    for k in admissible_lattice(space, m) {
        let w = space.member(k)?;
        let (v, _) = member_integral(&w, f, sup_norm, space.quad_tol)?;
        worst = worst.max(v - top);
    }
    Ok(worst)
}

/// Capped moment estimates `Ê[min(|n^{-1/α} S_n|^δ, cap)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub delta: f64,
    pub cap: f64,
    /// `(n, value)` for `n = 1..=n_max`.
    pub values: Vec<(usize, f64)>,
    /// Running maximum of `values`.
    pub running_max: Vec<f64>,
    pub m_delta_lower: f64,
    /// `(n, value)` with the cap divided by ten.
    pub cap_sensitivity: Vec<(usize, f64)>,
}

/// Grid used by [`moment_mdelta`]: half-width and spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentGrid {
    pub half_width: f64,
    pub spacing: f64,
}

impl Default for MomentGrid {
    fn default() -> Self {
        Self { half_width: 400.0, spacing: 0.05 }
    }
}

fn capped_power(delta: f64, cap: f64) -> FnTestFunction {
    FnTestFunction::new(move |x: f64| x.abs().powf(delta).min(cap), cap, f64::INFINITY).with_range(0.0, cap)
}

/// Runs the scheme with `φ = min(|x|^δ, cap)` and `h = 1/n` for every
/// `n ≤ n_max` and reports the values at the origin. The constant boundary
/// extension of the grid caps the integrand at `half_width^δ` as well, so
/// the effective cap is `min(cap, half_width^δ)`.
pub fn moment_mdelta(space: &SublinearSpace, n_max: usize, cap: f64, grid: MomentGrid) -> Result<MomentEstimate> {
    if !(cap > 0.0) {
        return Err(LabError::Domain("cap must be positive".into()));
    }
    if n_max == 0 {
        return Err(LabError::Domain("n_max must be at least 1".into()));
    }
    let delta = space.cfg.delta();
    let effective = cap.min(grid.half_width.powf(delta));
    let eval = |c: f64| -> Result<Vec<(usize, f64)>> {
        let phi = capped_power(delta, c);
        (1..=n_max)
            .map(|n| {
                let params = SchemeParams::new(n, grid.half_width, grid.spacing).without_certificate();
                let run = run_steps(&phi, space, &params, n, false)?;
                Ok((n, run.center_value.min(c)))
            })
            .collect()
    };
    let values = eval(effective)?;
    let cap_sensitivity = eval(effective / 10.0)?;
    let mut running_max = Vec::with_capacity(values.len());
    let mut m = f64::NEG_INFINITY;
    for &(_, v) in &values {
        m = m.max(v);
        running_max.push(m);
    }
    Ok(MomentEstimate { delta, cap: effective, values, running_max, m_delta_lower: m, cap_sensitivity })
}

/// A bounded smooth function used by the axiom suites: a combination of
/// shifted `tanh` and Gaussian bumps with a declared sup norm.
pub fn random_bounded(coeffs: &[(f64, f64, f64, bool)]) -> (impl Fn(f64) -> f64 + Clone + Send + Sync, f64) {
    let cs: Vec<(f64, f64, f64, bool)> = coeffs.to_vec();
    let sup = cs.iter().map(|c| c.0.abs()).sum::<f64>();
    let f = move |x: f64| {
        cs.iter()
            .map(|&(a, b, s, bump)| {
                let y = b * (x - s);
                if bump {
                    a * (-y * y).exp()
                } else {
                    a * y.tanh()
                }
            })
            .sum::<f64>()
    };
    (f, sup)
}
