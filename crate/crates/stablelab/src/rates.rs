//! Rate calculus: the proven exponent Γ and its specialization to the
//! example family, the mollification schedule `ε = h^γ`, the residual
//! budgets ρ₁/ρ₂, closed-form consistency moduli, and empirical fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::reference::{Level, ReferenceValue};
use crate::scheme::{run, SchemeParams};
use crate::stable_measure::{Regime, StableConfig, TestFunction};
use crate::sublinear::{expect_shifted, sup_generator, SublinearSpace};
use crate::wk_family::TailCoefficients;

/// Γ(α, δ, q₀).
pub fn gamma_rate(cfg: &StableConfig, q0: f64) -> Result<f64> {
    if !(q0 > 0.0) {
        return Err(LabError::Domain(format!("q0 = {q0} must be positive")));
    }
    let (a, d) = (cfg.alpha(), cfg.delta());
    Ok(match cfg.regime() {
        Regime::SuperOne => ((2.0 - a) / (2.0 * a)).min(q0 / 2.0),
        Regime::CriticalOne => (d / 2.0).min(d * d / (1.0 + d * d)).min(q0 / 2.0),
        Regime::SubOne => (d / (2.0 * a)).min(d * d / (a * (a + d * d))).min((1.0 - a) / a).min(a * q0),
    })
}

/// Γ specialized to the example family with tail exponent β; `eps0` is the
/// small loss on the boundary branches.
pub fn gamma_rate_example(cfg: &StableConfig, tails: &TailCoefficients, eps0: f64) -> Result<f64> {
    let (a, d, b) = (cfg.alpha(), cfg.delta(), tails.beta);
    if !(b > a) {
        return Err(LabError::Domain(format!("beta = {b} must exceed alpha = {a}")));
    }
    if !(eps0 > 0.0) {
        return Err(LabError::Domain("eps0 must be positive".into()));
    }
    let m_delta = |x: f64| x.min(d * d / (a * (a + d * d)));
    Ok(match cfg.regime() {
        Regime::SuperOne if b == 2.0 => (2.0 - a) / (2.0 * a) - eps0,
        Regime::SuperOne => ((b - a) / (2.0 * a)).min((2.0 - a) / (2.0 * a)),
        Regime::SubOne if b == 1.0 => m_delta(d / (2.0 * a)).min(1.0 - a - eps0),
        Regime::SubOne => m_delta(d / (2.0 * a)).min(b - a).min(1.0 - a),
        Regime::CriticalOne if b == 2.0 => (d / 2.0).min(d * d / (1.0 + d * d)).min(0.5 - eps0),
        Regime::CriticalOne => (d / 2.0).min(d * d / (1.0 + d * d)).min((b - 1.0) / 2.0),
    })
}

/// `ε = h^γ` with `γ = Γ(α, δ, q₀)`.
pub fn epsilon_schedule(h: f64, cfg: &StableConfig, q0: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(LabError::Domain(format!("h = {h} must lie in (0,1)")));
    }
    Ok(h.powf(gamma_rate(cfg, q0)?))
}

/// Sup norm and derivative norms `‖D^k ψ‖∞`, `k = 1, 2`, of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorms {
    pub sup: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Closed-form consistency modulus `l_ψ(s)` of the example family for the
/// regime of `cfg`.
pub fn l_phi_bound(cfg: &StableConfig, norms: &DerivativeNorms, c_beta: f64, q0: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(LabError::Domain(format!("s = {s} must lie in (0,1]")));
    }
    if !(q0 > 0.0) {
        return Err(LabError::Domain(format!("q0 = {q0} must be positive")));
    }
    let a = cfg.alpha();
    let DerivativeNorms { sup, d1, d2 } = *norms;
    Ok(match cfg.regime() {
        Regime::SuperOne => (16.0 * c_beta * d1 + 2.0 * c_beta * d2) * s.powf(q0) + 4.0 * c_beta * d2 * s.powf((2.0 - a) / a),
        Regime::SubOne => {
            8.0 * c_beta * d1 * s.powf(q0)
                + 4.0 * c_beta * d1 * s.powf((1.0 - a) / a)
                + c_beta * (8.0 * sup + 2.0 * d1 / (1.0 - a)) * s.powf(a * q0)
        }
        Regime::CriticalOne => 3.0 * c_beta * d2 * s + (4.0 * d2 + 2.0 * (1.0 + 1.0 / q0) * d1) * c_beta * s.powf(q0),
    })
}

/// The smallest exponent among the powers of `s` in [`l_phi_bound`].
pub fn l_phi_exponent(cfg: &StableConfig, q0: f64) -> f64 {
    let a = cfg.alpha();
    match cfg.regime() {
        Regime::SuperOne => q0.min((2.0 - a) / a),
        Regime::SubOne => q0.min((1.0 - a) / a).min(a * q0),
        Regime::CriticalOne => q0.min(1.0),
    }
}

/// Constants entering the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Regularity constant `K` of the limit.
    pub k: f64,
    /// Capped estimate of `M_δ`.
    pub m_delta: f64,
    pub c_beta: f64,
    pub c_phi: f64,
    pub sup_phi: f64,
    pub q0: f64,
}

impl ErrorBudget {
    /// Budget with `K = max(C_φ^δ (2‖φ‖∞)^{1−δ} M_δ, C_φ)`.
    pub fn new(cfg: &StableConfig, c_phi: f64, sup_phi: f64, m_delta: f64, c_beta: f64, q0: f64) -> Self {
        let d = cfg.delta();
        let k = (c_phi.powf(d) * (2.0 * sup_phi).powf(1.0 - d) * m_delta).max(c_phi);
        Self { k, m_delta, c_beta, c_phi, sup_phi, q0 }
    }
}

/// `(ρ₁, ρ₂)` at `(ε, h)`.
///
/// ρ₁ uses the mollified limit, with `‖D^k u^ε‖∞ ≤ 2Kε^{1−k}`; ρ₂ uses the
/// mollified scheme, with `‖D^k u_h^ε‖∞ ≤ 2K(ε + h^{δ/α})ε^{−k}`.
pub fn rho_bounds(eps: f64, h: f64, cfg: &StableConfig, budget: &ErrorBudget) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps <= 1.0 && h > 0.0 && h <= 1.0) {
        return Err(LabError::Domain(format!("need eps, h in (0,1], got eps = {eps}, h = {h}")));
    }
    let (a, d) = (cfg.alpha(), cfg.delta());
    let ErrorBudget { k, m_delta, c_beta, sup_phi, q0, .. } = *budget;
    let hd = h.powf(d / a);
    let u_eps = DerivativeNorms { sup: sup_phi, d1: 2.0 * k, d2: 2.0 * k / eps };
    let rho1 = k * eps.powf(1.0 - 2.0 * a / d) * h
        + 8.0 * k * k * m_delta * eps.powf(1.0 - a / d - d) * hd
        + l_phi_bound(cfg, &u_eps, c_beta, q0, h)?;
    let w = eps + hd;
    let uh_eps = DerivativeNorms { sup: sup_phi, d1: 2.0 * k * w / eps, d2: 2.0 * k * w / (eps * eps) };
    let rho2 = k * w * eps.powf(-2.0 * a / d) * h
        + 8.0 * k * k * m_delta * w * eps.powf(-a / d - d) * hd
        + l_phi_bound(cfg, &uh_eps, c_beta, q0, h)?;
    Ok((rho1, rho2))
}

/// The two-sided bound `max(Kh^{δ/α} + 4Kε + ρ₁, 2Kh^{δ/α} + 4Kε + ρ₂)`
/// with `ε` from [`epsilon_schedule`].
pub fn theorem_bound(h: f64, cfg: &StableConfig, budget: &ErrorBudget) -> Result<f64> {
    let eps = epsilon_schedule(h, cfg, budget.q0)?;
    let (rho1, rho2) = rho_bounds(eps, h, cfg, budget)?;
    let hd = h.powf(cfg.delta() / cfg.alpha());
    let upper = budget.k * hd + 4.0 * budget.k * eps + rho1;
    let lower = 2.0 * budget.k * hd + 4.0 * budget.k * eps + rho2;
    Ok(upper.max(lower))
}

/// Least-squares power-law fit `error ≈ C h^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// `ln C`.
    pub intercept: f64,
    /// `max_i |error_i / fit_i − 1|`.
    pub max_relative_residual: f64,
}

/// Fits `ln error = intercept + slope · ln h`, `h = 1/n`.
pub fn fit_rate(samples: &[(usize, f64)]) -> Result<RateFit> {
    if samples.len() < 4 {
        return Err(LabError::Data(format!("need at least four samples, got {}", samples.len())));
    }
    let pts = samples
        .iter()
        .map(|&(n, e)| {
            if n == 0 || !(e > 0.0) || !e.is_finite() {
                Err(LabError::Data(format!("sample (n = {n}, error = {e}) cannot enter a log fit")))
            } else {
                Ok((-(n as f64).ln(), e.ln()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (slope, intercept) = log_fit(&pts);
    let max_relative_residual = pts.iter().map(|&(x, y)| ((y - intercept - slope * x).exp() - 1.0).abs()).fold(0.0, f64::max);
    Ok(RateFit { slope, intercept, max_relative_residual })
}

fn log_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Accuracy of the generator term in the measured modulus.
const GENERATOR_TOL: f64 = 1e-8;

/// Measured consistency modulus with its fitted decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    /// `(s, sup_x |s⁻¹(Ê[φ(x+s^{1/α}Z)] − φ(x)) − sup_k G_k φ(x)|)`.
    pub samples: Vec<(f64, f64)>,
    pub exponent: f64,
    /// `C` in the fit `C s^exponent`.
    pub constant: f64,
    /// Smallest exponent of the closed-form modulus.
    pub predicted_exponent: f64,
}

/// Measures the one-step consistency modulus of `phi` on the points `xs`
/// for each `s` and fits `C s^q`.
pub fn measure_consistency_modulus(
    space: &SublinearSpace,
    phi: &dyn TestFunction,
    s_set: &[f64],
    xs: &[f64],
    q0: f64,
) -> Result<ModulusReport> {
    if s_set.len() < 4 {
        return Err(LabError::Data(format!("need at least four values of s, got {}", s_set.len())));
    }
    if xs.is_empty() {
        return Err(LabError::Data("need at least one evaluation point".into()));
    }
    let generator = xs.iter().map(|&x| sup_generator(space, phi, x, GENERATOR_TOL)).collect::<Result<Vec<_>>>()?;
    let f = |y: f64| phi.value(y);
    let mut samples = Vec::with_capacity(s_set.len());
    for &s in s_set {
        let mut worst = 0.0f64;
        for (&x, &g) in xs.iter().zip(&generator) {
            let e = expect_shifted(space, &f, phi.sup_norm(), x, s)?;
            worst = worst.max(((e - phi.value(x)) / s - g).abs());
        }
        samples.push((s, worst));
    }
    let pts: Vec<(f64, f64)> = samples.iter().filter(|p| p.1 > 0.0).map(|&(s, m)| (s.ln(), m.ln())).collect();
    let (exponent, intercept) = if pts.len() >= 2 { log_fit(&pts) } else { (f64::INFINITY, f64::NEG_INFINITY) };
    Ok(ModulusReport { samples, exponent, constant: intercept.exp(), predicted_exponent: l_phi_exponent(&space.cfg, q0) })
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub value: f64,
    pub certificate: f64,
    pub reference: f64,
    pub error: f64,
}

/// A convergence study against a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub reference: ReferenceValue,
    /// `None` when some error vanishes (for example a constant φ).
    pub fit: Option<RateFit>,
    pub gamma_theoretical: f64,
    /// Exponent `γ` of the schedule `ε = h^γ`.
    pub epsilon_exponent: f64,
}

impl RateReport {
    /// Builds the report from scheme levels and a reference.
    pub fn from_levels(levels: &[Level], reference: ReferenceValue, gamma_theoretical: f64) -> Self {
        let rows: Vec<RateRow> = levels
            .iter()
            .map(|l| RateRow {
                n: l.n,
                value: l.value,
                certificate: l.certificate,
                reference: reference.value,
                error: (l.value - reference.value).abs(),
            })
            .collect();
        let samples: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.error)).collect();
        let fit = fit_rate(&samples).ok();
        Self { rows, reference, fit, gamma_theoretical, epsilon_exponent: gamma_theoretical }
    }

    /// Whether `error(2n) ≤ error(n)` along the rows.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error <= w[0].error)
    }

    /// CSV with columns `n,value,certificate,reference,error`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,value,certificate,reference,error")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e},{:e},{:e}", r.n, r.value, r.certificate, r.reference, r.error)?;
        }
        Ok(())
    }
}

/// Runs the scheme for each `n` with the grid of `template`.
pub fn convergence_levels(
    phi: &dyn TestFunction,
    space: &SublinearSpace,
    ns: &[usize],
    template: &SchemeParams,
) -> Result<Vec<Level>> {
    ns.iter()
        .map(|&n| {
            let r = run(phi, space, &SchemeParams { n, ..template.clone() })?;
            Ok(Level { n, value: r.center_value, certificate: r.certificate })
        })
        .collect()
}
