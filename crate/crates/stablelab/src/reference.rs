//! Reference values for the limit `u(1, 0)`: geometric extrapolation of the
//! scheme, a characteristic-function oracle for a single symmetric stable
//! law, and the one-step consistency residual of smooth space–time
//! functions.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mollify::{SpaceTimeFunction, TimeSlice};
use crate::quadrature::{integrate, FixedRule, QuadOptions};
use crate::scheme::{run, SchemeParams};
use crate::stable_measure::TestFunction;
use crate::sublinear::{expect_shifted, sup_generator, SublinearSpace};

/// How a reference value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    Extrapolated,
    FourierOracle,
}

/// A reference value with a bound on its distance to the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub method: ReferenceMethod,
    pub certified_error: f64,
}

/// One level of a convergence study: `(n, value, certificate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub value: f64,
    pub certificate: f64,
}

/// Fits `v_∞ + C h^γ` (γ free) through the three finest of the given
/// levels, which must double from one to the next.
///
/// Differences of opposite sign beyond the level certificates are an
/// extrapolation error. When the differences do not contract the model
/// cannot be fitted: if they lie within the certificates the finest value
/// is returned with its spread added to the certificate, otherwise the
/// levels are reported as pre-asymptotic.
pub fn extrapolate_levels(levels: &[Level]) -> Result<ReferenceValue> {
    if levels.len() < 3 {
        return Err(LabError::Contract(format!("need at least three levels, got {}", levels.len())));
    }
    for w in levels.windows(2) {
        if w[1].n != 2 * w[0].n {
            return Err(LabError::Contract(format!("levels must double: {} then {}", w[0].n, w[1].n)));
        }
    }
    let [a, b, c] = [levels[levels.len() - 3], levels[levels.len() - 2], levels[levels.len() - 1]];
    let d1 = b.value - a.value;
    let d2 = c.value - b.value;
    let within = d1.abs() <= a.certificate + b.certificate && d2.abs() <= b.certificate + c.certificate;
    if d1 * d2 < 0.0 && !within {
        return Err(LabError::Extrapolation(format!(
            "level differences change sign ({d1:.3e}, {d2:.3e}) beyond the certificates"
        )));
    }
    let r = if d1 != 0.0 { d2 / d1 } else { f64::INFINITY };
    if !(0.0..1.0).contains(&r) {
        if within {
            return Ok(ReferenceValue {
                value: c.value,
                method: ReferenceMethod::Extrapolated,
                certified_error: d2.abs() + c.certificate,
            });
        }
        return Err(LabError::Extrapolation(format!(
            "level differences do not contract (ratio {r:.4}); the levels are pre-asymptotic"
        )));
    }
    let value = c.value + d2 * r / (1.0 - r);
    Ok(ReferenceValue { value, method: ReferenceMethod::Extrapolated, certified_error: (c.value - value).abs() + c.certificate })
}

/// Runs the scheme at each `n` (with the grid of `template`) and
/// extrapolates `u_h(1, 0)`.
pub fn extrapolated_reference(
    phi: &dyn TestFunction,
    space: &SublinearSpace,
    n_levels: &[usize],
    template: &SchemeParams,
) -> Result<ReferenceValue> {
    let levels = scheme_levels(phi, space, n_levels, template)?;
    extrapolate_levels(&levels)
}

/// Scheme values and certificates at each `n`.
pub fn scheme_levels(
    phi: &dyn TestFunction,
    space: &SublinearSpace,
    n_levels: &[usize],
    template: &SchemeParams,
) -> Result<Vec<Level>> {
    n_levels
        .iter()
        .map(|&n| {
            let params = SchemeParams { n, ..template.clone() };
            let r = run(phi, space, &params)?;
            Ok(Level { n, value: r.center_value, certificate: r.certificate })
        })
        .collect()
}

/// `σ_α = 2∫_0^∞ (1 − cos r) r^{−1−α} dr` with an absolute error bound.
pub fn sigma_alpha(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(LabError::Domain(format!("alpha = {alpha} must lie in (0,2)")));
    }
    let f = |r: f64| {
        let one_minus_cos = if r < 1e-3 { r * r * (0.5 - r * r / 24.0) } else { 1.0 - r.cos() };
        one_minus_cos * r.powf(-1.0 - alpha)
    };
    let near = integrate(f, &[0.0, 0.25, 0.5, 1.0], &QuadOptions::new(1e-14).with_budget(10_000));
    // [1, T] with T a multiple of 2π, split at multiples of π.
    let periods = 4000usize;
    let top = 2.0 * std::f64::consts::PI * periods as f64;
    let mut pts = vec![1.0];
    pts.extend((1..=2 * periods).map(|j| j as f64 * std::f64::consts::PI));
    let mid = integrate(f, &pts, &QuadOptions::new(1e-14).with_budget(100_000));
    // ∫_T^∞ r^{−1−α} is exact. Integrating by parts twice, ∫_T^∞ cos r · r^{−1−α}
    // equals (1+α)T^{−2−α} up to an error of at most the same size.
    let tail_cos = (1.0 + alpha) * top.powf(-2.0 - alpha);
    let tail = top.powf(-alpha) / alpha - tail_cos;
    let value = 2.0 * (near.value + mid.value + tail);
    let error = 2.0 * (near.error + mid.error + tail_cos);
    Ok((value, error))
}

/// Density at `y` of the symmetric stable law with characteristic function
/// `exp(−t c σ_α |ξ|^α)`.
pub fn stable_density(y: f64, t: f64, alpha: f64, c: f64) -> Result<f64> {
    if !(t > 0.0 && c > 0.0) {
        return Err(LabError::Domain(format!("need t > 0 and c > 0, got t = {t}, c = {c}")));
    }
    let (sigma, _) = sigma_alpha(alpha)?;
    let s = t * c * sigma;
    let top = (40.0 / s).powf(1.0 / alpha);
    let step = if y == 0.0 { top / 8.0 } else { (std::f64::consts::PI / y.abs()).min(top / 8.0) };
    let pts = breakpoints(top, step);
    let q = integrate(|xi| (y * xi).cos() * (-s * xi.powf(alpha)).exp(), &pts, &QuadOptions::new(1e-13).with_budget(100_000));
    Ok(q.value / std::f64::consts::PI)
}

fn breakpoints(top: f64, step: f64) -> Vec<f64> {
    let count = (top / step).ceil().max(1.0) as usize;
    (0..=count).map(|j| (j as f64 * step).min(top)).collect()
}

/// `u(t, x) = E[φ(x + Y_t)]` for the symmetric stable law with weight `c`
/// on both half-lines.
///
/// Writing `φ` through its derivative and the distribution function of
/// `Y_t` gives `u = (φ(−∞)+φ(+∞))/2 − π⁻¹∫_0^∞ e^{−sξ^α} ξ⁻¹ S(ξ) dξ` with
/// `S(ξ) = ∫ φ'(z) sin((z−x)ξ) dz` and `s = t c σ_α`. Two integrations by
/// parts give `|S(ξ)| ≤ V₃ ξ⁻²`, `V₃ = (hi − lo)‖D³φ‖`, which bounds the
/// truncation of the frequency integral.
pub fn fourier_oracle(phi: &dyn TestFunction, t: f64, x: f64, alpha: f64, c: f64, tol: f64) -> Result<ReferenceValue> {
    if !(t > 0.0 && c > 0.0 && tol > 0.0) {
        return Err(LabError::Domain(format!("need t, c, tol > 0, got t = {t}, c = {c}, tol = {tol}")));
    }
    let flat = phi.flat().ok_or_else(|| {
        LabError::Capability("the Fourier oracle needs a test function that is constant outside an interval".into())
    })?;
    let d3 = phi
        .derivative_norm(3)
        .ok_or_else(|| LabError::Capability("the Fourier oracle needs the norm of the third derivative".into()))?;
    if phi.derivative(1, 0.5 * (flat.lo + flat.hi)).is_none() {
        return Err(LabError::Capability("the Fourier oracle needs the first derivative".into()));
    }
    let (sigma, sigma_err) = sigma_alpha(alpha)?;
    let s = t * c * sigma;
    let width = flat.hi - flat.lo;
    let v3 = width * d3;
    let truncation = |xi: f64| v3 * (-s * xi.powf(alpha)).exp() / (2.0 * std::f64::consts::PI * xi * xi);
    let mut top = 1.0;
    while truncation(top) > tol / 4.0 {
        top *= 1.25;
    }

    // Nodes for S(ξ): GL16 panels at most half a period of the top frequency wide.
    let rule = FixedRule::new(16);
    let panel = (std::f64::consts::PI / top).min(0.5);
    let panels = (width / panel).ceil().max(1.0) as usize;
    let mut nodes = Vec::with_capacity(16 * panels);
    let mut v1 = 0.0;
    for j in 0..panels {
        let a = flat.lo + width * j as f64 / panels as f64;
        let b = flat.lo + width * (j + 1) as f64 / panels as f64;
        for (z, w) in rule.mapped(a, b) {
            let d = phi.derivative(1, z).unwrap_or(0.0);
            v1 += w * (d * (z - x)).abs();
            nodes.push((z - x, w * d));
        }
    }
    let s_of = |xi: f64| nodes.iter().map(|&(dz, wd)| wd * (dz * xi).sin()).sum::<f64>();
    let reach = (flat.lo - x).abs().max((flat.hi - x).abs()).max(1e-3);
    let pts = breakpoints(top, std::f64::consts::PI / reach);
    let q = integrate(
        |xi: f64| (-s * xi.powf(alpha)).exp() * s_of(xi) / xi,
        &pts,
        &QuadOptions::new(tol / 4.0).with_budget(200_000).with_bound(v1),
    );
    let pi = std::f64::consts::PI;
    let value = 0.5 * (flat.left + flat.right) - q.value / pi;
    // |∂u/∂s| ≤ π⁻¹ V₁ ∫ ξ^α e^{−sξ^α} dξ with V₁ = ∫|φ'(z)(z−x)| dz.
    let moment = integrate(
        |xi: f64| xi.powf(alpha) * (-s * xi.powf(alpha)).exp(),
        &breakpoints(top, top / 16.0),
        &QuadOptions::new(1e-10),
    );
    let sigma_effect = t * c * sigma_err * v1 * (moment.value + moment.error) / pi;
    let rounding = 64.0 * f64::EPSILON * (v1 * top + flat.left.abs() + flat.right.abs());
    let certified_error = truncation(top) + q.error / pi + sigma_effect + rounding;
    if certified_error > tol {
        return Err(LabError::Accuracy { requested: tol, achieved: certified_error });
    }
    Ok(ReferenceValue { value, method: ReferenceMethod::FourierOracle, certified_error })
}

/// Fourier oracle for a singleton symmetric uncertainty set; any other set
/// is a capability error.
pub fn fourier_reference(phi: &dyn TestFunction, space: &SublinearSpace, t: f64, x: f64, tol: f64) -> Result<ReferenceValue> {
    if !space.set.is_singleton() {
        return Err(LabError::Capability(format!(
            "the Fourier oracle needs a singleton uncertainty set, got [{}, {}]",
            space.set.lambda_lower, space.set.lambda_upper
        )));
    }
    fourier_oracle(phi, t, x, space.alpha(), space.set.lambda_lower, tol)
}

/// `|∂_t v − sup_k G_k v(t,·)(x) − h⁻¹(v(t,x) − Ê[v(t−h, x + h^{1/α}Z)])|`.
pub fn consistency_residual(v: &dyn SpaceTimeFunction, t: f64, x: f64, h: f64, space: &SublinearSpace) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0 && t >= h) {
        return Err(LabError::Domain(format!("need 0 < h <= t and h <= 1, got t = {t}, h = {h}")));
    }
    let dt = v.time_derivative(t, x).ok_or_else(|| LabError::Capability("the residual needs the time derivative".into()))?;
    let slice = TimeSlice { function: v, t };
    let generator = sup_generator(space, &slice, x, space.quad_tol)?;
    let earlier = |y: f64| v.value(t - h, y);
    let step = expect_shifted(space, &earlier, v.sup_norm(), x, h)?;
    Ok((dt - generator - (v.value(t, x) - step) / h).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::PhiSpec;
    use crate::stable_measure::FnTestFunction;

    fn lv(n: usize, value: f64, certificate: f64) -> Level {
        Level { n, value, certificate }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let levels: Vec<Level> = [8usize, 16, 32].iter().map(|&n| lv(n, 1.0 + 2.0 * (n as f64).powf(-0.3), 0.0)).collect();
        let r = extrapolate_levels(&levels).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn constant_levels_return_the_certificate_only() {
        let levels = vec![lv(4, 0.7, 1e-6), lv(8, 0.7, 1e-6), lv(16, 0.7, 1e-6)];
        let r = extrapolate_levels(&levels).unwrap();
        assert_eq!(r.value, 0.7);
        assert_eq!(r.certified_error, 1e-6);
    }

    #[test]
    fn oscillating_levels_are_rejected() {
        let levels = vec![lv(4, 0.7, 1e-6), lv(8, 0.8, 1e-6), lv(16, 0.75, 1e-6)];
        assert!(matches!(extrapolate_levels(&levels), Err(LabError::Extrapolation(_))));
        let growing = vec![lv(4, 0.7, 1e-6), lv(8, 0.71, 1e-6), lv(16, 0.73, 1e-6)];
        assert!(matches!(extrapolate_levels(&growing), Err(LabError::Extrapolation(_))));
    }

    #[test]
    fn sigma_one_is_pi() {
        let (s, e) = sigma_alpha(1.0).unwrap();
        assert!((s - std::f64::consts::PI).abs() < 1e-9, "{s}");
        assert!(e < 1e-9);
    }

    #[test]
    fn cauchy_density_is_reproduced() {
        // α = 1: the law is Cauchy with scale π c t.
        let (c, t) = (0.3, 0.8);
        let g = std::f64::consts::PI * c * t;
        for &y in &[0.0, 0.4, 2.0, -5.0] {
            let p = stable_density(y, t, 1.0, c).unwrap();
            let exact = g / (std::f64::consts::PI * (g * g + y * y));
            assert!((p - exact).abs() < 1e-9, "y={y} {p} {exact}");
        }
    }

    #[test]
    fn oracle_preserves_constants() {
        let phi = FnTestFunction::constant(1.7);
        let r = fourier_oracle(&phi, 0.5, 0.0, 1.5, 0.2, 1e-8).unwrap();
        assert!((r.value - 1.7).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_density_integration() {
        let phi = PhiSpec::CosWindow { frequency: 0.5, half_width: 4.0 }.build().unwrap();
        let (alpha, c, t) = (1.0, 0.2, 1.0);
        let r = fourier_oracle(&phi, t, 0.0, alpha, c, 1e-8).unwrap();
        // Cauchy closed form, even φ: 2∫_0^4 φ(y) p(y) dy.
        let g = std::f64::consts::PI * c * t;
        let direct = integrate(
            |y| 2.0 * phi.value(y) * g / (std::f64::consts::PI * (g * g + y * y)),
            &[0.0, 0.5, 1.0, 2.0, 4.0],
            &QuadOptions::new(1e-12),
        )
        .value;
        assert!((r.value - direct).abs() < 1e-8 + r.certified_error, "{} {direct}", r.value);
    }

    #[test]
    fn oracle_needs_flat_test_functions() {
        let phi = FnTestFunction::cosine(1.0);
        assert!(matches!(fourier_oracle(&phi, 1.0, 0.0, 1.5, 0.2, 1e-6), Err(LabError::Capability(_))));
    }
}
