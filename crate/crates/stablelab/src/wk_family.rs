//! The distribution family with power tails `k/α·|x|^{-α} + a·|x|^{-β}`
//! beyond `|x| = 1` and a quadratic density on `[-1, 1]`.
//!
//! The quadratic patch `p(x) = c0 + c1 x + c2 x²` is fixed by three linear
//! conditions: total mass, density continuity at `x = 1`, and either a zero
//! mean (α > 1) or `c1 = 0` (α ≤ 1, symmetric law). All right-hand sides
//! are affine in the spectral weights, so every expectation is affine in `k`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{integrate, QuadOptions, Quadrature};
use crate::stable_measure::{Corner, Regime, StableConfig};

/// Correction coefficients and exponent of the power tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
}

impl TailCoefficients {
    pub fn new(a1: f64, a2: f64, beta: f64) -> Self {
        Self { a1, a2, beta }
    }

    pub fn symmetric(a: f64, beta: f64) -> Self {
        Self { a1: a, a2: a, beta }
    }
}

/// Mass, and first moments about the left and right ends, of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentMoments {
    /// `∫_a^b dF`.
    pub mass: f64,
    /// `∫_a^b (z − a) dF`.
    pub rise: f64,
    /// `∫_a^b (b − z) dF`.
    pub fall: f64,
}

impl SegmentMoments {
    fn add(&mut self, o: SegmentMoments) {
        self.mass += o.mass;
        self.rise += o.rise;
        self.fall += o.fall;
    }
}

/// One member of the family for a fixed pair of spectral weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkDistribution {
    pub k: Corner,
    pub cfg: StableConfig,
    pub tails: TailCoefficients,
    inner: [f64; 3],
    cdf_minus_one: f64,
    sf_plus_one: f64,
}

/// Builds the member with weights `k`; fails when no nonnegative quadratic
/// patch exists.
pub fn make_example_distribution(cfg: StableConfig, k: Corner, tails: TailCoefficients) -> Result<WkDistribution> {
    let a = cfg.alpha();
    let TailCoefficients { a1, a2, beta } = tails;
    if !(beta > a) {
        return Err(LabError::Construction(format!("tail exponent beta = {beta} must exceed alpha = {a}")));
    }
    if !(k.k1 > 0.0 && k.k2 > 0.0) {
        return Err(LabError::Construction("spectral weights must be positive".into()));
    }
    if !(a1 >= 0.0 && a2 >= 0.0) {
        return Err(LabError::Construction("tail coefficients must be nonnegative".into()));
    }
    if cfg.regime() != Regime::SuperOne && (k.k1 != k.k2 || a1 != a2) {
        return Err(LabError::Construction(format!("symmetry constraint violated for alpha = {a}: need k1 = k2 and a1 = a2")));
    }
    let lower = k.k1 / a + a1;
    let upper = k.k2 / a + a2;
    let m_in = 1.0 - lower - upper;
    if m_in <= 0.0 {
        return Err(LabError::Construction(format!("total-mass constraint violated: tails carry mass {} >= 1", lower + upper)));
    }
    let p1 = k.k2 + a2 * beta;
    let c1 = if cfg.regime() == Regime::SuperOne {
        let up = k.k2 / (a - 1.0) + a2 * beta / (beta - 1.0);
        let lo = k.k1 / (a - 1.0) + a1 * beta / (beta - 1.0);
        -1.5 * (up - lo)
    } else {
        0.0
    };
    let c2 = 1.5 * (p1 - c1 - 0.5 * m_in);
    let c0 = 0.5 * m_in - c2 / 3.0;
    let p = |x: f64| c0 + c1 * x + c2 * x * x;
    let mut min = p(-1.0).min(p(1.0));
    if c2 > 0.0 {
        let v = -c1 / (2.0 * c2);
        if v.abs() < 1.0 {
            min = min.min(p(v));
        }
    }
    if min < 0.0 {
        let which = if cfg.regime() == Regime::SuperOne { "mean-zero" } else { "symmetry" };
        return Err(LabError::Construction(format!(
            "nonnegativity of the inner density fails (minimum {min:.3e}) under the {which} and mass constraints"
        )));
    }
    Ok(WkDistribution { k, cfg, tails, inner: [c0, c1, c2], cdf_minus_one: lower, sf_plus_one: upper })
}

const SERIES_CUTOFF: f64 = 0.1;

/// `(J0, L, R)` with `J0 = ∫_0^r (1+s)^{-γ-1}`, `L = ∫_0^r s(1+s)^{-γ-1}`,
/// `R = ∫_0^r (r−s)(1+s)^{-γ-1}`.
fn power_moments(r: f64, g: f64) -> (f64, f64, f64) {
    if r <= SERIES_CUTOFF {
        let (mut j0, mut l, mut rt) = (0.0, 0.0, 0.0);
        let mut b = 1.0;
        let mut rp = r;
        for j in 0..40 {
            let jf = j as f64;
            j0 += b * rp / (jf + 1.0);
            let rp2 = rp * r;
            l += b * rp2 / (jf + 2.0);
            rt += b * rp2 / ((jf + 1.0) * (jf + 2.0));
            b *= (-g - 1.0 - jf) / (jf + 1.0);
            rp = rp2;
        }
        (j0, l, rt)
    } else {
        let lr = r.ln_1p();
        let j0 = -(-g * lr).exp_m1() / g;
        let j1 = if (g - 1.0).abs() < 1e-12 { lr } else { ((1.0 - g) * lr).exp_m1() / (1.0 - g) };
        (j0, j1 - j0, (1.0 + r) * j0 - j1)
    }
}

/// Tail piece with density `c·y^{-γ-1}` on `[p, q]`, `1 ≤ p < q < ∞`:
/// returns (mass, ∫(y−p), ∫(q−y)).
fn power_piece(c: f64, g: f64, p: f64, q: f64) -> (f64, f64, f64) {
    if c == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let r = (q - p) / p;
    let (j0, l, rt) = power_moments(r, g);
    let pg = p.powf(-g);
    (c * pg * j0, c * pg * p * l, c * pg * p * rt)
}

/// Solves `A y^{-α} + B y^{-β} = v` for `y ≥ 1` (convex Newton in `ln y`).
fn tail_inverse(a_coef: f64, alpha: f64, b_coef: f64, beta: f64, v: f64) -> f64 {
    if v >= a_coef + b_coef {
        return 1.0;
    }
    if b_coef == 0.0 {
        return (a_coef / v).powf(1.0 / alpha);
    }
    if a_coef == 0.0 {
        return (b_coef / v).powf(1.0 / beta);
    }
    let lv = v.ln();
    let mut t = ((a_coef / v).ln() / alpha).max(0.0);
    for _ in 0..200 {
        let ea = a_coef * (-alpha * t).exp();
        let eb = b_coef * (-beta * t).exp();
        let g = ea + eb;
        let h = g.ln() - lv;
        let dh = -(alpha * ea + beta * eb) / g;
        let step = h / dh;
        t -= step;
        if step.abs() <= 1e-15 * t.max(1.0) {
            break;
        }
    }
    t.exp()
}

impl WkDistribution {
    pub fn alpha(&self) -> f64 {
        self.cfg.alpha()
    }

    /// Coefficients `(c0, c1, c2)` of the inner density.
    pub fn inner_coefficients(&self) -> [f64; 3] {
        self.inner
    }

    pub fn cdf_minus_one(&self) -> f64 {
        self.cdf_minus_one
    }

    pub fn sf_plus_one(&self) -> f64 {
        self.sf_plus_one
    }

    fn lower_tail(&self, y: f64) -> f64 {
        let a = self.alpha();
        (self.k.k1 / a) * y.powf(-a) + self.tails.a1 * y.powf(-self.tails.beta)
    }

    fn upper_tail(&self, y: f64) -> f64 {
        let a = self.alpha();
        (self.k.k2 / a) * y.powf(-a) + self.tails.a2 * y.powf(-self.tails.beta)
    }

    fn inner_primitive(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.inner;
        c0 * (x + 1.0) + 0.5 * c1 * (x * x - 1.0) + c2 * (x * x * x + 1.0) / 3.0
    }

    fn inner_upper_primitive(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.inner;
        c0 * (1.0 - x) + 0.5 * c1 * (1.0 - x * x) + c2 * (1.0 - x * x * x) / 3.0
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            self.lower_tail(-x)
        } else if x >= 1.0 {
            1.0 - self.upper_tail(x)
        } else if x <= 0.0 {
            self.cdf_minus_one + self.inner_primitive(x)
        } else {
            1.0 - self.sf(x)
        }
    }

    /// Survival function `1 − F(x)` computed without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            self.upper_tail(x)
        } else if x <= -1.0 {
            1.0 - self.lower_tail(-x)
        } else if x >= 0.0 {
            self.sf_plus_one + self.inner_upper_primitive(x)
        } else {
            1.0 - self.cdf(x)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let a = self.alpha();
        let b = self.tails.beta;
        if x < -1.0 {
            let y = -x;
            self.k.k1 * y.powf(-a - 1.0) + self.tails.a1 * b * y.powf(-b - 1.0)
        } else if x > 1.0 {
            self.k.k2 * x.powf(-a - 1.0) + self.tails.a2 * b * x.powf(-b - 1.0)
        } else {
            let [c0, c1, c2] = self.inner;
            c0 + c1 * x + c2 * x * x
        }
    }

    /// Quantile for `u ≤ F(−1)`, accurate for tiny `u`.
    pub fn quantile_lower(&self, u: f64) -> f64 {
        let a = self.alpha();
        -tail_inverse(self.k.k1 / a, a, self.tails.a1, self.tails.beta, u)
    }

    /// Upper quantile `Q(1 − s)` for `s ≤ 1 − F(1)`, accurate for tiny `s`.
    pub fn quantile_upper(&self, s: f64) -> f64 {
        let a = self.alpha();
        tail_inverse(self.k.k2 / a, a, self.tails.a2, self.tails.beta, s)
    }

    fn inner_inverse(&self, target: f64) -> f64 {
        // Solve inner_primitive(x) = target on [-1, 1], safeguarded Newton.
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        let total = self.inner_primitive(1.0);
        let mut x = -1.0 + 2.0 * (target / total).clamp(0.0, 1.0);
        for _ in 0..200 {
            let f = self.inner_primitive(x) - target;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let mut next = if d > 0.0 { x - f / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * (1.0 + x.abs()) || hi - lo <= 1e-16 {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        if u <= self.cdf_minus_one {
            self.quantile_lower(u)
        } else if 1.0 - u <= self.sf_plus_one {
            self.quantile_upper(1.0 - u)
        } else {
            self.inner_inverse(u - self.cdf_minus_one)
        }
    }

    /// Mass and end moments of `[a, b]` (finite, `a < b`), exact in closed form.
    pub fn segment(&self, a: f64, b: f64) -> SegmentMoments {
        let mut out = SegmentMoments::default();
        if !(b > a) {
            return out;
        }
        let mut cuts = vec![a];
        for c in [-1.0, 1.0] {
            if c > a && c < b {
                cuts.push(c);
            }
        }
        cuts.push(b);
        let al = self.alpha();
        let be = self.tails.beta;
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let m = if q <= -1.0 {
                // y = −z ∈ [−q, −p]; rise in z is the fall in y and vice versa.
                let (m1, r1, f1) = power_piece(self.k.k1, al, -q, -p);
                let (m2, r2, f2) = power_piece(self.tails.a1 * be, be, -q, -p);
                SegmentMoments { mass: m1 + m2, rise: f1 + f2, fall: r1 + r2 }
            } else if p >= 1.0 {
                let (m1, r1, f1) = power_piece(self.k.k2, al, p, q);
                let (m2, r2, f2) = power_piece(self.tails.a2 * be, be, p, q);
                SegmentMoments { mass: m1 + m2, rise: r1 + r2, fall: f1 + f2 }
            } else {
                let [c0, c1, c2] = self.inner;
                let d0 = c0 + c1 * p + c2 * p * p;
                let d1 = c1 + 2.0 * c2 * p;
                let l = q - p;
                let l2 = l * l;
                SegmentMoments {
                    mass: l * (d0 + l * (d1 / 2.0 + l * c2 / 3.0)),
                    rise: l2 * (d0 / 2.0 + l * (d1 / 3.0 + l * c2 / 4.0)),
                    fall: l2 * (d0 / 2.0 + l * (d1 / 6.0 + l * c2 / 12.0)),
                }
            };
            let shifted = SegmentMoments { mass: m.mass, rise: m.rise + (p - a) * m.mass, fall: m.fall + (b - q) * m.mass };
            out.add(shifted);
        }
        out
    }

    /// `∫ f dF` in quantile space: tails integrated over the probability
    /// variable, the inner part against the density.
    pub fn integrate(&self, f: &dyn Fn(f64) -> f64, bound: f64, tol: f64) -> Quadrature {
        let opts = QuadOptions::new(tol / 3.0).with_bound(bound).with_budget(20_000);
        let geometric = |top: f64| {
            let mut pts: Vec<f64> = (0..=30).rev().map(|j| top * 0.5f64.powi(j)).collect();
            pts.insert(0, 0.0);
            pts
        };
        let ql = integrate(|u| f(self.quantile_lower(u)), &geometric(self.cdf_minus_one), &opts);
        let inner_opts = QuadOptions::new(tol / 3.0).with_budget(20_000);
        let qi = integrate(|x| f(x) * self.pdf(x), &[-1.0, -0.5, 0.0, 0.5, 1.0], &inner_opts);
        let qu = integrate(|s| f(self.quantile_upper(s)), &geometric(self.sf_plus_one), &opts);
        let error = ql.error + qi.error + qu.error;
        Quadrature {
            value: ql.value + qi.value + qu.value,
            error,
            evaluations: ql.evaluations + qi.evaluations + qu.evaluations,
            converged: error <= tol,
        }
    }

    /// Mean in closed form.
    pub fn mean(&self) -> f64 {
        let a = self.alpha();
        let b = self.tails.beta;
        if a <= 1.0 {
            return 0.0;
        }
        let up = self.k.k2 / (a - 1.0) + self.tails.a2 * b / (b - 1.0);
        let lo = self.k.k1 / (a - 1.0) + self.tails.a1 * b / (b - 1.0);
        up - lo + 2.0 * self.inner[1] / 3.0
    }

    /// `(β1(−x), β2(x))` for `x ≥ 0`.
    pub fn beta_functions(&self, x: f64) -> (f64, f64) {
        let x = x.abs();
        let a = self.alpha();
        let b = self.tails.beta;
        if x >= 1.0 {
            let r = x.powf(a - b);
            (self.tails.a1 * r, self.tails.a2 * r)
        } else {
            let xa = x.powf(a);
            (self.cdf(-x) * xa - self.k.k1 / a, self.sf(x) * xa - self.k.k2 / a)
        }
    }
}

/// Standalone form of [`WkDistribution::beta_functions`].
pub fn beta_functions(w: &WkDistribution, x: f64) -> (f64, f64) {
    w.beta_functions(x)
}

/// Per-`n` values of the tail conditions for the matching regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub n: u64,
    pub terms: Vec<f64>,
    /// `sup_{x∈[0,1]} |β2(n^{1/α} x)|`, recorded for reference.
    pub b0: f64,
}

impl ConditionRow {
    pub fn max_term(&self) -> f64 {
        self.terms.iter().copied().fold(0.0, f64::max)
    }
}

/// Tabulated conditions and the fitted decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub regime: Regime,
    pub term_names: Vec<String>,
    pub rows: Vec<ConditionRow>,
    pub q0_empirical: f64,
    pub c_beta_empirical: f64,
    pub pass: bool,
    pub failure: Option<String>,
}

/// `∫_0^1 g(x) x^{-q} dx`, `q < 1`, via `x = t^{1/(1-q)}`.
fn weighted_unit(g: &dyn Fn(f64) -> f64, q: f64, kink: f64, tol: f64) -> Quadrature {
    let m = 1.0 / (1.0 - q);
    let mut pts = vec![0.0];
    if kink > 0.0 && kink < 1.0 {
        pts.push(kink.powf(1.0 - q));
    }
    pts.push(1.0);
    let mut q = integrate(|t| g(t.powf(m)) * m, &pts, &QuadOptions::new(tol).with_budget(20_000));
    q.value = q.value.abs();
    q
}

/// `∫_1^∞ g(x) x^{-p} dx`, `p > 1`, via `x = t^{-1/(p-1)}`.
fn weighted_tail(g: &dyn Fn(f64) -> f64, p: f64, kink: f64, tol: f64) -> Quadrature {
    let m = 1.0 / (p - 1.0);
    let mut pts = vec![0.0];
    if kink > 1.0 {
        pts.push(kink.powf(-(p - 1.0)));
    }
    pts.push(1.0);
    integrate(|t| if t <= 0.0 { 0.0 } else { g(t.powf(-m)) * m }, &pts, &QuadOptions::new(tol).with_budget(20_000))
}

/// Evaluates the regime's tail conditions on `n_set` and fits `C n^{-q0}`.
pub fn validate_conditions(w: &WkDistribution, n_set: &[u64]) -> Result<ConditionReport> {
    if n_set.is_empty() {
        return Err(LabError::Contract("n_set must be nonempty".into()));
    }
    let a = w.alpha();
    let d = w.cfg.delta();
    let regime = w.cfg.regime();
    let tol = 1e-13;
    let b1 = |y: f64| w.beta_functions(y).0.abs();
    let b2 = |y: f64| w.beta_functions(y).1.abs();
    let names: Vec<&str> = match regime {
        Regime::SuperOne => vec![
            "|beta1(-N)|",
            "int_{-inf}^{-1} |beta1(N x)| |x|^-alpha",
            "int_{-1}^0 |beta1(N x)| |x|^(1-alpha)",
            "|beta2(N)|",
            "int_1^inf |beta2(N x)| x^-alpha",
            "int_0^1 |beta2(N x)| x^(1-alpha)",
        ],
        Regime::SubOne => vec!["|beta2(N)|", "int_1^inf |beta2(N x)| x^-(1+alpha-delta)", "int_0^1 |beta2(N x)| x^-alpha"],
        Regime::CriticalOne => vec!["|beta2(n)|", "int_1^inf |beta2(n x)| x^-(2-delta)", "int_0^1 |beta2(n x)|"],
    };
    let mut rows = Vec::with_capacity(n_set.len());
    let mut failure = None;
    for &n in n_set {
        let big = (n as f64).powf(1.0 / a);
        let kink = 1.0 / big;
        let mut terms = Vec::new();
        let mut push = |q: Quadrature, name: &str, terms: &mut Vec<f64>| {
            if !q.value.is_finite() || !q.converged {
                failure.get_or_insert_with(|| format!("term '{name}' did not converge at n = {n}"));
            }
            terms.push(q.value.abs());
        };
        match regime {
            Regime::SuperOne => {
                terms.push(b1(big));
                push(weighted_tail(&|x| b1(big * x), a, 0.0, tol), names[1], &mut terms);
                push(weighted_unit(&|x| b1(big * x), a - 1.0, kink, tol), names[2], &mut terms);
                terms.push(b2(big));
                push(weighted_tail(&|x| b2(big * x), a, 0.0, tol), names[4], &mut terms);
                push(weighted_unit(&|x| b2(big * x), a - 1.0, kink, tol), names[5], &mut terms);
            }
            Regime::SubOne | Regime::CriticalOne => {
                let p = if regime == Regime::SubOne { 1.0 + a - d } else { 2.0 - d };
                let q = if regime == Regime::SubOne { a } else { 0.0 };
                terms.push(b2(big));
                push(weighted_tail(&|x| b2(big * x), p, 0.0, tol), names[1], &mut terms);
                push(weighted_unit(&|x| b2(big * x), q, kink, tol), names[2], &mut terms);
            }
        }
        let b0 = (0..=1000).map(|i| b2(big * i as f64 / 1000.0)).fold(0.0, f64::max);
        rows.push(ConditionRow { n, terms, b0 });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.max_term() > 0.0).map(|r| ((r.n as f64).ln(), r.max_term().ln())).collect();
    let (q0, c) = if pts.len() >= 2 {
        let (slope, _) = least_squares(&pts);
        let q0 = -slope;
        let c = rows.iter().map(|r| r.max_term() * (r.n as f64).powf(q0)).fold(0.0, f64::max);
        (q0, c)
    } else if pts.len() == 1 {
        (0.0, pts[0].1.exp())
    } else {
        (f64::INFINITY, 0.0)
    };
    let all_zero = pts.is_empty();
    let bounded = rows.iter().all(|r| {
        let cap = if q0.is_finite() { c * (r.n as f64).powf(-q0) } else { 0.0 };
        r.terms.iter().all(|&t| t <= cap * (1.0 + 1e-9) + 1e-300)
    });
    let pass = failure.is_none() && (all_zero || (q0 > 0.0 && bounded));
    if failure.is_none() && !pass {
        failure = Some(format!("fitted decay exponent {q0:.4} is not positive"));
    }
    Ok(ConditionReport {
        regime,
        term_names: names.into_iter().map(String::from).collect(),
        rows,
        q0_empirical: q0,
        c_beta_empirical: c,
        pass,
        failure,
    })
}

/// Least-squares line `y = slope·x + intercept`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// The closed-form decay exponent of the tail conditions for this family.
pub fn q0_theoretical(cfg: &StableConfig, tails: &TailCoefficients, eps0: f64) -> Result<f64> {
    let a = cfg.alpha();
    let b = tails.beta;
    if !(b > a) {
        return Err(LabError::Domain(format!("beta = {b} must exceed alpha = {a}")));
    }
    if !(eps0 > 0.0) {
        return Err(LabError::Domain("eps0 must be positive".into()));
    }
    Ok(match cfg.regime() {
        Regime::SuperOne => {
            if b == 2.0 {
                (2.0 - a) / a - eps0
            } else {
                ((b - a) / a).min((2.0 - a) / a)
            }
        }
        Regime::SubOne => {
            if b == 1.0 {
                (1.0 - a) / a - eps0
            } else {
                ((b - a) / a).min((1.0 - a) / a)
            }
        }
        Regime::CriticalOne => {
            if b == 2.0 {
                1.0 - eps0
            } else {
                (b - 1.0).min(1.0)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(alpha: f64, k: f64, a: f64, beta: f64) -> WkDistribution {
        let cfg = if alpha > 1.0 { StableConfig::super_one(alpha) } else { StableConfig::new(alpha, alpha / 2.0) }.unwrap();
        make_example_distribution(cfg, Corner::symmetric(k), TailCoefficients::symmetric(a, beta)).unwrap()
    }

    #[test]
    fn boundary_values() {
        let cfg = StableConfig::super_one(1.5).unwrap();
        let w = make_example_distribution(cfg, Corner::new(0.1, 0.2), TailCoefficients::new(0.03, 0.05, 1.8)).unwrap();
        assert!((w.cdf(1.0) - (1.0 - 0.2 / 1.5 - 0.05)).abs() < 1e-15);
        assert!((w.cdf(-1.0) - (0.1 / 1.5 + 0.03)).abs() < 1e-15);
        assert!((w.cdf(1.0 - 1e-12) - w.cdf(1.0)).abs() < 1e-11);
        assert!((w.cdf(-1.0 + 1e-12) - w.cdf(-1.0)).abs() < 1e-11);
        assert!(w.mean().abs() < 1e-15);
    }

    #[test]
    fn symmetric_median() {
        let w = ex(0.5, 0.1, 0.1, 1.0);
        assert!((w.cdf(0.0) - 0.5).abs() < 1e-15);
        // Unit weights put mass 2 in each tail when alpha = 0.5.
        let cfg = StableConfig::new(0.5, 0.25).unwrap();
        let e = make_example_distribution(cfg, Corner::symmetric(1.0), TailCoefficients::symmetric(0.1, 1.0));
        assert!(matches!(e, Err(LabError::Construction(_))));
    }

    #[test]
    fn infeasible_parameters_are_named() {
        let cfg = StableConfig::new(0.5, 0.25).unwrap();
        let e = make_example_distribution(cfg, Corner::symmetric(1.0), TailCoefficients::symmetric(0.1, 1.0)).unwrap_err();
        assert!(e.to_string().contains("total-mass"), "{e}");
        let e = make_example_distribution(cfg, Corner::new(0.1, 0.2), TailCoefficients::symmetric(0.1, 1.0)).unwrap_err();
        assert!(e.to_string().contains("symmetry"), "{e}");
    }

    #[test]
    fn power_moments_agree_across_cutoff() {
        for g in [0.5, 1.0, 1.5, 1.8] {
            let below = power_moments(SERIES_CUTOFF, g);
            let lr = SERIES_CUTOFF.ln_1p();
            let j0 = -(-g * lr).exp_m1() / g;
            let j1 = if g == 1.0 { lr } else { ((1.0 - g) * lr).exp_m1() / (1.0 - g) };
            assert!((below.0 - j0).abs() < 1e-15);
            assert!(((below.1 - (j1 - j0)) / below.1).abs() < 1e-12);
            assert!(((below.2 - ((1.0 + SERIES_CUTOFF) * j0 - j1)) / below.2).abs() < 1e-12);
        }
    }

    #[test]
    fn segment_mass_matches_cdf() {
        let w = ex(1.5, 0.3, 0.1, 1.8);
        for (a, b) in [(-7.0, -2.0), (-1.5, 0.3), (0.2, 0.4), (-0.5, 3.0), (1.0, 1.0001), (-300.0, 250.0)] {
            let s = w.segment(a, b);
            assert!((s.mass - (w.cdf(b) - w.cdf(a))).abs() < 1e-14, "({a},{b})");
            assert!((s.rise + s.fall - (b - a) * s.mass).abs() < 1e-12 * (1.0 + (b - a)));
        }
    }

    #[test]
    fn quantile_round_trip() {
        let w = ex(0.5, 0.1, 0.05, 2.0);
        for &x in &[-1e6, -30.0, -1.0, -0.3, 0.0, 0.7, 1.0, 5.0, 1e8] {
            let q = w.quantile(w.cdf(x));
            assert!((q - x).abs() <= 1e-8 * (1.0 + x.abs()), "x={x} q={q}");
        }
    }

    #[test]
    fn beta_examples() {
        let cfg = StableConfig::super_one(1.5).unwrap();
        let w = make_example_distribution(cfg, Corner::new(0.1, 0.15), TailCoefficients::new(0.05, 0.08, 1.8)).unwrap();
        assert!((w.beta_functions(1.0).1 - 0.08).abs() < 1e-15);
        let n: f64 = 37.0;
        let b2 = w.beta_functions(n.powf(1.0 / 1.5)).1;
        assert!((b2 - 0.08 * n.powf(-0.3 / 1.5)).abs() < 1e-14);
        assert!(w.beta_functions(1e12).1 < 1e-3);
        // Inner values agree with the defining relation.
        let x = 0.4;
        assert!((w.beta_functions(x).1 - ((1.0 - w.cdf(x)) * x.powf(1.5) - 0.15 / 1.5)).abs() < 1e-14);
    }

    #[test]
    fn q0_examples() {
        let c = StableConfig::super_one(1.5).unwrap();
        assert!((q0_theoretical(&c, &TailCoefficients::symmetric(0.1, 1.8), 0.01).unwrap() - 0.2).abs() < 1e-12);
        let c = StableConfig::new(0.5, 0.25).unwrap();
        assert!((q0_theoretical(&c, &TailCoefficients::symmetric(0.1, 1.0), 0.01).unwrap() - 0.99).abs() < 1e-12);
        let c = StableConfig::new(1.0, 0.5).unwrap();
        assert_eq!(q0_theoretical(&c, &TailCoefficients::symmetric(0.1, 3.0), 0.01).unwrap(), 1.0);
        assert!(q0_theoretical(&c, &TailCoefficients::symmetric(0.1, 0.9), 0.01).is_err());
    }

    #[test]
    fn degenerate_tails_pass() {
        let w = ex(1.5, 0.3, 0.0, 1.8);
        let r = validate_conditions(&w, &[1, 2, 4, 8]).unwrap();
        assert!(r.pass);
        for row in &r.rows {
            assert_eq!(row.terms[0], 0.0);
        }
    }
}
