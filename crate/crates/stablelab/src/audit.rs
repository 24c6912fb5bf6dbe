//! Seeded invariant suites shared by the command-line driver and the
//! acceptance run: the axioms of the sublinear expectation, the comparison
//! principle for the scheme, and the mollifier estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mollify::{mollify, FnSpaceTime, MollifierParams, SpaceTimeFunction};
use crate::scheme::{comparison_check, init, ComparisonReport, SchemeParams};
use crate::stable_measure::TestFunction;
use crate::sublinear::{expect, random_bounded, SublinearSpace};

/// Worst violations of each axiom over the trials (positive means violated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub trials: usize,
    /// Allowed violation, `3·quad_tol`.
    pub tolerance: f64,
    /// `max (Ê[f] − Ê[f + g])` with `g ≥ 0`.
    pub monotonicity: f64,
    /// `max |Ê[f + c] − Ê[f] − c|` together with `|Ê[c] − c|`.
    pub constants: f64,
    /// `max (Ê[f + g] − Ê[f] − Ê[g])`.
    pub subadditivity: f64,
    /// `max |Ê[λf] − λÊ[f]|`, `λ ∈ [0, 2]`.
    pub homogeneity: f64,
    pub pass: bool,
}

fn random_coeffs(rng: &mut ChaCha8Rng, terms: usize, nonnegative: bool) -> Vec<(f64, f64, f64, bool)> {
    (0..terms)
        .map(|_| {
            let bump = nonnegative || rng.gen_bool(0.5);
            let amp = if nonnegative { rng.gen_range(0.0..1.0) } else { rng.gen_range(-1.0..1.0) };
            (amp, rng.gen_range(0.2..3.0), rng.gen_range(-4.0..4.0), bump)
        })
        .collect()
}

/// Checks the four axioms on `trials` seeded random bounded functions.
pub fn axiom_suite(space: &SublinearSpace, trials: usize, seed: u64) -> Result<AxiomReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 3.0 * space.quad_tol;
    let (mut mono, mut cons, mut sub, mut homo) = (f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..trials {
        let nf = rng.gen_range(1..4);
        let ng = rng.gen_range(1..4);
        let (f, sf) = random_bounded(&random_coeffs(&mut rng, nf, false));
        let (g, sg) = random_bounded(&random_coeffs(&mut rng, ng, false));
        let (p, sp) = random_bounded(&random_coeffs(&mut rng, 2, true));
        let c: f64 = rng.gen_range(-2.0..2.0);
        let lambda: f64 = rng.gen_range(0.0..2.0);

        let ef = expect(space, &f, sf)?;
        let eg = expect(space, &g, sg)?;
        let fp = |x: f64| f(x) + p(x);
        mono = mono.max(ef - expect(space, &fp, sf + sp)?);

        let fc = |x: f64| f(x) + c;
        cons = cons.max((expect(space, &fc, sf + c.abs())? - ef - c).abs());
        cons = cons.max((expect(space, &|_| c, c.abs())? - c).abs());

        let fg = |x: f64| f(x) + g(x);
        sub = sub.max(expect(space, &fg, sf + sg)? - ef - eg);

        let lf = |x: f64| lambda * f(x);
        homo = homo.max((expect(space, &lf, lambda * sf)? - lambda * ef).abs());
    }
    let pass = mono <= tol && cons <= tol && sub <= tol && homo <= tol;
    Ok(AxiomReport { trials, tolerance: tol, monotonicity: mono, constants: cons, subadditivity: sub, homogeneity: homo, pass })
}

/// Outcome of the seeded comparison trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSuiteReport {
    pub trials: Vec<ComparisonReport>,
    /// Smallest `margin + slack` over the trials.
    pub worst_excess: f64,
    pub pass: bool,
}

/// Perturbs the initial datum of `phi` by random smooth functions plus a
/// one-node spike, adds random smooth source terms, and checks the
/// comparison inequality for `steps` steps in each of `trials` trials.
pub fn comparison_suite(
    space: &SublinearSpace,
    phi: &dyn TestFunction,
    params: &SchemeParams,
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<ComparisonSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = init(phi, params)?;
    let mut reports = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut u0 = base.clone();
        let mut v0 = base.clone();
        for g in [&mut u0, &mut v0] {
            let (p, sp) = random_bounded(&random_coeffs(&mut rng, 2, false));
            let scale: f64 = rng.gen_range(0.0..0.5);
            for (i, v) in g.values.iter_mut().enumerate() {
                *v += scale * p(g.x_min + i as f64 * g.spacing);
            }
            let spike = rng.gen_range(0..g.len());
            let height: f64 = rng.gen_range(-1.0..1.0);
            g.values[spike] += height;
            g.sup_norm_bound += scale * sp + height.abs();
        }
        let (a1, b1, c1): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..2.0), rng.gen_range(-3.0..3.0));
        let (a2, b2, c2): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.1..2.0), rng.gen_range(-3.0..3.0));
        let h1 = move |t: f64, x: f64| a1 * (b1 * x + c1 * t).sin();
        let h2 = move |t: f64, x: f64| a2 * (b2 * x - c2 * t).cos();
        reports.push(comparison_check(&u0, &v0, &h1, &h2, space, params, steps)?);
    }
    let worst_excess = reports.iter().map(|r| r.worst_margin + r.slack).fold(f64::INFINITY, f64::min);
    let pass = reports.iter().all(|r| r.pass);
    Ok(ComparisonSuiteReport { trials: reports, worst_excess, pass })
}

/// One row of the mollifier audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierRow {
    pub function: usize,
    pub epsilon: f64,
    pub constant: f64,
    /// Measured `sup |v − v^ε|` on the sample grid.
    pub gap: f64,
    /// Measured `sup |D_x v^ε|` on the sample grid.
    pub slope: f64,
    pub gap_bound: f64,
    pub slope_bound: f64,
}

/// Mollifier audit over seeded Lipschitz–Hölder functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifierReport {
    pub rows: Vec<MollifierRow>,
    pub pass: bool,
}

/// The `index`-th sample function family member with constant `c`,
/// centres `x0`, `t0` and time exponent `1/p`.
fn holder_sample(index: usize, c: f64, x0: f64, t0: f64, p: f64) -> FnSpaceTime {
    let q = 1.0 / p;
    let time = move |t: f64| (t - t0).abs().powf(q);
    match index % 5 {
        0 => FnSpaceTime::new(move |t, x| c * ((x - x0).abs() + time(t)), f64::INFINITY, c),
        1 => FnSpaceTime::new(move |t, x| c * ((x - x0).sin() - time(t)), f64::INFINITY, c),
        2 => FnSpaceTime::new(
            move |t, x| {
                let r = (x - x0).rem_euclid(1.0);
                c * (r.min(1.0 - r) + time(t))
            },
            f64::INFINITY,
            c,
        ),
        3 => FnSpaceTime::new(move |t, x| c * ((x - x0).abs().min(1.0) - time(t)), f64::INFINITY, c),
        _ => FnSpaceTime::new(move |t, x| c * ((x - x0).clamp(-0.5, 0.5) + time(t).min(0.3)), f64::INFINITY, c),
    }
}

/// Measures `‖v − v^ε‖∞` against `2Cε` and `‖D_x v^ε‖∞` against `2C` on a
/// grid of `(t, x) ∈ [0, 1] × [−2, 2]`.
pub fn mollifier_suite(functions: usize, epsilons: &[f64], p: f64, seed: u64) -> Result<MollifierReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for index in 0..functions {
        let c: f64 = rng.gen_range(0.5..3.0);
        let x0: f64 = rng.gen_range(-1.0..1.0);
        let t0: f64 = rng.gen_range(0.0..1.0);
        for &eps in epsilons {
            let v = holder_sample(index, c, x0, t0, p);
            let m = mollify(v.clone(), MollifierParams::new(eps, p)?)?;
            let (mut gap, mut slope) = (0.0f64, 0.0f64);
            for it in 0..=10 {
                let t = it as f64 / 10.0;
                for ix in 0..=80 {
                    let x = -2.0 + ix as f64 * 0.05;
                    gap = gap.max((v.value(t, x) - m.value(t, x)).abs());
                    slope = slope.max(m.space_derivative(1, t, x).unwrap_or(f64::NAN).abs());
                }
            }
            rows.push(MollifierRow {
                function: index,
                epsilon: eps,
                constant: c,
                gap,
                slope,
                gap_bound: 2.0 * c * eps,
                slope_bound: 2.0 * c,
            });
        }
    }
    let pass = rows.iter().all(|r| r.gap <= r.gap_bound && r.slope <= r.slope_bound);
    Ok(MollifierReport { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_measure::{StableConfig, UncertaintySet};
    use crate::wk_family::TailCoefficients;

    #[test]
    fn axioms_hold_on_a_few_functions() {
        let cfg = StableConfig::new(0.5, 0.25).unwrap();
        let sp = SublinearSpace::new(cfg, UncertaintySet::new(0.05, 0.1).unwrap(), TailCoefficients::symmetric(0.05, 2.0), 1e-6)
            .unwrap();
        let r = axiom_suite(&sp, 5, 7).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn mollifier_estimates_hold() {
        let r = mollifier_suite(5, &[0.2], 1.5, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
