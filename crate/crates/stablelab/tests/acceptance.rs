//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! margins and wall-clock time. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use stablelab::audit::{axiom_suite, comparison_suite, mollifier_suite};
use stablelab::phi::{NamedPhi, PhiSpec};
use stablelab::rates::{fit_rate, gamma_rate, gamma_rate_example, measure_consistency_modulus};
use stablelab::reference::{extrapolate_levels, fourier_reference, scheme_levels, Level};
use stablelab::scheme::{nested_oracle, regularity_audit, run, run_steps, SchemeParams};
use stablelab::stable_measure::{StableConfig, TestFunction, UncertaintySet};
use stablelab::sublinear::{moment_mdelta, MomentGrid, SublinearSpace};
use stablelab::wk_family::{q0_theoretical, TailCoefficients};
use stablelab::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn cfg(alpha: f64, delta: f64) -> StableConfig {
    StableConfig::new(alpha, delta).expect("valid exponents")
}

fn space(alpha: f64, delta: f64, lo: f64, hi: f64, a: f64, beta: f64, quad_tol: f64) -> Result<SublinearSpace> {
    SublinearSpace::new(cfg(alpha, delta), UncertaintySet::new(lo, hi)?, TailCoefficients::symmetric(a, beta), quad_tol)
}

fn cos_window() -> NamedPhi {
    PhiSpec::CosWindow { frequency: 0.5, half_width: 4.0 }.build().expect("valid window")
}

/// The α = 1.5, β = 1.8 member set used by most criteria.
fn example_15(quad_tol: f64) -> Result<SublinearSpace> {
    space(1.5, 1.0, 0.3, 0.33, 0.02, 1.8, quad_tol)
}

fn criterion_1() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, delta, lo, hi, beta) in [(1.5, 1.0, 0.3, 0.33, 1.8), (1.0, 0.5, 0.05, 0.1, 2.0), (0.5, 0.25, 0.05, 0.1, 2.0)] {
        let sp = space(alpha, delta, lo, hi, 0.02, beta, 1e-6)?;
        let r = axiom_suite(&sp, 200, 1)?;
        let worst = r.monotonicity.max(r.constants).max(r.subadditivity).max(r.homogeneity);
        pass &= r.pass;
        parts.push(format!("a={alpha}: worst {worst:.1e}"));
    }
    Ok(Outcome { pass, detail: format!("200 trials, tol 3e-6; {}", parts.join(", ")) })
}

fn criterion_2() -> Result<Outcome> {
    let phi = cos_window();
    let setups = [
        (1.5, 1.0, 0.1, 0.13, 0.1, 1.8, 4, 12.0),
        (1.0, 0.5, 0.05, 0.1, 0.05, 2.0, 4, 20.0),
        (0.5, 0.25, 0.05, 0.1, 0.05, 2.0, 16, 30.0),
    ];
    let (mut pass, mut worst_cert, mut worst_ratio) = (true, 0.0f64, 0.0f64);
    for (alpha, delta, lo, hi, a, beta, n, r) in setups {
        let sp = space(alpha, delta, lo, hi, a, beta, 1e-9)?;
        let params = SchemeParams::new(n, r, 0.001);
        for k in 1..=3 {
            let grid = run_steps(&phi, &sp, &params, k, false)?;
            let fine = nested_oracle(&phi, &sp, n, k, 8)?;
            let coarse = nested_oracle(&phi, &sp, n, k, 6)?;
            let certificate = grid.certificate + fine.truncation + (fine.value - coarse.value).abs();
            let diff = (grid.center_value - fine.value).abs();
            pass &= diff <= certificate && certificate <= 1e-3;
            worst_cert = worst_cert.max(certificate);
            worst_ratio = worst_ratio.max(diff / certificate);
        }
    }
    Ok(Outcome {
        pass,
        detail: format!("largest certificate {worst_cert:.2e}, largest |grid - oracle| / certificate {worst_ratio:.3}"),
    })
}

fn criterion_3() -> Result<Outcome> {
    let sp = example_15(1e-9)?;
    let phi = cos_window();
    let estimate = moment_mdelta(&sp, 64, 100.0, MomentGrid::default())?;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [8, 16, 32, 64] {
        let params = SchemeParams::new(n, 12.0, 0.02);
        let r = run_steps(&phi, &sp, &params, n, true)?;
        let rep = regularity_audit(&r, &phi, &estimate, 1.5, 1e-4);
        pass &= rep.pass;
        parts.push(format!("n={n}: ratio/C {:.5}, time margin {:.2e}", rep.spatial_ratio / phi.lipschitz(), rep.time_margin));
    }
    Ok(Outcome { pass, detail: format!("M_delta >= {:.4}; {}", estimate.m_delta_lower, parts.join("; ")) })
}

fn criterion_4() -> Result<Outcome> {
    let sp = example_15(1e-9)?;
    let params = SchemeParams::new(16, 12.0, 0.02);
    let r = comparison_suite(&sp, &cos_window(), &params, 8, 100, 2024)?;
    let failed = r.trials.iter().filter(|t| !t.pass).count();
    Ok(Outcome { pass: r.pass, detail: format!("100 trials, {failed} failed, min(margin + slack) {:.3e}", r.worst_excess) })
}

fn criterion_5() -> Result<Outcome> {
    let phi = cos_window();
    let mut pass = true;
    let mut parts = Vec::new();
    for (alpha, delta, c, beta, r) in [(1.5, 1.0, 0.3, 1.8, 16.0), (0.5, 0.25, 0.1, 2.0, 400.0)] {
        let sp = space(alpha, delta, c, c, 0.02, beta, 1e-9)?;
        let grid = run(&phi, &sp, &SchemeParams::new(256, r, 0.005))?;
        let oracle = fourier_reference(&phi, &sp, 1.0, 0.0, 1e-7)?;
        let diff = (grid.center_value - oracle.value).abs();
        let allowance = grid.certificate + oracle.certified_error;
        pass &= diff <= allowance && diff <= 1e-2;
        parts.push(format!("a={alpha}: |diff| {diff:.2e} <= {allowance:.2e}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn rate_study(sp: &SublinearSpace, r: f64, dx: f64, gamma: f64) -> Result<(bool, String)> {
    let phi = cos_window();
    let template = SchemeParams::new(8, r, dx);
    let ns = [8, 16, 32, 64, 128, 256, 512, 1024];
    let levels = scheme_levels(&phi, sp, &ns, &template)?;
    let reference = extrapolate_levels(&levels[5..])?;
    let study: Vec<&Level> = levels[..5].iter().collect();
    let errors: Vec<(usize, f64)> = study.iter().map(|l| (l.n, (l.value - reference.value).abs())).collect();
    let fit = fit_rate(&errors)?;
    let monotone = errors.windows(2).all(|w| w[1].1 <= w[0].1);
    let pass = fit.slope >= gamma - 0.1 && fit.max_relative_residual < 0.2 && monotone;
    Ok((
        pass,
        format!("slope {:.3} vs Gamma {:.3}, residual {:.3}, monotone {monotone}", fit.slope, gamma, fit.max_relative_residual),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let sp15 = example_15(1e-9)?;
    let g15 = gamma_rate_example(&sp15.cfg, &sp15.tails, 0.01)?;
    let (p15, d15) = rate_study(&sp15, 24.0, 0.005, g15)?;
    let sp05 = space(0.5, 0.25, 0.08, 0.1, 0.02, 2.0, 1e-9)?;
    let g05 = gamma_rate_example(&sp05.cfg, &sp05.tails, 0.01)?;
    let (p05, d05) = rate_study(&sp05, 100.0, 0.01, g05)?;
    Ok(Outcome { pass: p15 && p05, detail: format!("a=1.5: {d15}; a=0.5: {d05}") })
}

fn criterion_7() -> Result<Outcome> {
    let mut pass = true;
    let mut worst = 0.0f64;
    for p in [1.5, 2.0] {
        let r = mollifier_suite(5, &[0.2, 0.1, 0.05], p, 7)?;
        pass &= r.pass;
        for row in &r.rows {
            worst = worst.max(row.gap / row.gap_bound).max(row.slope / row.slope_bound);
        }
    }
    Ok(Outcome { pass, detail: format!("largest measured/bound ratio {worst:.3}") })
}

fn criterion_8() -> Result<Outcome> {
    let sp = example_15(1e-9)?;
    let q0 = q0_theoretical(&sp.cfg, &sp.tails, 0.01)?;
    let s: Vec<f64> = (2..=8).map(|j| 2f64.powi(-j)).collect();
    let xs: Vec<f64> = (-8..=8).map(|i| 0.5 * i as f64).collect();
    let r = measure_consistency_modulus(&sp, &cos_window(), &s, &xs, q0)?;
    Ok(Outcome {
        pass: r.exponent >= 0.15,
        detail: format!("fitted exponent {:.3}, predicted {:.3}", r.exponent, r.predicted_exponent),
    })
}

fn criterion_9() -> Result<Outcome> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-15;
    let cases = [
        (gamma_rate(&cfg(1.5, 1.0), 1.0)?, 1.0 / 6.0),
        (gamma_rate(&cfg(0.5, 0.25), 10.0)?, 0.0625 / (0.5 * 0.5625)),
        (gamma_rate(&cfg(1.0, 0.5), 1.0)?, 0.2),
        (gamma_rate_example(&cfg(1.5, 1.0), &TailCoefficients::symmetric(0.1, 1.8), 0.01)?, 0.1),
        (gamma_rate_example(&cfg(1.5, 1.0), &TailCoefficients::symmetric(0.1, 2.0), 0.01)?, 1.0 / 6.0 - 0.01),
        (gamma_rate_example(&cfg(1.0, 0.5), &TailCoefficients::symmetric(0.1, 3.0), 0.01)?, 0.2),
    ];
    let bad = cases.iter().filter(|(got, want)| !close(*got, *want)).count();
    Ok(Outcome { pass: bad == 0, detail: format!("{} unit values, {bad} mismatches", cases.len()) })
}

type Criterion = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, Criterion, Option<Duration>); 9] = [
        ("sublinear axioms", criterion_1, Some(Duration::from_secs(60))),
        ("scheme identity vs nested oracle", criterion_2, Some(Duration::from_secs(300))),
        ("space and time regularity", criterion_3, None),
        ("comparison principle", criterion_4, None),
        ("degenerate-uncertainty Fourier oracle", criterion_5, Some(Duration::from_secs(600))),
        ("empirical convergence rate", criterion_6, None),
        ("mollifier estimates", criterion_7, None),
        ("consistency modulus", criterion_8, None),
        ("rate-calculus unit values", criterion_9, None),
    ];
    let mut failures = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(o) => {
                let in_time = limit.is_none_or(|l| elapsed <= l);
                let note = if in_time { String::new() } else { format!(" (over the {:?} limit)", limit.unwrap()) };
                (o.pass && in_time, format!("{}{note}", o.detail))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {}: {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
