//! Cross-checks against closed forms computed with independent code.

use std::f64::consts::PI;

use statrs::distribution::{Cauchy, Continuous};
use statrs::function::gamma::gamma;

use stablelab::phi::PhiSpec;
use stablelab::rates::{gamma_rate, gamma_rate_example, theorem_bound, ErrorBudget};
use stablelab::reference::{extrapolate_levels, fourier_oracle, fourier_reference, sigma_alpha, Level};
use stablelab::scheme::{run, SchemeParams};
use stablelab::stable_measure::UncertaintySet;
use stablelab::stable_measure::{StableConfig, TestFunction};
use stablelab::sublinear::{moment_mdelta, MomentGrid, SublinearSpace};
use stablelab::wk_family::{q0_theoretical, validate_conditions, TailCoefficients};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sigma_alpha_matches_the_gamma_function_form() {
    for alpha in [0.3, 0.5, 0.8, 1.2, 1.5, 1.8] {
        let want = -2.0 * gamma(-alpha) * (PI * alpha / 2.0).cos();
        let (got, err) = sigma_alpha(alpha).unwrap();
        assert!((got - want).abs() <= err.max(1e-9), "alpha {alpha}: {got} vs {want}");
    }
    let (one, _) = sigma_alpha(1.0).unwrap();
    assert!((one - PI).abs() < 1e-9);
}

/// Simpson's rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn fourier_oracle_matches_cauchy_smoothing() {
    let phi = PhiSpec::CosWindow { frequency: 0.5, half_width: 4.0 }.build().unwrap();
    for (c, t, x) in [(0.1, 1.0, 0.0), (0.3, 0.5, 1.2), (0.05, 1.0, -2.0)] {
        // Total characteristic exponent c·σ_1·|ξ| with σ_1 = π.
        let cauchy = Cauchy::new(0.0, t * c * PI).unwrap();
        let want = simpson(|y| phi.value(y) * cauchy.pdf(y - x), -4.0, 4.0, 40_000);
        let got = fourier_oracle(&phi, t, x, 1.0, c, 1e-8).unwrap();
        assert!((got.value - want).abs() <= got.certified_error + 1e-9, "c {c}: {} vs {want}", got.value);
    }
}

#[test]
fn extrapolation_recovers_exact_power_laws() {
    let levels: Vec<Level> =
        [64, 128, 256].iter().map(|&n| Level { n, value: 0.75 + 0.4 * (n as f64).powf(-0.6), certificate: 0.0 }).collect();
    let r = extrapolate_levels(&levels).unwrap();
    assert!((r.value - 0.75).abs() < 1e-12, "{}", r.value);
}

#[test]
fn general_and_example_rates_agree_off_the_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 20 {
        let alpha: f64 = match checked % 3 {
            0 => rng.gen_range(1.05..1.95),
            1 => rng.gen_range(0.05..0.95),
            _ => 1.0,
        };
        let delta = if alpha > 1.0 { 1.0 } else { rng.gen_range(0.05..alpha * 0.95) };
        let beta: f64 = rng.gen_range(alpha + 0.01..alpha + 2.5);
        if (beta - 2.0).abs() < 1e-9 || (beta - 1.0).abs() < 1e-9 {
            continue;
        }
        let cfg = StableConfig::new(alpha, delta).unwrap();
        let tails = TailCoefficients::symmetric(0.1, beta);
        let q0 = q0_theoretical(&cfg, &tails, 0.01).unwrap();
        let general = gamma_rate(&cfg, q0).unwrap();
        let example = gamma_rate_example(&cfg, &tails, 0.01).unwrap();
        assert!((general - example).abs() < 1e-12, "({alpha}, {delta}, {beta}): {general} vs {example}");
        checked += 1;
    }
}

#[test]
fn scheme_error_sits_inside_the_theorem_sandwich() {
    let cfg = StableConfig::new(1.5, 1.0).unwrap();
    let tails = TailCoefficients::symmetric(0.02, 1.8);
    let sp = SublinearSpace::new(cfg, UncertaintySet::singleton(0.3).unwrap(), tails, 1e-9).unwrap();
    let phi = PhiSpec::CosWindow { frequency: 0.5, half_width: 4.0 }.build().unwrap();
    let reference = fourier_reference(&phi, &sp, 1.0, 0.0, 1e-7).unwrap();
    let ns: Vec<u64> = (0..=10).map(|j| 1u64 << j).collect();
    let c_beta = validate_conditions(&sp.corner_members()[0], &ns).unwrap().c_beta_empirical;
    let m = moment_mdelta(&sp, 4, 100.0, MomentGrid::default()).unwrap();
    let q0 = q0_theoretical(&cfg, &tails, 0.01).unwrap();
    let budget = ErrorBudget::new(&cfg, phi.lipschitz(), phi.sup_norm(), m.m_delta_lower, c_beta, q0);
    for n in [8, 16, 32] {
        let r = run(&phi, &sp, &SchemeParams::new(n, 16.0, 0.01)).unwrap();
        let bound = theorem_bound(1.0 / n as f64, &cfg, &budget).unwrap();
        let err = (r.center_value - reference.value).abs();
        assert!(err <= bound + r.certificate + reference.certified_error, "n {n}: {err} > {bound}");
    }
}
