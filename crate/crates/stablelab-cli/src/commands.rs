//! The four subcommands. Each writes its reports into the output directory
//! and returns whether its checks passed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use stablelab::audit::{axiom_suite, comparison_suite, mollifier_suite, AxiomReport, MollifierReport};
use stablelab::rates::{gamma_rate_example, theorem_bound, ErrorBudget, RateReport};
use stablelab::reference::{extrapolate_levels, fourier_reference, Level, ReferenceValue};
use stablelab::scheme::{regularity_audit, run, run_steps, RegularityReport};
use stablelab::stable_measure::{Corner, StableConfig, TestFunction};
use stablelab::sublinear::{moment_mdelta, MomentEstimate, MomentGrid};
use stablelab::wk_family::{q0_theoretical, validate_conditions, ConditionReport, TailCoefficients};
use stablelab::LabError;

use crate::config::{check_geometric, ConfigError, Validated};

/// Failure classes, mapped onto the exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Attaches the experiment step to a library error.
fn ctx(step: &str) -> impl Fn(LabError) -> CliError + '_ {
    move |e| CliError::Numerical(format!("{step}: {e}"))
}

fn io_ctx(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Output directory helper.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(io_ctx(&dir))?;
        Ok(Self { dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(io_ctx(&path))
    }

    fn csv<F>(&self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).map_err(io_ctx(&path))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        fill(&mut w).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.flush().map_err(io_ctx(&path))
    }

    fn raw(&self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(io_ctx(&path))?;
        let mut w = BufWriter::new(file);
        fill(&mut w).and_then(|_| w.flush()).map_err(io_ctx(&path))
    }
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct MemberConditions {
    corner: Corner,
    report: ConditionReport,
}

#[derive(Serialize)]
struct ValidateReport {
    alpha: f64,
    delta: f64,
    tails: TailCoefficients,
    eps0: f64,
    q0_theoretical: f64,
    gamma_rate_example: f64,
    members: Vec<MemberConditions>,
    pass: bool,
}

/// Tabulates the tail conditions of every extreme member of the family.
pub fn validate(v: &Validated, out: &Output) -> Result<bool, CliError> {
    let ns = v.condition_n();
    let members = v
        .space
        .corner_members()
        .iter()
        .map(|w| {
            let report = validate_conditions(w, &ns).map_err(ctx("tail conditions"))?;
            Ok(MemberConditions { corner: w.k, report })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let eps0 = v.config.eps0;
    let report = ValidateReport {
        alpha: v.cfg.alpha(),
        delta: v.cfg.delta(),
        tails: v.tails,
        eps0,
        q0_theoretical: q0_theoretical(&v.cfg, &v.tails, eps0).map_err(ctx("q0"))?,
        gamma_rate_example: gamma_rate_example(&v.cfg, &v.tails, eps0).map_err(ctx("gamma"))?,
        pass: members.iter().all(|m| m.report.pass),
        members,
    };
    out.csv("conditions.csv", |w| {
        let width = report.members.first().map_or(0, |m| m.report.term_names.len());
        let mut header = vec!["k1".to_string(), "k2".to_string(), "n".to_string()];
        if let Some(m) = report.members.first() {
            header.extend(m.report.term_names.iter().cloned());
        }
        header.push("b0".into());
        w.write_record(&header)?;
        for m in &report.members {
            for row in &m.report.rows {
                let mut rec = vec![format!("{:e}", m.corner.k1), format!("{:e}", m.corner.k2), row.n.to_string()];
                rec.extend(row.terms.iter().take(width).map(|t| format!("{t:e}")));
                rec.push(format!("{:e}", row.b0));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })?;
    out.json("conditions.json", &report)?;
    for m in &report.members {
        println!(
            "corner ({}, {}): q0_empirical = {:.4}, c_beta = {:.4e}, {}",
            m.corner.k1,
            m.corner.k2,
            m.report.q0_empirical,
            m.report.c_beta_empirical,
            if m.report.pass { "pass" } else { m.report.failure.as_deref().unwrap_or("fail") }
        );
    }
    println!("q0_theoretical = {:.4}, gamma = {:.4}", report.q0_theoretical, report.gamma_rate_example);
    Ok(report.pass)
}

// ---------------------------------------------------------------- converge

#[derive(Serialize)]
struct OracleRow {
    n: usize,
    difference: f64,
    /// Scheme certificate plus oracle certificate.
    allowance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct BoundRow {
    n: usize,
    error: f64,
    bound: f64,
}

#[derive(Serialize)]
struct ConvergeReport {
    rate: RateReport,
    reference_levels: Vec<Level>,
    extrapolated: Option<ReferenceValue>,
    /// Why extrapolation was unavailable, when the oracle stood in.
    extrapolation_failure: Option<String>,
    oracle: Option<ReferenceValue>,
    oracle_agreement: Vec<OracleRow>,
    monotone: bool,
    budget: Option<ErrorBudget>,
    theorem_bounds: Vec<BoundRow>,
    pass: bool,
}

fn levels(v: &Validated, ns: &[usize]) -> Result<Vec<Level>, CliError> {
    ns.par_iter()
        .map(|&n| {
            let r = run(&v.phi, &v.space, &v.scheme_params(n)).map_err(ctx(&format!("scheme run at n = {n}")))?;
            Ok(Level { n, value: r.center_value, certificate: r.certificate })
        })
        .collect()
}

fn tail_constant(v: &Validated) -> Result<f64, CliError> {
    let ns = v.condition_n();
    let mut c = 0.0f64;
    for w in v.space.corner_members() {
        c = c.max(validate_conditions(w, &ns).map_err(ctx("tail conditions"))?.c_beta_empirical);
    }
    Ok(c)
}

fn moment(v: &Validated) -> Result<MomentEstimate, CliError> {
    moment_mdelta(&v.space, v.config.audit.moment_n_max, v.config.cap, MomentGrid::default()).map_err(ctx("moment estimate"))
}

/// Convergence study of `u_h(1, 0)` over `n_list`.
pub fn converge(v: &Validated, out: &Output) -> Result<bool, CliError> {
    check_geometric(&v.config.n_list)?;
    let ns = v.config.n_list.clone();
    let ref_ns = v.reference_levels();
    let mut all: Vec<usize> = ns.iter().chain(ref_ns.iter()).copied().collect();
    all.sort_unstable();
    all.dedup();
    let computed = levels(v, &all)?;
    let pick = |set: &[usize]| -> Vec<Level> { computed.iter().filter(|l| set.contains(&l.n)).copied().collect() };
    let study = pick(&ns);
    let reference_levels = pick(&ref_ns);

    let degenerate = v.space.set.is_singleton() && v.tails.a1 == v.tails.a2;
    let oracle =
        if degenerate { Some(fourier_reference(&v.phi, &v.space, 1.0, 0.0, 1e-7).map_err(ctx("Fourier oracle"))?) } else { None };
    let (extrapolated, extrapolation_failure) = match extrapolate_levels(&reference_levels) {
        Ok(r) => (Some(r), None),
        Err(e) if oracle.is_some() => (None, Some(e.to_string())),
        Err(e) => return Err(ctx("extrapolated reference")(e)),
    };
    let reference = oracle.or(extrapolated).expect("one reference is available");

    let eps0 = v.config.eps0;
    let gamma = gamma_rate_example(&v.cfg, &v.tails, eps0).map_err(ctx("gamma"))?;
    let rate = RateReport::from_levels(&study, reference, gamma);

    let oracle_agreement: Vec<OracleRow> = oracle
        .map(|o| {
            study
                .iter()
                .map(|l| {
                    let difference = (l.value - o.value).abs();
                    let allowance = l.certificate + o.certified_error;
                    OracleRow { n: l.n, difference, allowance, pass: difference <= allowance }
                })
                .collect()
        })
        .unwrap_or_default();

    let (budget, theorem_bounds) = if v.phi.lipschitz() > 0.0 {
        let q0 = q0_theoretical(&v.cfg, &v.tails, eps0).map_err(ctx("q0"))?;
        let m = moment(v)?;
        let budget = ErrorBudget::new(&v.cfg, v.phi.lipschitz(), v.phi.sup_norm(), m.m_delta_lower, tail_constant(v)?, q0);
        let rows = rate
            .rows
            .iter()
            .map(|r| {
                let bound = theorem_bound(1.0 / r.n as f64, &v.cfg, &budget).map_err(ctx("theorem bound"))?;
                Ok(BoundRow { n: r.n, error: r.error, bound: bound + r.certificate + reference.certified_error })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        (Some(budget), rows)
    } else {
        (None, Vec::new())
    };

    let pass = oracle_agreement.iter().all(|r| r.pass) && theorem_bounds.iter().all(|b| b.error <= b.bound);
    let report = ConvergeReport {
        monotone: rate.monotone(),
        rate,
        reference_levels,
        extrapolated,
        extrapolation_failure,
        oracle,
        oracle_agreement,
        budget,
        theorem_bounds,
        pass,
    };
    out.raw("rate_report.csv", |w| report.rate.write_csv(w))?;
    out.json("rate_report.json", &report)?;

    println!("reference = {:.8} ({:?})", reference.value, reference.method);
    for r in &report.rate.rows {
        println!("n = {:5}  u_h = {:.8}  error = {:.3e}  certificate = {:.3e}", r.n, r.value, r.error, r.certificate);
    }
    match &report.rate.fit {
        Some(f) => {
            println!("slope = {:.4} (gamma = {:.4}), max relative residual = {:.3}", f.slope, gamma, f.max_relative_residual)
        }
        None => println!("slope not applicable (some error vanishes); gamma = {gamma:.4}"),
    }
    Ok(pass)
}

// ---------------------------------------------------------------- audit

#[derive(Serialize)]
struct ComparisonSummary {
    trials: usize,
    steps: usize,
    worst_excess: f64,
    failed_trials: usize,
    worst_margin: f64,
    largest_slack: f64,
    pass: bool,
}

#[derive(Serialize)]
struct AuditReport {
    axioms: AxiomReport,
    regularity: RegularityReport,
    moment: MomentEstimate,
    comparison: ComparisonSummary,
    mollifier: MollifierReport,
    pass: bool,
}

/// Runs the invariant suites and writes their margins.
pub fn audit(v: &Validated, out: &Output, seed: u64) -> Result<bool, CliError> {
    let s = &v.config.audit;
    let axioms = axiom_suite(&v.space, s.axiom_trials, seed).map_err(ctx("axiom suite"))?;

    let params = v.scheme_params(s.scheme_n);
    let trajectory = run_steps(&v.phi, &v.space, &params, s.scheme_n, true).map_err(ctx("regularity run"))?;
    let moment = moment(v)?;
    let regularity = regularity_audit(&trajectory, &v.phi, &moment, v.cfg.alpha(), 1e-4);

    let steps = s.scheme_n.min(8);
    let comp = comparison_suite(&v.space, &v.phi, &params, steps, s.comparison_trials, seed.wrapping_add(1))
        .map_err(ctx("comparison suite"))?;
    let comparison = ComparisonSummary {
        trials: comp.trials.len(),
        steps,
        worst_excess: comp.worst_excess,
        failed_trials: comp.trials.iter().filter(|t| !t.pass).count(),
        worst_margin: comp.trials.iter().map(|t| t.worst_margin).fold(f64::INFINITY, f64::min),
        largest_slack: comp.trials.iter().map(|t| t.slack).fold(0.0, f64::max),
        pass: comp.pass,
    };

    let p = v.cfg.alpha() / v.cfg.delta();
    let mollifier =
        mollifier_suite(s.mollifier_functions, &s.mollifier_epsilons, p, seed.wrapping_add(2)).map_err(ctx("mollifier suite"))?;

    let pass = axioms.pass && regularity.pass && comparison.pass && mollifier.pass;
    let report = AuditReport { axioms, regularity, moment, comparison, mollifier, pass };
    out.json("audit.json", &report)?;
    let flag = |b: bool| if b { "pass" } else { "FAIL" };
    println!(
        "axioms: {} (worst violation {:.3e}, tolerance {:.1e})",
        flag(report.axioms.pass),
        [report.axioms.monotonicity, report.axioms.constants, report.axioms.subadditivity, report.axioms.homogeneity]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
        report.axioms.tolerance
    );
    println!(
        "regularity: {} (spatial ratio {:.6} vs {:.6}, time margin {:.3e})",
        flag(report.regularity.pass),
        report.regularity.spatial_ratio,
        report.regularity.spatial_limit,
        report.regularity.time_margin
    );
    println!(
        "comparison: {} ({} of {} trials failed, worst margin + slack {:.3e})",
        flag(report.comparison.pass),
        report.comparison.failed_trials,
        report.comparison.trials,
        report.comparison.worst_excess
    );
    println!("mollifier: {}", flag(report.mollifier.pass));
    Ok(pass)
}

// ---------------------------------------------------------------- rate-table

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateTableRow {
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub q0: f64,
    pub gamma: f64,
}

/// Γ for the example family over a grid of `(α, β)`; `δ` follows the
/// default rule and pairs with `β ≤ α` are skipped.
pub fn rate_table(alphas: &[f64], betas: &[f64], eps0: f64) -> Result<Vec<RateTableRow>, CliError> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(CliError::Usage(format!("invalid value for `--alphas`: {alpha} is outside (0,2)")));
        }
        let delta = if alpha > 1.0 { 1.0 } else { alpha / 2.0 };
        let cfg = StableConfig::new(alpha, delta).map_err(|e| CliError::Usage(e.to_string()))?;
        for &beta in betas.iter().filter(|&&b| b > alpha) {
            let tails = TailCoefficients::symmetric(0.0, beta);
            let q0 = q0_theoretical(&cfg, &tails, eps0).map_err(|e| CliError::Usage(e.to_string()))?;
            let gamma = gamma_rate_example(&cfg, &tails, eps0).map_err(|e| CliError::Usage(e.to_string()))?;
            rows.push(RateTableRow { alpha, delta, beta, q0, gamma });
        }
    }
    Ok(rows)
}

/// Writes the table as CSV to `w`.
pub fn write_rate_table<W: Write>(rows: &[RateTableRow], w: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["alpha", "delta", "beta", "q0", "gamma"])?;
    for r in rows {
        w.write_record([r.alpha, r.delta, r.beta, r.q0, r.gamma].map(|x| format!("{x}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the table into the output directory too.
pub fn save_rate_table(rows: &[RateTableRow], out: &Output) -> Result<(), CliError> {
    out.raw("rate_table.csv", |w| write_rate_table(rows, w).map_err(std::io::Error::other))?;
    out.json("rate_table.json", &rows)
}
