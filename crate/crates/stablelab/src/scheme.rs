//! The grid recursion `u_h(t, x) = Ê[u_h(t − h, x + h^{1/α} Z)]`.
//!
//! The state lives on the symmetric grid `x_i = (i − M)·Δx`, `i = 0..=2M`,
//! so the origin is a node. Between nodes the state is interpolated
//! linearly, and outside the grid it is continued by the edge values. With
//! that interpolant the one-step expectation under a member distribution is
//! an exact linear map of the nodal values whose weights follow from the
//! closed-form segment moments of the distribution; the sublinear step takes
//! the nodewise maximum over the corner members.
//!
//! Each run carries a certificate for `|grid − u_h|` at every node. It adds
//! the interpolation modulus per step, a per-step quadrature allowance, and
//! an edge term propagated by the same monotone recursion. The edge term
//! charges the mass that leaves the grid with a bound on how far the exact
//! iterate can drift from its edge value; that bound comes from the tail of
//! the partial sums when the test function is constant far out.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::gauss_legendre;
use crate::stable_measure::TestFunction;
use crate::sublinear::{MomentEstimate, SublinearSpace};
use crate::wk_family::WkDistribution;

/// Grids up to this many nodes use the direct correlation.
const DIRECT_LIMIT: usize = 384;
const MAX_NODES: usize = 1 << 24;

/// A bounded function sampled on a uniform grid at a time label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub x_min: f64,
    pub x_max: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
    pub time_label: f64,
    pub sup_norm_bound: f64,
}

impl GridFunction {
    /// Checks the length and sup-norm invariants.
    pub fn new(x_min: f64, spacing: f64, values: Vec<f64>, time_label: f64, sup_norm_bound: f64) -> Result<Self> {
        if !(spacing > 0.0) || values.len() < 2 {
            return Err(LabError::Domain("a grid function needs positive spacing and at least two nodes".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= sup_norm_bound)) {
            return Err(LabError::Contract(format!("grid value {v} exceeds the sup-norm bound {sup_norm_bound}")));
        }
        let x_max = x_min + (values.len() - 1) as f64 * spacing;
        Ok(Self { x_min, x_max, spacing, values, time_label, sup_norm_bound })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    /// Index of the node at `x`, if `x` is a node.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.x_min) / self.spacing;
        let i = t.round();
        ((t - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// Piecewise-linear interpolant, constant beyond the edges.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.len();
        if x <= self.x_min {
            return self.values[0];
        }
        if x >= self.x_max {
            return self.values[n - 1];
        }
        let t = (x - self.x_min) / self.spacing;
        let i = (t.floor() as usize).min(n - 2);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Lipschitz constant of the interpolant, which is the largest slope
    /// between neighbouring nodes.
    pub fn lipschitz(&self) -> f64 {
        self.values.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs())) / self.spacing
    }

    /// Writes `x,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.12e},{:.17e}", self.node(i), v)?;
        }
        Ok(())
    }
}

/// How the state is interpolated between nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Linear interpolation of `u_j + θ(u_j − (u_{j−1} + u_{j+1})/2)`.
    /// Not monotone for `θ > 0`; exists as a negative control.
    Sharpened { strength: f64 },
}

/// Parameters of a scheme run with `h = 1/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub n: usize,
    /// Grid half-width `R`.
    pub half_width: f64,
    /// Node spacing `Δx`.
    pub spacing: f64,
    /// Per-step allowance for floating-point error in the weights.
    pub quad_tol: f64,
    pub interpolation: Interpolation,
    /// Whether to propagate the edge certificate.
    pub certify: bool,
}

impl SchemeParams {
    pub fn new(n: usize, half_width: f64, spacing: f64) -> Self {
        Self { n, half_width, spacing, quad_tol: 1e-10, interpolation: Interpolation::Linear, certify: true }
    }

    pub fn with_quad_tol(mut self, quad_tol: f64) -> Self {
        self.quad_tol = quad_tol;
        self
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn without_certificate(mut self) -> Self {
        self.certify = false;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of nodes on each side of the origin.
    pub fn nodes_per_side(&self) -> usize {
        (self.half_width / self.spacing).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LabError::Domain("n must be at least 1".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(LabError::Domain(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.half_width >= self.spacing && self.half_width.is_finite()) {
            return Err(LabError::Domain(format!("half_width {} must be finite and at least the spacing", self.half_width)));
        }
        if !(self.quad_tol >= 0.0) {
            return Err(LabError::Domain("quad_tol must be nonnegative".into()));
        }
        if 2 * self.nodes_per_side() + 1 > MAX_NODES {
            return Err(LabError::Domain(format!("grid with {} nodes per side is too large", self.nodes_per_side())));
        }
        Ok(())
    }
}

/// Samples `φ` on the grid at time 0.
pub fn init(phi: &dyn TestFunction, params: &SchemeParams) -> Result<GridFunction> {
    params.validate()?;
    let m = params.nodes_per_side();
    let x_min = -(m as f64) * params.spacing;
    let values = (0..=2 * m).map(|i| phi.value(x_min + i as f64 * params.spacing)).collect();
    GridFunction::new(x_min, params.spacing, values, 0.0, phi.sup_norm())
}

struct CornerKernel {
    /// `K(m)` for `m = −(N−1)..=N−1`, stored at `m + N − 1`.
    weights: Vec<f64>,
    left_fix: Vec<f64>,
    right_fix: Vec<f64>,
    exit_left: Vec<f64>,
    exit_right: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
}

impl CornerKernel {
    fn build(w: &WkDistribution, len: usize, dz: f64) -> Self {
        let n = len as i64;
        // Segment s covers [s·dz, (s+1)·dz]; s ranges over −N..N.
        let mut rise = vec![0.0; 2 * len];
        let mut fall = vec![0.0; 2 * len];
        for s in -n..n {
            let seg = w.segment(s as f64 * dz, (s + 1) as f64 * dz);
            let idx = (s + n) as usize;
            rise[idx] = seg.rise / dz;
            fall[idx] = seg.fall / dz;
        }
        let at = |v: &Vec<f64>, s: i64| v[(s + n) as usize];
        let weights = (-(n - 1)..n).map(|m| at(&rise, m - 1) + at(&fall, m)).collect();
        let mut left_fix = Vec::with_capacity(len);
        let mut right_fix = Vec::with_capacity(len);
        let mut exit_left = Vec::with_capacity(len);
        let mut exit_right = Vec::with_capacity(len);
        for i in 0..n {
            let el = w.cdf(-(i as f64) * dz);
            let er = w.sf((n - 1 - i) as f64 * dz);
            left_fix.push((el - at(&rise, -i - 1)).max(0.0));
            right_fix.push((er - at(&fall, n - 1 - i)).max(0.0));
            exit_left.push(el);
            exit_right.push(er);
        }
        Self { weights, left_fix, right_fix, exit_left, exit_right, spectrum: Vec::new() }
    }
}

struct FftPair {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Precomputed one-step operator for a space and a grid.
pub struct Stepper {
    h: f64,
    scale: f64,
    len: usize,
    spacing: f64,
    interpolation: Interpolation,
    kernels: Vec<CornerKernel>,
    fft: Option<FftPair>,
}

impl Stepper {
    pub fn new(space: &SublinearSpace, params: &SchemeParams) -> Result<Self> {
        params.validate()?;
        let len = 2 * params.nodes_per_side() + 1;
        let h = params.h();
        let scale = h.powf(1.0 / space.alpha());
        let dz = params.spacing / scale;
        let mut kernels: Vec<CornerKernel> = space.corner_members().par_iter().map(|w| CornerKernel::build(w, len, dz)).collect();
        let fft = (len > DIRECT_LIMIT).then(|| {
            let size = (3 * len - 2).next_power_of_two();
            let mut planner = FftPlanner::new();
            FftPair { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
        });
        if let Some(f) = &fft {
            let norm = 1.0 / f.size as f64;
            kernels.par_iter_mut().for_each(|k| {
                let mut buf = vec![Complex::new(0.0, 0.0); f.size];
                for (t, b) in buf.iter_mut().take(2 * len - 1).enumerate() {
                    b.re = k.weights[2 * len - 2 - t] * norm;
                }
                f.forward.process(&mut buf);
                k.spectrum = buf;
            });
        }
        Ok(Self { h, scale, len, spacing: params.spacing, interpolation: params.interpolation, kernels, fft })
    }

    /// `h^{1/α}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn prefilter(&self, u: &[f64]) -> Vec<f64> {
        match self.interpolation {
            Interpolation::Linear => u.to_vec(),
            Interpolation::Sharpened { strength } => {
                let mut out = u.to_vec();
                for j in 1..u.len() - 1 {
                    out[j] = u[j] + strength * (u[j] - 0.5 * (u[j - 1] + u[j + 1]));
                }
                out
            }
        }
    }

    /// Per-corner images `(W_k u, W_k b)` including the edge continuation.
    fn corner_images(&self, u: &[f64], b: Option<&[f64]>) -> Vec<(Vec<f64>, Vec<f64>)> {
        let n = self.len;
        let mut out: Vec<(Vec<f64>, Vec<f64>)> = match &self.fft {
            None => self
                .kernels
                .iter()
                .map(|k| {
                    let corr = |v: &[f64]| -> Vec<f64> {
                        (0..n).map(|i| (0..n).map(|j| k.weights[j + n - 1 - i] * v[j]).sum::<f64>()).collect()
                    };
                    (corr(u), b.map(corr).unwrap_or_default())
                })
                .collect(),
            Some(f) => {
                let mut buf = vec![Complex::new(0.0, 0.0); f.size];
                for j in 0..n {
                    buf[j] = Complex::new(u[j], b.map_or(0.0, |b| b[j]));
                }
                f.forward.process(&mut buf);
                self.kernels
                    .par_iter()
                    .map(|k| {
                        let mut prod: Vec<Complex<f64>> = buf.iter().zip(&k.spectrum).map(|(a, s)| a * s).collect();
                        f.inverse.process(&mut prod);
                        let re = (0..n).map(|i| prod[n - 1 + i].re).collect();
                        let im = if b.is_some() { (0..n).map(|i| prod[n - 1 + i].im).collect() } else { Vec::new() };
                        (re, im)
                    })
                    .collect()
            }
        };
        for (k, (cu, cb)) in self.kernels.iter().zip(out.iter_mut()) {
            for i in 0..n {
                cu[i] += u[0] * k.left_fix[i] + u[n - 1] * k.right_fix[i];
            }
            if let Some(b) = b {
                for i in 0..n {
                    cb[i] += b[0] * k.left_fix[i] + b[n - 1] * k.right_fix[i];
                }
            }
        }
        out
    }

    /// One sublinear step of the nodal values, and optionally of the edge
    /// bound `b` with drift allowances `(τ_left, τ_right)` capped at `cap`.
    fn apply(&self, u: &[f64], b: Option<(&[f64], (f64, f64), f64)>) -> (Vec<f64>, Option<Vec<f64>>) {
        let u = self.prefilter(u);
        let images = self.corner_images(&u, b.map(|t| t.0));
        let n = self.len;
        let mut v = vec![f64::NEG_INFINITY; n];
        for (cu, _) in &images {
            for (vi, ci) in v.iter_mut().zip(cu) {
                *vi = vi.max(*ci);
            }
        }
        let nb = b.map(|(_, (tl, tr), cap)| {
            let mut nb = vec![0.0f64; n];
            for (k, (_, cb)) in self.kernels.iter().zip(&images) {
                for i in 0..n {
                    let e = cb[i] + tl * k.exit_left[i] + tr * k.exit_right[i];
                    nb[i] = nb[i].max(e);
                }
            }
            nb.iter_mut().for_each(|x| *x = x.min(cap));
            nb
        });
        (v, nb)
    }

    /// Advances a grid function by one step.
    pub fn advance(&self, u: &GridFunction) -> Result<GridFunction> {
        if u.len() != self.len || (u.spacing - self.spacing).abs() > 1e-12 * self.spacing {
            return Err(LabError::Contract("grid function does not match the stepper's grid".into()));
        }
        let t = u.time_label + self.h;
        if t > 1.0 + 1e-9 {
            return Err(LabError::Sequencing(format!("step would advance time to {t} > 1")));
        }
        let (values, _) = self.apply(&u.values, None);
        let sup = u.sup_norm_bound;
        let values = values.into_iter().map(|v| v.clamp(-sup, sup)).collect();
        Ok(GridFunction { values, time_label: t.min(1.0), ..u.clone() })
    }
}

/// One step of the scheme.
pub fn step(u: &GridFunction, space: &SublinearSpace, params: &SchemeParams) -> Result<GridFunction> {
    Stepper::new(space, params)?.advance(u)
}

/// Output of a scheme run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub final_grid: GridFunction,
    /// Grid value at the origin after `steps` steps.
    pub center_value: f64,
    pub steps: usize,
    pub h: f64,
    /// Edge contribution to the certificate at the origin.
    pub tail_budget: f64,
    pub interpolation_budget: f64,
    pub quadrature_budget: f64,
    /// Certified bound on `|grid − u_h|` at the origin (infinite when the
    /// run was not certified).
    pub certificate: f64,
    /// Slices at times `0, h, …` when requested.
    pub trajectory: Vec<GridFunction>,
    /// Nodewise certificates of the slices in `trajectory`.
    pub trajectory_bounds: Vec<Vec<f64>>,
}

/// Per-step interpolation error of the exact iterate. In the linear
/// (singleton) case the iterate keeps the second derivative bound of `φ`.
pub fn interpolation_modulus(phi: &dyn TestFunction, space: &SublinearSpace, spacing: f64) -> f64 {
    let first = phi.lipschitz() * spacing / 2.0;
    match (space.corner_members().len(), phi.derivative_norm(2)) {
        (1, Some(d2)) => first.min(d2 * spacing * spacing / 8.0),
        _ => first,
    }
}

/// Allowance `(τ_left, τ_right)` for the drift of the exact `m`-step
/// iterate beyond the grid edges relative to its edge values.
fn edge_drift(phi: &dyn TestFunction, space: &SublinearSpace, scale: f64, edge: f64, m: usize) -> (f64, f64) {
    let osc = phi.oscillation();
    let flat = match phi.flat() {
        Some(f) => f,
        None => return (osc, osc),
    };
    let (lo, hi) = phi.range();
    let side = |dist: f64, level: f64, tail: &dyn Fn(&WkDistribution, f64) -> f64| -> f64 {
        if dist <= 0.0 {
            return osc;
        }
        if m == 0 {
            return 0.0;
        }
        let mf = m as f64;
        let prob = space.corner_members().iter().map(|w| tail(w, dist / (scale * mf))).fold(0.0, f64::max);
        let drift = (hi - level).abs().max((lo - level).abs()) * (mf * prob).min(1.0);
        (2.0 * drift).min(osc)
    };
    let right = side(edge - flat.hi, flat.right, &|w, t| w.cdf(-t));
    let left = side(flat.lo + edge, flat.left, &|w, t| w.sf(t));
    (left, right)
}

/// Applies `steps` steps of the scheme with `h = 1/params.n` to `φ`.
pub fn run_steps(
    phi: &dyn TestFunction,
    space: &SublinearSpace,
    params: &SchemeParams,
    steps: usize,
    keep_trajectory: bool,
) -> Result<SchemeRun> {
    params.validate()?;
    if steps > params.n {
        return Err(LabError::Sequencing(format!("{steps} steps of size 1/{} pass the terminal time", params.n)));
    }
    let stepper = Stepper::new(space, params)?;
    let mut grid = init(phi, params)?;
    let n = grid.len();
    let center = n / 2;
    let edge = grid.x_max;
    let iota = interpolation_modulus(phi, space, params.spacing);
    let osc = phi.oscillation();
    let mut bound = vec![0.0; n];
    let mut trajectory = Vec::new();
    let mut trajectory_bounds = Vec::new();
    if keep_trajectory {
        trajectory.push(grid.clone());
        trajectory_bounds.push(vec![0.0; n]);
    }
    for m in 1..=steps {
        let t = grid.time_label + stepper.h;
        if t > 1.0 + 1e-9 {
            return Err(LabError::Sequencing(format!("step would advance time to {t} > 1")));
        }
        let drift = if params.certify { edge_drift(phi, space, stepper.scale, edge, m - 1) } else { (0.0, 0.0) };
        let b = params.certify.then_some((bound.as_slice(), drift, osc));
        let (values, nb) = stepper.apply(&grid.values, b);
        if let Some(nb) = nb {
            bound = nb;
        }
        let sup = grid.sup_norm_bound;
        grid = GridFunction { values: values.into_iter().map(|v| v.clamp(-sup, sup)).collect(), time_label: t.min(1.0), ..grid };
        if keep_trajectory {
            trajectory.push(grid.clone());
            let extra = m as f64 * (iota + params.quad_tol);
            trajectory_bounds.push(if params.certify {
                bound.iter().map(|b| b + extra).collect()
            } else {
                vec![f64::INFINITY; n]
            });
        }
    }
    let sf = steps as f64;
    let (tail_budget, interpolation_budget, quadrature_budget) = if params.certify {
        (bound[center], sf * iota, sf * params.quad_tol)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    Ok(SchemeRun {
        center_value: grid.values[center],
        final_grid: grid,
        steps,
        h: stepper.h,
        tail_budget,
        interpolation_budget,
        quadrature_budget,
        certificate: tail_budget + interpolation_budget + quadrature_budget,
        trajectory,
        trajectory_bounds,
    })
}

/// `n` steps with `h = 1/n`, i.e. the value at `t = 1`.
pub fn run(phi: &dyn TestFunction, space: &SublinearSpace, params: &SchemeParams) -> Result<SchemeRun> {
    run_steps(phi, space, params, params.n, false)
}

/// Margins of the space and time regularity audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Largest nodal Lipschitz ratio over all slices.
    pub spatial_ratio: f64,
    /// `C_φ·(1 + relative_slack)`.
    pub spatial_limit: f64,
    /// `C_φ^δ (2‖φ‖)^{1−δ} M_δ`.
    pub time_constant: f64,
    /// Smallest value of `bound + slack − |u(t,x) − u(s,x)|` over all pairs.
    pub time_margin: f64,
    pub pass: bool,
}

/// Checks the spatial Lipschitz bound on every slice and the time modulus
/// `C_φ^δ (2‖φ‖)^{1−δ} M_δ (|t−s|^{δ/α} + h^{δ/α})` on every pair of slices
/// at every node, allowing the slices' certificates as slack.
pub fn regularity_audit(
    run: &SchemeRun,
    phi: &dyn TestFunction,
    estimate: &MomentEstimate,
    alpha: f64,
    relative_slack: f64,
) -> RegularityReport {
    let c_phi = phi.lipschitz();
    let spatial_ratio = run.trajectory.iter().map(GridFunction::lipschitz).fold(0.0, f64::max);
    let spatial_limit = c_phi * (1.0 + relative_slack);
    let d = estimate.delta;
    let time_constant = c_phi.powf(d) * (2.0 * phi.sup_norm()).powf(1.0 - d) * estimate.m_delta_lower;
    let hp = run.h.powf(d / alpha);
    let mut time_margin = f64::INFINITY;
    let slices = &run.trajectory;
    let zero = vec![0.0; slices.first().map_or(0, GridFunction::len)];
    let bound_of = |i: usize| run.trajectory_bounds.get(i).unwrap_or(&zero);
    for l in 0..slices.len() {
        for m in l + 1..slices.len() {
            let dt = (slices[m].time_label - slices[l].time_label).abs();
            let rhs = time_constant * (dt.powf(d / alpha) + hp);
            let (bl, bm) = (bound_of(l), bound_of(m));
            for i in 0..slices[m].len() {
                let diff = (slices[m].values[i] - slices[l].values[i]).abs();
                time_margin = time_margin.min(rhs + bl[i] + bm[i] - diff);
            }
        }
    }
    RegularityReport {
        spatial_ratio,
        spatial_limit,
        time_constant,
        time_margin,
        pass: spatial_ratio <= spatial_limit && time_margin >= 0.0,
    }
}

/// Outcome of a comparison trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pass: bool,
    /// Smallest value of `gap⁺ + t·residual⁺ − (u − v)` over nodes and steps.
    pub worst_margin: f64,
    /// Accumulated floating-point allowance.
    pub slack: f64,
    pub initial_gap: f64,
    pub residual_gap: f64,
}

/// Evolves `u_m = S(u_{m−1}) + h·h1(t_m, ·)` and `v_m = S(v_{m−1}) + h·h2(t_m, ·)`
/// for `steps` steps and checks
/// `u_m − v_m ≤ sup (u_0 − v_0)⁺ + t_m · sup (h1 − h2)⁺` at every node.
pub fn comparison_check(
    u0: &GridFunction,
    v0: &GridFunction,
    h1: &dyn Fn(f64, f64) -> f64,
    h2: &dyn Fn(f64, f64) -> f64,
    space: &SublinearSpace,
    params: &SchemeParams,
    steps: usize,
) -> Result<ComparisonReport> {
    if u0.len() != v0.len() || u0.x_min != v0.x_min || u0.spacing != v0.spacing {
        return Err(LabError::Contract("comparison requires grid functions on the same grid".into()));
    }
    if steps > params.n {
        return Err(LabError::Sequencing(format!("{steps} steps of size 1/{} pass the terminal time", params.n)));
    }
    let stepper = Stepper::new(space, params)?;
    if stepper.len() != u0.len() {
        return Err(LabError::Contract("grid functions do not match the scheme parameters".into()));
    }
    let h = stepper.h();
    let initial_gap = u0.values.iter().zip(&v0.values).fold(0.0f64, |m, (a, b)| m.max(a - b));
    let mut residual_gap = 0.0f64;
    for m in 1..=steps {
        let t = m as f64 * h;
        for i in 0..u0.len() {
            let x = u0.node(i);
            residual_gap = residual_gap.max(h1(t, x) - h2(t, x));
        }
    }
    let (mut u, mut v) = (u0.values.clone(), v0.values.clone());
    let mut worst_margin = f64::INFINITY;
    for m in 1..=steps {
        let t = m as f64 * h;
        u = stepper.apply(&u, None).0;
        v = stepper.apply(&v, None).0;
        for i in 0..u.len() {
            let x = u0.node(i);
            u[i] += h * h1(t, x);
            v[i] += h * h2(t, x);
            worst_margin = worst_margin.min(initial_gap + t * residual_gap - (u[i] - v[i]));
        }
    }
    let scale = 1.0 + u0.sup_norm().max(v0.sup_norm());
    let slack = steps as f64 * params.quad_tol * scale;
    Ok(ComparisonReport { pass: worst_margin >= -slack, worst_margin, slack, initial_gap, residual_gap })
}

/// Grid-free value `u_h(steps·h, 0)` by nested product quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Bound on the error from the mass beyond the outermost panels.
    pub truncation: f64,
    /// Nodes per level.
    pub nodes: usize,
}

struct SharedRule {
    nodes: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

/// One set of nodes for all corner members: Gauss–Legendre panels on
/// `[−1, 1]` and on the dyadic shells `±[2^j, 2^{j+1}]`, plus one node per
/// side carrying the exact leftover tail mass.
fn shared_rule(members: &[WkDistribution], order: usize, tail_mass: f64) -> (SharedRule, f64) {
    let (gx, gw) = gauss_legendre(order);
    let mut panels = vec![(-1.0, -0.5), (-0.5, 0.0), (0.0, 0.5), (0.5, 1.0)];
    let leftover = |z: f64| members.iter().map(|w| w.cdf(-z).max(w.sf(z))).fold(0.0, f64::max);
    let mut top = 1.0f64;
    while leftover(top) > tail_mass && top < 1e300 {
        panels.push((top, 2.0 * top));
        panels.push((-2.0 * top, -top));
        top *= 2.0;
    }
    let mut nodes = Vec::new();
    let mut weights = vec![Vec::new(); members.len()];
    for &(a, b) in &panels {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gx.iter().zip(&gw) {
            let z = c + r * x;
            nodes.push(z);
            for (k, m) in members.iter().enumerate() {
                weights[k].push(r * w * m.pdf(z));
            }
        }
    }
    for (z, lower) in [(2.0 * top, false), (-2.0 * top, true)] {
        nodes.push(z);
        for (k, m) in members.iter().enumerate() {
            weights[k].push(if lower { m.cdf(-top) } else { m.sf(top) });
        }
    }
    let trunc = 2.0 * leftover(top);
    (SharedRule { nodes, weights }, trunc)
}

fn nested_value(level: usize, x: f64, rule: &SharedRule, scale: f64, phi: &dyn TestFunction) -> f64 {
    let corners = rule.weights.len();
    let mut sums = [0.0f64; 4];
    if level == 1 {
        for (i, z) in rule.nodes.iter().enumerate() {
            let v = phi.value(x + scale * z);
            for k in 0..corners {
                sums[k] += rule.weights[k][i] * v;
            }
        }
    } else {
        for (i, z) in rule.nodes.iter().enumerate() {
            let v = nested_value(level - 1, x + scale * z, rule, scale, phi);
            for k in 0..corners {
                sums[k] += rule.weights[k][i] * v;
            }
        }
    }
    sums[..corners].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `u_h(steps·h, 0)` with `h = 1/n`, evaluated without any grid: each level
/// is the corner maximum of a fixed product rule applied to the level below.
pub fn nested_oracle(
    phi: &dyn TestFunction,
    space: &SublinearSpace,
    n: usize,
    steps: usize,
    order: usize,
) -> Result<OracleValue> {
    if n == 0 || steps == 0 || steps > n {
        return Err(LabError::Domain(format!("need 1 <= steps <= n, got steps = {steps}, n = {n}")));
    }
    if steps > 4 {
        return Err(LabError::Domain("the nested oracle is limited to four levels".into()));
    }
    if order == 0 {
        return Err(LabError::Domain("quadrature order must be positive".into()));
    }
    let members = space.corner_members();
    let (rule, trunc) = shared_rule(members, order, 1e-10);
    let scale = (1.0 / n as f64).powf(1.0 / space.alpha());
    let value = if steps == 1 {
        nested_value(1, 0.0, &rule, scale, phi)
    } else {
        let inner: Vec<f64> = rule.nodes.par_iter().map(|z| nested_value(steps - 1, scale * z, &rule, scale, phi)).collect();
        rule.weights.iter().map(|w| w.iter().zip(&inner).map(|(a, b)| a * b).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(OracleValue { value, truncation: steps as f64 * phi.oscillation() * trunc, nodes: rule.nodes.len() })
}
