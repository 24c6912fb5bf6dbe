//! Experiment configuration: JSON schema, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stablelab::phi::{NamedPhi, PhiSpec};
use stablelab::scheme::{Interpolation, SchemeParams};
use stablelab::stable_measure::{StableConfig, UncertaintySet};
use stablelab::sublinear::SublinearSpace;
use stablelab::wk_family::TailCoefficients;

/// A configuration problem tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Sizes of the audit suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSettings {
    pub axiom_trials: usize,
    pub comparison_trials: usize,
    /// `n` of the regularity and comparison runs.
    pub scheme_n: usize,
    pub moment_n_max: usize,
    pub mollifier_functions: usize,
    pub mollifier_epsilons: Vec<f64>,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            axiom_trials: 200,
            comparison_trials: 100,
            scheme_n: 16,
            moment_n_max: 16,
            mollifier_functions: 5,
            mollifier_epsilons: vec![0.2, 0.1, 0.05],
        }
    }
}

fn default_n_list() -> Vec<usize> {
    vec![8, 16, 32, 64, 128]
}
fn default_quad_tol() -> f64 {
    1e-9
}
fn default_cap() -> f64 {
    100.0
}
fn default_eps0() -> f64 {
    0.01
}

/// The experiment description read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    /// Moment order; defaults to 1 for `alpha > 1` and `alpha/2` otherwise.
    #[serde(default)]
    pub delta: Option<f64>,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    pub a1: f64,
    pub a2: f64,
    pub beta: f64,
    pub phi: PhiSpec,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    pub half_width: f64,
    pub spacing: f64,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Levels for the extrapolated reference; defaults to the three
    /// doublings after the largest entry of `n_list`.
    #[serde(default)]
    pub reference_levels: Option<Vec<usize>>,
    /// `n` values of the condition tables.
    #[serde(default)]
    pub condition_n: Option<Vec<u64>>,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub audit: AuditSettings,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A configuration whose numeric ranges passed validation.
pub struct Validated {
    pub config: ExperimentConfig,
    pub cfg: StableConfig,
    pub tails: TailCoefficients,
    pub space: SublinearSpace,
    pub phi: NamedPhi,
}

impl Validated {
    pub fn scheme_params(&self, n: usize) -> SchemeParams {
        SchemeParams::new(n, self.config.half_width, self.config.spacing)
            .with_quad_tol(self.config.quad_tol)
            .with_interpolation(self.config.interpolation)
    }

    pub fn reference_levels(&self) -> Vec<usize> {
        self.config.reference_levels.clone().unwrap_or_else(|| {
            let top = self.config.n_list.iter().copied().max().unwrap_or(8);
            vec![2 * top, 4 * top, 8 * top]
        })
    }

    pub fn condition_n(&self) -> Vec<u64> {
        self.config.condition_n.clone().unwrap_or_else(|| (0..=12).map(|j| 1u64 << j).collect())
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive, got {v}")))
    }
}

/// Reads and parses a configuration file.
pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new(&json_field(&e.to_string()), e.to_string()))
}

/// Extracts a backquoted field name from a serde error message.
fn json_field(msg: &str) -> String {
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "<json>".to_string())
}

impl ExperimentConfig {
    /// Checks every numeric range against the library preconditions and
    /// builds the space and the test function.
    pub fn validate(self) -> Result<Validated, ConfigError> {
        let a = self.alpha;
        finite("alpha", a)?;
        if !(a > 0.0 && a < 2.0) {
            return Err(ConfigError::new("alpha", format!("must lie in (0,2), got {a}")));
        }
        let delta = self.delta.unwrap_or(if a > 1.0 { 1.0 } else { a / 2.0 });
        finite("delta", delta)?;
        if !(delta > 0.0 && delta < a) {
            return Err(ConfigError::new("delta", format!("must lie in (0, alpha), got {delta}")));
        }
        if a > 1.0 && delta != 1.0 {
            return Err(ConfigError::new("delta", format!("must equal 1 when alpha > 1, got {delta}")));
        }
        positive("lambda_lower", self.lambda_lower)?;
        finite("lambda_upper", self.lambda_upper)?;
        if self.lambda_upper < self.lambda_lower {
            return Err(ConfigError::new(
                "lambda_upper",
                format!("must be at least lambda_lower = {}, got {}", self.lambda_lower, self.lambda_upper),
            ));
        }
        for (name, v) in [("a1", self.a1), ("a2", self.a2)] {
            finite(name, v)?;
            if v < 0.0 {
                return Err(ConfigError::new(name, format!("must be nonnegative, got {v}")));
            }
        }
        finite("beta", self.beta)?;
        if !(self.beta > a) {
            return Err(ConfigError::new("beta", format!("must exceed alpha = {a}, got {}", self.beta)));
        }
        if a <= 1.0 && self.a1 != self.a2 {
            return Err(ConfigError::new(
                "a2",
                format!("the symmetry condition for alpha <= 1 requires a1 = a2, got a1 = {}, a2 = {}", self.a1, self.a2),
            ));
        }
        if a <= 1.0 && self.lambda_lower != self.lambda_upper {
            // Admissible weights lie on the diagonal; nothing to reject.
        }
        positive("quad_tol", self.quad_tol)?;
        positive("half_width", self.half_width)?;
        positive("spacing", self.spacing)?;
        if self.spacing >= self.half_width {
            return Err(ConfigError::new("spacing", "must be smaller than half_width"));
        }
        positive("cap", self.cap)?;
        positive("eps0", self.eps0)?;
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(ConfigError::new("n_list", "must be a nonempty list of positive integers"));
        }
        if let Some(levels) = &self.reference_levels {
            if levels.len() < 3 || levels.windows(2).any(|w| w[1] != 2 * w[0]) || levels[0] == 0 {
                return Err(ConfigError::new(
                    "reference_levels",
                    "need at least three positive levels, each double the previous",
                ));
            }
        }
        if let Some(ns) = &self.condition_n {
            if ns.is_empty() || ns.contains(&0) {
                return Err(ConfigError::new("condition_n", "must be a nonempty list of positive integers"));
            }
        }
        if let Interpolation::Sharpened { strength } = self.interpolation {
            finite("interpolation", strength)?;
        }
        let s = &self.audit;
        if s.scheme_n == 0 || s.moment_n_max == 0 {
            return Err(ConfigError::new("audit", "scheme_n and moment_n_max must be positive"));
        }
        if s.mollifier_epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(ConfigError::new("audit.mollifier_epsilons", "each epsilon must lie in (0,1)"));
        }
        let phi = self.phi.build().map_err(|e| ConfigError::new("phi", e.to_string()))?;
        let cfg = StableConfig::new(a, delta).map_err(|e| ConfigError::new("delta", e.to_string()))?;
        let set = UncertaintySet::new(self.lambda_lower, self.lambda_upper)
            .map_err(|e| ConfigError::new("lambda_lower", e.to_string()))?;
        let tails = TailCoefficients::new(self.a1, self.a2, self.beta);
        let space = SublinearSpace::new(cfg, set, tails, self.quad_tol)
            .map_err(|e| ConfigError::new("lambda_lower/lambda_upper/a1/a2/beta", e.to_string()))?;
        Ok(Validated { config: self, cfg, tails, space, phi })
    }
}

/// `n_list` requirements of the convergence study.
pub fn check_geometric(ns: &[usize]) -> Result<(), ConfigError> {
    if ns.len() < 4 {
        return Err(ConfigError::new("n_list", format!("needs at least four entries, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(ConfigError::new("n_list", "entries must double from one to the next"));
    }
    Ok(())
}
