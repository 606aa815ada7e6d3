//! Declarative run configuration: TOML with one section per concern.
//!
//! ```toml
//! [problem]
//! kind = "least-squares"     # quadratic-example | least-squares | basis-pursuit
//! n = 100                    # agents
//! p = 3                      # variable dimension
//! instance_seed = 1001
//!
//! [network]
//! eta = 0.3
//! seed = 7
//! scheme = "metropolis"      # metropolis | metropolis-lazy | swap-example
//!
//! [run]
//! ceiling_fractions = [0.9, 0.09]   # or: alphas = [0.05, 0.005]
//! max_iter = 20000
//! stop_tol = 1e-13
//!
//! [output]
//! dir = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{}", format_field_errors(.0))]
    Invalid(Vec<FieldError>),
}

/// One rejected field with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn format_field_errors(errors: &[FieldError]) -> String {
    let lines: Vec<String> = errors.iter().map(FieldError::to_string).collect();
    format!("invalid config:\n  {}", lines.join("\n  "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    QuadraticExample,
    LeastSquares,
    BasisPursuit,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ProblemKind::QuadraticExample => "quadratic-example",
            ProblemKind::LeastSquares => "least-squares",
            ProblemKind::BasisPursuit => "basis-pursuit",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingScheme {
    #[default]
    Metropolis,
    MetropolisLazy,
    /// Fixed three-agent swap/averaging blend with parameter `tau`.
    #[serde(alias = "paper-example")]
    SwapExample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Agent count.
    #[serde(default)]
    pub n: usize,
    /// Variable dimension (for basis pursuit: the measurement count).
    #[serde(default)]
    pub p: usize,
    /// Signal dimension (basis pursuit only).
    #[serde(default)]
    pub q: usize,
    /// Nonzeros in the planted signal (basis pursuit only).
    #[serde(default)]
    pub sparsity: usize,
    /// Regularization weight; omitted or zero picks `10 ||y_true||_inf`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Curvature of the quadratic example.
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    /// Measurement noise standard deviation (least squares only).
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub instance_seed: u64,
}

fn default_curvature() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: MixingScheme,
    /// Swap-example parameter, required for that scheme, in (0, 1/3).
    #[serde(default)]
    pub tau: Option<f64>,
}

fn default_eta() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Absolute stepsizes to sweep.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Stepsizes as fractions of the computed ceiling (exclusive with
    /// `alphas`).
    #[serde(default)]
    pub ceiling_fractions: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Stop when the successive-iterate change drops below this.
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    /// Stacked start (agent-major); zeros when omitted.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn default_max_iter() -> usize {
    10_000
}

fn default_stop_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Keep a full state snapshot every this many rounds (0 = off).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Relative residual at which the basis-pursuit oracle stops.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
}

fn default_oracle_tol() -> f64 {
    1e-10
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, snapshot_every: 0, oracle_tol: default_oracle_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub network: NetworkConfig,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    /// Validates every field and returns a normalized copy (defaults filled
    /// in for the fixed-size quadratic example).
    pub fn validated(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = self.clone();
        let mut errors = Vec::new();
        let reject = |errors: &mut Vec<FieldError>, field: &str, message: String| {
            errors.push(FieldError { field: field.to_string(), message });
        };

        match cfg.problem.kind {
            ProblemKind::QuadraticExample => {
                if cfg.problem.n == 0 {
                    cfg.problem.n = 3;
                }
                if cfg.problem.p == 0 {
                    cfg.problem.p = 1;
                }
                if cfg.problem.n != 3 {
                    reject(&mut errors, "problem.n", "the quadratic example has exactly 3 agents".into());
                }
                if cfg.problem.p != 1 {
                    reject(&mut errors, "problem.p", "the quadratic example is one-dimensional".into());
                }
                if !(cfg.problem.curvature > 0.0) {
                    reject(&mut errors, "problem.curvature", format!("must be positive, got {}", cfg.problem.curvature));
                }
            }
            ProblemKind::LeastSquares => {
                if cfg.problem.n == 0 {
                    reject(&mut errors, "problem.n", "agent count is required".into());
                }
                if cfg.problem.p == 0 {
                    reject(&mut errors, "problem.p", "variable dimension is required".into());
                }
                if cfg.problem.noise_sigma < 0.0 {
                    reject(&mut errors, "problem.noise_sigma", "must be nonnegative".into());
                }
            }
            ProblemKind::BasisPursuit => {
                if cfg.problem.n == 0 || cfg.problem.p == 0 || cfg.problem.q == 0 {
                    reject(&mut errors, "problem", "n, p, and q are all required".into());
                } else {
                    if cfg.problem.q % cfg.problem.n != 0 {
                        reject(&mut errors, "problem.q", format!("{} agents must evenly split {} columns", cfg.problem.n, cfg.problem.q));
                    }
                    if cfg.problem.sparsity == 0 || cfg.problem.sparsity > cfg.problem.p.min(cfg.problem.q) {
                        reject(&mut errors, "problem.sparsity", format!("must lie in 1..=min(p, q) = {}", cfg.problem.p.min(cfg.problem.q)));
                    }
                }
                if let Some(g) = cfg.problem.gamma {
                    if g < 0.0 {
                        reject(&mut errors, "problem.gamma", "must be positive (or omitted for automatic)".into());
                    }
                    if g == 0.0 {
                        cfg.problem.gamma = None;
                    }
                }
            }
        }

        match cfg.network.scheme {
            MixingScheme::SwapExample => {
                if cfg.problem.n != 3 {
                    reject(&mut errors, "network.scheme", "swap-example is a fixed 3-agent matrix".into());
                }
                match cfg.network.tau {
                    Some(tau) if tau > 0.0 && tau < 1.0 / 3.0 => {}
                    Some(tau) => reject(&mut errors, "network.tau", format!("must lie strictly inside (0, 1/3), got {tau}")),
                    None => reject(&mut errors, "network.tau", "required for the swap-example scheme".into()),
                }
            }
            _ => {
                if !(cfg.network.eta > 0.0 && cfg.network.eta <= 1.0) {
                    reject(&mut errors, "network.eta", format!("edge density must lie in (0, 1], got {}", cfg.network.eta));
                }
            }
        }

        if cfg.run.alphas.is_empty() && cfg.run.ceiling_fractions.is_empty() {
            reject(&mut errors, "run.alphas", "provide run.alphas or run.ceiling_fractions".into());
        }
        if !cfg.run.alphas.is_empty() && !cfg.run.ceiling_fractions.is_empty() {
            reject(&mut errors, "run.alphas", "run.alphas and run.ceiling_fractions are mutually exclusive".into());
        }
        if cfg.run.alphas.iter().chain(&cfg.run.ceiling_fractions).any(|a| !(a > &0.0)) {
            reject(&mut errors, "run.alphas", "stepsizes must be positive".into());
        }
        if cfg.run.stop_tol < 0.0 {
            reject(&mut errors, "run.stop_tol", "must be nonnegative".into());
        }
        if let Some(x0) = &cfg.run.x0 {
            let want = cfg.problem.n * cfg.problem.p;
            if x0.len() != want {
                reject(&mut errors, "run.x0", format!("stacked start needs n * p = {} entries, got {}", want, x0.len()));
            }
        }
        if !(cfg.output.oracle_tol > 0.0) {
            reject(&mut errors, "output.oracle_tol", "must be positive".into());
        }

        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_LS: &str = r#"
        [problem]
        kind = "least-squares"
        n = 10
        p = 3

        [network]
        eta = 0.5
        seed = 1

        [run]
        alphas = [0.05]
    "#;

    #[test]
    fn minimal_config_parses_and_validates() {
        let cfg = RunConfig::from_toml_str(MINIMAL_LS).unwrap();
        let cfg = cfg.validated().unwrap();
        assert_eq!(cfg.problem.kind, ProblemKind::LeastSquares);
        assert_eq!(cfg.run.max_iter, 10_000);
        assert_eq!(cfg.output.oracle_tol, 1e-10);
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_name() {
        let bad = MINIMAL_LS.replace("eta = 0.5", "eta = 0.5\nbogus_knob = 1");
        let err = RunConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("bogus_knob"));
    }

    #[test]
    fn validation_reports_each_bad_field() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [problem]
            kind = "basis-pursuit"
            n = 3
            p = 5
            q = 10
            sparsity = 9

            [network]
            eta = 1.5

            [run]
            alphas = []
            "#,
        )
        .unwrap();
        let err = cfg.validated().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("problem.q"), "{text}");
        assert!(text.contains("problem.sparsity"), "{text}");
        assert!(text.contains("network.eta"), "{text}");
        assert!(text.contains("run.alphas"), "{text}");
    }

    #[test]
    fn quadratic_example_dimensions_are_filled_and_pinned() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [problem]
            kind = "quadratic-example"

            [network]
            scheme = "swap-example"
            tau = 0.2

            [run]
            alphas = [0.5]
            x0 = [1.0, 0.0, 2.0]
            "#,
        )
        .unwrap()
        .validated()
        .unwrap();
        assert_eq!((cfg.problem.n, cfg.problem.p), (3, 1));
    }

    #[test]
    fn legacy_scheme_alias_is_accepted() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [problem]
            kind = "quadratic-example"

            [network]
            scheme = "paper-example"
            tau = 0.2

            [run]
            alphas = [0.5]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.network.scheme, MixingScheme::SwapExample);
    }

    #[test]
    fn x0_length_is_checked() {
        let bad = MINIMAL_LS.replace("alphas = [0.05]", "alphas = [0.05]\nx0 = [1.0, 2.0]");
        let err = RunConfig::from_toml_str(&bad).unwrap().validated().unwrap_err();
        assert!(err.to_string().contains("run.x0"));
    }
}
