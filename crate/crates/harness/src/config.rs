//! Experiment configuration: a TOML document, validated on load.

use std::fmt;
use std::path::{Path, PathBuf};

use mfcg_core::envs::{load_dense_model, DenseModelSpec, TwoStateParams};
use mfcg_core::{validate_exponents, MeanFieldModel, RateExponents};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ideal,
    Sync,
    Async,
    Exact,
    Check,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ideal => "ideal",
            Mode::Sync => "sync",
            Mode::Async => "async",
            Mode::Exact => "exact",
            Mode::Check => "check",
        }
    }

    /// Whether the mode draws random numbers, so that each seed is a separate run.
    pub fn is_seeded(self) -> bool {
        matches!(self, Mode::Sync | Mode::Async)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ideal" => Ok(Mode::Ideal),
            "sync" => Ok(Mode::Sync),
            "async" => Ok(Mode::Async),
            "exact" => Ok(Mode::Exact),
            "check" => Ok(Mode::Check),
            other => Err(format!(
                "unknown mode `{other}` (expected ideal, sync, async, exact or check)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoState(TwoStateParams),
    /// Path to a dense model file, relative to the config file's directory.
    Dense(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fixed_point: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fixed_point: 1e-10,
            max_iter: 100_000,
        }
    }
}

const DEFAULT_N_STEPS: u64 = 100_000;
/// Rows per trajectory when `trace_every` is not given.
const DEFAULT_ROWS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub mode: Mode,
    #[serde(default = "default_n_steps")]
    pub n_steps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub exponents: RateExponents,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory relative model paths resolve against; set when read from a file.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_n_steps() -> u64 {
    DEFAULT_N_STEPS
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    /// Rows are written every this many updates.
    pub fn effective_trace_every(&self) -> u64 {
        self.trace_every
            .unwrap_or((self.n_steps / DEFAULT_ROWS).max(1))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, message: String| {
            Err(HarnessError::Config {
                path: field.to_string(),
                message,
            })
        };
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "must list at least one seed".into());
        }
        if self.trace_every == Some(0) {
            return bad("trace_every", "must be at least 1".into());
        }
        let report = validate_exponents(&self.exponents);
        if !report.valid {
            let field = if report.ordering_ok {
                "exponents"
            } else {
                ordering_field(&self.exponents)
            };
            return bad(
                field,
                format!(
                    "{}; need 1/2 < omega_mu_tilde < omega_q < omega_mu < 1",
                    report.diagnostics.join("; ")
                ),
            );
        }
        let tol = self.tolerances.fixed_point;
        if !(tol > 0.0 && tol.is_finite()) {
            return bad(
                "tolerances.fixed_point",
                format!("must be positive, got {tol}"),
            );
        }
        if self.tolerances.max_iter == 0 {
            return bad("tolerances.max_iter", "must be at least 1".into());
        }
        if let ModelConfig::TwoState(p) = &self.model {
            p.validate().map_err(|e| HarnessError::Config {
                path: "model.two_state".into(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Resolve and build the configured model.
    pub fn load_model(&self) -> Result<LoadedModel, HarnessError> {
        match &self.model {
            ModelConfig::TwoState(p) => Ok(LoadedModel::TwoState(
                mfcg_core::envs::build_two_state(*p).map_err(|e| HarnessError::Config {
                    path: "model.two_state".into(),
                    message: e.to_string(),
                })?,
            )),
            ModelConfig::Dense(rel) => {
                let path = match &self.base_dir {
                    Some(dir) if rel.is_relative() => dir.join(rel),
                    _ => rel.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let spec: DenseModelSpec = from_toml(&text, &format!("{}", path.display()))?;
                let model = load_dense_model(&spec).map_err(|e| HarnessError::Config {
                    path: format!("{}", path.display()),
                    message: e.to_string(),
                })?;
                Ok(LoadedModel::Dense(Box::new(model)))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }
}

/// The field an exponent-ordering violation should be reported against.
fn ordering_field(e: &RateExponents) -> &'static str {
    if !(e.omega_mu_tilde < e.omega_q) {
        "exponents.omega_q"
    } else {
        "exponents.omega_mu"
    }
}

/// A built model, with the two-state parameters kept for the closed-form oracle.
pub enum LoadedModel {
    TwoState(mfcg_core::envs::TwoStateModel),
    Dense(Box<mfcg_core::envs::AffineModel>),
}

impl LoadedModel {
    pub fn as_model(&self) -> &dyn MeanFieldModel {
        match self {
            LoadedModel::TwoState(m) => m,
            LoadedModel::Dense(m) => m.as_ref(),
        }
    }

    pub fn two_state_params(&self) -> Option<TwoStateParams> {
        match self {
            LoadedModel::TwoState(m) => Some(m.params()),
            LoadedModel::Dense(_) => None,
        }
    }
}

fn from_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, HarnessError> {
    let de = toml::Deserializer::parse(text).map_err(|e| HarnessError::Config {
        path: origin.to_string(),
        message: e.message().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let parent = e.path().to_string();
        let message = e.into_inner().message().to_string();
        // A missing field is reported at its own path rather than its parent's.
        let missing = message
            .strip_prefix("missing field `")
            .and_then(|r| r.split('`').next());
        let path = match (parent.as_str(), missing) {
            (".", Some(field)) => field.to_string(),
            (".", None) => origin.to_string(),
            (p, Some(field)) => format!("{p}.{field}"),
            (p, None) => p.to_string(),
        };
        HarnessError::Config { path, message }
    })
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let cfg: ExperimentConfig = from_toml(text, "<config>")?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, parse and validate a config file. Relative model paths resolve
/// against the file's directory.
pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    Ok(cfg)
}
