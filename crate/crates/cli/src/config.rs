//! Experiment configuration: a single JSON file, checked before any compute.

use std::fmt;
use std::path::{Path, PathBuf};

use oscidrift::hamiltonian::HamiltonianModel;
use oscidrift::noise::{Lambda, SpectralDensity};
use serde::{Deserialize, Serialize};

/// Smallest ε accepted without `--expensive`.
pub const CHEAP_EPS_MIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoiseCheck,
    QuadraticDemo,
    LimitCoeffs,
    ConvergenceStudy,
    FbmCheck,
    ExitProb,
    WIntegrals,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::NoiseCheck => "noise-check",
            Self::QuadraticDemo => "quadratic-demo",
            Self::LimitCoeffs => "limit-coeffs",
            Self::ConvergenceStudy => "convergence-study",
            Self::FbmCheck => "fbm-check",
            Self::ExitProb => "exit-prob",
            Self::WIntegrals => "w-integrals",
        }
    }
}

/// `λ(p)`: a number for a constant weight, a list for coefficients in `p²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaConfig {
    Const(f64),
    PolyP2(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub r_s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub lambda: LambdaConfig,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            r_s: 1.0,
            alpha: 0.25,
            beta: 0.5,
            mu: 1.0,
            lambda: LambdaConfig::Const(1.0),
        }
    }
}

impl DensityConfig {
    pub fn build(&self) -> oscidrift::Result<SpectralDensity> {
        let lambda = match &self.lambda {
            LambdaConfig::Const(v) => Lambda::Const(*v),
            LambdaConfig::PolyP2(c) => Lambda::PolyP2(c.clone()),
        };
        SpectralDensity::new(self.r_s, self.alpha, self.beta, self.mu, lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    #[default]
    Quadratic,
    QuarticWell { c4: f64 },
}

impl HamiltonianConfig {
    pub fn model(self) -> HamiltonianModel {
        match self {
            Self::Quadratic => HamiltonianModel::Quadratic,
            Self::QuarticWell { c4 } => HamiltonianModel::QuarticWell { c4 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub x: f64,
    pub y: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self { x: 0.0, y: 1.0 }
    }
}

/// Exit interval for `exit-prob`, in action units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitConfig {
    pub lower: f64,
    pub upper: f64,
    pub i0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Slow-time horizon.
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default)]
    pub dt_fast: Option<f64>,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub exit: Option<ExitConfig>,
    /// Directory for cached action-angle charts; no caching when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}

fn default_horizon() -> f64 {
    1.0
}

fn default_paths() -> usize {
    2000
}

fn default_modes() -> usize {
    64
}

/// A rejected configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("", format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| ConfigError::new("", "config is not valid UTF-8"))?;
        Ok((Self::from_json(text)?, bytes))
    }

    /// Semantic checks that the schema alone cannot express.
    pub fn validate(&self, expensive: bool) -> Result<(), ConfigError> {
        self.density
            .build()
            .map_err(|e| ConfigError::new("density", e.to_string()))?;
        if !(2..=4096).contains(&self.n_modes) || self.n_modes % 2 != 0 {
            return Err(ConfigError::new(
                "n_modes",
                format!("must be even and in [2, 4096], got {}", self.n_modes),
            ));
        }
        let model = self.hamiltonian.model();
        model
            .validate()
            .map_err(|e| ConfigError::new("hamiltonian", e.to_string()))?;
        if self.eps.is_empty() {
            return Err(ConfigError::new("eps", "needs at least one value"));
        }
        for (k, &e) in self.eps.iter().enumerate() {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError::new(format!("eps[{k}]"), format!("must lie in (0, 1), got {e}")));
            }
            if e < CHEAP_EPS_MIN && !expensive {
                return Err(ConfigError::new(
                    format!("eps[{k}]"),
                    format!("{e} is below {CHEAP_EPS_MIN}; cost grows like eps^-2, pass --expensive to allow it"),
                ));
            }
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(ConfigError::new("eps", "values must be strictly decreasing"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError::new("T", format!("must be positive, got {}", self.horizon)));
        }
        if self.n_paths < 20 {
            return Err(ConfigError::new(
                "n_paths",
                format!("must be at least 20, got {}", self.n_paths),
            ));
        }
        if let Some(dt) = self.dt_fast {
            let max = 0.1 * model.small_amplitude_period().min(1.0);
            if !(dt > 0.0 && dt <= max) {
                return Err(ConfigError::new("dt_fast", format!("must lie in (0, {max}], got {dt}")));
            }
        }
        let ic = self.initial;
        if !(ic.x.is_finite() && ic.y.is_finite()) || model.energy(ic.x, ic.y) <= 0.0 {
            return Err(ConfigError::new(
                "initial",
                "must be a finite point other than the equilibrium",
            ));
        }
        match (self.experiment, self.exit) {
            (ExperimentKind::ExitProb, None) => {
                return Err(ConfigError::new("exit", "required for exit-prob"));
            }
            (ExperimentKind::ExitProb, Some(x)) => {
                if !(0.0 < x.lower && x.lower < x.i0 && x.i0 < x.upper && x.upper.is_finite()) {
                    return Err(ConfigError::new(
                        "exit",
                        format!("need 0 < lower < i0 < upper, got {}, {}, {}", x.lower, x.i0, x.upper),
                    ));
                }
            }
            (_, Some(_)) => {
                return Err(ConfigError::new("exit", "only valid for exit-prob"));
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::QuadraticDemo && !model.is_quadratic() {
            return Err(ConfigError::new("hamiltonian", "quadratic-demo needs {\"kind\":\"quadratic\"}"));
        }
        if self.experiment == ExperimentKind::FbmCheck {
            let g = self.density.build().map_err(|e| ConfigError::new("density", e.to_string()))?;
            let gamma = g.gamma_exponent().gamma;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(ConfigError::new(
                    "density",
                    format!("fbm-check needs gamma in (0, 1], got {gamma}"),
                ));
            }
        }
        Ok(())
    }

    pub fn dt_fast(&self) -> f64 {
        self.dt_fast.unwrap_or(oscidrift::oscillator::DEFAULT_DT_FAST)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(kind: &str) -> String {
        format!(r#"{{"experiment":"{kind}","seed":1,"output_dir":"out"}}"#)
    }

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(&minimal("noise-check")).unwrap();
        assert_eq!(c.density, DensityConfig::default());
        assert_eq!(c.hamiltonian, HamiltonianConfig::Quadratic);
        assert_eq!(c.eps, vec![0.2, 0.1, 0.05]);
        assert_eq!(c.n_modes, 64);
        assert!(c.validate(false).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_json(r#"{"experiment":"noise-check","seed":1,"output_dir":"o","epsilon":[0.1]}"#)
            .unwrap_err();
        assert!(e.message.contains("unknown field `epsilon`"), "{e}");
        let e = ExperimentConfig::from_json(
            r#"{"experiment":"noise-check","seed":1,"output_dir":"o","hamiltonian":{"kind":"quartic_well","c4":1,"c6":2}}"#,
        )
        .unwrap_err();
        assert!(e.message.contains("c6"), "{e}");
        let e = ExperimentConfig::from_json(
            r#"{"experiment":"noise-check","seed":1,"output_dir":"o","density":{"r_s":1,"alpha":0.25,"beta":0.5,"mu":1,"lambda":1,"nu":0}}"#,
        )
        .unwrap_err();
        assert!(e.message.contains("nu"), "{e}");
    }

    #[test]
    fn field_level_messages() {
        let mut c = ExperimentConfig::from_json(&minimal("fbm-check")).unwrap();
        c.eps = vec![0.1, 0.02];
        let e = c.validate(false).unwrap_err();
        assert_eq!(e.field, "eps[1]");
        assert!(c.validate(true).is_ok());
        c.eps = vec![0.1, 0.2];
        assert_eq!(c.validate(true).unwrap_err().field, "eps");
        c.eps = vec![0.1];
        c.density.beta = 0.2;
        assert_eq!(c.validate(false).unwrap_err().field, "density");
        let mut c = ExperimentConfig::from_json(&minimal("exit-prob")).unwrap();
        assert_eq!(c.validate(false).unwrap_err().field, "exit");
        c.exit = Some(ExitConfig { lower: 0.25, upper: 4.0, i0: 5.0 });
        assert_eq!(c.validate(false).unwrap_err().field, "exit");
        let mut c = ExperimentConfig::from_json(&minimal("quadratic-demo")).unwrap();
        c.hamiltonian = HamiltonianConfig::QuarticWell { c4: 0.25 };
        assert_eq!(c.validate(false).unwrap_err().field, "hamiltonian");
        c.hamiltonian = HamiltonianConfig::Quadratic;
        c.initial = InitialCondition { x: 0.0, y: 0.0 };
        assert_eq!(c.validate(false).unwrap_err().field, "initial");
    }

    #[test]
    fn lambda_accepts_numbers_and_lists() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment":"noise-check","seed":1,"output_dir":"o","density":{"r_s":1,"alpha":0.25,"beta":0.5,"mu":1,"lambda":[1,0.5]}}"#,
        )
        .unwrap();
        assert_eq!(c.density.lambda, LambdaConfig::PolyP2(vec![1.0, 0.5]));
        assert!(c.validate(false).is_ok());
    }
}
