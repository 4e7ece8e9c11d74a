//! Pipeline configuration read from a TOML file.
//!
//! Command-line flags override values from the file, and the file overrides
//! the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Task;
use crate::gmm::CovarianceKind;
use crate::mlp::{Activation, MlpConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    /// Held-out file; when absent the training file is split.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Input for `predict`.
    #[serde(default)]
    pub predict: Option<PathBuf>,
    pub target: String,
    pub task: Task,
    /// Columns to dummy-encode even if they look numeric.
    #[serde(default)]
    pub nominal: Vec<String>,
    #[serde(default = "defaults::test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "defaults::yes")]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSection {
    pub widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub activation: Activation,
}

impl Default for MlpSection {
    fn default() -> Self {
        let d = MlpConfig::default();
        MlpSection {
            widths: d.widths,
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            activation: d.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    /// Clusters per hidden layer, shared by all layers.
    pub k: usize,
    /// Covariance structure of the hidden-layer mixtures.
    pub cov_kind: CovarianceKind,
    /// Simulated points per cell.
    pub m: usize,
    pub epsilon: f64,
    pub perturb_dummies: bool,
    pub em_max_iter: usize,
    pub em_tol: f64,
    /// EM starts per layer; the one with the best final objective is kept.
    pub em_restarts: usize,
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection {
            k: 2,
            cov_kind: CovarianceKind::Full,
            m: 100,
            epsilon: 0.1,
            perturb_dummies: true,
            em_max_iter: 100,
            em_tol: 1e-6,
            em_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureSection {
    /// Number of EPICs.
    pub j: usize,
    /// Penalty of the local fits; 0 for regression and 0.01 for
    /// classification when absent.
    pub lasso_alpha: Option<f64>,
    /// Covariance structure of the EPIC densities.
    pub cov_kind: CovarianceKind,
}

impl Default for MixtureSection {
    fn default() -> Self {
        MixtureSection {
            j: 2,
            lasso_alpha: None,
            cov_kind: CovarianceKind::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpretSection {
    pub xi: f64,
    pub psi: f64,
    pub eta: usize,
    pub confidence: f64,
}

impl Default for InterpretSection {
    fn default() -> Self {
        InterpretSection {
            xi: 0.8,
            psi: 0.9,
            eta: 5,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub grid: Vec<usize>,
    pub folds: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            grid: vec![1, 2, 3, 4],
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub mlp: MlpSection,
    #[serde(default)]
    pub cells: CellSection,
    #[serde(default)]
    pub mixture: MixtureSection,
    #[serde(default)]
    pub interpret: InterpretSection,
    #[serde(default)]
    pub cv: CvSection,
}

mod defaults {
    use std::path::PathBuf;

    pub fn test_fraction() -> f64 {
        0.2
    }

    pub fn yes() -> bool {
        true
    }

    pub fn out_dir() -> PathBuf {
        PathBuf::from("mlm-out")
    }
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

fn in_unit_open(key: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} is outside (0, 1)")))
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        fix(&mut self.out_dir);
        if let Some(p) = self.data.test.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.predict.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.target.is_empty() {
            return Err(invalid("data.target", "empty column name"));
        }
        if d.test.is_none() {
            in_unit_open("data.test_fraction", d.test_fraction)?;
        }
        self.mlp_config()
            .validate()
            .map_err(|e| invalid("mlp", e.to_string()))?;
        let c = &self.cells;
        if c.k == 0 {
            return Err(invalid("cells.k", "must be at least 1"));
        }
        if !(c.epsilon.is_finite() && c.epsilon >= 0.0) {
            return Err(invalid(
                "cells.epsilon",
                format!("{} must be finite and non-negative", c.epsilon),
            ));
        }
        if c.em_max_iter == 0 {
            return Err(invalid("cells.em_max_iter", "must be at least 1"));
        }
        if !(c.em_tol.is_finite() && c.em_tol > 0.0) {
            return Err(invalid(
                "cells.em_tol",
                format!("{} must be positive", c.em_tol),
            ));
        }
        if c.em_restarts == 0 {
            return Err(invalid("cells.em_restarts", "must be at least 1"));
        }
        if self.mixture.j == 0 {
            return Err(invalid("mixture.j", "must be at least 1"));
        }
        if let Some(a) = self.mixture.lasso_alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(invalid(
                    "mixture.lasso_alpha",
                    format!("{a} must be finite and non-negative"),
                ));
            }
        }
        let i = &self.interpret;
        in_unit_open("interpret.xi", i.xi)?;
        if !(i.psi > 0.0 && i.psi <= 1.0) {
            return Err(invalid(
                "interpret.psi",
                format!("{} is outside (0, 1]", i.psi),
            ));
        }
        in_unit_open("interpret.confidence", i.confidence)?;
        if self.cv.grid.is_empty() {
            return Err(invalid("cv.grid", "must list at least one K"));
        }
        if self.cv.grid.contains(&0) {
            return Err(invalid("cv.grid", "K must be at least 1"));
        }
        if self.cv.folds < 2 {
            return Err(invalid("cv.folds", "need at least 2 folds"));
        }
        Ok(())
    }

    pub fn mlp_config(&self) -> MlpConfig {
        MlpConfig {
            widths: self.mlp.widths.clone(),
            epochs: self.mlp.epochs,
            batch_size: self.mlp.batch_size,
            learning_rate: self.mlp.learning_rate,
            activation: self.mlp.activation,
            seed: self.seed,
        }
    }

    pub fn lasso_alpha(&self) -> f64 {
        self.mixture.lasso_alpha.unwrap_or(match self.data.task {
            Task::Regression => 0.0,
            Task::BinaryClassification => 0.01,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [data]
        train = "train.csv"
        target = "y"
        task = "regression"
    "#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.cells.m, 100);
        assert_eq!(cfg.cells.epsilon, 0.1);
        assert_eq!(cfg.mixture.j, 2);
        assert_eq!(cfg.lasso_alpha(), 0.0);
        assert!(cfg.data.standardize);
        assert_eq!(cfg.mlp_config().widths, vec![16, 16]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[cells]\nkk = 3\n");
        assert!(matches!(
            PipelineConfig::from_toml(&text),
            Err(ConfigError::Parse(_))
        ));
        let text = format!("bogus = 1\n{MINIMAL}");
        assert!(matches!(
            PipelineConfig::from_toml(&text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn ranges_validated() {
        for (section, bad) in [
            ("cells", "k = 0"),
            ("cells", "epsilon = -0.1"),
            ("mixture", "j = 0"),
            ("interpret", "psi = 1.5"),
            ("interpret", "xi = 1.0"),
            ("cv", "folds = 1"),
            ("mlp", "widths = []"),
        ] {
            let text = format!("{MINIMAL}\n[{section}]\n{bad}\n");
            assert!(
                matches!(
                    PipelineConfig::from_toml(&text),
                    Err(ConfigError::Invalid { .. })
                ),
                "{section}.{bad} accepted"
            );
        }
    }

    #[test]
    fn classification_alpha_default() {
        let text = MINIMAL.replace("regression", "classification");
        let cfg = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.data.task, Task::BinaryClassification);
        assert_eq!(cfg.lasso_alpha(), 0.01);
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.data.train, dir.path().join("train.csv"));
        assert_eq!(cfg.out_dir, dir.path().join("mlm-out"));
    }
}
