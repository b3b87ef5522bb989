use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kmeans::{KMeansParams, DEFAULT_MAX_ITER, DEFAULT_RESTARTS, DEFAULT_TOL};
use crate::silhouette::{DEFAULT_K_MAX, DEFAULT_K_MIN};
use crate::sweep::{
    SweepGrid, SweepSettings, DEFAULT_ALPHAS, DEFAULT_MIN_CLUSTER_SIZE, DEFAULT_REPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Decide from the file header.
    #[default]
    Auto,
    Bids,
    Instances,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptkConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for OptkConfig {
    fn default() -> Self {
        OptkConfig {
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

impl OptkConfig {
    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            k: self.k_min,
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CureConfig {
    pub reps: Vec<usize>,
    pub alphas: Vec<f64>,
    pub sample_fraction: f64,
    /// Clusters at least this large count as populated when scoring the sweep.
    pub min_cluster_size: usize,
}

impl Default for CureConfig {
    fn default() -> Self {
        CureConfig {
            reps: DEFAULT_REPS.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            sample_fraction: 1.0,
            min_cluster_size: DEFAULT_MIN_CLUSTER_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierConfig {
    pub enabled: bool,
    pub min_size: usize,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            enabled: false,
            min_size: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub formats: Vec<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            formats: vec!["csv".into()],
        }
    }
}

/// Everything a pipeline run needs. Loaded from TOML; CLI flags override
/// individual fields.
///
/// ```toml
/// input = "bids.csv"
/// input_kind = "bids"
/// output_dir = "out"
/// seed = 42
///
/// [optk]
/// k_min = 2
/// k_max = 20
///
/// [cure]
/// reps = [5, 10]
/// alphas = [0.1, 0.05, 0.01, 0.001]
/// ```
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub input_kind: InputKind,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Duration assumed for instance rows that carry none.
    pub default_duration_days: Option<u32>,
    pub optk: OptkConfig,
    pub cure: CureConfig,
    pub outliers: OutlierConfig,
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required for reproducible runs".into()))
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory given".into()))
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            rp_values: self.cure.reps.clone(),
            alpha_values: self.cure.alphas.clone(),
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            min_cluster_size: self.cure.min_cluster_size,
            sample_fraction: self.cure.sample_fraction,
            outlier_elimination: self.outliers.enabled,
            outlier_min_size: self.outliers.min_size,
        }
    }

    /// Check the settings shared by every stage.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        let o = &self.optk;
        if o.k_min < 2 || o.k_max < o.k_min {
            return Err(Error::Config(format!(
                "k range {}..={} must satisfy 2 <= k_min <= k_max",
                o.k_min, o.k_max
            )));
        }
        if o.max_iter == 0 || o.restarts == 0 || o.tol.is_nan() || o.tol < 0.0 {
            return Err(Error::Config(
                "optk.max_iter and optk.restarts must be positive, optk.tol non-negative".into(),
            ));
        }
        self.grid()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.cure.sample_fraction > 0.0 && self.cure.sample_fraction <= 1.0) {
            return Err(Error::Config(
                "cure.sample_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.default_duration_days == Some(0) {
            return Err(Error::Config(
                "default_duration_days must be positive".into(),
            ));
        }
        if let Some(f) = self.report.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(Error::Config(format!("unsupported report format `{f}`")));
        }
        Ok(())
    }
}
