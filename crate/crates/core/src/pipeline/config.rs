use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::correlation::Method;
use crate::error::{Error, Result};
use crate::panel::CalendarPolicy;
use crate::synthetic::SyntheticSpec;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MARKETLAG_OUT_DIR";

/// Full pipeline configuration, read from a TOML file.
///
/// ```toml
/// output_dir = "out"
///
/// [input]
/// path = "prices.csv"
///
/// [correlation]
/// method = "spearman"
/// max_lag = 1
///
/// [[splits]]
/// name = "2003-2007"
/// end = "2007-12-31"
///
/// [seeds]
/// master = 7
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Falls back to `MARKETLAG_OUT_DIR`, then `marketlag-out`.
    pub output_dir: Option<PathBuf>,
    pub input: InputConfig,
    pub calendar: CalendarPolicy,
    pub returns: ReturnsConfig,
    pub correlation: CorrelationConfig,
    pub splits: Vec<SplitConfig>,
    pub null: NullConfig,
    pub modes: ModesConfig,
    pub network: NetworkConfig,
    pub seeds: SeedConfig,
    pub stages: StageToggles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// Price table in long or wide layout.
    pub path: Option<PathBuf>,
    /// Generate a synthetic panel instead of reading one.
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ReturnsConfig {
    /// Average daily returns within ISO weeks.
    pub weekly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationConfig {
    pub method: Method,
    pub max_lag: usize,
    /// Reference series for lag profiles; the first series when unset.
    pub benchmark: Option<String>,
    pub lag_range: (i64, i64),
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self { method: Method::Pearson, max_lag: 1, benchmark: None, lag_range: (-5, 5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub name: String,
    #[serde(default)]
    pub start: Option<NaiveDate>,
    #[serde(default)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullConfig {
    pub sims: usize,
    pub histogram_bins: usize,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self { sims: 100, histogram_bins: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub remove: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { remove: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkMatrix {
    Plain,
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Which correlation matrix the distances come from.
    pub matrix: NetworkMatrix,
    pub thresholds: Vec<f64>,
    pub noise_sims: usize,
    pub embedding_dim: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { matrix: NetworkMatrix::Lagged, thresholds: vec![0.5, 1.0], noise_sims: 100, embedding_dim: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SeedConfig {
    pub master: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageToggles {
    pub correlate: bool,
    pub lag_profiles: bool,
    pub spectrum: bool,
    pub null: bool,
    pub modes: bool,
    pub distance: bool,
    pub noise_threshold: bool,
    pub graph: bool,
    pub centrality: bool,
    pub embed: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        Self {
            correlate: true,
            lag_profiles: true,
            spectrum: true,
            null: true,
            modes: true,
            distance: true,
            noise_threshold: true,
            graph: true,
            centrality: true,
            embed: true,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative input path resolves against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(input), Some(dir)) = (cfg.input.path.as_mut(), path.parent()) {
            if input.is_relative() {
                *input = dir.join(&*input);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("marketlag-out"))
    }

    pub fn effective_splits(&self) -> Vec<SplitConfig> {
        if self.splits.is_empty() {
            vec![SplitConfig { name: "full".into(), start: None, end: None }]
        } else {
            self.splits.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        match (&self.input.path, &self.input.synthetic) {
            (None, None) => return err("input needs either `path` or `synthetic`".into()),
            (Some(_), Some(_)) => return err("input `path` and `synthetic` are mutually exclusive".into()),
            (None, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.network.thresholds.iter().any(|t| !(*t > 0.0)) {
            return err("asset-graph thresholds must be positive".into());
        }
        if self.network.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return err("asset-graph thresholds must be strictly ascending".into());
        }
        let stochastic = self.stages.null || self.stages.noise_threshold || self.stages.embed;
        if stochastic && self.seeds.master.is_none() {
            return err("seeds.master is required when null, noise_threshold or embed is enabled".into());
        }
        if self.stages.null && self.null.sims == 0 {
            return err("null.sims must be at least 1".into());
        }
        if self.stages.noise_threshold && self.network.noise_sims == 0 {
            return err("network.noise_sims must be at least 1".into());
        }
        if self.returns.weekly && self.correlation.max_lag > 0 {
            return err("lag augmentation works on daily returns; set max_lag = 0 for weekly runs".into());
        }
        if self.network.embedding_dim == 0 {
            return err("network.embedding_dim must be at least 1".into());
        }
        let splits = self.effective_splits();
        let mut names: Vec<&str> = splits.iter().map(|s| s.name.as_str()).collect();
        for s in &splits {
            if s.name.is_empty() || s.name.contains(['/', '\\']) || s.name.starts_with('.') {
                return err(format!("split name {:?} is not a valid directory name", s.name));
            }
        }
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return err("split names must be unique".into());
        }
        Ok(())
    }
}
