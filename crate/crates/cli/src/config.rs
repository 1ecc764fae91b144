//! TOML run configuration. Every key is optional; command-line flags win
//! over file values, which win over built-in defaults. Unknown keys are
//! rejected. See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, Result};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "RIGKIT_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: Option<OutputMode>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub tf: TfConfig,
    #[serde(default)]
    pub sync: SyncConfig,
    #[serde(default)]
    pub imu: ImuConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub calibration: Option<PathBuf>,
    pub cameras: Option<PathBuf>,
    pub sequence: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub est: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfConfig {
    pub root: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncConfig {
    pub window_ns: Option<i64>,
    pub threshold_ns: Option<i64>,
    pub robust: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImuConfig {
    pub rate_hz: Option<f64>,
    pub taus: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub max_dt_ns: Option<i64>,
    pub align: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub rate_tol: Option<f64>,
    pub gap_factor: Option<f64>,
    pub overlap: Option<f64>,
    pub rate_severity: Option<String>,
    pub gap_severity: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Json,
    #[default]
    Text,
    Csv,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// `flag`, else `file`, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Like [`pick`] for required values without a default.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| CliError::Input(format!("missing required value --{name} (flag or config)")))
}
