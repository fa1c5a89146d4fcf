//! Config-file overrides. Precedence is flags, then file, then defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_ENV: &str = "UGC_CONFIG";

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub angle_bin_deg: Option<f64>,
    pub poly_degree: Option<usize>,
    pub hyper: Option<String>,
    pub allow_extrapolation: Option<bool>,
    pub quiet: Option<bool>,
    pub json: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text)
            .map_err(|e| CliError::input(format!("config {}: {}", path.display(), e.message())))
    }

    /// Read `--config`, else `$UGC_CONFIG`, else nothing.
    pub fn load(flag: Option<&Path>) -> Result<Self, CliError> {
        let path: Option<PathBuf> = match flag {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, &path)
    }
}

/// Flag if given, else file value, else default.
pub fn layered<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
