//! Configuration files.
//!
//! A config is a TOML document whose keys mirror [`SimConfig`]. Every key is
//! optional; missing keys take these defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `N` | 2000 |
//! | `alpha` | 0.1 |
//! | `kappa` | 25 |
//! | `ell` | 3 |
//! | `rounds_R` | 10 |
//! | `phi` | `{ mode = "per_round_r", c = 1.0 }` |
//! | `fractal_min`, `fractal_max` | 5, 20 |
//! | `fee_percent` | 0.90 |
//! | `checkpoints` | 5 |
//! | `seed` | 0 |
//!
//! Unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use lor_core::config::ConfigError;
use lor_core::SimConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

impl LoadError {
    /// Offending key for validation failures.
    pub fn key(&self) -> Option<&'static str> {
        match self {
            LoadError::Invalid(e) => Some(e.key),
            _ => None,
        }
    }
}

/// 1-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<SimConfig, LoadError> {
    let cfg: SimConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| position(text, s.start));
        LoadError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}
