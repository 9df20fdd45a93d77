//! Run configuration resolved from three layers: built-in defaults, an
//! optional flat TOML file, then command-line flags. The resolved value is
//! echoed into every output artifact so a run can be repeated from the
//! artifact alone.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Sweep displacement list bracketing the optimum and the homodyne
/// crossover; overridable with repeated `--beta` flags.
pub const DEFAULT_SWEEP_BETAS: [f64; 5] = [-1.0, -0.85, -0.71, -0.55, -0.40];
/// Displacement for single-run commands when no `--beta` is given.
pub const DEFAULT_SINGLE_BETA: f64 = -0.70;
pub const DEFAULT_SHOTS: u64 = 50_000;
pub const DEFAULT_REPS: u32 = 5;
pub const DEFAULT_DIM: usize = 4;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_GRID_POINTS: usize = 201;
pub const DEFAULT_GRID_MIN: f64 = -1.5;
pub const DEFAULT_GRID_MAX: f64 = 0.0;
pub const DEFAULT_OUT_DIR: &str = "out";

/// Flat key/value configuration file mirroring the flags. Unknown keys
/// are rejected so typos surface instead of silently using defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub betas: Option<Vec<f64>>,
    pub shots: Option<u64>,
    pub reps: Option<u32>,
    pub dim: Option<usize>,
    pub visibility: Option<f64>,
    pub dark_prob: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid_points: Option<usize>,
    pub grid_min: Option<f64>,
    pub grid_max: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }
}

/// Values taken from command-line flags; unset entries fall through to
/// the file value and then the default.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub betas: Vec<f64>,
    pub shots: Option<u64>,
    pub reps: Option<u32>,
    pub dim: Option<usize>,
    pub visibility: Option<f64>,
    pub dark_prob: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// The fully resolved configuration.
///
/// `beta` is the displacement used by the single-run commands (theory's
/// imperfection model, simulate, and the evaluation reference); `betas`
/// is the sweep list. Both come from the same `--beta` flags when given;
/// `beta_explicit` records whether they were, which is what lets
/// `evaluate` prefer the beta stored in an artifact over the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub beta: f64,
    pub betas: Vec<f64>,
    pub beta_explicit: bool,
    pub shots: u64,
    pub reps: u32,
    pub dim: usize,
    pub visibility: f64,
    pub dark_prob: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_max: f64,
}

impl EffectiveConfig {
    pub fn resolve(file: Option<FileConfig>, flags: Overrides) -> Result<Self> {
        let file = file.unwrap_or_default();
        let explicit_betas = if !flags.betas.is_empty() {
            Some(flags.betas.clone())
        } else {
            file.betas.clone()
        };
        let (beta, betas, beta_explicit) = match explicit_betas {
            // an empty explicit list stays empty here so validate() rejects it
            Some(list) => (list.first().copied().unwrap_or(DEFAULT_SINGLE_BETA), list, true),
            None => (DEFAULT_SINGLE_BETA, DEFAULT_SWEEP_BETAS.to_vec(), false),
        };

        let cfg = Self {
            beta,
            betas,
            beta_explicit,
            shots: flags.shots.or(file.shots).unwrap_or(DEFAULT_SHOTS),
            reps: flags.reps.or(file.reps).unwrap_or(DEFAULT_REPS),
            dim: flags.dim.or(file.dim).unwrap_or(DEFAULT_DIM),
            visibility: flags.visibility.or(file.visibility).unwrap_or(1.0),
            dark_prob: flags.dark_prob.or(file.dark_prob).unwrap_or(0.0),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            grid_points: file.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            grid_min: file.grid_min.unwrap_or(DEFAULT_GRID_MIN),
            grid_max: file.grid_max.unwrap_or(DEFAULT_GRID_MAX),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            bail!("the displacement list must not be empty");
        }
        for &b in &self.betas {
            if !b.is_finite() {
                bail!("displacement {b} is not finite");
            }
        }
        if self.shots == 0 {
            bail!("shots must be at least 1");
        }
        if self.reps == 0 {
            bail!("reps must be at least 1");
        }
        if self.dim < 2 {
            bail!("dim must be at least 2, got {}", self.dim);
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            bail!("visibility must lie in [0, 1], got {}", self.visibility);
        }
        if !(0.0..1.0).contains(&self.dark_prob) {
            bail!("dark_prob must lie in [0, 1), got {}", self.dark_prob);
        }
        if self.grid_points < 2 {
            bail!("grid_points must be at least 2, got {}", self.grid_points);
        }
        if !(self.grid_min.is_finite() && self.grid_max.is_finite())
            || self.grid_min >= self.grid_max
        {
            bail!("grid range [{}, {}] is not ordered", self.grid_min, self.grid_max);
        }
        Ok(())
    }

    /// TOML echo of the effective configuration, embedded in artifacts.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The echo split into lines for `#`-commented CSV headers.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec!["effective configuration:".to_string()];
        lines.extend(self.to_toml().lines().map(str::to_string));
        lines
    }
}
