//! Sweep configuration files (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//! strategy = "greedy"        # random | greedy | pyramid | external
//! seed = 7
//! workers = 4
//! out = "results"
//! n_bottlenecks = 3          # pyramid only
//! policy_cmd = "python policy.py"   # external only
//! selection = "identity"     # identity | special_case
//! init_depth = 0             # random gates applied before the first turn
//!
//! [grid]
//! p = [0.1, 0.2]
//! n = [16, 32]
//! q = [1.0]
//!
//! [ensemble]
//! realizations = 2000
//! samples = 10
//! spacing = 160              # default 10 N
//! transient = 820            # default depends on strategy and N
//!
//! [policy]
//! timeout_ms = 1000
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{transient_turns_default, EnsembleSpec, StrategySpec};
use crate::disentangler::SelectionMode;
use crate::env::{EnvConfig, InitMode};
use crate::error::{Error, Result};
use crate::strategy::{PyramidConfig, StrategyKind};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub p: Vec<f64>,
    pub n: Vec<usize>,
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
}

fn default_q() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<u64>,
}

fn default_realizations() -> usize {
    2000
}

fn default_samples() -> usize {
    10
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { realizations: default_realizations(), samples: default_samples(), spacing: None, transient: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    1000
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection { timeout_ms: default_timeout_ms() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub strategy: StrategyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_bottlenecks")]
    pub n_bottlenecks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_cmd: Option<String>,
    #[serde(default = "default_selection")]
    pub selection: String,
    #[serde(default)]
    pub init_depth: usize,
    pub grid: Grid,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub policy: PolicySection,
}

fn default_workers() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_bottlenecks() -> usize {
    1
}

fn default_selection() -> String {
    "identity".into()
}

/// One `(p, N, q)` point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub p: f64,
    pub n: usize,
    pub q: f64,
}

impl Cell {
    pub fn file_name(&self, strategy: StrategyKind) -> String {
        format!("cell_{strategy}_n{}_p{:.4}_q{:.4}.csv", self.n, self.p, self.q)
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        match raw.get("version").and_then(|v| v.as_integer()) {
            Some(v) if v == CONFIG_VERSION as i64 => {}
            Some(v) => return Err(Error::VersionMismatch { found: v as u32, expected: CONFIG_VERSION }),
            None => return Err(Error::Config("config lacks `version = 1`".into())),
        }
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.p.is_empty() || g.n.is_empty() || g.q.is_empty() {
            return Err(Error::Config("grids over p, n and q must be nonempty".into()));
        }
        if let Some(p) = g.p.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Config(format!("p = {p} outside (0, 1]")));
        }
        if let Some(q) = g.q.iter().find(|&&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::Config(format!("q = {q} outside [0, 1]")));
        }
        if let Some(n) = g.n.iter().find(|&&n| n < 4 || n % 2 == 1) {
            return Err(Error::Config(format!("N = {n} must be even and at least 4")));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if self.ensemble.realizations == 0 || self.ensemble.samples == 0 || self.ensemble.spacing == Some(0) {
            return Err(Error::Config("ensemble sizes and spacing must be positive".into()));
        }
        self.selection_mode()?;
        match self.strategy {
            StrategyKind::Pyramid => {
                for &n in &g.n {
                    PyramidConfig::new(n, self.n_bottlenecks)?;
                }
            }
            StrategyKind::External if self.policy_cmd.is_none() => {
                return Err(Error::Config("external strategy needs `policy_cmd` or --policy-cmd".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn selection_mode(&self) -> Result<SelectionMode> {
        self.selection.parse().map_err(|_| Error::Config(format!("unknown selection mode {:?}", self.selection)))
    }

    /// Cells in grid order: `n` outermost, then `p`, then `q`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.grid.n {
            for &p in &self.grid.p {
                for &q in &self.grid.q {
                    out.push(Cell { p, n, q });
                }
            }
        }
        out
    }

    pub fn strategy_spec(&self) -> StrategySpec {
        StrategySpec {
            kind: self.strategy,
            n_bottlenecks: self.n_bottlenecks,
            policy_cmd: self.policy_cmd.clone(),
            timeout: Duration::from_millis(self.policy.timeout_ms),
            selection: self.selection_mode().unwrap_or_default(),
        }
    }

    pub fn ensemble_spec(&self, n: usize) -> EnsembleSpec {
        EnsembleSpec {
            n_realizations: self.ensemble.realizations,
            samples_per_realization: self.ensemble.samples,
            sample_spacing: self.ensemble.spacing.unwrap_or(10 * n as u64),
            transient_turns: self.ensemble.transient.unwrap_or_else(|| transient_turns_default(self.strategy, n)),
        }
    }

    pub fn env_config(&self, cell: Cell) -> EnvConfig {
        let init = match self.init_depth {
            0 => InitMode::Product,
            depth => InitMode::Random { depth },
        };
        EnvConfig::new(cell.n, cell.p).with_q(cell.q).with_seed(self.seed).with_init(init)
    }

    /// SHA-256 over every setting that affects results. Worker count and
    /// output location are excluded.
    pub fn hash(&self) -> String {
        let canonical = SweepConfig { workers: 1, out: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
