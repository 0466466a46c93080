//! `run`: execute a sweep and persist one CSV per cell plus a manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Cell, SweepConfig};
use crate::analysis::{run_ensemble, Realization};
use crate::disentangler::{LookupTable, SharedLookup};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_HEADER: &str = "p,n,q,strategy,seed,turn,s_tot,s_norm,wall_time_s";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub file: String,
    pub p: f64,
    pub n: usize,
    pub q: f64,
    pub strategy: String,
    pub status: CellStatus,
    pub rows: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub config: String,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch { found: m.manifest_version, expected: MANIFEST_VERSION });
        }
        Ok(Some(m))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn cell(&self, file: &str) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.file == file)
    }
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub computed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Renders one cell's rows, sorted by realization then sample.
pub fn cell_csv(cell: Cell, strategy: &str, realizations: &[Realization]) -> String {
    let mut s = String::with_capacity(64 * realizations.len() * 10);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in realizations.iter().filter(|r| r.error.is_none()) {
        for smp in &r.samples {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{:.6}",
                cell.p, cell.n, cell.q, strategy, r.seed, smp.turn, smp.s_tot, smp.s_norm, r.wall_time_s
            )
            .expect("writing to a string");
        }
    }
    s
}

fn load_lookup(path: Option<&Path>, cfg: &SweepConfig) -> Result<SharedLookup> {
    let mode = cfg.selection_mode()?;
    let fresh = || LookupTable::new(mode);
    let table = match path {
        Some(p) if p.exists() => match LookupTable::load(p) {
            Ok(t) if t.mode() == mode => t,
            Ok(_) => {
                log::warn!("lookup table {} was built for another selection mode; rebuilding", p.display());
                fresh()
            }
            Err(Error::VersionMismatch { found, expected }) => {
                log::warn!("lookup table {} has version {found} (expected {expected}); rebuilding", p.display());
                fresh()
            }
            Err(e) => return Err(e),
        },
        _ => fresh(),
    };
    Ok(table.into_shared())
}

/// Runs every cell of the sweep that is not already complete in `cfg.out`.
pub fn cmd_run(cfg: &SweepConfig, lookup: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let mut manifest = match Manifest::load(dir)? {
        Some(m) if m.config_hash != hash => {
            return Err(Error::Config(format!(
                "{} holds results of a different configuration (hash {})",
                dir.display(),
                m.config_hash
            )))
        }
        Some(m) => m,
        None => Manifest {
            manifest_version: MANIFEST_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash,
            base_seed: cfg.seed,
            config: cfg.to_toml(),
            cells: Vec::new(),
        },
    };
    let shared = load_lookup(lookup, cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let strategy = cfg.strategy_spec();
    let mut summary = RunSummary::default();

    for cell in cfg.cells() {
        let file = cell.file_name(cfg.strategy);
        let done = manifest.cell(&file).is_some_and(|c| c.status == CellStatus::Complete) && dir.join(&file).exists();
        if done {
            log::info!("skipping completed cell {file}");
            summary.skipped += 1;
            continue;
        }
        log::info!("running cell {file}");
        let env_cfg = cfg.env_config(cell);
        let spec = cfg.ensemble_spec(cell.n);
        let reals = pool.install(|| run_ensemble(&env_cfg, &strategy, &spec, Some(shared.clone())))?;
        let failures: Vec<&Realization> = reals.iter().filter(|r| r.error.is_some()).collect();
        let csv = cell_csv(cell, cfg.strategy.as_str(), &reals);
        write_atomic(&dir.join(&file), csv.as_bytes())?;
        let record = CellRecord {
            file: file.clone(),
            p: cell.p,
            n: cell.n,
            q: cell.q,
            strategy: cfg.strategy.to_string(),
            status: if failures.is_empty() { CellStatus::Complete } else { CellStatus::Failed },
            rows: reals.iter().filter(|r| r.error.is_none()).map(|r| r.samples.len()).sum(),
            seeds: reals.iter().map(|r| r.seed).collect(),
            error: failures.first().map(|r| {
                format!("{} of {} trajectories failed; first (seed {}): {}", failures.len(), reals.len(), r.seed,
                    r.error.as_deref().unwrap_or_default())
            }),
        };
        if failures.is_empty() {
            summary.computed += 1;
        } else {
            log::error!("cell {file}: {}", record.error.as_deref().unwrap_or_default());
            summary.failed += 1;
        }
        match manifest.cells.iter_mut().find(|c| c.file == file) {
            Some(slot) => *slot = record,
            None => manifest.cells.push(record),
        }
        manifest.save(dir)?;
    }
    manifest.save(dir)?;
    if let Some(path) = lookup {
        shared.read().save(path)?;
    }
    Ok(summary)
}
