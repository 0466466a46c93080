//! `analyze`: summarize the cells of a finished run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::{write_atomic, CellStatus, Manifest, CSV_HEADER};
use crate::analysis::{binder_cumulant, bottleneck_model};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "p,n,q,strategy,n_samples,mean,stderr,binder,bottleneck_model";
pub const PLOT_DIR: &str = "plot";

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub p: f64,
    pub n: usize,
    pub q: f64,
    pub strategy: String,
    pub n_samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub binder: Option<f64>,
    pub bottleneck_model: Option<f64>,
}

/// `(seed, s_norm)` pairs of a cell file.
fn read_cell(path: &Path) -> Result<Vec<(u64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("{}: line {}", path.display(), i + 2));
            if f.len() != 9 {
                return Err(bad());
            }
            Ok((f[4].parse().map_err(|_| bad())?, f[7].parse().map_err(|_| bad())?))
        })
        .collect()
}

fn summarize(rows: &[(u64, f64)]) -> (f64, f64) {
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let mut per_seed: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &(seed, x) in rows {
        let e = per_seed.entry(seed).or_default();
        e.0 += x;
        e.1 += 1;
    }
    let means: Vec<f64> = per_seed.values().map(|&(s, c)| s / c as f64).collect();
    if means.len() < 2 {
        return (mean, 0.0);
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (mean, (var / means.len() as f64).sqrt())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Reads the manifest in `dir`, writes `summary.csv` and plot-data files,
/// and returns the summary rows.
pub fn cmd_analyze(dir: &Path) -> Result<Vec<SummaryRow>> {
    let manifest = Manifest::load(dir)?
        .ok_or_else(|| Error::Config(format!("{} has no {}", dir.display(), super::run::MANIFEST_FILE)))?;
    let mut rows = Vec::new();
    for cell in manifest.cells.iter().filter(|c| c.status == CellStatus::Complete) {
        let data = read_cell(&dir.join(&cell.file))?;
        if data.is_empty() {
            continue;
        }
        let (mean, stderr) = summarize(&data);
        let xs: Vec<f64> = data.iter().map(|r| r.1).collect();
        rows.push(SummaryRow {
            p: cell.p,
            n: cell.n,
            q: cell.q,
            strategy: cell.strategy.clone(),
            n_samples: data.len(),
            mean,
            stderr,
            binder: binder_cumulant(&xs).ok(),
            bottleneck_model: bottleneck_model(cell.p, cell.n).ok().map(|m| m.1),
        });
    }
    if rows.is_empty() {
        log::warn!("no completed cells in {}", dir.display());
    }
    rows.sort_by(|a, b| {
        (a.strategy.as_str(), a.n, a.q, a.p)
            .partial_cmp(&(b.strategy.as_str(), b.n, b.q, b.p))
            .expect("grid values are finite")
    });

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for r in &rows {
        writeln!(
            summary,
            "{},{},{},{},{},{},{},{},{}",
            r.p,
            r.n,
            r.q,
            r.strategy,
            r.n_samples,
            r.mean,
            r.stderr,
            opt(r.binder),
            opt(r.bottleneck_model)
        )
        .expect("writing to a string");
    }
    write_atomic(&dir.join(SUMMARY_FILE), summary.as_bytes())?;

    let plot_dir = dir.join(PLOT_DIR);
    fs::create_dir_all(&plot_dir)?;
    let mut series: BTreeMap<String, String> = BTreeMap::new();
    let mut push = |name: String, x: f64, y: Option<f64>, err: f64| {
        if let Some(y) = y {
            let s = series.entry(name).or_insert_with(|| "x,y,err\n".to_string());
            writeln!(s, "{x},{y},{err}").expect("writing to a string");
        }
    };
    for r in &rows {
        let tag = format!("{}_n{}_q{:.4}", r.strategy, r.n, r.q);
        push(format!("mean_{tag}.csv"), r.p, Some(r.mean), r.stderr);
        push(format!("binder_{tag}.csv"), r.p, r.binder, 0.0);
        push(format!("bottleneck_{tag}.csv"), r.p, r.bottleneck_model, 0.0);
    }
    for (name, body) in series {
        write_atomic(&plot_dir.join(name), body.as_bytes())?;
    }
    Ok(rows)
}
