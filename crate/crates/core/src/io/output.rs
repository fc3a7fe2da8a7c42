//! CSV tables and the run manifest.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value round-trips and identical runs give identical bytes.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::ci::CiTable;
use crate::experiments::convergence::ConvergenceRow;
use crate::experiments::crossings::CrossingStudy;
use crate::experiments::diagram::{DiagramScan, GridCell};
use crate::experiments::moments::MomentRatioStudy;
use crate::sde::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A table with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_owned(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Runtime(format!("csv {}: {e}", self.name));
        w.write_record(&self.header).map_err(to_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(to_err)?;
        }
        w.into_inner().map_err(|e| Error::Runtime(format!("csv {}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files for one run and writes the manifest last.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(dir: &FsPath) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &FsPath {
        &self.dir
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| Error::Io { path, source })?;
        self.files.push(FileRecord {
            name: name.to_owned(),
            sha256: sha256_hex(bytes),
            rows,
        });
        Ok(())
    }

    pub fn write_table(&mut self, table: &Table) -> Result<()> {
        let bytes = table.to_csv_bytes()?;
        self.write_bytes(&format!("{}.csv", table.name), &bytes, table.rows.len())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(format!("{name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes(), 0)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes(), 0)
    }

    pub fn finish(self, config: &RunConfig) -> Result<Manifest> {
        let manifest = Manifest {
            config: config.clone(),
            seed: config.sim.master_seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            files: self.files,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Runtime(format!("manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
        Ok(manifest)
    }
}

pub fn diagram_table(scan: &DiagramScan) -> Table {
    let mut t = Table::new("diagram", &["k", "q_sample", "sim_index", "sample_time", "is_free_flow"]);
    for (p, s) in scan.samples() {
        t.push(vec![
            fmt_f64(p.k),
            fmt_f64(s.q),
            s.sim_index.to_string(),
            fmt_f64(s.sample_time),
            s.is_free_flow.to_string(),
        ]);
    }
    t
}

pub fn diagram_summary_table(scan: &DiagramScan) -> Table {
    let mut t = Table::new(
        "diagram_summary",
        &["n", "k", "q_mean", "q_var", "q_det", "free_flow_fraction", "mean_speed"],
    );
    for p in &scan.points {
        t.push(vec![
            fmt_f64(p.n),
            fmt_f64(p.k),
            fmt_f64(p.q_mean),
            fmt_f64(p.q_var),
            fmt_f64(p.q_det),
            fmt_f64(p.free_flow_fraction),
            fmt_f64(p.mean_speed),
        ]);
    }
    t
}

/// Speed-flow and speed-concentration projections of the samples.
pub fn speed_table(scan: &DiagramScan) -> Table {
    let mut t = Table::new("speed", &["k", "q_sample", "speed", "sim_index"]);
    for (p, s) in scan.samples() {
        t.push(vec![fmt_f64(p.k), fmt_f64(s.q), fmt_f64(s.speed), s.sim_index.to_string()]);
    }
    t
}

pub fn grid_table(cells: &[GridCell]) -> Table {
    let mut t = Table::new(
        "grid",
        &["c1", "c2", "sigma", "capacity_drop", "sig_cond1", "sig_cond2", "max_q_var"],
    );
    for c in cells {
        let max_var = c.scan.points.iter().map(|p| p.q_var).fold(0.0, f64::max);
        t.push(vec![
            fmt_f64(c.c1),
            fmt_f64(c.c2),
            fmt_f64(c.sigma),
            fmt_opt(c.capacity_drop),
            c.sig_cond1.to_string(),
            c.sig_cond2.to_string(),
            fmt_f64(max_var),
        ]);
    }
    t
}

pub fn moment_ratio_table(study: &MomentRatioStudy) -> Table {
    let mut t = Table::new(
        "moment_ratios",
        &["combo_id", "r0s", "mu_theory", "mu_sim", "ratio_mean", "gamma_theory", "gamma_sim", "ratio_var"],
    );
    for r in &study.rows {
        t.push(vec![
            r.combo_id.to_string(),
            fmt_f64(r.r0s),
            fmt_f64(r.mu_theory),
            fmt_f64(r.mu_sim),
            fmt_f64(r.ratio_mean),
            fmt_f64(r.gamma_theory),
            fmt_f64(r.gamma_sim),
            fmt_f64(r.ratio_var),
        ]);
    }
    t
}

pub fn crossings_table(study: &CrossingStudy) -> Table {
    let mut t = Table::new("crossings", &["time", "median_count", "path", "count"]);
    for (j, &time) in study.times.iter().enumerate() {
        for (i, c) in study.counts.iter().enumerate() {
            t.push(vec![fmt_f64(time), fmt_f64(study.median_counts[j]), i.to_string(), c[j].to_string()]);
        }
    }
    t
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(
        "convergence",
        &["combo_id", "n", "sigma", "c1", "c2", "r0", "r0s", "mean_t_s", "n_converged", "n_not_converged", "n_truncated"],
    );
    for r in rows {
        t.push(vec![
            r.combo_id.to_string(),
            fmt_f64(r.n),
            fmt_f64(r.sigma),
            fmt_f64(r.c1),
            fmt_f64(r.c2),
            fmt_f64(r.r0),
            fmt_f64(r.r0s),
            fmt_opt(r.mean_t_s),
            r.n_converged.to_string(),
            r.n_not_converged.to_string(),
            r.n_truncated.to_string(),
        ]);
    }
    t
}

pub fn ci_csv(tables: &[CiTable]) -> Table {
    let mut t = Table::new(
        "ci",
        &["t_lo", "t_hi", "form", "level", "point", "lower", "upper", "amplitude", "degenerate"],
    );
    for table in tables {
        for (form, rows) in [("mean", &table.rows), ("percentile", &table.percentile_rows)] {
            for r in rows {
                t.push(vec![
                    fmt_f64(table.time_window.0),
                    fmt_f64(table.time_window.1),
                    form.to_owned(),
                    fmt_f64(r.level),
                    fmt_f64(r.point),
                    fmt_f64(r.lower),
                    fmt_f64(r.upper),
                    fmt_f64(r.amplitude),
                    table.degenerate.to_string(),
                ]);
            }
        }
    }
    t
}

/// Every `stride`-th grid point of each path, plus the final point.
pub fn paths_table(paths: &[Path], stride: usize) -> Table {
    let mut t = Table::new("paths", &["path", "time", "n1"]);
    for p in paths {
        let last = p.values.len() - 1;
        for i in (0..=last).filter(|i| i % stride == 0 || *i == last) {
            t.push(vec![p.index.to_string(), fmt_f64(p.times[i]), fmt_f64(p.values[i])]);
        }
    }
    t
}
