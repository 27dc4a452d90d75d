//! Run records and file output.
//!
//! A run directory holds `summary.json` and one CSV per dumped field. Fields
//! and masks use the header `x,width,value` with one row per cell.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use degen_actuator::rng::derive_seed;
use degen_actuator::SpatialGrid;

use crate::config::ExperimentConfig;

/// Root seed and the per-task seeds derived from it with
/// `degen_actuator::rng::derive_seed(root, label, 0)`.
#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub root: u64,
    pub derived: BTreeMap<String, u64>,
}

impl Seeds {
    pub fn new(root: u64) -> Self {
        Self {
            root,
            derived: BTreeMap::new(),
        }
    }

    /// Derives and records the seed of one task stream.
    pub fn task(&mut self, label: &str) -> u64 {
        let s = derive_seed(self.root, label, 0);
        self.derived.insert(label.to_string(), s);
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub name: &'static str,
    /// The identity or inequality being checked.
    pub anchor: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub version: &'static str,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub threads: usize,
    pub seeds: Seeds,
    pub config: ExperimentConfig,
    /// Scalar results; reproducible bit for bit from the configuration.
    pub outputs: BTreeMap<String, Value>,
    pub diagnostics: BTreeMap<String, Value>,
    /// CSV files written next to the summary.
    pub files: Vec<String>,
    pub audits: Vec<AuditRecord>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical_json().as_bytes()))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

impl RunRecord {
    pub fn new(command: &'static str, cfg: &ExperimentConfig, threads: usize) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(cfg),
            started_at: now(),
            finished_at: String::new(),
            threads,
            seeds: Seeds::new(cfg.solver.seed),
            config: cfg.clone(),
            outputs: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            files: Vec::new(),
            audits: Vec::new(),
            warnings: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn output(&mut self, key: &str, v: impl Serialize) {
        self.outputs.insert(
            key.into(),
            serde_json::to_value(v).expect("serialisable output"),
        );
    }

    pub fn diagnostic(&mut self, key: &str, v: impl Serialize) {
        self.diagnostics.insert(
            key.into(),
            serde_json::to_value(v).expect("serialisable diagnostic"),
        );
    }
}

/// Serialised writer for one run directory.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    /// One row per cell of `grid`; `values` must cover all cells.
    pub fn field(
        &self,
        rec: &mut RunRecord,
        name: &str,
        grid: &SpatialGrid,
        values: &[f64],
    ) -> Result<()> {
        assert_eq!(
            values.len(),
            grid.n(),
            "field {name} does not cover the grid"
        );
        let file = format!("{name}.csv");
        let path = self.root.join(&file);
        let mut out = std::io::BufWriter::new(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(out, "x,width,value")?;
        for ((x, w), v) in grid.centers().iter().zip(grid.widths()).zip(values) {
            writeln!(out, "{x},{w},{v}")?;
        }
        out.flush()?;
        rec.files.push(file);
        Ok(())
    }

    /// A control-region vector, extended by `fill` to the whole grid.
    pub fn omega1_field(
        &self,
        rec: &mut RunRecord,
        name: &str,
        grid: &SpatialGrid,
        values: &[f64],
        fill: f64,
    ) -> Result<()> {
        let mut full = vec![fill; grid.n()];
        full[grid.omega1()].copy_from_slice(values);
        self.field(rec, name, grid, &full)
    }

    /// A control-region mask as 0/1 over the whole grid.
    pub fn mask(
        &self,
        rec: &mut RunRecord,
        name: &str,
        grid: &SpatialGrid,
        mask: &[bool],
    ) -> Result<()> {
        let values: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        self.omega1_field(rec, name, grid, &values, 0.0)
    }

    pub fn finish(&self, rec: &mut RunRecord) -> Result<()> {
        rec.finished_at = now();
        let path = self.root.join("summary.json");
        let text = serde_json::to_string_pretty(rec)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_the_configuration() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.solver.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn seeds_are_recorded_and_stable() {
        let mut s = Seeds::new(42);
        let x = s.task("inner");
        assert_eq!(x, derive_seed(42, "inner", 0));
        assert_eq!(s.derived["inner"], x);
        assert_ne!(s.task("c-lambda"), x);
    }
}
