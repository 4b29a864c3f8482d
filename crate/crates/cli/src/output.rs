//! Output directory, CSV helpers and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use ssh_bell::io::fmt_f64;
use ssh_bell::Warning;

use crate::config::RunConfig;
use crate::Failure;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.root.join(name))?))
    }

    /// Writes a CSV with the given header and numeric rows.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<Field>>) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(Field::render).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// One CSV cell.
pub enum Field {
    F(f64),
    U(u64),
    S(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::F(x) => fmt_f64(*x),
            Field::U(n) => n.to_string(),
            Field::S(s) => s.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Conventions {
    pub band_labels: &'static str,
    pub entropy: &'static str,
    pub standard_deviation: &'static str,
    pub energy_unit: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    band_labels: "1-based, ascending energy",
    entropy: "von Neumann, log base 2",
    standard_deviation: "population (divide by n)",
    energy_unit: "intra-cell hopping v; times in 1/v; wave numbers in units of pi",
};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: &'static str,
    pub config: RunConfig,
    pub master_seed: Option<u64>,
    pub derived_seeds: Vec<DerivedSeed>,
    pub workers: usize,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub conventions: Conventions,
    pub warnings: Vec<Warning>,
    pub notes: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DerivedSeed {
    pub run_index: u64,
    pub seed: u64,
}

/// Collects manifest fields while a command runs.
pub struct ManifestBuilder {
    command: String,
    started: u64,
    clock: Instant,
    pub master_seed: Option<u64>,
    pub derived_seeds: Vec<DerivedSeed>,
    pub warnings: Vec<Warning>,
    pub notes: Vec<String>,
}

impl ManifestBuilder {
    pub fn start(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            started: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            clock: Instant::now(),
            master_seed: None,
            derived_seeds: Vec::new(),
            warnings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn warn(&mut self, ws: impl IntoIterator<Item = Warning>) {
        for w in ws {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }

    pub fn finish(self, config: RunConfig, workers: usize, out: &mut OutputDir) -> Result<(), Failure> {
        let mut outputs = out.written().to_vec();
        outputs.push("manifest.json".into());
        let manifest = RunManifest {
            command: self.command,
            code_version: env!("CARGO_PKG_VERSION"),
            config,
            master_seed: self.master_seed,
            derived_seeds: self.derived_seeds,
            workers,
            started_unix_s: self.started,
            wall_clock_s: self.clock.elapsed().as_secs_f64(),
            conventions: CONVENTIONS,
            warnings: self.warnings,
            notes: self.notes,
            outputs,
        };
        out.json("manifest.json", &manifest)
    }
}
