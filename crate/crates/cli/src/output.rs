// SPDX-License-Identifier: Apache-2.0
//! Files written by the subcommands. Every file starts with the run
//! configuration; text formats carry it as `#` comment lines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rigidnet_core::montecarlo::Histogram;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub backend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl Provenance {
    pub fn new(command: &str, input: Option<&Path>, backend: impl Into<String>) -> Self {
        Self {
            tool: format!("rigidnet {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            input: input.map(|p| p.display().to_string()),
            backend: backend.into(),
            seed: None,
            num_draws: None,
            bins: None,
        }
    }

    pub fn header(&self) -> String {
        let mut s = format!("# {} {}", self.tool, self.command);
        if let Some(i) = &self.input {
            s.push_str(&format!(" input={i}"));
        }
        s.push_str(&format!(" backend={}", self.backend));
        if let Some(seed) = self.seed {
            s.push_str(&format!(" seed={seed}"));
        }
        if let Some(n) = self.num_draws {
            s.push_str(&format!(" draws={n}"));
        }
        if let Some(b) = self.bins {
            s.push_str(&format!(" bins={b}"));
        }
        s.push('\n');
        s
    }
}

/// One CSV line. `sector` is one-based.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub theta: f64,
    pub sector: usize,
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
    /// Two decimals, as tables are printed.
    pub rounded: String,
}

impl Row {
    pub fn new(theta: f64, sector: usize, statistic: &str, value: f64, stderr: f64) -> Self {
        Self { theta, sector, statistic: statistic.to_string(), value, stderr, rounded: format!("{value:.2}") }
    }
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path).map_err(CliError::io(path))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn open(&self, name: &str, prov: &Provenance) -> CliResult<(PathBuf, BufWriter<File>)> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).map_err(CliError::io(&path))?);
        w.write_all(prov.header().as_bytes()).map_err(CliError::io(&path))?;
        Ok((path, w))
    }

    pub fn csv(&self, name: &str, prov: &Provenance, rows: &[Row]) -> CliResult<PathBuf> {
        let (path, w) = self.open(name, prov)?;
        let mut csv = csv::Writer::from_writer(w);
        for r in rows {
            csv.serialize(r)?;
        }
        csv.flush().map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, prov: &Provenance, body: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        let doc = serde_json::json!({ "config": prov, "report": body });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, prov: &Provenance, body: &str) -> CliResult<PathBuf> {
        let (path, mut w) = self.open(name, prov)?;
        w.write_all(body.as_bytes()).map_err(CliError::io(&path))?;
        w.flush().map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn histogram(&self, name: &str, prov: &Provenance, h: &Histogram) -> CliResult<PathBuf> {
        let mut body = String::from("bin_left bin_right count\n");
        for (i, count) in h.counts.iter().enumerate() {
            body.push_str(&format!("{:.17e} {:.17e} {count}\n", h.edges[i], h.edges[i + 1]));
        }
        self.text(name, prov, &body)
    }
}
