//! Artifact writers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Settings;
use crate::error::Result;

/// Version of the summary JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const ROUNDS_CSV: &str = "rounds.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TABLE_TXT: &str = "table.txt";

pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV with a header row taken from the record's field names.
    pub fn csv<S: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = S>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json(&self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn text(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        Ok(())
    }
}

/// Top-level summary document: schema version, the resolved flat settings,
/// the effective model parameters and the command's results.
pub fn summary(command: &str, settings: &Settings, effective: Value, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": settings.echo(),
        "effective": effective,
        "result": result,
    })
}

/// Simulated acquisition time split into fixed windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Acquisition {
    pub duration_s: f64,
    pub window_s: f64,
    pub windows: f64,
}

impl Acquisition {
    pub fn new(duration_s: f64, window_s: f64) -> Self {
        Self {
            duration_s,
            window_s,
            windows: duration_s / window_s,
        }
    }

    /// Count scaled to one window.
    pub fn per_window(&self, count: u64) -> f64 {
        if self.duration_s > 0.0 {
            count as f64 * self.window_s / self.duration_s
        } else {
            0.0
        }
    }

    pub fn rate_hz(&self, count: u64) -> f64 {
        if self.duration_s > 0.0 {
            count as f64 / self.duration_s
        } else {
            0.0
        }
    }
}

/// Left-aligned first column, right-aligned others.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                s.push_str(&format!("{c:<w$}", w = width[0]));
            } else {
                s.push_str(&format!("  {c:>w$}", w = width[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    let rule: usize = width.iter().sum::<usize>() + 2 * (cols.saturating_sub(1));
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Fixed-precision float for tables.
pub fn f(x: f64, digits: usize) -> String {
    format!("{x:.digits$}")
}
