//! Comma-separated tables with a commented provenance header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! table read back with [`CsvTable::parse`] reproduces every value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classical::ClassicalSeries;
use crate::ensemble::{EnsembleSeries, SweepResult};
use crate::error::{Result, RotorError};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    /// Header lines, written after `# `.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    /// Append each line of `block`, e.g. a serialised config.
    pub fn comment_block(&mut self, block: &str) {
        for line in block.lines() {
            self.comments.push(line.to_string());
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(RotorError::param(
                "row",
                format!("{} values for {} columns", row.len(), self.columns.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            if c.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {c}");
            }
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = CsvTable::default();
        let mut lines = text.lines();
        let bad = |msg: String| RotorError::Checkpoint(msg);
        for line in lines.by_ref() {
            if let Some(c) = line.strip_prefix('#') {
                table.comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            } else {
                table.columns = line.split(',').map(str::to_string).collect();
                break;
            }
        }
        if table.columns.is_empty() {
            return Err(bad("table has no column header".into()));
        }
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {i}: {e}")))?;
            if row.len() != table.columns.len() {
                return Err(bad(format!("row {i} has {} cells", row.len())));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn ensemble_table(s: &EnsembleSeries) -> CsvTable {
    let mut t = CsvTable::new(&["t", "mean_p2", "sem_p2", "mean_q", "var_q"]);
    for i in 0..s.t.len() {
        t.rows
            .push(vec![s.t[i], s.mean_p2[i], s.sem_p2[i], s.mean_q[i], s.var_q[i]]);
    }
    t
}

pub fn classical_table(s: &ClassicalSeries) -> CsvTable {
    let mut t = CsvTable::new(&["t", "mean_p2", "sem_p2"]);
    for i in 0..s.t.len() {
        t.rows.push(vec![s.t[i], s.mean_p2[i], s.sem_p2[i]]);
    }
    t
}

/// One row per sweep point; failed points carry NaN and `ok = 0`.
pub fn sweep_table(r: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new(&[
        r.axis.name(),
        "d_p",
        "stderr",
        "r2",
        "final_p2",
        "final_sem",
        "n_traj",
        "ok",
    ]);
    for p in &r.points {
        let (d, e, r2) = p.fit.map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.d_p, f.stderr, f.r2));
        let (fp, fs) = p.final_p2.unwrap_or((f64::NAN, f64::NAN));
        t.rows.push(vec![
            p.value,
            d,
            e,
            r2,
            fp,
            fs,
            p.n_traj as f64,
            if p.ok() { 1.0 } else { 0.0 },
        ]);
    }
    t
}
