use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use lqbsde::output::{real, write_header};
use lqbsde::verification::Estimate;

/// Ordered `key=value` lines of `report.txt`.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
    failures: Vec<String>,
}

impl Report {
    pub fn text(&mut self, key: impl Into<String>, value: impl Display) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn real(&mut self, key: impl Into<String>, value: f64) {
        self.lines.push((key.into(), real(value)));
    }

    pub fn estimate(&mut self, key: &str, e: Estimate) {
        self.real(key, e.mean);
        self.real(format!("{key}_SE"), e.se);
    }

    /// Records a tolerance check; failing checks set a nonzero exit code.
    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        let name = name.into();
        self.text(format!("check_{name}"), if ok { "pass" } else { "fail" });
        if !ok {
            self.failures.push(name);
        }
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    pub fn write(&self, path: &Path, header: &[(String, String)]) -> Result<()> {
        let mut w = create(path)?;
        write_header(&mut w, header)?;
        for (k, v) in &self.lines {
            writeln!(w, "{k}={v}")?;
        }
        if !self.lines.iter().any(|(k, _)| k.starts_with("check_")) {
            return Ok(w.flush()?);
        }
        writeln!(w, "status={}", if self.failures.is_empty() { "pass" } else { "fail" })?;
        Ok(w.flush()?)
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}
