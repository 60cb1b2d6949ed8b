//! JSON and CSV writers. Floats in CSV carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Destination directory, or `None` to skip file output.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating output directory {}", d.display()))?;
        }
        Ok(Self { dir })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let Some(path) = self.path(name) else { return Ok(()) };
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write(&path, text.as_bytes())
    }

    pub fn csv(&self, name: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
        let Some(path) = self.path(name) else { return Ok(()) };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        write(&path, &bytes)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex_cells(z: Complex64) -> [String; 2] {
    [float(z.re), float(z.im)]
}

/// Header and rows for a list of points: `re,im`.
pub fn points_table(points: &[Complex64]) -> (Vec<String>, impl Iterator<Item = Vec<String>> + '_) {
    (
        vec!["re".into(), "im".into()],
        points.iter().map(|&z| complex_cells(z).to_vec()),
    )
}
