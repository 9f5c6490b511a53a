use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use needle_core::mmspace::{Density1D, MMSpace, SpaceSpec};
use serde::Deserialize;
use tempfile::NamedTempFile;

/// Configuration problems (bad flags, missing or malformed inputs).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_space(path: &Path) -> Result<(MMSpace, Option<Density1D>)> {
    let spec = SpaceSpec::from_json(&read_text(path)?)?;
    Ok(spec.build()?)
}

/// A vector given either as an array or as an object keyed by point id.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PointVector {
    Dense(Vec<f64>),
    Keyed(BTreeMap<String, f64>),
}

impl PointVector {
    fn resolve(self, space: &MMSpace, name: &str) -> Result<Vec<f64>> {
        match self {
            PointVector::Dense(v) => {
                if v.len() != space.len() {
                    bail!(config_err(format!("{name} has {} entries for {} points", v.len(), space.len())));
                }
                Ok(v)
            }
            PointVector::Keyed(map) => {
                let mut v = vec![0.0; space.len()];
                for (id, m) in map {
                    let i = space
                        .index_of(&id)
                        .ok_or_else(|| config_err(format!("{name}: unknown point id {id:?}")))?;
                    v[i] = m;
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
struct MarginalsFile {
    mu0: Option<PointVector>,
    mu1: Option<PointVector>,
    f: Option<PointVector>,
}

/// Transport input: either explicit marginals or a mean-zero function.
pub enum Marginals {
    Pair(Vec<f64>, Vec<f64>),
    Function(Vec<f64>),
}

pub fn load_marginals(path: &Path, space: &MMSpace) -> Result<Marginals> {
    let file: MarginalsFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| config_err(format!("marginals file {}: {e}", path.display())))?;
    match (file.mu0, file.mu1, file.f) {
        (Some(a), Some(b), None) => Ok(Marginals::Pair(a.resolve(space, "mu0")?, b.resolve(space, "mu1")?)),
        (None, None, Some(f)) => Ok(Marginals::Function(f.resolve(space, "f")?)),
        _ => Err(config_err("marginals file needs either mu0 and mu1, or f")),
    }
}

#[derive(Debug, Deserialize)]
struct DensityRow {
    t: f64,
    h: f64,
}

/// Density CSV with columns `t,h`.
pub fn load_density_csv(path: &Path) -> Result<Density1D> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for row in reader.deserialize() {
        let row: DensityRow = row.map_err(|e| config_err(format!("density file {}: {e}", path.display())))?;
        grid.push(row.t);
        values.push(row.h);
    }
    Ok(Density1D::new(grid, values)?)
}

/// Writes `contents` next to its destination and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(&dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `report.json` -> `report.<suffix>.csv`.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))
}
