//! On-disk format: `<stem>.json` header plus `<stem>.edges.csv` with rows
//! `x_index,y_index,conductance` (row-major site indices, `x < y`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EnvMeta, Environment};
use crate::error::{Error, Result};
use crate::lattice::Geometry;

pub const FORMAT_VERSION: u32 = 1;
const CSV_HEADER: &str = "x_index,y_index,conductance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvHeader {
    pub format_version: u32,
    pub d: usize,
    pub side: usize,
    pub sampler: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    /// Edge file name, relative to the header's directory.
    pub edges_file: String,
    pub edge_count: usize,
}

/// Writes `<dir>/<stem>.json` and `<dir>/<stem>.edges.csv`; returns both paths.
pub fn save(env: &Environment, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let edges_name = format!("{stem}.edges.csv");
    let edges_path = dir.join(&edges_name);
    let mut w = BufWriter::new(fs::File::create(&edges_path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for (x, y, c) in env.edges() {
        writeln!(w, "{x},{y},{c:?}")?;
    }
    w.flush()?;
    let meta = env.meta();
    let header = EnvHeader {
        format_version: FORMAT_VERSION,
        d: env.geometry().dim(),
        side: env.geometry().side(),
        sampler: meta.sampler.clone(),
        params: meta.params.clone(),
        seed: meta.seed,
        edges_file: edges_name,
        edge_count: env.edge_count(),
    };
    let header_path = dir.join(format!("{stem}.json"));
    fs::write(&header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok((header_path, edges_path))
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Loads an environment from its JSON header and re-validates every invariant.
pub fn load(header_path: &Path) -> Result<Environment> {
    let header: EnvHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    if header.format_version != FORMAT_VERSION {
        return Err(malformed(
            header_path,
            format!("unsupported format version {}", header.format_version),
        ));
    }
    let geometry = Geometry::new(header.d, header.side)?;
    let edges_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.edges_file);
    let reader = BufReader::new(fs::File::open(&edges_path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(malformed(&edges_path, "missing CSV header")),
    }
    let mut edges = Vec::with_capacity(header.edge_count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parsed = (|| -> Option<(usize, usize, f64)> {
            let x = it.next()?.trim().parse().ok()?;
            let y = it.next()?.trim().parse().ok()?;
            let c = it.next()?.trim().parse().ok()?;
            it.next().is_none().then_some((x, y, c))
        })();
        let edge = parsed.ok_or_else(|| malformed(&edges_path, format!("bad row {}", i + 2)))?;
        edges.push(edge);
    }
    if edges.len() != header.edge_count {
        return Err(malformed(
            &edges_path,
            format!("{} edges, header says {}", edges.len(), header.edge_count),
        ));
    }
    let meta = EnvMeta {
        sampler: header.sampler,
        params: header.params,
        seed: header.seed,
    };
    let env = Environment::from_edges(geometry, edges, meta)?;
    env.validate()?;
    Ok(env)
}
