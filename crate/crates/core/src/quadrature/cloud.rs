use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::abbasis::Vec3;

/// One node of a user-supplied cloud: position, quadrature weight and
/// magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudNode {
    pub x: Vec3,
    pub weight: f64,
    pub m: Vec3,
}

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("cannot read cloud file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: weight {weight} is negative")]
    NegativeWeight { line: u64, weight: f64 },
    #[error("line {line}: non-finite value")]
    NonFinite { line: u64 },
    #[error("cloud file contains no nodes")]
    Empty,
}

#[derive(Debug, Deserialize)]
#[allow(non_snake_case)]
struct Row {
    x: f64,
    y: f64,
    z: f64,
    weight: f64,
    Mx: f64,
    My: f64,
    Mz: f64,
}

/// Reads a CSV with header `x,y,z,weight,Mx,My,Mz`.
pub fn read_cloud_csv(path: &Path) -> Result<Vec<CloudNode>, CloudError> {
    let file = std::fs::File::open(path)
        .map_err(|source| CloudError::Io { path: path.display().to_string(), source })?;
    read_cloud_from_reader(file)
}

pub fn read_cloud_from_reader(reader: impl Read) -> Result<Vec<CloudNode>, CloudError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let parse_err = |e: csv::Error| CloudError::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(1),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(parse_err)?.clone();
    let mut record = csv::StringRecord::new();
    let mut nodes = Vec::new();
    while rdr.read_record(&mut record).map_err(parse_err)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| CloudError::Parse { line, message: e.to_string() })?;
        let vals = [row.x, row.y, row.z, row.weight, row.Mx, row.My, row.Mz];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CloudError::NonFinite { line });
        }
        if row.weight < 0.0 {
            return Err(CloudError::NegativeWeight { line, weight: row.weight });
        }
        nodes.push(CloudNode { x: [row.x, row.y, row.z], weight: row.weight, m: [row.Mx, row.My, row.Mz] });
    }
    if nodes.is_empty() {
        return Err(CloudError::Empty);
    }
    Ok(nodes)
}
