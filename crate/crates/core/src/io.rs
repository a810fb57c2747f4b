//! On-disk formats: grids as a JSON header plus a raw little-endian `f64`
//! array, reconstruction metadata sidecars, and 8-bit PGM slices.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Vector;
use crate::inversion::ReconstructionReport;
use crate::measures::{GridDensity, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl GridHeader {
    pub fn of(spec: &GridSpec) -> Self {
        GridHeader {
            dim: spec.dim(),
            origin: spec.origin().as_slice().to_vec(),
            h: spec.h(),
            shape: spec.shape().to_vec(),
        }
    }

    pub fn to_spec(&self) -> Result<GridSpec> {
        if self.origin.len() != self.dim || self.shape.len() != self.dim {
            return invalid(format!("grid header declares dim {} inconsistently", self.dim));
        }
        GridSpec::new(Vector::new(self.origin.clone()), self.h, self.shape.clone())
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Data file paired with a header path `<stem>.json`.
pub fn data_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

/// Writes `<stem>.json` and `<stem>.bin`; returns the header path.
pub fn write_grid(stem: &Path, grid: &GridDensity) -> Result<PathBuf> {
    let header = with_ext(stem, ".json");
    let mut json = serde_json::to_string_pretty(&GridHeader::of(grid.spec()))?;
    json.push('\n');
    fs::write(&header, json)?;
    let mut bytes = Vec::with_capacity(8 * grid.values().len());
    for v in grid.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(data_path(&header), bytes)?;
    Ok(header)
}

pub fn read_grid(header: &Path) -> Result<GridDensity> {
    let h: GridHeader = serde_json::from_str(&fs::read_to_string(header)?)?;
    let spec = h.to_spec()?;
    let bytes = fs::read(data_path(header))?;
    if bytes.len() != 8 * spec.len() {
        return invalid(format!(
            "{} holds {} bytes, header expects {}",
            data_path(header).display(),
            bytes.len(),
            8 * spec.len()
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    GridDensity::new(spec, values)
}

/// Grid files plus `<stem>.report.json`.
pub fn write_report(stem: &Path, report: &ReconstructionReport) -> Result<PathBuf> {
    write_grid(stem, &report.density)?;
    let path = with_ext(stem, ".report.json");
    let mut json = serde_json::to_string_pretty(&report.metadata())?;
    json.push('\n');
    fs::write(&path, json)?;
    Ok(path)
}

/// Binary PGM of a 2D grid, linearly scaled from its min (black) to max (white).
/// Rows run along axis 0, columns along axis 1.
pub fn write_pgm(path: &Path, grid: &GridDensity) -> Result<()> {
    let shape = grid.spec().shape();
    if shape.len() != 2 {
        return invalid("PGM output needs a 2D grid");
    }
    let (lo, hi) = grid
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = Vec::with_capacity(grid.values().len() + 32);
    write!(out, "P5\n{} {}\n255\n", shape[1], shape[0])?;
    out.extend(grid.values().iter().map(|v| (255.0 * (v - lo) / span).round() as u8));
    fs::write(path, out)?;
    Ok(())
}

/// The 2D slice of a 3D grid at index `k` of the last axis.
pub fn slice_last_axis(grid: &GridDensity, k: usize) -> Result<GridDensity> {
    let spec = grid.spec();
    if spec.dim() != 3 || k >= spec.shape()[2] {
        return invalid("slice needs a 3D grid and an index inside it");
    }
    let depth = spec.shape()[2];
    let values = grid.values().chunks_exact(depth).map(|c| c[k]).collect();
    let o = spec.origin();
    let s2 = GridSpec::new(Vector::new(vec![o[0], o[1]]), spec.h(), spec.shape()[..2].to_vec())?;
    GridDensity::new(s2, values)
}

/// `x,value` rows along axis 0 through the grid node nearest the origin
/// on the other axes.
pub fn axis_profile_csv(grid: &GridDensity) -> String {
    let spec = grid.spec();
    let mut idx: Vec<usize> = (0..spec.dim())
        .map(|i| {
            let k = (-spec.origin()[i] / spec.h()).round();
            k.clamp(0.0, (spec.shape()[i] - 1) as f64) as usize
        })
        .collect();
    let mut s = String::from("x,value\n");
    for k in 0..spec.shape()[0] {
        idx[0] = k;
        let x = spec.origin()[0] + spec.h() * k as f64;
        s.push_str(&format!("{x:?},{:?}\n", grid.get(&idx)));
    }
    s
}
