use std::fs;
use std::sync::Arc;

use hsrecon_core::fixtures::{Gaussian, GaussianMixture};
use hsrecon_core::io::read_grid;
use hsrecon_core::{make_query, DiscreteMeasure, GridDensity, GridSpec, Measure, Query, Vector};

use crate::{CliError, CliResult, GridArgs, InputArgs};

/// A resolved input measure.
pub enum Source {
    Measure(Arc<dyn Measure>),
    Analytic(GaussianMixture),
}

impl Source {
    pub fn load(input: &InputArgs) -> CliResult<Source> {
        if let Some(path) = &input.measure {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let m = DiscreteMeasure::from_text(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            check_dim(input.dim, m.dim())?;
            return Ok(Source::Measure(Arc::new(m)));
        }
        if let Some(path) = &input.grid {
            let g = read_grid(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            check_dim(input.dim, g.dim())?;
            return Ok(Source::Measure(Arc::new(g)));
        }
        let Some(name) = &input.fixture else {
            return Err(CliError::Usage("one of --measure, --grid or --fixture is required".into()));
        };
        let dim = input
            .dim
            .ok_or_else(|| CliError::Usage("--fixture needs --dim".into()))?;
        if dim == 0 {
            return Err(CliError::Usage("--dim must be >= 1".into()));
        }
        let e1 = Vector::unit(dim, 0);
        let src = match name.as_str() {
            "gaussian" => Source::Analytic(GaussianMixture(vec![Gaussian::standard(dim)])),
            "gaussian-pair" => Source::Analytic(GaussianMixture(vec![
                Gaussian { mean: e1.scaled(1.5), sigma: 0.6, mass: 0.5 },
                Gaussian { mean: e1.scaled(-1.5), sigma: 0.6, mass: 0.5 },
            ])),
            "delta" => Source::Measure(Arc::new(DiscreteMeasure::dirac(Vector::zeros(dim), 1.0)?)),
            "two-point" => Source::Measure(Arc::new(DiscreteMeasure::new(
                vec![e1.clone(), e1.scaled(-1.0)],
                vec![0.5, 0.5],
            )?)),
            other => return Err(CliError::Usage(format!("unknown fixture '{other}'"))),
        };
        Ok(src)
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::Measure(m) => m.dim(),
            Source::Analytic(g) => g.0[0].dim(),
        }
    }

    pub fn query(&self) -> Query {
        match self {
            Source::Measure(m) => make_query(m.clone()),
            Source::Analytic(g) => g.query(),
        }
    }

    /// Total mass, read off the half-space data.
    pub fn total(&self) -> f64 {
        self.query().total_mass()
    }

    /// Reference density for error reports, when the measure has one.
    pub fn truth(&self) -> Option<&GaussianMixture> {
        match self {
            Source::Analytic(g) => Some(g),
            Source::Measure(_) => None,
        }
    }

    pub fn as_measure(&self) -> Option<&dyn Measure> {
        match self {
            Source::Measure(m) => Some(m.as_ref()),
            Source::Analytic(_) => None,
        }
    }

    /// Gridded density for the Radon command.
    pub fn to_grid(&self, spec: &GridSpec) -> CliResult<GridDensity> {
        match self {
            Source::Analytic(g) => Ok(g.grid(spec.clone())),
            Source::Measure(m) => {
                // Deposit atoms on their nearest nodes.
                let mut values = vec![0.0; spec.len()];
                let mut bad = false;
                let vol = spec.cell_volume();
                m.for_each_atom(&mut |x, w| {
                    let idx: Option<Vec<usize>> = x
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let k = ((c - spec.origin()[i]) / spec.h()).round();
                            (k >= 0.0 && (k as usize) < spec.shape()[i]).then_some(k as usize)
                        })
                        .collect();
                    match idx {
                        Some(idx) => values[spec.flat_index(&idx)] += w / vol,
                        None => bad = true,
                    }
                });
                if bad {
                    return Err(CliError::Usage("measure support lies outside the grid".into()));
                }
                Ok(GridDensity::new(spec.clone(), values)?)
            }
        }
    }
}

fn check_dim(requested: Option<usize>, actual: usize) -> CliResult<()> {
    match requested {
        Some(d) if d != actual => Err(CliError::Usage(format!("--dim {d} but the input has dimension {actual}"))),
        _ => Ok(()),
    }
}

pub fn parse_bounds(grid: &GridArgs) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = grid.bounds.split(',').collect();
    let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match parsed.as_deref() {
        Some([lo, hi]) if lo < hi => Ok((*lo, *hi)),
        _ => Err(CliError::Usage(format!("--bounds expects lo,hi with lo < hi, got '{}'", grid.bounds))),
    }
}

pub fn cube(grid: &GridArgs, dim: usize) -> CliResult<GridSpec> {
    let (lo, hi) = parse_bounds(grid)?;
    Ok(GridSpec::cube(dim, lo, hi, grid.h)?)
}
