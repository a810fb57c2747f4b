//! Hyperplane integrals `J(omega, p) = int_{<omega, x> = p} f` of gridded
//! densities and the classical odd-dimensional inversion
//! `f = 1/2 (2 pi)^{1-n} (-Delta)^{(n-1)/2} int_{S^{n-1}} J(omega, <omega, x>) dOmega`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{dot, sphere_area, Vector};
use crate::inversion::{laplacian_apply, LaplacianStencil};
use crate::measures::{GridDensity, GridSpec};

/// Uniform offset axis with nodes `p_j = p0 + j dp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PGrid {
    pub p0: f64,
    pub dp: f64,
    pub np: usize,
}

impl PGrid {
    pub fn new(p0: f64, dp: f64, np: usize) -> Result<Self> {
        if !(dp.is_finite() && dp > 0.0) || np == 0 || !p0.is_finite() {
            return invalid(format!("bad offset grid p0={p0} dp={dp} np={np}"));
        }
        Ok(PGrid { p0, dp, np })
    }

    /// Symmetric grid with nodes `k dp` reaching at least `reach` on both sides.
    pub fn symmetric(reach: f64, dp: f64) -> Result<Self> {
        let k = (reach / dp).ceil() as usize;
        PGrid::new(-(k as f64) * dp, dp, 2 * k + 1)
    }

    pub fn center(&self, j: usize) -> f64 {
        self.p0 + self.dp * j as f64
    }

    /// Lower neighbouring bin center and the linear weight of the upper one,
    /// or `None` when `p` lies outside `[p_0, p_{np-1}]`.
    #[inline]
    pub fn locate(&self, p: f64) -> Option<(usize, f64)> {
        self.locate_scaled((p - self.p0) / self.dp)
    }

    /// As [`PGrid::locate`], taking `u = (p - p0) / dp`.
    #[inline]
    fn locate_scaled(&self, u: f64) -> Option<(usize, f64)> {
        if !(u >= 0.0 && u <= (self.np - 1) as f64) {
            return None;
        }
        let j = (u as usize).min(self.np.saturating_sub(2));
        Some((j, u - j as f64))
    }
}

/// Sampled Radon transform, `values[d * np + j] = J(omega_d, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    dim: usize,
    directions: Vec<Vector>,
    p_grid: PGrid,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(directions: Vec<Vector>, p_grid: PGrid, values: Vec<f64>) -> Result<Self> {
        let Some(first) = directions.first() else {
            return invalid("sinogram needs at least one direction");
        };
        let dim = first.dim();
        for d in &directions {
            check_dim(dim, d.dim())?;
            if (d.norm() - 1.0).abs() > 1e-9 {
                return invalid(format!("direction {d} is not a unit vector"));
            }
        }
        if values.len() != directions.len() * p_grid.np {
            return invalid(format!(
                "expected {} sinogram values, got {}",
                directions.len() * p_grid.np,
                values.len()
            ));
        }
        Ok(Sinogram { dim, directions, p_grid, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }

    pub fn p_grid(&self) -> &PGrid {
        &self.p_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, d: usize) -> &[f64] {
        let np = self.p_grid.np;
        &self.values[d * np..(d + 1) * np]
    }

    /// `sum_p J dp` for direction `d`.
    pub fn row_integral(&self, d: usize) -> f64 {
        self.row(d).iter().sum::<f64>() * self.p_grid.dp
    }

    /// `J(omega_d, p)` by linear interpolation between nodes; zero outside
    /// the sampled range.
    #[inline]
    pub fn sample(&self, d: usize, p: f64) -> f64 {
        interpolate(self.row(d), &self.p_grid, p)
    }

    /// `int_p^inf J(omega_d, q) dq` for the piecewise-linear interpolant.
    pub fn cumulative(&self, d: usize, p: f64) -> f64 {
        let g = &self.p_grid;
        let row = self.row(d);
        let at = |i: isize| if i >= 0 && (i as usize) < row.len() { row[i as usize] } else { 0.0 };
        // The interpolant is supported on [p_0 - dp, p_{np-1} + dp].
        let mut acc = 0.0;
        for j in -1..row.len() as isize {
            let (a, b) = (g.p0 + g.dp * j as f64, g.p0 + g.dp * (j + 1) as f64);
            if b <= p {
                continue;
            }
            let (fa, fb) = (at(j), at(j + 1));
            if a >= p {
                acc += 0.5 * (fa + fb) * g.dp;
            } else {
                let t = (p - a) / g.dp;
                let fp = fa + t * (fb - fa);
                acc += 0.5 * (fp + fb) * (b - p);
            }
        }
        acc
    }

    /// Text form: header line `ndirs,np,p0,dp`, then one line per direction
    /// holding the direction's coordinates followed by its `np` values.
    pub fn to_text(&self) -> String {
        let g = &self.p_grid;
        let mut s = format!("{},{},{:?},{:?}\n", self.directions.len(), g.np, g.p0, g.dp);
        for (d, omega) in self.directions.iter().enumerate() {
            let fields: Vec<String> = omega
                .as_slice()
                .iter()
                .chain(self.row(d))
                .map(|v| format!("{v:?}"))
                .collect();
            let _ = writeln!(s, "{}", fields.join(","));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let parse = |lineno: usize, line: &str| -> Result<Vec<f64>> {
            line.split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })
        };
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 0, msg: "empty sinogram".into() })?;
        let h = parse(hl, header)?;
        if h.len() != 4 || h[0] < 1.0 || h[1] < 1.0 {
            return Err(Error::Parse { line: hl + 1, msg: "header must be ndirs,np,p0,dp".into() });
        }
        let (ndirs, np) = (h[0] as usize, h[1] as usize);
        let grid = PGrid::new(h[2], h[3], np)?;
        let mut directions = Vec::with_capacity(ndirs);
        let mut values = Vec::with_capacity(ndirs * np);
        for (lineno, line) in lines {
            let row = parse(lineno, line)?;
            if row.len() <= np {
                return Err(Error::Parse { line: lineno + 1, msg: format!("expected more than {np} fields") });
            }
            let dim = row.len() - np;
            directions.push(Vector::new(row[..dim].to_vec()));
            values.extend_from_slice(&row[dim..]);
        }
        if directions.len() != ndirs {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header announces {ndirs} directions, found {}", directions.len()),
            });
        }
        Sinogram::new(directions, grid, values)
    }
}

#[inline]
fn interpolate(row: &[f64], g: &PGrid, p: f64) -> f64 {
    let u = (p - g.p0) / g.dp;
    let k = u.floor();
    let t = u - k;
    let k = k as isize;
    let at = |i: isize| {
        if i >= 0 && (i as usize) < row.len() {
            row[i as usize]
        } else {
            0.0
        }
    };
    (1.0 - t) * at(k) + t * at(k + 1)
}

/// Deposits every cell's mass `f h^n`, located at the projection of its
/// center, onto the two neighbouring offset nodes with linear weights, then
/// divides by `dp`.
pub fn radon_forward(f: &GridDensity, directions: &[Vector], p_grid: &PGrid) -> Result<Sinogram> {
    let spec = f.spec();
    for d in directions {
        check_dim(spec.dim(), d.dim())?;
    }
    if p_grid.np < 2 {
        return invalid("offset grid needs at least two nodes");
    }
    let vals = f.values();
    let scale = spec.cell_volume() / p_grid.dp;
    let inv_dp = 1.0 / p_grid.dp;
    let rows: Vec<Result<Vec<f64>>> = directions
        .par_iter()
        .map(|omega| {
            let mut row = vec![0.0; p_grid.np];
            let mut outside = false;
            spec.for_each_projection(omega.as_slice(), |i, proj| {
                let v = vals[i];
                if v != 0.0 {
                    match p_grid.locate_scaled((proj - p_grid.p0) * inv_dp) {
                        Some((j, t)) => {
                            row[j] += (1.0 - t) * v;
                            row[j + 1] += t * v;
                        }
                        None => outside = true,
                    }
                }
            });
            if outside {
                return invalid(format!("offset grid does not cover the support along {omega}"));
            }
            row.iter_mut().for_each(|v| *v *= scale);
            Ok(row)
        })
        .collect();
    let mut values = Vec::with_capacity(directions.len() * p_grid.np);
    for r in rows {
        values.extend(r?);
    }
    Sinogram::new(directions.to_vec(), *p_grid, values)
}

/// `|S^{n-1}|` times the direction average of `J(omega, <omega, x>)`.
pub fn backproject(sino: &Sinogram, spec: &GridSpec) -> Result<GridDensity> {
    check_dim(sino.dim(), spec.dim())?;
    let n = spec.dim();
    let area = sphere_area(n as i64 - 1)?;
    let ndirs = sino.directions().len();
    let nodes: Vec<f64> = (0..spec.len()).flat_map(|i| spec.node(i).into_inner()).collect();
    let mut acc = vec![0.0; spec.len()];
    for (d, omega) in sino.directions().iter().enumerate() {
        let row = sino.row(d);
        let g = sino.p_grid();
        let omega = omega.as_slice();
        acc.par_iter_mut()
            .zip(nodes.par_chunks_exact(n))
            .for_each(|(a, x)| *a += interpolate(row, g, dot(omega, x)));
    }
    let values = acc.into_iter().map(|v| area * v / ndirs as f64).collect();
    GridDensity::new(spec.clone(), values)
}

/// Odd-dimensional inversion on the nodes of `spec` shrunk by
/// `(n - 1) / 2` nodes per face.
pub fn radon_invert_odd_grid(sino: &Sinogram, spec: &GridSpec) -> Result<GridDensity> {
    let n = sino.dim();
    if n.is_multiple_of(2) {
        return invalid(format!("the inversion formula here covers odd dimensions only, got n = {n}"));
    }
    let passes = (n - 1) / 2;
    let mut g = backproject(sino, spec)?;
    let stencil = LaplacianStencil::for_grid(spec);
    for _ in 0..passes {
        let lap = laplacian_apply(&g, &stencil)?;
        let s = lap.spec().clone();
        g = GridDensity::new(s, lap.into_values().into_iter().map(|v| -v).collect())?;
    }
    let pref = 0.5 * (2.0 * PI).powi(1 - n as i32);
    let s = g.spec().clone();
    GridDensity::new(s, g.into_values().into_iter().map(|v| pref * v).collect())
}

/// Odd-dimensional inversion at a single point, differencing with step `h`.
pub fn radon_invert_odd(sino: &Sinogram, x: &Vector, h: f64) -> Result<f64> {
    check_dim(sino.dim(), x.dim())?;
    let n = sino.dim();
    if n.is_multiple_of(2) {
        return invalid(format!("the inversion formula here covers odd dimensions only, got n = {n}"));
    }
    let k = (n - 1) / 2;
    let origin = Vector::new(x.as_slice().iter().map(|c| c - k as f64 * h).collect());
    let local = GridSpec::new(origin, h, vec![2 * k + 1; n])?;
    let out = radon_invert_odd_grid(sino, &local)?;
    Ok(out.values()[0])
}
