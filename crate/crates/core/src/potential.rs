//! The distance potential `f(y) = int (|y - x| - |x|) dmu(x)`, computed
//! directly from a measure and from half-space masses alone.
//!
//! From half-space data, with `T` the total mass and `Q(omega, p)` the mass of
//! `{<omega, x> >= p}`:
//!
//! ```text
//! f(y) = alpha_n * int_{S^{n-1}} int_0^{<omega, y>} (T - 2 Q(omega, p)) dp dOmega(omega)
//! ```
//!
//! where the inner integral is oriented.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crofton::{CroftonSampler, Estimate};
use crate::error::{check_dim, invalid, Result};
use crate::geometry::{distance, dot, norm, Vector};
use crate::measures::{GridDensity, GridSpec, Measure, Query};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Direct,
    FromHalfspaces,
}

/// Sampled potential. `mc_error` holds per-node standard errors when the
/// values are Monte Carlo estimates.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub grid: GridDensity,
    pub provenance: Provenance,
    pub mc_error: Option<GridDensity>,
}

impl PotentialField {
    pub fn max_mc_error(&self) -> f64 {
        self.mc_error
            .as_ref()
            .map(|e| e.values().iter().copied().fold(0.0, f64::max))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialOptions {
    /// Gauss–Legendre order for the offset integral of a single estimate.
    pub gl_order: usize,
    /// Table panels per grid spacing when a whole grid is evaluated.
    pub table_refine: usize,
    /// Gauss–Legendre order per table panel.
    pub table_gl_order: usize,
    /// Absolute tolerance of the adaptive offset integral on the line.
    pub line_tol: f64,
    pub line_max_depth: u32,
    /// Largest tolerated mass (relative) within four cells of the grid faces.
    pub coverage_tol: f64,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions {
            gl_order: 16,
            table_refine: 8,
            table_gl_order: 4,
            line_tol: 1e-12,
            line_max_depth: 48,
            coverage_tol: 0.01,
        }
    }
}

pub fn potential_direct<M: Measure + ?Sized>(mu: &M, y: &Vector) -> Result<f64> {
    check_dim(mu.dim(), y.dim())?;
    let y = y.as_slice();
    Ok(mu.integrate(&|x| distance(y, x) - norm(x)))
}

/// `potential_direct` at every node of `spec`.
pub fn potential_grid_direct<M: Measure + ?Sized>(mu: &M, spec: &GridSpec) -> Result<PotentialField> {
    check_dim(mu.dim(), spec.dim())?;
    let n = spec.dim();
    let values = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let mut y = vec![0.0; n];
            spec.node_into(i, &mut y);
            mu.integrate(&|x| distance(&y, x) - norm(x))
        })
        .collect();
    Ok(PotentialField {
        grid: GridDensity::new(spec.clone(), values)?,
        provenance: Provenance::Direct,
        mc_error: None,
    })
}

pub fn potential_from_halfspaces(
    query: &Query,
    total: f64,
    y: &Vector,
    sampler: &CroftonSampler,
) -> Result<Estimate> {
    potential_from_halfspaces_with(query, total, y, sampler, &PotentialOptions::default())
}

pub fn potential_from_halfspaces_with(
    query: &Query,
    total: f64,
    y: &Vector,
    sampler: &CroftonSampler,
    opts: &PotentialOptions,
) -> Result<Estimate> {
    check_dim(query.dim(), y.dim())?;
    check_dim(sampler.dim(), y.dim())?;
    let integrand = |omega: &[f64], p: f64| total - 2.0 * query.eval_unit(omega, p);
    if y.as_slice().iter().all(|c| *c == 0.0) {
        return Ok(Estimate::exact(0.0));
    }
    if sampler.is_exact() {
        let gl = GaussLegendre::new(opts.gl_order)?;
        return Ok(Estimate::exact(line_potential(&gl, opts, &integrand, y[0])));
    }
    let gl = GaussLegendre::new(opts.gl_order)?;
    let ys = y.as_slice();
    Ok(sampler.integrate_directions(|omega| {
        let a = dot(omega, ys);
        gl.integrate(0.0, a, |p| integrand(omega, p))
    }))
}

/// Exact two-direction form on the line.
fn line_potential(
    gl: &GaussLegendre,
    opts: &PotentialOptions,
    integrand: &impl Fn(&[f64], f64) -> f64,
    y: f64,
) -> f64 {
    let plus = gl.integrate_adaptive(0.0, y, opts.line_tol, opts.line_max_depth, |p| integrand(&[1.0], p));
    let minus = gl.integrate_adaptive(0.0, -y, opts.line_tol, opts.line_max_depth, |p| integrand(&[-1.0], p));
    0.5 * (plus + minus)
}

pub fn potential_grid(
    query: &Query,
    total: f64,
    spec: &GridSpec,
    sampler: &CroftonSampler,
) -> Result<PotentialField> {
    potential_grid_with(query, total, spec, sampler, &PotentialOptions::default())
}

/// Batched potential on every node of `spec`, using only `query`.
///
/// All nodes share the sampler's direction set. For each direction the
/// oriented integral `F(a) = int_0^a (T - 2Q) dp` is tabulated on a fine
/// offset grid by composite Gauss–Legendre quadrature and read back at
/// `a = <omega, y>` by cubic Lagrange interpolation. Sharing directions makes
/// the estimate a smooth function of `y`, which the iterated Laplacian of the
/// inversion step requires.
pub fn potential_grid_with(
    query: &Query,
    total: f64,
    spec: &GridSpec,
    sampler: &CroftonSampler,
    opts: &PotentialOptions,
) -> Result<PotentialField> {
    let n = spec.dim();
    check_dim(query.dim(), n)?;
    check_dim(sampler.dim(), n)?;
    if let Some(s) = spec.shape().iter().find(|s| *s % 2 == 0) {
        return invalid(format!("grid extents must be odd, found {s}"));
    }
    check_coverage(query, total, spec, opts.coverage_tol)?;

    let integrand = |omega: &[f64], p: f64| total - 2.0 * query.eval_unit(omega, p);

    if sampler.is_exact() {
        let gl = GaussLegendre::new(opts.gl_order)?;
        let values = (0..spec.len())
            .into_par_iter()
            .map(|i| line_potential(&gl, opts, &integrand, spec.node(i)[0]))
            .collect();
        return Ok(PotentialField {
            grid: GridDensity::new(spec.clone(), values)?,
            provenance: Provenance::FromHalfspaces,
            mc_error: None,
        });
    }

    if opts.table_refine == 0 {
        return invalid("table_refine must be >= 1");
    }
    let gl = GaussLegendre::new(opts.table_gl_order)?;
    let nodes: Vec<f64> = (0..spec.len()).flat_map(|i| spec.node(i).into_inner()).collect();
    let delta = spec.h() / opts.table_refine as f64;
    let reach = spec.max_node_norm();
    let half = (reach / delta).ceil() as usize + 3;

    let mut sum = vec![0.0; spec.len()];
    let mut sumsq = vec![0.0; spec.len()];
    let mut table = vec![0.0; 2 * half + 1];
    let dirs = sampler.directions();
    for omega in dirs.chunks_exact(n) {
        // table[half + k] = F(k * delta)
        table[half] = 0.0;
        for k in 0..half {
            let (a, b) = (k as f64 * delta, (k + 1) as f64 * delta);
            table[half + k + 1] = table[half + k] + gl.integrate(a, b, |p| integrand(omega, p));
            table[half - k - 1] = table[half - k] + gl.integrate(-a, -b, |p| integrand(omega, p));
        }
        let table = &table;
        sum.par_chunks_mut(NODE_BLOCK)
            .zip(sumsq.par_chunks_mut(NODE_BLOCK))
            .zip(nodes.par_chunks(NODE_BLOCK * n))
            .for_each(|((s, s2), ys)| {
                for ((s, s2), y) in s.iter_mut().zip(s2.iter_mut()).zip(ys.chunks_exact(n)) {
                    let v = cubic_lookup(table, half, delta, dot(omega, y));
                    *s += v;
                    *s2 += v * v;
                }
            });
    }

    let count = (dirs.len() / n) as f64;
    let scale = sampler.scale();
    let mut values = Vec::with_capacity(spec.len());
    let mut errors = Vec::with_capacity(spec.len());
    for (s, s2) in sum.iter().zip(&sumsq) {
        let mean = s / count;
        let var = if count > 1.0 {
            ((s2 - count * mean * mean) / (count - 1.0)).max(0.0)
        } else {
            0.0
        };
        values.push(scale * mean);
        errors.push(scale.abs() * (var / count).sqrt());
    }
    Ok(PotentialField {
        grid: GridDensity::new(spec.clone(), values)?,
        provenance: Provenance::FromHalfspaces,
        mc_error: Some(GridDensity::new(spec.clone(), errors)?),
    })
}

const NODE_BLOCK: usize = 4096;

/// Four-point Lagrange interpolation in a table sampled at `(k - half) * delta`.
#[inline]
fn cubic_lookup(table: &[f64], half: usize, delta: f64, a: f64) -> f64 {
    // Shifted to be nonnegative so truncation is floor.
    let u = a / delta + half as f64;
    let i = u as usize;
    let t = u - i as f64;
    let f = &table[i - 1..i + 3];
    let (f0, f1, f2, f3) = (f[0], f[1], f[2], f[3]);
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3
}

/// Rejects grids whose outer four layers carry more than `tol` of the mass,
/// judged by axis-aligned half-space queries.
fn check_coverage(query: &Query, total: f64, spec: &GridSpec, tol: f64) -> Result<()> {
    let n = spec.dim();
    // Strictly beyond the margin: support may touch the 4h layer boundary.
    let margin = 4.0 * spec.h() - 1e-9 * spec.h();
    let lo = spec.origin();
    let hi = spec.far_corner();
    let mut reference = total.abs();
    let mut tails = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        reference = reference.max(query.eval_unit(&e, lo[i]).abs());
        tails.push((i, '+', query.eval_unit(&e, hi[i] - margin)));
        e[i] = -1.0;
        tails.push((i, '-', query.eval_unit(&e, -(lo[i] + margin))));
    }
    for (axis, side, tail) in tails {
        if tail.abs() > tol * reference {
            return invalid(format!(
                "grid does not cover the support: mass {tail:.3e} within 4h of the {side} face of axis {axis}"
            ));
        }
    }
    Ok(())
}
