//! Recovery of a measure from its distance potential by iterated Laplacians:
//! in R^{2m-1}, `Delta^m f = c_m mu` with `c_m = 2 (-2 pi)^{m-1} (2m-2)!!`.
//!
//! Even dimensions go through [`embed_query`], which lifts half-space data
//! on R^{2m} to the measure placed on the hyperplane `z = 0` of R^{2m+1}.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::crofton::CroftonSampler;
use crate::error::{check_dim, invalid, Error, Result};
use crate::measures::{GridDensity, GridSpec, Measure, Query};
use crate::potential::{potential_grid_with, PotentialField, PotentialOptions};

/// `k!!` with `0!! = 1!! = 1`.
pub fn double_factorial(k: u32) -> f64 {
    (1..=k).rev().step_by(2).map(f64::from).product()
}

/// `c_m = 2 (-2 pi)^{m-1} (2m - 2)!!`.
pub fn c_const(m: u32) -> Result<f64> {
    if m < 1 {
        return invalid("c_m needs m >= 1");
    }
    Ok(2.0 * (-2.0 * PI).powi(m as i32 - 1) * double_factorial(2 * m - 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilScheme {
    Central2ndOrder,
}

/// Discrete Laplacian: sum over axes of central second differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacianStencil {
    pub n: usize,
    pub h: f64,
    pub scheme: StencilScheme,
}

impl LaplacianStencil {
    pub fn new(n: usize, h: f64) -> Self {
        LaplacianStencil { n, h, scheme: StencilScheme::Central2ndOrder }
    }

    pub fn for_grid(spec: &GridSpec) -> Self {
        Self::new(spec.dim(), spec.h())
    }
}

/// Applies the stencil at every node whose neighbours all exist; the result
/// lives on the grid shrunk by one node per face.
pub fn laplacian_apply(field: &GridDensity, stencil: &LaplacianStencil) -> Result<GridDensity> {
    let spec = field.spec();
    check_dim(stencil.n, spec.dim())?;
    if (stencil.h - spec.h()).abs() > 1e-12 * spec.h() {
        return invalid(format!("stencil spacing {} does not match grid spacing {}", stencil.h, spec.h()));
    }
    if let Some(s) = spec.shape().iter().find(|s| **s < 3) {
        return Err(Error::GridTooSmall(format!("Laplacian needs extent >= 3 per axis, found {s}")));
    }
    let out_spec = spec.shrink(1)?;
    let n = spec.dim();
    let strides = spec.strides();
    let vals = field.values();
    let inv_h2 = 1.0 / (spec.h() * spec.h());
    let out_shape = out_spec.shape().to_vec();
    let inner = out_shape[n - 1];
    let outer: usize = out_shape[..n - 1].iter().product();

    let mut out = Vec::with_capacity(out_spec.len());
    let mut idx = vec![0usize; n - 1];
    for _ in 0..outer {
        let row_start: usize = idx.iter().zip(&strides).map(|(k, s)| (k + 1) * s).sum::<usize>() + 1;
        for k in 0..inner {
            let c = row_start + k;
            let center = vals[c];
            let mut acc = 0.0;
            for s in &strides {
                acc += vals[c + s] + vals[c - s] - 2.0 * center;
            }
            out.push(acc * inv_h2);
        }
        for i in (0..n - 1).rev() {
            idx[i] += 1;
            if idx[i] < out_shape[i] {
                break;
            }
            idx[i] = 0;
        }
    }
    GridDensity::new(out_spec, out)
}

/// Separable Gaussian smoothing with standard deviation `width` in grid
/// cells, truncated at four deviations; values beyond the grid count as zero.
pub fn mollify(field: &GridDensity, width: f64) -> Result<GridDensity> {
    if !(width.is_finite() && width >= 0.0) {
        return invalid(format!("mollification width must be >= 0, got {width}"));
    }
    if width == 0.0 {
        return Ok(field.clone());
    }
    let radius = (4.0 * width).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= norm);

    let spec = field.spec().clone();
    let shape = spec.shape().to_vec();
    let strides = spec.strides();
    let mut cur = field.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    for axis in 0..spec.dim() {
        let len = shape[axis] as isize;
        let stride = strides[axis];
        for (flat, out) in next.iter_mut().enumerate() {
            let pos = ((flat / stride) % shape[axis]) as isize;
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let q = pos + j as isize - radius;
                if q >= 0 && q < len {
                    let src = (flat as isize + (q - pos) * stride as isize) as usize;
                    acc += w * cur[src];
                }
            }
            *out = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    GridDensity::new(spec, cur)
}

/// Result of `c_m^{-1} Delta^m f`, with diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub density: GridDensity,
    pub m: u32,
    pub c_m: f64,
    pub mollify_width: Option<f64>,
    /// Relative L1 error against a reference density, when one is supplied.
    pub l1_error: Option<f64>,
    /// Absolute max-norm error against a reference density.
    pub linf_error: Option<f64>,
    /// Mass carried by cells with negative density.
    pub negative_mass: f64,
    pub total_mass: f64,
    /// Total mass reported by the half-space data, when known.
    pub expected_mass: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

impl ReconstructionReport {
    /// Fills the error fields from a reference density evaluated at nodes.
    pub fn compare_with(&mut self, truth: impl Fn(&[f64]) -> f64) {
        let spec = self.density.spec();
        let mut buf = vec![0.0; spec.dim()];
        let (mut diff, mut mass, mut linf) = (0.0, 0.0, 0.0f64);
        for (i, v) in self.density.values().iter().enumerate() {
            spec.node_into(i, &mut buf);
            let t = truth(&buf);
            diff += (v - t).abs();
            mass += t.abs();
            linf = linf.max((v - t).abs());
        }
        self.l1_error = Some(if mass > 0.0 { diff / mass } else { diff * spec.cell_volume() });
        self.linf_error = Some(linf);
    }

    pub fn metadata(&self) -> ReportMetadata {
        ReportMetadata {
            m: self.m,
            c_m: self.c_m,
            mollify_width: self.mollify_width,
            l1_error: self.l1_error,
            linf_error: self.linf_error,
            negative_mass: self.negative_mass,
            total_mass: self.total_mass,
            expected_mass: self.expected_mass,
            seed: self.seed,
            samples: self.samples,
        }
    }
}

/// Serializable part of a [`ReconstructionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub m: u32,
    pub c_m: f64,
    pub mollify_width: Option<f64>,
    pub l1_error: Option<f64>,
    pub linf_error: Option<f64>,
    pub negative_mass: f64,
    pub total_mass: f64,
    pub expected_mass: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

/// `c_m^{-1} Delta^m f` on a grid of dimension `2m - 1`, optionally smoothed.
pub fn invert(f: &PotentialField, m: u32, mollify_width: Option<f64>) -> Result<ReconstructionReport> {
    let c_m = c_const(m)?;
    let spec = f.grid.spec();
    let want = 2 * m as usize - 1;
    if spec.dim() != want {
        return invalid(format!(
            "inversion with m = {m} needs dimension {want}, grid has {}",
            spec.dim()
        ));
    }
    if let Some(s) = spec.shape().iter().find(|s| **s < 2 * m as usize + 1) {
        return Err(Error::GridTooSmall(format!(
            "{m} Laplacian passes need extent >= {} per axis, found {s}",
            2 * m + 1
        )));
    }
    let stencil = LaplacianStencil::for_grid(spec);
    let mut g = laplacian_apply(&f.grid, &stencil)?;
    for _ in 1..m {
        g = laplacian_apply(&g, &stencil)?;
    }
    let (out_spec, vals) = (g.spec().clone(), g.into_values());
    let mut density = GridDensity::new(out_spec, vals.into_iter().map(|v| v / c_m).collect())?;
    if let Some(w) = mollify_width.filter(|w| *w > 0.0) {
        density = mollify(&density, w)?;
    }
    Ok(ReconstructionReport {
        negative_mass: density.negative_mass(),
        total_mass: density.total_mass(),
        density,
        m,
        c_m,
        mollify_width,
        l1_error: None,
        linf_error: None,
        expected_mass: None,
        seed: None,
        samples: None,
    })
}

/// Half-space data of `mu` on R^d turned into half-space data of its copy on
/// `R^d x {0}` in R^{d+1}.
pub fn embed_query(query: &Query) -> Query {
    let inner = query.clone();
    let d = query.dim();
    Query::new(d + 1, move |omega, p| {
        let planar = &omega[..d];
        let len = planar.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len == 0.0 {
            // Horizontal boundary: the whole plane z = 0 is inside iff p <= 0.
            if p <= 0.0 {
                inner.total_mass()
            } else {
                0.0
            }
        } else {
            let unit: Vec<f64> = planar.iter().map(|c| c / len).collect();
            inner.eval_unit(&unit, p / len)
        }
    })
}

/// Half-space data to potential to density, in dimension `2m - 1`.
pub fn reconstruct(
    query: &Query,
    total: f64,
    spec: &GridSpec,
    sampler: &CroftonSampler,
    m: u32,
    mollify_width: Option<f64>,
) -> Result<ReconstructionReport> {
    reconstruct_with(query, total, spec, sampler, m, mollify_width, &PotentialOptions::default())
}

pub fn reconstruct_with(
    query: &Query,
    total: f64,
    spec: &GridSpec,
    sampler: &CroftonSampler,
    m: u32,
    mollify_width: Option<f64>,
    opts: &PotentialOptions,
) -> Result<ReconstructionReport> {
    if spec.dim() != 2 * m as usize - 1 {
        return invalid(format!("m = {m} needs a grid of dimension {}", 2 * m - 1));
    }
    let f = potential_grid_with(query, total, spec, sampler, opts)?;
    let mut report = invert(&f, m, mollify_width)?;
    report.expected_mass = Some(total);
    if !sampler.is_exact() {
        report.seed = Some(sampler.seed());
        report.samples = Some(sampler.samples());
    }
    Ok(report)
}

/// Even-dimensional reconstruction: lift to one dimension higher, invert
/// there, and integrate the result across the added axis.
///
/// `spec` has dimension `query.dim() + 1`; the returned slab lives on its
/// first `query.dim()` axes.
pub fn reconstruct_embedded(
    query: &Query,
    total: f64,
    spec: &GridSpec,
    sampler: &CroftonSampler,
    mollify_width: Option<f64>,
) -> Result<(ReconstructionReport, GridDensity)> {
    let d = query.dim();
    if !d.is_multiple_of(2) {
        return invalid(format!("embedding is for even dimensions, got {d}"));
    }
    check_dim(d + 1, spec.dim())?;
    let lifted = embed_query(query);
    let m = (d as u32 + 2) / 2;
    let report = reconstruct(&lifted, total, spec, sampler, m, mollify_width)?;
    let slab = slab_integrate(&report.density)?;
    Ok((report, slab))
}

/// Integrates a density over its last axis (Riemann sum).
pub fn slab_integrate(density: &GridDensity) -> Result<GridDensity> {
    let spec = density.spec();
    let n = spec.dim();
    if n < 2 {
        return invalid("slab integration needs dimension >= 2");
    }
    let depth = spec.shape()[n - 1];
    let origin = spec.origin().as_slice()[..n - 1].to_vec();
    let out_spec = GridSpec::new(origin.into(), spec.h(), spec.shape()[..n - 1].to_vec())?;
    let values = density
        .values()
        .chunks_exact(depth)
        .map(|col| col.iter().sum::<f64>() * spec.h())
        .collect();
    GridDensity::new(out_spec, values)
}

/// Total mass of `density` inside the ball of radius `r` around `center`.
pub fn mass_near(density: &GridDensity, center: &[f64], r: f64) -> f64 {
    density.integrate(&|x| {
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= r * r {
            1.0
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HalfSpace, Vector};
    use crate::measures::{make_query, DiscreteMeasure};
    use crate::potential::Provenance;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        assert_eq!(double_factorial(0), 1.0);
        assert_eq!(double_factorial(1), 1.0);
        assert_eq!(double_factorial(4), 8.0);
        assert_eq!(double_factorial(7), 105.0);
        assert_relative_eq!(c_const(1).unwrap(), 2.0);
        assert_relative_eq!(c_const(2).unwrap(), -8.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(c_const(3).unwrap(), 64.0 * PI * PI, max_relative = 1e-15);
        assert!(c_const(0).is_err());
    }

    fn field(dim: usize, lo: f64, hi: f64, h: f64, f: impl Fn(&[f64]) -> f64) -> GridDensity {
        GridDensity::from_fn(GridSpec::cube(dim, lo, hi, h).unwrap(), f)
    }

    #[test]
    fn stencil_exact_on_affine_and_quadratic() {
        for n in 1..=4 {
            let g = field(n, -1.0, 1.0, 0.25, |x| 0.5 - 2.0 * x[0] + x[n - 1] * 3.0);
            let out = laplacian_apply(&g, &LaplacianStencil::new(n, 0.25)).unwrap();
            assert!(out.values().iter().all(|v| v.abs() < 1e-9));
            let g = field(n, -1.0, 1.0, 0.25, |x| x.iter().map(|c| c * c).sum());
            let out = laplacian_apply(&g, &LaplacianStencil::new(n, 0.25)).unwrap();
            assert_eq!(out.spec().shape()[0], 7);
            for v in out.values() {
                assert_relative_eq!(*v, 2.0 * n as f64, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn stencil_errors() {
        let g = field(2, 0.0, 0.5, 0.25, |_| 1.0);
        assert!(laplacian_apply(&g, &LaplacianStencil::new(3, 0.25)).is_err());
        assert!(laplacian_apply(&g, &LaplacianStencil::new(2, 0.5)).is_err());
        let thin = GridDensity::zeros(GridSpec::new(Vector::zeros(2), 0.25, vec![2, 5]).unwrap());
        assert!(laplacian_apply(&thin, &LaplacianStencil::new(2, 0.25)).is_err());
    }

    #[test]
    fn line_spike_has_unit_mass() {
        let h = 0.1;
        let f = PotentialField {
            grid: field(1, -1.0, 1.0, h, |x| x[0].abs()),
            provenance: Provenance::Direct,
            mc_error: None,
        };
        let r = invert(&f, 1, None).unwrap();
        for (i, v) in r.density.values().iter().enumerate() {
            let x = r.density.spec().node(i)[0];
            if x.abs() < 1e-9 {
                assert_relative_eq!(*v, 1.0 / h, max_relative = 1e-9);
            } else {
                assert!(v.abs() < 1e-9);
            }
        }
        assert_relative_eq!(r.total_mass, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn invert_rejects_bad_dimensions() {
        let f = PotentialField {
            grid: field(2, -1.0, 1.0, 0.5, |_| 0.0),
            provenance: Provenance::Direct,
            mc_error: None,
        };
        assert!(invert(&f, 1, None).is_err());
        let small = PotentialField {
            grid: field(3, -0.5, 0.5, 0.5, |_| 0.0),
            provenance: Provenance::Direct,
            mc_error: None,
        };
        assert!(matches!(invert(&small, 2, None), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn mollify_preserves_interior_mass() {
        let g = field(2, -3.0, 3.0, 0.25, |x| if x[0] == 0.0 && x[1] == 0.0 { 16.0 } else { 0.0 });
        let s = mollify(&g, 1.5).unwrap();
        assert_relative_eq!(s.total_mass(), g.total_mass(), max_relative = 1e-12);
        assert!(s.values().iter().all(|v| *v >= 0.0));
        assert_eq!(mollify(&g, 0.0).unwrap(), g);
        assert!(mollify(&g, -1.0).is_err());
    }

    #[test]
    fn embedded_query_cases() {
        let mu = DiscreteMeasure::new(
            vec![Vector::new(vec![0.5, 0.1]), Vector::new(vec![-0.2, 0.4])],
            vec![0.3, 0.7],
        )
        .unwrap();
        let q = make_query(mu);
        let lifted = embed_query(&q);
        assert_eq!(lifted.dim(), 3);
        let s = HalfSpace::new(Vector::new(vec![1.0, 0.0, 0.0]), 0.3).unwrap();
        let flat = HalfSpace::new(Vector::new(vec![1.0, 0.0]), 0.3).unwrap();
        assert_eq!(lifted.mass(&s).unwrap(), q.mass(&flat).unwrap());
        let up = HalfSpace::new(Vector::new(vec![0.0, 0.0, 1.0]), -1.0).unwrap();
        assert_relative_eq!(lifted.mass(&up).unwrap(), 1.0, epsilon = 1e-15);
        let up = HalfSpace::new(Vector::new(vec![0.0, 0.0, 1.0]), 0.5).unwrap();
        assert_eq!(lifted.mass(&up).unwrap(), 0.0);
        // |planar part| = 0.6
        let tilted = HalfSpace::new(Vector::new(vec![0.36, 0.48, 0.8]), 0.06).unwrap();
        let planar = HalfSpace::new(Vector::new(vec![0.6, 0.8]), 0.1).unwrap();
        assert_eq!(lifted.mass(&tilted).unwrap(), q.mass(&planar).unwrap());
    }

    #[test]
    fn slab_integration_sums_last_axis() {
        let g = field(2, 0.0, 1.0, 0.5, |x| x[0] + 10.0 * x[1]);
        let s = slab_integrate(&g).unwrap();
        assert_eq!(s.spec().shape(), &[3]);
        assert_relative_eq!(s.values()[1], 0.5 * (0.5 * 3.0 + 10.0 * 1.5));
    }
}
