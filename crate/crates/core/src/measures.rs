//! Compactly supported signed measures and their half-space transform `S -> mu(S)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{dot, norm, HalfSpace, Vector};

/// Regular grid of nodes `origin + h * k`, `0 <= k_i < shape[i]`, in row-major
/// order (last axis fastest). Each node is the center of a cube of side `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    origin: Vector,
    h: f64,
    shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vector, h: f64, shape: Vec<usize>) -> Result<Self> {
        check_dim(origin.dim(), shape.len())?;
        if shape.is_empty() {
            return invalid("grid must have at least one axis");
        }
        if !(h.is_finite() && h > 0.0) {
            return invalid(format!("grid spacing must be positive, got {h}"));
        }
        if shape.contains(&0) {
            return invalid(format!("grid shape must be positive, got {shape:?}"));
        }
        Ok(GridSpec { origin, h, shape })
    }

    /// Cube `[lo, hi]^dim` with nodes on both ends.
    pub fn cube(dim: usize, lo: f64, hi: f64, h: f64) -> Result<Self> {
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(hi > lo) || !(h > 0.0) {
            return invalid(format!("bad cube bounds [{lo}, {hi}] with h = {h}"));
        }
        let cells = (hi - lo) / h;
        let k = cells.round();
        if (cells - k).abs() > 1e-6 {
            return invalid(format!("extent {} is not a multiple of h = {h}", hi - lo));
        }
        GridSpec::new(Vector::new(vec![lo; dim]), h, vec![k as usize + 1; dim])
    }

    /// Cells of side `h` tiling `[lo, hi]^dim`; nodes sit at cell centers.
    pub fn cells(dim: usize, lo: f64, hi: f64, h: f64) -> Result<Self> {
        let outer = GridSpec::cube(dim, lo, hi, h)?;
        let shape = outer.shape.iter().map(|s| s - 1).collect();
        GridSpec::new(Vector::new(vec![lo + 0.5 * h; dim]), h, shape)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn origin(&self) -> &Vector {
        &self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for i in (0..self.dim().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = flat % self.shape[i];
            flat /= self.shape[i];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&k, &s)| acc * s + k)
    }

    /// Coordinates of node `flat` written into `out`.
    pub fn node_into(&self, mut flat: usize, out: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let k = flat % self.shape[i];
            flat /= self.shape[i];
            out[i] = self.origin[i] + self.h * k as f64;
        }
    }

    pub fn node(&self, flat: usize) -> Vector {
        let mut v = vec![0.0; self.dim()];
        self.node_into(flat, &mut v);
        Vector::new(v)
    }

    /// Upper corner node.
    pub fn far_corner(&self) -> Vector {
        Vector::new(
            (0..self.dim())
                .map(|i| self.origin[i] + self.h * (self.shape[i] - 1) as f64)
                .collect(),
        )
    }

    /// The grid with `k` nodes removed from every face.
    pub fn shrink(&self, k: usize) -> Result<GridSpec> {
        if self.shape.iter().any(|&s| s < 2 * k + 1) {
            return Err(Error::GridTooSmall(format!(
                "shape {:?} cannot lose {k} nodes per face",
                self.shape
            )));
        }
        let origin = Vector::new(self.origin.as_slice().iter().map(|o| o + k as f64 * self.h).collect());
        GridSpec::new(origin, self.h, self.shape.iter().map(|s| s - 2 * k).collect())
    }

    /// Largest node norm.
    pub fn max_node_norm(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let lo = self.origin[i];
                let hi = lo + self.h * (self.shape[i] - 1) as f64;
                lo.abs().max(hi.abs()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Calls `f(flat, <omega, node>)` for every node, in flat order.
    pub fn for_each_projection(&self, omega: &[f64], mut f: impl FnMut(usize, f64)) {
        let n = self.dim();
        let last = n - 1;
        let inner = self.shape[last];
        let step = omega[last] * self.h;
        let base0 = dot(omega, self.origin.as_slice());
        let outer: usize = self.shape[..last].iter().product();
        let mut idx = vec![0usize; last];
        for o in 0..outer {
            let mut base = base0;
            for (i, &k) in idx.iter().enumerate() {
                base += omega[i] * self.h * k as f64;
            }
            let start = o * inner;
            for k in 0..inner {
                f(start + k, base + step * k as f64);
            }
            for i in (0..last).rev() {
                idx[i] += 1;
                if idx[i] < self.shape[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

/// Values sampled on a [`GridSpec`]. As a measure, each node carries mass
/// `value * h^n` located at the node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
    radius: f64,
}

impl GridDensity {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return invalid(format!(
                "grid has {} nodes but {} values were supplied",
                spec.len(),
                values.len()
            ));
        }
        let mut radius = 0.0f64;
        let mut buf = vec![0.0; spec.dim()];
        for (i, &v) in values.iter().enumerate() {
            if v != 0.0 {
                spec.node_into(i, &mut buf);
                radius = radius.max(norm(&buf));
            }
        }
        Ok(GridDensity { spec, values, radius })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        GridDensity { spec, values: vec![0.0; n], radius: 0.0 }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut buf = vec![0.0; spec.dim()];
        let values = (0..spec.len())
            .map(|i| {
                spec.node_into(i, &mut buf);
                f(&buf)
            })
            .collect();
        GridDensity::new(spec, values).expect("length matches by construction")
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.spec.flat_index(idx)]
    }

    /// Sum of `|value| * h^n` over nodes where `value < 0`.
    pub fn negative_mass(&self) -> f64 {
        self.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * self.spec.cell_volume()
    }
}

/// A finite signed measure with compact support.
pub trait Measure: Send + Sync {
    fn dim(&self) -> usize;

    /// Visits every atom `(location, mass)`.
    fn for_each_atom(&self, f: &mut dyn FnMut(&[f64], f64));

    fn total_mass(&self) -> f64;

    /// `max |x|` over the support.
    fn support_radius(&self) -> f64;

    /// `mu({x : <omega, x> >= p})` for a unit `omega` of matching dimension.
    fn halfspace_mass_unit(&self, omega: &[f64], p: f64) -> f64;

    fn halfspace_mass(&self, s: &HalfSpace) -> Result<f64> {
        check_dim(self.dim(), s.dim())?;
        Ok(self.halfspace_mass_unit(s.omega().as_slice(), s.offset()))
    }

    /// `int f dmu`.
    fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_atom(&mut |x, w| acc += w * f(x));
        acc
    }
}

impl Measure for GridDensity {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn for_each_atom(&self, f: &mut dyn FnMut(&[f64], f64)) {
        let vol = self.spec.cell_volume();
        let mut buf = vec![0.0; self.spec.dim()];
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                self.spec.node_into(i, &mut buf);
                f(&buf, v * vol);
            }
        }
    }

    fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn halfspace_mass_unit(&self, omega: &[f64], p: f64) -> f64 {
        let mut acc = 0.0;
        let values = &self.values;
        self.spec.for_each_projection(omega, |i, proj| {
            if proj >= p {
                acc += values[i];
            }
        });
        acc * self.spec.cell_volume()
    }
}

/// Weighted point list.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Vector>,
    weights: Vec<f64>,
    radius: f64,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("use DiscreteMeasure::empty for a measure without atoms");
        };
        Self::with_dim(first.dim(), points, weights)
    }

    pub fn with_dim(dim: usize, points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("measure dimension must be >= 1");
        }
        if points.len() != weights.len() {
            return invalid(format!("{} points but {} weights", points.len(), weights.len()));
        }
        for p in &points {
            check_dim(dim, p.dim())?;
        }
        if weights.iter().chain(points.iter().flat_map(|p| p.as_slice())).any(|v| !v.is_finite()) {
            return invalid("non-finite coordinate or weight");
        }
        let radius = points.iter().map(Vector::norm).fold(0.0, f64::max);
        Ok(DiscreteMeasure { dim, points, weights, radius })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::with_dim(dim, vec![], vec![])
    }

    /// `weight * delta_z`.
    pub fn dirac(z: Vector, weight: f64) -> Result<Self> {
        Self::new(vec![z], vec![weight])
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same atoms placed in `R^n x {0}^extra`.
    pub fn embed(&self, extra: usize) -> DiscreteMeasure {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut c = p.as_slice().to_vec();
                c.resize(self.dim + extra, 0.0);
                Vector::new(c)
            })
            .collect();
        DiscreteMeasure::with_dim(self.dim + extra, points, self.weights.clone())
            .expect("embedding preserves validity")
    }

    /// Parses `weight,x1,...,xn` records; `#` lines and blank lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?;
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected weight followed by at least one coordinate".into(),
                });
            }
            let d = fields.len() - 1;
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected {expected} coordinates, found {d}"),
                    })
                }
                _ => {}
            }
            weights.push(fields[0]);
            points.push(Vector::new(fields[1..].to_vec()));
        }
        let Some(dim) = dim else {
            return Err(Error::Parse { line: 0, msg: "no records".into() });
        };
        Self::with_dim(dim, points, weights)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (p, w) in self.points.iter().zip(&self.weights) {
            s.push_str(&format!("{w:?}"));
            for c in p.as_slice() {
                s.push_str(&format!(",{c:?}"));
            }
            s.push('\n');
        }
        s
    }
}

impl Measure for DiscreteMeasure {
    fn dim(&self) -> usize {
        self.dim
    }

    fn for_each_atom(&self, f: &mut dyn FnMut(&[f64], f64)) {
        for (p, &w) in self.points.iter().zip(&self.weights) {
            f(p.as_slice(), w);
        }
    }

    fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn halfspace_mass_unit(&self, omega: &[f64], p: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(x, _)| dot(omega, x.as_slice()) >= p)
            .map(|(_, w)| w)
            .sum()
    }
}

impl<M: Measure + ?Sized> Measure for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn for_each_atom(&self, f: &mut dyn FnMut(&[f64], f64)) {
        (**self).for_each_atom(f)
    }
    fn total_mass(&self) -> f64 {
        (**self).total_mass()
    }
    fn support_radius(&self) -> f64 {
        (**self).support_radius()
    }
    fn halfspace_mass_unit(&self, omega: &[f64], p: f64) -> f64 {
        (**self).halfspace_mass_unit(omega, p)
    }
}

type QueryFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Black-box half-space transform `S -> mu(S)`.
///
/// Reconstruction code sees a measure only through this evaluator.
#[derive(Clone)]
pub struct Query {
    dim: usize,
    eval: Arc<QueryFn>,
}

impl Query {
    /// Wraps `f(omega, p) = mu({<omega, x> >= p})`, called with unit `omega`.
    pub fn new(dim: usize, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Query { dim, eval: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self, s: &HalfSpace) -> Result<f64> {
        check_dim(self.dim, s.dim())?;
        Ok((self.eval)(s.omega().as_slice(), s.offset()))
    }

    /// Evaluates at a unit normal without checks.
    #[inline]
    pub fn eval_unit(&self, omega: &[f64], p: f64) -> f64 {
        debug_assert_eq!(omega.len(), self.dim);
        (self.eval)(omega, p)
    }

    /// Total mass as seen through the evaluator: the mass of the half-space
    /// with offset `-inf`.
    pub fn total_mass(&self) -> f64 {
        let mut e1 = vec![0.0; self.dim];
        e1[0] = 1.0;
        self.eval_unit(&e1, f64::NEG_INFINITY)
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Query").field("dim", &self.dim).finish_non_exhaustive()
    }
}

pub fn make_query<M: Measure + 'static>(mu: M) -> Query {
    let dim = mu.dim();
    Query::new(dim, move |omega, p| mu.halfspace_mass_unit(omega, p))
}
