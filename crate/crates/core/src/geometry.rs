//! Points, closed half-spaces, sphere areas and seeded uniform sphere sampling.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// A point of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        Vector(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    /// The `i`-th standard basis vector of R^n.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| c * x).collect())
    }

    pub fn distance(&self, other: &Vector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(distance(&self.0, &other.0))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The closed half-space `{x : <omega, x> >= p}` with unit normal `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    omega: Vector,
    p: f64,
}

impl HalfSpace {
    /// Builds `{x : <normal, x> >= offset}`.
    ///
    /// A non-unit normal is rescaled to unit length together with the
    /// offset, so the represented set is unchanged.
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        if normal.dim() == 0 {
            return invalid("half-space normal must have dimension >= 1");
        }
        let len = normal.norm();
        if !(len.is_finite() && len > 0.0) || !offset.is_finite() {
            return invalid(format!("degenerate half-space normal {normal} / offset {offset}"));
        }
        Ok(HalfSpace {
            omega: normal.scaled(1.0 / len),
            p: offset / len,
        })
    }

    pub fn omega(&self) -> &Vector {
        &self.omega
    }

    pub fn offset(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.contains_slice(x.as_slice()))
    }

    /// Membership test without the dimension check.
    #[inline]
    pub fn contains_slice(&self, x: &[f64]) -> bool {
        dot(self.omega.as_slice(), x) >= self.p
    }

    /// The complementary closed half-space `{x : <-omega, x> >= -p}`.
    pub fn flipped(&self) -> HalfSpace {
        HalfSpace {
            omega: self.omega.scaled(-1.0),
            p: -self.p,
        }
    }
}

/// Surface area of the unit sphere S^k in R^{k+1}: 2 pi^{(k+1)/2} / Gamma((k+1)/2).
pub fn sphere_area(k: i64) -> Result<f64> {
    if k < 0 {
        return invalid(format!("sphere_area needs k >= 0, got {k}"));
    }
    let a = (k as f64 + 1.0) / 2.0;
    Ok(2.0 * PI.powf(a) / libm::tgamma(a))
}

/// SplitMix64 finalizer; derives independent stream seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fills `out` (length a multiple of `n`) with i.i.d. uniform unit vectors,
/// drawn as normalized standard Gaussian vectors.
pub(crate) fn fill_sphere<R: Rng>(rng: &mut R, n: usize, out: &mut [f64]) {
    for v in out.chunks_exact_mut(n) {
        loop {
            for c in v.iter_mut() {
                *c = rng.sample(StandardNormal);
            }
            let len = norm(v);
            if len > 1e-300 {
                v.iter_mut().for_each(|c| *c /= len);
                break;
            }
        }
    }
}

/// Flat row-major array of `count` uniform unit vectors in R^n.
pub fn sample_sphere_flat(n: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid("sphere sampling needs dimension n >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n * count];
    fill_sphere(&mut rng, n, &mut out);
    Ok(out)
}

/// `count` i.i.d. uniform unit vectors on S^{n-1}, deterministic in `seed`.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let flat = sample_sphere_flat(n, count, seed)?;
    Ok(flat.chunks_exact(n).map(|c| Vector(c.to_vec())).collect())
}

/// Golden-angle spiral of `count` nearly equal-area points on S^2.
///
/// Deterministic and far more even than i.i.d. samples, so direction
/// averages of smooth functions converge much faster than `1/sqrt(count)`.
pub fn fibonacci_sphere(count: usize) -> Vec<Vector> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            Vector(vec![r * t.cos(), r * t.sin(), z])
        })
        .collect()
}

/// `count` half-spaces with uniform normals and offsets uniform in
/// `[-radius, radius]`.
pub fn random_halfspaces(n: usize, count: usize, radius: f64, seed: u64) -> Result<Vec<HalfSpace>> {
    if n == 0 {
        return invalid("half-spaces need dimension n >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = vec![0.0; n];
    (0..count)
        .map(|_| {
            fill_sphere(&mut rng, n, &mut normal);
            let p = rng.random_range(-radius..=radius);
            HalfSpace::new(Vector(normal.clone()), p)
        })
        .collect()
}
