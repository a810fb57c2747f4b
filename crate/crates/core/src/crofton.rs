//! The isometry-invariant measure on closed half-spaces and Monte Carlo
//! integration against it.
//!
//! The measure is `alpha_n` times the pushforward of (sphere area x Lebesgue)
//! under `(omega, p) -> {x : <omega, x> >= p}`. For a fixed direction the
//! offsets `p` separating two points form an interval, so the `p` integral is
//! always done in closed form or by quadrature and only `omega` is sampled.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::geometry::{dot, sample_sphere_flat, sphere_area, Vector};

/// Normalization used on the line, where the "sphere" is `{-1, +1}` with
/// counting measure: half-spaces separating 0 from 1 then have mass 1.
pub const ALPHA_ONE_DIM: f64 = 0.5;

/// `alpha_n = (n - 1) / (2 * beta_{n-2})`, the constant for which the
/// half-spaces separating two points at unit distance have total mass 1.
pub fn alpha_n(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid(format!("alpha_n is defined for n >= 2, got {n}"));
    }
    Ok((n as f64 - 1.0) / (2.0 * sphere_area(n as i64 - 2)?))
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0 }
    }

    /// Mean and standard error of `scale * samples`.
    pub fn from_samples(scale: f64, samples: impl IntoIterator<Item = f64>) -> Self {
        let mut count = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for v in samples {
            count += 1;
            let d = v - mean;
            mean += d / count as f64;
            m2 += d * (v - mean);
        }
        if count == 0 {
            return Estimate::exact(0.0);
        }
        let se = if count > 1 {
            (m2 / (count as f64 - 1.0) / count as f64).sqrt()
        } else {
            0.0
        };
        Estimate { value: scale * mean, std_error: scale.abs() * se }
    }
}

/// Seeded sampler for the half-space measure in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CroftonSampler {
    n: usize,
    alpha: f64,
    seed: u64,
    samples: usize,
}

impl CroftonSampler {
    /// `samples` is the number of directions per estimate; ignored for n = 1,
    /// where both directions are used exactly.
    pub fn new(n: usize, samples: usize, seed: u64) -> Result<Self> {
        let alpha = match n {
            0 => return invalid("dimension must be >= 1"),
            1 => ALPHA_ONE_DIM,
            _ => alpha_n(n)?,
        };
        if n > 1 && samples == 0 {
            return invalid("Monte Carlo estimates need at least one direction");
        }
        Ok(CroftonSampler { n, alpha, seed, samples })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        CroftonSampler { seed, ..self.clone() }
    }

    pub fn with_samples(&self, samples: usize) -> Self {
        CroftonSampler { samples, ..self.clone() }
    }

    /// `alpha * |S^{n-1}|`: the factor turning a direction average into a
    /// measure integral.
    pub fn scale(&self) -> f64 {
        self.alpha * sphere_area(self.n as i64 - 1).expect("n >= 1")
    }

    /// Directions used by every estimate of this sampler, flat row-major.
    pub fn directions(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![1.0, -1.0];
        }
        sample_sphere_flat(self.n, self.samples, self.seed).expect("n >= 1")
    }

    pub fn is_exact(&self) -> bool {
        self.n == 1
    }

    /// Monte Carlo estimate of `int g(omega) d(alpha * Omega)`.
    pub fn integrate_directions(&self, mut g: impl FnMut(&[f64]) -> f64) -> Estimate {
        let dirs = self.directions();
        let scale = self.scale();
        if self.is_exact() {
            let sum: f64 = dirs.chunks_exact(1).map(&mut g).sum();
            return Estimate::exact(scale * sum / 2.0);
        }
        Estimate::from_samples(scale, dirs.chunks_exact(self.n).map(g))
    }
}

/// Mass of the half-spaces separating `x` and `y`, i.e.
/// `int |1_S(x) - 1_S(y)|^2 dsigma(S)`; its expectation is `|x - y|`.
pub fn crofton_distance(sampler: &CroftonSampler, x: &Vector, y: &Vector) -> Result<Estimate> {
    check_dim(x.dim(), y.dim())?;
    check_dim(sampler.dim(), x.dim())?;
    let diff: Vec<f64> = (x - y).into_inner();
    // For fixed omega the separating offsets form an interval of length
    // |<omega, x - y>|.
    Ok(sampler.integrate_directions(|omega| dot(omega, &diff).abs()))
}
