//! Analytic test measures: isotropic Gaussians with closed-form half-space
//! masses and densities.

use std::f64::consts::{PI, SQRT_2};

use crate::geometry::{dot, Vector};
use crate::measures::{GridDensity, GridSpec, Query};

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Isotropic Gaussian measure `mass * N(mean, sigma^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vector,
    pub sigma: f64,
    pub mass: f64,
}

impl Gaussian {
    pub fn standard(dim: usize) -> Self {
        Gaussian { mean: Vector::zeros(dim), sigma: 1.0, mass: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let n = self.dim() as f64;
        let r2: f64 = x
            .iter()
            .zip(self.mean.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let s2 = self.sigma * self.sigma;
        self.mass * (-0.5 * r2 / s2).exp() / (2.0 * PI * s2).powf(n / 2.0)
    }

    /// Exact half-space masses.
    pub fn query(&self) -> Query {
        let g = self.clone();
        Query::new(self.dim(), move |omega, p| {
            let t = (p - dot(omega, g.mean.as_slice())) / g.sigma;
            g.mass * (1.0 - normal_cdf(t))
        })
    }

    pub fn grid(&self, spec: GridSpec) -> GridDensity {
        GridDensity::from_fn(spec, |x| self.density(x))
    }
}

/// Sum of Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture(pub Vec<Gaussian>);

impl GaussianMixture {
    pub fn density(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|g| g.density(x)).sum()
    }

    pub fn query(&self) -> Query {
        let parts: Vec<Query> = self.0.iter().map(Gaussian::query).collect();
        let dim = self.0.first().map(Gaussian::dim).unwrap_or(1);
        Query::new(dim, move |omega, p| parts.iter().map(|q| q.eval_unit(omega, p)).sum())
    }

    pub fn grid(&self, spec: GridSpec) -> GridDensity {
        GridDensity::from_fn(spec, |x| self.density(x))
    }
}
