//! Numerical identity checks shared by the `verify` command: the Crofton
//! normalization, the inversion constant, and the link between half-space
//! masses and hyperplane integrals.

use serde::Serialize;

use crate::crofton::{crofton_distance, CroftonSampler, Estimate};
use crate::error::{invalid, Result};
use crate::geometry::Vector;
use crate::measures::{GridDensity, Measure};
use crate::radon::{radon_forward, PGrid};

/// Separating mass of `0` and `e_1` in R^n; should be 1.
pub fn crofton_unit(n: usize, samples: usize, seed: u64) -> Result<Estimate> {
    let s = CroftonSampler::new(n, samples, seed)?;
    crofton_distance(&s, &Vector::zeros(n), &Vector::unit(n, 0))
}

/// Radial bump `g(y) = (1 - |y - c|^2 / R^2)^k` on the ball, zero outside,
/// stored as a polynomial in `u = |y - c|^2`.
#[derive(Debug, Clone)]
pub struct RadialBump {
    n: usize,
    center: Vec<f64>,
    radius: f64,
    /// Coefficients of `g` in powers of `u`.
    coeffs: Vec<f64>,
}

impl RadialBump {
    pub fn new(n: usize, center: Vec<f64>, radius: f64, k: u32) -> Result<Self> {
        if center.len() != n || radius <= 0.0 {
            return invalid("bump needs a center in R^n and a positive radius");
        }
        // (1 - u / R^2)^k expanded binomially.
        let mut coeffs = Vec::with_capacity(k as usize + 1);
        let mut binom = 1.0;
        for j in 0..=k {
            if j > 0 {
                binom *= (k - j + 1) as f64 / j as f64;
            }
            coeffs.push(binom * (-1.0f64 / (radius * radius)).powi(j as i32));
        }
        Ok(RadialBump { n, center, radius, coeffs })
    }

    fn u(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.eval_poly(&self.coeffs, y)
    }

    /// Coefficients of `Delta^m g` on the ball: `Delta u^j = 2j (2j + n - 2) u^{j-1}`.
    pub fn laplacian_coeffs(&self, m: u32) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        for _ in 0..m {
            c = (1..c.len())
                .map(|j| c[j] * 2.0 * j as f64 * (2.0 * j as f64 + self.n as f64 - 2.0))
                .collect();
            if c.is_empty() {
                c.push(0.0);
            }
        }
        c
    }

    fn eval_poly(&self, coeffs: &[f64], y: &[f64]) -> f64 {
        let u = self.u(y);
        if u >= self.radius * self.radius {
            return 0.0;
        }
        coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `int (|y - x| - |x|) (Delta^m g)(y) dy` by the midpoint rule on a
    /// `cells^n` grid over the bounding cube of the ball.
    pub fn potential_pairing(&self, m: u32, x: &[f64], cells: usize) -> f64 {
        let lap = self.laplacian_coeffs(m);
        let h = 2.0 * self.radius / cells as f64;
        let total = cells.pow(self.n as u32);
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut y = vec![0.0; self.n];
        let mut acc = 0.0;
        for flat in 0..total {
            let mut rest = flat;
            for (i, yi) in y.iter_mut().enumerate() {
                let k = rest % cells;
                rest /= cells;
                *yi = self.center[i] - self.radius + h * (k as f64 + 0.5);
            }
            let d = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            acc += (d - xn) * self.eval_poly(&lap, &y);
        }
        acc * h.powi(self.n as i32)
    }
}

/// Worst `|mu(S) - int_p^inf J(omega, q) dq|` over the given directions and
/// offsets, with `J` from [`radon_forward`].
pub fn radon_halfspace_residual(
    f: &GridDensity,
    directions: &[Vector],
    p_grid: &PGrid,
    offsets: &[f64],
) -> Result<f64> {
    let sino = radon_forward(f, directions, p_grid)?;
    let mut worst = 0.0f64;
    for (d, omega) in directions.iter().enumerate() {
        for &p in offsets {
            let direct = f.halfspace_mass_unit(omega.as_slice(), p);
            worst = worst.max((direct - sino.cumulative(d, p)).abs());
        }
    }
    Ok(worst)
}

/// One row of a verification table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn absolute(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let residual = (value - expected).abs();
        CheckRow { name: name.into(), value, expected, residual, tolerance, pass: residual <= tolerance }
    }

    pub fn relative(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let residual = ((value - expected) / expected).abs();
        CheckRow { name: name.into(), value, expected, residual, tolerance, pass: residual <= tolerance }
    }
}
