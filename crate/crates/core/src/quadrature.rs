//! Gauss–Legendre rules and a bisecting adaptive integrator built on them.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return invalid("Gauss-Legendre order must be >= 1");
        }
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Oriented integral over `[a, b]` (`b < a` flips the sign).
    #[inline]
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Adaptive bisection: a panel is accepted when its estimate agrees with
    /// the sum over its halves to within `tol * width / (b - a)`, or when
    /// `max_depth` is reached. Step discontinuities drive the refinement down
    /// to the depth limit only on the panels that contain them.
    ///
    /// A step lying between a half's end and its outermost node can be
    /// invisible to both rules, so halves whose end values jump away from
    /// their outer nodes force a split as well.
    pub fn integrate_adaptive(
        &self,
        a: f64,
        b: f64,
        tol: f64,
        max_depth: u32,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let density = tol / (hi - lo);
        let whole = self.integrate(lo, hi, &mut f);
        let mut stack = vec![(lo, hi, whole, 0u32)];
        let mut total = 0.0;
        while let Some((l, r, est, depth)) = stack.pop() {
            let m = 0.5 * (l + r);
            let left = self.integrate(l, m, &mut f);
            let right = self.integrate(m, r, &mut f);
            let refined = left + right;
            let settled = (refined - est).abs() <= density * (r - l)
                && !self.edge_jump(l, m, density, &mut f)
                && !self.edge_jump(m, r, density, &mut f);
            if depth >= max_depth || settled {
                total += refined;
            } else {
                stack.push((m, r, right, depth + 1));
                stack.push((l, m, left, depth + 1));
            }
        }
        sign * total
    }

    /// True when `f` at either end of `[l, r]` departs from the outermost
    /// node value by more than the spacing of the two outermost nodes would
    /// explain for a smooth function.
    fn edge_jump(&self, l: f64, r: f64, floor: f64, f: &mut impl FnMut(f64) -> f64) -> bool {
        let k = self.nodes.len();
        if k < 2 {
            return false;
        }
        let half = 0.5 * (r - l);
        let mid = 0.5 * (l + r);
        let (x1, x2) = (self.nodes[k - 1], self.nodes[k - 2]);
        [(r, 1.0), (l, -1.0)].into_iter().any(|(end, s)| {
            let outer = f(mid + s * half * x1);
            let inner = f(mid + s * half * x2);
            (f(end) - outer).abs() > (outer - inner).abs() + floor
        })
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
