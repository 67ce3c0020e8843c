//! Interpolation kernels: periodic linear, four-point Lagrange (cubic) and
//! monotone piecewise-cubic Hermite (Fritsch-Carlson), plus masked
//! finite-difference slopes.

use crate::grid::SpatialGrid;

/// Linear interpolation of periodic grid samples at an arbitrary `x`.
pub fn linear_periodic(values: &[f64], grid: &SpatialGrid, x: f64) -> f64 {
    let n = values.len();
    let s = (grid.wrap(x) - grid.x_min()) / grid.dx();
    let i = (s.floor() as usize).min(n - 1);
    let frac = s - i as f64;
    let j = (i + 1) % n;
    values[i] + frac * (values[j] - values[i])
}

/// Weights of the four-point Lagrange stencil at offsets `-1, 0, 1, 2` for
/// a fractional position `t` in `[0, 1)`.
#[inline]
pub fn cubic_weights(t: f64) -> [f64; 4] {
    let tm1 = t - 1.0;
    let tm2 = t - 2.0;
    let tp1 = t + 1.0;
    [
        -t * tm1 * tm2 / 6.0,
        tp1 * tm1 * tm2 / 2.0,
        -tp1 * t * tm2 / 2.0,
        tp1 * t * tm1 / 6.0,
    ]
}

/// Derivative at node `i` of the Lagrange interpolant through integer `offsets`.
fn node_derivative_weights(offsets: &[i64], i: usize) -> Vec<f64> {
    let oi = offsets[i] as f64;
    offsets
        .iter()
        .enumerate()
        .map(|(j, &oj)| {
            if j == i {
                offsets
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != i)
                    .map(|(_, &om)| 1.0 / (oi - om as f64))
                    .sum()
            } else {
                let oj = oj as f64;
                let mut num = 1.0;
                let mut den = 1.0;
                for (m, &om) in offsets.iter().enumerate() {
                    let om = om as f64;
                    if m != i && m != j {
                        num *= oi - om;
                    }
                    if m != j {
                        den *= oj - om;
                    }
                }
                num / den
            }
        })
        .collect()
}

/// Slope of `values` at every masked-in sample, from a Lagrange stencil of up
/// to `width` points kept inside the contiguous masked-in run (no wraparound).
/// Masked-out samples get slope zero.
pub fn masked_slope(values: &[f64], mask: &[bool], dx: f64, width: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut a = 0;
    while a < n {
        if !mask[a] {
            a += 1;
            continue;
        }
        let mut b = a;
        while b + 1 < n && mask[b + 1] {
            b += 1;
        }
        let len = b - a + 1;
        let w = width.min(len);
        if w >= 2 {
            for k in a..=b {
                let start = k.saturating_sub(w / 2).clamp(a, b + 1 - w);
                let offsets: Vec<i64> = (0..w as i64).collect();
                let weights = node_derivative_weights(&offsets, k - start);
                out[k] = weights.iter().zip(&values[start..start + w]).map(|(c, v)| c * v).sum::<f64>() / dx;
            }
        }
        a = b + 1;
    }
    out
}

/// Shape-preserving cubic through `(xs, ys)`; `xs` strictly increasing.
#[derive(Clone, Debug)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "pchip needs at least two nodes");
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { xs, ys, slopes }
    }

    pub fn first_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn last_x(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Value at `x`; callers handle points outside `[first_x, last_x]`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
