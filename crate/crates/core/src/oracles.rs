//! Reference solutions used to check the solvers.
//!
//! Nothing here calls into the solver or Madelung modules. The linear
//! split-step integrator plans its own transforms and never evaluates a
//! quantum potential.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Density standard deviation of a free Gaussian packet,
/// `s(t) = s0 sqrt(1 + (hbar t / 2 m s0^2)^2)`.
pub fn free_gaussian_width(s0: f64, hbar: f64, m: f64, t: f64) -> f64 {
    let a = hbar * t / (2.0 * m * s0 * s0);
    s0 * (1.0 + a * a).sqrt()
}

/// Exact free evolution of `exp(-(x-x0)^2/4s0^2 + i p0 x/hbar)` (unit norm on the line).
pub fn free_gaussian_psi(x: f64, t: f64, x0: f64, p0: f64, s0: f64, hbar: f64, m: f64) -> Complex64 {
    // complex width: s_t = s0 (1 + i hbar t / 2 m s0^2)
    let st = Complex64::new(s0, hbar * t / (2.0 * m * s0));
    let xc = x - x0 - p0 * t / m;
    let norm = Complex64::new(2.0 * PI, 0.0).powf(-0.25) / st.sqrt();
    let gauss = (-(xc * xc) / (4.0 * s0 * st)).exp();
    let phase = Complex64::from_polar(1.0, (p0 * (x - x0) - p0 * p0 * t / (2.0 * m)) / hbar + p0 * x0 / hbar);
    norm * gauss * phase
}

/// Centre of a coherent state in a harmonic well released from rest at `x0`.
pub fn coherent_center(x0: f64, omega: f64, t: f64) -> f64 {
    x0 * (omega * t).cos()
}

/// Linear Schrodinger split-step on a periodic box, potential `v` sampled on
/// the grid. Returns the density after every `record_every` steps, starting
/// with the initial one.
pub fn linear_split_step_densities(
    psi0: &[Complex64],
    v: &[f64],
    length: f64,
    hbar: f64,
    m: f64,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Vec<Vec<f64>> {
    let n = psi0.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let kinetic: Vec<Complex64> = (0..n)
        .map(|j| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * PI * jj / length;
            Complex64::from_polar(1.0 / n as f64, -hbar * k * k * dt / (2.0 * m))
        })
        .collect();
    let half: Vec<Complex64> = v
        .iter()
        .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
        .collect();
    let density = |psi: &[Complex64]| psi.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>();

    let mut psi = psi0.to_vec();
    let mut out = vec![density(&psi)];
    for s in 1..=steps {
        psi.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        fwd.process(&mut psi);
        psi.iter_mut().zip(&kinetic).for_each(|(z, k)| *z *= k);
        inv.process(&mut psi);
        psi.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        if s % record_every == 0 {
            out.push(density(&psi));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_packet_width_matches_formula() {
        let (s0, hbar, m, t) = (0.8, 1.0, 1.3, 1.7);
        let n = 4096;
        let (a, b) = (-40.0, 40.0);
        let dx = (b - a) / n as f64;
        let rho: Vec<f64> = (0..n)
            .map(|k| free_gaussian_psi(a + k as f64 * dx, t, 0.5, 0.9, s0, hbar, m).norm_sqr())
            .collect();
        let mass: f64 = rho.iter().sum::<f64>() * dx;
        let mean: f64 = (0..n).map(|k| rho[k] * (a + k as f64 * dx)).sum::<f64>() * dx;
        let var: f64 = (0..n).map(|k| rho[k] * (a + k as f64 * dx - mean).powi(2)).sum::<f64>() * dx;
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((mean - (0.5 + 0.9 * t / m)).abs() < 1e-10);
        assert!((var.sqrt() - free_gaussian_width(s0, hbar, m, t)).abs() < 1e-10);
    }

    #[test]
    fn width_formula_endpoints() {
        assert_eq!(free_gaussian_width(1.0, 1.0, 1.0, 0.0), 1.0);
        assert!((free_gaussian_width(1.0, 1.0, 1.0, 2.0) - 2f64.sqrt()).abs() < 1e-15);
    }
}
