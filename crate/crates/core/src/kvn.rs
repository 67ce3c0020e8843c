//! Koopman-von Neumann amplitude on an `(x, p)` grid.
//!
//! The amplitude is carried along the Hamiltonian flow of
//! `H = p^2/2m + V(x)`: both `f = |Psi|^2` and the phase `phi = arg Psi` obey
//! `d/dt + {., H} = 0`. Steps are semi-Lagrangian: each grid node looks up
//! the amplitude at the foot of its characteristic, traced back one step
//! with velocity Verlet, using a 4x4 Lagrange (bicubic) stencil.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{gradient, ComplexField2D, Field2D, PhaseSpaceGrid, RealField2D};
use crate::hydro::{PhysicalParams, PotentialSampler, PotentialSpec};
use crate::interp::cubic_weights;
use crate::solver::WaveState;

/// Largest foot displacement per step, in cells, accepted by [`liouville_step`].
pub const MAX_FOOT_CELLS: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    m: f64,
    potential: PotentialSampler,
}

impl Hamiltonian {
    pub fn new(potential: &PotentialSpec, m: f64, grid: &PhaseSpaceGrid) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::config(format!("mass must be positive, got {m}")));
        }
        Ok(Self {
            m,
            potential: potential.sampler(grid.x_axis(), m)?,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn energy(&self, x: f64, p: f64) -> f64 {
        0.5 * p * p / self.m + self.potential.value(x)
    }

    pub fn force(&self, x: f64) -> f64 {
        -self.potential.slope(x)
    }

    /// One velocity-Verlet step of Hamilton's equations (negative `dt` runs backwards).
    #[inline]
    pub fn verlet(&self, x: f64, p: f64, dt: f64) -> (f64, f64) {
        let p_half = p + 0.5 * dt * self.force(x);
        let x_new = x + dt * p_half / self.m;
        let p_new = p_half + 0.5 * dt * self.force(x_new);
        (x_new, p_new)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceAmplitude {
    pub grid: PhaseSpaceGrid,
    pub psi: ComplexField2D,
    pub t: f64,
}

impl PhaseSpaceAmplitude {
    pub fn new(grid: PhaseSpaceGrid, psi: ComplexField2D, t: f64) -> Result<Self> {
        if !psi.matches(&grid) {
            return Err(Error::config("amplitude shape does not match its phase-space grid"));
        }
        if psi.as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::config("amplitude contains non-finite samples"));
        }
        Ok(Self { grid, psi, t })
    }

    /// `Psi = sqrt(f)` with zero phase, rescaled so that `sum |Psi|^2 dx dp = 1`.
    pub fn from_density(grid: PhaseSpaceGrid, f: &RealField2D) -> Result<Self> {
        if !f.matches(&grid) {
            return Err(Error::config("density shape does not match its phase-space grid"));
        }
        if f.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::config("phase-space density contains non-finite samples"));
        }
        let mass: f64 = f.as_slice().iter().map(|v| v.max(0.0)).sum::<f64>() * grid.cell_area();
        if !(mass > 0.0) {
            return Err(Error::config("phase-space density has no mass"));
        }
        let psi = f.map(|v| Complex64::new((v.max(0.0) / mass).sqrt(), 0.0));
        Self::new(grid, psi, 0.0)
    }

    /// Gaussian blob in `f` with standard deviations `sx`, `sp` about `(x0, p0)`.
    pub fn gaussian(grid: PhaseSpaceGrid, x0: f64, p0: f64, sx: f64, sp: f64) -> Result<Self> {
        let f = Field2D::from_fn(&grid, |x, p| {
            let u = (x - x0) / sx;
            let w = (p - p0) / sp;
            (-0.5 * (u * u + w * w)).exp()
        });
        Self::from_density(grid, &f)
    }

    pub fn norm(&self) -> f64 {
        self.psi.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn density(&self) -> RealField2D {
        self.psi.map(|z| z.norm_sqr())
    }

    /// Mean position and momentum of `f`.
    pub fn center(&self) -> (f64, f64) {
        let f = self.density();
        let mut m = (0.0, 0.0, 0.0);
        for ix in 0..self.grid.n_x() {
            let x = self.grid.x_axis().x(ix);
            for jp in 0..self.grid.n_p() {
                let w = f.get(ix, jp);
                m.0 += w;
                m.1 += w * x;
                m.2 += w * self.grid.p(jp);
            }
        }
        (m.1 / m.0, m.2 / m.0)
    }

    /// Multiplies by `exp(i theta(x, p))` pointwise.
    pub fn rephased(&self, theta: &RealField2D) -> Result<Self> {
        if !theta.matches(&self.grid) {
            return Err(Error::config("phase field shape does not match the grid"));
        }
        let data = self
            .psi
            .as_slice()
            .iter()
            .zip(theta.as_slice())
            .map(|(z, th)| z * Complex64::from_polar(1.0, *th))
            .collect();
        Self::new(self.grid, Field2D::from_vec(&self.grid, data)?, self.t)
    }
}

/// Modulus-squared and wrapped phase of a KvN amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpacePolar {
    pub f: RealField2D,
    pub phi: RealField2D,
}

pub fn kvn_polar(amp: &PhaseSpaceAmplitude) -> PhaseSpacePolar {
    PhaseSpacePolar {
        f: amp.psi.map(|z| z.norm_sqr()),
        phi: amp.psi.map(|z| z.arg()),
    }
}

/// Expectation `sum A f dx dp` of a multiplicative classical observable.
pub fn observable_expectation(amp: &PhaseSpaceAmplitude, observable: &RealField2D) -> Result<f64> {
    if !observable.matches(&amp.grid) {
        return Err(Error::config("observable shape does not match the grid"));
    }
    Ok(amp
        .psi
        .as_slice()
        .iter()
        .zip(observable.as_slice())
        .map(|(z, a)| a * z.norm_sqr())
        .sum::<f64>()
        * amp.grid.cell_area())
}

/// Checks that no characteristic foot moves more than [`MAX_FOOT_CELLS`].
fn check_foot_guard(grid: &PhaseSpaceGrid, ham: &Hamiltonian, dt: f64) -> Result<()> {
    let mut worst: f64 = 0.0;
    for ix in 0..grid.n_x() {
        let x = grid.x_axis().x(ix);
        for jp in 0..grid.n_p() {
            let p = grid.p(jp);
            let (xf, pf) = ham.verlet(x, p, -dt);
            worst = worst
                .max((xf - x).abs() / grid.dx())
                .max((pf - p).abs() / grid.dp());
        }
    }
    if worst > MAX_FOOT_CELLS {
        return Err(Error::config(format!(
            "dt = {dt} moves characteristic feet {worst:.2} cells (limit {MAX_FOOT_CELLS})"
        )));
    }
    Ok(())
}

/// Semi-Lagrangian step `Psi(z, t + dt) = Psi(Phi_{-dt}(z), t)`.
///
/// Feet that leave the momentum range, and stencil points beyond it, read
/// zero. The x direction is periodic.
pub fn liouville_step(amp: &PhaseSpaceAmplitude, ham: &Hamiltonian, dt: f64) -> Result<PhaseSpaceAmplitude> {
    let grid = amp.grid;
    check_foot_guard(&grid, ham, dt)?;
    let (nx, np) = (grid.n_x(), grid.n_p());
    let xg = *grid.x_axis();
    let src = &amp.psi;

    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    out.par_chunks_mut(np).enumerate().for_each(|(ix, row)| {
        let x = xg.x(ix);
        for (jp, cell) in row.iter_mut().enumerate() {
            let (xf, pf) = ham.verlet(x, grid.p(jp), -dt);
            let r = (pf - grid.p_min()) / grid.dp();
            if r < 0.0 || r > (np - 1) as f64 {
                continue;
            }
            let s = (xg.wrap(xf) - xg.x_min()) / xg.dx();
            let i0 = s.floor();
            let j0 = r.floor();
            let wx = cubic_weights(s - i0);
            let wp = cubic_weights(r - j0);
            let (i0, j0) = (i0 as i64, j0 as i64);
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, wxa) in wx.iter().enumerate() {
                let i = (i0 + a as i64 - 1).rem_euclid(nx as i64) as usize;
                for (b, wpb) in wp.iter().enumerate() {
                    let j = j0 + b as i64 - 1;
                    if j < 0 || j >= np as i64 {
                        continue;
                    }
                    acc += src.get(i, j as usize) * (wxa * wpb);
                }
            }
            *cell = acc;
        }
    });
    let psi = Field2D::from_vec(&grid, out)?;
    if psi.as_slice().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical {
            t: amp.t + dt,
            reason: "non-finite KvN amplitude".into(),
        });
    }
    Ok(PhaseSpaceAmplitude {
        grid,
        psi,
        t: amp.t + dt,
    })
}

/// Pointwise `df/dt + (p/m) df/dx - V'(x) df/dp` at the interior snapshots,
/// combined as the RMS over time of the phase-space L2 norm.
///
/// Time derivatives are central differences over snapshots spaced `dt`
/// apart; x derivatives are spectral, p derivatives central differences with
/// zero padding beyond the momentum range.
pub fn liouville_residual(
    f_snapshots: &[RealField2D],
    ham: &Hamiltonian,
    grid: &PhaseSpaceGrid,
    dt: f64,
) -> Result<f64> {
    if f_snapshots.len() < 3 {
        return Err(Error::config("the Liouville residual needs at least three snapshots"));
    }
    if f_snapshots.iter().any(|f| !f.matches(grid)) {
        return Err(Error::config("snapshot shape does not match the grid"));
    }
    let (nx, np) = (grid.n_x(), grid.n_p());
    let mut total = 0.0;
    for k in 1..f_snapshots.len() - 1 {
        let f = &f_snapshots[k];
        let mut dfdx = vec![0.0; grid.len()];
        for jp in 0..np {
            let column: Vec<f64> = (0..nx).map(|ix| f.get(ix, jp)).collect();
            for (ix, d) in gradient(&column, grid.x_axis())?.into_iter().enumerate() {
                dfdx[ix * np + jp] = d;
            }
        }
        let mut sq = 0.0;
        for ix in 0..nx {
            let x = grid.x_axis().x(ix);
            let slope = -ham.force(x);
            for jp in 0..np {
                let up = if jp + 1 < np { f.get(ix, jp + 1) } else { 0.0 };
                let down = if jp > 0 { f.get(ix, jp - 1) } else { 0.0 };
                let dfdp = (up - down) / (2.0 * grid.dp());
                let dfdt = (f_snapshots[k + 1].get(ix, jp) - f_snapshots[k - 1].get(ix, jp)) / (2.0 * dt);
                let r = dfdt + grid.p(jp) / ham.m() * dfdx[ix * np + jp] - slope * dfdp;
                sq += r * r;
            }
        }
        total += sq * grid.cell_area();
    }
    Ok((total / (f_snapshots.len() - 2) as f64).sqrt())
}

/// Coherent-state window width `sqrt(hbar / 2 m omega_ref)`.
pub fn coherent_width(params: &PhysicalParams, omega_ref: f64) -> f64 {
    (params.hbar() / (2.0 * params.m() * omega_ref)).sqrt()
}

/// Husimi distribution `|<g_{x0,p0}|psi>|^2 / 2 pi hbar` on `grid2d`,
/// normalized to unit mass on the grid.
///
/// The window `g` is a Gaussian whose density has standard deviation
/// `s_coh`. The phase-space x axis must decimate the state's grid.
pub fn husimi(
    state: &WaveState,
    params: &PhysicalParams,
    grid2d: &PhaseSpaceGrid,
    s_coh: f64,
) -> Result<RealField2D> {
    if !(s_coh.is_finite() && s_coh > 0.0) {
        return Err(Error::config(format!("coherent width must be positive, got {s_coh}")));
    }
    let sg = *state.grid();
    grid2d.columns_of(&sg)?;
    let hbar = params.hbar();
    let np = grid2d.n_p();
    let half_window = ((12.0 * s_coh / sg.dx()).ceil() as usize).min(sg.n() / 2);
    let norm_g = (2.0 * PI * s_coh * s_coh).powf(-0.25);
    let psi = state.psi();

    let mut data = vec![0.0; grid2d.len()];
    data.par_chunks_mut(np).enumerate().for_each(|(ix, row)| {
        let x0 = grid2d.x_axis().x(ix);
        let centre = ((x0 - sg.x_min()) / sg.dx()).round() as i64;
        let mut acc = vec![Complex64::new(0.0, 0.0); np];
        for off in -(half_window as i64)..=(half_window as i64) {
            let k = (centre + off).rem_euclid(sg.n() as i64) as usize;
            let x = x0 + (centre + off) as f64 * sg.dx() + sg.x_min() - x0;
            let u = x - x0;
            let w = norm_g * (-u * u / (4.0 * s_coh * s_coh)).exp();
            if w == 0.0 {
                continue;
            }
            let mut phase = Complex64::from_polar(w, -grid2d.p_min() * x / hbar) * psi[k];
            let ratio = Complex64::from_polar(1.0, -grid2d.dp() * x / hbar);
            for a in acc.iter_mut() {
                *a += phase;
                phase *= ratio;
            }
        }
        for (cell, a) in row.iter_mut().zip(&acc) {
            *cell = (a * sg.dx()).norm_sqr() / (2.0 * PI * hbar);
        }
    });
    let mut field = Field2D::from_vec(grid2d, data)?;
    let mass = field.integrate(grid2d);
    if !(mass > 0.0) {
        return Err(Error::config("Husimi distribution has no mass on the phase-space grid"));
    }
    field.as_mut_slice().iter_mut().for_each(|v| *v /= mass);
    Ok(field)
}
