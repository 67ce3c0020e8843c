//! Strang-split time stepping for the lambda-interpolating Schrodinger equation
//!
//! ```text
//! i hbar dpsi/dt = [ -(hbar^2/2m) lap + V - lambda Q[psi] ] psi
//! ```
//!
//! One step is a half step of the local multiplier `exp(-i(V - lambda Q) dt/2hbar)`,
//! a full spectral kinetic step, and a second local half step. The local
//! factors leave `|psi|` untouched, so `Q` evaluated on the incoming state is
//! exact for the first half step; the closing half step refreshes `Q` by
//! fixed-point sweeps on the post-kinetic state.
//!
//! `Q` is treated explicitly, which is only stable for modes whose kinetic
//! phase per step stays below `pi`. Inside the stepper `Q` is therefore built
//! from the lower two thirds of the spectrum; smooth states carry nothing in
//! the discarded band.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_forward, fft_inverse, integrate, l2_norm, ComplexField1D, SpatialGrid};
use crate::hydro::{
    continuity_residual, decompose, energy_functional, hj_residual, quantum_potential_band_limited,
    MadelungFields, PhysicalParams, PotentialSpec, Regularization, DEFAULT_NODE_EPS, DEFAULT_Q_CAP,
};

/// Complex amplitude on a periodic grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    grid: SpatialGrid,
    psi: ComplexField1D,
    t: f64,
}

impl WaveState {
    /// Wraps samples without renormalizing. Samples must be finite.
    pub fn new(grid: SpatialGrid, psi: ComplexField1D, t: f64) -> Result<Self> {
        grid.check_len(psi.len(), "wave function")?;
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::config("wave function contains non-finite samples"));
        }
        Ok(Self { grid, psi, t })
    }

    /// Wraps samples and rescales them to unit norm.
    pub fn from_samples(grid: SpatialGrid, psi: ComplexField1D, t: f64) -> Result<Self> {
        let mut s = Self::new(grid, psi, t)?;
        let n = s.norm();
        if n <= 0.0 {
            return Err(Error::config("wave function has zero norm"));
        }
        let scale = 1.0 / n.sqrt();
        s.psi.iter_mut().for_each(|z| *z *= scale);
        Ok(s)
    }

    #[cfg(test)]
    pub(crate) fn from_samples_unchecked(grid: SpatialGrid, psi: ComplexField1D, t: f64) -> Self {
        Self { grid, psi, t }
    }

    /// Gaussian packet with density standard deviation `s0`, centre `x0` and
    /// mean momentum `p0`, normalized on the grid.
    pub fn gaussian(
        grid: SpatialGrid,
        x0: f64,
        p0: f64,
        s0: f64,
        params: &PhysicalParams,
    ) -> Result<Self> {
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::config(format!("packet width must be positive, got {s0}")));
        }
        let psi = grid
            .points()
            .iter()
            .map(|&x| gaussian_amplitude(x, x0, p0, s0, params.hbar()))
            .collect();
        Self::from_samples(grid, psi, 0.0)
    }

    /// Unit-norm `exp(ikx)`; `k` must fit an integer number of periods in the box.
    pub fn plane_wave(grid: SpatialGrid, k: f64, t: f64) -> Result<Self> {
        let periods = k * grid.length() / (2.0 * PI);
        if (periods - periods.round()).abs() > 1e-9 {
            return Err(Error::config(format!(
                "plane-wave wavenumber {k} is not commensurate with the periodic box"
            )));
        }
        let a = 1.0 / grid.length().sqrt();
        let psi = grid
            .points()
            .iter()
            .map(|&x| Complex64::from_polar(a, k * x))
            .collect();
        Self::new(grid, psi, t)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn center(&self) -> f64 {
        moments(&self.density(), &self.grid).0
    }

    /// Square root of the second central moment of the density.
    pub fn width(&self) -> f64 {
        moments(&self.density(), &self.grid).1
    }
}

pub(crate) fn gaussian_amplitude(x: f64, x0: f64, p0: f64, s0: f64, hbar: f64) -> Complex64 {
    let a = (2.0 * PI * s0 * s0).powf(-0.25);
    let u = x - x0;
    Complex64::from_polar(a * (-u * u / (4.0 * s0 * s0)).exp(), p0 * x / hbar)
}

/// `(mean, standard deviation)` of a density on the grid.
pub fn moments(rho: &[f64], grid: &SpatialGrid) -> (f64, f64) {
    let mass: f64 = rho.iter().sum();
    let mean = rho
        .iter()
        .enumerate()
        .map(|(k, r)| r * grid.x(k))
        .sum::<f64>()
        / mass;
    let var = rho
        .iter()
        .enumerate()
        .map(|(k, r)| r * (grid.x(k) - mean).powi(2))
        .sum::<f64>()
        / mass;
    (mean, var.sqrt())
}

/// `hbar_eff = hbar sqrt(1 - lambda)`: the Planck constant of the linear
/// equation whose Madelung dynamics coincide with the interpolating flow.
pub fn effective_hbar(params: &PhysicalParams) -> f64 {
    params.hbar() * (1.0 - params.lambda()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    /// Fixed-point sweeps refreshing `Q` for the closing half step.
    pub nonlinear_iters: usize,
    pub node_eps: f64,
    pub q_cap: f64,
    /// Evaluate `Q` even when `lambda = 0` (it is then multiplied by zero).
    pub always_evaluate_q: bool,
    /// Mutation switch for validation: reverses the sign of the `lambda Q`
    /// coupling. Never set outside sensitivity checks.
    #[serde(skip)]
    pub flip_quantum_potential: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            nonlinear_iters: 2,
            node_eps: DEFAULT_NODE_EPS,
            q_cap: DEFAULT_Q_CAP,
            always_evaluate_q: false,
            flip_quantum_potential: false,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn regularization(&self) -> Regularization {
        Regularization {
            node_eps: self.node_eps,
            q_cap: self.q_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.nonlinear_iters < 1 {
            return Err(Error::config("nonlinear_iters must be at least 1"));
        }
        if !(self.node_eps >= 0.0 && self.node_eps < 1.0) {
            return Err(Error::config("node_eps must lie in [0, 1)"));
        }
        if !(self.q_cap > 0.0) {
            return Err(Error::config("q_cap must be positive"));
        }
        Ok(())
    }
}

/// Fraction of the Nyquist wavenumber that feeds the quantum potential.
const Q_BAND: f64 = 2.0 / 3.0;

/// Largest step accepted by the aliasing guard: the kinetic phase of the
/// Nyquist mode may not exceed `2 pi` per step.
pub fn max_stable_dt(grid: &SpatialGrid, params: &PhysicalParams) -> f64 {
    4.0 * grid.dx() * grid.dx() * params.m() / (PI * params.hbar())
}

/// Result of one step: the renormalized state and the norm change the raw
/// step produced before renormalization.
#[derive(Clone, Debug)]
pub struct Step {
    pub state: WaveState,
    pub norm_drift: f64,
}

/// Precomputed factors for repeated steps on one grid.
#[derive(Clone, Debug)]
pub struct Propagator {
    grid: SpatialGrid,
    params: PhysicalParams,
    cfg: SolverConfig,
    dt: f64,
    potential: Vec<f64>,
    kinetic: Vec<Complex64>,
}

impl Propagator {
    pub fn new(
        grid: SpatialGrid,
        potential: &PotentialSpec,
        params: PhysicalParams,
        cfg: SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let limit = max_stable_dt(&grid, &params);
        if cfg.dt > limit {
            return Err(Error::config(format!(
                "dt = {} exceeds the aliasing guard {limit:.3e} for dx = {} and hbar = {}",
                cfg.dt,
                grid.dx(),
                params.hbar()
            )));
        }
        let v = potential.evaluate(&grid, params.m())?;
        Ok(Self::build(grid, v, params, cfg, cfg.dt))
    }

    fn build(grid: SpatialGrid, potential: Vec<f64>, params: PhysicalParams, cfg: SolverConfig, dt: f64) -> Self {
        let c = -params.hbar() * dt / (2.0 * params.m());
        let kinetic = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, c * k * k))
            .collect();
        Self {
            grid,
            params,
            cfg,
            dt,
            potential,
            kinetic,
        }
    }

    /// The same scheme stepping backwards in time.
    pub fn reversed(&self) -> Self {
        Self::build(self.grid, self.potential.clone(), self.params, self.cfg, -self.dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn uses_q(&self) -> bool {
        self.params.lambda() != 0.0 || self.cfg.always_evaluate_q
    }

    fn q_of(&self, psi: &[Complex64]) -> Result<Vec<f64>> {
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        quantum_potential_band_limited(
            &rho,
            &self.grid,
            &self.params,
            &self.cfg.regularization(),
            Some(Q_BAND),
        )
    }

    fn apply_local(&self, psi: &mut [Complex64], q: Option<&[f64]>) {
        let c = -0.5 * self.dt / self.params.hbar();
        let coupling = if self.cfg.flip_quantum_potential {
            -self.params.lambda()
        } else {
            self.params.lambda()
        };
        for (k, z) in psi.iter_mut().enumerate() {
            let mut w = self.potential[k];
            if let Some(q) = q {
                w -= coupling * q[k];
            }
            *z *= Complex64::from_polar(1.0, c * w);
        }
    }

    fn apply_kinetic(&self, psi: &mut [Complex64]) {
        fft_forward(psi);
        for (z, f) in psi.iter_mut().zip(&self.kinetic) {
            *z *= f;
        }
        fft_inverse(psi);
    }

    /// One Strang step on raw samples, without renormalization.
    fn raw_step(&self, psi: &mut [Complex64]) -> Result<()> {
        if self.uses_q() {
            let q0 = self.q_of(psi)?;
            self.apply_local(psi, Some(&q0));
            self.apply_kinetic(psi);
            let mut q_end = self.q_of(psi)?;
            let mut trial = psi.to_vec();
            for _ in 0..self.cfg.nonlinear_iters {
                trial.copy_from_slice(psi);
                self.apply_local(&mut trial, Some(&q_end));
                let refreshed = self.q_of(&trial)?;
                let change = refreshed
                    .iter()
                    .zip(&q_end)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / a.abs().max(1.0)));
                q_end = refreshed;
                if change <= 1e-14 {
                    break;
                }
            }
            self.apply_local(psi, Some(&q_end));
        } else {
            self.apply_local(psi, None);
            self.apply_kinetic(psi);
            self.apply_local(psi, None);
        }
        Ok(())
    }

    pub fn step(&self, state: &WaveState) -> Result<Step> {
        let before = state.norm();
        let mut psi = state.psi.clone();
        self.raw_step(&mut psi)?;
        let t = state.t + self.dt;
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numerical {
                t,
                reason: "non-finite wave function after step".into(),
            });
        }
        let after = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx();
        let scale = 1.0 / after.sqrt();
        psi.iter_mut().for_each(|z| *z *= scale);
        Ok(Step {
            state: WaveState {
                grid: self.grid,
                psi,
                t,
            },
            norm_drift: (after - before).abs(),
        })
    }
}

/// One interpolating step (see module docs).
pub fn step(
    state: &WaveState,
    potential: &PotentialSpec,
    params: &PhysicalParams,
    cfg: &SolverConfig,
) -> Result<Step> {
    Propagator::new(*state.grid(), potential, *params, *cfg)?.step(state)
}

/// Time axis of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
}

fn default_output_every() -> usize {
    100
}

impl TimeSpec {
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.output_every == 0 {
            return Err(Error::config("output_every must be at least 1"));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::config(format!(
                "t_end = {} is not an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub norm: f64,
    /// Largest pre-renormalization norm change of any step since the last snapshot.
    pub norm_drift: f64,
    pub energy: f64,
    pub width: f64,
    pub center: f64,
    pub hj_res_l2: f64,
    pub cont_res_l2: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub state: WaveState,
    pub fields: MadelungFields,
    pub diagnostics: Diagnostics,
}

/// Stepping driver holding the current state.
#[derive(Clone, Debug)]
pub struct Evolver {
    forward: Propagator,
    backward: Propagator,
    state: WaveState,
    drift_since_snapshot: f64,
}

impl Evolver {
    pub fn new(
        initial: WaveState,
        potential: &PotentialSpec,
        params: PhysicalParams,
        cfg: SolverConfig,
    ) -> Result<Self> {
        let forward = Propagator::new(*initial.grid(), potential, params, cfg)?;
        let backward = forward.reversed();
        Ok(Self {
            forward,
            backward,
            state: initial,
            drift_since_snapshot: 0.0,
        })
    }

    pub fn state(&self) -> &WaveState {
        &self.state
    }

    pub fn propagator(&self) -> &Propagator {
        &self.forward
    }

    /// Advances one step and returns its raw norm drift.
    pub fn advance(&mut self) -> Result<f64> {
        let Step { state, norm_drift } = self.forward.step(&self.state)?;
        self.state = state;
        self.drift_since_snapshot = self.drift_since_snapshot.max(norm_drift);
        Ok(norm_drift)
    }

    /// Diagnostics at the current time. Time derivatives for the residuals
    /// come from one step forward and one step back of the same scheme.
    pub fn snapshot(&mut self) -> Result<Snapshot> {
        let params = *self.forward.params();
        let reg = self.forward.config().regularization();
        let fields = decompose(&self.state, &params, reg.node_eps)?;
        let plus = self.forward.step(&self.state)?.state;
        let minus = self.backward.step(&self.state)?.state;
        let dt = self.forward.dt();
        let hbar = params.hbar();
        let ds_dt: Vec<f64> = plus
            .psi()
            .iter()
            .zip(minus.psi())
            .map(|(a, b)| hbar * (a * b.conj()).arg() / (2.0 * dt))
            .collect();
        let drho_dt: Vec<f64> = plus
            .psi()
            .iter()
            .zip(minus.psi())
            .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()) / (2.0 * dt))
            .collect();
        let grid = *self.state.grid();
        let v = self.forward.potential();
        let hj = hj_residual(&fields, v, &params, &reg, &ds_dt)?;
        let cont = continuity_residual(&fields, &params, &drho_dt)?;
        let (center, width) = moments(&fields.rho, &grid);
        let diagnostics = Diagnostics {
            t: self.state.t(),
            norm: integrate(&fields.rho, &grid)?,
            norm_drift: self.drift_since_snapshot,
            energy: energy_functional(&fields, v, &params)?,
            width,
            center,
            hj_res_l2: l2_norm(&hj, &grid),
            cont_res_l2: l2_norm(&cont, &grid),
        };
        self.drift_since_snapshot = 0.0;
        let all_finite = [
            diagnostics.norm,
            diagnostics.energy,
            diagnostics.width,
            diagnostics.center,
            diagnostics.hj_res_l2,
            diagnostics.cont_res_l2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Numerical {
                t: diagnostics.t,
                reason: "non-finite diagnostics".into(),
            });
        }
        Ok(Snapshot {
            state: self.state.clone(),
            fields,
            diagnostics,
        })
    }
}

/// Runs `time.steps()` steps, snapshotting every `output_every` steps and at
/// the final time.
pub fn evolve(
    initial: WaveState,
    potential: &PotentialSpec,
    params: PhysicalParams,
    cfg: SolverConfig,
    time: &TimeSpec,
) -> Result<Vec<Snapshot>> {
    evolve_with(initial, potential, params, cfg, time, |_| Ok(()))
}

/// As [`evolve`], calling `on_step` with the state after every step (and once
/// with the initial state).
pub fn evolve_with(
    initial: WaveState,
    potential: &PotentialSpec,
    params: PhysicalParams,
    cfg: SolverConfig,
    time: &TimeSpec,
    mut on_step: impl FnMut(&WaveState) -> Result<()>,
) -> Result<Vec<Snapshot>> {
    let steps = time.steps()?;
    let cfg = SolverConfig { dt: time.dt, ..cfg };
    let mut ev = Evolver::new(initial, potential, params, cfg)?;
    on_step(ev.state())?;
    let mut out = vec![ev.snapshot()?];
    for k in 1..=steps {
        ev.advance()?;
        on_step(ev.state())?;
        if k % time.output_every == 0 || k == steps {
            out.push(ev.snapshot()?);
        }
    }
    Ok(out)
}
