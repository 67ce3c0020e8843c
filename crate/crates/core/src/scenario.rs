//! Scenario files: JSON, one scenario per file, unknown keys rejected.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseSpaceGrid, SpatialGrid};
use crate::hydro::{PhysicalParams, PotentialSpec, DEFAULT_NODE_EPS, DEFAULT_Q_CAP};
use crate::sheets::{LagrangianSheet, SheetMixture};
use crate::solver::{gaussian_amplitude, SolverConfig, TimeSpec, WaveState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

/// Phase-space sampling. `n_x` defaults to `min(n, 128)` and must divide the
/// spatial point count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    pub n_p: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Write a phase-space frame every this many summary snapshots.
    #[serde(default = "one")]
    pub every: usize,
    /// Ridge width of the sheet projection; defaults to four momentum cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_width: Option<f64>,
    /// Coherent-state width of the Husimi window; defaults to `sqrt(hbar / 2m)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_coh: Option<f64>,
    /// Replace negative values of the interpolated phase-space density by zero.
    #[serde(default)]
    pub clamp: bool,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub x0: f64,
    pub p0: f64,
    pub s0: f64,
    /// Complex amplitude `amplitude * exp(i phase)` in a superposition.
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetSpec {
    pub x0: f64,
    pub p0: f64,
    pub s0: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian { x0: f64, p0: f64, s0: f64 },
    Superposition { packets: Vec<PacketSpec> },
    PlaneWave { k: f64 },
    Mixture { sheets: Vec<SheetSpec> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
}

fn default_output_every() -> usize {
    100
}

/// Numerical controls of the wave solver; the step comes from `time.dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub nonlinear_iters: usize,
    pub node_eps: f64,
    pub q_cap: f64,
    pub always_evaluate_q: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            nonlinear_iters: 2,
            node_eps: DEFAULT_NODE_EPS,
            q_cap: DEFAULT_Q_CAP,
            always_evaluate_q: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Total particle count, seeded at density quantiles.
    pub count: usize,
    /// Solver steps between velocity snapshots.
    #[serde(default = "default_velocity_every")]
    pub velocity_every: usize,
}

fn default_velocity_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub physics: PhysicsSection,
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_space: Option<PhaseSpaceSection>,
    #[serde(default = "free")]
    pub potential: PotentialSpec,
    pub initial: InitialSpec,
    pub time: TimeSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySection>,
    /// Default output directory when the command line gives none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn free() -> PotentialSpec {
    PotentialSpec::Free
}

/// Relative density at the box edge above which a warning is logged.
const EDGE_DENSITY_WARN: f64 = 1e-10;
/// Largest phase-space mass allowed within three cells of the momentum edges.
pub const P_EDGE_MASS_LIMIT: f64 = 1e-10;

impl Scenario {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("line {}, column {}: {}", e.line(), e.column(), e),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn params(&self) -> Result<PhysicalParams> {
        let p = &self.physics;
        PhysicalParams::resolve(p.m, p.sigma, p.hbar, p.lambda)
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.n, self.grid.x_min, self.grid.x_max)
    }

    pub fn phase_space_grid(&self) -> Result<Option<PhaseSpaceGrid>> {
        let Some(ps) = &self.phase_space else {
            return Ok(None);
        };
        let n_x = ps.n_x.unwrap_or(self.grid.n.min(128));
        let x_axis = SpatialGrid::new(n_x, self.grid.x_min, self.grid.x_max)?;
        let grid = PhaseSpaceGrid::new(x_axis, ps.n_p, ps.p_min, ps.p_max)?;
        grid.columns_of(&self.spatial_grid()?)?;
        Ok(Some(grid))
    }

    pub fn time_spec(&self) -> TimeSpec {
        TimeSpec {
            dt: self.time.dt,
            t_end: self.time.t_end,
            output_every: self.time.output_every,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.time.dt,
            nonlinear_iters: self.solver.nonlinear_iters,
            node_eps: self.solver.node_eps,
            q_cap: self.solver.q_cap,
            always_evaluate_q: self.solver.always_evaluate_q,
            flip_quantum_potential: false,
        }
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self.initial, InitialSpec::Mixture { .. })
    }

    /// Copy with `lambda` replaced; sigma and hbar are pinned to their resolved values.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut out = self.clone();
        out.physics.lambda = lambda;
        out.validate()?;
        Ok(out)
    }

    /// Same scenario with both `sigma` and `hbar` spelled out.
    pub fn resolved(&self) -> Result<Self> {
        let params = self.params()?;
        let mut out = self.clone();
        out.physics.sigma = Some(params.sigma());
        out.physics.hbar = Some(params.hbar());
        Ok(out)
    }

    /// Re-checks every invariant the solvers rely on.
    pub fn validate(&self) -> Result<()> {
        let params = self.params()?;
        let grid = self.spatial_grid()?;
        self.potential.validate(&grid)?;
        self.solver_config().validate()?;
        self.time_spec().steps()?;
        if self.time.output_every == 0 {
            return Err(Error::config("output_every must be at least 1"));
        }
        if let Some(tr) = &self.trajectories {
            if tr.count == 0 || tr.velocity_every == 0 {
                return Err(Error::config("trajectory count and velocity_every must be positive"));
            }
        }
        if let Some(ps) = &self.phase_space {
            if ps.every == 0 {
                return Err(Error::config("phase_space.every must be at least 1"));
            }
            if let Some(s) = ps.s_coh {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::config(format!("s_coh must be positive, got {s}")));
                }
            }
        }
        self.phase_space_grid()?;
        match &self.initial {
            InitialSpec::Mixture { .. } => {
                self.mixture()?;
            }
            _ => {
                let state = self.initial_state(&params)?;
                let rho = state.density();
                let peak = rho.iter().cloned().fold(0.0, f64::max);
                let edge = rho[0].max(rho[rho.len() - 1]);
                if edge > EDGE_DENSITY_WARN * peak && !matches!(self.initial, InitialSpec::PlaneWave { .. }) {
                    log::warn!(
                        "initial density at the box edge is {:.3e} of its peak; the periodic images interact",
                        edge / peak
                    );
                }
            }
        }
        Ok(())
    }

    /// Initial wave function; errors for mixtures.
    pub fn initial_state(&self, params: &PhysicalParams) -> Result<WaveState> {
        let grid = self.spatial_grid()?;
        match &self.initial {
            InitialSpec::Gaussian { x0, p0, s0 } => WaveState::gaussian(grid, *x0, *p0, *s0, params),
            InitialSpec::PlaneWave { k } => WaveState::plane_wave(grid, *k, 0.0),
            InitialSpec::Superposition { packets } => {
                if packets.is_empty() {
                    return Err(Error::config("a superposition needs at least one packet"));
                }
                let mut psi = vec![Complex64::new(0.0, 0.0); grid.n()];
                for pk in packets {
                    if !(pk.s0.is_finite() && pk.s0 > 0.0) {
                        return Err(Error::config(format!("packet width must be positive, got {}", pk.s0)));
                    }
                    let c = Complex64::from_polar(pk.amplitude, pk.phase);
                    for (k, z) in psi.iter_mut().enumerate() {
                        *z += c * gaussian_amplitude(grid.x(k), pk.x0, pk.p0, pk.s0, params.hbar());
                    }
                }
                WaveState::from_samples(grid, psi, 0.0)
            }
            InitialSpec::Mixture { .. } => Err(Error::config("a sheet mixture has no single wave function")),
        }
    }

    pub fn mixture(&self) -> Result<SheetMixture> {
        let InitialSpec::Mixture { sheets } = &self.initial else {
            return Err(Error::config("scenario does not describe a sheet mixture"));
        };
        let grid = self.spatial_grid()?;
        let sheets = sheets
            .iter()
            .map(|s| LagrangianSheet::gaussian(grid, s.x0, s.p0, s.s0, s.weight))
            .collect::<Result<Vec<_>>>()?;
        SheetMixture::new(sheets)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text, path)
}
