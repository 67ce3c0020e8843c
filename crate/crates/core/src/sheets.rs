//! Lagrangian sheets `rho(x) delta(p - grad S(x))`, their incoherent
//! mixtures and the interpolating phase-space functional.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate, Field2D, PhaseSpaceGrid, RealField1D, RealField2D, SpatialGrid};
use crate::hydro::{action_gradient, decompose, MadelungFields, PhysicalParams, PotentialSpec, DEFAULT_NODE_EPS};
use crate::interp::{cubic_weights, Pchip};
use crate::kvn::husimi;
use crate::solver::WaveState;

/// Default ridge width in momentum cells.
pub const DEFAULT_DELTA_CELLS: f64 = 4.0;
/// Markers per sheet; rebuild error falls off as the square of their spacing.
pub const DEFAULT_SHEET_PARTICLES: usize = 4096;
/// Jacobian at or below which a sheet is considered folded.
pub const DEFAULT_J_MIN: f64 = 1e-3;

const MASS_TOL: f64 = 1e-8;
const WEIGHT_SUM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSheet {
    grid: SpatialGrid,
    rho: RealField1D,
    action: RealField1D,
    weight: f64,
}

impl LagrangianSheet {
    /// `rho` must integrate to one. Zero weights are accepted so that a
    /// mixture can carry an inert component.
    pub fn new(grid: SpatialGrid, rho: RealField1D, action: RealField1D, weight: f64) -> Result<Self> {
        let fields = MadelungFields::new(grid, rho, action)?;
        let mass = integrate(&fields.rho, &grid)?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::config(format!("sheet density must integrate to 1, got {mass}")));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::config(format!("sheet weight must lie in [0, 1], got {weight}")));
        }
        Ok(Self {
            grid,
            rho: fields.rho,
            action: fields.action,
            weight,
        })
    }

    /// Gaussian density of standard deviation `s0` about `x0` carrying
    /// `S = p0 x`. The density is normalized on the grid.
    pub fn gaussian(grid: SpatialGrid, x0: f64, p0: f64, s0: f64, weight: f64) -> Result<Self> {
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::config(format!("sheet width must be positive, got {s0}")));
        }
        let raw: Vec<f64> = grid
            .points()
            .iter()
            .map(|x| {
                let u = grid.wrap(x - x0 + grid.x_min() + 0.5 * grid.length()) - grid.x_min() - 0.5 * grid.length();
                (-0.5 * u * u / (s0 * s0)).exp()
            })
            .collect();
        let mass = integrate(&raw, &grid)?;
        let rho = raw.iter().map(|r| r / mass).collect();
        let action = grid.points().iter().map(|x| p0 * x).collect();
        Self::new(grid, rho, action, weight)
    }

    pub fn from_fields(fields: &MadelungFields, weight: f64) -> Result<Self> {
        Self::new(fields.grid, fields.rho.clone(), fields.action.clone(), weight)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn action(&self) -> &[f64] {
        &self.action
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        Self::new(self.grid, self.rho.clone(), self.action.clone(), weight)
    }

    /// Adds a constant to the action.
    pub fn shifted_action(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.action.iter_mut().for_each(|s| *s += c);
        out
    }

    pub fn fields(&self) -> MadelungFields {
        MadelungFields {
            grid: self.grid,
            rho: self.rho.clone(),
            action: self.action.clone(),
        }
    }
}

/// Incoherent weighted sum of sheets on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetMixture {
    sheets: Vec<LagrangianSheet>,
}

impl SheetMixture {
    pub fn new(sheets: Vec<LagrangianSheet>) -> Result<Self> {
        let Some(first) = sheets.first() else {
            return Err(Error::config("a mixture needs at least one sheet"));
        };
        if sheets.iter().any(|s| s.grid != first.grid) {
            return Err(Error::config("all sheets of a mixture must share one grid"));
        }
        let total: f64 = sheets.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::config(format!("sheet weights must sum to 1, got {total}")));
        }
        Ok(Self { sheets })
    }

    pub fn sheets(&self) -> &[LagrangianSheet] {
        &self.sheets
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.sheets[0].grid
    }

    /// `sum_j w_j rho_j`.
    pub fn density(&self) -> RealField1D {
        let mut out = vec![0.0; self.grid().n()];
        for s in &self.sheets {
            for (o, r) in out.iter_mut().zip(&s.rho) {
                *o += s.weight * r;
            }
        }
        out
    }
}

fn check_delta(grid2d: &PhaseSpaceGrid, delta_width: f64) -> Result<()> {
    if !(delta_width.is_finite() && delta_width >= 2.0 * grid2d.dp()) {
        return Err(Error::config(format!(
            "ridge width {delta_width} is below two momentum cells ({})",
            2.0 * grid2d.dp()
        )));
    }
    Ok(())
}

/// Default ridge width for a phase-space grid.
pub fn default_delta_width(grid2d: &PhaseSpaceGrid) -> f64 {
    DEFAULT_DELTA_CELLS * grid2d.dp()
}

/// `f(x, p) = rho(x) N(p; grad S(x), delta_width)`, with the Gaussian `N`
/// normalized per column so that `sum_p f dp = rho` exactly.
pub fn project_sheet(
    fields: &MadelungFields,
    grid2d: &PhaseSpaceGrid,
    params: &PhysicalParams,
    delta_width: f64,
) -> Result<RealField2D> {
    check_delta(grid2d, delta_width)?;
    let columns = grid2d.columns_of(&fields.grid)?;
    let momentum = action_gradient(fields, &fields.grid, params, DEFAULT_NODE_EPS)?;
    let resolved = fields.resolved_mask(DEFAULT_NODE_EPS);
    let (lo, hi) = (grid2d.p_min() - 3.0 * delta_width, grid2d.p_max() + 3.0 * delta_width);
    let np = grid2d.n_p();
    let mut data = vec![0.0; grid2d.len()];
    let mut weights = vec![0.0; np];
    for (ix, &k) in columns.iter().enumerate() {
        let (rho, mu) = (fields.rho[k], momentum[k]);
        if resolved[k] && !(lo..=hi).contains(&mu) {
            return Err(Error::config(format!(
                "sheet momentum {mu} at x = {} lies outside the momentum range [{}, {}]",
                fields.grid.x(k),
                grid2d.p_min(),
                grid2d.p_max()
            )));
        }
        if rho == 0.0 {
            continue;
        }
        let mut total = 0.0;
        for (j, w) in weights.iter_mut().enumerate() {
            let u = (grid2d.p(j) - mu) / delta_width;
            *w = (-0.5 * u * u).exp();
            total += *w;
        }
        if total == 0.0 {
            // far outside the momentum range in an unresolved tail
            continue;
        }
        let scale = rho / (total * grid2d.dp());
        for (cell, w) in data[ix * np..(ix + 1) * np].iter_mut().zip(&weights) {
            *cell = w * scale;
        }
    }
    Field2D::from_vec(grid2d, data)
}

/// `sum_j w_j project_sheet(sheet_j)`.
pub fn mixture_density(
    mix: &SheetMixture,
    grid2d: &PhaseSpaceGrid,
    params: &PhysicalParams,
    delta_width: f64,
) -> Result<RealField2D> {
    let mut out = Field2D::filled(grid2d, 0.0);
    for sheet in &mix.sheets {
        let f = project_sheet(&sheet.fields(), grid2d, params, delta_width)?;
        for (o, v) in out.as_mut_slice().iter_mut().zip(f.as_slice()) {
            *o += sheet.weight * v;
        }
    }
    Ok(out)
}

/// `sum A f dx dp` over the mixture's phase-space density. Depends on each
/// sheet only through its density and momentum field.
pub fn superselected_expectation(
    mix: &SheetMixture,
    observable: &RealField2D,
    grid2d: &PhaseSpaceGrid,
    params: &PhysicalParams,
    delta_width: f64,
) -> Result<f64> {
    if !observable.matches(grid2d) {
        return Err(Error::config("observable shape does not match the phase-space grid"));
    }
    let f = mixture_density(mix, grid2d, params, delta_width)?;
    Ok(f.as_slice()
        .iter()
        .zip(observable.as_slice())
        .map(|(f, a)| f * a)
        .sum::<f64>()
        * grid2d.cell_area())
}

/// `F = lambda sheet(psi) + (1 - lambda) husimi(psi)`, i.e.
/// `sheet + (1 - lambda) eta` with `eta = husimi - sheet`.
///
/// With `clamp` set, negative values are replaced by zero.
pub fn f_sigma_lambda(
    state: &WaveState,
    params: &PhysicalParams,
    grid2d: &PhaseSpaceGrid,
    delta_width: f64,
    s_coh: f64,
    clamp: bool,
) -> Result<RealField2D> {
    let fields = decompose(state, params, DEFAULT_NODE_EPS)?;
    let sheet = project_sheet(&fields, grid2d, params, delta_width)?;
    let lambda = params.lambda();
    let mut out = if lambda == 1.0 {
        sheet
    } else {
        let h = husimi(state, params, grid2d, s_coh)?;
        let data = sheet
            .as_slice()
            .iter()
            .zip(h.as_slice())
            .map(|(s, h)| lambda * s + (1.0 - lambda) * h)
            .collect();
        Field2D::from_vec(grid2d, data)?
    };
    if clamp {
        out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(out)
}

/// Momentum variance of a phase-space density.
pub fn momentum_variance(f: &RealField2D, grid2d: &PhaseSpaceGrid) -> f64 {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for ix in 0..grid2d.n_x() {
        for (j, v) in f.row(ix).iter().enumerate() {
            let p = grid2d.p(j);
            m0 += v;
            m1 += v * p;
            m2 += v * p * p;
        }
    }
    let mean = m1 / m0;
    m2 / m0 - mean * mean
}

/// Characteristics carrying a sheet: markers with their start point,
/// momentum, accumulated action and carried density.
#[derive(Clone, Debug, PartialEq)]
pub struct SheetEnsemble {
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub action: Vec<f64>,
    pub rho0: Vec<f64>,
    /// `dx / dx0` per marker.
    pub jacobian: Vec<f64>,
}

impl SheetEnsemble {
    fn update_jacobian(&mut self) {
        let n = self.x.len();
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            self.jacobian[i] = (self.x[b] - self.x[a]) / (self.x0[b] - self.x0[a]);
        }
    }

    fn min_jacobian(&self) -> f64 {
        self.jacobian.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SheetEvolveConfig {
    pub steps: usize,
    pub n_particles: usize,
    /// Keep a frame every `record_every` steps (and always the last one).
    pub record_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CausticReport {
    pub j_min: f64,
    pub min_jacobian: f64,
    /// First step time at which some marker's Jacobian fell to `j_min`.
    pub caustic_time: Option<f64>,
    /// Largest `|mass - 1|` of a rebuilt density before renormalization.
    pub max_mass_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SheetFrame {
    pub t: f64,
    pub sheet: LagrangianSheet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SheetEvolution {
    /// Frames from `t = 0`; the last one is the final single-valued sheet.
    pub frames: Vec<SheetFrame>,
    pub report: CausticReport,
}

impl SheetEvolution {
    pub fn last(&self) -> &SheetFrame {
        &self.frames[self.frames.len() - 1]
    }
}

/// Cubic Lagrange interpolation of grid samples, stencil kept inside the array.
fn cubic_open(values: &[f64], grid: &SpatialGrid, x: f64) -> f64 {
    let (i0, t) = open_stencil(values.len(), grid, x);
    let w = cubic_weights(t);
    (0..4).map(|a| w[a] * values[i0 - 1 + a]).sum()
}

/// Derivative of the interpolant of [`cubic_open`].
fn cubic_open_slope(values: &[f64], grid: &SpatialGrid, x: f64) -> f64 {
    let (i0, t) = open_stencil(values.len(), grid, x);
    // d/dt of the Lagrange weights at offsets -1, 0, 1, 2
    let w = [
        -(3.0 * t * t - 6.0 * t + 2.0) / 6.0,
        (3.0 * t * t - 4.0 * t - 1.0) / 2.0,
        -(3.0 * t * t - 2.0 * t - 2.0) / 2.0,
        (3.0 * t * t - 1.0) / 6.0,
    ];
    (0..4).map(|a| w[a] * values[i0 - 1 + a]).sum::<f64>() / grid.dx()
}

fn open_stencil(n: usize, grid: &SpatialGrid, x: f64) -> (usize, f64) {
    let s = (x - grid.x_min()) / grid.dx();
    let i0 = (s.floor() as i64).clamp(1, n as i64 - 3);
    (i0 as usize, s - i0 as f64)
}

fn seed_ensemble(sheet: &LagrangianSheet, n_particles: usize) -> Result<SheetEnsemble> {
    let grid = sheet.grid;
    let fields = sheet.fields();
    let resolved = fields.resolved_mask(DEFAULT_NODE_EPS);
    let first = resolved.iter().position(|&r| r).unwrap_or(0);
    let last = resolved.iter().rposition(|&r| r).unwrap_or(grid.n() - 1);
    let (a, b) = (grid.x(first.max(1)), grid.x(last.min(grid.n() - 3)));
    if !(b > a) {
        return Err(Error::config("sheet support is too narrow to seed characteristics"));
    }
    let x0: Vec<f64> = (0..n_particles)
        .map(|i| a + (b - a) * i as f64 / (n_particles - 1) as f64)
        .collect();
    Ok(SheetEnsemble {
        p: x0.iter().map(|&x| cubic_open_slope(&sheet.action, &grid, x)).collect(),
        action: x0.iter().map(|&x| cubic_open(&sheet.action, &grid, x)).collect(),
        rho0: x0.iter().map(|&x| cubic_open(&sheet.rho, &grid, x).max(0.0)).collect(),
        jacobian: vec![1.0; n_particles],
        x: x0.clone(),
        x0,
    })
}

/// Rebuilds a sheet from markers; returns it with the mass before renormalization.
fn rebuild(ens: &SheetEnsemble, grid: &SpatialGrid, weight: f64) -> Result<(LagrangianSheet, f64)> {
    let n = ens.x.len();
    let (xa, xb) = (ens.x[0], ens.x[n - 1]);
    if xb - xa >= grid.length() {
        return Err(Error::config("sheet has stretched over the whole periodic box"));
    }
    let rho_of = Pchip::new(
        ens.x.clone(),
        ens.rho0.iter().zip(&ens.jacobian).map(|(r, j)| r / j.abs()).collect(),
    );
    let action_of = Pchip::new(ens.x.clone(), ens.action.clone());
    let mut rho = vec![0.0; grid.n()];
    let mut action = vec![0.0; grid.n()];
    for k in 0..grid.n() {
        let xg = grid.x(k);
        let x = xg + ((xa - xg) / grid.length()).ceil() * grid.length();
        if x <= xb {
            rho[k] = rho_of.eval(x).max(0.0);
            action[k] = action_of.eval(x);
        } else if x - xb <= xa - (x - grid.length()) {
            action[k] = ens.action[n - 1] + ens.p[n - 1] * (x - xb);
        } else {
            let xl = x - grid.length();
            action[k] = ens.action[0] + ens.p[0] * (xl - xa);
        }
    }
    let mass = integrate(&rho, grid)?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Numerical {
            t: f64::NAN,
            reason: "rebuilt sheet density has no finite mass".into(),
        });
    }
    rho.iter_mut().for_each(|r| *r /= mass);
    Ok((LagrangianSheet::new(*grid, rho, action, weight)?, mass))
}

/// Evolves a sheet by the method of characteristics.
///
/// Markers are spread evenly over the resolved support, pushed by velocity
/// Verlet, and their action advanced by the discrete Lagrangian
/// `dt (p_half^2 / 2m - (V(x0) + V(x1)) / 2)`. Each recorded frame is rebuilt on
/// the grid by monotone interpolation with `rho = rho0 / |J|`. Evolution
/// stops at the first step where a Jacobian drops to [`DEFAULT_J_MIN`]; the
/// last frame is then the final single-valued sheet before the fold.
pub fn evolve_sheet(
    sheet: &LagrangianSheet,
    potential: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    cfg: &SheetEvolveConfig,
) -> Result<SheetEvolution> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if cfg.n_particles < 8 {
        return Err(Error::config("sheet evolution needs at least 8 markers"));
    }
    if cfg.record_every == 0 {
        return Err(Error::config("record_every must be at least 1"));
    }
    let grid = sheet.grid;
    let m = params.m();
    let pot = potential.sampler(&grid, m)?;
    let mut ens = seed_ensemble(sheet, cfg.n_particles)?;
    let mut frames = vec![SheetFrame {
        t: 0.0,
        sheet: sheet.clone(),
    }];
    let mut report = CausticReport {
        j_min: DEFAULT_J_MIN,
        min_jacobian: 1.0,
        caustic_time: None,
        max_mass_drift: 0.0,
    };

    for step in 1..=cfg.steps {
        let t = step as f64 * dt;
        for i in 0..ens.x.len() {
            let (x, p) = (ens.x[i], ens.p[i]);
            let p_half = p - 0.5 * dt * pot.slope(x);
            let x1 = x + dt * p_half / m;
            let p1 = p_half - 0.5 * dt * pot.slope(x1);
            ens.action[i] += dt * (0.5 * p_half * p_half / m - 0.5 * (pot.value(x) + pot.value(x1)));
            ens.x[i] = x1;
            ens.p[i] = p1;
        }
        if ens.x.iter().chain(&ens.p).chain(&ens.action).any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                t,
                reason: "sheet characteristics became non-finite".into(),
            });
        }
        ens.update_jacobian();
        let jmin = ens.min_jacobian();
        report.min_jacobian = report.min_jacobian.min(jmin);
        if jmin <= DEFAULT_J_MIN {
            report.caustic_time = Some(t);
            log::info!("sheet folds at t = {t} (min Jacobian {jmin:.3e})");
            break;
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            let (rebuilt, mass) = rebuild(&ens, &grid, sheet.weight)?;
            report.max_mass_drift = report.max_mass_drift.max((mass - 1.0).abs());
            frames.push(SheetFrame { t, sheet: rebuilt });
        }
    }
    Ok(SheetEvolution { frames, report })
}

/// Momentum expectation `int rho grad S dx` of a sheet.
pub fn sheet_momentum(sheet: &LagrangianSheet, params: &PhysicalParams) -> Result<f64> {
    let fields = sheet.fields();
    let g = action_gradient(&fields, &sheet.grid, params, DEFAULT_NODE_EPS)?;
    let j: Vec<f64> = g.iter().zip(&sheet.rho).map(|(g, r)| g * r).collect();
    integrate(&j, &sheet.grid)
}

/// Normalized Gaussian ridge second moment, for reference: `mu^2 + delta^2`
/// in the continuum.
pub fn ridge_second_moment(mu: f64, delta_width: f64) -> f64 {
    mu * mu + delta_width * delta_width
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kvn::coherent_width;
    use std::f64::consts::PI;

    fn sgrid() -> SpatialGrid {
        SpatialGrid::new(256, -16.0, 16.0).unwrap()
    }

    fn pgrid() -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(SpatialGrid::new(128, -16.0, 16.0).unwrap(), 128, -6.0, 6.0).unwrap()
    }

    fn params() -> PhysicalParams {
        PhysicalParams::from_hbar(1.0, 1.0, 0.0).unwrap()
    }

    fn p_marginal(f: &RealField2D, g: &PhaseSpaceGrid) -> Vec<f64> {
        (0..g.n_x()).map(|ix| f.row(ix).iter().sum::<f64>() * g.dp()).collect()
    }

    #[test]
    fn ridge_follows_linear_phase() {
        let (g, pg) = (sgrid(), pgrid());
        let sheet = LagrangianSheet::gaussian(g, 1.0, 1.5, 1.0, 1.0).unwrap();
        let delta = default_delta_width(&pg);
        let f = project_sheet(&sheet.fields(), &pg, &params(), delta).unwrap();
        let cols = pg.columns_of(&g).unwrap();
        for (ix, m) in p_marginal(&f, &pg).iter().enumerate() {
            assert!((m - sheet.rho()[cols[ix]]).abs() < 1e-10);
        }
        // ridge centred on p0 in every well-resolved column
        for ix in 0..pg.n_x() {
            if sheet.rho()[cols[ix]] < 1e-3 {
                continue;
            }
            let row = f.row(ix);
            let mean = row.iter().enumerate().map(|(j, v)| v * pg.p(j)).sum::<f64>() / row.iter().sum::<f64>();
            assert!((mean - 1.5).abs() < 1e-6, "{mean}");
        }
    }

    #[test]
    fn zero_action_ridge_sits_at_rest() {
        let (g, pg) = (sgrid(), pgrid());
        let sheet = LagrangianSheet::gaussian(g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let f = project_sheet(&sheet.fields(), &pg, &params(), default_delta_width(&pg)).unwrap();
        let peak_row = pg.n_x() / 2;
        let row = f.row(peak_row);
        let jmax = (0..pg.n_p()).max_by(|a, b| row[*a].total_cmp(&row[*b])).unwrap();
        assert!(pg.p(jmax).abs() <= pg.dp());
    }

    #[test]
    fn narrow_ridge_and_out_of_range_momentum_are_rejected() {
        let (g, pg) = (sgrid(), pgrid());
        let sheet = LagrangianSheet::gaussian(g, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(project_sheet(&sheet.fields(), &pg, &params(), pg.dp()).is_err());
        let fast = LagrangianSheet::gaussian(g, 0.0, 9.0, 1.0, 1.0).unwrap();
        assert!(project_sheet(&fast.fields(), &pg, &params(), default_delta_width(&pg)).is_err());
    }

    #[test]
    fn counter_propagating_mixture() {
        let (g, pg) = (sgrid(), pgrid());
        let p0 = 2.0;
        let mix = SheetMixture::new(vec![
            LagrangianSheet::gaussian(g, 0.0, p0, 1.0, 0.5).unwrap(),
            LagrangianSheet::gaussian(g, 0.0, -p0, 1.0, 0.5).unwrap(),
        ])
        .unwrap();
        let delta = default_delta_width(&pg);
        let prm = params();
        let one = Field2D::filled(&pg, 1.0);
        let p = Field2D::from_fn(&pg, |_, p| p);
        let p2 = Field2D::from_fn(&pg, |_, p| p * p);
        assert!((superselected_expectation(&mix, &one, &pg, &prm, delta).unwrap() - 1.0).abs() < 1e-8);
        assert!(superselected_expectation(&mix, &p, &pg, &prm, delta).unwrap().abs() < 1e-10);
        let second = superselected_expectation(&mix, &p2, &pg, &prm, delta).unwrap();
        assert!((second - ridge_second_moment(p0, delta)).abs() < 1e-6, "{second}");

        // incoherent: between the ridges only their Gaussian tails remain
        let f = mixture_density(&mix, &pg, &prm, delta).unwrap();
        let row = f.row(pg.n_x() / 2);
        let j0 = ((0.0 - pg.p_min()) / pg.dp()) as usize;
        let peak = row.iter().cloned().fold(0.0, f64::max);
        let tails = 2.0 * (-0.5 * (p0 / delta).powi(2)).exp();
        assert!(row[j0] <= 1.01 * tails * peak);
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let g = sgrid();
        let a = LagrangianSheet::gaussian(g, 0.0, 0.0, 1.0, 0.5).unwrap();
        assert!(SheetMixture::new(vec![a.clone()]).is_err());
        assert!(SheetMixture::new(vec![]).is_err());
        assert!(LagrangianSheet::gaussian(g, 0.0, 0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn phase_relabeling_and_inert_sheets_do_not_matter() {
        let (g, pg) = (sgrid(), pgrid());
        let prm = params();
        let delta = default_delta_width(&pg);
        let a = LagrangianSheet::gaussian(g, -2.0, 1.0, 1.0, 0.3).unwrap();
        let b = LagrangianSheet::gaussian(g, 2.0, -0.5, 0.7, 0.7).unwrap();
        let obs = Field2D::from_fn(&pg, |x, p| x * x + p * p * p + (x * p).sin());
        let base = superselected_expectation(&SheetMixture::new(vec![a.clone(), b.clone()]).unwrap(), &obs, &pg, &prm, delta).unwrap();
        let shifted = SheetMixture::new(vec![a.shifted_action(3.7), b.shifted_action(-12.25)]).unwrap();
        let e = superselected_expectation(&shifted, &obs, &pg, &prm, delta).unwrap();
        assert!((e - base).abs() <= 1e-12 * base.abs());
        let inert = LagrangianSheet::gaussian(g, 5.0, 3.0, 0.5, 0.0).unwrap();
        let padded = SheetMixture::new(vec![a, b, inert]).unwrap();
        assert_eq!(superselected_expectation(&padded, &obs, &pg, &prm, delta).unwrap(), base);
    }

    #[test]
    fn free_sheet_translates_rigidly() {
        let g = sgrid();
        let prm = params();
        let sheet = LagrangianSheet::gaussian(g, -2.0, 1.5, 1.0, 1.0).unwrap();
        let cfg = SheetEvolveConfig {
            steps: 100,
            n_particles: DEFAULT_SHEET_PARTICLES,
            record_every: 50,
        };
        let out = evolve_sheet(&sheet, &PotentialSpec::Free, &prm, 0.01, &cfg).unwrap();
        assert_eq!(out.report.caustic_time, None);
        assert!((out.report.min_jacobian - 1.0).abs() < 1e-9);
        assert!(out.report.max_mass_drift < 1e-6, "{}", out.report.max_mass_drift);
        let last = &out.last().sheet;
        let expect = LagrangianSheet::gaussian(g, -0.5, 1.5, 1.0, 1.0).unwrap();
        let err = last.rho().iter().zip(expect.rho()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        let p = sheet_momentum(last, &prm).unwrap();
        assert!((p - 1.5).abs() < 1e-6, "{p}");
    }

    #[test]
    fn static_sheet_stays_put() {
        let g = sgrid();
        let sheet = LagrangianSheet::gaussian(g, 0.5, 0.0, 1.0, 1.0).unwrap();
        let cfg = SheetEvolveConfig {
            steps: 20,
            n_particles: DEFAULT_SHEET_PARTICLES,
            record_every: 20,
        };
        let out = evolve_sheet(&sheet, &PotentialSpec::Free, &params(), 0.05, &cfg).unwrap();
        let err = out.last().sheet.rho().iter().zip(sheet.rho()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn harmonic_focus_is_a_caustic() {
        let g = sgrid();
        let sheet = LagrangianSheet::gaussian(g, 0.0, 0.0, 1.0, 1.0).unwrap();
        let dt = 0.01;
        let cfg = SheetEvolveConfig {
            steps: 300,
            n_particles: DEFAULT_SHEET_PARTICLES,
            record_every: 10,
        };
        let out = evolve_sheet(&sheet, &PotentialSpec::Harmonic { omega: 1.0 }, &params(), dt, &cfg).unwrap();
        let tc = out.report.caustic_time.expect("caustic");
        assert!((tc - PI / 2.0).abs() <= dt, "{tc}");
        assert!(out.last().t < tc);
    }

    #[test]
    fn f_sigma_lambda_endpoints() {
        let g = SpatialGrid::new(512, -16.0, 16.0).unwrap();
        let pg = pgrid();
        let base = params();
        let state = WaveState::gaussian(g, 0.5, 0.75, 1.0, &base).unwrap();
        let delta = default_delta_width(&pg);
        let s_coh = coherent_width(&base, 1.0);
        let fields = decompose(&state, &base, DEFAULT_NODE_EPS).unwrap();
        let sheet = project_sheet(&fields, &pg, &base, delta).unwrap();
        let h = husimi(&state, &base, &pg, s_coh).unwrap();

        let at = |lambda: f64| {
            f_sigma_lambda(&state, &base.with_lambda(lambda).unwrap(), &pg, delta, s_coh, false).unwrap()
        };
        assert_eq!(at(1.0), sheet);
        assert_eq!(at(0.0), h);
        let (v1, v0, vh) = (
            momentum_variance(&sheet, &pg),
            momentum_variance(&h, &pg),
            momentum_variance(&at(0.5), &pg),
        );
        assert!(v1.min(v0) < vh && vh < v1.max(v0), "{v1} {vh} {v0}");
        let clamped = f_sigma_lambda(&state, &base.with_lambda(0.5).unwrap(), &pg, delta, s_coh, true).unwrap();
        assert!(clamped.as_slice().iter().all(|v| *v >= 0.0));
    }
}
