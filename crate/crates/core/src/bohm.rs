//! Particle trajectories along `v = grad S / m` and order-inversion counting.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::interp::linear_periodic;

/// Velocity samples on the common grid at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocitySnapshot {
    pub t: f64,
    pub v: Vec<f64>,
}

/// Positions of a set of particles at a sequence of times.
///
/// Particles are ordered by initial position. Coordinates are unwrapped:
/// a particle leaving through `x_max` keeps counting upward.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    times: Vec<f64>,
    /// `positions[s][i]` is particle `i` at `times[s]`.
    positions: Vec<Vec<f64>>,
}

impl TrajectorySet {
    pub fn new(times: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != positions.len() || times.is_empty() {
            return Err(Error::config("trajectory set needs one position row per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("trajectory times must be strictly increasing"));
        }
        let n = positions[0].len();
        if positions.iter().any(|row| row.len() != n) {
            return Err(Error::config("every trajectory row needs the same particle count"));
        }
        if positions[0].windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("initial positions must be sorted ascending"));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::config("trajectory positions must be finite"));
        }
        Ok(Self { times, positions })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn particle_count(&self) -> usize {
        self.positions[0].len()
    }

    pub fn initial_positions(&self) -> &[f64] {
        &self.positions[0]
    }

    pub fn positions_at(&self, snapshot: usize) -> &[f64] {
        &self.positions[snapshot]
    }

    pub fn final_positions(&self) -> &[f64] {
        &self.positions[self.positions.len() - 1]
    }

    /// Path of one particle over all snapshots.
    pub fn path(&self, particle: usize) -> Vec<f64> {
        self.positions.iter().map(|row| row[particle]).collect()
    }

    /// Merges two sets sampled at the same times, re-sorting particles by
    /// initial position.
    pub fn union(&self, other: &TrajectorySet) -> Result<TrajectorySet> {
        let same_times = self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(&other.times)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if !same_times {
            return Err(Error::config("cannot merge trajectory sets with different times"));
        }
        let mut order: Vec<(f64, usize, usize)> = self.positions[0]
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, 0, i))
            .chain(other.positions[0].iter().enumerate().map(|(i, &x)| (x, 1, i)))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let positions = (0..self.times.len())
            .map(|s| {
                order
                    .iter()
                    .map(|&(_, set, i)| {
                        if set == 0 {
                            self.positions[s][i]
                        } else {
                            other.positions[s][i]
                        }
                    })
                    .collect()
            })
            .collect();
        TrajectorySet::new(self.times.clone(), positions)
    }
}

/// Largest `h * Lip(v)` allowed for one RK4 substep. Below this the discrete
/// flow map stays monotone, like the exact flow of a single-valued field.
pub const MAX_STEP_STRETCH: f64 = 0.5;
const MAX_SUBSTEPS: usize = 100_000;

fn lipschitz(v: &[f64], grid: &SpatialGrid) -> f64 {
    let n = v.len();
    (0..n).map(|k| (v[(k + 1) % n] - v[k]).abs()).fold(0.0, f64::max) / grid.dx()
}

/// Integrates particles through a sequence of velocity snapshots.
///
/// Classical RK4; the velocity is linear in `x` between grid points and
/// linear in `t` between snapshots. Each snapshot interval is split into
/// equal substeps so that `h * Lip(v) <= MAX_STEP_STRETCH`.
pub fn advect_particles(
    snapshots: &[VelocitySnapshot],
    initial_positions: &[f64],
    grid: &SpatialGrid,
) -> Result<TrajectorySet> {
    if snapshots.len() < 2 {
        return Err(Error::config("trajectory integration needs at least two velocity snapshots"));
    }
    for s in snapshots {
        grid.check_len(s.v.len(), "velocity snapshot")?;
    }
    if snapshots.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::config("velocity snapshot times must be strictly increasing"));
    }
    if initial_positions.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("initial positions must be sorted ascending"));
    }

    let mut x = initial_positions.to_vec();
    let mut positions = vec![x.clone()];
    let mut lip_prev = lipschitz(&snapshots[0].v, grid);
    for w in snapshots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let lip_next = lipschitz(&b.v, grid);
        let span = b.t - a.t;
        let stretch = span * lip_prev.max(lip_next);
        lip_prev = lip_next;
        let substeps = if stretch.is_finite() {
            ((stretch / MAX_STEP_STRETCH).ceil() as usize).clamp(1, MAX_SUBSTEPS)
        } else {
            1
        };
        if substeps == MAX_SUBSTEPS {
            log::warn!("trajectory substeps capped at t = {}", a.t);
        }
        let h = span / substeps as f64;
        let at = |x: f64, frac: f64| {
            let va = linear_periodic(&a.v, grid, x);
            let vb = linear_periodic(&b.v, grid, x);
            va + frac * (vb - va)
        };
        for xi in x.iter_mut() {
            for s in 0..substeps {
                let f0 = s as f64 / substeps as f64;
                let df = 1.0 / substeps as f64;
                let k1 = at(*xi, f0);
                let k2 = at(*xi + 0.5 * h * k1, f0 + 0.5 * df);
                let k3 = at(*xi + 0.5 * h * k2, f0 + 0.5 * df);
                let k4 = at(*xi + h * k3, f0 + df);
                let next = *xi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !next.is_finite() {
                    return Err(Error::Numerical {
                        t: b.t,
                        reason: format!("particle velocity became non-finite near x = {xi}"),
                    });
                }
                *xi = next;
            }
        }
        positions.push(x.clone());
    }
    TrajectorySet::new(snapshots.iter().map(|s| s.t).collect(), positions)
}

/// Number of sign changes of `x[i+1] - x[i]` over time, summed over pairs
/// adjacent in the initial ordering.
pub fn crossing_count(traj: &TrajectorySet) -> usize {
    let n = traj.particle_count();
    let mut count = 0;
    for i in 1..n {
        let mut last_sign = 0.0_f64;
        for row in &traj.positions {
            let d = row[i] - row[i - 1];
            if d == 0.0 {
                continue;
            }
            let sign = d.signum();
            if last_sign != 0.0 && sign != last_sign {
                count += 1;
            }
            last_sign = sign;
        }
    }
    count
}

/// Stratified seeding: positions at the mid-quantiles `(i + 1/2)/count` of
/// the density's cumulative distribution.
pub fn quantile_positions(rho: &[f64], grid: &SpatialGrid, count: usize) -> Result<Vec<f64>> {
    grid.check_len(rho.len(), "density")?;
    let total: f64 = rho.iter().sum();
    if !(total > 0.0) {
        return Err(Error::config("cannot seed particles from an empty density"));
    }
    // cumulative mass at cell edges; sample k owns [x_k - dx/2, x_k + dx/2)
    let mut cdf = Vec::with_capacity(rho.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for r in rho {
        acc += r / total;
        cdf.push(acc);
    }
    let mut out = Vec::with_capacity(count);
    let mut cell = 0;
    for i in 0..count {
        let q = (i as f64 + 0.5) / count as f64;
        while cell + 1 < rho.len() && cdf[cell + 1] < q {
            cell += 1;
        }
        let span = cdf[cell + 1] - cdf[cell];
        let frac = if span > 0.0 { (q - cdf[cell]) / span } else { 0.5 };
        out.push(grid.x(cell) - 0.5 * grid.dx() + frac * grid.dx());
    }
    Ok(out)
}
