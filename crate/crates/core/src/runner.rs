//! Orchestration: scenario in, run directory out.
//!
//! A run directory holds `metadata.json`, `summary.csv`, `density.csv` and,
//! when enabled, `trajectories.csv` and `phasespace.csv`. Wave-function
//! scenarios go through the interpolating solver; sheet mixtures are evolved
//! sheet by sheet along classical characteristics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bohm::{advect_particles, crossing_count, quantile_positions, TrajectorySet, VelocitySnapshot};
use crate::error::{Error, Result};
use crate::grid::{integrate, l2_norm, PhaseSpaceGrid, RealField2D, SpatialGrid};
use crate::hydro::{
    continuity_residual, decompose, energy_functional, hj_residual, quantum_potential, velocity_field,
    MadelungFields, PhysicalParams, PotentialSpec,
};
use crate::kvn::{coherent_width, kvn_polar, liouville_residual, liouville_step, Hamiltonian, PhaseSpaceAmplitude};
use crate::output::{ensure_dir, write_json, Cell, CsvWriter};
use crate::scenario::{
    InitialSpec, PacketSpec, PhaseSpaceSection, PhysicsSection, GridSection, Scenario, SheetSpec,
    TimeSection, TrajectorySection, P_EDGE_MASS_LIMIT,
};
use crate::sheets::{
    default_delta_width, evolve_sheet, f_sigma_lambda, mixture_density, CausticReport, SheetEvolveConfig,
    SheetMixture, DEFAULT_SHEET_PARTICLES,
};
use crate::solver::{evolve_with, moments, Diagnostics};

pub const SUMMARY_HEADER: [&str; 7] = ["t", "norm", "energy", "width", "center", "hj_res_l2", "cont_res_l2"];
pub const DENSITY_HEADER: [&str; 5] = ["t", "x", "rho", "S", "Q"];
pub const SHEET_DENSITY_HEADER: [&str; 6] = ["t", "sheet", "x", "rho", "S", "Q"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "particle_id", "x"];
pub const PHASESPACE_HEADER: [&str; 4] = ["t", "x", "p", "f"];
pub const KVN_SUMMARY_HEADER: [&str; 6] = ["t", "mass", "x_mean", "p_mean", "energy", "liouville_res_l2"];
pub const SWEEP_HEADER: [&str; 6] = ["lambda", "regime", "final_width", "energy", "hj_res_l2", "cont_res_l2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Wave,
    Sheets,
    Kvn,
}

/// What a run produced, beyond its files.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub dir: PathBuf,
    pub pipeline: Pipeline,
    pub summary: Vec<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_count: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub caustics: Vec<CausticReport>,
}

impl RunReport {
    pub fn last(&self) -> &Diagnostics {
        &self.summary[self.summary.len() - 1]
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    pipeline: Pipeline,
    scenario: &'a Scenario,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    caustics: Option<&'a [CausticReport]>,
    notes: Vec<&'static str>,
}

fn metadata<'a>(sc: &'a Scenario, pipeline: Pipeline, steps: usize) -> Metadata<'a> {
    Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        pipeline,
        scenario: sc,
        steps,
        crossing_count: None,
        caustics: None,
        notes: Vec::new(),
    }
}

struct PhaseSpaceSetup {
    grid: PhaseSpaceGrid,
    every: usize,
    delta: f64,
    s_coh: f64,
    clamp: bool,
}

fn phase_space_setup(sc: &Scenario, params: &PhysicalParams) -> Result<Option<PhaseSpaceSetup>> {
    let (Some(grid), Some(sec)) = (sc.phase_space_grid()?, sc.phase_space.as_ref()) else {
        return Ok(None);
    };
    Ok(Some(PhaseSpaceSetup {
        grid,
        every: sec.every,
        delta: sec.delta_width.unwrap_or_else(|| default_delta_width(&grid)),
        s_coh: sec.s_coh.unwrap_or_else(|| coherent_width(params, 1.0)),
        clamp: sec.clamp,
    }))
}

fn write_phase_frame(w: &mut CsvWriter, t: f64, f: &RealField2D, grid: &PhaseSpaceGrid) -> Result<()> {
    for ix in 0..grid.n_x() {
        let x = grid.x_axis().x(ix);
        for (jp, v) in f.row(ix).iter().enumerate() {
            w.numbers(&[t, x, grid.p(jp), *v])?;
        }
    }
    Ok(())
}

fn write_trajectories(path: &Path, traj: &TrajectorySet) -> Result<()> {
    let mut w = CsvWriter::create(path, &TRAJECTORY_HEADER)?;
    for (s, t) in traj.times().iter().enumerate() {
        for (i, x) in traj.positions_at(s).iter().enumerate() {
            w.row(&[Cell::Num(*t), Cell::Int(i), Cell::Num(*x)])?;
        }
    }
    w.finish()
}

fn write_summary(path: &Path, rows: &[Diagnostics]) -> Result<()> {
    let mut w = CsvWriter::create(path, &SUMMARY_HEADER)?;
    for d in rows {
        w.numbers(&[d.t, d.norm, d.energy, d.width, d.center, d.hj_res_l2, d.cont_res_l2])?;
    }
    w.finish()
}

/// Runs a scenario into `out`, choosing the pipeline from its initial state.
pub fn run(sc: &Scenario, out: &Path) -> Result<RunReport> {
    sc.validate()?;
    ensure_dir(out)?;
    if sc.is_mixture() {
        run_sheets(sc, out)
    } else {
        run_wave(sc, out)
    }
}

fn run_wave(sc: &Scenario, out: &Path) -> Result<RunReport> {
    let params = sc.params()?;
    let grid = sc.spatial_grid()?;
    let cfg = sc.solver_config();
    let time = sc.time_spec();
    let steps = time.steps()?;
    let initial = sc.initial_state(&params)?;
    let ps = phase_space_setup(sc, &params)?;

    let seeds = match &sc.trajectories {
        Some(tr) => Some((quantile_positions(&initial.density(), &grid, tr.count)?, tr.velocity_every)),
        None => None,
    };
    let mut velocities = Vec::new();
    let mut k = 0usize;
    let snapshots = evolve_with(initial, &sc.potential, params, cfg, &time, |state| {
        if let Some((_, every)) = &seeds {
            if k % every == 0 || k == steps {
                let fields = decompose(state, &params, cfg.node_eps)?;
                velocities.push(VelocitySnapshot {
                    t: state.t(),
                    v: velocity_field(&fields, &grid, &params)?,
                });
            }
        }
        k += 1;
        Ok(())
    })?;
    let summary: Vec<Diagnostics> = snapshots.iter().map(|s| s.diagnostics).collect();
    write_summary(&out.join("summary.csv"), &summary)?;

    let reg = cfg.regularization();
    let mut w = CsvWriter::create(&out.join("density.csv"), &DENSITY_HEADER)?;
    for s in &snapshots {
        let q = quantum_potential(&s.fields.rho, &grid, &params, &reg)?;
        for i in 0..grid.n() {
            w.numbers(&[s.diagnostics.t, grid.x(i), s.fields.rho[i], s.fields.action[i], q[i]])?;
        }
    }
    w.finish()?;

    let mut crossings = None;
    if let Some((x0, _)) = &seeds {
        let traj = if velocities.len() >= 2 {
            advect_particles(&velocities, x0, &grid)?
        } else {
            TrajectorySet::new(vec![0.0], vec![x0.clone()])?
        };
        crossings = Some(crossing_count(&traj));
        write_trajectories(&out.join("trajectories.csv"), &traj)?;
    }

    if let Some(ps) = &ps {
        let mut w = CsvWriter::create(&out.join("phasespace.csv"), &PHASESPACE_HEADER)?;
        for (i, s) in snapshots.iter().enumerate() {
            if i % ps.every == 0 || i == snapshots.len() - 1 {
                let f = f_sigma_lambda(&s.state, &params, &ps.grid, ps.delta, ps.s_coh, ps.clamp)?;
                write_phase_frame(&mut w, s.diagnostics.t, &f, &ps.grid)?;
            }
        }
        w.finish()?;
    }

    let resolved = sc.resolved()?;
    let mut meta = metadata(&resolved, Pipeline::Wave, steps);
    meta.crossing_count = crossings;
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(RunReport {
        dir: out.to_path_buf(),
        pipeline: Pipeline::Wave,
        summary,
        crossing_count: crossings,
        caustics: Vec::new(),
    })
}

/// Central difference in time between frames, one-sided at the ends.
fn frame_rate(frames: &[Vec<f64>], k: usize, dt: f64) -> Vec<f64> {
    let (a, b) = if frames.len() < 2 {
        return vec![0.0; frames[0].len()];
    } else if k == 0 {
        (0, 1)
    } else if k == frames.len() - 1 {
        (k - 1, k)
    } else {
        (k - 1, k + 1)
    };
    let span = (b - a) as f64 * dt;
    frames[b].iter().zip(&frames[a]).map(|(x, y)| (x - y) / span).collect()
}

fn run_sheets(sc: &Scenario, out: &Path) -> Result<RunReport> {
    let params = sc.params()?;
    // sheets follow classical characteristics; their diagnostics use the lambda = 1 functionals
    let classical = params.with_lambda(1.0)?;
    let grid = sc.spatial_grid()?;
    let mix = sc.mixture()?;
    let time = sc.time_spec();
    let steps = time.steps()?;
    let reg = sc.solver_config().regularization();
    let ps = phase_space_setup(sc, &params)?;
    let potential = sc.potential.evaluate(&grid, params.m())?;

    let evolve_cfg = SheetEvolveConfig {
        steps,
        n_particles: DEFAULT_SHEET_PARTICLES,
        record_every: 1,
    };
    let evolutions = mix
        .sheets()
        .par_iter()
        .map(|s| evolve_sheet(s, &sc.potential, &params, time.dt, &evolve_cfg))
        .collect::<Result<Vec<_>>>()?;
    let caustics: Vec<CausticReport> = evolutions.iter().map(|e| e.report.clone()).collect();
    // all sheets share the frames up to the earliest fold
    let n_frames = evolutions.iter().map(|e| e.frames.len()).min().unwrap_or(1);
    let last_step = n_frames - 1;
    if last_step < steps {
        log::warn!(
            "a sheet folded; mixture output stops at t = {}",
            last_step as f64 * time.dt
        );
    }
    let output_steps: Vec<usize> = (0..=last_step)
        .filter(|k| k % time.output_every == 0 || *k == last_step)
        .collect();

    let rhos: Vec<Vec<Vec<f64>>> = evolutions
        .iter()
        .map(|e| e.frames[..n_frames].iter().map(|f| f.sheet.rho().to_vec()).collect())
        .collect();
    let actions: Vec<Vec<Vec<f64>>> = evolutions
        .iter()
        .map(|e| e.frames[..n_frames].iter().map(|f| f.sheet.action().to_vec()).collect())
        .collect();
    let weights: Vec<f64> = mix.sheets().iter().map(|s| s.weight()).collect();

    let mut summary = Vec::new();
    let mut dens = CsvWriter::create(&out.join("density.csv"), &SHEET_DENSITY_HEADER)?;
    for &k in &output_steps {
        let t = k as f64 * time.dt;
        let mut total = vec![0.0; grid.n()];
        let (mut energy, mut hj2, mut cont2) = (0.0, 0.0, 0.0);
        for j in 0..weights.len() {
            let fields = MadelungFields::new(grid, rhos[j][k].clone(), actions[j][k].clone())?;
            for (o, r) in total.iter_mut().zip(&fields.rho) {
                *o += weights[j] * r;
            }
            energy += weights[j] * energy_functional(&fields, &potential, &classical)?;
            let hj = hj_residual(&fields, &potential, &classical, &reg, &frame_rate(&actions[j], k, time.dt))?;
            let cont = continuity_residual(&fields, &classical, &frame_rate(&rhos[j], k, time.dt))?;
            hj2 += weights[j] * l2_norm(&hj, &grid).powi(2);
            cont2 += weights[j] * l2_norm(&cont, &grid).powi(2);
            let q = quantum_potential(&fields.rho, &grid, &params, &reg)?;
            for i in 0..grid.n() {
                dens.row(&[
                    Cell::Num(t),
                    Cell::Int(j),
                    Cell::Num(grid.x(i)),
                    Cell::Num(fields.rho[i]),
                    Cell::Num(fields.action[i]),
                    Cell::Num(q[i]),
                ])?;
            }
        }
        let (center, width) = moments(&total, &grid);
        summary.push(Diagnostics {
            t,
            norm: integrate(&total, &grid)?,
            norm_drift: 0.0,
            energy,
            width,
            center,
            hj_res_l2: hj2.sqrt(),
            cont_res_l2: cont2.sqrt(),
        });
    }
    dens.finish()?;
    write_summary(&out.join("summary.csv"), &summary)?;

    let mut crossings = None;
    if let Some(tr) = &sc.trajectories {
        let traj = sheet_trajectories(&mix, &evolutions, n_frames, tr, &grid, &params, time.dt)?;
        crossings = Some(crossing_count(&traj));
        write_trajectories(&out.join("trajectories.csv"), &traj)?;
    }

    if let Some(ps) = &ps {
        let mut w = CsvWriter::create(&out.join("phasespace.csv"), &PHASESPACE_HEADER)?;
        for (i, &k) in output_steps.iter().enumerate() {
            if i % ps.every == 0 || i == output_steps.len() - 1 {
                let sheets = evolutions
                    .iter()
                    .map(|e| e.frames[k].sheet.clone())
                    .collect::<Vec<_>>();
                let f = mixture_density(&SheetMixture::new(sheets)?, &ps.grid, &params, ps.delta)?;
                write_phase_frame(&mut w, k as f64 * time.dt, &f, &ps.grid)?;
            }
        }
        w.finish()?;
    }

    let resolved = sc.resolved()?;
    let mut meta = metadata(&resolved, Pipeline::Sheets, last_step);
    meta.crossing_count = crossings;
    meta.caustics = Some(&caustics);
    meta.notes.push("sheet energies and residuals use the classical (lambda = 1) functionals");
    meta.notes.push("density.csv carries one block per sheet, tagged by the sheet column");
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(RunReport {
        dir: out.to_path_buf(),
        pipeline: Pipeline::Sheets,
        summary,
        crossing_count: crossings,
        caustics,
    })
}

/// Per-sheet trajectories merged into one set ordered by starting point.
fn sheet_trajectories(
    mix: &SheetMixture,
    evolutions: &[crate::sheets::SheetEvolution],
    n_frames: usize,
    tr: &TrajectorySection,
    grid: &SpatialGrid,
    params: &PhysicalParams,
    dt: f64,
) -> Result<TrajectorySet> {
    let n_sheets = mix.sheets().len();
    let mut union: Option<TrajectorySet> = None;
    for (j, (sheet, ev)) in mix.sheets().iter().zip(evolutions).enumerate() {
        let count = tr.count / n_sheets + usize::from(j < tr.count % n_sheets);
        if count == 0 {
            continue;
        }
        let x0 = quantile_positions(sheet.rho(), grid, count)?;
        let last = n_frames - 1;
        let velocities = (0..n_frames)
            .filter(|k| k % tr.velocity_every == 0 || *k == last)
            .map(|k| {
                Ok(VelocitySnapshot {
                    t: k as f64 * dt,
                    v: velocity_field(&ev.frames[k].sheet.fields(), grid, params)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let traj = if velocities.len() >= 2 {
            advect_particles(&velocities, &x0, grid)?
        } else {
            TrajectorySet::new(vec![0.0], vec![x0])?
        };
        union = Some(match union {
            None => traj,
            Some(u) => u.union(&traj)?,
        });
    }
    union.ok_or_else(|| Error::config("no trajectories requested"))
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub regime: &'static str,
    pub final_width: f64,
    pub energy: f64,
    pub hj_res_l2: f64,
    pub cont_res_l2: f64,
}

pub fn regime(lambda: f64) -> &'static str {
    if lambda == 0.0 {
        "quantum"
    } else if lambda == 1.0 {
        "classical"
    } else {
        "intermediate"
    }
}

/// Directory name of one sweep point.
pub fn lambda_dir(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

/// One run per `lambda` under `out/lambda_<value>`, plus `out/sweep.csv`.
/// Points run concurrently; rows keep the order of `lambdas`.
pub fn sweep_lambda(sc: &Scenario, lambdas: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::config("lambda sweep needs at least one value"));
    }
    if sc.is_mixture() {
        return Err(Error::config("lambda sweeps apply to wave-function scenarios, not sheet mixtures"));
    }
    for (i, a) in lambdas.iter().enumerate() {
        if lambdas[..i].iter().any(|b| b == a) {
            return Err(Error::config(format!("lambda {a} appears twice in the sweep")));
        }
    }
    let scenarios = lambdas
        .iter()
        .map(|&l| sc.with_lambda(l))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(out)?;
    let reports = scenarios
        .par_iter()
        .zip(lambdas.par_iter())
        .map(|(s, &l)| run(s, &out.join(lambda_dir(l))))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = lambdas
        .iter()
        .zip(&reports)
        .map(|(&lambda, r)| {
            let d = r.last();
            SweepRow {
                lambda,
                regime: regime(lambda),
                final_width: d.width,
                energy: d.energy,
                hj_res_l2: d.hj_res_l2,
                cont_res_l2: d.cont_res_l2,
            }
        })
        .collect();
    let mut w = CsvWriter::create(&out.join("sweep.csv"), &SWEEP_HEADER)?;
    for r in &rows {
        w.row(&[
            Cell::Num(r.lambda),
            Cell::Text(r.regime),
            Cell::Num(r.final_width),
            Cell::Num(r.energy),
            Cell::Num(r.hj_res_l2),
            Cell::Num(r.cont_res_l2),
        ])?;
    }
    w.finish()?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingMode {
    Coherent,
    Mixture,
}

/// Two counter-propagating packets, either as one wave function at
/// `lambda = 1` or as an equal-weight mixture of two sheets.
pub fn crossing_scenario(mode: CrossingMode) -> Scenario {
    let (a, p0, s0) = (3.0, 2.0, 0.5);
    let initial = match mode {
        CrossingMode::Coherent => InitialSpec::Superposition {
            packets: vec![
                PacketSpec { x0: -a, p0, s0, amplitude: 1.0, phase: 0.0 },
                PacketSpec { x0: a, p0: -p0, s0, amplitude: 1.0, phase: 0.0 },
            ],
        },
        CrossingMode::Mixture => InitialSpec::Mixture {
            sheets: vec![
                SheetSpec { x0: -a, p0, s0, weight: 0.5 },
                SheetSpec { x0: a, p0: -p0, s0, weight: 0.5 },
            ],
        },
    };
    Scenario {
        name: Some(
            match mode {
                CrossingMode::Coherent => "crossing-coherent",
                CrossingMode::Mixture => "crossing-mixture",
            }
            .into(),
        ),
        physics: PhysicsSection {
            m: 1.0,
            sigma: None,
            hbar: Some(1.0),
            lambda: 1.0,
        },
        grid: GridSection {
            n: 512,
            x_min: -16.0,
            x_max: 16.0,
        },
        // the coherent collision steepens into a shock whose far tails carry
        // momenta well outside any useful window, so only the sheets get frames
        phase_space: (mode == CrossingMode::Mixture).then_some(PhaseSpaceSection {
            n_x: Some(128),
            n_p: 128,
            p_min: -6.0,
            p_max: 6.0,
            every: 5,
            delta_width: None,
            s_coh: None,
            clamp: false,
        }),
        potential: PotentialSpec::Free,
        initial,
        time: TimeSection {
            dt: 1e-3,
            t_end: 1.0,
            output_every: 50,
        },
        solver: Default::default(),
        trajectories: Some(TrajectorySection {
            count: 64,
            velocity_every: 10,
        }),
        output: None,
    }
}

pub fn demo_crossing(mode: CrossingMode, out: &Path) -> Result<RunReport> {
    run(&crossing_scenario(mode), out)
}

/// Largest fraction of phase-space mass within three cells of either momentum edge.
fn p_edge_mass(f: &RealField2D, grid: &PhaseSpaceGrid) -> f64 {
    let np = grid.n_p();
    let mut edge = 0.0;
    for ix in 0..grid.n_x() {
        let row = f.row(ix);
        edge += row[..3].iter().sum::<f64>() + row[np - 3..].iter().sum::<f64>();
    }
    edge * grid.cell_area()
}

/// KvN run: the initial phase-space density is the interpolated functional
/// of the initial wave function (or the mixture density), clamped at zero,
/// and its square root is carried along the Hamiltonian flow.
pub fn run_kvn(sc: &Scenario, out: &Path) -> Result<RunReport> {
    sc.validate()?;
    let params = sc.params()?;
    let ps = phase_space_setup(sc, &params)?
        .ok_or_else(|| Error::config("the kvn pipeline needs a phase_space section"))?;
    let time = sc.time_spec();
    let steps = time.steps()?;
    let f0 = if sc.is_mixture() {
        mixture_density(&sc.mixture()?, &ps.grid, &params, ps.delta)?
    } else {
        let state = sc.initial_state(&params)?;
        f_sigma_lambda(&state, &params, &ps.grid, ps.delta, ps.s_coh, true)?
    };
    let mut amp = PhaseSpaceAmplitude::from_density(ps.grid, &f0)?;
    let edge = p_edge_mass(&amp.density(), &ps.grid);
    if edge > P_EDGE_MASS_LIMIT {
        return Err(Error::config(format!(
            "initial phase-space mass within three cells of the momentum edges is {edge:.3e} (limit {P_EDGE_MASS_LIMIT:e}); widen p_min/p_max"
        )));
    }
    ensure_dir(out)?;
    let ham = Hamiltonian::new(&sc.potential, params.m(), &ps.grid)?;
    let h_field = crate::grid::Field2D::from_fn(&ps.grid, |x, p| ham.energy(x, p));

    let mut summary = CsvWriter::create(&out.join("kvn_summary.csv"), &KVN_SUMMARY_HEADER)?;
    let mut frames = CsvWriter::create(&out.join("phasespace.csv"), &PHASESPACE_HEADER)?;
    let mut rows = Vec::new();
    let mut outputs = 0usize;
    for k in 0..=steps {
        if k % time.output_every == 0 || k == steps {
            let here = kvn_polar(&amp).f;
            let minus = liouville_step(&amp, &ham, -time.dt)?.density();
            let plus = liouville_step(&amp, &ham, time.dt)?.density();
            let res = liouville_residual(&[minus, here.clone(), plus], &ham, &ps.grid, time.dt)?;
            let mass = amp.norm();
            let (xm, pm) = amp.center();
            let energy = crate::kvn::observable_expectation(&amp, &h_field)?;
            summary.numbers(&[amp.t, mass, xm, pm, energy, res])?;
            rows.push(Diagnostics {
                t: amp.t,
                norm: mass,
                energy,
                center: xm,
                ..Default::default()
            });
            if outputs % ps.every == 0 || k == steps {
                write_phase_frame(&mut frames, amp.t, &here, &ps.grid)?;
            }
            outputs += 1;
        }
        if k < steps {
            amp = liouville_step(&amp, &ham, time.dt)?;
        }
    }
    summary.finish()?;
    frames.finish()?;

    let resolved = sc.resolved()?;
    let mut meta = metadata(&resolved, Pipeline::Kvn, steps);
    meta.notes.push("initial amplitude is sqrt of the interpolated phase-space density, clamped at zero, with zero phase");
    write_json(&out.join("metadata.json"), &meta)?;
    Ok(RunReport {
        dir: out.to_path_buf(),
        pipeline: Pipeline::Kvn,
        summary: rows,
        crossing_count: None,
        caustics: Vec::new(),
    })
}
