//! Numerical laboratory for the sigma-lambda family of dynamics: a
//! Schrodinger equation whose quantum potential is scaled down by `lambda`,
//! its hydrodynamic and trajectory readings, Koopman-von Neumann phase-space
//! dynamics, and incoherent mixtures of Lagrangian sheets.

pub mod bohm;
pub mod error;
pub mod grid;
pub mod hydro;
pub mod interp;
pub mod kvn;
pub mod oracles;
pub mod output;
pub mod runner;
pub mod scenario;
pub mod sheets;
pub mod solver;
pub mod validation;

pub use bohm::{advect_particles, crossing_count, TrajectorySet, VelocitySnapshot};
pub use error::{Error, Result};
pub use grid::{ComplexField1D, ComplexField2D, Field2D, PhaseSpaceGrid, RealField1D, RealField2D, SpatialGrid};
pub use hydro::{decompose, reconstruct, MadelungFields, PhysicalParams, PotentialSpec, Regularization};
pub use kvn::{husimi, kvn_polar, liouville_residual, liouville_step, Hamiltonian, PhaseSpaceAmplitude, PhaseSpacePolar};
pub use runner::{run, run_kvn, sweep_lambda, CrossingMode, RunReport};
pub use scenario::{load_scenario, Scenario};
pub use sheets::{
    evolve_sheet, f_sigma_lambda, mixture_density, project_sheet, superselected_expectation, LagrangianSheet,
    SheetMixture,
};
pub use solver::{evolve, Diagnostics, SolverConfig, TimeSpec, WaveState};
