//! Fixtures shared by the kernel benchmarks.

use sigmalambda::hydro::PotentialSpec;
use sigmalambda::kvn::{Hamiltonian, PhaseSpaceAmplitude};
use sigmalambda::{PhaseSpaceGrid, PhysicalParams, SpatialGrid, WaveState};

pub fn params(lambda: f64) -> PhysicalParams {
    PhysicalParams::from_hbar(1.0, 1.0, lambda).expect("unit parameters")
}

/// Unit Gaussian on `n` points over [-20, 20).
pub fn packet(n: usize, lambda: f64) -> WaveState {
    let grid = SpatialGrid::new(n, -20.0, 20.0).expect("power-of-two grid");
    WaveState::gaussian(grid, 0.0, 0.5, 1.0, &params(lambda)).expect("valid packet")
}

/// Square phase-space grid on [-8, 8)^2 with a harmonic Hamiltonian and an off-centre blob.
pub fn phase_space(n: usize) -> (PhaseSpaceGrid, Hamiltonian, PhaseSpaceAmplitude) {
    let grid = PhaseSpaceGrid::new(SpatialGrid::new(n, -8.0, 8.0).expect("grid"), n, -8.0, 8.0).expect("grid");
    let ham = Hamiltonian::new(&PotentialSpec::Harmonic { omega: 1.0 }, 1.0, &grid).expect("hamiltonian");
    let amp = PhaseSpaceAmplitude::gaussian(grid, 1.5, 0.5, 1.0, 1.0).expect("blob");
    (grid, ham, amp)
}
