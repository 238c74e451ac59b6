//! Cascaded-source quantum model of the atom–resonator system and its
//! Monte Carlo wavefunction unraveling.
//!
//! The state space is split into sectors of fixed excitation number (photons
//! in all three modes plus the atomic excitation). The Hamiltonian conserves
//! that number and every jump lowers it by one, so a trajectory only ever
//! integrates a handful of amplitudes.

pub mod ensemble;
pub mod hamiltonian;
pub mod integrator;
pub mod source;
pub mod space;
pub mod trajectory;

pub use ensemble::{
    probe_second_photon, probe_second_photon_with, run_ensemble, simulate_pulse_scattering,
    simulate_pulse_scattering_with, Outcome, OutcomeTable, ScatterConfig,
};
pub use hamiltonian::{
    build_effective_hamiltonian, build_effective_hamiltonian_with, build_jump_operators, JumpChannel,
};
pub use source::SourceProfile;
pub use space::{BasisState, HilbertSpace, QuantumState};
pub use trajectory::{run_trajectory, Jump, TrajectoryEngine, TrajectoryOptions, TrajectoryRecord};
