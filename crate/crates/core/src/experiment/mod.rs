//! Emulation of the switching experiment: falling atoms, pulse chains,
//! optical losses, detectors and the resulting time-tagged click streams.

pub mod calibration;
pub mod clicks;
pub mod detector;
pub mod emulate;
pub mod pulses;
pub mod transits;

pub use calibration::{generate_calibration, CalibrationConfig};
pub use clicks::{read_clicks, write_clicks, ClickRecord};
pub use detector::{AfterpulseShape, DetectorParams, End};
pub use emulate::{
    pulse_averaged_empty_cavity, run_experiment, write_truth, CycleTruth, EmulationOptions, ExperimentConfig,
    ExperimentOutput, PulseTruth,
};
pub use pulses::{build_pulse_chain, ChainConfig, Gates, PulseChain, PulseKind, PulseRole, PulseSpec, SequenceKind};
pub use transits::{sample_transits, DurationDist, Transit, TransitModel};
