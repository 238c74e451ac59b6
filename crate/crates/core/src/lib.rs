//! Simulation and analysis toolkit for a single-atom photonic toggle switch:
//! a Λ-type atom coupled to a whispering-gallery resonator that routes
//! single photons and flips its routing state with every reflection.

pub mod analysis;
pub mod analytic;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod model;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
