//! Photon budgets per switching event and false-herald accounting.

use crate::dynamics::OutcomeTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonsPerSwitch {
    /// Control photons per toggle counting only photons that left the system.
    pub normalized: f64,
    /// Control photons per toggle counting every injected photon.
    pub absolute: f64,
    /// `absolute`, crediting losses that happened after the atom had
    /// already toggled.
    pub corrected: f64,
}

/// `loss_timing_fraction` is the fraction of lost photons that were lost
/// after the toggle; those did not cost a switching event.
pub fn photons_per_switch(
    normalized_reflection: f64,
    absolute_reflection: f64,
    loss_timing_fraction: f64,
) -> Result<PhotonsPerSwitch> {
    if !(normalized_reflection > 0.0 && absolute_reflection > 0.0) {
        return Err(Error::Undefined(format!(
            "photons per switch need positive reflection, got {normalized_reflection} and {absolute_reflection}"
        )));
    }
    if !(0.0..=1.0).contains(&loss_timing_fraction) {
        return Err(Error::invalid(format!(
            "loss timing fraction must lie in [0, 1], got {loss_timing_fraction}"
        )));
    }
    let normalized = 1.0 / normalized_reflection;
    let absolute = 1.0 / absolute_reflection;
    Ok(PhotonsPerSwitch {
        normalized,
        absolute,
        corrected: normalized + (absolute - normalized) * (1.0 - loss_timing_fraction),
    })
}

/// Fraction of lost photons that left the atom toggled, read from a
/// single-photon outcome table started in the reflecting sublevel.
pub fn loss_timing_fraction(table: &OutcomeTable) -> Result<f64> {
    table
        .toggle_given_loss()
        .value()
        .ok_or_else(|| Error::Undefined("no loss events in the outcome table".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalseDetection {
    /// Heralds found in a run without atoms.
    pub false_events: usize,
    pub false_sequences: u64,
    /// Heralds found in the run with atoms.
    pub events: usize,
    pub sequences: u64,
}

impl FalseDetection {
    pub fn false_rate_per_sequence(&self) -> f64 {
        self.false_events as f64 / self.false_sequences.max(1) as f64
    }

    pub fn rate_per_sequence(&self) -> f64 {
        self.events as f64 / self.sequences.max(1) as f64
    }

    /// Expected fraction of heralded events that had no atom.
    pub fn probability(&self) -> Option<f64> {
        let r = self.rate_per_sequence();
        (r > 0.0).then(|| self.false_rate_per_sequence() / r)
    }
}
