//! Pulse sequences sent through the fiber during one measurement cycle.
//!
//! Each sequence is: a detection pulse, the control pulse, a 125 ns wait,
//! the weak target pulse, then a reset pulse and two confirmation pulses.
//! Detection pulses alternate in direction across the whole chain. A type-A
//! sequence sends the control against the target direction, which leaves a
//! reflecting switch for the target; a type-B control travels with the
//! target and leaves it transmitting.

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::model::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseKind {
    Detection,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseRole {
    Pre,
    Control,
    Target,
    Reset,
    Confirm1,
    Confirm2,
}

impl PulseRole {
    pub fn label(self) -> &'static str {
        match self {
            PulseRole::Pre => "pre",
            PulseRole::Control => "control",
            PulseRole::Target => "target",
            PulseRole::Reset => "reset",
            PulseRole::Confirm1 => "confirm1",
            PulseRole::Confirm2 => "confirm2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    /// Control leaves the switch reflecting the target.
    A,
    /// Control leaves the switch transmitting the target.
    B,
}

impl SequenceKind {
    pub fn label(self) -> &'static str {
        match self {
            SequenceKind::A => "A",
            SequenceKind::B => "B",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "A" => Some(SequenceKind::A),
            "B" => Some(SequenceKind::B),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub role: PulseRole,
    pub direction: Direction,
    pub fwhm: f64,
    pub mean_photons: f64,
    /// Start of the pulse slot (ns from cycle start); the slot spans
    /// `start .. start + 2·fwhm` and the intensity peaks at its middle.
    pub start: f64,
    pub sequence: usize,
    pub sequence_kind: SequenceKind,
}

impl PulseSpec {
    pub fn center(&self) -> f64 {
        self.start + self.fwhm
    }

    pub fn end(&self) -> f64 {
        self.start + 2.0 * self.fwhm
    }
}

/// Timing and photon-number settings of the pulse chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub n_sequences: usize,
    pub detection_fwhm: f64,
    pub detection_photons: f64,
    pub target_fwhm: f64,
    pub target_photons: f64,
    /// Direction of every target pulse.
    pub target_direction: Direction,
    /// Center-to-center spacing of consecutive detection pulses (ns).
    pub detection_spacing: f64,
    /// Target start minus control end (ns).
    pub control_target_wait: f64,
    /// Reset start minus target end (ns).
    pub post_target_gap: f64,
    /// Idle time after the last confirmation pulse (ns).
    pub sequence_tail: f64,
    /// Idle time before the first sequence of a cycle (ns).
    pub cycle_lead: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_sequences: 35,
            detection_fwhm: 15.0,
            detection_photons: 2.5,
            target_fwhm: 50.0,
            target_photons: 0.24,
            target_direction: Direction::Rightward,
            detection_spacing: 40.0,
            control_target_wait: 125.0,
            post_target_gap: 15.0,
            sequence_tail: 10.0,
            cycle_lead: 100.0,
        }
    }
}

impl ChainConfig {
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let dir = cfg.string_or("target_direction", d.target_direction.label())?;
        let target_direction = Direction::from_label(&dir)
            .ok_or_else(|| Error::Configuration(format!("target_direction must be R or L, got `{dir}`")))?;
        Ok(ChainConfig {
            n_sequences: cfg.usize_or("sequences_per_cycle", d.n_sequences)?,
            detection_fwhm: cfg.f64_or("detection_fwhm_ns", d.detection_fwhm)?,
            detection_photons: cfg.f64_or("detection_photons", d.detection_photons)?,
            target_fwhm: cfg.f64_or("target_fwhm_ns", d.target_fwhm)?,
            target_photons: cfg.f64_or("target_photons", d.target_photons)?,
            target_direction,
            detection_spacing: cfg.f64_or("detection_spacing_ns", d.detection_spacing)?,
            control_target_wait: cfg.f64_or("control_target_wait_ns", d.control_target_wait)?,
            post_target_gap: cfg.f64_or("post_target_gap_ns", d.post_target_gap)?,
            sequence_tail: cfg.f64_or("sequence_tail_ns", d.sequence_tail)?,
            cycle_lead: cfg.f64_or("cycle_lead_ns", d.cycle_lead)?,
        })
    }
}

/// The pulses of one cycle in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseChain {
    pub pulses: Vec<PulseSpec>,
    pub sequence_length: f64,
    pub config: ChainConfig,
}

impl PulseChain {
    /// Cycle duration including the lead and a trailing margin for
    /// afterpulses and cavity ring-down.
    pub fn cycle_length(&self) -> f64 {
        self.config.cycle_lead + self.config.n_sequences as f64 * self.sequence_length + 500.0
    }

    /// Pulses belonging to sequence `k`, in time order.
    pub fn sequence(&self, k: usize) -> &[PulseSpec] {
        let per = 6;
        let lo = (k * per).min(self.pulses.len());
        let hi = ((k + 1) * per).min(self.pulses.len());
        &self.pulses[lo..hi]
    }

    pub fn n_sequences(&self) -> usize {
        self.config.n_sequences
    }

    pub fn find(&self, k: usize, role: PulseRole) -> Option<&PulseSpec> {
        self.sequence(k).iter().find(|p| p.role == role)
    }
}

/// Detection windows around each pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gates {
    /// Extra time after a detection pulse slot (ns).
    pub detection_tail: f64,
    /// Half width of the target gate around the target center (ns).
    pub target_half_width: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            detection_tail: 5.0,
            target_half_width: 60.0,
        }
    }
}

impl Gates {
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let g = Gates {
            detection_tail: cfg.f64_or("detection_gate_tail_ns", d.detection_tail)?,
            target_half_width: cfg.f64_or("target_gate_half_ns", d.target_half_width)?,
        };
        check_non_negative("detection_gate_tail_ns", g.detection_tail)?;
        check_positive("target_gate_half_ns", g.target_half_width)?;
        Ok(g)
    }

    /// `[lo, hi)` window (ns) in which clicks are attributed to pulse `p`.
    pub fn gate(&self, p: &PulseSpec) -> (f64, f64) {
        match p.kind {
            PulseKind::Detection => (p.start, p.end() + self.detection_tail),
            PulseKind::Target => (p.center() - self.target_half_width, p.center() + self.target_half_width),
        }
    }

    /// Target gate expressed as delays after the control pulse center.
    pub fn afterpulse_window(&self, chain_cfg: &ChainConfig) -> Result<(f64, f64)> {
        let one = build_pulse_chain(&ChainConfig {
            n_sequences: 1,
            ..*chain_cfg
        })?;
        let c = one.find(0, PulseRole::Control).expect("control pulse").center();
        let (lo, hi) = self.gate(one.find(0, PulseRole::Target).expect("target pulse"));
        Ok((lo - c, hi - c))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Configuration(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Configuration(format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

pub fn build_pulse_chain(cfg: &ChainConfig) -> Result<PulseChain> {
    check_positive("detection_fwhm_ns", cfg.detection_fwhm)?;
    check_positive("target_fwhm_ns", cfg.target_fwhm)?;
    check_non_negative("detection_photons", cfg.detection_photons)?;
    check_non_negative("target_photons", cfg.target_photons)?;
    check_non_negative("control_target_wait_ns", cfg.control_target_wait)?;
    check_non_negative("post_target_gap_ns", cfg.post_target_gap)?;
    check_non_negative("sequence_tail_ns", cfg.sequence_tail)?;
    check_non_negative("cycle_lead_ns", cfg.cycle_lead)?;
    let slot = 2.0 * cfg.detection_fwhm;
    if cfg.detection_spacing < slot {
        return Err(Error::Configuration(format!(
            "detection pulses overlap: spacing {} ns is shorter than the {} ns pulse slot",
            cfg.detection_spacing, slot
        )));
    }

    let fwd = cfg.target_direction;
    let detection = |role, direction, start, sequence, sequence_kind| PulseSpec {
        kind: PulseKind::Detection,
        role,
        direction,
        fwhm: cfg.detection_fwhm,
        mean_photons: cfg.detection_photons,
        start,
        sequence,
        sequence_kind,
    };

    // Offsets inside one sequence.
    let pre = 0.0;
    let control = cfg.detection_spacing;
    let target = control + slot + cfg.control_target_wait;
    let reset = target + 2.0 * cfg.target_fwhm + cfg.post_target_gap;
    let confirm1 = reset + cfg.detection_spacing;
    let confirm2 = confirm1 + cfg.detection_spacing;
    let sequence_length = confirm2 + slot + cfg.sequence_tail;

    let mut pulses = Vec::with_capacity(6 * cfg.n_sequences);
    for k in 0..cfg.n_sequences {
        let kind = if k % 2 == 0 { SequenceKind::A } else { SequenceKind::B };
        let control_dir = match kind {
            SequenceKind::A => fwd.opposite(),
            SequenceKind::B => fwd,
        };
        let s = cfg.cycle_lead + k as f64 * sequence_length;
        pulses.push(detection(PulseRole::Pre, control_dir.opposite(), s + pre, k, kind));
        pulses.push(detection(PulseRole::Control, control_dir, s + control, k, kind));
        pulses.push(PulseSpec {
            kind: PulseKind::Target,
            role: PulseRole::Target,
            direction: fwd,
            fwhm: cfg.target_fwhm,
            mean_photons: cfg.target_photons,
            start: s + target,
            sequence: k,
            sequence_kind: kind,
        });
        pulses.push(detection(PulseRole::Reset, control_dir.opposite(), s + reset, k, kind));
        pulses.push(detection(PulseRole::Confirm1, control_dir, s + confirm1, k, kind));
        pulses.push(detection(
            PulseRole::Confirm2,
            control_dir.opposite(),
            s + confirm2,
            k,
            kind,
        ));
    }
    Ok(PulseChain {
        pulses,
        sequence_length,
        config: *cfg,
    })
}
