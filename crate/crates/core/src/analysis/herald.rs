//! Atom detection from reflected detection-pulse clicks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::experiment::clicks::{by_cycle, ClickRecord};
use crate::experiment::{
    build_pulse_chain, ChainConfig, DetectorParams, End, Gates, PulseChain, PulseRole, SequenceKind,
};
use crate::model::Direction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldCriterion {
    pub min_reflected: usize,
    /// Reflected clicks must fall within less than this span (ns).
    pub window: f64,
}

impl Default for HeraldCriterion {
    fn default() -> Self {
        HeraldCriterion {
            min_reflected: 3,
            window: 400.0,
        }
    }
}

impl HeraldCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || self.min_reflected < 3 {
            return Err(Error::Configuration(
                "herald needs a positive window and at least 3 reflected clicks (control and two confirmations)".into(),
            ));
        }
        Ok(())
    }

    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let c = HeraldCriterion {
            min_reflected: cfg.usize_or("herald_min_reflected", d.min_reflected)?,
            window: cfg.f64_or("herald_window_ns", d.window)?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Pulse layout, gates and detector wiring an analysis run needs.
#[derive(Debug, Clone)]
pub struct AnalysisSetup {
    pub chain: PulseChain,
    pub gates: Gates,
    pub detectors: DetectorParams,
    pub criterion: HeraldCriterion,
    /// (lo, hi) gate per pulse, in chain order.
    windows: Vec<(f64, f64)>,
}

impl AnalysisSetup {
    pub fn new(
        chain_cfg: &ChainConfig,
        gates: Gates,
        detectors: DetectorParams,
        criterion: HeraldCriterion,
    ) -> Result<Self> {
        detectors.validate()?;
        criterion.validate()?;
        let chain = build_pulse_chain(chain_cfg)?;
        let windows: Vec<_> = chain.pulses.iter().map(|p| gates.gate(p)).collect();
        for w in windows.windows(2) {
            if w[0].1 > w[1].0 {
                return Err(Error::Configuration(
                    "detection gates of neighbouring pulses overlap".into(),
                ));
            }
        }
        Ok(AnalysisSetup {
            chain,
            gates,
            detectors,
            criterion,
            windows,
        })
    }

    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let chain = ChainConfig::from_config(cfg)?;
        let gates = Gates::from_config(cfg)?;
        let detectors = DetectorParams::from_config(cfg)?;
        let criterion = HeraldCriterion::from_config(cfg)?;
        Self::new(&chain, gates, detectors, criterion)
    }

    pub fn with_criterion(&self, criterion: HeraldCriterion) -> Result<Self> {
        Self::new(&self.chain.config, self.gates, self.detectors.clone(), criterion)
    }

    /// Index of the pulse whose gate contains `t` (ns).
    pub fn pulse_at(&self, t: f64) -> Option<usize> {
        let i = self.windows.partition_point(|w| w.0 <= t);
        if i == 0 {
            return None;
        }
        let (lo, hi) = self.windows[i - 1];
        (t >= lo && t < hi).then_some(i - 1)
    }

    pub fn is_reflected(&self, detector: usize, dir: Direction) -> bool {
        self.detectors.end_of(detector) == Some(End::reflected(dir))
    }
}

/// A click as seen by the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Click {
    pub timestamp_ps: u64,
    pub detector: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomEvent {
    pub cycle_id: u64,
    pub sequence: usize,
    pub kind: SequenceKind,
    pub control_dir: Direction,
    pub target_dir: Direction,
    pub herald_time_ps: u64,
    /// All clicks in the control gate, time ordered.
    pub control_clicks: Vec<Click>,
    /// All clicks in the target gate, time ordered.
    pub target_clicks: Vec<Click>,
}

fn qualifies(clicks: &[(u64, u8)], criterion: &HeraldCriterion) -> Option<u64> {
    let window_ps = criterion.window * 1e3;
    for i in 0..clicks.len() {
        let mut roles = 0u8;
        let mut n = 0;
        for c in &clicks[i..] {
            if ((c.0 - clicks[i].0) as f64) >= window_ps {
                break;
            }
            roles |= c.1;
            n += 1;
        }
        if n >= criterion.min_reflected && roles == 0b111 {
            return Some(clicks[i].0);
        }
    }
    None
}

fn role_bit(role: PulseRole) -> u8 {
    match role {
        PulseRole::Control => 0b001,
        PulseRole::Confirm1 => 0b010,
        PulseRole::Confirm2 => 0b100,
        _ => 0,
    }
}

/// Heralded atom events of one cycle.
pub fn detect_cycle(setup: &AnalysisSetup, cycle_id: u64, clicks: &[ClickRecord]) -> Vec<AtomEvent> {
    let n_seq = setup.chain.n_sequences();
    let mut herald_pool: Vec<Vec<(u64, u8)>> = vec![Vec::new(); n_seq];
    let mut control: Vec<Vec<Click>> = vec![Vec::new(); n_seq];
    let mut target: Vec<Vec<Click>> = vec![Vec::new(); n_seq];
    for c in clicks {
        let Some(i) = setup.pulse_at(c.time()) else {
            continue;
        };
        let p = &setup.chain.pulses[i];
        let click = Click {
            timestamp_ps: c.timestamp_ps,
            detector: c.detector_id,
        };
        match p.role {
            PulseRole::Control => control[p.sequence].push(click),
            PulseRole::Target => target[p.sequence].push(click),
            _ => {}
        }
        let bit = role_bit(p.role);
        if bit != 0 && setup.is_reflected(c.detector_id, p.direction) {
            herald_pool[p.sequence].push((c.timestamp_ps, bit));
        }
    }
    let mut events = Vec::new();
    for k in 0..n_seq {
        let Some(herald_time_ps) = qualifies(&herald_pool[k], &setup.criterion) else {
            continue;
        };
        let c = setup.chain.find(k, PulseRole::Control).expect("control pulse");
        let t = setup.chain.find(k, PulseRole::Target).expect("target pulse");
        events.push(AtomEvent {
            cycle_id,
            sequence: k,
            kind: c.sequence_kind,
            control_dir: c.direction,
            target_dir: t.direction,
            herald_time_ps,
            control_clicks: std::mem::take(&mut control[k]),
            target_clicks: std::mem::take(&mut target[k]),
        });
    }
    events
}

/// Scans a cycle-ordered click stream for heralded atoms.
pub fn detect_atoms(setup: &AnalysisSetup, stream: &[ClickRecord]) -> Vec<AtomEvent> {
    let cycles = by_cycle(stream);
    cycles
        .par_iter()
        .map(|(id, clicks)| detect_cycle(setup, *id, clicks))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn write_events_csv(events: &[AtomEvent], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "cycle_id,herald_time_ps,sequence_kind,control_dir")?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{}",
            e.cycle_id,
            e.herald_time_ps,
            e.kind.label(),
            e.control_dir.label()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn setup(n_seq: usize) -> AnalysisSetup {
        let chain = ChainConfig {
            n_sequences: n_seq,
            ..ChainConfig::default()
        };
        AnalysisSetup::new(
            &chain,
            Gates::default(),
            DetectorParams::default(),
            HeraldCriterion::default(),
        )
        .unwrap()
    }

    fn click_at(setup: &AnalysisSetup, k: usize, role: PulseRole, reflected: bool, dt: f64) -> ClickRecord {
        let p = setup.chain.find(k, role).unwrap();
        let end = if reflected {
            End::reflected(p.direction)
        } else {
            End::transmitted(p.direction)
        };
        let det = setup.detectors.detectors(end)[0];
        ClickRecord {
            cycle_id: 0,
            detector_id: det,
            timestamp_ps: crate::experiment::clicks::quantize_ps(p.center() + dt),
        }
    }

    #[test]
    fn no_reflected_clicks_no_events() {
        let s = setup(4);
        let mut clicks: Vec<_> = [PulseRole::Control, PulseRole::Confirm1, PulseRole::Confirm2]
            .iter()
            .map(|&r| click_at(&s, 1, r, false, 0.0))
            .collect();
        clicks.sort();
        assert!(detect_atoms(&s, &clicks).is_empty());
        assert!(detect_atoms(&s, &[]).is_empty());
    }

    #[test]
    fn full_herald_detected_and_reset_ignored() {
        let s = setup(4);
        let mut clicks: Vec<_> = [PulseRole::Control, PulseRole::Confirm1, PulseRole::Confirm2]
            .iter()
            .map(|&r| click_at(&s, 2, r, true, 1.0))
            .collect();
        clicks.push(click_at(&s, 2, PulseRole::Target, true, 3.0));
        clicks.sort();
        let ev = detect_atoms(&s, &clicks);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].sequence, 2);
        assert_eq!(ev[0].kind, SequenceKind::A);
        assert_eq!(ev[0].control_clicks.len(), 1);
        assert_eq!(ev[0].target_clicks.len(), 1);

        // Reset instead of second confirmation: not an event.
        let mut clicks: Vec<_> = [PulseRole::Control, PulseRole::Confirm1, PulseRole::Reset]
            .iter()
            .map(|&r| click_at(&s, 2, r, true, 1.0))
            .collect();
        clicks.sort();
        assert!(detect_atoms(&s, &clicks).is_empty());
    }

    #[test]
    fn tighter_criteria_never_add_events() {
        let s = setup(4);
        let mut clicks: Vec<_> = [PulseRole::Control, PulseRole::Confirm1, PulseRole::Confirm2]
            .iter()
            .map(|&r| click_at(&s, 0, r, true, 0.0))
            .collect();
        clicks.push(click_at(&s, 0, PulseRole::Control, true, 4.0));
        clicks.sort();
        let base = detect_atoms(&s, &clicks).len();
        assert_eq!(base, 1);
        let four = s
            .with_criterion(HeraldCriterion {
                min_reflected: 4,
                ..HeraldCriterion::default()
            })
            .unwrap();
        assert_eq!(detect_atoms(&four, &clicks).len(), 1);
        let short = s
            .with_criterion(HeraldCriterion {
                window: 300.0,
                ..HeraldCriterion::default()
            })
            .unwrap();
        assert_eq!(detect_atoms(&short, &clicks).len(), 0);
    }

    #[test]
    fn pulse_lookup() {
        let s = setup(2);
        let c = s.chain.find(1, PulseRole::Control).unwrap();
        let i = s.pulse_at(c.center()).unwrap();
        assert_eq!(s.chain.pulses[i].role, PulseRole::Control);
        assert_eq!(s.pulse_at(0.0), None);
    }
}
