//! Heralded target statistics and second-photon statistics of the control.

use super::afterpulse::AfterpulseCalibration;
use super::herald::{AnalysisSetup, AtomEvent};
use crate::experiment::{End, SequenceKind};
use crate::stats::Proportion;

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    fn binomial(successes: f64, trials: f64) -> Option<Self> {
        if trials <= 0.0 {
            return None;
        }
        let p = (successes / trials).clamp(0.0, 1.0);
        let var = if p == 0.0 || p == 1.0 {
            1.0 / (trials * trials)
        } else {
            p * (1.0 - p) / trials
        };
        Some(Estimate {
            value: p,
            stderr: var.sqrt(),
        })
    }
}

/// Target statistics for one switch state.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchStats {
    pub events: usize,
    pub raw_reflected: u64,
    pub raw_transmitted: u64,
    /// Counts after subtracting expected afterpulses.
    pub reflected: f64,
    pub transmitted: f64,
    /// True if a subtraction would have gone negative and was clamped.
    pub clamped: bool,
    pub normalized_reflection: Option<Estimate>,
    pub normalized_transmission: Option<Estimate>,
    pub absolute_reflection: Option<Estimate>,
    pub absolute_transmission: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedStats {
    /// Type-A events: the control leaves the switch reflecting the target.
    pub reflecting: Option<SwitchStats>,
    /// Type-B events: the control leaves the switch transmitting the target.
    pub transmitting: Option<SwitchStats>,
    pub target_photons: f64,
    pub path_transmission: f64,
}

/// Subtracts expected false counts, clamping at zero.
pub fn subtract_afterpulses(raw: f64, expected_false: f64) -> (f64, bool) {
    let v = raw - expected_false;
    if v < 0.0 {
        (0.0, true)
    } else {
        (v, false)
    }
}

fn state_stats(
    setup: &AnalysisSetup,
    events: &[&AtomEvent],
    calibration: Option<&AfterpulseCalibration>,
    target_photons: f64,
) -> Option<SwitchStats> {
    if events.is_empty() {
        return None;
    }
    let n_det = setup.detectors.n_detectors();
    let mut control_clicks = vec![0u64; n_det];
    let (mut raw_r, mut raw_t) = (0u64, 0u64);
    for e in events {
        for c in &e.control_clicks {
            if c.detector < n_det {
                control_clicks[c.detector] += 1;
            }
        }
        if let Some(first) = e.target_clicks.first() {
            match setup.detectors.end_of(first.detector) {
                Some(end) if end == End::reflected(e.target_dir) => raw_r += 1,
                Some(_) => raw_t += 1,
                None => {}
            }
        }
    }
    let target_dir = events[0].target_dir;
    let (mut false_r, mut false_t) = (0.0, 0.0);
    if let Some(cal) = calibration {
        for (d, &n) in control_clicks.iter().enumerate() {
            let p = cal.probability(d);
            match setup.detectors.end_of(d) {
                Some(end) if end == End::reflected(target_dir) => false_r += p * n as f64,
                Some(_) => false_t += p * n as f64,
                None => {}
            }
        }
    }
    let (r, cr) = subtract_afterpulses(raw_r as f64, false_r);
    let (t, ct) = subtract_afterpulses(raw_t as f64, false_t);
    let budget = events.len() as f64 * target_photons * setup.detectors.path_transmission;
    let absolute = |x: f64| {
        (budget > 0.0).then(|| Estimate {
            value: x / budget,
            stderr: x.max(1.0).sqrt() / budget,
        })
    };
    Some(SwitchStats {
        events: events.len(),
        raw_reflected: raw_r,
        raw_transmitted: raw_t,
        reflected: r,
        transmitted: t,
        clamped: cr || ct,
        normalized_reflection: Estimate::binomial(r, r + t),
        normalized_transmission: Estimate::binomial(t, r + t),
        absolute_reflection: absolute(r),
        absolute_transmission: absolute(t),
    })
}

/// Counts the earliest target-gate click of every event by output port.
pub fn heralded_switch_stats(
    setup: &AnalysisSetup,
    events: &[AtomEvent],
    calibration: Option<&AfterpulseCalibration>,
) -> HeraldedStats {
    let target_photons = setup.chain.config.target_photons;
    let of_kind = |k: SequenceKind| events.iter().filter(|e| e.kind == k).collect::<Vec<_>>();
    HeraldedStats {
        reflecting: state_stats(setup, &of_kind(SequenceKind::A), calibration, target_photons),
        transmitting: state_stats(setup, &of_kind(SequenceKind::B), calibration, target_photons),
        target_photons,
        path_transmission: setup.detectors.path_transmission,
    }
}

/// Among events where another control click follows the first reflected
/// control click, the fraction in which that next click is also reflected.
pub fn second_photon_stats(setup: &AnalysisSetup, events: &[AtomEvent]) -> Proportion {
    let (mut hits, mut trials) = (0u64, 0u64);
    for e in events {
        let Some(first) = e
            .control_clicks
            .iter()
            .position(|c| setup.is_reflected(c.detector, e.control_dir))
        else {
            continue;
        };
        if let Some(next) = e.control_clicks.get(first + 1) {
            trials += 1;
            if setup.is_reflected(next.detector, e.control_dir) {
                hits += 1;
            }
        }
    }
    Proportion::new(hits, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::herald::{AnalysisSetup, Click, HeraldCriterion};
    use crate::experiment::{ChainConfig, DetectorParams, Gates};
    use crate::model::Direction;

    fn setup() -> AnalysisSetup {
        let chain = ChainConfig {
            n_sequences: 2,
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

    fn event(kind: SequenceKind, control: &[(u64, usize)], target: &[(u64, usize)]) -> AtomEvent {
        let clicks = |v: &[(u64, usize)]| {
            v.iter()
                .map(|&(t, d)| Click {
                    timestamp_ps: t,
                    detector: d,
                })
                .collect()
        };
        AtomEvent {
            cycle_id: 0,
            sequence: 0,
            kind,
            control_dir: match kind {
                SequenceKind::A => Direction::Leftward,
                SequenceKind::B => Direction::Rightward,
            },
            target_dir: Direction::Rightward,
            herald_time_ps: 0,
            control_clicks: clicks(control),
            target_clicks: clicks(target),
        }
    }

    #[test]
    fn normalized_values_sum_to_one() {
        let s = setup();
        // Rightward target: left detectors (0..3) are the reflection port.
        let evs = vec![
            event(SequenceKind::A, &[(1, 3)], &[(10, 0)]),
            event(SequenceKind::A, &[(1, 4)], &[(10, 1), (12, 3)]),
            event(SequenceKind::A, &[(1, 3)], &[(10, 4)]),
            event(SequenceKind::A, &[(1, 3)], &[]),
        ];
        let st = heralded_switch_stats(&s, &evs, None);
        let a = st.reflecting.unwrap();
        assert_eq!((a.raw_reflected, a.raw_transmitted), (2, 1));
        let r = a.normalized_reflection.unwrap().value;
        let t = a.normalized_transmission.unwrap().value;
        assert!((r + t - 1.0).abs() < 1e-15);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert!(st.transmitting.is_none());
        let abs = a.absolute_reflection.unwrap().value;
        assert!((abs - 2.0 / (4.0 * 0.24 * 0.55)).abs() < 1e-12);
    }

    #[test]
    fn subtraction_rules() {
        assert_eq!(subtract_afterpulses(5.0, 0.0), (5.0, false));
        assert_eq!(subtract_afterpulses(5.0, 5.0), (0.0, false));
        assert_eq!(subtract_afterpulses(1.0, 2.0), (0.0, true));
        let (once, _) = subtract_afterpulses(7.5, 2.5);
        assert_eq!(subtract_afterpulses(once, 0.0).0, once);
    }

    #[test]
    fn second_photon_counts() {
        let s = setup();
        // Type B control is rightward: left detectors are reflections.
        let evs = vec![
            event(SequenceKind::B, &[(5, 3), (10, 0), (20, 1)], &[]),
            event(SequenceKind::B, &[(10, 0), (20, 4)], &[]),
            event(SequenceKind::B, &[(10, 0)], &[]),
        ];
        let p = second_photon_stats(&s, &evs);
        assert_eq!((p.successes, p.trials), (1, 2));
    }
}
