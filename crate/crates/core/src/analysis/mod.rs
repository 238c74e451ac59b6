//! Data reduction of click streams: atom heralding, switch statistics,
//! control-pulse photon statistics and detector corrections.

pub mod accounting;
pub mod afterpulse;
pub mod correlation;
pub mod herald;
pub mod switching;

use std::fmt::Write as _;

pub use accounting::{loss_timing_fraction, photons_per_switch, FalseDetection, PhotonsPerSwitch};
pub use afterpulse::{afterpulse_calibrate, AfterpulseCalibration, DetectorCalibration};
pub use correlation::{antibunching, antibunching_shuffled, Antibunching};
pub use herald::{detect_atoms, write_events_csv, AnalysisSetup, AtomEvent, Click, HeraldCriterion};
pub use switching::{
    heralded_switch_stats, second_photon_stats, subtract_afterpulses, Estimate, HeraldedStats, SwitchStats,
};

use crate::error::Result;
use crate::experiment::clicks::ClickRecord;
use crate::stats::Proportion;

/// Everything derived from one click stream.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub events: Vec<AtomEvent>,
    pub n_cycles: u64,
    pub stats: HeraldedStats,
    pub second_photon: Proportion,
    pub antibunching: Option<Antibunching>,
    pub antibunching_shuffled: Option<Antibunching>,
}

impl Analysis {
    pub fn sequences(&self, setup: &AnalysisSetup) -> u64 {
        self.n_cycles * setup.chain.n_sequences() as u64
    }
}

/// Number of distinct cycles in a stream. Cycles without clicks are
/// invisible, so callers that know the true count should prefer it.
pub fn count_cycles(stream: &[ClickRecord]) -> u64 {
    let mut n = 0;
    let mut last = None;
    for r in stream {
        if last != Some(r.cycle_id) {
            n += 1;
            last = Some(r.cycle_id);
        }
    }
    n
}

pub fn analyze(
    setup: &AnalysisSetup,
    stream: &[ClickRecord],
    n_cycles: u64,
    calibration: Option<&AfterpulseCalibration>,
    max_dn: usize,
    seed: u64,
) -> Result<Analysis> {
    let events = detect_atoms(setup, stream);
    let stats = heralded_switch_stats(setup, &events, calibration);
    let second_photon = second_photon_stats(setup, &events);
    let (ab, shuffled) = if events.is_empty() {
        (None, None)
    } else {
        (
            Some(antibunching(setup, &events, max_dn)?),
            Some(antibunching_shuffled(setup, &events, max_dn, seed)?),
        )
    };
    Ok(Analysis {
        events,
        n_cycles,
        stats,
        second_photon,
        antibunching: ab,
        antibunching_shuffled: shuffled,
    })
}

fn fmt_est(e: Option<Estimate>) -> String {
    match e {
        Some(e) => format!("{:.4} ± {:.4}", e.value, e.stderr),
        None => "absent".to_string(),
    }
}

fn switch_lines(out: &mut String, name: &str, s: &Option<SwitchStats>) {
    match s {
        None => {
            let _ = writeln!(out, "{name}: absent (no events)");
        }
        Some(s) => {
            let _ = writeln!(out, "{name}.events = {}", s.events);
            let _ = writeln!(out, "{name}.raw_reflected = {}", s.raw_reflected);
            let _ = writeln!(out, "{name}.raw_transmitted = {}", s.raw_transmitted);
            let _ = writeln!(out, "{name}.reflected = {:.3}", s.reflected);
            let _ = writeln!(out, "{name}.transmitted = {:.3}", s.transmitted);
            let _ = writeln!(out, "{name}.clamped = {}", s.clamped);
            let _ = writeln!(
                out,
                "{name}.normalized_reflection = {}",
                fmt_est(s.normalized_reflection)
            );
            let _ = writeln!(
                out,
                "{name}.normalized_transmission = {}",
                fmt_est(s.normalized_transmission)
            );
            let _ = writeln!(out, "{name}.absolute_reflection = {}", fmt_est(s.absolute_reflection));
            let _ = writeln!(
                out,
                "{name}.absolute_transmission = {}",
                fmt_est(s.absolute_transmission)
            );
        }
    }
}

/// Flat `key = value` listing of an analysis.
pub fn stats_text(a: &Analysis, setup: &AnalysisSetup, false_detection: Option<&FalseDetection>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "cycles = {}", a.n_cycles);
    let _ = writeln!(out, "sequences = {}", a.sequences(setup));
    let _ = writeln!(out, "events = {}", a.events.len());
    let _ = writeln!(out, "target_photons = {}", a.stats.target_photons);
    let _ = writeln!(out, "path_transmission = {}", a.stats.path_transmission);
    switch_lines(&mut out, "reflecting", &a.stats.reflecting);
    switch_lines(&mut out, "transmitting", &a.stats.transmitting);
    let sp = &a.second_photon;
    let _ = writeln!(
        out,
        "second_photon_reflection = {} ({} of {})",
        match (sp.value(), sp.stderr()) {
            (Some(v), Some(e)) => format!("{v:.4} ± {e:.4}"),
            _ => "absent".into(),
        },
        sp.successes,
        sp.trials
    );
    if let Some(ab) = &a.antibunching {
        let _ = writeln!(out, "antibunching.events = {}", ab.n_events);
        let _ = writeln!(out, "antibunching.c0 = {}", ab.at(0));
        let _ = writeln!(out, "antibunching.off_peak_mean = {:.3}", ab.off_peak_mean());
        let _ = writeln!(out, "antibunching.suppression = {:.3}", ab.suppression());
    }
    if let Some(sh) = &a.antibunching_shuffled {
        let _ = writeln!(out, "shuffled.c0 = {}", sh.at(0));
        let _ = writeln!(out, "shuffled.off_peak_mean = {:.3}", sh.off_peak_mean());
        let _ = writeln!(out, "shuffled.off_peak_std = {:.3}", sh.off_peak_std());
    }
    if let Some(f) = false_detection {
        let _ = writeln!(out, "false_detection.events = {}", f.false_events);
        let _ = writeln!(out, "false_detection.sequences = {}", f.false_sequences);
        let _ = writeln!(
            out,
            "false_detection.rate_per_sequence = {:.3e}",
            f.false_rate_per_sequence()
        );
        if let Some(p) = f.probability() {
            let _ = writeln!(out, "false_detection.probability = {p:.4}");
        }
    }
    out
}

/// Human-readable headline table: measured value next to the reference.
pub fn headline_report(
    a: &Analysis,
    per_switch: Option<&PhotonsPerSwitch>,
    false_detection: Option<&FalseDetection>,
) -> String {
    let mut rows: Vec<(String, String, &str)> = Vec::new();
    let est = |e: Option<Estimate>| e.map_or("absent".to_string(), |e| format!("{:.3} ± {:.3}", e.value, e.stderr));
    rows.push(("atom events".into(), a.events.len().to_string(), "~8000"));
    let refl = a.stats.reflecting.as_ref();
    let trans = a.stats.transmitting.as_ref();
    rows.push((
        "reflecting state: normalized reflection".into(),
        est(refl.and_then(|s| s.normalized_reflection)),
        "0.648",
    ));
    rows.push((
        "transmitting state: normalized reflection".into(),
        est(trans.and_then(|s| s.normalized_reflection)),
        "0.101",
    ));
    rows.push((
        "reflecting state: absolute reflection".into(),
        est(refl.and_then(|s| s.absolute_reflection)),
        "0.317",
    ));
    rows.push((
        "reflecting state: absolute transmission".into(),
        est(refl.and_then(|s| s.absolute_transmission)),
        "0.172",
    ));
    rows.push((
        "transmitting state: absolute reflection".into(),
        est(trans.and_then(|s| s.absolute_reflection)),
        "0.036",
    ));
    rows.push((
        "transmitting state: absolute transmission".into(),
        est(trans.and_then(|s| s.absolute_transmission)),
        "0.323",
    ));
    let sp = &a.second_photon;
    rows.push((
        "second control photon reflected".into(),
        match (sp.value(), sp.stderr()) {
            (Some(v), Some(e)) => format!("{v:.3} ± {e:.3}"),
            _ => "absent".into(),
        },
        "0.044",
    ));
    if let Some(ab) = &a.antibunching {
        rows.push((
            "antibunching suppression".into(),
            format!("{:.1}", ab.suppression()),
            "~20",
        ));
    }
    if let Some(p) = per_switch {
        rows.push((
            "control photons per switch (normalized)".into(),
            format!("{:.2}", p.normalized),
            "1.54",
        ));
        rows.push((
            "control photons per switch (absolute)".into(),
            format!("{:.2}", p.absolute),
            "~3.2",
        ));
        rows.push((
            "control photons per switch (loss timing)".into(),
            format!("{:.2}", p.corrected),
            "~2.5",
        ));
    }
    if let Some(p) = false_detection.and_then(|f| f.probability()) {
        rows.push(("false detection probability".into(), format!("{p:.4}"), "~0.015"));
    }
    let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w0$}  {:<w1$}  reference", "quantity", "simulated");
    for (name, value, reference) in rows {
        let pad = w1 + value.len() - value.chars().count();
        let _ = writeln!(out, "{name:<w0$}  {value:<pad$}  {reference}");
    }
    out
}
