//! Afterpulse calibration runs: one bright pulse sent straight to each
//! detector in turn, no resonator in the path.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use super::clicks::{quantize_ps, ClickRecord};
use super::detector::DetectorParams;
use super::pulses::{ChainConfig, Gates};
use crate::config::KvConfig;
use crate::dynamics::source::FWHM_PER_SIGMA;
use crate::error::{Error, Result};
use crate::seeding::{item_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// Pulses per detector.
    pub n_pulses: u64,
    /// Mean number of clicks produced by one calibration pulse.
    pub mean_clicks: f64,
    pub fwhm: f64,
    /// Quiet interval at the start of each cycle, used to measure dark counts (ns).
    pub lead: f64,
    /// Spacing between the pulses of consecutive detectors (ns).
    pub spacing: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            n_pulses: 200_000,
            mean_clicks: 1.0,
            fwhm: 15.0,
            lead: 2000.0,
            spacing: 3000.0,
        }
    }
}

impl CalibrationConfig {
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let c = CalibrationConfig {
            n_pulses: cfg.u64_or("calibration_pulses", d.n_pulses)?,
            mean_clicks: cfg.f64_or("calibration_mean_clicks", d.mean_clicks)?,
            fwhm: cfg.f64_or("calibration_fwhm_ns", d.fwhm)?,
            lead: cfg.f64_or("calibration_lead_ns", d.lead)?,
            spacing: cfg.f64_or("calibration_spacing_ns", d.spacing)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_clicks > 0.0 && self.fwhm > 0.0 && self.lead > 0.0 && self.spacing > 4.0 * self.fwhm) {
            return Err(Error::Configuration("invalid calibration pulse settings".into()));
        }
        Ok(())
    }

    /// Center (ns from cycle start) of the pulse aimed at the `slot`-th detector.
    pub fn pulse_center(&self, slot: usize) -> f64 {
        self.lead + slot as f64 * self.spacing + self.fwhm
    }

    pub fn cycle_length(&self, n_detectors: usize) -> f64 {
        self.lead + n_detectors as f64 * self.spacing
    }
}

/// Generates the calibration click stream: cycle `k` holds one pulse per
/// detector, detector `d` being hit at [`CalibrationConfig::pulse_center`]`(d)`.
pub fn generate_calibration(
    cal: &CalibrationConfig,
    detectors: &DetectorParams,
    chain: &ChainConfig,
    gates: &Gates,
    seed: u64,
) -> Result<Vec<ClickRecord>> {
    cal.validate()?;
    detectors.validate()?;
    let window = gates.afterpulse_window(chain)?;
    let ap = detectors.afterpulse_totals(window)?;
    let n_det = detectors.n_detectors();
    let cycle_len = cal.cycle_length(n_det);
    let sigma = cal.fwhm / FWHM_PER_SIGMA;
    let jitter = Normal::new(0.0, sigma).expect("positive sigma");
    let pulse_counts = Poisson::new(cal.mean_clicks).expect("positive mean");
    let dark_mean = detectors.dark_rate * 1e-9 * cycle_len;

    let cycles = (0..cal.n_pulses)
        .into_par_iter()
        .map(|k| {
            let mut rng = item_rng(seed, stream::CALIBRATION, k);
            let mut clicks: Vec<(f64, usize)> = Vec::new();
            for d in 0..n_det {
                let c = cal.pulse_center(d);
                let n = pulse_counts.sample(&mut rng) as usize;
                for _ in 0..n {
                    clicks.push((c + jitter.sample(&mut rng), d));
                }
                if dark_mean > 0.0 {
                    let m = Poisson::new(dark_mean).expect("positive mean").sample(&mut rng) as usize;
                    for _ in 0..m {
                        clicks.push((rng.random::<f64>() * cycle_len, d));
                    }
                }
            }
            let primary = clicks.len();
            for i in 0..primary {
                let (t, d) = clicks[i];
                if ap[d] > 0.0 && rng.random::<f64>() < ap[d] {
                    clicks.push((t + detectors.afterpulse_shape.sample(&mut rng), d));
                }
            }
            let mut recs: Vec<ClickRecord> = clicks
                .into_iter()
                .filter(|&(t, _)| (0.0..cycle_len).contains(&t))
                .map(|(t, d)| ClickRecord {
                    cycle_id: k,
                    detector_id: d,
                    timestamp_ps: quantize_ps(t),
                })
                .collect();
            recs.sort_unstable();
            recs
        })
        .collect::<Vec<_>>();
    Ok(cycles.into_iter().flatten().collect())
}
