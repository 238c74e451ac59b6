//! Atoms falling through the evanescent field of the resonator.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::model::{AtomLevel, GDistribution};
use crate::seeding::{item_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DurationDist {
    Exponential {
        mean: f64,
    },
    /// The atom stays until the end of the cycle.
    Infinite,
}

impl DurationDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DurationDist::Exponential { mean } => Exp::new(1.0 / mean).expect("validated mean").sample(rng),
            DurationDist::Infinite => f64::INFINITY,
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            DurationDist::Exponential { mean } => (-t / mean).exp(),
            DurationDist::Infinite => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitModel {
    /// Mean number of transits per second while the cloud falls past.
    pub arrival_rate: f64,
    pub duration: DurationDist,
    pub g_dist: GDistribution,
    /// Probability that an atom arrives in m_F = 0 and does not switch.
    pub inert_fraction: f64,
}

impl Default for TransitModel {
    fn default() -> Self {
        TransitModel {
            arrival_rate: 3.0e6,
            duration: DurationDist::Exponential { mean: 380.0 },
            g_dist: GDistribution::experiment(),
            inert_fraction: 1.0 / 3.0,
        }
    }
}

impl TransitModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::Configuration(format!(
                "arrival_rate must be >= 0, got {}",
                self.arrival_rate
            )));
        }
        if let DurationDist::Exponential { mean } = self.duration {
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(Error::Configuration(format!(
                    "transit mean duration must be positive, got {mean}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.inert_fraction) {
            return Err(Error::Configuration(format!(
                "inert_fraction must lie in [0, 1], got {}",
                self.inert_fraction
            )));
        }
        Ok(())
    }

    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let mean = cfg.f64_or("transit_mean_ns", 380.0)?;
        let duration = if cfg.bool_or("transit_infinite", false)? {
            DurationDist::Infinite
        } else {
            DurationDist::Exponential { mean }
        };
        let mean_g = cfg.f64_or("g_mean", d.g_dist.mean_g)?;
        let sigma_g = cfg.f64_or("g_sigma", d.g_dist.sigma_g)?;
        let model = TransitModel {
            arrival_rate: cfg.f64_or("arrival_rate_per_s", d.arrival_rate)?,
            duration,
            g_dist: GDistribution::new(mean_g, sigma_g)?,
            inert_fraction: cfg.f64_or("inert_fraction", d.inert_fraction)?,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transit {
    pub start: f64,
    pub duration: f64,
    pub g: f64,
    pub initial: AtomLevel,
}

impl Transit {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

/// Transits inside `[0, window)` for one cycle. Arrivals are Poisson; at
/// most one atom couples at a time, so arrivals during a transit are dropped
/// (the arrival clock restarts when the atom leaves).
pub fn sample_transits_with<R: Rng + ?Sized>(model: &TransitModel, window: f64, rng: &mut R) -> Vec<Transit> {
    let mut out = Vec::new();
    if model.arrival_rate <= 0.0 || window <= 0.0 {
        return out;
    }
    let arrivals = Exp::new(model.arrival_rate * 1e-9).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += arrivals.sample(rng);
        if t >= window {
            break;
        }
        let duration = model.duration.sample(rng);
        let g = model.g_dist.sample(rng);
        let initial = if rng.random::<f64>() < model.inert_fraction {
            AtomLevel::GZero
        } else if rng.random::<bool>() {
            AtomLevel::GMinus
        } else {
            AtomLevel::GPlus
        };
        out.push(Transit {
            start: t,
            duration,
            g,
            initial,
        });
        t += duration;
        if !t.is_finite() {
            break;
        }
    }
    out
}

pub fn sample_transits(model: &TransitModel, window: f64, seed: u64) -> Result<Vec<Transit>> {
    if !(window > 0.0) {
        return Err(Error::invalid(format!("transit window must be positive, got {window}")));
    }
    model.validate()?;
    let mut rng = item_rng(seed, stream::TRANSITS, 0);
    Ok(sample_transits_with(model, window, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_arrivals_no_transits() {
        let model = TransitModel {
            arrival_rate: 0.0,
            ..TransitModel::default()
        };
        assert!(sample_transits(&model, 1e6, 3).unwrap().is_empty());
    }

    #[test]
    fn default_durations_mostly_short() {
        let model = TransitModel::default();
        let mut rng = item_rng(9, stream::TRANSITS, 1);
        let n = 100_000;
        let long = (0..n).filter(|_| model.duration.sample(&mut rng) > 300.0).count();
        let frac = long as f64 / n as f64;
        assert!((0.35..0.50).contains(&frac), "{frac}");
    }

    #[test]
    fn deterministic_and_non_overlapping() {
        let model = TransitModel {
            arrival_rate: 2e6,
            ..TransitModel::default()
        };
        let a = sample_transits(&model, 1e6, 42).unwrap();
        let b = sample_transits(&model, 1e6, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.len() > 100);
        for w in a.windows(2) {
            assert!(w[0].end() <= w[1].start);
        }
        let inert = a.iter().filter(|t| t.initial == AtomLevel::GZero).count() as f64 / a.len() as f64;
        assert!((inert - 1.0 / 3.0).abs() < 0.1);
        assert!(a.iter().all(|t| t.g > 0.0 && t.start < 1e6));
    }

    #[test]
    fn bad_window_rejected() {
        assert!(sample_transits(&TransitModel::default(), 0.0, 1).is_err());
    }
}
