//! Optical path to the counters, detector wiring and detector artifacts.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::model::Direction;

/// Timestamp resolution of the time tagger (ps).
pub const RESOLUTION_PS: u64 = 100;

/// Fiber end at which photons leave the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Left,
    Right,
}

impl End {
    /// End reached by a photon transmitted while travelling in `dir`.
    pub fn transmitted(dir: Direction) -> Self {
        match dir {
            Direction::Rightward => End::Right,
            Direction::Leftward => End::Left,
        }
    }

    /// End reached by a photon reflected back against `dir`.
    pub fn reflected(dir: Direction) -> Self {
        Self::transmitted(dir.opposite())
    }

    pub fn label(self) -> &'static str {
        match self {
            End::Left => "left",
            End::Right => "right",
        }
    }
}

/// Delay distribution of afterpulses: an unresponsive period after the
/// primary click followed by a two-component exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfterpulseShape {
    pub dead_time: f64,
    pub fast_tau: f64,
    pub slow_tau: f64,
    pub fast_weight: f64,
}

impl Default for AfterpulseShape {
    fn default() -> Self {
        AfterpulseShape {
            dead_time: 22.0,
            fast_tau: 20.0,
            slow_tau: 400.0,
            fast_weight: 0.8,
        }
    }
}

impl AfterpulseShape {
    /// P(lo ≤ delay < hi).
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let cdf = |t: f64| {
            let x = (t - self.dead_time).max(0.0);
            1.0 - self.fast_weight * (-x / self.fast_tau).exp() - (1.0 - self.fast_weight) * (-x / self.slow_tau).exp()
        };
        (cdf(hi) - cdf(lo)).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let tau = if rng.random::<f64>() < self.fast_weight {
            self.fast_tau
        } else {
            self.slow_tau
        };
        self.dead_time + Exp::new(1.0 / tau).expect("positive tau").sample(rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Probability that a photon leaving the resonator reaches a counter.
    pub path_transmission: f64,
    pub left_detectors: Vec<usize>,
    pub right_detectors: Vec<usize>,
    /// Fraction of input photons that bypass the resonator and show up at
    /// the reflection output (circulator leakage, fiber back-reflection).
    pub leak_fraction: f64,
    /// Dark counts per second per detector.
    pub dark_rate: f64,
    pub afterpulsing: bool,
    /// Probability per primary click of an afterpulse inside the target gate,
    /// for detectors on the left and right ends.
    pub afterpulse_window_prob: [f64; 2],
    pub afterpulse_shape: AfterpulseShape,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            path_transmission: 0.55,
            left_detectors: vec![0, 1, 2],
            right_detectors: vec![3, 4],
            leak_fraction: 0.02,
            dark_rate: 300.0,
            afterpulsing: true,
            afterpulse_window_prob: [5.3e-4, 8.1e-4],
            afterpulse_shape: AfterpulseShape::default(),
        }
    }
}

impl DetectorParams {
    pub fn n_detectors(&self) -> usize {
        self.left_detectors.len() + self.right_detectors.len()
    }

    pub fn detectors(&self, end: End) -> &[usize] {
        match end {
            End::Left => &self.left_detectors,
            End::Right => &self.right_detectors,
        }
    }

    pub fn end_of(&self, detector: usize) -> Option<End> {
        if self.left_detectors.contains(&detector) {
            Some(End::Left)
        } else if self.right_detectors.contains(&detector) {
            Some(End::Right)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Configuration(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("path_transmission", self.path_transmission)?;
        unit("leak_fraction", self.leak_fraction)?;
        for p in self.afterpulse_window_prob {
            unit("afterpulse window probability", p)?;
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::Configuration(format!(
                "dark_rate must be >= 0, got {}",
                self.dark_rate
            )));
        }
        if self.left_detectors.is_empty() || self.right_detectors.is_empty() {
            return Err(Error::Configuration(
                "each fiber end needs at least one detector".into(),
            ));
        }
        let mut all: Vec<usize> = self
            .left_detectors
            .iter()
            .chain(&self.right_detectors)
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != self.n_detectors() {
            return Err(Error::Configuration("a detector is assigned to both fiber ends".into()));
        }
        let s = &self.afterpulse_shape;
        if !(s.dead_time >= 0.0 && s.fast_tau > 0.0 && s.slow_tau > 0.0 && (0.0..=1.0).contains(&s.fast_weight)) {
            return Err(Error::Configuration("invalid afterpulse delay shape".into()));
        }
        Ok(())
    }

    /// Reads detector settings. The detector-to-end wiring has no default.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let left = cfg
            .index_list("left_detectors")?
            .ok_or_else(|| Error::Configuration("missing required key `left_detectors`".into()))?;
        let right = cfg
            .index_list("right_detectors")?
            .ok_or_else(|| Error::Configuration("missing required key `right_detectors`".into()))?;
        let shape = AfterpulseShape {
            dead_time: cfg.f64_or("afterpulse_dead_time_ns", d.afterpulse_shape.dead_time)?,
            fast_tau: cfg.f64_or("afterpulse_fast_tau_ns", d.afterpulse_shape.fast_tau)?,
            slow_tau: cfg.f64_or("afterpulse_slow_tau_ns", d.afterpulse_shape.slow_tau)?,
            fast_weight: cfg.f64_or("afterpulse_fast_weight", d.afterpulse_shape.fast_weight)?,
        };
        let p = DetectorParams {
            path_transmission: cfg.f64_or("path_transmission", d.path_transmission)?,
            left_detectors: left,
            right_detectors: right,
            leak_fraction: cfg.f64_or("leak_fraction", d.leak_fraction)?,
            dark_rate: cfg.f64_or("dark_rate_per_s", d.dark_rate)?,
            afterpulsing: cfg.bool_or("afterpulsing", d.afterpulsing)?,
            afterpulse_window_prob: [
                cfg.f64_or("afterpulse_prob_left", d.afterpulse_window_prob[0])?,
                cfg.f64_or("afterpulse_prob_right", d.afterpulse_window_prob[1])?,
            ],
            afterpulse_shape: shape,
        };
        p.validate()?;
        Ok(p)
    }

    /// Per-detector probability of an afterpulse at any delay, given the
    /// target-gate delay interval `(lo, hi)` after a control click.
    pub fn afterpulse_totals(&self, window: (f64, f64)) -> Result<Vec<f64>> {
        let n = self.n_detectors();
        let mut out = vec![0.0; n];
        if !self.afterpulsing {
            return Ok(out);
        }
        let mass = self.afterpulse_shape.mass(window.0, window.1);
        for (end, prob) in [
            (End::Left, self.afterpulse_window_prob[0]),
            (End::Right, self.afterpulse_window_prob[1]),
        ] {
            let total = if prob == 0.0 { 0.0 } else { prob / mass };
            if total > 1.0 {
                return Err(Error::Configuration(format!(
                    "afterpulse probability {prob} in the target window needs more than one afterpulse per click"
                )));
            }
            for &d in self.detectors(end) {
                if d >= n {
                    return Err(Error::Configuration(format!("detector ids must be 0..{n}, got {d}")));
                }
                out[d] = total;
            }
        }
        Ok(out)
    }
}
