//! Temporal shape of the input pulse, expressed as the decay rate of the
//! cascaded source mode.

use crate::error::{Error, Result};
use crate::model::angular;

/// Ratio between the FWHM and the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Where the Gaussian profile starts, in standard deviations before its center.
const GAUSSIAN_LEAD: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceProfile {
    /// Exponentially decaying source of constant angular rate (ns⁻¹), starting at t = 0.
    Constant { kappa_s: f64 },
    /// Source rate shaped so the emitted photon flux is a Gaussian with the
    /// given center and FWHM (ns).
    Gaussian { center: f64, fwhm: f64 },
}

impl SourceProfile {
    /// Constant source from a rate in MHz.
    pub fn constant_mhz(kappa_s: f64) -> Result<Self> {
        if !(kappa_s > 0.0 && kappa_s.is_finite()) {
            return Err(Error::invalid(format!("kappa_s must be positive, got {kappa_s}")));
        }
        Ok(SourceProfile::Constant {
            kappa_s: angular(kappa_s),
        })
    }

    pub fn gaussian(center: f64, fwhm: f64) -> Result<Self> {
        if !(fwhm > 0.0 && fwhm.is_finite() && center.is_finite()) {
            return Err(Error::invalid(format!("pulse FWHM must be positive, got {fwhm}")));
        }
        Ok(SourceProfile::Gaussian { center, fwhm })
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            SourceProfile::Gaussian { fwhm, .. } => Some(fwhm / FWHM_PER_SIGMA),
            SourceProfile::Constant { .. } => None,
        }
    }

    pub fn start_time(&self) -> f64 {
        match *self {
            SourceProfile::Constant { .. } => 0.0,
            SourceProfile::Gaussian { center, fwhm } => center - GAUSSIAN_LEAD * fwhm / FWHM_PER_SIGMA,
        }
    }

    /// Largest step that still resolves the profile.
    pub fn max_step(&self) -> f64 {
        match *self {
            SourceProfile::Constant { kappa_s } => (0.25 / kappa_s).min(5.0),
            SourceProfile::Gaussian { fwhm, .. } => 0.5 * fwhm / FWHM_PER_SIGMA,
        }
    }

    /// Instantaneous source amplitude decay rate κ_s(t) in ns⁻¹.
    ///
    /// For the Gaussian profile the source amplitude must track
    /// √(1 − F(t)), with F the cumulative flux, so κ_s = f/(2(1 − F)).
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            SourceProfile::Constant { kappa_s } => kappa_s,
            SourceProfile::Gaussian { center, fwhm } => {
                let sigma = fwhm / FWHM_PER_SIGMA;
                let x = (t - center) / sigma;
                let survival = 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
                if survival < 1e-250 || x > 30.0 {
                    // Mills-ratio asymptote of the Gaussian hazard.
                    return 0.5 * x / (sigma * (1.0 - 1.0 / (x * x)));
                }
                let pdf = (-0.5 * x * x).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                0.5 * pdf / survival
            }
        }
    }

    /// Fraction of the pulse still in the source at time t (single-photon
    /// survival probability with the source alone).
    pub fn remaining(&self, t: f64) -> f64 {
        match *self {
            SourceProfile::Constant { kappa_s } => (-2.0 * kappa_s * t.max(0.0)).exp(),
            SourceProfile::Gaussian { center, fwhm } => {
                let x = (t - center) / (fwhm / FWHM_PER_SIGMA);
                0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
            }
        }
    }
}
