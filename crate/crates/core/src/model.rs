//! Physical parameters, atomic levels and parameter-level closed forms.
//!
//! Unit convention: every rate is an ordinary frequency ν = ω/2π in MHz and
//! every time is in ns. Rates are half-widths, so a cavity field amplitude
//! decays as exp(-κt) and the photon-number jump rate is 2κ. Dynamics use
//! angular rates ω = 2π·10⁻³·ν in ns⁻¹, see [`angular`].

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Converts a rate in MHz to an angular rate in ns⁻¹.
#[inline]
pub fn angular(nu_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * 1e-3 * nu_mhz
}

/// Ratio between the cycling-transition coupling (F=2 → F'=3) and the
/// switch-transition coupling (F=1 → F'=0).
pub const CYCLING_COUPLING_FACTOR: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Dominant atom-cavity coupling, MHz.
    pub g: f64,
    /// Parasitic coupling of each mode to the opposite circular transition, MHz.
    pub g_minus: f64,
    /// Parasitic coupling of each mode to the π transition, MHz.
    pub g_pi: f64,
    /// Intrinsic cavity loss, MHz.
    pub kappa_i: f64,
    /// Cavity-fiber coupling, MHz.
    pub kappa_ex: f64,
    /// Coupling between the counter-propagating modes, MHz.
    pub h: f64,
    /// Free-space atomic decay, MHz.
    pub gamma: f64,
    /// Decay of the cascaded source mode when it is held constant, MHz.
    pub kappa_s: f64,
}

impl SystemParams {
    /// Default free-space decay. Chosen so that the switch parameters give a
    /// cooperativity of 2.2; the Rb D2 half-width (≈3.03 MHz) is a reasonable
    /// alternative.
    pub const DEFAULT_GAMMA: f64 = 2.94;

    /// Parameters of the switch experiment: overcoupled resonator, the
    /// F=1 → F'=0 coupling and parasitic couplings from the 96% polarization overlap.
    pub fn experiment() -> Self {
        let g = 27.0 / CYCLING_COUPLING_FACTOR;
        let (g_minus, g_pi) = parasitic_couplings(g);
        SystemParams {
            g,
            g_minus,
            g_pi,
            kappa_i: 7.6,
            kappa_ex: 30.0,
            h: 1.0,
            gamma: Self::DEFAULT_GAMMA,
            kappa_s: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("g_minus", self.g_minus),
            ("g_pi", self.g_pi),
            ("kappa_i", self.kappa_i),
            ("kappa_ex", self.kappa_ex),
            ("h", self.h),
            ("gamma", self.gamma),
            ("kappa_s", self.kappa_s),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} must be a finite rate >= 0, got {v}")));
            }
        }
        if self.g_minus > self.g || self.g_pi > self.g {
            return Err(Error::invalid(format!(
                "parasitic couplings ({}, {}) must not exceed g = {}",
                self.g_minus, self.g_pi, self.g
            )));
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_ex
    }

    pub fn without_parasitics(mut self) -> Self {
        self.g_minus = 0.0;
        self.g_pi = 0.0;
        self
    }

    /// Lossless, parasitic-free limit with a strongly coupled atom, in which
    /// every σ⁺ photon is reflected and toggles the atom.
    pub fn ideal_limit(self) -> Self {
        let p = self.without_parasitics();
        SystemParams {
            kappa_i: 0.0,
            h: 0.0,
            ..p.with_coupling(10.0 * p.g)
        }
    }

    /// Replaces the dominant coupling, scaling the parasitic couplings by the
    /// same factor so their ratios to `g` are kept.
    pub fn with_coupling(mut self, g: f64) -> Self {
        if self.g > 0.0 {
            let s = g / self.g;
            self.g_minus *= s;
            self.g_pi *= s;
        } else {
            let (gm, gp) = parasitic_couplings(g);
            self.g_minus = if self.g_minus > 0.0 { gm } else { 0.0 };
            self.g_pi = if self.g_pi > 0.0 { gp } else { 0.0 };
        }
        self.g = g;
        self
    }

    /// Reads the model keys (`g`, `g_minus`, `g_pi`, `kappa_i`, `kappa_ex`,
    /// `h`, `gamma`, `kappa_s`). Parasitic couplings default to g/5 and g/7.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = Self::experiment();
        let g = cfg.f64_or("g", d.g)?;
        let (gm, gp) = parasitic_couplings(g);
        let p = SystemParams {
            g,
            g_minus: cfg.f64_or("g_minus", gm)?,
            g_pi: cfg.f64_or("g_pi", gp)?,
            kappa_i: cfg.f64_or("kappa_i", d.kappa_i)?,
            kappa_ex: cfg.f64_or("kappa_ex", d.kappa_ex)?,
            h: cfg.f64_or("h", d.h)?,
            gamma: cfg.f64_or("gamma", d.gamma)?,
            kappa_s: cfg.f64_or("kappa_s", d.kappa_s)?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Atomic levels of the F=1 → F'=0 manifold, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomLevel {
    GMinus,
    GZero,
    GPlus,
    Excited,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 4] = [
        AtomLevel::GMinus,
        AtomLevel::GZero,
        AtomLevel::GPlus,
        AtomLevel::Excited,
    ];
    pub const GROUND: [AtomLevel; 3] = [AtomLevel::GMinus, AtomLevel::GZero, AtomLevel::GPlus];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_ground(self) -> bool {
        self != AtomLevel::Excited
    }

    /// The m_F = ±1 partner, used for toggle classification and mirroring.
    pub fn mirrored(self) -> Self {
        match self {
            AtomLevel::GMinus => AtomLevel::GPlus,
            AtomLevel::GPlus => AtomLevel::GMinus,
            other => other,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AtomLevel::GMinus => "g-",
            AtomLevel::GZero => "g0",
            AtomLevel::GPlus => "g+",
            AtomLevel::Excited => "e",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.label() == s)
    }
}

/// Propagation direction of a fiber photon. Rightward light is σ⁺ and feeds
/// the forward cavity mode; leftward light is σ⁻ and feeds the backward mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Rightward,
    Leftward,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Rightward => Direction::Leftward,
            Direction::Leftward => Direction::Rightward,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Rightward => "R",
            Direction::Leftward => "L",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "R" => Some(Direction::Rightward),
            "L" => Some(Direction::Leftward),
            _ => None,
        }
    }
}

/// Routing state of the switch, set by the atom's ground sublevel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchState {
    /// Atom in m_F = -1: reflects rightward (σ⁺) photons.
    ReflectRightward,
    /// Atom in m_F = +1: reflects leftward (σ⁻) photons.
    ReflectLeftward,
    /// Atom in m_F = 0: barely interacts with either direction.
    Inert,
}

impl SwitchState {
    pub fn from_level(level: AtomLevel) -> Option<Self> {
        match level {
            AtomLevel::GMinus => Some(SwitchState::ReflectRightward),
            AtomLevel::GPlus => Some(SwitchState::ReflectLeftward),
            AtomLevel::GZero => Some(SwitchState::Inert),
            AtomLevel::Excited => None,
        }
    }

    /// State after one reflection.
    pub fn toggled(self) -> Self {
        match self {
            SwitchState::ReflectRightward => SwitchState::ReflectLeftward,
            SwitchState::ReflectLeftward => SwitchState::ReflectRightward,
            SwitchState::Inert => SwitchState::Inert,
        }
    }

    pub fn reflects(self, dir: Direction) -> bool {
        matches!(
            (self, dir),
            (SwitchState::ReflectRightward, Direction::Rightward) | (SwitchState::ReflectLeftward, Direction::Leftward)
        )
    }
}

/// Gaussian spread of the coupling between atoms, truncated at zero by
/// rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GDistribution {
    pub mean_g: f64,
    pub sigma_g: f64,
}

impl GDistribution {
    pub fn new(mean_g: f64, sigma_g: f64) -> Result<Self> {
        if !(mean_g.is_finite() && sigma_g.is_finite()) || sigma_g < 0.0 {
            return Err(Error::invalid(format!(
                "g distribution needs finite mean and sigma >= 0, got ({mean_g}, {sigma_g})"
            )));
        }
        if mean_g <= 0.0 && sigma_g == 0.0 && mean_g < 0.0 {
            return Err(Error::invalid("degenerate g distribution at a negative coupling"));
        }
        if mean_g + 6.0 * sigma_g < 0.0 {
            return Err(Error::invalid("g distribution has negligible mass at g >= 0"));
        }
        Ok(GDistribution { mean_g, sigma_g })
    }

    pub fn fixed(g: f64) -> Self {
        GDistribution {
            mean_g: g,
            sigma_g: 0.0,
        }
    }

    /// Switch-transition spread matching a (27 ± 10) MHz cycling-transition fit.
    pub fn experiment() -> Self {
        GDistribution {
            mean_g: 27.0 / CYCLING_COUPLING_FACTOR,
            sigma_g: 10.0 / CYCLING_COUPLING_FACTOR,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma_g == 0.0 {
            return self.mean_g.max(0.0);
        }
        let normal = Normal::new(self.mean_g, self.sigma_g).expect("validated sigma");
        loop {
            let g = normal.sample(rng);
            if g >= 0.0 {
                return g;
            }
        }
    }
}

/// Cooperativity C = g²/((κ_i + κ_ex)γ), always from the dominant coupling.
pub fn cooperativity(params: &SystemParams) -> Result<f64> {
    let denom = params.kappa() * params.gamma;
    if !(denom > 0.0) {
        return Err(Error::invalid(format!(
            "cooperativity needs gamma > 0 and kappa_i + kappa_ex > 0 (got gamma = {}, kappa = {})",
            params.gamma,
            params.kappa()
        )));
    }
    Ok(params.g * params.g / denom)
}

/// Fiber coupling at which the empty cavity's on-resonance transmission vanishes.
pub fn critical_coupling_kex(kappa_i: f64, h: f64) -> f64 {
    kappa_i.hypot(h)
}

/// Parasitic couplings to the σ⁻ and π transitions from imperfect
/// polarization overlap: (g/5, g/7).
pub fn parasitic_couplings(g: f64) -> (f64, f64) {
    (g / 5.0, g / 7.0)
}
