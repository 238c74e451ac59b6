//! Ensembles of single-pulse trajectories and their outcome tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::hamiltonian::JumpChannel;
use super::source::SourceProfile;
use super::space::HilbertSpace;
use super::trajectory::{TrajectoryEngine, TrajectoryOptions, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::model::{AtomLevel, Direction, GDistribution, SystemParams};
use crate::seeding::{derive_seed, item_rng, stream};
use crate::stats::Proportion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Reflection,
    Transmission,
    Loss,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Reflection, Outcome::Transmission, Outcome::Loss];

    pub fn of(channel: JumpChannel) -> Self {
        match channel {
            JumpChannel::Reflect => Outcome::Reflection,
            JumpChannel::Transmit => Outcome::Transmission,
            _ => Outcome::Loss,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Reflection => "REFLECTION",
            Outcome::Transmission => "TRANSMISSION",
            Outcome::Loss => "LOSS",
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Tallies of single-photon outcomes against whether the atom toggled
/// between m_F = −1 and m_F = +1. Trajectories ending in m_F = 0 count as
/// no toggle and are also tallied in `dark`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutcomeTable {
    /// Indexed by outcome; `[toggle, no_toggle]`.
    counts: [[u64; 2]; 3],
    dark: [u64; 3],
    pub n_trajectories: u64,
}

impl OutcomeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, outcome: Outcome, initial: AtomLevel, final_atom: AtomLevel) {
        let toggled = initial != AtomLevel::GZero && final_atom == initial.mirrored() && final_atom != initial;
        self.counts[outcome.idx()][usize::from(!toggled)] += 1;
        if final_atom == AtomLevel::GZero && initial != AtomLevel::GZero {
            self.dark[outcome.idx()] += 1;
        }
        self.n_trajectories += 1;
    }

    pub fn merge(mut self, other: &OutcomeTable) -> Self {
        for o in 0..3 {
            for t in 0..2 {
                self.counts[o][t] += other.counts[o][t];
            }
            self.dark[o] += other.dark[o];
        }
        self.n_trajectories += other.n_trajectories;
        self
    }

    pub fn count(&self, outcome: Outcome, toggle: bool) -> u64 {
        self.counts[outcome.idx()][usize::from(!toggle)]
    }

    pub fn dark_count(&self, outcome: Outcome) -> u64 {
        self.dark[outcome.idx()]
    }

    pub fn outcome_count(&self, outcome: Outcome) -> u64 {
        self.count(outcome, true) + self.count(outcome, false)
    }

    pub fn probability(&self, outcome: Outcome, toggle: bool) -> f64 {
        if self.n_trajectories == 0 {
            return 0.0;
        }
        self.count(outcome, toggle) as f64 / self.n_trajectories as f64
    }

    pub fn outcome_probability(&self, outcome: Outcome) -> Proportion {
        Proportion::new(self.outcome_count(outcome), self.n_trajectories)
    }

    /// Reflection among photons that reached either fiber output.
    pub fn normalized_reflection(&self) -> Proportion {
        let r = self.outcome_count(Outcome::Reflection);
        Proportion::new(r, r + self.outcome_count(Outcome::Transmission))
    }

    pub fn toggle_given_reflection(&self) -> Proportion {
        Proportion::new(
            self.count(Outcome::Reflection, true),
            self.outcome_count(Outcome::Reflection),
        )
    }

    /// Toggle probability among photons that reached either fiber output.
    pub fn toggle_given_output(&self) -> Proportion {
        let toggled = self.count(Outcome::Reflection, true) + self.count(Outcome::Transmission, true);
        let out = self.outcome_count(Outcome::Reflection) + self.outcome_count(Outcome::Transmission);
        Proportion::new(toggled, out)
    }

    /// Fraction of lost photons whose loss still left the atom toggled.
    pub fn toggle_given_loss(&self) -> Proportion {
        Proportion::new(self.count(Outcome::Loss, true), self.outcome_count(Outcome::Loss))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("outcome,toggle,count,probability\n");
        for o in Outcome::ALL {
            for toggle in [true, false] {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    o.label(),
                    if toggle { "TOGGLE" } else { "NO_TOGGLE" },
                    self.count(o, toggle),
                    self.probability(o, toggle)
                );
            }
        }
        // m_F = 0 endings, already included in the NO_TOGGLE rows above.
        for o in Outcome::ALL {
            let p = if self.n_trajectories == 0 {
                0.0
            } else {
                self.dark_count(o) as f64 / self.n_trajectories as f64
            };
            let _ = writeln!(s, "{},DARK,{},{}", o.label(), self.dark_count(o), p);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// How single-pulse ensembles are run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterConfig {
    pub space: HilbertSpace,
    pub profile: SourceProfile,
    pub options: TrajectoryOptions,
    /// Per-trajectory coupling spread; `None` keeps `params.g` fixed.
    pub g_dist: Option<GDistribution>,
    pub drive: Direction,
}

impl ScatterConfig {
    /// 50 ns Gaussian target pulse, σ⁺ drive, default truncation.
    pub fn target_pulse() -> Self {
        ScatterConfig {
            space: HilbertSpace::default(),
            profile: SourceProfile::Gaussian {
                center: 0.0,
                fwhm: 50.0,
            },
            options: TrajectoryOptions::default(),
            g_dist: None,
            drive: Direction::Rightward,
        }
    }

    /// 15 ns Gaussian detection/control pulse, otherwise as [`Self::target_pulse`].
    pub fn control_pulse() -> Self {
        ScatterConfig {
            profile: SourceProfile::Gaussian {
                center: 0.0,
                fwhm: 15.0,
            },
            ..Self::target_pulse()
        }
    }

    /// Constant-rate source taken from `params.kappa_s`.
    pub fn constant_source(params: &SystemParams) -> Result<Self> {
        Ok(ScatterConfig {
            profile: SourceProfile::constant_mhz(params.kappa_s)?,
            ..Self::target_pulse()
        })
    }
}

/// Runs `n_traj` trajectories with `n_photons` each. Item `i` uses seeds
/// derived from (`seed`, `i`) only, so results do not depend on scheduling.
pub fn run_ensemble(
    params: &SystemParams,
    cfg: &ScatterConfig,
    initial_atom: AtomLevel,
    n_photons: usize,
    n_traj: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    if n_traj == 0 {
        return Err(Error::invalid("need at least one trajectory"));
    }
    let shared = match cfg.g_dist {
        None => Some(TrajectoryEngine::new(params, &cfg.space, cfg.drive)?),
        Some(_) => None,
    };
    (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let owned;
            let engine = match (&shared, cfg.g_dist) {
                (Some(e), _) => e,
                (None, Some(dist)) => {
                    let g = dist.sample(&mut item_rng(seed, stream::COUPLING, i));
                    owned = TrajectoryEngine::new(&params.with_coupling(g), &cfg.space, cfg.drive)?;
                    &owned
                }
                (None, None) => unreachable!(),
            };
            let traj_seed = derive_seed(seed, stream::TRAJECTORY, i);
            let mut rng = item_rng(seed, stream::TRAJECTORY, i);
            let (jumps, final_atom) = engine.run(initial_atom, n_photons, &cfg.profile, &cfg.options, &mut rng)?;
            Ok(TrajectoryRecord {
                jumps,
                final_atom,
                seed: traj_seed,
            })
        })
        .collect()
}

/// Single-photon outcome table for a configured pulse.
pub fn simulate_pulse_scattering_with(
    params: &SystemParams,
    cfg: &ScatterConfig,
    initial_atom: AtomLevel,
    n_traj: usize,
    seed: u64,
) -> Result<OutcomeTable> {
    let records = run_ensemble(params, cfg, initial_atom, 1, n_traj, seed)?;
    let mut table = OutcomeTable::new();
    for rec in &records {
        let outcome = Outcome::of(rec.jumps[0].channel);
        table.record(outcome, initial_atom, rec.final_atom);
    }
    Ok(table)
}

/// Single-photon outcome table for a 50 ns Gaussian σ⁺ pulse at fixed g.
pub fn simulate_pulse_scattering(
    params: &SystemParams,
    initial_atom: AtomLevel,
    n_traj: usize,
    seed: u64,
) -> Result<OutcomeTable> {
    simulate_pulse_scattering_with(params, &ScatterConfig::target_pulse(), initial_atom, n_traj, seed)
}

/// Two-photon pulse from m_F = −1: the probability that the second photon
/// leaving through a fiber port is reflected, given that the first one was.
/// Lost photons are skipped.
pub fn probe_second_photon_with(
    params: &SystemParams,
    cfg: &ScatterConfig,
    initial_atom: AtomLevel,
    n_traj: usize,
    seed: u64,
) -> Result<Proportion> {
    if cfg.space.fock_cut_s < 2 {
        return Err(Error::invalid("the two-photon probe needs fock_cut_s >= 2"));
    }
    let records = run_ensemble(params, cfg, initial_atom, 2, n_traj, seed)?;
    let mut hits = Proportion::default();
    for rec in &records {
        let mut outputs = rec.jumps.iter().filter(|j| j.channel.is_output());
        if let (Some(first), Some(second)) = (outputs.next(), outputs.next()) {
            if first.channel == JumpChannel::Reflect {
                hits.trials += 1;
                if second.channel == JumpChannel::Reflect {
                    hits.successes += 1;
                }
            }
        }
    }
    Ok(hits)
}

/// [`probe_second_photon_with`] for a 15 ns Gaussian σ⁺ pulse (the length of
/// a control pulse) at fixed g.
pub fn probe_second_photon(params: &SystemParams, seed: u64, n_traj: usize) -> Result<Proportion> {
    probe_second_photon_with(params, &ScatterConfig::control_pulse(), AtomLevel::GMinus, n_traj, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AtomLevel::*;

    #[test]
    fn table_bookkeeping() {
        let mut t = OutcomeTable::new();
        t.record(Outcome::Reflection, GMinus, GPlus);
        t.record(Outcome::Reflection, GMinus, GMinus);
        t.record(Outcome::Loss, GMinus, GZero);
        t.record(Outcome::Transmission, GPlus, GMinus);
        assert_eq!(t.count(Outcome::Reflection, true), 1);
        assert_eq!(t.count(Outcome::Loss, false), 1);
        assert_eq!(t.dark_count(Outcome::Loss), 1);
        assert_eq!(t.count(Outcome::Transmission, true), 1);
        let total: f64 = Outcome::ALL
            .iter()
            .flat_map(|&o| [t.probability(o, true), t.probability(o, false)])
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(t.normalized_reflection(), Proportion::new(2, 3));
        let csv = t.to_csv();
        assert!(csv.starts_with("outcome,toggle,count,probability\n"));
        assert!(csv.contains("LOSS,DARK,1,0.25"));
        let merged = t.clone().merge(&t);
        assert_eq!(merged.n_trajectories, 8);
    }

    #[test]
    fn ideal_limit_reflects_and_toggles() {
        let base = SystemParams::experiment().without_parasitics();
        let p = SystemParams {
            kappa_i: 0.0,
            ..base.with_coupling(10.0 * base.g)
        };
        let t = simulate_pulse_scattering(&p, GMinus, 200, 3).unwrap();
        assert!(t.outcome_probability(Outcome::Reflection).value().unwrap() > 0.97);
        assert!(t.toggle_given_reflection().value().unwrap() > 0.97);
    }

    #[test]
    fn second_photon_without_parasitics_is_dark() {
        // Without parasitics or backscattering every reflection toggles the
        // atom into the state that is dark to σ⁺ light.
        let p = SystemParams {
            h: 0.0,
            ..SystemParams::experiment().without_parasitics()
        };
        let cfg = ScatterConfig::control_pulse();
        let probe = probe_second_photon_with(&p, &cfg, GMinus, 1500, 5).unwrap();
        assert!(probe.trials > 20);
        assert_eq!(probe.successes, 0, "{probe:?}");
    }

    #[test]
    fn probe_needs_two_photon_space() {
        let cfg = ScatterConfig {
            space: HilbertSpace::new(1, 1, 1).unwrap(),
            ..ScatterConfig::target_pulse()
        };
        assert!(probe_second_photon_with(&SystemParams::experiment(), &cfg, GMinus, 10, 0).is_err());
    }
}
