//! End-to-end emulation of measurement cycles.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal, Poisson};
use rayon::prelude::*;

use super::clicks::{quantize_ps, ClickRecord};
use super::detector::{DetectorParams, End};
use super::pulses::{build_pulse_chain, ChainConfig, Gates, PulseChain, PulseKind, PulseSpec};
use super::transits::{sample_transits_with, Transit, TransitModel};
use crate::analytic::{empty_cavity_reflection, empty_cavity_transmission};
use crate::config::KvConfig;
use crate::dynamics::source::FWHM_PER_SIGMA;
use crate::dynamics::{HilbertSpace, JumpChannel, SourceProfile, TrajectoryEngine, TrajectoryOptions};
use crate::error::{Error, Result};
use crate::model::{angular, AtomLevel, Direction, SystemParams};
use crate::seeding::{item_rng, stream};

/// Numerical settings for the per-pulse trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulationOptions {
    pub fock_cut_a: usize,
    pub fock_cut_b: usize,
    /// Largest photon number simulated through the atom; the rare excess
    /// photons of a pulse scatter off the empty-cavity response instead.
    pub max_photons: usize,
    pub rtol: f64,
    /// Couplings are rounded to multiples of this bin (MHz) so that engines
    /// can be shared between transits; 0 disables sharing.
    pub g_bin: f64,
}

impl Default for EmulationOptions {
    fn default() -> Self {
        EmulationOptions {
            fock_cut_a: 2,
            fock_cut_b: 2,
            max_photons: 10,
            rtol: 1e-4,
            g_bin: 0.25,
        }
    }
}

impl EmulationOptions {
    /// Reads the `emulation_*` keys.
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let d = EmulationOptions::default();
        Ok(EmulationOptions {
            fock_cut_a: cfg.usize_or("emulation_fock_cut_a", d.fock_cut_a)?,
            fock_cut_b: cfg.usize_or("emulation_fock_cut_b", d.fock_cut_b)?,
            max_photons: cfg.usize_or("emulation_max_photons", d.max_photons)?,
            rtol: cfg.f64_or("emulation_rtol", d.rtol)?,
            g_bin: cfg.f64_or("emulation_g_bin_mhz", d.g_bin)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// System parameters; `g` and the parasitic couplings are replaced per transit.
    pub params: SystemParams,
    pub chain: ChainConfig,
    pub gates: Gates,
    pub transits: TransitModel,
    pub detectors: DetectorParams,
    pub emulation: EmulationOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SystemParams::experiment(),
            chain: ChainConfig::default(),
            gates: Gates::default(),
            transits: TransitModel::default(),
            detectors: DetectorParams::default(),
            emulation: EmulationOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_config(cfg: &mut KvConfig) -> Result<Self> {
        let emulation = EmulationOptions::from_config(cfg)?;
        let out = ExperimentConfig {
            params: SystemParams::from_config(cfg)?,
            chain: ChainConfig::from_config(cfg)?,
            gates: Gates::from_config(cfg)?,
            transits: TransitModel::from_config(cfg)?,
            detectors: DetectorParams::from_config(cfg)?,
            emulation,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.transits.validate()?;
        self.detectors.validate()?;
        build_pulse_chain(&self.chain)?;
        if self.emulation.max_photons == 0 {
            return Err(Error::Configuration("emulation_max_photons must be at least 1".into()));
        }
        if !(self.emulation.rtol > 0.0 && self.emulation.rtol < 1.0) {
            return Err(Error::Configuration("emulation_rtol must lie in (0, 1)".into()));
        }
        if !(self.emulation.g_bin >= 0.0 && self.emulation.g_bin.is_finite()) {
            return Err(Error::Configuration(
                "emulation_g_bin_mhz must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Ground truth for one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTruth {
    pub pulse_index: usize,
    /// Atom level before the pulse, `None` for an empty cavity.
    pub atom_before: Option<AtomLevel>,
    pub atom_after: Option<AtomLevel>,
    pub photons_in: usize,
    /// Photons leaving through the reflection end (including leakage).
    pub reflected: usize,
    pub transmitted: usize,
    pub leaked: usize,
    /// Primary clicks caused by this pulse.
    pub detected: usize,
    /// Whether the earliest primary click of the pulse was on the reflection end.
    pub first_click_reflected: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleTruth {
    pub cycle_id: u64,
    pub transits: Vec<Transit>,
    /// Pulses that met an atom.
    pub pulses: Vec<PulseTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub chain: PulseChain,
    pub clicks: Vec<ClickRecord>,
    pub truth: Vec<CycleTruth>,
}

/// Empty-cavity transmission and reflection averaged over the spectrum of a
/// Gaussian pulse.
pub fn pulse_averaged_empty_cavity(params: &SystemParams, fwhm: f64) -> (f64, f64) {
    let sigma_t = fwhm / FWHM_PER_SIGMA;
    let sigma_nu = 1.0 / (2.0 * sigma_t) / angular(1.0);
    let n = 801;
    let (mut wsum, mut t, mut r) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let x = -6.0 + 12.0 * i as f64 / (n - 1) as f64;
        let w = (-0.5 * x * x).exp();
        let det = x * sigma_nu;
        wsum += w;
        t += w * empty_cavity_transmission(det, params.kappa_i, params.kappa_ex, params.h);
        r += w * empty_cavity_reflection(det, params.kappa_i, params.kappa_ex, params.h);
    }
    (t / wsum, r / wsum)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    chain: PulseChain,
    /// (transmission, reflection) of the empty cavity for detection and target pulses.
    empty: [(f64, f64); 2],
    afterpulse: Vec<f64>,
    space: HilbertSpace,
    options: TrajectoryOptions,
    cavity_decay: Exp<f64>,
    /// Shared engines per coupling bin and drive direction.
    engines: Vec<[OnceLock<TrajectoryEngine>; 2]>,
}

fn direction_slot(d: Direction) -> usize {
    match d {
        Direction::Rightward => 0,
        Direction::Leftward => 1,
    }
}

struct PhotonOut {
    time: f64,
    end: End,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn binomial<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> usize {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n as u64, p.min(1.0)).expect("valid binomial").sample(rng) as usize
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let chain = build_pulse_chain(&cfg.chain)?;
        let window = cfg.gates.afterpulse_window(&cfg.chain)?;
        let afterpulse = cfg.detectors.afterpulse_totals(window)?;
        let e = &cfg.emulation;
        let space = HilbertSpace::new(e.fock_cut_a, e.fock_cut_b, e.max_photons)?;
        let options = TrajectoryOptions {
            rtol: e.rtol,
            ..TrajectoryOptions::default()
        };
        let empty = [
            pulse_averaged_empty_cavity(&cfg.params, cfg.chain.detection_fwhm),
            pulse_averaged_empty_cavity(&cfg.params, cfg.chain.target_fwhm),
        ];
        let cavity_decay =
            Exp::new(2.0 * angular(cfg.params.kappa())).map_err(|_| Error::invalid("cavity decay rate"))?;
        let n_bins = if e.g_bin > 0.0 {
            let g = &cfg.transits.g_dist;
            ((g.mean_g + 8.0 * g.sigma_g) / e.g_bin).ceil() as usize + 1
        } else {
            0
        };
        let engines = (0..n_bins).map(|_| [OnceLock::new(), OnceLock::new()]).collect();
        Ok(Context {
            cfg,
            chain,
            empty,
            afterpulse,
            space,
            options,
            cavity_decay,
            engines,
        })
    }

    fn build_engine(&self, g: f64, direction: Direction) -> Result<TrajectoryEngine> {
        TrajectoryEngine::new(&self.cfg.params.with_coupling(g), &self.space, direction)
    }

    /// Engine for coupling `g`, or `None` if `g` has no shared bin.
    fn shared_engine(&self, g: f64, direction: Direction) -> Result<Option<&TrajectoryEngine>> {
        let bin = self.cfg.emulation.g_bin;
        if bin <= 0.0 {
            return Ok(None);
        }
        let k = (g / bin).round() as usize;
        let Some(cell) = self.engines.get(k) else {
            return Ok(None);
        };
        let slot = &cell[direction_slot(direction)];
        if let Some(e) = slot.get() {
            return Ok(Some(e));
        }
        let engine = self.build_engine(k as f64 * bin, direction)?;
        Ok(Some(slot.get_or_init(|| engine)))
    }

    fn empty_response(&self, p: &PulseSpec) -> (f64, f64) {
        match p.kind {
            PulseKind::Detection => self.empty[0],
            PulseKind::Target => self.empty[1],
        }
    }

    fn cycle(&self, cycle_id: u64, rng: &mut ChaCha8Rng) -> Result<(Vec<ClickRecord>, CycleTruth)> {
        let cfg = self.cfg;
        let det = &cfg.detectors;
        let cycle_len = self.chain.cycle_length();
        let transits = sample_transits_with(&cfg.transits, cycle_len, rng);

        let mut clicks: Vec<(f64, usize)> = Vec::new();
        let mut truth = Vec::new();
        let mut outputs: Vec<PhotonOut> = Vec::new();

        let mut ti = 0;
        let mut loaded: Option<usize> = None;
        let mut engines: [Option<TrajectoryEngine>; 2] = [None, None];
        let mut atom = AtomLevel::GMinus;

        for (index, p) in self.chain.pulses.iter().enumerate() {
            let center = p.center();
            while ti < transits.len() && transits[ti].end() <= center {
                ti += 1;
            }
            let present = ti < transits.len() && transits[ti].covers(center);
            if present && loaded != Some(ti) {
                loaded = Some(ti);
                engines = [None, None];
                atom = transits[ti].initial;
            }

            let sigma = p.fwhm / FWHM_PER_SIGMA;
            let jitter = Normal::new(0.0, sigma).expect("positive sigma");
            let n_in = poisson(p.mean_photons, rng);
            let leaked = binomial(n_in, det.leak_fraction, rng);
            let mut n_cavity = n_in - leaked;
            outputs.clear();
            for _ in 0..leaked {
                outputs.push(PhotonOut {
                    time: center + jitter.sample(rng),
                    end: End::reflected(p.direction),
                });
            }

            let atom_before = present.then_some(atom);
            if present && n_cavity > 0 {
                let n_atom = n_cavity.min(cfg.emulation.max_photons);
                n_cavity -= n_atom;
                let slot = direction_slot(p.direction);
                let engine = match self.shared_engine(transits[ti].g, p.direction)? {
                    Some(e) => e,
                    None => {
                        if engines[slot].is_none() {
                            engines[slot] = Some(self.build_engine(transits[ti].g, p.direction)?);
                        }
                        engines[slot].as_ref().expect("engine built")
                    }
                };
                let profile = SourceProfile::gaussian(center, p.fwhm)?;
                let (jumps, after) = engine.run(atom, n_atom, &profile, &self.options, rng)?;
                atom = after;
                for j in jumps {
                    let end = match j.channel {
                        JumpChannel::Transmit => End::transmitted(p.direction),
                        JumpChannel::Reflect => End::reflected(p.direction),
                        _ => continue,
                    };
                    outputs.push(PhotonOut { time: j.time, end });
                }
            }
            let (t_empty, r_empty) = self.empty_response(p);
            for _ in 0..n_cavity {
                let u: f64 = rng.random();
                let end = if u < t_empty {
                    End::transmitted(p.direction)
                } else if u < t_empty + r_empty {
                    End::reflected(p.direction)
                } else {
                    continue;
                };
                outputs.push(PhotonOut {
                    time: center + jitter.sample(rng) + self.cavity_decay.sample(rng),
                    end,
                });
            }

            let reflected_end = End::reflected(p.direction);
            let mut detected = 0;
            let mut first: Option<(f64, bool)> = None;
            for o in &outputs {
                if rng.random::<f64>() >= det.path_transmission {
                    continue;
                }
                let group = det.detectors(o.end);
                let d = group[rng.random_range(0..group.len())];
                clicks.push((o.time, d));
                detected += 1;
                let refl = o.end == reflected_end;
                if first.is_none_or(|(t, _)| o.time < t) {
                    first = Some((o.time, refl));
                }
            }
            if present {
                let reflected = outputs.iter().filter(|o| o.end == reflected_end).count();
                truth.push(PulseTruth {
                    pulse_index: index,
                    atom_before,
                    atom_after: Some(atom),
                    photons_in: n_in,
                    reflected,
                    transmitted: outputs.len() - reflected,
                    leaked,
                    detected,
                    first_click_reflected: first.map(|(_, r)| r),
                });
            }
        }

        if det.dark_rate > 0.0 {
            let mean = det.dark_rate * 1e-9 * cycle_len;
            for d in 0..det.n_detectors() {
                for _ in 0..poisson(mean, rng) {
                    clicks.push((rng.random::<f64>() * cycle_len, d));
                }
            }
        }
        let primary = clicks.len();
        for i in 0..primary {
            let (t, d) = clicks[i];
            let p = self.afterpulse[d];
            if p > 0.0 && rng.random::<f64>() < p {
                clicks.push((t + det.afterpulse_shape.sample(rng), d));
            }
        }

        let mut records: Vec<ClickRecord> = clicks
            .into_iter()
            .filter(|&(t, _)| (0.0..cycle_len).contains(&t))
            .map(|(t, d)| ClickRecord {
                cycle_id,
                detector_id: d,
                timestamp_ps: quantize_ps(t),
            })
            .collect();
        records.sort_unstable();
        Ok((
            records,
            CycleTruth {
                cycle_id,
                transits,
                pulses: truth,
            },
        ))
    }
}

/// Emulates `n_cycles` independent cycles. Each cycle draws from its own
/// seeded generator, so the output does not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, n_cycles: u64, seed: u64) -> Result<ExperimentOutput> {
    let ctx = Context::new(cfg)?;
    let per_cycle = (0..n_cycles)
        .into_par_iter()
        .map(|c| {
            let mut rng = item_rng(seed, stream::CYCLE, c);
            ctx.cycle(c, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_cycle.iter().map(|(c, _)| c.len()).sum();
    let mut clicks = Vec::with_capacity(total);
    let mut truth = Vec::with_capacity(per_cycle.len());
    for (c, t) in per_cycle {
        clicks.extend(c);
        truth.push(t);
    }
    Ok(ExperimentOutput {
        chain: ctx.chain,
        clicks,
        truth,
    })
}

fn level_label(level: Option<AtomLevel>) -> &'static str {
    level.map_or("-", AtomLevel::label)
}

/// Ground-truth sidecar: transits and every pulse that met an atom.
pub fn write_truth(output: &ExperimentOutput, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# truth v1")?;
    writeln!(w, "# transit\tcycle\tstart_ns\tduration_ns\tg_mhz\tinitial")?;
    writeln!(
        w,
        "# pulse\tcycle\tindex\trole\tdirection\tatom_before\tatom_after\tphotons_in\treflected\ttransmitted\tleaked\tdetected\tfirst_click"
    )?;
    let mut line = String::new();
    for cycle in &output.truth {
        for t in &cycle.transits {
            line.clear();
            let _ = writeln!(
                line,
                "transit\t{}\t{:.3}\t{:.3}\t{:.4}\t{}",
                cycle.cycle_id,
                t.start,
                t.duration,
                t.g,
                t.initial.label()
            );
            w.write_all(line.as_bytes())?;
        }
        for p in &cycle.pulses {
            let spec = &output.chain.pulses[p.pulse_index];
            let first = match p.first_click_reflected {
                None => "-",
                Some(true) => "R",
                Some(false) => "T",
            };
            line.clear();
            let _ = writeln!(
                line,
                "pulse\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                cycle.cycle_id,
                p.pulse_index,
                spec.role.label(),
                spec.direction.label(),
                level_label(p.atom_before),
                level_label(p.atom_after),
                p.photons_in,
                p.reflected,
                p.transmitted,
                p.leaked,
                p.detected,
                first
            );
            w.write_all(line.as_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}
