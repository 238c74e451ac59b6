//! Monte Carlo wavefunction trajectories for a Fock-state input pulse.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hamiltonian::{build_sectors, JumpChannel, Sector};
use super::integrator::DormandPrince;
use super::source::SourceProfile;
use super::space::{BasisState, HilbertSpace};
use crate::error::{Error, Result};
use crate::model::{AtomLevel, Direction, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Relative tolerance of the adaptive stepper.
    pub rtol: f64,
    /// Upper bound on the step size (ns), on top of the profile's own bound.
    pub h_max: f64,
    /// Resolution of the jump-time bisection (ns).
    pub jump_time_tol: f64,
    /// Largest tolerated relative norm increase over one step.
    pub norm_tol: f64,
    /// Abort if the trajectory runs longer than this (ns).
    pub max_duration: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            rtol: 1e-8,
            h_max: f64::INFINITY,
            jump_time_tol: 1e-3,
            norm_tol: 1e-9,
            max_duration: 1e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub channel: JumpChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub jumps: Vec<Jump>,
    pub final_atom: AtomLevel,
    pub seed: u64,
}

impl TrajectoryRecord {
    /// Debug dump, one `t_ns channel` line per jump.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for j in &self.jumps {
            let _ = writeln!(s, "{:.6} {}", j.time, j.channel);
        }
        s
    }
}

/// What a trajectory looked like after one accepted integration step.
#[derive(Debug)]
pub struct StepInfo<'a> {
    pub time: f64,
    pub sector: &'a Sector,
    pub psi: &'a [Complex64],
    pub norm_before: f64,
    pub norm_after: f64,
    pub kappa_s: f64,
}

/// Sector operators for one parameter set and drive direction.
#[derive(Debug, Clone)]
pub struct TrajectoryEngine {
    space: HilbertSpace,
    drive: Direction,
    sectors: Vec<Sector>,
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn draw_threshold<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl TrajectoryEngine {
    pub fn new(params: &SystemParams, space: &HilbertSpace, drive: Direction) -> Result<Self> {
        let sectors = build_sectors(params, space, drive, space.fock_cut_s)?;
        Ok(TrajectoryEngine {
            space: *space,
            drive,
            sectors,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn drive(&self) -> Direction {
        self.drive
    }

    pub fn sector(&self, n: usize) -> Option<&Sector> {
        self.sectors.get(n)
    }

    /// ‖C_k ψ‖² for every channel available in the sector.
    pub fn channel_rates(&self, sector: &Sector, kappa_s: f64, psi: &[Complex64]) -> Vec<(JumpChannel, f64)> {
        if sector.n == 0 {
            return Vec::new();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.sectors[sector.n - 1].dim()];
        (0..sector.jumps.len())
            .map(|k| {
                sector.apply_jump(k, kappa_s, psi, &mut out);
                (sector.jumps[k].channel, norm_sqr(&out))
            })
            .collect()
    }

    /// −d‖ψ‖²/dt under the no-jump evolution.
    pub fn norm_decay_rate(&self, sector: &Sector, kappa_s: f64, psi: &[Complex64]) -> f64 {
        let mut dy = vec![Complex64::new(0.0, 0.0); sector.dim()];
        sector.derivative(kappa_s, psi, &mut dy);
        -2.0 * psi.iter().zip(&dy).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        initial_atom: AtomLevel,
        n_photons: usize,
        profile: &SourceProfile,
        opts: &TrajectoryOptions,
        rng: &mut R,
    ) -> Result<(Vec<Jump>, AtomLevel)> {
        self.run_observed(initial_atom, n_photons, profile, opts, rng, &mut |_| {})
    }

    /// As [`run`](Self::run), calling `observer` after every accepted step.
    pub fn run_observed<R: Rng + ?Sized>(
        &self,
        initial_atom: AtomLevel,
        n_photons: usize,
        profile: &SourceProfile,
        opts: &TrajectoryOptions,
        rng: &mut R,
        observer: &mut dyn FnMut(&StepInfo),
    ) -> Result<(Vec<Jump>, AtomLevel)> {
        if !initial_atom.is_ground() {
            return Err(Error::invalid("trajectories start from a ground-state atom"));
        }
        if n_photons > self.space.fock_cut_s {
            return Err(Error::invalid(format!(
                "{n_photons} source photons exceed the source cutoff {}",
                self.space.fock_cut_s
            )));
        }
        let mut jumps = Vec::with_capacity(n_photons);
        if n_photons == 0 {
            return Ok((jumps, initial_atom));
        }

        let start = BasisState {
            atom: initial_atom,
            na: 0,
            nb: 0,
            ns: n_photons,
        };
        let mut n = n_photons;
        let mut psi = vec![Complex64::new(0.0, 0.0); self.sectors[n].dim()];
        let i0 = self.sectors[n]
            .states
            .iter()
            .position(|s| *s == start)
            .expect("start state in sector");
        psi[i0] = Complex64::new(1.0, 0.0);

        let t0 = profile.start_time();
        let mut t = t0;
        let h_cap = opts.h_max.min(profile.max_step());
        let mut h = h_cap.min(0.1);
        let mut threshold = draw_threshold(rng);
        let mut dp = DormandPrince::new(psi.len(), opts.rtol);
        let h_min = 1e-12;

        while n > 0 {
            if t - t0 > opts.max_duration {
                return Err(Error::Integration {
                    time: t,
                    msg: format!("no jump after {} ns in sector {n}", opts.max_duration),
                });
            }
            let sector = &self.sectors[n];
            let mut f = |tt: f64, y: &[Complex64], dy: &mut [Complex64]| sector.derivative(profile.rate(tt), y, dy);
            let norm0 = norm_sqr(&psi);
            let h_try = h.min(h_cap);
            let err = dp.step(&mut f, t, &psi, h_try);
            if !err.is_finite() || err > 1.0 {
                h = h_try
                    * if err.is_finite() {
                        DormandPrince::factor(err)
                    } else {
                        0.1
                    };
                if h < h_min {
                    return Err(Error::Integration {
                        time: t,
                        msg: "step size underflow".into(),
                    });
                }
                continue;
            }
            let norm1 = norm_sqr(&dp.y_new);
            if norm1 > norm0 * (1.0 + opts.norm_tol) {
                h = 0.5 * h_try;
                if h < h_min {
                    return Err(Error::Integration {
                        time: t,
                        msg: format!("squared norm grew from {norm0:e} to {norm1:e}"),
                    });
                }
                continue;
            }

            if norm1 < threshold {
                // Illinois false-position search on the dense output for the
                // threshold crossing, keeping the crossing inside [lo, hi].
                let mut probe = vec![Complex64::new(0.0, 0.0); psi.len()];
                let (mut lo, mut hi) = (0.0, 1.0);
                let (mut f_lo, mut f_hi) = (norm0 - threshold, norm1 - threshold);
                let mut side = 0i8;
                let tol = opts.jump_time_tol / h_try;
                while hi - lo > tol {
                    let mut mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
                    let width = hi - lo;
                    if !(mid > lo + 0.01 * width && mid < hi - 0.01 * width) {
                        mid = 0.5 * (lo + hi);
                    }
                    dp.dense(&psi, h_try, mid, &mut probe);
                    let f_mid = norm_sqr(&probe) - threshold;
                    if f_mid < 0.0 {
                        hi = mid;
                        f_hi = f_mid;
                        if side == -1 {
                            f_lo *= 0.5;
                        }
                        side = -1;
                    } else {
                        lo = mid;
                        f_lo = f_mid;
                        if side == 1 {
                            f_hi *= 0.5;
                        }
                        side = 1;
                    }
                }
                let t_jump = t + hi * h_try;
                let kappa_s = profile.rate(t_jump);
                let at_jump = if hi < 1.0 {
                    dp.dense(&psi, h_try, hi, &mut probe);
                    probe
                } else {
                    dp.y_new.clone()
                };

                let below = self.sectors[n - 1].dim();
                let mut out = vec![Complex64::new(0.0, 0.0); below];
                let weights: Vec<f64> = (0..sector.jumps.len())
                    .map(|k| {
                        sector.apply_jump(k, kappa_s, &at_jump, &mut out);
                        norm_sqr(&out)
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::Integration {
                        time: t_jump,
                        msg: "norm threshold crossed with no open jump channel".into(),
                    });
                }
                let mut pick = rng.random::<f64>() * total;
                let mut k = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if pick < *w {
                        k = i;
                        break;
                    }
                    pick -= w;
                }
                sector.apply_jump(k, kappa_s, &at_jump, &mut out);
                let norm = norm_sqr(&out).sqrt();
                for z in out.iter_mut() {
                    *z /= norm;
                }
                jumps.push(Jump {
                    time: t_jump,
                    channel: sector.jumps[k].channel,
                });
                psi = out;
                n -= 1;
                t = t_jump;
                threshold = draw_threshold(rng);
                dp = DormandPrince::new(psi.len(), opts.rtol);
                continue;
            }

            observer(&StepInfo {
                time: t + h_try,
                sector,
                psi: &dp.y_new,
                norm_before: norm0,
                norm_after: norm1,
                kappa_s: profile.rate(t + h_try),
            });
            dp.accept(&mut psi);
            t += h_try;
            h = h_try * DormandPrince::factor(err);
        }

        // Born-rule readout of the atom in the vacuum sector.
        let vacuum = &self.sectors[0];
        let total = norm_sqr(&psi);
        let mut pick = rng.random::<f64>() * total;
        let mut final_atom = vacuum.states[psi.len() - 1].atom;
        for (s, a) in vacuum.states.iter().zip(&psi) {
            let w = a.norm_sqr();
            if pick < w {
                final_atom = s.atom;
                break;
            }
            pick -= w;
        }
        Ok((jumps, final_atom))
    }
}

/// Single trajectory for a σ⁺ probe from a constant-rate source
/// (`params.kappa_s`), with default integrator settings.
pub fn run_trajectory(
    params: &SystemParams,
    space: &HilbertSpace,
    initial_atom: AtomLevel,
    n_source_photons: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let engine = TrajectoryEngine::new(params, space, Direction::Rightward)?;
    let profile = SourceProfile::constant_mhz(params.kappa_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (jumps, final_atom) = engine.run(
        initial_atom,
        n_source_photons,
        &profile,
        &TrajectoryOptions::default(),
        &mut rng,
    )?;
    Ok(TrajectoryRecord {
        jumps,
        final_atom,
        seed,
    })
}
