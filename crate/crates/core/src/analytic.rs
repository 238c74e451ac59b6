//! Steady-state spectra and weak-pulse scattering probabilities.
//!
//! All formulas take rates in MHz; only ratios enter, so no angular
//! conversion is needed here.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{cooperativity, critical_coupling_kex, GDistribution, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub detuning: f64,
    pub transmission: f64,
}

/// Fiber transmission amplitude past the resonator when only the forward
/// mode is fed, with the backward mode coupled at `h`.
fn empty_amplitude(detuning: f64, kappa_i: f64, kappa_ex: f64, h: f64) -> Complex64 {
    let z = Complex64::new(kappa_i + kappa_ex, detuning);
    1.0 - 2.0 * kappa_ex * z / (z * z + h * h)
}

pub fn empty_cavity_transmission(detuning: f64, kappa_i: f64, kappa_ex: f64, h: f64) -> f64 {
    empty_amplitude(detuning, kappa_i, kappa_ex, h).norm_sqr()
}

/// Power returned into the counter-propagating fiber direction by the
/// backward mode.
pub fn empty_cavity_reflection(detuning: f64, kappa_i: f64, kappa_ex: f64, h: f64) -> f64 {
    let z = Complex64::new(kappa_i + kappa_ex, detuning);
    (2.0 * kappa_ex * h / (z * z + h * h)).norm_sqr()
}

/// Transmission with one atom coupled at `g` to the driven traveling mode.
///
/// The atom's self-energy g²/(γ + iΔ) adds to the forward mode alongside the
/// h²/(κ + iΔ) back-coupling, which gives the two-lobed vacuum Rabi spectrum.
/// Parasitic couplings in `params` are ignored.
pub fn atom_cavity_transmission(detuning: f64, g: f64, params: &SystemParams) -> f64 {
    let z = Complex64::new(params.kappa(), detuning);
    let zg = Complex64::new(params.gamma, detuning);
    let mut denom = z;
    if params.h != 0.0 {
        denom += params.h * params.h / z;
    }
    if g != 0.0 {
        denom += g * g / zg;
    }
    (1.0 - 2.0 * params.kappa_ex / denom).norm_sqr()
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Monte Carlo average of [`atom_cavity_transmission`] over atoms whose
/// coupling follows `gdist`. The same coupling samples are used at every
/// detuning.
pub fn averaged_atom_spectrum(
    detunings: &[f64],
    gdist: &GDistribution,
    params: &SystemParams,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SpectrumPoint>> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gs: Vec<f64> = (0..n_samples).map(|_| gdist.sample(&mut rng)).collect();
    let points = detunings
        .par_iter()
        .map(|&d| {
            let mut acc = KahanSum::default();
            for &g in &gs {
                acc.add(atom_cavity_transmission(d, g, params));
            }
            SpectrumPoint {
                detuning: d,
                transmission: acc.value() / n_samples as f64,
            }
        })
        .collect();
    Ok(points)
}

fn pr_formula(kappa_i: f64, kappa_ex: f64, c: f64) -> f64 {
    let k = kappa_i + kappa_ex;
    (kappa_ex / k).powi(2) * 4.0 * c * c / (1.0 + 2.0 * c).powi(2)
}

fn pt_formula(kappa_i: f64, kappa_ex: f64, c: f64) -> f64 {
    let k = kappa_i + kappa_ex;
    if c.is_infinite() {
        return (kappa_i / k).powi(2);
    }
    (kappa_i - kappa_ex / (1.0 + 2.0 * c)).powi(2) / (k * k)
}

/// Weak-pulse reflection probability of an ideally polarized two-level atom.
pub fn reflection_probability(params: &SystemParams) -> Result<f64> {
    Ok(pr_formula(params.kappa_i, params.kappa_ex, cooperativity(params)?))
}

/// Weak-pulse transmission probability of an ideally polarized two-level atom.
pub fn transmission_probability(params: &SystemParams) -> Result<f64> {
    Ok(pt_formula(params.kappa_i, params.kappa_ex, cooperativity(params)?))
}

/// Single-photon reflection and transmission amplitudes of the Λ switch at
/// detuning Δ, from m_F = −1, without parasitic couplings and with h = 0.
fn lambda_amplitudes(detuning: f64, params: &SystemParams) -> (Complex64, Complex64) {
    let k = Complex64::new(params.kappa(), detuning);
    let gam = Complex64::new(params.gamma, detuning);
    let g2 = params.g * params.g;
    let s = gam + g2 / k;
    let d = k + g2 / s;
    let t = 1.0 - 2.0 * params.kappa_ex / d;
    let r = -2.0 * params.kappa_ex * g2 / (k * s * d);
    (r, t)
}

/// Reflection and transmission probabilities for a photon released by a
/// constant-rate source of amplitude decay `kappa_s` (MHz), whose spectrum is
/// a Lorentzian of that half-width. Tends to [`reflection_probability`] and
/// [`transmission_probability`] as `kappa_s` → 0. Requires h = 0 and no
/// parasitic couplings.
pub fn source_averaged_probabilities(params: &SystemParams, kappa_s: f64) -> Result<(f64, f64)> {
    params.validate()?;
    if params.h != 0.0 || params.g_minus != 0.0 || params.g_pi != 0.0 {
        return Err(Error::invalid(
            "source averaging needs h = 0 and no parasitic couplings",
        ));
    }
    if !(kappa_s > 0.0 && kappa_s.is_finite()) {
        return Err(Error::invalid(format!("kappa_s must be positive, got {kappa_s}")));
    }
    // Δ = κ_s tan θ turns the Lorentzian weight into dθ/π.
    const N: usize = 1 << 16;
    let step = std::f64::consts::PI / N as f64;
    let (mut pr, mut pt) = (KahanSum::default(), KahanSum::default());
    for i in 0..N {
        let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * step;
        let (r, t) = lambda_amplitudes(kappa_s * theta.tan(), params);
        pr.add(r.norm_sqr());
        pt.add(t.norm_sqr());
    }
    Ok((pr.value() / N as f64, pt.value() / N as f64))
}

/// Same closed forms parameterized directly by the cooperativity.
pub fn scattering_probabilities_for(kappa_i: f64, kappa_ex: f64, c: f64) -> Result<(f64, f64)> {
    if !(kappa_i + kappa_ex > 0.0) || c < 0.0 || c.is_nan() {
        return Err(Error::invalid(format!(
            "need kappa_i + kappa_ex > 0 and C >= 0 (got {kappa_i}, {kappa_ex}, {c})"
        )));
    }
    Ok((pr_formula(kappa_i, kappa_ex, c), pt_formula(kappa_i, kappa_ex, c)))
}

/// Evenly spaced detunings from `min` to `max` inclusive.
pub fn detuning_grid(min: f64, max: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::invalid(format!(
            "detuning grid needs min < max and at least 2 points (got {min}..{max}, {n_points})"
        )));
    }
    let step = (max - min) / (n_points - 1) as f64;
    Ok((0..n_points).map(|i| min + step * i as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitValue {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFit {
    pub g: FitValue,
    pub kappa_i: FitValue,
    pub h: FitValue,
    /// Fiber coupling implied by the critical-coupling condition.
    pub kappa_ex: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

impl SpectrumFit {
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{{g: {:.4}, stderr: {:.4}}}", self.g.value, self.g.stderr);
        let _ = writeln!(
            s,
            "{{kappa_i: {:.4}, stderr: {:.4}}}",
            self.kappa_i.value, self.kappa_i.stderr
        );
        let _ = writeln!(s, "{{h: {:.4}, stderr: {:.4}}}", self.h.value, self.h.stderr);
        let _ = writeln!(s, "{{kappa_ex: {:.4}}}", self.kappa_ex);
        let _ = writeln!(s, "{{rms_residual: {:.3e}}}", self.rms_residual);
        s
    }
}

fn fit_model(p: &Vector3<f64>, detuning: f64, base: &SystemParams) -> f64 {
    let (g, ki, h) = (p[0].abs(), p[1].abs(), p[2].abs());
    let params = SystemParams {
        kappa_i: ki,
        kappa_ex: critical_coupling_kex(ki, h),
        h,
        ..*base
    };
    atom_cavity_transmission(detuning, g, &params)
}

/// Half the separation of the two deepest local minima on either side of the
/// central transparency peak.
fn lobe_half_separation(data: &[SpectrumPoint]) -> Option<f64> {
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    let left = sorted
        .iter()
        .filter(|p| p.detuning < 0.0)
        .min_by(|a, b| a.transmission.total_cmp(&b.transmission))?;
    let right = sorted
        .iter()
        .filter(|p| p.detuning > 0.0)
        .min_by(|a, b| a.transmission.total_cmp(&b.transmission))?;
    Some(0.5 * (right.detuning - left.detuning))
}

/// Least-squares fit of (g, κ_i, h) to a measured spectrum, with the resonator
/// held at critical coupling and γ taken from `base`. Levenberg–Marquardt with
/// a finite-difference Jacobian.
pub fn fit_spectrum(data: &[SpectrumPoint], base: &SystemParams) -> Result<SpectrumFit> {
    if data.len() < 4 {
        return Err(Error::invalid("spectrum fit needs at least 4 points"));
    }
    let g0 = lobe_half_separation(data)
        .filter(|g| *g > 0.0)
        .ok_or_else(|| Error::invalid("spectrum has no minima on both sides of resonance"))?;
    let mut p = Vector3::new(g0, base.kappa_i.max(1.0), base.h.max(0.1));

    let residuals = |p: &Vector3<f64>| -> Vec<f64> {
        data.iter()
            .map(|pt| fit_model(p, pt.detuning, base) - pt.transmission)
            .collect()
    };
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let jacobian = |p: &Vector3<f64>| -> Vec<[f64; 3]> {
        data.iter()
            .map(|pt| {
                let mut row = [0.0; 3];
                for (k, slot) in row.iter_mut().enumerate() {
                    let step = 1e-6 * p[k].abs().max(1e-3);
                    let mut hi = *p;
                    let mut lo = *p;
                    hi[k] += step;
                    lo[k] -= step;
                    *slot = (fit_model(&hi, pt.detuning, base) - fit_model(&lo, pt.detuning, base)) / (2.0 * step);
                }
                row
            })
            .collect()
    };
    let normal = |jac: &[[f64; 3]], r: &[f64]| {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (row, &ri) in jac.iter().zip(r) {
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        (jtj, jtr)
    };

    let mut r = residuals(&p);
    let mut c = cost(&r);
    let mut lambda: f64 = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let jac = jacobian(&p);
        let (jtj, jtr) = normal(&jac, &r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let rt = residuals(&trial);
            let ct = cost(&rt);
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12 && delta.norm() > 1e-10 * p.norm();
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let jac = jacobian(&p);
    let (jtj, _) = normal(&jac, &r);
    let dof = (data.len() as f64 - 3.0).max(1.0);
    let s2 = c / dof;
    let cov = jtj.try_inverse().map(|m| m * s2);
    let err = |k: usize| cov.map(|m| m[(k, k)].max(0.0).sqrt()).unwrap_or(f64::NAN);
    let (g, ki, h) = (p[0].abs(), p[1].abs(), p[2].abs());
    Ok(SpectrumFit {
        g: FitValue {
            value: g,
            stderr: err(0),
        },
        kappa_i: FitValue {
            value: ki,
            stderr: err(1),
        },
        h: FitValue {
            value: h,
            stderr: err(2),
        },
        kappa_ex: critical_coupling_kex(ki, h),
        rms_residual: (c / data.len() as f64).sqrt(),
        iterations,
    })
}

pub fn write_spectrum_csv(points: &[SpectrumPoint], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "detuning_mhz,transmission")?;
    for p in points {
        writeln!(out, "{},{}", p.detuning, p.transmission)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumPoint>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let name = path.display().to_string();
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if lineno == 1 && body.starts_with("detuning") {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: name.clone(),
            line: lineno,
            msg,
        };
        let mut cols = body.split(',').map(str::trim);
        let (Some(d), Some(t)) = (cols.next(), cols.next()) else {
            return Err(parse_err("expected `detuning,transmission`".into()));
        };
        let detuning = d.parse::<f64>().map_err(|_| parse_err(format!("bad detuning `{d}`")))?;
        let transmission = t
            .parse::<f64>()
            .map_err(|_| parse_err(format!("bad transmission `{t}`")))?;
        points.push(SpectrumPoint { detuning, transmission });
    }
    Ok(points)
}
