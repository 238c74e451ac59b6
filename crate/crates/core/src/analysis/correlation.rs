//! Cross-detector coincidences of reflected control photons.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use super::herald::{AnalysisSetup, AtomEvent};
use crate::error::{Error, Result};
use crate::experiment::End;
use crate::seeding::{item_rng, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Antibunching {
    pub max_dn: usize,
    /// C(Δn) for Δn = −max_dn ..= max_dn.
    pub coincidences: Vec<u64>,
    pub n_events: usize,
    pub detectors: [usize; 3],
}

impl Antibunching {
    pub fn at(&self, dn: i64) -> u64 {
        self.coincidences[(dn + self.max_dn as i64) as usize]
    }

    pub fn off_peak(&self) -> Vec<f64> {
        let m = self.max_dn as i64;
        (-m..=m).filter(|&d| d != 0).map(|d| self.at(d) as f64).collect()
    }

    pub fn off_peak_mean(&self) -> f64 {
        let v = self.off_peak();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }

    pub fn off_peak_std(&self) -> f64 {
        let v = self.off_peak();
        if v.len() < 2 {
            return 0.0;
        }
        let m = self.off_peak_mean();
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    /// Off-peak mean over C(0); infinite when C(0) = 0.
    pub fn suppression(&self) -> f64 {
        self.off_peak_mean() / self.at(0) as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "dn,coincidences")?;
        let m = self.max_dn as i64;
        for d in -m..=m {
            writeln!(w, "{},{}", d, self.at(d))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-event click indicators D₁..D₃ on the reflection end that has at least
/// three detectors, for events whose control is reflected to that end.
pub fn detector_matrix(setup: &AnalysisSetup, events: &[AtomEvent]) -> Result<([usize; 3], Vec<[bool; 3]>)> {
    let end = [End::Left, End::Right]
        .into_iter()
        .find(|&e| setup.detectors.detectors(e).len() >= 3)
        .ok_or_else(|| Error::Configuration("antibunching needs three detectors on one reflection port".into()))?;
    let group = setup.detectors.detectors(end);
    let dets = [group[0], group[1], group[2]];
    let rows = events
        .iter()
        .filter(|e| End::reflected(e.control_dir) == end)
        .map(|e| {
            let mut row = [false; 3];
            for c in &e.control_clicks {
                if let Some(k) = dets.iter().position(|&d| d == c.detector) {
                    row[k] = true;
                }
            }
            row
        })
        .collect();
    Ok((dets, rows))
}

/// C(Δn) = Σᵢ [D₁(i)D₂(i−Δn) + D₂(i)D₃(i−Δn) + D₁(i)D₃(i−Δn)].
pub fn correlate(rows: &[[bool; 3]], max_dn: usize) -> Vec<u64> {
    let n = rows.len() as i64;
    let m = max_dn as i64;
    (-m..=m)
        .map(|dn| {
            let mut c = 0u64;
            for i in 0..n {
                let j = i - dn;
                if j < 0 || j >= n {
                    continue;
                }
                let (a, b) = (rows[i as usize], rows[j as usize]);
                c += (a[0] && b[1]) as u64 + (a[1] && b[2]) as u64 + (a[0] && b[2]) as u64;
            }
            c
        })
        .collect()
}

pub fn antibunching(setup: &AnalysisSetup, events: &[AtomEvent], max_dn: usize) -> Result<Antibunching> {
    let (detectors, rows) = detector_matrix(setup, events)?;
    Ok(Antibunching {
        max_dn,
        coincidences: correlate(&rows, max_dn),
        n_events: rows.len(),
        detectors,
    })
}

/// Same as [`antibunching`] after permuting each detector column
/// independently, which removes any same-event correlation.
pub fn antibunching_shuffled(
    setup: &AnalysisSetup,
    events: &[AtomEvent],
    max_dn: usize,
    seed: u64,
) -> Result<Antibunching> {
    let (detectors, mut rows) = detector_matrix(setup, events)?;
    let mut rng = item_rng(seed, stream::SHUFFLE, 0);
    for k in 0..3 {
        let mut col: Vec<bool> = rows.iter().map(|r| r[k]).collect();
        col.shuffle(&mut rng);
        for (r, v) in rows.iter_mut().zip(col) {
            r[k] = v;
        }
    }
    Ok(Antibunching {
        max_dn,
        coincidences: correlate(&rows, max_dn),
        n_events: rows.len(),
        detectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn single_event_has_no_cross_pairs() {
        let c = correlate(&[[true, true, true]], 3);
        assert_eq!(c[3], 3);
        assert!(c.iter().enumerate().all(|(i, &v)| i == 3 || v == 0));
    }

    #[test]
    fn uncorrelated_clicks_are_flat() {
        let mut rng = item_rng(1, stream::SHUFFLE, 9);
        let rows: Vec<[bool; 3]> = (0..20_000)
            .map(|_| std::array::from_fn(|_| rng.random::<f64>() < 0.3))
            .collect();
        let ab = Antibunching {
            max_dn: 10,
            coincidences: correlate(&rows, 10),
            n_events: rows.len(),
            detectors: [0, 1, 2],
        };
        let ratio = ab.suppression();
        assert!((ratio - 1.0).abs() < 0.06, "{ratio}");
    }

    #[test]
    fn exact_small_case() {
        let rows = [[true, false, false], [false, true, false], [false, false, true]];
        assert_eq!(correlate(&rows, 2), vec![1, 2, 0, 0, 0]);
    }
}
