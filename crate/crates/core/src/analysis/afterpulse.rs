//! Afterpulse calibration from single-pulse runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::clicks::{by_cycle, ClickRecord};
use crate::experiment::CalibrationConfig;

/// Histogram bin width for post-pulse delays (ns).
pub const HISTOGRAM_BIN_NS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCalibration {
    pub detector: usize,
    pub pulse_clicks: u64,
    pub window_clicks: u64,
    /// Dark counts expected in the window over the whole run.
    pub dark_expected: f64,
    /// Afterpulse probability in the target window per pulse click.
    pub probability: f64,
    pub stderr: f64,
    /// Post-pulse click counts in bins of [`HISTOGRAM_BIN_NS`], starting at
    /// the end of the pulse gate.
    pub histogram: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfterpulseCalibration {
    /// Target window as delays after the pulse center (ns).
    pub window: (f64, f64),
    pub detectors: Vec<DetectorCalibration>,
}

impl AfterpulseCalibration {
    pub fn probability(&self, detector: usize) -> f64 {
        self.detectors
            .iter()
            .find(|d| d.detector == detector)
            .map_or(0.0, |d| d.probability)
    }

    /// Pulse-click weighted mean probability over a group of detectors.
    pub fn group_probability(&self, detectors: &[usize]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for d in self.detectors.iter().filter(|d| detectors.contains(&d.detector)) {
            num += d.probability * d.pulse_clicks as f64;
            den += d.pulse_clicks as f64;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# window_ns = {},{}", self.window.0, self.window.1)?;
        writeln!(
            w,
            "detector,probability,stderr,pulse_clicks,window_clicks,dark_expected"
        )?;
        for d in &self.detectors {
            writeln!(
                w,
                "{},{:e},{:e},{},{},{}",
                d.detector, d.probability, d.stderr, d.pulse_clicks, d.window_clicks, d.dark_expected
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histogram(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "detector,delay_ns,count")?;
        for d in &self.detectors {
            for (i, n) in d.histogram.iter().enumerate() {
                writeln!(w, "{},{},{}", d.detector, i as f64 * HISTOGRAM_BIN_NS, n)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a file written by [`write`](Self::write); histograms are not restored.
    pub fn read(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let err = |line: usize, msg: String| Error::Parse {
            path: name.clone(),
            line,
            msg,
        };
        let reader = BufReader::new(File::open(path)?);
        let mut window = None;
        let mut detectors = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("detector,") {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# window_ns =") {
                let parts: Vec<f64> = rest
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(line_no, "bad window line".into()))?;
                if parts.len() != 2 {
                    return Err(err(line_no, "window needs two values".into()));
                }
                window = Some((parts[0], parts[1]));
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(err(line_no, format!("expected 6 fields, got {}", f.len())));
            }
            let bad = |what: &str| err(line_no, format!("bad {what}"));
            detectors.push(DetectorCalibration {
                detector: f[0].parse().map_err(|_| bad("detector"))?,
                probability: f[1].parse().map_err(|_| bad("probability"))?,
                stderr: f[2].parse().map_err(|_| bad("stderr"))?,
                pulse_clicks: f[3].parse().map_err(|_| bad("pulse_clicks"))?,
                window_clicks: f[4].parse().map_err(|_| bad("window_clicks"))?,
                dark_expected: f[5].parse().map_err(|_| bad("dark_expected"))?,
                histogram: Vec::new(),
            });
        }
        let window = window.ok_or_else(|| err(1, "missing `# window_ns` line".into()))?;
        Ok(AfterpulseCalibration { window, detectors })
    }
}

/// Estimates, per detector, the probability that a pulse click is followed
/// by an afterpulse inside `window` (delays after the pulse center, ns).
///
/// Dark counts are measured in the quiet lead of every cycle and subtracted.
pub fn afterpulse_calibrate(
    stream: &[ClickRecord],
    cal: &CalibrationConfig,
    n_detectors: usize,
    detection_tail: f64,
    window: (f64, f64),
) -> Result<AfterpulseCalibration> {
    cal.validate()?;
    if !(window.1 > window.0) {
        return Err(Error::invalid("afterpulse window must have positive length"));
    }
    let quiet = (cal.lead - 100.0).max(0.0);
    // Pulse clicks are counted within one FWHM of the center, which keeps
    // most afterpulses (delayed by at least the dead time) out of the count.
    let gate_end = cal.fwhm;
    let tail_start = cal.fwhm + detection_tail;
    let hist_len = ((cal.spacing - 2.0 * cal.fwhm - detection_tail) / HISTOGRAM_BIN_NS)
        .floor()
        .max(0.0) as usize;
    let mut pulse = vec![0u64; n_detectors];
    let mut in_window = vec![0u64; n_detectors];
    let mut dark = vec![0u64; n_detectors];
    let mut hist = vec![vec![0u64; hist_len]; n_detectors];
    let cycles = by_cycle(stream);
    for (_, clicks) in &cycles {
        for c in clicks.iter() {
            let d = c.detector_id;
            if d >= n_detectors {
                continue;
            }
            let t = c.time();
            if t < quiet {
                dark[d] += 1;
                continue;
            }
            let delay = t - cal.pulse_center(d);
            if delay >= -cal.fwhm && delay < gate_end {
                pulse[d] += 1;
            }
            if delay >= window.0 && delay < window.1 {
                in_window[d] += 1;
            }
            if delay >= tail_start {
                let bin = ((delay - tail_start) / HISTOGRAM_BIN_NS) as usize;
                if bin < hist_len {
                    hist[d][bin] += 1;
                }
            }
        }
    }
    let n_cycles = cycles.len().max(1) as f64;
    let detectors = (0..n_detectors)
        .map(|d| {
            let rate = if quiet > 0.0 {
                dark[d] as f64 / (quiet * n_cycles)
            } else {
                0.0
            };
            let dark_expected = rate * (window.1 - window.0) * n_cycles;
            let excess = (in_window[d] as f64 - dark_expected).max(0.0);
            let (probability, stderr) = if pulse[d] > 0 {
                let n = pulse[d] as f64;
                (excess / n, (in_window[d] as f64 + dark_expected).max(1.0).sqrt() / n)
            } else {
                (0.0, 0.0)
            };
            DetectorCalibration {
                detector: d,
                pulse_clicks: pulse[d],
                window_clicks: in_window[d],
                dark_expected,
                probability,
                stderr,
                histogram: std::mem::take(&mut hist[d]),
            }
        })
        .collect();
    Ok(AfterpulseCalibration { window, detectors })
}
