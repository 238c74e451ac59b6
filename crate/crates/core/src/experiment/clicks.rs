//! Time-tagged click files.
//!
//! ```text
//! # clicks v1
//! <cycle_id>\t<detector_id>\t<timestamp_ps>
//! ```
//!
//! Records are grouped by cycle in increasing order; within a cycle they are
//! sorted by timestamp, then detector.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::detector::RESOLUTION_PS;
use crate::error::{Error, Result};

pub const CLICKS_HEADER: &str = "# clicks v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClickRecord {
    pub cycle_id: u64,
    pub timestamp_ps: u64,
    pub detector_id: usize,
}

impl ClickRecord {
    /// Timestamp in ns.
    pub fn time(&self) -> f64 {
        self.timestamp_ps as f64 * 1e-3
    }

    fn sort_key(&self) -> (u64, u64, usize) {
        (self.cycle_id, self.timestamp_ps, self.detector_id)
    }
}

/// Quantizes a time (ns) to the tagger grid.
pub fn quantize_ps(t_ns: f64) -> u64 {
    let bins = (t_ns * 1e3 / RESOLUTION_PS as f64).floor();
    bins.max(0.0) as u64 * RESOLUTION_PS
}

pub fn write_clicks_to<W: Write>(records: &[ClickRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CLICKS_HEADER}")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.cycle_id, r.detector_id, r.timestamp_ps)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clicks(records: &[ClickRecord], path: &Path) -> Result<()> {
    write_clicks_to(records, BufWriter::new(File::create(path)?))
}

pub fn read_clicks_from<R: BufRead>(reader: R, name: &str) -> Result<Vec<ClickRecord>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let mut lines = reader.lines();
    match lines.next() {
        Some(first) => {
            let first = first?;
            if first.trim_end() != CLICKS_HEADER {
                return Err(err(1, format!("expected header `{CLICKS_HEADER}`")));
            }
        }
        None => return Err(err(1, "empty file, missing header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| err(line_no, format!("bad {what} `{s}`")))
        };
        let rec = ClickRecord {
            cycle_id: num(fields[0], "cycle id")?,
            detector_id: num(fields[1], "detector id")? as usize,
            timestamp_ps: num(fields[2], "timestamp")?,
        };
        if !rec.timestamp_ps.is_multiple_of(RESOLUTION_PS) {
            return Err(err(
                line_no,
                format!("timestamp {} is not a multiple of {RESOLUTION_PS} ps", rec.timestamp_ps),
            ));
        }
        if let Some(prev) = out.last() {
            let prev: &ClickRecord = prev;
            if rec.sort_key() < prev.sort_key() {
                return Err(err(line_no, "records out of order".into()));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_clicks(path: &Path) -> Result<Vec<ClickRecord>> {
    let file = File::open(path)?;
    read_clicks_from(BufReader::new(file), &path.display().to_string())
}

/// Splits a sorted stream into per-cycle slices.
pub fn by_cycle(records: &[ClickRecord]) -> Vec<(u64, &[ClickRecord])> {
    let mut out = Vec::new();
    let mut lo = 0;
    while lo < records.len() {
        let id = records[lo].cycle_id;
        let hi = lo + records[lo..].iter().take_while(|r| r.cycle_id == id).count();
        out.push((id, &records[lo..hi]));
        lo = hi;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(c: u64, d: usize, t: u64) -> ClickRecord {
        ClickRecord {
            cycle_id: c,
            detector_id: d,
            timestamp_ps: t,
        }
    }

    #[test]
    fn round_trip() {
        let recs = vec![rec(0, 1, 100), rec(0, 0, 200), rec(0, 3, 200), rec(4, 2, 0)];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.clicks");
        write_clicks(&recs, &path).unwrap();
        assert_eq!(read_clicks(&path).unwrap(), recs);
        write_clicks(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CLICKS_HEADER}\n"));
        assert!(read_clicks(&path).unwrap().is_empty());
    }

    #[test]
    fn rejects_off_grid_timestamp_with_line() {
        let text = format!("{CLICKS_HEADER}\n0\t1\t100\n0\t1\t250\n");
        match read_clicks_from(text.as_bytes(), "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_and_unsorted() {
        let bad = format!("{CLICKS_HEADER}\n0\t1\n");
        assert!(matches!(
            read_clicks_from(bad.as_bytes(), "x"),
            Err(Error::Parse { line: 2, .. })
        ));
        let unsorted = format!("{CLICKS_HEADER}\n0\t1\t500\n0\t1\t100\n");
        assert!(read_clicks_from(unsorted.as_bytes(), "x").is_err());
        assert!(read_clicks_from("0\t1\t100\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize_ps(12.3456), 12_300);
        assert_eq!(quantize_ps(0.0999), 0);
        assert_eq!(quantize_ps(-1.0), 0);
    }

    #[test]
    fn cycle_split() {
        let recs = vec![rec(0, 1, 100), rec(0, 0, 200), rec(2, 3, 200)];
        let parts = by_cycle(&recs);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].0, 2);
        assert_eq!(parts[0].1.len(), 2);
    }
}
