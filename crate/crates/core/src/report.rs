//! CSV reports: per-repetition scores, per-cell summaries and information
//! curves. All files quote every non-numeric field (headers included) and
//! end lines with LF.

use std::fs;
use std::path::{Path, PathBuf};

use csv::{QuoteStyle, ReaderBuilder, Terminator, WriterBuilder};

use crate::error::{Error, Result};
use crate::experiment::{Audit, Scheme, SweepReport};
use crate::infocurve::InfoCurve;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(WriterBuilder::new().quote_style(QuoteStyle::NonNumeric).terminator(Terminator::Any(b'\n')).from_path(path)?)
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

pub fn infocurve_file_name(curve: &InfoCurve) -> String {
    format!("infocurve_{}.csv", curve.family)
}

/// Writes `sweep.csv`, `summary.csv` and one `infocurve_<family>.csv` per
/// curve into `dir` (created if missing). Returns the paths written.
pub fn emit_reports(report: &SweepReport, curves: &[InfoCurve], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(SWEEP_FILE);
    let mut w = writer(&path)?;
    w.write_record(["scheme", "fraction", "repetition", "f1"])?;
    for c in &report.cells {
        for (r, f1) in c.f1.iter().enumerate() {
            w.write_record([c.scheme.name().to_string(), num(c.fraction), r.to_string(), num(*f1)])?;
        }
    }
    w.flush()?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    let mut w = writer(&path)?;
    w.write_record(["scheme", "fraction", "mean_f1", "stderr", "p_value"])?;
    for c in &report.cells {
        let p = report.fractions.iter().position(|&f| f == c.fraction).map_or(f64::NAN, |i| report.p_values[i]);
        w.write_record([c.scheme.name().to_string(), num(c.fraction), num(c.mean), num(c.stderr), num(p)])?;
    }
    w.flush()?;
    written.push(path);

    for curve in curves {
        let path = dir.join(infocurve_file_name(curve));
        write_infocurve(curve, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// `k, I_bits, stderr, diff`; `diff` is empty at k = 0.
pub fn write_infocurve(curve: &InfoCurve, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "I_bits", "stderr", "diff"])?;
    for (k, (i, se)) in curve.info.iter().zip(&curve.stderr).enumerate() {
        let diff = if k == 0 { String::new() } else { num(curve.diffs[k - 1]) };
        w.write_record([k.to_string(), num(*i), num(*se), diff])?;
    }
    w.flush()?;
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    Ok(ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse { line, message: format!("bad value in column {}", i + 1) })
}

/// Rebuilds a report from `sweep.csv` alone: cells, p-values and all
/// aggregates are recomputed from the per-repetition rows.
pub fn read_sweep(path: &Path, smoothing: Option<(usize, usize)>) -> Result<SweepReport> {
    let mut rd = reader(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != ["scheme", "fraction", "repetition", "f1"] {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut fractions: Vec<f64> = Vec::new();
    let mut rows: Vec<(Scheme, f64, usize, f64)> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let scheme =
            Scheme::parse(rec.get(0).unwrap_or_default()).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let fraction: f64 = field(&rec, 1, line)?;
        if !fractions.contains(&fraction) {
            fractions.push(fraction);
        }
        rows.push((scheme, fraction, field(&rec, 2, line)?, field(&rec, 3, line)?));
    }
    let mut scores = Vec::new();
    for scheme in Scheme::ALL {
        let mut per_fraction = Vec::new();
        for &f in &fractions {
            let mut reps: Vec<(usize, f64)> =
                rows.iter().filter(|r| r.0 == scheme && r.1 == f).map(|r| (r.2, r.3)).collect();
            reps.sort_by_key(|r| r.0);
            per_fraction.push(reps.into_iter().map(|r| r.1).collect::<Vec<_>>());
        }
        if per_fraction.iter().any(|v| !v.is_empty()) {
            scores.push((scheme, per_fraction));
        }
    }
    SweepReport::from_scores(fractions, scores, smoothing, Audit::default())
}

/// Rows of `summary.csv` as raw strings, header excluded.
pub fn read_summary(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut rd = reader(path)?;
    rd.records().map(|r| Ok(r?.iter().map(str::to_string).collect())).collect()
}
