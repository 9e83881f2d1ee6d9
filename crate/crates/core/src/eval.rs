//! Positioning error statistics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::types::{interpolate_truth, GroundTruthSample, Pose2D};

/// Per-estimate 2D error against interpolated truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSeries {
    /// `(t, error in meters)`.
    pub samples: Vec<(f64, f64)>,
    /// Estimates outside the truth span.
    pub dropped: usize,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Empty("error series"));
        }
        Ok(self.samples.iter().map(|s| s.1).sum::<f64>() / self.len() as f64)
    }

    fn sorted(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.samples.iter().map(|s| s.1).collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

pub fn align_and_error(
    estimates: &[(f64, Pose2D)],
    truth: &[GroundTruthSample],
) -> Result<ErrorSeries> {
    let mut out = ErrorSeries::default();
    for &(t, p) in estimates {
        match interpolate_truth(truth, t) {
            Some(g) => out.samples.push((t, p.distance(&g))),
            None => out.dropped += 1,
        }
    }
    if out.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(out)
}

/// Empirical CDF as `(error, fraction ≤ error)` steps, one per distinct
/// error value.
pub fn cdf(series: &ErrorSeries) -> Vec<(f64, f64)> {
    let e = series.sorted();
    let n = e.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(e.len());
    for (k, v) in e.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

/// Nearest-rank percentile: the `⌈q·n⌉`-th smallest error.
pub fn percentile(series: &ErrorSeries, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidPercentile(q));
    }
    if series.is_empty() {
        return Err(Error::Empty("error series"));
    }
    let e = series.sorted();
    // Guard against q·n landing a hair above an integer.
    let rank = ((q * e.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(e[rank.min(e.len()) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub average_error: f64,
    pub p90: f64,
    pub sample_count: usize,
}

impl SummaryRow {
    pub fn from_series(method: &str, series: &ErrorSeries) -> Result<Self> {
        Ok(SummaryRow {
            method: method.to_string(),
            average_error: series.mean()?,
            p90: percentile(series, 0.9)?,
            sample_count: series.len(),
        })
    }
}

/// Relative reduction of average error of `better` against `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub method: String,
    pub baseline: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<SummaryRow>,
    pub improvements: Vec<Improvement>,
}

impl Comparison {
    pub fn from_rows(rows: Vec<SummaryRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("method list"));
        }
        let mut improvements = Vec::new();
        for a in &rows {
            for b in &rows {
                if a.method != b.method && b.average_error > 0.0 {
                    improvements.push(Improvement {
                        method: a.method.clone(),
                        baseline: b.method.clone(),
                        percent: 100.0 * (1.0 - a.average_error / b.average_error),
                    });
                }
            }
        }
        Ok(Comparison { rows, improvements })
    }

    pub fn row(&self, method: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn improvement(&self, method: &str, baseline: &str) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| i.method == method && i.baseline == baseline)
            .map(|i| i.percent)
    }

    /// Plain-text table in centimeters followed by pairwise improvements.
    pub fn report(&self) -> String {
        let w = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<w$}  {:>10}  {:>10}  {:>8}",
            "method", "mean [cm]", "p90 [cm]", "samples"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w$}  {:>10.2}  {:>10.2}  {:>8}",
                r.method,
                100.0 * r.average_error,
                100.0 * r.p90,
                r.sample_count
            );
        }
        for i in self.improvements.iter().filter(|i| i.percent > 0.0) {
            let _ = writeln!(s, "{} is {:.1}% below {}", i.method, i.percent, i.baseline);
        }
        s
    }
}

/// One summary row per labeled estimate set.
pub fn summarize(
    sets: &[(String, Vec<(f64, Pose2D)>)],
    truth: &[GroundTruthSample],
) -> Result<Comparison> {
    let rows = sets
        .iter()
        .map(|(label, est)| SummaryRow::from_series(label, &align_and_error(est, truth)?))
        .collect::<Result<Vec<_>>>()?;
    Comparison::from_rows(rows)
}

pub const CDF_HEADER: [&str; 2] = ["error_m", "fraction"];
pub const SUMMARY_HEADER: [&str; 4] = ["method", "average_error", "p90", "sample_count"];
pub const ERROR_HEADER: [&str; 2] = ["t", "error_m"];

pub fn write_cdf(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    write_csv(
        path,
        &CDF_HEADER,
        curve.iter().map(|(e, f)| [e.to_string(), f.to_string()]),
    )
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            [
                r.method.clone(),
                r.average_error.to_string(),
                r.p90.to_string(),
                r.sample_count.to_string(),
            ]
        }),
    )
}

pub fn write_error_series(path: &Path, series: &ErrorSeries) -> Result<()> {
    write_csv(
        path,
        &ERROR_HEADER,
        series
            .samples
            .iter()
            .map(|(t, e)| [t.to_string(), e.to_string()]),
    )
}
