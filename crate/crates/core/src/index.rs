//! Daily distress index from predicted labels, with CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DistressLabel;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("no predictions")]
    Empty,
    #[error("index needs at least 2 days, got {0}")]
    TooFewDays(usize),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCounts {
    pub date: NaiveDate,
    pub n_d: usize,
    pub n_s: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub counts: Vec<DailyCounts>,
    pub bdi: Vec<f64>,
    pub mu_d: f64,
    pub alpha_d: f64,
    pub mu_s: f64,
    pub alpha_s: f64,
}

/// One entry per calendar day from the first to the last predicted date;
/// each predicted row counts once. Unlabeled predictions are ignored.
pub fn daily_counts(predictions: &[(NaiveDate, DistressLabel)]) -> Result<Vec<DailyCounts>, IndexError> {
    let first = predictions.iter().map(|p| p.0).min().ok_or(IndexError::Empty)?;
    let last = predictions.iter().map(|p| p.0).max().unwrap();
    let days = (last - first).num_days() as usize + 1;
    let mut out: Vec<DailyCounts> = (0..days)
        .map(|i| DailyCounts {
            date: first + chrono::Days::new(i as u64),
            n_d: 0,
            n_s: 0,
        })
        .collect();
    for &(date, label) in predictions {
        let slot = &mut out[(date - first).num_days() as usize];
        match label {
            DistressLabel::Distress => slot.n_d += 1,
            DistressLabel::Control => slot.n_s += 1,
            DistressLabel::Unlabeled => {}
        }
    }
    Ok(out)
}

fn mean_pop_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn standardized(x: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        (x - mean) / sd
    }
}

/// `(n_d - mu_d)/alpha_d - (n_s - mu_s)/alpha_s` per day, population standard
/// deviations over the given days; a term with zero deviation is 0.
pub fn bdi(counts: &[DailyCounts]) -> Result<IndexSeries, IndexError> {
    if counts.len() < 2 {
        return Err(IndexError::TooFewDays(counts.len()));
    }
    let d: Vec<f64> = counts.iter().map(|c| c.n_d as f64).collect();
    let s: Vec<f64> = counts.iter().map(|c| c.n_s as f64).collect();
    let (mu_d, alpha_d) = mean_pop_std(&d);
    let (mu_s, alpha_s) = mean_pop_std(&s);
    let bdi = d
        .iter()
        .zip(&s)
        .map(|(&nd, &ns)| standardized(nd, mu_d, alpha_d) - standardized(ns, mu_s, alpha_s))
        .collect();
    Ok(IndexSeries {
        counts: counts.to_vec(),
        bdi,
        mu_d,
        alpha_d,
        mu_s,
        alpha_s,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub date: NaiveDate,
    pub label: String,
}

/// Reads a `date,label` CSV with a header row.
pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, IndexError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "label"] {
        return Err(IndexError::Parse {
            path: path.display().to_string(),
            message: "header must be date,label".into(),
        });
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

impl IndexSeries {
    /// CSV `date,n_d,n_s,bdi`; values are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("date,n_d,n_s,bdi\n");
        for (c, b) in self.counts.iter().zip(&self.bdi) {
            writeln!(s, "{},{},{},{}", c.date, c.n_d, c.n_s, b).unwrap();
        }
        s
    }

    /// Standalone SVG line chart; one vertical marker per annotation in range.
    pub fn to_svg(&self, annotations: &[Annotation]) -> String {
        let (w, h, pad) = (800.0, 300.0, 40.0);
        let n = self.bdi.len();
        let lo = self.bdi.iter().cloned().fold(0.0f64, f64::min);
        let hi = self.bdi.iter().cloned().fold(0.0f64, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x = |i: f64| pad + (w - 2.0 * pad) * if n > 1 { i / (n - 1) as f64 } else { 0.5 };
        let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / span;
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r##"<line class="zero" x1="{pad}" x2="{}" y1="{y0:.2}" y2="{y0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            w - pad,
            y0 = y(0.0)
        )
        .unwrap();
        let points: Vec<String> = self.bdi.iter().enumerate().map(|(i, &v)| format!("{:.2},{:.2}", x(i as f64), y(v))).collect();
        writeln!(s, r##"<polyline class="bdi" fill="none" stroke="#b22" stroke-width="1.5" points="{}"/>"##, points.join(" ")).unwrap();
        if let (Some(first), Some(last)) = (self.counts.first(), self.counts.last()) {
            writeln!(s, r#"<text x="{pad}" y="{}" font-size="11">{}</text>"#, h - 10.0, first.date).unwrap();
            writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, w - pad, h - 10.0, last.date).unwrap();
            for a in annotations.iter().filter(|a| a.date >= first.date && a.date <= last.date) {
                let ax = x((a.date - first.date).num_days() as f64);
                writeln!(
                    s,
                    r##"<line class="event" x1="{ax:.2}" x2="{ax:.2}" y1="{pad}" y2="{}" stroke="#36c"><title>{}</title></line>"##,
                    h - pad,
                    escape(&a.label)
                )
                .unwrap();
            }
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn emit(&self, csv_path: &Path, svg_path: &Path, annotations: &[Annotation]) -> Result<(), IndexError> {
        let write = |p: &Path, body: String| {
            std::fs::write(p, body).map_err(|source| IndexError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        write(csv_path, self.to_csv())?;
        write(svg_path, self.to_svg(annotations))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Parses [`IndexSeries::to_csv`] output back into `(date, n_d, n_s, bdi)` rows.
pub fn parse_index_csv(text: &str) -> Result<Vec<(DailyCounts, f64)>, IndexError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.deserialize::<(NaiveDate, usize, usize, f64)>() {
        let (date, n_d, n_s, b) = rec?;
        out.push((DailyCounts { date, n_d, n_s }, b));
    }
    Ok(out)
}
