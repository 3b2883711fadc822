//! Cross-condition comparison of run manifests.

use std::collections::BTreeSet;

use crate::exit::{CliError, Stage};
use crate::manifest::{write_metrics_csv, MetricRow, RunManifest};

fn report_error(msg: impl Into<String>) -> CliError {
    CliError::new(Stage::Report, format!("report: {}", msg.into()))
}

/// Manifests are comparable when they read the same inputs with the same
/// master seed; each condition may appear once.
pub fn check_compatible(manifests: &[RunManifest]) -> Result<(), CliError> {
    let first = manifests.first().ok_or_else(|| report_error("no manifests given"))?;
    let mut seen = BTreeSet::new();
    for m in manifests {
        if m.inputs != first.inputs {
            return Err(report_error("manifests were produced from different input files"));
        }
        if m.seeds.get("master") != first.seeds.get("master") {
            return Err(report_error("manifests use different master seeds"));
        }
        if !seen.insert(m.condition) {
            return Err(report_error(format!("condition {} appears more than once", m.condition.as_str())));
        }
    }
    Ok(())
}

/// Rows ordered by condition, then data split, then model.
pub fn build_report(manifests: &[RunManifest]) -> Result<Vec<MetricRow>, CliError> {
    check_compatible(manifests)?;
    let mut rows: Vec<MetricRow> = manifests.iter().flat_map(|m| m.metrics.iter().cloned()).collect();
    rows.sort_by_key(|r| (r.condition, r.data, r.model));
    Ok(rows)
}

pub fn report_csv(rows: &[MetricRow]) -> String {
    write_metrics_csv(rows)
}

/// Fixed-width table with three decimals; `*` marks the selected model.
pub fn report_text(rows: &[MetricRow]) -> String {
    let header = ["condition", "data", "model", "accuracy", "specificity", "sensitivity"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.condition.as_str().to_string(),
                r.data.as_str().to_string(),
                format!("{}{}", r.model, if r.selected { "*" } else { "" }),
                format!("{:.3}", r.accuracy),
                format!("{:.3}", r.specificity),
                format!("{:.3}", r.sensitivity),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 3 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    out.push_str(&line(&widths.map(|w| "-".repeat(w)).iter().map(String::as_str).collect::<Vec<_>>()));
    for row in &body {
        out.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    out
}
