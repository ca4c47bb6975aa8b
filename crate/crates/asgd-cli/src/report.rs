//! Metrics output: CSV with a self-describing JSON header line, plus an
//! optional JSON mirror.

use anyhow::Context;
use asgd::{MetricsRecord, WhichModel};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_COLUMNS: &str = "step,passes,model,error_rate,cost,excess_risk,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the metrics table. The first line is `# <header-json>`, so the
/// file stays parseable by anything that treats `#` as a comment while still
/// carrying the resolved configuration it came from.
pub fn render_metrics_csv(header: &Value, rows: &[(WhichModel, MetricsRecord)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    let _ = writeln!(out, "{CSV_COLUMNS}");
    for (which, r) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            r.passes,
            which.as_str(),
            opt(r.test_error_rate),
            r.test_cost,
            opt(r.excess_risk),
            r.elapsed_seconds
        );
    }
    out
}

pub fn write_metrics_csv(
    path: &Path,
    header: &Value,
    rows: &[(WhichModel, MetricsRecord)],
) -> anyhow::Result<()> {
    std::fs::write(path, render_metrics_csv(header, rows))
        .with_context(|| format!("writing metrics {}", path.display()))
}

pub fn write_metrics_json(
    path: &Path,
    header: &Value,
    rows: &[(WhichModel, MetricsRecord)],
) -> anyhow::Result<()> {
    let rows: Vec<Value> = rows
        .iter()
        .map(|(which, r)| {
            serde_json::json!({
                "step": r.step,
                "passes": r.passes,
                "model": which.as_str(),
                "error_rate": r.test_error_rate,
                "cost": r.test_cost,
                "excess_risk": r.excess_risk,
                "seconds": r.elapsed_seconds,
            })
        })
        .collect();
    let doc = serde_json::json!({ "header": header, "rows": rows });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing metrics {}", path.display()))
}
