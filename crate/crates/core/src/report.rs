//! Per-subset metric summaries in CSV, Markdown and JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde_json::json;
use thiserror::Error;

use crate::model::{Dataset, MetricMap};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("the dataset carries no metric results")]
    NoMetricsFound,
    #[error("unknown report format `{0}` (expected csv, json or md)")]
    UnknownFormat(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub count: usize,
}

/// One row per subset (dataset order), one column per metric name (sorted).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub metrics: Vec<String>,
    pub rows: Vec<(String, Vec<Option<Cell>>)>,
}

/// Running (sum, count) per metric name.
type Sums = BTreeMap<String, (f64, usize)>;

/// Means every metric present on questions, answers and hints, per subset.
pub fn summarize(dataset: &Dataset) -> Result<SummaryTable, ReportError> {
    let mut names = BTreeSet::new();
    let mut sums: Vec<(String, Sums)> = Vec::new();
    for (sname, subset) in &dataset.subsets {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        let mut add = |metrics: &MetricMap| {
            for (name, m) in metrics {
                let e = acc.entry(name.clone()).or_default();
                e.0 += m.value;
                e.1 += 1;
            }
        };
        for inst in subset.instances.values() {
            add(&inst.question.metrics);
            inst.answers.iter().for_each(|a| add(&a.metrics));
            inst.hints.iter().for_each(|h| add(&h.metrics));
        }
        names.extend(acc.keys().cloned());
        sums.push((sname.clone(), acc));
    }
    if names.is_empty() {
        return Err(ReportError::NoMetricsFound);
    }
    let metrics: Vec<String> = names.into_iter().collect();
    let rows = sums
        .into_iter()
        .map(|(sname, acc)| {
            let cells = metrics
                .iter()
                .map(|m| {
                    acc.get(m).map(|&(sum, count)| Cell {
                        mean: sum / count as f64,
                        count,
                    })
                })
                .collect();
            (sname, cells)
        })
        .collect();
    Ok(SummaryTable { metrics, rows })
}

fn two_places(cell: &Option<Cell>) -> String {
    cell.map(|c| format!("{:.2}", c.mean)).unwrap_or_default()
}

/// Wide CSV: `subset,<metric>...`, means to two decimals, blank when absent.
pub fn render_csv(table: &SummaryTable) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subset".to_string()];
    header.extend(table.metrics.iter().cloned());
    w.write_record(&header)?;
    for (subset, cells) in &table.rows {
        let mut record = vec![subset.clone()];
        record.extend(cells.iter().map(two_places));
        w.write_record(&record)?;
    }
    finish(w)
}

/// Long CSV for plotting: `subset,metric,mean,count` at full precision.
pub fn render_long_csv(table: &SummaryTable) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subset", "metric", "mean", "count"])?;
    for (subset, cells) in &table.rows {
        for (metric, cell) in table.metrics.iter().zip(cells) {
            if let Some(c) = cell {
                w.write_record([subset, metric, &c.mean.to_string(), &c.count.to_string()])?;
            }
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn render_markdown(table: &SummaryTable) -> String {
    let mut out = String::from("| subset |");
    for m in &table.metrics {
        out.push_str(&format!(" {m} |"));
    }
    out.push_str("\n| --- |");
    out.push_str(&" ---: |".repeat(table.metrics.len()));
    out.push('\n');
    for (subset, cells) in &table.rows {
        out.push_str(&format!("| {subset} |"));
        for c in cells {
            out.push_str(&format!(" {} |", two_places(c)));
        }
        out.push('\n');
    }
    out
}

/// JSON with unrounded means and counts.
pub fn render_json(table: &SummaryTable) -> String {
    let rows: Vec<_> = table
        .rows
        .iter()
        .map(|(subset, cells)| {
            let metrics: serde_json::Map<String, serde_json::Value> = table
                .metrics
                .iter()
                .zip(cells)
                .filter_map(|(m, c)| {
                    c.map(|c| (m.clone(), json!({"mean": c.mean, "count": c.count})))
                })
                .collect();
            json!({"subset": subset, "metrics": metrics})
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({"metrics": table.metrics, "subsets": rows}))
        .expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn render(
    table: &SummaryTable,
    format: ReportFormat,
    long: bool,
) -> Result<String, ReportError> {
    match (format, long) {
        (ReportFormat::Csv, false) => render_csv(table),
        (ReportFormat::Csv, true) => render_long_csv(table),
        (ReportFormat::Markdown, _) => Ok(render_markdown(table)),
        (ReportFormat::Json, _) => Ok(render_json(table)),
    }
}
