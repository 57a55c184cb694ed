//! Rendering of evaluation reports.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::{EvaluationReport, RunReport};

const ABSENT: &str = "--";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Fixed-width text table.
    Table,
    /// Same cells as the table, comma separated.
    Csv,
    /// Long-format `(run, series, x_words, accuracy)` rows for plotting.
    PlotSeries,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "plot-series" => Ok(ReportFormat::PlotSeries),
            other => Err(Error::Usage(format!(
                "unknown format `{other}` (expected table, csv or plot-series)"
            ))),
        }
    }
}

/// Rounds to two decimals, ties to even.
pub fn round_half_even(v: f64) -> f64 {
    (v * 100.0).round_ties_even() / 100.0
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}", round_half_even(v)),
        None => ABSENT.to_string(),
    }
}

fn position(v: Option<u64>) -> String {
    v.map_or_else(|| ABSENT.to_string(), |p| p.to_string())
}

fn header(report: &EvaluationReport) -> Vec<String> {
    let mut h: Vec<String> = ["Run", "PLevel", "tau", "CLevel"].map(String::from).to_vec();
    for p in &report.controls {
        h.push(format!("Ac@{p}"));
        h.push(format!("EAc@{p}"));
    }
    h.extend(["MAPE", "DMR", "RR"].map(String::from));
    h
}

fn row_cells(row: &RunReport) -> Vec<String> {
    let mut r = vec![
        row.name.clone(),
        position(row.plevel),
        row.tau.to_string(),
        position(row.clevel),
    ];
    for c in &row.cells {
        r.push(cell(c.ac));
        r.push(cell(c.eac));
    }
    r.push(cell(row.mape));
    r.push(cell(row.dmr));
    r.push(cell(row.rr));
    r
}

/// Renders the report in the requested format.
pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Table => Ok(table(report).into_bytes()),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header(report)).map_err(csv_err)?;
            for row in &report.rows {
                w.write_record(row_cells(row)).map_err(csv_err)?;
            }
            w.into_inner().map_err(|e| Error::Config(e.to_string()))
        }
        ReportFormat::PlotSeries => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["run", "series", "x_words", "accuracy"])
                .map_err(csv_err)?;
            for row in &report.rows {
                for (series, points) in [("actual", &row.actual_series), ("estimated", &row.estimated_series)] {
                    for (x, acc) in points {
                        w.write_record([row.name.as_str(), series, &x.to_string(), &acc.to_string()])
                            .map_err(csv_err)?;
                    }
                }
            }
            w.into_inner().map_err(|e| Error::Config(e.to_string()))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("writing csv: {e}"))
}

fn table(report: &EvaluationReport) -> String {
    let head = header(report);
    let body: Vec<Vec<String>> = report.rows.iter().map(row_cells).collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|i| {
            body.iter()
                .map(|r| r[i].len())
                .chain(std::iter::once(head[i].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(&head);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
    }
    let _ = writeln!(
        out,
        "DMR is relative to the {} run(s) predicting on every control level.",
        report.dmr_pool
    );
    out
}
