//! Results file I/O, circuit-log sidecars, and tabular summaries.
//!
//! Metric floats in the results file carry 6 significant digits. Circuit
//! logs keep full precision so they can be audited and re-aggregated
//! exactly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::ReportError;
use crate::harness::{CellReport, RunReport};
use crate::strategies::StrategyKind;

/// Rounds to 6 significant digits.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

pub(crate) mod float6 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::sig6(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn to_json_string(report: &RunReport) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_results(report: &RunReport, path: &Path) -> Result<(), ReportError> {
    fs::write(path, to_json_string(report)?).map_err(io_err(path))
}

pub fn load_results(path: &Path) -> Result<RunReport, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_results(&text)
}

/// Parses and validates a results document. Errors name the offending
/// field.
pub fn parse_results(text: &str) -> Result<RunReport, ReportError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ReportError::Malformed(e.to_string()))?;
    let report: RunReport = serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        ReportError::Schema {
            field,
            reason: e.into_inner().to_string(),
        }
    })?;
    validate(&report)?;
    Ok(report)
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> ReportError {
    ReportError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Checks the invariants a well-formed report satisfies beyond its shape.
pub fn validate(report: &RunReport) -> Result<(), ReportError> {
    let scenarios: BTreeSet<u8> = report.config.scenarios.iter().map(|s| s.scenario_id).collect();
    let strategies: BTreeSet<StrategyKind> = report.config.strategies.iter().copied().collect();
    let expected = scenarios.len() * strategies.len();
    if report.cells.len() != expected {
        return Err(schema(
            "cells",
            format!("expected {expected} cells, found {}", report.cells.len()),
        ));
    }
    let mut seen = BTreeSet::new();
    for (i, cell) in report.cells.iter().enumerate() {
        if !scenarios.contains(&cell.scenario_id) {
            return Err(schema(
                format!("cells[{i}].scenario_id"),
                format!("scenario {} is not in config.scenarios", cell.scenario_id),
            ));
        }
        if !strategies.contains(&cell.strategy) {
            return Err(schema(
                format!("cells[{i}].strategy"),
                format!("{} is not in config.strategies", cell.strategy),
            ));
        }
        if !seen.insert((cell.scenario_id, cell.strategy)) {
            return Err(schema(format!("cells[{i}]"), "duplicate (scenario, strategy) cell"));
        }
        let m = &cell.metrics;
        if !(0.0..=1.0).contains(&m.success_rate) {
            return Err(schema(
                format!("cells[{i}].metrics.success_rate"),
                format!("{} is outside [0, 1]", m.success_rate),
            ));
        }
        for (name, v) in [
            ("std_bandwidth_kbps", m.std_bandwidth_kbps),
            ("std_latency_ms", m.std_latency_ms),
            ("std_efficiency", m.std_efficiency),
        ] {
            if !(v >= 0.0) {
                return Err(schema(
                    format!("cells[{i}].metrics.{name}"),
                    format!("standard deviation {v} is negative"),
                ));
            }
        }
        if m.success_count > m.circuit_count {
            return Err(schema(
                format!("cells[{i}].metrics.success_count"),
                "exceeds circuit_count",
            ));
        }
    }
    let ranked: BTreeSet<StrategyKind> = report.ranking.iter().map(|r| r.strategy).collect();
    if ranked != strategies || report.ranking.len() != strategies.len() {
        return Err(schema("ranking", "must list every configured strategy once"));
    }
    if report
        .ranking
        .windows(2)
        .any(|w| w[0].mean_efficiency < w[1].mean_efficiency)
    {
        return Err(schema("ranking", "not sorted by mean_efficiency, descending"));
    }
    Ok(())
}

fn logged_cells(report: &RunReport) -> impl Iterator<Item = &CellReport> {
    report.cells.iter().filter(|c| c.log.is_some())
}

pub fn write_circuit_log_jsonl(report: &RunReport, path: &Path) -> Result<(), ReportError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for cell in logged_cells(report) {
        for record in cell.log.as_deref().unwrap_or_default() {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n").map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

pub fn write_circuit_log_csv(report: &RunReport, path: &Path) -> Result<(), ReportError> {
    let mut writer = csv::Writer::from_path(path)?;
    for cell in logged_cells(report) {
        for record in cell.log.as_deref().unwrap_or_default() {
            writer.serialize(record)?;
        }
    }
    writer.flush().map_err(io_err(path))
}

/// Long-format rows `scenario,strategy,metric,value`.
pub fn tidy_csv(report: &RunReport) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["scenario", "strategy", "metric", "value"])?;
    for cell in &report.cells {
        for (metric, value) in cell.metrics.named_values() {
            writer.write_record([
                cell.scenario_id.to_string(),
                cell.strategy.name().to_string(),
                metric.to_string(),
                sig6(value).to_string(),
            ])?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ReportError::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-cell table printed after a run.
pub fn cell_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8}  {:<17} {:>8} {:>12} {:>11} {:>11} {:>8}",
        "scenario", "strategy", "circuits", "B_mean KB/s", "L_mean ms", "E_mean", "success"
    );
    for c in &report.cells {
        let m = &c.metrics;
        let _ = writeln!(
            out,
            "{:>8}  {:<17} {:>8} {:>12.1} {:>11.1} {:>11.3} {:>8.3}",
            c.scenario_id,
            c.strategy.name(),
            m.circuit_count,
            m.mean_bandwidth_kbps,
            m.mean_latency_ms,
            m.mean_efficiency,
            m.success_rate
        );
    }
    out
}

pub fn ranking_table(report: &RunReport) -> String {
    let mut out = String::from("efficiency ranking:\n");
    for (i, r) in report.ranking.iter().enumerate() {
        let _ = writeln!(out, "  {}. {:<17} {:.3}", i + 1, r.strategy.name(), r.mean_efficiency);
    }
    out
}

/// Per-strategy averages across scenarios, plus each strategy's latency
/// per scenario.
pub fn summary_table(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<17} {:>12} {:>11} {:>9} {:>8} {:>10} {:>10}",
        "strategy", "B_mean KB/s", "L_mean ms", "E_mean", "success", "B_std", "L_std"
    );
    for &strategy in &report.config.strategies {
        let cells: Vec<&CellReport> = report.cells.iter().filter(|c| c.strategy == strategy).collect();
        let n = cells.len().max(1) as f64;
        let avg = |f: fn(&CellReport) -> f64| cells.iter().map(|c| f(c)).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{:<17} {:>12.1} {:>11.1} {:>9.3} {:>8.3} {:>10.1} {:>10.1}",
            strategy.name(),
            avg(|c| c.metrics.mean_bandwidth_kbps),
            avg(|c| c.metrics.mean_latency_ms),
            avg(|c| c.metrics.mean_efficiency),
            avg(|c| c.metrics.success_rate),
            avg(|c| c.metrics.std_bandwidth_kbps),
            avg(|c| c.metrics.std_latency_ms),
        );
    }
    let _ = writeln!(out, "\nmean latency (ms) by scenario:");
    let _ = write!(out, "{:<17}", "strategy");
    for s in &report.config.scenarios {
        let _ = write!(out, " {:>9}", format!("S{}", s.scenario_id));
    }
    out.push('\n');
    for &strategy in &report.config.strategies {
        let _ = write!(out, "{:<17}", strategy.name());
        for s in &report.config.scenarios {
            match report.cell(s.scenario_id, strategy) {
                Some(c) => {
                    let _ = write!(out, " {:>9.1}", c.metrics.mean_latency_ms);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push('\n');
    out.push_str(&ranking_table(report));
    out
}
