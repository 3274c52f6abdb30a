//! Sweep reports as CSV or JSON, optionally with energy columns.

use std::fmt::Write as _;

use icb_core::energy::{estimate, Units, WholeUnits};
use icb_core::EnergyParams;
use serde::Serialize;

use crate::harness::{Mode, SweepReport, SweepRow};

pub const CSV_HEADER: &str = "batch_size,mode,repetitions,elapsed_s,raw_bytes,wire_bytes,compression_ratio";
pub const ENERGY_COLUMNS: &str = "net_savings_units,worthwhile";

fn csv_fields(row: &SweepRow) -> String {
    format!(
        "{},{},{},{:.6},{},{},{:.6}",
        row.batch_size,
        row.mode,
        row.repetitions,
        row.elapsed.as_secs_f64(),
        row.raw_bytes,
        row.wire_bytes,
        row.compression_ratio()
    )
}

/// The report as CSV: header, then one line per row, `\n` terminated.
pub fn emit_csv(report: &SweepReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        out.push_str(&csv_fields(row));
        out.push('\n');
    }
    out
}

/// Modeled energy of one row.
///
/// Compressed rows compare sending the raw bytes against compressing and
/// sending the payload. Raw rows do no compression, so they save nothing and
/// are never worthwhile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowEnergy {
    #[serde(serialize_with = "whole_units")]
    pub net_savings_units: Units,
    pub worthwhile: bool,
}

fn whole_units<S: serde::Serializer>(u: &Units, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_i128(u.to_integer())
}

pub fn row_energy(row: &SweepRow, params: &EnergyParams) -> RowEnergy {
    if row.mode == Mode::RawTransmit {
        return RowEnergy {
            net_savings_units: Units::from_integer(0),
            worthwhile: false,
        };
    }
    // raw_bytes > 0: a sweep row always carries at least one reading.
    let e = estimate(row.raw_bytes, row.payload_bytes, params).expect("row has raw bytes");
    RowEnergy {
        net_savings_units: e.net_savings_units,
        worthwhile: e.worthwhile(),
    }
}

/// CSV with `net_savings_units,worthwhile` appended to every line. Savings are
/// whole units, truncated toward zero.
pub fn emit_csv_with_energy(report: &SweepReport, params: &EnergyParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_HEADER},{ENERGY_COLUMNS}");
    for row in &report.rows {
        let e = row_energy(row, params);
        let _ = writeln!(
            out,
            "{},{},{}",
            csv_fields(row),
            WholeUnits(e.net_savings_units),
            e.worthwhile
        );
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    row: &'a SweepRow,
    compression_ratio: f64,
    #[serde(flatten)]
    energy: Option<RowEnergy>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    rows: Vec<JsonRow<'a>>,
    environment: &'a crate::harness::Environment,
}

/// The report as pretty JSON, with energy fields when `params` is given.
pub fn emit_json(report: &SweepReport, params: Option<&EnergyParams>) -> String {
    let rows = report
        .rows
        .iter()
        .map(|row| JsonRow {
            row,
            compression_ratio: row.compression_ratio(),
            energy: params.map(|p| row_energy(row, p)),
        })
        .collect();
    let doc = JsonReport {
        rows,
        environment: &report.environment,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Drops `elapsed_s` from CSV text so two runs can be compared on
/// everything but timing.
pub fn strip_timing(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .filter(|&(i, _)| i != 3)
            .map(|(_, f)| f)
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}
