//! Per-round trace CSV: one row per iteration pairing measured metrics with
//! the bound values they are audited against. Floats carry 17 significant
//! digits so parsing a trace reproduces the run exactly.

use std::io;
use std::path::Path;

use dgd_core::diagnostics::{local_envelope, IterationRecord};
use dgd_core::theory::BoundSet;

pub const TRACE_HEADER: &str =
    "k,max_dev,dev_bound,rbar,ebar,h_norm,D,lyapunov,local_err_max,envelope,flags";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub max_dev: f64,
    /// Deviation envelope at this round, when the gradient bound exists.
    pub dev_bound: Option<f64>,
    pub rbar: f64,
    pub ebar: f64,
    pub h_norm: f64,
    pub d: Option<f64>,
    pub lyapunov: f64,
    pub local_err_max: f64,
    /// Geometric per-agent error envelope, when the rate constants exist.
    pub envelope: Option<f64>,
    /// Semicolon-joined violation labels; empty when the round is clean.
    pub flags: String,
}

/// Pairs measured records with their bound values, ready for the CSV.
pub fn rows_from_records(records: &[IterationRecord<f64>], bounds: &BoundSet<f64>) -> Vec<TraceRow> {
    let initial_mean_error = records.first().map_or(0.0, |r| r.mean_error);
    records
        .iter()
        .map(|r| TraceRow {
            k: r.round,
            max_dev: r.max_deviation,
            dev_bound: bounds.deviation_envelope(r.round),
            rbar: r.objective_error,
            ebar: r.mean_error,
            h_norm: r.gradient_norm,
            d: bounds.d,
            lyapunov: r.lyapunov,
            local_err_max: r.local_error_max,
            envelope: local_envelope(bounds, initial_mean_error, r.round),
            flags: r.flags.labels(),
        })
        .collect()
}

fn push_float(out: &mut String, v: f64) {
    out.push_str(&format!("{v:.16e}"));
}

fn push_optional(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        push_float(out, v);
    }
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 220 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.k.to_string());
        out.push(',');
        push_float(&mut out, row.max_dev);
        out.push(',');
        push_optional(&mut out, row.dev_bound);
        out.push(',');
        push_float(&mut out, row.rbar);
        out.push(',');
        push_float(&mut out, row.ebar);
        out.push(',');
        push_float(&mut out, row.h_norm);
        out.push(',');
        push_optional(&mut out, row.d);
        out.push(',');
        push_float(&mut out, row.lyapunov);
        out.push(',');
        push_float(&mut out, row.local_err_max);
        out.push(',');
        push_optional(&mut out, row.envelope);
        out.push(',');
        out.push_str(&row.flags);
        out.push('\n');
    }
    out
}

pub fn emit_trace(rows: &[TraceRow], path: &Path) -> io::Result<()> {
    std::fs::write(path, trace_to_string(rows))
}

fn parse_float(field: &str, line: usize) -> Result<f64, String> {
    field.parse().map_err(|e| format!("line {line}: bad float {field:?}: {e}"))
}

fn parse_optional(field: &str, line: usize) -> Result<Option<f64>, String> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_float(field, line).map(Some)
    }
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        Some((_, header)) => return Err(format!("unexpected header {header:?}")),
        None => return Err("empty trace".into()),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(format!("line {idx}: expected 11 fields, got {}", fields.len()));
        }
        rows.push(TraceRow {
            k: fields[0].parse().map_err(|e| format!("line {idx}: bad round: {e}"))?,
            max_dev: parse_float(fields[1], idx)?,
            dev_bound: parse_optional(fields[2], idx)?,
            rbar: parse_float(fields[3], idx)?,
            ebar: parse_float(fields[4], idx)?,
            h_norm: parse_float(fields[5], idx)?,
            d: parse_optional(fields[6], idx)?,
            lyapunov: parse_float(fields[7], idx)?,
            local_err_max: parse_float(fields[8], idx)?,
            envelope: parse_optional(fields[9], idx)?,
            flags: fields[10].to_string(),
        });
    }
    Ok(rows)
}
