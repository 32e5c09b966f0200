//! CSV and JSON emission of error curves.
//!
//! Floats are written with 17 significant digits, so reading a file back
//! reproduces every value exactly.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::CurveRow;

pub const CSV_HEADER: &str = "n,replicates,median_l2,q25,q75,mean_final_risk,conditions_ok";

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header line plus one line per row, each terminated by `\n`.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.replicates,
            format_float(r.median_l2),
            format_float(r.q25),
            format_float(r.q75),
            format_float(r.mean_final_risk),
            r.conditions_ok
        ));
    }
    out
}

/// Parses the output of [`curve_csv`].
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Format(format!("expected header `{CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Format(format!("line {line_no}: expected 7 fields, got {}", fields.len())));
        }
        let bad = |col: &str| Error::Format(format!("line {line_no}: bad value in column {col}"));
        let float = |idx: usize, col: &str| fields[idx].parse::<f64>().map_err(|_| bad(col));
        rows.push(CurveRow {
            n: fields[0].parse().map_err(|_| bad("n"))?,
            replicates: fields[1].parse().map_err(|_| bad("replicates"))?,
            median_l2: float(2, "median_l2")?,
            q25: float(3, "q25")?,
            q75: float(4, "q75")?,
            mean_final_risk: float(5, "mean_final_risk")?,
            conditions_ok: fields[6].parse().map_err(|_| bad("conditions_ok"))?,
        });
    }
    Ok(rows)
}

/// JSON array of objects with the CSV column names as keys.
pub fn curve_json(rows: &[CurveRow]) -> Result<String> {
    let mut out = String::from("[");
    for (i, r) in rows.iter().enumerate() {
        for (name, v) in [
            ("median_l2", r.median_l2),
            ("q25", r.q25),
            ("q75", r.q75),
            ("mean_final_risk", r.mean_final_risk),
        ] {
            if !v.is_finite() {
                return Err(Error::Format(format!("row {i}: non-finite {name} cannot be written as JSON")));
            }
        }
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "\n  {{\"n\": {}, \"replicates\": {}, \"median_l2\": {}, \"q25\": {}, \"q75\": {}, \"mean_final_risk\": {}, \"conditions_ok\": {}}}",
            r.n,
            r.replicates,
            format_float(r.median_l2),
            format_float(r.q25),
            format_float(r.q75),
            format_float(r.mean_final_risk),
            r.conditions_ok
        ));
    }
    out.push_str(if rows.is_empty() { "]\n" } else { "\n]\n" });
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    n: usize,
    replicates: usize,
    median_l2: f64,
    q25: f64,
    q75: f64,
    mean_final_risk: f64,
    conditions_ok: bool,
}

/// Parses the output of [`curve_json`].
pub fn parse_curve_json(text: &str) -> Result<Vec<CurveRow>> {
    let raw: Vec<RawRow> = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    Ok(raw
        .into_iter()
        .map(|r| CurveRow {
            n: r.n,
            replicates: r.replicates,
            median_l2: r.median_l2,
            q25: r.q25,
            q75: r.q75,
            mean_final_risk: r.mean_final_risk,
            conditions_ok: r.conditions_ok,
        })
        .collect())
}
