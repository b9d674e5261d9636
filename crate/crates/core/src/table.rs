//! Estimand tables, request lists, and table comparison as fixed-layout CSV.
//!
//! Tables carry one row per evaluated estimand in a fixed 7-column order
//! (`kind,t,args,value,mc_se,provenance,diagnostics`) with 6-decimal
//! fixed-point numbers and `-` for empty fields. Rows whose evaluation
//! failed (undefined estimand, insufficient data) keep their key columns
//! and carry the reason in `diagnostics`, so a run can flag and continue.
//! Request lists are the 3 key columns. Digests of emitted artifacts are
//! computed over newline-normalized text ([`crate::dataset::digest_normalized`]).

use crate::error::{Error, Result};
use crate::estimand::{EstimandArgs, EstimandKind, EstimandRequest, EstimandValue, Provenance};
use crate::estimand::format_time;
use std::collections::HashMap;
use std::fmt::Write as _;

pub const TABLE_HEADER: &str = "kind,t,args,value,mc_se,provenance,diagnostics";
pub const REQUEST_HEADER: &str = "kind,t,args";
pub const COMPARE_HEADER: &str = "kind,t,args,truth_value,empirical_value,diff,z,pass";
/// Agreement threshold for truth-vs-empirical comparison, in combined
/// Monte Carlo standard errors.
pub const COMPARE_Z_LIMIT: f64 = 3.0;

/// One table row: the request key plus an evaluated value or a flagged
/// failure reason.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub kind: EstimandKind,
    pub t: f64,
    pub args: EstimandArgs,
    /// `None` when evaluation was flagged (see `diagnostics`).
    pub value: Option<f64>,
    pub mc_se: Option<f64>,
    pub provenance: Provenance,
    pub diagnostics: String,
}

impl TableRow {
    pub fn from_value(v: &EstimandValue) -> TableRow {
        TableRow {
            kind: v.kind,
            t: v.t,
            args: v.args,
            value: Some(v.value),
            mc_se: v.mc_se,
            provenance: v.provenance,
            diagnostics: v.diagnostics.clone(),
        }
    }

    /// A row recording a failed evaluation: key columns survive, the value
    /// is empty, and the reason lands in `diagnostics`.
    pub fn flagged(request: &EstimandRequest, provenance: Provenance, reason: &Error) -> TableRow {
        TableRow {
            kind: request.kind,
            t: request.t,
            args: request.args,
            value: None,
            mc_se: None,
            provenance,
            diagnostics: format!("flagged: {reason}"),
        }
    }

    pub fn key(&self) -> String {
        EstimandRequest::new(self.kind, self.t, self.args).key()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "-".to_string(),
    }
}

/// Commas are column separators; anything embedded in a free-text field is
/// rewritten so every row has exactly 7 columns.
fn sanitize(text: &str) -> String {
    let clean: String = text
        .chars()
        .map(|c| match c {
            ',' => ';',
            '\n' | '\r' => ' ',
            c => c,
        })
        .collect();
    if clean.is_empty() {
        "-".to_string()
    } else {
        clean
    }
}

/// Render rows as the fixed 7-column CSV (header always present).
pub fn write_table(rows: &[TableRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kind.code(),
            format_time(r.t),
            r.args.encode(),
            fmt_opt(r.value),
            fmt_opt(r.mc_se),
            r.provenance,
            sanitize(&r.diagnostics)
        )
        .expect("writing to String cannot fail");
    }
    out
}

fn parse_err(file: &str, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse { file: file.to_string(), line, message: message.to_string() }
}

fn parse_opt(field: &str, what: &str, file: &str, line: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field == "-" || field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(file, line, format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(file, line, format!("{what} must be finite")));
    }
    Ok(Some(v))
}

/// Parse an estimand table; `source` names the file in errors.
pub fn parse_table(text: &str, source: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i, l),
            None => return Err(parse_err(source, 1, "empty file, expected a table header")),
        }
    };
    if header.1.trim() != TABLE_HEADER {
        return Err(parse_err(
            source,
            header.0 + 1,
            format!("expected header '{TABLE_HEADER}', found '{}'", header.1.trim()),
        ));
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(7, ',').collect();
        if fields.len() != 7 {
            return Err(parse_err(
                source,
                line_no,
                format!("expected 7 columns, found {}", fields.len()),
            ));
        }
        let kind = EstimandKind::from_code(fields[0].trim())
            .map_err(|e| parse_err(source, line_no, e))?;
        let t = fields[1]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| parse_err(source, line_no, format!("bad time '{}'", fields[1])))?;
        let args =
            EstimandArgs::decode(fields[2]).map_err(|e| parse_err(source, line_no, e))?;
        let value = parse_opt(fields[3], "value", source, line_no)?;
        let mc_se = parse_opt(fields[4], "mc_se", source, line_no)?;
        let provenance = match fields[5].trim() {
            "truth" => Provenance::Truth,
            "empirical" => Provenance::Empirical,
            other => {
                return Err(parse_err(source, line_no, format!("bad provenance '{other}'")))
            }
        };
        rows.push(TableRow {
            kind,
            t,
            args,
            value,
            mc_se,
            provenance,
            diagnostics: fields[6].trim().to_string(),
        });
    }
    Ok(rows)
}

/// Render a request list (3 key columns).
pub fn write_requests(requests: &[EstimandRequest]) -> String {
    let mut out = String::from(REQUEST_HEADER);
    out.push('\n');
    for r in requests {
        out.push_str(&r.key());
        out.push('\n');
    }
    out
}

/// Parse a request list. Blank lines and `#` comments are skipped; the
/// header row is required. Every request is validated against its kind's
/// argument contract.
pub fn parse_requests(text: &str, source: &str) -> Result<Vec<EstimandRequest>> {
    let mut requests = Vec::new();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != REQUEST_HEADER {
                return Err(parse_err(
                    source,
                    line_no,
                    format!("expected header '{REQUEST_HEADER}', found '{line}'"),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.splitn(3, ',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                source,
                line_no,
                format!("expected 3 columns, found {}", fields.len()),
            ));
        }
        let kind = EstimandKind::from_code(fields[0].trim())
            .map_err(|e| parse_err(source, line_no, e))?;
        let t = fields[1]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| parse_err(source, line_no, format!("bad time '{}'", fields[1])))?;
        let args =
            EstimandArgs::decode(fields[2]).map_err(|e| parse_err(source, line_no, e))?;
        let request = EstimandRequest::new(kind, t, args);
        request.validate().map_err(|e| parse_err(source, line_no, e))?;
        requests.push(request);
    }
    Ok(requests)
}

/// One compared row of a truth table against an empirical table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub kind: EstimandKind,
    pub t: f64,
    pub args: EstimandArgs,
    pub truth: Option<f64>,
    pub empirical: Option<f64>,
    pub diff: Option<f64>,
    /// Difference in combined MC standard errors; `None` when either side
    /// is flagged or both are exact and equal.
    pub z: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARE_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.kind.code(),
                format_time(r.t),
                r.args.encode(),
                fmt_opt(r.truth),
                fmt_opt(r.empirical),
                fmt_opt(r.diff),
                fmt_opt(r.z),
                if r.pass { "pass" } else { "FAIL" }
            )
            .expect("writing to String cannot fail");
        }
        out
    }
}

fn index_by_key<'a>(rows: &'a [TableRow], side: &str) -> Result<HashMap<String, &'a TableRow>> {
    let mut map = HashMap::with_capacity(rows.len());
    for r in rows {
        if map.insert(r.key(), r).is_some() {
            return Err(Error::config(format!(
                "{side} table has duplicate row for key '{}'",
                r.key()
            )));
        }
    }
    Ok(map)
}

/// Match rows by request key and test each pair at [`COMPARE_Z_LIMIT`]
/// combined standard errors. Key sets must match exactly; rows flagged on
/// both sides count as agreeing (same failure), on one side as failing.
pub fn compare(truth: &[TableRow], empirical: &[TableRow]) -> Result<Comparison> {
    let truth_idx = index_by_key(truth, "truth")?;
    let emp_idx = index_by_key(empirical, "empirical")?;
    let mut orphans: Vec<String> = truth_idx
        .keys()
        .filter(|k| !emp_idx.contains_key(*k))
        .map(|k| format!("truth-only '{k}'"))
        .chain(
            emp_idx
                .keys()
                .filter(|k| !truth_idx.contains_key(*k))
                .map(|k| format!("empirical-only '{k}'")),
        )
        .collect();
    if !orphans.is_empty() {
        orphans.sort();
        return Err(Error::config(format!(
            "tables do not cover the same requests: {}",
            orphans.join(", ")
        )));
    }

    let rows = truth
        .iter()
        .map(|t_row| {
            let e_row = emp_idx[&t_row.key()];
            let (diff, z, pass) = match (t_row.value, e_row.value) {
                (Some(tv), Some(ev)) => {
                    let diff = ev - tv;
                    let se = (t_row.mc_se.unwrap_or(0.0).powi(2)
                        + e_row.mc_se.unwrap_or(0.0).powi(2))
                    .sqrt();
                    if se > 0.0 {
                        let z = diff / se;
                        (Some(diff), Some(z), z.abs() <= COMPARE_Z_LIMIT)
                    } else {
                        // two exact values: equality up to printed precision
                        (Some(diff), None, diff.abs() <= 1e-9)
                    }
                }
                (None, None) => (None, None, true),
                _ => (None, None, false),
            };
            CompareRow {
                kind: t_row.kind,
                t: t_row.t,
                args: t_row.args,
                truth: t_row.value,
                empirical: e_row.value,
                diff,
                z,
                pass,
            }
        })
        .collect();
    Ok(Comparison { rows })
}
