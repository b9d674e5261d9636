//! Dataset container and its on-disk text format.
//!
//! One row per partnership with header `id,l1,l2,x1,x2,t1,c1,t2,c2`; times
//! (and covariates) in fixed decimal with 9 significant digits, treatments
//! and censoring flags as 0/1. A sidecar `<path>.meta` file records the
//! generating scenario, row count, tie count, and the SHA-256 digest of the
//! dataset bytes (computed over newline-normalized content).

use crate::error::{Error, Result};
use crate::hazard::CovariatePair;
use crate::sim::{PartnershipRecord, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DATASET_HEADER: &str = "id,l1,l2,x1,x2,t1,c1,t2,c2";

/// A set of simulated (or externally supplied) partnership records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Present when simulated in-process or recovered from a sidecar file.
    pub scenario: Option<Scenario>,
    pub records: Vec<PartnershipRecord>,
    /// Count of exact event-time ties broken by coin flip during simulation.
    pub ties: u64,
}

/// Sidecar metadata stored next to the dataset text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub n_records: u64,
    pub ties: u64,
    pub sha256: String,
    pub scenario: Option<Scenario>,
}

/// Fixed-decimal rendering with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).clamp(0, 15) as usize;
    format!("{v:.decimals$}")
}

/// Hex SHA-256 of text with line endings normalized to `\n`.
pub fn digest_normalized(text: &str) -> String {
    let normalized = text.replace("\r\n", "\n");
    let hash = Sha256::digest(normalized.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

fn scalar_covariate(l: &[f64], id: u64) -> Result<f64> {
    match l.len() {
        0 => Ok(0.0),
        1 => Ok(l[0]),
        d => Err(Error::config(format!(
            "record {id}: dataset text format stores one covariate per subject, got dimension {d}"
        ))),
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

impl Dataset {
    pub fn tau(&self) -> f64 {
        if let Some(sc) = &self.scenario {
            sc.tau
        } else {
            self.records
                .iter()
                .flat_map(|r| [r.t1, r.t2])
                .fold(0.0, f64::max)
        }
    }

    /// Render the dataset text (header + one line per record, sorted by id).
    pub fn to_text(&self) -> Result<String> {
        let mut rows: Vec<&PartnershipRecord> = self.records.iter().collect();
        rows.sort_by_key(|r| r.id);
        let mut out = String::with_capacity(64 * (rows.len() + 1));
        out.push_str(DATASET_HEADER);
        out.push('\n');
        for rec in rows {
            let l1 = scalar_covariate(&rec.l.l1, rec.id)?;
            let l2 = scalar_covariate(&rec.l.l2, rec.id)?;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                rec.id,
                format_sig9(l1),
                format_sig9(l2),
                rec.x.0 as u8,
                rec.x.1 as u8,
                format_sig9(rec.t1),
                rec.c1 as u8,
                format_sig9(rec.t2),
                rec.c2 as u8,
            ));
        }
        Ok(out)
    }

    /// Write the dataset text and its `.meta` sidecar; returns the digest.
    pub fn write(&self, path: &Path) -> Result<String> {
        let text = self.to_text()?;
        let digest = digest_normalized(&text);
        std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
        let meta = DatasetMeta {
            format_version: 1,
            n_records: self.records.len() as u64,
            ties: self.ties,
            sha256: digest.clone(),
            scenario: self.scenario.clone(),
        };
        let meta_text = toml::to_string_pretty(&meta)
            .map_err(|e| Error::config(format!("cannot serialize dataset metadata: {e}")))?;
        let mp = meta_path(path);
        std::fs::write(&mp, meta_text).map_err(|e| Error::io(&mp, e))?;
        Ok(digest)
    }

    /// Parse dataset text. Line numbers in errors are 1-based.
    pub fn from_text(text: &str, file: &str) -> Result<Dataset> {
        let parse_err = |line: usize, message: String| Error::Parse {
            file: file.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end() == DATASET_HEADER => {}
            Some((_, header)) => {
                return Err(parse_err(1, format!(
                    "bad header '{header}', expected '{DATASET_HEADER}'"
                )))
            }
            None => return Err(parse_err(1, "empty dataset file".to_string())),
        }
        let mut records = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(parse_err(line_no, format!("expected 9 fields, got {}", fields.len())));
            }
            let id: u64 = fields[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad id '{}'", fields[0])))?;
            let num = |s: &str, name: &str| -> Result<f64> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad {name} '{s}'")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(line_no, format!("non-finite {name} '{s}'")))
                }
            };
            let flag = |s: &str, name: &str| -> Result<bool> {
                match s.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(parse_err(line_no, format!("bad {name} '{other}' (want 0 or 1)"))),
                }
            };
            let l1 = num(fields[1], "l1")?;
            let l2 = num(fields[2], "l2")?;
            let x1 = flag(fields[3], "x1")?;
            let x2 = flag(fields[4], "x2")?;
            let t1 = num(fields[5], "t1")?;
            let c1 = flag(fields[6], "c1")?;
            let t2 = num(fields[7], "t2")?;
            let c2 = flag(fields[8], "c2")?;
            if t1 <= 0.0 || t2 <= 0.0 {
                return Err(parse_err(line_no, "event times must be > 0".to_string()));
            }
            let mut rec = PartnershipRecord {
                id,
                l: CovariatePair::scalar(l1, l2),
                x: (x1, x2),
                t1,
                t2,
                c1,
                c2,
                first_infected: None,
                w_first: None,
            };
            rec.derive_first_infection();
            records.push(rec);
        }
        Ok(Dataset {
            scenario: None,
            records,
            ties: 0,
        })
    }

    /// Read a dataset file; the sidecar (if present) supplies the scenario
    /// and is checked against the file digest.
    pub fn read(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut data = Dataset::from_text(&text, &path.display().to_string())?;
        let mp = meta_path(path);
        if mp.exists() {
            let meta_text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
            let meta: DatasetMeta = toml::from_str(&meta_text).map_err(|e| Error::Parse {
                file: mp.display().to_string(),
                line: 0,
                message: format!("bad metadata: {e}"),
            })?;
            let digest = digest_normalized(&text);
            if meta.sha256 != digest {
                return Err(Error::config(format!(
                    "dataset {} does not match its sidecar digest (file {}, sidecar {})",
                    path.display(),
                    digest,
                    meta.sha256
                )));
            }
            data.scenario = meta.scenario;
            data.ties = meta.ties;
        }
        Ok(data)
    }
}
