//! Catalog of causal estimands: controlled and natural contrasts plus the
//! crude trial summaries, with the conditioning arguments each kind requires.
//!
//! Argument conventions: `x_i` is the focal subject's own treatment, `x_j`
//! the partner's, `w_j`/`w_j_prime` fixed partner infection times, and
//! `x_j_prime` the treatment world generating the partner's infection-time
//! distribution in natural (possibly cross-world) quantities. For `Ar` and
//! `Sar`, `x_i` is the conditioning arm of the subject at risk and `x_j` (Sar
//! only) the arm of the first-infected partner.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Which quantity to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimandKind {
    /// Contagion effect, fixed partner times: outcome at `w_j` minus at `w_j_prime`.
    CeControlled,
    /// Contagion effect, partner time drawn from untreated vs treated world.
    CeNatural,
    /// Susceptibility effect (own treatment 1 vs 0), partner time fixed at `w_j`.
    SeControlled,
    /// Susceptibility effect with partner time drawn under the partner's own arm `x_j`.
    SeNatural,
    /// Infectiousness effect (partner treatment 1 vs 0), partner time fixed.
    IeControlled,
    /// Infectiousness effect with partner time drawn from the untreated world.
    IeNatural,
    /// Attack rate in arm `x_i`.
    Ar,
    /// `1 - AR_1/AR_0`.
    VeAr,
    /// Direct effect `AR_1 - AR_0`.
    De,
    /// Indirect effect: attack rate of untreated subjects, treated-partner
    /// minus untreated-partner.
    Ide,
    /// Secondary attack rate: infection frequency of arm-`x_i` subjects whose
    /// arm-`x_j` partner was infected first before `t`.
    Sar,
    /// `(SAR_{x_j=1,x_i=0} - SAR_{0,0}) / SAR_{0,0}`.
    VeINet,
    /// Net infectiousness contrast in the one-sided partnership (the
    /// mediation-style VE_I with partner time drawn from the treated world).
    VeIAsym,
    /// Contagion contrast in the one-sided partnership: minus the natural
    /// contagion effect at `x = (0, 0)`.
    VeCAsym,
    /// Raw standardized controlled outcome (curve support).
    OutcomeControlled,
    /// Raw standardized natural outcome (curve support).
    OutcomeNatural,
}

/// Conditioning arguments; which fields must be set depends on the kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimandArgs {
    pub w_j: Option<f64>,
    pub w_j_prime: Option<f64>,
    pub x_i: Option<bool>,
    pub x_j: Option<bool>,
    pub x_j_prime: Option<bool>,
}

/// One requested estimand evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandRequest {
    pub kind: EstimandKind,
    pub t: f64,
    pub args: EstimandArgs,
}

/// Where a number came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Truth,
    Empirical,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Truth => write!(f, "truth"),
            Provenance::Empirical => write!(f, "empirical"),
        }
    }
}

/// A computed estimand with its uncertainty and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandValue {
    pub kind: EstimandKind,
    pub t: f64,
    pub args: EstimandArgs,
    pub value: f64,
    /// Monte Carlo standard error (covariate standardization for truth rows,
    /// batch-based for empirical rows); absent for exact quantities.
    pub mc_se: Option<f64>,
    pub provenance: Provenance,
    /// Free-form diagnostics (stratum sizes, window counts, pooled bins).
    pub diagnostics: String,
}

/// Scale of the output value, used for range post-conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueScale {
    /// In `[0, 1]`.
    Probability,
    /// In `[-1, 1]`.
    Difference,
    /// Ratio-based; no a-priori bound.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArgKey {
    WJ,
    WJPrime,
    XI,
    XJ,
    XJPrime,
}

impl EstimandKind {
    pub const ALL: [EstimandKind; 16] = [
        EstimandKind::CeControlled,
        EstimandKind::CeNatural,
        EstimandKind::SeControlled,
        EstimandKind::SeNatural,
        EstimandKind::IeControlled,
        EstimandKind::IeNatural,
        EstimandKind::Ar,
        EstimandKind::VeAr,
        EstimandKind::De,
        EstimandKind::Ide,
        EstimandKind::Sar,
        EstimandKind::VeINet,
        EstimandKind::VeIAsym,
        EstimandKind::VeCAsym,
        EstimandKind::OutcomeControlled,
        EstimandKind::OutcomeNatural,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EstimandKind::CeControlled => "CE_controlled",
            EstimandKind::CeNatural => "CE_natural",
            EstimandKind::SeControlled => "SE_controlled",
            EstimandKind::SeNatural => "SE_natural",
            EstimandKind::IeControlled => "IE_controlled",
            EstimandKind::IeNatural => "IE_natural",
            EstimandKind::Ar => "AR",
            EstimandKind::VeAr => "VE_AR",
            EstimandKind::De => "DE",
            EstimandKind::Ide => "IDE",
            EstimandKind::Sar => "SAR",
            EstimandKind::VeINet => "VE_I_net",
            EstimandKind::VeIAsym => "VE_I_asym",
            EstimandKind::VeCAsym => "VE_C_asym",
            EstimandKind::OutcomeControlled => "outcome_controlled",
            EstimandKind::OutcomeNatural => "outcome_natural",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        EstimandKind::ALL
            .into_iter()
            .find(|k| k.code() == code)
            .ok_or_else(|| Error::config(format!("unknown estimand kind '{code}'")))
    }

    pub fn value_scale(self) -> ValueScale {
        match self {
            EstimandKind::Ar | EstimandKind::Sar | EstimandKind::OutcomeControlled | EstimandKind::OutcomeNatural => {
                ValueScale::Probability
            }
            EstimandKind::VeAr | EstimandKind::VeINet => ValueScale::Ratio,
            _ => ValueScale::Difference,
        }
    }

    fn required_args(self) -> &'static [ArgKey] {
        match self {
            EstimandKind::CeControlled => &[ArgKey::WJ, ArgKey::WJPrime, ArgKey::XI, ArgKey::XJ],
            EstimandKind::CeNatural => &[ArgKey::XI, ArgKey::XJ],
            EstimandKind::SeControlled => &[ArgKey::WJ, ArgKey::XJ],
            EstimandKind::SeNatural => &[ArgKey::XJ],
            EstimandKind::IeControlled => &[ArgKey::WJ, ArgKey::XI],
            EstimandKind::IeNatural => &[ArgKey::XI],
            EstimandKind::Ar => &[ArgKey::XI],
            EstimandKind::VeAr | EstimandKind::De | EstimandKind::Ide => &[],
            EstimandKind::Sar => &[ArgKey::XI, ArgKey::XJ],
            EstimandKind::VeINet | EstimandKind::VeIAsym | EstimandKind::VeCAsym => &[],
            EstimandKind::OutcomeControlled => &[ArgKey::WJ, ArgKey::XI, ArgKey::XJ],
            EstimandKind::OutcomeNatural => &[ArgKey::XI, ArgKey::XJ, ArgKey::XJPrime],
        }
    }

    /// True for kinds whose definition references only the asymmetric
    /// (one-sided external hazard) partnership.
    pub fn requires_asymmetric_spec(self) -> bool {
        matches!(self, EstimandKind::VeIAsym | EstimandKind::VeCAsym)
    }
}

impl EstimandArgs {
    fn get(&self, key: ArgKey) -> bool {
        match key {
            ArgKey::WJ => self.w_j.is_some(),
            ArgKey::WJPrime => self.w_j_prime.is_some(),
            ArgKey::XI => self.x_i.is_some(),
            ArgKey::XJ => self.x_j.is_some(),
            ArgKey::XJPrime => self.x_j_prime.is_some(),
        }
    }

    /// Canonical `key=value;…` encoding in fixed key order; `-` when empty.
    pub fn encode(&self) -> String {
        let mut parts = Vec::new();
        if let Some(w) = self.w_j {
            parts.push(format!("w_j={}", format_time(w)));
        }
        if let Some(w) = self.w_j_prime {
            parts.push(format!("w_j_prime={}", format_time(w)));
        }
        if let Some(x) = self.x_i {
            parts.push(format!("x_i={}", x as u8));
        }
        if let Some(x) = self.x_j {
            parts.push(format!("x_j={}", x as u8));
        }
        if let Some(x) = self.x_j_prime {
            parts.push(format!("x_j_prime={}", x as u8));
        }
        if parts.is_empty() {
            "-".to_string()
        } else {
            parts.join(";")
        }
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut args = EstimandArgs::default();
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed == "-" {
            return Ok(args);
        }
        for part in trimmed.split(';') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("estimand argument '{part}' is not key=value")))?;
            match key.trim() {
                "w_j" => args.w_j = Some(parse_time(val)?),
                "w_j_prime" => args.w_j_prime = Some(parse_time(val)?),
                "x_i" => args.x_i = Some(parse_binary(val)?),
                "x_j" => args.x_j = Some(parse_binary(val)?),
                "x_j_prime" => args.x_j_prime = Some(parse_binary(val)?),
                other => return Err(Error::config(format!("unknown estimand argument '{other}'"))),
            }
        }
        Ok(args)
    }
}

fn parse_time(val: &str) -> Result<f64> {
    let v: f64 = val
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("'{val}' is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::config(format!("time argument {v} must be finite and >= 0")));
    }
    Ok(v)
}

fn parse_binary(val: &str) -> Result<bool> {
    match val.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::config(format!("'{other}' is not a binary treatment (0 or 1)"))),
    }
}

/// Canonical time rendering: fixed 6 decimals with trailing zeros trimmed, so
/// request keys compare as plain strings.
pub fn format_time(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl EstimandRequest {
    pub fn new(kind: EstimandKind, t: f64, args: EstimandArgs) -> Self {
        EstimandRequest { kind, t, args }
    }

    /// Check that `t` is usable and exactly the kind's required arguments are
    /// present.
    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::config(format!(
                "{}: evaluation time {} must be finite and >= 0",
                self.kind.code(),
                self.t
            )));
        }
        let required = self.kind.required_args();
        for key in [ArgKey::WJ, ArgKey::WJPrime, ArgKey::XI, ArgKey::XJ, ArgKey::XJPrime] {
            let need = required.contains(&key);
            let have = self.args.get(key);
            if need && !have {
                return Err(Error::config(format!(
                    "{}: missing required argument {key:?}",
                    self.kind.code()
                )));
            }
            if !need && have {
                return Err(Error::config(format!(
                    "{}: unexpected argument {key:?}",
                    self.kind.code()
                )));
            }
        }
        Ok(())
    }

    /// Stable identity used to join truth and empirical tables.
    pub fn key(&self) -> String {
        format!("{},{},{}", self.kind.code(), format_time(self.t), self.args.encode())
    }
}

impl EstimandValue {
    /// Verify the value lies on the scale the kind promises.
    pub fn check_range(&self) -> Result<()> {
        let ok = match self.kind.value_scale() {
            ValueScale::Probability => (0.0..=1.0).contains(&self.value),
            ValueScale::Difference => (-1.0..=1.0).contains(&self.value),
            ValueScale::Ratio => self.value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Numeric(format!(
                "{} value {} outside its admissible range",
                self.kind.code(),
                self.value
            )))
        }
    }
}
