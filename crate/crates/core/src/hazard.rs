//! Structural transmission model for two-person partnerships.
//!
//! Each subject faces an *external* infection hazard
//! `scale_i * alpha(t) * exp(beta0*x_i + theta0.l_i)` while both partners are
//! uninfected, and an *internal* hazard once the partner is infected at `w_j`:
//! the external hazard plus a transmission term
//! `gamma(t - w_j) * exp(beta1*x_i + sigma*x_j + theta1.l_j + theta2.l_i)`.
//!
//! All supported baselines integrate in closed form, so cumulative hazards and
//! their inverses (used for event-time sampling) are exact up to root-finding
//! tolerance. A quadrature route is kept alongside the closed forms for
//! cross-checking.

use crate::error::{Error, Result};
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Identifies one member of a partnership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subject {
    One,
    Two,
}

impl Subject {
    pub const BOTH: [Subject; 2] = [Subject::One, Subject::Two];

    pub fn index(self) -> usize {
        match self {
            Subject::One => 0,
            Subject::Two => 1,
        }
    }

    pub fn other(self) -> Subject {
        match self {
            Subject::One => Subject::Two,
            Subject::Two => Subject::One,
        }
    }

    /// This subject's entry of a (subject-1, subject-2) pair.
    pub fn own_of<T: Copy>(self, pair: (T, T)) -> T {
        match self {
            Subject::One => pair.0,
            Subject::Two => pair.1,
        }
    }

    /// The partner's entry of a (subject-1, subject-2) pair.
    pub fn partner_of<T: Copy>(self, pair: (T, T)) -> T {
        self.other().own_of(pair)
    }
}

/// Treatment indicators for (subject 1, subject 2).
pub type TreatmentPair = (bool, bool);

/// Baseline hazard families. The argument `s` is time elapsed since the
/// family's clock origin (study start for external hazards, the partner's
/// infection time for transmission hazards).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineHazard {
    /// `rate`
    Constant { rate: f64 },
    /// `a * (1 + sin(2*pi*s + phase))`
    Sinusoidal { a: f64, phase: f64 },
    /// `b * exp(-omega * s)`
    ExpDecay { b: f64, omega: f64 },
}

impl BaselineHazard {
    pub fn zero() -> Self {
        BaselineHazard::Constant { rate: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BaselineHazard::Constant { rate } => rate.is_finite() && rate >= 0.0,
            BaselineHazard::Sinusoidal { a, phase } => a.is_finite() && a >= 0.0 && phase.is_finite(),
            BaselineHazard::ExpDecay { b, omega } => {
                b.is_finite() && b >= 0.0 && omega.is_finite() && omega >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid baseline hazard {self:?}")))
        }
    }

    /// True when the hazard is identically zero.
    pub fn is_zero(&self) -> bool {
        match *self {
            BaselineHazard::Constant { rate } => rate == 0.0,
            BaselineHazard::Sinusoidal { a, .. } => a == 0.0,
            BaselineHazard::ExpDecay { b, .. } => b == 0.0,
        }
    }

    /// Hazard value at elapsed time `s >= 0`.
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            BaselineHazard::Constant { rate } => rate,
            BaselineHazard::Sinusoidal { a, phase } => a * (1.0 + (TAU * s + phase).sin()),
            BaselineHazard::ExpDecay { b, omega } => b * (-omega * s).exp(),
        }
    }

    /// Exact integral over elapsed times `[s0, s1]`, `0 <= s0 <= s1`.
    pub fn cumulative(&self, s0: f64, s1: f64) -> f64 {
        match *self {
            BaselineHazard::Constant { rate } => rate * (s1 - s0),
            BaselineHazard::Sinusoidal { a, phase } => {
                a * ((s1 - s0) + ((TAU * s0 + phase).cos() - (TAU * s1 + phase).cos()) / TAU)
            }
            BaselineHazard::ExpDecay { b, omega } => {
                if omega == 0.0 {
                    b * (s1 - s0)
                } else {
                    (b / omega) * ((-omega * s0).exp() - (-omega * s1).exp())
                }
            }
        }
    }

    /// Total remaining integral over `[s0, inf)`; infinite for non-decaying
    /// families with positive level.
    pub fn mass_from(&self, s0: f64) -> f64 {
        match *self {
            BaselineHazard::Constant { rate } => {
                if rate == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BaselineHazard::Sinusoidal { a, .. } => {
                if a == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            BaselineHazard::ExpDecay { b, omega } => {
                if b == 0.0 {
                    0.0
                } else if omega == 0.0 {
                    f64::INFINITY
                } else {
                    (b / omega) * (-omega * s0).exp()
                }
            }
        }
    }
}

/// Covariate vectors for (subject 1, subject 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePair {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

impl CovariatePair {
    pub fn empty() -> Self {
        CovariatePair { l1: vec![], l2: vec![] }
    }

    pub fn scalar(l1: f64, l2: f64) -> Self {
        CovariatePair { l1: vec![l1], l2: vec![l2] }
    }

    pub fn dim(&self) -> usize {
        self.l1.len()
    }

    pub fn own(&self, subject: Subject) -> &[f64] {
        match subject {
            Subject::One => &self.l1,
            Subject::Two => &self.l2,
        }
    }

    pub fn partner(&self, subject: Subject) -> &[f64] {
        self.own(subject.other())
    }

    pub fn validate(&self) -> Result<()> {
        if self.l1.len() != self.l2.len() {
            return Err(Error::config(format!(
                "covariate vectors have mismatched dimensions {} and {}",
                self.l1.len(),
                self.l2.len()
            )));
        }
        if self.l1.iter().chain(&self.l2).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite covariate value"));
        }
        Ok(())
    }
}

/// Dot product of a coefficient vector with a covariate vector. An empty
/// coefficient vector means "no covariate effect" regardless of `l`.
fn dot(theta: &[f64], l: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Ok(0.0);
    }
    if theta.len() != l.len() {
        return Err(Error::config(format!(
            "coefficient dimension {} does not match covariate dimension {}",
            theta.len(),
            l.len()
        )));
    }
    Ok(theta.iter().zip(l).map(|(a, b)| a * b).sum())
}

fn default_alpha_scale() -> [f64; 2] {
    [1.0, 1.0]
}

/// Full parameterization of the transmission model.
///
/// `beta0`, `beta1`, `sigma` are log multipliers (own-treatment effect on the
/// external hazard, own-treatment effect on the transmission hazard, partner
/// treatment infectiousness effect). `theta0` scales own covariates in the
/// external hazard; in the transmission term `theta1` scales the *partner's*
/// covariates and `theta2` the subject's own.
///
/// `per_subject_alpha_scale` multiplies each subject's external baseline;
/// setting one entry to 0 encodes the asymmetric partnership in which that
/// subject can only be infected by the partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSpec {
    pub alpha: BaselineHazard,
    pub gamma: BaselineHazard,
    #[serde(default)]
    pub beta0: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub theta1: Vec<f64>,
    #[serde(default)]
    pub theta2: Vec<f64>,
    #[serde(default = "default_alpha_scale")]
    pub per_subject_alpha_scale: [f64; 2],
    /// The transmission-phase hazard keeps the external part's covariate term
    /// by default; set this to drop `theta0.l_i` from that part only (the
    /// alternative literal reading of the model display).
    #[serde(default)]
    pub drop_covariates_in_internal_external_part: bool,
}

impl HazardSpec {
    /// A no-effect spec with the given baselines; callers set coefficients.
    pub fn new(alpha: BaselineHazard, gamma: BaselineHazard) -> Self {
        HazardSpec {
            alpha,
            gamma,
            beta0: 0.0,
            beta1: 0.0,
            sigma: 0.0,
            theta0: vec![],
            theta1: vec![],
            theta2: vec![],
            per_subject_alpha_scale: default_alpha_scale(),
            drop_covariates_in_internal_external_part: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.gamma.validate()?;
        for (name, v) in [("beta0", self.beta0), ("beta1", self.beta1), ("sigma", self.sigma)] {
            if !v.is_finite() {
                return Err(Error::config(format!("non-finite coefficient {name}")));
            }
        }
        for (name, v) in [("theta0", &self.theta0), ("theta1", &self.theta1), ("theta2", &self.theta2)] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(format!("non-finite entry in {name}")));
            }
        }
        let dim = self.covariate_dim();
        for (name, v) in [("theta0", &self.theta0), ("theta1", &self.theta1), ("theta2", &self.theta2)] {
            if !v.is_empty() && v.len() != dim {
                return Err(Error::config(format!(
                    "{name} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
        }
        for s in self.per_subject_alpha_scale {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::config("per_subject_alpha_scale entries must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Covariate dimension implied by the coefficient vectors (0 when all are
    /// empty).
    pub fn covariate_dim(&self) -> usize {
        self.theta0.len().max(self.theta1.len()).max(self.theta2.len())
    }

    /// True when the transmission baseline is identically zero, making the
    /// internal hazard coincide with the external one.
    pub fn no_contagion(&self) -> bool {
        self.gamma.is_zero()
    }

    /// Multiplier on the external baseline for one subject:
    /// `scale * exp(beta0*x_i + theta0.l_i)`.
    pub fn external_multiplier(&self, subject: Subject, x_i: bool, l_i: &[f64]) -> Result<f64> {
        if l_i.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite covariate value"));
        }
        let log_mult = if x_i { self.beta0 } else { 0.0 } + dot(&self.theta0, l_i)?;
        Ok(self.per_subject_alpha_scale[subject.index()] * log_mult.exp())
    }

    /// Multiplier on the transmission baseline:
    /// `exp(beta1*x_i + sigma*x_j + theta1.l_j + theta2.l_i)`.
    pub fn transmission_multiplier(
        &self,
        x_i: bool,
        x_j: bool,
        l_i: &[f64],
        l_j: &[f64],
    ) -> Result<f64> {
        if l_i.iter().chain(l_j).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite covariate value"));
        }
        let log_mult = if x_i { self.beta1 } else { 0.0 }
            + if x_j { self.sigma } else { 0.0 }
            + dot(&self.theta1, l_j)?
            + dot(&self.theta2, l_i)?;
        Ok(log_mult.exp())
    }

    /// The external hazard of `subject` as a time-indexed rate function.
    pub fn external_rate(&self, subject: Subject, x_i: bool, l_i: &[f64]) -> Result<HazardRate> {
        Ok(HazardRate(vec![HazardTerm {
            baseline: self.alpha.clone(),
            origin: 0.0,
            multiplier: self.external_multiplier(subject, x_i, l_i)?,
        }]))
    }

    /// The internal (post-partner-infection) hazard of `subject`, valid for
    /// times `t >= w_j`.
    pub fn internal_rate(
        &self,
        subject: Subject,
        w_j: f64,
        x: TreatmentPair,
        l: &CovariatePair,
    ) -> Result<HazardRate> {
        let x_i = subject.own_of(x);
        let x_j = subject.partner_of(x);
        let l_i = l.own(subject);
        let l_j = l.partner(subject);
        let ext_mult = if self.drop_covariates_in_internal_external_part {
            let scale = self.per_subject_alpha_scale[subject.index()];
            scale * if x_i { self.beta0.exp() } else { 1.0 }
        } else {
            self.external_multiplier(subject, x_i, l_i)?
        };
        Ok(HazardRate(vec![
            HazardTerm {
                baseline: self.alpha.clone(),
                origin: 0.0,
                multiplier: ext_mult,
            },
            HazardTerm {
                baseline: self.gamma.clone(),
                origin: w_j,
                multiplier: self.transmission_multiplier(x_i, x_j, l_i, l_j)?,
            },
        ]))
    }
}

/// The hazard a subject faces while both partners are uninfected.
pub fn external_hazard(
    spec: &HazardSpec,
    t: f64,
    x_i: bool,
    l_i: &[f64],
    subject: Subject,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::config(format!("time t = {t} must be >= 0")));
    }
    Ok(spec.external_multiplier(subject, x_i, l_i)? * spec.alpha.eval(t))
}

/// The hazard a subject faces after the partner was infected at `w_j`.
pub fn internal_hazard(
    spec: &HazardSpec,
    t: f64,
    w_j: f64,
    x: TreatmentPair,
    l: &CovariatePair,
    subject: Subject,
) -> Result<f64> {
    if !(w_j >= 0.0 && t > w_j) {
        return Err(Error::config(format!(
            "internal hazard requires t > w_j >= 0, got t = {t}, w_j = {w_j}"
        )));
    }
    Ok(spec.internal_rate(subject, w_j, x, l)?.eval(t))
}

/// One additive component of a hazard: a baseline family with its clock
/// origin and a constant multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardTerm {
    pub baseline: BaselineHazard,
    pub origin: f64,
    pub multiplier: f64,
}

/// A hazard function as a sum of terms; zero before each term's origin.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardRate(pub Vec<HazardTerm>);

impl HazardRate {
    /// Hazard value at absolute time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.0
            .iter()
            .filter(|term| t >= term.origin)
            .map(|term| term.multiplier * term.baseline.eval(t - term.origin))
            .sum()
    }

    /// Exact integral over absolute times `[t0, t1]` via per-family closed
    /// forms.
    pub fn cumulative(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(0.0 <= t0 && t0 <= t1) {
            return Err(Error::config(format!(
                "cumulative hazard requires 0 <= t0 <= t1, got [{t0}, {t1}]"
            )));
        }
        let mut total = 0.0;
        for term in &self.0 {
            let lo = t0.max(term.origin);
            if t1 > lo && term.multiplier != 0.0 {
                total += term.multiplier * term.baseline.cumulative(lo - term.origin, t1 - term.origin);
            }
        }
        Ok(total)
    }

    /// The same integral evaluated by adaptive quadrature (absolute tolerance
    /// 1e-10). Kept as an independent route for verifying the closed forms and
    /// as the fallback for hazard shapes without analytic integrals.
    pub fn cumulative_by_quadrature(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(0.0 <= t0 && t0 <= t1) {
            return Err(Error::config(format!(
                "cumulative hazard requires 0 <= t0 <= t1, got [{t0}, {t1}]"
            )));
        }
        // split at term origins so each segment is smooth
        let origins: Vec<f64> = self.0.iter().map(|term| term.origin).collect();
        quad::integrate_split(|u| self.eval(u), t0, t1, 1e-10, &origins)
    }

    /// Total remaining integral over `[t0, inf)`.
    pub fn mass_from(&self, t0: f64) -> f64 {
        self.0
            .iter()
            .map(|term| {
                if term.multiplier == 0.0 {
                    0.0
                } else {
                    term.multiplier * term.baseline.mass_from((t0 - term.origin).max(0.0))
                }
            })
            .sum()
    }

    /// Concatenate the terms of two hazards (the total hazard of independent
    /// competing events).
    pub fn combined(&self, other: &HazardRate) -> HazardRate {
        let mut terms = self.0.clone();
        terms.extend(other.0.iter().cloned());
        HazardRate(terms)
    }

    /// Smallest `t1 >= t0` with `cumulative(t0, t1) = target`, or `+inf` when
    /// the remaining hazard mass cannot reach `target`. Uses closed-form
    /// inversion for purely-constant rates and for a lone decaying term;
    /// otherwise brackets the root and applies Brent's method (relative time
    /// tolerance 1e-10) on the closed-form cumulative.
    pub fn invert_cumulative(&self, t0: f64, target: f64) -> Result<f64> {
        if !(target >= 0.0) {
            return Err(Error::config(format!("inversion target {target} must be >= 0")));
        }
        if target == 0.0 {
            return Ok(t0);
        }
        let mass = self.mass_from(t0);
        if mass <= target && mass.is_finite() {
            return Ok(f64::INFINITY);
        }

        // active terms only
        let active: Vec<&HazardTerm> = self
            .0
            .iter()
            .filter(|term| term.multiplier > 0.0 && !term.baseline.is_zero())
            .collect();

        // all-constant: rate * (t1 - t0) = target, once past every origin
        if active
            .iter()
            .all(|term| matches!(term.baseline, BaselineHazard::Constant { .. }) && term.origin <= t0)
        {
            let rate: f64 = active
                .iter()
                .map(|term| term.multiplier * term.baseline.eval(0.0))
                .sum();
            return Ok(t0 + target / rate);
        }

        // single decaying term: exponential closed form
        if active.len() == 1 {
            if let BaselineHazard::ExpDecay { b, omega } = active[0].baseline {
                if omega > 0.0 {
                    let m = active[0].multiplier;
                    let s0 = (t0 - active[0].origin).max(0.0);
                    let rhs = (-omega * s0).exp() - target * omega / (b * m);
                    if rhs <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    return Ok(active[0].origin + (-rhs.ln() / omega));
                }
            }
        }

        // general: expand an upper bracket, then Brent on H(t0, .) - target
        let mut hi = t0 + 0.5;
        let mut iter = 0;
        while self.cumulative(t0, hi)? < target {
            hi = t0 + (hi - t0) * 2.0;
            iter += 1;
            if iter > 200 {
                return Err(Error::Numeric(format!(
                    "failed to bracket inverse cumulative hazard from t0 = {t0}, target = {target}"
                )));
            }
        }
        quad::find_root(
            |t| self.cumulative(t0, t).unwrap_or(f64::NAN) - target,
            t0,
            hi,
            1e-10,
        )
    }
}

/// Integral of a hazard over `[t0, t1]`.
pub fn cumulative_hazard(h: &HazardRate, t0: f64, t1: f64) -> Result<f64> {
    h.cumulative(t0, t1)
}

/// Smallest `t1 >= t0` at which the integral of `h` from `t0` reaches
/// `target` (`+inf` sentinel when it never does).
pub fn invert_cumulative_hazard(h: &HazardRate, t0: f64, target: f64) -> Result<f64> {
    h.invert_cumulative(t0, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn spec_table1_constant() -> HazardSpec {
        let mut spec = HazardSpec::new(
            BaselineHazard::Constant { rate: 0.2 },
            BaselineHazard::Constant { rate: 10.0 },
        );
        spec.beta0 = 0.4f64.ln();
        spec.beta1 = 0.4f64.ln();
        spec.sigma = 0.01f64.ln();
        spec
    }

    #[test]
    fn external_hazard_at_table1_parameters() {
        let spec = spec_table1_constant();
        let v = external_hazard(&spec, 1.0, true, &[], Subject::One).unwrap();
        assert_abs_diff_eq!(v, 0.08, epsilon = 1e-12);
    }

    #[test]
    fn external_untreated_equals_baseline() {
        let spec = spec_table1_constant();
        for t in [0.0, 0.3, 1.0, 2.5] {
            let v = external_hazard(&spec, t, false, &[], Subject::Two).unwrap();
            assert_eq!(v, spec.alpha.eval(t));
        }
    }

    #[test]
    fn external_sinusoid_at_zero() {
        let spec = HazardSpec::new(
            BaselineHazard::Sinusoidal { a: 0.4, phase: FRAC_PI_2 },
            BaselineHazard::zero(),
        );
        let v = external_hazard(&spec, 0.0, false, &[], Subject::One).unwrap();
        assert_abs_diff_eq!(v, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn internal_hazard_adds_transmission_term() {
        let spec = HazardSpec::new(
            BaselineHazard::Constant { rate: 0.2 },
            BaselineHazard::Constant { rate: 10.0 },
        );
        let l = CovariatePair::empty();
        let v = internal_hazard(&spec, 1.5, 0.5, (false, false), &l, Subject::One).unwrap();
        assert_abs_diff_eq!(v, 10.2, epsilon = 1e-12);
    }

    #[test]
    fn internal_equals_external_without_contagion() {
        let mut spec = spec_table1_constant();
        spec.gamma = BaselineHazard::zero();
        let l = CovariatePair::empty();
        for (t, w_j) in [(0.7, 0.2), (1.5, 0.5), (3.0, 2.9)] {
            for x in [(false, false), (true, false), (false, true), (true, true)] {
                let int = internal_hazard(&spec, t, w_j, x, &l, Subject::Two).unwrap();
                let ext = external_hazard(&spec, t, x.1, &[], Subject::Two).unwrap();
                assert_eq!(int, ext);
            }
        }
    }

    #[test]
    fn internal_decaying_transmission_value() {
        let mut spec = HazardSpec::new(
            BaselineHazard::Constant { rate: 0.0 },
            BaselineHazard::ExpDecay { b: 25.0, omega: 0.5 },
        );
        spec.per_subject_alpha_scale = [1.0, 1.0];
        let l = CovariatePair::empty();
        let w_j = 0.7;
        let v = internal_hazard(&spec, w_j + 2.0, w_j, (false, false), &l, Subject::One).unwrap();
        assert_abs_diff_eq!(v, 25.0 * (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn internal_requires_t_after_wj() {
        let spec = spec_table1_constant();
        let l = CovariatePair::empty();
        assert!(internal_hazard(&spec, 0.5, 0.5, (false, false), &l, Subject::One).is_err());
        assert!(internal_hazard(&spec, 0.4, 0.5, (false, false), &l, Subject::One).is_err());
    }

    #[test]
    fn cumulative_constant() {
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::Constant { rate: 0.2 },
            origin: 0.0,
            multiplier: 1.0,
        }]);
        assert_abs_diff_eq!(cumulative_hazard(&h, 0.0, 2.0).unwrap(), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn cumulative_sinusoid_full_period() {
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::Sinusoidal { a: 0.4, phase: FRAC_PI_2 },
            origin: 0.0,
            multiplier: 1.0,
        }]);
        assert_abs_diff_eq!(cumulative_hazard(&h, 0.0, 1.0).unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn cumulative_exp_decay() {
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::ExpDecay { b: 25.0, omega: 0.5 },
            origin: 0.3,
            multiplier: 1.0,
        }]);
        let expect = 50.0 * (1.0 - (-1.0f64).exp());
        assert_abs_diff_eq!(cumulative_hazard(&h, 0.3, 2.3).unwrap(), expect, epsilon = 1e-9);
        assert_abs_diff_eq!(expect, 31.606, epsilon = 5e-4);
    }

    #[test]
    fn invert_constant_rate() {
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::Constant { rate: 0.2 },
            origin: 0.0,
            multiplier: 1.0,
        }]);
        assert_abs_diff_eq!(h.invert_cumulative(0.0, 0.4).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_returns_infinity_when_mass_runs_out() {
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::ExpDecay { b: 1.0, omega: 1.0 },
            origin: 0.0,
            multiplier: 1.0,
        }]);
        assert_eq!(h.invert_cumulative(0.0, 2.0).unwrap(), f64::INFINITY);
        assert!(h.invert_cumulative(0.0, 0.5).unwrap().is_finite());
    }

    fn random_baseline(rng: &mut ChaCha8Rng) -> BaselineHazard {
        match rng.gen_range(0..3) {
            0 => BaselineHazard::Constant { rate: rng.gen_range(0.05..5.0) },
            1 => BaselineHazard::Sinusoidal {
                a: rng.gen_range(0.05..3.0),
                phase: rng.gen_range(0.0..TAU),
            },
            _ => BaselineHazard::ExpDecay {
                b: rng.gen_range(0.5..30.0),
                omega: rng.gen_range(0.1..3.0),
            },
        }
    }

    fn random_rate(rng: &mut ChaCha8Rng) -> HazardRate {
        let n_terms = rng.gen_range(1..=2);
        HazardRate(
            (0..n_terms)
                .map(|_| HazardTerm {
                    baseline: random_baseline(rng),
                    origin: rng.gen_range(0.0..1.0),
                    multiplier: rng.gen_range(0.1..3.0),
                })
                .collect(),
        )
    }

    #[test]
    fn inversion_round_trip_on_random_hazards() {
        let mut rng = ChaCha8Rng::seed_from_u64(20260815);
        for _ in 0..1000 {
            let h = random_rate(&mut rng);
            let t0 = rng.gen_range(0.0..2.0);
            let t1 = t0 + rng.gen_range(0.05..4.0);
            let target = h.cumulative(t0, t1).unwrap();
            if target < 1e-9 {
                continue;
            }
            let back = h.invert_cumulative(t0, target).unwrap();
            assert!(
                (back - t1).abs() < 1e-8 * t1.max(1.0),
                "round trip failed: t1 = {t1}, got {back} for {h:?}"
            );
        }
    }

    #[test]
    fn closed_form_cumulative_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let h = random_rate(&mut rng);
            let t0 = rng.gen_range(0.0..1.5);
            let t1 = t0 + rng.gen_range(0.0..4.0);
            let exact = h.cumulative(t0, t1).unwrap();
            let quad = h.cumulative_by_quadrature(t0, t1).unwrap();
            assert!(
                (exact - quad).abs() < 1e-8,
                "closed form {exact} vs quadrature {quad} for {h:?} on [{t0}, {t1}]"
            );
        }
    }

    #[test]
    fn cumulative_additive_over_adjacent_intervals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let h = random_rate(&mut rng);
            let a = rng.gen_range(0.0..1.0);
            let b = a + rng.gen_range(0.0..2.0);
            let c = b + rng.gen_range(0.0..2.0);
            let lhs = h.cumulative(a, b).unwrap() + h.cumulative(b, c).unwrap();
            let rhs = h.cumulative(a, c).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "additivity violated: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn internal_dominates_external_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let mut spec = HazardSpec::new(random_baseline(&mut rng), random_baseline(&mut rng));
            spec.beta0 = rng.gen_range(-1.0..1.0);
            spec.beta1 = rng.gen_range(-1.0..1.0);
            spec.sigma = rng.gen_range(-1.0..1.0);
            let l = CovariatePair::empty();
            let w_j = rng.gen_range(0.0..1.0);
            let t = w_j + rng.gen_range(1e-6..2.0);
            let x = (rng.gen::<bool>(), rng.gen::<bool>());
            for subject in Subject::BOTH {
                let int = internal_hazard(&spec, t, w_j, x, &l, subject).unwrap();
                let ext = external_hazard(&spec, t, subject.own_of(x), &[], subject).unwrap();
                assert!(int >= ext - 1e-12);
            }
        }
    }

    #[test]
    fn covariates_inert_when_coefficients_zero() {
        let mut spec = spec_table1_constant();
        spec.theta0 = vec![0.0];
        spec.theta1 = vec![0.0];
        spec.theta2 = vec![0.0];
        let base = external_hazard(&spec, 1.0, true, &[0.0], Subject::One).unwrap();
        for l in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let v = external_hazard(&spec, 1.0, true, &[l], Subject::One).unwrap();
            assert_eq!(v, base);
            let pair = CovariatePair::scalar(l, -l);
            let vi = internal_hazard(&spec, 1.5, 0.5, (true, false), &pair, Subject::One).unwrap();
            let pair0 = CovariatePair::scalar(0.0, 0.0);
            let vi0 = internal_hazard(&spec, 1.5, 0.5, (true, false), &pair0, Subject::One).unwrap();
            assert_eq!(vi, vi0);
        }
    }

    #[test]
    fn covariate_coefficients_enter_both_hazards() {
        let mut spec = spec_table1_constant();
        let theta = 0.95f64.ln();
        spec.theta0 = vec![theta];
        spec.theta1 = vec![theta];
        spec.theta2 = vec![theta];
        let v = external_hazard(&spec, 1.0, false, &[1.0], Subject::One).unwrap();
        assert_abs_diff_eq!(v, 0.2 * 0.95, epsilon = 1e-12);
        let pair = CovariatePair::scalar(2.0, 1.0);
        let vi = internal_hazard(&spec, 1.5, 0.5, (false, false), &pair, Subject::One).unwrap();
        // external part: 0.2*0.95^2 ; transmission: 10 * 0.95^{l_j + l_i} = 10 * 0.95^3
        let expect = 0.2 * 0.95f64.powi(2) + 10.0 * 0.95f64.powi(3);
        assert_abs_diff_eq!(vi, expect, epsilon = 1e-10);
    }

    #[test]
    fn alpha_scale_zero_silences_external_hazard() {
        let mut spec = spec_table1_constant();
        spec.per_subject_alpha_scale = [0.0, 1.0];
        let v1 = external_hazard(&spec, 1.0, false, &[], Subject::One).unwrap();
        let v2 = external_hazard(&spec, 1.0, false, &[], Subject::Two).unwrap();
        assert_eq!(v1, 0.0);
        assert_abs_diff_eq!(v2, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn drop_covariate_toggle_changes_only_external_part_of_internal() {
        let mut spec = spec_table1_constant();
        spec.theta0 = vec![(0.5f64).ln()];
        let pair = CovariatePair::scalar(1.0, 0.0);
        let kept = internal_hazard(&spec, 1.5, 0.5, (false, false), &pair, Subject::One).unwrap();
        spec.drop_covariates_in_internal_external_part = true;
        let dropped = internal_hazard(&spec, 1.5, 0.5, (false, false), &pair, Subject::One).unwrap();
        assert_abs_diff_eq!(kept, 0.2 * 0.5 + 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dropped, 0.2 + 10.0, epsilon = 1e-12);
        // the plain external hazard still uses the covariate
        let ext = external_hazard(&spec, 1.5, false, &[1.0], Subject::One).unwrap();
        assert_abs_diff_eq!(ext, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(BaselineHazard::Constant { rate: -0.1 }.validate().is_err());
        assert!(BaselineHazard::Sinusoidal { a: -1.0, phase: 0.0 }.validate().is_err());
        assert!(BaselineHazard::ExpDecay { b: 1.0, omega: -0.5 }.validate().is_err());
        let mut spec = spec_table1_constant();
        spec.per_subject_alpha_scale = [-1.0, 1.0];
        assert!(spec.validate().is_err());
        let mut spec2 = spec_table1_constant();
        spec2.theta0 = vec![0.1];
        spec2.theta1 = vec![0.1, 0.2];
        assert!(spec2.validate().is_err());
    }

    #[test]
    fn sinusoid_phase_pi_keeps_hazard_nonnegative() {
        let b = BaselineHazard::Sinusoidal { a: 0.7, phase: PI };
        for i in 0..200 {
            let s = i as f64 * 0.025;
            assert!(b.eval(s) >= 0.0);
        }
    }

    #[test]
    fn invert_with_leading_origin_gap() {
        // no hazard until the transmission origin at 1.0
        let h = HazardRate(vec![HazardTerm {
            baseline: BaselineHazard::Constant { rate: 2.0 },
            origin: 1.0,
            multiplier: 1.0,
        }]);
        let t = h.invert_cumulative(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(t, 1.5, epsilon = 1e-8);
    }
}
