//! Reproducible partnership-trial simulation.
//!
//! Event times come from the competing-risks construction: while both
//! partners are uninfected each faces their external hazard; the first event
//! time is drawn by inverting the summed cumulative hazard at an Exp(1)
//! deviate and attributed to a subject by the hazard ratio at that instant
//! (equivalently, latent per-subject minima — both samplers are provided and
//! agree in distribution). The survivor's time is then drawn from their
//! internal hazard anchored at the first infection. Administrative censoring
//! applies at the horizon `tau`.
//!
//! Randomness is organized as counter-based substreams keyed by partnership
//! id (separate stream spaces for covariates, treatments, and event times),
//! so any parallel schedule produces the byte-identical dataset.

use crate::dataset::Dataset;
use crate::design::{AssignmentDesign, CovariateLaw};
use crate::error::{Error, Result};
use crate::hazard::{CovariatePair, HazardSpec, Subject, TreatmentPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stream-space offsets for the per-partnership RNG substreams.
const COVARIATE_STREAM_BASE: u64 = 1;
const TREATMENT_STREAM_BASE: u64 = 1 << 62;
const EVENT_STREAM_BASE: u64 = 1 << 63;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the first-event subject is chosen in stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    /// One inversion of the total hazard, then attribution by hazard ratio.
    #[default]
    HazardAttribution,
    /// Two latent external times, first event is their minimum.
    LatentMinimum,
}

/// A named, fully reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub spec: HazardSpec,
    pub design: AssignmentDesign,
    pub covariate_law: CovariateLaw,
    pub n: u64,
    pub tau: f64,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerMethod,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.covariate_law.validate()?;
        if self.n == 0 {
            return Err(Error::config("scenario requires n >= 1 partnerships"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!("horizon tau = {} must be finite and > 0", self.tau)));
        }
        let spec_dim = self.spec.covariate_dim();
        if spec_dim != 0 && spec_dim != self.covariate_law.dim() {
            return Err(Error::config(format!(
                "hazard coefficients have covariate dimension {spec_dim} but the covariate law draws dimension {}",
                self.covariate_law.dim()
            )));
        }
        Ok(())
    }
}

/// One simulated partnership. Censored subjects carry `t = tau`, `c = true`;
/// `first_infected`/`w_first` identify the earliest infection if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnershipRecord {
    pub id: u64,
    pub l: CovariatePair,
    pub x: TreatmentPair,
    pub t1: f64,
    pub t2: f64,
    pub c1: bool,
    pub c2: bool,
    pub first_infected: Option<Subject>,
    pub w_first: Option<f64>,
}

impl PartnershipRecord {
    pub fn time(&self, subject: Subject) -> f64 {
        match subject {
            Subject::One => self.t1,
            Subject::Two => self.t2,
        }
    }

    pub fn censored(&self, subject: Subject) -> bool {
        match subject {
            Subject::One => self.c1,
            Subject::Two => self.c2,
        }
    }

    pub fn infected(&self, subject: Subject) -> bool {
        !self.censored(subject)
    }

    /// Recompute `first_infected`/`w_first` from times and censoring flags
    /// (used after parsing; an exact tie resolves to subject 1).
    pub fn derive_first_infection(&mut self) {
        let (first, w) = match (self.c1, self.c2) {
            (true, true) => (None, None),
            (false, true) => (Some(Subject::One), Some(self.t1)),
            (true, false) => (Some(Subject::Two), Some(self.t2)),
            (false, false) => {
                if self.t1 <= self.t2 {
                    (Some(Subject::One), Some(self.t1))
                } else {
                    (Some(Subject::Two), Some(self.t2))
                }
            }
        };
        self.first_infected = first;
        self.w_first = w;
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        for subject in Subject::BOTH {
            let t = self.time(subject);
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Numeric(format!("record {}: non-positive event time {t}", self.id)));
            }
            if self.censored(subject) {
                if (t - tau).abs() > 1e-9 * tau.max(1.0) {
                    return Err(Error::Numeric(format!(
                        "record {}: censored subject has t = {t}, expected tau = {tau}",
                        self.id
                    )));
                }
            } else if t >= tau {
                return Err(Error::Numeric(format!(
                    "record {}: uncensored time {t} is not below tau = {tau}",
                    self.id
                )));
            }
        }
        if let (Some(first), Some(w)) = (self.first_infected, self.w_first) {
            if self.censored(first) || self.time(first) != w {
                return Err(Error::Numeric(format!(
                    "record {}: first-infection bookkeeping is inconsistent",
                    self.id
                )));
            }
            if self.infected(first.other()) && self.time(first.other()) < w {
                return Err(Error::Numeric(format!(
                    "record {}: w_first = {w} is not the earliest infection",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Draw the covariate pairs for partnerships `0..n` (the same values
/// `simulate_trial` uses for the same seed).
pub fn draw_covariates(law: &CovariateLaw, n: u64, seed: u64) -> Result<Vec<CovariatePair>> {
    law.validate()?;
    Ok((0..n)
        .into_par_iter()
        .map(|i| law.sample(&mut stream_rng(seed, COVARIATE_STREAM_BASE + i)))
        .collect())
}

/// Assign treatments given covariates (the same values `simulate_trial` uses
/// for the same seed).
pub fn assign_treatments(
    design: AssignmentDesign,
    covariates: &[CovariatePair],
    seed: u64,
) -> Vec<TreatmentPair> {
    covariates
        .par_iter()
        .enumerate()
        .map(|(i, l)| design.sample(l, &mut stream_rng(seed, TREATMENT_STREAM_BASE + i as u64)))
        .collect()
}

struct SimulatedPair {
    record: PartnershipRecord,
    tie: bool,
}

/// Simulate one partnership's event times given its treatments/covariates.
pub fn simulate_partnership<R: Rng>(
    spec: &HazardSpec,
    x: TreatmentPair,
    l: &CovariatePair,
    tau: f64,
    method: SamplerMethod,
    rng: &mut R,
) -> Result<PartnershipRecord> {
    Ok(simulate_partnership_inner(spec, 0, x, l, tau, method, rng)?.record)
}

fn simulate_partnership_inner<R: Rng>(
    spec: &HazardSpec,
    id: u64,
    x: TreatmentPair,
    l: &CovariatePair,
    tau: f64,
    method: SamplerMethod,
    rng: &mut R,
) -> Result<SimulatedPair> {
    let rate1 = spec.external_rate(Subject::One, x.0, &l.l1)?;
    let rate2 = spec.external_rate(Subject::Two, x.1, &l.l2)?;

    let mut tie = false;
    let stage1 = match method {
        SamplerMethod::HazardAttribution => {
            let combined = rate1.combined(&rate2);
            let e: f64 = rng.sample(Exp1);
            let u = combined.invert_cumulative(0.0, e)?;
            if u < tau {
                let total = combined.eval(u);
                let p1 = if total > 0.0 { rate1.eval(u) / total } else { 0.5 };
                let first = if rng.gen::<f64>() < p1 { Subject::One } else { Subject::Two };
                Some((u, first))
            } else {
                None
            }
        }
        SamplerMethod::LatentMinimum => {
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            let w1 = rate1.invert_cumulative(0.0, e1)?;
            let w2 = rate2.invert_cumulative(0.0, e2)?;
            let (u, first) = if w1 < w2 {
                (w1, Subject::One)
            } else if w2 < w1 {
                (w2, Subject::Two)
            } else {
                // fair coin on an exact floating-point tie
                tie = true;
                (w1, if rng.gen::<bool>() { Subject::One } else { Subject::Two })
            };
            if u < tau {
                Some((u, first))
            } else {
                None
            }
        }
    };

    let record = match stage1 {
        None => PartnershipRecord {
            id,
            l: l.clone(),
            x,
            t1: tau,
            t2: tau,
            c1: true,
            c2: true,
            first_infected: None,
            w_first: None,
        },
        Some((u, mut first)) => {
            let survivor = first.other();
            let internal = spec.internal_rate(survivor, u, x, l)?;
            let e: f64 = rng.sample(Exp1);
            let t_survivor = internal.invert_cumulative(u, e)?;
            if t_survivor == u {
                // fair coin on an exact floating-point tie of the two times
                tie = true;
                first = if rng.gen::<bool>() { first } else { survivor };
            }
            let (ts, cs) = if t_survivor < tau { (t_survivor, false) } else { (tau, true) };
            let (tf, cf) = (u, false);
            let ((t1, c1), (t2, c2)) = match first {
                Subject::One => ((tf, cf), (ts, cs)),
                Subject::Two => ((ts, cs), (tf, cf)),
            };
            PartnershipRecord {
                id,
                l: l.clone(),
                x,
                t1,
                t2,
                c1,
                c2,
                first_infected: Some(first),
                w_first: Some(u),
            }
        }
    };
    Ok(SimulatedPair { record, tie })
}

/// Simulate the full trial: covariates, treatments, and event times for every
/// partnership, censored at `scenario.tau`. Deterministic in the seed and
/// independent of thread count.
pub fn simulate_trial(scenario: &Scenario) -> Result<Dataset> {
    scenario.validate()?;
    let pairs: Vec<SimulatedPair> = (0..scenario.n)
        .into_par_iter()
        .map(|i| {
            let l = scenario
                .covariate_law
                .sample(&mut stream_rng(scenario.seed, COVARIATE_STREAM_BASE + i));
            let x = scenario
                .design
                .sample(&l, &mut stream_rng(scenario.seed, TREATMENT_STREAM_BASE + i));
            let mut event_rng = stream_rng(scenario.seed, EVENT_STREAM_BASE + i);
            simulate_partnership_inner(
                &scenario.spec,
                i,
                x,
                &l,
                scenario.tau,
                scenario.sampler,
                &mut event_rng,
            )
        })
        .collect::<Result<_>>()?;
    let ties = pairs.iter().filter(|p| p.tie).count() as u64;
    let records = pairs.into_iter().map(|p| p.record).collect();
    Ok(Dataset {
        scenario: Some(scenario.clone()),
        records,
        ties,
    })
}
