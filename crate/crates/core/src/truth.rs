//! Exact estimand computation from the generative hazard model.
//!
//! The building blocks are closed-form conditional quantities given
//! covariates: the external-infection CDF, the controlled outcome (partner
//! infection time held fixed), and the natural outcome (partner time
//! integrated out under a chosen treatment world, evaluated by adaptive
//! quadrature). Estimands are smooth functions of covariate-standardized
//! components; standardization is seeded Monte Carlo over the covariate law,
//! organized in fixed-size chunks with per-chunk RNG substreams so results
//! are independent of thread scheduling. Crude (design-dependent) estimands
//! reweight the same components by the design's treatment probabilities,
//! which covers observational assignment where treatments and covariates are
//! dependent.
//!
//! Standard errors are delta-method propagated from the Monte Carlo
//! covariance of the component means; they vanish for point covariate laws.

use crate::design::{AssignmentDesign, CovariateLaw};
use crate::error::{Error, Result};
use crate::estimand::{EstimandKind, EstimandRequest, EstimandValue, Provenance, ValueScale};
use crate::hazard::{BaselineHazard, CovariatePair, HazardSpec, Subject, TreatmentPair};
use crate::quad;
use crate::sim::Scenario;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Absolute tolerance for the outer partner-time integrals.
const OUTER_TOL: f64 = 1e-9;
/// Default number of covariate-standardization draws.
pub const DEFAULT_STANDARDIZE_DRAWS: u64 = 200_000;
/// Draws per RNG substream chunk during standardization.
const STANDARDIZE_CHUNK: u64 = 4096;
/// Stream-space offset for standardization substreams (disjoint from the
/// simulator's covariate/treatment/event stream spaces).
const STANDARDIZE_STREAM_BASE: u64 = 3 << 62;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Conditional-on-covariates building blocks
// ---------------------------------------------------------------------------

/// Precomputed multipliers for one subject's outcome formulas given
/// treatments and covariates.
struct OutcomeCtx<'a> {
    alpha: &'a BaselineHazard,
    gamma: &'a BaselineHazard,
    /// multiplier of the external baseline in the subject's own CDF
    m_f: f64,
    /// multiplier of the external baseline inside the post-infection hazard
    m_z_ext: f64,
    /// multiplier of the transmission baseline
    m_z_trans: f64,
}

impl OutcomeCtx<'_> {
    fn f_i(&self, w: f64) -> f64 {
        1.0 - (-self.m_f * self.alpha.cumulative(0.0, w)).exp()
    }

    /// `1 - exp(-integral of the post-infection hazard over [w_j, t])`.
    fn conditional_factor(&self, t: f64, w_j: f64) -> f64 {
        let lam = self.m_z_ext * self.alpha.cumulative(w_j, t)
            + self.m_z_trans * self.gamma.cumulative(0.0, t - w_j);
        1.0 - (-lam).exp()
    }

    fn controlled(&self, t: f64, w_j: f64) -> f64 {
        if t <= w_j {
            self.f_i(t)
        } else {
            let f = self.f_i(w_j);
            f + (1.0 - f) * self.conditional_factor(t, w_j)
        }
    }
}

fn outcome_ctx<'a>(
    spec: &'a HazardSpec,
    subject: Subject,
    x: TreatmentPair,
    l: &CovariatePair,
) -> Result<OutcomeCtx<'a>> {
    let x_i = subject.own_of(x);
    let m_f = spec.external_multiplier(subject, x_i, l.own(subject))?;
    let internal = spec.internal_rate(subject, 0.0, x, l)?;
    Ok(OutcomeCtx {
        alpha: &spec.alpha,
        gamma: &spec.gamma,
        m_f,
        m_z_ext: internal.0[0].multiplier,
        m_z_trans: internal.0[1].multiplier,
    })
}

/// External-infection CDF/density of one subject under their own treatment.
struct InitialLaw<'a> {
    alpha: &'a BaselineHazard,
    m: f64,
}

impl InitialLaw<'_> {
    fn cdf(&self, w: f64) -> f64 {
        1.0 - (-self.m * self.alpha.cumulative(0.0, w)).exp()
    }

    fn density(&self, u: f64) -> f64 {
        self.m * self.alpha.eval(u) * (-self.m * self.alpha.cumulative(0.0, u)).exp()
    }
}

fn initial_law<'a>(
    spec: &'a HazardSpec,
    subject: Subject,
    x_i: bool,
    l_i: &[f64],
) -> Result<InitialLaw<'a>> {
    Ok(InitialLaw {
        alpha: &spec.alpha,
        m: spec.external_multiplier(subject, x_i, l_i)?,
    })
}

fn check_time(name: &str, t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {t} must be finite and >= 0")))
    }
}

/// Geometrically graded split points approaching `t`, to help the adaptive
/// integrator resolve the boundary layer the transmission term creates there.
fn graded_splits(t: f64) -> Vec<f64> {
    (1..=8).map(|k| t * (1.0 - 0.5f64.powi(k))).collect()
}

/// `F_i(w | x_i, l_i)`: probability the subject is externally infected by `w`
/// while the partner remains uninfected throughout.
pub fn initial_cdf(spec: &HazardSpec, w: f64, x_i: bool, l_i: &[f64], subject: Subject) -> Result<f64> {
    check_time("w", w)?;
    Ok(initial_law(spec, subject, x_i, l_i)?.cdf(w))
}

/// Average controlled potential outcome `E[Y_i(t; w_j, x) | L = l]`: the
/// subject's infection probability by `t` when the partner's infection time
/// is fixed at `w_j`.
pub fn controlled_outcome(
    spec: &HazardSpec,
    t: f64,
    w_j: f64,
    x: TreatmentPair,
    l: &CovariatePair,
    subject: Subject,
) -> Result<f64> {
    check_time("t", t)?;
    check_time("w_j", w_j)?;
    Ok(outcome_ctx(spec, subject, x, l)?.controlled(t, w_j))
}

/// Average natural potential outcome `E[Y_i(t; W_j(x_j'), x) | L = l]`: the
/// controlled outcome integrated over the partner's infection-time
/// distribution under treatment world `x_j'`, including the never-infected
/// tail `F_i(t) (1 - F_j(t))`.
pub fn natural_outcome(
    spec: &HazardSpec,
    t: f64,
    x: TreatmentPair,
    x_j_prime: bool,
    l: &CovariatePair,
    subject: Subject,
) -> Result<f64> {
    check_time("t", t)?;
    let ctx = outcome_ctx(spec, subject, x, l)?;
    let partner = subject.other();
    let law_j = initial_law(spec, partner, x_j_prime, l.own(partner))?;
    let integral = quad::integrate_split(
        |u| ctx.controlled(t, u) * law_j.density(u),
        0.0,
        t,
        OUTER_TOL,
        &graded_splits(t),
    )?;
    Ok(integral + ctx.f_i(t) * (1.0 - law_j.cdf(t)))
}

/// The same quantity computed by direct bivariate integration of the joint
/// first/second-infection law (only meaningful in the same world
/// `x_j' = x_j`); kept as an independent route for cross-checking
/// [`natural_outcome`].
pub fn natural_outcome_direct(
    spec: &HazardSpec,
    t: f64,
    x: TreatmentPair,
    l: &CovariatePair,
    subject: Subject,
) -> Result<f64> {
    check_time("t", t)?;
    let partner = subject.other();
    let ctx = outcome_ctx(spec, subject, x, l)?;
    let law_i = initial_law(spec, subject, subject.own_of(x), l.own(subject))?;
    let law_j = initial_law(spec, partner, subject.partner_of(x), l.own(partner))?;
    // subject infected first
    let first = quad::integrate_split(
        |u| law_i.density(u) * (1.0 - law_j.cdf(u)),
        0.0,
        t,
        OUTER_TOL,
        &graded_splits(t),
    )?;
    // partner infected first at u, subject follows before t
    let second = quad::integrate_split(
        |u| law_j.density(u) * (1.0 - law_i.cdf(u)) * ctx.conditional_factor(t, u),
        0.0,
        t,
        OUTER_TOL,
        &graded_splits(t),
    )?;
    Ok(first + second)
}

/// Sub-distribution `P(subject infected first, at time <= w)` given
/// treatments and covariates.
pub fn first_infection_subdistribution(
    spec: &HazardSpec,
    w: f64,
    x: TreatmentPair,
    l: &CovariatePair,
    subject: Subject,
) -> Result<f64> {
    check_time("w", w)?;
    let partner = subject.other();
    let law_i = initial_law(spec, subject, subject.own_of(x), l.own(subject))?;
    let law_j = initial_law(spec, partner, subject.partner_of(x), l.own(partner))?;
    quad::integrate_split(
        |u| law_i.density(u) * (1.0 - law_j.cdf(u)),
        0.0,
        w,
        OUTER_TOL,
        &graded_splits(w),
    )
}

/// Numerator and denominator of the secondary attack rate given covariates:
/// the partner is infected first before `t` and the subject either follows
/// before `t` (numerator) or is merely at risk (denominator).
fn sar_parts(
    spec: &HazardSpec,
    t: f64,
    x: TreatmentPair,
    l: &CovariatePair,
    subject: Subject,
) -> Result<(f64, f64)> {
    let partner = subject.other();
    let ctx = outcome_ctx(spec, subject, x, l)?;
    let law_i = initial_law(spec, subject, subject.own_of(x), l.own(subject))?;
    let law_j = initial_law(spec, partner, subject.partner_of(x), l.own(partner))?;
    let num = quad::integrate_split(
        |u| ctx.conditional_factor(t, u) * (1.0 - law_i.cdf(u)) * law_j.density(u),
        0.0,
        t,
        OUTER_TOL,
        &graded_splits(t),
    )?;
    let den = quad::integrate_split(
        |u| (1.0 - law_i.cdf(u)) * law_j.density(u),
        0.0,
        t,
        OUTER_TOL,
        &graded_splits(t),
    )?;
    Ok((num, den))
}

// ---------------------------------------------------------------------------
// Covariate standardization
// ---------------------------------------------------------------------------

/// The covariate draws used for standardization under `seed` (chunked RNG
/// substreams; a point law contributes a single exact draw).
pub fn standardization_draws(law: &CovariateLaw, n_draws: u64, seed: u64) -> Result<Vec<CovariatePair>> {
    law.validate()?;
    if n_draws == 0 {
        return Err(Error::config("standardization requires n_draws >= 1"));
    }
    if let CovariateLaw::Point { l1, l2 } = law {
        return Ok(vec![CovariatePair { l1: l1.clone(), l2: l2.clone() }]);
    }
    let n_chunks = n_draws.div_ceil(STANDARDIZE_CHUNK);
    let chunks: Vec<Vec<CovariatePair>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, STANDARDIZE_STREAM_BASE + c);
            let lo = c * STANDARDIZE_CHUNK;
            let hi = ((c + 1) * STANDARDIZE_CHUNK).min(n_draws);
            (lo..hi).map(|_| law.sample(&mut rng)).collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Standardize a conditional quantity over the covariate law by seeded Monte
/// Carlo; returns (mean, MC standard error). Exact (zero SE) for point laws.
pub fn standardize<F>(inner: F, law: &CovariateLaw, n_draws: u64, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&CovariatePair) -> Result<f64> + Sync,
{
    let draws = standardization_draws(law, n_draws, seed)?;
    let values: Vec<f64> = draws
        .par_iter()
        .map(|l| inner(l))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

// ---------------------------------------------------------------------------
// The estimand engine
// ---------------------------------------------------------------------------

/// Design-independent standardization components, memoized per engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Component {
    /// Natural outcome at `t` under treatments `x`, partner world `xjp`.
    Nat { t: u64, x: (bool, bool), xjp: bool, role: Subject },
    /// Controlled outcome at `t` with partner time `w_j`.
    Ctrl { t: u64, w_j: u64, x: (bool, bool), role: Subject },
    /// Secondary-attack-rate numerator / denominator integrals.
    SarNum { t: u64, x: (bool, bool), role: Subject },
    SarDen { t: u64, x: (bool, bool), role: Subject },
}

impl Component {
    fn eval(self, spec: &HazardSpec, l: &CovariatePair) -> Result<f64> {
        match self {
            Component::Nat { t, x, xjp, role } => {
                natural_outcome(spec, f64::from_bits(t), x, xjp, l, role)
            }
            Component::Ctrl { t, w_j, x, role } => {
                controlled_outcome(spec, f64::from_bits(t), f64::from_bits(w_j), x, l, role)
            }
            Component::SarNum { t, x, role } => {
                Ok(sar_parts(spec, f64::from_bits(t), x, l, role)?.0)
            }
            Component::SarDen { t, x, role } => {
                Ok(sar_parts(spec, f64::from_bits(t), x, l, role)?.1)
            }
        }
    }
}

/// Computes every supported estimand exactly (to quadrature tolerance, plus
/// covariate-standardization Monte Carlo error) from a hazard specification
/// and covariate law. Treatment designs enter per call, so the memoized
/// outcome components are shared across designs.
pub struct TruthEngine {
    spec: HazardSpec,
    covariate_law: CovariateLaw,
    seed: u64,
    n_draws: u64,
    draws: OnceLock<Arc<Vec<CovariatePair>>>,
    cache: Mutex<HashMap<Component, Arc<Vec<f64>>>>,
}

impl TruthEngine {
    pub fn new(spec: HazardSpec, covariate_law: CovariateLaw, seed: u64) -> Result<Self> {
        spec.validate()?;
        covariate_law.validate()?;
        let spec_dim = spec.covariate_dim();
        if spec_dim != 0 && spec_dim != covariate_law.dim() {
            return Err(Error::config(format!(
                "hazard coefficients expect covariate dimension {spec_dim}, law has {}",
                covariate_law.dim()
            )));
        }
        Ok(TruthEngine {
            spec,
            covariate_law,
            seed,
            n_draws: DEFAULT_STANDARDIZE_DRAWS,
            draws: OnceLock::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        TruthEngine::new(scenario.spec.clone(), scenario.covariate_law.clone(), scenario.seed)
    }

    /// Override the number of standardization draws.
    pub fn with_draws(mut self, n_draws: u64) -> Result<Self> {
        if n_draws == 0 {
            return Err(Error::config("standardization requires n_draws >= 1"));
        }
        self.n_draws = n_draws;
        Ok(self)
    }

    pub fn spec(&self) -> &HazardSpec {
        &self.spec
    }

    /// The subject whose outcomes the engine reports: the home-bound subject
    /// when exactly one external-hazard scale is zero, otherwise subject 1
    /// (all laws here are exchangeable across roles in the symmetric case).
    fn focal_role(&self) -> Subject {
        let [s1, s2] = self.spec.per_subject_alpha_scale;
        if s1 == 0.0 && s2 != 0.0 {
            Subject::One
        } else if s2 == 0.0 && s1 != 0.0 {
            Subject::Two
        } else {
            Subject::One
        }
    }

    fn require_asymmetric(&self) -> Result<()> {
        let [s1, s2] = self.spec.per_subject_alpha_scale;
        let zeros = (s1 == 0.0) as u8 + (s2 == 0.0) as u8;
        if zeros != 1 {
            return Err(Error::config(
                "this estimand is defined for the asymmetric partnership: exactly one entry of per_subject_alpha_scale must be 0",
            ));
        }
        Ok(())
    }

    fn draws(&self) -> Result<Arc<Vec<CovariatePair>>> {
        if let Some(d) = self.draws.get() {
            return Ok(d.clone());
        }
        let drawn = Arc::new(standardization_draws(&self.covariate_law, self.n_draws, self.seed)?);
        Ok(self.draws.get_or_init(|| drawn).clone())
    }

    fn component(&self, key: Component) -> Result<Arc<Vec<f64>>> {
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let draws = self.draws()?;
        let values: Vec<f64> = draws
            .par_iter()
            .map(|l| key.eval(&self.spec, l))
            .collect::<Result<Vec<f64>>>()?;
        let arc = Arc::new(values);
        self.cache.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    /// Treatment pair with this role's own arm `own` and the partner's arm
    /// `partner`, in subject-1/subject-2 order.
    fn pair_for(role: Subject, own: bool, partner: bool) -> TreatmentPair {
        match role {
            Subject::One => (own, partner),
            Subject::Two => (partner, own),
        }
    }

    fn nat(&self, t: f64, role: Subject, own: bool, partner: bool, xjp: bool) -> Result<Vec<f64>> {
        Ok(self
            .component(Component::Nat {
                t: t.to_bits(),
                x: Self::pair_for(role, own, partner),
                xjp,
                role,
            })?
            .to_vec())
    }

    fn ctrl(&self, t: f64, w_j: f64, role: Subject, own: bool, partner: bool) -> Result<Vec<f64>> {
        Ok(self
            .component(Component::Ctrl {
                t: t.to_bits(),
                w_j: w_j.to_bits(),
                x: Self::pair_for(role, own, partner),
                role,
            })?
            .to_vec())
    }

    /// Per-draw `(numerator, denominator)` of `AR_{own}` under `design`:
    /// the subject's same-world infection probability, partner arm averaged
    /// over its conditional design law, importance-weighted by the subject's
    /// own assignment probability.
    fn ar_parts(
        &self,
        design: AssignmentDesign,
        t: f64,
        role: Subject,
        own: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let draws = self.draws()?;
        let n = draws.len();
        let mut num = vec![0.0; n];
        for partner_arm in [false, true] {
            // skip partner arms outside the design's support
            let possible = match design {
                AssignmentDesign::Block => partner_arm != own,
                AssignmentDesign::Cluster => partner_arm == own,
                _ => true,
            };
            if !possible {
                continue;
            }
            let nat = self.nat(t, role, own, partner_arm, partner_arm)?;
            for (d, l) in draws.iter().enumerate() {
                let wc = design.partner_prob_given_own(partner_arm, own, l.partner(role));
                num[d] += wc * nat[d];
            }
        }
        let mut den = vec![0.0; n];
        for (d, l) in draws.iter().enumerate() {
            let w_own = design.marginal_prob(own, l.own(role));
            num[d] *= w_own;
            den[d] = w_own;
        }
        Ok((num, den))
    }

    /// Per-draw `(numerator, denominator)` of the attack rate conditioned on
    /// both arms, `E[Y_i(t) | X_i = own, X_j = partner]`.
    fn joint_ar_parts(
        &self,
        design: AssignmentDesign,
        t: f64,
        role: Subject,
        own: bool,
        partner: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = Self::pair_for(role, own, partner);
        if design.is_randomized() && design.joint_prob(x, &CovariatePair::empty()) == 0.0 {
            return Err(Error::UndefinedEstimand(format!(
                "treatment pair (x_i={}, x_j={}) has probability 0 under the {design:?} design",
                own as u8, partner as u8
            )));
        }
        let draws = self.draws()?;
        let nat = self.nat(t, role, own, partner, partner)?;
        let mut num = vec![0.0; draws.len()];
        let mut den = vec![0.0; draws.len()];
        for (d, l) in draws.iter().enumerate() {
            let w = design.joint_prob(x, l);
            num[d] = w * nat[d];
            den[d] = w;
        }
        Ok((num, den))
    }

    /// Per-draw `(weighted SAR numerator, weighted SAR denominator)` for the
    /// pair `(own, partner)` under `design`.
    fn sar_weighted(
        &self,
        design: AssignmentDesign,
        t: f64,
        role: Subject,
        own: bool,
        partner: bool,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = Self::pair_for(role, own, partner);
        if design.is_randomized() && design.joint_prob(x, &CovariatePair::empty()) == 0.0 {
            return Err(Error::UndefinedEstimand(format!(
                "SAR pair (x_i={}, x_j={}) has probability 0 under the {design:?} design",
                own as u8, partner as u8
            )));
        }
        let draws = self.draws()?;
        let tb = t.to_bits();
        let num = self.component(Component::SarNum { t: tb, x, role })?;
        let den = self.component(Component::SarDen { t: tb, x, role })?;
        let mut wnum = vec![0.0; draws.len()];
        let mut wden = vec![0.0; draws.len()];
        for (d, l) in draws.iter().enumerate() {
            let w = design.joint_prob(x, l);
            wnum[d] = w * num[d];
            wden[d] = w * den[d];
        }
        Ok((wnum, wden))
    }

    /// Evaluate one estimand under `design`.
    pub fn estimand(&self, design: AssignmentDesign, request: &EstimandRequest) -> Result<EstimandValue> {
        request.validate()?;
        if request.kind.requires_asymmetric_spec() {
            self.require_asymmetric()?;
        }
        let role = self.focal_role();
        let t = request.t;
        let a = &request.args;

        // Build the component vectors and the combining function.
        let (vectors, combine): (Vec<Vec<f64>>, Box<dyn Fn(&[f64]) -> Result<f64>>) = match request.kind {
            EstimandKind::OutcomeControlled => {
                let v = self.ctrl(t, a.w_j.unwrap(), role, a.x_i.unwrap(), a.x_j.unwrap())?;
                (vec![v], Box::new(|m| Ok(m[0])))
            }
            EstimandKind::OutcomeNatural => {
                let v = self.nat(t, role, a.x_i.unwrap(), a.x_j.unwrap(), a.x_j_prime.unwrap())?;
                (vec![v], Box::new(|m| Ok(m[0])))
            }
            EstimandKind::CeControlled => {
                let early = self.ctrl(t, a.w_j.unwrap(), role, a.x_i.unwrap(), a.x_j.unwrap())?;
                let late = self.ctrl(t, a.w_j_prime.unwrap(), role, a.x_i.unwrap(), a.x_j.unwrap())?;
                (vec![early, late], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::SeControlled => {
                let treated = self.ctrl(t, a.w_j.unwrap(), role, true, a.x_j.unwrap())?;
                let untreated = self.ctrl(t, a.w_j.unwrap(), role, false, a.x_j.unwrap())?;
                (vec![treated, untreated], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::IeControlled => {
                let ptreated = self.ctrl(t, a.w_j.unwrap(), role, a.x_i.unwrap(), true)?;
                let puntreated = self.ctrl(t, a.w_j.unwrap(), role, a.x_i.unwrap(), false)?;
                (vec![ptreated, puntreated], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::CeNatural => {
                let w0 = self.nat(t, role, a.x_i.unwrap(), a.x_j.unwrap(), false)?;
                let w1 = self.nat(t, role, a.x_i.unwrap(), a.x_j.unwrap(), true)?;
                (vec![w0, w1], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::SeNatural => {
                let xj = a.x_j.unwrap();
                let treated = self.nat(t, role, true, xj, xj)?;
                let untreated = self.nat(t, role, false, xj, xj)?;
                (vec![treated, untreated], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::IeNatural => {
                let xi = a.x_i.unwrap();
                let ptreated = self.nat(t, role, xi, true, false)?;
                let puntreated = self.nat(t, role, xi, false, false)?;
                (vec![ptreated, puntreated], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::Ar => {
                let (num, den) = self.ar_parts(design, t, role, a.x_i.unwrap())?;
                (vec![num, den], Box::new(|m| ratio(m[0], m[1], "AR conditioning probability")))
            }
            EstimandKind::De => {
                let (n1, d1) = self.ar_parts(design, t, role, true)?;
                let (n0, d0) = self.ar_parts(design, t, role, false)?;
                (
                    vec![n1, d1, n0, d0],
                    Box::new(|m| {
                        Ok(ratio(m[0], m[1], "AR(1) conditioning probability")?
                            - ratio(m[2], m[3], "AR(0) conditioning probability")?)
                    }),
                )
            }
            EstimandKind::VeAr => {
                let (n1, d1) = self.ar_parts(design, t, role, true)?;
                let (n0, d0) = self.ar_parts(design, t, role, false)?;
                (
                    vec![n1, d1, n0, d0],
                    Box::new(|m| {
                        let ar1 = ratio(m[0], m[1], "AR(1) conditioning probability")?;
                        let ar0 = ratio(m[2], m[3], "AR(0) conditioning probability")?;
                        Ok(1.0 - ratio(ar1, ar0, "AR(0)")?)
                    }),
                )
            }
            EstimandKind::Ide => {
                let (n1, d1) = self.joint_ar_parts(design, t, role, false, true)?;
                let (n0, d0) = self.joint_ar_parts(design, t, role, false, false)?;
                (
                    vec![n1, d1, n0, d0],
                    Box::new(|m| {
                        Ok(ratio(m[0], m[1], "AR(0,1) conditioning probability")?
                            - ratio(m[2], m[3], "AR(0,0) conditioning probability")?)
                    }),
                )
            }
            EstimandKind::Sar => {
                let (num, den) = self.sar_weighted(design, t, role, a.x_i.unwrap(), a.x_j.unwrap())?;
                (vec![num, den], Box::new(|m| ratio(m[0], m[1], "SAR denominator")))
            }
            EstimandKind::VeINet => {
                let (n10, d10) = self.sar_weighted(design, t, role, false, true)?;
                let (n00, d00) = self.sar_weighted(design, t, role, false, false)?;
                (
                    vec![n10, d10, n00, d00],
                    Box::new(|m| {
                        let s10 = ratio(m[0], m[1], "SAR(1,0) denominator")?;
                        let s00 = ratio(m[2], m[3], "SAR(0,0) denominator")?;
                        Ok(ratio(s10 - s00, s00, "SAR(0,0)")?)
                    }),
                )
            }
            EstimandKind::VeIAsym => {
                let ptreated = self.nat(t, role, false, true, true)?;
                let puntreated = self.nat(t, role, false, false, true)?;
                (vec![ptreated, puntreated], Box::new(|m| Ok(m[0] - m[1])))
            }
            EstimandKind::VeCAsym => {
                let w1 = self.nat(t, role, false, false, true)?;
                let w0 = self.nat(t, role, false, false, false)?;
                (vec![w1, w0], Box::new(|m| Ok(m[0] - m[1])))
            }
        };

        let (means, cov) = moments(&vectors);
        let value = combine(&means)?;
        let se = delta_se(&combine, &means, &cov);
        let value = clamp_eps(value, request.kind.value_scale());

        let result = EstimandValue {
            kind: request.kind,
            t,
            args: *a,
            value,
            mc_se: Some(se),
            provenance: Provenance::Truth,
            diagnostics: format!("draws={};components={}", vectors.first().map_or(0, |v| v.len()), vectors.len()),
        };
        result.check_range()?;
        Ok(result)
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den.abs() < 1e-12 {
        Err(Error::UndefinedEstimand(format!("{what} is zero")))
    } else {
        Ok(num / den)
    }
}

/// Snap values within numerical noise of their admissible range back onto it.
fn clamp_eps(v: f64, scale: ValueScale) -> f64 {
    let (lo, hi) = match scale {
        ValueScale::Probability => (0.0, 1.0),
        ValueScale::Difference => (-1.0, 1.0),
        ValueScale::Ratio => return v,
    };
    if v < lo && v > lo - 1e-9 {
        lo
    } else if v > hi && v < hi + 1e-9 {
        hi
    } else {
        v
    }
}

/// Means of the component vectors and the covariance matrix of those means.
fn moments(vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = vectors.len();
    let n = vectors.first().map_or(0, |v| v.len());
    let nf = n as f64;
    let means: Vec<f64> = vectors.iter().map(|v| v.iter().sum::<f64>() / nf).collect();
    let mut cov = vec![vec![0.0; k]; k];
    if n >= 2 {
        for i in 0..k {
            for j in i..k {
                let mut s = 0.0;
                for d in 0..n {
                    s += (vectors[i][d] - means[i]) * (vectors[j][d] - means[j]);
                }
                let c = s / (nf - 1.0) / nf;
                cov[i][j] = c;
                cov[j][i] = c;
            }
        }
    }
    (means, cov)
}

/// Delta-method standard error of `f(means)` under the given covariance of
/// the means, with a numerically differenced gradient.
fn delta_se(f: &dyn Fn(&[f64]) -> Result<f64>, means: &[f64], cov: &[Vec<f64>]) -> f64 {
    let k = means.len();
    if cov.iter().all(|row| row.iter().all(|&c| c == 0.0)) {
        return 0.0;
    }
    let mut grad = vec![0.0; k];
    for i in 0..k {
        let h = 1e-6 * (1.0 + means[i].abs());
        let mut up = means.to_vec();
        up[i] += h;
        let mut down = means.to_vec();
        down[i] -= h;
        grad[i] = match (f(&up), f(&down)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            _ => 0.0,
        };
    }
    let mut var = 0.0;
    for i in 0..k {
        for j in 0..k {
            var += grad[i] * cov[i][j] * grad[j];
        }
    }
    var.max(0.0).sqrt()
}
