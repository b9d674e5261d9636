//! Nonparametric plug-in estimators over partnership datasets.
//!
//! Each partnership yields up to two *subject views* (one per partner), and
//! every estimator works on strata of views selected by the treatment pair
//! and an optional covariate bin:
//!
//! * the initial (external-infection) CDF by the product-limit form, with
//!   "own subject infected first" as the event and pairs leaving the risk
//!   set at their first infection or censoring;
//! * the controlled outcome by plugging that CDF into the identification
//!   formula, with the conditional factor estimated from views whose partner
//!   was infected first inside a rectangular window around `w_j`;
//! * the natural outcome as a sum of controlled estimates over the jump
//!   points of the partner's estimated infection-time CDF plus the
//!   never-infected tail;
//! * crude attack-rate / secondary-attack-rate contrasts as raw frequencies.
//!
//! Covariate adjustment uses equal-frequency bins (own and partner values
//! binned separately); standardized values are bin-frequency-weighted
//! averages, with deficient bins pooled into one joint stratum. Standard
//! errors come from a delete-one-group jackknife over 16 partnership
//! batches keyed by id, which respects the within-partnership correlation
//! that pooled subject views introduce.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimand::{EstimandKind, EstimandRequest, EstimandValue, Provenance};
use crate::hazard::Subject;
use serde::{Deserialize, Serialize};

/// Number of id-keyed partnership groups used by the jackknife.
pub const JACKKNIFE_BATCHES: u8 = 16;

/// Which subject views enter the focal (outcome) side of an estimator.
/// Pooling both is the default: the generative law is exchangeable for the
/// bundled symmetric scenarios, and pooling halves the variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectSel {
    One,
    Two,
    #[default]
    Both,
}

impl SubjectSel {
    fn includes(self, subject: Subject) -> bool {
        match self {
            SubjectSel::One => subject == Subject::One,
            SubjectSel::Two => subject == Subject::Two,
            SubjectSel::Both => true,
        }
    }

    /// The selection describing the partners of the selected views.
    fn partner(self) -> SubjectSel {
        match self {
            SubjectSel::One => SubjectSel::Two,
            SubjectSel::Two => SubjectSel::One,
            SubjectSel::Both => SubjectSel::Both,
        }
    }
}

/// Smoothing and stratification choices for the plug-in estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Half-width of the partner-time window; `None` selects
    /// `0.5 * n^(-1/5) * t` per evaluation.
    pub wj_bandwidth: Option<f64>,
    /// Equal-frequency bins per covariate dimension (applied to own and
    /// partner values separately); 0 disables covariate adjustment.
    pub covariate_bins: usize,
    /// Evaluation grid for curve outputs.
    pub t_grid: Vec<f64>,
    /// Minimum views per stratum / window before an estimate is attempted.
    pub min_stratum_size: usize,
    /// Focal subject views.
    pub subjects: SubjectSel,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            wj_bandwidth: None,
            covariate_bins: 0,
            t_grid: Vec::new(),
            min_stratum_size: 20,
            subjects: SubjectSel::Both,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.wj_bandwidth {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::config(format!("wj_bandwidth = {h} must be positive")));
            }
        }
        if self.min_stratum_size == 0 {
            return Err(Error::config("min_stratum_size must be >= 1"));
        }
        if self.covariate_bins > 64 {
            return Err(Error::config(format!(
                "covariate_bins = {} exceeds the supported maximum of 64",
                self.covariate_bins
            )));
        }
        if self.t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::config("t_grid times must be finite and >= 0"));
        }
        Ok(())
    }

    fn bandwidth(&self, t: f64, n_views: usize) -> f64 {
        self.wj_bandwidth
            .unwrap_or_else(|| 0.5 * (n_views.max(2) as f64).powf(-0.2) * t.max(f64::EPSILON))
    }
}

/// What a curve's values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    CumHazard,
    Cdf,
}

/// A right-continuous step function over observed event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Strictly increasing event times.
    pub grid: Vec<f64>,
    /// Function value at (and after) each grid time.
    pub values: Vec<f64>,
    pub kind: CurveKind,
    /// Human-readable stratum label.
    pub strata: String,
    /// Pairs still fully at risk just before each grid time.
    pub at_risk: Vec<u64>,
}

impl SurvivalCurve {
    /// Step-function evaluation: 0 before the first event time.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.grid.partition_point(|u| *u <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != self.values.len() || self.grid.len() != self.at_risk.len() {
            return Err(Error::Numeric("curve arrays disagree in length".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Numeric("curve grid is not strictly increasing".into()));
        }
        let mut prev = 0.0;
        for &v in &self.values {
            if v < prev - 1e-12 {
                return Err(Error::Numeric("curve values decrease".into()));
            }
            if self.kind == CurveKind::Cdf && !(0.0..=1.0 + 1e-12).contains(&v) {
                return Err(Error::Numeric("CDF values out of [0,1]".into()));
            }
            prev = v;
        }
        Ok(())
    }

    /// Largest absolute difference between two step functions over the
    /// union of their grids.
    pub fn sup_distance(&self, other: &SurvivalCurve) -> f64 {
        let mut gap: f64 = 0.0;
        for t in self.grid.iter().chain(other.grid.iter()) {
            gap = gap.max((self.value_at(*t) - other.value_at(*t)).abs());
        }
        gap
    }
}

/// One subject's perspective on one partnership.
#[derive(Debug, Clone, Copy)]
struct View {
    subject: Subject,
    own_x: bool,
    par_x: bool,
    own_t: f64,
    own_inf: bool,
    /// own subject was the partnership's first infection
    own_first: bool,
    par_t: f64,
    /// partner was infected first, at `par_t`
    par_first: bool,
    /// time at which the partnership leaves the both-at-risk state
    pair_min: f64,
    bin: u32,
    batch: u8,
}

/// Prepared estimator over one dataset: subject views, covariate bin
/// assignments, and the focal-subject selection.
pub struct Estimator {
    config: EstimatorConfig,
    views: Vec<View>,
    /// total bins (own x partner combinations); 1 when adjustment is off
    n_bins: usize,
    /// bins per single covariate block, for mirroring own/partner labels
    half_radix: u32,
    tau: f64,
}

/// Restriction of an estimator call to covariate bins.
#[derive(Debug, Clone, Copy)]
enum BinSel<'a> {
    All,
    One(u32),
    Set(&'a [u32]),
}

impl BinSel<'_> {
    fn admits(&self, bin: u32) -> bool {
        match self {
            BinSel::All => true,
            BinSel::One(b) => bin == *b,
            BinSel::Set(s) => s.contains(&bin),
        }
    }

    fn label(&self) -> String {
        match self {
            BinSel::All => "all".to_string(),
            BinSel::One(b) => format!("{b}"),
            BinSel::Set(s) => format!("pooled{s:?}"),
        }
    }
}

impl Estimator {
    pub fn new(data: &Dataset, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if data.records.is_empty() {
            return Err(Error::InsufficientData("dataset has no records".into()));
        }
        let dim = data.records[0].l.dim();
        let tau = data
            .records
            .iter()
            .map(|r| r.t1.max(r.t2))
            .fold(0.0f64, f64::max);

        // equal-frequency cut points per covariate dimension, from the
        // pooled values of both subjects
        let nb = if dim == 0 { 0 } else { config.covariate_bins };
        let mut cuts: Vec<Vec<f64>> = Vec::new();
        if nb > 1 {
            for d in 0..dim {
                let mut pooled: Vec<f64> = data
                    .records
                    .iter()
                    .flat_map(|r| [r.l.l1[d], r.l.l2[d]])
                    .collect();
                pooled.sort_by(f64::total_cmp);
                let m = pooled.len();
                let cut = (1..nb).map(|k| pooled[k * m / nb]).collect();
                cuts.push(cut);
            }
        }
        let bins_per_block = if nb > 1 { nb.pow(dim as u32) } else { 1 };
        let n_bins = bins_per_block * bins_per_block;
        if n_bins > 1 << 20 {
            return Err(Error::config(format!(
                "covariate binning would create {n_bins} strata; reduce covariate_bins"
            )));
        }

        let bin_of = |l: &[f64]| -> u32 {
            let mut b = 0u32;
            for (d, cut) in cuts.iter().enumerate() {
                let k = cut.partition_point(|c| *c <= l[d]) as u32;
                b = b * nb as u32 + k;
            }
            b
        };

        let mut views = Vec::with_capacity(2 * data.records.len());
        for r in &data.records {
            r.l.validate()?;
            if r.l.dim() != dim {
                return Err(Error::config("records disagree in covariate dimension"));
            }
            let pair_min = match r.w_first {
                Some(w) => w,
                None => r.t1.min(r.t2),
            };
            for subject in Subject::BOTH {
                let own_t = r.time(subject);
                let par_t = r.time(subject.other());
                views.push(View {
                    subject,
                    own_x: subject.own_of(r.x),
                    par_x: subject.partner_of(r.x),
                    own_t,
                    own_inf: r.infected(subject),
                    own_first: r.first_infected == Some(subject),
                    par_t,
                    par_first: r.first_infected == Some(subject.other()),
                    pair_min,
                    bin: bin_of(l_own(r, subject)) * bins_per_block as u32
                        + bin_of(l_own(r, subject.other())),
                    batch: (r.id % JACKKNIFE_BATCHES as u64) as u8,
                });
            }
        }
        Ok(Estimator {
            config,
            views,
            n_bins,
            half_radix: bins_per_block as u32,
            tau,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Views whose own subject matches `sel`, own/partner arms match `x`,
    /// bin is admitted, and (for jackknife replicates) batch is kept.
    fn select(
        &self,
        sel: SubjectSel,
        x: Option<(bool, bool)>,
        bins: BinSel,
        skip_batch: Option<u8>,
    ) -> Vec<usize> {
        self.views
            .iter()
            .enumerate()
            .filter(|(_, v)| {
                sel.includes(v.subject)
                    && x.is_none_or(|(own, par)| v.own_x == own && v.par_x == par)
                    && bins.admits(v.bin)
                    && skip_batch != Some(v.batch)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Swap the own/partner halves of a bin label so a focal-view bin can
    /// select the matching partner-perspective views.
    fn mirror_bin(&self, bin: u32) -> u32 {
        let own = bin / self.half_radix;
        let par = bin % self.half_radix;
        par * self.half_radix + own
    }

    // -- product-limit initial CDF ------------------------------------------

    /// Effective stratum/window size floor. Jackknife replicates drop 1/16
    /// of the data, so they get a halved floor: anything computable on the
    /// full sample stays computable on every replicate, keeping the
    /// delete-one-group perturbation smooth instead of failing at the
    /// full-sample boundary.
    fn min_views(&self, skip_batch: Option<u8>) -> usize {
        match skip_batch {
            Some(_) => self.config.min_stratum_size.div_ceil(2),
            None => self.config.min_stratum_size,
        }
    }

    /// Product-limit estimate of the external-infection CDF in a stratum:
    /// events are "own subject infected first", and a pair leaves the risk
    /// set at its first infection or censoring time.
    fn product_limit(&self, idx: &[usize], label: String, min: usize) -> Result<SurvivalCurve> {
        if idx.len() < min {
            return Err(Error::InsufficientData(format!(
                "stratum {label}: {} views < the required {min} (min_stratum_size {})",
                idx.len(),
                self.config.min_stratum_size
            )));
        }
        let mut events: Vec<f64> = idx
            .iter()
            .filter(|i| self.views[**i].own_first)
            .map(|i| self.views[*i].own_t)
            .collect();
        events.sort_by(f64::total_cmp);
        let mut leave: Vec<f64> = idx.iter().map(|i| self.views[*i].pair_min).collect();
        leave.sort_by(f64::total_cmp);

        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut at_risk = Vec::new();
        let mut surv = 1.0;
        let mut e = 0;
        while e < events.len() {
            let u = events[e];
            let mut d = 0usize;
            while e < events.len() && events[e] == u {
                d += 1;
                e += 1;
            }
            // pairs with first event or censoring at >= u were at risk at u-
            let r = leave.len() - leave.partition_point(|v| *v < u);
            debug_assert!(r >= d);
            surv *= 1.0 - d as f64 / r as f64;
            grid.push(u);
            values.push(1.0 - surv);
            at_risk.push(r as u64);
        }
        let curve = SurvivalCurve { grid, values, kind: CurveKind::Cdf, strata: label, at_risk };
        curve.validate()?;
        Ok(curve)
    }

    /// The same stratum's CDF through the exponentiated cumulative-hazard
    /// route, as an independent diagnostic of the product-limit form.
    fn nelson_aalen_cdf(&self, idx: &[usize], label: String, min: usize) -> Result<SurvivalCurve> {
        let pl = self.product_limit(idx, label, min)?;
        let mut values = Vec::with_capacity(pl.grid.len());
        let mut cum = 0.0;
        let mut prev = 0.0;
        for &v in &pl.values {
            // recover d/R from consecutive product-limit survivors
            let s_prev = 1.0 - prev;
            let s_now = 1.0 - v;
            if s_prev > 0.0 {
                cum += 1.0 - s_now / s_prev;
            }
            values.push(1.0 - (-cum).exp());
            prev = v;
        }
        Ok(SurvivalCurve { values, ..pl })
    }

    fn initial_cdf_curve(
        &self,
        x_i: bool,
        x_j_fixed: bool,
        bins: BinSel,
        sel: SubjectSel,
        skip_batch: Option<u8>,
    ) -> Result<SurvivalCurve> {
        let idx = self.select(sel, Some((x_i, x_j_fixed)), bins, skip_batch);
        let label = format!("(x_i={}, x_j={}, bin={})", x_i as u8, x_j_fixed as u8, bins.label());
        self.product_limit(&idx, label, self.min_views(skip_batch))
    }

    // -- controlled outcome --------------------------------------------------

    /// Sorted partner-first times with a prefix count of "own infected by
    /// `t`" hits, for O(log n) window queries at any `w_j`.
    fn window_index(&self, idx: &[usize], t: f64) -> (Vec<f64>, Vec<u32>) {
        let mut rows: Vec<(f64, bool)> = idx
            .iter()
            .map(|i| &self.views[*i])
            .filter(|v| v.par_first)
            .map(|v| (v.par_t, v.own_inf && v.own_t <= t))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut hits = Vec::with_capacity(rows.len() + 1);
        hits.push(0u32);
        let mut acc = 0u32;
        for r in &rows {
            acc += r.1 as u32;
            hits.push(acc);
        }
        (times, hits)
    }

    fn window_rate(
        times: &[f64],
        hits: &[u32],
        w_j: f64,
        h: f64,
    ) -> (usize, f64) {
        let lo = times.partition_point(|u| *u < w_j - h);
        let hi = times.partition_point(|u| *u <= w_j + h);
        let n = hi - lo;
        let k = (hits[hi] - hits[lo]) as f64;
        (n, if n == 0 { 0.0 } else { k / n as f64 })
    }

    fn controlled_value(
        &self,
        fhat: &SurvivalCurve,
        times: &[f64],
        hits: &[u32],
        t: f64,
        w_j: f64,
        h: f64,
        min: usize,
    ) -> Result<(f64, usize)> {
        if t <= w_j {
            return Ok((fhat.value_at(t), 0));
        }
        let (n, rate) = Self::window_rate(times, hits, w_j, h);
        if n < min {
            return Err(Error::InsufficientData(format!(
                "{n} partner infections within {h:.4} of w_j = {w_j} (need {min})"
            )));
        }
        let f = fhat.value_at(w_j);
        Ok((f + (1.0 - f) * rate, n))
    }

    // -- natural outcome -----------------------------------------------------

    /// Partner's initial-CDF curve for world `x_j_prime`, holding the focal
    /// subject's arm fixed, from the partner-perspective views.
    fn partner_curve(
        &self,
        x_i: bool,
        x_j_prime: bool,
        bins: BinSel,
        skip_batch: Option<u8>,
    ) -> Result<SurvivalCurve> {
        let mirrored: Vec<u32>;
        let mbins = match bins {
            BinSel::All => BinSel::All,
            BinSel::One(b) => BinSel::One(self.mirror_bin(b)),
            BinSel::Set(s) => {
                mirrored = s.iter().map(|b| self.mirror_bin(*b)).collect();
                BinSel::Set(&mirrored)
            }
        };
        self.initial_cdf_curve(x_j_prime, x_i, mbins, self.config.subjects.partner(), skip_batch)
    }

    /// Natural-outcome estimate with its same-world diagnostic
    /// `(value, raw stratum mean, stratum size)`.
    fn natural_value(
        &self,
        t: f64,
        x: (bool, bool),
        x_j_prime: bool,
        bins: BinSel,
        skip_batch: Option<u8>,
    ) -> Result<(f64, f64, usize)> {
        let focal = self.select(self.config.subjects, Some(x), bins, skip_batch);
        let label = format!("(x=({}, {}), bin={})", x.0 as u8, x.1 as u8, bins.label());
        let min = self.min_views(skip_batch);
        let fhat_i = self.product_limit(&focal, label.clone(), min)?;
        let fhat_j = self.partner_curve(x.0, x_j_prime, bins, skip_batch)?;
        let (times, hits) = self.window_index(&focal, t);
        let h = self.config.bandwidth(t, focal.len());

        let mut value = 0.0;
        let mut prev_f = 0.0;
        for (k, &u) in fhat_j.grid.iter().enumerate() {
            if u > t {
                break;
            }
            let jump = fhat_j.values[k] - prev_f;
            prev_f = fhat_j.values[k];
            if jump <= 0.0 {
                continue;
            }
            let (ctrl, _) = self
                .controlled_value(&fhat_i, &times, &hits, t, u, h, min)
                .map_err(|e| match e {
                    Error::InsufficientData(msg) => Error::InsufficientData(format!(
                        "natural outcome {label} at partner time {u:.4}: {msg}"
                    )),
                    other => other,
                })?;
            value += ctrl * jump;
        }
        value += fhat_i.value_at(t) * (1.0 - fhat_j.value_at(t));
        value = value.clamp(0.0, 1.0);

        let raw_hits = focal
            .iter()
            .filter(|i| {
                let v = &self.views[**i];
                v.own_inf && v.own_t <= t
            })
            .count();
        let raw = raw_hits as f64 / focal.len() as f64;
        Ok((value, raw, focal.len()))
    }

    // -- crude frequencies ----------------------------------------------------

    /// Attack-rate numerator/denominator among views with own arm `x_own`
    /// (and partner arm `x_par` when given).
    fn ar_counts(
        &self,
        t: f64,
        x_own: bool,
        x_par: Option<bool>,
        skip_batch: Option<u8>,
    ) -> (u64, u64) {
        let mut num = 0u64;
        let mut den = 0u64;
        for v in &self.views {
            if !self.config.subjects.includes(v.subject)
                || v.own_x != x_own
                || x_par.is_some_and(|p| v.par_x != p)
                || skip_batch == Some(v.batch)
            {
                continue;
            }
            den += 1;
            num += (v.own_inf && v.own_t <= t) as u64;
        }
        (num, den)
    }

    /// SAR numerator/denominator: partner infected first before `t` with the
    /// subject still at risk; numerator additionally requires the subject
    /// infected by `t`.
    fn sar_counts(
        &self,
        t: f64,
        x_own: bool,
        x_par: bool,
        skip_batch: Option<u8>,
    ) -> (u64, u64) {
        let mut num = 0u64;
        let mut den = 0u64;
        for v in &self.views {
            if !self.config.subjects.includes(v.subject)
                || v.own_x != x_own
                || v.par_x != x_par
                || skip_batch == Some(v.batch)
                || !v.par_first
                || v.par_t >= t
            {
                continue;
            }
            den += 1;
            num += (v.own_inf && v.own_t <= t) as u64;
        }
        (num, den)
    }

    fn crude_ratio(num: u64, den: u64, what: &str) -> Result<f64> {
        if den == 0 {
            Err(Error::UndefinedEstimand(format!("{what}: empty conditioning set")))
        } else {
            Ok(num as f64 / den as f64)
        }
    }

    // -- standardization and the estimand driver ------------------------------

    /// Frequency weight of each covariate bin among the focal views.
    fn bin_weights(&self, skip_batch: Option<u8>) -> Vec<f64> {
        let mut counts = vec![0u64; self.n_bins];
        let mut total = 0u64;
        for v in &self.views {
            if self.config.subjects.includes(v.subject) && skip_batch != Some(v.batch) {
                counts[v.bin as usize] += 1;
                total += 1;
            }
        }
        counts.iter().map(|c| *c as f64 / total.max(1) as f64).collect()
    }

    /// Bin-frequency-weighted average of a per-stratum estimate; bins that
    /// report insufficient data are pooled into one joint stratum. Returns
    /// the value and the number of pooled bins.
    fn standardize_bins(
        &self,
        skip_batch: Option<u8>,
        cell: &dyn Fn(BinSel, Option<u8>) -> Result<f64>,
    ) -> Result<(f64, usize)> {
        if self.n_bins <= 1 {
            return Ok((cell(BinSel::All, skip_batch)?, 0));
        }
        let weights = self.bin_weights(skip_batch);
        let mut value = 0.0;
        let mut deficient: Vec<u32> = Vec::new();
        let mut deficient_weight = 0.0;
        for (b, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            match cell(BinSel::One(b as u32), skip_batch) {
                Ok(v) => value += w * v,
                Err(Error::InsufficientData(_)) => {
                    deficient.push(b as u32);
                    deficient_weight += w;
                }
                Err(e) => return Err(e),
            }
        }
        if !deficient.is_empty() {
            let pooled = cell(BinSel::Set(&deficient), skip_batch)?;
            value += deficient_weight * pooled;
        }
        Ok((value, deficient.len()))
    }

    /// Delete-one-group jackknife standard error of `run`.
    fn jackknife_se(&self, run: &dyn Fn(Option<u8>) -> Result<f64>) -> Option<f64> {
        let mut reps = Vec::with_capacity(JACKKNIFE_BATCHES as usize);
        for k in 0..JACKKNIFE_BATCHES {
            if let Ok(v) = run(Some(k)) {
                reps.push(v);
            }
        }
        let g = reps.len();
        if g < JACKKNIFE_BATCHES as usize / 2 {
            return None;
        }
        let mean = reps.iter().sum::<f64>() / g as f64;
        let ss = reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        Some(((g as f64 - 1.0) / g as f64 * ss).sqrt())
    }

    /// Evaluate one estimand request against the dataset.
    pub fn estimand(&self, request: &EstimandRequest) -> Result<EstimandValue> {
        request.validate()?;
        let t = request.t;
        if t > self.tau + 1e-9 {
            return Err(Error::config(format!(
                "evaluation time {t} exceeds the dataset horizon {}",
                self.tau
            )));
        }
        let a = &request.args;
        let mut extra_diag = String::new();

        // each kind is a closure over (bin restriction, jackknife skip)
        let run: Box<dyn Fn(Option<u8>) -> Result<f64>> = match request.kind {
            EstimandKind::OutcomeControlled => {
                let (w_j, x) = (a.w_j.unwrap(), (a.x_i.unwrap(), a.x_j.unwrap()));
                self.check_window_pre(t, w_j)?;
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| self.controlled_cell(t, w_j, x, bins, skip))?
                        .0)
                })
            }
            EstimandKind::CeControlled => {
                let (w_j, w_jp) = (a.w_j.unwrap(), a.w_j_prime.unwrap());
                let x = (a.x_i.unwrap(), a.x_j.unwrap());
                self.check_window_pre(t, w_j)?;
                self.check_window_pre(t, w_jp)?;
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.controlled_cell(t, w_j, x, bins, skip)?
                                - self.controlled_cell(t, w_jp, x, bins, skip)?)
                        })?
                        .0)
                })
            }
            EstimandKind::SeControlled => {
                let (w_j, x_j) = (a.w_j.unwrap(), a.x_j.unwrap());
                self.check_window_pre(t, w_j)?;
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.controlled_cell(t, w_j, (true, x_j), bins, skip)?
                                - self.controlled_cell(t, w_j, (false, x_j), bins, skip)?)
                        })?
                        .0)
                })
            }
            EstimandKind::IeControlled => {
                let (w_j, x_i) = (a.w_j.unwrap(), a.x_i.unwrap());
                self.check_window_pre(t, w_j)?;
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.controlled_cell(t, w_j, (x_i, true), bins, skip)?
                                - self.controlled_cell(t, w_j, (x_i, false), bins, skip)?)
                        })?
                        .0)
                })
            }
            EstimandKind::OutcomeNatural => {
                let x = (a.x_i.unwrap(), a.x_j.unwrap());
                let xjp = a.x_j_prime.unwrap();
                // surface the same-world diagnostic from the full-data pass
                if xjp == x.1 {
                    let (v, raw, n) = self.natural_value(t, x, xjp, BinSel::All, None)?;
                    let se = (raw * (1.0 - raw) / n as f64).sqrt();
                    extra_diag = format!(
                        ";same_world_raw={raw:.6};same_world_gap={:.6};raw_se={se:.6}",
                        v - raw
                    );
                }
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.natural_value(t, x, xjp, bins, skip)?.0)
                        })?
                        .0)
                })
            }
            EstimandKind::CeNatural => {
                let x = (a.x_i.unwrap(), a.x_j.unwrap());
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.natural_value(t, x, false, bins, skip)?.0
                                - self.natural_value(t, x, true, bins, skip)?.0)
                        })?
                        .0)
                })
            }
            EstimandKind::SeNatural => {
                let x_j = a.x_j.unwrap();
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.natural_value(t, (true, x_j), x_j, bins, skip)?.0
                                - self.natural_value(t, (false, x_j), x_j, bins, skip)?.0)
                        })?
                        .0)
                })
            }
            EstimandKind::IeNatural => {
                let x_i = a.x_i.unwrap();
                Box::new(move |skip| {
                    Ok(self
                        .standardize_bins(skip, &|bins, skip| {
                            Ok(self.natural_value(t, (x_i, true), false, bins, skip)?.0
                                - self.natural_value(t, (x_i, false), false, bins, skip)?.0)
                        })?
                        .0)
                })
            }
            EstimandKind::VeIAsym => Box::new(move |skip| {
                Ok(self
                    .standardize_bins(skip, &|bins, skip| {
                        Ok(self.natural_value(t, (false, true), true, bins, skip)?.0
                            - self.natural_value(t, (false, false), true, bins, skip)?.0)
                    })?
                    .0)
            }),
            EstimandKind::VeCAsym => Box::new(move |skip| {
                Ok(self
                    .standardize_bins(skip, &|bins, skip| {
                        Ok(self.natural_value(t, (false, false), true, bins, skip)?.0
                            - self.natural_value(t, (false, false), false, bins, skip)?.0)
                    })?
                    .0)
            }),
            EstimandKind::Ar => {
                let x_i = a.x_i.unwrap();
                Box::new(move |skip| {
                    let (num, den) = self.ar_counts(t, x_i, None, skip);
                    Self::crude_ratio(num, den, "AR")
                })
            }
            EstimandKind::De => Box::new(move |skip| {
                let (n1, d1) = self.ar_counts(t, true, None, skip);
                let (n0, d0) = self.ar_counts(t, false, None, skip);
                Ok(Self::crude_ratio(n1, d1, "AR(1)")? - Self::crude_ratio(n0, d0, "AR(0)")?)
            }),
            EstimandKind::VeAr => Box::new(move |skip| {
                let (n1, d1) = self.ar_counts(t, true, None, skip);
                let (n0, d0) = self.ar_counts(t, false, None, skip);
                let ar1 = Self::crude_ratio(n1, d1, "AR(1)")?;
                let ar0 = Self::crude_ratio(n0, d0, "AR(0)")?;
                if ar0 <= 0.0 {
                    return Err(Error::UndefinedEstimand("AR(0) is zero".into()));
                }
                Ok(1.0 - ar1 / ar0)
            }),
            EstimandKind::Ide => Box::new(move |skip| {
                let (n1, d1) = self.ar_counts(t, false, Some(true), skip);
                let (n0, d0) = self.ar_counts(t, false, Some(false), skip);
                Ok(Self::crude_ratio(n1, d1, "AR(0,1)")? - Self::crude_ratio(n0, d0, "AR(0,0)")?)
            }),
            EstimandKind::Sar => {
                let (x_i, x_j) = (a.x_i.unwrap(), a.x_j.unwrap());
                Box::new(move |skip| {
                    let (num, den) = self.sar_counts(t, x_i, x_j, skip);
                    Self::crude_ratio(num, den, "SAR")
                })
            }
            EstimandKind::VeINet => Box::new(move |skip| {
                let (n10, d10) = self.sar_counts(t, false, true, skip);
                let (n00, d00) = self.sar_counts(t, false, false, skip);
                let s10 = Self::crude_ratio(n10, d10, "SAR(1,0)")?;
                let s00 = Self::crude_ratio(n00, d00, "SAR(0,0)")?;
                if s00 <= 0.0 {
                    return Err(Error::UndefinedEstimand("SAR(0,0) is zero".into()));
                }
                Ok((s10 - s00) / s00)
            }),
        };

        let value = run(None)?;
        // An empirical value is never exact: if most replicates cannot be
        // computed the uncertainty is unknown, and the honest output is a
        // flagged row, not a value that reads as zero-error.
        let Some(se) = self.jackknife_se(run.as_ref()) else {
            return Err(Error::InsufficientData(format!(
                "{}: fewer than half of the {JACKKNIFE_BATCHES} delete-one-group \
                 jackknife replicates were computable",
                request.kind.code()
            )));
        };
        let result = EstimandValue {
            kind: request.kind,
            t,
            args: *a,
            value,
            mc_se: Some(se),
            provenance: Provenance::Empirical,
            diagnostics: format!(
                "views={};bins={};batches={}{}",
                self.views
                    .iter()
                    .filter(|v| self.config.subjects.includes(v.subject))
                    .count(),
                self.n_bins,
                JACKKNIFE_BATCHES,
                extra_diag
            ),
        };
        result.check_range()?;
        Ok(result)
    }

    fn check_window_pre(&self, t: f64, w_j: f64) -> Result<()> {
        if t > w_j {
            let n = self
                .views
                .iter()
                .filter(|v| self.config.subjects.includes(v.subject))
                .count();
            let h = self.config.bandwidth(t, n);
            if w_j + h >= self.tau {
                return Err(Error::config(format!(
                    "w_j = {w_j} plus bandwidth {h:.4} reaches the dataset horizon {}; \
                     the window would be censored",
                    self.tau
                )));
            }
        }
        Ok(())
    }

    /// One controlled-outcome cell: the stratum's product-limit CDF plugged
    /// into the identification formula with a windowed conditional factor.
    fn controlled_cell(
        &self,
        t: f64,
        w_j: f64,
        x: (bool, bool),
        bins: BinSel,
        skip_batch: Option<u8>,
    ) -> Result<f64> {
        let focal = self.select(self.config.subjects, Some(x), bins, skip_batch);
        let label = format!("(x=({}, {}), bin={})", x.0 as u8, x.1 as u8, bins.label());
        let min = self.min_views(skip_batch);
        let fhat = self.product_limit(&focal, label, min)?;
        let (times, hits) = self.window_index(&focal, t);
        let h = self.config.bandwidth(t, focal.len());
        Ok(self.controlled_value(&fhat, &times, &hits, t, w_j, h, min)?.0)
    }
}

fn l_own(r: &crate::sim::PartnershipRecord, subject: Subject) -> &[f64] {
    r.l.own(subject)
}

// ---------------------------------------------------------------------------
// Free-function entry points mirroring the estimator operations
// ---------------------------------------------------------------------------

/// Product-limit estimate of one subject's external-infection CDF in the
/// `(x_i, x_j_fixed)` stratum, optionally restricted to one covariate bin.
pub fn estimate_initial_cdf(
    data: &Dataset,
    config: &EstimatorConfig,
    x_i: bool,
    x_j_fixed: bool,
    covariate_bin: Option<u32>,
    subject: SubjectSel,
) -> Result<SurvivalCurve> {
    let est = Estimator::new(data, config.clone())?;
    let bins = covariate_bin.map_or(BinSel::All, BinSel::One);
    est.initial_cdf_curve(x_i, x_j_fixed, bins, subject, None)
}

/// The exponentiated-cumulative-hazard variant of the same curve
/// (diagnostic route; agrees with the product-limit form in large samples).
pub fn estimate_initial_cdf_hazard_route(
    data: &Dataset,
    config: &EstimatorConfig,
    x_i: bool,
    x_j_fixed: bool,
    covariate_bin: Option<u32>,
    subject: SubjectSel,
) -> Result<SurvivalCurve> {
    let est = Estimator::new(data, config.clone())?;
    let bins = covariate_bin.map_or(BinSel::All, BinSel::One);
    let idx = est.select(subject, Some((x_i, x_j_fixed)), bins, None);
    let label = format!("(x_i={}, x_j={}, bin={})", x_i as u8, x_j_fixed as u8, bins.label());
    est.nelson_aalen_cdf(&idx, label, est.min_views(None))
}

/// Sup-distance between the curves computed holding the partner's arm at 0
/// vs 1; the underlying quantity does not depend on the partner's arm, so
/// this gap measures finite-sample noise.
pub fn initial_cdf_invariance_gap(
    data: &Dataset,
    config: &EstimatorConfig,
    x_i: bool,
    subject: SubjectSel,
) -> Result<f64> {
    let est = Estimator::new(data, config.clone())?;
    let c0 = est.initial_cdf_curve(x_i, false, BinSel::All, subject, None)?;
    let c1 = est.initial_cdf_curve(x_i, true, BinSel::All, subject, None)?;
    Ok(c0.sup_distance(&c1))
}

/// Windowed plug-in estimate of the controlled outcome
/// `E[Y_i(t; w_j, x)]` in one stratum.
pub fn estimate_controlled_outcome(
    data: &Dataset,
    config: &EstimatorConfig,
    t: f64,
    w_j: f64,
    x: (bool, bool),
    covariate_bin: Option<u32>,
) -> Result<f64> {
    let est = Estimator::new(data, config.clone())?;
    est.check_window_pre(t, w_j)?;
    let bins = covariate_bin.map_or(BinSel::All, BinSel::One);
    est.controlled_cell(t, w_j, x, bins, None)
}

/// Jump-sum plug-in estimate of the natural outcome
/// `E[Y_i(t; W_j(x_j'), x)]` in one stratum.
pub fn estimate_natural_outcome(
    data: &Dataset,
    config: &EstimatorConfig,
    t: f64,
    x: (bool, bool),
    x_j_prime: bool,
    covariate_bin: Option<u32>,
) -> Result<f64> {
    let est = Estimator::new(data, config.clone())?;
    let bins = covariate_bin.map_or(BinSel::All, BinSel::One);
    Ok(est.natural_value(t, x, x_j_prime, bins, None)?.0)
}

/// Crude (unadjusted) trial summaries as raw frequencies.
pub fn estimate_crude(
    data: &Dataset,
    config: &EstimatorConfig,
    request: &EstimandRequest,
) -> Result<EstimandValue> {
    match request.kind {
        EstimandKind::Ar
        | EstimandKind::VeAr
        | EstimandKind::De
        | EstimandKind::Ide
        | EstimandKind::Sar
        | EstimandKind::VeINet => {}
        other => {
            return Err(Error::config(format!(
                "{} is not a crude estimand",
                other.code()
            )))
        }
    }
    Estimator::new(data, config.clone())?.estimand(request)
}

/// Bin-frequency-weighted average of externally supplied per-bin estimates;
/// entries are `(bin weight, estimate)` and weights must be nonnegative.
pub fn standardize_empirical(per_bin: &[(f64, f64)]) -> Result<f64> {
    if per_bin.is_empty() {
        return Err(Error::InsufficientData("no covariate bins supplied".into()));
    }
    let total: f64 = per_bin.iter().map(|(w, _)| *w).sum();
    if per_bin.iter().any(|(w, _)| *w < 0.0) || total <= 0.0 {
        return Err(Error::config("bin weights must be nonnegative with positive sum"));
    }
    Ok(per_bin.iter().map(|(w, v)| w * v).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{AssignmentDesign, CovariateLaw};
    use crate::estimand::EstimandArgs;
    use crate::hazard::{BaselineHazard, CovariatePair, HazardSpec};
    use crate::sim::{simulate_trial, PartnershipRecord, SamplerMethod, Scenario};
    use approx::assert_abs_diff_eq;

    /// A hand-built dataset: 6 pairs, all untreated, scalar covariates 0.
    /// Subject-1 event histories chosen so the product-limit values are
    /// simple fractions.
    fn toy_dataset() -> Dataset {
        // c = censored at tau = 10; censored subjects carry t = tau
        let mk = |id: u64, t1: f64, c1: bool, t2: f64, c2: bool| {
            let mut r = PartnershipRecord {
                id,
                l: CovariatePair::scalar(0.0, 0.0),
                x: (false, false),
                t1,
                c1,
                t2,
                c2,
                first_infected: None,
                w_first: None,
            };
            r.derive_first_infection();
            r
        };
        Dataset {
            scenario: None,
            records: vec![
                mk(0, 1.0, false, 3.0, false),
                mk(1, 2.0, false, 10.0, true),
                mk(2, 10.0, true, 10.0, true),
                mk(3, 4.0, false, 2.5, false),
                mk(4, 10.0, true, 6.0, false),
                mk(5, 10.0, true, 10.0, true),
            ],
            ties: 0,
        }
    }

    fn loose_config() -> EstimatorConfig {
        EstimatorConfig { min_stratum_size: 1, ..Default::default() }
    }

    #[test]
    fn product_limit_matches_hand_computation() {
        // subject-1 views only: first-infection events at t=1 (pair 0) and
        // t=2 (pair 1); pair 3's subject 1 is infected second (partner at
        // 2.5), pairs 2/4/5 contribute censoring.
        // risk sets (pairs fully at risk at u-): at u=1: all 6; at u=2: 5.
        // F(1) = 1 - 5/6; F(2) = 1 - (5/6)(4/5) = 1/3.
        let data = toy_dataset();
        let curve = estimate_initial_cdf(&data, &loose_config(), false, false, None, SubjectSel::One)
            .unwrap();
        assert_eq!(curve.grid, vec![1.0, 2.0]);
        assert_abs_diff_eq!(curve.value_at(1.0), 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(curve.value_at(3.0), 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(curve.value_at(0.5), 0.0);
        assert_eq!(curve.at_risk, vec![6, 5]);

        // pooling both subjects adds subject-2 first-infections at 2.5 and 6
        let pooled = estimate_initial_cdf(&data, &loose_config(), false, false, None, SubjectSel::Both)
            .unwrap();
        assert_eq!(pooled.grid, vec![1.0, 2.0, 2.5, 6.0]);
        // risk counts over 12 views (each pair leaves both views at its
        // first event): u=1: 12, u=2: 10, u=2.5: 8, u=6: 6
        assert_eq!(pooled.at_risk, vec![12, 10, 8, 6]);
    }

    #[test]
    fn empty_stratum_reports_insufficient_data() {
        let data = toy_dataset();
        let err = estimate_initial_cdf(&data, &loose_config(), true, false, None, SubjectSel::Both)
            .unwrap_err();
        match err {
            Error::InsufficientData(msg) => assert!(msg.contains("x_i=1")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn no_events_before_w_means_zero() {
        let data = toy_dataset();
        let curve = estimate_initial_cdf(&data, &loose_config(), false, false, None, SubjectSel::One)
            .unwrap();
        assert_eq!(curve.value_at(0.99), 0.0);
    }

    #[test]
    fn hazard_route_close_to_product_limit() {
        let data = toy_dataset();
        let pl = estimate_initial_cdf(&data, &loose_config(), false, false, None, SubjectSel::Both)
            .unwrap();
        let na = estimate_initial_cdf_hazard_route(
            &data,
            &loose_config(),
            false,
            false,
            None,
            SubjectSel::Both,
        )
        .unwrap();
        for (v_pl, v_na) in pl.values.iter().zip(&na.values) {
            // 1 - h <= exp(-h), so the exponentiated-hazard survivor is
            // larger and its CDF never exceeds the product-limit CDF
            assert!(*v_na <= v_pl + 1e-12);
            assert!((v_na - v_pl).abs() < 0.12);
        }
    }

    #[test]
    fn controlled_outcome_early_branch_ignores_window() {
        let data = toy_dataset();
        let cfg = EstimatorConfig { min_stratum_size: 1, wj_bandwidth: Some(0.5), ..Default::default() };
        // t <= w_j: the window (which is empty here) must not matter
        let v = estimate_controlled_outcome(&data, &cfg, 2.0, 2.0, (false, false), None).unwrap();
        let curve = estimate_initial_cdf(&data, &cfg, false, false, None, SubjectSel::Both).unwrap();
        assert_eq!(v, curve.value_at(2.0));
    }

    #[test]
    fn controlled_outcome_insufficient_window_is_reported() {
        let data = toy_dataset();
        let cfg = EstimatorConfig {
            min_stratum_size: 3,
            wj_bandwidth: Some(0.1),
            ..Default::default()
        };
        let err = estimate_controlled_outcome(&data, &cfg, 8.0, 2.5, (false, false), None).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn window_preconditions_enforced() {
        let data = toy_dataset();
        let cfg = EstimatorConfig { min_stratum_size: 1, wj_bandwidth: Some(1.0), ..Default::default() };
        // w_j + h reaches tau = 10
        let err = estimate_controlled_outcome(&data, &cfg, 9.9, 9.5, (false, false), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn crude_counts_match_hand_fractions() {
        let data = toy_dataset();
        let cfg = loose_config();
        // subject views of all 6 untreated pairs; infections by t=4:
        // s1 at 1, 2, 4; s2 at 3, 2.5 -> AR(0) = 5/12
        let ar = estimate_crude(
            &data,
            &cfg,
            &EstimandRequest::new(
                EstimandKind::Ar,
                4.0,
                EstimandArgs { x_i: Some(false), ..Default::default() },
            ),
        )
        .unwrap();
        assert_abs_diff_eq!(ar.value, 5.0 / 12.0, epsilon = 1e-12);

        // SAR(0,0) at t = 4: partner-first views with par_t < 4:
        // pair 0 (s2's view, partner first at 1, s2 infected at 3 <= 4: hit),
        // pair 1 (s2's view, partner at 2, s2 censored: miss),
        // pair 3 (s1's view, partner at 2.5, s1 infected at 4: hit)
        // -> 2/3
        let sar = estimate_crude(
            &data,
            &cfg,
            &EstimandRequest::new(
                EstimandKind::Sar,
                4.0,
                EstimandArgs { x_i: Some(false), x_j: Some(false), ..Default::default() },
            ),
        )
        .unwrap();
        assert_abs_diff_eq!(sar.value, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn crude_empty_set_is_undefined() {
        let data = toy_dataset();
        let err = estimate_crude(
            &data,
            &loose_config(),
            &EstimandRequest::new(
                EstimandKind::Ar,
                4.0,
                EstimandArgs { x_i: Some(true), ..Default::default() },
            ),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UndefinedEstimand(_)));
    }

    #[test]
    fn standardize_empirical_weighted_average() {
        let v = standardize_empirical(&[(0.25, 0.1), (0.75, 0.5)]).unwrap();
        assert_abs_diff_eq!(v, 0.4, epsilon = 1e-12);
        assert_eq!(standardize_empirical(&[(1.0, 0.7)]).unwrap(), 0.7);
        assert!(standardize_empirical(&[]).is_err());
        assert!(standardize_empirical(&[(-0.1, 0.5), (1.1, 0.5)]).is_err());
    }

    #[test]
    fn estimand_rejects_time_past_horizon() {
        let data = toy_dataset();
        let est = Estimator::new(&data, loose_config()).unwrap();
        let err = est
            .estimand(&EstimandRequest::new(EstimandKind::De, 99.0, EstimandArgs::default()))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    fn sim_scenario(n: u64, gamma: f64, seed: u64) -> Dataset {
        let mut spec = HazardSpec::new(
            BaselineHazard::Constant { rate: 0.2 },
            BaselineHazard::Constant { rate: gamma },
        );
        spec.beta0 = f64::ln(0.4);
        spec.beta1 = f64::ln(0.4);
        spec.sigma = f64::ln(0.01);
        simulate_trial(&Scenario {
            name: "estimate-test".into(),
            spec,
            design: AssignmentDesign::Bernoulli,
            covariate_law: CovariateLaw::none(),
            n,
            tau: 4.0,
            seed,
            sampler: SamplerMethod::HazardAttribution,
        })
        .unwrap()
    }

    #[test]
    fn initial_cdf_tracks_closed_form_in_simulation() {
        let data = sim_scenario(30_000, 0.0, 11);
        let curve =
            estimate_initial_cdf(&data, &EstimatorConfig::default(), false, false, None, SubjectSel::Both)
                .unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=40 {
            let w = 2.0 * k as f64 / 40.0;
            worst = worst.max((curve.value_at(w) - (1.0 - (-0.2 * w).exp())).abs());
        }
        assert!(worst < 0.015, "sup distance {worst}");
    }

    #[test]
    fn jackknife_se_is_calibrated_for_crude_ar() {
        // the jackknife SE should be close to the binomial SE for a plain
        // frequency over independent partnerships
        let data = sim_scenario(20_000, 0.0, 13);
        let est = Estimator::new(&data, EstimatorConfig { subjects: SubjectSel::One, ..Default::default() })
            .unwrap();
        let ar = est
            .estimand(&EstimandRequest::new(
                EstimandKind::Ar,
                2.0,
                EstimandArgs { x_i: Some(false), ..Default::default() },
            ))
            .unwrap();
        let n = data.records.iter().filter(|r| !r.x.0).count() as f64;
        let binom = (ar.value * (1.0 - ar.value) / n).sqrt();
        let jk = ar.mc_se.unwrap();
        assert!(
            (jk / binom - 1.0).abs() < 0.35,
            "jackknife {jk} vs binomial {binom}"
        );
    }

    #[test]
    fn natural_outcome_same_world_matches_raw_mean() {
        let data = sim_scenario(30_000, 10.0, 17);
        let cfg = EstimatorConfig::default();
        let nat = estimate_natural_outcome(&data, &cfg, 2.0, (false, false), false, None).unwrap();
        let est = Estimator::new(&data, cfg).unwrap();
        let idx = est.select(SubjectSel::Both, Some((false, false)), BinSel::All, None);
        let raw = idx
            .iter()
            .filter(|i| est.views[**i].own_inf && est.views[**i].own_t <= 2.0)
            .count() as f64
            / idx.len() as f64;
        let se = (raw * (1.0 - raw) / idx.len() as f64).sqrt();
        assert!(
            (nat - raw).abs() <= 3.0 * se,
            "plug-in {nat} vs raw mean {raw} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn covariate_bins_partition_views() {
        let mut spec = HazardSpec::new(
            BaselineHazard::Constant { rate: 0.2 },
            BaselineHazard::Constant { rate: 10.0 },
        );
        spec.theta0 = vec![f64::ln(0.95)];
        let data = simulate_trial(&Scenario {
            name: "bins".into(),
            spec,
            design: AssignmentDesign::Observational,
            covariate_law: CovariateLaw::standard_normal(0.1),
            n: 4_000,
            tau: 4.0,
            seed: 5,
            sampler: SamplerMethod::HazardAttribution,
        })
        .unwrap();
        let est = Estimator::new(&data, EstimatorConfig { covariate_bins: 4, ..Default::default() })
            .unwrap();
        assert_eq!(est.n_bins, 16);
        let weights = est.bin_weights(None);
        assert_abs_diff_eq!(weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // equal-frequency marginals: own-block weights near 1/4 each
        for own in 0..4 {
            let w: f64 = (0..4).map(|par| weights[own * 4 + par]).sum();
            assert!((w - 0.25).abs() < 0.03, "own bin {own} weight {w}");
        }
        // mirroring swaps the blocks
        assert_eq!(est.mirror_bin(1 * 4 + 3), 3 * 4 + 1);
    }
}
