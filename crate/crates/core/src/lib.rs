//! Simulation and estimation toolkit for vaccine effects in two-person
//! partnerships where infection can pass between partners.
//!
//! The crate has four layers:
//!
//! * [`hazard`]: the structural transmission model. Each subject has an
//!   external infection hazard; once one partner is infected the survivor's
//!   hazard gains a transmission term. Baselines are constant, sinusoidal,
//!   or exponentially decaying, all with closed-form cumulative hazards and
//!   inverse-cumulative sampling.
//! * [`truth`]: the exact engine. It evaluates infection probabilities and
//!   every supported estimand (controlled/natural contagion, susceptibility
//!   and infectiousness contrasts, attack rates, secondary attack rates and
//!   their crude summaries) by numerical integration of the identification
//!   formulas, standardizing over the covariate law by seeded Monte Carlo.
//! * [`sim`] / [`dataset`]: reproducible trial generation. Partnerships are
//!   simulated with counter-based per-partnership RNG substreams so serial
//!   and parallel runs produce identical datasets, censored at a fixed
//!   horizon and exported as delimiter-separated text.
//! * [`estimate`]: nonparametric plug-in estimators of the same estimands
//!   from simulated (or externally supplied) datasets: a competing-risks
//!   product-limit CDF, a windowed controlled-outcome estimator, a
//!   jump-sum natural-outcome estimator, crude frequency contrasts, and
//!   covariate-bin standardization.
//!
//! [`config`] and [`table`] define the on-disk formats (scenario configs,
//! estimand request lists and result tables) used by the command-line
//! front end.

pub mod config;
pub mod dataset;
pub mod design;
pub mod error;
pub mod estimand;
pub mod estimate;
pub mod hazard;
pub mod quad;
pub mod sim;
pub mod stats;
pub mod table;
pub mod truth;

pub use config::ScenarioConfig;
pub use dataset::Dataset;
pub use design::{AssignmentDesign, CovariateLaw};
pub use error::{Error, Result};
pub use estimand::{EstimandKind, EstimandRequest, EstimandValue, Provenance};
pub use estimate::{
    estimate_controlled_outcome, estimate_crude, estimate_initial_cdf, estimate_natural_outcome,
    initial_cdf_invariance_gap, standardize_empirical, CurveKind, Estimator, EstimatorConfig,
    SubjectSel, SurvivalCurve,
};
pub use hazard::{BaselineHazard, CovariatePair, HazardSpec};
pub use sim::{PartnershipRecord, SamplerMethod, Scenario};
pub use truth::TruthEngine;
