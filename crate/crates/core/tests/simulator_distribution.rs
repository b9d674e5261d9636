//! Distributional validation of the trial simulator against the exact
//! model laws: Kolmogorov-Smirnov agreement of simulated infection times
//! with the closed-form CDF when infections cannot transmit, and agreement
//! of the simulated first-infection sub-distribution and final infection
//! frequencies with their quadrature values when they can.

use contagion_core::design::{AssignmentDesign, CovariateLaw};
use contagion_core::hazard::{BaselineHazard, CovariatePair, HazardSpec, Subject};
use contagion_core::sim::{simulate_trial, SamplerMethod, Scenario};
use contagion_core::stats::ks_one_sample;
use contagion_core::truth::{first_infection_subdistribution, initial_cdf, natural_outcome};

const N: u64 = 100_000;
const TAU: f64 = 4.0;

fn scenario(spec: HazardSpec, seed: u64) -> Scenario {
    Scenario {
        name: "distribution-check".to_string(),
        spec,
        design: AssignmentDesign::Bernoulli,
        covariate_law: CovariateLaw::none(),
        n: N,
        tau: TAU,
        seed,
        sampler: SamplerMethod::HazardAttribution,
    }
}

fn strong_spec(gamma_rate: f64) -> HazardSpec {
    let mut spec = HazardSpec::new(
        BaselineHazard::Constant { rate: 0.2 },
        BaselineHazard::Constant { rate: gamma_rate },
    );
    spec.beta0 = f64::ln(0.4);
    spec.beta1 = f64::ln(0.4);
    spec.sigma = f64::ln(0.01);
    spec
}

/// Infection times under the no-contagion model follow the external law
/// conditioned on infection before the horizon; KS must not reject.
#[test]
fn no_contagion_infection_times_match_external_law() {
    let spec = strong_spec(0.0);
    let data = simulate_trial(&scenario(spec.clone(), 4021)).unwrap();
    for (arm, subject) in [(false, Subject::One), (true, Subject::Two)] {
        let mut times = Vec::new();
        for r in &data.records {
            if subject.own_of(r.x) == arm && r.infected(subject) {
                times.push(r.time(subject));
            }
        }
        assert!(times.len() > 10_000, "expected plenty of infections, got {}", times.len());
        let total = initial_cdf(&spec, TAU, arm, &[], subject).unwrap();
        let cdf = |t: f64| initial_cdf(&spec, t, arm, &[], subject).unwrap() / total;
        let ks = ks_one_sample(&times, cdf).unwrap();
        assert!(
            ks.p_value > 0.01,
            "KS rejected arm {arm}: D = {}, p = {}",
            ks.statistic,
            ks.p_value
        );
    }
}

/// With transmission on, the joint law is checked through two functionals:
/// the first-infection sub-distribution at interior time points and the
/// final infection frequency, each within 3 binomial standard errors.
#[test]
fn contagion_first_infection_subdistribution_and_attack_rate_match() {
    let spec = strong_spec(10.0);
    let data = simulate_trial(&scenario(spec.clone(), 4022)).unwrap();
    let l = CovariatePair::empty();

    // restrict to the fully untreated pairs so the conditional law is fixed
    let records: Vec<_> = data.records.iter().filter(|r| r.x == (false, false)).collect();
    let n = records.len() as f64;
    assert!(n > 20_000.0);

    for w in [0.5, 1.0, 2.0, 3.0] {
        let truth = first_infection_subdistribution(&spec, w, (false, false), &l, Subject::One).unwrap();
        let hits = records
            .iter()
            .filter(|r| r.first_infected == Some(Subject::One) && r.w_first.unwrap() <= w)
            .count() as f64;
        let phat = hits / n;
        let se = (truth * (1.0 - truth) / n).sqrt();
        assert!(
            (phat - truth).abs() <= 3.0 * se,
            "sub-distribution at w = {w}: simulated {phat:.5} vs exact {truth:.5} (3se = {:.5})",
            3.0 * se
        );
    }

    // final infection frequency of subject 1 by t = 2 vs the same-world
    // natural outcome
    let t = 2.0;
    let truth = natural_outcome(&spec, t, (false, false), false, &l, Subject::One).unwrap();
    let hits = records
        .iter()
        .filter(|r| r.infected(Subject::One) && r.time(Subject::One) <= t)
        .count() as f64;
    let phat = hits / n;
    let se = (truth * (1.0 - truth) / n).sqrt();
    assert!(
        (phat - truth).abs() <= 3.0 * se,
        "attack rate at t = {t}: simulated {phat:.5} vs exact {truth:.5} (3se = {:.5})"
        , 3.0 * se
    );
}

/// Both sampling routes must produce the same distributions; check a
/// KS-style comparison of subject-1 infection times between methods.
#[test]
fn sampler_methods_agree_in_distribution() {
    let spec = strong_spec(10.0);
    let mut scen_a = scenario(spec.clone(), 4023);
    scen_a.n = 40_000;
    let mut scen_b = scen_a.clone();
    scen_b.sampler = SamplerMethod::LatentMinimum;
    scen_b.seed = 9923;
    let a = simulate_trial(&scen_a).unwrap();
    let b = simulate_trial(&scen_b).unwrap();
    let times = |d: &contagion_core::Dataset| {
        d.records
            .iter()
            .filter(|r| r.x == (false, false) && r.infected(Subject::One))
            .map(|r| r.time(Subject::One))
            .collect::<Vec<f64>>()
    };
    let (ta, tb) = (times(&a), times(&b));
    let ks = contagion_core::stats::ks_two_sample(&ta, &tb).unwrap();
    assert!(ks.p_value > 0.01, "samplers disagree: D = {}, p = {}", ks.statistic, ks.p_value);
}
