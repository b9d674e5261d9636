//! Treatment-assignment designs and covariate laws for partnership trials.
//!
//! The randomized designs share the marginal `Pr(X_i = 1) = 1/2` but differ
//! in the joint law of the pair, which is exactly what drives the biases the
//! crude estimands exhibit. The observational design assigns each subject
//! independently given their own covariates via a logistic model.

use crate::error::{Error, Result};
use crate::hazard::{CovariatePair, TreatmentPair};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Joint law of the treatment pair given covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentDesign {
    /// Independent fair coins: each of the four pairs has probability 1/4.
    Bernoulli,
    /// Exactly one treated subject per pair: (1,0) and (0,1) each 1/2.
    Block,
    /// Both subjects share one coin: (1,1) and (0,0) each 1/2.
    Cluster,
    /// `Pr(X_i = 1 | l_i) = logistic(sum(l_i))`, independently across the two
    /// subjects given covariates.
    Observational,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl AssignmentDesign {
    pub fn is_randomized(self) -> bool {
        !matches!(self, AssignmentDesign::Observational)
    }

    /// `Pr(X_i = x_i | l_i)` for one subject.
    pub fn marginal_prob(self, x_i: bool, l_i: &[f64]) -> f64 {
        let p1 = match self {
            AssignmentDesign::Observational => logistic(l_i.iter().sum()),
            _ => 0.5,
        };
        if x_i {
            p1
        } else {
            1.0 - p1
        }
    }

    /// `Pr(X = x | L = l)` for the pair.
    pub fn joint_prob(self, x: TreatmentPair, l: &CovariatePair) -> f64 {
        match self {
            AssignmentDesign::Bernoulli => 0.25,
            AssignmentDesign::Block => {
                if x.0 != x.1 {
                    0.5
                } else {
                    0.0
                }
            }
            AssignmentDesign::Cluster => {
                if x.0 == x.1 {
                    0.5
                } else {
                    0.0
                }
            }
            AssignmentDesign::Observational => {
                self.marginal_prob(x.0, &l.l1) * self.marginal_prob(x.1, &l.l2)
            }
        }
    }

    /// `Pr(X_j = x_j | X_i = x_i, L = l)` — the partner's conditional
    /// assignment law, used when crude estimands condition on one arm.
    pub fn partner_prob_given_own(self, x_j: bool, x_i: bool, l_j: &[f64]) -> f64 {
        match self {
            AssignmentDesign::Bernoulli => 0.5,
            AssignmentDesign::Block => {
                if x_j != x_i {
                    1.0
                } else {
                    0.0
                }
            }
            AssignmentDesign::Cluster => {
                if x_j == x_i {
                    1.0
                } else {
                    0.0
                }
            }
            AssignmentDesign::Observational => self.marginal_prob(x_j, l_j),
        }
    }

    /// Draw one treatment pair.
    pub fn sample<R: Rng>(self, l: &CovariatePair, rng: &mut R) -> TreatmentPair {
        match self {
            AssignmentDesign::Bernoulli => (rng.gen::<bool>(), rng.gen::<bool>()),
            AssignmentDesign::Block => {
                if rng.gen::<bool>() {
                    (true, false)
                } else {
                    (false, true)
                }
            }
            AssignmentDesign::Cluster => {
                let x = rng.gen::<bool>();
                (x, x)
            }
            AssignmentDesign::Observational => {
                let p1 = self.marginal_prob(true, &l.l1);
                let p2 = self.marginal_prob(true, &l.l2);
                (rng.gen::<f64>() < p1, rng.gen::<f64>() < p2)
            }
        }
    }
}

/// Distribution of the covariate pair across partnerships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Every partnership gets exactly these covariates.
    Point { l1: Vec<f64>, l2: Vec<f64> },
    /// Scalar pair `(L_1, L_2) ~ N(0, v * [[1, rho], [rho, 1]])`.
    BivariateNormal { v: f64, rho: f64 },
}

impl CovariateLaw {
    /// Standard scalar law with unit variance.
    pub fn standard_normal(rho: f64) -> Self {
        CovariateLaw::BivariateNormal { v: 1.0, rho }
    }

    /// Degenerate law with no covariates at all.
    pub fn none() -> Self {
        CovariateLaw::Point { l1: vec![], l2: vec![] }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovariateLaw::Point { l1, .. } => l1.len(),
            CovariateLaw::BivariateNormal { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovariateLaw::Point { l1, l2 } => {
                CovariatePair { l1: l1.clone(), l2: l2.clone() }.validate()
            }
            CovariateLaw::BivariateNormal { v, rho } => {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::config(format!("covariate variance v = {v} must be > 0")));
                }
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return Err(Error::config(format!(
                        "covariate correlation rho = {rho} must satisfy |rho| < 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Draw one covariate pair.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> CovariatePair {
        match self {
            CovariateLaw::Point { l1, l2 } => CovariatePair { l1: l1.clone(), l2: l2.clone() },
            CovariateLaw::BivariateNormal { v, rho } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let s = v.sqrt();
                CovariatePair {
                    l1: vec![s * z1],
                    l2: vec![s * (rho * z1 + (1.0 - rho * rho).sqrt() * z2)],
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn randomized_designs_have_half_marginals_and_valid_joints() {
        let l = CovariatePair::scalar(0.3, -0.7);
        for design in [AssignmentDesign::Bernoulli, AssignmentDesign::Block, AssignmentDesign::Cluster] {
            let mut total = 0.0;
            let mut marg1 = 0.0;
            for x1 in [false, true] {
                for x2 in [false, true] {
                    let p = design.joint_prob((x1, x2), &l);
                    assert!(p >= 0.0);
                    total += p;
                    if x1 {
                        marg1 += p;
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-15);
            assert!((marg1 - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn block_and_cluster_supports() {
        let l = CovariatePair::empty();
        assert_eq!(AssignmentDesign::Block.joint_prob((true, true), &l), 0.0);
        assert_eq!(AssignmentDesign::Block.joint_prob((true, false), &l), 0.5);
        assert_eq!(AssignmentDesign::Cluster.joint_prob((true, false), &l), 0.0);
        assert_eq!(AssignmentDesign::Cluster.joint_prob((false, false), &l), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let xb = AssignmentDesign::Block.sample(&l, &mut rng);
            assert_ne!(xb.0, xb.1);
            let xc = AssignmentDesign::Cluster.sample(&l, &mut rng);
            assert_eq!(xc.0, xc.1);
        }
    }

    #[test]
    fn observational_probabilities_follow_logistic() {
        let d = AssignmentDesign::Observational;
        assert!((d.marginal_prob(true, &[0.0]) - 0.5).abs() < 1e-15);
        let p = d.marginal_prob(true, &[1.0]);
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        let l = CovariatePair::scalar(1.0, -1.0);
        let joint = d.joint_prob((true, false), &l);
        let expect = d.marginal_prob(true, &[1.0]) * d.marginal_prob(false, &[-1.0]);
        assert!((joint - expect).abs() < 1e-15);
        // positivity
        for x1 in [false, true] {
            for x2 in [false, true] {
                let p = d.joint_prob((x1, x2), &l);
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn observational_sampling_matches_logistic_frequency() {
        let d = AssignmentDesign::Observational;
        let l = CovariatePair::scalar(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut count = 0;
        for _ in 0..n {
            if d.sample(&l, &mut rng).0 {
                count += 1;
            }
        }
        let freq = count as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn bivariate_normal_moments() {
        let law = CovariateLaw::BivariateNormal { v: 1.0, rho: 0.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let pair = law.sample(&mut rng);
            let (a, b) = (pair.l1[0], pair.l2[0]);
            s1 += a;
            s2 += b;
            s11 += a * a;
            s22 += b * b;
            s12 += a * b;
        }
        let nf = n as f64;
        let (m1, m2) = (s1 / nf, s2 / nf);
        let v1 = s11 / nf - m1 * m1;
        let v2 = s22 / nf - m2 * m2;
        let corr = (s12 / nf - m1 * m2) / (v1 * v2).sqrt();
        assert!(m1.abs() < 0.005 && m2.abs() < 0.005);
        assert!((v1 - 1.0).abs() < 0.01 && (v2 - 1.0).abs() < 0.01);
        assert!((corr - 0.1).abs() < 0.005, "corr = {corr}");
    }

    #[test]
    fn zero_correlation_is_independent() {
        let law = CovariateLaw::BivariateNormal { v: 1.0, rho: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000;
        let mut s12 = 0.0;
        for _ in 0..n {
            let pair = law.sample(&mut rng);
            s12 += pair.l1[0] * pair.l2[0];
        }
        assert!((s12 / n as f64).abs() < 0.005);
    }

    #[test]
    fn point_law_is_constant() {
        let law = CovariateLaw::Point { l1: vec![0.4], l2: vec![-0.2] };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let first = law.sample(&mut rng);
        for _ in 0..10 {
            assert_eq!(law.sample(&mut rng), first);
        }
    }

    #[test]
    fn law_validation() {
        assert!(CovariateLaw::BivariateNormal { v: 0.0, rho: 0.0 }.validate().is_err());
        assert!(CovariateLaw::BivariateNormal { v: 1.0, rho: 1.5 }.validate().is_err());
        assert!(CovariateLaw::BivariateNormal { v: 1.0, rho: -0.3 }.validate().is_ok());
        assert!(CovariateLaw::Point { l1: vec![0.0], l2: vec![] }.validate().is_err());
    }
}
