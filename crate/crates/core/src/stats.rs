//! Small statistical utilities: Kolmogorov–Smirnov tests for sampler
//! validation, batch-mean standard errors, and moment helpers.

use crate::error::{Error, Result};

/// Result of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: f64,
}

/// Asymptotic Kolmogorov survival function `Q(x) = 2 * sum (-1)^{k-1} exp(-2 k^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        if term < 1e-16 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Stephens' finite-sample adjustment for the one-sample statistic.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS test on empty sample".to_string()));
    }
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n_effective: n,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS test on empty sample".to_string()));
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q((n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d),
        n_effective: n_eff,
    })
}

/// Mean and its standard error from per-batch means (`se = sd / sqrt(K)`).
pub fn batch_mean_se(batch_means: &[f64]) -> Result<(f64, f64)> {
    let k = batch_means.len();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 batches for a standard error, got {k}"
        )));
    }
    let kf = k as f64;
    let mean = batch_means.iter().sum::<f64>() / kf;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    Ok((mean, (var / kf).sqrt()))
}

/// Mean and Monte Carlo standard error of raw draws.
pub fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 values for a standard error, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData("correlation needs two equal-length samples".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numeric("correlation of a constant sample".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_accepts_correct_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.gen::<f64>()).collect();
        let res = ks_one_sample(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(res.p_value > 0.01, "p = {}", res.p_value);
    }

    #[test]
    fn ks_rejects_wrong_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let samples: Vec<f64> = (0..50_000).map(|_| rng.gen::<f64>().powi(2)).collect();
        let res = ks_one_sample(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(res.p_value < 1e-6, "p = {}", res.p_value);
    }

    #[test]
    fn two_sample_ks_on_identical_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let a: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>()).collect();
        let res = ks_two_sample(&a, &b).unwrap();
        assert!(res.p_value > 0.01, "p = {}", res.p_value);
        let c: Vec<f64> = (0..20_000).map(|_| rng.gen::<f64>() * 0.9).collect();
        let res2 = ks_two_sample(&a, &c).unwrap();
        assert!(res2.p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_survival_known_points() {
        // Q(0.8276) ~ 0.5 (median of the Kolmogorov distribution)
        assert!((kolmogorov_q(0.82757) - 0.5).abs() < 1e-3);
        assert!(kolmogorov_q(0.0) == 1.0);
        assert!(kolmogorov_q(2.5) < 1e-4);
    }

    #[test]
    fn batch_se_matches_direct_computation() {
        let batches = [0.1, 0.15, 0.05, 0.12];
        let (mean, se) = batch_mean_se(&batches).unwrap();
        assert!((mean - 0.105).abs() < 1e-12);
        let var: f64 = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((se - (var / 4.0).sqrt()).abs() < 1e-12);
        assert!(batch_mean_se(&[0.1]).is_err());
    }

    #[test]
    fn correlation_of_linear_data_is_one() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((correlation(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }
}
