//! Small statistical toolkit: compensated/pairwise summation and
//! Kolmogorov–Smirnov and chi-square goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how work was split between threads.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Outcome of a goodness-of-fit test at a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov quantile `c(α)` with `P(√n D > c) = α`.
pub fn kolmogorov_critical(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against the continuous CDF `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, alpha: f64) -> Result<GofResult> {
    if samples.len() < 2 {
        return Err(Error::Degenerate("KS test needs at least two samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let critical = kolmogorov_critical(alpha) / sn;
    let p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok(GofResult { statistic: d, critical, p_value, pass: d < critical })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<GofResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate("KS test needs at least two samples per side".into()));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (n, m) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let se = ne.sqrt();
    let critical = kolmogorov_critical(alpha) / se;
    let p_value = kolmogorov_sf((se + 0.12 + 0.11 / se) * d);
    Ok(GofResult { statistic: d, critical, p_value, pass: d < critical })
}

/// Pearson chi-square test of observed bin counts against expected counts.
/// Bins with expected count below 5 should be merged by the caller.
pub fn chi_square(observed: &[u64], expected: &[f64], alpha: f64) -> Result<GofResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::domain("chi-square needs matching bins, at least two"));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Numerical(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - alpha);
    Ok(GofResult { statistic: stat, critical, p_value: dist.sf(stat), pass: stat < critical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_rng;
    use rand::Rng;

    #[test]
    fn pairwise_matches_exact_integer_sums() {
        let xs: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 50_005_000.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn kolmogorov_constants() {
        assert!((kolmogorov_critical(0.01) - 1.6276).abs() < 1e-3);
        assert!((kolmogorov_critical(0.05) - 1.3581).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shifted() {
        let mut r = sample_rng(11, 0);
        let xs: Vec<f64> = (0..5000).map(|_| r.random::<f64>()).collect();
        let ok = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0), 0.01).unwrap();
        assert!(ok.pass, "{ok:?}");
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.9).collect();
        assert!(!ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0), 0.01).unwrap().pass);
        let ys: Vec<f64> = (0..4000).map(|_| r.random::<f64>()).collect();
        assert!(ks_two_sample(&xs, &ys, 0.01).unwrap().pass);
        assert!(!ks_two_sample(&shifted, &ys, 0.01).unwrap().pass);
    }

    #[test]
    fn chi_square_critical_value() {
        // 99th percentile of chi-square with 9 degrees of freedom.
        let r = chi_square(&[10; 10], &[10.0; 10], 0.01).unwrap();
        assert!((r.critical - 21.666).abs() < 1e-2);
        assert_eq!(r.statistic, 0.0);
    }
}
