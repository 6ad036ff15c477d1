//! Monte Carlo bookkeeping: moment estimates, weight diagnostics and
//! verdicts against exact targets.
//!
//! Batch estimators work on a slice of samples and use pairwise sums, so the
//! result depends only on the multiset of values and their stored order. The
//! streaming [`Welford`] accumulator merges associatively for callers that
//! cannot keep every sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// A target that may legitimately be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Exact {
    Finite(f64),
    Infinite,
}

impl Exact {
    pub fn finite(self) -> Option<f64> {
        match self {
            Exact::Finite(v) => Some(v),
            Exact::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exact::Infinite)
    }
}

/// Mean and uncertainty of a Monte Carlo statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Effective sample size; equals `n` for unweighted estimates.
    pub ess: f64,
    /// Excess kurtosis of the summands (weighted summands for weighted estimates).
    pub kurtosis: f64,
    /// Share of the total absolute mass carried by the largest 1% of summands.
    pub top_mass_fraction: f64,
    pub exact: Option<Exact>,
    pub z_score: Option<f64>,
}

impl MomentEstimate {
    /// An estimate known without sampling error (e.g. a zero exponent).
    pub fn exact_value(v: f64, n: usize) -> Self {
        Self {
            mean: v,
            stderr: 0.0,
            n,
            ess: n as f64,
            kurtosis: 0.0,
            top_mass_fraction: if n == 0 { 0.0 } else { (n.div_ceil(100)) as f64 / n as f64 },
            exact: None,
            z_score: None,
        }
    }

    /// Attach an exact target and fill in the z-score when both are finite.
    pub fn with_exact(mut self, exact: Exact) -> Self {
        self.exact = Some(exact);
        self.z_score = match exact {
            Exact::Finite(e) if self.stderr > 0.0 => Some((self.mean - e) / self.stderr),
            Exact::Finite(e) if self.mean == e => Some(0.0),
            _ => None,
        };
        self
    }

    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.mean.abs()
    }
}

fn top_fraction(values: &[f64]) -> f64 {
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let total = pairwise_sum(&abs);
    if total == 0.0 {
        return 0.0;
    }
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = values.len().div_ceil(100);
    pairwise_sum(&abs[..k]) / total
}

fn excess_kurtosis(values: &[f64], mean: f64) -> f64 {
    let n = values.len() as f64;
    let d2: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let d4: Vec<f64> = d2.iter().map(|x| x * x).collect();
    let m2 = pairwise_sum(&d2) / n;
    if m2 == 0.0 {
        return 0.0;
    }
    pairwise_sum(&d4) / n / (m2 * m2) - 3.0
}

/// Unweighted estimate of `E[X]` from i.i.d. samples.
pub fn accumulate(values: &[f64]) -> Result<MomentEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite sample {bad}")));
    }
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let dev: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (nf - 1.0);
    Ok(MomentEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        n,
        ess: nf,
        kurtosis: excess_kurtosis(values, mean),
        top_mass_fraction: top_fraction(values),
        exact: None,
        z_score: None,
    })
}

/// Self-normalised estimate `Σ wᵢxᵢ / Σ wᵢ` with delta-method standard error.
pub fn accumulate_weighted(values: &[f64], weights: &[f64]) -> Result<MomentEstimate> {
    let n = values.len();
    if n != weights.len() {
        return Err(Error::domain("values and weights differ in length"));
    }
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("weights must be finite and non-negative, values finite".into()));
    }
    let sw = pairwise_sum(weights);
    if sw <= 0.0 {
        return Err(Error::Degenerate("all importance weights are zero".into()));
    }
    let sw2 = pairwise_sum(&weights.iter().map(|w| w * w).collect::<Vec<_>>());
    let wx: Vec<f64> = values.iter().zip(weights).map(|(x, w)| x * w).collect();
    let mean = pairwise_sum(&wx) / sw;
    let resid: Vec<f64> = values.iter().zip(weights).map(|(x, w)| (w * (x - mean)).powi(2)).collect();
    let nf = n as f64;
    // n/(n-1) makes the equal-weight case coincide with the unweighted stderr.
    let var_mean = pairwise_sum(&resid) / (sw * sw) * nf / (nf - 1.0);
    let summands: Vec<f64> = wx.iter().map(|v| v * nf / sw).collect();
    Ok(MomentEstimate {
        mean,
        stderr: var_mean.sqrt(),
        n,
        ess: sw * sw / sw2,
        kurtosis: excess_kurtosis(&summands, mean),
        top_mass_fraction: top_fraction(&wx),
        exact: None,
        z_score: None,
    })
}

/// Streaming accumulator of count, mean and centred second moment.
/// `merge` combines partial accumulators (Chan's parallel update).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, o: &Welford) -> Welford {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let nf = n as f64;
        Welford {
            n,
            mean: self.mean + d * o.n as f64 / nf,
            m2: self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / nf,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Outcome of a gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub criterion: String,
    pub measured: Vec<(String, f64)>,
}

impl Verdict {
    pub fn new(pass: bool, criterion: impl Into<String>, measured: Vec<(&str, f64)>) -> Self {
        Self {
            pass,
            criterion: criterion.into(),
            measured: measured.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

/// Default running-mean level that counts as "divergent" against an infinite target.
pub const DEFAULT_DIVERGENCE_FLOOR: f64 = 1e3;
/// Heavy-tail refusal threshold for the top-1% mass share.
pub const TOP_MASS_LIMIT: f64 = 0.5;

/// Dual gate: `|mean − exact| ≤ k·stderr` and `stderr ≤ rel_tol·|exact|`.
/// Against an infinite target, passes when the mean exceeds `divergence_floor`.
/// Refuses (fails) estimates whose top 1% of summands carries more than half
/// of the mass.
pub fn compare_with_floor(est: &MomentEstimate, exact: Exact, k_sigma: f64, rel_tol: f64, divergence_floor: f64) -> Verdict {
    match exact {
        Exact::Infinite => Verdict::new(
            est.mean > divergence_floor,
            format!("mean > divergence floor {divergence_floor}"),
            vec![("mean", est.mean), ("floor", divergence_floor)],
        ),
        Exact::Finite(e) => {
            let dev = (est.mean - e).abs();
            let z_ok = dev <= k_sigma * est.stderr;
            let rel_ok = est.stderr <= rel_tol * e.abs();
            let tail_ok = est.top_mass_fraction <= TOP_MASS_LIMIT;
            Verdict::new(
                z_ok && rel_ok && tail_ok,
                format!("|mean-exact| <= {k_sigma} stderr and stderr <= {rel_tol} |exact| and top-1% mass <= {TOP_MASS_LIMIT}"),
                vec![
                    ("mean", est.mean),
                    ("exact", e),
                    ("stderr", est.stderr),
                    ("z", if est.stderr > 0.0 { (est.mean - e) / est.stderr } else if dev == 0.0 { 0.0 } else { f64::INFINITY }),
                    ("top_mass_fraction", est.top_mass_fraction),
                ],
            )
        }
    }
}

pub fn compare(est: &MomentEstimate, exact: Exact, k_sigma: f64, rel_tol: f64) -> Verdict {
    compare_with_floor(est, exact, k_sigma, rel_tol, DEFAULT_DIVERGENCE_FLOOR)
}

/// Two estimates of the same quantity: `|a − b| ≤ k·sqrt(sa² + sb²)`.
pub fn compare_two(a: &MomentEstimate, b: &MomentEstimate, k_sigma: f64, label: &str) -> Verdict {
    let s = a.stderr.hypot(b.stderr);
    let d = (a.mean - b.mean).abs();
    Verdict::new(
        d <= k_sigma * s,
        format!("{label}: |a-b| <= {k_sigma} combined stderr"),
        vec![("a", a.mean), ("b", b.mean), ("combined_stderr", s), ("z", if s > 0.0 { d / s } else { 0.0 })],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_and_two_point_streams() {
        let e = accumulate(&[3.5; 10]).unwrap();
        assert_eq!((e.mean, e.stderr), (3.5, 0.0));
        let e = accumulate(&[0.0, 2.0]).unwrap();
        assert_eq!(e.mean, 1.0);
        assert!((e.stderr - 1.0).abs() < 1e-15);
        assert!(accumulate(&[1.0]).is_err());
    }

    #[test]
    fn equal_weights_reduce_to_unweighted() {
        let xs: Vec<f64> = (0..57).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let u = accumulate(&xs).unwrap();
        let w = accumulate_weighted(&xs, &vec![2.5; xs.len()]).unwrap();
        assert!((u.mean - w.mean).abs() < 1e-12);
        assert!((u.stderr - w.stderr).abs() < 1e-12);
        assert!((w.ess - xs.len() as f64).abs() < 1e-9);
        assert!(matches!(accumulate_weighted(&xs, &vec![0.0; xs.len()]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compare_examples() {
        let mk = |mean, stderr| MomentEstimate { stderr, ..MomentEstimate::exact_value(mean, 100) };
        assert!(compare(&mk(1.0, 0.01), Exact::Finite(1.005), 3.0, 0.05).pass);
        assert!(!compare(&mk(1.0, 0.001), Exact::Finite(1.02), 3.0, 0.05).pass);
        assert!(compare(&mk(1e6, 1.0), Exact::Infinite, 3.0, 0.05).pass);
        assert!(!compare(&mk(10.0, 1.0), Exact::Infinite, 3.0, 0.05).pass);
        // the relative-stderr gate prevents vacuous passes
        assert!(!compare(&mk(1.0, 1.0), Exact::Finite(1.5), 3.0, 0.05).pass);
    }

    #[test]
    fn heavy_tail_refused() {
        let mut xs = vec![1e-3; 1000];
        xs[0] = 1e4;
        let e = accumulate(&xs).unwrap();
        assert!(e.top_mass_fraction > 0.5);
        let target = Exact::Finite(e.mean);
        assert!(!compare(&e, target, 3.0, 10.0).pass);
    }

    proptest! {
        #[test]
        fn permutation_invariance(mut xs in prop::collection::vec(-1e3f64..1e3, 2..300), seed in 0u64..1000) {
            let a = accumulate(&xs).unwrap();
            // deterministic shuffle
            let n = xs.len();
            for i in (1..n).rev() {
                let j = ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64).wrapping_mul(1442695040888963407)) >> 33) as usize % (i + 1);
                xs.swap(i, j);
            }
            let b = accumulate(&xs).unwrap();
            prop_assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
            prop_assert!((a.stderr - b.stderr).abs() <= 1e-12 * (1.0 + a.stderr));
        }

        #[test]
        fn ess_bounded_by_n(ws in prop::collection::vec(0.0f64..5.0, 2..200)) {
            prop_assume!(ws.iter().sum::<f64>() > 0.0);
            let xs = vec![1.0; ws.len()];
            let e = accumulate_weighted(&xs, &ws).unwrap();
            prop_assert!(e.ess <= ws.len() as f64 * (1.0 + 1e-12));
        }

        #[test]
        fn welford_merge_matches_batch(xs in prop::collection::vec(-50f64..50.0, 4..200), cut in 1usize..100) {
            let cut = cut.min(xs.len() - 1);
            let mut a = Welford::default();
            let mut b = Welford::default();
            xs[..cut].iter().for_each(|&x| a.push(x));
            xs[cut..].iter().for_each(|&x| b.push(x));
            let m1 = a.merge(&b);
            let m2 = b.merge(&a);
            let batch = accumulate(&xs).unwrap();
            prop_assert!((m1.mean - batch.mean).abs() < 1e-10);
            prop_assert!((m1.stderr() - batch.stderr).abs() < 1e-10);
            prop_assert!((m1.mean - m2.mean).abs() < 1e-12 && (m1.m2 - m2.m2).abs() < 1e-9);
        }
    }
}
