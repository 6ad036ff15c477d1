//! Radial processes behind two-pointed quantum disks and the bead structure
//! of thin disks.
//!
//! All processes here are variance-2 Brownian motions with constant drift,
//! possibly conditioned to stay below a barrier. Conditioning is done
//! exactly: a variance-2 motion with drift `−ν` conditioned to stay below
//! `a` is `a − √2·|R|`, where `R` is a three-dimensional Brownian motion
//! with drift of length `ν/√2`. Grid values are therefore exact samples of
//! the continuous process, and the running supremum is exact as well
//! because each step contributes a Brownian-bridge maximum.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{weight_to_beta, LqgParams};
use crate::rng::{sample_rng, SampleRng};

/// Which law a [`RadialProcess`] was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftSpec {
    /// Plain variance-2 motion with drift `drift`.
    Free { drift: f64 },
    /// Motion with drift `−nu` conditioned to stay below `barrier` for
    /// all positive times, started at `barrier − start_gap`.
    ConditionedBelow { nu: f64, barrier: f64, start_gap: f64 },
    /// Drift `+nu` until the first hit of `a`, then drift `−nu`
    /// conditioned to stay below `a`.
    SplitAtMax { nu: f64, a: f64 },
}

/// A sampled path on the uniform grid `t_k = k·dt`, `k = 0..values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProcess {
    pub dt: f64,
    pub values: Vec<f64>,
    pub drift: DriftSpec,
    pub seed: u64,
    pub index: u64,
    /// Supremum over the continuous path on `[0, T_max]`, not only over
    /// the grid.
    pub sup: f64,
    /// Grid index at which the path switched to its conditioned part.
    pub hit_index: Option<usize>,
}

impl RadialProcess {
    pub fn t_max(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("paths have at least two grid points")
    }

    /// Value at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).round() as usize).min(self.values.len() - 1);
        self.values[k]
    }
}

/// Bead `u` of a thin disk. Only the left boundary length is sampled; see
/// [`thin_chain_structure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub left: f64,
    pub right: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeadChain {
    pub beads: Vec<Bead>,
    pub total_left: f64,
    pub total_right: Option<f64>,
    /// Bead lengths outside this window were not sampled.
    pub length_window: (f64, f64),
    /// Poisson duration of the chain.
    pub duration: f64,
    /// Mass of the windowed duration measure, so that weighted averages
    /// over chains estimate integrals against the full measure.
    pub duration_mass: f64,
}

fn check_grid(t_max: f64, dt: f64) -> Result<usize> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::domain(format!("T_max = {t_max} must be positive and finite")));
    }
    if !(dt > 0.0 && dt <= t_max) {
        return Err(Error::domain(format!("dt = {dt} must lie in (0, T_max]")));
    }
    let n = (t_max / dt).round() as usize;
    if n > 50_000_000 {
        return Err(Error::domain(format!("T_max/dt = {n} grid steps is too many")));
    }
    Ok(n.max(1))
}

fn normal(rng: &mut SampleRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Maximum of a Brownian bridge from `x0` to `x1` with total variance `var`.
fn bridge_max(x0: f64, x1: f64, var: f64, rng: &mut SampleRng) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let d = x1 - x0;
    0.5 * (x0 + x1 + (d * d - 2.0 * var * u.ln()).sqrt())
}

/// Unit vector whose angle to `e1` has density `∝ e^{k cos θ}` on the sphere.
fn tilted_direction(k: f64, rng: &mut SampleRng) -> [f64; 3] {
    let u: f64 = rng.random();
    let c = if k.abs() < 1e-8 {
        2.0 * u - 1.0
    } else {
        // Inverse CDF of density ∝ e^{kc} on [−1, 1], written to avoid overflow.
        (1.0 + (u + (1.0 - u) * (-2.0 * k).exp()).ln() / k).clamp(-1.0, 1.0)
    };
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let s = (1.0 - c * c).max(0.0).sqrt();
    [c, s * phi.cos(), s * phi.sin()]
}

/// Fill `out` with `barrier − √2·|R_t|`, where `R` is a 3D Brownian motion
/// with drift `(nu/√2)·e1` started at distance `r0` from the origin.
///
/// For `r0 > 0` the start direction is drawn from the tilted sphere law
/// that makes `|R|` a Markov process (the drifted Bessel-3 process), so the
/// result is exactly the conditioned motion started at `barrier − √2·r0`.
fn conditioned_below(barrier: f64, nu: f64, r0: f64, dt: f64, out: &mut [f64], rng: &mut SampleRng) {
    let mu = nu / std::f64::consts::SQRT_2;
    let dir = if r0 > 0.0 { tilted_direction(mu * r0, rng) } else { [1.0, 0.0, 0.0] };
    let mut r = [r0 * dir[0], r0 * dir[1], r0 * dir[2]];
    let sd = dt.sqrt();
    out[0] = barrier - std::f64::consts::SQRT_2 * r0;
    for v in out.iter_mut().skip(1) {
        r[0] += sd * normal(rng) + mu * dt;
        r[1] += sd * normal(rng);
        r[2] += sd * normal(rng);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        *v = barrier - std::f64::consts::SQRT_2 * norm;
    }
}

fn nu_of(beta: f64, p: &LqgParams) -> Result<f64> {
    if !(beta < p.q) {
        return Err(Error::domain(format!("beta = {beta} must be below Q = {}", p.q)));
    }
    Ok(p.q - beta)
}

/// Horizon beyond which the supremum of a drift `−ν` path is attained with
/// probability below `tol`.
///
/// Uses `P(argmax > T) ≤ P(X_T + sup_{t≥T}(X_t − X_T) > 0) = 2Φ(−ν√(T/2))`.
pub fn sup_horizon(nu: f64, tol: f64) -> f64 {
    let mut t: f64 = 1.0;
    while libm::erfc(nu * (t / 2.0).sqrt() / std::f64::consts::SQRT_2) > tol {
        t *= 1.1;
    }
    t
}

/// Variance-2 Brownian motion with drift `−(Q−β)` from 0.
pub fn sample_m_beta(beta: f64, p: &LqgParams, t_max: f64, dt: f64, seed: u64) -> Result<RadialProcess> {
    sample_m_beta_indexed(beta, p, t_max, dt, seed, 0)
}

/// [`sample_m_beta`] drawing from the stream of sample `index`.
pub fn sample_m_beta_indexed(beta: f64, p: &LqgParams, t_max: f64, dt: f64, seed: u64, index: u64) -> Result<RadialProcess> {
    let nu = nu_of(beta, p)?;
    let n = check_grid(t_max, dt)?;
    let mut rng = sample_rng(seed, index);
    let mut values = vec![0.0; n + 1];
    let sd = (2.0 * dt).sqrt();
    let mut sup: f64 = 0.0;
    for k in 0..n {
        let x1 = values[k] - nu * dt + sd * normal(&mut rng);
        sup = sup.max(bridge_max(values[k], x1, 2.0 * dt, &mut rng));
        values[k + 1] = x1;
    }
    Ok(RadialProcess { dt, values, drift: DriftSpec::Free { drift: -nu }, seed, index, sup, hit_index: None })
}

/// The same law as [`sample_m_beta`] conditioned on `sup = a`, built from
/// its decomposition at the maximum: drift `+ν` up to the first hit of `a`,
/// then drift `−ν` conditioned to stay below `a`.
///
/// The hit is located to within one grid step (the bridge between the two
/// neighbouring grid values crosses `a`), and the grid value there is set
/// to `a`. If the path has not reached `a` by `T_max`, `hit_index` is
/// `None`.
pub fn sample_m_beta_given_max(beta: f64, a: f64, p: &LqgParams, t_max: f64, dt: f64, seed: u64) -> Result<RadialProcess> {
    sample_m_beta_given_max_indexed(beta, a, p, t_max, dt, seed, 0)
}

pub fn sample_m_beta_given_max_indexed(beta: f64, a: f64, p: &LqgParams, t_max: f64, dt: f64, seed: u64, index: u64) -> Result<RadialProcess> {
    let nu = nu_of(beta, p)?;
    split_at_max(nu, a, t_max, dt, seed, index)
}

/// Driftless version of [`sample_m_beta_given_max`]: variance-2 motion up
/// to the first hit of `a`, then `a − √2·BES³`.
pub fn sample_m_qminus(a: f64, t_max: f64, dt: f64, seed: u64) -> Result<RadialProcess> {
    sample_m_qminus_indexed(a, t_max, dt, seed, 0)
}

pub fn sample_m_qminus_indexed(a: f64, t_max: f64, dt: f64, seed: u64, index: u64) -> Result<RadialProcess> {
    split_at_max(0.0, a, t_max, dt, seed, index)
}

fn split_at_max(nu: f64, a: f64, t_max: f64, dt: f64, seed: u64, index: u64) -> Result<RadialProcess> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("a = {a} must be positive")));
    }
    let n = check_grid(t_max, dt)?;
    let mut rng = sample_rng(seed, index);
    let mut values = vec![0.0; n + 1];
    let sd = (2.0 * dt).sqrt();
    let mut sup: f64 = 0.0;
    let mut hit_index = None;
    for k in 0..n {
        let x1 = values[k] + nu * dt + sd * normal(&mut rng);
        let m = bridge_max(values[k], x1, 2.0 * dt, &mut rng);
        if m >= a {
            hit_index = Some(k + 1);
            break;
        }
        sup = sup.max(m);
        values[k + 1] = x1;
    }
    if let Some(h) = hit_index {
        sup = a;
        conditioned_below(a, nu, 0.0, dt, &mut values[h..], &mut rng);
    }
    Ok(RadialProcess { dt, values, drift: DriftSpec::SplitAtMax { nu, a }, seed, index, sup, hit_index })
}

/// The pair of radial processes of a thick weight-`W` disk: two independent
/// variance-2 motions with drift `−(Q−β)` conditioned to stay negative.
///
/// `eps_start = 0` gives the exact entrance law from `0⁻`; a positive value
/// starts both paths at `−eps_start`.
pub fn sample_disk_radial_conditioned(
    w: f64,
    p: &LqgParams,
    t_max: f64,
    dt: f64,
    eps_start: f64,
    seed: u64,
) -> Result<(RadialProcess, RadialProcess)> {
    sample_disk_radial_conditioned_indexed(w, p, t_max, dt, eps_start, seed, 0)
}

pub fn sample_disk_radial_conditioned_indexed(
    w: f64,
    p: &LqgParams,
    t_max: f64,
    dt: f64,
    eps_start: f64,
    seed: u64,
    index: u64,
) -> Result<(RadialProcess, RadialProcess)> {
    if !(w > p.critical_weight()) {
        return Err(Error::domain(format!("W = {w} must exceed gamma^2/2 = {}", p.critical_weight())));
    }
    if !(eps_start >= 0.0 && eps_start.is_finite()) {
        return Err(Error::domain(format!("eps_start = {eps_start} must be non-negative")));
    }
    let nu = nu_of(weight_to_beta(w, p)?, p)?;
    let n = check_grid(t_max, dt)?;
    let r0 = eps_start / std::f64::consts::SQRT_2;
    let side = |i: u64| {
        let mut rng = sample_rng(seed, 2 * index + i);
        let mut values = vec![0.0; n + 1];
        conditioned_below(0.0, nu, r0, dt, &mut values, &mut rng);
        RadialProcess {
            dt,
            values,
            drift: DriftSpec::ConditionedBelow { nu, barrier: 0.0, start_gap: eps_start },
            seed,
            index,
            sup: -eps_start,
            hit_index: Some(0),
        }
    };
    Ok((side(0), side(1)))
}

/// Power-law bead intensity `prefactor · ℓ^exponent` restricted to a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeadIntensity {
    pub prefactor: f64,
    pub exponent: f64,
    pub window: (f64, f64),
}

impl BeadIntensity {
    /// Left-boundary-length intensity of beads of a thin weight-`W` disk:
    /// the length law of a thick weight-`(γ² − W)` disk.
    pub fn for_thin_weight(w: f64, p: &LqgParams, window: (f64, f64), ctx: &crate::exact::ExactContext<'_>) -> Result<Self> {
        if !(w > 0.0 && w < p.critical_weight()) {
            return Err(Error::domain(format!("W = {w} must lie in (0, gamma^2/2)")));
        }
        let (lo, hi) = window;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::domain(format!("length window ({lo}, {hi}) must satisfy 0 < min < max < inf")));
        }
        let dens = ctx.disk_length_density(p.kappa - w, p)?;
        if dens.infinite {
            return Err(Error::Numerical("bead length law is not a finite power law".into()));
        }
        Ok(Self { prefactor: dens.prefactor, exponent: dens.exponent, window })
    }

    /// `∫ prefactor · ℓ^exponent dℓ` over `(a, b)`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let e1 = self.exponent + 1.0;
        if e1.abs() < 1e-12 {
            self.prefactor * (b / a).ln()
        } else {
            self.prefactor * (b.powf(e1) - a.powf(e1)) / e1
        }
    }

    /// Total intensity over the window.
    pub fn mass(&self) -> f64 {
        self.mass_between(self.window.0, self.window.1)
    }

    /// Inverse CDF of the normalized windowed law.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.window;
        let e1 = self.exponent + 1.0;
        if e1.abs() < 1e-12 {
            a * (b / a).powf(u)
        } else {
            let (pa, pb) = (a.powf(e1), b.powf(e1));
            (pa + u * (pb - pa)).powf(1.0 / e1)
        }
    }
}

/// Poisson bead chain of duration `duration`: a Poisson(`duration · Λ`)
/// number of beads with i.i.d. left lengths from the normalized windowed
/// intensity.
pub fn thin_chain_given_duration(intensity: &BeadIntensity, duration: f64, seed: u64, index: u64) -> Result<BeadChain> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::domain(format!("duration = {duration} must be non-negative")));
    }
    let mut rng = sample_rng(seed, index);
    Ok(chain_from(intensity, duration, 1.0, &mut rng))
}

fn chain_from(intensity: &BeadIntensity, duration: f64, duration_mass: f64, rng: &mut SampleRng) -> BeadChain {
    let mean = duration * intensity.mass();
    let count = if mean > 0.0 {
        rand_distr::Poisson::new(mean).map(|d| rng.sample(d) as usize).unwrap_or(0)
    } else {
        0
    };
    let beads: Vec<Bead> = (0..count).map(|_| Bead { left: intensity.quantile(rng.random()), right: None }).collect();
    let total_left = crate::stats::pairwise_sum(&beads.iter().map(|b| b.left).collect::<Vec<_>>());
    BeadChain { beads, total_left, total_right: None, length_window: intensity.window, duration, duration_mass }
}

/// A thin weight-`W` disk restricted to bead lengths in `length_window`.
///
/// The chain duration has the infinite law `(1 − 2W/γ²)^{−2} dT`; it is
/// drawn uniformly from `(0, t_window)` and the mass of that restriction is
/// stored in `duration_mass`.
pub fn thin_chain_structure(
    w: f64,
    length_window: (f64, f64),
    t_window: f64,
    p: &LqgParams,
    ctx: &crate::exact::ExactContext<'_>,
    seed: u64,
    index: u64,
) -> Result<BeadChain> {
    if !(t_window > 0.0 && t_window.is_finite()) {
        return Err(Error::domain(format!("duration window {t_window} must be positive")));
    }
    let intensity = BeadIntensity::for_thin_weight(w, p, length_window, ctx)?;
    let mut rng = sample_rng(seed, index);
    let duration = t_window * rng.random::<f64>();
    let mass = t_window / (1.0 - 2.0 * w / p.kappa).powi(2);
    Ok(chain_from(&intensity, duration, mass, &mut rng))
}
