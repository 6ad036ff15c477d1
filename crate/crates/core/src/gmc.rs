//! Boundary Gaussian multiplicative chaos on `[0, 1]`.
//!
//! The field is discretised on `N` equal cells. Each value is the average of
//! the log-correlated field over its cell, so its covariance is the exact
//! double cell average of `−2 log|x − y|`: `−2 log δ + 3` on the diagonal and
//! a closed-form second difference off it. Averaging two neighbouring cells
//! of the `2N` grid gives the `N` grid exactly, which is used to couple the
//! two resolutions in the refinement gate.
//!
//! Samples come from circulant embedding of the Toeplitz covariance and an
//! FFT. A dense eigendecomposition route is kept for small grids and as a
//! cross-check.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{h_bar, seiberg_bounds};
use crate::harness::{accumulate, Exact, MomentEstimate};
use crate::params::{LqgParams, TriangleWeights};
use crate::rng::{map_indexed, sample_rng};
use crate::stats::pairwise_sum;

/// Grid of `N` cells on `[0, 1]`, with midpoints as sample locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub n: usize,
    pub points: Vec<f64>,
    pub delta: f64,
}

impl BoundaryGrid {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() || !(2..=1 << 20).contains(&n) {
            return Err(Error::domain(format!("grid size {n} must be a power of two in [2, 2^20]")));
        }
        let delta = 1.0 / n as f64;
        Ok(Self { n, points: (0..n).map(|i| (i as f64 + 0.5) * delta).collect(), delta })
    }
}

/// How the off-diagonal covariance is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum KernelScheme {
    /// Exact double cell averages everywhere.
    #[default]
    CellAverage,
    /// Point values `−2 log|x_i − x_j|` off the diagonal, cell average on it.
    Midpoint,
}

/// `∬_{[0,1]²} −2 log|k + u − v| du dv`, the cell-average offset at lag `k`
/// in units of the cell size.
pub fn cell_average_offset(k: usize) -> f64 {
    // second difference of G(x) = x² log|x| / 2 − 3x²/4, whose second derivative is log|x|
    let g = |x: f64| if x == 0.0 { 0.0 } else { 0.5 * x * x * x.abs().ln() - 0.75 * x * x };
    let k = k as f64;
    -2.0 * (g(k + 1.0) - 2.0 * g(k) + g(k - 1.0))
}

/// First row of the Toeplitz covariance on `grid`.
pub fn covariance_row(grid: &BoundaryGrid, scheme: KernelScheme) -> Vec<f64> {
    let ld = -2.0 * grid.delta.ln();
    (0..grid.n)
        .map(|k| match (scheme, k) {
            (_, 0) | (KernelScheme::CellAverage, _) => ld + cell_average_offset(k),
            (KernelScheme::Midpoint, _) => ld - 2.0 * (k as f64).ln(),
        })
        .collect()
}

/// One draw of the discretised field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFieldSample {
    pub values: Vec<f64>,
    /// Per-cell variance used for the Wick correction.
    pub variance: Vec<f64>,
    pub seed: u64,
}

impl BoundaryFieldSample {
    /// Add a constant to the field.
    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), variance: self.variance.clone(), seed: self.seed }
    }

    /// The field on the grid with half as many cells, by pairwise averaging.
    pub fn coarsened(&self, coarse_variance: f64) -> Self {
        Self {
            values: self.values.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect(),
            variance: vec![coarse_variance; self.values.len() / 2],
            seed: self.seed,
        }
    }
}

enum Factor {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Dense { l: DMatrix<f64> },
}

/// A factorised covariance, shared read-only between samples.
pub struct FieldSampler {
    grid: BoundaryGrid,
    row: Vec<f64>,
    factor: Factor,
    /// Sum of negative eigenvalues clipped to zero, relative to the trace.
    pub clipped_fraction: f64,
}

impl FieldSampler {
    /// Circulant embedding of size `2N`.
    pub fn circulant(grid: &BoundaryGrid, scheme: KernelScheme) -> Result<Self> {
        let row = covariance_row(grid, scheme);
        let n = grid.n;
        let m = 2 * n;
        let last = row[n - 1] + (row[n - 1] - row[n - 2]);
        let mut buf: Vec<Complex64> = (0..m)
            .map(|j| {
                let v = match j {
                    j if j < n => row[j],
                    j if j == n => last,
                    j => row[m - j],
                };
                Complex64::new(v, 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut buf);
        let trace: f64 = buf.iter().map(|c| c.re.abs()).sum();
        let mut clipped = 0.0;
        let sqrt_eig = buf
            .iter()
            .map(|c| {
                if c.re < 0.0 {
                    clipped -= c.re;
                    0.0
                } else {
                    (c.re / m as f64).sqrt()
                }
            })
            .collect();
        let clipped_fraction = clipped / trace;
        if clipped_fraction > 1e-3 {
            return Err(Error::Numerical(format!("circulant embedding is far from PSD: clipped fraction {clipped_fraction:e}")));
        }
        Ok(Self { grid: grid.clone(), row, factor: Factor::Circulant { sqrt_eig, fft }, clipped_fraction })
    }

    /// Dense symmetric eigendecomposition with eigenvalues below `1e-10`
    /// (relative to the largest) projected to zero.
    pub fn dense(grid: &BoundaryGrid, scheme: KernelScheme) -> Result<Self> {
        if grid.n > 1 << 12 {
            return Err(Error::domain("dense factorisation is limited to N <= 4096"));
        }
        let row = covariance_row(grid, scheme);
        let n = grid.n;
        let c = DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)]);
        let eig = SymmetricEigen::new(c);
        let top = eig.eigenvalues.max();
        let trace: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
        let mut clipped = 0.0;
        let sq: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&v| {
                if v < 1e-10 * top {
                    clipped += (-v).max(0.0);
                    0.0
                } else {
                    v.sqrt()
                }
            })
            .collect();
        let mut l = eig.eigenvectors;
        for (j, s) in sq.iter().enumerate() {
            l.column_mut(j).scale_mut(*s);
        }
        Ok(Self { grid: grid.clone(), row, factor: Factor::Dense { l }, clipped_fraction: clipped / trace })
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn covariance_row(&self) -> &[f64] {
        &self.row
    }

    /// Two independent fields from draw `index` of a run seeded with `seed`.
    pub fn sample_pair(&self, seed: u64, index: u64) -> [BoundaryFieldSample; 2] {
        let mut rng = sample_rng(seed, index);
        let n = self.grid.n;
        let variance = vec![self.row[0]; n];
        match &self.factor {
            Factor::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                fft.process(&mut buf);
                [
                    BoundaryFieldSample { values: buf[..n].iter().map(|c| c.re).collect(), variance: variance.clone(), seed },
                    BoundaryFieldSample { values: buf[..n].iter().map(|c| c.im).collect(), variance, seed },
                ]
            }
            Factor::Dense { l } => {
                let mut draw = || {
                    let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                    (l * z).iter().copied().collect::<Vec<f64>>()
                };
                let a = draw();
                let b = draw();
                [
                    BoundaryFieldSample { values: a, variance: variance.clone(), seed },
                    BoundaryFieldSample { values: b, variance, seed },
                ]
            }
        }
    }
}

/// Draw sample `index` of a run (draws are made in pairs).
pub fn sample_boundary_field(sampler: &FieldSampler, seed: u64, index: u64) -> BoundaryFieldSample {
    let [a, b] = sampler.sample_pair(seed, index / 2);
    if index % 2 == 0 {
        a
    } else {
        b
    }
}

/// A Liouville insertion `β` at a boundary position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub beta: f64,
    pub position: f64,
}

/// Per-cell deterministic factor `δ · ∏ |x_i − s_j|^{−γβ_j/2}`.
pub fn insertion_weights(grid: &BoundaryGrid, insertions: &[Insertion], p: &LqgParams) -> Result<Vec<f64>> {
    for ins in insertions {
        if grid.points.iter().any(|x| (x - ins.position).abs() < 0.1 * grid.delta) {
            return Err(Error::Resolution(format!("insertion at {} coincides with a cell midpoint", ins.position)));
        }
    }
    Ok(grid
        .points
        .iter()
        .map(|&x| {
            let mut w = grid.delta;
            for ins in insertions {
                w *= (x - ins.position).abs().powf(-0.5 * p.gamma * ins.beta);
            }
            w
        })
        .collect())
}

/// Cell masses of `ν_φ` with the Wick correction `exp(γφ/2 − γ²C_ii/8)`.
pub fn gmc_masses(field: &BoundaryFieldSample, weights: &[f64], p: &LqgParams) -> Vec<f64> {
    let g = p.gamma;
    field
        .values
        .iter()
        .zip(&field.variance)
        .zip(weights)
        .map(|((v, c), w)| w * (0.5 * g * v - 0.125 * g * g * c).exp())
        .collect()
}

/// `ν_φ(I)` for `I = [a, b] ⊆ [0, 1]`, summing cells whose midpoints lie in `I`.
pub fn gmc_length(
    field: &BoundaryFieldSample,
    grid: &BoundaryGrid,
    insertions: &[Insertion],
    interval: (f64, f64),
    p: &LqgParams,
) -> Result<f64> {
    let (a, b) = interval;
    if !(0.0 <= a && a <= b && b <= 1.0) {
        return Err(Error::domain(format!("interval [{a}, {b}] is not inside [0, 1]")));
    }
    let w = insertion_weights(grid, insertions, p)?;
    let masses = gmc_masses(field, &w, p);
    let inside: Vec<f64> = grid.points.iter().zip(masses).filter(|(x, _)| (a..=b).contains(*x)).map(|(_, m)| m).collect();
    Ok(pairwise_sum(&inside))
}

/// The moment exponent `(2Q − β̄)/γ` after checking the Seiberg bounds and
/// the finiteness window for the estimator. Under the Seiberg bounds the
/// window checks cannot fail (`β̄ > γ` is the first, `β_i < β_j + β₃` the
/// others); they are kept as a guard on the arithmetic.
pub fn gmc_moment_exponent(b1: f64, b2: f64, b3: f64, p: &LqgParams) -> Result<f64> {
    seiberg_bounds(b1, b2, b3, p).map_err(Error::Domain)?;
    let e = (2.0 * p.q - b1 - b2 - b3) / p.gamma;
    let g2 = p.gamma * p.gamma;
    if e >= 4.0 / g2 {
        return Err(Error::domain(format!("moment exponent {e} is not below 4/gamma^2 = {}", 4.0 / g2)));
    }
    for (i, b) in [b1, b2].into_iter().enumerate() {
        let lim = 2.0 / p.gamma * (p.q - b);
        if e >= lim {
            return Err(Error::domain(format!("moment exponent {e} is not below (2/gamma)(Q - beta_{}) = {lim}", i + 1)));
        }
    }
    Ok(e)
}

fn endpoint_insertions(b1: f64, b2: f64) -> [Insertion; 2] {
    [Insertion { beta: b1, position: 0.0 }, Insertion { beta: b2, position: 1.0 }]
}

/// How `E[ν^p]` is estimated from field samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GmcEstimator {
    /// Average of `ν([0,1])^p`.
    Direct,
    /// Size-biased estimator: pick a root cell `i` with probability
    /// `w_i / Σw`, shift the field by `(γ/2) C(·, i)` and average
    /// `Σw · ν^{p−1}`. Unbiased by the Girsanov identity
    /// `E[e^{γφ_i/2 − γ²C_ii/8} F(φ)] = E[F(φ + (γ/2) C(·, i))]`, and it needs
    /// one moment fewer than the direct estimator to have finite variance.
    #[default]
    Rooted,
}

/// Everything needed to turn a field on one grid into a moment sample.
struct MomentKernel {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    /// `exp(γ² C(k) / 4)` by lag.
    tilt: Vec<f64>,
    variance: f64,
    exponent: f64,
}

impl MomentKernel {
    fn new(grid: &BoundaryGrid, insertions: &[Insertion], exponent: f64, p: &LqgParams) -> Result<Self> {
        let weights = insertion_weights(grid, insertions, p)?;
        let cumulative = weights
            .iter()
            .scan(0.0, |s, w| {
                *s += w;
                Some(*s)
            })
            .collect();
        let row = covariance_row(grid, KernelScheme::CellAverage);
        let g2 = 0.25 * p.gamma * p.gamma;
        Ok(Self { weights, cumulative, tilt: row.iter().map(|c| (g2 * c).exp()).collect(), variance: row[0], exponent })
    }

    /// One sample of the estimator; `u ∈ [0, 1)` selects the root.
    fn value(&self, field: &BoundaryFieldSample, u: f64, est: GmcEstimator, p: &LqgParams) -> f64 {
        let masses = gmc_masses(field, &self.weights, p);
        match est {
            GmcEstimator::Direct => pairwise_sum(&masses).powf(self.exponent),
            GmcEstimator::Rooted => {
                let total = *self.cumulative.last().unwrap();
                let i = self.cumulative.partition_point(|&c| c <= u * total).min(masses.len() - 1);
                let tilted: Vec<f64> = masses.iter().enumerate().map(|(j, m)| m * self.tilt[i.abs_diff(j)]).collect();
                total * pairwise_sum(&tilted).powf(self.exponent - 1.0)
            }
        }
    }
}

fn root_uniform(seed: u64, index: u64) -> f64 {
    sample_rng(crate::rng::derive_seed(seed, "gmc-root"), index).random()
}

/// Monte Carlo estimate of `E[ν_φ([0,1])^{(2Q−β̄)/γ}]` with `β₁` at 0 and
/// `β₂` at 1, paired with the exact value.
pub fn mc_gmc_moment(
    b1: f64,
    b2: f64,
    b3: f64,
    n: usize,
    n_samples: usize,
    p: &LqgParams,
    seed: u64,
    est: GmcEstimator,
) -> Result<MomentEstimate> {
    let e = gmc_moment_exponent(b1, b2, b3, p)?;
    let exact = Exact::Finite(h_bar(b1, b2, b3, p)?.value);
    if e == 0.0 {
        return Ok(MomentEstimate::exact_value(1.0, n_samples).with_exact(exact));
    }
    let grid = BoundaryGrid::new(n)?;
    let sampler = FieldSampler::circulant(&grid, KernelScheme::CellAverage)?;
    let k = MomentKernel::new(&grid, &endpoint_insertions(b1, b2), e, p)?;
    let vals = paired_values(&sampler, n_samples, seed, |f, idx| [k.value(f, root_uniform(seed, idx), est, p), f64::NAN]);
    Ok(accumulate(&vals.iter().map(|v| v[0]).collect::<Vec<_>>())?.with_exact(exact))
}

/// Apply `f(field, sample_index)` to `n_samples` fields drawn in pairs.
fn paired_values<F>(sampler: &FieldSampler, n_samples: usize, seed: u64, f: F) -> Vec<[f64; 2]>
where
    F: Fn(&BoundaryFieldSample, u64) -> [f64; 2] + Sync + Send,
{
    let pairs = map_indexed(n_samples.div_ceil(2), |j| {
        let [a, b] = sampler.sample_pair(seed, j as u64);
        [f(&a, 2 * j as u64), f(&b, 2 * j as u64 + 1)]
    });
    pairs.into_iter().flatten().take(n_samples).collect()
}

/// Moment estimates on grids `N` and `2N` from the same fine fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPair {
    pub coarse: MomentEstimate,
    pub fine: MomentEstimate,
    /// Standard error of the paired difference `fine − coarse`.
    pub paired_stderr: f64,
}

/// Estimates on grids `N` and `2N` with common random numbers: the coarse
/// field is the pairwise average of the fine one and both roots come from
/// the same uniform.
pub fn mc_gmc_refinement(
    b1: f64,
    b2: f64,
    b3: f64,
    n: usize,
    n_samples: usize,
    p: &LqgParams,
    seed: u64,
    est: GmcEstimator,
) -> Result<RefinementPair> {
    let e = gmc_moment_exponent(b1, b2, b3, p)?;
    let exact = Exact::Finite(h_bar(b1, b2, b3, p)?.value);
    let coarse_grid = BoundaryGrid::new(n)?;
    let grid = BoundaryGrid::new(2 * n)?;
    let sampler = FieldSampler::circulant(&grid, KernelScheme::CellAverage)?;
    let ins = endpoint_insertions(b1, b2);
    let kf = MomentKernel::new(&grid, &ins, e, p)?;
    let kc = MomentKernel::new(&coarse_grid, &ins, e, p)?;
    let vals = paired_values(&sampler, n_samples, seed, |f, idx| {
        let u = root_uniform(seed, idx);
        [kf.value(f, u, est, p), kc.value(&f.coarsened(kc.variance), u, est, p)]
    });
    let fine: Vec<f64> = vals.iter().map(|m| m[0]).collect();
    let coarse: Vec<f64> = vals.iter().map(|m| m[1]).collect();
    let diff: Vec<f64> = fine.iter().zip(&coarse).map(|(a, b)| a - b).collect();
    Ok(RefinementPair {
        coarse: accumulate(&coarse)?.with_exact(exact),
        fine: accumulate(&fine)?.with_exact(exact),
        paired_stderr: accumulate(&diff)?.stderr,
    })
}

/// `E[ν([0,1])²] = Σ_ij w_i w_j exp(γ² C_ij / 4)` for the discretised model,
/// computed exactly from the covariance.
pub fn discrete_second_moment(grid: &BoundaryGrid, insertions: &[Insertion], p: &LqgParams, scheme: KernelScheme) -> Result<f64> {
    let w = insertion_weights(grid, insertions, p)?;
    let row = covariance_row(grid, scheme);
    let kern: Vec<f64> = row.iter().map(|c| (0.25 * p.gamma * p.gamma * c).exp()).collect();
    let rows: Vec<f64> = map_indexed(grid.n, |i| {
        let terms: Vec<f64> = (0..grid.n).map(|j| w[j] * kern[i.abs_diff(j)]).collect();
        w[i] * pairwise_sum(&terms)
    });
    Ok(pairwise_sum(&rows))
}

/// A field conditioned to have boundary length `ℓ` on `[0, 1]`, with its
/// importance weight for the length law of a quantum triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTriangleSample {
    pub field: BoundaryFieldSample,
    pub unshifted_length: f64,
    pub weight: f64,
}

/// Draw sample `index`: shift the field by `(2/γ) log(ℓ/L₁₂)` and weight it
/// by `2/(γ ∏(Q − β_i)) · ℓ^{s−1} / L₁₂^{s}` with `s = (β̄ − 2Q)/γ`.
pub fn triangle_length_weighted_sample(
    tw: &TriangleWeights,
    ell: f64,
    sampler: &FieldSampler,
    p: &LqgParams,
    seed: u64,
    index: u64,
) -> Result<WeightedTriangleSample> {
    if !tw.all_thick() {
        return Err(Error::domain("the weighted length sampler needs all-thick weights"));
    }
    if sampler.grid().n < 1 << 10 {
        return Err(Error::Resolution(format!("grid size {} is below 2^10", sampler.grid().n)));
    }
    let [b1, b2, b3] = tw.betas;
    let q = p.q;
    let s = (tw.beta_bar - 2.0 * q) / p.gamma;
    let pref = 2.0 / (p.gamma * (q - b1) * (q - b2) * (q - b3));
    let grid = sampler.grid();
    let field = sample_boundary_field(sampler, seed, index);
    let w = insertion_weights(grid, &endpoint_insertions(b1, b2), p)?;
    let len = pairwise_sum(&gmc_masses(&field, &w, p));
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Degenerate(format!("boundary length {len} is not positive and finite")));
    }
    Ok(WeightedTriangleSample {
        field: field.shifted(2.0 / p.gamma * (ell / len).ln()),
        unshifted_length: len,
        weight: pref * ell.powf(s - 1.0) / len.powf(s),
    })
}

/// Mean importance weight at `ℓ`, an estimate of the length density there.
pub fn mc_triangle_length_density(tw: &TriangleWeights, ell: f64, n: usize, n_samples: usize, p: &LqgParams, seed: u64) -> Result<MomentEstimate> {
    let grid = BoundaryGrid::new(n)?;
    let sampler = FieldSampler::circulant(&grid, KernelScheme::CellAverage)?;
    let ws: Vec<Result<f64>> =
        map_indexed(n_samples, |i| triangle_length_weighted_sample(tw, ell, &sampler, p, seed, i as u64).map(|s| s.weight));
    let ws: Vec<f64> = ws.into_iter().collect::<Result<_>>()?;
    accumulate(&ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    #[test]
    fn cell_average_offsets_match_quadrature() {
        for k in 0..5usize {
            // ∫_{-1}^{1} (1 − |s|)(−2 log|k + s|) ds, split at the log singularity
            let f = |s: f64| -2.0 * (1.0 - s.abs()) * (k as f64 + s).abs().ln();
            let pts = [-1.0, -(k as f64).min(1.0), 0.0, 1.0];
            let mut num = 0.0;
            for w in pts.windows(2) {
                if w[1] > w[0] {
                    num += integrate(f, w[0], w[1], 1e-13, 1e-12).unwrap().value;
                }
            }
            assert!((num - cell_average_offset(k)).abs() < 1e-9, "k={k}: {num} vs {}", cell_average_offset(k));
        }
        assert!((cell_average_offset(0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn coarse_cells_are_averages_of_fine_cells() {
        // Var((φ_a + φ_b)/2) on the fine grid equals the coarse diagonal
        let fine = covariance_row(&BoundaryGrid::new(64).unwrap(), KernelScheme::CellAverage);
        let coarse = covariance_row(&BoundaryGrid::new(32).unwrap(), KernelScheme::CellAverage);
        assert!((0.5 * (fine[0] + fine[1]) - coarse[0]).abs() < 1e-12);
        // and the coarse lag-1 covariance is the average of fine lags 1, 2, 2, 3
        assert!((0.25 * (fine[1] + 2.0 * fine[2] + fine[3]) - coarse[1]).abs() < 1e-12);
    }

    #[test]
    fn circulant_and_dense_agree_on_covariance() {
        let grid = BoundaryGrid::new(64).unwrap();
        let circ = FieldSampler::circulant(&grid, KernelScheme::CellAverage).unwrap();
        let dense = FieldSampler::dense(&grid, KernelScheme::CellAverage).unwrap();
        assert!(circ.clipped_fraction < 1e-3 && dense.clipped_fraction < 1e-12);
        let n = 20_000;
        let mut acc = [[0.0; 3]; 2];
        for (k, s) in [&circ, &dense].into_iter().enumerate() {
            for i in 0..n / 2 {
                for f in s.sample_pair(5, i as u64) {
                    acc[k][0] += f.values[0] * f.values[0];
                    acc[k][1] += f.values[10] * f.values[13];
                    acc[k][2] += f.values[5] * f.values[60];
                }
            }
        }
        let row = circ.covariance_row();
        for k in 0..2 {
            for (j, lag) in [0usize, 3, 55].into_iter().enumerate() {
                let est = acc[k][j] / n as f64;
                // Var of a product of jointly normal variables is at most 2σ⁴
                let se = (2.0f64).sqrt() * row[0] / (n as f64).sqrt();
                assert!((est - row[lag]).abs() < 4.0 * se, "route {k}, lag {lag}: {est} vs {}", row[lag]);
            }
        }
    }

    #[test]
    fn two_cell_grid_point_kernel() {
        let grid = BoundaryGrid::new(2).unwrap();
        let row = covariance_row(&grid, KernelScheme::Midpoint);
        assert!((row[1] - (-2.0 * 0.5f64.ln())).abs() < 1e-15);
        let s = FieldSampler::dense(&grid, KernelScheme::Midpoint).unwrap();
        let n = 100_000;
        let (mut c, mut v) = (0.0, 0.0);
        for i in 0..n / 2 {
            for f in s.sample_pair(1, i) {
                c += f.values[0] * f.values[1];
                v += f.values[0] * f.values[0];
            }
        }
        let se = 2.0f64.sqrt() * row[0] / (n as f64).sqrt();
        assert!((c / n as f64 - row[1]).abs() < 3.0 * se);
        assert!((v / n as f64 - row[0]).abs() < 3.0 * se);
    }

    #[test]
    fn zero_field_has_unit_length() {
        let grid = BoundaryGrid::new(16).unwrap();
        let f = BoundaryFieldSample { values: vec![0.0; 16], variance: vec![0.0; 16], seed: 0 };
        let p = LqgParams::new(1.0).unwrap();
        assert!((gmc_length(&f, &grid, &[], (0.0, 1.0), &p).unwrap() - 1.0).abs() < 1e-15);
        // a single insertion at 0 rescales each cell by |x|^{−γβ/2}
        let ins = [Insertion { beta: 0.8, position: 0.0 }];
        let w = insertion_weights(&grid, &ins, &p).unwrap();
        for (x, wi) in grid.points.iter().zip(&w) {
            assert!((wi / grid.delta - x.powf(-0.4)).abs() < 1e-12);
        }
        assert!(insertion_weights(&grid, &[Insertion { beta: 1.0, position: grid.points[3] }], &p).is_err());
    }

    #[test]
    fn wick_normalised_mean_is_length() {
        let p = LqgParams::new(1.2).unwrap();
        let grid = BoundaryGrid::new(256).unwrap();
        let s = FieldSampler::circulant(&grid, KernelScheme::CellAverage).unwrap();
        let k = MomentKernel::new(&grid, &[], 1.0, &p).unwrap();
        let v: Vec<f64> = paired_values(&s, 4000, 3, |f, _| [k.value(f, 0.0, GmcEstimator::Direct, &p), 0.0]).iter().map(|m| m[0]).collect();
        let est = accumulate(&v).unwrap();
        assert!((est.mean - 1.0).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn zero_exponent_and_prechecks() {
        let p = LqgParams::new(1.0).unwrap();
        // β̄ = 2Q gives exponent 0
        let e = mc_gmc_moment(1.0, 1.0, 3.0, 1024, 10, &p, 1, GmcEstimator::Rooted).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        let err = gmc_moment_exponent(0.5, 0.5, -0.2, &p).unwrap_err().to_string();
        assert!(err.contains("beta3"), "{err}");
        let err = gmc_moment_exponent(0.3, 0.3, 0.3, &p).unwrap_err().to_string();
        assert!(err.contains("exceed gamma"), "{err}");
        assert!(gmc_moment_exponent(2.6, 0.5, 2.3, &p).unwrap_err().to_string().contains("beta1"));
    }

    #[test]
    fn shifted_field_has_target_length() {
        let p = LqgParams::new(1.0).unwrap();
        let tw = TriangleWeights::new(2.5, 2.5, 0.6, &p).unwrap();
        let grid = BoundaryGrid::new(1024).unwrap();
        let s = FieldSampler::circulant(&grid, KernelScheme::CellAverage).unwrap();
        let w = triangle_length_weighted_sample(&tw, 1.7, &s, &p, 4, 0).unwrap();
        let ins = endpoint_insertions(tw.betas[0], tw.betas[1]);
        let len = gmc_length(&w.field, &grid, &ins, (0.0, 1.0), &p).unwrap();
        assert!((len / 1.7 - 1.0).abs() < 1e-10);
        assert!(w.weight > 0.0);
    }
}
