//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a flat `Vec<f64>` (a `Float64Array` on the JS side)
//! so the page can plot without any serialization layer. Errors surface as
//! JS exceptions carrying the library's message.

use qtlab::exact::{alpha0, radius_moment_exact, RadiusMomentQuery};
use qtlab::gmc::{gmc_masses, insertion_weights, sample_boundary_field, BoundaryGrid, FieldSampler, Insertion, KernelScheme};
use qtlab::harness::Exact;
use qtlab::params::{LqgParams, RhoTriple};
use qtlab::sle::{simulate_driving, ForcePointConfig, SimOptions};
use wasm_bindgen::prelude::*;

fn js_err(e: qtlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// The threshold `α₀` beyond which the moment is infinite.
#[wasm_bindgen(js_name = alphaZero)]
pub fn alpha_zero(kappa: f64, rho_minus: f64, rho_plus: f64, rho1: f64) -> f64 {
    alpha0(kappa, &RhoTriple::new(rho_minus, rho_plus, rho1))
}

/// `E[ψ′(1)^α]` at `points` equally spaced values of `α` in `[lo, hi]`.
///
/// Output is interleaved `[α₀, v₀, α₁, v₁, …]`; infinite moments are
/// reported as `+Infinity`.
#[wasm_bindgen(js_name = momentCurve)]
pub fn moment_curve(kappa: f64, rho_minus: f64, rho_plus: f64, rho1: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    if points < 2 || !(hi > lo) {
        return Err(JsError::new("need at least two points and hi > lo"));
    }
    let rho = RhoTriple::new(rho_minus, rho_plus, rho1);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let alpha = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let q = RadiusMomentQuery::new(kappa, rho, alpha).map_err(js_err)?;
        let v = match radius_moment_exact(&q) {
            Ok(Exact::Finite(v)) => v,
            Ok(Exact::Infinite) => f64::INFINITY,
            Err(_) => f64::NAN,
        };
        out.extend([alpha, v]);
    }
    Ok(out)
}

/// One SLE_κ(ρ₋; ρ₊, ρ₁) driving function up to time `t_max`.
///
/// Output is interleaved `[t, W, V^{1,L}, V^{1,R}, V^{2,R}]` per recorded
/// step. The recording is thinned to at most `max_points` rows.
#[wasm_bindgen(js_name = drivingPath)]
pub fn driving_path(
    kappa: f64,
    rho_minus: f64,
    rho_plus: f64,
    rho1: f64,
    t_max: f64,
    seed: u64,
    max_points: usize,
) -> Result<Vec<f64>, JsError> {
    let cfg = ForcePointConfig::radius_moment(kappa, &RhoTriple::new(rho_minus, rho_plus, rho1)).map_err(js_err)?;
    let path = simulate_driving(&cfg, t_max, t_max / 200.0, seed, &SimOptions::default()).map_err(js_err)?;
    let n = path.times.len();
    let stride = n.div_ceil(max_points.max(2)).max(1);
    let mut out = Vec::new();
    let mut push = |k: usize| {
        out.extend([path.times[k], path.w[k], path.v_left[0][k], path.v_right[0][k], path.v_right[1][k]]);
    };
    (0..n).step_by(stride).for_each(&mut push);
    if n > 0 && (n - 1) % stride != 0 {
        push(n - 1);
    }
    Ok(out)
}

/// Cell masses of one boundary GMC sample on `2^log2_n` cells of `[0, 1]`,
/// with insertions `β₁` at 0 and `β₂` at 1.
#[wasm_bindgen(js_name = gmcMasses)]
pub fn gmc_cell_masses(gamma: f64, beta1: f64, beta2: f64, log2_n: u32, seed: u64, index: u64) -> Result<Vec<f64>, JsError> {
    let p = LqgParams::new(gamma).map_err(js_err)?;
    let grid = BoundaryGrid::new(1usize.checked_shl(log2_n).unwrap_or(0)).map_err(js_err)?;
    let sampler = FieldSampler::circulant(&grid, KernelScheme::CellAverage).map_err(js_err)?;
    let insertions = [Insertion { beta: beta1, position: 0.0 }, Insertion { beta: beta2, position: 1.0 }];
    let weights = insertion_weights(&grid, &insertions, &p).map_err(js_err)?;
    let field = sample_boundary_field(&sampler, seed, index);
    Ok(gmc_masses(&field, &weights, &p))
}

// Only success paths run natively: building a `JsError` calls into JS.
#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_curve_is_one_at_zero_and_infinite_past_alpha0() {
        let c = moment_curve(2.0, 0.0, 0.0, 1.0, -1.0, 5.0, 7).unwrap();
        assert_eq!(c.len(), 14);
        assert_eq!(c[2], 0.0);
        assert!((c[3] - 1.0).abs() < 1e-10);
        assert_eq!(alpha_zero(2.0, 0.0, 0.0, 1.0), 4.0);
        assert_eq!(c[13], f64::INFINITY);
    }

    #[test]
    fn driving_path_rows_are_thinned_and_end_at_the_horizon() {
        let p = driving_path(2.0, 0.0, 0.0, 1.0, 4.0, 1, 50).unwrap();
        assert_eq!(p.len() % 5, 0);
        assert!(p.len() / 5 <= 51);
        assert_eq!(p[p.len() - 5], 4.0);
        assert_eq!(p, driving_path(2.0, 0.0, 0.0, 1.0, 4.0, 1, 50).unwrap());
    }

    #[test]
    fn gmc_masses_cover_the_grid() {
        let m = gmc_cell_masses(1.0, 0.5, 0.5, 8, 3, 0).unwrap();
        assert_eq!(m.len(), 256);
        assert!(m.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
}
