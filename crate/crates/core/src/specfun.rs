//! Log-gamma and the double gamma function Γ_b.
//!
//! `log Γ_b(z)` is evaluated by quadrature of its integral representation
//! inside a central strip `Re z ∈ [Q/4, 5Q/4]` (`Q = b + 1/b`) and moved
//! there from anywhere else with the shift equations
//!
//! ```text
//! Γ_b(z) / Γ_b(z + b)   = Γ(bz)  b^{1/2 - bz}  / √(2π)
//! Γ_b(z) / Γ_b(z + 1/b) = Γ(z/b) b^{z/b - 1/2} / √(2π)
//! ```
//!
//! The integrand is
//!
//! ```text
//! (1/t) [ (e^{-zt} - e^{-Qt/2}) / ((1 - e^{-bt})(1 - e^{-t/b}))
//!         - (Q/2 - z)²/2 · e^{-t} + (z - Q/2)/t ]
//! ```
//!
//! which is bounded at 0 only after a two-order cancellation. Below
//! `T_CUT` it is replaced by its Taylor series; above, fixed Gauss–Legendre
//! panels with precomputed z-independent factors are used.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog { ln_abs: 0.0, sign: 1.0 };

    pub fn positive(ln_abs: f64) -> Self {
        Self { ln_abs, sign: 1.0 }
    }

    pub fn from_value(x: f64) -> Self {
        Self { ln_abs: x.abs().ln(), sign: if x < 0.0 { -1.0 } else { 1.0 } }
    }

    pub fn value(self) -> f64 {
        self.sign * self.ln_abs.exp()
    }

    pub fn mul(self, o: SignedLog) -> Self {
        Self { ln_abs: self.ln_abs + o.ln_abs, sign: self.sign * o.sign }
    }

    pub fn div(self, o: SignedLog) -> Self {
        Self { ln_abs: self.ln_abs - o.ln_abs, sign: self.sign * o.sign }
    }

    /// Real power of a positive quantity.
    pub fn powf(self, e: f64) -> Self {
        debug_assert!(self.sign > 0.0);
        Self { ln_abs: self.ln_abs * e, sign: 1.0 }
    }
}

/// Distance to a pole below which evaluation is refused.
pub const POLE_TOL: f64 = 1e-8;

/// `log |Γ(z)|` with the sign of `Γ(z)`.
pub fn log_gamma(z: f64) -> Result<SignedLog> {
    if !z.is_finite() {
        return Err(Error::domain(format!("log_gamma of non-finite argument {z}")));
    }
    if z <= 0.0 && (z - z.round()).abs() < POLE_TOL {
        return Err(Error::Pole { context: "Gamma".into(), arg: z, tol: POLE_TOL });
    }
    let (ln_abs, sign) = libm::lgamma_r(z);
    Ok(SignedLog { ln_abs, sign: if sign < 0 { -1.0 } else { 1.0 } })
}

/// `Γ(z)` as a plain float (may overflow for large arguments).
pub fn gamma(z: f64) -> Result<f64> {
    Ok(log_gamma(z)?.value())
}

const T_CUT: f64 = 0.05;
const T_MAX: f64 = 80.0;
const SERIES_TERMS: usize = 14;
const GL_POINTS: usize = 20;

/// Supported range of `b`.
pub const B_RANGE: (f64, f64) = (0.3, 3.0);

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    /// `w / t`
    w_over_t: f64,
    exp_half_q: f64,
    inv_den: f64,
    exp_minus_t: f64,
}

/// Immutable evaluator of `log Γ_b` for one value of `b`.
#[derive(Debug, Clone)]
pub struct DoubleGammaEvaluator {
    b: f64,
    q: f64,
    nodes: Vec<Node>,
    /// `ε` such that `ε z²` is added to every returned `log Γ_b(z)`.
    /// Zero except in sensitivity self-tests.
    perturbation: f64,
}

impl DoubleGammaEvaluator {
    pub fn new(b: f64) -> Result<Self> {
        if !(b >= B_RANGE.0 - 1e-12 && b <= B_RANGE.1 + 1e-12) {
            return Err(Error::domain(format!("double gamma parameter b = {b} outside [0.3, 3]")));
        }
        let q = b + 1.0 / b;
        let mut edges = vec![T_CUT];
        let mut t = T_CUT;
        while t < 0.8 {
            t *= 2.0;
            edges.push(t);
        }
        while t < T_MAX {
            t += 2.0;
            edges.push(t);
        }
        let (gx, gw) = gauss_legendre(GL_POINTS);
        let mut nodes = Vec::with_capacity(edges.len() * GL_POINTS);
        for win in edges.windows(2) {
            let (a, c) = (win[0], win[1]);
            let mid = 0.5 * (a + c);
            let half = 0.5 * (c - a);
            for (x, w) in gx.iter().zip(&gw) {
                let t = mid + half * x;
                let den = (-(-b * t).exp_m1()) * (-(-t / b).exp_m1());
                nodes.push(Node {
                    t,
                    w_over_t: w * half / t,
                    exp_half_q: (-0.5 * q * t).exp(),
                    inv_den: 1.0 / den,
                    exp_minus_t: (-t).exp(),
                });
            }
        }
        Ok(Self { b, q, nodes, perturbation: 0.0 })
    }

    pub fn with_perturbation(mut self, eps: f64) -> Self {
        self.perturbation = eps;
        self
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Central strip on which the integral is evaluated directly.
    pub fn strip(&self) -> (f64, f64) {
        (0.25 * self.q, 1.25 * self.q)
    }

    /// Direct quadrature of the integral representation; `z` should lie in
    /// the strip (accuracy is only certified there, for moderate `Im z`).
    pub fn ln_gamma_b_direct(&self, z: Complex64) -> Complex64 {
        let d = 0.5 * self.q - z;
        let c = 0.5 * d * d;
        // Series part on [0, T_CUT].
        let coeffs = self.series_coefficients(z);
        let mut series = Complex64::new(0.0, 0.0);
        let mut tp = T_CUT;
        for (k, ck) in coeffs.iter().enumerate() {
            series += ck * (tp / (k as f64 + 1.0));
            tp *= T_CUT;
        }
        // (z - Q/2)/t² integrated analytically over [T_CUT, ∞).
        let tail_pole = -d / T_CUT;
        let mut panel = Complex64::new(0.0, 0.0);
        for n in &self.nodes {
            // e^{-zt} - e^{-Qt/2} = e^{-Qt/2} expm1((Q/2 - z) t)
            let num = n.exp_half_q * expm1_c(d * n.t);
            panel += n.w_over_t * (num * n.inv_den - c * n.exp_minus_t);
        }
        series + tail_pole + panel
    }

    /// Taylor coefficients of the integrand around t = 0.
    fn series_coefficients(&self, z: Complex64) -> [Complex64; SERIES_TERMS] {
        const M: usize = SERIES_TERMS + 3;
        let zero = Complex64::new(0.0, 0.0);
        let b = self.b;
        let hq = 0.5 * self.q;
        let mut fact = [1.0f64; M + 2];
        for j in 1..M + 2 {
            fact[j] = fact[j - 1] * j as f64;
        }
        // N(t)/t with N = e^{-zt} - e^{-Qt/2}
        let mut num = [zero; M];
        let mut zp = Complex64::new(1.0, 0.0);
        let mut hp = 1.0;
        for k in 0..M {
            let j = k + 1;
            zp *= -z;
            hp *= -hq;
            num[k] = (zp - hp) / fact[j];
        }
        // (1 - e^{-ct})/t = Σ (-1)^j c^{j+1} t^j/(j+1)!
        let series_c = |c: f64| {
            let mut s = [0.0; M];
            for j in 0..M {
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                s[j] = sgn * c.powi(j as i32 + 1) / fact[j + 1];
            }
            s
        };
        let s1 = series_c(b);
        let s2 = series_c(1.0 / b);
        let mut den = [0.0; M];
        for i in 0..M {
            for j in 0..M - i {
                den[i + j] += s1[i] * s2[j];
            }
        }
        // P = num / den
        let mut p = [zero; M];
        for k in 0..M {
            let mut acc = num[k];
            for j in 1..=k {
                acc -= den[j] * p[k - j];
            }
            p[k] = acc / den[0];
        }
        let c = 0.5 * (hq - z) * (hq - z);
        let mut out = [zero; SERIES_TERMS];
        for k in 0..SERIES_TERMS {
            let sgn = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            out[k] = p[k + 2] - c * (sgn / fact[k + 1]);
        }
        out
    }

    /// `log Γ_b(z)` for complex `z` off the poles `−mb − n/b`. The imaginary
    /// part is a continuous branch along the shift path, so only
    /// `exp(log Γ_b)` is branch-independent.
    pub fn ln_gamma_b_complex(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::domain(format!("Gamma_b of non-finite argument {z}")));
        }
        let (lo, hi) = self.strip();
        // Shift by the larger of b and 1/b; the strip is wider than either.
        let (step, use_b) = if self.b >= 1.0 { (self.b, true) } else { (1.0 / self.b, false) };
        let ln_b = self.b.ln();
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        // log of Γ_b(x)/Γ_b(x + step)
        let ratio = |x: Complex64| -> Result<Complex64> {
            let (arg, pow) = if use_b {
                (self.b * x, (0.5 - self.b * x) * ln_b)
            } else {
                (x / self.b, (x / self.b - 0.5) * ln_b)
            };
            if arg.re <= 0.5 && arg.im.abs() < POLE_TOL && (arg.re - arg.re.round()).abs() < POLE_TOL * step.max(1.0) {
                return Err(Error::Pole { context: format!("Gamma_b (b = {})", self.b), arg: z.re, tol: POLE_TOL });
            }
            Ok(log_gamma_complex(arg)? + pow - half_ln_2pi)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        let mut x = z;
        while x.re < lo {
            // Γ_b(x) = Γ_b(x + step) · ratio(x)
            acc += ratio(x)?;
            x += step;
        }
        while x.re > hi {
            // Γ_b(x) = Γ_b(x - step) / ratio(x - step)
            acc -= ratio(x - step)?;
            x -= step;
        }
        Ok(acc + self.ln_gamma_b_direct(x) + self.perturbation * z * z)
    }

    /// `log |Γ_b(z)|` with sign, for real `z` off the poles.
    pub fn ln_gamma_b(&self, z: f64) -> Result<SignedLog> {
        let v = self.ln_gamma_b_complex(Complex64::new(z, 0.0))?;
        Ok(SignedLog { ln_abs: v.re, sign: if v.im.cos() < 0.0 { -1.0 } else { 1.0 } })
    }
}

fn expm1_c(w: Complex64) -> Complex64 {
    // e^{a+ib} - 1 = expm1(a) cos b + (cos b - 1) + i e^a sin b, with cos b - 1 = -2 sin²(b/2)
    let (a, b) = (w.re, w.im);
    let s = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * s * s, a.exp() * b.sin())
}

/// Complex `log Γ(z)`: reflection for `Re z < 1/2`, upward recurrence and the
/// Stirling series otherwise. Real arguments are delegated to [`log_gamma`].
pub fn log_gamma_complex(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        let g = log_gamma(z.re)?;
        return Ok(Complex64::new(g.ln_abs, if g.sign < 0.0 { PI } else { 0.0 }));
    }
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        let s = (PI * z).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - log_gamma_complex(1.0 - z)?);
    }
    const SHIFT: f64 = 15.0;
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while w.re < SHIFT {
        acc -= w.ln();
        w += 1.0;
    }
    // Bernoulli terms B_{2k} / (2k (2k-1))
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360360.0,
        1.0 / 156.0,
        -3617.0 / 122400.0,
    ];
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut term = inv;
    let mut series = Complex64::new(0.0, 0.0);
    for c in C {
        series += c * term;
        term *= inv2;
    }
    Ok(acc + (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series)
}

/// Evaluators shared across calls, keyed by `b`.
#[derive(Debug, Default)]
pub struct DoubleGammaCache {
    map: Mutex<HashMap<u64, Arc<DoubleGammaEvaluator>>>,
    perturbation: f64,
}

impl DoubleGammaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_perturbation(eps: f64) -> Self {
        Self { map: Mutex::default(), perturbation: eps }
    }

    pub fn global() -> &'static DoubleGammaCache {
        static CACHE: OnceLock<DoubleGammaCache> = OnceLock::new();
        CACHE.get_or_init(DoubleGammaCache::new)
    }

    pub fn evaluator(&self, b: f64) -> Result<Arc<DoubleGammaEvaluator>> {
        let key = b.to_bits();
        if let Some(ev) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(ev.clone());
        }
        let ev = Arc::new(DoubleGammaEvaluator::new(b)?.with_perturbation(self.perturbation));
        self.map.lock().expect("cache lock").insert(key, ev.clone());
        Ok(ev)
    }

    pub fn ln_gamma_b(&self, b: f64, z: f64) -> Result<SignedLog> {
        self.evaluator(b)?.ln_gamma_b(z)
    }

    pub fn ln_gamma_b_complex(&self, b: f64, z: Complex64) -> Result<Complex64> {
        self.evaluator(b)?.ln_gamma_b_complex(z)
    }
}

/// `log Γ_b(z)` through the process-wide evaluator cache.
pub fn log_gamma_b(b: f64, z: f64) -> Result<SignedLog> {
    DoubleGammaCache::global().ln_gamma_b(b, z)
}
