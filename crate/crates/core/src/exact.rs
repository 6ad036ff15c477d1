//! Closed-form structure constants, length laws and conformal-derivative
//! moments, together with the identities they satisfy as residuals.
//!
//! Every formula is assembled as a complex logarithm and exponentiated at the
//! end. Complex arithmetic is needed because the exponent relation between
//! `α` and `β` has complex-conjugate roots for strongly negative `α`; the
//! Γ and Γ_b factors then pair into squared moduli and the result is real.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Exact;
use crate::params::{beta_rho_bridge, LqgParams, RhoTriple, TriangleWeights};
use crate::specfun::{log_gamma_complex, DoubleGammaCache};

type C = Complex64;

fn c(x: f64) -> C {
    C::new(x, 0.0)
}

/// Exponentiate a complex log whose imaginary part must be a multiple of π.
fn real_from_log(l: C, what: &str) -> Result<f64> {
    if !l.re.is_finite() {
        return Err(Error::Numerical(format!("{what}: non-finite log value {l}")));
    }
    if l.im.sin().abs() > 1e-6 * l.im.abs().max(1.0) {
        return Err(Error::Numerical(format!("{what}: result is not real (phase {})", l.im)));
    }
    Ok(l.re.exp() * l.im.cos().signum())
}

fn rel_residual(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / b.abs().max(a.abs()).max(f64::MIN_POSITIVE)
}

/// `Δ_β = (β/2)(Q − β/2)`.
pub fn delta_beta(beta: f64, p: &LqgParams) -> f64 {
    0.5 * beta * (p.q - 0.5 * beta)
}

/// Seiberg bounds: `β₁, β₂ < Q`, `|β₁ − β₂| < β₃`, `β̄ > γ`.
pub fn seiberg_bounds(b1: f64, b2: f64, b3: f64, p: &LqgParams) -> std::result::Result<(), String> {
    if !(b1 < p.q) {
        return Err(format!("beta1 = {b1} must be < Q = {}", p.q));
    }
    if !(b2 < p.q) {
        return Err(format!("beta2 = {b2} must be < Q = {}", p.q));
    }
    if !((b1 - b2).abs() < b3) {
        return Err(format!("|beta1 - beta2| = {} must be < beta3 = {b3}", (b1 - b2).abs()));
    }
    if !(b1 + b2 + b3 > p.gamma) {
        return Err(format!("beta_bar = {} must exceed gamma = {}", b1 + b2 + b3, p.gamma));
    }
    Ok(())
}

/// Structure constant together with its moment interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBar {
    /// Value of the closed form (defined for identity checks even when the
    /// Seiberg bounds fail).
    pub value: f64,
    /// Whether the bounds hold, i.e. whether `value` equals a finite GMC moment.
    pub seiberg: bool,
}

impl HBar {
    /// The GMC moment it represents: infinite outside the Seiberg bounds.
    pub fn as_moment(&self) -> Exact {
        if self.seiberg {
            Exact::Finite(self.value)
        } else {
            Exact::Infinite
        }
    }
}

/// Power-law density `prefactor · ℓ^exponent` on `ℓ > 0`, or an infinite measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthLawDensity {
    pub prefactor: f64,
    pub exponent: f64,
    pub infinite: bool,
}

impl LengthLawDensity {
    pub fn at(&self, ell: f64) -> Exact {
        if self.infinite {
            Exact::Infinite
        } else {
            Exact::Finite(self.prefactor * ell.powf(self.exponent))
        }
    }
}

/// Roots of the quadratic exponent relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaRoots {
    Real(f64, f64),
    /// `re ± i·im`.
    Complex { re: f64, im: f64 },
}

impl BetaRoots {
    pub fn roots(&self) -> [C; 2] {
        match *self {
            BetaRoots::Real(a, b) => [c(a), c(b)],
            BetaRoots::Complex { re, im } => [C::new(re, im), C::new(re, -im)],
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, BetaRoots::Complex { .. })
    }
}

/// `(√κ(√κ − β) − ρ₁)(4 + ρ₁ − √κβ) / (4κ)`, the exponent attached to `β`.
pub fn alpha_of_beta(beta: C, kappa: f64, rho1: f64) -> C {
    let sk = kappa.sqrt();
    (sk * (sk - beta) - rho1) * (4.0 + rho1 - sk * beta) / (4.0 * kappa)
}

/// Solve `alpha_of_beta(β) = α` for `β`.
pub fn alpha_to_beta_roots(alpha: f64, kappa: f64, rho1: f64) -> BetaRoots {
    // In u = √κβ the relation reads (u − u₁)(u − u₂) = 4κα with
    // u₁ = κ − ρ₁, u₂ = 4 + ρ₁.
    let sk = kappa.sqrt();
    let (u1, u2) = (kappa - rho1, 4.0 + rho1);
    let mid = 0.5 * (u1 + u2);
    let half = 0.5 * (u2 - u1);
    let disc = half * half + 4.0 * kappa * alpha;
    if disc >= 0.0 {
        let r = disc.sqrt();
        BetaRoots::Real((mid - r) / sk, (mid + r) / sk)
    } else {
        BetaRoots::Complex { re: mid / sk, im: (-disc).sqrt() / sk }
    }
}

/// Moment threshold `α₀ = (ρ₊ + 2)(ρ₊ + ρ₁ + 4 − κ/2)/κ`.
pub fn alpha0(kappa: f64, rho: &RhoTriple) -> f64 {
    (rho.plus + 2.0) * (rho.plus + rho.one + 4.0 - 0.5 * kappa) / kappa
}

/// Weight `α* = ρ₁(4 − κ)/(2κ)` of the reversed process.
pub fn reversal_alpha_star(kappa: f64, rho1: f64) -> f64 {
    rho1 * (4.0 - kappa) / (2.0 * kappa)
}

/// Validated parameters of a conformal-derivative moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusMomentQuery {
    pub kappa: f64,
    pub rho: RhoTriple,
    pub alpha: f64,
    pub alpha_0: f64,
    pub beta_roots: BetaRoots,
}

impl RadiusMomentQuery {
    pub fn new(kappa: f64, rho: RhoTriple, alpha: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 4.0) {
            return Err(Error::domain(format!("kappa = {kappa} must lie in (0, 4)")));
        }
        rho.check_admissible()?;
        if !alpha.is_finite() {
            return Err(Error::domain("alpha must be finite"));
        }
        Ok(Self { kappa, rho, alpha, alpha_0: alpha0(kappa, &rho), beta_roots: alpha_to_beta_roots(alpha, kappa, rho.one) })
    }
}

/// Evaluation context: which Γ_b cache (and hence which perturbation) to use.
#[derive(Clone, Copy)]
pub struct ExactContext<'a> {
    cache: &'a DoubleGammaCache,
}

impl Default for ExactContext<'static> {
    fn default() -> Self {
        Self { cache: DoubleGammaCache::global() }
    }
}

impl<'a> ExactContext<'a> {
    pub fn new(cache: &'a DoubleGammaCache) -> Self {
        Self { cache }
    }

    fn lgb(&self, b: f64, z: C) -> Result<C> {
        self.cache.ln_gamma_b_complex(b, z)
    }

    /// `log(z Γ_b(z))`, regular at `z = 0`.
    fn ln_z_gamma_b(&self, b: f64, z: C) -> Result<C> {
        // zΓ_b(z) = Γ_b(z + b) Γ(1 + bz) b^{1/2 − bz} / (b√(2π))
        Ok(self.lgb(b, z + b)? + log_gamma_complex(1.0 + b * z)? + (0.5 - b * z) * b.ln() - b.ln() - 0.5 * (2.0 * PI).ln())
    }

    /// `R̄(β; μ, 0)`.
    pub fn r_bar_mu(&self, beta: f64, mu: f64, p: &LqgParams) -> Result<f64> {
        if !(mu > 0.0) {
            return Err(Error::domain(format!("mu = {mu} must be positive")));
        }
        let g = p.gamma;
        let b = 0.5 * g;
        let d = p.q - beta;
        let e = 2.0 * d / g;
        let lg_const = log_gamma_complex(c(1.0 - 0.25 * g * g))?;
        let den = match self.ln_z_gamma_b(b, c(d)) {
            Ok(v) => v,
            Err(Error::Pole { .. }) => return Ok(0.0),
            Err(e) => return Err(e),
        };
        let l = e * mu.ln() + (e - 0.5) * (2.0 * PI).ln() + (0.5 * g * d - 0.5) * (2.0 / g).ln() - e * lg_const
            + self.lgb(b, c(beta - 0.5 * g))?
            - den;
        real_from_log(l, "R_bar")
    }

    /// `R̄(β; 1, 0)`.
    pub fn r_bar(&self, beta: f64, p: &LqgParams) -> Result<f64> {
        self.r_bar_mu(beta, 1.0, p)
    }

    /// The structure constant `H̄^{(β₁,β₂,β₃)}_{(0,1,0)}`.
    pub fn h_bar(&self, b1: f64, b2: f64, b3: f64, p: &LqgParams) -> Result<HBar> {
        let g = p.gamma;
        let b = 0.5 * g;
        let q = p.q;
        let bb = b1 + b2 + b3;
        let pw = (2.0 * q - bb) / g;
        let lg_const = log_gamma_complex(c(1.0 - 0.25 * g * g))?;
        // Γ_b(β̄/2 − Q) / Γ((β̄ − 2Q)/γ) = Γ_b(β̄/2 − Q + 1/b) b^{z/b − 1/2}/√(2π), z = β̄/2 − Q
        let z = 0.5 * bb - q;
        let ratio = self.lgb(b, c(z + 1.0 / b))? + (z / b - 0.5) * b.ln() - 0.5 * (2.0 * PI).ln();
        let seiberg = seiberg_bounds(b1, b2, b3, p).is_ok();
        // 1/Γ_b is entire: a denominator argument on a pole makes H̄ vanish.
        let mut den = c(0.0);
        for z in [q, q - b1, q - b2, b3] {
            match self.lgb(b, c(z)) {
                Ok(v) => den += v,
                Err(Error::Pole { .. }) => return Ok(HBar { value: 0.0, seiberg }),
                Err(e) => return Err(e),
            }
        }
        let l = (pw + 1.0) * (2.0 * PI).ln() + ((0.5 * g - 2.0 / g) * (q - 0.5 * bb) - 1.0) * (2.0 / g).ln() - pw * lg_const
            + ratio
            + self.lgb(b, c(0.5 * (bb - 2.0 * b2)))?
            + self.lgb(b, c(0.5 * (bb - 2.0 * b1)))?
            + self.lgb(b, c(q - 0.5 * (bb - 2.0 * b3)))?
            - den;
        Ok(HBar { value: real_from_log(l, "H_bar")?, seiberg })
    }

    /// Relative residual of the reflection `β₂ ↦ 2Q − β₂` of `H̄`.
    pub fn h_bar_reflection_residual(&self, b1: f64, b2: f64, b3: f64, p: &LqgParams) -> Result<f64> {
        let g = p.gamma;
        let q = p.q;
        let bb = b1 + b2 + b3;
        let lhs = self.h_bar(b1, 2.0 * q - b2, b3, p)?.value;
        let lg = log_gamma_complex(c(2.0 / g * (2.0 * q - b2 - 2.0 / g)))? + log_gamma_complex(c((bb - 2.0 * q) / g))?
            - log_gamma_complex(c((b1 + b3 - b2) / g))?;
        let rhs = -real_from_log(lg, "reflection prefactor")? * self.r_bar(2.0 * q - b2, p)? * self.h_bar(b1, b2, b3, p)?.value;
        Ok(rel_residual(lhs, rhs))
    }

    /// Relative residual of `R̄(β)R̄(2Q − β) = 1/(Γ(1 − 2(Q−β)/γ)Γ(1 + 2(Q−β)/γ))`.
    pub fn r_bar_reflection_residual(&self, beta: f64, p: &LqgParams) -> Result<f64> {
        let s = 2.0 * (p.q - beta) / p.gamma;
        let lhs = self.r_bar(beta, p)? * self.r_bar(2.0 * p.q - beta, p)?;
        let rhs = match (log_gamma_complex(c(1.0 - s)), log_gamma_complex(c(1.0 + s))) {
            (Ok(a), Ok(b)) => real_from_log(-(a + b), "reflection")?,
            (Err(Error::Pole { .. }), _) | (_, Err(Error::Pole { .. })) => 0.0,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        Ok(rel_residual(lhs, rhs))
    }

    /// Left boundary length law of a weight-`W` two-pointed disk.
    pub fn disk_length_density(&self, w: f64, p: &LqgParams) -> Result<LengthLawDensity> {
        let beta = crate::params::weight_to_beta(w, p)?;
        let exponent = -2.0 * w / p.kappa;
        if w >= p.gamma * p.q {
            return Ok(LengthLawDensity { prefactor: f64::INFINITY, exponent, infinite: true });
        }
        Ok(LengthLawDensity { prefactor: self.r_bar(beta, p)?, exponent, infinite: false })
    }

    /// Law of the length `L₁₂` of a quantum triangle, thick or thin vertices.
    pub fn triangle_length_density(&self, tw: &TriangleWeights, p: &LqgParams) -> Result<LengthLawDensity> {
        let [b1, b2, b3] = tw.betas;
        for (i, b) in tw.betas.iter().enumerate() {
            if (b - p.q).abs() < 1e-12 {
                return Err(Error::domain(format!("W{} = gamma^2/2 is not supported by the closed form", i + 1)));
            }
        }
        let exponent = (tw.beta_bar - 2.0 * p.q) / p.gamma - 1.0;
        let [r1, r2, r3] = tw.reflected_betas;
        if seiberg_bounds(r1, r2, r3, p).is_err() {
            return Ok(LengthLawDensity { prefactor: f64::INFINITY, exponent, infinite: true });
        }
        let h = self.h_bar(b1, b2, b3, p)?.value;
        let prefactor = 2.0 * h / (p.gamma * (p.q - b1) * (p.q - b2) * (p.q - b3));
        Ok(LengthLawDensity { prefactor, exponent, infinite: false })
    }

    /// `QT(W₁,W₂,W₃)[e^{−μL₁₂}]`; infinite when the integral diverges at 0.
    pub fn triangle_length_laplace(&self, tw: &TriangleWeights, mu: f64, p: &LqgParams) -> Result<Exact> {
        if !(mu > 0.0) {
            return Err(Error::domain(format!("mu = {mu} must be positive")));
        }
        let dens = self.triangle_length_density(tw, p)?;
        let s = (tw.beta_bar - 2.0 * p.q) / p.gamma;
        if dens.infinite || s <= 0.0 {
            return Ok(Exact::Infinite);
        }
        let g = crate::specfun::gamma(s)?;
        Ok(Exact::Finite(dens.prefactor * g * mu.powf(-s)))
    }

    /// Residual of the thin-vertex Laplace chain: a triangle with thin `W₂`
    /// equals the thick triangle `(W₁, γ² − W₂, W₃)` convolved with a weight
    /// `W₂` disk, compared against the direct thin closed form (at `μ = 1`).
    pub fn thin_chain_residual(&self, tw: &TriangleWeights, p: &LqgParams) -> Result<f64> {
        if !(tw.thick[0] && !tw.thick[1] && tw.thick[2]) {
            return Err(Error::domain("chain residual needs W1, W3 thick and W2 thin"));
        }
        let g = p.gamma;
        let q = p.q;
        let [b1, b2, b3] = tw.betas;
        let w2 = tw.weights[1];
        let s_chain = (b1 + b3 - b2) / g;
        let s_disk = 1.0 - 2.0 * w2 / p.kappa;
        let s = (tw.beta_bar - 2.0 * q) / g;
        if s_chain <= 0.0 || s <= 0.0 {
            return Err(Error::domain("Laplace transforms diverge for these weights"));
        }
        let chain = 2.0 / (g * (q - b1) * (b2 - q) * (q - b3))
            * self.h_bar(b1, 2.0 * q - b2, b3, p)?.value
            * s_disk
            * crate::specfun::gamma(s_chain)?
            * crate::specfun::gamma(2.0 / g * (b2 - q))?
            * self.r_bar(b2, p)?;
        let direct = match self.triangle_length_laplace(tw, 1.0, p)? {
            Exact::Finite(v) => v,
            Exact::Infinite => return Err(Error::domain("thin triangle Laplace transform diverges")),
        };
        Ok(rel_residual(chain, direct))
    }

    /// `log F(x, κ, ρ₋, ρ₊, ρ₁)` for complex `x`.
    pub fn ln_f_function(&self, x: C, kappa: f64, rho: &RhoTriple) -> Result<C> {
        let sk = kappa.sqrt();
        let b = 0.5 * sk;
        let (rm, rp, r1) = (rho.minus, rho.plus, rho.one);
        let a1 = 2.0 / sk - 0.5 * sk + rp / sk + 0.5 * x;
        let a2 = 4.0 / sk + (rp + r1) / sk - 0.5 * x;
        let d1 = 4.0 / sk - 0.5 * sk + (rp + rm) / sk + 0.5 * x;
        let d2 = 6.0 / sk + (rm + rp + r1) / sk - 0.5 * x;
        let named = |z: C, name: &str| -> Result<C> {
            self.lgb(b, z).map_err(|e| match e {
                Error::Pole { arg, tol, .. } => Error::Pole { context: format!("F-function factor {name}"), arg, tol },
                other => other,
            })
        };
        Ok(named(a1, "numerator 1")? + named(a2, "numerator 2")? - named(d1, "denominator 1")? - named(d2, "denominator 2")?)
    }

    /// `F(x, κ, ρ₋, ρ₊, ρ₁)` for real `x`.
    pub fn f_function(&self, x: f64, kappa: f64, rho: &RhoTriple) -> Result<f64> {
        real_from_log(self.ln_f_function(c(x), kappa, rho)?, "F")
    }

    /// Moment value using a chosen root (0 or 1) of the exponent relation.
    pub fn radius_moment_with_root(&self, q: &RadiusMomentQuery, root: usize) -> Result<Exact> {
        if q.alpha >= q.alpha_0 {
            return Ok(Exact::Infinite);
        }
        let sk = q.kappa.sqrt();
        let beta = q.beta_roots.roots()[root];
        let x = beta + q.rho.one / sk;
        let l = self.ln_f_function(x, q.kappa, &q.rho)? - self.ln_f_function(c(sk), q.kappa, &q.rho)?;
        Ok(Exact::Finite(real_from_log(l, "conformal-derivative moment")?))
    }

    /// `E[ψ′(1)^α]` for SLE_κ(ρ₋; ρ₊, ρ₁) with force points `0⁻, 0⁺, 1`.
    pub fn radius_moment_exact(&self, q: &RadiusMomentQuery) -> Result<Exact> {
        self.radius_moment_with_root(q, 0)
    }

    /// Relative difference between the two root choices.
    pub fn two_root_residual(&self, q: &RadiusMomentQuery) -> Result<f64> {
        match (self.radius_moment_with_root(q, 0)?, self.radius_moment_with_root(q, 1)?) {
            (Exact::Finite(a), Exact::Finite(b)) => Ok(rel_residual(a, b)),
            _ => Ok(0.0),
        }
    }

    /// `m(β₋, β₁, β₂, α)`: the moment for the force-point weights of `beta_rho_bridge`.
    pub fn m_function(&self, beta_minus: f64, b1: f64, b2: f64, alpha: f64, p: &LqgParams) -> Result<Exact> {
        let rho = beta_rho_bridge(beta_minus, b1, b2, p);
        self.radius_moment_exact(&RadiusMomentQuery::new(p.kappa, rho, alpha)?)
    }

    fn m_closed_form(&self, scale: f64, b1: f64, b2: f64, alpha: f64, p: &LqgParams) -> Result<f64> {
        let q = p.q;
        let g = p.gamma;
        for (name, b) in [("beta1", b1), ("beta2", b2)] {
            if !(b < q + 0.5 * g) {
                return Err(Error::domain(format!("{name} = {b} must be < Q + gamma/2")));
            }
            if (b - q).abs() < 1e-12 {
                return Err(Error::domain(format!("{name} = Q is excluded")));
            }
        }
        let beta = alpha_to_beta_roots(alpha, p.kappa, g * (b2 - b1)).roots()[0];
        let l = log_gamma_complex(scale * (q - 0.5 * (b1 + b2 - beta)))?
            + log_gamma_complex(scale * (2.0 * q - 0.5 * (b1 + b2 + beta)))?
            - log_gamma_complex(c(scale * (q + 2.0 / g - b1)))?
            - log_gamma_complex(c(scale * (q + 0.5 * g - b2)))?;
        real_from_log(l, "m closed form")
    }

    /// Closed form of `m(γ, β₁, β₂, α)`.
    pub fn m_gamma_closed_form(&self, b1: f64, b2: f64, alpha: f64, p: &LqgParams) -> Result<f64> {
        self.m_closed_form(2.0 / p.gamma, b1, b2, alpha, p)
    }

    /// Closed form of `m(Q, β₁, β₂, α)`.
    pub fn m_q_closed_form(&self, b1: f64, b2: f64, alpha: f64, p: &LqgParams) -> Result<f64> {
        self.m_closed_form(0.5 * p.gamma, b1, b2, alpha, p)
    }

    fn finite_m(&self, bm: f64, b1: f64, b2: f64, alpha: f64, p: &LqgParams, label: &str) -> Result<f64> {
        match self.m_function(bm, b1, b2, alpha, p) {
            Ok(Exact::Finite(v)) => Ok(v),
            Ok(Exact::Infinite) => Err(Error::domain(format!("{label}: alpha is above the moment threshold"))),
            Err(e) => Err(Error::domain(format!("{label}: {e}"))),
        }
    }

    /// Residuals of the `2/γ` shift, the `γ/2` shift and the multiplicative
    /// composition with the given `β̃`.
    pub fn shift_relation_residuals(
        &self,
        beta_minus: f64,
        b1: f64,
        b2: f64,
        alpha: f64,
        beta_tilde: f64,
        p: &LqgParams,
    ) -> Result<(f64, f64, f64)> {
        let g = p.gamma;
        let q = p.q;
        let bm = beta_minus;
        let m0 = self.finite_m(bm, b1, b2, alpha, p, "m(beta_-)")?;
        let beta = alpha_to_beta_roots(alpha, p.kappa, g * (b2 - b1)).roots()[0];
        let shift_ratio = |scale: f64| -> Result<f64> {
            let base = g - b1 - b2 - 2.0 * bm;
            let l = log_gamma_complex(scale * (2.0 * q + 0.5 * (base + beta)))?
                + log_gamma_complex(scale * (3.0 * q + 0.5 * (base - beta)))?
                - log_gamma_complex(c(scale * (3.0 * q - b1 - bm)))?
                - log_gamma_complex(c(scale * (2.0 * q + g - b2 - bm)))?;
            real_from_log(l, "shift ratio")
        };
        let ma = self.finite_m(bm - 2.0 / g, b1, b2, alpha, p, "m(beta_- - 2/gamma)")?;
        let res_a = rel_residual(ma / m0, shift_ratio(2.0 / g)?);
        let mb = self.finite_m(bm - 0.5 * g, b1, b2, alpha, p, "m(beta_- - gamma/2)")?;
        let res_b = rel_residual(mb / m0, shift_ratio(0.5 * g)?);
        let shift = bm - g - 2.0 / g;
        let lhs = self.finite_m(bm + beta_tilde - q - 0.5 * g, b1, b2, alpha, p, "composed m")?;
        let rhs = self.finite_m(beta_tilde, b1 + shift, b2 + shift, alpha, p, "inner m")? * m0;
        Ok((res_a, res_b, rel_residual(lhs, rhs)))
    }

    /// Residual of `m(ρ; α) · m(ρ′; α*) = m(ρ′; α + α*)` with `ρ′ = (ρ₋; ρ₊ + ρ₁, −ρ₁)`.
    pub fn reversal_consistency_residual(&self, kappa: f64, rho: &RhoTriple, alpha: f64) -> Result<f64> {
        let a_star = reversal_alpha_star(kappa, rho.one);
        let rev = RhoTriple::new(rho.minus, rho.plus + rho.one, -rho.one);
        let get = |r: &RhoTriple, a: f64, label: &str| -> Result<f64> {
            match self.radius_moment_exact(&RadiusMomentQuery::new(kappa, *r, a)?)? {
                Exact::Finite(v) => Ok(v),
                Exact::Infinite => Err(Error::domain(format!("{label}: exponent {a} at or above threshold"))),
            }
        };
        let lhs = get(rho, alpha, "forward moment")? * get(&rev, a_star, "normaliser")?;
        let rhs = get(&rev, alpha + a_star, "reweighted moment")?;
        Ok(rel_residual(lhs, rhs))
    }
}

/// Free-function wrappers over the process-wide cache.
pub fn r_bar(beta: f64, p: &LqgParams) -> Result<f64> {
    ExactContext::default().r_bar(beta, p)
}

pub fn h_bar(b1: f64, b2: f64, b3: f64, p: &LqgParams) -> Result<HBar> {
    ExactContext::default().h_bar(b1, b2, b3, p)
}

pub fn f_function(x: f64, kappa: f64, rho: &RhoTriple) -> Result<f64> {
    ExactContext::default().f_function(x, kappa, rho)
}

pub fn radius_moment_exact(q: &RadiusMomentQuery) -> Result<Exact> {
    ExactContext::default().radius_moment_exact(q)
}

pub fn triangle_length_density(tw: &TriangleWeights, p: &LqgParams) -> Result<LengthLawDensity> {
    ExactContext::default().triangle_length_density(tw, p)
}

pub fn disk_length_density(w: f64, p: &LqgParams) -> Result<LengthLawDensity> {
    ExactContext::default().disk_length_density(w, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> LqgParams {
        LqgParams::new(1.0).unwrap()
    }

    #[test]
    fn delta_examples() {
        let p = LqgParams::new(1.3).unwrap();
        assert!((delta_beta(p.gamma, &p) - 1.0).abs() < 1e-14);
        assert_eq!(delta_beta(0.0, &p), 0.0);
        assert!((delta_beta(p.q, &p) - p.q * p.q / 4.0).abs() < 1e-14);
    }

    #[test]
    fn roots_solve_relation() {
        for (a, k, r1) in [(0.0, 2.0, 0.0), (0.0, 3.0, 1.0), (-0.3, 2.0, 1.0), (-1.0, 2.0, 0.0), (0.7, 1.5, -0.5)] {
            for beta in alpha_to_beta_roots(a, k, r1).roots() {
                assert!((alpha_of_beta(beta, k, r1) - a).norm() < 1e-12, "{a} {k} {r1}");
            }
        }
        let sk = 2f64.sqrt();
        match alpha_to_beta_roots(0.0, 2.0, 0.0) {
            BetaRoots::Real(a, b) => assert!((a - sk).abs() < 1e-15 && (b - 4.0 / sk).abs() < 1e-15),
            _ => panic!(),
        }
        match alpha_to_beta_roots(0.0, 3.0, 1.0) {
            BetaRoots::Real(a, b) => {
                assert!((a - (3f64.sqrt() - 1.0 / 3f64.sqrt())).abs() < 1e-14);
                assert!((b - 5.0 / 3f64.sqrt()).abs() < 1e-14);
            }
            _ => panic!(),
        }
        assert!(alpha_to_beta_roots(-1.0, 2.0, 0.0).is_complex());
    }

    #[test]
    fn alpha0_and_infinite_moments() {
        let rho = RhoTriple::new(0.0, 0.0, 1.0);
        assert!((alpha0(2.0, &rho) - 4.0).abs() < 1e-13);
        let ctx = ExactContext::default();
        for a in [4.0, 4.5, 10.0] {
            let q = RadiusMomentQuery::new(2.0, rho, a).unwrap();
            assert_eq!(ctx.radius_moment_exact(&q).unwrap(), Exact::Infinite);
        }
    }

    #[test]
    fn zero_exponent_gives_one() {
        let ctx = ExactContext::default();
        for (k, r) in [(2.0, RhoTriple::new(0.0, 0.0, 0.0)), (3.0, RhoTriple::new(1.0, 1.0, 1.0)), (1.2, RhoTriple::new(-0.5, 0.3, 0.8))] {
            let q = RadiusMomentQuery::new(k, r, 0.0).unwrap();
            for root in 0..2 {
                let v = ctx.radius_moment_with_root(&q, root).unwrap().finite().unwrap();
                assert!((v - 1.0).abs() < 1e-10, "{k} {r:?} root {root}: {v}");
            }
        }
    }

    #[test]
    fn h_bar_matches_beta_function_at_unit_moment() {
        // p = 1: E[ν([0,1])] = ∫ x^{-γβ₁/2}(1-x)^{-γβ₂/2} dx = B(1 - γβ₁/2, 1 - γβ₂/2)
        let ctx = ExactContext::default();
        for g in [0.6, 1.0, 1.4] {
            let p = LqgParams::new(g).unwrap();
            for (b1, b2) in [(0.3, 0.5), (0.0, 0.0), (-0.4, 0.9)] {
                let b3 = 2.0 * p.q - g - b1 - b2;
                let (a, b) = (1.0 - g * b1 / 2.0, 1.0 - g * b2 / 2.0);
                let beta = (crate::specfun::log_gamma(a).unwrap().ln_abs + crate::specfun::log_gamma(b).unwrap().ln_abs
                    - crate::specfun::log_gamma(a + b).unwrap().ln_abs)
                    .exp();
                let h = ctx.h_bar(b1, b2, b3, &p).unwrap();
                assert!((h.value - beta).abs() < 1e-9 * beta, "g={g} ({b1},{b2}): {} vs {beta}", h.value);
            }
        }
    }

    #[test]
    fn h_bar_matches_selberg_at_second_moment() {
        // p = 2: Selberg integral with α = 1 - γβ₁/2, β = 1 - γβ₂/2, γ_s = -γ²/4
        let ctx = ExactContext::default();
        let lg = |x: f64| crate::specfun::log_gamma(x).unwrap().ln_abs;
        for g in [0.8, 1.0] {
            let p = LqgParams::new(g).unwrap();
            for (b1, b2) in [(0.5, 0.5), (0.1, 0.7)] {
                let b3 = 2.0 * p.q - 2.0 * g - b1 - b2;
                let (a, b, gs) = (1.0 - g * b1 / 2.0, 1.0 - g * b2 / 2.0, -g * g / 4.0);
                let mut l = 0.0;
                for j in 0..2 {
                    let jf = j as f64;
                    l += lg(a + jf * gs) + lg(b + jf * gs) + lg(1.0 + (jf + 1.0) * gs) - lg(a + b + (1.0 + jf) * gs) - lg(1.0 + gs);
                }
                let h = ctx.h_bar(b1, b2, b3, &p).unwrap();
                assert!((h.value - l.exp()).abs() < 1e-9 * l.exp(), "g={g}: {} vs {}", h.value, l.exp());
            }
        }
    }

    #[test]
    fn h_bar_is_one_at_zero_moment_and_symmetric() {
        let ctx = ExactContext::default();
        let p = p1();
        let h = ctx.h_bar(0.4, 0.9, 2.0 * p.q - 1.3, &p).unwrap();
        assert!((h.value - 1.0).abs() < 1e-10, "{}", h.value);
        let a = ctx.h_bar(0.3, 0.8, 2.2, &p).unwrap().value;
        let b = ctx.h_bar(0.8, 0.3, 2.2, &p).unwrap().value;
        assert!((a - b).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn seiberg_flag() {
        let ctx = ExactContext::default();
        let p = p1();
        assert!(ctx.h_bar(0.5, 0.5, 2.0, &p).unwrap().seiberg);
        // β̄ ≤ γ
        assert!(!ctx.h_bar(0.2, 0.2, 0.55, &p).unwrap().seiberg);
        // |β₁ − β₂| ≥ β₃
        assert!(!ctx.h_bar(0.2, 1.4, 1.1, &p).unwrap().seiberg);
        // β₁ ≥ Q
        assert!(!ctx.h_bar(2.6, 0.5, 2.5, &p).unwrap().seiberg);
        assert_eq!(ctx.h_bar(0.2, 0.2, 0.55, &p).unwrap().as_moment(), Exact::Infinite);
    }

    #[test]
    fn reflections() {
        let ctx = ExactContext::default();
        let p = p1();
        for beta in [0.3, 1.2, 2.0, 2.3] {
            let r = ctx.r_bar_reflection_residual(beta, &p).unwrap();
            assert!(r < 1e-8, "beta={beta}: {r:e}");
        }
        let r = ctx.h_bar_reflection_residual(2.2, 2.1, 2.3, &p).unwrap();
        assert!(r < 1e-7, "{r:e}");
        let r = ctx.h_bar_reflection_residual(1.1, p.q, 1.7, &p).unwrap();
        assert!(r < 1e-12, "{r:e}");
    }

    #[test]
    fn disk_density_examples() {
        let ctx = ExactContext::default();
        let p = p1();
        let d = ctx.disk_length_density(2.0, &p).unwrap();
        assert_eq!(d.exponent, -4.0);
        let ratio = d.at(2.0).finite().unwrap() / d.at(1.0).finite().unwrap();
        assert!((ratio - 1.0 / 16.0).abs() < 1e-12);
        assert!(ctx.disk_length_density(p.gamma * p.q, &p).unwrap().infinite);
    }
}
