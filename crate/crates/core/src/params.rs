//! Coupling constants and the conversions between vertex weights `W`,
//! Liouville insertions `β` and SLE force-point weights `ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The coupling bundle. `gamma` is the single source of truth; every other
/// field is derived once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqgParams {
    pub gamma: f64,
    pub kappa: f64,
    pub q: f64,
    pub lambda: f64,
    pub chi: f64,
}

impl LqgParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::domain(format!("gamma = {gamma} must lie in (0, 2)")));
        }
        let kappa = gamma * gamma;
        let sk = gamma;
        Ok(Self {
            gamma,
            kappa,
            q: 2.0 / gamma + gamma / 2.0,
            lambda: std::f64::consts::PI / sk,
            chi: 2.0 / sk - sk / 2.0,
        })
    }

    /// Parameters with `γ = √κ`, for `κ ∈ (0, 4)`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 4.0) {
            return Err(Error::domain(format!("kappa = {kappa} must lie in (0, 4)")));
        }
        Self::new(kappa.sqrt())
    }

    /// Weight at which a vertex switches between thick and thin.
    pub fn critical_weight(&self) -> f64 {
        self.kappa / 2.0
    }
}

/// A vertex weight together with its Liouville insertion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionSpec {
    pub weight: f64,
    pub beta: f64,
    pub thick: bool,
}

impl InsertionSpec {
    pub fn from_weight(weight: f64, p: &LqgParams) -> Result<Self> {
        let beta = weight_to_beta(weight, p)?;
        Ok(Self { weight, beta, thick: weight >= p.critical_weight() })
    }

    /// Insertion of the dual weight `γ² − W`, i.e. `β ↦ 2Q − β`.
    pub fn reflected_beta(&self, p: &LqgParams) -> f64 {
        2.0 * p.q - self.beta
    }
}

/// Three vertex weights of a quantum triangle with their insertions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleWeights {
    pub weights: [f64; 3],
    pub betas: [f64; 3],
    pub beta_bar: f64,
    /// `β̃_i`: `β_i` for thick vertices, `2Q − β_i` for thin ones.
    pub reflected_betas: [f64; 3],
    pub thick: [bool; 3],
}

impl TriangleWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, p: &LqgParams) -> Result<Self> {
        let weights = [w1, w2, w3];
        let mut betas = [0.0; 3];
        let mut reflected_betas = [0.0; 3];
        let mut thick = [true; 3];
        for i in 0..3 {
            let ins = InsertionSpec::from_weight(weights[i], p)?;
            betas[i] = ins.beta;
            thick[i] = ins.thick;
            reflected_betas[i] = if ins.thick { ins.beta } else { ins.reflected_beta(p) };
        }
        Ok(Self { weights, betas, beta_bar: betas.iter().sum(), reflected_betas, thick })
    }

    pub fn all_thick(&self) -> bool {
        self.thick.iter().all(|&t| t)
    }
}

/// Force-point weights of SLE_κ(ρ_−; ρ_+, ρ_1) with force points 0⁻, 0⁺, 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoTriple {
    pub minus: f64,
    pub plus: f64,
    pub one: f64,
}

impl RhoTriple {
    pub fn new(minus: f64, plus: f64, one: f64) -> Self {
        Self { minus, plus, one }
    }

    /// `ρ_− > −2`, `ρ_+ > −2` and `ρ_1 > −2 − ρ_+`.
    pub fn check_admissible(&self) -> Result<()> {
        if !(self.minus > -2.0) {
            return Err(Error::domain(format!("rho_minus = {} must exceed -2", self.minus)));
        }
        if !(self.plus > -2.0) {
            return Err(Error::domain(format!("rho_plus = {} must exceed -2", self.plus)));
        }
        if !(self.one > -2.0 - self.plus) {
            return Err(Error::domain(format!(
                "rho_1 = {} must exceed -2 - rho_plus = {}",
                self.one,
                -2.0 - self.plus
            )));
        }
        Ok(())
    }

    /// Whether the curve a.s. avoids (0, ∞): `ρ_+ ≥ κ/2 − 2` and `ρ_+ + ρ_1 ≥ κ/2 − 2`.
    /// (The left side plays no role for ψ′(1).)
    pub fn non_boundary_hitting(&self, kappa: f64) -> bool {
        let t = kappa / 2.0 - 2.0;
        self.plus >= t && self.plus + self.one >= t
    }
}

/// `β = γ + (2 − W)/γ`.
pub fn weight_to_beta(weight: f64, p: &LqgParams) -> Result<f64> {
    if !(weight > 0.0) {
        return Err(Error::domain(format!("weight W = {weight} must be positive")));
    }
    Ok(p.gamma + (2.0 - weight) / p.gamma)
}

/// Inverse of [`weight_to_beta`]: `W = γ² + 2 − γβ`.
pub fn beta_to_weight(beta: f64, p: &LqgParams) -> f64 {
    p.kappa + 2.0 - p.gamma * beta
}

/// Interface weights `(W − 2, W_2 − 2, W_1 − W_2)`.
pub fn weights_to_rho(w: f64, w1: f64, w2: f64) -> Result<RhoTriple> {
    for (name, v) in [("W", w), ("W1", w1), ("W2", w2)] {
        if !(v > 0.0) {
            return Err(Error::domain(format!("{name} = {v} must be positive")));
        }
    }
    Ok(RhoTriple::new(w - 2.0, w2 - 2.0, w1 - w2))
}

/// `(γ² − γβ_−, γ² − γβ_2, γ(β_2 − β_1))`.
pub fn beta_rho_bridge(beta_minus: f64, beta1: f64, beta2: f64, p: &LqgParams) -> RhoTriple {
    let g = p.gamma;
    RhoTriple::new(p.kappa - g * beta_minus, p.kappa - g * beta2, g * (beta2 - beta1))
}

/// Inverse of [`beta_rho_bridge`]: returns `(β_−, β_1, β_2)`.
pub fn rho_to_betas(rho: &RhoTriple, p: &LqgParams) -> (f64, f64, f64) {
    let g = p.gamma;
    let beta_minus = (p.kappa - rho.minus) / g;
    let beta2 = (p.kappa - rho.plus) / g;
    let beta1 = beta2 - rho.one / g;
    (beta_minus, beta1, beta2)
}

/// Conformal-derivative exponent attached to a welding with weights `(W_1, W_2, W_3)`.
pub fn alpha_exponent(w1: f64, w2: f64, w3: f64, kappa: f64) -> f64 {
    (w3 + w2 - w1 - 2.0) * (w3 + w1 + 2.0 - w2 - kappa) / (4.0 * kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derived_constants() {
        for g in [0.3, 0.8, 1.0, 1.41, 1.9] {
            let p = LqgParams::new(g).unwrap();
            assert!((p.kappa - g * g).abs() <= 1e-14 * p.kappa);
            assert!((p.q - (2.0 / g + g / 2.0)).abs() <= 1e-14 * p.q);
            assert!((g * p.q - (2.0 + g * g / 2.0)).abs() < 1e-14);
            assert!((p.chi - (2.0 / g - g / 2.0)).abs() < 1e-15);
        }
        assert!(LqgParams::new(2.0).is_err());
        assert!(LqgParams::new(0.0).is_err());
        assert!(LqgParams::from_kappa(4.5).is_err());
    }

    #[test]
    fn weight_to_beta_examples() {
        let p = LqgParams::new(1.0).unwrap();
        assert_eq!(weight_to_beta(2.0, &p).unwrap(), 1.0);
        assert!((weight_to_beta(0.5, &p).unwrap() - 2.5).abs() < 1e-15);
        assert!((weight_to_beta(0.5, &p).unwrap() - p.q).abs() < 1e-15);
        let p = LqgParams::new(0.8).unwrap();
        assert!((weight_to_beta(0.64, &p).unwrap() - 2.5).abs() < 1e-14);
        assert!(matches!(weight_to_beta(0.0, &p), Err(Error::Domain(_))));
        assert!(weight_to_beta(-1.0, &p).is_err());
    }

    #[test]
    fn rho_examples() {
        assert_eq!(weights_to_rho(2.0, 2.0, 2.0).unwrap(), RhoTriple::new(0.0, 0.0, 0.0));
        assert_eq!(weights_to_rho(4.0, 3.0, 1.0).unwrap(), RhoTriple::new(2.0, -1.0, 2.0));
        assert_eq!(weights_to_rho(0.5, 1.0, 1.0).unwrap(), RhoTriple::new(-1.5, -1.0, 0.0));
        assert!(weights_to_rho(0.0, 1.0, 1.0).is_err());

        let p = LqgParams::new(1.0).unwrap();
        assert_eq!(beta_rho_bridge(1.0, 1.0, 1.0, &p), RhoTriple::new(0.0, 0.0, 0.0));
        let r = beta_rho_bridge(p.q, 1.0, 1.5, &p);
        assert!((r.minus + 1.5).abs() < 1e-15);
        assert!((r.plus + 0.5).abs() < 1e-15);
        assert!((r.one - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_examples() {
        // W3 = W1 - W2 + 2 kills the first factor.
        assert_eq!(alpha_exponent(3.0, 1.5, 3.5, 2.0), 0.0);
        assert_eq!(alpha_exponent(1.7, 1.7, 2.0, 1.0), 0.0);
        assert!((alpha_exponent(1.0, 2.0, 3.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn thick_flag_and_reflection() {
        let p = LqgParams::new(1.2).unwrap();
        let wc = p.critical_weight();
        assert!(InsertionSpec::from_weight(wc, &p).unwrap().thick);
        assert!(!InsertionSpec::from_weight(wc * (1.0 - 1e-12), &p).unwrap().thick);
        let tw = TriangleWeights::new(1.8, 0.3, 2.5, &p).unwrap();
        for i in 0..3 {
            assert!(tw.reflected_betas[i] <= p.q + 1e-14);
        }
        assert!(!tw.all_thick());
    }

    proptest! {
        #[test]
        fn beta_weight_round_trip(g in 0.05f64..1.99, w in 1e-3f64..50.0) {
            let p = LqgParams::new(g).unwrap();
            let b = weight_to_beta(w, &p).unwrap();
            prop_assert!((beta_to_weight(b, &p) - w).abs() <= 1e-13 * w.max(1.0) * (1.0 + 1.0 / (g * g)));
            let ins = InsertionSpec::from_weight(w, &p).unwrap();
            if (w - p.critical_weight()).abs() > 1e-9 {
                prop_assert_eq!(ins.thick, b <= p.q);
            }
        }

        #[test]
        fn reflection_is_weight_duality(g in 0.1f64..1.99, w in 1e-3f64..3.9) {
            let p = LqgParams::new(g).unwrap();
            prop_assume!(w < p.kappa);
            let b = weight_to_beta(w, &p).unwrap();
            let dual = weight_to_beta(p.kappa - w, &p).unwrap();
            prop_assert!((2.0 * p.q - b - dual).abs() < 1e-13 * (1.0 + 1.0 / g));
        }

        #[test]
        fn bridge_round_trip(g in 0.2f64..1.99, w in 0.1f64..6.0, w1 in 0.1f64..6.0, w2 in 0.1f64..6.0) {
            let p = LqgParams::new(g).unwrap();
            let via_w = weights_to_rho(w, w1, w2).unwrap();
            let bm = weight_to_beta(w, &p).unwrap();
            let b1 = weight_to_beta(w1, &p).unwrap();
            let b2 = weight_to_beta(w2, &p).unwrap();
            let via_b = beta_rho_bridge(bm, b1, b2, &p);
            prop_assert!((via_w.minus - via_b.minus).abs() < 1e-13 * (1.0 + w));
            prop_assert!((via_w.plus - via_b.plus).abs() < 1e-13 * (1.0 + w2));
            prop_assert!((via_w.one - via_b.one).abs() < 1e-13 * (1.0 + w1 + w2));
            let (m, x1, x2) = rho_to_betas(&via_b, &p);
            prop_assert!((m - bm).abs() < 1e-12 && (x1 - b1).abs() < 1e-12 && (x2 - b2).abs() < 1e-12);
        }
    }
}
