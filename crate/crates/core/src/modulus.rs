//! Moduli of continuity.
//!
//! A modulus `σ : [0, 1] → ℝ₊` is increasing with `σ(0) = 0`; it belongs to the
//! Dini class when `σ(τ)/τ` is integrable at the origin. Only parametric
//! families are supported so that every quantity has an analytic cross-check
//! and Dini membership is decided exactly.

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::quadrature::{integrate, integrate_log_tail, Tolerance};

/// Absolute tolerance for the regularized modulus `σ̂`.
pub const SMOOTH_HAT_TOL: f64 = 1e-10;
/// Absolute tolerance for the Dini integral `𝒥_σ`.
pub const DINI_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModulusDescriptor {
    /// `σ(τ) = c·τ`
    Linear { c: f64 },
    /// `σ(τ) = τ^α`, `0 < α ≤ 1`
    Power { alpha: f64 },
    /// `σ(τ) = (1 + ln(1/τ))^{−β}`, `β > 0`
    #[serde(rename = "logpower")]
    LogPower { beta: f64 },
    /// `σ(τ) = c·inner(τ)`
    Scaled { c: f64, inner: Box<ModulusDescriptor> },
}

impl ModulusDescriptor {
    pub fn linear(c: f64) -> Self {
        Self::Linear { c }
    }

    pub fn power(alpha: f64) -> Self {
        Self::Power { alpha }
    }

    pub fn log_power(beta: f64) -> Self {
        Self::LogPower { beta }
    }

    pub fn scaled(c: f64, inner: ModulusDescriptor) -> Self {
        Self::Scaled {
            c,
            inner: Box::new(inner),
        }
    }

    /// Checks the parameter ranges of the family.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear { c } if !(c.is_finite() && *c > 0.0) => Err(HopfError::InvariantViolation(format!(
                "linear modulus needs c > 0, got {c}"
            ))),
            Self::Power { alpha } if !(*alpha > 0.0 && *alpha <= 1.0) => Err(HopfError::InvariantViolation(
                format!("power modulus needs 0 < alpha <= 1, got {alpha}"),
            )),
            Self::LogPower { beta } if !(beta.is_finite() && *beta > 0.0) => Err(
                HopfError::InvariantViolation(format!("logpower modulus needs beta > 0, got {beta}")),
            ),
            Self::Scaled { c, inner } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(HopfError::InvariantViolation(format!(
                        "scaled modulus needs c > 0, got {c}"
                    )));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable label, e.g. `power(0.5)`.
    pub fn label(&self) -> String {
        match self {
            Self::Linear { c } => format!("linear({c})"),
            Self::Power { alpha } => format!("power({alpha})"),
            Self::LogPower { beta } => format!("logpower({beta})"),
            Self::Scaled { c, inner } => format!("{c}*{}", inner.label()),
        }
    }

    /// `σ(τ)` for `τ ∈ [0, 1]`.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(HopfError::Domain(format!("modulus argument {tau} outside [0, 1]")));
        }
        Ok(self.value(tau))
    }

    /// `σ(τ)` without the range check. `σ(τ) = 0` for `τ ≤ 0`.
    pub fn value(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Linear { c } => c * tau,
            Self::Power { alpha } => tau.powf(*alpha),
            Self::LogPower { beta } => (1.0 - tau.ln()).powf(-beta),
            Self::Scaled { c, inner } => c * inner.value(tau),
        }
    }

    /// `σ(τ)/τ` for `τ > 0`.
    pub fn ratio(&self, tau: f64) -> f64 {
        match self {
            Self::Linear { c } => *c,
            Self::Power { alpha } => tau.powf(alpha - 1.0),
            Self::LogPower { .. } => self.value(tau) / tau,
            Self::Scaled { c, inner } => c * inner.ratio(tau),
        }
    }

    /// Analytic derivative `σ′(τ)` for `τ > 0`.
    pub fn derivative(&self, tau: f64) -> f64 {
        match self {
            Self::Linear { c } => *c,
            Self::Power { alpha } => alpha * tau.powf(alpha - 1.0),
            Self::LogPower { beta } => beta * (1.0 - tau.ln()).powf(-beta - 1.0) / tau,
            Self::Scaled { c, inner } => c * inner.derivative(tau),
        }
    }

    /// `σ(τ)` from `ln τ`, finite even when `τ` underflows.
    pub fn value_from_ln(&self, ln_tau: f64) -> f64 {
        match self {
            Self::Linear { c } => c * ln_tau.exp(),
            Self::Power { alpha } => (alpha * ln_tau).exp(),
            Self::LogPower { beta } => (1.0 - ln_tau).powf(-beta),
            Self::Scaled { c, inner } => c * inner.value_from_ln(ln_tau),
        }
    }

    /// `τ·σ′(τ)` from `ln τ`.
    pub fn log_derivative_from_ln(&self, ln_tau: f64) -> f64 {
        match self {
            Self::Linear { c } => c * ln_tau.exp(),
            Self::Power { alpha } => alpha * (alpha * ln_tau).exp(),
            Self::LogPower { beta } => beta * (1.0 - ln_tau).powf(-beta - 1.0),
            Self::Scaled { c, inner } => c * inner.log_derivative_from_ln(ln_tau),
        }
    }

    /// Exact Dini classification: `∫₀¹ σ(τ)/τ dτ < ∞`.
    pub fn is_dini(&self) -> bool {
        match self {
            Self::Linear { .. } | Self::Power { .. } => true,
            Self::LogPower { beta } => *beta > 1.0,
            Self::Scaled { inner, .. } => inner.is_dini(),
        }
    }

    /// Largest `τ*` such that `σ(τ)/τ` is nonincreasing on `(0, τ*]`.
    ///
    /// The logarithmic family with `β > 1` only decays below `e^{1−β}`.
    pub fn decay_threshold(&self) -> f64 {
        match self {
            Self::LogPower { beta } if *beta > 1.0 => (1.0 - beta).exp(),
            Self::Scaled { inner, .. } => inner.decay_threshold(),
            _ => 1.0,
        }
    }

    /// Decay rate of `σ(e^{1−e^v})·e^v` as `v → ∞`; drives the tail mapping in
    /// [`crate::quadrature::integrate_singular_origin`].
    pub fn log_decay_rate(&self) -> f64 {
        match self {
            Self::Linear { .. } | Self::Power { .. } => 1.0,
            Self::LogPower { beta } => (beta - 1.0).max(1e-3),
            Self::Scaled { inner, .. } => inner.log_decay_rate(),
        }
    }

    /// `ln[σ(e^{−u})·du/dv]` with `u = e^v − 1`, evaluated without forming
    /// `e^{−u}` so that slowly decaying tails stay representable.
    fn ln_dini_density(&self, v: f64) -> f64 {
        match self {
            Self::Linear { c } => c.ln() + v - v.exp_m1(),
            Self::Power { alpha } => v - alpha * v.exp_m1(),
            Self::LogPower { beta } => (1.0 - beta) * v,
            Self::Scaled { c, inner } => c.ln() + inner.ln_dini_density(v),
        }
    }

    /// The C¹ regularization `σ̂(r) = 2∫_{r/2}^{r} σ(τ)/τ dτ`, `r ∈ (0, 1]`.
    pub fn smooth_hat(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(HopfError::Domain(format!("smooth_hat needs r in (0, 1], got {r}")));
        }
        let res = integrate(
            |tau| self.ratio(tau),
            0.5 * r,
            r,
            Tolerance::new(SMOOTH_HAT_TOL * 1e-2, 1e-14),
        );
        if !res.converged {
            return Err(HopfError::Quadrature {
                estimate: res.value,
                error: res.error,
            });
        }
        Ok(2.0 * res.value)
    }

    /// The Dini integral `𝒥_σ(s) = ∫₀^s σ(τ)/τ dτ`, `s ∈ [0, 1]`.
    pub fn dini_integral(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(HopfError::Domain(format!("dini_integral needs s in [0, 1], got {s}")));
        }
        if !self.is_dini() {
            return Err(HopfError::Divergence(format!(
                "non-Dini modulus {}: the Dini integral is infinite",
                self.label()
            )));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        // τ = e^{−u}, u = e^v − 1, so τ = s ↔ v0 = ln(1 + ln(1/s)).
        let v0 = (-s.ln()).ln_1p();
        let res = integrate_log_tail(
            |v| self.ln_dini_density(v),
            v0,
            self.log_decay_rate(),
            Tolerance::new(DINI_TOL * 1e-3, 1e-13).with_max_intervals(4000),
        );
        if !res.converged {
            return Err(HopfError::Quadrature {
                estimate: res.value,
                error: res.error,
            });
        }
        Ok(res.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert!((ModulusDescriptor::power(0.5).eval(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ModulusDescriptor::log_power(2.0).eval(1.0).unwrap(), 1.0);
        assert_eq!(ModulusDescriptor::power(1.0).eval(0.0).unwrap(), 0.0);
        assert_eq!(ModulusDescriptor::log_power(2.0).eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_out_of_range() {
        let s = ModulusDescriptor::power(0.5);
        assert!(matches!(s.eval(-0.1), Err(HopfError::Domain(_))));
        assert!(matches!(s.eval(1.5), Err(HopfError::Domain(_))));
    }

    #[test]
    fn smooth_hat_rejects_nonpositive() {
        assert!(matches!(
            ModulusDescriptor::power(0.5).smooth_hat(0.0),
            Err(HopfError::Domain(_))
        ));
    }

    #[test]
    fn dini_classification() {
        assert!(ModulusDescriptor::power(0.3).is_dini());
        assert!(!ModulusDescriptor::log_power(0.5).is_dini());
        assert!(!ModulusDescriptor::log_power(1.0).is_dini());
        assert!(ModulusDescriptor::log_power(2.0).is_dini());
        assert!(ModulusDescriptor::linear(3.0).is_dini());
        assert!(!ModulusDescriptor::scaled(2.0, ModulusDescriptor::log_power(0.9)).is_dini());
    }

    #[test]
    fn non_dini_integral_diverges() {
        let e = ModulusDescriptor::log_power(0.5).dini_integral(0.5).unwrap_err();
        assert!(matches!(e, HopfError::Divergence(_)));
    }

    #[test]
    fn dini_integral_at_zero() {
        for s in [
            ModulusDescriptor::power(0.5),
            ModulusDescriptor::log_power(2.0),
            ModulusDescriptor::linear(2.0),
        ] {
            assert_eq!(s.dini_integral(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn validate_ranges() {
        assert!(ModulusDescriptor::power(1.5).validate().is_err());
        assert!(ModulusDescriptor::power(0.0).validate().is_err());
        assert!(ModulusDescriptor::log_power(-1.0).validate().is_err());
        assert!(ModulusDescriptor::linear(0.0).validate().is_err());
        assert!(ModulusDescriptor::scaled(1.0, ModulusDescriptor::power(2.0)).validate().is_err());
        assert!(ModulusDescriptor::scaled(2.0, ModulusDescriptor::power(0.5)).validate().is_ok());
    }

    #[test]
    fn json_shapes() {
        let s: ModulusDescriptor = serde_json::from_str(r#"{"family":"power","alpha":0.5}"#).unwrap();
        assert_eq!(s, ModulusDescriptor::power(0.5));
        let s: ModulusDescriptor = serde_json::from_str(r#"{"family":"logpower","beta":2.0}"#).unwrap();
        assert_eq!(s, ModulusDescriptor::log_power(2.0));
        let s: ModulusDescriptor = serde_json::from_str(r#"{"family":"linear","c":1.0}"#).unwrap();
        assert_eq!(s, ModulusDescriptor::linear(1.0));
        let json = serde_json::to_string(&ModulusDescriptor::log_power(2.0)).unwrap();
        assert_eq!(json, r#"{"family":"logpower","beta":2.0}"#);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for s in [
            ModulusDescriptor::power(0.3),
            ModulusDescriptor::log_power(1.7),
            ModulusDescriptor::scaled(0.5, ModulusDescriptor::linear(2.0)),
        ] {
            for tau in [0.01, 0.2, 0.9] {
                let h = 1e-6 * tau;
                let fd = (s.value(tau + h) - s.value(tau - h)) / (2.0 * h);
                assert!((fd - s.derivative(tau)).abs() < 1e-6 * fd.abs().max(1.0), "{s:?} {tau}");
            }
        }
    }
}
