mod common;

use common::{log_simpson, log_uniform};
use hopflab::{HopfError, ModulusDescriptor as M};
use proptest::prelude::*;

/// Relative slack for the sandwich: the linear family attains both ends exactly.
const SANDWICH_SLACK: f64 = 1e-12;

/// `σ̂(r)` for `LogPower(β)`, `β ≠ 1`: with `u = 1 + ln(1/τ)` the integrand
/// becomes `u^{−β}`.
fn logpower_hat(beta: f64, r: f64) -> f64 {
    let u = 1.0 - r.ln();
    let w = u + std::f64::consts::LN_2;
    2.0 * (w.powf(1.0 - beta) - u.powf(1.0 - beta)) / (1.0 - beta)
}

fn power_hat(alpha: f64, r: f64) -> f64 {
    (2.0 / alpha) * (1.0 - 2f64.powf(-alpha)) * r.powf(alpha)
}

#[test]
fn eval_examples() {
    assert_eq!(M::power(0.5).eval(0.25).unwrap(), 0.5);
    assert_eq!(M::log_power(2.0).eval(1.0).unwrap(), 1.0);
    assert_eq!(M::power(1.0).eval(0.0).unwrap(), 0.0);
    assert_eq!(M::linear(3.0).eval(0.0).unwrap(), 0.0);
    assert_eq!(M::log_power(0.5).eval(0.0).unwrap(), 0.0);
}

#[test]
fn eval_outside_unit_interval_is_a_domain_error() {
    for tau in [-1e-9, 1.0 + 1e-12, f64::NAN] {
        assert!(matches!(M::power(0.5).eval(tau), Err(HopfError::Domain(_))));
    }
}

#[test]
fn smooth_hat_examples() {
    assert!((M::power(1.0).smooth_hat(0.5).unwrap() - 0.5).abs() < 1e-10);
    let v = M::power(0.5).smooth_hat(0.25).unwrap();
    assert!((v - 0.58579).abs() < 1e-5);
    assert!((v - power_hat(0.5, 0.25)).abs() < 1e-10);
    let oracle = 2.0 * log_simpson(|t| t.sqrt(), 0.125, 0.25);
    assert!((v - oracle).abs() < 1e-10);
    // sandwich example
    assert!(0.5 <= v && v <= 2.0 * 0.125f64.sqrt());
    assert!((2.0 * 0.125f64.sqrt() - 0.70711).abs() < 1e-5);
}

#[test]
fn smooth_hat_matches_closed_forms() {
    for r in log_uniform(1e-4, 1.0, 25) {
        let lin = M::linear(2.5).smooth_hat(r).unwrap();
        assert!((lin - 2.5 * r).abs() < 1e-10);
        for beta in [0.5, 2.0, 3.0] {
            let got = M::log_power(beta).smooth_hat(r).unwrap();
            assert!((got - logpower_hat(beta, r)).abs() < 1e-10, "beta={beta} r={r}");
        }
        let scaled = M::scaled(3.0, M::power(0.3)).smooth_hat(r).unwrap();
        assert!((scaled - 3.0 * power_hat(0.3, r)).abs() < 1e-10);
    }
}

#[test]
fn smooth_hat_rejects_nonpositive_radius() {
    assert!(matches!(M::power(0.5).smooth_hat(0.0), Err(HopfError::Domain(_))));
    assert!(matches!(M::power(0.5).smooth_hat(1.5), Err(HopfError::Domain(_))));
}

#[test]
fn sandwich_on_log_uniform_samples() {
    let families = [M::linear(1.0), M::power(0.5), M::log_power(1.0)];
    for sigma in &families {
        for r in log_uniform(1e-4, 1.0, 100) {
            let hat = sigma.smooth_hat(r).unwrap();
            let lo = sigma.value(r);
            let hi = 2.0 * sigma.value(0.5 * r);
            assert!(lo <= hat * (1.0 + SANDWICH_SLACK), "{} r={r}: {lo} > {hat}", sigma.label());
            assert!(hat <= hi * (1.0 + SANDWICH_SLACK), "{} r={r}: {hat} > {hi}", sigma.label());
        }
    }
}

#[test]
fn sandwich_for_fast_logpower_below_decay_threshold() {
    // σ(τ)/τ only decreases on (0, e^{1−β}] when β > 1.
    let sigma = M::log_power(2.0);
    let cap = sigma.decay_threshold();
    assert!((cap - (-1.0f64).exp()).abs() < 1e-15);
    for r in log_uniform(1e-4, cap, 100) {
        let hat = sigma.smooth_hat(r).unwrap();
        assert!(sigma.value(r) <= hat && hat <= 2.0 * sigma.value(0.5 * r));
    }
    // ... and fails at r = 1, where σ̂(1) = 2 ln2/(1 + ln2) < σ(1) = 1.
    let hat1 = sigma.smooth_hat(1.0).unwrap();
    let ln2 = std::f64::consts::LN_2;
    assert!((hat1 - 2.0 * ln2 / (1.0 + ln2)).abs() < 1e-12);
    assert!(hat1 < 1.0);
}

#[test]
fn dini_integral_examples() {
    assert!((M::power(0.5).dini_integral(1.0).unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(M::power(0.5).dini_integral(0.0).unwrap(), 0.0);
    assert_eq!(M::log_power(2.0).dini_integral(0.0).unwrap(), 0.0);
    assert!((M::log_power(2.0).dini_integral(1.0).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn dini_integral_matches_antiderivatives() {
    for s in log_uniform(1e-6, 1.0, 40) {
        for alpha in [0.1, 0.3, 0.5, 1.0] {
            let got = M::power(alpha).dini_integral(s).unwrap();
            assert!((got - s.powf(alpha) / alpha).abs() < 1e-8, "alpha={alpha} s={s}");
        }
        let lin = M::linear(0.7).dini_integral(s).unwrap();
        assert!((lin - 0.7 * s).abs() < 1e-8);
        // ∫₀^s (1 + ln(1/τ))^{−β} dτ/τ = u_s^{1−β}/(β − 1)
        for beta in [1.5, 2.0, 4.0] {
            let u = 1.0 - s.ln();
            let got = M::log_power(beta).dini_integral(s).unwrap();
            assert!((got - u.powf(1.0 - beta) / (beta - 1.0)).abs() < 1e-8, "beta={beta} s={s}");
        }
    }
}

#[test]
fn dini_integral_errors() {
    let e = M::log_power(0.5).dini_integral(0.5).unwrap_err();
    assert!(matches!(e, HopfError::Divergence(_)));
    assert!(e.to_string().contains("non-Dini"));
    assert!(matches!(M::log_power(1.0).dini_integral(0.5), Err(HopfError::Divergence(_))));
    assert!(matches!(M::power(0.5).dini_integral(1.5), Err(HopfError::Domain(_))));
    assert!(matches!(M::power(0.5).dini_integral(-0.1), Err(HopfError::Domain(_))));
}

#[test]
fn dini_classification() {
    assert!(M::power(0.3).is_dini());
    assert!(M::power(1.0).is_dini());
    assert!(M::linear(5.0).is_dini());
    assert!(!M::log_power(0.5).is_dini());
    assert!(!M::log_power(1.0).is_dini());
    assert!(M::log_power(2.0).is_dini());
    assert!(M::log_power(1.0 + 1e-9).is_dini());
    assert!(!M::scaled(2.0, M::log_power(0.9)).is_dini());
    assert!(M::scaled(2.0, M::power(0.9)).is_dini());
}

#[test]
fn derivative_matches_analytic_families() {
    // σ′ for each family against a central difference in ln τ
    for sigma in [M::linear(2.0), M::power(0.4), M::log_power(0.5), M::log_power(3.0)] {
        for tau in log_uniform(1e-3, 0.9, 10) {
            let h = 1e-5 * tau;
            let fd = (sigma.value(tau + h) - sigma.value(tau - h)) / (2.0 * h);
            assert!((sigma.derivative(tau) - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        }
    }
}

#[test]
fn descriptors_validate_parameters() {
    assert!(M::power(0.0).validate().is_err());
    assert!(M::power(1.5).validate().is_err());
    assert!(M::log_power(-1.0).validate().is_err());
    assert!(M::linear(0.0).validate().is_err());
    assert!(M::scaled(-1.0, M::power(0.5)).validate().is_err());
    assert!(M::scaled(1.0, M::power(2.0)).validate().is_err());
    assert!(M::scaled(1.0, M::power(0.5)).validate().is_ok());
}

#[test]
fn json_wire_format() {
    let p: M = serde_json::from_str(r#"{"family":"power","alpha":0.5}"#).unwrap();
    assert_eq!(p, M::power(0.5));
    let l: M = serde_json::from_str(r#"{"family":"logpower","beta":2.0}"#).unwrap();
    assert_eq!(l, M::log_power(2.0));
    let c: M = serde_json::from_str(r#"{"family":"linear","c":1.0}"#).unwrap();
    assert_eq!(c, M::linear(1.0));
    assert_eq!(serde_json::to_string(&M::power(0.5)).unwrap(), r#"{"family":"power","alpha":0.5}"#);
    assert!(serde_json::from_str::<M>(r#"{"family":"sum","alpha":0.5}"#).is_err());
}

fn family() -> impl Strategy<Value = M> {
    prop_oneof![
        (0.05f64..=1.0).prop_map(M::power),
        (0.1f64..1.0).prop_map(M::log_power),
        (0.1f64..10.0).prop_map(M::linear),
        ((0.1f64..5.0), (0.05f64..=1.0)).prop_map(|(c, a)| M::scaled(c, M::power(a))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn modulus_is_nondecreasing_and_ratio_nonincreasing(sigma in family(), a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sigma.value(lo) <= sigma.value(hi));
        prop_assert!(sigma.ratio(hi) <= sigma.ratio(lo) * (1.0 + 1e-14));
        prop_assert_eq!(sigma.value(0.0), 0.0);
    }

    #[test]
    fn sandwich_holds(sigma in family(), lr in -9.2f64..0.0) {
        let r = lr.exp();
        let hat = sigma.smooth_hat(r).unwrap();
        prop_assert!(sigma.value(r) <= hat * (1.0 + SANDWICH_SLACK));
        prop_assert!(hat <= 2.0 * sigma.value(0.5 * r) * (1.0 + SANDWICH_SLACK));
    }

    #[test]
    fn smooth_hat_monotone_on_dyadic_grids(sigma in family(), k0 in 0i32..10) {
        let rs: Vec<f64> = (k0..k0 + 6).map(|k| 0.5f64.powi(k)).collect();
        let hats: Vec<f64> = rs.iter().map(|&r| sigma.smooth_hat(r).unwrap()).collect();
        for w in 0..rs.len() - 1 {
            // rs decreases: σ̂ must not increase, σ̂(r)/r must not decrease
            prop_assert!(hats[w + 1] <= hats[w] * (1.0 + 1e-12));
            prop_assert!(hats[w] / rs[w] <= hats[w + 1] / rs[w + 1] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dini_integral_nondecreasing(alpha in 0.05f64..=1.0, beta in 1.2f64..4.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for sigma in [M::power(alpha), M::log_power(beta)] {
            prop_assert!(sigma.dini_integral(lo).unwrap() <= sigma.dini_integral(hi).unwrap() + 1e-12);
        }
    }

    #[test]
    fn power_dini_integral_closed_form(alpha in 0.05f64..=1.0, s in 0.0f64..=1.0) {
        let got = M::power(alpha).dini_integral(s).unwrap();
        prop_assert!((got - s.powf(alpha) / alpha).abs() < 1e-8);
    }
}
