//! Drift descriptors and the admissibility functionals `ω`, `ω_p^±`.
//!
//! All functionals are suprema over base points. The supremum is replaced by
//! a maximum over a fixed deterministic sample that is refined geometrically
//! toward the flat boundary, where near-boundary drifts concentrate.
//! Drifts are extended by zero outside the domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::geometry::{DomainModel, ProblemKind};
use crate::modulus::ModulusDescriptor;
use crate::quadrature::{integrate, integrate_with_breaks, QuadResult, Tolerance};

/// Relative tolerance of the outermost quadrature layer.
pub const OMEGA_REL_TOL: f64 = 1e-6;
const INNER_REL_TOL: f64 = 1e-8;
const MIDDLE_REL_TOL: f64 = 1e-7;
/// `e^{−γϱ²}` is below `1e−16` past `ϱ = √(37/γ)`.
const GAUSS_CUTOFF: f64 = 37.0;

/// Default Gaussian decay rate for standalone condition checks.
pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DriftDescriptor {
    Zero,
    /// Constant vector field on the domain.
    Constant { b: Vec<f64> },
    /// `|b| = C·σ(d)/d` along `+e_n`, `d` the (parabolic) distance to the boundary.
    NearBoundary {
        #[serde(rename = "C")]
        c: f64,
        sigma: ModulusDescriptor,
    },
    /// `|b(y)| = C·σ(|y − y₀|)/|y − y₀|` along `+e_n`; its local Lⁿ norms
    /// are controlled by `σ`. The center defaults to `(0, …, 0, R/2)`.
    LnBounded {
        #[serde(rename = "C")]
        c: f64,
        sigma: ModulusDescriptor,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

/// A quadrature node seen by an [`omega_at`] observer.
#[derive(Debug, Clone, Copy)]
pub struct NodeSample<'a> {
    pub y: &'a [f64],
    /// `|x − y|`
    pub dist: f64,
    /// `d(y)`
    pub d: f64,
    /// `|b(y)|`
    pub magnitude: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn ratio_at(sigma: &ModulusDescriptor, d: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else {
        if d <= 1.0 {
            sigma.ratio(d)
        } else {
            sigma.value(1.0) / d
        }
    }
}

impl DriftDescriptor {
    pub fn near_boundary(c: f64, sigma: ModulusDescriptor) -> Self {
        Self::NearBoundary { c, sigma }
    }

    pub fn constant(b: Vec<f64>) -> Self {
        Self::Constant { b }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Constant { b } => format!("constant({b:?})"),
            Self::NearBoundary { c, sigma } => format!("near_boundary({c}, {})", sigma.label()),
            Self::LnBounded { c, sigma, .. } => format!("ln_bounded({c}, {})", sigma.label()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant { b } => b.iter().all(|&c| c == 0.0),
            Self::NearBoundary { c, .. } | Self::LnBounded { c, .. } => *c == 0.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Constant { b } => {
                if b.len() != n {
                    return Err(HopfError::InvariantViolation(format!(
                        "constant drift has {} components, domain dimension is {n}",
                        b.len()
                    )));
                }
                if b.iter().any(|c| !c.is_finite()) {
                    return Err(HopfError::InvariantViolation("constant drift must be finite".into()));
                }
                Ok(())
            }
            Self::NearBoundary { c, sigma } | Self::LnBounded { c, sigma, .. } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(HopfError::InvariantViolation(format!(
                        "drift constant C must be finite and nonnegative, got {c}"
                    )));
                }
                if let Self::LnBounded { center: Some(p), .. } = self {
                    if p.len() != n {
                        return Err(HopfError::InvariantViolation(format!(
                            "drift center has {} components, domain dimension is {n}",
                            p.len()
                        )));
                    }
                }
                sigma.validate()
            }
        }
    }

    /// Same drift with every magnitude multiplied by `k ≥ 0`.
    pub fn scaled(&self, k: f64) -> Self {
        match self {
            Self::Zero => Self::Zero,
            Self::Constant { b } => Self::Constant {
                b: b.iter().map(|c| k * c).collect(),
            },
            Self::NearBoundary { c, sigma } => Self::NearBoundary {
                c: k * c,
                sigma: sigma.clone(),
            },
            Self::LnBounded { c, sigma, center } => Self::LnBounded {
                c: k * c,
                sigma: sigma.clone(),
                center: center.clone(),
            },
        }
    }

    fn center(&self, domain: &DomainModel) -> Vec<f64> {
        match self {
            Self::LnBounded { center: Some(p), .. } => p.clone(),
            _ => {
                let mut p = vec![0.0; domain.n];
                p[domain.n - 1] = 0.5 * domain.radius;
                p
            }
        }
    }

    /// `|b(y)|` on the elliptic half-ball, zero outside.
    pub fn magnitude(&self, y: &[f64], domain: &DomainModel) -> f64 {
        if !domain.contains(y) {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Constant { b } => norm(b),
            Self::NearBoundary { c, sigma } => c * ratio_at(sigma, domain.distance(y)),
            Self::LnBounded { c, sigma, .. } => {
                let p = self.center(domain);
                let dist = y.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                c * ratio_at(sigma, dist)
            }
        }
    }

    /// `|b(y; s)|` on the parabolic half-cylinder, zero outside.
    pub fn magnitude_parabolic(&self, y: &[f64], s: f64, domain: &DomainModel) -> f64 {
        let r2 = domain.radius * domain.radius;
        if !domain.contains(y) || s > 0.0 || s < -r2 {
            return 0.0;
        }
        match self {
            Self::Zero => 0.0,
            Self::Constant { b } => norm(b),
            Self::NearBoundary { c, sigma } => c * ratio_at(sigma, domain.parabolic_distance_formula(y, s)),
            Self::LnBounded { c, sigma, .. } => {
                let p = self.center(domain);
                let dist = y.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                c * ratio_at(sigma, dist)
            }
        }
    }

    /// Drift vector at `y`. Magnitude families point along `+e_n`.
    pub fn vector(&self, y: &[f64], domain: &DomainModel) -> Vec<f64> {
        let n = y.len();
        match self {
            Self::Constant { b } if domain.contains(y) => b.clone(),
            Self::Constant { .. } | Self::Zero => vec![0.0; n],
            _ => {
                let mut v = vec![0.0; n];
                v[n - 1] = self.magnitude(y, domain);
                v
            }
        }
    }
}

/// Deterministic base-point sample for the elliptic functionals: a 14 × 16
/// polar lattice in the half-disc plus 33 points at heights `2^{−k}R`,
/// `k = 1..11`, above `x′ ∈ {0, ±R/3}`. In three dimensions the same points
/// are placed in the `x₂ = 0` cross-section.
pub fn elliptic_base_points(domain: &DomainModel) -> Vec<Vec<f64>> {
    let r = domain.radius;
    let mut planar = Vec::with_capacity(257);
    for i in 0..14 {
        let rad = r * (i as f64 + 0.5) / 14.0;
        for j in 0..16 {
            let th = std::f64::consts::PI * (j as f64 + 0.5) / 16.0;
            planar.push([rad * th.cos(), rad * th.sin()]);
        }
    }
    for k in 1..=11 {
        let h = r * 0.5f64.powi(k);
        for xp in [0.0, -r / 3.0, r / 3.0] {
            planar.push([xp, h]);
        }
    }
    planar
        .into_iter()
        .map(|[a, b]| match domain.n {
            3 => vec![a, 0.0, b],
            _ => vec![a, b],
        })
        .collect()
}

/// Base points `(x; t)` for the parabolic functionals: spatial points (a
/// coarse lattice plus the near-boundary layer) at times `0`, `−R²/2`,
/// `−R²(1 − 2^{−4})`.
pub fn parabolic_base_points(domain: &DomainModel) -> Vec<(Vec<f64>, f64)> {
    let r = domain.radius;
    let mut spatial: Vec<Vec<f64>> = Vec::new();
    match domain.n {
        1 => {
            for i in 0..14 {
                spatial.push(vec![r * (i as f64 + 0.5) / 14.0]);
            }
            for k in 1..=11 {
                spatial.push(vec![r * 0.5f64.powi(k)]);
            }
        }
        _ => {
            for i in 0..7 {
                let rad = r * (i as f64 + 0.5) / 7.0;
                for j in 0..8 {
                    let th = std::f64::consts::PI * (j as f64 + 0.5) / 8.0;
                    spatial.push(vec![rad * th.cos(), rad * th.sin()]);
                }
            }
            for k in 1..=11 {
                let h = r * 0.5f64.powi(k);
                for xp in [0.0, -r / 3.0, r / 3.0] {
                    spatial.push(vec![xp, h]);
                }
            }
        }
    }
    let times = [0.0, -0.5 * r * r, -r * r * (1.0 - 1.0 / 16.0)];
    let mut out = Vec::with_capacity(spatial.len() * times.len());
    for t in times {
        for x in &spatial {
            out.push((x.clone(), t));
        }
    }
    out
}

/// Distance from `x` (inside the half-ball) along unit direction `e` to the
/// boundary of the half-ball.
fn ray_exit(domain: &DomainModel, x: &[f64], e: &[f64]) -> f64 {
    let n = x.len();
    let xe: f64 = x.iter().zip(e).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|a| a * a).sum();
    let disc = (xe * xe - xx + domain.radius * domain.radius).max(0.0);
    let sphere = -xe + disc.sqrt();
    let flat = if e[n - 1] < 0.0 {
        x[n - 1] / -e[n - 1]
    } else {
        f64::INFINITY
    };
    sphere.min(flat).max(0.0)
}

fn finish(res: QuadResult, what: &str) -> Result<f64> {
    if !res.value.is_finite() {
        return Err(HopfError::Divergence(format!("{what}: integrand is not integrable")));
    }
    if !res.converged {
        return Err(HopfError::Quadrature {
            estimate: res.value,
            error: res.error,
        });
    }
    Ok(res.value)
}

/// Integral over all unit directions (`n = 2`: circle, `n = 3`: sphere) of
/// `f(e)`, relative tolerance `rel` on the outer layer.
fn integrate_directions<F: Fn(&[f64]) -> f64>(n: usize, f: F, rel: f64) -> QuadResult {
    let two_pi = 2.0 * std::f64::consts::PI;
    match n {
        2 => {
            let g = |th: f64| f(&[th.sin(), -th.cos()]);
            integrate_with_breaks(
                g,
                &[0.0, 0.25 * two_pi, 0.5 * two_pi, 0.75 * two_pi, two_pi],
                Tolerance::new(0.0, rel),
            )
        }
        3 => {
            let outer = |th: f64| {
                let (st, ct) = th.sin_cos();
                let inner = |ph: f64| {
                    let (sp, cp) = ph.sin_cos();
                    f(&[st * cp, st * sp, ct])
                };
                st * integrate(inner, 0.0, two_pi, Tolerance::new(0.0, 0.01 * rel)).value
            };
            integrate_with_breaks(outer, &[0.0, 0.5 * std::f64::consts::PI, std::f64::consts::PI], Tolerance::new(0.0, rel))
        }
        _ => QuadResult {
            value: f64::NAN,
            error: f64::INFINITY,
            evaluations: 0,
            converged: false,
        },
    }
}

/// The integral defining `ω(r)` at the base point `x`.
///
/// With `weighted = false` the factor `d(y)/(d(y) + |x − y|)` is dropped.
/// The observer, if any, sees every radial quadrature node.
pub fn omega_at(
    b: &DriftDescriptor,
    domain: &DomainModel,
    x: &[f64],
    r: f64,
    weighted: bool,
    observer: Option<&dyn Fn(NodeSample<'_>)>,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(HopfError::Domain(format!("omega needs r > 0, got {r}")));
    }
    if !domain.contains(x) || x.len() != domain.n {
        return Err(HopfError::Domain(format!("base point {x:?} lies outside the domain")));
    }
    if b.is_zero() {
        return Ok(0.0);
    }
    let n = domain.n;
    // Polar coordinates about x: |x − y|^{1−n} cancels the Jacobian ρ^{n−1}.
    let ray = |e: &[f64]| {
        let rmax = r.min(ray_exit(domain, x, e));
        if rmax <= 0.0 {
            return 0.0;
        }
        let g = |rho: f64| {
            let y: Vec<f64> = x.iter().zip(e).map(|(a, c)| a + rho * c).collect();
            let m = b.magnitude(&y, domain);
            if m == 0.0 {
                return 0.0;
            }
            let d = domain.distance(&y);
            if let Some(obs) = observer {
                obs(NodeSample {
                    y: &y,
                    dist: rho,
                    d,
                    magnitude: m,
                });
            }
            if weighted {
                m * d / (d + rho)
            } else {
                m
            }
        };
        integrate(g, 0.0, rmax, Tolerance::new(0.0, INNER_REL_TOL)).value
    };
    finish(integrate_directions(n, ray, OMEGA_REL_TOL), "omega")
}

fn sup_over<F>(points: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let values: Vec<Result<f64>> = (0..points).into_par_iter().map(f).collect();
    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}

/// `ω(r)`: maximum of [`omega_at`] over [`elliptic_base_points`].
pub fn omega(b: &DriftDescriptor, domain: &DomainModel, r: f64) -> Result<f64> {
    omega_with(b, domain, r, true)
}

/// [`omega`] with the choice of keeping the `d`-weight.
pub fn omega_with(b: &DriftDescriptor, domain: &DomainModel, r: f64, weighted: bool) -> Result<f64> {
    domain.validate()?;
    if domain.kind != ProblemKind::Elliptic {
        return Err(HopfError::Domain("omega needs an elliptic domain".into()));
    }
    if !(r > 0.0 && r <= 2.0 * domain.radius) {
        return Err(HopfError::Domain(format!("omega needs 0 < r <= 2R, got {r}")));
    }
    b.validate(domain.n)?;
    if b.is_zero() {
        return Ok(0.0);
    }
    let pts = elliptic_base_points(domain);
    sup_over(pts.len(), |i| omega_at(b, domain, &pts[i], r, weighted, None))
}

/// The integral defining `ω_p^∓(r)` at the base point `(x; t)`.
///
/// Uses `ϱ = |x − y|/√|t − s|`, `τ = √(|x − y|² + |t − s|)`, in which the
/// measure becomes `2 e^{−γϱ²} ϱ^{n−1} (1 + ϱ²)^{−1/2} dϱ dτ dθ` over
/// `τ ∈ (0, r√2)`; for `τ > r` the cylinder restricts `ϱ` to `[a, 1/a]`,
/// `a = √(τ² − r²)/r`.
pub fn omega_parabolic_at(
    b: &DriftDescriptor,
    domain: &DomainModel,
    x: &[f64],
    t: f64,
    r: f64,
    gamma: f64,
    side: Side,
    weighted: bool,
) -> Result<f64> {
    if !(r > 0.0) {
        return Err(HopfError::Domain(format!("omega_parabolic needs r > 0, got {r}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HopfError::InvariantViolation(format!("gamma must be positive, got {gamma}")));
    }
    if b.is_zero() {
        return Ok(0.0);
    }
    let n = domain.n;
    let rho_cut = (GAUSS_CUTOFF / gamma).sqrt();
    let sign = match side {
        Side::Minus => -1.0,
        Side::Plus => 1.0,
    };
    // Integrand at fixed (τ, ϱ) and direction e, without the Gaussian weight.
    let point_value = |tau: f64, q: f64, e: &[f64]| {
        let den = (1.0 + q * q).sqrt();
        let z = q * tau / den;
        let u = tau * tau / (1.0 + q * q);
        let s = t + sign * u;
        let y: Vec<f64> = x.iter().zip(e).map(|(a, c)| a + z * c).collect();
        let m = b.magnitude_parabolic(&y, s, domain);
        if m == 0.0 {
            return 0.0;
        }
        if weighted {
            let dp = domain.parabolic_distance_formula(&y, s);
            m * dp / (dp + tau)
        } else {
            m
        }
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let over_directions = |tau: f64, q: f64| -> f64 {
        match n {
            1 => point_value(tau, q, &[1.0]) + point_value(tau, q, &[-1.0]),
            _ => {
                let g = |th: f64| point_value(tau, q, &[th.cos(), th.sin()]);
                integrate(g, 0.0, two_pi, Tolerance::new(0.0, INNER_REL_TOL)).value
            }
        }
    };
    let tau_integrand = |tau: f64| -> f64 {
        let (lo, hi) = if tau <= r {
            (0.0, rho_cut)
        } else {
            let a = (tau * tau - r * r).sqrt() / r;
            (a, (1.0 / a).min(rho_cut))
        };
        if hi <= lo {
            return 0.0;
        }
        let g = |q: f64| {
            let w = 2.0 * (-gamma * q * q).exp() * q.powi(n as i32 - 1) / (1.0 + q * q).sqrt();
            if w == 0.0 {
                0.0
            } else {
                w * over_directions(tau, q)
            }
        };
        integrate(g, lo, hi, Tolerance::new(0.0, MIDDLE_REL_TOL)).value
    };
    let res = integrate_with_breaks(
        tau_integrand,
        &[0.0, r, r * std::f64::consts::SQRT_2],
        Tolerance::new(0.0, OMEGA_REL_TOL),
    );
    finish(res, "omega_parabolic")
}

/// `ω_p^−(r)` or `ω_p^+(r)`: maximum of [`omega_parabolic_at`] over
/// [`parabolic_base_points`].
pub fn omega_parabolic(b: &DriftDescriptor, domain: &DomainModel, r: f64, gamma: f64, side: Side) -> Result<f64> {
    domain.validate()?;
    if domain.kind != ProblemKind::Parabolic {
        return Err(HopfError::Domain("omega_parabolic needs a parabolic domain".into()));
    }
    if !(r > 0.0 && r <= 2.0 * domain.radius) {
        return Err(HopfError::Domain(format!("omega_parabolic needs 0 < r <= 2R, got {r}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HopfError::InvariantViolation(format!("gamma must be positive, got {gamma}")));
    }
    b.validate(domain.n)?;
    if b.is_zero() {
        return Ok(0.0);
    }
    let pts = parabolic_base_points(domain);
    sup_over(pts.len(), |i| {
        omega_parabolic_at(b, domain, &pts[i].0, pts[i].1, r, gamma, side, true)
    })
}

/// `(∫_{B_ρ(x)∩Ω} |b|ⁿ dy)^{1/n}` at one base point.
pub fn local_ln_norm_at(b: &DriftDescriptor, domain: &DomainModel, x: &[f64], rho: f64) -> Result<f64> {
    if b.is_zero() {
        return Ok(0.0);
    }
    let n = domain.n;
    let ray = |e: &[f64]| {
        let rmax = rho.min(ray_exit(domain, x, e));
        if rmax <= 0.0 {
            return 0.0;
        }
        let g = |s: f64| {
            let y: Vec<f64> = x.iter().zip(e).map(|(a, c)| a + s * c).collect();
            b.magnitude(&y, domain).powi(n as i32) * s.powi(n as i32 - 1)
        };
        integrate(g, 0.0, rmax, Tolerance::new(0.0, INNER_REL_TOL)).value
    };
    let v = finish(integrate_directions(n, ray, OMEGA_REL_TOL), "local_ln_norm")?;
    Ok(v.powf(1.0 / n as f64))
}

/// `sup_x ‖b‖_{Lⁿ(B_ρ(x)∩Ω)}` over [`elliptic_base_points`].
pub fn local_ln_norm(b: &DriftDescriptor, domain: &DomainModel, rho: f64) -> Result<f64> {
    domain.validate()?;
    if !(rho > 0.0 && rho <= domain.radius) {
        return Err(HopfError::Domain(format!("local_ln_norm needs 0 < rho <= R, got {rho}")));
    }
    b.validate(domain.n)?;
    let pts = elliptic_base_points(domain);
    sup_over(pts.len(), |i| local_ln_norm_at(b, domain, &pts[i], rho))
}

/// Shell integral `Φ_k = ∫_{Q^k∖Q^{k+1}} exp(−γ(n+1)/n·|y|²/(−s)) (−s)^{−(n+1)²/(2n)} dy ds`,
/// `Q^k = B_{r/2^k} × (−(r/2^k)², 0)`.
pub fn phi_k(gamma: f64, r: f64, k: u32, n: usize) -> Result<f64> {
    if !(r > 0.0) {
        return Err(HopfError::Domain(format!("phi_k needs r > 0, got {r}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HopfError::InvariantViolation(format!("gamma must be positive, got {gamma}")));
    }
    let sphere = match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => return Err(HopfError::Domain(format!("phi_k supports n in 1..=3, got {n}"))),
    };
    let nf = n as f64;
    let c = gamma * (nf + 1.0) / nf;
    let p = (nf + 1.0) * (nf + 1.0) / (2.0 * nf);
    let rk = r * 0.5f64.powi(k as i32);
    let rk1 = 0.5 * rk;
    let tol_in = Tolerance::new(0.0, 1e-11);
    let tol_out = Tolerance::new(0.0, 1e-9);
    let kernel = |rho: f64, u: f64| (-c * rho * rho / u).exp() * u.powf(-p);
    // Part A: rk1 <= |y| < rk, 0 < −s < rk²; the Gaussian kills s → 0.
    let part_a = integrate(
        |rho: f64| {
            rho.powi(n as i32 - 1) * integrate(|u| kernel(rho, u), 0.0, rk * rk, tol_in).value
        },
        rk1,
        rk,
        tol_out,
    );
    // Part B: |y| < rk1, rk1² <= −s < rk².
    let part_b = integrate(
        |rho: f64| {
            rho.powi(n as i32 - 1) * integrate(|u| kernel(rho, u), rk1 * rk1, rk * rk, tol_in).value
        },
        0.0,
        rk1,
        tol_out,
    );
    let v = finish(part_a, "phi_k")? + finish(part_b, "phi_k")?;
    Ok(sphere * v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub r: f64,
    pub omega: f64,
    pub bound_rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    /// Which functional was measured: `omega` or `omega_p_minus`.
    pub functional: String,
    /// Right-hand side used: `J(r)`, `J(2r)` or `J(r*sqrt2)`.
    pub rhs: String,
    pub rows: Vec<ConditionRow>,
    pub c_fit: f64,
    pub median_ratio: f64,
    /// All ratios lie within a factor 3 of their median.
    pub verdict: bool,
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Whether every value lies within `factor` of the median.
pub fn within_factor_of_median(values: &[f64], factor: f64) -> bool {
    let med = median(values);
    if med == 0.0 {
        return values.iter().all(|&v| v == 0.0);
    }
    values.iter().all(|&v| v / med <= factor && med / v <= factor)
}

/// Measures `ω` (elliptic) or `ω_p^−` (parabolic) on `r_grid` and compares
/// it with the Dini-integral bound matching the drift family.
pub fn check_sufficiency(
    b: &DriftDescriptor,
    sigma: &ModulusDescriptor,
    domain: &DomainModel,
    r_grid: &[f64],
    gamma: f64,
) -> Result<SufficiencyReport> {
    domain.validate()?;
    sigma.validate()?;
    b.validate(domain.n)?;
    let sqrt2 = std::f64::consts::SQRT_2;
    let (rhs_label, scale): (&str, f64) = match (domain.kind, b) {
        (_, DriftDescriptor::Constant { .. }) => {
            return Err(HopfError::UnsupportedFamily(
                "constant drift is not one of the sufficient-condition families".into(),
            ))
        }
        (ProblemKind::Parabolic, DriftDescriptor::LnBounded { .. }) => {
            return Err(HopfError::UnsupportedFamily(
                "ln_bounded drift is only checked on elliptic domains".into(),
            ))
        }
        (ProblemKind::Elliptic, DriftDescriptor::LnBounded { .. }) => ("J(2r)", 2.0),
        (ProblemKind::Elliptic, _) => ("J(r)", 1.0),
        (ProblemKind::Parabolic, _) => ("J(r*sqrt2)", sqrt2),
    };
    // The Dini integral comes first: a non-Dini modulus fails before any
    // expensive quadrature.
    let mut rhs = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(r > 0.0 && r * scale <= 1.0) {
            return Err(HopfError::Domain(format!(
                "grid value r = {r} puts the bound argument outside (0, 1]"
            )));
        }
        rhs.push(sigma.dini_integral(r * scale)?);
    }
    let functional = match domain.kind {
        ProblemKind::Elliptic => "omega",
        ProblemKind::Parabolic => "omega_p_minus",
    };
    let mut rows = Vec::with_capacity(r_grid.len());
    for (&r, &j) in r_grid.iter().zip(&rhs) {
        let w = match (b, domain.kind) {
            (DriftDescriptor::Zero, _) => 0.0,
            (_, ProblemKind::Elliptic) => omega(b, domain, r)?,
            (_, ProblemKind::Parabolic) => omega_parabolic(b, domain, r, gamma, Side::Minus)?,
        };
        rows.push(ConditionRow {
            r,
            omega: w,
            bound_rhs: j,
            ratio: w / j,
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|row| row.ratio).collect();
    let c_fit = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(SufficiencyReport {
        functional: functional.into(),
        rhs: rhs_label.into(),
        median_ratio: median(&ratios),
        verdict: within_factor_of_median(&ratios, 3.0),
        c_fit,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_has_257_points_inside() {
        let d = DomainModel::elliptic(2, 1.0);
        let pts = elliptic_base_points(&d);
        assert_eq!(pts.len(), 257);
        assert!(pts.iter().all(|p| d.contains(p) && d.distance(p) > 0.0));
        let d3 = DomainModel::elliptic(3, 1.0);
        assert!(elliptic_base_points(&d3).iter().all(|p| p.len() == 3 && d3.contains(p)));
    }

    #[test]
    fn ray_exit_flat_and_sphere() {
        let d = DomainModel::elliptic(2, 1.0);
        assert!((ray_exit(&d, &[0.0, 0.25], &[0.0, -1.0]) - 0.25).abs() < 1e-15);
        assert!((ray_exit(&d, &[0.0, 0.25], &[0.0, 1.0]) - 0.75).abs() < 1e-15);
        assert!((ray_exit(&d, &[0.0, 0.5], &[1.0, 0.0]) - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_drift_is_zero() {
        let d = DomainModel::elliptic(2, 1.0);
        assert_eq!(omega(&DriftDescriptor::Zero, &d, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn constant_drift_unweighted_disc() {
        let d = DomainModel::elliptic(2, 1.0);
        let b = DriftDescriptor::constant(vec![0.0, 1.0]);
        let r = 0.05;
        let v = omega_at(&b, &d, &[0.0, 0.5], r, false, None).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI * r).abs() < 1e-9 * v, "{v}");
        let d3 = DomainModel::elliptic(3, 1.0);
        let b3 = DriftDescriptor::constant(vec![0.0, 0.0, 1.0]);
        let v3 = omega_at(&b3, &d3, &[0.0, 0.0, 0.5], r, false, None).unwrap();
        assert!((v3 - 4.0 * std::f64::consts::PI * r).abs() < 1e-6 * v3, "{v3}");
    }

    #[test]
    fn omega_rejects_bad_radius() {
        let d = DomainModel::elliptic(2, 1.0);
        let b = DriftDescriptor::constant(vec![0.0, 1.0]);
        assert!(matches!(omega(&b, &d, 0.0), Err(HopfError::Domain(_))));
        assert!(matches!(omega(&b, &d, 2.5), Err(HopfError::Domain(_))));
    }

    #[test]
    fn ln_norm_constant() {
        let d = DomainModel::elliptic(2, 1.0);
        let b = DriftDescriptor::constant(vec![1.0, 0.0]);
        let rho = 0.1;
        let v = local_ln_norm(&b, &d, rho).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() * rho).abs() < 1e-8, "{v}");
    }

    #[test]
    fn phi_k_scaling_and_gamma() {
        let a = phi_k(1.0, 0.5, 1, 2).unwrap();
        let b = phi_k(1.0, 1.0, 2, 2).unwrap();
        assert!((a - b).abs() < 1e-8 * a, "{a} {b}");
        assert!(phi_k(4.0, 0.5, 1, 2).unwrap() < a);
    }

    #[test]
    fn sufficiency_rejects_constant() {
        let d = DomainModel::elliptic(2, 1.0);
        let e = check_sufficiency(
            &DriftDescriptor::constant(vec![0.0, 1.0]),
            &ModulusDescriptor::power(0.5),
            &d,
            &[0.25],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(e, HopfError::UnsupportedFamily(_)));
    }

    #[test]
    fn drift_json_shape() {
        let b: DriftDescriptor =
            serde_json::from_str(r#"{"family":"near_boundary","C":1.0,"sigma":{"family":"power","alpha":0.5}}"#)
                .unwrap();
        assert_eq!(b, DriftDescriptor::near_boundary(1.0, ModulusDescriptor::power(0.5)));
        let z: DriftDescriptor = serde_json::from_str(r#"{"family":"zero"}"#).unwrap();
        assert_eq!(z, DriftDescriptor::Zero);
    }

    #[test]
    fn median_and_factor() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!(within_factor_of_median(&[1.0, 2.0, 2.5], 3.0));
        assert!(!within_factor_of_median(&[1.0, 2.0, 7.0], 3.0));
    }
}
