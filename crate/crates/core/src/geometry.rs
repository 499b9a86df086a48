//! Local boundary models.
//!
//! Near the boundary point (placed at the origin) the domain lies above the
//! extremal paraboloid `x_n = |x′|·σ(|x′|)` (elliptic) or
//! `x_n = √(|x′|² − t)·σ(√(|x′|² − t))` (parabolic, `t ≤ 0`). Flattening
//! shifts `x_n` by that height and leaves `x′` and `t` untouched. After
//! flattening the domain is the half-ball `B_R ∩ {x_n > 0}` or the
//! half-cylinder `Q_R ∩ {x_n > 0}`, `Q_R = B_R × (−R², 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::modulus::ModulusDescriptor;
use crate::quadrature::{integrate, integrate_singular_origin, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaboloidBoundary {
    pub sigma: ModulusDescriptor,
    #[serde(rename = "R")]
    pub radius: f64,
    pub kind: ProblemKind,
}

/// Flattened local domain: half-ball (elliptic) or half-cylinder (parabolic).
///
/// `n` is the spatial dimension: 2 or 3 for elliptic, 1 or 2 for parabolic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    pub kind: ProblemKind,
    pub n: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ModulusDescriptor>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

impl ParaboloidBoundary {
    pub fn new(sigma: ModulusDescriptor, radius: f64, kind: ProblemKind) -> Result<Self> {
        sigma.validate()?;
        if !(radius > 0.0 && radius <= 1.0) {
            return Err(HopfError::InvariantViolation(format!(
                "neighborhood radius must lie in (0, 1], got {radius}"
            )));
        }
        Ok(Self { sigma, radius, kind })
    }

    /// Height `F(x′)` or `𝒫(x′; t)` of the extremal paraboloid.
    pub fn boundary_height(&self, x_prime: &[f64], t: Option<f64>) -> Result<f64> {
        let tau = self.paraboloid_radius(x_prime, t)?;
        Ok(tau * self.sigma.value(tau))
    }

    /// `|x′|` (elliptic) or `√(|x′|² − t)` (parabolic), with range checks.
    fn paraboloid_radius(&self, x_prime: &[f64], t: Option<f64>) -> Result<f64> {
        let r2: f64 = x_prime.iter().map(|c| c * c).sum();
        let tau = match (self.kind, t) {
            (ProblemKind::Elliptic, None) => r2.sqrt(),
            (ProblemKind::Parabolic, Some(t)) => {
                if t > 0.0 {
                    return Err(HopfError::Domain(format!("parabolic paraboloid needs t <= 0, got {t}")));
                }
                (r2 - t).sqrt()
            }
            (ProblemKind::Elliptic, Some(_)) => {
                return Err(HopfError::Domain("elliptic boundary takes no time argument".into()))
            }
            (ProblemKind::Parabolic, None) => {
                return Err(HopfError::Domain("parabolic boundary needs a time argument".into()))
            }
        };
        if tau > self.radius {
            return Err(HopfError::Domain(format!(
                "point at paraboloid radius {tau} lies outside the neighborhood of radius {}",
                self.radius
            )));
        }
        Ok(tau)
    }

    /// Flattened coordinates: `x̃′ = x′`, `x̃_n = x_n − height`, time unchanged.
    pub fn flatten(&self, x: &[f64], t: Option<f64>) -> Result<Vec<f64>> {
        let (last, prime) = x
            .split_last()
            .ok_or_else(|| HopfError::Domain("empty point".into()))?;
        let h = self.boundary_height(prime, t)?;
        let mut out = x.to_vec();
        out[prime.len()] = last - h;
        Ok(out)
    }

    /// Inverse of [`ParaboloidBoundary::flatten`].
    pub fn unflatten(&self, x: &[f64], t: Option<f64>) -> Result<Vec<f64>> {
        let (last, prime) = x
            .split_last()
            .ok_or_else(|| HopfError::Domain("empty point".into()))?;
        let h = self.boundary_height(prime, t)?;
        let mut out = x.to_vec();
        out[prime.len()] = last + h;
        Ok(out)
    }
}

/// Pointwise bound `σ(τ)/τ + σ′(τ)` on the drift generated by flattening the
/// parabolic paraboloid, with `τ = √(|x′|² − t)`.
///
/// Returns `+∞` at `τ = 0` unless the family is Lipschitz there.
pub fn flatten_drift_bound(sigma: &ModulusDescriptor, x_prime: &[f64], t: f64) -> Result<f64> {
    if t > 0.0 {
        return Err(HopfError::Domain(format!("flattening drift needs t <= 0, got {t}")));
    }
    let tau = (x_prime.iter().map(|c| c * c).sum::<f64>() - t).sqrt();
    if tau > 1.0 {
        return Err(HopfError::Domain(format!("paraboloid radius {tau} outside (0, 1]")));
    }
    Ok(drift_bound_at(sigma, tau))
}

pub(crate) fn drift_bound_at(sigma: &ModulusDescriptor, tau: f64) -> f64 {
    if tau == 0.0 {
        return match sigma {
            ModulusDescriptor::Linear { c } => 2.0 * c,
            ModulusDescriptor::Power { alpha } if *alpha == 1.0 => 2.0,
            ModulusDescriptor::Scaled { c, inner } => c * drift_bound_at(inner, 0.0),
            _ => f64::INFINITY,
        };
    }
    sigma.ratio(tau) + sigma.derivative(tau)
}

impl DomainModel {
    pub fn elliptic(n: usize, radius: f64) -> Self {
        Self {
            kind: ProblemKind::Elliptic,
            n,
            radius,
            sigma: None,
        }
    }

    pub fn parabolic(n: usize, radius: f64) -> Self {
        Self {
            kind: ProblemKind::Parabolic,
            n,
            radius,
            sigma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_dim = match self.kind {
            ProblemKind::Elliptic => matches!(self.n, 2 | 3),
            ProblemKind::Parabolic => matches!(self.n, 1 | 2),
        };
        if !ok_dim {
            return Err(HopfError::InvariantViolation(format!(
                "unsupported dimension n = {} for {:?} domain",
                self.n, self.kind
            )));
        }
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(HopfError::InvariantViolation(format!(
                "domain radius must lie in (0, 1], got {}",
                self.radius
            )));
        }
        if let Some(s) = &self.sigma {
            s.validate()?;
        }
        Ok(())
    }

    /// Whether `x` lies in the closed half-ball.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && x[self.n - 1] >= 0.0 && norm(x) <= self.radius
    }

    /// Euclidean distance `d(x)` to the boundary of the half-ball; negative outside.
    pub fn distance(&self, x: &[f64]) -> f64 {
        (x[self.n - 1]).min(self.radius - norm(x))
    }

    /// Closed-form parabolic distance `min(x_n, √(t + R²), R − |x|)` on the half-cylinder.
    pub fn parabolic_distance_formula(&self, x: &[f64], t: f64) -> f64 {
        let bottom = (t + self.radius * self.radius).max(0.0).sqrt();
        x[self.n - 1].min(bottom).min(self.radius - norm(x))
    }

    fn check_in_cylinder(&self, x: &[f64], t: f64) -> Result<()> {
        let r2 = self.radius * self.radius;
        if x.len() != self.n {
            return Err(HopfError::Domain(format!("expected {} spatial coordinates", self.n)));
        }
        if !(x[self.n - 1] >= 0.0 && norm(x) <= self.radius && t <= 0.0 && t >= -r2) {
            return Err(HopfError::Domain(format!(
                "point ({x:?}; {t}) lies outside the closed half-cylinder"
            )));
        }
        Ok(())
    }

    /// Whether the open backward cylinder `Q_ρ(x; t)` meets the parabolic
    /// boundary (flat face, bottom, lateral sphere) of the half-cylinder.
    pub fn backward_cylinder_meets_boundary(&self, x: &[f64], t: f64, rho: f64) -> bool {
        let r = self.radius;
        // All three faces live at times in [−R², 0]; (t − ρ², t) only reaches
        // them when t > −R².
        if t <= -r * r {
            return false;
        }
        let flat = x[self.n - 1] < rho;
        let bottom = t - rho * rho < -r * r;
        let lateral = norm(x) + rho > r;
        flat || bottom || lateral
    }

    /// Parabolic distance `d_p(x; t) = sup{ρ : Q_ρ(x; t) ∩ ∂′Q = ∅}` by
    /// bisection on the intersection predicate (50 steps).
    pub fn parabolic_distance(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_in_cylinder(x, t)?;
        let r = self.radius;
        if x[self.n - 1] == 0.0 || norm(x) >= r || t <= -r * r {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, 2.0 * r);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.backward_cylinder_meets_boundary(x, t, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Drift-functional integral generated by flattening, evaluated at the
/// boundary point `(0; 0)` without the constant:
///
/// `∫_{Q_r ∩ {y_n > 0}} exp(−γ|y|²/(−s)) (−s)^{−(n+1)/2} (σ(τ)/τ + σ′(τ)) dy ds`,
/// `τ = √(|y′|² − s)`, for spatial dimension `n ∈ {1, 2}`.
///
/// The `y_n` integral is done in closed form (error function); the rest uses
/// `ϱ = |y′|/√(−s)` and `τ`.
pub fn flattening_drift_integral(sigma: &ModulusDescriptor, r: f64, gamma: f64, n: usize) -> Result<f64> {
    if !(r > 0.0 && r * std::f64::consts::SQRT_2 <= 1.0) {
        return Err(HopfError::Domain(format!("need 0 < r·√2 <= 1, got r = {r}")));
    }
    if !(gamma > 0.0) {
        return Err(HopfError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let tol = Tolerance::new(1e-13, 1e-9);
    let pi = std::f64::consts::PI;
    let sg = gamma.sqrt();
    let decay = sigma.log_decay_rate();
    let f = |tau: f64| drift_bound_at(sigma, tau);
    // τ·(σ(τ)/τ + σ′(τ)) as a function of ln τ
    let tf = |l: f64| sigma.value_from_ln(l) + sigma.log_derivative_from_ln(l);
    match n {
        1 => {
            let g = |l: f64| tf(l) * libm::erf(r * sg / l.exp());
            let res = integrate_singular_origin(g, r, decay, tol);
            Ok((pi / gamma).sqrt() * res.value)
        }
        2 => {
            let rho_max = (40.0 / gamma).sqrt();
            let kernel = |tau: f64| {
                let (lo, hi) = if tau <= r {
                    (0.0, rho_max)
                } else {
                    let a = (tau * tau - r * r).sqrt() / r;
                    (a, (1.0 / a).min(rho_max))
                };
                if hi <= lo {
                    return 0.0;
                }
                let inner = |q: f64| {
                    let arg = (r * r * (1.0 + q * q) - q * q * tau * tau).max(0.0).sqrt() * sg / tau;
                    (-gamma * q * q).exp() / (1.0 + q * q).sqrt() * libm::erf(arg)
                };
                integrate(inner, lo, hi, Tolerance::new(1e-14, 1e-11)).value
            };
            // Below r/1e6 the error function is 1 to double precision and the
            // kernel is its τ → 0 limit.
            let k0 = kernel(r * 1e-6);
            let near = integrate_singular_origin(
                |l: f64| {
                    let tau = l.exp();
                    tf(l) * if tau < r * 1e-6 { k0 } else { kernel(tau) }
                },
                r,
                decay,
                tol,
            );
            let far = integrate(
                |tau| f(tau) * kernel(tau),
                r,
                r * std::f64::consts::SQRT_2,
                tol,
            );
            Ok(2.0 * (pi / gamma).sqrt() * (near.value + far.value))
        }
        _ => Err(HopfError::Domain(format!(
            "flattening integral supports spatial n in {{1, 2}}, got {n}"
        ))),
    }
}

/// Ratio of [`flattening_drift_integral`] to `𝒥_σ(r√2) + σ(r√2)`.
pub fn flattening_chain_ratio(sigma: &ModulusDescriptor, r: f64, gamma: f64, n: usize) -> Result<f64> {
    let rr = r * std::f64::consts::SQRT_2;
    let lhs = flattening_drift_integral(sigma, r, gamma, n)?;
    let rhs = sigma.dini_integral(rr)? + sigma.eval(rr)?;
    Ok(lhs / rhs)
}
