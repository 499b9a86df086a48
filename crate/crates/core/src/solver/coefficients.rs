//! Coefficient fields `a^{ij}`, `b` of the divergence-form operators.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::drift::DriftDescriptor;
use crate::error::{HopfError, Result};
use crate::geometry::DomainModel;
use crate::modulus::ModulusDescriptor;

/// Symmetric coefficient matrix at one point, row-major, `n ≤ 3`.
pub type Mat3 = [[f64; 3]; 3];

/// Leading-coefficient families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixField {
    Identity,
    /// Frozen constant matrix `A₀`.
    Constant {
        #[serde(rename = "A0")]
        a0: Vec<Vec<f64>>,
    },
    /// `a(x) = (1 + ε·σ(|x|)·cos θ)·I`, where `θ` is the angle at the
    /// annulus center between `x − x^ρ` and `−e_n` (so `θ = 0` points at the
    /// boundary point).
    Perturbed { eps: f64, sigma: ModulusDescriptor },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub a: MatrixField,
    #[serde(default = "zero_drift")]
    pub b: DriftDescriptor,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn zero_drift() -> DriftDescriptor {
    DriftDescriptor::Zero
}

fn default_nu() -> f64 {
    0.5
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

impl MatrixField {
    pub fn is_isotropic(&self) -> bool {
        match self {
            Self::Identity | Self::Perturbed { .. } => true,
            Self::Constant { a0 } => {
                let n = a0.len();
                (0..n).all(|i| (0..n).all(|j| if i == j { a0[i][i] == a0[0][0] } else { a0[i][j] == 0.0 }))
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, Self::Perturbed { .. })
    }

    /// `a(x)` for the annulus centered at `center`.
    pub fn at(&self, x: &[f64], center: &[f64]) -> Mat3 {
        let n = x.len();
        let mut m = [[0.0; 3]; 3];
        match self {
            Self::Identity => {
                for (i, row) in m.iter_mut().enumerate().take(n) {
                    row[i] = 1.0;
                }
            }
            Self::Constant { a0 } => {
                for i in 0..n {
                    for j in 0..n {
                        m[i][j] = a0[i][j];
                    }
                }
            }
            Self::Perturbed { eps, sigma } => {
                let s = sigma.value(norm(x).min(1.0));
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let dn = norm(&d);
                // cos of the angle between x − x^ρ and −e_n
                let h = if dn > 0.0 { -d[n - 1] / dn } else { 0.0 };
                let g = 1.0 + eps * s * h;
                for (i, row) in m.iter_mut().enumerate().take(n) {
                    row[i] = g;
                }
            }
        }
        m
    }

    /// Frozen matrix `a(x*)`.
    pub fn frozen(&self, x_star: &[f64], center: &[f64]) -> MatrixField {
        let n = x_star.len();
        let m = self.at(x_star, center);
        MatrixField::Constant {
            a0: (0..n).map(|i| m[i][..n].to_vec()).collect(),
        }
    }

    /// Modulus declared for the family: `|a(x) − a(y)| ≤ declared(|x − y|)`
    /// entrywise on the annulus.
    pub fn declared_modulus(&self) -> Option<ModulusDescriptor> {
        match self {
            Self::Perturbed { eps, sigma } => Some(ModulusDescriptor::scaled(
                eps * (1.0 + 2.0 * std::f64::consts::PI),
                sigma.clone(),
            )),
            _ => None,
        }
    }

    fn validate(&self, n: usize, nu: f64) -> Result<()> {
        match self {
            Self::Identity => {
                if nu > 1.0 {
                    return Err(HopfError::InvariantViolation(format!("ellipticity nu = {nu} exceeds 1")));
                }
                Ok(())
            }
            Self::Constant { a0 } => {
                if a0.len() != n || a0.iter().any(|row| row.len() != n) {
                    return Err(HopfError::InvariantViolation(format!("A0 must be {n}x{n}")));
                }
                for i in 0..n {
                    for j in 0..n {
                        if !a0[i][j].is_finite() || (a0[i][j] - a0[j][i]).abs() > 1e-14 * a0[i][j].abs().max(1.0) {
                            return Err(HopfError::InvariantViolation("A0 must be finite and symmetric".into()));
                        }
                    }
                }
                let m = DMatrix::from_fn(n, n, |i, j| a0[i][j]);
                let eig = SymmetricEigen::new(m).eigenvalues;
                let (lo, hi) = eig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| (l.min(e), h.max(e)));
                if lo < nu || hi > 1.0 / nu {
                    return Err(HopfError::InvariantViolation(format!(
                        "ellipticity violated: eigenvalues of A0 in [{lo}, {hi}], need [nu, 1/nu] with nu = {nu}"
                    )));
                }
                Ok(())
            }
            Self::Perturbed { eps, sigma } => {
                sigma.validate()?;
                let top = eps * sigma.value(1.0);
                if !(eps.is_finite() && *eps >= 0.0) || 1.0 - top < nu || 1.0 + top > 1.0 / nu {
                    return Err(HopfError::InvariantViolation(format!(
                        "ellipticity violated: perturbation amplitude {top} does not keep a in [nu, 1/nu] with nu = {nu}"
                    )));
                }
                Ok(())
            }
        }
    }
}

impl CoefficientField {
    pub fn identity() -> Self {
        Self {
            a: MatrixField::Identity,
            b: DriftDescriptor::Zero,
            nu: default_nu(),
        }
    }

    pub fn new(a: MatrixField, b: DriftDescriptor) -> Self {
        Self { a, b, nu: default_nu() }
    }

    pub fn without_drift(&self) -> Self {
        Self {
            a: self.a.clone(),
            b: DriftDescriptor::Zero,
            nu: self.nu,
        }
    }

    /// Checks ellipticity and dimension compatibility for spatial dimension `n`.
    ///
    /// Three-dimensional problems are solved axisymmetrically, which needs an
    /// isotropic `a` and a drift along `e_n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(HopfError::InvariantViolation(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        self.a.validate(n, self.nu)?;
        self.b.validate(n)?;
        if n == 3 {
            if !self.a.is_isotropic() {
                return Err(HopfError::InvariantViolation(
                    "three-dimensional problems need isotropic coefficients (axisymmetric solver)".into(),
                ));
            }
            if let DriftDescriptor::Constant { b } = &self.b {
                if b[0] != 0.0 || b[1] != 0.0 {
                    return Err(HopfError::InvariantViolation(
                        "three-dimensional problems need a drift along e_n (axisymmetric solver)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Drift vector at `x`, extended by zero outside `domain`.
    pub fn drift_at(&self, x: &[f64], domain: &DomainModel) -> Vec<f64> {
        self.b.vector(x, domain)
    }
}

/// Sampled check of `|a(x) − a(y)| ≤ declared(|x − y|)` entrywise over point
/// pairs. Returns the largest ratio `|a(x) − a(y)| / declared(|x − y|)`.
pub fn max_modulus_ratio(field: &MatrixField, center: &[f64], points: &[Vec<f64>]) -> Option<f64> {
    let declared = field.declared_modulus()?;
    let mut worst = 0.0f64;
    for (k, x) in points.iter().enumerate() {
        let ax = field.at(x, center);
        for y in &points[k + 1..] {
            let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist == 0.0 || dist > 1.0 {
                continue;
            }
            let ay = field.at(y, center);
            let bound = declared.value(dist);
            for i in 0..x.len() {
                for j in 0..x.len() {
                    worst = worst.max((ax[i][j] - ay[i][j]).abs() / bound);
                }
            }
        }
    }
    Some(worst)
}
