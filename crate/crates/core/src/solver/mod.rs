//! Finite-volume solvers on polar grids.
//!
//! - [`annulus`]: elliptic barrier problems on `A_ρ` (2D, or 3D axisymmetric).
//! - [`cylinder`]: parabolic problems on `B_ρ(x^ρ) × (−ρ², 0)` (disc or interval).
//! - [`linalg`]: sparse storage, Krylov solvers and banded LU.
//! - [`coefficients`]: coefficient fields and their invariants.

pub mod annulus;
pub mod coefficients;
pub mod cylinder;
pub mod linalg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use annulus::{
    assemble, discrete_green_column, gradient_at, max_gradient, normal_derivative_origin, solve_annulus,
    solve_annulus_direct, solve_annulus_to, AnnulusProblem, Assembly,
};
pub use coefficients::{CoefficientField, MatrixField};
pub use cylinder::{solve_cylinder, CylinderProblem, IntervalHeatProblem, TimeScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Nodes `r_i = ρ/2 + i·h`, `i = 0..=N_r`; periodic `θ_j = 2πj/N_θ`.
    Annulus,
    /// Nodes `r_i = ρ/2 + i·h`; `θ_j = πj/N_θ`, `j = 0..=N_θ`, both ends on the axis.
    AnnulusAxisymmetric,
    /// Cell centers `r_i = (i + ½)h`, `i < N_r`; periodic `θ_j = 2πj/N_θ`.
    Disc,
    /// Nodes `x_i = i·h` on `[0, 2ρ]`, `i = 0..=N_r`.
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshSize {
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarMesh {
    pub kind: MeshKind,
    pub rho: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl PolarMesh {
    pub fn annulus(kind: MeshKind, rho: f64, n_r: usize, n_theta: usize) -> Self {
        let h = 0.5 * rho / n_r as f64;
        let radii = (0..=n_r).map(|i| 0.5 * rho + i as f64 * h).collect();
        let thetas = match kind {
            MeshKind::AnnulusAxisymmetric => {
                let d = std::f64::consts::PI / n_theta as f64;
                (0..=n_theta).map(|j| j as f64 * d).collect()
            }
            _ => {
                let d = 2.0 * std::f64::consts::PI / n_theta as f64;
                (0..n_theta).map(|j| j as f64 * d).collect()
            }
        };
        Self {
            kind,
            rho,
            n_r,
            n_theta,
            radii,
            thetas,
        }
    }

    pub fn disc(rho: f64, n_r: usize, n_theta: usize) -> Self {
        let h = rho / n_r as f64;
        let d = 2.0 * std::f64::consts::PI / n_theta as f64;
        Self {
            kind: MeshKind::Disc,
            rho,
            n_r,
            n_theta,
            radii: (0..n_r).map(|i| (i as f64 + 0.5) * h).collect(),
            thetas: (0..n_theta).map(|j| j as f64 * d).collect(),
        }
    }

    pub fn interval(rho: f64, n_cells: usize) -> Self {
        let h = 2.0 * rho / n_cells as f64;
        Self {
            kind: MeshKind::Interval,
            rho,
            n_r: n_cells,
            n_theta: 1,
            radii: (0..=n_cells).map(|i| i as f64 * h).collect(),
            thetas: vec![0.0],
        }
    }

    pub fn radial_step(&self) -> f64 {
        match self.kind {
            MeshKind::Annulus | MeshKind::AnnulusAxisymmetric => 0.5 * self.rho / self.n_r as f64,
            MeshKind::Disc => self.rho / self.n_r as f64,
            MeshKind::Interval => 2.0 * self.rho / self.n_r as f64,
        }
    }

    pub fn angular_step(&self) -> f64 {
        match self.kind {
            MeshKind::AnnulusAxisymmetric => std::f64::consts::PI / self.n_theta as f64,
            MeshKind::Interval => 0.0,
            _ => 2.0 * std::f64::consts::PI / self.n_theta as f64,
        }
    }

    /// Spatial dimension of the physical points.
    pub fn dim(&self) -> usize {
        match self.kind {
            MeshKind::AnnulusAxisymmetric => 3,
            MeshKind::Interval => 1,
            _ => 2,
        }
    }

    /// `x^ρ = (0, …, 0, ρ)`.
    pub fn center(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        *c.last_mut().expect("dim >= 1") = self.rho;
        c
    }

    /// Radial and angular unit vectors at angle `θ`.
    pub fn frame(&self, theta: f64) -> (Vec<f64>, Vec<f64>) {
        let (s, c) = theta.sin_cos();
        match self.kind {
            MeshKind::AnnulusAxisymmetric => (vec![s, 0.0, -c], vec![c, 0.0, s]),
            MeshKind::Interval => (vec![1.0], vec![0.0]),
            _ => (vec![s, -c], vec![c, s]),
        }
    }

    pub fn point_at(&self, r: f64, theta: f64) -> Vec<f64> {
        if self.kind == MeshKind::Interval {
            return vec![r];
        }
        let (er, _) = self.frame(theta);
        self.center().iter().zip(&er).map(|(c, e)| c + r * e).collect()
    }

    pub fn point(&self, i: usize, j: usize) -> Vec<f64> {
        self.point_at(self.radii[i], self.thetas[j])
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.thetas.len() + j
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nodal solution on a polar mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub mesh: PolarMesh,
    /// Values at `mesh.idx(i, j)`, boundary rings included for annuli.
    pub values: Vec<f64>,
    /// Relative residual reached by the linear solve.
    pub residual: f64,
}

/// Space-time solution: one [`DiscreteField`]-shaped slice per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub mesh: PolarMesh,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<f64>>,
    /// Largest relative residual over all steps.
    pub residual: f64,
}

impl DiscreteField {
    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.values)
    }

    /// CSV dump with columns `r, theta, value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,theta,value\n");
        for (i, r) in self.mesh.radii.iter().enumerate() {
            for (j, th) in self.mesh.thetas.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", r, th, self.values[self.mesh.idx(i, j)]);
            }
        }
        s
    }
}

impl SpaceTimeField {
    pub fn min_max(&self) -> (f64, f64) {
        self.slices
            .iter()
            .map(|v| min_max(v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn final_slice(&self) -> DiscreteField {
        DiscreteField {
            mesh: self.mesh.clone(),
            values: self.slices.last().cloned().unwrap_or_default(),
            residual: self.residual,
        }
    }

    /// CSV dump with columns `r, theta, t, value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,theta,t,value\n");
        for (t, v) in self.times.iter().zip(&self.slices) {
            for (i, r) in self.mesh.radii.iter().enumerate() {
                for (j, th) in self.mesh.thetas.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{}", r, th, t, v[self.mesh.idx(i, j)]);
                }
            }
        }
        s
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Radial C² cut-off: `1` for `|x| ≤ 1/2`, `0` for `|x| ≥ 3/4`, quintic
/// smoothstep `1 − (6u⁵ − 15u⁴ + 10u³)`, `u = 4(|x| − 1/2)`, in between.
pub fn cutoff_phi(x: &[f64]) -> f64 {
    let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
    cutoff_profile(r)
}

fn cutoff_profile(r: f64) -> f64 {
    if r <= 0.5 {
        1.0
    } else if r >= 0.75 {
        0.0
    } else {
        let u = 4.0 * (r - 0.5);
        1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_phi(&[0.0, 0.0]), 1.0);
        assert_eq!(cutoff_phi(&[0.8]), 0.0);
        assert!((cutoff_phi(&[0.625, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(cutoff_phi(&[0.5]), 1.0);
        assert_eq!(cutoff_phi(&[0.0, 0.75]), 0.0);
    }

    #[test]
    fn annulus_mesh_hits_origin() {
        let m = PolarMesh::annulus(MeshKind::Annulus, 0.5, 8, 16);
        let p = m.point(8, 0);
        assert!(p[0].abs() < 1e-16 && p[1].abs() < 1e-16);
        let m3 = PolarMesh::annulus(MeshKind::AnnulusAxisymmetric, 0.5, 8, 16);
        let p = m3.point(8, 0);
        assert!(p.iter().all(|c| c.abs() < 1e-16));
        assert_eq!(m3.thetas.len(), 17);
    }

    #[test]
    fn csv_header() {
        let m = PolarMesh::interval(0.5, 4);
        let f = DiscreteField {
            values: vec![0.0; m.len()],
            mesh: m,
            residual: 0.0,
        };
        let csv = f.to_csv();
        assert!(csv.starts_with("r,theta,value\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
