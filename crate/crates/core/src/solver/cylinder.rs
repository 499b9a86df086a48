//! Parabolic problems on `𝒜_ρ = B_ρ(x^ρ) × (−ρ², 0)` with zero lateral data
//! and cut-off initial data `φ((x − x^ρ)/ρ)`.
//!
//! The disc uses a staggered radial grid (cell centers at `(i + ½)h`), so no
//! unknown sits on the polar origin and the flux through `r = 0` vanishes.
//! For `n = 1` the cylinder is the interval `(0, 2ρ)` with nodes `x_i = ih`.
//!
//! Time stepping is Crank–Nicolson with a Rannacher start (four backward
//! Euler half-steps); [`TimeScheme::BackwardEuler`] is the monotone fallback.
//! Inside `𝒜_ρ` the parabolic distance to `∂′Q` equals the Euclidean distance
//! to the flat boundary, so the drift families are time-independent there and
//! one factorization serves every step.

use serde::{Deserialize, Serialize};

use super::coefficients::CoefficientField;
use super::linalg::{BandedLu, CsrMatrix, TripletBuilder};
use super::{cutoff_phi, MeshKind, MeshSize, PolarMesh, SpaceTimeField};
use crate::error::{HopfError, Result};
use crate::geometry::DomainModel;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    CrankNicolson,
    BackwardEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderProblem {
    pub rho: f64,
    /// Spatial dimension, 1 or 2.
    pub n: usize,
    pub coefficients: CoefficientField,
    /// `n_r` radial cells (interval cells for `n = 1`), `n_theta` angular
    /// cells, `n_t` time steps.
    pub mesh: MeshSize,
    pub domain: DomainModel,
    #[serde(default)]
    pub scheme: TimeScheme,
}

impl CylinderProblem {
    pub fn new(rho: f64, n: usize, coefficients: CoefficientField, n_r: usize, n_theta: usize, n_t: usize) -> Self {
        Self {
            rho,
            n,
            coefficients,
            mesh: MeshSize {
                n_r,
                n_theta,
                n_t: Some(n_t),
            },
            domain: DomainModel::parabolic(n, 1.0),
            scheme: TimeScheme::default(),
        }
    }

    pub fn with_scheme(mut self, scheme: TimeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_coefficients(&self, coefficients: CoefficientField) -> Self {
        Self {
            coefficients,
            ..self.clone()
        }
    }

    pub fn steps(&self) -> usize {
        self.mesh.n_t.unwrap_or(0)
    }

    /// `Δt = ρ²/N_t`.
    pub fn time_step(&self) -> f64 {
        self.rho * self.rho / self.steps() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.n, 1 | 2) {
            return Err(HopfError::InvariantViolation(format!(
                "cylinder problems need n in {{1, 2}}, got {}",
                self.n
            )));
        }
        if self.domain.n != self.n {
            return Err(HopfError::InvariantViolation("domain dimension differs from problem dimension".into()));
        }
        self.domain.validate()?;
        if !(self.rho > 0.0 && 2.0 * self.rho <= self.domain.radius) {
            return Err(HopfError::Domain(format!(
                "cylinder radius rho = {} must satisfy 0 < rho <= R/2 = {}",
                self.rho,
                0.5 * self.domain.radius
            )));
        }
        if self.steps() == 0 {
            return Err(HopfError::InvariantViolation("cylinder mesh needs n_t >= 1".into()));
        }
        if self.n == 2 {
            if self.mesh.n_r < 3 || self.mesh.n_theta < 8 || self.mesh.n_theta % 2 != 0 {
                return Err(HopfError::InvariantViolation(format!(
                    "disc mesh {}x{} invalid (need n_r >= 3 and an even n_theta >= 8)",
                    self.mesh.n_r, self.mesh.n_theta
                )));
            }
            if !self.coefficients.a.is_isotropic() {
                return Err(HopfError::InvariantViolation(
                    "cylinder problems support isotropic coefficients only".into(),
                ));
            }
        } else if self.mesh.n_r < 4 {
            return Err(HopfError::InvariantViolation(format!(
                "interval mesh with {} cells too coarse (need at least 4)",
                self.mesh.n_r
            )));
        }
        self.coefficients.validate(self.n)
    }

    pub fn polar_mesh(&self) -> PolarMesh {
        if self.n == 1 {
            PolarMesh::interval(self.rho, self.mesh.n_r)
        } else {
            PolarMesh::disc(self.rho, self.mesh.n_r, self.mesh.n_theta)
        }
    }
}

/// Lumped mass `M` and stiffness `K` of the spatial operator, so that the
/// semi-discrete problem reads `M u′ + K u = 0`.
struct SpatialOperator {
    stiffness: CsrMatrix,
    mass: Vec<f64>,
}

/// Drift contribution for one direction: `c = vol·b/(2Δ)` between the two
/// neighbours, switching to upwind when `|c|` exceeds the diffusive coupling.
fn transport(trip: &mut TripletBuilder, row: usize, c: f64, plus: Option<usize>, minus: Option<usize>, diffusive: f64) {
    if c == 0.0 {
        return;
    }
    let mut add = |col: Option<usize>, v: f64| {
        if let Some(col) = col {
            trip.add(row, col, v);
        }
    };
    if c.abs() <= diffusive {
        add(plus, c);
        add(minus, -c);
    } else if c > 0.0 {
        add(Some(row), 2.0 * c);
        add(minus, -2.0 * c);
    } else {
        add(plus, 2.0 * c);
        add(Some(row), -2.0 * c);
    }
}

fn drift_vector(problem: &CylinderProblem, x: &[f64]) -> Vec<f64> {
    // time-independent inside the cylinder (see module docs)
    let s = -problem.rho * problem.rho;
    let b = &problem.coefficients.b;
    match b {
        crate::drift::DriftDescriptor::Constant { .. } | crate::drift::DriftDescriptor::Zero => {
            b.vector(x, &problem.domain)
        }
        _ => {
            let mut v = vec![0.0; x.len()];
            v[x.len() - 1] = b.magnitude_parabolic(x, s, &problem.domain);
            v
        }
    }
}

fn assemble_disc(problem: &CylinderProblem, mesh: &PolarMesh) -> SpatialOperator {
    let nr = mesh.n_r;
    let nt = mesh.thetas.len();
    let h = mesh.radial_step();
    let dth = mesh.angular_step();
    let center = mesh.center();
    let coef = &problem.coefficients;
    let a = |r: f64, th: f64| coef.a.at(&mesh.point_at(r, th), &center)[0][0];
    let mut trip = TripletBuilder::new(nr * nt);
    let mut mass = vec![0.0; nr * nt];
    let drift_on = !coef.b.is_zero();
    for i in 0..nr {
        let r = mesh.radii[i];
        for j in 0..nt {
            let row = mesh.idx(i, j);
            let th = mesh.thetas[j];
            let jp = (j + 1) % nt;
            let jm = (j + nt - 1) % nt;
            let re = r + 0.5 * h;
            let d_e = if i + 1 < nr {
                re * a(re, th) * dth / h
            } else {
                // Dirichlet face at r = ρ, half a cell away
                re * a(re, th) * dth / (0.5 * h)
            };
            let d_w = if i > 0 {
                let rw = r - 0.5 * h;
                rw * a(rw, th) * dth / h
            } else {
                0.0
            };
            let d_n = a(r, th + 0.5 * dth) * h / (r * dth);
            let d_s = a(r, th - 0.5 * dth) * h / (r * dth);
            let vol = r * h * dth;
            mass[row] = vol;
            trip.add(row, row, d_e + d_w + d_n + d_s);
            if i + 1 < nr {
                trip.add(row, mesh.idx(i + 1, j), -d_e);
            }
            if i > 0 {
                trip.add(row, mesh.idx(i - 1, j), -d_w);
            }
            trip.add(row, mesh.idx(i, jp), -d_n);
            trip.add(row, mesh.idx(i, jm), -d_s);

            if drift_on {
                let bv = drift_vector(problem, &mesh.point(i, j));
                let (er, et) = mesh.frame(th);
                let br: f64 = bv.iter().zip(&er).map(|(p, q)| p * q).sum();
                let bt: f64 = bv.iter().zip(&et).map(|(p, q)| p * q).sum();
                let outer = (i + 1 < nr).then(|| mesh.idx(i + 1, j));
                if i == 0 {
                    // one-sided toward the neighbouring ring
                    if br != 0.0 {
                        let c = vol * br / h;
                        let opp = mesh.idx(0, (j + nt / 2) % nt);
                        if br > 0.0 {
                            trip.add(row, row, c);
                            trip.add(row, opp, -c);
                        } else if let Some(o) = outer {
                            trip.add(row, o, c);
                            trip.add(row, row, -c);
                        }
                    }
                } else {
                    // the outer neighbour of the last ring is the zero boundary value
                    transport(
                        &mut trip,
                        row,
                        vol * br / (2.0 * h),
                        outer,
                        Some(mesh.idx(i - 1, j)),
                        d_e.min(d_w),
                    );
                }
                transport(
                    &mut trip,
                    row,
                    vol * bt / (2.0 * r * dth),
                    Some(mesh.idx(i, jp)),
                    Some(mesh.idx(i, jm)),
                    d_n.min(d_s),
                );
            }
        }
    }
    SpatialOperator {
        stiffness: trip.build(),
        mass,
    }
}

/// Nodes `x_0 < … < x_N` with Dirichlet zero at both ends; unknowns are the
/// interior nodes.
fn assemble_interval(
    nodes: &[f64],
    a: &dyn Fn(f64) -> f64,
    b: &dyn Fn(f64) -> f64,
) -> SpatialOperator {
    let n = nodes.len() - 2;
    let mut trip = TripletBuilder::new(n);
    let mut mass = vec![0.0; n];
    for k in 0..n {
        let i = k + 1;
        let he = nodes[i + 1] - nodes[i];
        let hw = nodes[i] - nodes[i - 1];
        let d_e = a(0.5 * (nodes[i] + nodes[i + 1])) / he;
        let d_w = a(0.5 * (nodes[i] + nodes[i - 1])) / hw;
        let vol = 0.5 * (he + hw);
        mass[k] = vol;
        trip.add(k, k, d_e + d_w);
        let east = (k + 1 < n).then_some(k + 1);
        let west = (k > 0).then(|| k - 1);
        if let Some(e) = east {
            trip.add(k, e, -d_e);
        }
        if let Some(w) = west {
            trip.add(k, w, -d_w);
        }
        let bx = b(nodes[i]);
        transport(&mut trip, k, vol * bx / (he + hw), east, west, d_e.min(d_w));
    }
    SpatialOperator {
        stiffness: trip.build(),
        mass,
    }
}

/// Builds `M + θΔt·K` and `M − (1 − θ)Δt·K` style operators.
fn combine(op: &SpatialOperator, k_scale: f64) -> CsrMatrix {
    let mut m = op.stiffness.clone();
    for v in m.values.iter_mut() {
        *v *= k_scale;
    }
    for (row, &mass) in op.mass.iter().enumerate() {
        let mut found = false;
        for p in m.row_ptr[row]..m.row_ptr[row + 1] {
            if m.col_idx[p] == row {
                m.values[p] += mass;
                found = true;
            }
        }
        debug_assert!(found, "stiffness has a full diagonal");
    }
    m
}

/// Runs the time loop from `u0`, returning every time level and the largest
/// relative residual of the per-step solves.
fn march(op: &SpatialOperator, u0: Vec<f64>, dt: f64, steps: usize, scheme: TimeScheme) -> Result<(Vec<Vec<f64>>, f64)> {
    let implicit_scale = match scheme {
        TimeScheme::CrankNicolson => 0.5 * dt,
        TimeScheme::BackwardEuler => dt,
    };
    // For Crank–Nicolson `M + Δt/2·K` is also the backward Euler matrix for a
    // half step, which gives the Rannacher start for free.
    let lhs = combine(op, implicit_scale);
    let lu = BandedLu::factor(&lhs)?;
    let n = u0.len();
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(u0);
    let mut worst = 0.0f64;
    let mut rhs = vec![0.0; n];
    let mut ku = vec![0.0; n];
    let rannacher = if scheme == TimeScheme::CrankNicolson { steps.min(2) } else { 0 };
    for step in 0..steps {
        let mut u = slices[step].clone();
        let substeps = if step < rannacher { 2 } else { 1 };
        for _ in 0..substeps {
            if substeps == 2 || scheme == TimeScheme::BackwardEuler {
                for k in 0..n {
                    rhs[k] = op.mass[k] * u[k];
                }
            } else {
                op.stiffness.mul_vec(&u, &mut ku);
                for k in 0..n {
                    rhs[k] = op.mass[k] * u[k] - 0.5 * dt * ku[k];
                }
            }
            let (next, res) = lu.solve_refined(&lhs, &rhs)?;
            worst = worst.max(res);
            u = next;
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(HopfError::Breakdown(format!("non-finite values after step {}", step + 1)));
        }
        slices.push(u);
    }
    Ok((slices, worst))
}

/// Solves the cylinder problem; slice `k` holds the solution at
/// `t_k = −ρ² + kΔt`.
///
/// For the disc each slice holds all cell values (`mesh.idx`); for the
/// interval it holds all nodes including the two zero end points.
pub fn solve_cylinder(problem: &CylinderProblem) -> Result<SpaceTimeField> {
    problem.validate()?;
    let mesh = problem.polar_mesh();
    let rho = problem.rho;
    let dt = problem.time_step();
    let steps = problem.steps();
    let (slices, residual) = match mesh.kind {
        MeshKind::Disc => {
            let op = assemble_disc(problem, &mesh);
            let center = mesh.center();
            let u0: Vec<f64> = (0..mesh.radii.len())
                .flat_map(|i| (0..mesh.thetas.len()).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let off: Vec<f64> = mesh.point(i, j).iter().zip(&center).map(|(x, c)| (x - c) / rho).collect();
                    cutoff_phi(&off)
                })
                .collect();
            march(&op, u0, dt, steps, problem.scheme)?
        }
        _ => {
            let center = mesh.center();
            let coef = &problem.coefficients;
            let a = |x: f64| coef.a.at(&[x], &center)[0][0];
            let b = |x: f64| drift_vector(problem, &[x])[0];
            let op = assemble_interval(&mesh.radii, &a, &b);
            let nn = mesh.radii.len();
            let u0: Vec<f64> = mesh.radii[1..nn - 1]
                .iter()
                .map(|&x| cutoff_phi(&[(x - rho) / rho]))
                .collect();
            let (inner, res) = march(&op, u0, dt, steps, problem.scheme)?;
            let padded = inner
                .into_iter()
                .map(|v| {
                    let mut full = Vec::with_capacity(nn);
                    full.push(0.0);
                    full.extend(v);
                    full.push(0.0);
                    full
                })
                .collect();
            (padded, res)
        }
    };
    let times = (0..=steps).map(|k| -rho * rho + k as f64 * dt).collect();
    Ok(SpaceTimeField {
        mesh,
        times,
        slices,
        residual,
    })
}

/// Constant-coefficient heat equation `u_t = u_xx` on `(0, L)` with zero end
/// values; used as the separable-solution oracle for the time stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalHeatProblem {
    pub length: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
}

impl IntervalHeatProblem {
    /// Returns the node coordinates and the solution at `t = steps·dt`.
    pub fn solve(&self, initial: &dyn Fn(f64) -> f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.n_cells < 2 || !(self.length > 0.0) || !(self.dt > 0.0) {
            return Err(HopfError::InvariantViolation("heat problem needs n_cells >= 2, L > 0, dt > 0".into()));
        }
        let h = self.length / self.n_cells as f64;
        let nodes: Vec<f64> = (0..=self.n_cells).map(|i| i as f64 * h).collect();
        let op = assemble_interval(&nodes, &|_| 1.0, &|_| 0.0);
        let u0 = nodes[1..self.n_cells].iter().map(|&x| initial(x)).collect();
        let (slices, _) = march(&op, u0, self.dt, self.steps, self.scheme)?;
        let mut u = vec![0.0];
        u.extend(slices.last().expect("at least the initial slice"));
        u.push(0.0);
        Ok((nodes, u))
    }
}

/// `D_n` at the origin for a disc field: quadratic through the last two cell
/// centers on `θ = 0` and the zero boundary value at `r = ρ`.
pub fn disc_normal_derivative(mesh: &PolarMesh, values: &[f64]) -> Result<f64> {
    if mesh.kind != MeshKind::Disc || mesh.thetas.first() != Some(&0.0) || mesh.n_r < 2 {
        return Err(HopfError::Geometry("disc mesh has no ray through the origin".into()));
    }
    let h = mesh.radial_step();
    let n = mesh.n_r;
    let v1 = values[mesh.idx(n - 1, 0)];
    let v2 = values[mesh.idx(n - 2, 0)];
    Ok((9.0 * v1 - v2) / (3.0 * h))
}

/// `D_n` at `x = 0` for an interval field (nodes include the end points).
pub fn interval_normal_derivative(mesh: &PolarMesh, values: &[f64]) -> Result<f64> {
    if mesh.kind != MeshKind::Interval || mesh.radii.len() < 3 || mesh.radii[0] != 0.0 {
        return Err(HopfError::Geometry("interval mesh has no node at the origin".into()));
    }
    let h = mesh.radial_step();
    Ok((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h))
}

/// Cartesian gradient of a cylinder slice at cell or node `(i, j)`.
pub fn slice_gradient(mesh: &PolarMesh, values: &[f64], i: usize, j: usize) -> Vec<f64> {
    let h = mesh.radial_step();
    match mesh.kind {
        MeshKind::Interval => {
            let last = mesh.radii.len() - 1;
            let g = if i == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if i == last {
                (3.0 * values[last] - 4.0 * values[last - 1] + values[last - 2]) / (2.0 * h)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            };
            vec![g]
        }
        MeshKind::Disc => {
            let nr = mesh.n_r;
            let nt = mesh.thetas.len();
            let dth = mesh.angular_step();
            let v = |i: usize, j: usize| values[mesh.idx(i, j)];
            let dr = if i == 0 {
                (v(1, j) - v(0, (j + nt / 2) % nt)) / (2.0 * h)
            } else if i + 1 == nr {
                -v(nr - 2, j) / (3.0 * h) - v(nr - 1, j) / h
            } else {
                (v(i + 1, j) - v(i - 1, j)) / (2.0 * h)
            };
            let dt = (v(i, (j + 1) % nt) - v(i, (j + nt - 1) % nt)) / (2.0 * dth * mesh.radii[i]);
            let (er, et) = mesh.frame(mesh.thetas[j]);
            er.iter().zip(&et).map(|(a, b)| dr * a + dt * b).collect()
        }
        _ => super::annulus::gradient_of(mesh, values, i, j),
    }
}

/// `max |Dũ|` over all nodes and time levels.
pub fn max_space_time_gradient(field: &SpaceTimeField) -> f64 {
    let mesh = &field.mesh;
    let mut m = 0.0f64;
    for v in &field.slices {
        for i in 0..mesh.radii.len() {
            for j in 0..mesh.thetas.len() {
                let g = slice_gradient(mesh, v, i, j);
                m = m.max(g.iter().map(|c| c * c).sum::<f64>().sqrt());
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftDescriptor;

    #[test]
    fn initial_slice_is_the_cutoff() {
        let p = CylinderProblem::new(0.25, 2, CoefficientField::identity(), 16, 32, 8);
        let f = solve_cylinder(&p).unwrap();
        let m = &f.mesh;
        for i in 0..m.n_r {
            for j in 0..m.thetas.len() {
                let x = m.point(i, j);
                let off: Vec<f64> = x.iter().zip(m.center()).map(|(a, c)| (a - c) / 0.25).collect();
                assert_eq!(f.slices[0][m.idx(i, j)], super::super::cutoff_phi(&off));
            }
        }
        assert_eq!(f.times[0], -0.0625);
        assert!((f.times.last().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn heat_mode_decays() {
        let pb = IntervalHeatProblem {
            length: 1.0,
            n_cells: 64,
            dt: 1e-3,
            steps: 100,
            scheme: TimeScheme::CrankNicolson,
        };
        let pi = std::f64::consts::PI;
        let (x, u) = pb.solve(&|x| (pi * x).sin()).unwrap();
        let exact = (-pi * pi * 0.1f64).exp();
        let mid = u[32] / (pi * x[32]).sin();
        assert!((mid / exact - 1.0).abs() < 1e-3, "{mid} vs {exact}");
    }

    #[test]
    fn interval_with_drift_stays_in_range() {
        let c = CoefficientField::new(
            crate::solver::MatrixField::Identity,
            DriftDescriptor::near_boundary(1.0, crate::modulus::ModulusDescriptor::power(0.5)),
        );
        let p = CylinderProblem::new(0.25, 1, c, 64, 1, 64);
        let f = solve_cylinder(&p).unwrap();
        let (lo, hi) = f.min_max();
        assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12, "{lo} {hi}");
        let d = interval_normal_derivative(&f.mesh, f.slices.last().unwrap()).unwrap();
        assert!(d > 0.0);
    }
}
