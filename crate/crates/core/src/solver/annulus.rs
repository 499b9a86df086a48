//! Annulus barrier problems `ℒv = 0` in `A_ρ = {ρ/2 < |x − x^ρ| < ρ}`,
//! `v = 1` on the inner circle, `v = 0` on the outer one.
//!
//! Vertex-centered finite volumes on a polar grid about `x^ρ = (0, …, 0, ρ)`.
//! The polar angle `θ` is measured from `−e_n`, so the node `(r = ρ, θ = 0)`
//! is the boundary point at the origin. In three dimensions the problem is
//! solved axisymmetrically in the `(r, θ)` half-plane.

use serde::{Deserialize, Serialize};

use super::coefficients::{CoefficientField, Mat3};
use super::linalg::{solve, solve_to, BandedLu, CsrMatrix, TripletBuilder, SOLVE_REL_TOL};
use super::{DiscreteField, MeshKind, MeshSize, PolarMesh};
use crate::drift::DriftDescriptor;
use crate::error::{HopfError, Result};
use crate::geometry::DomainModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProblem {
    pub rho: f64,
    /// Spatial dimension, 2 or 3.
    pub n: usize,
    pub coefficients: CoefficientField,
    pub mesh: MeshSize,
    /// Half-ball on which the drift is defined; the annulus must fit inside.
    pub domain: DomainModel,
}

/// Integrated finite-volume system over the interior nodes.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub matrix: CsrMatrix,
    /// Contribution of the Dirichlet data (1 inside, 0 outside).
    pub rhs: Vec<f64>,
    /// Cell volumes of the interior nodes.
    pub volumes: Vec<f64>,
    pub mesh: PolarMesh,
}

impl AnnulusProblem {
    pub fn new(rho: f64, n: usize, coefficients: CoefficientField, n_r: usize, n_theta: usize) -> Self {
        Self {
            rho,
            n,
            coefficients,
            mesh: MeshSize { n_r, n_theta, n_t: None },
            domain: DomainModel::elliptic(n, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.n, 2 | 3) {
            return Err(HopfError::InvariantViolation(format!(
                "annulus problems need n in {{2, 3}}, got {}",
                self.n
            )));
        }
        if self.domain.n != self.n {
            return Err(HopfError::InvariantViolation("domain dimension differs from problem dimension".into()));
        }
        self.domain.validate()?;
        if !(self.rho > 0.0 && 2.0 * self.rho <= self.domain.radius) {
            return Err(HopfError::Domain(format!(
                "annulus radius rho = {} must satisfy 0 < rho <= R/2 = {}",
                self.rho,
                0.5 * self.domain.radius
            )));
        }
        if self.mesh.n_r < 4 || self.mesh.n_theta < 8 {
            return Err(HopfError::InvariantViolation(format!(
                "mesh {}x{} too coarse (need at least 4x8)",
                self.mesh.n_r, self.mesh.n_theta
            )));
        }
        self.coefficients.validate(self.n)
    }

    pub fn polar_mesh(&self) -> PolarMesh {
        let kind = if self.n == 2 {
            MeshKind::Annulus
        } else {
            MeshKind::AnnulusAxisymmetric
        };
        PolarMesh::annulus(kind, self.rho, self.mesh.n_r, self.mesh.n_theta)
    }

    /// Copy with different coefficients.
    pub fn with_coefficients(&self, coefficients: CoefficientField) -> Self {
        Self {
            coefficients,
            ..self.clone()
        }
    }
}

fn rotate(m: &Mat3, er: &[f64], et: &[f64]) -> (f64, f64, f64) {
    let n = er.len();
    let quad = |u: &[f64], v: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i] * m[i][j] * v[j];
            }
        }
        s
    };
    (quad(er, er), quad(er, et), quad(et, et))
}

struct Builder<'a> {
    trip: TripletBuilder,
    rhs: Vec<f64>,
    mesh: &'a PolarMesh,
    inner_value: f64,
}

impl Builder<'_> {
    fn unknown(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.mesh.thetas.len() + j
    }

    fn add(&mut self, row: usize, i: usize, j: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let nr = self.mesh.n_r;
        if i == 0 {
            self.rhs[row] -= coef * self.inner_value;
        } else if i == nr {
            // outer data is zero
        } else {
            let col = self.unknown(i, j);
            self.trip.add(row, col, coef);
        }
    }
}

/// Assembles `ℒ` (or `ℒ₀` when `with_drift` is false) on the annulus.
pub fn assemble(problem: &AnnulusProblem, with_drift: bool) -> Result<Assembly> {
    problem.validate()?;
    let mesh = problem.polar_mesh();
    let nr = mesh.n_r;
    let nt = mesh.thetas.len();
    let nunk = (nr - 1) * nt;
    let h = mesh.radial_step();
    let dth = mesh.angular_step();
    let center = mesh.center();
    let coef = &problem.coefficients;
    let periodic = mesh.kind == MeshKind::Annulus;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut b = Builder {
        trip: TripletBuilder::new(nunk),
        rhs: vec![0.0; nunk],
        mesh: &mesh,
        inner_value: 1.0,
    };
    let mut volumes = vec![0.0; nunk];
    let drift_on = with_drift && !coef.b.is_zero();
    let isotropic = coef.a.is_isotropic();

    for i in 1..nr {
        let r = mesh.radii[i];
        for j in 0..nt {
            let row = b.unknown(i, j);
            let th = mesh.thetas[j];
            let (jm, jp) = if periodic {
                ((j + nt - 1) % nt, (j + 1) % nt)
            } else {
                (j.wrapping_sub(1), j + 1)
            };
            let has_jm = periodic || j > 0;
            let has_jp = periodic || j + 1 < nt;
            let (d_e, d_w, d_n, d_s, vol);
            if periodic {
                // radial faces
                let re = r + 0.5 * h;
                let rw = r - 0.5 * h;
                let pe = mesh.point_at(re, th);
                let pw = mesh.point_at(rw, th);
                let (er, et) = mesh.frame(th);
                let (arr_e, art_e, _) = rotate(&coef.a.at(&pe, &center), &er, &et);
                let (arr_w, art_w, _) = rotate(&coef.a.at(&pw, &center), &er, &et);
                d_e = re * arr_e * dth / h;
                d_w = rw * arr_w * dth / h;
                // angular faces
                let thn = th + 0.5 * dth;
                let ths = th - 0.5 * dth;
                let (ern, etn) = mesh.frame(thn);
                let (ers, ets) = mesh.frame(ths);
                let (_, art_n, att_n) = rotate(&coef.a.at(&mesh.point_at(r, thn), &center), &ern, &etn);
                let (_, art_s, att_s) = rotate(&coef.a.at(&mesh.point_at(r, ths), &center), &ers, &ets);
                d_n = att_n / r * h / dth;
                d_s = att_s / r * h / dth;
                vol = r * h * dth;
                if !isotropic {
                    // cross terms K^{rθ} = A_rθ, averaged tangential differences
                    let q = 0.25;
                    // east face: −K^{rθ}·(∂_θ u)·Δθ
                    let c = -q * art_e;
                    b.add(row, i, jp, c);
                    b.add(row, i + 1, jp, c);
                    b.add(row, i, jm, -c);
                    b.add(row, i + 1, jm, -c);
                    // west face: +K^{rθ}·(∂_θ u)·Δθ
                    let c = q * art_w;
                    b.add(row, i, jp, c);
                    b.add(row, i - 1, jp, c);
                    b.add(row, i, jm, -c);
                    b.add(row, i - 1, jm, -c);
                    // north face: −K^{θr}·(∂_r u)·h
                    let c = -q * art_n;
                    b.add(row, i + 1, j, c);
                    b.add(row, i + 1, jp, c);
                    b.add(row, i - 1, j, -c);
                    b.add(row, i - 1, jp, -c);
                    // south face: +K^{θr}·(∂_r u)·h
                    let c = q * art_s;
                    b.add(row, i + 1, j, c);
                    b.add(row, i + 1, jm, c);
                    b.add(row, i - 1, j, -c);
                    b.add(row, i - 1, jm, -c);
                }
            } else {
                let lo = (th - 0.5 * dth).max(0.0);
                let hi = (th + 0.5 * dth).min(std::f64::consts::PI);
                let band = lo.cos() - hi.cos();
                let re = r + 0.5 * h;
                let rw = r - 0.5 * h;
                let ae = coef.a.at(&mesh.point_at(re, th), &center)[0][0];
                let aw = coef.a.at(&mesh.point_at(rw, th), &center)[0][0];
                d_e = two_pi * ae * re * re * band / h;
                d_w = two_pi * aw * rw * rw * band / h;
                d_n = if has_jp {
                    let thn = th + 0.5 * dth;
                    two_pi * coef.a.at(&mesh.point_at(r, thn), &center)[0][0] * thn.sin() * h / dth
                } else {
                    0.0
                };
                d_s = if has_jm {
                    let ths = th - 0.5 * dth;
                    two_pi * coef.a.at(&mesh.point_at(r, ths), &center)[0][0] * ths.sin() * h / dth
                } else {
                    0.0
                };
                vol = two_pi * (r * r * h + h * h * h / 12.0) * band;
            }
            volumes[row] = vol;
            b.add(row, i, j, d_e + d_w + d_n + d_s);
            b.add(row, i + 1, j, -d_e);
            b.add(row, i - 1, j, -d_w);
            if has_jp {
                b.add(row, i, jp, -d_n);
            }
            if has_jm {
                b.add(row, i, jm, -d_s);
            }

            if drift_on {
                let x = mesh.point(i, j);
                let bv = coef.drift_at(&x, &problem.domain);
                let (er, et) = mesh.frame(th);
                let br: f64 = bv.iter().zip(&er).map(|(p, q)| p * q).sum();
                let bt: f64 = bv.iter().zip(&et).map(|(p, q)| p * q).sum();
                // radial transport
                if br != 0.0 {
                    let c = vol * br / (2.0 * h);
                    if c.abs() <= d_e.min(d_w) {
                        b.add(row, i + 1, j, c);
                        b.add(row, i - 1, j, -c);
                    } else if br > 0.0 {
                        b.add(row, i, j, 2.0 * c);
                        b.add(row, i - 1, j, -2.0 * c);
                    } else {
                        b.add(row, i + 1, j, 2.0 * c);
                        b.add(row, i, j, -2.0 * c);
                    }
                }
                // angular transport (skipped on the symmetry axis)
                if bt != 0.0 && has_jm && has_jp {
                    let c = vol * bt / (2.0 * r * dth);
                    if c.abs() <= d_n.min(d_s) {
                        b.add(row, i, jp, c);
                        b.add(row, i, jm, -c);
                    } else if bt > 0.0 {
                        b.add(row, i, j, 2.0 * c);
                        b.add(row, i, jm, -2.0 * c);
                    } else {
                        b.add(row, i, jp, 2.0 * c);
                        b.add(row, i, j, -2.0 * c);
                    }
                }
            }
        }
    }
    let Builder { trip, rhs, .. } = b;
    Ok(Assembly {
        matrix: trip.build(),
        rhs,
        volumes,
        mesh,
    })
}

/// Embeds interior unknowns into a full nodal vector with the given ring values.
fn embed(mesh: &PolarMesh, interior: &[f64], inner: f64, outer: f64) -> Vec<f64> {
    let nt = mesh.thetas.len();
    let nr = mesh.n_r;
    let mut v = vec![0.0; (nr + 1) * nt];
    for j in 0..nt {
        v[j] = inner;
        v[nr * nt + j] = outer;
    }
    v[nt..nr * nt].copy_from_slice(interior);
    v
}

/// Solves the annulus problem to relative residual `1e−10`.
pub fn solve_annulus(problem: &AnnulusProblem) -> Result<DiscreteField> {
    solve_annulus_to(problem, SOLVE_REL_TOL)
}

/// [`solve_annulus`] with a tighter (or looser) relative residual target,
/// e.g. for convergence studies where the algebraic error must stay below
/// the discretization error.
pub fn solve_annulus_to(problem: &AnnulusProblem, tol: f64) -> Result<DiscreteField> {
    let asm = assemble(problem, true)?;
    let (x, res) = solve_to(&asm.matrix, &asm.rhs, tol)?;
    Ok(DiscreteField {
        values: embed(&asm.mesh, &x, 1.0, 0.0),
        mesh: asm.mesh,
        residual: res,
    })
}

/// Same as [`solve_annulus`] with a direct banded factorization; the result
/// is a deterministic function of the matrix entries.
pub fn solve_annulus_direct(problem: &AnnulusProblem) -> Result<DiscreteField> {
    let asm = assemble(problem, true)?;
    let lu = BandedLu::factor(&asm.matrix)?;
    let (x, res) = lu.solve_refined(&asm.matrix, &asm.rhs)?;
    Ok(DiscreteField {
        values: embed(&asm.mesh, &x, 1.0, 0.0),
        mesh: asm.mesh,
        residual: res,
    })
}

/// Discrete Green column `G(·, y)` of `ℒ₀` (drift ignored) with zero boundary
/// data: the integrated system is solved with a unit right-hand side at the
/// source node `(i, j)`.
pub fn discrete_green_column(problem: &AnnulusProblem, source: (usize, usize)) -> Result<DiscreteField> {
    let asm = assemble(problem, false)?;
    let (i, j) = source;
    let nt = asm.mesh.thetas.len();
    if i == 0 || i >= asm.mesh.n_r || j >= nt {
        return Err(HopfError::Domain(format!(
            "Green source ({i}, {j}) must be an interior node (1 <= i < {}, j < {nt})",
            asm.mesh.n_r
        )));
    }
    let mut e = vec![0.0; asm.matrix.n];
    e[(i - 1) * nt + j] = 1.0;
    let (x, res) = solve(&asm.matrix, &e)?;
    Ok(DiscreteField {
        values: embed(&asm.mesh, &x, 0.0, 0.0),
        mesh: asm.mesh,
        residual: res,
    })
}

/// `D_n v(0)`: derivative along `+e_n` at the boundary point, from a
/// second-order one-sided radial stencil on the `θ = 0` ray.
pub fn normal_derivative_origin(field: &DiscreteField) -> Result<f64> {
    let mesh = &field.mesh;
    match mesh.kind {
        MeshKind::Annulus | MeshKind::AnnulusAxisymmetric => {
            if mesh.thetas.first() != Some(&0.0) || mesh.n_r < 2 {
                return Err(HopfError::Geometry("mesh has no boundary node at the origin".into()));
            }
            let h = mesh.radial_step();
            let v = |i: usize| field.values[mesh.idx(i, 0)];
            let nr = mesh.n_r;
            // +e_n at the origin is −e_r
            Ok(-(3.0 * v(nr) - 4.0 * v(nr - 1) + v(nr - 2)) / (2.0 * h))
        }
        MeshKind::Disc => super::cylinder::disc_normal_derivative(mesh, &field.values),
        MeshKind::Interval => super::cylinder::interval_normal_derivative(mesh, &field.values),
    }
}

/// Cartesian gradient at node `(i, j)` of an annulus field.
pub fn gradient_at(field: &DiscreteField, i: usize, j: usize) -> Vec<f64> {
    gradient_of(&field.mesh, &field.values, i, j)
}

pub(crate) fn gradient_of(mesh: &PolarMesh, values: &[f64], i: usize, j: usize) -> Vec<f64> {
    let nr = mesh.n_r;
    let nt = mesh.thetas.len();
    let h = mesh.radial_step();
    let dth = mesh.angular_step();
    let v = |i: usize, j: usize| values[i * nt + j];
    let dr = if i == 0 {
        (-3.0 * v(0, j) + 4.0 * v(1, j) - v(2, j)) / (2.0 * h)
    } else if i == nr {
        (3.0 * v(nr, j) - 4.0 * v(nr - 1, j) + v(nr - 2, j)) / (2.0 * h)
    } else {
        (v(i + 1, j) - v(i - 1, j)) / (2.0 * h)
    };
    let r = mesh.radii[i];
    let dt = match mesh.kind {
        MeshKind::Annulus => (v(i, (j + 1) % nt) - v(i, (j + nt - 1) % nt)) / (2.0 * dth * r),
        _ => {
            if j == 0 || j + 1 == nt {
                0.0
            } else {
                (v(i, j + 1) - v(i, j - 1)) / (2.0 * dth * r)
            }
        }
    };
    let (er, et) = mesh.frame(mesh.thetas[j]);
    er.iter().zip(&et).map(|(a, b)| dr * a + dt * b).collect()
}

/// `max |Dv|` over all nodes.
pub fn max_gradient(field: &DiscreteField) -> f64 {
    let nt = field.mesh.thetas.len();
    let mut m = 0.0f64;
    for i in 0..=field.mesh.n_r {
        for j in 0..nt {
            let g = gradient_at(field, i, j);
            m = m.max(g.iter().map(|c| c * c).sum::<f64>().sqrt());
        }
    }
    m
}

/// Whether the drift of `problem` vanishes identically.
pub fn has_drift(problem: &AnnulusProblem) -> bool {
    !matches!(problem.coefficients.b, DriftDescriptor::Zero) && !problem.coefficients.b.is_zero()
}
