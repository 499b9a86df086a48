//! Hopf-constant experiments built on the solvers: the perturbation chain
//! `D_nψ₀ − |Dz − Dψ₀| − |Dv − Dz|`, scans of `c(ρ) = ρ·D_n v(0)` across
//! dyadic radii, and the discrete norm of the drift operator `𝕋₁`.
//!
//! Scan rows are independent and run on a rayon pool of `jobs` threads; the
//! results are merged in grid order, so reports do not depend on `jobs`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{self, DriftDescriptor};
use crate::error::{HopfError, Result};
use crate::geometry::{DomainModel, ProblemKind};
use crate::solver::coefficients::CoefficientField;
use crate::solver::cylinder::{max_space_time_gradient, TimeScheme};
use crate::solver::linalg::BandedLu;
use crate::solver::{
    assemble, max_gradient, normal_derivative_origin, solve_annulus, solve_cylinder, AnnulusProblem,
    CylinderProblem, MatrixField, MeshSize,
};

/// Largest mesh accepted by the `𝕋₁` estimate (one Green column per node).
pub const T1_MESH_CAP: (usize, usize) = (64, 96);
/// Largest mesh accepted by the dense `(I + 𝕋₁)⁻¹` check.
pub const T1_DENSE_CAP: (usize, usize) = (24, 36);

/// Named coefficient field used by the scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFamily {
    pub label: String,
    pub coefficients: CoefficientField,
}

impl CoefficientFamily {
    pub fn new(label: impl Into<String>, coefficients: CoefficientField) -> Self {
        Self {
            label: label.into(),
            coefficients,
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", CoefficientField::identity())
    }

    /// `a = (1 + ε·σ(|x|)·cos θ)·I` with drift `b`.
    pub fn perturbed(label: impl Into<String>, eps: f64, sigma: crate::ModulusDescriptor, b: DriftDescriptor) -> Self {
        Self::new(label, CoefficientField::new(MatrixField::Perturbed { eps, sigma }, b))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.coefficients.validate(n)
    }
}

pub fn default_elliptic_mesh() -> MeshSize {
    MeshSize {
        n_r: 64,
        n_theta: 96,
        n_t: None,
    }
}

pub fn default_parabolic_mesh(n: usize) -> MeshSize {
    if n == 1 {
        MeshSize {
            n_r: 256,
            n_theta: 1,
            n_t: Some(256),
        }
    } else {
        MeshSize {
            n_r: 32,
            n_theta: 64,
            n_t: Some(128),
        }
    }
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HopfError::ResourceLimit(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn is_identity(a0: &[Vec<f64>]) -> bool {
    a0.iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 }))
}

/// `D_nψ₀(0)` for the frozen constant-coefficient problem. For `A₀ = I` the
/// closed form `1/(ρ ln 2)` (n = 2) or `1/ρ` (n = 3) is returned.
pub fn constant_coefficient_lower_bound(rho: f64, a0: &[Vec<f64>], n: usize, mesh: MeshSize) -> Result<f64> {
    let field = CoefficientField::new(MatrixField::Constant { a0: a0.to_vec() }, DriftDescriptor::Zero);
    let problem = AnnulusProblem::new(rho, n, field, mesh.n_r, mesh.n_theta);
    problem.validate()?;
    if is_identity(a0) {
        return Ok(if n == 2 { 1.0 / (rho * std::f64::consts::LN_2) } else { 1.0 / rho });
    }
    normal_derivative_origin(&solve_annulus(&problem)?)
}

/// Gradient quantities of the perturbation chain at the boundary point.
///
/// All three solutions vanish on the outer circle, so their tangential
/// derivatives at the origin are zero and `|Du(0) − Dw(0)|` reduces to
/// `|D_n u(0) − D_n w(0)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainTerms {
    /// `D_n v(0)`
    pub dnv0: f64,
    /// `D_nψ₀(0)`
    pub psi_term: f64,
    /// `|Dz(0) − Dψ₀(0)|`
    pub z_minus_psi: f64,
    /// `|Dv(0) − Dz(0)|`
    pub v_minus_z: f64,
    /// `ρ·max|Dz|` over the mesh (and time levels for cylinders).
    pub gradient_rho: f64,
}

fn frozen_field(field: &CoefficientField, n: usize, rho: f64) -> CoefficientField {
    let mut center = vec![0.0; n];
    center[n - 1] = rho;
    CoefficientField {
        a: field.a.frozen(&vec![0.0; n], &center),
        b: DriftDescriptor::Zero,
        nu: field.nu,
    }
}

/// Solves the frozen (`ψ₀`), drift-free (`z`) and full (`v`) annulus
/// problems on one mesh and returns the chain terms.
pub fn perturbation_chain(rho: f64, n: usize, family: &CoefficientFamily, mesh: MeshSize) -> Result<ChainTerms> {
    let field = &family.coefficients;
    let problem = AnnulusProblem::new(rho, n, field.clone(), mesh.n_r, mesh.n_theta);
    problem.validate()?;
    let psi = solve_annulus(&problem.with_coefficients(frozen_field(field, n, rho)))?;
    let z = solve_annulus(&problem.with_coefficients(field.without_drift()))?;
    let v = solve_annulus(&problem)?;
    let (dpsi, dz, dv) = (
        normal_derivative_origin(&psi)?,
        normal_derivative_origin(&z)?,
        normal_derivative_origin(&v)?,
    );
    Ok(ChainTerms {
        dnv0: dv,
        psi_term: dpsi,
        z_minus_psi: (dz - dpsi).abs(),
        v_minus_z: (dv - dz).abs(),
        gradient_rho: rho * max_gradient(&z),
    })
}

/// Parabolic analogue of [`perturbation_chain`] at `(0; 0)`.
pub fn parabolic_chain(
    rho: f64,
    n: usize,
    family: &CoefficientFamily,
    mesh: MeshSize,
    scheme: TimeScheme,
) -> Result<ChainTerms> {
    let field = &family.coefficients;
    let n_t = mesh.n_t.unwrap_or(0);
    let problem = CylinderProblem::new(rho, n, field.clone(), mesh.n_r, mesh.n_theta, n_t).with_scheme(scheme);
    problem.validate()?;
    let final_dn = |p: &CylinderProblem| -> Result<(f64, f64)> {
        let f = solve_cylinder(p)?;
        let (lo, hi) = f.min_max();
        if !(lo >= -1e-12 && hi <= 1.0 + 1e-12) {
            return Err(HopfError::Breakdown(format!(
                "cylinder solution left [0, 1]: range [{lo}, {hi}]"
            )));
        }
        Ok((normal_derivative_origin(&f.final_slice())?, max_space_time_gradient(&f)))
    };
    let (dpsi, _) = final_dn(&problem.with_coefficients(frozen_field(field, n, rho)))?;
    let (dz, gz) = final_dn(&problem.with_coefficients(field.without_drift()))?;
    let (dv, _) = final_dn(&problem)?;
    Ok(ChainTerms {
        dnv0: dv,
        psi_term: dpsi,
        z_minus_psi: (dz - dpsi).abs(),
        v_minus_z: (dv - dz).abs(),
        gradient_rho: rho * gz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfRow {
    pub rho: f64,
    pub dnv0: f64,
    /// `c(ρ) = ρ·D_n v(0)`
    pub c: f64,
    pub psi_term: f64,
    pub z_minus_psi: f64,
    pub v_minus_z: f64,
    pub gradient_rho: f64,
    /// `ok` or `failed: <reason>`.
    pub status: String,
}

impl HopfRow {
    fn from_result(rho: f64, r: Result<ChainTerms>) -> Self {
        match r {
            Ok(t) if t.dnv0.is_finite() => Self {
                rho,
                dnv0: t.dnv0,
                c: rho * t.dnv0,
                psi_term: t.psi_term,
                z_minus_psi: t.z_minus_psi,
                v_minus_z: t.v_minus_z,
                gradient_rho: t.gradient_rho,
                status: "ok".into(),
            },
            Ok(_) => Self::failed(rho, "non-finite normal derivative"),
            Err(e) => Self::failed(rho, &e.to_string()),
        }
    }

    fn failed(rho: f64, why: &str) -> Self {
        Self {
            rho,
            dnv0: f64::NAN,
            c: f64::NAN,
            psi_term: f64::NAN,
            z_minus_psi: f64::NAN,
            v_minus_z: f64::NAN,
            gradient_rho: f64::NAN,
            status: format!("failed: {why}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub c_min: f64,
    pub c_max: f64,
    /// `c_max / c_min` over successful rows.
    pub c_ratio: f64,
    /// `c` strictly decreases as `ρ` decreases along the grid.
    pub c_decreasing_as_rho_shrinks: bool,
    /// `max ρ·|Dz − Dψ₀|/𝒥_σ(2ρ)` for Dini coefficient families.
    pub z_minus_psi_fit: Option<f64>,
    /// `max/min` of `ρ·max|Dz|` across the grid.
    pub gradient_ratio: f64,
    pub failed_rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfScanReport {
    pub family: String,
    pub kind: ProblemKind,
    pub n: usize,
    pub mesh: MeshSize,
    /// Sorted by `ρ` descending.
    pub rows: Vec<HopfRow>,
    pub summary: ScanSummary,
}

impl HopfScanReport {
    pub const CSV_HEADER: &'static str = "rho,dnv0,c,psi_term,z_minus_psi,v_minus_z,status";

    fn new(family: &CoefficientFamily, kind: ProblemKind, n: usize, mesh: MeshSize, rows: Vec<HopfRow>) -> Self {
        let ok: Vec<&HopfRow> = rows.iter().filter(|r| r.is_ok()).collect();
        let cs: Vec<f64> = ok.iter().map(|r| r.c).collect();
        let c_min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_max = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let grads: Vec<f64> = ok.iter().map(|r| r.gradient_rho).collect();
        let g_min = grads.iter().cloned().fold(f64::INFINITY, f64::min);
        let g_max = grads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z_minus_psi_fit = family
            .coefficients
            .a
            .declared_modulus()
            .filter(|m| m.is_dini())
            .and_then(|m| {
                let mut worst = 0.0f64;
                for r in &ok {
                    worst = worst.max(r.rho * r.z_minus_psi / m.dini_integral((2.0 * r.rho).min(1.0)).ok()?);
                }
                Some(worst)
            });
        let summary = ScanSummary {
            c_min,
            c_max,
            c_ratio: c_max / c_min,
            c_decreasing_as_rho_shrinks: cs.len() >= 2 && cs.windows(2).all(|w| w[1] < w[0]),
            z_minus_psi_fit,
            gradient_ratio: g_max / g_min,
            failed_rho: rows.iter().filter(|r| !r.is_ok()).map(|r| r.rho).collect(),
        };
        Self {
            family: family.label.clone(),
            kind,
            n,
            mesh,
            rows,
            summary,
        }
    }

    pub fn has_failures(&self) -> bool {
        !self.summary.failed_rho.is_empty()
    }

    /// CSV body with the header line.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.rho, r.dnv0, r.c, r.psi_term, r.z_minus_psi, r.v_minus_z, r.status
            );
        }
        s
    }
}

fn sorted_grid(rhos: &[f64], radius: f64) -> Result<Vec<f64>> {
    if rhos.is_empty() {
        return Err(HopfError::Domain("empty rho grid".into()));
    }
    for &r in rhos {
        if !(r > 0.0 && 2.0 * r <= radius) {
            return Err(HopfError::Domain(format!("rho = {r} outside (0, R/2] with R = {radius}")));
        }
    }
    let mut g = rhos.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g.dedup();
    Ok(g)
}

/// Scans `c(ρ) = ρ·D_n v(0)` for the annulus problems. The mesh is the same
/// polar mesh at every `ρ`, so the number of cells per `ρ` is constant.
/// Failed rows are reported, never fatal.
pub fn hopf_constant_scan(
    family: &CoefficientFamily,
    n: usize,
    rhos: &[f64],
    mesh: MeshSize,
    jobs: usize,
) -> Result<HopfScanReport> {
    family.validate(n)?;
    let grid = sorted_grid(rhos, 1.0)?;
    AnnulusProblem::new(grid[0], n, family.coefficients.clone(), mesh.n_r, mesh.n_theta).validate()?;
    let rows = run_in_pool(jobs, || {
        grid.par_iter()
            .map(|&rho| HopfRow::from_result(rho, perturbation_chain(rho, n, family, mesh)))
            .collect::<Vec<_>>()
    })?;
    Ok(HopfScanReport::new(family, ProblemKind::Elliptic, n, mesh, rows))
}

/// Scans `c_p(ρ) = ρ·D_n ṽ(0; 0)` for the cylinder problems.
pub fn parabolic_hopf_scan(
    family: &CoefficientFamily,
    n: usize,
    rhos: &[f64],
    mesh: MeshSize,
    scheme: TimeScheme,
    jobs: usize,
) -> Result<HopfScanReport> {
    family.validate(n)?;
    let grid = sorted_grid(rhos, 1.0)?;
    CylinderProblem::new(
        grid[0],
        n,
        family.coefficients.clone(),
        mesh.n_r,
        mesh.n_theta,
        mesh.n_t.unwrap_or(0),
    )
    .validate()?;
    let rows = run_in_pool(jobs, || {
        grid.par_iter()
            .map(|&rho| HopfRow::from_result(rho, parabolic_chain(rho, n, family, mesh, scheme)))
            .collect::<Vec<_>>()
    })?;
    Ok(HopfScanReport::new(family, ProblemKind::Parabolic, n, mesh, rows))
}

fn check_t1_mesh(mesh: MeshSize, cap: (usize, usize)) -> Result<()> {
    if mesh.n_r > cap.0 || mesh.n_theta > cap.1 {
        return Err(HopfError::ResourceLimit(format!(
            "mesh {}x{} exceeds the cap {}x{} for this operation",
            mesh.n_r, mesh.n_theta, cap.0, cap.1
        )));
    }
    Ok(())
}

/// Interior-node data shared by the `𝕋₁` computations.
struct T1Setup {
    asm: crate::solver::Assembly,
    lu: BandedLu,
    /// `b(y)` at the interior nodes.
    drift: Vec<Vec<f64>>,
}

fn t1_setup(rho: f64, coefficients: &CoefficientField, mesh: MeshSize) -> Result<T1Setup> {
    let problem = AnnulusProblem::new(rho, 2, coefficients.clone(), mesh.n_r, mesh.n_theta);
    problem.validate()?;
    let asm = assemble(&problem, false)?;
    let lu = BandedLu::factor(&asm.matrix)?;
    let m = &asm.mesh;
    let nt = m.thetas.len();
    let drift = (0..asm.matrix.n)
        .map(|k| coefficients.drift_at(&m.point(k / nt + 1, k % nt), &problem.domain))
        .collect();
    Ok(T1Setup { asm, lu, drift })
}

impl T1Setup {
    /// Green column `G₀(·, y)` over the interior nodes.
    fn green_column(&self, y: usize) -> Result<Vec<f64>> {
        let a = &self.asm.matrix;
        let mut e = vec![0.0; a.n];
        e[y] = 1.0;
        Ok(self.lu.solve_refined(a, &e)?.0)
    }

    /// Polar components `(∂_r, r⁻¹∂_θ)` of `D_xG₀(x, y)` at interior node `x`
    /// (central differences; the boundary rings carry zero).
    fn polar_gradient(&self, g: &[f64], x: usize) -> (f64, f64) {
        let m = &self.asm.mesh;
        let nt = m.thetas.len();
        let nint = m.n_r - 1;
        let (ii, j) = (x / nt, x % nt);
        let at = |i: usize, j: usize| if i < nint { g[i * nt + j] } else { 0.0 };
        let up = at(ii + 1, j);
        let down = if ii == 0 { 0.0 } else { at(ii - 1, j) };
        let dr = (up - down) / (2.0 * m.radial_step());
        let dt = (at(ii, (j + 1) % nt) - at(ii, (j + nt - 1) % nt)) / (2.0 * m.angular_step() * m.radii[ii + 1]);
        (dr, dt)
    }

    /// Cartesian `D_xG₀(x, y)` at every interior `x` for the source `y`.
    fn green_gradients(&self, y: usize) -> Result<Vec<[f64; 2]>> {
        let g = self.green_column(y)?;
        let m = &self.asm.mesh;
        let nt = m.thetas.len();
        Ok((0..g.len())
            .map(|x| {
                let (dr, dt) = self.polar_gradient(&g, x);
                let (er, et) = m.frame(m.thetas[x % nt]);
                [dr * er[0] + dt * et[0], dr * er[1] + dt * et[1]]
            })
            .collect())
    }
}

/// Discrete `𝒞 → 𝒞` norm of `(𝕋₁f)(x) = ∫ D_xG₀(x, y)·b(y)·f(y) dy` on the
/// annulus (`n = 2`), with `G₀` the discrete Green function of the
/// drift-free operator:
/// `max_x Σ_y |D_xG₀(x, y)|·|b(y)|·|V_y|` over interior nodes.
///
/// Columns are computed in fixed chunks and reduced in chunk order, so the
/// value is independent of the number of threads.
pub fn estimate_t1_norm(rho: f64, coefficients: &CoefficientField, mesh: MeshSize) -> Result<f64> {
    check_t1_mesh(mesh, T1_MESH_CAP)?;
    if coefficients.b.is_zero() {
        AnnulusProblem::new(rho, 2, coefficients.clone(), mesh.n_r, mesh.n_theta).validate()?;
        return Ok(0.0);
    }
    let setup = t1_setup(rho, coefficients, mesh)?;
    let n = setup.asm.matrix.n;
    let weights: Vec<f64> = setup
        .drift
        .iter()
        .zip(&setup.asm.volumes)
        .map(|(b, v)| b.iter().map(|c| c * c).sum::<f64>().sqrt() * v)
        .collect();
    const CHUNK: usize = 64;
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials = starts
        .par_iter()
        .map(|&s| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; n];
            for y in s..(s + CHUNK).min(n) {
                if weights[y] == 0.0 {
                    continue;
                }
                let g = setup.green_column(y)?;
                for (x, a) in acc.iter_mut().enumerate() {
                    let (dr, dt) = setup.polar_gradient(&g, x);
                    *a += (dr * dr + dt * dt).sqrt() * weights[y];
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![0.0; n];
    for p in &partials {
        for (r, v) in rows.iter_mut().zip(p) {
            *r += v;
        }
    }
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// Result of the dense `(I + 𝕋₁)` check on a small mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1InverseCheck {
    /// Block-row-sum norm of `𝕋₁` (same definition as [`estimate_t1_norm`]).
    pub norm: f64,
    /// Block-row-sum norm of `(I + 𝕋₁)⁻¹`; `None` if the matrix is singular.
    pub inverse_norm: Option<f64>,
}

impl T1InverseCheck {
    /// `‖𝕋₁‖ < 1/2` implies an inverse with norm at most 2.
    pub fn neumann_bound_holds(&self) -> bool {
        self.norm >= 0.5 || self.inverse_norm.is_some_and(|m| m <= 2.0)
    }
}

/// Spectral norm of a 2×2 block.
fn block_norm(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let f = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (f + (f * f - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

fn block_row_sum_norm(m: &DMatrix<f64>) -> f64 {
    let nb = m.nrows() / 2;
    (0..nb)
        .map(|x| {
            (0..nb)
                .map(|y| {
                    block_norm(
                        m[(2 * x, 2 * y)],
                        m[(2 * x, 2 * y + 1)],
                        m[(2 * x + 1, 2 * y)],
                        m[(2 * x + 1, 2 * y + 1)],
                    )
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Assembles `𝕋₁` densely (blocks `D_xG₀(x, y)·b(y)ᵀ·|V_y|`) and inverts
/// `I + 𝕋₁`; mesh capped at [`T1_DENSE_CAP`].
pub fn t1_inverse_check(rho: f64, coefficients: &CoefficientField, mesh: MeshSize) -> Result<T1InverseCheck> {
    check_t1_mesh(mesh, T1_DENSE_CAP)?;
    let setup = t1_setup(rho, coefficients, mesh)?;
    let n = setup.asm.matrix.n;
    let mut t = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for y in 0..n {
        let b = &setup.drift[y];
        let v = setup.asm.volumes[y];
        if b.iter().all(|&c| c == 0.0) {
            continue;
        }
        for (x, d) in setup.green_gradients(y)?.iter().enumerate() {
            for p in 0..2 {
                for q in 0..2 {
                    t[(2 * x + p, 2 * y + q)] = d[p] * b[q] * v;
                }
            }
        }
    }
    let norm = block_row_sum_norm(&t);
    let inverse_norm = (DMatrix::identity(2 * n, 2 * n) + t)
        .lu()
        .try_inverse()
        .map(|inv| block_row_sum_norm(&inv));
    Ok(T1InverseCheck { norm, inverse_norm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Row {
    pub rho: f64,
    pub norm: f64,
    /// `ω(2ρ)` of the drift on the unit half-disc.
    pub omega_2rho: f64,
    pub ratio: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Report {
    pub drift: String,
    pub mesh: MeshSize,
    pub rows: Vec<T1Row>,
    /// `max/min` of `norm/ω(2ρ)` over successful rows with `ω > 0`.
    pub ratio_spread: f64,
    pub failed_rho: Vec<f64>,
}

impl T1Report {
    pub const CSV_HEADER: &'static str = "rho,norm,omega_2rho,ratio,status";

    pub fn has_failures(&self) -> bool {
        !self.failed_rho.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.rho, r.norm, r.omega_2rho, r.ratio, r.status);
        }
        s
    }
}

/// `‖𝕋₁‖` and `ω(2ρ)` across a `ρ` grid.
pub fn t1_norm_scan(coefficients: &CoefficientField, rhos: &[f64], mesh: MeshSize, jobs: usize) -> Result<T1Report> {
    coefficients.validate(2)?;
    check_t1_mesh(mesh, T1_MESH_CAP)?;
    let grid = sorted_grid(rhos, 1.0)?;
    let domain = DomainModel::elliptic(2, 1.0);
    let rows = run_in_pool(jobs, || {
        grid.iter()
            .map(|&rho| {
                let r = estimate_t1_norm(rho, coefficients, mesh).and_then(|norm| {
                    let w = if coefficients.b.is_zero() {
                        0.0
                    } else {
                        drift::omega(&coefficients.b, &domain, 2.0 * rho)?
                    };
                    Ok((norm, w))
                });
                match r {
                    Ok((norm, w)) => T1Row {
                        rho,
                        norm,
                        omega_2rho: w,
                        ratio: if w > 0.0 { norm / w } else { 0.0 },
                        status: "ok".into(),
                    },
                    Err(e) => T1Row {
                        rho,
                        norm: f64::NAN,
                        omega_2rho: f64::NAN,
                        ratio: f64::NAN,
                        status: format!("failed: {e}"),
                    },
                }
            })
            .collect::<Vec<_>>()
    })?;
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.status == "ok" && r.omega_2rho > 0.0)
        .map(|r| r.ratio)
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(T1Report {
        drift: coefficients.b.label(),
        mesh,
        failed_rho: rows.iter().filter(|r| r.status != "ok").map(|r| r.rho).collect(),
        rows,
        ratio_spread: if ratios.is_empty() { f64::NAN } else { hi / lo },
    })
}
