//! Sparse linear algebra for the finite-volume systems.
//!
//! Single solves use ILU(0)-preconditioned BiCGSTAB with a restarted GMRES
//! fallback. Many right-hand sides against one matrix (time stepping, Green
//! columns) go through a banded LU factorization without pivoting; the
//! finite-volume matrices are diagonally dominant M-matrices (up to small
//! cross-derivative terms), for which elimination without pivoting is stable.

use crate::error::{HopfError, Result};

/// Relative residual required from every linear solve.
pub const SOLVE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(9 * n),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// `‖b − Ax‖₂ / ‖b‖₂` (absolute residual when `b = 0`).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.apply(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let nb = norm2(b);
        if nb == 0.0 {
            norm2(&r)
        } else {
            norm2(&r) / nb
        }
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// Largest positive off-diagonal entry relative to the diagonal of its
    /// row; `≤ 0` means every off-diagonal is nonpositive.
    pub fn max_offdiag_ratio(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.n {
            let d = self.get(i, i).abs().max(f64::MIN_POSITIVE);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] != i {
                    worst = worst.max(self.values[k] / d);
                }
            }
        }
        worst
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(HopfError::InvariantViolation(format!("matrix row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let piv = lu.values[diag[j]];
                if piv == 0.0 {
                    return Err(HopfError::InvariantViolation("zero pivot in ILU(0)".into()));
                }
                let l = lu.values[k] / piv;
                lu.values[k] = l;
                for kk in diag[j] + 1..lu.row_ptr[j + 1] {
                    let p = pos[lu.col_idx[kk]];
                    if p != usize::MAX {
                        lu.values[p] -= l * lu.values[kk];
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s / lu.values[self.diag[i]];
        }
    }
}

/// Right-preconditioned BiCGSTAB; returns `(x, relative residual, converged)`.
fn bicgstab(a: &CsrMatrix, m: &Ilu0, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, f64, bool) {
    let n = a.n;
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return (x, 0.0, true);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut phat);
        a.mul_vec(&phat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol * nb {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            break;
        }
        m.apply(&s, &mut shat);
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol * nb {
            break;
        }
    }
    let res = a.relative_residual(&x, b);
    (x, res, res <= tol)
}

/// Restarted GMRES(m) with right ILU(0) preconditioning, warm-started at `x0`.
fn gmres(a: &CsrMatrix, m: &Ilu0, b: &[f64], x0: Vec<f64>, tol: f64, restart: usize, max_restarts: usize) -> (Vec<f64>, f64, bool) {
    let n = a.n;
    let nb = norm2(b);
    let mut x = x0;
    if nb == 0.0 {
        return (vec![0.0; n], 0.0, true);
    }
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..max_restarts {
        let ax = a.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol * nb {
            break;
        }
        let mut vs: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            m.apply(&vs[k], &mut z);
            a.mul_vec(&z, &mut w);
            for (j, vj) in vs.iter().enumerate() {
                h[j][k] = dot(&w, vj);
                for i in 0..n {
                    w[i] -= h[j][k] * vj[i];
                }
            }
            h[k + 1][k] = norm2(&w);
            for j in 0..k {
                let tmp = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = tmp;
            }
            let den = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if den == 0.0 {
                break;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            let hk1 = h[k + 1][k];
            h[k][k] = cs[k] * h[k][k] + sn[k] * hk1;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let hn = norm2(&w);
            if g[k + 1].abs() <= 0.5 * tol * nb || hn == 0.0 {
                break;
            }
            vs.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                u[i] += yj * vs[j][i];
            }
        }
        m.apply(&u, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
    let res = a.relative_residual(&x, b);
    (x, res, res <= tol)
}

/// Solves `Ax = b` to relative residual [`SOLVE_REL_TOL`].
///
/// Returns the solution and the achieved relative residual.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    solve_to(a, b, SOLVE_REL_TOL)
}

/// [`solve`] with a caller-chosen relative residual target.
pub fn solve_to(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let m = Ilu0::new(a)?;
    let (x, res, ok) = bicgstab(a, &m, b, tol, 20 * a.n.max(100));
    if ok {
        return Ok((x, res));
    }
    let (x, res2, ok) = gmres(a, &m, b, x, tol, 80, 200);
    if ok {
        return Ok((x, res2));
    }
    Err(HopfError::IterationLimit {
        iterations: 80 * 200,
        residual: res2.min(res),
    })
}

/// LU factors of a banded matrix, stored row-wise over `[i − kl, i + ku]`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        let w = kl + ku + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                data[i * w + (j + kl - i)] = a.values[k];
            }
        }
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let piv = data[k * w + kl];
            if !(piv.abs() > 1e-14 * scale) {
                return Err(HopfError::InvariantViolation(format!(
                    "banded LU met a vanishing pivot at row {k}"
                )));
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let idx = i * w + (k + kl - i);
                let l = data[idx] / piv;
                if l == 0.0 {
                    continue;
                }
                data[idx] = l;
                for j in k + 1..=jmax {
                    data[i * w + (j + kl - i)] -= l * data[k * w + (j + kl - k)];
                }
            }
        }
        Ok(Self { n, kl, ku, data })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(kl)..i {
                s -= self.data[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                s -= self.data[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s / self.data[i * w + kl];
        }
    }

    /// Solve with up to three steps of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        let mut res = a.relative_residual(&x, b);
        for _ in 0..3 {
            if res <= SOLVE_REL_TOL {
                break;
            }
            let ax = a.apply(&x);
            let mut d: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            self.solve_in_place(&mut d);
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            res = a.relative_residual(&x, b);
        }
        if res <= SOLVE_REL_TOL {
            Ok((x, res))
        } else {
            Err(HopfError::IterationLimit {
                iterations: 3,
                residual: res,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 2.0 + shift);
            if i > 0 {
                t.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.add(i, i + 1, -0.9);
            }
        }
        t.build()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 0, -1.0);
        t.add(1, 1, 4.0);
        let a = t.build();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.apply(&[1.0, 1.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn iterative_and_banded_agree() {
        let a = laplace_1d(400, 0.01);
        let b: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.1).sin()).collect();
        let (x, res) = solve(&a, &b).unwrap();
        assert!(res <= SOLVE_REL_TOL);
        let lu = BandedLu::factor(&a).unwrap();
        let (y, res2) = lu.solve_refined(&a, &b).unwrap();
        assert!(res2 <= SOLVE_REL_TOL);
        let diff = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff <= 1e-8 * scale, "{diff}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(10, 0.0);
        let (x, res) = solve(&a, &[0.0; 10]).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(res, 0.0);
    }
}
