//! Least-squares building blocks: an updatable QR factorization, LSQR, and a
//! pivot-checked Hermitian Cholesky factorization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{inner, norm2, LinearOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Rank threshold for a new column, relative to its norm.
pub const DEGENERATE_COLUMN_TOL: f64 = 1e-10;

/// Thin QR factorization `A = QR` of a growing column set, with the projection
/// `Q^* b` of a fixed right-hand side kept up to date. Each appended column
/// costs `O(N·s)` (two passes of modified Gram–Schmidt).
#[derive(Clone, Debug)]
pub struct IncrementalQr {
    rhs: Vec<Complex64>,
    q: Vec<Vec<Complex64>>,
    /// column `s` holds the `s + 1` nonzero entries of the `s`-th column of R
    r: Vec<Vec<Complex64>>,
    qtb: Vec<Complex64>,
}

impl IncrementalQr {
    pub fn new(rhs: Vec<Complex64>) -> Self {
        IncrementalQr { rhs, q: Vec::new(), r: Vec::new(), qtb: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Appends a column. `index` only labels the error.
    pub fn push(&mut self, column: &[Complex64], index: usize) -> Result<()> {
        if column.len() != self.rows() {
            return Err(Error::LengthMismatch { expected: self.rows(), got: column.len() });
        }
        let col_norm = norm2(column);
        let mut v = column.to_vec();
        let mut rcol = vec![ZERO; self.q.len() + 1];
        for _pass in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let h = inner(&v, qi);
                for (x, y) in v.iter_mut().zip(qi) {
                    *x -= h * y;
                }
                rcol[i] += h;
            }
        }
        let nv = norm2(&v);
        if col_norm == 0.0 || nv < DEGENERATE_COLUMN_TOL * col_norm {
            return Err(Error::DegenerateSelection { index });
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        rcol[self.q.len()] = Complex64::new(nv, 0.0);
        self.qtb.push(inner(&self.rhs, &v));
        self.q.push(v);
        self.r.push(rcol);
        Ok(())
    }

    /// Solution of `min ‖A d − b‖` by back substitution on `R d = Q^* b`.
    pub fn solve(&self) -> Vec<Complex64> {
        let s = self.q.len();
        let mut d = vec![ZERO; s];
        for i in (0..s).rev() {
            let mut acc = self.qtb[i];
            for j in (i + 1)..s {
                acc -= self.r[j][i] * d[j];
            }
            d[i] = acc / self.r[i][i];
        }
        d
    }

    /// `b − Q Q^* b`.
    pub fn residual(&self) -> Vec<Complex64> {
        let mut res = self.rhs.clone();
        for (qi, h) in self.q.iter().zip(&self.qtb) {
            for (x, y) in res.iter_mut().zip(qi) {
                *x -= h * y;
            }
        }
        res
    }

    /// Entry `(i, j)` of the triangular factor.
    pub fn r_entry(&self, i: usize, j: usize) -> Complex64 {
        if i > j {
            ZERO
        } else {
            self.r[j][i]
        }
    }
}

#[derive(Clone, Debug)]
pub struct LsqrOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖A^*(b − Ax)‖`
    pub normal_residual: f64,
}

/// LSQR for `min ‖A x − b‖₂`, started from `x0` (zero when `None`). Stops when
/// `‖A^*(b − Ax)‖ ≤ tol·‖A^*b‖`; each iteration costs one application of
/// `A` and one of `A^*`. Hitting `max_iter` returns the last iterate with
/// `converged = false`.
pub fn lsqr(
    a: &dyn LinearOperator,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<LsqrOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("LSQR tolerance must be positive".into()));
    }
    let n = a.cols();
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: x0.len() });
            }
            x0.to_vec()
        }
        None => vec![ZERO; n],
    };
    let atb_norm = norm2(&a.adjoint(b)?);
    let mut u: Vec<Complex64> = if x0.is_some() {
        let ax = a.apply(&x)?;
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    } else {
        b.to_vec()
    };
    let mut beta = norm2(&u);
    if atb_norm == 0.0 || beta == 0.0 {
        let x = if atb_norm == 0.0 { vec![ZERO; n] } else { x };
        return Ok(LsqrOutcome { solution: x, iterations: 0, converged: true, normal_residual: 0.0 });
    }
    scale(&mut u, 1.0 / beta);
    let mut v = a.adjoint(&u)?;
    let mut alpha = norm2(&v);
    if alpha == 0.0 {
        return Ok(LsqrOutcome { solution: x, iterations: 0, converged: true, normal_residual: 0.0 });
    }
    scale(&mut v, 1.0 / alpha);
    if max_iter == 0 {
        let normal_residual = alpha * beta;
        return Ok(LsqrOutcome { solution: x, iterations: 0, converged: false, normal_residual });
    }
    let mut w = v.clone();
    let mut phi_bar = beta;
    let mut rho_bar = alpha;
    let threshold = tol * atb_norm;

    for it in 1..=max_iter {
        // bidiagonalization step
        let av = a.apply(&v)?;
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - *ui * alpha;
        }
        beta = norm2(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
            let atu = a.adjoint(&u)?;
            for (vi, ai) in v.iter_mut().zip(&atu) {
                *vi = ai - *vi * beta;
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                scale(&mut v, 1.0 / alpha);
            }
        } else {
            alpha = 0.0;
        }
        // plane rotation
        let rho = (rho_bar * rho_bar + beta * beta).sqrt();
        let c = rho_bar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rho_bar = -c * alpha;
        let phi = c * phi_bar;
        phi_bar *= s;
        for (xi, wi) in x.iter_mut().zip(&w) {
            *xi += wi * (phi / rho);
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - *wi * (theta / rho);
        }
        // ‖A^* r‖ = φ̄ α |c|
        let normal_residual = phi_bar * alpha * c.abs();
        if normal_residual <= threshold || beta == 0.0 || alpha == 0.0 {
            return Ok(LsqrOutcome { solution: x, iterations: it, converged: true, normal_residual });
        }
        if it == max_iter {
            return Ok(LsqrOutcome { solution: x, iterations: it, converged: false, normal_residual });
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn scale(v: &mut [Complex64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

/// `G = L L^*` for a Hermitian positive definite `G`, rejecting pivots below
/// `rel_pivot_tol · max_i G_ii`.
#[derive(Clone, Debug)]
pub struct HermitianCholesky {
    n: usize,
    /// row-major lower triangle
    l: Vec<Complex64>,
}

impl HermitianCholesky {
    pub fn factor(g: &nalgebra::DMatrix<Complex64>, rel_pivot_tol: f64) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::InvalidArgument("Cholesky needs a square matrix".into()));
        }
        let scale = (0..n).map(|i| g[(i, i)].re).fold(0.0f64, f64::max);
        let mut l = vec![ZERO; n * n];
        for j in 0..n {
            let mut d = g[(j, j)].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > rel_pivot_tol * scale) || scale == 0.0 {
                return Err(Error::SingularSystem { row: j, pivot: if scale > 0.0 { d / scale } else { 0.0 } });
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut acc = g[(i, j)];
                for k in 0..j {
                    acc -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = acc / djj;
            }
        }
        Ok(HermitianCholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[i * n + k] * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= self.l[k * n + i].conj() * y[k];
            }
            y[i] = acc / self.l[i * n + i];
        }
        y
    }
}
