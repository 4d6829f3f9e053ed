//! Dense complex matrices and the eigen kernels used by the spectral module.
//!
//! Hermitian matrices are reduced to a real symmetric tridiagonal form with
//! Householder reflectors, eigenvalues come from implicit QL iteration, and
//! the requested eigenvectors from inverse iteration on the tridiagonal.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data: data.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> CMatrix {
        assert!(k <= self.cols);
        CMatrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A† x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij − conj(A_ji)|`; infinite for non-square matrices.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|x| x.im == 0.0)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Unconjugated dot product.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x * y)
}

/// `a† b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalizes the columns of `m` in place with two passes of modified
/// Gram–Schmidt. Columns that collapse are replaced by zero.
pub fn orthonormalize_columns(m: &mut CMatrix) {
    let (n, k) = (m.rows(), m.cols());
    let mut cols: Vec<Vec<C64>> = (0..k).map(|j| m.column(j)).collect();
    for j in 0..k {
        for _ in 0..2 {
            for p in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let proj = inner(&head[p], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[p]) {
                    *x -= proj * y;
                }
            }
        }
        let nrm = norm(&cols[j]);
        if nrm > 0.0 {
            cols[j].iter_mut().for_each(|x| *x /= nrm);
        }
    }
    for (j, c) in cols.iter().enumerate() {
        debug_assert_eq!(c.len(), n);
        m.set_column(j, c);
    }
}

/// Rotates each column so that its largest-magnitude entry is real and
/// nonnegative (first index wins among equal magnitudes).
pub fn normalize_column_phases(m: &mut CMatrix) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..m.rows() {
            let a = m[(i, j)].norm();
            if a > best_abs * (1.0 + 1e-12) {
                best_abs = a;
                best = i;
            }
        }
        if best_abs <= 0.0 {
            continue;
        }
        let phase = m[(best, j)].conj() / best_abs;
        for i in 0..m.rows() {
            m[(i, j)] *= phase;
        }
        m[(best, j)] = C64::new(m[(best, j)].norm(), 0.0);
    }
}

/// Scalar field over which the Householder reduction runs.
pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn re(self) -> f64;
    fn scale(self, s: f64) -> Self;
    /// `self / |self|`, or one for zero.
    fn unit_phase(self) -> Self;
    fn to_complex(self) -> C64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn unit_phase(self) -> Self {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
    fn to_complex(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn norm_sqr(self) -> f64 {
        C64::norm_sqr(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn unit_phase(self) -> Self {
        let a = self.norm();
        if a == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            self / a
        }
    }
    fn to_complex(self) -> C64 {
        self
    }
}

/// Householder reduction `A = Q D T D† Q†` with `T` real symmetric tridiagonal.
struct Tridiagonal<T> {
    diag: Vec<f64>,
    off: Vec<f64>,
    reflectors: Vec<Vec<T>>,
    phases: Vec<T>,
}

fn tridiagonalize<T: Scalar>(mut a: Vec<T>, n: usize) -> Tridiagonal<T> {
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut sub = vec![T::zero(); n.saturating_sub(1)];
    let mut p = vec![T::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let mut v: Vec<T> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let xnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            sub[k] = T::zero();
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = -(v[0].unit_phase().scale(xnorm));
        v[0] = v[0] - alpha;
        let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x = x.scale(1.0 / vnorm));
        // Trailing block B = A[k+1.., k+1..] receives B - 2 v q† - 2 q v†.
        let off = k + 1;
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            let mut s = T::zero();
            for (bij, &vj) in row.iter().zip(&v) {
                s = s + *bij * vj;
            }
            p[i] = s;
        }
        let kappa = v.iter().zip(&p[..m]).map(|(vi, pi)| (vi.conj() * *pi).re()).sum::<f64>();
        for i in 0..m {
            p[i] = p[i] - v[i].scale(kappa);
        }
        for i in 0..m {
            let vi2 = v[i].scale(2.0);
            let qi2 = p[i].scale(2.0);
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for j in 0..m {
                row[j] = row[j] - vi2 * p[j].conj() - qi2 * v[j].conj();
            }
        }
        sub[k] = alpha;
        reflectors.push(v);
    }
    if n >= 2 {
        sub[n - 2] = a[(n - 1) * n + (n - 2)];
    }
    let diag = (0..n).map(|i| a[i * n + i].re()).collect();
    let mut phases = Vec::with_capacity(n);
    if n > 0 {
        phases.push(T::zero().unit_phase());
    }
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for (k, s) in sub.iter().enumerate() {
        off.push(s.abs());
        let next = phases[k] * s.unit_phase();
        phases.push(next);
    }
    Tridiagonal { diag, off, reflectors, phases }
}

impl<T: Scalar> Tridiagonal<T> {
    /// Maps an eigenvector of the real tridiagonal back to the original basis.
    fn back_transform(&self, y: &[f64]) -> Vec<C64> {
        let n = y.len();
        let mut w: Vec<T> = y.iter().zip(&self.phases).map(|(&yi, &ph)| ph.scale(yi)).collect();
        for k in (0..self.reflectors.len()).rev() {
            let v = &self.reflectors[k];
            if v.is_empty() {
                continue;
            }
            let seg = &mut w[k + 1..n];
            let mut s = T::zero();
            for (vi, wi) in v.iter().zip(seg.iter()) {
                s = s + vi.conj() * *wi;
            }
            let s2 = s.scale(2.0);
            for (vi, wi) in v.iter().zip(seg.iter_mut()) {
                *wi = *wi - *vi * s2;
            }
        }
        w.into_iter().map(Scalar::to_complex).collect()
    }
}

/// Eigenvalues of the symmetric tridiagonal (`diag`, `off`) by implicit QL,
/// returned in ascending order.
pub(crate) fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>, usize> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.resize(n, 0.0);
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(MAX_ITER);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Solves `(T − λI) x = b` for symmetric tridiagonal `T` by Gaussian
/// elimination with partial pivoting; tiny pivots are replaced by `floor`.
fn shifted_tridiagonal_solve(diag: &[f64], off: &[f64], lambda: f64, b: &mut [f64], floor: f64) {
    let n = diag.len();
    if n == 1 {
        let p = diag[0] - lambda;
        b[0] /= if p.abs() < floor { floor.copysign(p) } else { p };
        return;
    }
    // Row i after elimination: u0[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2}.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    // Current working row i holds (a, bcoef, ccoef) on columns i, i+1, i+2.
    let mut a = diag[0] - lambda;
    let mut bc = off[0];
    let mut cc = 0.0;
    for i in 0..n - 1 {
        // Next row i+1 has (off[i], diag[i+1]-λ, off[i+1]) on columns i, i+1, i+2.
        let l = off[i];
        let dnext = diag[i + 1] - lambda;
        let enext = if i + 1 < n - 1 { off[i + 1] } else { 0.0 };
        if l.abs() > a.abs() {
            // Swap rows.
            u0[i] = l;
            u1[i] = dnext;
            u2[i] = enext;
            b.swap(i, i + 1);
            let m = a / l;
            a = bc - m * dnext;
            bc = cc - m * enext;
            cc = 0.0;
            b[i + 1] -= m * b[i];
        } else {
            let piv = if a.abs() < floor { floor.copysign(if a == 0.0 { 1.0 } else { a }) } else { a };
            u0[i] = piv;
            u1[i] = bc;
            u2[i] = cc;
            let m = l / piv;
            a = dnext - m * bc;
            bc = enext - m * cc;
            cc = 0.0;
            b[i + 1] -= m * b[i];
        }
    }
    u0[n - 1] = if a.abs() < floor { floor.copysign(if a == 0.0 { 1.0 } else { a }) } else { a };
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * b[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * b[i + 2];
        }
        b[i] = s / u0[i];
    }
}

fn tridiag_matvec(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        y[i] = s;
    }
    y
}

/// Eigenvectors of the tridiagonal for the given eigenvalues via inverse
/// iteration, reorthogonalized inside clusters of close eigenvalues.
fn tridiagonal_eigenvectors(diag: &[f64], off: &[f64], lambdas: &[f64]) -> Vec<Vec<f64>> {
    let n = diag.len();
    let tnorm = diag
        .iter()
        .map(|d| d.abs())
        .chain(off.iter().map(|e| 2.0 * e.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let floor = f64::EPSILON * tnorm;
    let cluster = 1e-3 * tnorm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(lambdas.len());
    for (j, &lambda) in lambdas.iter().enumerate() {
        // Deterministic, well-spread start vector.
        let mut x: Vec<f64> =
            (0..n).map(|i| 1.0 + 0.5 * (((i * 7919 + j * 104_729) % 1009) as f64 / 1009.0 - 0.5)).collect();
        let neighbours: Vec<usize> = (0..j).filter(|&p| (lambdas[p] - lambda).abs() <= cluster).collect();
        for it in 0..8 {
            shifted_tridiagonal_solve(diag, off, lambda, &mut x, floor);
            for _ in 0..2 {
                for &p in &neighbours {
                    let proj: f64 = out[p].iter().zip(&x).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(&out[p]).for_each(|(xi, pi)| *xi -= proj * pi);
                }
            }
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 || !nrm.is_finite() {
                x = (0..n).map(|i| if i == (j % n) { 1.0 } else { 0.0 }).collect();
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            if it >= 1 {
                let tx = tridiag_matvec(diag, off, &x);
                let res = tx.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
                if res <= 64.0 * f64::EPSILON * tnorm * (n as f64).sqrt() {
                    break;
                }
            }
        }
        out.push(x);
    }
    out
}

/// Top eigenpairs of a Hermitian matrix in descending eigenvalue order,
/// together with the full ascending spectrum.
pub(crate) struct HermitianEigen {
    pub values_desc: Vec<f64>,
    pub vectors: CMatrix,
    pub spectrum_asc: Vec<f64>,
}

/// Eigen-decomposition of a Hermitian matrix, returning the `k` largest
/// eigenpairs. Uses the real path when every entry is real.
pub(crate) fn hermitian_top_eigen(a: &CMatrix, k: usize) -> Result<HermitianEigen, usize> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert!(k <= n);
    if a.is_real() {
        let data: Vec<f64> = a.as_slice().iter().map(|x| x.re).collect();
        top_eigen_generic(tridiagonalize(data, n), n, k)
    } else {
        top_eigen_generic(tridiagonalize(a.as_slice().to_vec(), n), n, k)
    }
}

fn top_eigen_generic<T: Scalar>(t: Tridiagonal<T>, n: usize, k: usize) -> Result<HermitianEigen, usize> {
    let spectrum_asc = tridiagonal_eigenvalues(&t.diag, &t.off)?;
    let values_desc: Vec<f64> = spectrum_asc.iter().rev().take(k).copied().collect();
    let ys = tridiagonal_eigenvectors(&t.diag, &t.off, &values_desc);
    let mut vectors = CMatrix::zeros(n, k);
    for (j, y) in ys.iter().enumerate() {
        vectors.set_column(j, &t.back_transform(y));
    }
    orthonormalize_columns(&mut vectors);
    Ok(HermitianEigen { values_desc, vectors, spectrum_asc })
}

/// All eigenvalues of a Hermitian matrix in ascending order.
pub(crate) fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>, usize> {
    let n = a.rows();
    if a.is_real() {
        let data: Vec<f64> = a.as_slice().iter().map(|x| x.re).collect();
        let t = tridiagonalize(data, n);
        tridiagonal_eigenvalues(&t.diag, &t.off)
    } else {
        let t = tridiagonalize(a.as_slice().to_vec(), n);
        tridiagonal_eigenvalues(&t.diag, &t.off)
    }
}

/// Spectral norm `‖A‖₂` of an arbitrary complex matrix.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    let g = if a.rows() >= a.cols() { a.adjoint().matmul(a) } else { a.matmul(&a.adjoint()) };
    let g = hermitize(&g);
    match hermitian_eigenvalues(&g) {
        Ok(v) => v.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// `(A + A†)/2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Small dense real symmetric eigenproblem by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with eigenvectors as columns
/// (row-major `n×n`).
pub(crate) fn symmetric_jacobi(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        let total: f64 = m.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[b * n + b].total_cmp(&m[a * n + a]));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (newj, &oldj) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + newj] = v[k * n + oldj];
        }
    }
    (vals, vecs)
}
