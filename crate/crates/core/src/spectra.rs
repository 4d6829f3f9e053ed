//! Top-`r` spectral factorizations `Q_r = V V†`.
//!
//! Dense inputs go through the Householder/QL eigensolver in [`crate::linalg`].
//! Sparse Laplacians use block subspace iteration with Rayleigh–Ritz
//! extraction. Non-Hermitian inputs are factored through the eigenpairs of
//! `Q Q†`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{HermitianOperand, QuadraticObjective};
use crate::error::{Error, Result};
use crate::graph::{Laplacian, LaplacianStorage, SparseSymmetric};
use crate::linalg::{self, CMatrix, C64};

/// Convergence tolerance of the iterative path, relative to the spectral scale.
pub const ITERATIVE_TOL: f64 = 1e-10;
/// Iteration cap of the iterative path.
pub const ITERATIVE_CAP: usize = 10_000;

/// Leading eigenpairs (or singular triplets) of an objective matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactor {
    pub n: usize,
    pub r: usize,
    /// `λ_1 ≥ … ≥ λ_r`.
    pub values: Vec<f64>,
    /// Orthonormal columns.
    pub vectors: CMatrix,
    /// Estimate of `λ_{r+1}` (zero when `r = n`).
    pub residual_estimate: f64,
    /// Whether the values are singular values of a non-Hermitian input.
    pub singular: bool,
}

impl SpectralFactor {
    /// `V = vectors · diag(sqrt(max(λ, 0)))`, so that `V V†` is the rank-`r`
    /// approximation with negative eigenvalues truncated.
    pub fn scaled(&self) -> CMatrix {
        let s: Vec<f64> = self.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
        CMatrix::from_fn(self.n, self.r, |i, j| self.vectors[(i, j)] * s[j])
    }
}

/// Top-`r` factor of a dense or sparse objective.
pub fn top_r_factor<O: QuadraticObjective + ?Sized>(q: &O, r: usize) -> Result<SpectralFactor> {
    let n = q.dim();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    match q.dense() {
        Some(dense) => dense_factor(dense, r),
        None => Err(Error::InvalidArgument("operator has no dense form; use top_r_factor_laplacian".into())),
    }
}

/// Top-`r` factor of a graph Laplacian, dense or sparse.
pub fn top_r_factor_laplacian(l: &Laplacian, r: usize) -> Result<SpectralFactor> {
    let n = l.n();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    match l.storage() {
        LaplacianStorage::Dense(q) => dense_factor(q, r),
        LaplacianStorage::Sparse(s) => subspace_iteration(s, r),
    }
}

fn dense_factor(q: &HermitianOperand, r: usize) -> Result<SpectralFactor> {
    let n = q.n();
    if q.is_hermitian() {
        let a = linalg::hermitize(q.entries());
        let e = linalg::hermitian_top_eigen(&a, r).map_err(Error::NonConvergence)?;
        let mut vectors = e.vectors;
        linalg::normalize_column_phases(&mut vectors);
        let residual_estimate = if r < n { e.spectrum_asc[n - 1 - r] } else { 0.0 };
        Ok(SpectralFactor { n, r, values: e.values_desc, vectors, residual_estimate, singular: false })
    } else {
        let a = q.entries();
        let g = linalg::hermitize(&a.matmul(&a.adjoint()));
        let e = linalg::hermitian_top_eigen(&g, r).map_err(Error::NonConvergence)?;
        let mut vectors = e.vectors;
        linalg::normalize_column_phases(&mut vectors);
        let values = e.values_desc.iter().map(|v| v.max(0.0).sqrt()).collect();
        let residual_estimate = if r < n { e.spectrum_asc[n - 1 - r].max(0.0).sqrt() } else { 0.0 };
        Ok(SpectralFactor { n, r, values, vectors, residual_estimate, singular: true })
    }
}

/// All eigenvalues of a Hermitian matrix, in nonincreasing order.
pub fn eigenvalues_desc(q: &HermitianOperand) -> Result<Vec<f64>> {
    let a = linalg::hermitize(q.entries());
    let mut v = linalg::hermitian_eigenvalues(&a).map_err(Error::NonConvergence)?;
    v.reverse();
    Ok(v)
}

/// `V_r Σ_r V_r†`.
pub fn low_rank_reconstruct(f: &SpectralFactor) -> HermitianOperand {
    let scaled = CMatrix::from_fn(f.n, f.r, |i, j| f.vectors[(i, j)] * f.values[j]);
    let q = scaled.matmul(&f.vectors.adjoint());
    HermitianOperand::new(linalg::hermitize(&q)).expect("hermitized product is Hermitian")
}

/// `δ = min(min_{j<r} |λ_j − λ_{j+1}|, λ_r)`; for `r = 1` the first minimum is
/// empty and the gap is `λ_1`.
pub fn eigengap(values_full: &[f64], r: usize) -> Result<f64> {
    if r == 0 || r > values_full.len() {
        return Err(Error::RankOutOfRange { r, n: values_full.len() });
    }
    let mut gap = values_full[r - 1];
    for j in 0..r - 1 {
        gap = gap.min((values_full[j] - values_full[j + 1]).abs());
    }
    Ok(gap)
}

/// Block subspace iteration on `A + sI` with a Gershgorin shift `s` that makes
/// the shifted operator positive semidefinite.
fn subspace_iteration(a: &SparseSymmetric, r: usize) -> Result<SpectralFactor> {
    let n = a.n();
    let block = (r + 8).min(n);
    let shift = (-a.gershgorin_lower()).max(0.0);
    let scale = a.gershgorin_upper().abs().max(a.gershgorin_lower().abs()).max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // Column-major block: x[j] is column j.
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    orthonormalize_real(&mut x);
    let mut y = vec![vec![0.0; n]; block];
    for iter in 1..=ITERATIVE_CAP {
        for j in 0..block {
            a.matvec_real(&x[j], &mut y[j]);
            for (yi, xi) in y[j].iter_mut().zip(&x[j]) {
                *yi += shift * xi;
            }
        }
        std::mem::swap(&mut x, &mut y);
        orthonormalize_real(&mut x);
        if iter % 5 != 0 && iter != ITERATIVE_CAP {
            continue;
        }
        // Rayleigh–Ritz on the unshifted operator.
        let ax: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let mut out = vec![0.0; n];
                a.matvec_real(col, &mut out);
                out
            })
            .collect();
        let mut h = vec![0.0; block * block];
        for p in 0..block {
            for q in 0..block {
                h[p * block + q] = x[p].iter().zip(&ax[q]).map(|(u, v)| u * v).sum();
            }
        }
        for p in 0..block {
            for q in p + 1..block {
                let m = 0.5 * (h[p * block + q] + h[q * block + p]);
                h[p * block + q] = m;
                h[q * block + p] = m;
            }
        }
        let (theta, w) = linalg::symmetric_jacobi(&h, block);
        let rotate = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..block)
                .map(|j| {
                    let mut out = vec![0.0; n];
                    for (p, col) in cols.iter().enumerate() {
                        let c = w[p * block + j];
                        if c != 0.0 {
                            out.iter_mut().zip(col).for_each(|(o, v)| *o += c * v);
                        }
                    }
                    out
                })
                .collect()
        };
        x = rotate(&x);
        let axr = rotate(&ax);
        let converged = (0..r).all(|j| {
            let res: f64 = axr[j].iter().zip(&x[j]).map(|(u, v)| (u - theta[j] * v).powi(2)).sum::<f64>().sqrt();
            res <= ITERATIVE_TOL * scale
        });
        if converged {
            let mut vectors = CMatrix::from_fn(n, r, |i, j| C64::new(x[j][i], 0.0));
            linalg::normalize_column_phases(&mut vectors);
            let residual_estimate = if r < block { theta[r] } else { 0.0 };
            return Ok(SpectralFactor {
                n,
                r,
                values: theta[..r].to_vec(),
                vectors,
                residual_estimate,
                singular: false,
            });
        }
    }
    Err(Error::NonConvergence(ITERATIVE_CAP))
}

fn orthonormalize_real(cols: &mut [Vec<f64>]) {
    for j in 0..cols.len() {
        for _ in 0..2 {
            for p in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let proj: f64 = head[p].iter().zip(&tail[0]).map(|(a, b)| a * b).sum();
                tail[0].iter_mut().zip(&head[p]).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let nrm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > 0.0 {
            cols[j].iter_mut().for_each(|v| *v /= nrm);
        }
    }
}
