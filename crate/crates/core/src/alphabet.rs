//! Roots-of-unity alphabets, label assignments and quadratic-form evaluation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// The `K`-th roots of unity together with their decision-boundary geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Alphabet {
    k: usize,
    roots: Vec<C64>,
    boundary_angles: Vec<f64>,
    b_k: usize,
}

impl Alphabet {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidAlphabet(k));
        }
        let roots = (0..k).map(|j| root_of_unity(j, k)).collect();
        let b_k = if k % 2 == 0 { k / 2 } else { k };
        let boundary_angles = (0..b_k).map(|m| PI * (2 * m + 1) as f64 / k as f64).collect();
        Ok(Self { k, roots, boundary_angles, b_k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn roots(&self) -> &[C64] {
        &self.roots
    }

    pub fn root(&self, label: usize) -> C64 {
        self.roots[label]
    }

    /// Angles `π(2m+1)/K` of the geometrically distinct boundaries.
    pub fn boundary_angles(&self) -> &[f64] {
        &self.boundary_angles
    }

    /// Number of distinct boundary lines per coordinate.
    pub fn b_k(&self) -> usize {
        self.b_k
    }

    /// Rotation factors `exp(−iπ(2m+1)/K)` for each retained boundary.
    pub fn rotations(&self) -> Vec<C64> {
        self.boundary_angles.iter().map(|&t| C64::from_polar(1.0, -t)).collect()
    }

    /// Label of the root closest to `w` in angle; ties go to the smaller label.
    pub fn nearest_label(&self, w: C64) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, r) in self.roots.iter().enumerate() {
            let s = r.re * w.re + r.im * w.im;
            if s > best_score {
                best_score = s;
                best = j;
            }
        }
        best
    }
}

/// `exp(2πi·j/K)`, exact for the axis-aligned roots.
pub fn root_of_unity(j: usize, k: usize) -> C64 {
    let j = j % k;
    if 4 * j == k {
        return C64::new(0.0, 1.0);
    }
    if 2 * j == k {
        return C64::new(-1.0, 0.0);
    }
    if 4 * j == 3 * k {
        return C64::new(0.0, -1.0);
    }
    if j == 0 {
        return C64::new(1.0, 0.0);
    }
    C64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64)
}

/// Convenience wrapper for [`Alphabet::new`].
pub fn make_alphabet(k: usize) -> Result<Alphabet> {
    Alphabet::new(k)
}

/// A label vector `k_i ∈ {0..K−1}` standing for `z_i = exp(2πi·k_i/K)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidAlphabet(k));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidLabel { label: bad, k });
        }
        Ok(Self { labels, k })
    }

    pub(crate) fn new_unchecked(labels: Vec<usize>, k: usize) -> Self {
        debug_assert!(labels.iter().all(|&l| l < k));
        Self { labels, k }
    }

    pub fn constant(n: usize, k: usize) -> Self {
        Self { labels: vec![0; n], k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn symbols(&self) -> Vec<C64> {
        self.labels.iter().map(|&l| root_of_unity(l, self.k)).collect()
    }

    /// Adds `t` to every label modulo `K`.
    pub fn rotate(&self, t: usize) -> Self {
        Self { labels: self.labels.iter().map(|&l| (l + t) % self.k).collect(), k: self.k }
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Rotates the labels so that the first one is zero.
pub fn canonical_form(a: &Assignment) -> Assignment {
    match a.labels.first() {
        None => a.clone(),
        Some(&l0) => a.rotate((a.k - l0) % a.k),
    }
}

/// A square complex matrix used as the objective `z†Qz`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperand {
    entries: CMatrix,
    hermitian_tol: f64,
    hermitian: bool,
    is_psd_hint: bool,
}

impl HermitianOperand {
    /// Wraps a Hermitian matrix, checking `|Q_ij − conj(Q_ji)| ≤ 1e−10·‖Q‖_F`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let tol = 1e-10 * entries.frobenius_norm().max(1.0);
        Self::with_tolerance(entries, tol)
    }

    pub fn with_tolerance(entries: CMatrix, hermitian_tol: f64) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::DimensionMismatch { expected: entries.rows(), found: entries.cols() });
        }
        let defect = entries.hermitian_defect();
        if defect > hermitian_tol {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { entries, hermitian_tol, hermitian: true, is_psd_hint: false })
    }

    /// Wraps a square matrix without asserting Hermitian symmetry.
    pub fn general(entries: CMatrix) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::DimensionMismatch { expected: entries.rows(), found: entries.cols() });
        }
        let hermitian = entries.hermitian_defect() <= 1e-10 * entries.frobenius_norm().max(1.0);
        Ok(Self { entries, hermitian_tol: 0.0, hermitian, is_psd_hint: false })
    }

    pub fn with_psd_hint(mut self, psd: bool) -> Self {
        self.is_psd_hint = psd;
        self
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: CMatrix::identity(n), hermitian_tol: 0.0, hermitian: true, is_psd_hint: true }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: CMatrix::zeros(n, n), hermitian_tol: 0.0, hermitian: true, is_psd_hint: true }
    }

    /// `V V†` for a factor `V`.
    pub fn from_factor(v: &CMatrix) -> Self {
        let q = v.matmul(&v.adjoint());
        let q = crate::linalg::hermitize(&q);
        Self { entries: q, hermitian_tol: 0.0, hermitian: true, is_psd_hint: true }
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_psd_hint(&self) -> bool {
        self.is_psd_hint
    }

    pub fn hermitian_tol(&self) -> f64 {
        self.hermitian_tol
    }
}

/// Anything that can evaluate `Re(z†Qz)` and multiply by a vector.
pub trait QuadraticObjective: Sync {
    fn dim(&self) -> usize;
    /// `Q x`.
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    /// Dense storage, if the operator keeps one.
    fn dense(&self) -> Option<&HermitianOperand>;
    /// `Re(z†Qz)` for the symbols of `a`.
    fn form(&self, a: &Assignment) -> Result<f64> {
        check_len(self.dim(), a.len())?;
        let z = a.symbols();
        let y = self.apply(&z);
        Ok(z.iter().zip(&y).map(|(zi, yi)| (zi.conj() * yi).re).sum())
    }
}

impl QuadraticObjective for HermitianOperand {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.entries.mul_vec(x)
    }
    fn dense(&self) -> Option<&HermitianOperand> {
        Some(self)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `Re(z†Qz)`.
pub fn quadratic_form(q: &HermitianOperand, a: &Assignment) -> Result<f64> {
    check_len(q.n(), a.len())?;
    let z = a.symbols();
    let y = q.entries.mul_vec(&z);
    let val: C64 = z.iter().zip(&y).map(|(zi, yi)| zi.conj() * yi).sum();
    debug_assert!(
        !q.hermitian || val.im.abs() <= 1e-8 * q.entries.frobenius_norm().max(1.0),
        "imaginary part {} of a Hermitian form",
        val.im
    );
    Ok(val.re)
}

/// `‖V†z‖²`.
pub fn factor_quadratic_form(v: &CMatrix, a: &Assignment) -> Result<f64> {
    check_len(v.rows(), a.len())?;
    let z = a.symbols();
    Ok(v.adjoint_mul_vec(&z).iter().map(|x| x.norm_sqr()).sum())
}
