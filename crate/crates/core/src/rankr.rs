//! Exact maximization for rank-`r` objectives `Q = V V†`.
//!
//! With `c ∈ C^r` ranging over all directions, the labels `nearest(V_i c)`
//! partition `R^{2r}` into polyhedral cones. Every boundary of that partition
//! is a hyperplane `Im(ρ_m V_i c) = 0`, one row of the augmented system.
//! Candidates come from the rays where `2r − 1` independent boundaries meet
//! (the vertices), plus a recursive solve on the first `r − 1` columns for
//! the cones that touch `c_r = 0`.
//!
//! Two vertex rules are provided. [`VertexRule::Adjacent`] labels every cone
//! that touches a vertex. [`VertexRule::Leading`] labels only the cones on
//! which the vertex minimizes `arg(c_r)`. Each cone away from `c_r = 0` has
//! exactly one such vertex, so the leading rule emits about one candidate per
//! cone. Vertices where that test is numerically degenerate fall back to the
//! adjacent rule.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::alphabet::{canonical_form, root_of_unity, Alphabet, Assignment, QuadraticObjective};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::parallel::ParallelConfig;
use crate::rank1::{boundary_schedule, canonical_less};

/// Relative singular-value threshold for accepting a vertex system.
pub const RANK_TOL: f64 = 1e-9;
/// Relative distance below which a coordinate counts as sitting on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Largest Cartesian expansion of a single vertex.
pub const EXPANSION_CAP: usize = 4096;
/// Random cell samples drawn when a vertex exceeds [`EXPANSION_CAP`].
pub const PERTURBATION_SAMPLES: usize = 64;

/// Real `(n·B_K) × 2r` matrix whose row `m·n + i` is
/// `[Re(ρ_m V_i) | Im(ρ_m V_i)]`, with `ρ_m = exp(−iπ(2m+1)/K)`.
///
/// Against the stacked vector `c̃ = [Im c; Re c]` each row evaluates
/// `Im(ρ_m V_i c)`, which vanishes exactly when `V_i c` lies on boundary `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSystem {
    k: usize,
    n: usize,
    r: usize,
    b: usize,
    rows: Vec<f64>,
    rotations: Vec<C64>,
}

impl AugmentedSystem {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn b_k(&self) -> usize {
        self.b
    }

    pub fn num_rows(&self) -> usize {
        self.n * self.b
    }

    pub fn width(&self) -> usize {
        2 * self.r
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        let w = 2 * self.r;
        &self.rows[idx * w..(idx + 1) * w]
    }

    pub fn group_of_row(&self, idx: usize) -> usize {
        idx % self.n
    }

    pub fn boundary_of_row(&self, idx: usize) -> usize {
        idx / self.n
    }

    pub fn rotations(&self) -> &[C64] {
        &self.rotations
    }
}

pub fn build_augmented(v: &CMatrix, k: usize) -> Result<AugmentedSystem> {
    let alphabet = Alphabet::new(k)?;
    let (n, r) = (v.rows(), v.cols());
    let b = alphabet.b_k();
    let rotations = alphabet.rotations();
    let mut rows = Vec::with_capacity(n * b * 2 * r);
    for rho in &rotations {
        for i in 0..n {
            let rotated: Vec<C64> = v.row(i).iter().map(|x| rho * x).collect();
            rows.extend(rotated.iter().map(|x| x.re));
            rows.extend(rotated.iter().map(|x| x.im));
        }
    }
    Ok(AugmentedSystem { k, n, r, b, rows, rotations })
}

/// `c = c̃_{r+1:2r} + i·c̃_{1:r}`, the inverse of the stacking `[Im c; Re c]`.
pub fn recover_c(c_tilde: &[f64]) -> Vec<C64> {
    let r = c_tilde.len() / 2;
    (0..r).map(|j| C64::new(c_tilde[r + j], c_tilde[j])).collect()
}

/// Lexicographic stream of `size`-subsets of `0..n·b` with at most two rows
/// from any group, where row `idx` belongs to group `idx % n`.
#[derive(Clone, Debug)]
pub struct ValidIndexSets {
    n_groups: usize,
    n_rows: usize,
    size: usize,
    cur: Vec<usize>,
    started: bool,
    done: bool,
}

impl ValidIndexSets {
    pub fn new(n_groups: usize, b: usize, size: usize) -> Self {
        let n_rows = n_groups * b;
        Self { n_groups, n_rows, size, cur: Vec::with_capacity(size), started: false, done: size > n_rows }
    }

    /// Moves to the next valid set; returns `false` once exhausted.
    pub fn advance(&mut self) -> bool {
        loop {
            if !self.step() {
                return false;
            }
            if self.valid() {
                return true;
            }
        }
    }

    pub fn current(&self) -> &[usize] {
        &self.cur
    }

    fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            self.cur.extend(0..self.size);
            return true;
        }
        let s = self.size;
        let mut p = s;
        loop {
            if p == 0 {
                self.done = true;
                return false;
            }
            p -= 1;
            if self.cur[p] < self.n_rows - s + p {
                break;
            }
        }
        self.cur[p] += 1;
        for q in p + 1..s {
            self.cur[q] = self.cur[q - 1] + 1;
        }
        true
    }

    fn valid(&self) -> bool {
        let s = &self.cur;
        for a in 0..s.len() {
            let g = s[a] % self.n_groups;
            let same = s[a + 1..].iter().filter(|&&x| x % self.n_groups == g).count();
            if same >= 2 {
                return false;
            }
        }
        true
    }
}

impl Iterator for ValidIndexSets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        self.advance().then(|| self.cur.clone())
    }
}

/// Stream of the `(2r−1)`-subsets with at most two rows per coordinate group.
pub fn stream_valid_index_sets(sys: &AugmentedSystem) -> ValidIndexSets {
    ValidIndexSets::new(sys.n, sys.b, 2 * sys.r - 1)
}

/// Number of valid sets: the coefficient of `x^size` in `(1 + b·x + C(b,2)·x²)^n`.
pub fn count_valid_index_sets(n: usize, b: usize, size: usize) -> u128 {
    let pair = (b * b.saturating_sub(1) / 2) as u128;
    let mut poly = vec![0u128; size + 1];
    poly[0] = 1;
    for _ in 0..n {
        for s in (0..=size).rev() {
            let mut v = poly[s];
            if s >= 1 {
                v = v.saturating_add(poly[s - 1].saturating_mul(b as u128));
            }
            if s >= 2 {
                v = v.saturating_add(poly[s - 2].saturating_mul(pair));
            }
            poly[s] = v;
        }
    }
    poly[size]
}

fn binom(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.saturating_mul(n - j) / (j + 1);
    }
    acc
}

/// Upper bound on the number of candidates of the rank-`r` enumeration:
/// the larger of `Σ_d Σ_i C(n,i)·C(n−i, 2(d−i)−1)·B^{2(d−i)−2}·(B−1)^i` and
/// the same sum with an extra `C(B,2)^i` factor.
pub fn candidate_count_bound(n: usize, r: usize, k: usize) -> u128 {
    let b = if k % 2 == 0 { k / 2 } else { k } as u128;
    let n = n as u128;
    let (mut plain, mut paired) = (0u128, 0u128);
    for d in 1..=r as u128 {
        for i in 0..d {
            let singles = 2 * (d - i) - 1;
            if i > n || singles > n - i {
                continue;
            }
            let base = binom(n, i)
                .saturating_mul(binom(n - i, singles))
                .saturating_mul(b.saturating_pow((2 * (d - i) - 2) as u32))
                .saturating_mul(b.saturating_sub(1).saturating_pow(i as u32));
            plain = plain.saturating_add(base);
            paired = paired.saturating_add(base.saturating_mul(binom(b, 2).saturating_pow(i as u32)));
        }
    }
    plain.max(paired)
}

/// Which cells a vertex contributes candidates for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum VertexRule {
    /// Only the cells on which the vertex minimizes `arg(c_r)`.
    #[default]
    Leading,
    /// Every cell adjacent to the vertex.
    Adjacent,
}

/// Diagnostics gathered over all accepted vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VertexStats {
    pub accepted: u64,
    pub rejected: u64,
    /// Largest `‖Ṽ_I c̃‖_∞`.
    pub max_residual: f64,
    /// Largest `|‖c̃‖₂ − 1|`.
    pub max_norm_deviation: f64,
    /// Largest `|V_i c| / ‖V_i‖` over groups with two rows in the set.
    pub max_saturated_ratio: f64,
    /// Vertices that fell back from the leading to the adjacent rule.
    pub fallbacks: u64,
    /// Vertices whose expansion exceeded the cap.
    pub capped: u64,
}

impl VertexStats {
    pub(crate) fn merge(&mut self, o: &VertexStats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.max_residual = self.max_residual.max(o.max_residual);
        self.max_norm_deviation = self.max_norm_deviation.max(o.max_norm_deviation);
        self.max_saturated_ratio = self.max_saturated_ratio.max(o.max_saturated_ratio);
        self.fallbacks += o.fallbacks;
        self.capped += o.capped;
    }
}

/// Outcome of [`solve_rankr`].
#[derive(Clone, Debug, PartialEq)]
pub struct RankRSolution {
    /// Canonical winner.
    pub assignment: Assignment,
    /// `Re(z†Qz)` of the winner.
    pub objective: f64,
    /// `‖V†z‖²` of the winner.
    pub factor_objective: f64,
    pub candidates: u64,
    pub stats: VertexStats,
    pub timed_out: bool,
}

/// Unit null vector of the `(2r−1) × 2r` system selected by `set`, or `None`
/// when the rows are numerically rank deficient.
pub fn vertex_nullvector(sys: &AugmentedSystem, set: &[usize]) -> Option<Vec<f64>> {
    let mut sc = NullScratch::default();
    null_vector(set.iter().map(|&i| sys.row(i)), sys.width(), &mut sc).then(|| sc.null.clone())
}

/// Every label vector whose cell touches the vertex `c` of `set`: nearest
/// labels for coordinates off the boundaries, both neighbours for a
/// coordinate on a boundary and all `K` labels where `V_i c = 0`.
pub fn expand_vertex(v: &CMatrix, c: &[C64], set: &[usize], sys: &AugmentedSystem) -> Vec<Assignment> {
    let geo = Geometry::new(v, sys.k);
    let saturated = saturated_groups(set, sys.n);
    let mut alpha = vec![C64::new(0.0, 0.0); sys.n];
    geo.alphas(c, &mut alpha);
    let mut out = Vec::new();
    let mut labels = vec![0; sys.n];
    let capped = geo.adjacent(&alpha, &saturated, &mut labels, &mut |l| {
        out.push(Assignment::new_unchecked(l.to_vec(), sys.k));
    });
    if capped {
        geo.perturbed(c, set, 1.0, &mut labels, &mut |l| out.push(Assignment::new_unchecked(l.to_vec(), sys.k)));
    }
    out
}

fn saturated_groups(set: &[usize], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (a, &x) in set.iter().enumerate() {
        if set[a + 1..].iter().any(|&y| y % n == x % n) {
            out.push(x % n);
        }
    }
    out
}

#[derive(Default)]
struct NullScratch {
    /// `Aᵀ` (`q × p`, column-major), overwritten by `R` and the reflectors.
    m: Vec<f64>,
    /// Householder vectors, one `q`-vector per step.
    house: Vec<f64>,
    house_norm2: Vec<f64>,
    /// `perm[s]` is the row of `A` pivoted into position `s`.
    perm: Vec<usize>,
    null: Vec<f64>,
    work: Vec<f64>,
    p: usize,
    q: usize,
}

/// Unit null vector of the `p × q` matrix `A` (`p = q − 1`) given by its rows,
/// from a column-pivoted Householder QR of `Aᵀ`. Returns `false` when the
/// smallest singular value is at most [`RANK_TOL`] times the largest.
fn null_vector<'r>(rows: impl Iterator<Item = &'r [f64]> + Clone, q: usize, sc: &mut NullScratch) -> bool {
    sc.m.clear();
    for row in rows.clone() {
        sc.m.extend_from_slice(&row[..q]);
    }
    let p = sc.m.len() / q;
    debug_assert_eq!(p + 1, q);
    sc.p = p;
    sc.q = q;
    sc.house.clear();
    sc.house.resize(p * q, 0.0);
    sc.house_norm2.clear();
    sc.house_norm2.resize(p, 0.0);
    sc.perm.clear();
    sc.perm.extend(0..p);
    let mut r_first = 0.0f64;
    let mut r_last = 0.0f64;
    for step in 0..p {
        // Pivot on the remaining column of largest norm.
        let mut best = step;
        let mut best_norm = -1.0;
        for c in step..p {
            let nrm: f64 = sc.m[c * q + step..(c + 1) * q].iter().map(|x| x * x).sum();
            if nrm > best_norm {
                best_norm = nrm;
                best = c;
            }
        }
        if best != step {
            for t in 0..q {
                sc.m.swap(step * q + t, best * q + t);
            }
            sc.perm.swap(step, best);
        }
        let col = &sc.m[step * q..(step + 1) * q];
        let xnorm = col[step..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let alpha = if col[step] > 0.0 { -xnorm } else { xnorm };
        let h = &mut sc.house[step * q..(step + 1) * q];
        h[step..].copy_from_slice(&col[step..]);
        h[step] -= alpha;
        let hn2: f64 = h[step..].iter().map(|x| x * x).sum();
        sc.house_norm2[step] = hn2;
        if hn2 > 0.0 {
            for c in step + 1..p {
                let dot: f64 = (step..q).map(|t| h[t] * sc.m[c * q + t]).sum();
                let f = 2.0 * dot / hn2;
                for t in step..q {
                    sc.m[c * q + t] -= f * h[t];
                }
            }
        }
        sc.m[step * q + step] = alpha;
        for t in step + 1..q {
            sc.m[step * q + t] = 0.0;
        }
        if step == 0 {
            r_first = alpha.abs();
        }
        r_last = alpha.abs();
    }
    if p > 0 {
        let ratio = r_last / r_first;
        // The pivoted diagonal brackets σ_min/σ_max within a small factor, so
        // only the grey zone needs the singular values themselves.
        if !(ratio > RANK_TOL) {
            return false;
        }
        if ratio < 1e-5 && singular_ratio(rows, q) <= RANK_TOL {
            return false;
        }
    }
    // Last column of Q = H_0 ⋯ H_{p−1} e_q.
    sc.null.clear();
    sc.null.resize(q, 0.0);
    sc.null[q - 1] = 1.0;
    for step in (0..p).rev() {
        let hn2 = sc.house_norm2[step];
        if hn2 == 0.0 {
            continue;
        }
        let h = &sc.house[step * q..(step + 1) * q];
        let dot: f64 = (step..q).map(|t| h[t] * sc.null[t]).sum();
        let f = 2.0 * dot / hn2;
        for t in step..q {
            sc.null[t] -= f * h[t];
        }
    }
    let nrm = sc.null.iter().map(|x| x * x).sum::<f64>().sqrt();
    sc.null.iter_mut().for_each(|x| *x /= nrm);
    true
}

/// `σ_min / σ_max` of the `p × q` matrix with the given rows (one-sided Jacobi).
fn singular_ratio<'r>(rows: impl Iterator<Item = &'r [f64]>, q: usize) -> f64 {
    let rows: Vec<&[f64]> = rows.collect();
    let p = rows.len();
    // Columns of Aᵀ are the rows of A; Jacobi on Aᵀ (q × p) leaves its p
    // singular values as column norms.
    let mut cols: Vec<f64> = rows.iter().flat_map(|r| r[..q].iter().copied()).collect();
    let floor = 1e-30 * cols.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
                for t in 0..q {
                    let (x, y) = (cols[i * q + t], cols[j * q + t]);
                    a += x * x;
                    b += y * y;
                    g += x * y;
                }
                if g.abs() <= 1e-15 * (a * b).sqrt() || g.abs() <= floor {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..q {
                    let (x, y) = (cols[i * q + k], cols[j * q + k]);
                    cols[i * q + k] = c * x - s * y;
                    cols[j * q + k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..p).map(|j| cols[j * q..(j + 1) * q].iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solves `Aᵀ λ = g` for the rows `A` factored in `sc`; `g` must be
/// orthogonal to the null vector.
fn row_coefficients(sc: &mut NullScratch, g: &[f64], out: &mut Vec<f64>) {
    let (p, q) = (sc.p, sc.q);
    // h = Qᵀ g = H_{p−1} ⋯ H_0 g.
    sc.work.clear();
    sc.work.extend_from_slice(g);
    for step in 0..p {
        let hn2 = sc.house_norm2[step];
        if hn2 == 0.0 {
            continue;
        }
        let h = &sc.house[step * q..(step + 1) * q];
        let dot: f64 = (step..q).map(|t| h[t] * sc.work[t]).sum();
        let f = 2.0 * dot / hn2;
        for t in step..q {
            sc.work[t] -= f * h[t];
        }
    }
    // R μ = h[..p], then undo the pivoting.
    out.clear();
    out.resize(p, 0.0);
    for s in (0..p).rev() {
        let mut acc = sc.work[s];
        for c in s + 1..p {
            acc -= sc.m[c * q + s] * sc.work[p + c];
        }
        let mu = acc / sc.m[s * q + s];
        // Park μ_s past the first p entries of the work vector.
        if sc.work.len() < 2 * p {
            sc.work.resize(2 * p, 0.0);
        }
        sc.work[p + s] = mu;
    }
    for s in 0..p {
        out[sc.perm[s]] = sc.work[p + s];
    }
}

/// Classification of `V_i c` against the alphabet.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Nearest {
    Label(usize),
    Boundary(usize, usize),
    Zero,
}

/// Factor rows and alphabet data for the decision rule.
struct Geometry {
    n: usize,
    d: usize,
    k: usize,
    roots: Vec<C64>,
    g: Vec<C64>,
    g_norm: Vec<f64>,
}

impl Geometry {
    fn new(v: &CMatrix, k: usize) -> Self {
        let (n, d) = (v.rows(), v.cols());
        let g = v.as_slice().to_vec();
        let g_norm = (0..n).map(|i| linalg::norm(v.row(i))).collect();
        let roots = (0..k).map(|j| root_of_unity(j, k)).collect();
        Self { n, d, k, roots, g, g_norm }
    }

    fn alpha(&self, i: usize, c: &[C64]) -> C64 {
        let row = &self.g[i * self.d..(i + 1) * self.d];
        row.iter().zip(c).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
    }

    fn alphas(&self, c: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.alpha(i, c);
        }
    }

    fn classify(&self, i: usize, a: C64) -> Nearest {
        let tol = BOUNDARY_TOL * self.g_norm[i];
        if a.norm_sqr() <= tol * tol {
            return Nearest::Zero;
        }
        let (mut b1, mut s1, mut b2, mut s2) = (0usize, f64::NEG_INFINITY, 0usize, f64::NEG_INFINITY);
        for (j, r) in self.roots.iter().enumerate() {
            let s = r.re * a.re + r.im * a.im;
            if s > s1 {
                b2 = b1;
                s2 = s1;
                b1 = j;
                s1 = s;
            } else if s > s2 {
                b2 = j;
                s2 = s;
            }
        }
        if s1 - s2 <= tol {
            Nearest::Boundary(b1.min(b2), b1.max(b2))
        } else {
            Nearest::Label(b1)
        }
    }

    fn nearest(&self, a: C64) -> usize {
        let mut best = 0;
        let mut bs = f64::NEG_INFINITY;
        for (j, r) in self.roots.iter().enumerate() {
            let s = r.re * a.re + r.im * a.im;
            if s > bs {
                bs = s;
                best = j;
            }
        }
        best
    }

    /// Emits the Cartesian expansion of all cells touching the point; returns
    /// `true` without emitting when it would exceed [`EXPANSION_CAP`].
    fn adjacent(
        &self,
        alpha: &[C64],
        saturated: &[usize],
        labels: &mut [usize],
        emit: &mut dyn FnMut(&[usize]),
    ) -> bool {
        let mut options: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut total: usize = 1;
        for i in 0..self.n {
            let cls = if saturated.contains(&i) { Nearest::Zero } else { self.classify(i, alpha[i]) };
            match cls {
                Nearest::Label(l) => labels[i] = l,
                Nearest::Boundary(a, b) => {
                    labels[i] = a;
                    options.push((i, vec![a, b]));
                    total = total.saturating_mul(2);
                }
                Nearest::Zero => {
                    labels[i] = 0;
                    options.push((i, (0..self.k).collect()));
                    total = total.saturating_mul(self.k);
                }
            }
            if total > EXPANSION_CAP {
                return true;
            }
        }
        product(&options, labels, emit);
        false
    }

    /// Nearest-label vectors of random points very close to `c`.
    fn perturbed(&self, c: &[C64], set: &[usize], sign: f64, labels: &mut [usize], emit: &mut dyn FnMut(&[usize])) {
        let mut seed = 0x9e37_79b9_7f4a_7c15u64 ^ (sign > 0.0) as u64;
        for &x in set {
            seed = (seed ^ x as u64).wrapping_mul(0x1000_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cp = c.to_vec();
        for _ in 0..PERTURBATION_SAMPLES {
            for (x, base) in cp.iter_mut().zip(c) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *x = base + C64::new(re, im) * 1e-6;
            }
            for (i, l) in labels.iter_mut().enumerate() {
                *l = self.nearest(self.alpha(i, &cp));
            }
            emit(labels);
        }
    }
}

fn product(options: &[(usize, Vec<usize>)], labels: &mut [usize], emit: &mut dyn FnMut(&[usize])) {
    let mut idx = vec![0usize; options.len()];
    for (i, opts) in options {
        labels[*i] = opts[0];
    }
    loop {
        emit(labels);
        let mut p = 0;
        loop {
            if p == options.len() {
                return;
            }
            idx[p] += 1;
            if idx[p] < options[p].1.len() {
                labels[options[p].0] = options[p].1[idx[p]];
                break;
            }
            idx[p] = 0;
            labels[options[p].0] = options[p].1[0];
            p += 1;
        }
    }
}

/// Scores label vectors by `‖V†z‖²` after rotating them to canonical form,
/// so every member of a phase orbit gets bit-identical scores.
pub(crate) struct Evaluator {
    n: usize,
    k: usize,
    r: usize,
    table: Vec<C64>,
}

impl Evaluator {
    pub(crate) fn new(v: &CMatrix, k: usize) -> Self {
        let (n, r) = (v.rows(), v.cols());
        let roots: Vec<C64> = (0..k).map(|j| root_of_unity(j, k)).collect();
        let mut table = Vec::with_capacity(n * k * r);
        for i in 0..n {
            for root in &roots {
                table.extend(v.row(i).iter().map(|x| x.conj() * root));
            }
        }
        Self { n, k, r, table }
    }

    pub(crate) fn score(&self, labels: &[usize], acc: &mut Vec<C64>) -> f64 {
        acc.clear();
        acc.resize(self.r, C64::new(0.0, 0.0));
        let shift = labels.first().map_or(0, |&l0| self.k - l0);
        for (i, &l) in labels.iter().enumerate() {
            let rel = (l + shift) % self.k;
            let base = (i * self.k + rel) * self.r;
            for (a, t) in acc.iter_mut().zip(&self.table[base..base + self.r]) {
                *a += t;
            }
        }
        acc.iter().map(|x| x.norm_sqr()).sum()
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }
}

#[derive(Clone, Debug)]
struct Best {
    objective: f64,
    labels: Vec<usize>,
    batch: u64,
    idx: u64,
}

impl Best {
    /// Total order: higher objective, then smaller canonical labels, then
    /// earlier position in the stream.
    fn better_than(&self, o: &Best, k: usize) -> bool {
        match self.objective.total_cmp(&o.objective) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                if canonical_less(&self.labels, &o.labels, k) {
                    true
                } else if canonical_less(&o.labels, &self.labels, k) {
                    false
                } else {
                    (self.batch, self.idx) < (o.batch, o.idx)
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Outcome {
    best: Option<Best>,
    candidates: u64,
    stats: VertexStats,
}

impl Outcome {
    fn offer(&mut self, objective: f64, labels: &[usize], batch: u64, idx: u64, k: usize) {
        self.candidates += 1;
        let replace = match &self.best {
            None => true,
            Some(b) => match objective.total_cmp(&b.objective) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => canonical_less(labels, &b.labels, k),
            },
        };
        if replace {
            self.best = Some(Best { objective, labels: labels.to_vec(), batch, idx });
        }
    }

    fn merge(mut self, other: Outcome, k: usize) -> Outcome {
        self.candidates += other.candidates;
        self.stats.merge(&other.stats);
        self.best = match (self.best.take(), other.best) {
            (None, b) | (b, None) => b,
            (Some(a), Some(b)) => Some(if b.better_than(&a, k) { b } else { a }),
        };
        self
    }
}

/// One level `d` of the recursion: geometry of the first `d` factor columns.
struct Level<'a> {
    d: usize,
    n: usize,
    k: usize,
    b: usize,
    geo: Geometry,
    rows: Vec<f64>,
    /// Orthonormal basis (`2d × width`, row-major) of the row space when the
    /// rows do not span `R^{2d}`.
    projection: Option<Vec<f64>>,
    proj_rows: Vec<f64>,
    width: usize,
    eval: &'a Evaluator,
    rule: VertexRule,
    rho: Vec<C64>,
}

struct Scratch {
    null: NullScratch,
    rotated: Vec<usize>,
    alpha: Vec<C64>,
    labels: Vec<usize>,
    acc: Vec<C64>,
    lambda: Vec<f64>,
    g: Vec<f64>,
    c_tilde: Vec<f64>,
    c: Vec<C64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            null: NullScratch::default(),
            rotated: Vec::new(),
            alpha: vec![C64::new(0.0, 0.0); n],
            labels: vec![0; n],
            acc: Vec::new(),
            lambda: Vec::new(),
            g: Vec::new(),
            c_tilde: Vec::new(),
            c: Vec::new(),
        }
    }
}

impl<'a> Level<'a> {
    fn new(prefix: &CMatrix, k: usize, eval: &'a Evaluator, rule: VertexRule) -> Result<Self> {
        let sys = build_augmented(prefix, k)?;
        let (n, d) = (prefix.rows(), prefix.cols());
        let q = 2 * d;
        // Row-space dimension from the Gram matrix of the stacked rows.
        let mut gram = vec![0.0; q * q];
        for idx in 0..sys.num_rows() {
            let row = sys.row(idx);
            for a in 0..q {
                for b in 0..q {
                    gram[a * q + b] += row[a] * row[b];
                }
            }
        }
        let (vals, vecs) = linalg::symmetric_jacobi(&gram, q);
        let top = vals.first().copied().unwrap_or(0.0);
        let rank = vals.iter().filter(|&&v| v > 1e-12 * top && v > 0.0).count();
        let (projection, proj_rows, width) = if rank == q {
            (None, Vec::new(), q)
        } else {
            let mut basis = vec![0.0; q * rank];
            for a in 0..q {
                for j in 0..rank {
                    basis[a * rank + j] = vecs[a * q + j];
                }
            }
            let mut pr = Vec::with_capacity(sys.num_rows() * rank);
            for idx in 0..sys.num_rows() {
                let row = sys.row(idx);
                for j in 0..rank {
                    pr.push((0..q).map(|a| row[a] * basis[a * rank + j]).sum());
                }
            }
            (Some(basis), pr, rank)
        };
        Ok(Self {
            d,
            n,
            k,
            b: sys.b,
            geo: Geometry::new(prefix, k),
            rho: sys.rotations.clone(),
            rows: sys.rows,
            projection,
            proj_rows,
            width,
            eval,
            rule,
        })
    }

    fn set_size(&self) -> usize {
        self.width.saturating_sub(1)
    }

    fn essential(&self) -> bool {
        self.projection.is_none()
    }

    fn row(&self, idx: usize) -> &[f64] {
        let q = 2 * self.d;
        &self.rows[idx * q..(idx + 1) * q]
    }

    fn is_orbit_min(&self, set: &[usize], rotated: &mut Vec<usize>) -> bool {
        let (n, b) = (self.n, self.b);
        for t in 1..b {
            rotated.clear();
            rotated.extend(set.iter().map(|&x| ((x / n + t) % b) * n + x % n));
            rotated.sort_unstable();
            if rotated.as_slice() < set {
                return false;
            }
        }
        true
    }

    fn process_batch(&self, sc: &mut Scratch, sets: &[usize], count: usize, batch: u64) -> Outcome {
        let mut out = Outcome::default();
        let size = self.set_size();
        let mut idx = 0u64;
        for s in 0..count {
            let set = &sets[s * size..(s + 1) * size];
            self.process_set(set, sc, &mut out, batch, &mut idx);
        }
        out
    }

    fn process_set(&self, set: &[usize], sc: &mut Scratch, out: &mut Outcome, batch: u64, idx: &mut u64) {
        let essential = self.essential();
        if essential && self.b > 1 && !self.is_orbit_min(set, &mut sc.rotated) {
            return;
        }
        let q = 2 * self.d;
        let ok = if essential {
            null_vector(set.iter().map(|&i| self.row(i)), self.width, &mut sc.null)
        } else {
            let w = self.width;
            null_vector(set.iter().map(|&i| &self.proj_rows[i * w..(i + 1) * w]), w, &mut sc.null)
        };
        if !ok {
            out.stats.rejected += 1;
            return;
        }
        // Lift to R^{2d} when working in the row space.
        sc.c_tilde.clear();
        match &self.projection {
            None => sc.c_tilde.extend_from_slice(&sc.null.null),
            Some(basis) => {
                for a in 0..q {
                    sc.c_tilde.push((0..self.width).map(|j| basis[a * self.width + j] * sc.null.null[j]).sum());
                }
            }
        }
        let residual = set
            .iter()
            .map(|&i| self.row(i).iter().zip(&sc.c_tilde).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let nrm = sc.c_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.stats.accepted += 1;
        out.stats.max_residual = out.stats.max_residual.max(residual);
        out.stats.max_norm_deviation = out.stats.max_norm_deviation.max((nrm - 1.0).abs());
        let saturated = saturated_groups(set, self.n);
        if !saturated.is_empty() {
            let c = recover_c(&sc.c_tilde);
            for &i in &saturated {
                let ratio = self.geo.alpha(i, &c).norm() / self.geo.g_norm[i].max(f64::MIN_POSITIVE);
                out.stats.max_saturated_ratio = out.stats.max_saturated_ratio.max(ratio);
            }
        }
        let both = !essential || self.k % 2 == 1;
        for sign in [1.0, -1.0] {
            if sign < 0.0 && !both {
                break;
            }
            sc.c.clear();
            sc.c.extend(recover_c(&sc.c_tilde).into_iter().map(|x| x * sign));
            if essential && self.rule == VertexRule::Leading {
                self.emit_leading(set, &saturated, sign, sc, out, batch, idx);
            } else {
                self.emit_adjacent(set, &saturated, sign, sc, out, batch, idx);
            }
        }
    }

    fn offer(&self, sc: &mut Scratch, out: &mut Outcome, batch: u64, idx: &mut u64) {
        let obj = self.eval.score(&sc.labels, &mut sc.acc);
        out.offer(obj, &sc.labels, batch, *idx, self.k);
        *idx += 1;
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_adjacent(
        &self,
        set: &[usize],
        saturated: &[usize],
        sign: f64,
        sc: &mut Scratch,
        out: &mut Outcome,
        batch: u64,
        idx: &mut u64,
    ) {
        let c = std::mem::take(&mut sc.c);
        let mut alpha = std::mem::take(&mut sc.alpha);
        let mut labels = std::mem::take(&mut sc.labels);
        self.geo.alphas(&c, &mut alpha);
        let mut emitted: Vec<Vec<usize>> = Vec::new();
        let capped = self.geo.adjacent(&alpha, saturated, &mut labels, &mut |l| emitted.push(l.to_vec()));
        if capped {
            out.stats.capped += 1;
            self.geo.perturbed(&c, set, sign, &mut labels, &mut |l| emitted.push(l.to_vec()));
        }
        sc.c = c;
        sc.alpha = alpha;
        sc.labels = labels;
        for l in emitted {
            sc.labels.copy_from_slice(&l);
            self.offer(sc, out, batch, idx);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_leading(
        &self,
        set: &[usize],
        saturated: &[usize],
        sign: f64,
        sc: &mut Scratch,
        out: &mut Outcome,
        batch: u64,
        idx: &mut u64,
    ) {
        let (n, d, k, b) = (self.n, self.d, self.k, self.b);
        // Single-row groups: the boundary line must be a true bisector.
        let mut single_info: [(usize, usize, f64); 16] = [(0, 0, 0.0); 16];
        let mut n_single = 0;
        for (t, &row) in set.iter().enumerate() {
            let i = row % n;
            if saturated.contains(&i) {
                continue;
            }
            let m = row / n;
            let a = self.geo.alpha(i, &sc.c);
            if a.norm_sqr() <= (BOUNDARY_TOL * self.geo.g_norm[i]).powi(2) {
                return self.fallback(set, saturated, sign, sc, out, batch, idx);
            }
            let along = (self.rho[m] * a).re;
            let (orient, bisector) = if along > 0.0 {
                (1.0, m)
            } else if k % 2 == 0 {
                (-1.0, m + b)
            } else {
                // The line through a symbol direction is not a decision boundary.
                return;
            };
            if n_single < single_info.len() {
                single_info[n_single] = (t, bisector, orient);
            }
            n_single += 1;
        }
        if n_single > single_info.len() {
            return self.fallback(set, saturated, sign, sc, out, batch, idx);
        }
        let cd = sc.c[d - 1];
        if cd.norm() <= BOUNDARY_TOL {
            return self.fallback(set, saturated, sign, sc, out, batch, idx);
        }
        // dφ for φ = arg(c_d) is Im(δ_d / c_d); in stacked coordinates
        // [Im δ; Re δ] its gradient has Re(1/c_d) at d−1 and Im(1/c_d) at 2d−1.
        let w = cd.inv();
        sc.g.clear();
        sc.g.resize(2 * d, 0.0);
        sc.g[d - 1] = w.re * sign.signum() * sign.signum();
        sc.g[2 * d - 1] = w.im;
        // The null vector in the scratch is unsigned; the functional basis is
        // the same rows, so coefficients do not depend on the sign.
        let mut lambda = std::mem::take(&mut sc.lambda);
        row_coefficients(&mut sc.null, &sc.g, &mut lambda);
        let lmax = lambda.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for &(t, bisector, orient) in &single_info[..n_single] {
            let l = lambda[t];
            if l.abs() <= 1e-10 * lmax {
                sc.lambda = lambda;
                return self.fallback(set, saturated, sign, sc, out, batch, idx);
            }
            let i = set[t] % n;
            sc.labels[i] = if orient * l > 0.0 { (bisector + 1) % k } else { bisector % k };
        }
        // Saturated groups: symbols whose whole sector keeps dφ ≥ 0.
        let mut options: Vec<(usize, Vec<usize>)> = Vec::new();
        for &i in saturated {
            let pos: Vec<usize> = (0..set.len()).filter(|&t| set[t] % n == i).collect();
            let mut nu = C64::new(0.0, 0.0);
            for &t in &pos {
                let rho = self.rho[set[t] / n];
                nu += C64::new(lambda[t] * rho.im, lambda[t] * rho.re);
            }
            let mag = nu.norm();
            if mag <= 1e-10 * lmax {
                sc.lambda = lambda;
                return self.fallback(set, saturated, sign, sc, out, batch, idx);
            }
            let need = mag * (PI / k as f64 - 1e-9).sin();
            let allowed: Vec<usize> = (0..k)
                .filter(|&j| {
                    let r = self.geo.roots[j];
                    nu.re * r.re + nu.im * r.im >= need
                })
                .collect();
            if allowed.is_empty() {
                sc.lambda = lambda;
                return;
            }
            options.push((i, allowed));
        }
        sc.lambda = lambda;
        // Remaining coordinates take their nearest symbol.
        let in_set = |i: usize| set.iter().any(|&row| row % n == i);
        for i in 0..n {
            if in_set(i) {
                continue;
            }
            let a = self.geo.alpha(i, &sc.c);
            match self.geo.classify(i, a) {
                Nearest::Label(l) => sc.labels[i] = l,
                _ => return self.fallback(set, saturated, sign, sc, out, batch, idx),
            }
        }
        if options.is_empty() {
            self.offer(sc, out, batch, idx);
            return;
        }
        let mut emitted = Vec::new();
        let mut labels = sc.labels.clone();
        product(&options, &mut labels, &mut |l| emitted.push(l.to_vec()));
        for l in emitted {
            sc.labels.copy_from_slice(&l);
            self.offer(sc, out, batch, idx);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fallback(
        &self,
        set: &[usize],
        saturated: &[usize],
        sign: f64,
        sc: &mut Scratch,
        out: &mut Outcome,
        batch: u64,
        idx: &mut u64,
    ) {
        out.stats.fallbacks += 1;
        self.emit_adjacent(set, saturated, sign, sc, out, batch, idx);
    }
}

/// Drops numerically dependent columns: returns `V W_k` for the `k` leading
/// right singular directions when `V` has fewer than `r` significant ones.
fn working_factor(v: &CMatrix) -> Result<CMatrix> {
    let r = v.cols();
    let gram = linalg::hermitize(&v.adjoint().matmul(v));
    let eig = linalg::hermitian_top_eigen(&gram, r).map_err(Error::NonConvergence)?;
    let top = eig.values_desc.first().copied().unwrap_or(0.0);
    let keep = eig.values_desc.iter().filter(|&&x| x > 1e-14 * top && x > 0.0).count();
    if keep == r {
        return Ok(v.clone());
    }
    Ok(v.matmul(&eig.vectors.leading_columns(keep)))
}

/// Whether `e^{iψ} V` is real for some `ψ`.
fn real_up_to_phase(v: &CMatrix) -> bool {
    let Some(lead) = v.as_slice().iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return true;
    };
    if lead.norm() == 0.0 {
        return true;
    }
    let back = lead.conj() / lead.norm();
    v.as_slice().iter().all(|x| (x * back).im.abs() <= 1e-12 * lead.norm())
}

/// Fixed complex perturbation of relative size `1e-7` per row.
///
/// For a real factor and `K ≥ 3`, every `c = e^{iθ_m} x` with real `x` puts all
/// coordinates on a boundary at once, and the adjacent-cell expansion grows
/// like `2^n`. After the perturbation the arrangement is in general position
/// while every cell of the original keeps a representative with the same
/// labels; candidates are still scored on the unperturbed factor.
fn generic_position(v: &CMatrix) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_a11);
    let mut data = v.as_slice().to_vec();
    for (i, row) in data.chunks_mut(v.cols()).enumerate() {
        let scale = 1e-7 * linalg::norm(v.row(i));
        for x in row {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *x += C64::new(re, im) * scale;
        }
    }
    let out = CMatrix::from_vec(v.rows(), v.cols(), data);
    out
}

/// Collapses rows that agree up to a positive scale and a power of `ω`.
///
/// If `V_i = s·ω^t·V_j` with `s > 0`, then `nearest(V_i c) = nearest(V_j c) + t`
/// for every `c`, so some optimum ties the two labels and the pair contributes
/// like a single row. Zero rows drop out. Returns the reduced factor and, per
/// reduced row, the original rows with their label offsets.
fn merge_parallel_rows(v: &CMatrix, k: usize) -> (CMatrix, Vec<Vec<(usize, usize)>>) {
    let (n, r) = (v.rows(), v.cols());
    let norms: Vec<f64> = (0..n).map(|i| linalg::norm(v.row(i))).collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut dirs: Vec<(Vec<C64>, usize, usize, f64)> = Vec::new();
    for i in 0..n {
        if !(norms[i] > 1e-12 * top) {
            continue;
        }
        let mut u: Vec<C64> = v.row(i).iter().map(|x| x / norms[i]).collect();
        let lead = u.iter().position(|x| x.norm() > 1e-6).unwrap_or(0);
        let a = crate::rank1::phase_0_2pi(u[lead]);
        let t = ((a * k as f64 / (2.0 * PI)).floor() as usize).min(k - 1);
        let back = root_of_unity((k - t) % k, k);
        u.iter_mut().for_each(|x| *x *= back);
        dirs.push((u, i, t, norms[i]));
    }
    dirs.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut anchor: Option<usize> = None;
    for (idx, (u, i, t, s)) in dirs.iter().enumerate() {
        let same = anchor.is_some_and(|a| dirs[a].0.iter().zip(u).all(|(x, y)| (x - y).norm() <= 1e-12));
        if !same {
            anchor = Some(idx);
            rows.push(vec![C64::new(0.0, 0.0); r]);
            members.push(Vec::new());
        }
        let row = rows.last_mut().expect("row pushed above");
        row.iter_mut().zip(u).for_each(|(acc, x)| *acc += x * s);
        members.last_mut().expect("group pushed above").push((*i, *t));
    }
    // Keep reduced rows in order of their first original row.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&g| members[g].iter().map(|m| m.0).min());
    let reduced = CMatrix::from_fn(order.len(), r, |g, j| rows[order[g]][j]);
    let members = order.into_iter().map(|g| std::mem::take(&mut members[g])).collect();
    (reduced, members)
}

/// Solves `max ‖V†z‖²` exactly (for `Q = V V†`) with the leading-vertex rule.
pub fn solve_rankr<O: QuadraticObjective + ?Sized>(
    q: &O,
    v: &CMatrix,
    r: usize,
    k: usize,
    engine: &ParallelConfig,
) -> Result<RankRSolution> {
    solve_rankr_with(q, v, r, k, engine, VertexRule::Leading)
}

/// [`solve_rankr`] with an explicit vertex rule.
pub fn solve_rankr_with<O: QuadraticObjective + ?Sized>(
    q: &O,
    v: &CMatrix,
    r: usize,
    k: usize,
    engine: &ParallelConfig,
    rule: VertexRule,
) -> Result<RankRSolution> {
    Alphabet::new(k)?;
    let n = v.rows();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: n });
    }
    if v.cols() != r {
        return Err(Error::DimensionMismatch { expected: r, found: v.cols() });
    }
    if r == 0 {
        return Err(Error::RankOutOfRange { r, n });
    }
    if r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    let (reduced, members) = merge_parallel_rows(v, k);
    let eval = Evaluator::new(&reduced, k);
    let mut work = working_factor(&reduced)?;
    if k >= 3 && real_up_to_phase(v) {
        work = generic_position(&work);
    }
    let levels = work.cols();
    let timed_out = AtomicBool::new(false);

    let mut total = Outcome::default();
    if levels == 0 {
        let labels = vec![0; reduced.rows()];
        let mut acc = Vec::new();
        let obj = eval.score(&labels, &mut acc);
        total.offer(obj, &labels, 0, 0, k);
    } else {
        total = total.merge(rank1_level(&work, &eval, k), k);
        let pool = engine.pool();
        let mut batch_base = 1u64;
        for d in 2..=levels {
            if engine.expired() {
                timed_out.store(true, AtomicOrdering::Relaxed);
                break;
            }
            let level = Level::new(&work.leading_columns(d), k, &eval, rule)?;
            let (outcome, batches) = run_level(&level, engine, &pool, &timed_out, batch_base);
            batch_base += batches + 1;
            total = total.merge(outcome, k);
        }
    }
    let best = total.best.expect("at least one candidate is always evaluated");
    let mut labels = vec![0; n];
    for (group, &l) in members.iter().zip(&best.labels) {
        for &(i, t) in group {
            labels[i] = (l + t) % k;
        }
    }
    let assignment = canonical_form(&Assignment::new_unchecked(labels, k));
    let objective = q.form(&assignment)?;
    Ok(RankRSolution {
        assignment,
        objective,
        factor_objective: best.objective,
        candidates: total.candidates,
        stats: total.stats,
        timed_out: timed_out.load(AtomicOrdering::Relaxed),
    })
}

/// The `n + 1` sweep candidates of the first column, scored on the full factor.
fn rank1_level(work: &CMatrix, eval: &Evaluator, k: usize) -> Outcome {
    let n = eval.n();
    let first = work.column(0);
    let sched = boundary_schedule(&first, k);
    let mut labels = sched.k0.clone();
    let mut out = Outcome::default();
    let mut acc = Vec::new();
    let obj = eval.score(&labels, &mut acc);
    out.offer(obj, &labels, 0, 0, k);
    for (step, &i) in sched.order.iter().enumerate() {
        labels[i] = (labels[i] + 1) % k;
        let obj = eval.score(&labels, &mut acc);
        out.offer(obj, &labels, 0, step as u64 + 1, k);
    }
    debug_assert_eq!(out.candidates as usize, n + 1);
    out
}

fn run_level(
    level: &Level<'_>,
    engine: &ParallelConfig,
    pool: &rayon::ThreadPool,
    timed_out: &AtomicBool,
    batch_base: u64,
) -> (Outcome, u64) {
    let size = level.set_size();
    let total = count_valid_index_sets(level.n, level.b, size);
    let batch_size = engine.batch_size(total);
    let mut stream = ValidIndexSets::new(level.n, level.b, size);
    let mut produced = 0u64;
    let produced_ref = &mut produced;
    let producer = std::iter::from_fn(move || {
        if engine.expired() {
            timed_out.store(true, AtomicOrdering::Relaxed);
            return None;
        }
        let mut flat = Vec::with_capacity(batch_size * size);
        let mut count = 0usize;
        while count < batch_size && stream.advance() {
            flat.extend_from_slice(stream.current());
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let no = batch_base + *produced_ref;
        *produced_ref += 1;
        Some((no, count, flat))
    });
    let k = level.k;
    let outcome = pool.install(|| {
        producer
            .par_bridge()
            .map_init(|| Scratch::new(level.n), |sc, (no, count, flat)| level.process_batch(sc, &flat, count, no))
            .reduce(Outcome::default, |a, b| a.merge(b, k))
    });
    (outcome, produced)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{factor_quadratic_form, HermitianOperand};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_factor(n: usize, r: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, r, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// Exhaustive reference over all `K^n` label vectors.
    fn oracle(v: &CMatrix, k: usize) -> f64 {
        let n = v.rows();
        let mut labels = vec![0usize; n];
        let mut best = f64::NEG_INFINITY;
        loop {
            let a = Assignment::new(labels.clone(), k).unwrap();
            best = best.max(factor_quadratic_form(v, &a).unwrap());
            let mut p = 0;
            while p < n {
                labels[p] += 1;
                if labels[p] < k {
                    break;
                }
                labels[p] = 0;
                p += 1;
            }
            if p == n {
                return best;
            }
        }
    }

    fn solve(v: &CMatrix, k: usize, rule: VertexRule) -> RankRSolution {
        let q = HermitianOperand::from_factor(v);
        solve_rankr_with(&q, v, v.cols(), k, &ParallelConfig::default(), rule).unwrap()
    }

    #[test]
    fn augmented_shapes() {
        let v = random_factor(2, 1, 0);
        let sys = build_augmented(&v, 3).unwrap();
        assert_eq!((sys.num_rows(), sys.width()), (6, 2));
        let real = CMatrix::from_real(3, 2, &[1.0, 0.5, -0.2, 0.3, 0.7, 1.1]);
        let sys = build_augmented(&real, 2).unwrap();
        assert_eq!((sys.num_rows(), sys.b_k()), (3, 1));
        assert_eq!(build_augmented(&random_factor(5, 2, 1), 4).unwrap().num_rows(), 10);
        for idx in 0..sys.num_rows() {
            assert_eq!(sys.group_of_row(idx), idx % 3);
        }
    }

    #[test]
    fn rows_evaluate_boundary_functionals() {
        let v = random_factor(4, 2, 3);
        let sys = build_augmented(&v, 3).unwrap();
        let c_tilde = [0.3, -0.1, 0.7, 0.2];
        let c = recover_c(&c_tilde);
        for idx in 0..sys.num_rows() {
            let (m, i) = (sys.boundary_of_row(idx), sys.group_of_row(idx));
            let direct = (sys.rotations()[m] * linalg::dot(v.row(i), &c)).im;
            let via_row: f64 = sys.row(idx).iter().zip(&c_tilde).map(|(a, b)| a * b).sum();
            assert!((direct - via_row).abs() < 1e-14);
        }
    }

    #[test]
    fn index_set_examples() {
        assert_eq!(ValidIndexSets::new(2, 3, 1).count(), 6);
        let sets: Vec<_> = ValidIndexSets::new(2, 3, 3).collect();
        assert_eq!(sets.len(), 18);
        assert!(sets.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ValidIndexSets::new(3, 1, 3).collect::<Vec<_>>(), vec![vec![0, 1, 2]]);
        assert_eq!(ValidIndexSets::new(3, 1, 0).count(), 1);
        assert_eq!(ValidIndexSets::new(1, 1, 2).count(), 0);
    }

    #[test]
    fn index_set_count_matches_stream() {
        for (n, b, s) in [(2, 3, 3), (4, 3, 3), (5, 2, 5), (3, 5, 5), (6, 1, 3)] {
            assert_eq!(ValidIndexSets::new(n, b, s).count() as u128, count_valid_index_sets(n, b, s));
        }
    }

    #[test]
    fn null_vector_examples() {
        let sys = AugmentedSystem { k: 2, n: 1, r: 1, b: 1, rows: vec![1.0, 0.0], rotations: vec![] };
        let c = vertex_nullvector(&sys, &[0]).unwrap();
        assert!(c[0].abs() < 1e-15 && (c[1].abs() - 1.0).abs() < 1e-15);
        // Duplicated row: rank deficient.
        let sys = AugmentedSystem {
            k: 3,
            n: 3,
            r: 2,
            b: 1,
            rows: vec![1.0, 2.0, 0.0, 1.0, 1.0, 2.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
            rotations: vec![],
        };
        assert!(vertex_nullvector(&sys, &[0, 1, 2]).is_none());
    }

    #[test]
    fn two_rows_of_a_group_null_the_coordinate() {
        // V_0 = (1, 1): the null direction of the group is c ∝ (1, −1).
        let mut v = random_factor(3, 2, 9);
        v[(0, 0)] = C64::new(1.0, 0.0);
        v[(0, 1)] = C64::new(1.0, 0.0);
        let sys = build_augmented(&v, 3).unwrap();
        // Rows 0 and 3 both belong to coordinate 0; row 1 is coordinate 1.
        let ct = vertex_nullvector(&sys, &[0, 1, 3]).unwrap();
        let c = recover_c(&ct);
        assert!(linalg::dot(v.row(0), &c).norm() < 1e-12);
        assert!((ct.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expansion_examples() {
        let v = CMatrix::from_vec(1, 1, vec![C64::new(1.0, 0.0)]);
        let sys = build_augmented(&v, 3).unwrap();
        let labels = |c: C64| -> Vec<usize> {
            let mut l: Vec<usize> = expand_vertex(&v, &[c], &[], &sys).iter().map(|a| a.labels()[0]).collect();
            l.sort();
            l
        };
        assert_eq!(labels(C64::new(1.0, 0.0)), vec![0]);
        assert_eq!(labels(C64::from_polar(1.0, 2.0 * PI / 3.0)), vec![1]);
        assert_eq!(labels(C64::from_polar(1.0, PI / 3.0)), vec![0, 1]);
        assert_eq!(labels(C64::new(0.0, 0.0)), vec![0, 1, 2]);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(candidate_count_bound(7, 1, 3), 7);
        assert_eq!(candidate_count_bound(4, 2, 3), 112);
        assert_eq!(candidate_count_bound(10, 2, 3), 1630);
    }

    #[test]
    fn zero_second_column_matches_rank_one() {
        let mut v = random_factor(6, 2, 5);
        for i in 0..6 {
            v[(i, 1)] = C64::new(0.0, 0.0);
        }
        let sol = solve(&v, 3, VertexRule::Leading);
        let q = HermitianOperand::from_factor(&v);
        let r1 = crate::rank1::solve_rank1(&q, &v.column(0), 3).unwrap();
        assert!((sol.objective - r1.objective).abs() <= 1e-9 * r1.objective);
    }

    #[test]
    fn seeded_examples_match_exhaustive_search() {
        let v = random_factor(4, 2, 7);
        let best = oracle(&v, 3);
        assert!((solve(&v, 3, VertexRule::Leading).objective - best).abs() <= 1e-9 * best);
        let v = random_factor(5, 3, 7);
        let best = oracle(&v, 3);
        assert!((solve(&v, 3, VertexRule::Leading).objective - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn real_binary_problem_uses_row_space() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = CMatrix::from_fn(6, 2, |_, _| C64::new(rng.gen_range(-1.0..1.0), 0.0));
            let best = oracle(&v, 2);
            let got = solve(&v, 2, VertexRule::Leading).objective;
            assert!((got - best).abs() <= 1e-9 * best, "seed {seed}: {got} vs {best}");
        }
    }

    #[test]
    fn errors_are_reported() {
        let v = random_factor(3, 2, 0);
        let q = HermitianOperand::from_factor(&v);
        let cfg = ParallelConfig::default();
        assert!(matches!(solve_rankr(&q, &v, 3, 3, &cfg), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            solve_rankr(&HermitianOperand::identity(4), &v, 2, 3, &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
        let v = random_factor(1, 2, 0);
        let q = HermitianOperand::from_factor(&v);
        assert!(matches!(solve_rankr(&q, &v, 2, 2, &cfg), Err(Error::RankOutOfRange { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn leading_rule_is_exact(seed in any::<u64>(), n in 3usize..=6, r in 1usize..=3, k in 2usize..=4) {
            let v = random_factor(n, r, seed);
            let best = oracle(&v, k);
            let sol = solve(&v, k, VertexRule::Leading);
            prop_assert!((sol.objective - best).abs() <= 1e-9 * best, "{} vs {}", sol.objective, best);
            prop_assert!(sol.stats.max_residual <= 1e-8);
            prop_assert!(sol.stats.max_norm_deviation <= 1e-12);
            prop_assert!(sol.stats.max_saturated_ratio <= 1e-8);
        }

        #[test]
        fn real_factor_is_exact(seed in any::<u64>(), n in 3usize..=7, r in 1usize..=3, k in 3usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = CMatrix::from_fn(n, r, |_, _| C64::new(rng.gen_range(-1.0..1.0), 0.0));
            let best = oracle(&v, k);
            let sol = solve(&v, k, VertexRule::Leading);
            prop_assert!((sol.objective - best).abs() <= 1e-9 * best, "{} vs {}", sol.objective, best);
        }

        #[test]
        fn repeated_rows_are_exact(seed in any::<u64>(), n in 3usize..=5, k in 2usize..=4) {
            let base = random_factor(n, 2, seed);
            let w = root_of_unity(1, k);
            let v = CMatrix::from_fn(n + 2, 2, |i, j| match i {
                i if i < n => base[(i, j)],
                i if i == n => base[(0, j)] * 2.0,
                _ => base[(1, j)] * w,
            });
            let best = oracle(&v, k);
            let sol = solve(&v, k, VertexRule::Leading);
            prop_assert!((sol.objective - best).abs() <= 1e-9 * best);
        }

        #[test]
        fn adjacent_rule_is_exact(seed in any::<u64>(), n in 3usize..=5, r in 1usize..=3, k in 2usize..=4) {
            let v = random_factor(n, r, seed);
            let best = oracle(&v, k);
            let sol = solve(&v, k, VertexRule::Adjacent);
            prop_assert!((sol.objective - best).abs() <= 1e-9 * best);
        }

        #[test]
        fn objective_grows_with_rank(seed in any::<u64>(), n in 3usize..=6) {
            let v = random_factor(n, 3, seed);
            let q = HermitianOperand::from_factor(&v);
            let cfg = ParallelConfig::default();
            let mut prev = f64::NEG_INFINITY;
            for r in 1..=3 {
                let prefix = v.leading_columns(r);
                let sol = solve_rankr(&q, &prefix, r, 3, &cfg).unwrap();
                prop_assert!(sol.factor_objective >= prev - 1e-12 * sol.factor_objective.abs());
                prev = sol.factor_objective;
            }
        }

        #[test]
        fn workers_do_not_change_the_answer(seed in any::<u64>(), n in 5usize..=9) {
            let v = random_factor(n, 2, seed);
            let q = HermitianOperand::from_factor(&v);
            let mut cfg = ParallelConfig::with_workers(1);
            cfg.batch = crate::parallel::BatchPolicy::Fixed(7);
            let one = solve_rankr(&q, &v, 2, 3, &cfg).unwrap();
            cfg.workers = 3;
            let three = solve_rankr(&q, &v, 2, 3, &cfg).unwrap();
            prop_assert_eq!(one.assignment, three.assignment);
            prop_assert_eq!(one.candidates, three.candidates);
            prop_assert_eq!(one.objective.to_bits(), three.objective.to_bits());
        }
    }
}
