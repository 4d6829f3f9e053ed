//! End-to-end low-rank solver, baselines, exhaustive oracle and the
//! perturbation diagnostics.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::alphabet::{
    canonical_form, quadratic_form, root_of_unity, Alphabet, Assignment, HermitianOperand, QuadraticObjective,
};
use crate::error::{Error, Result};
use crate::graph::{cut_value, Laplacian, WeightedGraph};
use crate::linalg::{self, CMatrix, C64};
use crate::parallel::ParallelConfig;
use crate::rank1::solve_rank1;
use crate::rankr::solve_rankr;
use crate::spectra::{eigengap, top_r_factor, top_r_factor_laplacian};

/// Largest number of assignments the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rank1,
    Rankr,
    Approx,
    Random,
    Greedy,
    Oracle,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Rank1 => "rank1",
            Algorithm::Rankr => "rankr",
            Algorithm::Approx => "approx",
            Algorithm::Random => "random",
            Algorithm::Greedy => "greedy",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rank1" => Algorithm::Rank1,
            "rankr" => Algorithm::Rankr,
            "approx" => Algorithm::Approx,
            "random" => Algorithm::Random,
            "greedy" => Algorithm::Greedy,
            "oracle" => Algorithm::Oracle,
            other => return Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        })
    }
}

fn labels_only<S: Serializer>(a: &Assignment, s: S) -> std::result::Result<S::Ok, S::Error> {
    a.labels().serialize(s)
}

/// Outcome of one solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub rank: usize,
    pub k: usize,
    pub n: usize,
    /// `Re(z†Qz)` against the input objective.
    pub objective: f64,
    pub cut_value: Option<f64>,
    #[serde(serialize_with = "labels_only")]
    pub assignment: Assignment,
    pub candidates_evaluated: u64,
    pub wall_time_ms: u64,
    pub seed: Option<u64>,
    pub workers: usize,
    pub timed_out: bool,
}

/// Objective handed to [`approximate_low_rank`].
#[derive(Clone, Copy, Debug)]
pub enum ProblemInput<'a> {
    Matrix(&'a HermitianOperand),
    /// Graph with its Laplacian; reports carry cut values when `K = 3`.
    Graph {
        graph: &'a WeightedGraph,
        laplacian: &'a Laplacian,
    },
}

impl ProblemInput<'_> {
    pub fn n(&self) -> usize {
        match self {
            ProblemInput::Matrix(q) => q.n(),
            ProblemInput::Graph { laplacian, .. } => laplacian.n(),
        }
    }

    fn objective(&self) -> &dyn QuadraticObjective {
        match self {
            ProblemInput::Matrix(q) => *q,
            ProblemInput::Graph { laplacian, .. } => *laplacian,
        }
    }

    fn cut(&self, a: &Assignment) -> Result<Option<f64>> {
        match self {
            ProblemInput::Graph { graph, .. } if a.k() == 3 => Ok(Some(cut_value(graph, a)?)),
            _ => Ok(None),
        }
    }
}

fn elapsed_ms(t0: Instant) -> u64 {
    t0.elapsed().as_millis().min(u64::MAX as u128) as u64
}

/// Rank-`r` approximation `Q_r = V V†` of the input, solved exactly; the
/// winner is scored against the original objective.
pub fn approximate_low_rank(
    input: ProblemInput<'_>,
    r: usize,
    k: usize,
    engine: &ParallelConfig,
) -> Result<SolveReport> {
    let t0 = Instant::now();
    Alphabet::new(k)?;
    let n = input.n();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    let factor = match input {
        ProblemInput::Matrix(q) => top_r_factor(q, r)?,
        ProblemInput::Graph { laplacian, .. } => top_r_factor_laplacian(laplacian, r)?,
    };
    let v = factor.scaled();
    let q = input.objective();
    let (assignment, candidates, timed_out) = if r == 1 {
        let sol = solve_rank1(q, &v.column(0), k)?;
        (sol.assignment, sol.candidates, false)
    } else {
        let sol = solve_rankr(q, &v, r, k, engine)?;
        (sol.assignment, sol.candidates, sol.timed_out)
    };
    let objective = q.form(&assignment)?;
    Ok(SolveReport {
        algorithm: if r == 1 { Algorithm::Rank1 } else { Algorithm::Approx },
        rank: r,
        k,
        n,
        objective,
        cut_value: input.cut(&assignment)?,
        assignment,
        candidates_evaluated: candidates,
        wall_time_ms: elapsed_ms(t0),
        seed: None,
        workers: engine.workers,
        timed_out,
    })
}

/// Exhaustive maximum of `Re(z†Qz)` with the first label fixed to 0. Among
/// values within `1e-12` relative of each other the lexicographically first
/// assignment wins.
pub fn brute_force_oracle(q: &HermitianOperand, k: usize) -> Result<(Assignment, f64)> {
    Alphabet::new(k)?;
    let n = q.n();
    if n == 0 {
        return Ok((Assignment::new_unchecked(Vec::new(), k), 0.0));
    }
    let count = (k as u128).checked_pow((n - 1) as u32).unwrap_or(u128::MAX);
    if count > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge(count, ORACLE_LIMIT));
    }
    let roots: Vec<C64> = (0..k).map(|j| root_of_unity(j, k)).collect();
    let entries = q.entries();
    let mut labels = vec![0usize; n];
    // y = Q z, updated one column at a time.
    let mut y: Vec<C64> = (0..n).map(|i| (0..n).map(|j| entries[(i, j)]).sum()).collect();
    let value =
        |labels: &[usize], y: &[C64]| -> f64 { labels.iter().zip(y).map(|(&l, yi)| (roots[l].conj() * yi).re).sum() };
    let mut best = labels.clone();
    let mut best_val = value(&labels, &y);
    loop {
        // Odometer with the last coordinate fastest, so the first maximum
        // found is the lexicographically smallest.
        let mut p = n - 1;
        loop {
            if p == 0 {
                let a = Assignment::new_unchecked(best, k);
                let exact = quadratic_form(q, &a)?;
                return Ok((a, exact));
            }
            let old = labels[p];
            let new = (old + 1) % k;
            let delta = roots[new] - roots[old];
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += entries[(i, p)] * delta;
            }
            labels[p] = new;
            if new != 0 {
                break;
            }
            p -= 1;
        }
        let v = value(&labels, &y);
        if v > best_val + 1e-12 * best_val.abs() {
            best_val = v;
            best.copy_from_slice(&labels);
        }
    }
}

fn graph_report(
    g: &WeightedGraph,
    algorithm: Algorithm,
    assignment: Assignment,
    candidates: u64,
    t0: Instant,
    seed: Option<u64>,
    timed_out: bool,
) -> Result<SolveReport> {
    let lap = crate::graph::laplacian(g);
    let k = assignment.k();
    let assignment = canonical_form(&assignment);
    Ok(SolveReport {
        algorithm,
        rank: 0,
        k,
        n: g.n(),
        objective: lap.form(&assignment)?,
        cut_value: if k == 3 { Some(cut_value(g, &assignment)?) } else { None },
        assignment,
        candidates_evaluated: candidates,
        wall_time_ms: elapsed_ms(t0),
        seed,
        workers: 1,
        timed_out,
    })
}

/// Best of `n + 1` uniform random 3-labelings by cut value.
pub fn random_baseline(g: &WeightedGraph, seed: u64) -> Result<SolveReport> {
    random_baseline_k(g, 3, seed)
}

/// [`random_baseline`] over `A_K`; the winner maximizes the cut weight.
pub fn random_baseline_k(g: &WeightedGraph, k: usize, seed: u64) -> Result<SolveReport> {
    let t0 = Instant::now();
    Alphabet::new(k)?;
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Assignment)> = None;
    for _ in 0..=n {
        let a = Assignment::new_unchecked((0..n).map(|_| rng.gen_range(0..k)).collect(), k);
        let c = cut_value(g, &a)?;
        if best.as_ref().map_or(true, |(b, _)| c > *b) {
            best = Some((c, a));
        }
    }
    let (_, a) = best.expect("at least one draw");
    graph_report(g, Algorithm::Random, a, n as u64 + 1, t0, Some(seed), false)
}

/// Greedy locking: repeatedly fix the `(node, label)` pair with the largest
/// cut gain against the already fixed nodes.
pub fn greedy_baseline(g: &WeightedGraph, seed: u64) -> Result<SolveReport> {
    greedy_baseline_k(g, 3, seed, None)
}

#[derive(Clone, Copy, Debug)]
struct GainKey {
    gain: f64,
    node: usize,
}

impl PartialEq for GainKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for GainKey {}

impl PartialOrd for GainKey {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for GainKey {
    /// Larger gain first, then smaller node index.
    fn cmp(&self, o: &Self) -> Ordering {
        o.gain.total_cmp(&self.gain).then(self.node.cmp(&o.node))
    }
}

/// [`greedy_baseline`] over `A_K` with an optional deadline. Nodes still
/// unlocked at the deadline keep label 0 and the report is flagged.
pub fn greedy_baseline_k(g: &WeightedGraph, k: usize, seed: u64, deadline: Option<Instant>) -> Result<SolveReport> {
    let t0 = Instant::now();
    Alphabet::new(k)?;
    let n = g.n();
    let adj = g.adjacency();
    let mut labels = vec![0usize; n];
    let mut locked = vec![false; n];
    // to_label[v·k + l]: weight from v to locked nodes labelled l.
    let mut to_label = vec![0.0f64; n * k];
    let mut to_locked = vec![0.0f64; n];
    let best_of = |v: usize, to_label: &[f64], to_locked: &[f64]| -> (f64, usize) {
        let row = &to_label[v * k..(v + 1) * k];
        let mut best = 0;
        for l in 1..k {
            if row[l] < row[best] {
                best = l;
            }
        }
        (to_locked[v] - row[best], best)
    };
    let mut queue: BTreeSet<GainKey> = BTreeSet::new();
    let mut gain = vec![0.0f64; n];
    let degrees = g.degrees();
    let first = (0..n).max_by(|&a, &b| degrees[a].cmp(&degrees[b]).then(b.cmp(&a)));
    for v in 0..n {
        if Some(v) != first {
            queue.insert(GainKey { gain: 0.0, node: v });
        }
    }
    let mut timed_out = false;
    let mut steps = 0u64;
    let mut next = first.map(|v| (v, 0usize));
    while let Some((u, l)) = next {
        locked[u] = true;
        labels[u] = l;
        steps += 1;
        for &(v, w) in &adj[u] {
            if locked[v] {
                continue;
            }
            queue.remove(&GainKey { gain: gain[v], node: v });
            to_label[v * k + l] += w;
            to_locked[v] += w;
            gain[v] = best_of(v, &to_label, &to_locked).0;
            queue.insert(GainKey { gain: gain[v], node: v });
        }
        if steps % 256 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = !queue.is_empty();
            break;
        }
        next = queue.pop_first().map(|key| (key.node, best_of(key.node, &to_label, &to_locked).1));
    }
    let a = Assignment::new_unchecked(labels, k);
    graph_report(g, Algorithm::Greedy, a, steps, t0, Some(seed), timed_out)
}

/// Planted low-rank objective plus noise.
#[derive(Clone, Debug)]
pub struct PerturbationInstance {
    /// `Q⋆ = Σ λ_i⋆ u_i⋆ u_i⋆†`.
    pub qstar: HermitianOperand,
    pub h: CMatrix,
    /// `Q⋆ + H`; flagged non-Hermitian when `H` is.
    pub q: HermitianOperand,
    pub frame: CMatrix,
    /// Full spectrum of `Q⋆` in descending order (zeros past `r⋆`).
    pub spectrum: Vec<f64>,
    /// Eigengap of `Q⋆` at its own rank.
    pub eigengap: f64,
    /// `‖u_1⋆‖_∞ · √n`.
    pub mu_hat: f64,
    pub noise_scale: f64,
}

/// Random orthonormal complex frame with the given spectrum, plus complex
/// Gaussian noise of entry standard deviation `ε` (Hermitian if requested).
pub fn make_perturbation(
    n: usize,
    rstar: usize,
    spectrum: &[f64],
    noise_scale: f64,
    hermitian_noise: bool,
    seed: u64,
) -> Result<PerturbationInstance> {
    if rstar == 0 || rstar > n {
        return Err(Error::RankOutOfRange { r: rstar, n });
    }
    if spectrum.len() != rstar {
        return Err(Error::DimensionMismatch { expected: rstar, found: spectrum.len() });
    }
    if spectrum.iter().any(|&x| !(x > 0.0)) || spectrum.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("spectrum must be positive and non-increasing".into()));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::InvalidArgument("noise scale must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |s: f64| -> C64 {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * s
    };
    let mut frame = CMatrix::from_fn(n, rstar, |_, _| gauss(1.0));
    linalg::orthonormalize_columns(&mut frame);
    let scaled = CMatrix::from_fn(n, rstar, |i, j| frame[(i, j)] * spectrum[j]);
    let qstar_m = linalg::hermitize(&scaled.matmul(&frame.adjoint()));
    // Real and imaginary parts N(0, ε²/2) each.
    let s = noise_scale / std::f64::consts::SQRT_2;
    let g = CMatrix::from_fn(n, n, |_, _| gauss(s));
    let h = if hermitian_noise {
        // (G + G†)/√2 keeps every entry at variance ε².
        g.add(&g.adjoint()).scale(1.0 / std::f64::consts::SQRT_2)
    } else {
        g
    };
    let h = if noise_scale == 0.0 { CMatrix::zeros(n, n) } else { h };
    let q = if h.hermitian_defect() <= 1e-12 * h.max_abs().max(1.0) {
        HermitianOperand::new(linalg::hermitize(&qstar_m.add(&h)))?
    } else {
        HermitianOperand::general(qstar_m.add(&h))?
    };
    let mut full = spectrum.to_vec();
    full.resize(n, 0.0);
    let mu_hat = (0..n).map(|i| frame[(i, 0)].norm()).fold(0.0, f64::max) * (n as f64).sqrt();
    Ok(PerturbationInstance {
        qstar: HermitianOperand::new(qstar_m)?.with_psd_hint(true),
        h,
        q,
        frame,
        eigengap: eigengap(&full, rstar)?,
        spectrum: full,
        mu_hat,
        noise_scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticStatus {
    Ok,
    /// `‖H‖₂ > δ/2`: the bound does not apply.
    Inconclusive,
}

/// Additive comparison `|OPT(Q⋆) − z_r†Q⋆z_r|` against
/// `n(λ_{r+1}⋆ + (λ_1⋆/δ)‖H‖₂)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditiveDiagnostic {
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub status: DiagnosticStatus,
    pub opt: f64,
    pub achieved: f64,
    pub lhs: f64,
    pub rhs_core: f64,
    /// `lhs / rhs_core`, with `0/0 = 0`.
    pub implied_constant: f64,
    pub h_norm: f64,
    pub eigengap: f64,
}

/// Ratio `z_r†Q⋆z_r / OPT(Q⋆)` beside `1 − (λ_{r+1}⋆/λ_1⋆ + ‖H‖₂/δ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplicativeDiagnostic {
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub status: DiagnosticStatus,
    pub opt: f64,
    pub achieved: f64,
    pub ratio: f64,
    pub predicted_ratio: f64,
    pub mu_hat: f64,
    pub h_norm: f64,
    pub eigengap: f64,
}

struct Comparison {
    opt: f64,
    achieved: f64,
    h_norm: f64,
    gap: f64,
    status: DiagnosticStatus,
}

fn compare(inst: &PerturbationInstance, r: usize, k: usize) -> Result<Comparison> {
    let n = inst.q.n();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    let gap = eigengap(&inst.spectrum, r)?;
    let h_norm = if inst.noise_scale == 0.0 { 0.0 } else { linalg::spectral_norm(&inst.h) };
    let status = if h_norm <= gap / 2.0 && gap > 0.0 { DiagnosticStatus::Ok } else { DiagnosticStatus::Inconclusive };
    let (_, opt) = brute_force_oracle(&inst.qstar, k)?;
    let report = approximate_low_rank(ProblemInput::Matrix(&inst.q), r, k, &ParallelConfig::default())?;
    let achieved = quadratic_form(&inst.qstar, &report.assignment)?;
    Ok(Comparison { opt, achieved, h_norm, gap, status })
}

pub fn check_additive_bound(inst: &PerturbationInstance, r: usize, k: usize) -> Result<AdditiveDiagnostic> {
    let c = compare(inst, r, k)?;
    let n = inst.q.n();
    let lambda_next = inst.spectrum.get(r).copied().unwrap_or(0.0);
    let lhs = (c.opt - c.achieved).abs();
    let rhs_core =
        if c.gap > 0.0 { n as f64 * (lambda_next + inst.spectrum[0] / c.gap * c.h_norm) } else { f64::INFINITY };
    let implied_constant = if lhs == 0.0 { 0.0 } else { lhs / rhs_core };
    Ok(AdditiveDiagnostic {
        n,
        r,
        k,
        status: c.status,
        opt: c.opt,
        achieved: c.achieved,
        lhs,
        rhs_core,
        implied_constant,
        h_norm: c.h_norm,
        eigengap: c.gap,
    })
}

pub fn check_multiplicative_bound(inst: &PerturbationInstance, r: usize, k: usize) -> Result<MultiplicativeDiagnostic> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("multiplicative bound needs K ≥ 3, got {k}")));
    }
    let c = compare(inst, r, k)?;
    let lambda_next = inst.spectrum.get(r).copied().unwrap_or(0.0);
    let ratio = if c.opt > 0.0 { c.achieved / c.opt } else { 1.0 };
    let predicted_ratio = 1.0 - (lambda_next / inst.spectrum[0] + c.h_norm / c.gap);
    Ok(MultiplicativeDiagnostic {
        n: inst.q.n(),
        r,
        k,
        status: c.status,
        opt: c.opt,
        achieved: c.achieved,
        ratio,
        predicted_ratio,
        mu_hat: inst.mu_hat,
        h_norm: c.h_norm,
        eigengap: c.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_er, laplacian};
    use proptest::prelude::*;
    use rand::Rng;

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    fn star() -> WeightedGraph {
        WeightedGraph::new(5, (1..5).map(|i| (0, i, 1.0))).unwrap()
    }

    fn random_psd(n: usize, r: usize, seed: u64) -> (HermitianOperand, CMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CMatrix::from_fn(n, r, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (HermitianOperand::from_factor(&v), v)
    }

    /// Independent reference: plain enumeration of all `K^n` label vectors.
    fn naive_max(q: &HermitianOperand, k: usize) -> f64 {
        let n = q.n();
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let labels: Vec<usize> = (0..n)
                    .map(|_| {
                        let l = code % k;
                        code /= k;
                        l
                    })
                    .collect();
                quadratic_form(q, &Assignment::new(labels, k).unwrap()).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn oracle_examples() {
        let (a, v) = brute_force_oracle(&HermitianOperand::identity(4), 3).unwrap();
        assert_eq!(v, 4.0);
        assert_eq!(a.labels(), &[0, 0, 0, 0]);
        let edge = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let (a, v) = brute_force_oracle(&laplacian(&edge).to_dense(), 3).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert_ne!(a.labels()[0], a.labels()[1]);
        assert_eq!(a.labels(), &[0, 1]);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let q = HermitianOperand::identity(30);
        assert!(matches!(brute_force_oracle(&q, 3), Err(Error::InstanceTooLarge(..))));
    }

    #[test]
    fn approximate_examples() {
        let (q, _) = random_psd(5, 2, 11);
        let report = approximate_low_rank(ProblemInput::Matrix(&q), 2, 3, &ParallelConfig::default()).unwrap();
        let (_, best) = brute_force_oracle(&q, 3).unwrap();
        assert!((report.objective - best).abs() <= 1e-9 * best);
        let g = triangle();
        let l = laplacian(&g);
        let report =
            approximate_low_rank(ProblemInput::Graph { graph: &g, laplacian: &l }, 2, 3, &ParallelConfig::default())
                .unwrap();
        assert_eq!(report.cut_value, Some(3.0));
        assert!((report.objective - 9.0).abs() < 1e-9);
    }

    #[test]
    fn torus_rank_one_cuts_almost_everything() {
        let g = crate::graph::generate_torus(10, 10).unwrap();
        let l = laplacian(&g);
        let report =
            approximate_low_rank(ProblemInput::Graph { graph: &g, laplacian: &l }, 1, 3, &ParallelConfig::default())
                .unwrap();
        assert!(report.cut_value.unwrap() >= 0.98 * g.m() as f64);
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(greedy_baseline(&triangle(), 0).unwrap().cut_value, Some(3.0));
        assert_eq!(greedy_baseline(&star(), 0).unwrap().cut_value, Some(4.0));
        let edge = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(greedy_baseline(&edge, 0).unwrap().cut_value, Some(1.0));
        let empty = WeightedGraph::new(4, []).unwrap();
        assert_eq!(random_baseline(&empty, 3).unwrap().cut_value, Some(0.0));
        for seed in 0..20 {
            let r = random_baseline(&triangle(), seed).unwrap();
            assert!([0.0, 2.0, 3.0].contains(&r.cut_value.unwrap()));
            assert_eq!(r.candidates_evaluated, 4);
        }
    }

    #[test]
    fn random_baseline_is_reproducible() {
        let g = generate_er(40, 0.2, 5).unwrap();
        let a = random_baseline(&g, 9).unwrap();
        let b = random_baseline(&g, 9).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.candidates_evaluated, 41);
    }

    #[test]
    fn greedy_deadline_is_honoured() {
        let g = generate_er(3000, 0.01, 2).unwrap();
        let past = Instant::now();
        let r = greedy_baseline_k(&g, 3, 0, Some(past)).unwrap();
        assert!(r.timed_out);
        let r = greedy_baseline_k(&g, 3, 0, None).unwrap();
        assert!(!r.timed_out);
    }

    #[test]
    fn perturbation_examples() {
        let inst = make_perturbation(6, 2, &[3.0, 1.0], 0.0, true, 1).unwrap();
        assert_eq!(inst.h.max_abs(), 0.0);
        assert_eq!(inst.q.entries(), inst.qstar.entries());
        assert_eq!(inst.eigengap, 1.0);
        let inst = make_perturbation(6, 2, &[3.0, 1.0], 0.3, true, 2).unwrap();
        assert!(inst.h.hermitian_defect() <= 1e-12);
        // Q⋆ matches its planted decomposition.
        let frame = &inst.frame;
        let rebuilt = CMatrix::from_fn(6, 6, |i, j| {
            (0..2).map(|t| frame[(i, t)] * frame[(j, t)].conj() * inst.spectrum[t]).sum()
        });
        assert!(rebuilt.sub(inst.qstar.entries()).max_abs() <= 1e-10);
        assert!(make_perturbation(6, 2, &[1.0, 3.0], 0.0, true, 0).is_err());
    }

    #[test]
    fn noiseless_bounds_are_tight() {
        let inst = make_perturbation(6, 2, &[3.0, 1.0], 0.0, true, 4).unwrap();
        let add = check_additive_bound(&inst, 2, 3).unwrap();
        assert_eq!(add.lhs, 0.0);
        assert_eq!(add.implied_constant, 0.0);
        assert_eq!(add.status, DiagnosticStatus::Ok);
        let mul = check_multiplicative_bound(&inst, 2, 3).unwrap();
        assert_eq!(mul.ratio, 1.0);
        assert!(check_multiplicative_bound(&inst, 2, 2).is_err());
    }

    #[test]
    fn rank_deficit_stays_within_tail_bound() {
        let inst = make_perturbation(6, 2, &[3.0, 1.0], 0.0, true, 8).unwrap();
        let add = check_additive_bound(&inst, 1, 3).unwrap();
        assert!(add.lhs <= add.rhs_core);
        let mul = check_multiplicative_bound(&inst, 1, 3).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&mul.ratio));
    }

    #[test]
    fn report_serializes_with_fixed_keys() {
        let r = greedy_baseline(&triangle(), 0).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["assignment"], serde_json::json!([0, 1, 2]));
        assert_eq!(v["algorithm"], "greedy");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn oracle_matches_naive_enumeration(seed in any::<u64>(), n in 1usize..=5, k in 2usize..=4) {
            let (q, _) = random_psd(n, 2, seed);
            let (a, v) = brute_force_oracle(&q, k).unwrap();
            prop_assert_eq!(a.labels()[0], 0);
            let naive = naive_max(&q, k);
            prop_assert!((v - naive).abs() <= 1e-9 * naive.abs().max(1e-12));
        }

        #[test]
        fn exact_low_rank_inputs_are_solved(seed in any::<u64>(), n in 3usize..=6, r in 1usize..=2) {
            let (q, _) = random_psd(n, r, seed);
            let report = approximate_low_rank(ProblemInput::Matrix(&q), r, 3, &ParallelConfig::default()).unwrap();
            let (_, best) = brute_force_oracle(&q, 3).unwrap();
            prop_assert!((report.objective - best).abs() <= 1e-9 * best);
            prop_assert!((report.objective - quadratic_form(&q, &report.assignment).unwrap()).abs() <= 1e-9 * best);
        }

        #[test]
        fn baselines_never_beat_the_oracle(seed in any::<u64>(), n in 2usize..=8, p in 0.2f64..0.9) {
            let g = generate_er(n, p, seed).unwrap();
            let (_, best) = brute_force_oracle(&laplacian(&g).to_dense(), 3).unwrap();
            let cut = best / 3.0;
            prop_assert!(random_baseline(&g, seed).unwrap().cut_value.unwrap() <= cut + 1e-9);
            prop_assert!(greedy_baseline(&g, seed).unwrap().cut_value.unwrap() <= cut + 1e-9);
        }
    }
}
