//! Exact maximization for rank-one objectives `Q = q q†`.
//!
//! Sweeping the common phase of `z` across a full turn changes the nearest
//! symbol of one coordinate at a time, so only `n + 1` label vectors can be
//! optimal. They are visited in order of their boundary points.

use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::alphabet::{canonical_form, Assignment, QuadraticObjective};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Phases, boundary points and visiting order for a rank-one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySchedule {
    pub k: usize,
    /// Phase of each `q_i` in `[0, 2π)`.
    pub theta: Vec<f64>,
    /// Boundary point of each coordinate in `(−π/K, π/K]`.
    pub phi: Vec<f64>,
    /// Starting labels `floor(Kθ/2π)`.
    pub k0: Vec<usize>,
    /// Coordinates sorted by `phi`, ties by index.
    pub order: Vec<usize>,
}

/// Phase of `w` in `[0, 2π)`; zero maps to zero.
pub(crate) fn phase_0_2pi(w: C64) -> f64 {
    if w.re == 0.0 && w.im == 0.0 {
        return 0.0;
    }
    let t = w.im.atan2(w.re);
    let t = if t < 0.0 { t + 2.0 * PI } else { t };
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

pub fn boundary_schedule(q: &[C64], k: usize) -> BoundarySchedule {
    assert!(k >= 2, "alphabet size must be at least 2");
    let kf = k as f64;
    let mut theta = Vec::with_capacity(q.len());
    let mut phi = Vec::with_capacity(q.len());
    let mut k0 = Vec::with_capacity(q.len());
    for &qi in q {
        let t = phase_0_2pi(qi);
        let x = kf * t / (2.0 * PI);
        let fl = x.floor();
        let label = (fl as usize).min(k - 1);
        theta.push(t);
        k0.push(label);
        phi.push((2.0 * PI / kf) * (0.5 + fl - x));
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| phi[a].total_cmp(&phi[b]).then(a.cmp(&b)));
    BoundarySchedule { k, theta, phi, k0, order }
}

/// Lazy stream of the `n + 1` candidates of a schedule.
#[derive(Clone, Debug)]
pub struct Rank1Candidates<'a> {
    sched: &'a BoundarySchedule,
    labels: Vec<usize>,
    step: usize,
}

impl Iterator for Rank1Candidates<'_> {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let n = self.labels.len();
        if self.step > n {
            return None;
        }
        if self.step > 0 {
            let i = self.sched.order[self.step - 1];
            self.labels[i] = (self.labels[i] + 1) % self.sched.k;
        }
        self.step += 1;
        Some(Assignment::new_unchecked(self.labels.clone(), self.sched.k))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.labels.len() + 1 - self.step;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Rank1Candidates<'_> {}

pub fn enumerate_rank1_candidates(sched: &BoundarySchedule) -> Rank1Candidates<'_> {
    Rank1Candidates { sched, labels: sched.k0.clone(), step: 0 }
}

/// Result of a rank-one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Solution {
    pub assignment: Assignment,
    /// `Re(z†Qz)` of the winner.
    pub objective: f64,
    /// `|z†q|²` of the winner.
    pub score: f64,
    pub candidates: u64,
}

/// Maximizes `|z†q|` over the `n + 1` candidates and reports `Re(z†Qz)`.
pub fn solve_rank1<O: QuadraticObjective + ?Sized>(q_op: &O, q: &[C64], k: usize) -> Result<Rank1Solution> {
    if q_op.dim() != q.len() {
        return Err(Error::DimensionMismatch { expected: q_op.dim(), found: q.len() });
    }
    if k < 2 {
        return Err(Error::InvalidAlphabet(k));
    }
    let sched = boundary_schedule(q, k);
    let roots: Vec<C64> = (0..k).map(|j| crate::alphabet::root_of_unity(j, k)).collect();
    // Incremental s = z†q.
    let mut labels = sched.k0.clone();
    let mut s: C64 = labels.iter().zip(q).map(|(&l, qi)| roots[l].conj() * qi).sum();
    let mut best = labels.clone();
    let mut best_score = s.norm_sqr();
    let mut candidates = 1u64;
    for &i in &sched.order {
        let old = labels[i];
        let new = (old + 1) % k;
        s += (roots[new].conj() - roots[old].conj()) * q[i];
        labels[i] = new;
        candidates += 1;
        let score = s.norm_sqr();
        match score.total_cmp(&best_score) {
            Ordering::Greater => {
                best_score = score;
                best.copy_from_slice(&labels);
            }
            Ordering::Equal if canonical_less(&labels, &best, k) => best.copy_from_slice(&labels),
            _ => {}
        }
    }
    let assignment = canonical_form(&Assignment::new_unchecked(best, k));
    let objective = q_op.form(&assignment)?;
    Ok(Rank1Solution { assignment, objective, score: best_score, candidates })
}

/// Lexicographic comparison of canonical forms without allocating.
pub(crate) fn canonical_less(a: &[usize], b: &[usize], k: usize) -> bool {
    let (sa, sb) = match (a.first(), b.first()) {
        (Some(&x), Some(&y)) => ((k - x) % k, (k - y) % k),
        _ => return false,
    };
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = ((x + sa) % k, (y + sb) % k);
        if x != y {
            return x < y;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::HermitianOperand;
    use crate::linalg::CMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive reference: best `|z†q|²` over all `K^n` label vectors.
    fn oracle_score(q: &[C64], k: usize) -> f64 {
        let n = q.len();
        let mut labels = vec![0usize; n];
        let mut best = 0.0f64;
        loop {
            let s: C64 =
                labels.iter().zip(q).map(|(&l, qi)| C64::from_polar(1.0, -2.0 * PI * l as f64 / k as f64) * qi).sum();
            best = best.max(s.norm_sqr());
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

    fn random_q(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn rank_one(q: &[C64], lambda: f64) -> HermitianOperand {
        HermitianOperand::new(CMatrix::from_fn(q.len(), q.len(), |i, j| q[i] * q[j].conj() * lambda)).unwrap()
    }

    #[test]
    fn schedule_formula_examples() {
        let s = boundary_schedule(&[C64::new(1.0, 0.0)], 3);
        assert!((s.phi[0] - PI / 3.0).abs() < 1e-15);
        assert_eq!(s.k0[0], 0);
        let s = boundary_schedule(&[C64::new(-1.0, 0.0)], 3);
        assert!(s.phi[0].abs() < 1e-15);
        assert_eq!(s.k0[0], 1);
        let s = boundary_schedule(&[C64::from_polar(1.0, PI / 3.0)], 3);
        assert!(s.phi[0].abs() < 1e-12);
        assert_eq!(s.k0[0], 0);
        // Zero entries take θ = 0.
        let s = boundary_schedule(&[C64::new(0.0, 0.0)], 4);
        assert_eq!((s.theta[0], s.k0[0]), (0.0, 0));
    }

    #[test]
    fn stream_shapes() {
        let s = boundary_schedule(&[C64::new(0.3, -0.2)], 3);
        let c: Vec<_> = enumerate_rank1_candidates(&s).collect();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].labels()[0], (c[0].labels()[0] + 1) % 3);
        let s = boundary_schedule(&random_q(3, 1), 3);
        let c: Vec<_> = enumerate_rank1_candidates(&s).collect();
        assert_eq!(c.len(), 4);
        for w in c.windows(2) {
            let diff = w[0].labels().iter().zip(w[1].labels()).filter(|(a, b)| a != b).count();
            assert_eq!(diff, 1);
        }
        let s = boundary_schedule(&[C64::new(1.0, 0.0); 5], 3);
        assert_eq!(enumerate_rank1_candidates(&s).next().unwrap().labels(), &[0; 5]);
    }

    #[test]
    fn all_ones_gives_constant_assignment() {
        let q = vec![C64::new(1.0, 0.0); 6];
        let sol = solve_rank1(&rank_one(&q, 2.0), &q, 3).unwrap();
        assert_eq!(sol.assignment.labels(), &[0; 6]);
        assert!((sol.objective - 72.0).abs() < 1e-9);
        assert_eq!(sol.candidates, 7);
    }

    #[test]
    fn seeded_instance_matches_exhaustive_search() {
        let q = random_q(5, 42);
        let sol = solve_rank1(&rank_one(&q, 1.0), &q, 3).unwrap();
        let best = oracle_score(&q, 3);
        assert!((sol.objective - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn binary_real_case_is_sign_pattern() {
        let q: Vec<C64> = [0.5, -1.2, 0.3, -0.1, 2.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        let sol = solve_rank1(&rank_one(&q, 1.0), &q, 2).unwrap();
        let signs: Vec<usize> = q.iter().map(|x| usize::from(x.re < 0.0)).collect();
        let expected = canonical_form(&Assignment::new(signs, 2).unwrap());
        assert_eq!(sol.assignment, expected);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = random_q(3, 0);
        assert!(matches!(solve_rank1(&HermitianOperand::identity(4), &q, 3), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn exact_against_oracle(seed in any::<u64>(), n in 3usize..=8, k in 2usize..=5) {
            let q = random_q(n, seed);
            let sol = solve_rank1(&rank_one(&q, 1.0), &q, k).unwrap();
            let best = oracle_score(&q, k);
            prop_assert!((sol.objective - best).abs() <= 1e-9 * best);
            prop_assert_eq!(sol.candidates as usize, n + 1);
        }

        #[test]
        fn phase_and_scale_invariance(seed in any::<u64>(), n in 2usize..8, k in 2usize..6, alpha in 0.0f64..6.28, c in 0.1f64..10.0) {
            let q = random_q(n, seed);
            let op = rank_one(&q, 1.0);
            let base = solve_rank1(&op, &q, k).unwrap();
            let rotated: Vec<C64> = q.iter().map(|x| x * C64::from_polar(1.0, alpha)).collect();
            let rot = solve_rank1(&op, &rotated, k).unwrap();
            prop_assert!((rot.objective - base.objective).abs() <= 1e-9 * base.objective.max(1e-12));
            let scaled: Vec<C64> = q.iter().map(|x| x * c).collect();
            let sc = solve_rank1(&op, &scaled, k).unwrap();
            prop_assert_eq!(sc.assignment, base.assignment);
        }
    }
}
