//! Weighted graphs, generators, Laplacians and cut accounting.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{Assignment, HermitianOperand, QuadraticObjective};
use crate::error::{Error, ParseError, Result};
use crate::linalg::{CMatrix, C64};

/// Node count above which Laplacians are stored sparsely.
pub const DENSE_THRESHOLD: usize = 4096;

/// Undirected simple graph with real edge weights; edges satisfy `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Builds a graph, normalizing each edge to `i < j` and rejecting loops,
    /// duplicates and out-of-range endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph must have at least one node".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({i}, {j})")));
            }
            out.push((i, j, w));
        }
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Weighted degrees `Σ_j w_ij`.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// Number of incident edges per node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j, _) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Adjacency lists `(neighbour, weight)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    pub fn total_abs_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2.abs()).sum()
    }

    /// Relabels nodes by a seeded uniform permutation.
    pub fn permuted(&self, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let edges = self
            .edges
            .iter()
            .map(|&(i, j, w)| {
                let (a, b) = (perm[i], perm[j]);
                if a < b {
                    (a, b, w)
                } else {
                    (b, a, w)
                }
            })
            .collect();
        Self { n: self.n, edges }
    }
}

/// Input flavour accepted by [`parse_graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    Gset,
    EdgeList,
}

/// Parses the GSet format: header `n m`, then `m` records `i j w`, 1-indexed.
pub fn parse_gset(text: &str) -> std::result::Result<WeightedGraph, ParseError> {
    parse_records(text, GraphFormat::Gset)
}

/// Parses an edge list: like GSet, but the weight may be omitted (meaning 1)
/// and a leading `# zero-indexed` comment switches to 0-based node ids.
pub fn parse_edgelist(text: &str) -> std::result::Result<WeightedGraph, ParseError> {
    parse_records(text, GraphFormat::EdgeList)
}

pub fn parse_graph(text: &str, format: GraphFormat) -> std::result::Result<WeightedGraph, ParseError> {
    parse_records(text, format)
}

fn parse_records(text: &str, format: GraphFormat) -> std::result::Result<WeightedGraph, ParseError> {
    let mut zero_indexed = false;
    let mut header: Option<(usize, usize, usize)> = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if format == GraphFormat::EdgeList && line.starts_with('#') {
            if header.is_none() && line.trim_start_matches('#').trim().eq_ignore_ascii_case("zero-indexed") {
                zero_indexed = true;
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((n, m, _)) = header else {
            if fields.len() != 2 {
                return Err(ParseError::MalformedHeader { line: line_no });
            }
            let n: usize = fields[0].parse().map_err(|_| ParseError::MalformedHeader { line: line_no })?;
            let m: usize = fields[1].parse().map_err(|_| ParseError::MalformedHeader { line: line_no })?;
            if n == 0 {
                return Err(ParseError::MalformedHeader { line: line_no });
            }
            header = Some((n, m, line_no));
            continue;
        };
        let weight_optional = format == GraphFormat::EdgeList;
        if fields.len() != 3 && !(weight_optional && fields.len() == 2) {
            return Err(ParseError::MalformedRecord { line: line_no });
        }
        let a: i64 = fields[0].parse().map_err(|_| ParseError::MalformedRecord { line: line_no })?;
        let b: i64 = fields[1].parse().map_err(|_| ParseError::MalformedRecord { line: line_no })?;
        let w: f64 = match fields.get(2) {
            Some(s) => s.parse().map_err(|_| ParseError::MalformedRecord { line: line_no })?,
            None => 1.0,
        };
        if !w.is_finite() {
            return Err(ParseError::MalformedRecord { line: line_no });
        }
        let base = if zero_indexed { 0 } else { 1 };
        let to_node = |x: i64| -> std::result::Result<usize, ParseError> {
            let v = x - base;
            if v < 0 || v as usize >= n {
                Err(ParseError::IndexOutOfRange { line: line_no, index: x, n })
            } else {
                Ok(v as usize)
            }
        };
        let (a, b) = (to_node(a)?, to_node(b)?);
        if a == b {
            return Err(ParseError::SelfLoop { line: line_no, node: a });
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        if !seen.insert((i, j)) {
            return Err(ParseError::DuplicateEdge { line: line_no, i, j });
        }
        if edges.len() == m {
            return Err(ParseError::EdgeCountMismatch { expected: m, found: m + 1 });
        }
        edges.push((i, j, w));
    }
    let Some((n, m, _)) = header else {
        return Err(ParseError::MalformedHeader { line: 1 });
    };
    if edges.len() != m {
        return Err(ParseError::EdgeCountMismatch { expected: m, found: edges.len() });
    }
    Ok(WeightedGraph { n, edges })
}

/// Writes a graph in GSet format.
pub fn write_gset(g: &WeightedGraph) -> String {
    let mut s = format!("{} {}\n", g.n, g.m());
    for &(i, j, w) in &g.edges {
        if w.fract() == 0.0 && w.abs() < 1e15 {
            s.push_str(&format!("{} {} {}\n", i + 1, j + 1, w as i64));
        } else {
            s.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
        }
    }
    s
}

/// Erdős–Rényi `G(n, p)` with unit weights.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("graph must have at least one node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok(WeightedGraph { n, edges })
}

/// Random simple `d`-regular graph by the pairing model, redrawing pairs that
/// would create loops or repeated edges and restarting when stuck.
pub fn generate_regular(n: usize, d: usize, seed: u64) -> Result<WeightedGraph> {
    if (n * d) % 2 == 1 {
        return Err(Error::Infeasible(format!("n·d = {} is odd", n * d)));
    }
    if d >= n {
        return Err(Error::Infeasible(format!("degree {d} must be below n = {n}")));
    }
    const MAX_RETRIES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..MAX_RETRIES {
        // Stubs are paired one edge at a time; a pair that would create a
        // loop or a repeated edge is redrawn instead of restarting.
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
        let mut seen = HashSet::with_capacity(n * d / 2);
        let mut edges = Vec::with_capacity(n * d / 2);
        while !stubs.is_empty() {
            let mut placed = false;
            for _ in 0..64 {
                let x = rng.gen_range(0..stubs.len());
                let y = rng.gen_range(0..stubs.len());
                let (a, b) = (stubs[x], stubs[y]);
                let key = if a < b { (a, b) } else { (b, a) };
                if x == y || a == b || seen.contains(&key) {
                    continue;
                }
                seen.insert(key);
                edges.push((key.0, key.1, 1.0));
                let (hi, lo) = if x > y { (x, y) } else { (y, x) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                placed = true;
                break;
            }
            if !placed {
                continue 'attempt;
            }
        }
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        return Ok(WeightedGraph { n, edges });
    }
    Err(Error::Infeasible(format!("pairing model failed {MAX_RETRIES} times for n = {n}, d = {d}")))
}

/// `rows × cols` grid with wraparound in both directions.
pub fn generate_torus(rows: usize, cols: usize) -> Result<WeightedGraph> {
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidArgument(format!("torus needs at least 3×3, got {rows}×{cols}")));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            for (a, b) in [(id(r, c), id(r, (c + 1) % cols)), (id(r, c), id((r + 1) % rows, c))] {
                edges.push(if a < b { (a, b, 1.0) } else { (b, a, 1.0) });
            }
        }
    }
    Ok(WeightedGraph { n: rows * cols, edges })
}

/// Sparse symmetric matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SparseSymmetric {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn matvec_real(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[p] * x[self.col[p]];
            }
            y[i] = s;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|p| x[self.col[p]] * self.val[p]).sum())
            .collect()
    }

    /// Lower bound on the smallest eigenvalue from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut diag = 0.0;
                let mut radius = 0.0;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if self.col[p] == i {
                        diag += self.val[p];
                    } else {
                        radius += self.val[p].abs();
                    }
                }
                diag - radius
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on the largest eigenvalue from Gershgorin discs.
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|p| if self.col[p] == i { self.val[p] } else { self.val[p].abs() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LaplacianStorage {
    Dense(HermitianOperand),
    Sparse(SparseSymmetric),
}

/// `Q = D − W` for a weighted graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    storage: LaplacianStorage,
    degree: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

impl Laplacian {
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn storage(&self) -> &LaplacianStorage {
        &self.storage
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    /// Dense copy of the matrix, built on demand for sparse storage.
    pub fn to_dense(&self) -> HermitianOperand {
        match &self.storage {
            LaplacianStorage::Dense(q) => q.clone(),
            LaplacianStorage::Sparse(_) => dense_laplacian(self.n(), &self.degree, &self.edges),
        }
    }
}

impl QuadraticObjective for Laplacian {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        match &self.storage {
            LaplacianStorage::Dense(q) => q.entries().mul_vec(x),
            LaplacianStorage::Sparse(s) => s.matvec(x),
        }
    }

    fn dense(&self) -> Option<&HermitianOperand> {
        match &self.storage {
            LaplacianStorage::Dense(q) => Some(q),
            LaplacianStorage::Sparse(_) => None,
        }
    }

    /// `Σ_i d_i − 2 Σ_{i<j} w_ij Re(conj(z_i) z_j)`, evaluated edge by edge.
    fn form(&self, a: &Assignment) -> Result<f64> {
        if a.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: a.len() });
        }
        let z = a.symbols();
        let diag: f64 = self.degree.iter().sum();
        let off: f64 = self.edges.iter().map(|&(i, j, w)| w * (z[i].conj() * z[j]).re).sum();
        Ok(diag - 2.0 * off)
    }
}

fn dense_laplacian(n: usize, degree: &[f64], edges: &[(usize, usize, f64)]) -> HermitianOperand {
    let mut m = CMatrix::zeros(n, n);
    for (i, &d) in degree.iter().enumerate() {
        m[(i, i)] = C64::new(d, 0.0);
    }
    for &(i, j, w) in edges {
        m[(i, j)] -= w;
        m[(j, i)] -= w;
    }
    let psd = edges.iter().all(|e| e.2 >= 0.0);
    HermitianOperand::new(m).expect("Laplacian is symmetric by construction").with_psd_hint(psd)
}

/// Laplacian with the default dense/sparse switch.
pub fn laplacian(g: &WeightedGraph) -> Laplacian {
    laplacian_with_threshold(g, DENSE_THRESHOLD)
}

/// Laplacian stored densely when `n ≤ dense_threshold`, sparsely otherwise.
pub fn laplacian_with_threshold(g: &WeightedGraph, dense_threshold: usize) -> Laplacian {
    let degree = g.weighted_degrees();
    let storage = if g.n <= dense_threshold {
        LaplacianStorage::Dense(dense_laplacian(g.n, &degree, &g.edges))
    } else {
        let adj = g.adjacency();
        let mut row_ptr = Vec::with_capacity(g.n + 1);
        let mut col = Vec::with_capacity(2 * g.m() + g.n);
        let mut val = Vec::with_capacity(2 * g.m() + g.n);
        row_ptr.push(0);
        for (i, nbrs) in adj.iter().enumerate() {
            let mut entries: Vec<(usize, f64)> = nbrs.iter().map(|&(j, w)| (j, -w)).collect();
            entries.push((i, degree[i]));
            entries.sort_by_key(|e| e.0);
            for (j, w) in entries {
                col.push(j);
                val.push(w);
            }
            row_ptr.push(col.len());
        }
        LaplacianStorage::Sparse(SparseSymmetric { n: g.n, row_ptr, col, val })
    };
    Laplacian { storage, degree, edges: g.edges.clone() }
}

/// Total weight of edges whose endpoints carry different labels.
pub fn cut_value(g: &WeightedGraph, a: &Assignment) -> Result<f64> {
    if a.len() != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, found: a.len() });
    }
    let l = a.labels();
    Ok(g.edges.iter().filter(|&&(i, j, _)| l[i] != l[j]).map(|e| e.2).sum())
}

/// Cut value recovered from the Laplacian form: `Re(z†Lz) / 3`.
pub fn cut_from_form(g: &WeightedGraph, a: &Assignment) -> Result<f64> {
    if a.k() != 3 {
        return Err(Error::InvalidArgument(format!("cut semantics need K = 3, got {}", a.k())));
    }
    Ok(laplacian(g).form(a)? / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::quadratic_form;
    use proptest::prelude::*;
    use rand::Rng;

    fn triangle() -> WeightedGraph {
        WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn parse_small_gset() {
        let g = parse_gset("3 2\n1 2 1\n2 3 1").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
        let g = parse_gset("2 1\r\n1 2 -1\r\n\r\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1, -1.0)]);
        let g = parse_gset("2 1\n2\t1   0.5\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1, 0.5)]);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert_eq!(parse_gset("3\n1 2 1"), Err(ParseError::MalformedHeader { line: 1 }));
        assert_eq!(parse_gset(""), Err(ParseError::MalformedHeader { line: 1 }));
        assert_eq!(parse_gset("3 1\n1 4 1"), Err(ParseError::IndexOutOfRange { line: 2, index: 4, n: 3 }));
        assert_eq!(parse_gset("3 1\n0 2 1"), Err(ParseError::IndexOutOfRange { line: 2, index: 0, n: 3 }));
        assert_eq!(parse_gset("3 1\n2 2 1"), Err(ParseError::SelfLoop { line: 2, node: 1 }));
        assert_eq!(parse_gset("3 2\n1 2 1\n2 1 1"), Err(ParseError::DuplicateEdge { line: 3, i: 0, j: 1 }));
        assert_eq!(parse_gset("3 2\n1 2 1"), Err(ParseError::EdgeCountMismatch { expected: 2, found: 1 }));
        assert_eq!(parse_gset("3 1\n1 2"), Err(ParseError::MalformedRecord { line: 2 }));
        assert_eq!(parse_gset("3 1\n1 2 x"), Err(ParseError::MalformedRecord { line: 2 }));
    }

    #[test]
    fn edgelist_variants() {
        let g = parse_edgelist("# zero-indexed\n3 2\n0 1\n1 2 2.5\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 2, 2.5)]);
        let g = parse_edgelist("3 1\n1 3\n").unwrap();
        assert_eq!(g.edges(), &[(0, 2, 1.0)]);
    }

    #[test]
    fn gset_round_trip() {
        let g = generate_er(20, 0.3, 4).unwrap();
        assert_eq!(parse_gset(&write_gset(&g)).unwrap(), g);
    }

    #[test]
    fn er_examples() {
        assert_eq!(generate_er(10, 0.0, 1).unwrap().m(), 0);
        assert_eq!(generate_er(4, 1.0, 1).unwrap().m(), 6);
        let g = generate_er(100, 0.5, 99).unwrap();
        let sigma = (4950.0f64 * 0.25).sqrt();
        assert!((g.m() as f64 - 2475.0).abs() <= 4.0 * sigma);
        assert_eq!(generate_er(30, 0.2, 5).unwrap(), generate_er(30, 0.2, 5).unwrap());
        assert!(generate_er(3, 1.5, 0).is_err());
    }

    #[test]
    fn regular_examples() {
        let k4 = generate_regular(4, 3, 0).unwrap();
        assert_eq!(k4.m(), 6);
        for seed in 0..5 {
            let g = generate_regular(20, 5, seed).unwrap();
            assert!(g.degrees().iter().all(|&d| d == 5));
        }
        assert!(matches!(generate_regular(5, 3, 0), Err(Error::Infeasible(_))));
        assert!(matches!(generate_regular(4, 4, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn large_cubic_graph_has_forced_edge_count() {
        let g = generate_regular(50_000, 3, 1).unwrap();
        assert_eq!(g.m(), 75_000);
    }

    #[test]
    fn torus_examples() {
        let t = generate_torus(3, 3).unwrap();
        assert_eq!(t.m(), 18);
        assert!(t.degrees().iter().all(|&d| d == 4));
        assert_eq!(generate_torus(10, 10).unwrap().m(), 200);
        // Even dimensions: checkerboard colouring cuts every edge.
        let g = generate_torus(50, 60).unwrap();
        let labels = (0..g.n()).map(|v| ((v / 60) + (v % 60)) % 2).collect();
        let a = Assignment::new(labels, 3).unwrap();
        assert_eq!(cut_value(&g, &a).unwrap(), g.m() as f64);
        assert!(generate_torus(2, 5).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g).to_dense();
        let want = CMatrix::from_real(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l.entries(), &want);
        let l = laplacian(&triangle()).to_dense();
        let want = CMatrix::from_real(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(l.entries(), &want);
    }

    #[test]
    fn sparse_and_dense_agree() {
        let g = generate_er(30, 0.2, 3).unwrap();
        let dense = laplacian(&g);
        let sparse = laplacian_with_threshold(&g, 10);
        assert!(matches!(sparse.storage(), LaplacianStorage::Sparse(_)));
        assert_eq!(sparse.to_dense(), dense.to_dense());
        let a = Assignment::new((0..30).map(|i| i % 3).collect(), 3).unwrap();
        let x: Vec<C64> = a.symbols();
        let (y1, y2) = (dense.apply(&x), sparse.apply(&x));
        assert!(y1.iter().zip(&y2).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!((dense.form(&a).unwrap() - sparse.form(&a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn cut_examples() {
        let t = triangle();
        let a = Assignment::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(cut_value(&t, &a).unwrap(), 3.0);
        assert!((cut_from_form(&t, &a).unwrap() - 3.0).abs() < 1e-12);
        assert!((quadratic_form(&laplacian(&t).to_dense(), &a).unwrap() - 9.0).abs() < 1e-12);
        let e = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(cut_value(&e, &Assignment::constant(2, 3)).unwrap(), 0.0);
        assert!(cut_from_form(&t, &Assignment::constant(3, 3)).unwrap().abs() < 1e-12);
    }

    fn graph_and_labels() -> impl Strategy<Value = (WeightedGraph, Vec<usize>)> {
        (1usize..=50, 0.0f64..1.0, any::<u64>(), any::<bool>()).prop_flat_map(|(n, p, seed, signed)| {
            let mut g = generate_er(n, p, seed).unwrap();
            if signed {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
                for e in g.edges.iter_mut() {
                    e.2 = [-1.0, 1.0, 2.5][rng.gen_range(0..3)];
                }
            }
            (Just(g), proptest::collection::vec(0usize..3, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cut_from_form_matches_edge_count((g, labels) in graph_and_labels()) {
            let a = Assignment::new(labels, 3).unwrap();
            let direct = cut_value(&g, &a).unwrap();
            let via_form = cut_from_form(&g, &a).unwrap();
            prop_assert!((direct - via_form).abs() <= 1e-6 * direct.abs().max(1.0));
        }

        #[test]
        fn cut_is_label_symmetric((g, labels) in graph_and_labels(), t in 0usize..3, swap in any::<bool>()) {
            let a = Assignment::new(labels.clone(), 3).unwrap();
            let base = cut_value(&g, &a).unwrap();
            prop_assert_eq!(cut_value(&g, &a.rotate(t)).unwrap(), base);
            let permuted: Vec<usize> = labels.iter().map(|&l| if swap { [1, 0, 2][l] } else { [0, 2, 1][l] }).collect();
            prop_assert_eq!(cut_value(&g, &Assignment::new(permuted, 3).unwrap()).unwrap(), base);
        }

        #[test]
        fn laplacian_rows_sum_to_zero_and_cut_is_bounded((g, labels) in graph_and_labels()) {
            let l = laplacian(&g).to_dense();
            let n = g.n();
            let maxw = g.edges().iter().map(|e| e.2.abs()).fold(0.0, f64::max);
            for i in 0..n {
                let s: C64 = l.entries().row(i).iter().sum();
                prop_assert!(s.norm() <= 1e-9 * maxw.max(1.0) * n as f64);
            }
            if g.edges().iter().all(|e| e.2 >= 0.0) {
                let c = cut_value(&g, &Assignment::new(labels, 3).unwrap()).unwrap();
                prop_assert!(c >= 0.0 && c <= g.total_abs_weight());
            }
        }
    }
}
