use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use rootcut_core::graph::{generate_er, generate_regular, generate_torus, laplacian};
use rootcut_core::pipeline::{approximate_low_rank, brute_force_oracle, greedy_baseline, ProblemInput};
use rootcut_core::spectra::{top_r_factor, top_r_factor_laplacian};
use rootcut_core::{solve_rank1, solve_rankr, CMatrix, HermitianOperand, ParallelConfig, C64};

fn factor(n: usize, r: usize) -> CMatrix {
    // Deterministic, well spread entries without pulling in an RNG.
    CMatrix::from_fn(n, r, |i, j| {
        let t = (i * 7 + j * 13) as f64;
        C64::new((t * 0.37).sin(), (t * 0.91).cos())
    })
}

fn rank1(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank1");
    for n in [1_000usize, 10_000] {
        let lap = laplacian(&generate_regular(n, 3, 5).unwrap());
        let v = top_r_factor_laplacian(&lap, 1).unwrap().scaled();
        let q = v.column(0);
        group.bench_with_input(BenchmarkId::new("regular3_solve", n), &q, |b, q| {
            b.iter(|| solve_rank1(&lap, black_box(q), 3).unwrap())
        });
    }
    let torus = generate_torus(30, 30).unwrap();
    let lap = laplacian(&torus);
    group.bench_function("torus_30x30_pipeline", |b| {
        b.iter(|| {
            approximate_low_rank(
                ProblemInput::Graph { graph: &torus, laplacian: &lap },
                1,
                3,
                &ParallelConfig::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn rankr(c: &mut Criterion) {
    let mut group = c.benchmark_group("rankr");
    group.sample_size(10);
    for n in [8usize, 16, 32] {
        let v = factor(n, 2);
        let q = HermitianOperand::from_factor(&v);
        group.bench_with_input(BenchmarkId::new("rank2_k3", n), &n, |b, _| {
            b.iter(|| solve_rankr(&q, black_box(&v), 2, 3, &ParallelConfig::default()).unwrap())
        });
    }
    let v = factor(10, 3);
    let q = HermitianOperand::from_factor(&v);
    group.bench_function("rank3_k3_n10", |b| b.iter(|| solve_rankr(&q, &v, 3, 3, &ParallelConfig::default()).unwrap()));
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectra");
    group.sample_size(10);
    let g = generate_er(2_000, 0.005, 1).unwrap();
    let lap = laplacian(&g);
    group.bench_function("laplacian_top2_n2000", |b| b.iter(|| top_r_factor_laplacian(&lap, 2).unwrap()));
    let q = HermitianOperand::from_factor(&factor(200, 4));
    group.bench_function("dense_top2_n200", |b| b.iter(|| top_r_factor(&q, 2).unwrap()));
    group.finish();
}

fn baselines(c: &mut Criterion) {
    let mut group = c.benchmark_group("baselines");
    let g = generate_er(3_000, 0.01, 2).unwrap();
    group.bench_function("greedy_er_3000", |b| b.iter(|| greedy_baseline(&g, 0).unwrap()));
    let q = laplacian(&generate_er(11, 0.5, 3).unwrap()).to_dense();
    group.bench_function("oracle_n11_k3", |b| b.iter(|| brute_force_oracle(&q, 3).unwrap()));
    group.finish();
}

criterion_group!(benches, rank1, rankr, spectra, baselines);
criterion_main!(benches);
