//! Dispatch of one solve and the bench table.

use std::time::Instant;

use serde::Serialize;

use rootcut_core::graph::{cut_value, laplacian};
use rootcut_core::pipeline::{
    approximate_low_rank, brute_force_oracle, greedy_baseline_k, random_baseline_k, Algorithm, ProblemInput,
};
use rootcut_core::ParallelConfig;

use crate::config::RunConfig;
use crate::input::{load, Problem};
use crate::CliError;

/// One JSON report. Field order is the output key order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliReport {
    pub input: String,
    pub algorithm: Algorithm,
    pub rank: usize,
    pub k: usize,
    pub n: usize,
    /// Edge count; `null` for matrix inputs.
    pub m: Option<usize>,
    pub objective: f64,
    pub cut_value: Option<f64>,
    pub assignment: Vec<usize>,
    pub candidates_evaluated: u64,
    pub wall_time_ms: u64,
    pub workers: usize,
    pub seed: u64,
    pub timed_out: bool,
}

pub fn solve_problem(cfg: &RunConfig, problem: &Problem) -> Result<CliReport, CliError> {
    let t0 = Instant::now();
    let engine = ParallelConfig::with_workers(cfg.workers).with_timeout(cfg.timeout);
    let deadline = engine.deadline;
    let graph_only = |what: &str| CliError::Input(format!("{what} needs a graph input"));
    let (report, workers) = match (cfg.algorithm, problem) {
        (Algorithm::Rank1 | Algorithm::Rankr | Algorithm::Approx, _) => {
            let lap;
            let input = match problem {
                Problem::Graph(g) => {
                    lap = laplacian(g);
                    ProblemInput::Graph { graph: g, laplacian: &lap }
                }
                Problem::Matrix(q) => ProblemInput::Matrix(q),
            };
            let mut rep = approximate_low_rank(input, cfg.rank, cfg.k, &engine)?;
            rep.algorithm = cfg.algorithm;
            (rep, cfg.workers)
        }
        (Algorithm::Random, Problem::Graph(g)) => (random_baseline_k(g, cfg.k, cfg.seed)?, 1),
        (Algorithm::Greedy, Problem::Graph(g)) => (greedy_baseline_k(g, cfg.k, cfg.seed, deadline)?, 1),
        (Algorithm::Random | Algorithm::Greedy, Problem::Matrix(_)) => return Err(graph_only(cfg.algorithm.as_str())),
        (Algorithm::Oracle, _) => {
            let dense;
            let q = match problem {
                Problem::Graph(g) => {
                    dense = laplacian(g).to_dense();
                    &dense
                }
                Problem::Matrix(q) => q,
            };
            let (assignment, objective) = brute_force_oracle(q, cfg.k)?;
            let cut = match problem {
                Problem::Graph(g) if cfg.k == 3 => Some(cut_value(g, &assignment)?),
                _ => None,
            };
            let n = q.n();
            let report = rootcut_core::pipeline::SolveReport {
                algorithm: Algorithm::Oracle,
                rank: n,
                k: cfg.k,
                n,
                objective,
                cut_value: cut,
                candidates_evaluated: (cfg.k as u64).saturating_pow(n.saturating_sub(1) as u32),
                assignment,
                wall_time_ms: 0,
                seed: None,
                workers: 1,
                timed_out: false,
            };
            (report, 1)
        }
    };
    Ok(CliReport {
        input: cfg.source.label(),
        algorithm: report.algorithm,
        rank: report.rank,
        k: report.k,
        n: report.n,
        m: match problem {
            Problem::Graph(g) => Some(g.m()),
            Problem::Matrix(_) => None,
        },
        objective: report.objective,
        cut_value: report.cut_value,
        assignment: report.assignment.into_labels(),
        candidates_evaluated: report.candidates_evaluated,
        wall_time_ms: t0.elapsed().as_millis() as u64,
        workers,
        seed: cfg.seed,
        timed_out: report.timed_out,
    })
}

pub fn solve(cfg: &RunConfig) -> Result<CliReport, CliError> {
    let problem = load(&cfg.source, cfg.seed)?;
    solve_problem(cfg, &problem)
}

/// One bench table row. A failed run keeps its row with `error` set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub algorithm: String,
    pub rank: usize,
    pub k: usize,
    pub n: Option<usize>,
    pub cut_value: Option<f64>,
    pub objective: Option<f64>,
    pub wall_time_ms: Option<u64>,
    pub candidates_evaluated: Option<u64>,
    pub timed_out: bool,
    /// Score over the best score any algorithm reached on this instance.
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

impl BenchRow {
    fn score(&self) -> Option<f64> {
        self.cut_value.or(self.objective)
    }
}

pub fn bench(configs: &[RunConfig]) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = Vec::with_capacity(configs.len());
    let mut loaded: Option<(crate::config::Source, u64, Result<Problem, String>)> = None;
    for cfg in configs {
        let reuse = matches!(&loaded, Some((s, seed, _)) if *s == cfg.source && *seed == cfg.seed);
        if !reuse {
            loaded = Some((cfg.source.clone(), cfg.seed, load(&cfg.source, cfg.seed).map_err(|e| e.to_string())));
        }
        let problem = &loaded.as_ref().expect("loaded above").2;
        let outcome =
            problem.as_ref().map_err(Clone::clone).and_then(|p| solve_problem(cfg, p).map_err(|e| e.to_string()));
        rows.push(match outcome {
            Ok(r) => BenchRow {
                instance: r.input,
                algorithm: cfg.algorithm.as_str().into(),
                rank: r.rank,
                k: r.k,
                n: Some(r.n),
                cut_value: r.cut_value,
                objective: Some(r.objective),
                wall_time_ms: Some(r.wall_time_ms),
                candidates_evaluated: Some(r.candidates_evaluated),
                timed_out: r.timed_out,
                ratio: None,
                error: None,
            },
            Err(e) => BenchRow {
                instance: cfg.source.label(),
                algorithm: cfg.algorithm.as_str().into(),
                rank: cfg.rank,
                k: cfg.k,
                n: None,
                cut_value: None,
                objective: None,
                wall_time_ms: None,
                candidates_evaluated: None,
                timed_out: false,
                ratio: None,
                error: Some(e),
            },
        });
    }
    fill_ratios(&mut rows);
    rows
}

fn fill_ratios(rows: &mut [BenchRow]) {
    let scores: Vec<(String, Option<f64>)> = rows.iter().map(|r| (r.instance.clone(), r.score())).collect();
    for row in rows.iter_mut() {
        let best = scores
            .iter()
            .filter(|(inst, _)| *inst == row.instance)
            .filter_map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        row.ratio = row.score().and_then(|s| {
            if best > 0.0 {
                Some(s / best)
            } else if s == best {
                Some(1.0)
            } else {
                None
            }
        });
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "instance",
    "algorithm",
    "rank",
    "k",
    "n",
    "cut_value",
    "objective",
    "wall_time_ms",
    "candidates_evaluated",
    "timed_out",
    "ratio",
    "error",
];

pub fn write_csv(rows: &[BenchRow], out: impl std::io::Write) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}
