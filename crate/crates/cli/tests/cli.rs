use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rootcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rootcut")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const KEYS: [&str; 14] = [
    "input",
    "algorithm",
    "rank",
    "k",
    "n",
    "m",
    "objective",
    "cut_value",
    "assignment",
    "candidates_evaluated",
    "wall_time_ms",
    "workers",
    "seed",
    "timed_out",
];

#[test]
fn solve_report_has_fixed_keys() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "tri.txt", "3 3\n1 2 1\n2 3 1\n1 3 1\n");
    let out = rootcut(&["solve", "--input", &g, "--algo", "approx", "--rank", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let positions: Vec<usize> = KEYS.iter().map(|k| text.find(&format!("\"{k}\":")).expect(k)).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{text}");
    let v = json(&out);
    assert_eq!(v.as_object().unwrap().len(), KEYS.len());
    assert_eq!(v["cut_value"], 3.0);
    assert_eq!(v["assignment"], serde_json::json!([0, 1, 2]));
    assert_eq!(v["algorithm"], "approx");
    assert_eq!(v["m"], 3);
}

#[test]
fn oracle_refuses_thirty_nodes() {
    let out = rootcut(&["solve", "--generate", "torus:rows=5,cols=6", "--algo", "oracle"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("oracle") || err.contains("too large"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn oracle_solves_small_graphs() {
    let out = rootcut(&["solve", "--generate", "er:n=7,p=0.6", "--seed", "3", "--algo", "oracle"]);
    assert!(out.status.success());
    let oracle = json(&out);
    let out = rootcut(&["solve", "--generate", "er:n=7,p=0.6", "--seed", "3", "--algo", "approx", "--rank", "7"]);
    let full = json(&out);
    let (a, b) = (oracle["objective"].as_f64().unwrap(), full["objective"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * a);
}

fn without_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

#[test]
fn seeded_runs_repeat() {
    let args = ["solve", "--generate", "er:n=60,p=0.1", "--algo", "random", "--seed", "1"];
    let (a, b) = (rootcut(&args), rootcut(&args));
    assert_eq!(without_time(json(&a)), without_time(json(&b)));
    assert_eq!(json(&a)["candidates_evaluated"], 61);
    let args =
        ["solve", "--generate", "er:n=40,p=0.2", "--algo", "approx", "--rank", "2", "--seed", "5", "--workers", "3"];
    assert_eq!(without_time(json(&rootcut(&args))), without_time(json(&rootcut(&args))));
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "generate = regular:n=12,d=3\nalgo = greedy\nseed = 4\n");
    let out = rootcut(&["solve", "--config", &cfg, "--seed", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["algorithm"], "greedy");
    assert_eq!(v["seed"], 8);
    assert_eq!(v["n"], 12);
    let bad = write(dir.path(), "bad.cfg", "colour = blue\n");
    assert_eq!(rootcut(&["solve", "--config", &bad]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let loop_ = write(dir.path(), "loop.txt", "2 1\n1 1 1\n");
    for args in [
        vec!["solve", "--input", "/nonexistent/graph.txt"],
        vec!["solve", "--input", loop_.as_str()],
        vec!["solve", "--generate", "er:n=5,p=0.5", "--algo", "approx", "--rank", "0"],
        vec!["solve", "--generate", "er:n=5,p=0.5", "--algo", "rank1", "--rank", "2"],
        vec!["solve", "--generate", "planted:n=5,r=2", "--algo", "greedy"],
        vec!["solve", "--generate", "er:n=5,p=0.5", "--workers", "0"],
    ] {
        let out = rootcut(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn timeout_writes_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = rootcut(&[
        "solve",
        "--generate",
        "er:n=150,p=0.05",
        "--algo",
        "approx",
        "--rank",
        "2",
        "--timeout",
        "0",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["timed_out"], true);
    assert_eq!(v["assignment"].as_array().unwrap().len(), 150);
}

#[test]
fn matrix_inputs_report_no_cut() {
    let out = rootcut(&["solve", "--generate", "planted:n=6,r=2,eps=0.05", "--algo", "approx", "--rank", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["cut_value"], Value::Null);
    assert_eq!(v["m"], Value::Null);
}

#[test]
fn bench_table_has_ratio_column() {
    let dir = tempfile::tempdir().unwrap();
    let tri = write(dir.path(), "tri.txt", "3 3\n1 2 1\n2 3 1\n1 3 1\n");
    let out = rootcut(&["bench", "--input", &tri, "--algos", "rank1,greedy,oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,algorithm,rank,k,n,cut_value,objective,wall_time_ms,candidates_evaluated,timed_out,ratio,error"
    );
    let ratios: Vec<f64> = lines.map(|l| l.split(',').nth(10).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 3);
    assert_eq!(ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
}

#[test]
fn bench_counts_random_draws_and_keeps_failures() {
    let out = rootcut(&[
        "bench",
        "--generate",
        "regular:n=100,d=5",
        "--also-generate",
        "torus:rows=6,cols=5",
        "--algos",
        "rank1,random,oracle",
        "--output-format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let random = rows.iter().find(|r| r["algorithm"] == "random" && r["n"] == 100).unwrap();
    assert_eq!(random["candidates_evaluated"], 101);
    let refused = rows.iter().filter(|r| r["algorithm"] == "oracle").count();
    assert_eq!(refused, 2);
    assert!(rows.iter().filter(|r| r["algorithm"] == "oracle").all(|r| r["error"].is_string()));
}

#[test]
fn bench_flags_greedy_timeouts() {
    let out = rootcut(&[
        "bench",
        "--generate",
        "er:n=3000,p=0.01",
        "--algos",
        "greedy",
        "--timeout",
        "0",
        "--output-format",
        "json",
    ]);
    assert!(out.status.success());
    assert_eq!(json(&out)[0]["timed_out"], true);
}

#[test]
fn gen_writes_gset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let out = rootcut(&["gen", "torus:rows=3,cols=3", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("9 18\n"));
    let solved = rootcut(&["solve", "--input", path.to_str().unwrap(), "--format", "edgelist"]);
    assert_eq!(json(&solved)["m"], 18);
}

#[test]
fn quick_verify_passes_within_a_minute() {
    let started = std::time::Instant::now();
    let out = rootcut(&["verify", "--quick"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(started.elapsed().as_secs() < 60);
    for id in 1..=13 {
        assert!(text.lines().any(|l| l.contains(&format!("] {id:>2} "))), "criterion {id} missing:\n{text}");
    }
}
