//! `rootcut`: solve, benchmark, verify and generate instances.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 timeout (the
//! best-so-far report is still written).

mod config;
mod input;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rootcut_core::graph::write_gset;
use rootcut_core::pipeline::Algorithm;
use rootcut_core::verify::{run_suite, VerifyOptions};

use config::{
    parse_algorithms, resolve_common, resolve_rank, resolve_source, resolve_timeout, InputFormat, OutputFormat,
    RunConfig, Settings, Source,
};
use input::Problem;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<rootcut_core::Error> for CliError {
    fn from(e: rootcut_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "rootcut",
    version,
    about = "Low-rank solvers for quadratic maximization over roots of unity and Max-3-Cut"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write a JSON report.
    Solve(SolveArgs),
    /// Run several algorithms over several instances and write a table.
    Bench(BenchArgs),
    /// Run the acceptance suite and print one line per criterion.
    Verify(VerifyArgs),
    /// Write a generated graph in GSet format.
    Gen(GenArgs),
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: rootcut_core::Error| e.to_string())
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Graph file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator spec, e.g. `er:n=100,p=0.05`, `regular:n=100,d=5`,
    /// `torus:rows=30,cols=30`, `planted:n=8,r=2,eps=0.05`.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    #[arg(long)]
    rank: Option<usize>,
    /// Alphabet size K (default 3).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Settings {
        Settings {
            input: self.input.clone(),
            generate: self.generate.clone(),
            format: self.format,
            rank: self.rank,
            k: self.k,
            workers: self.workers,
            seed: self.seed,
            timeout: self.timeout,
            output: self.output.clone(),
            ..Default::default()
        }
    }

    fn layered(&self, flags: Settings) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        Ok(flags.over(file))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// rank1 | rankr | approx | random | greedy | oracle (default rank1).
    #[arg(long, value_parser = parse_algo)]
    algo: Option<Algorithm>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Extra graph files, in addition to `--input`.
    #[arg(long = "also-input")]
    also_input: Vec<PathBuf>,
    /// Extra generator specs, in addition to `--generate`.
    #[arg(long = "also-generate")]
    also_generate: Vec<String>,
    /// Comma-separated algorithms (default rank1,random,greedy).
    #[arg(long)]
    algos: Option<String>,
    #[arg(long, value_enum)]
    output_format: Option<OutputFormat>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Reduced suite with a 60 s budget.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory holding G48, G49, G50 (repeatable).
    #[arg(long = "gset-dir")]
    gset_dirs: Vec<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec, as for `solve --generate`.
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, CliError> {
    let mut flags = args.common.settings();
    flags.algo = args.algo;
    let cfg = RunConfig::resolve(args.common.layered(flags)?)?;
    let report = run::solve(&cfg)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    emit(cfg.output.as_deref(), &text)?;
    Ok(if report.timed_out { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    let mut flags = args.common.settings();
    if let Some(list) = &args.algos {
        flags.algos = Some(parse_algorithms(list)?);
    }
    flags.output_format = args.output_format;
    let s = args.common.layered(flags)?;
    let mut sources = Vec::new();
    if s.input.is_some() || s.generate.is_some() {
        sources.push(resolve_source(&s)?);
    }
    let format = s.format.unwrap_or(InputFormat::Gset);
    sources.extend(args.also_input.iter().map(|p| Source::File { path: p.clone(), format }));
    sources.extend(args.also_generate.iter().map(|g| Source::Generator(g.clone())));
    if sources.is_empty() {
        return Err(CliError::Input("no input: pass --input, --generate, --also-input or --also-generate".into()));
    }
    let algos = s.algos.clone().unwrap_or_else(|| vec![Algorithm::Rank1, Algorithm::Random, Algorithm::Greedy]);
    if algos.is_empty() {
        return Err(CliError::Input("empty algorithm list".into()));
    }
    let (k, workers, seed) = resolve_common(&s)?;
    let timeout = resolve_timeout(&s)?;
    let mut configs = Vec::new();
    for source in &sources {
        for &algorithm in &algos {
            configs.push(RunConfig {
                source: source.clone(),
                algorithm,
                rank: resolve_rank(algorithm, if algorithm == Algorithm::Rank1 { None } else { s.rank })?,
                k,
                workers,
                seed,
                timeout,
                output: None,
            });
        }
    }
    let rows = run::bench(&configs);
    let text = match s.output_format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            run::write_csv(&rows, &mut buf)?;
            String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?
        }
        OutputFormat::Json => {
            let mut t = serde_json::to_string_pretty(&rows).map_err(|e| CliError::Io(e.to_string()))?;
            t.push('\n');
            t
        }
    };
    emit(s.output.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    if args.workers == 0 {
        return Err(CliError::Input("workers must be at least 1".into()));
    }
    let mut opts = if args.quick { VerifyOptions::quick() } else { VerifyOptions::default() };
    opts.workers = args.workers;
    opts.gset_dirs.extend(args.gset_dirs);
    let report = run_suite(&opts, |r| println!("{r}"));
    println!("total {:.2}s: {}", report.elapsed.as_secs_f64(), if report.passed() { "PASS" } else { "FAIL" });
    for f in report.failures() {
        println!("failed criterion {}: {}", f.id, f.title);
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    match input::generate(&args.spec, args.seed)? {
        Problem::Graph(g) => emit(args.output.as_deref(), &write_gset(&g))?,
        Problem::Matrix(_) => return Err(CliError::Input("gen writes graphs; `planted` builds a matrix".into())),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
