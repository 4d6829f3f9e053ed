//! Run settings: command-line flags layered over a flat `key = value` file
//! layered over defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use rootcut_core::pipeline::Algorithm;

use crate::CliError;

/// Settings as given by one source; `None` means "not set here".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub generate: Option<String>,
    pub format: Option<InputFormat>,
    pub algo: Option<Algorithm>,
    pub algos: Option<Vec<Algorithm>>,
    pub rank: Option<usize>,
    pub k: Option<usize>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub timeout: Option<f64>,
    pub output: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    Gset,
    Edgelist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Input(format!("config line {line}: bad value `{value}` for `{key}`")))
}

fn parse_enum<T: clap::ValueEnum>(key: &str, value: &str, line: usize) -> Result<T, CliError> {
    T::from_str(value, true)
        .map_err(|_| CliError::Input(format!("config line {line}: bad value `{value}` for `{key}`")))
}

pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Algorithm>().map_err(|e| CliError::Input(e.to_string())))
        .collect()
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {line}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            match key.replace('_', "-").as_str() {
                "input" => s.input = Some(PathBuf::from(value)),
                "generate" => s.generate = Some(value.to_string()),
                "format" => s.format = Some(parse_enum(key, value, line)?),
                "algo" => {
                    s.algo = Some(
                        value
                            .parse()
                            .map_err(|e: rootcut_core::Error| CliError::Input(format!("config line {line}: {e}")))?,
                    )
                }
                "algos" => s.algos = Some(parse_algorithms(value)?),
                "rank" => s.rank = Some(parse_value(key, value, line)?),
                "k" => s.k = Some(parse_value(key, value, line)?),
                "workers" => s.workers = Some(parse_value(key, value, line)?),
                "seed" => s.seed = Some(parse_value(key, value, line)?),
                "timeout" => s.timeout = Some(parse_value(key, value, line)?),
                "output" => s.output = Some(PathBuf::from(value)),
                "output-format" => s.output_format = Some(parse_enum(key, value, line)?),
                _ => return Err(CliError::Input(format!("config line {line}: unknown key `{key}`"))),
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            input: self.input.or(lower.input),
            generate: self.generate.or(lower.generate),
            format: self.format.or(lower.format),
            algo: self.algo.or(lower.algo),
            algos: self.algos.or(lower.algos),
            rank: self.rank.or(lower.rank),
            k: self.k.or(lower.k),
            workers: self.workers.or(lower.workers),
            seed: self.seed.or(lower.seed),
            timeout: self.timeout.or(lower.timeout),
            output: self.output.or(lower.output),
            output_format: self.output_format.or(lower.output_format),
        }
    }
}

/// Where the problem comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File { path: PathBuf, format: InputFormat },
    Generator(String),
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::File { path, .. } => path.display().to_string(),
            Source::Generator(spec) => spec.clone(),
        }
    }
}

/// Fully resolved settings for one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub algorithm: Algorithm,
    pub rank: usize,
    pub k: usize,
    pub workers: usize,
    pub seed: u64,
    pub timeout: Option<Duration>,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_RANK: usize = 2;

pub fn resolve_source(s: &Settings) -> Result<Source, CliError> {
    match (&s.input, &s.generate) {
        (Some(_), Some(_)) => Err(CliError::Input("give either an input file or a generator, not both".into())),
        (Some(path), None) => Ok(Source::File { path: path.clone(), format: s.format.unwrap_or(InputFormat::Gset) }),
        (None, Some(spec)) => Ok(Source::Generator(spec.clone())),
        (None, None) => Err(CliError::Input("no input: pass --input or --generate".into())),
    }
}

pub fn resolve_timeout(s: &Settings) -> Result<Option<Duration>, CliError> {
    match s.timeout {
        None => Ok(None),
        Some(t) if t.is_finite() && t >= 0.0 => Ok(Some(Duration::from_secs_f64(t))),
        Some(t) => Err(CliError::Input(format!("timeout must be a non-negative number of seconds, got {t}"))),
    }
}

/// Rank used by `algorithm`, checking the combination.
pub fn resolve_rank(algorithm: Algorithm, rank: Option<usize>) -> Result<usize, CliError> {
    match algorithm {
        Algorithm::Rank1 => match rank {
            None | Some(1) => Ok(1),
            Some(r) => Err(CliError::Input(format!("rank1 runs at rank 1, got --rank {r}"))),
        },
        Algorithm::Rankr | Algorithm::Approx => match rank.unwrap_or(DEFAULT_RANK) {
            0 => Err(CliError::Input(format!("{} needs rank ≥ 1", algorithm.as_str()))),
            r => Ok(r),
        },
        Algorithm::Random | Algorithm::Greedy | Algorithm::Oracle => Ok(0),
    }
}

pub fn resolve_common(s: &Settings) -> Result<(usize, usize, u64), CliError> {
    let k = s.k.unwrap_or(DEFAULT_K);
    if k < 2 {
        return Err(CliError::Input(format!("K must be at least 2, got {k}")));
    }
    let workers = s.workers.unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Input("workers must be at least 1".into()));
    }
    Ok((k, workers, s.seed.unwrap_or(0)))
}

impl RunConfig {
    pub fn resolve(s: Settings) -> Result<Self, CliError> {
        let source = resolve_source(&s)?;
        let algorithm = s.algo.unwrap_or(Algorithm::Rank1);
        let rank = resolve_rank(algorithm, s.rank)?;
        let (k, workers, seed) = resolve_common(&s)?;
        Ok(RunConfig { source, algorithm, rank, k, workers, seed, timeout: resolve_timeout(&s)?, output: s.output })
    }
}
