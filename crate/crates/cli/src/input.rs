//! Loading graphs from disk and building synthetic problems.

use std::collections::HashMap;

use rootcut_core::graph::{generate_er, generate_regular, generate_torus, parse_edgelist, parse_gset, WeightedGraph};
use rootcut_core::pipeline::make_perturbation;
use rootcut_core::HermitianOperand;

use crate::config::{InputFormat, Source};
use crate::CliError;

pub enum Problem {
    Graph(WeightedGraph),
    Matrix(HermitianOperand),
}

/// Generator specs look like `er:n=100,p=0.05`, `regular:n=100,d=5`,
/// `torus:rows=30,cols=30` or `planted:n=8,r=2,eps=0.05`. Graph generators
/// take `seed` from the run settings unless the generator string sets it.
pub fn generate(spec: &str, seed: u64) -> Result<Problem, CliError> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params: HashMap<&str, &str> = HashMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("generator `{spec}`: expected key=value, got `{part}`")))?;
        params.insert(k.trim(), v.trim());
    }
    let get = |key: &str| -> Result<&str, CliError> {
        params.get(key).copied().ok_or_else(|| CliError::Input(format!("generator `{spec}`: missing `{key}`")))
    };
    fn num<T: std::str::FromStr>(spec: &str, key: &str, v: &str) -> Result<T, CliError> {
        v.parse().map_err(|_| CliError::Input(format!("generator `{spec}`: bad `{key}` value `{v}`")))
    }
    let seed = match params.get("seed") {
        Some(v) => num(spec, "seed", v)?,
        None => seed,
    };
    let allowed: &[&str] = match kind {
        "er" => &["n", "p", "seed"],
        "regular" => &["n", "d", "seed"],
        "torus" => &["rows", "cols"],
        "planted" => &["n", "r", "eps", "seed"],
        _ => return Err(CliError::Input(format!("unknown generator `{kind}` (er, regular, torus, planted)"))),
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(k)) {
        return Err(CliError::Input(format!("generator `{spec}`: unknown key `{extra}`")));
    }
    let problem = match kind {
        "er" => Problem::Graph(generate_er(num(spec, "n", get("n")?)?, num(spec, "p", get("p")?)?, seed)?),
        "regular" => Problem::Graph(generate_regular(num(spec, "n", get("n")?)?, num(spec, "d", get("d")?)?, seed)?),
        "torus" => Problem::Graph(generate_torus(num(spec, "rows", get("rows")?)?, num(spec, "cols", get("cols")?)?)?),
        _ => {
            let n: usize = num(spec, "n", get("n")?)?;
            let r: usize = num(spec, "r", get("r")?)?;
            let eps: f64 = match params.get("eps") {
                Some(v) => num(spec, "eps", v)?,
                None => 0.0,
            };
            // Spectrum r, r-1, ..., 1 keeps every gap at 1.
            let spectrum: Vec<f64> = (0..r).map(|i| (r - i) as f64).collect();
            Problem::Matrix(make_perturbation(n, r, &spectrum, eps, true, seed)?.q)
        }
    };
    Ok(problem)
}

pub fn load(source: &Source, seed: u64) -> Result<Problem, CliError> {
    match source {
        Source::Generator(spec) => generate(spec, seed),
        Source::File { path, format } => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let g = match format {
                InputFormat::Gset => parse_gset(&text),
                InputFormat::Edgelist => parse_edgelist(&text),
            }
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok(Problem::Graph(g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_specs() {
        let Problem::Graph(g) = generate("torus:rows=3,cols=4", 0).unwrap() else { panic!() };
        assert_eq!((g.n(), g.m()), (12, 24));
        let Problem::Graph(g) = generate("regular:n=10,d=3", 5).unwrap() else { panic!() };
        assert_eq!(g.m(), 15);
        let Problem::Graph(g) = generate("er:n=4,p=1", 0).unwrap() else { panic!() };
        assert_eq!(g.m(), 6);
        let Problem::Matrix(q) = generate("planted:n=5,r=2,eps=0.1", 3).unwrap() else { panic!() };
        assert_eq!(q.n(), 5);
        for bad in ["cube:n=3", "er:n=4", "er:n=4,p=x", "torus:rows=3,cols=3,n=2", "er:n=4;p=1"] {
            assert!(generate(bad, 0).is_err(), "{bad}");
        }
    }

    #[test]
    fn spec_seed_overrides_run_seed() {
        let Problem::Graph(a) = generate("er:n=30,p=0.3,seed=4", 1).unwrap() else { panic!() };
        let Problem::Graph(b) = generate("er:n=30,p=0.3", 4).unwrap() else { panic!() };
        assert_eq!(a.edges(), b.edges());
    }
}
