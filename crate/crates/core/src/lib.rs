//! Exact and low-rank solvers for `max_{z ∈ A_K^n} z†Qz`, where `A_K` is the
//! set of `K`-th roots of unity, with Max-3-Cut support through graph
//! Laplacians.

pub mod alphabet;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod parallel;
pub mod pipeline;
pub mod rank1;
pub mod rankr;
pub mod spectra;
pub mod verify;

pub use alphabet::{
    canonical_form, factor_quadratic_form, make_alphabet, quadratic_form, Alphabet, Assignment, HermitianOperand,
    QuadraticObjective,
};
pub use error::{Error, ParseError, Result};
pub use linalg::{CMatrix, C64};
pub use parallel::{BatchPolicy, ParallelConfig};
pub use rank1::{solve_rank1, Rank1Solution};
pub use rankr::{solve_rankr, solve_rankr_with, RankRSolution, VertexRule, VertexStats};
