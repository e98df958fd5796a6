//! Primal-dual interior-point solver for block-diagonal linear matrix inequalities.
//!
//! Problems are posed in LMI form:
//!
//! ```text
//! maximize    bᵀy
//! subject to  C_j − Σ_i y_i A_ij ⪰ 0     for every PSD block j
//!             c_l − G_l y ≥ 0             for every linear block l
//! ```
//!
//! Coefficient matrices may be dense, diagonal or low-rank. Low-rank terms are
//! the reason this crate exists: an LMI whose decision variables only touch its
//! last row and column (the usual shape after an S-procedure) costs `O(n r²)`
//! per variable pair in the Schur complement instead of `O(n³)`.

mod batch2;
mod plan;
mod problem;
mod solver;

pub use problem::{LinearBlock, LmiProblem, Psd2Batch, PsdBlock, Sym2, Term};
pub use solver::{max_psd_step, solve, Residuals, Settings, Solution, Status};

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}
