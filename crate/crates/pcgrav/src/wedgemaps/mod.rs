//! Coframe wedge multiplication maps and their rank/kernel structure.
//!
//! Everything here is pointwise linear algebra on the fibre: the maps
//! `W_k^{(i,j)}: X -> X ^ e^k` (bulk base dimension N, boundary base
//! dimension N-1), the action map `rho: X -> [X, e]`, the injectivity
//! criterion for boundary (2,1)-forms, and the weighted-density split that
//! every structural-constraint solve reduces to. Ranks are certified three
//! ways: SVD with a relative threshold and a logged spectral gap, exact
//! modular rank over two large primes for integer matrices, and closed-form
//! dimension counts.

mod criteria;
mod frame;
mod matrix;
mod suite;

pub use criteria::{
    alpha_criterion, beta_decompose, AlphaVerdict, BetaSolver, BetaSplit, WedgeSolver,
};
pub use frame::PointFrame;
pub use matrix::{
    assemble_map, binomial, chi_matrix, modular_rank, omega_dim, rank_kernel, rho_matrix,
    FibreBasis, RankKernel, WMapSpec,
};
pub use suite::{
    boundary_kernel_dim, claims_for, verify_lemma_suite, ClaimOutcome, Expectation, RankClaim,
    SuiteReport,
};
