//! Verification engine for the boundary (reduced phase space) structure of
//! Palatini-Cartan gravity in dimension N >= 4.
//!
//! The library discretizes the space of coframe/connection boundary fields on a
//! flat (N-1)-torus, realizes the graded algebra of ghost/antighost-valued
//! differential forms exactly (finite Grassmann algebra, floating-point
//! coefficients), and checks the structural linear algebra, the first-class
//! constraint brackets, and the classical master equation with machine-checkable
//! residuals:
//!
//! - [`algebra`]: internal exterior algebra, Grassmann coefficients, Minkowski
//!   fibre metric, wedge/bracket/contraction kernels.
//! - [`fields`]: fields on a periodic grid, discrete calculus (finite-difference
//!   and Fourier backends), integration, sampling, snapshots.
//! - [`wedgemaps`]: the coframe wedge multiplication maps, their rank/kernel
//!   profiles, the two-condition vanishing test, and the weighted density split.
//! - [`slice`]: decomposition of an arbitrary boundary connection into a
//!   structural-constraint solution plus kernel remainder.
//! - [`canonical`]: boundary constraints, Hamiltonian vector fields, Poisson
//!   brackets, the gauge algebra table, degree-of-freedom audit.
//! - [`bfv`]: BFV ghost sector, the cohomological vector field, the classical
//!   master equation split into sector pieces, the term-by-term cancellation
//!   ledger, and the boundary change of variables.
//! - [`report`]: deterministic JSON/text reporting shared by the test suites and
//!   the command line tool.

pub mod algebra;
pub mod bfv;
pub mod canonical;
pub mod fields;
pub mod report;
pub mod slice;
pub mod wedgemaps;

pub use algebra::{FibreElement, Grassmann, InternalMetric, Mask};
pub use fields::{Backend, Field, Geometry, Grid};

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension out of range: N = {0} (need N >= 4)")]
    Dimension(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
