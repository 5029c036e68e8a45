//! Reduced-phase-space structure on the boundary: constraint functionals,
//! their Hamiltonian vector fields, and the induced Poisson brackets.
//!
//! The symplectic form pairs a coframe variation against `e^{n-3}` wedged
//! with a connection variation, so every bracket here is computed by direct
//! contraction of two tangent pairs into that density. The six relations of
//! the first-class algebra are checked against independently assembled
//! right-hand sides, and the bracket itself is cross-validated against
//! finite-difference directional derivatives of the constraint values.

mod bracket;
mod constraints;
mod hamiltonian;

pub use bracket::{
    dof_audit, fd_gradient_check, gauge_invariance_check, poisson_bracket, verify_theorem_brackets,
    BracketReport, BracketRow, DofAudit, FdCheckRow, FdReport, GaugeReport, GaugeRow,
};
pub use constraints::{
    eval_constraints, factorial, odd_vector_lie_bracket, partial_scalar, Multipliers,
    MultiplierProfile,
};
pub(crate) use constraints::EvalCtx;
pub use hamiltonian::{hamiltonian_fields, probe_derivative, HamiltonianFields, TangentPair};
