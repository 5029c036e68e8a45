//! BFV data on the boundary: ghost/antighost sector, the extended action,
//! the cohomological vector field, and the classical master equation.
//!
//! The extended action splits as `S = S0 + S1` where `S0` is the three
//! constraint functionals with the ghosts as odd multipliers and `S1` collects
//! the antighost couplings. The master bracket `{S, S}` then splits into five
//! pieces by antighost count and by which half of the symplectic pairing is
//! contracted; each piece is computed independently and the cancellations are
//! checked both in combination ([`master_equation`]) and term by term against
//! the full expansion of the antighost-linear sector ([`appendix_b_ledger`]).
//!
//! The change of covariant variables (absorbing `iota_xi (omega - omega0)`
//! into the internal ghost and repackaging the antighosts along the coframe)
//! is exercised in [`change_variables_primed`].

mod action;
mod ledger;
mod q;
mod state;

pub use action::{eval_bfv_action, ghost_number_audit, BfvActionValue};
pub use ledger::{appendix_b_ledger, LedgerGroupRow, LedgerReport, LedgerTermRow};
pub use q::{cohomological_vf, CohomologicalField};
pub use state::{Antighosts, BfvState, GeneratorLayout};
