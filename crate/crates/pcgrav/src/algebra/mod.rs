//! Graded exterior algebra over a point: multi-index bookkeeping, the finite
//! Grassmann coefficient algebra, and bigraded fibre elements.
//!
//! A fibre element models a form `sum_k g_k dx^{P_k} (x) u_{B_k}` where `P_k`
//! is a set of base (cotangent) indices, `B_k` a set of internal indices, and
//! `g_k` a Grassmann number over a global pool of odd generators (ghosts,
//! antighosts, probe directions). Products follow the super tensor product
//! convention: symbols commute past coefficients and each other with Koszul
//! signs governed by total degree (base + internal + coefficient parity).

mod fibre;
mod grassmann;
mod metric;
mod multi_index;

pub use fibre::FibreElement;
pub use grassmann::Grassmann;
pub use metric::InternalMetric;
pub use multi_index::{insert_sign, merge_sign, rank, remove_sign, subsets, Mask};
