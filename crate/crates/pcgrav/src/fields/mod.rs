//! Discretized boundary fields: grids, graded field calculus, geometry,
//! reproducible sampling, and bit-exact snapshots.

mod field;
mod geometry;
mod grid;
pub mod sample;
pub mod snapshot;

pub use field::{covariant_lie, curvature, Field};
pub use geometry::{
    coframe_power, frame_components, frame_recompose, transversal_from_coframe, Geometry,
};
pub use grid::{Backend, Grid};
