//! Uniform 1-D lattices, lattice fields, shift/difference operators and discrete norms.

mod field;
mod grid;
mod norms;
mod ops;
pub mod tridiag;

pub use field::{Extension, Field, NodeValue, ScalarField, UnitField, Vec3, VectorField};
pub use grid::{Grid, Topology};
pub use norms::{
    inner_h, inner_h_with, norm_h, norm_h1, norm_hneg1, norm_linf, riesz_representative, Summation,
};
pub use ops::{d2, d3, delta_g, delta_g_shifted, dminus, dplus, mul, shift_minus, shift_plus};
