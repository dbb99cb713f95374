//! Shift and difference operators on lattice fields.
//!
//! Window fields take their ghost values from their [`Extension`]; the
//! result of a difference carries the derived extension so that composed
//! operators such as `D⁺D⁻` see consistent ghosts.

use crate::error::{BflError, Result};
use crate::lattice::field::{Extension, Field, NodeValue, ScalarField};

fn stencil<T: NodeValue>(v: &Field<T>, ext: Extension, f: impl Fn(isize) -> T) -> Field<T> {
    let n = v.len() as isize;
    Field::raw(*v.grid(), (0..n).map(f).collect(), ext)
}

/// Forward difference `(v_{i+1} - v_i) / h`.
pub fn dplus<T: NodeValue>(v: &Field<T>) -> Field<T> {
    let inv_h = 1.0 / v.grid().h();
    stencil(v, v.extension().derivative(), |i| (v.at(i + 1) - v.at(i)) * inv_h)
}

/// Backward difference `(v_i - v_{i-1}) / h`.
pub fn dminus<T: NodeValue>(v: &Field<T>) -> Field<T> {
    let inv_h = 1.0 / v.grid().h();
    stencil(v, v.extension().derivative(), |i| (v.at(i) - v.at(i - 1)) * inv_h)
}

/// `τ⁺v_i = v_{i+1}`.
pub fn shift_plus<T: NodeValue>(v: &Field<T>) -> Field<T> {
    stencil(v, v.extension(), |i| v.at(i + 1))
}

/// `τ⁻v_i = v_{i-1}`.
pub fn shift_minus<T: NodeValue>(v: &Field<T>) -> Field<T> {
    stencil(v, v.extension(), |i| v.at(i - 1))
}

/// `D² = D⁺D⁻`.
pub fn d2<T: NodeValue>(v: &Field<T>) -> Field<T> {
    dplus(&dminus(v))
}

/// `D³ = D⁺D⁻D⁺`.
pub fn d3<T: NodeValue>(v: &Field<T>) -> Field<T> {
    dplus(&dminus(&dplus(v)))
}

/// Pointwise product of a scalar field and a field: `(g v)_i = g_i v_i`.
pub fn mul<T: NodeValue>(g: &ScalarField, v: &Field<T>) -> Result<Field<T>> {
    v.weighted(g)
}

fn check_positive(g: &ScalarField) -> Result<()> {
    match g.values().iter().position(|&w| !(w > 0.0)) {
        None => Ok(()),
        Some(node) => Err(BflError::CoefficientBound {
            node,
            value: g.get(node),
            alpha: 0.0,
            beta: f64::INFINITY,
        }),
    }
}

/// Conservative second difference `Δ_g v = D⁺(g D⁻v)`.
pub fn delta_g<T: NodeValue>(g: &ScalarField, v: &Field<T>) -> Result<Field<T>> {
    check_positive(g)?;
    g.grid().ensure_same(v.grid())?;
    Ok(dplus(&dminus(v).weighted(g)?))
}

/// The second factorization `D⁻(τ⁺g D⁺v)`; equal to [`delta_g`] up to rounding.
pub fn delta_g_shifted<T: NodeValue>(g: &ScalarField, v: &Field<T>) -> Result<Field<T>> {
    check_positive(g)?;
    g.grid().ensure_same(v.grid())?;
    Ok(dminus(&dplus(v).weighted(&shift_plus(g))?))
}
