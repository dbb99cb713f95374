//! Discrete inner products and norms: `(·,·)_h`, `|·|_h`, `|·|_{H¹_h}`, `L∞_h` and the dual `H⁻¹_h`.

use crate::error::{BflError, Result};
use crate::lattice::field::{Extension, Field, NodeValue};
use crate::lattice::ops::{d2, dplus};
use crate::lattice::tridiag::{solve_cyclic, solve_tridiagonal};

/// Accumulation strategy for lattice sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Summation {
    /// Left-to-right accumulation.
    #[default]
    Plain,
    /// Neumaier-compensated accumulation, for very long grids.
    Compensated,
}

impl Summation {
    pub fn sum(self, terms: impl Iterator<Item = f64>) -> f64 {
        match self {
            Summation::Plain => terms.sum(),
            Summation::Compensated => {
                let (mut s, mut c) = (0.0_f64, 0.0_f64);
                for x in terms {
                    let t = s + x;
                    if s.abs() >= x.abs() {
                        c += (s - t) + x;
                    } else {
                        c += (x - t) + s;
                    }
                    s = t;
                }
                s + c
            }
        }
    }
}

pub fn inner_h_with<T: NodeValue>(u: &Field<T>, v: &Field<T>, summation: Summation) -> Result<f64> {
    u.grid().ensure_same(v.grid())?;
    let h = u.grid().h();
    Ok(h * summation.sum(u.values().iter().zip(v.values()).map(|(a, b)| a.dot(b))))
}

/// `(u, v)_h = h Σ u_i · v_i` over the stored nodes.
pub fn inner_h<T: NodeValue>(u: &Field<T>, v: &Field<T>) -> Result<f64> {
    inner_h_with(u, v, Summation::Plain)
}

pub fn norm_h<T: NodeValue>(v: &Field<T>) -> f64 {
    let h = v.grid().h();
    (h * v.values().iter().map(|x| x.norm_sq()).sum::<f64>()).sqrt()
}

/// `|v|²_{H¹_h} = |v|²_h + |D⁺v|²_h`.
pub fn norm_h1<T: NodeValue>(v: &Field<T>) -> f64 {
    let a = norm_h(v);
    let b = norm_h(&dplus(v));
    (a * a + b * b).sqrt()
}

pub fn norm_linf<T: NodeValue>(v: &Field<T>) -> f64 {
    v.max_norm()
}

/// Dual norm of `v` against `|·|_{H¹_h}` under the `(·,·)_h` pairing.
///
/// Computed through the Riesz representative `w`, `(I - D⁺D⁻) w = v`, so that
/// `|v|_{H⁻¹_h} = sqrt((v, w)_h)`. One (cyclic) tridiagonal solve per component.
pub fn norm_hneg1<T: NodeValue>(v: &Field<T>) -> Result<f64> {
    let w = riesz_representative(v)?;
    let pairing = inner_h(v, &w)?;
    Ok(pairing.max(0.0).sqrt())
}

/// Solves `(I - D⁺D⁻) w = v` with the ghost convention of `v`.
pub fn riesz_representative<T: NodeValue>(v: &Field<T>) -> Result<Field<T>> {
    let grid = *v.grid();
    let n = grid.len();
    let k = 1.0 / (grid.h() * grid.h());
    let sub = vec![-k; n];
    let sup = vec![-k; n];
    let mut diag = vec![1.0 + 2.0 * k; n];
    if !grid.is_periodic() {
        match v.extension() {
            Extension::Constant => {
                diag[0] = 1.0 + k;
                diag[n - 1] = 1.0 + k;
            }
            // D⁻v of a zero-continued field is itself zero-continued, so the
            // right end sees a vanishing flux.
            Extension::Zero => diag[n - 1] = 1.0 + k,
            Extension::Linear => {
                return Err(BflError::Precondition(
                    "H⁻¹ norm needs a constant or zero continuation".into(),
                ))
            }
        }
    }

    let mut w: Vec<T> = vec![T::zero(); n];
    for comp in 0..T::DIM {
        let rhs: Vec<f64> = v.values().iter().map(|x| x.component(comp)).collect();
        let sol = if grid.is_periodic() {
            solve_cyclic(&sub, &diag, &sup, &rhs)?
        } else {
            solve_tridiagonal(&sub, &diag, &sup, &rhs)?
        };
        for (wi, s) in w.iter_mut().zip(sol) {
            *wi = wi.with_component(comp, s);
        }
    }
    let w = Field::raw(grid, w, v.extension());

    // The band above must agree with the operator d2 builds from the ghosts.
    let residual = w.sub(&d2(&w))?.sub(v)?.max_norm();
    let scale = v.max_norm().max(f64::MIN_POSITIVE);
    if residual > 1e-10 * scale {
        return Err(BflError::Solver(format!(
            "Riesz solve residual {residual:e} exceeds tolerance (scale {scale:e})"
        )));
    }
    Ok(w)
}
