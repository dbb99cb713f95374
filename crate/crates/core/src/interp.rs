//! Piecewise linear (`P_h`) and piecewise constant (`Q_h`) interpolants of
//! lattice fields, and the exact lattice/continuum norm bridges.
//!
//! On a window the interpolants live on `[x_0, x_M]` only; every continuum
//! integral is taken over the `M` cells of the window. Periodic fields are
//! integrated over one period.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BflError, Result};
use crate::lattice::{dplus, norm_h1, Field, Grid, NodeValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterpolantKind {
    PiecewiseLinear,
    PiecewiseConstant,
}

/// A field viewed as a function of the continuous coordinate.
#[derive(Clone, Copy, Debug)]
pub struct InterpolantView<'a, T> {
    field: &'a Field<T>,
    kind: InterpolantKind,
}

impl<'a, T: NodeValue> InterpolantView<'a, T> {
    pub fn new(field: &'a Field<T>, kind: InterpolantKind) -> Self {
        Self { field, kind }
    }

    pub fn linear(field: &'a Field<T>) -> Self {
        Self::new(field, InterpolantKind::PiecewiseLinear)
    }

    pub fn constant(field: &'a Field<T>) -> Self {
        Self::new(field, InterpolantKind::PiecewiseConstant)
    }

    /// Value of the interpolant at `x`.
    pub fn eval(&self, x: f64) -> Result<T> {
        let grid = self.field.grid();
        let (cell, offset) = locate(grid, x)?;
        let vi = self.field.get(cell);
        Ok(match self.kind {
            InterpolantKind::PiecewiseConstant => vi,
            InterpolantKind::PiecewiseLinear => {
                if offset == 0.0 {
                    vi
                } else {
                    let next = self.field.at(cell as isize + 1);
                    vi + (next - vi) * (offset / grid.h())
                }
            }
        })
    }
}

/// Cell index and offset `x - x_i` for the cell `[x_i, x_{i+1})` containing `x`.
fn locate(grid: &Grid, x: f64) -> Result<(usize, f64)> {
    let h = grid.h();
    if grid.is_periodic() {
        let l = grid.extent();
        let y = (x - grid.start()).rem_euclid(l);
        let s = y / h;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-12 {
            return Ok((nearest as usize % grid.len(), 0.0));
        }
        let i = (s.floor() as usize).min(grid.len() - 1);
        return Ok((i, (y - i as f64 * h).max(0.0)));
    }
    let lo = grid.start();
    let last = grid.len() - 1;
    let hi = grid.x(last);
    if !(x >= lo && x <= hi) {
        return Err(BflError::Domain { x, lo, hi });
    }
    // Snap to the nearest node when within rounding of it.
    let s = (x - lo) / h;
    let nearest = s.round();
    if (s - nearest).abs() < 1e-12 {
        return Ok((nearest as usize, 0.0));
    }
    let i = (s.floor() as usize).min(last);
    Ok((i, x - grid.x(i)))
}

fn cell_count(grid: &Grid) -> usize {
    if grid.is_periodic() {
        grid.len()
    } else {
        grid.len() - 1
    }
}

/// `‖P_h v‖_{L²}` from the exact cellwise integral of the affine interpolant.
pub fn l2_norm_p<T: NodeValue>(v: &Field<T>) -> f64 {
    let h = v.grid().h();
    let s: f64 = (0..cell_count(v.grid()))
        .map(|i| {
            let a = v.get(i);
            let b = v.at(i as isize + 1);
            a.norm_sq() + a.dot(&b) + b.norm_sq()
        })
        .sum();
    (h / 3.0 * s).sqrt()
}

/// `‖P_h v - Q_h v‖_{L²} = (h/√3) |D⁺v|_h`, with `|D⁺v|_h` summed over the cells of the domain.
pub fn pq_gap<T: NodeValue>(v: &Field<T>) -> f64 {
    let h = v.grid().h();
    let dp = dplus(v);
    let s: f64 = (0..cell_count(v.grid())).map(|i| dp.get(i).norm_sq()).sum();
    h / 3f64.sqrt() * (h * s).sqrt()
}

/// Composite Simpson quadrature of `|P_h v - Q_h v|²`, `panels` panels per cell.
/// Exact for the quadratic integrand; kept as an independent cross-check of [`pq_gap`].
pub fn pq_gap_quadrature<T: NodeValue>(v: &Field<T>, panels: usize) -> Result<f64> {
    let panels = panels.max(2) + panels % 2;
    let grid = v.grid();
    let h = grid.h();
    let p = InterpolantView::linear(v);
    let q = InterpolantView::constant(v);
    let mut total = 0.0;
    for i in 0..cell_count(grid) {
        let x0 = grid.x(i);
        let step = h / panels as f64;
        let mut s = 0.0;
        for k in 0..=panels {
            // The right end is taken from the nodes: P_h hits v_{i+1}, Q_h has the left limit v_i.
            let d = if k == panels {
                v.at(i as isize + 1) - v.at(i as isize)
            } else {
                let x = x0 + k as f64 * step;
                p.eval(x)? - q.eval(x)?
            };
            let w = if k == 0 || k == panels {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * d.norm_sq();
        }
        total += s * step / 3.0;
    }
    Ok(total.sqrt())
}

/// `‖P_h v‖_{L∞}`, which equals the largest node magnitude.
pub fn sup_norm_p<T: NodeValue>(v: &Field<T>) -> f64 {
    v.max_norm()
}

/// `|v|_{L∞_h} / |v|_{H¹_h}`.
pub fn sobolev_ratio<T: NodeValue>(v: &Field<T>) -> f64 {
    let denom = norm_h1(v);
    if denom == 0.0 {
        0.0
    } else {
        sup_norm_p(v) / denom
    }
}

/// Largest Sobolev ratio over `trials` random scalar fields on `grid`.
///
/// Fields mix white noise, smooth random modes and localized bumps of random
/// width, the family that pushes the ratio hardest.
pub fn calibrate_sobolev_constant(grid: &Grid, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.extent();
    let mid = grid.start() + 0.5 * l;
    let mut best = 0.0_f64;
    for trial in 0..trials {
        let v: Field<f64> = match trial % 3 {
            0 => Field::from_fn(*grid, |_, _| rng.random_range(-1.0..1.0)),
            1 => {
                let modes: Vec<(f64, f64)> =
                    (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3))).collect();
                Field::from_fn(*grid, |_, x| {
                    modes
                        .iter()
                        .enumerate()
                        .map(|(k, (a, p))| a * ((k + 1) as f64 * std::f64::consts::TAU * x / l + p).cos())
                        .sum()
                })
            }
            _ => {
                let width = grid.h() * rng.random_range(0.5..(0.25 * l / grid.h()).max(1.0));
                let center = mid + rng.random_range(-0.25..0.25) * l;
                Field::from_fn(*grid, |_, x| (-((x - center) / width).abs()).exp())
            }
        };
        best = best.max(sobolev_ratio(&v));
    }
    best
}

/// Restriction of a fine-grid field onto a nested coarse grid by node sampling.
pub fn resample<T: NodeValue>(v: &Field<T>, coarse: &Grid) -> Result<Field<T>> {
    let ratio = v.grid().nesting_ratio(coarse)?;
    let values = (0..coarse.len()).map(|i| v.get(i * ratio)).collect();
    Ok(Field::new(*coarse, values)?.with_extension(v.extension()))
}
