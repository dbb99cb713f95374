use rayon::prelude::*;

use crate::dynamics::FlowState;
use crate::error::{BflError, Result};
use crate::integrate::{evolve, IntegratorSpec};
use crate::lattice::{norm_h1, Field, UnitField, Vec3, VectorField};
use crate::speed::SpeedField;

/// A fixed smooth bump supported on the middle half of the domain, pointing
/// along `(1, 1, 1)/√3` before projection.
fn bump(u0: &UnitField) -> VectorField {
    let grid = u0.grid();
    let centre = grid.start() + 0.5 * grid.extent();
    let half_width = 0.25 * grid.extent();
    let dir = Vec3::new(1.0, 1.0, 1.0).normalize();
    Field::from_fn(*grid, |i, x| {
        let s = (x - centre) / half_width;
        let amp = if s.abs() < 1.0 {
            let c = (0.5 * std::f64::consts::PI * s).cos();
            c * c
        } else {
            0.0
        };
        let u = u0.get(i);
        let v = dir * amp;
        v - u * u.dot(&v)
    })
}

/// `normalize(u0 + ε v)` with `v` the fixed bump projected tangent to `u0`.
pub fn perturb(u0: &UnitField, eps: f64) -> Result<UnitField> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(BflError::Precondition(format!("perturbation size must lie in (0, 0.1], got {eps}")));
    }
    UnitField::normalize(u0.axpy(eps, &bump(u0))?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityResult {
    pub eps: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    /// `‖u(T) − ũ(T)‖_{H¹_h} / ‖u₀ − ũ₀‖_{H¹_h}`.
    pub ratio: f64,
}

/// Evolves `u0` and its perturbation to `horizon` and returns the H¹_h amplification.
pub fn stability_probe(
    u0: &UnitField,
    eps: f64,
    speed: &SpeedField,
    horizon: f64,
    spec: &IntegratorSpec,
) -> Result<StabilityResult> {
    let v0 = perturb(u0, eps)?;
    let initial_distance = norm_h1(&u0.sub(&v0)?);
    let run = |u: UnitField| -> Result<VectorField> {
        let ev = evolve(FlowState::tangent(0.0, u), horizon, spec, speed).into_result()?;
        Ok(ev.last.tangent_field())
    };
    let (a, b) = rayon::join(|| run(u0.clone()), || run(v0));
    let final_distance = norm_h1(&a?.sub(&b?)?);
    Ok(StabilityResult {
        eps,
        initial_distance,
        final_distance,
        ratio: final_distance / initial_distance,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySweep {
    pub results: Vec<StabilityResult>,
    /// `(max ratio − min ratio) / min ratio`.
    pub spread: f64,
}

/// [`stability_probe`] for every `ε`, run in parallel.
pub fn stability_sweep(
    u0: &UnitField,
    eps: &[f64],
    speed: &SpeedField,
    horizon: f64,
    spec: &IntegratorSpec,
) -> Result<StabilitySweep> {
    if eps.len() < 2 {
        return Err(BflError::Precondition("a stability sweep needs at least two perturbation sizes".into()));
    }
    let results: Vec<StabilityResult> = eps
        .par_iter()
        .map(|&e| stability_probe(u0, e, speed, horizon, spec))
        .collect::<Result<_>>()?;
    let lo = results.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let hi = results.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(StabilitySweep {
        results,
        spread: (hi - lo) / lo,
    })
}
