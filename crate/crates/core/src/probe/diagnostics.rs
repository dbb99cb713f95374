use serde::{Deserialize, Serialize};

use crate::dynamics::{curve_rhs, energy, tangent_rhs, FlowState};
use crate::error::Result;
use crate::lattice::{delta_g, dminus, dplus, norm_h, norm_hneg1, Extension, Field, ScalarField};
use crate::speed::{SpeedBounds, SpeedField};

/// What the a-priori bounds are measured against: the declared speed bounds
/// and the initial gradient `|D⁺u⁰|_h` at time `t0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundContext {
    pub bounds: SpeedBounds,
    pub grad0: f64,
    pub t0: f64,
}

impl BoundContext {
    pub fn from_initial(state: &FlowState, bounds: SpeedBounds) -> Self {
        Self {
            bounds,
            grad0: norm_h(&dplus(&state.tangent_field())),
            t0: state.t(),
        }
    }
}

/// `sqrt(β/α) |D⁺u⁰|_h exp(β₁ t / 2α)`.
pub fn gradient_bound(ctx: &BoundContext, t: f64) -> f64 {
    let SpeedBounds { alpha, beta, beta_t, .. } = ctx.bounds;
    (beta / alpha).sqrt() * ctx.grad0 * (beta_t * (t - ctx.t0) / (2.0 * alpha)).exp()
}

/// `β` times [`gradient_bound`]; bounds `|du/dt|_{H⁻¹_h}`.
pub fn dual_bound(ctx: &BoundContext, t: f64) -> f64 {
    ctx.bounds.beta * gradient_bound(ctx, t)
}

pub fn gradient_bound_margin(ctx: &BoundContext, t: f64, grad_norm: f64) -> f64 {
    gradient_bound(ctx, t) - grad_norm
}

pub fn dual_bound_margin(ctx: &BoundContext, t: f64, rhs_dual_norm: f64) -> f64 {
    dual_bound(ctx, t) - rhs_dual_norm
}

/// One row of monitored quantities. Margins are negative when a bound is violated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub unit_drift: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub rhs_norm: f64,
    pub rhs_dual_norm: f64,
    pub delta_norm: f64,
    pub grad_margin: f64,
    pub dual_margin: f64,
    pub oracle_error: Option<f64>,
}

/// Monitors for one state. Curve states are measured through `u = D⁺γ`.
pub fn diagnostics(state: &FlowState, speed: &SpeedField, ctx: &BoundContext) -> Result<DiagnosticsRecord> {
    let t = state.t();
    let u = state.tangent_field().with_extension(Extension::Constant);
    let g = state.sample_speed(speed)?;
    let lap = delta_g(&g, &u)?;
    let rhs = tangent_rhs(&u, &g)?;
    let grad_norm = norm_h(&dplus(&u));
    let rhs_dual_norm = norm_hneg1(&rhs)?;
    Ok(DiagnosticsRecord {
        t,
        unit_drift: u.unit_defect(),
        energy: energy(&u, &g)?,
        grad_norm,
        rhs_norm: norm_h(&rhs),
        rhs_dual_norm,
        delta_norm: norm_h(&lap),
        grad_margin: gradient_bound_margin(ctx, t, grad_norm),
        dual_margin: dual_bound_margin(ctx, t, rhs_dual_norm),
        oracle_error: None,
    })
}

/// `h Σ ġ_i |D⁻u_i|²`, the rate of change of the energy predicted by the
/// motion of `g` alone. `ġ` is `∂ₜg`, plus `∇_γ g · dγ/dt` for coupled speeds.
pub fn energy_source(state: &FlowState, speed: &SpeedField) -> Result<f64> {
    let grid = *state.grid();
    let u = state.tangent_field();
    let g_dot: ScalarField = if speed.is_coupled() {
        let gamma = state.curve_field();
        let g = speed.sample(state.t(), &grid, Some(&gamma))?;
        let vel = curve_rhs(&gamma, &g)?;
        let eps = 1e-6;
        let plus = gamma.axpy(eps, &vel)?;
        let minus = gamma.axpy(-eps, &vel)?;
        let values = (0..grid.len())
            .map(|i| {
                let t = state.t();
                let x = grid.x(i);
                (speed.eval(t, x, Some(&plus.get(i))) - speed.eval(t, x, Some(&minus.get(i)))) / (2.0 * eps)
            })
            .collect();
        Field::new(grid, values)?
    } else {
        speed.sample_time_derivative(state.t(), &grid, None)?
    };
    let w = dminus(&u);
    let h = grid.h();
    Ok(h * w.values().iter().zip(g_dot.values()).map(|(d, gd)| gd * d.norm_squared()).sum::<f64>())
}
