//! Explicit time steppers for the semi-discrete systems and the fixed-step driver.
//!
//! Tangent states are stepped as the pair `(u, c)` where `c` is the curve
//! point at the origin node. Curve states are stepped directly in `γ` by the
//! Runge–Kutta methods; the rotation methods step the edge vectors `D⁺γ`
//! together with the origin point and rebuild `γ` afterwards.

use serde::{Deserialize, Serialize};

use crate::dynamics::{curve_rhs, origin_rate, tangent_rhs, FlowState};
use crate::error::{BflError, Result};
use crate::lattice::{delta_g, dplus, Extension, Field, Grid, ScalarField, UnitField, Vec3, VectorField};
use crate::reconstruct::{gamma_integral_at, origin_index};
use crate::speed::SpeedField;

/// A unit drift beyond this is reported as divergence.
pub const DIVERGENCE_DRIFT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical Runge–Kutta; leaves an `O(dt⁵)` per-step norm drift.
    Rk4,
    /// RK4 followed by renormalization of every `u_i` (or `D⁺γ_i`).
    ProjectedRk4,
    /// Fourth-order Munthe-Kaas Runge–Kutta built from exact per-node
    /// rotations `u_i ← exp(θ_i) u_i` with angular velocity `ω = −Δ_g u`.
    Rotation,
    /// Two-stage explicit-midpoint variant of [`Method::Rotation`]; second order.
    RotationMidpoint,
    /// Strang splitting over a node coloring: nodes of one color see frozen
    /// neighbours and are rotated exactly about `−(g_{i+1}u_{i+1} + g_i u_{i-1})/h²`.
    /// Every substep conserves `h Σ g|D⁻u|²` for frozen `g`; second order.
    SplitRotation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::ProjectedRk4 => "projected-rk4",
            Method::Rotation => "rotation",
            Method::RotationMidpoint => "rotation-midpoint",
            Method::SplitRotation => "split-rotation",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "rk4" => Method::Rk4,
            "projected-rk4" => Method::ProjectedRk4,
            "rotation" => Method::Rotation,
            "rotation-midpoint" => Method::RotationMidpoint,
            "split-rotation" => Method::SplitRotation,
            other => return Err(BflError::Config(format!("unknown integrator `{other}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    /// `dt = c h² / β`.
    Cfl(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSpec {
    pub method: Method,
    pub policy: StepPolicy,
    /// Steps between stored snapshots.
    pub stride: usize,
}

impl IntegratorSpec {
    pub fn new(method: Method, policy: StepPolicy, stride: usize) -> Result<Self> {
        match policy {
            StepPolicy::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return Err(BflError::Precondition(format!("time step must be positive, got {dt}")))
            }
            StepPolicy::Cfl(c) if !(c > 0.0 && c <= 1.0) => {
                return Err(BflError::Precondition(format!("CFL safety factor must lie in (0, 1], got {c}")))
            }
            _ => {}
        }
        if stride == 0 {
            return Err(BflError::Precondition("snapshot stride must be at least 1".into()));
        }
        Ok(Self { method, policy, stride })
    }

    pub fn dt(&self, grid: &Grid, speed: &SpeedField) -> f64 {
        match self.policy {
            StepPolicy::Fixed(dt) => dt,
            StepPolicy::Cfl(c) => c * grid.h() * grid.h() / speed.bounds().beta,
        }
    }
}

/// Rotation of `v` by the rotation vector `theta` (Rodrigues).
#[inline]
fn rotate(theta: &Vec3, v: &Vec3) -> Vec3 {
    let angle = theta.norm();
    if angle < 1e-300 {
        return *v;
    }
    let k = theta / angle;
    let (s, c) = angle.sin_cos();
    v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
}

/// Inverse differential of the exponential map on so(3), truncated after the second commutator.
#[inline]
fn dexpinv(theta: &Vec3, w: &Vec3) -> Vec3 {
    let tw = theta.cross(w);
    w - tw * 0.5 + theta.cross(&tw) / 12.0
}

fn rotate_all(theta: &VectorField, u: &VectorField) -> VectorField {
    let mut out = u.clone();
    for (o, th) in out.values_mut().iter_mut().zip(theta.values()) {
        *o = rotate(th, o);
    }
    out
}

/// The tangent system for `(u, c)` with a fixed origin node.
struct TangentSystem<'a> {
    speed: &'a SpeedField,
    i0: usize,
}

impl TangentSystem<'_> {
    fn g(&self, t: f64, u: &VectorField, c: &Vec3) -> Result<ScalarField> {
        if self.speed.is_coupled() {
            let gamma = gamma_integral_at(u, self.i0).map(|p| p + c);
            self.speed.sample(t, u.grid(), Some(&gamma))
        } else {
            self.speed.sample(t, u.grid(), None)
        }
    }

    fn rhs(&self, t: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        let g = self.g(t, u, c)?;
        Ok((tangent_rhs(u, &g)?, origin_rate(u, &g, self.i0)))
    }

    /// Angular velocity `−Δ_g u` and the origin velocity.
    fn omega(&self, t: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        let g = self.g(t, u, c)?;
        Ok((delta_g(&g, u)?.scaled(-1.0), origin_rate(u, &g, self.i0)))
    }

    fn rk4(&self, t: f64, dt: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        let (k1, c1) = self.rhs(t, u, c)?;
        let (k2, c2) = self.rhs(t + 0.5 * dt, &u.axpy(0.5 * dt, &k1)?, &(c + c1 * (0.5 * dt)))?;
        let (k3, c3) = self.rhs(t + 0.5 * dt, &u.axpy(0.5 * dt, &k2)?, &(c + c2 * (0.5 * dt)))?;
        let (k4, c4) = self.rhs(t + dt, &u.axpy(dt, &k3)?, &(c + c3 * dt))?;
        let incr = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.axpy(1.0, &k4)?;
        let c_new = c + (c1 + c2 * 2.0 + c3 * 2.0 + c4) * (dt / 6.0);
        Ok((u.axpy(dt / 6.0, &incr)?, c_new))
    }

    fn rkmk4(&self, t: f64, dt: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        let stage = |theta: &VectorField, w: &VectorField| -> Result<VectorField> {
            theta.zip_with(w, |th, wi| dexpinv(&th, &wi))
        };
        let (k1, c1) = self.omega(t, u, c)?;
        let th2 = k1.scaled(0.5 * dt);
        let (w2, c2) = self.omega(t + 0.5 * dt, &rotate_all(&th2, u), &(c + c1 * (0.5 * dt)))?;
        let k2 = stage(&th2, &w2)?;
        let th3 = k2.scaled(0.5 * dt);
        let (w3, c3) = self.omega(t + 0.5 * dt, &rotate_all(&th3, u), &(c + c2 * (0.5 * dt)))?;
        let k3 = stage(&th3, &w3)?;
        let th4 = k3.scaled(dt);
        let (w4, c4) = self.omega(t + dt, &rotate_all(&th4, u), &(c + c3 * dt))?;
        let k4 = stage(&th4, &w4)?;
        let theta = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.axpy(1.0, &k4)?.scaled(dt / 6.0);
        let c_new = c + (c1 + c2 * 2.0 + c3 * 2.0 + c4) * (dt / 6.0);
        Ok((rotate_all(&theta, u), c_new))
    }

    fn midpoint(&self, t: f64, dt: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        let (w1, c1) = self.omega(t, u, c)?;
        let half = rotate_all(&w1.scaled(0.5 * dt), u);
        let (w2, c2) = self.omega(t + 0.5 * dt, &half, &(c + c1 * (0.5 * dt)))?;
        Ok((rotate_all(&w2.scaled(dt), u), c + c2 * dt))
    }

    fn split(&self, t: f64, dt: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        if self.speed.is_coupled() {
            return Err(BflError::Precondition(
                "split-rotation freezes g over a step and does not support curve-coupled speeds".into(),
            ));
        }
        let grid = *u.grid();
        if !grid.is_periodic() && u.extension() != Extension::Constant {
            return Err(BflError::Precondition("split-rotation needs a constant continuation".into()));
        }
        let n = grid.len();
        let g_mid = self.speed.sample(t + 0.5 * dt, &grid, None)?;
        let g_lo = self.speed.sample(t, &grid, None)?;
        let g_hi = self.speed.sample(t + dt, &grid, None)?;
        let colors: Vec<u8> = (0..n)
            .map(|i| if grid.is_periodic() && n % 2 == 1 && i == n - 1 { 2 } else { (i % 2) as u8 })
            .collect();
        let schedule: Vec<(u8, f64)> = if colors.contains(&2) {
            vec![(0, 0.5), (1, 0.5), (2, 1.0), (1, 0.5), (0, 0.5)]
        } else {
            vec![(0, 0.5), (1, 1.0), (0, 0.5)]
        };
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        let g = g_mid.values();
        let mut v = u.values().to_vec();
        for (color, frac) in schedule {
            let tau = frac * dt;
            for i in (0..n).filter(|&i| colors[i] == color) {
                // Ghost neighbours of a window equal the end value and exert no torque.
                let mut axis = Vec3::zeros();
                if grid.is_periodic() || i + 1 < n {
                    let j = (i + 1) % n;
                    axis += v[j] * g[j];
                }
                if grid.is_periodic() || i > 0 {
                    let j = (i + n - 1) % n;
                    axis += v[j] * g[i];
                }
                v[i] = rotate(&(axis * (-tau * inv_h2)), &v[i]);
            }
        }
        let u_new = Field::new(grid, v)?.with_extension(u.extension());
        let c_new = c + (origin_rate(u, &g_lo, self.i0) + origin_rate(&u_new, &g_hi, self.i0)) * (0.5 * dt);
        Ok((u_new, c_new))
    }

    fn step(&self, method: Method, t: f64, dt: f64, u: &VectorField, c: &Vec3) -> Result<(VectorField, Vec3)> {
        match method {
            Method::Rk4 => self.rk4(t, dt, u, c),
            Method::ProjectedRk4 => {
                let (u, c) = self.rk4(t, dt, u, c)?;
                Ok((u.normalized(), c))
            }
            Method::Rotation => self.rkmk4(t, dt, u, c),
            Method::RotationMidpoint => self.midpoint(t, dt, u, c),
            Method::SplitRotation => self.split(t, dt, u, c),
        }
    }
}

/// Edge vectors of a curve on their own grid, the origin node and the curve point there.
struct Lifted {
    edges: VectorField,
    i0: usize,
    c: Vec3,
}

fn lift(gamma: &VectorField) -> Result<Lifted> {
    let grid = *gamma.grid();
    let i0 = origin_index(&grid);
    let c = gamma.get(i0);
    let d = dplus(gamma);
    let edges = if grid.is_periodic() {
        d
    } else {
        let m = grid.len() - 1;
        let edge_grid = Grid::window(grid.start(), m - 1, grid.h())
            .map_err(|_| BflError::Precondition("rotation stepping of a window curve needs at least 5 intervals".into()))?;
        Field::new(edge_grid, d.values()[..m].to_vec())?
    };
    Ok(Lifted {
        edges: edges.with_extension(Extension::Constant),
        i0,
        c,
    })
}

fn drop_lift(lifted: &Lifted, grid: &Grid) -> Result<VectorField> {
    let base = gamma_integral_at(&lifted.edges, lifted.i0);
    let mut values: Vec<Vec3> = base.values().iter().map(|p| p + lifted.c).collect();
    if !grid.is_periodic() {
        let last = *values.last().expect("non-empty");
        values.push(last + lifted.edges.get(lifted.edges.len() - 1) * grid.h());
    }
    Ok(Field::new(*grid, values)?.with_extension(Extension::Linear))
}

fn curve_rk4(speed: &SpeedField, t: f64, dt: f64, gamma: &VectorField) -> Result<VectorField> {
    let f = |t: f64, y: &VectorField| -> Result<VectorField> {
        let g = if speed.is_coupled() {
            speed.sample(t, y.grid(), Some(y))?
        } else {
            speed.sample(t, y.grid(), None)?
        };
        curve_rhs(y, &g)
    };
    let k1 = f(t, gamma)?;
    let k2 = f(t + 0.5 * dt, &gamma.axpy(0.5 * dt, &k1)?)?;
    let k3 = f(t + 0.5 * dt, &gamma.axpy(0.5 * dt, &k2)?)?;
    let k4 = f(t + dt, &gamma.axpy(dt, &k3)?)?;
    let incr = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.axpy(1.0, &k4)?;
    gamma.axpy(dt / 6.0, &incr)
}

fn check_finite(state: &FlowState, step: usize) -> Result<()> {
    if state.first_non_finite().is_some() || !(state.unit_drift() <= DIVERGENCE_DRIFT) {
        return Err(BflError::Divergence { step, t: state.t() });
    }
    Ok(())
}

fn step_inner(state: &FlowState, speed: &SpeedField, method: Method, dt: f64) -> Result<FlowState> {
    let t = state.t();
    match state {
        FlowState::Tangent { u, origin, .. } => {
            let sys = TangentSystem {
                speed,
                i0: origin_index(u.grid()),
            };
            let (u_new, c_new) = sys.step(method, t, dt, u.as_field(), origin)?;
            if u_new.first_non_finite().is_some() {
                return Err(BflError::Divergence { step: 0, t: t + dt });
            }
            let u_new = UnitField::with_tolerance(u_new, f64::INFINITY)?;
            Ok(FlowState::Tangent {
                t: t + dt,
                u: u_new,
                origin: c_new,
            })
        }
        FlowState::Curve { gamma, .. } => {
            let grid = *gamma.grid();
            let gamma_new = match method {
                Method::Rk4 => curve_rk4(speed, t, dt, gamma)?,
                Method::ProjectedRk4 => {
                    let raw = curve_rk4(speed, t, dt, gamma)?;
                    if raw.first_non_finite().is_some() {
                        return Err(BflError::Divergence { step: 0, t: t + dt });
                    }
                    let mut lifted = lift(&raw)?;
                    lifted.edges = lifted.edges.normalized();
                    drop_lift(&lifted, &grid)?
                }
                _ => {
                    let lifted = lift(gamma)?;
                    let sys = TangentSystem { speed, i0: lifted.i0 };
                    let (edges, c) = sys.step(method, t, dt, &lifted.edges, &lifted.c)?;
                    if edges.first_non_finite().is_some() {
                        return Err(BflError::Divergence { step: 0, t: t + dt });
                    }
                    drop_lift(&Lifted { edges, c, ..lifted }, &grid)?
                }
            };
            Ok(FlowState::Curve {
                t: t + dt,
                gamma: gamma_new.with_extension(Extension::Linear),
            })
        }
    }
}

/// Advances `state` by `dt` (which may be negative for backward runs).
pub fn step(state: &FlowState, speed: &SpeedField, method: Method, dt: f64) -> Result<FlowState> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(BflError::Precondition(format!("invalid step {dt}")));
    }
    let next = step_inner(state, speed, method, dt).map_err(|e| match e {
        BflError::Divergence { t, .. } => BflError::Divergence { step: 1, t },
        other => other,
    })?;
    check_finite(&next, 1)?;
    Ok(next)
}

/// Result of a fixed-step march.
#[derive(Clone, Debug)]
pub struct Evolution {
    /// Stored states: the initial state, every `stride`-th step and the final state.
    pub snapshots: Vec<FlowState>,
    /// Last state reached (the horizon unless the run failed).
    pub last: FlowState,
    pub steps: usize,
    pub dt: f64,
    /// Set when the march aborted; `snapshots` then hold the partial run.
    pub error: Option<BflError>,
}

impl Evolution {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Marches from `state.t()` to `horizon` with the integrator's fixed step, shortening
/// the last step to land on `horizon`. `observer` sees every stored snapshot;
/// an observer error aborts the run like a divergence does.
///
/// A horizon before the initial time runs the system backwards.
pub fn evolve_with(
    state: FlowState,
    horizon: f64,
    spec: &IntegratorSpec,
    speed: &SpeedField,
    observer: &mut dyn FnMut(&FlowState) -> Result<()>,
) -> Evolution {
    let t0 = state.t();
    let dt_nominal = spec.dt(state.grid(), speed);
    let span = horizon - t0;
    let mut out = Evolution {
        snapshots: Vec::new(),
        last: state.clone(),
        steps: 0,
        dt: dt_nominal,
        error: None,
    };
    if !(span.is_finite() && span != 0.0) {
        out.error = Some(BflError::Precondition(format!("horizon {horizon} must differ from start time {t0}")));
        return out;
    }
    if let Err(e) = observer(&state) {
        out.error = Some(e);
        return out;
    }
    out.snapshots.push(state);

    let dir = span.signum();
    let n_steps = ((span.abs() / dt_nominal) - 1e-9).ceil().max(1.0) as usize;
    for k in 1..=n_steps {
        let t_prev = out.last.t();
        let t_next = if k == n_steps { horizon } else { t0 + dir * k as f64 * dt_nominal };
        let next = step_inner(&out.last, speed, spec.method, t_next - t_prev)
            .map_err(|e| match e {
                BflError::Divergence { .. } => BflError::Divergence { step: k, t: t_next },
                other => other,
            })
            .and_then(|s| check_finite(&s, k).map(|_| s));
        match next {
            Ok(mut s) => {
                // Pin the clock to the nominal grid of times.
                match &mut s {
                    FlowState::Tangent { t, .. } | FlowState::Curve { t, .. } => *t = t_next,
                }
                out.last = s;
                out.steps = k;
            }
            Err(e) => {
                out.error = Some(e);
                return out;
            }
        }
        if k % spec.stride == 0 || k == n_steps {
            if let Err(e) = observer(&out.last) {
                out.error = Some(e);
                return out;
            }
            out.snapshots.push(out.last.clone());
        }
    }
    out
}

pub fn evolve(state: FlowState, horizon: f64, spec: &IntegratorSpec, speed: &SpeedField) -> Evolution {
    evolve_with(state, horizon, spec, speed, &mut |_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::energy;
    use crate::lattice::norm_h;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn helix(grid: Grid, alpha: f64, k: f64, omega: f64, t: f64) -> VectorField {
        Field::from_fn(grid, |_, x| {
            let ph = k * x - omega * t;
            Vec3::new(alpha.sin() * ph.cos(), alpha.sin() * ph.sin(), alpha.cos())
        })
    }

    fn helix_omega(grid: &Grid, alpha: f64, k: f64) -> f64 {
        let h = grid.h();
        alpha.cos() * (2.0 - 2.0 * (k * h).cos()) / (h * h)
    }

    fn random_state(grid: Grid, seed: u64) -> FlowState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Field::from_fn(grid, |_, x| {
            Vec3::new(x.cos() + 0.3 * rng.random_range(-1.0..1.0), x.sin(), 0.5 + 0.2 * rng.random_range(-1.0..1.0))
        });
        FlowState::tangent(0.0, UnitField::normalize(u).unwrap())
    }

    #[test]
    fn rotation_rejects_nothing_and_preserves_norm() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let speed = SpeedField::parse("sin:2,1,1").unwrap();
        let s = random_state(grid, 1);
        let dt = 0.2 * grid.h() * grid.h() / 3.0;
        for m in [Method::Rotation, Method::RotationMidpoint, Method::SplitRotation] {
            let next = step(&s, &speed, m, dt).unwrap();
            assert!(next.unit_drift() <= 1e-14, "{m:?}: {}", next.unit_drift());
        }
        let p = step(&s, &speed, Method::ProjectedRk4, dt).unwrap();
        assert!(p.unit_drift() <= 2e-16);
    }

    #[test]
    fn constant_field_only_advances_time() {
        let grid = Grid::window(0.0, 10, 0.1).unwrap();
        let u = UnitField::new(Field::constant(grid, Vec3::y())).unwrap();
        let speed = SpeedField::constant(1.0).unwrap();
        let s = FlowState::tangent(0.5, u.clone());
        for m in [Method::Rk4, Method::Rotation, Method::SplitRotation] {
            let next = step(&s, &speed, m, 1e-3).unwrap();
            assert_eq!(next.t(), 0.501);
            assert_eq!(next.tangent_field(), *u.as_field());
            assert_eq!(next.origin(), Vec3::zeros());
        }
    }

    #[test]
    fn rk4_local_error_has_order_five() {
        let (alpha, k) = (FRAC_PI_4, 2.0);
        let grid = Grid::periodic(TAU, 64).unwrap();
        let omega = helix_omega(&grid, alpha, k);
        let speed = SpeedField::constant(1.0).unwrap();
        let s = FlowState::tangent(0.0, UnitField::new(helix(grid, alpha, k, omega, 0.0)).unwrap());
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| {
                let next = step(&s, &speed, Method::Rk4, dt).unwrap();
                next.tangent_field().sub(&helix(grid, alpha, k, omega, dt)).unwrap().max_norm()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((4.6..=5.4).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn rotation_tracks_helix() {
        let (alpha, k) = (FRAC_PI_4, 2.0);
        let grid = Grid::periodic(TAU, 64).unwrap();
        let omega = helix_omega(&grid, alpha, k);
        let speed = SpeedField::constant(1.0).unwrap();
        let s = FlowState::tangent(0.0, UnitField::new(helix(grid, alpha, k, omega, 0.0)).unwrap());
        let spec = IntegratorSpec::new(Method::Rotation, StepPolicy::Fixed(1e-3), 100).unwrap();
        let ev = evolve(s, 0.3, &spec, &speed).into_result().unwrap();
        let err = ev.last.tangent_field().sub(&helix(grid, alpha, k, omega, 0.3)).unwrap().max_norm();
        assert!(err < 1e-9, "{err}");
        assert_eq!(ev.last.t(), 0.3);
        assert_eq!(ev.steps, 300);
        assert_eq!(ev.snapshots.len(), 4);
    }

    #[test]
    fn split_rotation_conserves_energy_per_step() {
        let grid = Grid::periodic(TAU, 33).unwrap();
        let speed = SpeedField::parse("sin:2,1,1").unwrap();
        let s = random_state(grid, 5);
        let g = speed.sample(0.0, &grid, None).unwrap();
        let e0 = energy(&s.tangent_field(), &g).unwrap();
        // Far beyond the explicit stability limit.
        let next = step(&s, &speed, Method::SplitRotation, 2.0 * grid.h() * grid.h()).unwrap();
        let e1 = energy(&next.tangent_field(), &g).unwrap();
        assert!(((e1 - e0) / e0).abs() < 1e-13);
    }

    #[test]
    fn split_rotation_rejects_coupled_speed() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let speed = SpeedField::parse("coupled-tanh:1,0.5").unwrap();
        let s = random_state(grid, 2);
        assert!(matches!(step(&s, &speed, Method::SplitRotation, 1e-4), Err(BflError::Precondition(_))));
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let speed = SpeedField::parse("sin:2,1,1").unwrap();
        let helix_u = helix(grid, FRAC_PI_4, 2.0, 0.0, 0.0);
        let s0 = FlowState::tangent(0.0, UnitField::new(helix_u).unwrap());
        let spec = IntegratorSpec::new(Method::Rotation, StepPolicy::Cfl(0.25), 1000).unwrap();
        let fwd = evolve(s0.clone(), 0.1, &spec, &speed).into_result().unwrap();
        let back = evolve(fwd.last.clone(), 0.0, &spec, &speed).into_result().unwrap();
        let fine = IntegratorSpec::new(Method::Rotation, StepPolicy::Cfl(0.25 / 8.0), 1000).unwrap();
        let reference = evolve(s0.clone(), 0.1, &fine, &speed).into_result().unwrap();
        let one_way = fwd.last.tangent_field().sub(&reference.last.tangent_field()).unwrap().max_norm();
        let err = back.last.tangent_field().sub(&s0.tangent_field()).unwrap().max_norm();
        assert!(err <= 10.0 * one_way, "{err} vs one-way {one_way}");
    }

    #[test]
    fn rk4_beyond_stability_limit_diverges() {
        let (alpha, k) = (FRAC_PI_4, 2.0);
        let grid = Grid::periodic(TAU, 64).unwrap();
        let speed = SpeedField::constant(1.0).unwrap();
        // Perturb the helix so every mode is excited.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = helix(grid, alpha, k, 0.0, 0.0);
        let u = Field::from_fn(grid, |i, _| base.get(i) + Vec3::new(1e-6 * rng.random_range(-1.0..1.0), 0.0, 0.0));
        let s = FlowState::tangent(0.0, UnitField::normalize(u).unwrap());
        let dt = 4.0 * grid.h() * grid.h();
        let spec = IntegratorSpec::new(Method::Rk4, StepPolicy::Fixed(dt), 10).unwrap();
        let ev = evolve(s, 1.0, &spec, &speed);
        assert!(matches!(ev.error, Some(BflError::Divergence { .. })), "{:?}", ev.error);
        assert!(!ev.snapshots.is_empty());
        assert!(IntegratorSpec::new(Method::Rk4, StepPolicy::Cfl(4.0), 1).is_err());
    }

    #[test]
    fn rhs_orthogonal_along_rotation_run() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let speed = SpeedField::parse("sintime:2,1,1,1").unwrap();
        let spec = IntegratorSpec::new(Method::Rotation, StepPolicy::Cfl(0.25), 50).unwrap();
        let mut worst = 0.0_f64;
        let ev = evolve_with(random_state(grid, 3), 0.2, &spec, &speed, &mut |s| {
            let r = crate::dynamics::rhs_tangent(s, &speed)?;
            let u = s.tangent_field();
            for (a, b) in r.values().iter().zip(u.values()) {
                worst = worst.max(a.dot(b).abs() / (a.norm() + 1.0));
            }
            Ok(())
        });
        assert!(ev.is_complete());
        assert!(worst < 1e-13, "{worst}");
    }

    #[test]
    fn curve_rotation_matches_direct_rk4() {
        let grid = Grid::window(-3.0, 60, 0.1).unwrap();
        // A planar arc of curvature 0.5 joined to straight ends.
        let u = Field::from_fn(grid, |_, x| {
            let a = 0.5 * x.clamp(-1.5, 1.5);
            Vec3::new(a.cos(), a.sin(), 0.0)
        });
        let gamma = gamma_integral_at(&u.with_extension(Extension::Constant), origin_index(&grid));
        let s = FlowState::curve(0.0, gamma).unwrap();
        let speed = SpeedField::parse("coupled-tanh:1,0.5").unwrap();
        // Both methods are fourth order; at this step the gap is ~4e-10 and shrinks 32x per halving.
        let spec_a = IntegratorSpec::new(Method::Rk4, StepPolicy::Cfl(0.05), 100).unwrap();
        let spec_b = IntegratorSpec::new(Method::Rotation, StepPolicy::Cfl(0.05), 100).unwrap();
        let a = evolve(s.clone(), 0.05, &spec_a, &speed).into_result().unwrap();
        let b = evolve(s, 0.05, &spec_b, &speed).into_result().unwrap();
        let diff = a.last.curve_field().sub(&b.last.curve_field()).unwrap();
        assert!(norm_h(&diff) < 2e-9, "{}", norm_h(&diff));
        assert!(b.last.unit_drift() < 1e-13);
    }
}
