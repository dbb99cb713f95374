//! Right-hand sides of the semi-discrete tangent system `du/dt = u ∧ Δ_g u`
//! and the curve system `dγ/dt = g D⁺γ ∧ D²γ`, plus the flow state they act on.
//!
//! The same formulas serve the infinite line (a window with constant
//! continuation of `u`, so no torque enters through the ends) and the
//! periodic system.

use crate::error::{BflError, Result};
use crate::lattice::{delta_g, dminus, dplus, Extension, Field, Grid, ScalarField, UnitField, Vec3, VectorField};
use crate::reconstruct::{gamma_integral, origin_index};
use crate::speed::SpeedField;

/// Arc-length tolerance accepted when a curve state is built.
pub const ARC_LENGTH_TOL: f64 = 1e-6;

/// `u ∧ Δ_g u`.
pub fn tangent_rhs(u: &VectorField, g: &ScalarField) -> Result<VectorField> {
    u.cross(&delta_g(g, u)?)
}

/// `g D⁺γ ∧ D²γ`, evaluated as `g u ∧ D⁻u` with `u = D⁺γ`.
pub fn curve_rhs(gamma: &VectorField, g: &ScalarField) -> Result<VectorField> {
    let u = dplus(gamma);
    let w = dminus(&u);
    let mut out = u.cross(&w)?.weighted(g)?;
    // g u ∧ D⁻u vanishes at the window ends; keep the continuation of γ.
    out = out.with_extension(gamma.extension());
    Ok(out)
}

/// Velocity of the curve point at node `i0`: `g_{i0} u_{i0} ∧ D⁻u_{i0}`.
pub fn origin_rate(u: &VectorField, g: &ScalarField, i0: usize) -> Vec3 {
    let h = u.grid().h();
    let ui = u.get(i0);
    let back = (ui - u.at(i0 as isize - 1)) / h;
    ui.cross(&back) * g.get(i0)
}

/// `max |D⁺(u ∧ g D⁻u) − u ∧ D⁺(g D⁻u)|`. The two forms agree algebraically.
pub fn form_equivalence_residual(u: &VectorField, g: &ScalarField) -> Result<f64> {
    let flux = dminus(u).weighted(g)?;
    let divergence_form = dplus(&u.cross(&flux)?);
    let cross_form = u.cross(&dplus(&flux))?;
    Ok(divergence_form.sub(&cross_form)?.max_norm())
}

/// `h Σ g_i |D⁻u_i|²`.
pub fn energy(u: &VectorField, g: &ScalarField) -> Result<f64> {
    let w = dminus(u);
    g.grid().ensure_same(w.grid())?;
    let h = u.grid().h();
    Ok(h * w.values().iter().zip(g.values()).map(|(d, gi)| gi * d.norm_squared()).sum::<f64>())
}

/// Time plus the evolving unknown.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowState {
    /// Tangent field `u`, with the curve point `origin` at node `origin_index(grid)`
    /// carried along so that the curve can be rebuilt at any time.
    Tangent { t: f64, u: UnitField, origin: Vec3 },
    /// Arc-length parametrized curve `γ`.
    Curve { t: f64, gamma: VectorField },
}

impl FlowState {
    pub fn tangent(t: f64, u: UnitField) -> Self {
        Self::tangent_with_origin(t, u, Vec3::zeros())
    }

    pub fn tangent_with_origin(t: f64, u: UnitField, origin: Vec3) -> Self {
        let u = UnitField::with_tolerance(u.into_field().with_extension(Extension::Constant), f64::INFINITY)
            .expect("unit field entries are finite");
        FlowState::Tangent { t, u, origin }
    }

    /// A curve state; `|D⁺γ_i|` must be within `tol` of one. Periodic curves must close.
    pub fn curve_with_tolerance(t: f64, gamma: VectorField, tol: f64) -> Result<Self> {
        if let Some(node) = gamma.first_non_finite() {
            return Err(BflError::NonFinite { node });
        }
        let gamma = gamma.with_extension(Extension::Linear);
        let edges = dplus(&gamma);
        if let Some((node, e)) = edges
            .values()
            .iter()
            .enumerate()
            .find(|(_, e)| (e.norm() - 1.0).abs() > tol)
        {
            return Err(BflError::Precondition(format!(
                "curve is not arc-length parametrized: |D⁺γ| = {} at node {node}",
                e.norm()
            )));
        }
        Ok(FlowState::Curve { t, gamma })
    }

    pub fn curve(t: f64, gamma: VectorField) -> Result<Self> {
        Self::curve_with_tolerance(t, gamma, ARC_LENGTH_TOL)
    }

    pub fn t(&self) -> f64 {
        match self {
            FlowState::Tangent { t, .. } | FlowState::Curve { t, .. } => *t,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            FlowState::Tangent { u, .. } => u.grid(),
            FlowState::Curve { gamma, .. } => gamma.grid(),
        }
    }

    pub fn is_curve(&self) -> bool {
        matches!(self, FlowState::Curve { .. })
    }

    /// `u`, or `D⁺γ` for a curve state.
    pub fn tangent_field(&self) -> VectorField {
        match self {
            FlowState::Tangent { u, .. } => u.as_field().clone(),
            FlowState::Curve { gamma, .. } => dplus(gamma),
        }
    }

    /// `γ`, or `origin + Γ_u` for a tangent state.
    pub fn curve_field(&self) -> VectorField {
        match self {
            FlowState::Tangent { u, origin, .. } => {
                let gamma = gamma_integral(u);
                gamma.map(|p| p + origin).with_extension(Extension::Linear)
            }
            FlowState::Curve { gamma, .. } => gamma.clone(),
        }
    }

    /// Curve point at the origin node.
    pub fn origin(&self) -> Vec3 {
        match self {
            FlowState::Tangent { origin, .. } => *origin,
            FlowState::Curve { gamma, .. } => gamma.get(origin_index(gamma.grid())),
        }
    }

    /// `max | |u_i| − 1 |`, with `u = D⁺γ` in curve mode.
    pub fn unit_drift(&self) -> f64 {
        self.tangent_field().unit_defect()
    }

    /// `g` at the state's time, reading back the curve for coupled speeds.
    pub fn sample_speed(&self, speed: &SpeedField) -> Result<ScalarField> {
        if speed.is_coupled() {
            speed.sample(self.t(), self.grid(), Some(&self.curve_field()))
        } else {
            speed.sample(self.t(), self.grid(), None)
        }
    }

    pub fn energy(&self, speed: &SpeedField) -> Result<f64> {
        energy(&self.tangent_field(), &self.sample_speed(speed)?)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        match self {
            FlowState::Tangent { u, origin, .. } => u
                .first_non_finite()
                .or_else(|| (!origin.iter().all(|c| c.is_finite())).then_some(0)),
            FlowState::Curve { gamma, .. } => gamma.first_non_finite(),
        }
    }
}

/// `u ∧ Δ_g u` for a tangent state, `g` sampled at the state's time.
pub fn rhs_tangent(state: &FlowState, speed: &SpeedField) -> Result<VectorField> {
    match state {
        FlowState::Tangent { u, .. } => tangent_rhs(u, &state.sample_speed(speed)?),
        FlowState::Curve { .. } => Err(BflError::Precondition("rhs_tangent needs a tangent state".into())),
    }
}

/// `g D⁺γ ∧ D²γ` for a curve state; coupled speeds read the current `γ`.
pub fn rhs_coupled(state: &FlowState, speed: &SpeedField) -> Result<VectorField> {
    match state {
        FlowState::Curve { gamma, .. } => curve_rhs(gamma, &state.sample_speed(speed)?),
        FlowState::Tangent { .. } => Err(BflError::Precondition("rhs_coupled needs a curve state".into())),
    }
}

/// Unit-normalizes `f(x)` at every node.
pub fn unit_field_from(grid: Grid, f: impl Fn(f64) -> Vec3) -> Result<UnitField> {
    UnitField::normalize(Field::from_fn(grid, |_, x| f(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::dminus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn ones(grid: Grid) -> ScalarField {
        Field::constant(grid, 1.0)
    }

    fn great_circle(grid: Grid) -> VectorField {
        Field::from_fn(grid, |_, x| Vec3::new(x.cos(), x.sin(), 0.0))
    }

    fn random_unit(grid: Grid, rng: &mut ChaCha8Rng) -> VectorField {
        Field::from_fn(grid, |_, _| {
            Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize()
        })
    }

    #[test]
    fn constant_field_has_zero_rhs() {
        let grid = Grid::window(-1.0, 8, 0.25).unwrap();
        let u = Field::constant(grid, Vec3::new(0.0, 0.6, 0.8));
        assert_eq!(tangent_rhs(&u, &ones(grid)).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn great_circle_is_an_equilibrium() {
        let grid = Grid::periodic(TAU, 64).unwrap();
        let r = tangent_rhs(&great_circle(grid), &ones(grid)).unwrap();
        assert!(r.max_norm() < 1e-12, "{}", r.max_norm());
    }

    #[test]
    fn helix_precesses_about_the_axis() {
        let (alpha, k) = (FRAC_PI_4, 2.0);
        let grid = Grid::periodic(TAU, 64).unwrap();
        let h = grid.h();
        let u = Field::from_fn(grid, |_, x| {
            Vec3::new(alpha.sin() * (k * x).cos(), alpha.sin() * (k * x).sin(), alpha.cos())
        });
        let omega = alpha.cos() * (2.0 - 2.0 * (k * h).cos()) / (h * h);
        let r = tangent_rhs(&u, &ones(grid)).unwrap();
        let e3 = Vec3::z();
        for i in 0..grid.len() {
            // Phase k x − ω t: the helix turns clockwise about e3.
            let expected = -e3.cross(&u.get(i)) * omega;
            assert!((r.get(i) - expected).norm() < 1e-11 * omega.max(1.0));
        }
    }

    #[test]
    fn rhs_is_orthogonal_to_u_and_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = Grid::window(0.0, 40, 0.1).unwrap();
        let u = random_unit(grid, &mut rng);
        let g = Field::from_fn(grid, |_, x| 1.5 + x.sin());
        let r = tangent_rhs(&u, &g).unwrap();
        let lap = delta_g(&g, &u).unwrap();
        for i in 0..grid.len() {
            let scale = r.get(i).norm() * lap.get(i).norm() + 1.0;
            assert!(r.get(i).dot(&u.get(i)).abs() < 1e-13 * scale);
            assert!(r.get(i).dot(&lap.get(i)).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn straight_line_does_not_move() {
        let grid = Grid::window(0.0, 10, 1.0).unwrap();
        let gamma = Field::from_fn(grid, |_, x| Vec3::new(x, 0.0, 0.0));
        let state = FlowState::curve(0.0, gamma).unwrap();
        let r = rhs_coupled(&state, &SpeedField::constant(1.0).unwrap()).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn sampled_unit_circle_moves_along_binormal() {
        let grid = Grid::periodic(TAU, 64).unwrap();
        let h = grid.h();
        let gamma = Field::from_fn(grid, |_, x| Vec3::new(x.cos(), x.sin(), 0.0));
        let r = curve_rhs(&gamma, &ones(grid)).unwrap();
        // |D⁺γ| = 2 sin(h/2)/h, |D²γ| = (2 sin(h/2)/h)², and the angle between them
        // contributes cos(h/2); together (2 sin(h/2)/h)² sin h / h.
        let s = 2.0 * (0.5 * h).sin() / h;
        let expected = s * s * h.sin() / h;
        for p in r.values() {
            assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
            assert!((p.z - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_and_tangent_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for grid in [Grid::periodic(3.0, 30).unwrap(), Grid::window(0.0, 30, 0.1).unwrap()] {
            let u = random_unit(grid, &mut rng);
            let gamma = gamma_integral(&u).with_extension(Extension::Linear);
            let g = Field::from_fn(grid, |_, _| rng.random_range(1.0..3.0));
            let lhs = dplus(&curve_rhs(&gamma, &g).unwrap());
            let edges = dplus(&gamma);
            let rhs = tangent_rhs(&edges, &g).unwrap();
            let scale = rhs.max_norm();
            // The last window edge is a ghost copy of its neighbour.
            let n = if grid.is_periodic() { grid.len() } else { grid.len() - 1 };
            for i in 0..n {
                assert!((lhs.get(i) - rhs.get(i)).norm() <= 1e-13 * scale, "node {i}");
            }
        }
    }

    #[test]
    fn form_equivalence_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for grid in [Grid::periodic(1.0, 50).unwrap(), Grid::window(0.0, 50, 0.02).unwrap()] {
            let u = random_unit(grid, &mut rng);
            let g = Field::from_fn(grid, |_, _| rng.random_range(0.5..2.0));
            let scale = dminus(&u).max_norm() * 2.0 / grid.h();
            assert!(form_equivalence_residual(&u, &g).unwrap() <= 1e-13 * scale);
        }
        let grid = Grid::periodic(TAU, 32).unwrap();
        assert_eq!(form_equivalence_residual(&Field::constant(grid, Vec3::x()), &ones(grid)).unwrap(), 0.0);
        assert!(form_equivalence_residual(&great_circle(grid), &ones(grid)).unwrap() < 1e-13);
    }

    #[test]
    fn tangent_state_rebuilds_curve() {
        let grid = Grid::window(0.0, 8, 0.5).unwrap();
        let u = UnitField::new(Field::constant(grid, Vec3::x())).unwrap();
        let state = FlowState::tangent_with_origin(0.0, u, Vec3::new(0.0, 1.0, 0.0));
        let gamma = state.curve_field();
        assert_eq!(gamma.get(4), Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(gamma.get(0), Vec3::new(-2.0, 1.0, 0.0));
        assert_eq!(state.origin(), Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn curve_state_requires_arc_length() {
        let grid = Grid::window(0.0, 8, 0.5).unwrap();
        let gamma = Field::from_fn(grid, |_, x| Vec3::new(2.0 * x, 0.0, 0.0));
        assert!(FlowState::curve(0.0, gamma).is_err());
    }

    #[test]
    fn energy_of_great_circle() {
        let grid = Grid::periodic(TAU, 40).unwrap();
        let h = grid.h();
        let e = energy(&great_circle(grid), &Field::constant(grid, 2.0)).unwrap();
        let chord = 2.0 * (0.5 * h).sin() / h;
        assert!((e - 2.0 * TAU * chord * chord).abs() < 1e-12);
    }
}
