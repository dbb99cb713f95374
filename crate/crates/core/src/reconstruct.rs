//! Rebuilding the filament `γ = Γ_u + c_u` from a tangent trajectory.
//!
//! `Γ_u` is the left Riemann sum of `u` from the origin node, which is the
//! exact integral of `Q_h u` and makes `D⁺Γ_u = u` an identity. The base-point
//! drift `c_u` combines the change of `Γ_u` at an anchor node with the time
//! integral of the anchor's velocity `g u ∧ D⁻u`.

use crate::dynamics::{origin_rate, FlowState, ARC_LENGTH_TOL};
use crate::error::{BflError, Result};
use crate::lattice::{dplus, Extension, Field, Grid, ScalarField, Vec3, VectorField};
use crate::speed::SpeedField;

/// Node where `Γ_u` vanishes: node 0 on a periodic grid, the middle node of a window.
pub fn origin_index(grid: &Grid) -> usize {
    if grid.is_periodic() {
        0
    } else {
        (grid.len() - 1) / 2
    }
}

/// `Γ_i = h Σ_{j=i0}^{i-1} u_j` (and minus the mirrored sum left of `i0`).
pub fn gamma_integral_at(u: &VectorField, i0: usize) -> VectorField {
    let n = u.len();
    let h = u.grid().h();
    let mut out = vec![Vec3::zeros(); n];
    for i in i0 + 1..n {
        out[i] = out[i - 1] + u.get(i - 1) * h;
    }
    for i in (0..i0).rev() {
        out[i] = out[i + 1] - u.get(i) * h;
    }
    Field::new(*u.grid(), out)
        .expect("partial sums of finite values are finite")
        .with_extension(Extension::Linear)
}

/// [`gamma_integral_at`] from the grid's default origin node.
pub fn gamma_integral(u: &VectorField) -> VectorField {
    gamma_integral_at(u, origin_index(u.grid()))
}

/// Snapshots `(t_k, u(t_k), g(t_k))` on one grid.
#[derive(Clone, Debug)]
pub struct TangentTrajectory {
    times: Vec<f64>,
    fields: Vec<VectorField>,
    speeds: Vec<ScalarField>,
    /// Curve point at the origin node at the first time.
    base: Vec3,
}

impl TangentTrajectory {
    pub fn new(times: Vec<f64>, fields: Vec<VectorField>, speeds: Vec<ScalarField>, base: Vec3) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() || times.len() != speeds.len() {
            return Err(BflError::Precondition(format!(
                "trajectory needs matching non-empty times/fields/speeds ({}, {}, {})",
                times.len(),
                fields.len(),
                speeds.len()
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(BflError::Precondition(format!("snapshot times not increasing at index {}", k + 1)));
        }
        let grid = *fields[0].grid();
        for (f, g) in fields.iter().zip(&speeds) {
            grid.ensure_same(f.grid())?;
            grid.ensure_same(g.grid())?;
        }
        Ok(Self {
            times,
            fields,
            speeds,
            base,
        })
    }

    /// From stored flow states, re-sampling `g` exactly as the stepper did.
    pub fn from_states(states: &[FlowState], speed: &SpeedField) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| BflError::Precondition("empty trajectory".into()))?;
        let mut times = Vec::with_capacity(states.len());
        let mut fields = Vec::with_capacity(states.len());
        let mut speeds = Vec::with_capacity(states.len());
        for s in states {
            times.push(s.t());
            fields.push(s.tangent_field());
            speeds.push(s.sample_speed(speed)?);
        }
        Self::new(times, fields, speeds, first.origin())
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Reconstructed,
    DirectCoupled,
}

#[derive(Clone, Debug)]
pub struct CurveTrajectory {
    pub times: Vec<f64>,
    pub curves: Vec<VectorField>,
    pub provenance: Provenance,
}

impl CurveTrajectory {
    /// Curves stored by a direct run of the curve system.
    pub fn from_states(states: &[FlowState], tol: f64) -> Result<Self> {
        let mut times = Vec::new();
        let mut curves = Vec::new();
        for s in states {
            if !s.is_curve() {
                return Err(BflError::Precondition("direct curve trajectory needs curve states".into()));
            }
            times.push(s.t());
            curves.push(s.curve_field());
        }
        let traj = Self {
            times,
            curves,
            provenance: Provenance::DirectCoupled,
        };
        let drift = traj.arc_length_drift();
        if drift > tol {
            return Err(BflError::Precondition(format!("arc-length drift {drift:e} exceeds {tol:e}")));
        }
        Ok(traj)
    }

    /// `max_k max_i | |D⁺γ_i(t_k)| − 1 |`.
    pub fn arc_length_drift(&self) -> f64 {
        self.curves.iter().map(|c| dplus(c).unit_defect()).fold(0.0, f64::max)
    }
}

fn check_anchor(grid: &Grid, anchor: usize) -> Result<()> {
    if anchor >= grid.len() {
        return Err(BflError::Precondition(format!(
            "anchor node {anchor} outside grid of {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

/// `c(t_k) = Γ_a(t_0) − Γ_a(t_k) + ∫_{t_0}^{t_k} g_a u_a ∧ D⁻u_a dτ`, trapezoid in time.
pub fn basepoint_drift(traj: &TangentTrajectory, anchor: usize) -> Result<Vec<Vec3>> {
    let grid = *traj.grid();
    check_anchor(&grid, anchor)?;
    let i0 = origin_index(&grid);
    let h = grid.h();
    // Γ_a relative to the origin node as a signed partial sum.
    let gamma_at = |u: &VectorField| -> Vec3 {
        if anchor >= i0 {
            (i0..anchor).map(|j| u.get(j)).sum::<Vec3>() * h
        } else {
            -(anchor..i0).map(|j| u.get(j)).sum::<Vec3>() * h
        }
    };
    let gamma0 = gamma_at(&traj.fields[0]);
    let rates: Vec<Vec3> = traj
        .fields
        .iter()
        .zip(&traj.speeds)
        .map(|(u, g)| origin_rate(u, g, anchor))
        .collect();
    let mut integral = Vec3::zeros();
    let mut out = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        if k > 0 {
            integral += (rates[k - 1] + rates[k]) * (0.5 * (traj.times[k] - traj.times[k - 1]));
        }
        let c = if k == 0 { Vec3::zeros() } else { gamma0 - gamma_at(&traj.fields[k]) + integral };
        out.push(c);
    }
    Ok(out)
}

/// `γ(t_k) = base + Γ_u(t_k) + c(t_k)`.
pub fn reconstruct_curve(traj: &TangentTrajectory, anchor: usize) -> Result<CurveTrajectory> {
    let drift = basepoint_drift(traj, anchor)?;
    let curves = traj
        .fields
        .iter()
        .zip(&drift)
        .map(|(u, c)| {
            let shift = traj.base + c;
            gamma_integral(u).map(|p| p + shift).with_extension(Extension::Linear)
        })
        .collect();
    Ok(CurveTrajectory {
        times: traj.times.clone(),
        curves,
        provenance: Provenance::Reconstructed,
    })
}

/// `max_{a,b} max_k |c_a(t_k) − c_b(t_k)|`.
pub fn anchor_dispersion(traj: &TangentTrajectory, anchors: &[usize]) -> Result<f64> {
    if anchors.len() < 2 {
        return Err(BflError::Precondition("anchor dispersion needs at least two anchors".into()));
    }
    let drifts: Vec<Vec<Vec3>> = anchors.iter().map(|&a| basepoint_drift(traj, a)).collect::<Result<_>>()?;
    let mut worst = 0.0_f64;
    for a in 0..drifts.len() {
        for b in a + 1..drifts.len() {
            for (ca, cb) in drifts[a].iter().zip(&drifts[b]) {
                worst = worst.max((ca - cb).norm());
            }
        }
    }
    Ok(worst)
}

/// Default tolerance for [`CurveTrajectory::from_states`].
pub const CURVE_TOL: f64 = ARC_LENGTH_TOL;
