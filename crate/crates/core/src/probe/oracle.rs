//! Exact semi-discrete solutions and reference initial data.

use std::f64::consts::TAU;

use crate::error::{BflError, Result};
use crate::lattice::{Field, Grid, UnitField, Vec3, VectorField};
use crate::reconstruct::gamma_integral;

/// Wave number of `k` windings: `2πk/l` on a periodic grid, `k` on a window.
pub fn wave_number(grid: &Grid, k: f64) -> f64 {
    if grid.is_periodic() {
        TAU * k / grid.extent()
    } else {
        k
    }
}

/// `u_i = (cos q x_i, sin q x_i, 0)`, an exact equilibrium for constant `g`.
pub fn great_circle(grid: &Grid, k: f64) -> UnitField {
    let q = wave_number(grid, k);
    UnitField::new(Field::from_fn(*grid, |_, x| Vec3::new((q * x).cos(), (q * x).sin(), 0.0)))
        .expect("circle points are unit vectors")
}

/// Precessing helix with cone angle `alpha` and wave number `q`, for `g ≡ 1`.
///
/// The lattice solution is `(sin α cos(q x − ω_h t), sin α sin(q x − ω_h t), cos α)`
/// with `ω_h = cos α (2 − 2 cos q h)/h²`; the continuum one has `ω = q² cos α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Helix {
    pub alpha: f64,
    pub q: f64,
    pub omega_h: f64,
    pub omega: f64,
}

impl Helix {
    pub fn new(grid: &Grid, alpha: f64, k: f64) -> Self {
        let q = wave_number(grid, k);
        let h = grid.h();
        Self {
            alpha,
            q,
            omega_h: alpha.cos() * (2.0 - 2.0 * (q * h).cos()) / (h * h),
            omega: q * q * alpha.cos(),
        }
    }

    fn field(&self, grid: &Grid, omega: f64, t: f64) -> UnitField {
        let (s, c) = self.alpha.sin_cos();
        let u = Field::from_fn(*grid, |_, x| {
            let ph = self.q * x - omega * t;
            Vec3::new(s * ph.cos(), s * ph.sin(), c)
        });
        UnitField::with_tolerance(u, 1e-14).expect("helix points are unit vectors")
    }

    pub fn initial(&self, grid: &Grid) -> UnitField {
        self.field(grid, 0.0, 0.0)
    }

    /// Lattice solution at time `t`.
    pub fn at(&self, grid: &Grid, t: f64) -> UnitField {
        self.field(grid, self.omega_h, t)
    }

    /// Continuum solution sampled at the nodes.
    pub fn continuum_at(&self, grid: &Grid, t: f64) -> UnitField {
        self.field(grid, self.omega, t)
    }
}

type Frame = [Vec3; 3];

fn frame_rhs(kappa: f64, tau: f64, f: &Frame) -> Frame {
    let [t, n, b] = *f;
    [n * kappa, -t * kappa + b * tau, -n * tau]
}

/// One RK4 step of the Frenet–Serret system in arc length.
fn frenet_step(f: &Frame, s: f64, ds: f64, kappa: &impl Fn(f64) -> f64, tau: f64) -> Frame {
    let add = |a: &Frame, k: &Frame, w: f64| [a[0] + k[0] * w, a[1] + k[1] * w, a[2] + k[2] * w];
    let k1 = frame_rhs(kappa(s), tau, f);
    let k2 = frame_rhs(kappa(s + 0.5 * ds), tau, &add(f, &k1, 0.5 * ds));
    let k3 = frame_rhs(kappa(s + 0.5 * ds), tau, &add(f, &k2, 0.5 * ds));
    let k4 = frame_rhs(kappa(s + ds), tau, &add(f, &k3, ds));
    let mut out = *f;
    for j in 0..3 {
        out[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (ds / 6.0);
    }
    out
}

/// Unit tangents of the arc-length curve with curvature `kappa(x)` and
/// constant torsion `tau`, frame `(e1, e2, e3)` at `x = 0`, sampled at the edge
/// midpoints `x_i + h/2` so that `D⁺γ_i` is the tangent over `[x_i, x_{i+1}]`.
pub fn frenet_tangent(grid: &Grid, kappa: impl Fn(f64) -> f64, tau: f64) -> Result<UnitField> {
    let h = grid.h();
    let max_ds = h / 10.0;
    let targets: Vec<f64> = (0..grid.len()).map(|i| grid.x(i) + 0.5 * h).collect();
    let mut tangents = vec![Vec3::zeros(); targets.len()];
    let start: Frame = [Vec3::x(), Vec3::y(), Vec3::z()];
    // March outwards from 0 in both directions, visiting targets in order of distance.
    for forward in [true, false] {
        let mut order: Vec<usize> = (0..targets.len())
            .filter(|&i| if forward { targets[i] >= 0.0 } else { targets[i] < 0.0 })
            .collect();
        order.sort_by(|&a, &b| targets[a].abs().total_cmp(&targets[b].abs()));
        let (mut s, mut frame) = (0.0, start);
        for i in order {
            let dist = targets[i] - s;
            let steps = (dist.abs() / max_ds).ceil().max(1.0) as usize;
            let ds = dist / steps as f64;
            for _ in 0..steps {
                frame = frenet_step(&frame, s, ds, &kappa, tau);
                s += ds;
            }
            s = targets[i];
            tangents[i] = frame[0];
        }
    }
    UnitField::normalize(Field::new(*grid, tangents)?)
}

/// Hasimoto soliton: curvature `2ν sech(ν x)`, torsion `τ₀`.
pub fn soliton_tangent(grid: &Grid, nu: f64, tau0: f64) -> Result<UnitField> {
    if grid.is_periodic() {
        return Err(BflError::Precondition("the soliton lives on a window grid".into()));
    }
    if !(nu > 0.0) {
        return Err(BflError::Precondition(format!("soliton needs ν > 0, got {nu}")));
    }
    let edge = (-grid.start()).min(grid.x(grid.len() - 1));
    if !(edge > 0.0) || 1.0 / (nu * edge).cosh() >= 1e-8 {
        return Err(BflError::Precondition(format!(
            "window too narrow for ν = {nu}: sech(ν·{edge}) must be below 1e-8"
        )));
    }
    frenet_tangent(grid, |x| 2.0 * nu / (nu * x).cosh(), tau0)
}

/// The soliton filament, `γ = Γ_u` with the origin node at the window centre.
pub fn soliton_curve(grid: &Grid, nu: f64, tau0: f64) -> Result<VectorField> {
    Ok(gamma_integral(soliton_tangent(grid, nu, tau0)?.as_field()))
}

/// Regular `N`-gon with unit edges per unit parameter, centred at `centre`,
/// approximating the unit circle: `γ_i = centre + R (cos x_i, sin x_i, 0)`, `R = h / (2 sin(h/2))`.
pub fn unit_edge_circle(grid: &Grid, centre: Vec3) -> Result<VectorField> {
    if !grid.is_periodic() || (grid.extent() - TAU).abs() > 1e-12 {
        return Err(BflError::Precondition("the circle needs a periodic grid of period 2π".into()));
    }
    let h = grid.h();
    let r = h / (2.0 * (0.5 * h).sin());
    Field::new(*grid, (0..grid.len()).map(|i| centre + Vec3::new(grid.x(i).cos(), grid.x(i).sin(), 0.0) * r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::dplus;
    use crate::probe::{frenet, peak_location};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn helix_at_right_angle_is_the_great_circle() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let hx = Helix::new(&grid, FRAC_PI_2, 1.0);
        assert!(hx.omega_h.abs() < 1e-15);
        let diff = hx.at(&grid, 3.0).sub(&great_circle(&grid, 1.0)).unwrap();
        assert!(diff.max_norm() < 1e-15);
    }

    #[test]
    fn helix_frequency() {
        let grid = Grid::periodic(TAU, 64).unwrap();
        let h = grid.h();
        let hx = Helix::new(&grid, FRAC_PI_4, 2.0);
        let expected = 0.5f64.sqrt() * (2.0 - 2.0 * (2.0 * h).cos()) / (h * h);
        assert!((hx.omega_h - expected).abs() < 1e-12);
        assert!((hx.omega - 4.0 * 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frenet_march_reproduces_a_circle() {
        let grid = Grid::window(-3.0, 60, 0.1).unwrap();
        let u = frenet_tangent(&grid, |_| 1.0, 0.0).unwrap();
        for i in 0..grid.len() {
            let s = grid.x(i) + 0.05;
            assert!((u.get(i) - Vec3::new(s.cos(), s.sin(), 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn soliton_curvature_peak() {
        let grid = Grid::window(-20.0, 512, 40.0 / 512.0).unwrap();
        let gm = soliton_curve(&grid, 1.0, 0.5).unwrap();
        assert!(dplus(&gm).unit_defect() < 1e-8);
        let fd = frenet(&gm);
        let peak = fd.curvature.max();
        assert!((peak - 2.0).abs() < 0.01, "{peak}");
        assert!(peak_location(&fd.curvature).unwrap().abs() < 1e-3);
        let mid = grid.len() / 2;
        assert!((fd.torsion_at(mid).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn soliton_needs_a_wide_window() {
        let grid = Grid::window(-5.0, 100, 0.1).unwrap();
        assert!(soliton_curve(&grid, 1.0, 0.5).is_err());
        assert!(soliton_curve(&Grid::periodic(TAU, 64).unwrap(), 1.0, 0.5).is_err());
    }

    #[test]
    fn unit_edge_circle_is_arc_length() {
        let grid = Grid::periodic(TAU, 40).unwrap();
        let c = unit_edge_circle(&grid, Vec3::new(0.5, 0.0, 0.0)).unwrap();
        assert!(dplus(&c).unit_defect() < 1e-14);
    }
}
