use crate::error::{BflError, Result};
use crate::lattice::{d2, d3, dplus, Extension, Field, ScalarField, VectorField};

/// Curvatures below this leave the torsion undefined.
pub const KAPPA_MIN: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FrenetData {
    /// `κ_i = |D²γ_i|`.
    pub curvature: ScalarField,
    /// `det(D⁺γ, D²γ, D³γ)_i / κ_i²`; zero where undefined.
    pub torsion: ScalarField,
    /// `false` where `κ_i < KAPPA_MIN`.
    pub defined: Vec<bool>,
    /// Set when the input is not close to arc-length parametrized.
    pub warning: Option<String>,
}

impl FrenetData {
    /// Torsion at node `i`, if defined.
    pub fn torsion_at(&self, i: usize) -> Option<f64> {
        self.defined[i].then(|| self.torsion.get(i))
    }
}

pub fn frenet(gamma: &VectorField) -> FrenetData {
    let gamma = if gamma.grid().is_periodic() {
        gamma.clone()
    } else {
        gamma.clone().with_extension(Extension::Linear)
    };
    let t = dplus(&gamma);
    let n = d2(&gamma);
    let b = d3(&gamma);
    let drift = t.unit_defect();
    let warning = (drift > 1e-3).then(|| format!("curve is not arc-length parametrized (|D⁺γ| off by {drift:.3e})"));
    let curvature = n.map(|v| v.norm());
    let mut defined = Vec::with_capacity(gamma.len());
    let torsion = Field::from_fn(*gamma.grid(), |i, _| {
        let k = curvature.get(i);
        let ok = k >= KAPPA_MIN;
        defined.push(ok);
        if ok {
            t.get(i).dot(&n.get(i).cross(&b.get(i))) / (k * k)
        } else {
            0.0
        }
    });
    FrenetData {
        curvature,
        torsion,
        defined,
        warning,
    }
}

/// Location of the maximum of `f` refined by a parabola through the top node and its neighbours.
pub fn peak_location(f: &ScalarField) -> Result<f64> {
    let grid = f.grid();
    let (imax, _) = f
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let n = f.len();
    if !grid.is_periodic() && (imax == 0 || imax == n - 1) {
        return Err(BflError::Precondition("peak sits on the window boundary".into()));
    }
    let (a, b, c) = (f.at(imax as isize - 1), f.get(imax), f.at(imax as isize + 1));
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(grid.x(imax) + shift * grid.h())
}
