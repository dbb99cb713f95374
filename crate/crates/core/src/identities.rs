//! Randomized check of the exact lattice identities and norm inequalities.
//!
//! Each identity is evaluated on random fields over both topologies and
//! spacings `h ∈ {1, 0.1, 0.01}`; residuals are relative to the size of the
//! terms involved so that fields of magnitude `1e6` pass with the same threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::form_equivalence_residual;
use crate::error::Result;
use crate::interp::{l2_norm_p, pq_gap, pq_gap_quadrature};
use crate::lattice::{
    delta_g, delta_g_shifted, dminus, dplus, inner_h, norm_h, norm_hneg1, Extension, Field, Grid, ScalarField, Vec3,
    VectorField,
};

pub const DEFAULT_TRIALS: usize = 1000;
pub const THRESHOLD: f64 = 1e-11;
const SPACINGS: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub name: String,
    pub trials: usize,
    /// Largest relative residual (for inequalities: relative excess over the bound, or 0).
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub results: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

struct Trial {
    grid: Grid,
    scale: f64,
}

fn random_grid(rng: &mut ChaCha8Rng, k: usize) -> Grid {
    let h = SPACINGS[k % SPACINGS.len()];
    let n = rng.random_range(8..=64);
    if k.is_multiple_of(2) {
        Grid::periodic(h * n as f64, n).expect("valid periodic grid")
    } else {
        Grid::window(rng.random_range(-1.0..1.0), n, h).expect("valid window")
    }
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Noise, a smooth random mode, or a mixture, times `scale`.
fn random_field(rng: &mut ChaCha8Rng, grid: &Grid, scale: f64) -> VectorField {
    let kind = rng.random_range(0..3);
    let (a, b, p) = (random_vec(rng), random_vec(rng), rng.random_range(0.0..6.3));
    let k = rng.random_range(1..4) as f64 * std::f64::consts::TAU / grid.extent();
    let noise: Vec<Vec3> = (0..grid.len()).map(|_| random_vec(rng)).collect();
    Field::from_fn(*grid, |i, x| {
        let smooth = a * (k * x + p).cos() + b * (k * x).sin();
        let v = match kind {
            0 => noise[i],
            1 => smooth,
            _ => smooth + noise[i] * 0.1,
        };
        v * scale
    })
}

fn random_unit_field(rng: &mut ChaCha8Rng, grid: &Grid) -> VectorField {
    let f = random_field(rng, grid, 1.0);
    f.map(|v| if v.norm() > 1e-3 { v.normalize() } else { Vec3::z() })
}

fn random_speed(rng: &mut ChaCha8Rng, grid: &Grid) -> ScalarField {
    let smooth = rng.random_bool(0.5);
    let (a, p) = (rng.random_range(0.0..0.9), rng.random_range(0.0..6.3));
    let k = std::f64::consts::TAU / grid.extent();
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.1..10.0)).collect();
    Field::from_fn(*grid, |i, x| if smooth { 1.0 + a * (k * x + p).sin() } else { noise[i] })
}

fn rel(residual: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        residual.abs()
    } else {
        residual.abs() / scale
    }
}

/// `(v, D⁺u)_h + (u, D⁻v)_h = v_M·u_{M+1} − u_0·v_{−1}` (ghost values; zero when periodic).
fn ipp(u: &VectorField, v: &VectorField) -> Result<f64> {
    let lhs = inner_h(v, &dplus(u))? + inner_h(u, &dminus(v))?;
    let n = u.len() as isize;
    let boundary = if u.grid().is_periodic() {
        0.0
    } else {
        v.at(n - 1).dot(&u.at(n)) - u.at(0).dot(&v.at(-1))
    };
    let h = u.grid().h();
    let scale = h * v.values().iter().zip(dplus(u).values()).map(|(a, b)| a.norm() * b.norm()).sum::<f64>()
        + h * u.values().iter().zip(dminus(v).values()).map(|(a, b)| a.norm() * b.norm()).sum::<f64>()
        + v.at(n - 1).norm() * u.at(n).norm()
        + u.at(0).norm() * v.at(-1).norm();
    Ok(rel(lhs - boundary, scale))
}

/// `D⁺(u·v) = u·D⁺v + D⁺u·τ⁺v` and `D⁻(u·v) = u·D⁻v + D⁻u·τ⁻v`, worst node.
fn product_rules(u: &VectorField, v: &VectorField) -> Result<f64> {
    let p = u.dot(v)?;
    let (dpu, dpv, dmu, dmv) = (dplus(u), dplus(v), dminus(u), dminus(v));
    let (lp, lm) = (dplus(&p), dminus(&p));
    let mut worst = 0.0_f64;
    for i in 0..u.len() {
        let j = i as isize;
        let rp = u.get(i).dot(&dpv.get(i)) + dpu.get(i).dot(&v.at(j + 1));
        let sp = u.get(i).norm() * dpv.get(i).norm() + dpu.get(i).norm() * v.at(j + 1).norm();
        let rm = u.get(i).dot(&dmv.get(i)) + dmu.get(i).dot(&v.at(j - 1));
        let sm = u.get(i).norm() * dmv.get(i).norm() + dmu.get(i).norm() * v.at(j - 1).norm();
        worst = worst.max(rel(lp.get(i) - rp, sp)).max(rel(lm.get(i) - rm, sm));
    }
    Ok(worst)
}

/// `u·D±u = ∓(h/2)|D±u|²` for unit `u`.
fn unit_difference(u: &VectorField) -> f64 {
    let h = u.grid().h();
    let (dp, dm) = (dplus(u), dminus(u));
    let mut worst = 0.0_f64;
    for i in 0..u.len() {
        let (a, b) = (dp.get(i), dm.get(i));
        let ra = u.get(i).dot(&a) + 0.5 * h * a.norm_squared();
        let rb = u.get(i).dot(&b) - 0.5 * h * b.norm_squared();
        // Rounding of |u_i|² ≈ 1 enters as ε/h.
        let sa = a.norm() + 0.5 * h * a.norm_squared() + 1.0 / h;
        let sb = b.norm() + 0.5 * h * b.norm_squared() + 1.0 / h;
        worst = worst.max(rel(ra, sa)).max(rel(rb, sb));
    }
    worst
}

/// `u·Δ_g u = −½(g|D⁻u|² + τ⁺g|D⁺u|²)` for unit `u`.
fn unit_laplacian(u: &VectorField, g: &ScalarField) -> Result<f64> {
    let h = u.grid().h();
    let lap = delta_g(g, u)?;
    let (dp, dm) = (dplus(u), dminus(u));
    let mut worst = 0.0_f64;
    for i in 0..u.len() {
        let gp = g.at(i as isize + 1);
        let expected = -0.5 * (g.get(i) * dm.get(i).norm_squared() + gp * dp.get(i).norm_squared());
        let scale = lap.get(i).norm() + expected.abs() + (g.get(i) + gp) / (h * h);
        worst = worst.max(rel(u.get(i).dot(&lap.get(i)) - expected, scale));
    }
    Ok(worst)
}

fn factorization(u: &VectorField, g: &ScalarField) -> Result<f64> {
    let a = delta_g(g, u)?;
    let b = delta_g_shifted(g, u)?;
    let scale = g.max() * u.max_norm() * 4.0 / (u.grid().h() * u.grid().h());
    Ok(rel(a.sub(&b)?.max_norm(), scale))
}

fn form_equivalence(u: &VectorField, g: &ScalarField) -> Result<f64> {
    let h = u.grid().h();
    let scale = g.max() * dminus(u).max_norm() * 2.0 / h;
    Ok(rel(form_equivalence_residual(u, g)?, scale))
}

fn pq_identity(v: &VectorField) -> Result<f64> {
    let exact = pq_gap(v);
    // Simpson is exact on the quadratic |P_h v − Q_h v|² once each cell is split in two.
    let quad = pq_gap_quadrature(v, 2)?;
    Ok(rel(exact * exact - quad * quad, exact * exact + v.max_norm().powi(2) * v.grid().extent() * 1e-3))
}

/// `c_lo |v|_h ≤ ‖P_h v‖ ≤ |v|_h`, with `c_lo = 1/√3` (periodic) or `1/√6` (window).
fn l2_sandwich(v: &VectorField) -> f64 {
    let lo = if v.grid().is_periodic() { 1.0 / 3f64.sqrt() } else { 1.0 / 6f64.sqrt() };
    let (p, n) = (l2_norm_p(v), norm_h(v));
    if n == 0.0 {
        return 0.0;
    }
    let r = p / n;
    ((lo - r) / lo).max(r - 1.0).max(0.0)
}

/// `|D⁺v|_h ≤ (2/h)|v|_h`.
fn forward_difference_bound(v: &VectorField) -> f64 {
    let bound = 2.0 / v.grid().h() * norm_h(v);
    if bound == 0.0 {
        return 0.0;
    }
    ((norm_h(&dplus(v)) - bound) / bound).max(0.0)
}

/// `|v|_{H⁻¹_h} ≤ |v|_h`.
fn dual_below_l2(v: &VectorField) -> Result<f64> {
    let n = norm_h(v);
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok(((norm_hneg1(v)? - n) / n).max(0.0))
}

/// The worked example on `h = 1`: `u = (…,0,2,0,…)`, `v = (…,0,1,0,…)`,
/// returning `(Σ v·D⁺u, −Σ u·D⁻v)`, both equal to −2.
pub fn worked_example() -> (f64, f64) {
    let grid = Grid::periodic(9.0, 9).expect("valid grid");
    let u = Field::from_fn(grid, |i, _| if i == 4 { 2.0 } else { 0.0 });
    let v = Field::from_fn(grid, |i, _| if i == 4 { 1.0 } else { 0.0 });
    let a = inner_h(&v, &dplus(&u)).expect("same grid");
    let b = -inner_h(&u, &dminus(&v)).expect("same grid");
    (a, b)
}

type Check = Box<dyn Fn(&mut ChaCha8Rng, &Trial) -> Result<f64>>;

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        (
            "integration-by-parts",
            Box::new(|rng, t| {
                let u = random_field(rng, &t.grid, t.scale);
                let v = random_field(rng, &t.grid, t.scale);
                ipp(&u, &v)
            }),
        ),
        (
            "product-rules",
            Box::new(|rng, t| {
                let u = random_field(rng, &t.grid, t.scale);
                let v = random_field(rng, &t.grid, t.scale);
                product_rules(&u, &v)
            }),
        ),
        ("unit-difference", Box::new(|rng, t| Ok(unit_difference(&random_unit_field(rng, &t.grid))))),
        (
            "unit-laplacian",
            Box::new(|rng, t| {
                let g = random_speed(rng, &t.grid);
                unit_laplacian(&random_unit_field(rng, &t.grid), &g)
            }),
        ),
        (
            "laplacian-factorization",
            Box::new(|rng, t| {
                let g = random_speed(rng, &t.grid);
                factorization(&random_field(rng, &t.grid, t.scale), &g)
            }),
        ),
        (
            "rhs-form-equivalence",
            Box::new(|rng, t| {
                let g = random_speed(rng, &t.grid);
                form_equivalence(&random_unit_field(rng, &t.grid), &g)
            }),
        ),
        ("pq-gap", Box::new(|rng, t| pq_identity(&random_field(rng, &t.grid, t.scale)))),
        ("l2-sandwich", Box::new(|rng, t| Ok(l2_sandwich(&random_field(rng, &t.grid, t.scale))))),
        (
            "forward-difference-bound",
            Box::new(|rng, t| Ok(forward_difference_bound(&random_field(rng, &t.grid, t.scale)))),
        ),
        (
            "dual-below-l2",
            Box::new(|rng, t| {
                let v = random_field(rng, &t.grid, t.scale).with_extension(Extension::Constant);
                dual_below_l2(&v)
            }),
        ),
    ]
}

/// Runs every identity `trials` times from `seed`.
pub fn run_identities(seed: u64, trials: usize) -> Result<IdentityReport> {
    let mut results = Vec::new();
    for (k, (name, check)) in checks().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64 * 0x9E37_79B9));
        let mut worst = 0.0_f64;
        for trial in 0..trials {
            let grid = random_grid(&mut rng, trial);
            // Every fourth trial uses fields of magnitude 1e6.
            let scale = if trial % 4 == 3 { 1e6 } else { 1.0 };
            worst = worst.max(check(&mut rng, &Trial { grid, scale })?);
        }
        results.push(IdentityResult {
            name: name.to_string(),
            trials,
            worst,
            threshold: THRESHOLD,
            pass: worst <= THRESHOLD,
        });
    }
    let (a, b) = worked_example();
    let worked = (a - b).abs();
    results.push(IdentityResult {
        name: "worked-example".into(),
        trials: 1,
        worst: worked,
        threshold: THRESHOLD,
        pass: worked <= THRESHOLD && a == -2.0,
    });
    Ok(IdentityReport { seed, results })
}
