//! The speed coefficient `g` of the flow, its declared bounds, and sampling onto grids.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BflError, Result};
use crate::lattice::{Field, Grid, ScalarField, Vec3, VectorField};

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type CoupledFn = Arc<dyn Fn(f64, f64, &Vec3) -> f64 + Send + Sync>;

/// The functional form of `g`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    SpaceOnly(SpaceFn),
    /// `g(t, x)`.
    SpaceTime(SpaceTimeFn),
    /// `g(t, x, γ)`; reads back the curve position.
    Coupled(CoupledFn),
}

/// Caller-declared bounds: `alpha ≤ g ≤ beta`, `|∂ₜg| ≤ beta_t`, and
/// `beta_x` bounding the first derivatives in `x` (and `γ` for coupled speeds).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedBounds {
    pub alpha: f64,
    pub beta: f64,
    pub beta_t: f64,
    pub beta_x: f64,
}

impl SpeedBounds {
    pub fn new(alpha: f64, beta: f64, beta_t: f64, beta_x: f64) -> Result<Self> {
        let b = Self {
            alpha,
            beta,
            beta_t,
            beta_x,
        };
        b.check()?;
        Ok(b)
    }

    fn check(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.beta_t, self.beta_x].iter().all(|v| v.is_finite());
        if !finite || !(self.alpha > 0.0) || self.beta < self.alpha || self.beta_t < 0.0 || self.beta_x < 0.0 {
            return Err(BflError::Precondition(format!("inconsistent speed bounds {self:?}")));
        }
        Ok(())
    }
}

/// Where `g` is sampled relative to the node `x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingOffset {
    /// `g_i = g(x_i)`.
    #[default]
    Node,
    /// `g_i = g(x_i - h/2)`, the midpoint of the cell that carries the flux `g_i D⁻u_i`.
    #[serde(rename = "mid")]
    Midpoint,
}

impl SamplingOffset {
    pub fn shift(self, h: f64) -> f64 {
        match self {
            SamplingOffset::Node => 0.0,
            SamplingOffset::Midpoint => -0.5 * h,
        }
    }
}

#[derive(Clone)]
pub struct SpeedField {
    profile: Profile,
    bounds: SpeedBounds,
    offset: SamplingOffset,
    label: String,
}

impl fmt::Debug for SpeedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpeedField")
            .field("label", &self.label)
            .field("bounds", &self.bounds)
            .field("offset", &self.offset)
            .finish()
    }
}

/// Maximum of `2 r sech²(r²)` over `r ≥ 0`, the `γ`-gradient bound of `tanh(|γ|²)`.
fn tanh_gradient_bound() -> f64 {
    (0..=40_000)
        .map(|k| {
            let r = k as f64 * 1e-4;
            let s = 1.0 / (r * r).cosh();
            2.0 * r * s * s
        })
        .fold(0.0, f64::max)
        * (1.0 + 1e-6)
}

impl SpeedField {
    pub fn new(profile: Profile, bounds: SpeedBounds, label: impl Into<String>) -> Result<Self> {
        bounds.check()?;
        Ok(Self {
            profile,
            bounds,
            offset: SamplingOffset::Node,
            label: label.into(),
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(BflError::Precondition(format!("constant speed must be positive, got {c}")));
        }
        Self::new(Profile::Constant(c), SpeedBounds::new(c, c, 0.0, 0.0)?, format!("const:{c}"))
    }

    /// `a + b sin(k x)`.
    pub fn sine(a: f64, b: f64, k: f64) -> Result<Self> {
        let bounds = SpeedBounds::new(a - b.abs(), a + b.abs(), 0.0, (b * k).abs())?;
        Self::new(
            Profile::SpaceOnly(Arc::new(move |x| a + b * (k * x).sin())),
            bounds,
            format!("sin:{a},{b},{k}"),
        )
    }

    /// `a + b sin(k x) cos(ω t)`.
    pub fn sine_time(a: f64, b: f64, k: f64, omega: f64) -> Result<Self> {
        let bounds = SpeedBounds::new(a - b.abs(), a + b.abs(), (b * omega).abs(), (b * k).abs())?;
        Self::new(
            Profile::SpaceTime(Arc::new(move |t, x| a + b * (k * x).sin() * (omega * t).cos())),
            bounds,
            format!("sintime:{a},{b},{k},{omega}"),
        )
    }

    /// `a + b tanh(|γ|²)`.
    pub fn coupled_tanh(a: f64, b: f64) -> Result<Self> {
        let (lo, hi) = if b >= 0.0 { (a, a + b) } else { (a + b, a) };
        let bounds = SpeedBounds::new(lo, hi, 0.0, b.abs() * tanh_gradient_bound())?;
        Self::new(
            Profile::Coupled(Arc::new(move |_, _, gamma: &Vec3| a + b * gamma.norm_squared().tanh())),
            bounds,
            format!("coupled-tanh:{a},{b}"),
        )
    }

    /// Parses a built-in selector: `const:c`, `sin:a,b,k`, `sintime:a,b,k,ω`, `coupled-tanh:a,b`.
    pub fn parse(selector: &str) -> Result<Self> {
        let (name, args) = selector
            .split_once(':')
            .ok_or_else(|| BflError::Config(format!("speed selector `{selector}` has no `:`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| BflError::Config(format!("bad number `{s}` in speed selector `{selector}`")))
            })
            .collect::<Result<_>>()?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(BflError::Config(format!("`{name}` takes {n} parameters, got {}", nums.len())))
            }
        };
        let built = match name.trim() {
            "const" => {
                arity(1)?;
                Self::constant(nums[0])
            }
            "sin" => {
                arity(3)?;
                Self::sine(nums[0], nums[1], nums[2])
            }
            "sintime" => {
                arity(4)?;
                Self::sine_time(nums[0], nums[1], nums[2], nums[3])
            }
            "coupled-tanh" => {
                arity(2)?;
                Self::coupled_tanh(nums[0], nums[1])
            }
            other => return Err(BflError::Config(format!("unknown speed profile `{other}`"))),
        };
        built.map_err(|e| match e {
            BflError::Precondition(msg) => BflError::Config(msg),
            other => other,
        })
    }

    pub fn with_offset(mut self, offset: SamplingOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_bounds(mut self, bounds: SpeedBounds) -> Result<Self> {
        bounds.check()?;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn bounds(&self) -> SpeedBounds {
        self.bounds
    }

    pub fn offset(&self) -> SamplingOffset {
        self.offset
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self.profile, Profile::Coupled(_))
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.profile, Profile::SpaceTime(_) | Profile::Coupled(_))
    }

    /// Raw evaluation of `g(t, x, γ)`. `gamma` is ignored unless the profile is coupled.
    pub fn eval(&self, t: f64, x: f64, gamma: Option<&Vec3>) -> f64 {
        match &self.profile {
            Profile::Constant(c) => *c,
            Profile::SpaceOnly(f) => f(x),
            Profile::SpaceTime(f) => f(t, x),
            Profile::Coupled(f) => f(t, x, gamma.unwrap_or(&Vec3::zeros())),
        }
    }

    fn ensure_gamma(&self, grid: &Grid, gamma: Option<&VectorField>) -> Result<()> {
        match (self.is_coupled(), gamma) {
            (true, None) => Err(BflError::Precondition(format!(
                "speed `{}` depends on the curve; a curve sample is required",
                self.label
            ))),
            (_, Some(gm)) => grid.ensure_same(gm.grid()),
            _ => Ok(()),
        }
    }

    fn sample_unchecked(&self, t: f64, grid: &Grid, gamma: Option<&VectorField>) -> ScalarField {
        let shift = if self.is_coupled() { 0.0 } else { self.offset.shift(grid.h()) };
        Field::from_fn(*grid, |i, x| self.eval(t, x + shift, gamma.map(|gm| &gm.values()[i])))
    }

    /// `g_i = g(t, x_i + offset, γ_i)`, checked against `[alpha, beta]`.
    pub fn sample(&self, t: f64, grid: &Grid, gamma: Option<&VectorField>) -> Result<ScalarField> {
        self.ensure_gamma(grid, gamma)?;
        let g = self.sample_unchecked(t, grid, gamma);
        let SpeedBounds { alpha, beta, .. } = self.bounds;
        let slack = 1e-12;
        for (node, &value) in g.values().iter().enumerate() {
            if !(value >= alpha * (1.0 - slack) && value <= beta * (1.0 + slack)) {
                return Err(BflError::CoefficientBound {
                    node,
                    value,
                    alpha,
                    beta,
                });
            }
        }
        Ok(g)
    }

    /// `∂ₜg` at the sample points (central difference in time, curve held fixed).
    pub fn sample_time_derivative(&self, t: f64, grid: &Grid, gamma: Option<&VectorField>) -> Result<ScalarField> {
        self.ensure_gamma(grid, gamma)?;
        if !self.is_time_dependent() {
            return Ok(Field::constant(*grid, 0.0));
        }
        let dt = 1e-5 * t.abs().max(1.0);
        let plus = self.sample_unchecked(t + dt, grid, gamma);
        let minus = self.sample_unchecked(t - dt, grid, gamma);
        plus.zip_with(&minus, |a, b| (a - b) / (2.0 * dt))
    }
}

/// Outcome of [`validate_bounds`]; margins are positive when the declaration holds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport {
    pub pass: bool,
    /// `min g - alpha`.
    pub alpha_margin: f64,
    /// `beta - max g`.
    pub beta_margin: f64,
    /// `1.05 beta_t - max |∂ₜg|`.
    pub beta_t_margin: f64,
    /// `1.05 beta_x - max |∂ₓg|` (and `|∇_γ g|` for coupled speeds).
    pub beta_x_margin: f64,
    /// Coordinate where `g` came closest to (or crossed) `alpha`.
    pub worst_alpha_x: f64,
    pub worst_beta_x: f64,
}

/// Dense spot-check of the declared bounds: 10 points per cell at every listed
/// time; derivative bounds by central differences with a 5% allowance.
///
/// Coupled speeds are checked at the supplied curve samples only.
pub fn validate_bounds(
    g: &SpeedField,
    grid: &Grid,
    times: &[f64],
    gamma_samples: Option<&[VectorField]>,
) -> Result<BoundsReport> {
    let bounds = g.bounds();
    let mut g_min = (f64::INFINITY, 0.0);
    let mut g_max = (f64::NEG_INFINITY, 0.0);
    let mut dt_max = 0.0_f64;
    let mut dx_max = 0.0_f64;
    let times: Vec<f64> = if times.is_empty() { vec![0.0] } else { times.to_vec() };
    let eps_x = 1e-6 * grid.h();
    let per_cell = 10;

    let mut visit = |t: f64, x: f64, gamma: Option<&Vec3>| {
        let v = g.eval(t, x, gamma);
        if v < g_min.0 {
            g_min = (v, x);
        }
        if v > g_max.0 {
            g_max = (v, x);
        }
        let dt = 1e-6 * t.abs().max(1.0);
        let d_t = (g.eval(t + dt, x, gamma) - g.eval(t - dt, x, gamma)) / (2.0 * dt);
        let d_x = (g.eval(t, x + eps_x, gamma) - g.eval(t, x - eps_x, gamma)) / (2.0 * eps_x);
        dt_max = dt_max.max(d_t.abs());
        dx_max = dx_max.max(d_x.abs());
        if let Some(gm) = gamma {
            let mut grad = Vec3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = 1e-6;
                grad[k] = (g.eval(t, x, Some(&(gm + e))) - g.eval(t, x, Some(&(gm - e)))) / 2e-6;
            }
            dx_max = dx_max.max(grad.norm());
        }
    };

    if g.is_coupled() {
        let samples = gamma_samples.ok_or_else(|| {
            BflError::Precondition("coupled speed validation needs curve samples".into())
        })?;
        for (k, &t) in times.iter().enumerate() {
            let gm = samples.get(k).or(samples.last()).expect("non-empty curve samples");
            grid.ensure_same(gm.grid())?;
            for (i, p) in gm.values().iter().enumerate() {
                visit(t, grid.x(i), Some(p));
            }
        }
    } else {
        let cells = if grid.is_periodic() { grid.len() } else { grid.len() - 1 };
        let step = grid.h() / per_cell as f64;
        for &t in &times {
            for c in 0..cells {
                for j in 0..per_cell {
                    visit(t, grid.x(c) + j as f64 * step, None);
                }
            }
            if !grid.is_periodic() {
                visit(t, grid.x(grid.len() - 1), None);
            }
        }
    }

    let alpha_margin = g_min.0 - bounds.alpha;
    let beta_margin = bounds.beta - g_max.0;
    let beta_t_margin = 1.05 * bounds.beta_t - dt_max;
    let beta_x_margin = 1.05 * bounds.beta_x - dx_max;
    let tol = 1e-12 * bounds.beta;
    Ok(BoundsReport {
        pass: alpha_margin >= -tol && beta_margin >= -tol && beta_t_margin >= -tol && beta_x_margin >= -tol,
        alpha_margin,
        beta_margin,
        beta_t_margin,
        beta_x_margin,
        worst_alpha_x: g_min.1,
        worst_beta_x: g_max.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn constant_samples_to_ones() {
        let g = SpeedField::constant(1.0).unwrap();
        let grid = Grid::periodic(1.0, 5).unwrap();
        assert_eq!(g.sample(0.0, &grid, None).unwrap().values(), &[1.0; 5]);
    }

    #[test]
    fn offsets_coincide_for_constant_speed() {
        let grid = Grid::window(0.0, 6, 0.3).unwrap();
        let g = SpeedField::constant(2.5).unwrap();
        let a = g.sample(0.3, &grid, None).unwrap();
        let b = g.clone().with_offset(SamplingOffset::Midpoint).sample(0.3, &grid, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sine_at_origin() {
        let g = SpeedField::parse("sin:2,1,1").unwrap();
        let grid = Grid::periodic(TAU, 16).unwrap();
        assert_eq!(g.sample(0.0, &grid, None).unwrap().get(0), 2.0);
        let mid = g.clone().with_offset(SamplingOffset::Midpoint).sample(0.0, &grid, None).unwrap();
        assert!((mid.get(1) - (2.0 + (0.5 * grid.h()).sin())).abs() < 1e-15);
    }

    #[test]
    fn coupled_speed_at_origin_point() {
        let g = SpeedField::parse("coupled-tanh:1,1").unwrap();
        let grid = Grid::periodic(1.0, 4).unwrap();
        let gamma = Field::constant(grid, Vec3::zeros());
        assert_eq!(g.sample(0.0, &grid, Some(&gamma)).unwrap().values(), &[1.0; 4]);
        assert!(g.sample(0.0, &grid, None).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = SpeedField::parse("sintime:2,1,1,1").unwrap();
        let grid = Grid::periodic(TAU, 32).unwrap();
        assert_eq!(g.sample(0.7, &grid, None).unwrap(), g.sample(0.7, &grid, None).unwrap());
    }

    #[test]
    fn out_of_bounds_sample_names_the_node() {
        let g = SpeedField::parse("sin:2,1,1")
            .unwrap()
            .with_bounds(SpeedBounds::new(1.5, 3.0, 0.0, 1.0).unwrap())
            .unwrap();
        let grid = Grid::periodic(TAU, 4).unwrap();
        // x_3 = 3π/2 where g = 1.
        match g.sample(0.0, &grid, None) {
            Err(BflError::CoefficientBound { node, value, .. }) => {
                assert_eq!(node, 3);
                assert!((value - 1.0).abs() < 1e-12);
            }
            other => panic!("expected bound error, got {other:?}"),
        }
    }

    #[test]
    fn validate_constant_speed() {
        let g = SpeedField::constant(1.0)
            .unwrap()
            .with_bounds(SpeedBounds::new(0.5, 2.0, 0.0, 0.0).unwrap())
            .unwrap();
        let grid = Grid::periodic(1.0, 8).unwrap();
        let r = validate_bounds(&g, &grid, &[0.0, 1.0], None).unwrap();
        assert!(r.pass);
        assert_eq!(r.alpha_margin, 0.5);
        assert_eq!(r.beta_margin, 1.0);
    }

    #[test]
    fn validate_sine_speed_tight_and_violated() {
        let grid = Grid::periodic(TAU, 64).unwrap();
        let g = SpeedField::parse("sin:2,1,1").unwrap();
        let r = validate_bounds(&g, &grid, &[0.0], None).unwrap();
        assert!(r.pass);
        assert!(r.alpha_margin.abs() < 1e-4 && r.beta_margin.abs() < 1e-4);

        let tight = g.with_bounds(SpeedBounds::new(1.5, 3.0, 0.0, 1.0).unwrap()).unwrap();
        let r = validate_bounds(&tight, &grid, &[0.0], None).unwrap();
        assert!(!r.pass);
        assert!((r.worst_alpha_x - 1.5 * PI).abs() < 0.05);
    }

    #[test]
    fn validate_time_derivative_bound() {
        let grid = Grid::periodic(TAU, 32).unwrap();
        let g = SpeedField::parse("sintime:2,1,1,3").unwrap();
        let times: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        assert!(validate_bounds(&g, &grid, &times, None).unwrap().pass);
        let under = g.with_bounds(SpeedBounds::new(1.0, 3.0, 1.0, 1.0).unwrap()).unwrap();
        let r = validate_bounds(&under, &grid, &times, None).unwrap();
        assert!(!r.pass && r.beta_t_margin < 0.0);
    }

    #[test]
    fn time_derivative_samples() {
        let grid = Grid::periodic(TAU, 16).unwrap();
        let g = SpeedField::parse("sintime:2,1,1,1").unwrap();
        let dg = g.sample_time_derivative(0.4, &grid, None).unwrap();
        for i in 0..grid.len() {
            let exact = -(grid.x(i)).sin() * 0.4f64.sin();
            assert!((dg.get(i) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(SpeedField::parse("const"), Err(BflError::Config(_))));
        assert!(matches!(SpeedField::parse("sin:1,2"), Err(BflError::Config(_))));
        assert!(matches!(SpeedField::parse("sin:1,2,1"), Err(BflError::Config(_))));
        assert!(matches!(SpeedField::parse("cubic:1"), Err(BflError::Config(_))));
    }
}
