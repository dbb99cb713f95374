//! Experiment configuration files.
//!
//! One experiment per file, written as flat `key = value` lines in TOML syntax
//! (strings quoted, `#` comments, no tables):
//!
//! ```text
//! name     = "helix"
//! topology = "periodic"        # or "window"
//! length   = 6.283185307179586 # periodic: length, nodes
//! nodes    = 64                # window: origin, intervals, spacing
//! initial  = "helix:0.7853981633974483,2"
//! speed    = "const:1"
//! offset   = "node"            # or "mid"
//! method   = "rotation"
//! dt       = "fixed:0.001"     # or "cfl:c", dt = c h²/β
//! horizon  = 1.0
//! stride   = 100
//! probes   = ["oracle", "bounds"]
//! ```
//!
//! Initial data selectors: `great-circle:k`, `helix:α,k`, `soliton:ν,τ₀`,
//! `file:PATH` (one `x y z` tangent per node), `coupled-circle` and
//! `coupled-soliton:ν,τ₀`; the last two run the curve system.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::FlowState;
use crate::error::{BflError, Result};
use crate::integrate::{IntegratorSpec, Method, StepPolicy};
use crate::lattice::{Field, Grid, UnitField, Vec3};
use crate::probe::oracle::{great_circle, soliton_curve, soliton_tangent, unit_edge_circle, Helix};
use crate::speed::{validate_bounds, SamplingOffset, SpeedBounds, SpeedField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Periodic,
    Window,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    GreatCircle { k: f64 },
    Helix { alpha: f64, k: f64 },
    Soliton { nu: f64, tau0: f64 },
    File(PathBuf),
    CoupledCircle,
    CoupledSoliton { nu: f64, tau0: f64 },
}

impl InitialData {
    /// Whether the run evolves the curve rather than its tangent field.
    pub fn is_curve(&self) -> bool {
        matches!(self, InitialData::CoupledCircle | InitialData::CoupledSoliton { .. })
    }
}

fn numbers(name: &str, args: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| BflError::Config(format!("bad number `{s}` in `{name}`"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(BflError::Config(format!("`{name}` takes {n} parameters, got {}", v.len())));
    }
    Ok(v)
}

impl FromStr for InitialData {
    type Err = BflError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        Ok(match name.trim() {
            "great-circle" => InitialData::GreatCircle { k: numbers(name, args, 1)?[0] },
            "helix" => {
                let v = numbers(name, args, 2)?;
                InitialData::Helix { alpha: v[0], k: v[1] }
            }
            "soliton" => {
                let v = numbers(name, args, 2)?;
                InitialData::Soliton { nu: v[0], tau0: v[1] }
            }
            "coupled-soliton" => {
                let v = numbers(name, args, 2)?;
                InitialData::CoupledSoliton { nu: v[0], tau0: v[1] }
            }
            "coupled-circle" if args.is_empty() => InitialData::CoupledCircle,
            "file" if !args.is_empty() => InitialData::File(PathBuf::from(args)),
            _ => return Err(BflError::Config(format!("unknown initial data `{s}`"))),
        })
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::GreatCircle { k } => write!(f, "great-circle:{k}"),
            InitialData::Helix { alpha, k } => write!(f, "helix:{alpha},{k}"),
            InitialData::Soliton { nu, tau0 } => write!(f, "soliton:{nu},{tau0}"),
            InitialData::File(p) => write!(f, "file:{}", p.display()),
            InitialData::CoupledCircle => write!(f, "coupled-circle"),
            InitialData::CoupledSoliton { nu, tau0 } => write!(f, "coupled-soliton:{nu},{tau0}"),
        }
    }
}

impl Serialize for InitialData {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitialData {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `fixed:dt` or `cfl:c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSelector(pub StepPolicy);

impl FromStr for StepSelector {
    type Err = BflError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || BflError::Config(format!("time step `{s}` must read `fixed:dt` or `cfl:c`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "fixed" => Ok(StepSelector(StepPolicy::Fixed(v))),
            "cfl" => Ok(StepSelector(StepPolicy::Cfl(v))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for StepSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            StepPolicy::Fixed(dt) => write!(f, "fixed:{dt}"),
            StepPolicy::Cfl(c) => write!(f, "cfl:{c}"),
        }
    }
}

impl Serialize for StepSelector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepSelector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Probe {
    /// Fail the run (exit 3) when an a-priori bound margin drops below `-1e-8`.
    Bounds,
    /// Compare against the closed-form solution where one exists.
    Oracle,
    /// Track the curvature peak of the curve.
    Frenet,
    /// Rebuild the curve from the tangent run and measure the anchor dispersion.
    Reconstruct,
}

fn default_name() -> String {
    "run".into()
}

fn default_stride() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub topology: TopologyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    pub initial: InitialData,
    pub speed: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub offset: SamplingOffset,
    pub method: Method,
    pub dt: StepSelector,
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Overrides of the declared speed bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_x: Option<f64>,
    /// Final oracle error above this fails the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tol: Option<f64>,
    /// Accepted range of measured convergence orders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_order: Option<[f64; 2]>,
    /// Directory that relative `file:` paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| BflError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BflError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("configuration fields are plain values")
    }

    /// Checks that every selector resolves and the grid, speed and step are admissible.
    pub fn validate(&self) -> Result<()> {
        let config_err = |e: BflError| match e {
            BflError::Precondition(m) | BflError::InvalidGrid(m) => BflError::Config(m),
            other => other,
        };
        if !self.horizon.is_finite() || self.horizon == 0.0 {
            return Err(BflError::Config(format!("horizon must be finite and nonzero, got {}", self.horizon)));
        }
        let grid = self.grid().map_err(config_err)?;
        let speed = self.speed_field().map_err(config_err)?;
        let declared = self.alpha.is_some() || self.beta.is_some() || self.beta_t.is_some() || self.beta_x.is_some();
        if declared && !speed.is_coupled() {
            let times: Vec<f64> = (0..=4).map(|j| self.horizon * j as f64 / 4.0).collect();
            let r = validate_bounds(&speed, &grid, &times, None).map_err(config_err)?;
            if !r.pass {
                return Err(BflError::Config(format!(
                    "declared speed bounds do not hold on the grid (margins alpha {:.3e}, beta {:.3e}, beta_t {:.3e}, beta_x {:.3e})",
                    r.alpha_margin, r.beta_margin, r.beta_t_margin, r.beta_x_margin
                )));
            }
        }
        self.integrator().map_err(config_err)?;
        match self.initial {
            InitialData::CoupledCircle if !grid.is_periodic() => {
                return Err(BflError::Config("coupled-circle needs a periodic topology".into()))
            }
            InitialData::Soliton { .. } | InitialData::CoupledSoliton { .. } if grid.is_periodic() => {
                return Err(BflError::Config("soliton data needs a window topology".into()))
            }
            _ => {}
        }
        if let Some([lo, hi]) = self.expect_order {
            if !(lo <= hi) {
                return Err(BflError::Config(format!("expect_order range [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let missing = |k: &str| BflError::Config(format!("{:?} topology needs `{k}`", self.topology));
        match self.topology {
            TopologyKind::Periodic => {
                if self.origin.is_some() || self.intervals.is_some() || self.spacing.is_some() {
                    return Err(BflError::Config("periodic topology takes `length` and `nodes` only".into()));
                }
                Grid::periodic(self.length.ok_or_else(|| missing("length"))?, self.nodes.ok_or_else(|| missing("nodes"))?)
            }
            TopologyKind::Window => {
                if self.length.is_some() || self.nodes.is_some() {
                    return Err(BflError::Config("window topology takes `origin`, `intervals` and `spacing`".into()));
                }
                Grid::window(
                    self.origin.ok_or_else(|| missing("origin"))?,
                    self.intervals.ok_or_else(|| missing("intervals"))?,
                    self.spacing.ok_or_else(|| missing("spacing"))?,
                )
            }
        }
    }

    pub fn speed_field(&self) -> Result<SpeedField> {
        let g = SpeedField::parse(&self.speed)?.with_offset(self.offset);
        if self.alpha.is_none() && self.beta.is_none() && self.beta_t.is_none() && self.beta_x.is_none() {
            return Ok(g);
        }
        let b = g.bounds();
        let bounds = SpeedBounds::new(
            self.alpha.unwrap_or(b.alpha),
            self.beta.unwrap_or(b.beta),
            self.beta_t.unwrap_or(b.beta_t),
            self.beta_x.unwrap_or(b.beta_x),
        )?;
        g.with_bounds(bounds)
    }

    pub fn integrator(&self) -> Result<IntegratorSpec> {
        IntegratorSpec::new(self.method, self.dt.0, self.stride)
    }

    pub fn has_probe(&self, p: Probe) -> bool {
        self.probes.contains(&p)
    }

    /// The same experiment on a grid refined `levels` times, with a fixed
    /// time step scaled by `4^-levels` so that `dt / h²` stays put.
    pub fn refined(&self, levels: u32) -> Self {
        let mut c = self.clone();
        let f = 2usize.pow(levels);
        c.nodes = c.nodes.map(|n| n * f);
        c.intervals = c.intervals.map(|m| m * f);
        c.spacing = c.spacing.map(|h| h / f as f64);
        if let StepPolicy::Fixed(dt) = c.dt.0 {
            c.dt = StepSelector(StepPolicy::Fixed(dt / (f * f) as f64));
        }
        c
    }

    /// Initial state at `t = 0` on [`ExperimentConfig::grid`].
    pub fn initial_state(&self) -> Result<FlowState> {
        let grid = self.grid()?;
        Ok(match &self.initial {
            InitialData::GreatCircle { k } => FlowState::tangent(0.0, great_circle(&grid, *k)),
            InitialData::Helix { alpha, k } => FlowState::tangent(0.0, Helix::new(&grid, *alpha, *k).initial(&grid)),
            InitialData::Soliton { nu, tau0 } => FlowState::tangent(0.0, soliton_tangent(&grid, *nu, *tau0)?),
            InitialData::File(path) => FlowState::tangent(0.0, self.read_tangent_file(&grid, path)?),
            InitialData::CoupledCircle => FlowState::curve(0.0, unit_edge_circle(&grid, Vec3::new(0.5, 0.0, 0.0))?)?,
            InitialData::CoupledSoliton { nu, tau0 } => FlowState::curve(0.0, soliton_curve(&grid, *nu, *tau0)?)?,
        })
    }

    fn read_tangent_file(&self, grid: &Grid, path: &Path) -> Result<UnitField> {
        let full = match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        let text = std::fs::read_to_string(&full)
            .map_err(|e| BflError::Config(format!("cannot read {}: {e}", full.display())))?;
        let mut values = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let c: Vec<f64> = line
                .split(|ch: char| ch == ',' || ch.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| BflError::Config(format!("{}:{}: expected three numbers", full.display(), n + 1)))?;
            if c.len() != 3 {
                return Err(BflError::Config(format!("{}:{}: expected three numbers", full.display(), n + 1)));
            }
            values.push(Vec3::new(c[0], c[1], c[2]));
        }
        if values.len() != grid.len() {
            return Err(BflError::Config(format!(
                "{} holds {} vectors for a grid of {} nodes",
                full.display(),
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.norm() > 0.0) || !v.norm().is_finite()) {
            return Err(BflError::Config(format!("{} holds a zero or non-finite vector", full.display())));
        }
        UnitField::normalize(Field::new(*grid, values)?)
    }
}
