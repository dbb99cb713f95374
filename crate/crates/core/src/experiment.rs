//! The batch commands behind the `bfl` binary.

use std::path::Path;

use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitialData, Probe};
use crate::dynamics::FlowState;
use crate::error::{BflError, Result};
use crate::identities::{run_identities, DEFAULT_TRIALS};
use crate::integrate::{evolve, evolve_with, Evolution};
use crate::interp::resample;
use crate::lattice::VectorField;
use crate::probe::oracle::Helix;
use crate::probe::{diagnostics, frenet, peak_location, stability_sweep, BoundContext};
use crate::reconstruct::{anchor_dispersion, CurveTrajectory, TangentTrajectory, CURVE_TOL};
use crate::report::{
    convergence_csv, diagnostics_csv, stability_csv, write_output, ConvergenceRow, ConvergenceTable, PeakRow,
    RunReport, RunSummary, StabilityRow, StabilityTable, Status,
};
use crate::speed::{Profile, SamplingOffset, SpeedField};

/// Margins below this count as a violated a-priori bound.
pub const MARGIN_TOL: f64 = -1e-8;

/// Runs `f` on a pool capped by `BFL_THREADS` when set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("BFL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok());
    match cap.filter(|&n| n > 0) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

type Oracle = Box<dyn Fn(f64) -> VectorField + Send + Sync>;

/// The closed-form lattice solution for this configuration, if there is one.
fn lattice_oracle(cfg: &ExperimentConfig, speed: &SpeedField) -> Result<Option<Oracle>> {
    let Profile::Constant(c) = *speed.profile() else {
        return Ok(None);
    };
    let grid = cfg.grid()?;
    Ok(match cfg.initial {
        // g ≡ c is g ≡ 1 run at c times the speed.
        InitialData::Helix { alpha, k } => {
            let hx = Helix::new(&grid, alpha, k);
            Some(Box::new(move |t| hx.at(&grid, c * t).into_field()))
        }
        InitialData::GreatCircle { .. } => {
            let u0 = cfg.initial_state()?.tangent_field();
            Some(Box::new(move |_| u0.clone()))
        }
        _ => None,
    })
}

/// The continuum solution sampled at the nodes, if there is one.
fn continuum_oracle(cfg: &ExperimentConfig, speed: &SpeedField) -> Result<Option<Oracle>> {
    match (speed.profile(), &cfg.initial) {
        (Profile::Constant(c), InitialData::Helix { alpha, k }) => {
            let (c, grid) = (*c, cfg.grid()?);
            let hx = Helix::new(&grid, *alpha, *k);
            Ok(Some(Box::new(move |t| hx.continuum_at(&grid, c * t).into_field())))
        }
        _ => Ok(None),
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Evolves the configured experiment, collecting one diagnostics row per snapshot.
const EDGE_NODES: usize = 10;
const EDGE_TOL: f64 = 1e-6;

// Window runs say nothing about the infinite system near the ends, so data should be flat there.
fn edge_warning(state: &FlowState) -> Option<String> {
    let grid = state.grid();
    if grid.is_periodic() || grid.len() < 2 * EDGE_NODES {
        return None;
    }
    let u = state.tangent_field();
    let n = u.len();
    let left = (0..EDGE_NODES).map(|i| (u.get(i) - u.get(0)).norm()).fold(0.0, f64::max);
    let right = (n - EDGE_NODES..n).map(|i| (u.get(i) - u.get(n - 1)).norm()).fold(0.0, f64::max);
    let worst = left.max(right);
    (worst > EDGE_TOL).then(|| {
        format!("initial data varies by {worst:.3e} within {EDGE_NODES} nodes of the window ends")
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunReport, Evolution)> {
    let speed = cfg.speed_field()?;
    let spec = cfg.integrator()?;
    let state = cfg.initial_state()?;
    let oracle = if cfg.has_probe(Probe::Oracle) {
        let o = lattice_oracle(cfg, &speed)?;
        if o.is_none() {
            return Err(BflError::Config(format!("no closed-form solution for `{}` with `{}`", cfg.initial, cfg.speed)));
        }
        o
    } else {
        None
    };
    let ctx = BoundContext::from_initial(&state, speed.bounds());
    let mut report = RunReport::new("run", Some(cfg.clone()));
    if let Some(note) = edge_warning(&state) {
        report.notes.push(note);
    }
    let mut peaks = Vec::new();
    let track_peaks = cfg.has_probe(Probe::Frenet);
    let mut observer = |s: &FlowState| -> Result<()> {
        let mut rec = diagnostics(s, &speed, &ctx)?;
        if let Some(o) = &oracle {
            rec.oracle_error = Some(s.tangent_field().sub(&o(s.t()))?.max_norm());
        }
        report.records.push(rec);
        if track_peaks {
            let fd = frenet(&s.curve_field());
            let x = peak_location(&fd.curvature)?;
            let i = ((x - s.grid().start()) / s.grid().h()).round().clamp(0.0, (s.grid().len() - 1) as f64) as usize;
            peaks.push(PeakRow {
                t: s.t(),
                x,
                curvature: fd.curvature.max(),
                torsion: fd.torsion_at(i),
            });
        }
        Ok(())
    };
    let ev = evolve_with(state, cfg.horizon, &spec, &speed, &mut observer);
    report.peaks = peaks;
    let recs = &report.records;
    let e0 = recs.first().map(|r| r.energy).unwrap_or(0.0);
    let mut summary = RunSummary {
        final_time: ev.last.t(),
        steps: ev.steps,
        dt: ev.dt,
        max_unit_drift: recs.iter().map(|r| r.unit_drift).fold(0.0, f64::max),
        energy_drift: recs
            .iter()
            .map(|r| if e0 != 0.0 { ((r.energy - e0) / e0).abs() } else { r.energy.abs() })
            .fold(0.0, f64::max),
        min_grad_margin: recs.iter().map(|r| r.grad_margin).fold(f64::INFINITY, f64::min),
        min_dual_margin: recs.iter().map(|r| r.dual_margin).fold(f64::INFINITY, f64::min),
        final_oracle_error: recs.last().and_then(|r| r.oracle_error),
        max_oracle_error: recs.iter().filter_map(|r| r.oracle_error).reduce(f64::max),
        ..RunSummary::default()
    };
    if track_peaks {
        let (ts, xs): (Vec<f64>, Vec<f64>) = report.peaks.iter().map(|p| (p.t, p.x)).unzip();
        summary.peak_speed = least_squares_slope(&ts, &xs);
    }
    if ev.last.is_curve() {
        summary.arc_length_drift = Some(CurveTrajectory::from_states(&ev.snapshots, f64::INFINITY)?.arc_length_drift());
    } else if cfg.has_probe(Probe::Reconstruct) && ev.snapshots.len() > 1 {
        let traj = TangentTrajectory::from_states(&ev.snapshots, &speed)?;
        let n = traj.grid().len();
        summary.anchor_dispersion = Some(anchor_dispersion(&traj, &[0, n / 4, n / 2, 3 * n / 4, n - 1])?);
    }

    if let Some(e) = &ev.error {
        report.fail(e);
    } else {
        if cfg.has_probe(Probe::Bounds) && summary.min_grad_margin.min(summary.min_dual_margin) < MARGIN_TOL {
            report.notes.push(format!(
                "a-priori bound violated: min margins {:e} (gradient), {:e} (dual)",
                summary.min_grad_margin, summary.min_dual_margin
            ));
            report.set_status(Status::ThresholdFailure);
        }
        if let (Some(tol), Some(err)) = (cfg.oracle_tol, summary.final_oracle_error) {
            if !(err <= tol) {
                report.notes.push(format!("final oracle error {err:e} exceeds {tol:e}"));
                report.set_status(Status::ThresholdFailure);
            }
        }
        if let Some(d) = summary.arc_length_drift {
            if d > CURVE_TOL {
                report.notes.push(format!("arc-length drift {d:e} exceeds {CURVE_TOL:e}"));
                report.set_status(Status::ThresholdFailure);
            }
        }
    }
    report.summary = Some(summary);
    Ok((report, ev))
}

/// `bfl run`: evolves, then writes `NAME.csv` and `NAME.json` to `out_dir`
/// (the configured output directory by default). Partial results are written on divergence.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    let (report, _) = run_experiment(cfg)?;
    let dir = out_dir.unwrap_or(&cfg.output);
    write_output(dir, &format!("{}.csv", cfg.name), &diagnostics_csv(&report.records))?;
    write_output(dir, &format!("{}.json", cfg.name), &report.to_json())?;
    Ok(report)
}

/// Final tangent field of one level.
fn final_tangent(cfg: &ExperimentConfig, speed: &SpeedField) -> Result<(FlowState, f64)> {
    let spec = cfg.integrator()?;
    let ev = evolve(cfg.initial_state()?, cfg.horizon, &spec, speed).into_result()?;
    Ok((ev.last, ev.dt))
}

/// Error table for one sampling offset over `levels` dyadic refinements of `cfg`.
pub fn convergence_table(cfg: &ExperimentConfig, levels: u32, offset: SamplingOffset) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(BflError::Config(format!("convergence needs at least 3 levels, got {levels}")));
    }
    if matches!(cfg.initial, InitialData::File(_)) {
        return Err(BflError::Config("file initial data cannot be refined".into()));
    }
    let mut base = cfg.clone();
    base.offset = offset;
    let configs: Vec<ExperimentConfig> = (0..levels).map(|j| base.refined(j)).collect();
    let speed = base.speed_field()?;
    let oracle_mode = continuum_oracle(&base, &speed)?.is_some();
    let finals: Vec<(FlowState, f64)> = configs
        .par_iter()
        .map(|c| final_tangent(c, &c.speed_field()?))
        .collect::<Result<_>>()?;

    let mut errors = Vec::with_capacity(finals.len());
    if oracle_mode {
        for (c, (s, _)) in configs.iter().zip(&finals) {
            let exact = continuum_oracle(c, &speed)?.expect("oracle exists on every level")(s.t());
            errors.push(Some(s.tangent_field().sub(&exact)?.max_norm()));
        }
    } else {
        // Successive differences: level j against level j+1 restricted to level j's nodes.
        for j in 0..finals.len() {
            if j + 1 == finals.len() {
                errors.push(None);
                continue;
            }
            let coarse = finals[j].0.tangent_field();
            let fine = resample(&finals[j + 1].0.tangent_field(), coarse.grid())?;
            errors.push(Some(coarse.sub(&fine)?.max_norm()));
        }
    }
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    for (j, ((s, dt), err)) in finals.iter().zip(&errors).enumerate() {
        let Some(err) = *err else { continue };
        rows.push(ConvergenceRow {
            level: j as u32,
            nodes: s.grid().len(),
            h: s.grid().h(),
            dt: *dt,
            error: err,
            order: prev.map(|p| (p / err).log2()),
        });
        prev = Some(err);
    }
    Ok(ConvergenceTable {
        offset,
        reference: if oracle_mode { "oracle" } else { "successive" }.into(),
        rows,
    })
}

/// `bfl converge`: one table for the requested offset, or both offsets when `g`
/// varies in space and no offset was requested.
pub fn cmd_convergence(
    cfg: &ExperimentConfig,
    levels: u32,
    offset: Option<SamplingOffset>,
    out_dir: Option<&Path>,
) -> Result<RunReport> {
    let speed = cfg.speed_field()?;
    let offsets = match offset {
        Some(o) => vec![o],
        None if matches!(speed.profile(), Profile::Constant(_)) => vec![cfg.offset],
        None => vec![SamplingOffset::Node, SamplingOffset::Midpoint],
    };
    let mut report = RunReport::new("converge", Some(cfg.clone()));
    let tables = with_thread_cap(|| {
        offsets
            .par_iter()
            .map(|&o| convergence_table(cfg, levels, o))
            .collect::<Vec<Result<ConvergenceTable>>>()
    });
    for t in tables {
        match t {
            Ok(t) => report.convergence.push(t),
            Err(e) => {
                report.fail(&e);
                break;
            }
        }
    }
    let expected_offset = offset.unwrap_or(cfg.offset);
    if let Some([lo, hi]) = cfg.expect_order {
        let bad: Vec<f64> = report
            .convergence
            .iter()
            .filter(|t| t.offset == expected_offset)
            .flat_map(|t| t.orders())
            .filter(|o| !(*o >= lo && *o <= hi))
            .collect();
        for o in bad {
            report.notes.push(format!("measured order {o:.3} outside [{lo}, {hi}]"));
            report.set_status(Status::ThresholdFailure);
        }
    }
    let dir = out_dir.unwrap_or(&cfg.output);
    for t in &report.convergence {
        let tag = match t.offset {
            SamplingOffset::Node => "node",
            SamplingOffset::Midpoint => "mid",
        };
        write_output(dir, &format!("{}-converge-{tag}.csv", cfg.name), &convergence_csv(t))?;
    }
    write_output(dir, &format!("{}-converge.json", cfg.name), &report.to_json())?;
    Ok(report)
}

/// Spread above which the amplification ratios count as inconsistent.
pub const STABILITY_SPREAD: f64 = 0.2;

/// `bfl stability`: H¹_h amplification ratios for each perturbation size.
pub fn cmd_stability(cfg: &ExperimentConfig, eps: &[f64], out_dir: Option<&Path>) -> Result<RunReport> {
    if eps.len() < 2 {
        return Err(BflError::Config("stability needs at least two perturbation sizes".into()));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 0.1)) {
        return Err(BflError::Config(format!("perturbation sizes must lie in (0, 0.1], got {e}")));
    }
    let state = cfg.initial_state()?;
    if state.is_curve() {
        return Err(BflError::Config("stability runs need tangent-mode initial data".into()));
    }
    let u0 = match &state {
        FlowState::Tangent { u, .. } => u.clone(),
        FlowState::Curve { .. } => unreachable!(),
    };
    let speed = cfg.speed_field()?;
    let spec = cfg.integrator()?;
    let mut report = RunReport::new("stability", Some(cfg.clone()));
    match with_thread_cap(|| stability_sweep(&u0, eps, &speed, cfg.horizon, &spec)) {
        Ok(sweep) => {
            let table = StabilityTable {
                horizon: cfg.horizon,
                rows: sweep
                    .results
                    .iter()
                    .map(|r| StabilityRow {
                        eps: r.eps,
                        initial_distance: r.initial_distance,
                        final_distance: r.final_distance,
                        ratio: r.ratio,
                    })
                    .collect(),
                spread: sweep.spread,
            };
            if !(table.spread < STABILITY_SPREAD) {
                report.notes.push(format!("ratio spread {:.3} not below {STABILITY_SPREAD}", table.spread));
                report.set_status(Status::ThresholdFailure);
            }
            let dir = out_dir.unwrap_or(&cfg.output);
            write_output(dir, &format!("{}-stability.csv", cfg.name), &stability_csv(&table))?;
            report.stability = Some(table);
            write_output(dir, &format!("{}-stability.json", cfg.name), &report.to_json())?;
        }
        Err(e) => report.fail(&e),
    }
    Ok(report)
}

/// `bfl identities`.
pub fn cmd_identities(seed: u64) -> Result<RunReport> {
    let mut report = RunReport::new("identities", None);
    let ids = run_identities(seed, DEFAULT_TRIALS)?;
    if !ids.all_pass() {
        report.set_status(Status::ThresholdFailure);
    }
    report.identities = Some(ids);
    Ok(report)
}
