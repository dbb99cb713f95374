//! Semi-discrete solver for the modified binormal curvature flow
//! `∂ₜγ = g ∂ₓγ ∧ ∂ₓ²γ` and its tangent (Schrödinger map) form
//! `∂ₜu = u ∧ ∂ₓ(g ∂ₓu)`, together with the discrete identities, conserved
//! quantities and a-priori bounds that the lattice scheme satisfies.
//!
//! Module map:
//! - [`lattice`]: grids, fields, `D±`, `τ±`, `Δ_g`, discrete norms.
//! - [`interp`]: piecewise linear/constant interpolants and norm bridges.
//! - [`speed`]: the speed coefficient `g` with declared bounds.
//! - [`dynamics`]: right-hand sides of the tangent and curve systems.
//! - [`integrate`]: time steppers and the snapshotting driver.
//! - [`reconstruct`]: rebuilding the curve from a tangent trajectory.
//! - [`probe`]: diagnostics, Frenet data, oracles, stability probe.
//! - [`identities`], [`config`], [`experiment`], [`report`]: the batch driver behind the `bfl` CLI.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod identities;
pub mod integrate;
pub mod interp;
pub mod lattice;
pub mod probe;
pub mod reconstruct;
pub mod report;
pub mod speed;

pub use error::{BflError, Result};
pub use lattice::{Field, Grid, ScalarField, UnitField, Vec3, VectorField};
