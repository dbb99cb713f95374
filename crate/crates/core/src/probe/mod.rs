//! Monitors, discrete Frenet geometry, exact-solution oracles and the stability probe.

mod diagnostics;
mod frenet;
pub mod oracle;
mod stability;

pub use diagnostics::{
    diagnostics, dual_bound, dual_bound_margin, energy_source, gradient_bound, gradient_bound_margin, BoundContext,
    DiagnosticsRecord,
};
pub use frenet::{frenet, peak_location, FrenetData, KAPPA_MIN};
pub use stability::{perturb, stability_probe, stability_sweep, StabilityResult, StabilitySweep};
