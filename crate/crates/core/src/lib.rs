//! Semiclassical simulator for two-level atoms that are driven from the side
//! and coupled to a lossy standing-wave cavity mode.
//!
//! The crate integrates the closed second-order moment hierarchy of the
//! atom–cavity system (field and dipole means, photon number, field–dipole and
//! dipole–dipole correlations) together with classical atomic motion in the
//! cavity plane, and a first-order (mean-field) reduction of the same system.
//! On top of the trajectories it provides output spectra via the quantum
//! regression theorem, an optional second "filter" cavity mode with the
//! orthogonal spatial profile, an exact few-atom density-matrix oracle for
//! validation, and parallel 2D parameter scans.
//!
//! Unit conventions, used everywhere without further comment:
//!
//! * rates and frequencies in units of the atomic linewidth Γ (so `gamma = 1`),
//! * times in 1/Γ,
//! * lengths in units of the mode wavelength λ (so k = 2π),
//! * momenta in units of the photon momentum ħk,
//! * energies in units of ħ·ωr, with ωr = ħk²/2m the recoil frequency.

pub mod cli;
pub mod cumulant;
pub mod integrator;
pub mod math;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod params;
pub mod scan;
pub mod spectrum;

pub use cumulant::{CumulantState, Engine, MeanFieldState};
pub use integrator::{integrate, IntegratorSettings, Trajectory};
pub use params::{PositionsSnapshot, SystemParams};
