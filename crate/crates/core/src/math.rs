//! Small numeric helpers shared across the crate.

use std::f64::consts::TAU;

/// Wavenumber of the cavity mode in internal units (lengths in λ ⇒ k = 2π).
pub const WAVENUMBER: f64 = TAU;

/// cos(2πx), with the argument reduced exactly to a quarter period first.
///
/// The reduction subtracts 0.5 and 0.25 from the fractional part of `x`;
/// both subtractions are exact in binary floating point, so the identities
/// cos2pi(x + 0.5) = -cos2pi(x) and cos2pi(0.25) = 0 hold *bitwise*, not just
/// approximately. The half-wavelength translation symmetry of the standing
/// wave therefore survives into the discretized dynamics.
pub fn cos2pi(x: f64) -> f64 {
    let mut u = x - x.floor();
    let mut sign = 1.0;
    if u >= 0.5 {
        u -= 0.5; // exact
        sign = -1.0;
    }
    if u < 0.25 {
        sign * (TAU * u).cos()
    } else {
        -sign * (TAU * (u - 0.25)).sin() // u - 0.25 exact; u = 0.25 gives ±0.0
    }
}

/// sin(2πx) with the same exact quarter-period reduction as [`cos2pi`].
pub fn sin2pi(x: f64) -> f64 {
    let mut u = x - x.floor();
    let mut sign = 1.0;
    if u >= 0.5 {
        u -= 0.5;
        sign = -1.0;
    }
    if u < 0.25 {
        sign * (TAU * u).sin()
    } else {
        sign * (TAU * (u - 0.25)).cos() // u = 0.25 gives exactly ±1
    }
}

/// Snap a coordinate to the 2^-40 λ grid.
///
/// Initial positions pass through this so that a later half-wavelength shift
/// (x + 0.5) is exactly representable; the grid is ~10^-12 λ fine and has no
/// physical consequence.
pub fn quantize_position(x: f64) -> f64 {
    const GRID: f64 = 1099511627776.0; // 2^40
    (x * GRID).round() / GRID
}
