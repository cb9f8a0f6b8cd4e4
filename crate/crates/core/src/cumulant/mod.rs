//! Moment equations of the driven atom–cavity system.
//!
//! Two closure levels of the same physics:
//!
//! * [`SecondOrderRhs`] — the closed second-order set. Dynamical variables are
//!   ⟨a⟩, ⟨σ⁻ₘ⟩, ⟨a†a⟩, ⟨aσ⁺ₘ⟩, ⟨σ⁺ₘσ⁻ₘ⟩ and the dipole–dipole correlations
//!   ⟨σ⁺ₘσ⁻ⱼ⟩, plus the classical phase-space coordinates (xₘ, yₘ, pₓₘ, p_ym)
//!   of every atom. Third-order moments are factorized; the anomalous moments
//!   ⟨aσ⁻ₘ⟩, ⟨aa⟩, ⟨σ⁻ₘσ⁻ⱼ⟩ are excluded from the set.
//! * [`MeanFieldRhs`] — first-order factorization ⟨aσ⁺ₘ⟩ → ⟨a⟩⟨σ⁺ₘ⟩ etc.,
//!   with the populations kept dynamical.
//!
//! Both support an optional second cavity mode ("filter") with the spatially
//! orthogonal sin(kx) profile, enabled by `delta_c2` in the config; the
//! second-order engine then also carries ⟨b⟩, ⟨b†b⟩, ⟨bσ⁺ₘ⟩ and the
//! inter-mode correlation ⟨a†b⟩.

mod layout;
mod mean_field;
mod rhs;
mod state;

pub use layout::{Engine, Layout};
pub use mean_field::MeanFieldRhs;
pub use rhs::{ModeTag, RegressionRhs, SecondOrderRhs};
pub use state::{CumulantState, MeanFieldState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::{cos2pi, quantize_position, sin2pi};
use crate::params::SystemParams;

/// Gaussian envelope of the cavity mode along y.
pub fn envelope(p: &SystemParams, y: f64) -> f64 {
    (-(y * y) / (p.waist * p.waist)).exp()
}

/// Position-dependent coupling to the main mode, g·cos(kx)·e^(−y²/w0²).
pub fn coupling(p: &SystemParams, x: f64, y: f64) -> f64 {
    p.g * cos2pi(x) * envelope(p, y)
}

/// Coupling to the filter mode, g·sin(kx)·e^(−y²/w0²).
pub fn filter_coupling(p: &SystemParams, x: f64, y: f64) -> f64 {
    p.g * sin2pi(x) * envelope(p, y)
}

/// Local Rabi amplitude of the transverse drive, Ω·cos(ky).
pub fn pump_amplitude(p: &SystemParams, y: f64) -> f64 {
    p.omega_pump * cos2pi(y)
}

/// Draw the initial classical cloud: positions uniform in
/// [-init_pos_halfwidth, +init_pos_halfwidth]², momenta uniform in
/// [-init_mom_halfwidth, +init_mom_halfwidth]².
///
/// The draw order (x, y, px, py per atom) is part of the determinism
/// contract: one seed, one cloud, bit for bit, on every platform.
fn draw_cloud(p: &SystemParams) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.n_atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let h = p.init_pos_halfwidth;
    let m = p.init_mom_halfwidth;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut pxs = Vec::with_capacity(n);
    let mut pys = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push(quantize_position(rng.gen_range(-h..=h)));
        ys.push(quantize_position(rng.gen_range(-h..=h)));
        pxs.push(rng.gen_range(-m..=m));
        pys.push(rng.gen_range(-m..=m));
    }
    (xs, ys, pxs, pys)
}

/// Initial second-order state: quantum sector in vacuum ⊗ ground (all moments
/// zero), classical cloud drawn from the config seed.
pub fn init_second_order(p: &SystemParams) -> CumulantState {
    let (x, y, px, py) = draw_cloud(p);
    let mut s = CumulantState::zeroed(p.n_atoms, p.two_mode());
    s.x = x;
    s.y = y;
    s.px = px;
    s.py = py;
    s
}

/// Initial mean-field state; same cloud as [`init_second_order`] for the same
/// seed.
pub fn init_mean_field(p: &SystemParams) -> MeanFieldState {
    let (x, y, px, py) = draw_cloud(p);
    let mut s = MeanFieldState::zeroed(p.n_atoms, p.two_mode());
    s.x = x;
    s.y = y;
    s.px = px;
    s.py = py;
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::order_parameter;

    fn base(n: usize, seed: u64) -> SystemParams {
        let mut p = crate::params::tests::fig1();
        p.n_atoms = n;
        p.seed = seed;
        p
    }

    #[test]
    fn coupling_examples() {
        let p = base(1, 1);
        assert_eq!(coupling(&p, 0.0, 0.0), 1.0);
        assert_eq!(coupling(&p, 0.25, 0.0), 0.0); // node, exactly dark
        let at_waist = coupling(&p, 0.0, p.waist);
        assert!((at_waist - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(filter_coupling(&p, 0.25, 0.0), p.g);
        assert_eq!(pump_amplitude(&p, 0.0), p.omega_pump);
        assert_eq!(pump_amplitude(&p, 0.5), -p.omega_pump);
    }

    #[test]
    fn same_seed_same_cloud_bitwise() {
        let p = base(40, 1234);
        let a = init_second_order(&p);
        let b = init_second_order(&p);
        assert_eq!(a.pack(), b.pack());
        let mf = init_mean_field(&p);
        assert_eq!(a.x, mf.x);
        assert_eq!(a.py, mf.py);
    }

    #[test]
    fn different_seeds_differ() {
        let a = init_second_order(&base(10, 1));
        let b = init_second_order(&base(10, 2));
        assert_ne!(a.x, b.x);
    }

    #[test]
    fn cloud_respects_bounds_and_quantum_sector_is_dark() {
        let p = base(200, 7);
        let s = init_second_order(&p);
        for m in 0..200 {
            assert!(s.x[m].abs() <= p.init_pos_halfwidth + 1e-9);
            assert!(s.y[m].abs() <= p.init_pos_halfwidth + 1e-9);
            assert!(s.px[m].abs() <= p.init_mom_halfwidth);
            assert!(s.py[m].abs() <= p.init_mom_halfwidth);
            assert_eq!(s.sm[m], num_complex::Complex64::new(0.0, 0.0));
            assert_eq!(s.pop[m], 0.0);
        }
        assert_eq!(s.n_phot, 0.0);
    }

    #[test]
    fn zero_halfwidth_collapses_cloud_to_origin() {
        let mut p = base(5, 3);
        p.init_pos_halfwidth = 0.0;
        p.init_mom_halfwidth = 0.0;
        let s = init_second_order(&p);
        assert!(s.x.iter().all(|&v| v == 0.0));
        assert!(s.py.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_cloud_starts_unordered() {
        let mut p = base(10_000, 99);
        p.init_pos_halfwidth = 2.0;
        let s = init_second_order(&p);
        let theta = order_parameter(&s.x, &s.y);
        assert!(theta.abs() < 0.02, "theta = {theta}");
    }
}
