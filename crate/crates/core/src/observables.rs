//! Derived quantities reported by every front end: the spatial order
//! parameter, kinetic temperature, photon numbers, and inversion, plus
//! windowed time averages used for scan summaries and steady-state checks.

use crate::cumulant::Layout;
use crate::integrator::Trajectory;
use crate::math::cos2pi;
use crate::params::SystemParams;

/// Σ cos(kxⱼ)cos(kyⱼ)/N ∈ [−1, 1]. Near +1 the cloud sits on the even
/// checkerboard of the standing-wave interference pattern, near −1 on the
/// odd one; 0 is the homogeneous (unordered) value.
pub fn order_parameter(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty());
    let sum: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| cos2pi(xi) * cos2pi(yi))
        .sum();
    sum / x.len() as f64
}

/// ω_r · ⟨px² + py²⟩ with momenta in ħk: proportional to the kinetic
/// temperature of the cloud.
pub fn kinetic_energy(omega_r: f64, px: &[f64], py: &[f64]) -> f64 {
    assert_eq!(px.len(), py.len());
    assert!(!px.is_empty());
    let sum: f64 = px.iter().zip(py).map(|(&p, &q)| p * p + q * q).sum();
    omega_r * sum / px.len() as f64
}

/// Mean of ⟨σᶻ⟩ = 2⟨σ⁺σ⁻⟩ − 1 over the ensemble.
pub fn inversion(pop: &[f64]) -> f64 {
    assert!(!pop.is_empty());
    let sum: f64 = pop.iter().map(|&p| 2.0 * p - 1.0).sum();
    sum / pop.len() as f64
}

/// Snapshot of the standard observables at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub theta: f64,
    pub e_kin: f64,
    pub n_phot: f64,
    pub inversion: f64,
    /// Photon number of the second mode, when present.
    pub n_phot_b: Option<f64>,
}

impl ObservableRecord {
    /// Evaluate the observables on one flat state vector.
    pub fn from_state(params: &SystemParams, layout: &Layout, t: f64, y: &[f64]) -> Self {
        ObservableRecord {
            t,
            theta: order_parameter(layout.xs(y), layout.ys(y)),
            e_kin: kinetic_energy(params.omega_r, layout.pxs(y), layout.pys(y)),
            n_phot: layout.photon_number(y),
            inversion: inversion(layout.pops(y)),
            n_phot_b: layout.photon_number_b(y),
        }
    }
}

/// Observable records for every sample of a trajectory.
pub fn records(params: &SystemParams, layout: &Layout, traj: &Trajectory) -> Vec<ObservableRecord> {
    traj.iter()
        .map(|(t, y)| ObservableRecord::from_state(params, layout, t, y))
        .collect()
}

/// Averages over the trailing window of a run, for scan cells and
/// steady-state summaries. The order parameter is reported both signed and
/// in magnitude: the two symmetry-broken patterns carry opposite signs, so
/// |Θ| measures ordering while the signed value identifies the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverage {
    /// First sample time included in the window.
    pub t_start: f64,
    /// Last sample time included in the window.
    pub t_end: f64,
    pub samples: usize,
    pub theta_signed: f64,
    pub theta_abs: f64,
    pub n_phot: f64,
    pub e_kin: f64,
    pub inversion: f64,
    pub n_phot_b: Option<f64>,
    /// Per-atom time-averaged positions, for localization diagnostics.
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

/// Average the observables over all samples with t ≥ t_end − window.
pub fn time_average(
    params: &SystemParams,
    layout: &Layout,
    traj: &Trajectory,
    window: f64,
) -> Result<TimeAverage, String> {
    if !(window > 0.0) {
        return Err(format!("averaging window must be positive, got {window}"));
    }
    let t_end = *traj
        .times()
        .last()
        .ok_or_else(|| "cannot average an empty trajectory".to_string())?;
    let cutoff = t_end - window - 1e-12 * t_end.abs().max(1.0);
    let first = traj.times().partition_point(|&t| t < cutoff);
    let count = traj.len() - first;
    debug_assert!(count >= 1);

    let n = layout.n_atoms;
    let mut out = TimeAverage {
        t_start: traj.times()[first],
        t_end,
        samples: count,
        theta_signed: 0.0,
        theta_abs: 0.0,
        n_phot: 0.0,
        e_kin: 0.0,
        inversion: 0.0,
        n_phot_b: layout.two_mode.then_some(0.0),
        x_mean: vec![0.0; n],
        y_mean: vec![0.0; n],
    };
    for i in first..traj.len() {
        let y = traj.sample(i);
        let rec = ObservableRecord::from_state(params, layout, traj.times()[i], y);
        out.theta_signed += rec.theta;
        out.theta_abs += rec.theta.abs();
        out.n_phot += rec.n_phot;
        out.e_kin += rec.e_kin;
        out.inversion += rec.inversion;
        if let (Some(acc), Some(v)) = (out.n_phot_b.as_mut(), rec.n_phot_b) {
            *acc += v;
        }
        for (acc, &v) in out.x_mean.iter_mut().zip(layout.xs(y)) {
            *acc += v;
        }
        for (acc, &v) in out.y_mean.iter_mut().zip(layout.ys(y)) {
            *acc += v;
        }
    }
    let inv = 1.0 / count as f64;
    out.theta_signed *= inv;
    out.theta_abs *= inv;
    out.n_phot *= inv;
    out.e_kin *= inv;
    out.inversion *= inv;
    if let Some(acc) = out.n_phot_b.as_mut() {
        *acc *= inv;
    }
    for v in out.x_mean.iter_mut().chain(out.y_mean.iter_mut()) {
        *v *= inv;
    }
    Ok(out)
}
