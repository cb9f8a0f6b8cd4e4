//! Output spectra from two-time correlation functions.
//!
//! The first-order correlation g¹(τ) = ⟨a†(t₀+τ) a(t₀)⟩ is obtained by the
//! quantum regression theorem: the two-time moments obey the same linear
//! equations in τ as the corresponding single-time moments, seeded with
//! single-time expectation values at t₀. The spectrum is the one-sided
//! Fourier transform
//!
//! S(ω) = 2 Re ∫₀^∞ dτ e^{−iωτ} g¹(τ),
//!
//! evaluated on a discrete τ grid with trapezoidal end correction. For an
//! empty cavity g¹(τ) = n(t₀) e^{−(κ/2 + iΔc)τ}, so the cavity line appears
//! at ω = −Δc: detunings are defined as Δ = ω_pump − ω_mode, and the field
//! rotates at +|Δc| in the pump frame for a red-detuned pump.

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::cumulant::{ModeTag, RegressionRhs, SecondOrderRhs};
use crate::integrator::{integrate, IntegrateError, IntegratorSettings};
use crate::params::SystemParams;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("correlation settings: {0}")]
    BadSettings(String),
    #[error("correlation integration failed: {0}")]
    Integration(#[from] IntegrateError),
}

/// Controls for the τ integration of the regression equations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSettings {
    /// Extent of the τ grid, in 1/Γ.
    pub t_max: f64,
    /// τ sampling interval, in 1/Γ.
    pub dt: f64,
    /// Which mode's output field to correlate.
    pub mode: ModeTag,
    /// Number of starting times t₀ to average over (1 = single shot).
    pub averages: usize,
    /// Separation between consecutive starting times when averaging.
    pub spacing: f64,
    /// Absolute time label of the supplied state, echoed into the result.
    pub t0: f64,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        CorrelationSettings {
            t_max: 200.0,
            dt: 0.02,
            mode: ModeTag::Main,
            averages: 1,
            spacing: 1.0,
            t0: 0.0,
        }
    }
}

impl CorrelationSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.dt > 0.0 && self.dt < self.t_max) {
            return Err(format!("dt must lie in (0, t_max), got {}", self.dt));
        }
        if self.averages == 0 {
            return Err("averages must be at least 1".into());
        }
        if self.averages > 1 && !(self.spacing > 0.0) {
            return Err(format!(
                "spacing must be positive when averaging, got {}",
                self.spacing
            ));
        }
        Ok(())
    }
}

/// A sampled first-order correlation function.
#[derive(Debug, Clone)]
pub struct CorrelationSeries {
    pub tau: Vec<f64>,
    pub g1: Vec<Complex64>,
    /// Time label of the (first) starting point.
    pub t0: f64,
    pub mode: ModeTag,
    /// Photon number of the correlated mode at the first starting point.
    pub n_phot_t0: f64,
    /// Relative drift of that photon number across the correlation window,
    /// |n(t₀+t_max) − n(t₀)| / max(n(t₀), ε). Values well above zero mean
    /// the state was not stationary and the spectrum is only indicative.
    pub drift: f64,
    /// True when `drift` exceeds 20%.
    pub nonstationary: bool,
}

/// Compute g¹(τ) from a packed second-order state (the regression equations
/// need the second-order moments, so there is no mean-field variant).
///
/// The single-time block keeps evolving during the τ integration — atomic
/// motion is not frozen — which is exactly what makes the drift diagnostic
/// meaningful: a stationary state yields a τ-independent background.
pub fn correlation_function(
    params: &SystemParams,
    state_t0: &[f64],
    settings: &CorrelationSettings,
    integrator: &IntegratorSettings,
) -> Result<CorrelationSeries, SpectrumError> {
    settings.validate().map_err(SpectrumError::BadSettings)?;

    let mut tau_settings = integrator.clone();
    tau_settings.sample_dt = settings.dt;

    let mut state = state_t0.to_vec();
    let mut tau: Vec<f64> = Vec::new();
    let mut acc: Vec<Complex64> = Vec::new();
    let mut n_phot_t0 = 0.0;
    let mut drift: f64 = 0.0;

    for shot in 0..settings.averages {
        if shot > 0 {
            // Advance the single-time state to the next starting point.
            let mut base = SecondOrderRhs::new(params);
            let traj = integrate(&mut base, &state, settings.spacing, integrator)?;
            state = traj.final_state.clone();
        }
        let (mut rhs, y0) = RegressionRhs::new(params, &state, settings.mode);
        let traj = integrate(&mut rhs, &y0, settings.t_max, &tau_settings)?;

        let l = rhs.base_layout();
        let photon = |y: &[f64]| match settings.mode {
            ModeTag::Main => l.photon_number(y),
            ModeTag::Filter => l
                .photon_number_b(y)
                .expect("filter correlation requires the two-mode system"),
        };
        let n_start = photon(traj.sample(0));
        let n_end = photon(&traj.final_state);
        if shot == 0 {
            n_phot_t0 = n_start;
            tau = traj.times().to_vec();
            acc = vec![Complex64::default(); tau.len()];
        }
        drift = drift.max((n_end - n_start).abs() / n_start.max(1e-12));
        for (a, (_, y)) in acc.iter_mut().zip(traj.iter()) {
            *a += rhs.correlation(y);
        }
    }

    let weight = 1.0 / settings.averages as f64;
    for a in acc.iter_mut() {
        *a *= weight;
    }
    let nonstationary = drift > 0.2;
    Ok(CorrelationSeries {
        tau,
        g1: acc,
        t0: settings.t0,
        mode: settings.mode,
        n_phot_t0,
        drift,
        nonstationary,
    })
}

/// Controls for the τ → ω transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSettings {
    /// Scale the spectrum to unit peak height.
    pub normalize: bool,
    /// Optional exponential window e^{−τ/τ_a}: suppresses truncation
    /// ringing at the cost of Lorentzian broadening by 2/τ_a.
    pub apodization: Option<f64>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            normalize: true,
            apodization: None,
        }
    }
}

/// A spectrum on a symmetric frequency grid.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub omega: Vec<f64>,
    /// S(ω), scaled to unit peak when `normalized` is set.
    pub s: Vec<f64>,
    /// The unscaled transform (equal to `s` when `normalized` is false).
    pub s_raw: Vec<f64>,
    pub normalized: bool,
}

/// Discrete one-sided Fourier transform of g¹ with trapezoidal end
/// correction:
///
/// S(ωⱼ) = 2 dτ Re[Σₘ g¹ₘ e^{−iωⱼτₘ} − g¹₀/2 − g¹_{M−1} e^{−iωⱼτ_{M−1}}/2]
///
/// on the symmetric grid ωⱼ = 2π(j − ⌊M/2⌋)/(M dτ). Summed against
/// Δω/2π this reproduces Re g¹(0) identically (the discrete Parseval
/// identity), so the raw spectrum carries the photon number as its integral.
pub fn spectrum_from_g1(
    series: &CorrelationSeries,
    settings: &SpectrumSettings,
) -> Result<SpectrumResult, SpectrumError> {
    let m = series.g1.len();
    if m < 4 {
        return Err(SpectrumError::BadSettings(format!(
            "need at least 4 correlation samples, got {m}"
        )));
    }
    if let Some(tau_a) = settings.apodization {
        if !(tau_a > 0.0) {
            return Err(SpectrumError::BadSettings(format!(
                "apodization time must be positive, got {tau_a}"
            )));
        }
    }
    let dt = series.tau[1] - series.tau[0];

    let mut buf: Vec<Complex64> = series.g1.clone();
    if let Some(tau_a) = settings.apodization {
        for (v, &t) in buf.iter_mut().zip(&series.tau) {
            *v *= (-t / tau_a).exp();
        }
    }
    let g0 = buf[0];
    let gl = buf[m - 1];

    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let half = (m / 2) as i64;
    let domega = std::f64::consts::TAU / (m as f64 * dt);
    let mut omega = Vec::with_capacity(m);
    let mut s_raw = Vec::with_capacity(m);
    let t_last = series.tau[m - 1];
    for j in 0..m as i64 {
        let shift = j - half;
        let w = shift as f64 * domega;
        // Wrapped DFT bin for the shifted index.
        let bin = shift.rem_euclid(m as i64) as usize;
        let tail = gl * Complex64::from_polar(1.0, -w * t_last);
        let val = 2.0 * dt * (buf[bin] - 0.5 * g0 - 0.5 * tail).re;
        omega.push(w);
        s_raw.push(val);
    }

    let s = if settings.normalize {
        let peak = s_raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if peak > 0.0 {
            s_raw.iter().map(|v| v / peak).collect()
        } else {
            s_raw.clone()
        }
    } else {
        s_raw.clone()
    };
    Ok(SpectrumResult {
        omega,
        s,
        s_raw,
        normalized: settings.normalize,
    })
}

/// Kind of a located spectral feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Peak,
    Dip,
}

/// A local extremum of the spectrum with its topographic prominence.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub kind: FeatureKind,
    /// Extremum position, refined by quadratic interpolation.
    pub omega: f64,
    /// Interpolated height at the extremum (of s for peaks, of s for dips).
    pub height: f64,
    /// Topographic prominence in the oriented signal.
    pub prominence: f64,
    /// Full width at half prominence.
    pub width: f64,
}

/// A reasonable prominence floor: 5% of the signal range.
pub fn default_min_prominence(s: &[f64]) -> f64 {
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    0.05 * (max - min)
}

/// Locate peaks and dips by topographic prominence.
///
/// Peaks come from the signal itself, dips from its negation, so a "dip" is
/// any local minimum sufficiently prominent against the surrounding signal —
/// including a narrow absorption window cut into a broad emission line.
/// Features are returned sorted by descending prominence.
pub fn locate_features(omega: &[f64], s: &[f64], min_prominence: f64) -> Vec<Feature> {
    assert_eq!(omega.len(), s.len());
    let mut out = extrema(omega, s, min_prominence, FeatureKind::Peak);
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let mut dips = extrema(omega, &neg, min_prominence, FeatureKind::Dip);
    for d in dips.iter_mut() {
        d.height = -d.height;
    }
    out.append(&mut dips);
    out.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    out
}

fn extrema(omega: &[f64], s: &[f64], min_prominence: f64, kind: FeatureKind) -> Vec<Feature> {
    let n = s.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        if !(s[i] > s[i - 1] && s[i] >= s[i + 1]) {
            continue;
        }
        // Left base: lowest point between this maximum and the nearest
        // strictly higher point (or the edge).
        let mut left_min = s[i];
        let mut j = i;
        while j > 0 && s[j - 1] <= s[i] {
            j -= 1;
            left_min = left_min.min(s[j]);
        }
        let mut right_min = s[i];
        let mut j = i;
        while j + 1 < n && s[j + 1] <= s[i] {
            j += 1;
            right_min = right_min.min(s[j]);
        }
        let prominence = s[i] - left_min.max(right_min);
        if prominence < min_prominence {
            continue;
        }

        // Quadratic vertex through the three samples around the maximum.
        let denom = s[i - 1] - 2.0 * s[i] + s[i + 1];
        let (delta, height) = if denom.abs() > 0.0 {
            let d = 0.5 * (s[i - 1] - s[i + 1]) / denom;
            (d.clamp(-0.5, 0.5), s[i] - 0.25 * (s[i - 1] - s[i + 1]) * d)
        } else {
            (0.0, s[i])
        };
        let domega = omega[1] - omega[0];
        let w_peak = omega[i] + delta * domega;

        // Full width where the signal crosses height − prominence/2,
        // linearly interpolated between samples.
        let level = s[i] - 0.5 * prominence;
        let mut wl = omega[0];
        let mut j = i;
        while j > 0 {
            if s[j - 1] < level {
                let f = (s[j] - level) / (s[j] - s[j - 1]);
                wl = omega[j] - f * domega;
                break;
            }
            j -= 1;
        }
        let mut wr = omega[n - 1];
        let mut j = i;
        while j + 1 < n {
            if s[j + 1] < level {
                let f = (s[j] - level) / (s[j] - s[j + 1]);
                wr = omega[j] + f * domega;
                break;
            }
            j += 1;
        }

        out.push(Feature {
            kind,
            omega: w_peak,
            height,
            prominence,
            width: wr - wl,
        });
    }
    out
}
