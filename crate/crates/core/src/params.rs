//! System parameters, config file handling and analytic threshold diagnostics.
//!
//! Config files are flat `key = value` TOML. Unknown keys are rejected so a
//! typo cannot silently fall back to a default; optional keys get documented
//! defaults. All rates are in units of Γ, lengths in λ, see the crate docs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulant::coupling;

/// Full parameter set of one simulation run.
///
/// The fields mirror the config keys one to one. `delta_c2` switches the
/// second ("filter") cavity mode on when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of atoms.
    pub n_atoms: usize,
    /// Single-atom cavity coupling amplitude g, in Γ.
    pub g: f64,
    /// Cavity field decay rate κ, in Γ.
    pub kappa: f64,
    /// Atomic linewidth. Fixed reference of the unit system; must equal 1.
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    /// Transverse drive Rabi amplitude Ω, in Γ.
    pub omega_pump: f64,
    /// Drive–atom detuning Δa = ω_drive − ω_atom, in Γ.
    pub delta_a: f64,
    /// Drive–cavity detuning Δc = ω_drive − ω_cavity, in Γ.
    pub delta_c: f64,
    /// Drive detuning of the filter mode; enables the two-mode system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_c2: Option<f64>,
    /// Gaussian mode waist w0 along y, in λ.
    pub waist: f64,
    /// Recoil frequency ωr, in Γ.
    pub omega_r: f64,
    /// RNG seed for the initial atomic distribution.
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    /// Integration horizon, in 1/Γ.
    #[serde(default = "defaults::t_final")]
    pub t_final: f64,
    /// Length of the trailing window used for time averages, in 1/Γ.
    #[serde(default = "defaults::avg_window")]
    pub avg_window: f64,
    /// Initial positions are drawn uniformly from [-h, h]² (in λ).
    #[serde(default = "defaults::pos_halfwidth")]
    pub init_pos_halfwidth: f64,
    /// Initial momenta are drawn uniformly from [-m, m]² (in ħk).
    #[serde(default = "defaults::mom_halfwidth")]
    pub init_mom_halfwidth: f64,
}

mod defaults {
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn t_final() -> f64 {
        100.0
    }
    pub fn avg_window() -> f64 {
        30.0
    }
    pub fn pos_halfwidth() -> f64 {
        2.0
    }
    pub fn mom_halfwidth() -> f64 {
        3.0
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid override `{0}` (expected key=value with a TOML literal value)")]
    Override(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("effective detuning undefined: delta_a must be nonzero")]
    ZeroAtomDetuning,
    #[error("threshold margin undefined: effective detuning is zero")]
    ZeroEffectiveDetuning,
    #[error("positions snapshot does not match n_atoms = {expected} (got {got})")]
    WrongLength { expected: usize, got: usize },
}

impl SystemParams {
    /// Whether the filter mode participates.
    pub fn two_mode(&self) -> bool {
        self.delta_c2.is_some()
    }

    /// Check every invariant the rest of the crate relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fin = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be finite")))
            }
        };
        fin("g", self.g)?;
        fin("kappa", self.kappa)?;
        fin("gamma", self.gamma)?;
        fin("omega_pump", self.omega_pump)?;
        fin("delta_a", self.delta_a)?;
        fin("delta_c", self.delta_c)?;
        if let Some(d2) = self.delta_c2 {
            fin("delta_c2", d2)?;
        }
        fin("waist", self.waist)?;
        fin("omega_r", self.omega_r)?;
        fin("t_final", self.t_final)?;
        fin("avg_window", self.avg_window)?;
        fin("init_pos_halfwidth", self.init_pos_halfwidth)?;
        fin("init_mom_halfwidth", self.init_mom_halfwidth)?;

        if self.n_atoms < 1 {
            return Err(ConfigError::Invalid("n_atoms must be at least 1".into()));
        }
        if self.kappa <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "kappa must be positive (got {})",
                self.kappa
            )));
        }
        if self.gamma != 1.0 {
            return Err(ConfigError::Invalid(format!(
                "gamma must equal 1: all rates are expressed in units of the atomic \
                 linewidth, rescale the other parameters instead (got {})",
                self.gamma
            )));
        }
        if self.waist <= 0.0 {
            return Err(ConfigError::Invalid("waist must be positive".into()));
        }
        if self.omega_r <= 0.0 {
            return Err(ConfigError::Invalid("omega_r must be positive".into()));
        }
        if self.t_final <= 0.0 {
            return Err(ConfigError::Invalid("t_final must be positive".into()));
        }
        if self.avg_window <= 0.0 {
            return Err(ConfigError::Invalid("avg_window must be positive".into()));
        }
        if self.init_pos_halfwidth < 0.0 {
            return Err(ConfigError::Invalid(
                "init_pos_halfwidth must not be negative".into(),
            ));
        }
        if self.init_mom_halfwidth < 0.0 {
            return Err(ConfigError::Invalid(
                "init_mom_halfwidth must not be negative".into(),
            ));
        }
        Ok(())
    }

    /// Serialize back to the config format (round-trips through
    /// [`from_toml_str`]).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("params serialize to TOML")
    }

    /// Shifted cavity resonance δ = Δc − (1/Δa)·Σᵢ g²(xᵢ, yᵢ).
    ///
    /// The sum runs over the atoms at the given positions; each atom pulls the
    /// cavity resonance dispersively by g²(x,y)/Δa.
    pub fn effective_detuning(&self, pos: &PositionsSnapshot) -> Result<f64, ParamError> {
        pos.check_len(self.n_atoms)?;
        if self.delta_a == 0.0 {
            return Err(ParamError::ZeroAtomDetuning);
        }
        let sum_g2: f64 = pos
            .iter()
            .map(|(x, y)| {
                let g = coupling(self, x, y);
                g * g
            })
            .sum();
        Ok(self.delta_c - sum_g2 / self.delta_a)
    }

    /// Margin of the self-organization threshold inequality,
    /// 2√N·g′·Ω/|Δa| − [(κ/2)² + δ²]/(2|δ|), with g′ the rms coupling over
    /// the atoms. Positive means above threshold.
    pub fn threshold_margin(&self, pos: &PositionsSnapshot) -> Result<f64, ParamError> {
        pos.check_len(self.n_atoms)?;
        if self.delta_a == 0.0 {
            return Err(ParamError::ZeroAtomDetuning);
        }
        let n = self.n_atoms as f64;
        let sum_g2: f64 = pos
            .iter()
            .map(|(x, y)| {
                let g = coupling(self, x, y);
                g * g
            })
            .sum();
        let delta = self.delta_c - sum_g2 / self.delta_a;
        if delta == 0.0 {
            return Err(ParamError::ZeroEffectiveDetuning);
        }
        let g_rms = (sum_g2 / n).sqrt();
        let lhs = 2.0 * n.sqrt() * g_rms * self.omega_pump / self.delta_a.abs();
        let rhs = ((self.kappa / 2.0).powi(2) + delta * delta) / (2.0 * delta.abs());
        Ok(lhs - rhs)
    }
}

/// Atom coordinates frozen at one instant, for the analytic diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionsSnapshot {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PositionsSnapshot {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "x and y must have equal length");
        Self { x, y }
    }

    /// All atoms at the given point (handy for pinned-atom comparisons).
    pub fn uniform(n: usize, x: f64, y: f64) -> Self {
        Self {
            x: vec![x; n],
            y: vec![y; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    fn check_len(&self, n: usize) -> Result<(), ParamError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(ParamError::WrongLength {
                expected: n,
                got: self.len(),
            })
        }
    }
}

/// Parse a config document, apply `key=value` overrides (in order, last one
/// wins), then validate.
pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<SystemParams, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(ov.clone()))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Override(ov.clone()));
        }
        // Parse the right-hand side as a TOML literal by wrapping it in a
        // one-line document.
        let wrapped: toml::Table = format!("v = {value}")
            .parse()
            .map_err(|_| ConfigError::Override(ov.clone()))?;
        table.insert(key.to_string(), wrapped["v"].clone());
    }
    let params: SystemParams = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    params.validate()?;
    Ok(params)
}

/// Load a config file with overrides; see [`from_toml_str`].
pub fn load_config(path: &str, overrides: &[String]) -> Result<SystemParams, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_string(),
        source,
    })?;
    from_toml_str(&text, overrides)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn fig1() -> SystemParams {
        SystemParams {
            n_atoms: 100,
            g: 1.0,
            kappa: 10.0,
            gamma: 1.0,
            omega_pump: 5.0,
            delta_a: -20.0,
            delta_c: -10.0,
            delta_c2: None,
            waist: 1000.0,
            omega_r: 1.0,
            seed: 1,
            t_final: 100.0,
            avg_window: 30.0,
            init_pos_halfwidth: 2.0,
            init_mom_halfwidth: 3.0,
        }
    }

    const FIG1_TOML: &str = "\
n_atoms = 100
g = 1.0
kappa = 10.0
omega_pump = 5.0
delta_a = -20.0
delta_c = -10.0
waist = 1000.0
omega_r = 1.0
";

    #[test]
    fn parses_canonical_file_and_applies_defaults() {
        let p = from_toml_str(FIG1_TOML, &[]).unwrap();
        assert_eq!(p, fig1());
        assert!(!p.two_mode());
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = format!("{FIG1_TOML}kapa = 3.0\n");
        let err = from_toml_str(&text, &[]).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
        assert!(err.to_string().contains("kapa"), "{err}");
    }

    #[test]
    fn missing_mandatory_key_is_an_error() {
        let text = "n_atoms = 2\ng = 1.0\n";
        assert!(from_toml_str(text, &[]).is_err());
    }

    #[test]
    fn negative_kappa_is_a_range_error() {
        let text = FIG1_TOML.replace("kappa = 10.0", "kappa = -1.0");
        let err = from_toml_str(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn gamma_must_be_one() {
        let text = format!("{FIG1_TOML}gamma = 2.0\n");
        let err = from_toml_str(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("units"), "{err}");
    }

    #[test]
    fn overrides_apply_in_order_last_wins() {
        let p = from_toml_str(
            FIG1_TOML,
            &[
                "omega_pump=7".into(),
                "n_atoms = 20".into(),
                "omega_pump = 8.5".into(),
                "delta_c2 = -20.0".into(),
            ],
        )
        .unwrap();
        assert_eq!(p.omega_pump, 8.5);
        assert_eq!(p.n_atoms, 20);
        assert_eq!(p.delta_c2, Some(-20.0));
        assert!(p.two_mode());
    }

    #[test]
    fn malformed_override_is_rejected() {
        assert!(from_toml_str(FIG1_TOML, &["omega_pump".into()]).is_err());
        assert!(from_toml_str(FIG1_TOML, &["omega_pump=".into()]).is_err());
        assert!(from_toml_str(FIG1_TOML, &["omega_pump=abc".into()]).is_err());
    }

    #[test]
    fn toml_round_trip_is_identity() {
        let p = from_toml_str(FIG1_TOML, &["delta_c2=-20".into(), "seed=42".into()]).unwrap();
        let text = p.to_toml_string();
        let q = from_toml_str(&text, &[]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn antinode_effective_detuning_matches_hand_value() {
        let p = fig1();
        let pos = PositionsSnapshot::uniform(100, 0.0, 0.0);
        let delta = p.effective_detuning(&pos).unwrap();
        assert!((delta - (-5.0)).abs() < 1e-12, "delta = {delta}");
        // Threshold margin crosses zero exactly at Omega = 5 here.
        let margin = p.threshold_margin(&pos).unwrap();
        assert!(margin.abs() < 1e-12, "margin = {margin}");
        let mut below = p.clone();
        below.omega_pump = 4.9;
        assert!(below.threshold_margin(&pos).unwrap() < 0.0);
        let mut above = p.clone();
        above.omega_pump = 5.1;
        assert!(above.threshold_margin(&pos).unwrap() > 0.0);
    }

    #[test]
    fn zero_delta_a_is_singular() {
        let mut p = fig1();
        p.delta_a = 0.0;
        let pos = PositionsSnapshot::uniform(100, 0.0, 0.0);
        assert!(matches!(
            p.effective_detuning(&pos),
            Err(ParamError::ZeroAtomDetuning)
        ));
        assert!(p.threshold_margin(&pos).is_err());
    }

    #[test]
    fn detuning_invariant_under_half_wavelength_shift() {
        let p = fig1();
        let xs: Vec<f64> = (0..100)
            .map(|i| crate::math::quantize_position(-2.0 + 0.04 * i as f64))
            .collect();
        let ys: Vec<f64> = (0..100).map(|i| 0.3 - 0.006 * i as f64).collect();
        let pos = PositionsSnapshot::new(xs.clone(), ys.clone());
        let shifted =
            PositionsSnapshot::new(xs.iter().map(|x| x + 0.5).collect(), ys);
        let d0 = p.effective_detuning(&pos).unwrap();
        let d1 = p.effective_detuning(&shifted).unwrap();
        assert_eq!(d0, d1); // exact, thanks to the exact trig reduction
    }

    #[test]
    fn zero_detuning_contour_follows_boundary_curve() {
        // At antinode geometry δ = 0 along Δc*(g) = N g²/Δa; check the sign
        // of δ flips across the curve and the curve is monotone in g.
        let mut p = fig1();
        p.n_atoms = 50;
        let pos = PositionsSnapshot::uniform(50, 0.0, 0.0);
        let mut prev_boundary = f64::INFINITY;
        for i in 1..=10 {
            let g = 0.2 * i as f64;
            p.g = g;
            let boundary = 50.0 * g * g / p.delta_a;
            assert!(boundary < prev_boundary, "curve must decrease with g");
            prev_boundary = boundary;
            p.delta_c = boundary + 0.11;
            assert!(p.effective_detuning(&pos).unwrap() > 0.0);
            p.delta_c = boundary - 0.11;
            assert!(p.effective_detuning(&pos).unwrap() < 0.0);
        }
    }

    proptest! {
        #[test]
        fn threshold_margin_monotone_in_pump(omega in 0.0f64..20.0, bump in 0.01f64..5.0) {
            let mut p = fig1();
            let pos = PositionsSnapshot::uniform(100, 0.0, 0.0);
            p.omega_pump = omega;
            let m0 = p.threshold_margin(&pos).unwrap();
            p.omega_pump = omega + bump;
            let m1 = p.threshold_margin(&pos).unwrap();
            prop_assert!(m1 > m0);
        }

        #[test]
        fn round_trip_arbitrary_numeric_fields(
            g in -3.0f64..3.0,
            kappa in 0.1f64..30.0,
            omega in 0.0f64..15.0,
            // TOML integers are signed 64-bit, so this is the full range a
            // config file (or --set override) can express.
            seed in 0u64..=i64::MAX as u64,
        ) {
            let mut p = fig1();
            p.g = g;
            p.kappa = kappa;
            p.omega_pump = omega;
            p.seed = seed;
            let q = from_toml_str(&p.to_toml_string(), &[]).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
