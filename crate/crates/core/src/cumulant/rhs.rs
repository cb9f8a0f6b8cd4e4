//! Second-order moment equations and their two-time (regression) extension.
//!
//! Working units: rates and frequencies in Γ, times in 1/Γ, lengths in λ
//! (wavenumber k = 2π), momenta in ħk. The equations couple the quantum
//! moments to the classical atomic coordinates through the mode functions
//! g·cos(kx)·e^(−y²/w0²) (main mode), g·sin(kx)·e^(−y²/w0²) (filter mode)
//! and Ω·cos(ky) (transverse drive).

use num_complex::Complex64;

use super::layout::{get_c, set_c, Layout};
use crate::integrator::OdeSystem;
use crate::math::{cos2pi, sin2pi, WAVENUMBER};
use crate::params::SystemParams;

/// Diagnostic tolerance: moment values this far outside their physical range
/// are flagged but tolerated (closure truncation noise).
pub(crate) const PHYS_EPS: f64 = 1e-6;
/// Hard limit for populations: beyond this the closure has left its domain
/// of validity and the integration aborts.
pub(crate) const PHYS_ABORT: f64 = 1e-2;
/// Hard limit for photon numbers. Looser than the population band: at strong
/// drive the switch-on transient can ring a photon number a few 10⁻² below
/// zero and recover (those samples are flagged, not fatal), while genuine
/// closure runaway shoots past this floor almost immediately.
pub(crate) const PHOTON_ABORT: f64 = 1e-1;

/// Per-atom mode amplitudes at the current positions, recomputed once per
/// derivative evaluation and shared by every equation family.
#[derive(Debug, Clone, Default)]
pub(crate) struct ModeAmps {
    /// g·cos(kxₘ)·e^(−yₘ²/w0²)
    pub ga: Vec<f64>,
    /// g·sin(kxₘ)·e^(−yₘ²/w0²)
    pub gb: Vec<f64>,
    /// Ω·cos(kyₘ)
    pub om: Vec<f64>,
    /// sin(kyₘ), for the drive force
    pub sy: Vec<f64>,
}

impl ModeAmps {
    pub fn zeroed(n: usize) -> Self {
        ModeAmps {
            ga: vec![0.0; n],
            gb: vec![0.0; n],
            om: vec![0.0; n],
            sy: vec![0.0; n],
        }
    }

    pub fn refresh(&mut self, p: &SystemParams, l: &Layout, s: &[f64]) {
        let w2 = p.waist * p.waist;
        for m in 0..l.n_atoms {
            let x = s[l.x + m];
            let y = s[l.y + m];
            let env = (-(y * y) / w2).exp();
            self.ga[m] = p.g * cos2pi(x) * env;
            self.gb[m] = p.g * sin2pi(x) * env;
            self.om[m] = p.omega_pump * cos2pi(y);
            self.sy[m] = sin2pi(y);
        }
    }
}

/// Range check shared by both closure levels: photon numbers near-nonnegative,
/// populations near-[0, 1], everything finite. `Ok(true)` is clean, `Ok(false)`
/// flags a tolerable excursion, `Err` demands an abort.
pub(crate) fn check_physicality(
    label: &str,
    photon_numbers: &[(&str, f64)],
    pops: &[f64],
) -> Result<bool, String> {
    let mut clean = true;
    for &(name, v) in photon_numbers {
        if !v.is_finite() {
            return Err(format!("{label}: {name} is not finite"));
        }
        if v < -PHOTON_ABORT {
            return Err(format!("{label}: {name} = {v:.3e} below -{PHOTON_ABORT}"));
        }
        if v < -PHYS_EPS {
            clean = false;
        }
    }
    for (m, &v) in pops.iter().enumerate() {
        if !v.is_finite() {
            return Err(format!("{label}: pop[{m}] is not finite"));
        }
        if v < -PHYS_ABORT || v > 1.0 + PHYS_ABORT {
            return Err(format!(
                "{label}: pop[{m}] = {v:.3e} outside [-{PHYS_ABORT}, 1+{PHYS_ABORT}]"
            ));
        }
        if v < -PHYS_EPS || v > 1.0 + PHYS_EPS {
            clean = false;
        }
    }
    Ok(clean)
}

/// The closed second-order moment equations, including the optional filter
/// mode (enabled when the params carry `delta_c2`).
#[derive(Debug, Clone)]
pub struct SecondOrderRhs {
    params: SystemParams,
    layout: Layout,
    pub(crate) amps: ModeAmps,
    /// Freeze the classical coordinates (their derivatives are zeroed).
    pub freeze_motion: bool,
    /// Freeze every population at its current value.
    pub freeze_populations: bool,
}

impl SecondOrderRhs {
    pub fn new(p: &SystemParams) -> Self {
        SecondOrderRhs {
            params: p.clone(),
            layout: Layout::second_order(p.n_atoms, p.two_mode()),
            amps: ModeAmps::zeroed(p.n_atoms),
            freeze_motion: false,
            freeze_populations: false,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    fn fill_derivative(&mut self, s: &[f64], ds: &mut [f64]) {
        self.amps.refresh(&self.params, &self.layout, s);
        let p = &self.params;
        let l = &self.layout;
        let n = l.n_atoms;
        let two = l.two_mode;
        let i = Complex64::I;
        let ModeAmps { ga, gb, om, sy } = &self.amps;

        let a = l.a_mean(s);
        let n_phot = s[l.n_phot];
        let (b, n_phot_b, cross) = if two {
            (l.b_mean(s), s[l.n_phot_b], l.ab_cross(s))
        } else {
            (Complex64::ZERO, 0.0, Complex64::ZERO)
        };

        // Field means: d⟨a⟩ = −(κ/2 − iΔc)⟨a⟩ − iΣ gaⱼ⟨σ⁻ⱼ⟩, same for ⟨b⟩
        // with the sine-mode coupling and detuning.
        let mut source_a = Complex64::ZERO;
        let mut source_b = Complex64::ZERO;
        for j in 0..n {
            let sj = l.sm(s, j);
            source_a += ga[j] * sj;
            if two {
                source_b += gb[j] * sj;
            }
        }
        set_c(
            ds,
            l.a,
            Complex64::new(-0.5 * p.kappa, p.delta_c) * a - i * source_a,
        );

        // Photon number: d⟨a†a⟩ = −κ⟨a†a⟩ + iΣ gaⱼ(⟨aσ⁺ⱼ⟩ − ⟨a†σ⁻ⱼ⟩).
        // The flux sum is purely imaginary, so the derivative is real.
        let mut flux_a = Complex64::ZERO;
        let mut flux_b = Complex64::ZERO;
        for j in 0..n {
            let aj = l.a_sp(s, j);
            flux_a += ga[j] * (aj - aj.conj());
            if two {
                let bj = l.b_sp(s, j);
                flux_b += gb[j] * (bj - bj.conj());
            }
        }
        let dn = i * flux_a;
        debug_assert!(dn.im.abs() < 1e-12, "d n_phot picked up Im {}", dn.im);
        ds[l.n_phot] = -p.kappa * n_phot + dn.re;

        if two {
            let delta_c2 = p.delta_c2.unwrap();
            set_c(
                ds,
                l.b,
                Complex64::new(-0.5 * p.kappa, delta_c2) * b - i * source_b,
            );
            let dnb = i * flux_b;
            debug_assert!(dnb.im.abs() < 1e-12, "d n_phot_b picked up Im {}", dnb.im);
            ds[l.n_phot_b] = -p.kappa * n_phot_b + dnb.re;

            // Cross moment: d⟨a†b⟩ = (−κ + i(Δc2 − Δc))⟨a†b⟩
            //               + iΣ gaⱼ⟨bσ⁺ⱼ⟩ − iΣ gbⱼ⟨a†σ⁻ⱼ⟩.
            let mut cross_src = Complex64::ZERO;
            for j in 0..n {
                cross_src += ga[j] * l.b_sp(s, j) - gb[j] * l.a_sp(s, j).conj();
            }
            set_c(
                ds,
                l.ab,
                Complex64::new(-p.kappa, delta_c2 - p.delta_c) * cross + i * cross_src,
            );
        }

        let atom_decay = Complex64::new(-0.5 * p.gamma, p.delta_a);
        let field_atom_decay =
            Complex64::new(-0.5 * (p.kappa + p.gamma), p.delta_c - p.delta_a);
        let filter_atom_decay = Complex64::new(
            -0.5 * (p.kappa + p.gamma),
            p.delta_c2.unwrap_or(0.0) - p.delta_a,
        );
        let kin = 2.0 * p.omega_r / WAVENUMBER;
        let waist_pull = 4.0 / (p.waist * p.waist * WAVENUMBER);

        for m in 0..n {
            let sm = l.sm(s, m);
            let am = l.a_sp(s, m);
            let pop = s[l.pop + m];
            let z = 2.0 * pop - 1.0;
            let bm = if two { l.b_sp(s, m) } else { Complex64::ZERO };

            // Coherence: d⟨σ⁻ₘ⟩ = −(Γ/2 − iΔa)⟨σ⁻ₘ⟩ + i(gaₘ⟨a⟩ + gbₘ⟨b⟩ + omₘ)·zₘ.
            let local_field = ga[m] * a + gb[m] * b + Complex64::from(om[m]);
            set_c(ds, l.sm + 2 * m, atom_decay * sm + i * local_field * z);

            // Field–atom moment:
            // d⟨aσ⁺ₘ⟩ = −((κ+Γ)/2 + i(Δa−Δc))⟨aσ⁺ₘ⟩
            //           + i gaₘ(⟨a†a⟩ − 2⟨a†a⟩popₘ − popₘ)
            //           − iΣ_{j≠m} gaⱼ⟨σ⁺ₘσ⁻ⱼ⟩ − i omₘ⟨a⟩zₘ − i gbₘ⟨a†b⟩*zₘ.
            let mut pair_sum_a = Complex64::ZERO;
            let mut pair_sum_b = Complex64::ZERO;
            for j in 0..n {
                if j == m {
                    continue;
                }
                let pmj = l.pair(s, m, j);
                pair_sum_a += ga[j] * pmj;
                if two {
                    pair_sum_b += gb[j] * pmj;
                }
            }
            let mut dam = field_atom_decay * am
                + i * ga[m] * (n_phot - 2.0 * n_phot * pop - pop)
                - i * pair_sum_a
                - i * om[m] * a * z;
            if two {
                dam -= i * gb[m] * cross.conj() * z;
            }
            set_c(ds, l.a_sp + 2 * m, dam);

            if two {
                // Filter-mode analogue; the cross moment enters unconjugated
                // because ⟨ab†⟩ pairs with the a-coupling here.
                let dbm = filter_atom_decay * bm
                    + i * gb[m] * (n_phot_b - 2.0 * n_phot_b * pop - pop)
                    - i * pair_sum_b
                    - i * om[m] * b * z
                    - i * ga[m] * cross * z;
                set_c(ds, l.b_sp + 2 * m, dbm);
            }

            // Population: d⟨σ⁺ₘσ⁻ₘ⟩ = −Γ popₘ − i gaₘ(⟨aσ⁺ₘ⟩ − ⟨a†σ⁻ₘ⟩)
            //             − i gbₘ(⟨bσ⁺ₘ⟩ − ⟨b†σ⁻ₘ⟩) − i omₘ(⟨σ⁺ₘ⟩ − ⟨σ⁻ₘ⟩).
            let dpop = -i * ga[m] * (am - am.conj())
                - i * gb[m] * (bm - bm.conj())
                - i * om[m] * (sm.conj() - sm);
            debug_assert!(dpop.im.abs() < 1e-12, "d pop picked up Im {}", dpop.im);
            ds[l.pop + m] = if self.freeze_populations {
                0.0
            } else {
                -p.gamma * pop + dpop.re
            };

            // Classical motion. The force is −(1/k)∂⟨H⟩/∂(x, y) in ħk per 1/Γ,
            // with ⟨H⟩ ⊃ 2gaₘRe⟨aσ⁺ₘ⟩ + 2gbₘRe⟨bσ⁺ₘ⟩ + 2omₘRe⟨σ⁺ₘ⟩;
            // along x the mode weights swap roles under differentiation
            // (∂x ga = −k·gb, ∂x gb = +k·ga).
            if self.freeze_motion {
                ds[l.x + m] = 0.0;
                ds[l.y + m] = 0.0;
                ds[l.px + m] = 0.0;
                ds[l.py + m] = 0.0;
            } else {
                ds[l.x + m] = kin * s[l.px + m];
                ds[l.y + m] = kin * s[l.py + m];
                ds[l.px + m] = 2.0 * (gb[m] * am.re - ga[m] * bm.re);
                ds[l.py + m] = waist_pull * s[l.y + m] * (ga[m] * am.re + gb[m] * bm.re)
                    + 2.0 * p.omega_pump * sy[m] * sm.re;
            }
        }

        // Pair correlations, m < j only; the lower triangle is the conjugate.
        // d⟨σ⁺ₘσ⁻ⱼ⟩ = −Γ⟨σ⁺ₘσ⁻ⱼ⟩ − i gaₘ⟨a†σ⁻ⱼ⟩zₘ + i gaⱼ⟨aσ⁺ₘ⟩zⱼ
        //             + i omⱼ⟨σ⁺ₘ⟩zⱼ − i omₘ⟨σ⁻ⱼ⟩zₘ  (+ filter analogues).
        for m in 0..n {
            let zm = 2.0 * s[l.pop + m] - 1.0;
            let sm = l.sm(s, m);
            let am = l.a_sp(s, m);
            let bm = if two { l.b_sp(s, m) } else { Complex64::ZERO };
            for j in m + 1..n {
                let zj = 2.0 * s[l.pop + j] - 1.0;
                let sj = l.sm(s, j);
                let aj = l.a_sp(s, j);
                let pmj = l.pair(s, m, j);
                let mut dp = -p.gamma * pmj - i * ga[m] * aj.conj() * zm
                    + i * ga[j] * am * zj
                    + i * om[j] * sm.conj() * zj
                    - i * om[m] * sj * zm;
                if two {
                    let bj = l.b_sp(s, j);
                    dp += -i * gb[m] * bj.conj() * zm + i * gb[j] * bm * zj;
                }
                set_c(ds, l.pair_index(m, j), dp);
            }
        }
    }
}

impl OdeSystem for SecondOrderRhs {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn rhs(&mut self, _t: f64, s: &[f64], ds: &mut [f64]) {
        self.fill_derivative(s, ds);
    }

    fn inspect(&self, _t: f64, s: &[f64]) -> Result<bool, String> {
        let l = &self.layout;
        let mut numbers = vec![("n_phot", s[l.n_phot])];
        if l.two_mode {
            numbers.push(("n_phot_b", s[l.n_phot_b]));
        }
        check_physicality("second-order state", &numbers, l.pops(s))
    }
}

/// Which mode's output spectrum a regression run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeTag {
    Main,
    Filter,
}

impl ModeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeTag::Main => "main",
            ModeTag::Filter => "filter",
        }
    }
}

impl std::str::FromStr for ModeTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(ModeTag::Main),
            "filter" => Ok(ModeTag::Filter),
            other => Err(format!(
                "unknown mode tag `{other}` (expected main or filter)"
            )),
        }
    }
}

/// Two-time correlation system. The single-time second-order state keeps
/// evolving (supplying couplings and populations as time-dependent
/// coefficients) while the appended regression vector
/// {⟨a†(t₀+τ)X(t₀)⟩, ⟨b†(t₀+τ)X(t₀)⟩, ⟨σ⁺ₘ(t₀+τ)X(t₀)⟩}, X the tagged mode,
/// obeys the adjoint linear equations with τ = 0 seeds taken from the
/// single-time second moments.
#[derive(Debug, Clone)]
pub struct RegressionRhs {
    base: SecondOrderRhs,
    tag: ModeTag,
    /// ⟨X(t₀)⟩ of the tagged mode — the constant the drive term injects
    /// into the regression coherences.
    q: Complex64,
    /// Offsets into the augmented vector (r_b == usize::MAX when absent).
    r_a: usize,
    r_b: usize,
    r_sm: usize,
    dim: usize,
}

impl RegressionRhs {
    pub fn new(p: &SystemParams, state_t0: &[f64], tag: ModeTag) -> (Self, Vec<f64>) {
        let base = SecondOrderRhs::new(p);
        let l = base.layout();
        assert_eq!(state_t0.len(), l.dim, "single-time state length mismatch");
        assert!(
            tag == ModeTag::Main || l.two_mode,
            "filter-mode correlation requires the two-mode model"
        );
        let n = l.n_atoms;
        let r_a = l.dim;
        let r_b = if l.two_mode { r_a + 2 } else { usize::MAX };
        let r_sm = if l.two_mode { r_a + 4 } else { r_a + 2 };
        let dim = r_sm + 2 * n;

        let mut y0 = vec![0.0; dim];
        y0[..l.dim].copy_from_slice(state_t0);
        let q;
        match tag {
            ModeTag::Main => {
                q = l.a_mean(state_t0);
                set_c(&mut y0, r_a, Complex64::from(state_t0[l.n_phot]));
                if l.two_mode {
                    set_c(&mut y0, r_b, l.ab_cross(state_t0).conj());
                }
                for m in 0..n {
                    set_c(&mut y0, r_sm + 2 * m, l.a_sp(state_t0, m));
                }
            }
            ModeTag::Filter => {
                q = l.b_mean(state_t0);
                set_c(&mut y0, r_a, l.ab_cross(state_t0));
                set_c(&mut y0, r_b, Complex64::from(state_t0[l.n_phot_b]));
                for m in 0..n {
                    set_c(&mut y0, r_sm + 2 * m, l.b_sp(state_t0, m));
                }
            }
        }
        let rhs = RegressionRhs {
            base,
            tag,
            q,
            r_a,
            r_b,
            r_sm,
            dim,
        };
        (rhs, y0)
    }

    /// g¹(τ) = ⟨X†(t₀+τ)X(t₀)⟩ of the tagged mode, read from an augmented
    /// state vector.
    pub fn correlation(&self, y: &[f64]) -> Complex64 {
        match self.tag {
            ModeTag::Main => get_c(y, self.r_a),
            ModeTag::Filter => get_c(y, self.r_b),
        }
    }

    pub fn base_layout(&self) -> Layout {
        self.base.layout()
    }

    pub fn tag(&self) -> ModeTag {
        self.tag
    }
}

impl OdeSystem for RegressionRhs {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let l = self.base.layout();
        self.base.rhs(t, &y[..l.dim], &mut dy[..l.dim]);
        // The base call just refreshed the mode amplitudes for the current
        // positions; reuse them for the regression block.
        let p = self.base.params();
        let n = l.n_atoms;
        let i = Complex64::I;
        let two = l.two_mode;
        let ModeAmps { ga, gb, om, .. } = &self.base.amps;

        let ra = get_c(y, self.r_a);
        let rb = if two { get_c(y, self.r_b) } else { Complex64::ZERO };

        // d⟨a†(τ)X⟩ = −(κ/2 + iΔc)⟨a†X⟩ + iΣ gaⱼ⟨σ⁺ⱼX⟩ (adjoint of d⟨a⟩).
        let mut src_a = Complex64::ZERO;
        let mut src_b = Complex64::ZERO;
        for m in 0..n {
            let rs = get_c(y, self.r_sm + 2 * m);
            src_a += ga[m] * rs;
            if two {
                src_b += gb[m] * rs;
            }
        }
        set_c(
            dy,
            self.r_a,
            Complex64::new(-0.5 * p.kappa, -p.delta_c) * ra + i * src_a,
        );
        if two {
            set_c(
                dy,
                self.r_b,
                Complex64::new(-0.5 * p.kappa, -p.delta_c2.unwrap()) * rb + i * src_b,
            );
        }

        // d⟨σ⁺ₘ(τ)X⟩ = −(Γ/2 + iΔa)⟨σ⁺ₘX⟩ − i zₘ(gaₘ⟨a†X⟩ + gbₘ⟨b†X⟩)
        //              − i omₘ zₘ⟨X(t₀)⟩, with zₘ from the single-time block.
        let decay = Complex64::new(-0.5 * p.gamma, -p.delta_a);
        for m in 0..n {
            let rs = get_c(y, self.r_sm + 2 * m);
            let z = 2.0 * y[l.pop + m] - 1.0;
            let mut d = decay * rs - i * z * ga[m] * ra - i * om[m] * z * self.q;
            if two {
                d -= i * z * gb[m] * rb;
            }
            set_c(dy, self.r_sm + 2 * m, d);
        }
    }

    fn inspect(&self, t: f64, y: &[f64]) -> Result<bool, String> {
        self.base.inspect(t, &y[..self.base.layout().dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::CumulantState;
    use crate::params::tests::fig1;

    fn eval(rhs: &mut SecondOrderRhs, s: &[f64]) -> Vec<f64> {
        let mut ds = vec![0.0; s.len()];
        rhs.rhs(0.0, s, &mut ds);
        ds
    }

    #[test]
    fn ground_vacuum_only_drives_coherences() {
        let mut p = fig1();
        p.n_atoms = 3;
        let mut st = CumulantState::zeroed(3, false);
        st.y = vec![0.0, 0.1, 0.3];
        let flat = st.pack();
        let mut rhs = SecondOrderRhs::new(&p);
        let ds = eval(&mut rhs, &flat);
        let l = rhs.layout();
        for m in 0..3 {
            // d⟨σ⁻ₘ⟩ = iΩcos(kyₘ)·(2·0 − 1) = −iΩcos(kyₘ)
            let d = get_c(&ds, l.sm + 2 * m);
            let expect = -p.omega_pump * cos2pi(st.y[m]);
            assert!(d.re.abs() < 1e-15);
            assert!((d.im - expect).abs() < 1e-12, "atom {m}: {} vs {expect}", d.im);
            assert_eq!(ds[l.pop + m], 0.0);
        }
        assert_eq!(get_c(&ds, l.a), Complex64::ZERO);
        assert_eq!(ds[l.n_phot], 0.0);
        // No force yet: it needs nonzero Re⟨aσ⁺⟩ or Re⟨σ⁺⟩.
        for m in 0..3 {
            assert_eq!(ds[l.px + m], 0.0);
            assert_eq!(ds[l.py + m], 0.0);
        }
    }

    #[test]
    fn decoupled_decay_rates() {
        // N=1, g=0, Ω=0, pop=1: pure exponential decay channels.
        let mut p = fig1();
        p.n_atoms = 1;
        p.g = 0.0;
        p.omega_pump = 0.0;
        let mut st = CumulantState::zeroed(1, false);
        st.pop[0] = 1.0;
        st.a = Complex64::new(0.3, -0.2);
        let flat = st.pack();
        let mut rhs = SecondOrderRhs::new(&p);
        let ds = eval(&mut rhs, &flat);
        let l = rhs.layout();
        assert!((ds[l.pop] - (-p.gamma)).abs() < 1e-15);
        let da = get_c(&ds, l.a);
        let expect = Complex64::new(-0.5 * p.kappa, p.delta_c) * st.a;
        assert!((da - expect).norm() < 1e-15);
    }

    #[test]
    fn frozen_linear_regime_scales_with_drive() {
        // Populations frozen at 0 and motion frozen: the (⟨a⟩, ⟨σ⁻ₘ⟩) block
        // is linear in (state, Ω). Doubling Ω and the first moments doubles
        // their derivatives exactly.
        let mut p = fig1();
        p.n_atoms = 4;
        let n = p.n_atoms;
        let mut st = CumulantState::zeroed(n, false);
        st.x = vec![0.05, -0.1, 0.2, 0.33];
        st.y = vec![0.01, 0.12, -0.07, 0.25];
        st.a = Complex64::new(0.05, -0.07);
        for m in 0..n {
            st.sm[m] = Complex64::new(0.01 * m as f64, 0.02);
        }
        let flat = st.pack();

        let mut doubled = st.clone();
        doubled.a *= 2.0;
        for v in doubled.sm.iter_mut() {
            *v *= 2.0;
        }
        let flat2 = doubled.pack();

        let mut rhs1 = SecondOrderRhs::new(&p);
        rhs1.freeze_motion = true;
        rhs1.freeze_populations = true;
        let mut p2 = p.clone();
        p2.omega_pump *= 2.0;
        let mut rhs2 = SecondOrderRhs::new(&p2);
        rhs2.freeze_motion = true;
        rhs2.freeze_populations = true;

        let ds1 = eval(&mut rhs1, &flat);
        let ds2 = eval(&mut rhs2, &flat2);
        let l = rhs1.layout();
        let da1 = get_c(&ds1, l.a);
        let da2 = get_c(&ds2, l.a);
        assert!((da2 - 2.0 * da1).norm() < 1e-14);
        for m in 0..n {
            let d1 = get_c(&ds1, l.sm + 2 * m);
            let d2 = get_c(&ds2, l.sm + 2 * m);
            assert!((d2 - 2.0 * d1).norm() < 1e-14, "atom {m}");
        }
    }

    #[test]
    fn filter_sector_decouples_at_cosine_antinodes() {
        let mut p = fig1();
        p.n_atoms = 2;
        p.delta_c2 = Some(-20.0);
        let mut st = CumulantState::zeroed(2, true);
        st.x = vec![0.0, 0.5]; // sin(kx) = 0 exactly at both
        if let Some(f) = st.filter.as_mut() {
            f.b = Complex64::new(0.4, 0.1);
        }
        let flat = st.pack();
        let mut rhs = SecondOrderRhs::new(&p);
        let ds = eval(&mut rhs, &flat);
        let l = rhs.layout();
        let db = get_c(&ds, l.b);
        let expect =
            Complex64::new(-0.5 * p.kappa, p.delta_c2.unwrap()) * Complex64::new(0.4, 0.1);
        assert!((db - expect).norm() < 1e-15, "free decay: {db} vs {expect}");
        assert_eq!(ds[l.n_phot_b], 0.0);
    }

    #[test]
    fn physicality_flags_and_aborts() {
        let mut p = fig1();
        p.n_atoms = 1;
        let rhs = SecondOrderRhs::new(&p);
        let l = rhs.layout();
        let mut s = vec![0.0; l.dim];
        assert_eq!(rhs.inspect(0.0, &s), Ok(true));
        s[l.n_phot] = -1e-5; // flagged, but tolerated
        assert_eq!(rhs.inspect(0.0, &s), Ok(false));
        s[l.n_phot] = -0.5;
        assert!(rhs.inspect(0.0, &s).is_err());
        s[l.n_phot] = 0.0;
        s[l.pop] = 1.5;
        assert!(rhs.inspect(0.0, &s).is_err());
        s[l.pop] = f64::NAN;
        assert!(rhs.inspect(0.0, &s).is_err());
    }

    #[test]
    fn regression_seeds_match_single_time_moments() {
        let mut p = fig1();
        p.n_atoms = 2;
        let mut st = CumulantState::zeroed(2, false);
        st.n_phot = 0.7;
        st.a = Complex64::new(0.5, 0.25);
        st.a_sp[0] = Complex64::new(0.1, -0.2);
        st.a_sp[1] = Complex64::new(-0.3, 0.05);
        let flat = st.pack();
        let (reg, y0) = RegressionRhs::new(&p, &flat, ModeTag::Main);
        assert_eq!(y0.len(), reg.dim());
        assert_eq!(reg.correlation(&y0), Complex64::from(0.7));
        let l = reg.base_layout();
        assert_eq!(&y0[..l.dim], &flat[..]);
        assert_eq!(get_c(&y0, reg.r_sm), st.a_sp[0]);
        assert_eq!(get_c(&y0, reg.r_sm + 2), st.a_sp[1]);
    }

    #[test]
    fn empty_cavity_regression_reduces_to_cavity_pole() {
        // g = Ω = 0: dR_a/dτ = −(κ/2 + iΔc)R_a with everything else inert.
        let mut p = fig1();
        p.n_atoms = 1;
        p.g = 0.0;
        p.omega_pump = 0.0;
        let mut st = CumulantState::zeroed(1, false);
        st.n_phot = 1.0;
        let flat = st.pack();
        let (mut reg, y0) = RegressionRhs::new(&p, &flat, ModeTag::Main);
        let mut dy = vec![0.0; y0.len()];
        reg.rhs(0.0, &y0, &mut dy);
        let dra = get_c(&dy, reg.r_a);
        let expect = Complex64::new(-0.5 * p.kappa, -p.delta_c);
        assert!((dra - expect).norm() < 1e-15);
    }

    #[test]
    fn filter_tag_seeds_from_b_sector() {
        let mut p = fig1();
        p.n_atoms = 1;
        p.delta_c2 = Some(-20.0);
        let mut st = CumulantState::zeroed(1, true);
        let f = st.filter.as_mut().unwrap();
        f.n_phot_b = 0.4;
        f.b_sp[0] = Complex64::new(0.02, 0.03);
        f.ab_cross = Complex64::new(0.1, -0.6);
        let flat = st.pack();
        let (reg, y0) = RegressionRhs::new(&p, &flat, ModeTag::Filter);
        assert_eq!(reg.correlation(&y0), Complex64::from(0.4));
        assert_eq!(get_c(&y0, reg.r_a), Complex64::new(0.1, -0.6));
        assert_eq!(get_c(&y0, reg.r_sm), Complex64::new(0.02, 0.03));
    }
}
