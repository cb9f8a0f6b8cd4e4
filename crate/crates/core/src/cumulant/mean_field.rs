//! First-order (mean-field) reduction of the moment equations.
//!
//! Every mixed moment factorizes into first moments — ⟨aσ⁺ₘ⟩ → ⟨a⟩⟨σ⁺ₘ⟩,
//! ⟨σ⁺ₘσ⁻ⱼ⟩ → ⟨σ⁺ₘ⟩⟨σ⁻ⱼ⟩, ⟨a†a⟩ → |⟨a⟩|² — while the populations stay
//! dynamical, driven by the factorized field–atom products. This shrinks the
//! state from O(N²) to O(N) variables at the cost of all quantum
//! correlations, which is the trade the large parameter scans make.

use num_complex::Complex64;

use super::layout::{set_c, Layout};
use super::rhs::{check_physicality, ModeAmps};
use crate::integrator::OdeSystem;
use crate::math::WAVENUMBER;
use crate::params::SystemParams;

/// Mean-field equations over the reduced layout
/// `[⟨a⟩, {⟨σ⁻ₘ⟩}, {popₘ}, {x}, {y}, {px}, {py}, (⟨b⟩)]`.
#[derive(Debug, Clone)]
pub struct MeanFieldRhs {
    params: SystemParams,
    layout: Layout,
    amps: ModeAmps,
    /// Freeze the classical coordinates (their derivatives are zeroed).
    pub freeze_motion: bool,
}

impl MeanFieldRhs {
    pub fn new(p: &SystemParams) -> Self {
        MeanFieldRhs {
            params: p.clone(),
            layout: Layout::mean_field(p.n_atoms, p.two_mode()),
            amps: ModeAmps::zeroed(p.n_atoms),
            freeze_motion: false,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }
}

impl OdeSystem for MeanFieldRhs {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn rhs(&mut self, _t: f64, s: &[f64], ds: &mut [f64]) {
        self.amps.refresh(&self.params, &self.layout, s);
        let p = &self.params;
        let l = &self.layout;
        let n = l.n_atoms;
        let two = l.two_mode;
        let i = Complex64::I;
        let ModeAmps { ga, gb, om, sy } = &self.amps;

        let a = l.a_mean(s);
        let b = if two { l.b_mean(s) } else { Complex64::ZERO };

        // Field means are identical in form to the second-order set: they
        // only involve first moments.
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
        if two {
            set_c(
                ds,
                l.b,
                Complex64::new(-0.5 * p.kappa, p.delta_c2.unwrap()) * b - i * source_b,
            );
        }

        let atom_decay = Complex64::new(-0.5 * p.gamma, p.delta_a);
        let kin = 2.0 * p.omega_r / WAVENUMBER;
        let waist_pull = 4.0 / (p.waist * p.waist * WAVENUMBER);

        for m in 0..n {
            let sm = l.sm(s, m);
            let pop = s[l.pop + m];
            let z = 2.0 * pop - 1.0;
            // Factorized field–atom moments.
            let am = a * sm.conj();
            let bm = b * sm.conj();

            let local_field = ga[m] * a + gb[m] * b + Complex64::from(om[m]);
            set_c(ds, l.sm + 2 * m, atom_decay * sm + i * local_field * z);

            let dpop = -i * ga[m] * (am - am.conj())
                - i * gb[m] * (bm - bm.conj())
                - i * om[m] * (sm.conj() - sm);
            debug_assert!(dpop.im.abs() < 1e-12, "d pop picked up Im {}", dpop.im);
            ds[l.pop + m] = -p.gamma * pop + dpop.re;

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
    }

    fn inspect(&self, _t: f64, s: &[f64]) -> Result<bool, String> {
        let l = &self.layout;
        // |⟨a⟩|² is nonnegative by construction; only finiteness and the
        // populations need checking here.
        let numbers = [("n_phot", l.photon_number(s))];
        check_physicality("mean-field state", &numbers, l.pops(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{init_mean_field, init_second_order, MeanFieldState, SecondOrderRhs};
    use crate::cumulant::layout::get_c;
    use crate::params::tests::fig1;

    #[test]
    fn ground_vacuum_first_derivative_matches_second_order() {
        // All second moments vanish at the ground/vacuum start, so both
        // closure levels produce identical first-moment derivatives.
        let mut p = fig1();
        p.n_atoms = 5;
        p.seed = 21;
        let mf = init_mean_field(&p);
        let so = init_second_order(&p);
        let mut mf_rhs = MeanFieldRhs::new(&p);
        let mut so_rhs = SecondOrderRhs::new(&p);
        let fm = mf.pack();
        let fs = so.pack();
        let mut dm = vec![0.0; fm.len()];
        let mut dso = vec![0.0; fs.len()];
        mf_rhs.rhs(0.0, &fm, &mut dm);
        so_rhs.rhs(0.0, &fs, &mut dso);
        let lm = mf_rhs.layout();
        let ls = so_rhs.layout();
        assert_eq!(get_c(&dm, lm.a), get_c(&dso, ls.a));
        for m in 0..p.n_atoms {
            assert_eq!(get_c(&dm, lm.sm + 2 * m), get_c(&dso, ls.sm + 2 * m));
            assert_eq!(dm[lm.pop + m], dso[ls.pop + m]);
            assert_eq!(dm[lm.px + m], dso[ls.px + m]);
            assert_eq!(dm[lm.py + m], dso[ls.py + m]);
        }
    }

    #[test]
    fn pinned_weakly_driven_atom_reaches_linear_dipole_steady_state() {
        // g = 0, single pinned atom, weak drive: the steady coherence obeys
        // 0 = −(Γ/2 − iΔa)s − iΩ (z ≈ −1), i.e. |s| ≈ Ω/√((Γ/2)² + Δa²).
        let mut p = fig1();
        p.n_atoms = 1;
        p.g = 0.0;
        p.omega_pump = 0.1;
        let mut st = MeanFieldState::zeroed(1, false);
        st.x[0] = 0.0;
        st.y[0] = 0.0;
        let mut rhs = MeanFieldRhs::new(&p);
        rhs.freeze_motion = true;
        // Relax with coarse explicit Euler — enough to find the fixed point
        // of a fast linear system without pulling in the integrator.
        let mut s = st.pack();
        let mut ds = vec![0.0; s.len()];
        let dt = 1e-3;
        for _ in 0..200_000 {
            rhs.rhs(0.0, &s, &mut ds);
            for (v, d) in s.iter_mut().zip(ds.iter()) {
                *v += dt * d;
            }
        }
        let l = rhs.layout();
        let sm = l.sm(&s, 0);
        let expect = p.omega_pump / (0.25 * p.gamma * p.gamma + p.delta_a * p.delta_a).sqrt();
        assert!(
            (sm.norm() - expect).abs() < 0.01 * expect,
            "|s| = {} vs {expect}",
            sm.norm()
        );
    }

    #[test]
    fn derived_photon_number_is_modulus_squared() {
        let mut st = MeanFieldState::zeroed(2, false);
        st.a = Complex64::new(3.0, -4.0);
        let flat = st.pack();
        let l = st.layout();
        assert_eq!(l.photon_number(&flat), 25.0);
    }
}
