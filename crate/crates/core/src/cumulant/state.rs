//! Structured views of the flat state vectors.
//!
//! The integrator only sees `&[f64]`; these structs give tests and callers a
//! typed way to build initial conditions and to read out results.

use num_complex::Complex64;

use super::layout::{get_c, set_c, Layout};

/// Second-order cumulant state: field, atomic and field-atom moments plus
/// the classical phase-space coordinates of every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantState {
    pub a: Complex64,
    pub sm: Vec<Complex64>,
    pub n_phot: f64,
    pub a_sp: Vec<Complex64>,
    pub pop: Vec<f64>,
    /// Upper triangle m < j of ⟨σ⁺ₘσ⁻ⱼ⟩ in row-major order.
    pub pair: Vec<Complex64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    /// Filter-mode sector; `None` for the single-mode model.
    pub filter: Option<FilterState>,
}

/// Moments involving the second (filter) cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub b: Complex64,
    pub n_phot_b: f64,
    pub b_sp: Vec<Complex64>,
    pub ab_cross: Complex64,
}

impl FilterState {
    pub fn zeroed(n: usize) -> Self {
        FilterState {
            b: Complex64::ZERO,
            n_phot_b: 0.0,
            b_sp: vec![Complex64::ZERO; n],
            ab_cross: Complex64::ZERO,
        }
    }
}

impl CumulantState {
    /// All moments zero (atoms in the ground state, cavity in vacuum),
    /// positions and momenta zero.
    pub fn zeroed(n: usize, two_mode: bool) -> Self {
        CumulantState {
            a: Complex64::ZERO,
            sm: vec![Complex64::ZERO; n],
            n_phot: 0.0,
            a_sp: vec![Complex64::ZERO; n],
            pop: vec![0.0; n],
            pair: vec![Complex64::ZERO; n * n.saturating_sub(1) / 2],
            x: vec![0.0; n],
            y: vec![0.0; n],
            px: vec![0.0; n],
            py: vec![0.0; n],
            filter: two_mode.then(|| FilterState::zeroed(n)),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.sm.len()
    }

    pub fn layout(&self) -> Layout {
        Layout::second_order(self.n_atoms(), self.filter.is_some())
    }

    /// Serialize into the flat layout used by the integrator.
    pub fn pack(&self) -> Vec<f64> {
        let n = self.n_atoms();
        let l = self.layout();
        assert_eq!(self.a_sp.len(), n);
        assert_eq!(self.pop.len(), n);
        assert_eq!(self.pair.len(), n * n.saturating_sub(1) / 2);
        for v in [&self.x, &self.y, &self.px, &self.py] {
            assert_eq!(v.len(), n);
        }
        let mut s = vec![0.0; l.dim];
        set_c(&mut s, l.a, self.a);
        for m in 0..n {
            set_c(&mut s, l.sm + 2 * m, self.sm[m]);
            set_c(&mut s, l.a_sp + 2 * m, self.a_sp[m]);
            s[l.pop + m] = self.pop[m];
            s[l.x + m] = self.x[m];
            s[l.y + m] = self.y[m];
            s[l.px + m] = self.px[m];
            s[l.py + m] = self.py[m];
        }
        s[l.n_phot] = self.n_phot;
        let mut k = 0;
        for m in 0..n {
            for j in m + 1..n {
                set_c(&mut s, l.pair_index(m, j), self.pair[k]);
                k += 1;
            }
        }
        if let Some(f) = &self.filter {
            assert_eq!(f.b_sp.len(), n);
            set_c(&mut s, l.b, f.b);
            s[l.n_phot_b] = f.n_phot_b;
            for m in 0..n {
                set_c(&mut s, l.b_sp + 2 * m, f.b_sp[m]);
            }
            set_c(&mut s, l.ab, f.ab_cross);
        }
        s
    }

    /// Inverse of [`pack`](Self::pack).
    pub fn unpack(s: &[f64], n: usize, two_mode: bool) -> Self {
        let l = Layout::second_order(n, two_mode);
        assert_eq!(s.len(), l.dim, "flat state length mismatch");
        let mut st = CumulantState::zeroed(n, two_mode);
        st.a = get_c(s, l.a);
        st.n_phot = s[l.n_phot];
        for m in 0..n {
            st.sm[m] = get_c(s, l.sm + 2 * m);
            st.a_sp[m] = get_c(s, l.a_sp + 2 * m);
            st.pop[m] = s[l.pop + m];
            st.x[m] = s[l.x + m];
            st.y[m] = s[l.y + m];
            st.px[m] = s[l.px + m];
            st.py[m] = s[l.py + m];
        }
        let mut k = 0;
        for m in 0..n {
            for j in m + 1..n {
                st.pair[k] = get_c(s, l.pair_index(m, j));
                k += 1;
            }
        }
        if two_mode {
            let mut f = FilterState::zeroed(n);
            f.b = get_c(s, l.b);
            f.n_phot_b = s[l.n_phot_b];
            for m in 0..n {
                f.b_sp[m] = get_c(s, l.b_sp + 2 * m);
            }
            f.ab_cross = get_c(s, l.ab);
            st.filter = Some(f);
        }
        st
    }
}

/// Mean-field state: only first moments survive the factorization, but the
/// populations stay dynamical.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub a: Complex64,
    pub sm: Vec<Complex64>,
    pub pop: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub b: Option<Complex64>,
}

impl MeanFieldState {
    pub fn zeroed(n: usize, two_mode: bool) -> Self {
        MeanFieldState {
            a: Complex64::ZERO,
            sm: vec![Complex64::ZERO; n],
            pop: vec![0.0; n],
            x: vec![0.0; n],
            y: vec![0.0; n],
            px: vec![0.0; n],
            py: vec![0.0; n],
            b: two_mode.then_some(Complex64::ZERO),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.sm.len()
    }

    pub fn layout(&self) -> Layout {
        Layout::mean_field(self.n_atoms(), self.b.is_some())
    }

    pub fn pack(&self) -> Vec<f64> {
        let n = self.n_atoms();
        let l = self.layout();
        let mut s = vec![0.0; l.dim];
        set_c(&mut s, l.a, self.a);
        for m in 0..n {
            set_c(&mut s, l.sm + 2 * m, self.sm[m]);
            s[l.pop + m] = self.pop[m];
            s[l.x + m] = self.x[m];
            s[l.y + m] = self.y[m];
            s[l.px + m] = self.px[m];
            s[l.py + m] = self.py[m];
        }
        if let Some(b) = self.b {
            set_c(&mut s, l.b, b);
        }
        s
    }

    pub fn unpack(s: &[f64], n: usize, two_mode: bool) -> Self {
        let l = Layout::mean_field(n, two_mode);
        assert_eq!(s.len(), l.dim, "flat state length mismatch");
        let mut st = MeanFieldState::zeroed(n, two_mode);
        st.a = get_c(s, l.a);
        for m in 0..n {
            st.sm[m] = get_c(s, l.sm + 2 * m);
            st.pop[m] = s[l.pop + m];
            st.x[m] = s[l.x + m];
            st.y[m] = s[l.y + m];
            st.px[m] = s[l.px + m];
            st.py[m] = s[l.py + m];
        }
        if two_mode {
            st.b = Some(get_c(s, l.b));
        }
        st
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled_cumulant(n: usize, two_mode: bool) -> CumulantState {
        let mut st = CumulantState::zeroed(n, two_mode);
        let z = |k: usize| Complex64::new(0.01 * k as f64, -0.003 * k as f64);
        st.a = z(1);
        st.n_phot = 0.5;
        for m in 0..n {
            st.sm[m] = z(2 + m);
            st.a_sp[m] = z(20 + m);
            st.pop[m] = 0.01 * m as f64;
            st.x[m] = 0.1 * m as f64;
            st.y[m] = -0.2 * m as f64;
            st.px[m] = 0.3 * m as f64;
            st.py[m] = -0.4 * m as f64;
        }
        for (k, p) in st.pair.iter_mut().enumerate() {
            *p = z(100 + k);
        }
        if let Some(f) = st.filter.as_mut() {
            f.b = z(200);
            f.n_phot_b = 0.25;
            for m in 0..n {
                f.b_sp[m] = z(210 + m);
            }
            f.ab_cross = z(300);
        }
        st
    }

    #[test]
    fn cumulant_pack_unpack_round_trip() {
        for two_mode in [false, true] {
            for n in [1usize, 2, 4] {
                let st = filled_cumulant(n, two_mode);
                let flat = st.pack();
                assert_eq!(flat.len(), st.layout().dim);
                assert_eq!(CumulantState::unpack(&flat, n, two_mode), st);
            }
        }
    }

    #[test]
    fn mean_field_pack_unpack_round_trip() {
        for two_mode in [false, true] {
            let n = 3;
            let mut st = MeanFieldState::zeroed(n, two_mode);
            st.a = Complex64::new(0.4, -0.1);
            for m in 0..n {
                st.sm[m] = Complex64::new(m as f64, -0.5);
                st.pop[m] = 0.2 * m as f64;
                st.x[m] = m as f64;
                st.px[m] = -(m as f64);
            }
            if let Some(b) = st.b.as_mut() {
                *b = Complex64::new(-0.3, 0.7);
            }
            let flat = st.pack();
            assert_eq!(flat.len(), st.layout().dim);
            assert_eq!(MeanFieldState::unpack(&flat, n, two_mode), st);
        }
    }

    #[test]
    fn zeroed_is_all_zero_when_packed() {
        let st = CumulantState::zeroed(4, true);
        assert!(st.pack().iter().all(|&v| v == 0.0));
        let mf = MeanFieldState::zeroed(4, true);
        assert!(mf.pack().iter().all(|&v| v == 0.0));
    }
}
