//! Flat state-vector layout shared by the integrator, CSV export and FFI.
//!
//! Complex entries are stored as adjacent (re, im) pairs. Second-order order:
//!
//! ```text
//! [a_re, a_im,
//!  sm0_re, sm0_im, …, sm{N-1}_im,
//!  n_phot,
//!  asp0_re, …, asp{N-1}_im,
//!  pop0, …, pop{N-1},
//!  pair{m}_{j} for m < j in row-major order (re, im each),
//!  x0…x{N-1}, y0…, px0…, py0…,
//!  (two-mode tail) b_re, b_im, n_phot_b, bsp0_re, …, bsp{N-1}_im, ab_re, ab_im]
//! ```
//!
//! The conjugate half of the pair matrix is implicit: ⟨σ⁺ⱼσ⁻ₘ⟩ = ⟨σ⁺ₘσ⁻ⱼ⟩*.
//! Mean-field order: `[a_re, a_im, sm…, pop…, x…, y…, px…, py…, (b_re, b_im)]`.

use num_complex::Complex64;

/// Which closure level a flat vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    SecondOrder,
    MeanField,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::SecondOrder => "second-order",
            Engine::MeanField => "mean-field",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "second-order" | "second_order" => Ok(Engine::SecondOrder),
            "mean-field" | "mean_field" => Ok(Engine::MeanField),
            other => Err(format!(
                "unknown engine `{other}` (expected second-order or mean-field)"
            )),
        }
    }
}

/// Index map for one engine/atom-count combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub engine: Engine,
    pub n_atoms: usize,
    pub two_mode: bool,
    pub a: usize,
    pub sm: usize,
    /// Second order only (mean field derives n_phot = |⟨a⟩|²).
    pub n_phot: usize,
    pub a_sp: usize,
    pub pop: usize,
    pub pair: usize,
    pub x: usize,
    pub y: usize,
    pub px: usize,
    pub py: usize,
    pub b: usize,
    pub n_phot_b: usize,
    pub b_sp: usize,
    pub ab: usize,
    pub dim: usize,
}

impl Layout {
    pub fn second_order(n: usize, two_mode: bool) -> Self {
        let a = 0;
        let sm = 2;
        let n_phot = sm + 2 * n;
        let a_sp = n_phot + 1;
        let pop = a_sp + 2 * n;
        let pair = pop + n;
        let x = pair + n * n.saturating_sub(1);
        let y = x + n;
        let px = y + n;
        let py = px + n;
        let b = py + n;
        let n_phot_b = b + 2;
        let b_sp = n_phot_b + 1;
        let ab = b_sp + 2 * n;
        let dim = if two_mode { ab + 2 } else { b };
        Layout {
            engine: Engine::SecondOrder,
            n_atoms: n,
            two_mode,
            a,
            sm,
            n_phot,
            a_sp,
            pop,
            pair,
            x,
            y,
            px,
            py,
            b,
            n_phot_b,
            b_sp,
            ab,
            dim,
        }
    }

    pub fn mean_field(n: usize, two_mode: bool) -> Self {
        let a = 0;
        let sm = 2;
        let pop = sm + 2 * n;
        let x = pop + n;
        let y = x + n;
        let px = y + n;
        let py = px + n;
        let b = py + n;
        let dim = if two_mode { b + 2 } else { b };
        Layout {
            engine: Engine::MeanField,
            n_atoms: n,
            two_mode,
            a,
            sm,
            n_phot: usize::MAX,
            a_sp: usize::MAX,
            pop,
            pair: usize::MAX,
            x,
            y,
            px,
            py,
            b,
            n_phot_b: usize::MAX,
            b_sp: usize::MAX,
            ab: usize::MAX,
            dim,
        }
    }

    pub fn new(engine: Engine, n: usize, two_mode: bool) -> Self {
        match engine {
            Engine::SecondOrder => Self::second_order(n, two_mode),
            Engine::MeanField => Self::mean_field(n, two_mode),
        }
    }

    /// Offset (in reals) of the pair correlation ⟨σ⁺ₘσ⁻ⱼ⟩ for m < j.
    #[inline]
    pub fn pair_index(&self, m: usize, j: usize) -> usize {
        debug_assert!(m < j && j < self.n_atoms);
        let n = self.n_atoms;
        self.pair + 2 * (m * (2 * n - m - 1) / 2 + (j - m - 1))
    }

    /// ⟨σ⁺ₘσ⁻ⱼ⟩ for any m ≠ j (conjugated below the diagonal).
    pub fn pair(&self, s: &[f64], m: usize, j: usize) -> Complex64 {
        if m < j {
            get_c(s, self.pair_index(m, j))
        } else {
            get_c(s, self.pair_index(j, m)).conj()
        }
    }

    pub fn a_mean(&self, s: &[f64]) -> Complex64 {
        get_c(s, self.a)
    }

    pub fn b_mean(&self, s: &[f64]) -> Complex64 {
        debug_assert!(self.two_mode);
        get_c(s, self.b)
    }

    pub fn sm(&self, s: &[f64], m: usize) -> Complex64 {
        get_c(s, self.sm + 2 * m)
    }

    pub fn a_sp(&self, s: &[f64], m: usize) -> Complex64 {
        debug_assert_eq!(self.engine, Engine::SecondOrder);
        get_c(s, self.a_sp + 2 * m)
    }

    pub fn b_sp(&self, s: &[f64], m: usize) -> Complex64 {
        debug_assert!(self.two_mode);
        get_c(s, self.b_sp + 2 * m)
    }

    pub fn ab_cross(&self, s: &[f64]) -> Complex64 {
        debug_assert!(self.two_mode);
        get_c(s, self.ab)
    }

    /// Photon number of the main mode (derived for mean field).
    pub fn photon_number(&self, s: &[f64]) -> f64 {
        match self.engine {
            Engine::SecondOrder => s[self.n_phot],
            Engine::MeanField => self.a_mean(s).norm_sqr(),
        }
    }

    /// Photon number of the filter mode, if present.
    pub fn photon_number_b(&self, s: &[f64]) -> Option<f64> {
        if !self.two_mode {
            return None;
        }
        Some(match self.engine {
            Engine::SecondOrder => s[self.n_phot_b],
            Engine::MeanField => self.b_mean(s).norm_sqr(),
        })
    }

    pub fn xs<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.x..self.x + self.n_atoms]
    }

    pub fn ys<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.y..self.y + self.n_atoms]
    }

    pub fn pxs<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.px..self.px + self.n_atoms]
    }

    pub fn pys<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.py..self.py + self.n_atoms]
    }

    pub fn pops<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.pop..self.pop + self.n_atoms]
    }

    /// Column names matching the flat layout, for CSV export.
    pub fn csv_headers(&self) -> Vec<String> {
        let n = self.n_atoms;
        let mut h = Vec::with_capacity(self.dim);
        h.push("a_re".into());
        h.push("a_im".into());
        for m in 0..n {
            h.push(format!("sm{m}_re"));
            h.push(format!("sm{m}_im"));
        }
        if self.engine == Engine::SecondOrder {
            h.push("n_phot".into());
            for m in 0..n {
                h.push(format!("asp{m}_re"));
                h.push(format!("asp{m}_im"));
            }
        }
        for m in 0..n {
            h.push(format!("pop{m}"));
        }
        if self.engine == Engine::SecondOrder {
            for m in 0..n {
                for j in m + 1..n {
                    h.push(format!("pair{m}_{j}_re"));
                    h.push(format!("pair{m}_{j}_im"));
                }
            }
        }
        for name in ["x", "y", "px", "py"] {
            for m in 0..n {
                h.push(format!("{name}{m}"));
            }
        }
        if self.two_mode {
            h.push("b_re".into());
            h.push("b_im".into());
            if self.engine == Engine::SecondOrder {
                h.push("n_phot_b".into());
                for m in 0..n {
                    h.push(format!("bsp{m}_re"));
                    h.push(format!("bsp{m}_im"));
                }
                h.push("ab_re".into());
                h.push("ab_im".into());
            }
        }
        debug_assert_eq!(h.len(), self.dim);
        h
    }
}

#[inline]
pub(crate) fn get_c(s: &[f64], i: usize) -> Complex64 {
    Complex64::new(s[i], s[i + 1])
}

#[inline]
pub(crate) fn set_c(s: &mut [f64], i: usize, z: Complex64) {
    s[i] = z.re;
    s[i + 1] = z.im;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_dims() {
        for n in [1usize, 2, 3, 20, 100] {
            let l = Layout::second_order(n, false);
            assert_eq!(l.dim, n * n + 8 * n + 3);
            assert_eq!(l.csv_headers().len(), l.dim);
            let l2 = Layout::second_order(n, true);
            assert_eq!(l2.dim, n * n + 10 * n + 8);
            assert_eq!(l2.csv_headers().len(), l2.dim);
        }
    }

    #[test]
    fn mean_field_dims() {
        for n in [1usize, 5, 100] {
            let l = Layout::mean_field(n, false);
            assert_eq!(l.dim, 7 * n + 2);
            assert_eq!(l.csv_headers().len(), l.dim);
            assert_eq!(Layout::mean_field(n, true).dim, 7 * n + 4);
        }
    }

    #[test]
    fn pair_indexing_is_dense_row_major() {
        let n = 5;
        let l = Layout::second_order(n, false);
        let mut expect = l.pair;
        for m in 0..n {
            for j in m + 1..n {
                assert_eq!(l.pair_index(m, j), expect, "(m,j)=({m},{j})");
                expect += 2;
            }
        }
        assert_eq!(expect, l.x);
    }

    #[test]
    fn pair_lookup_conjugates_below_diagonal() {
        let l = Layout::second_order(3, false);
        let mut s = vec![0.0; l.dim];
        set_c(&mut s, l.pair_index(0, 2), Complex64::new(0.25, -0.75));
        assert_eq!(l.pair(&s, 0, 2), Complex64::new(0.25, -0.75));
        assert_eq!(l.pair(&s, 2, 0), Complex64::new(0.25, 0.75));
    }
}
