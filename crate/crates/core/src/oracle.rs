//! Exact few-atom master-equation oracle.
//!
//! For a handful of pinned atoms the full density matrix in a truncated Fock
//! space is cheap enough to integrate directly:
//!
//! dρ/dt = −i[H, ρ] + κ𝒟[a]ρ (+ κ𝒟[b]ρ) + Γ Σₘ 𝒟[σₘ⁻]ρ,
//!
//! with the same pump-frame Hamiltonian, coupling profiles and rates as the
//! cumulant hierarchy. The closed hierarchy is *exact* whenever the state has
//! no third-order cross-cumulants — e.g. any coherent ⊗ product state — so
//! the moment derivatives extracted from the Liouvillian must agree with the
//! cumulant right-hand side at such states to near machine precision. That
//! identity, plus direct trajectory comparisons at small photon number, is
//! what validates every coefficient of the closure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::cumulant::{coupling, filter_coupling, pump_amplitude, Layout};
use crate::integrator::{integrate, IntegrateError, IntegratorSettings, OdeSystem};
use crate::params::SystemParams;

/// Largest Hilbert-space dimension the dense representation will accept.
pub const MAX_DIM: usize = 4096;

/// Relative change in ⟨a†a⟩ under a cutoff increase that is still accepted
/// as converged.
pub const CONVERGENCE_TOL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("Hilbert space: {0}")]
    BadSpec(String),
    #[error(
        "Fock cutoff {cutoff} not converged: ⟨a†a⟩ = {n_low:.6e} vs {n_high:.6e} at cutoff + 2 \
         (relative change {rel_change:.3e})"
    )]
    Convergence {
        cutoff: usize,
        n_low: f64,
        n_high: f64,
        rel_change: f64,
    },
    #[error("oracle integration failed: {0}")]
    Integration(#[from] IntegrateError),
}

/// Truncated Hilbert space for the oracle: up to three pinned atoms and one
/// or two cavity modes with `fock_cutoff` photons each.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpec {
    pub n_atoms: usize,
    pub fock_cutoff: usize,
    pub two_mode: bool,
    /// Fixed atomic positions (x, y) in units of λ.
    pub positions: Vec<(f64, f64)>,
}

impl HilbertSpec {
    pub fn dim(&self) -> usize {
        let fock = self.fock_cutoff + 1;
        let modes = if self.two_mode { fock * fock } else { fock };
        modes * (1usize << self.n_atoms)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(1..=3).contains(&self.n_atoms) {
            return Err(OracleError::BadSpec(format!(
                "oracle supports 1..=3 atoms, got {}",
                self.n_atoms
            )));
        }
        if self.positions.len() != self.n_atoms {
            return Err(OracleError::BadSpec(format!(
                "{} positions for {} atoms",
                self.positions.len(),
                self.n_atoms
            )));
        }
        if self.dim() < 2 || self.dim() > MAX_DIM {
            return Err(OracleError::BadSpec(format!(
                "Hilbert dimension {} outside 2..={MAX_DIM}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Initial density matrix.
#[derive(Debug, Clone)]
pub enum OracleInit {
    /// All atoms in |g⟩, all modes in vacuum.
    GroundVacuum,
    /// Coherent mode amplitudes and one pure atomic state shared by all
    /// atoms; renormalized after Fock truncation.
    Product {
        alpha: Complex64,
        beta: Option<Complex64>,
        /// (c_g, c_e) amplitudes of each atom.
        atom: (Complex64, Complex64),
    },
}

/// Density matrix plus the space it lives in.
#[derive(Debug, Clone)]
pub struct DensityState {
    pub spec: HilbertSpec,
    pub rho: DMatrix<Complex64>,
}

/// Health report of a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDiagnostics {
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn ok(&self) -> bool {
        self.trace_defect < 1e-8 && self.hermiticity_defect < 1e-10 && self.min_eigenvalue > -1e-8
    }
}

impl DensityState {
    pub fn diagnostics(&self) -> DensityDiagnostics {
        let trace_defect = (self.rho.trace() - Complex64::new(1.0, 0.0)).norm();
        let adj = self.rho.adjoint();
        let hermiticity_defect = (&self.rho - &adj).camax();
        let herm = (&self.rho + &adj).map(|z| z * 0.5);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        DensityDiagnostics {
            trace_defect,
            hermiticity_defect,
            min_eigenvalue,
        }
    }
}

/// All single-time moments tracked by the second-order hierarchy, extracted
/// from a density matrix. Field names follow the cumulant state.
#[derive(Debug, Clone)]
pub struct OracleExpectations {
    pub a: Complex64,
    pub n_phot: f64,
    pub sm: Vec<Complex64>,
    pub a_sp: Vec<Complex64>,
    pub pop: Vec<f64>,
    /// ⟨σₘ⁺σⱼ⁻⟩ for m < j, row-major.
    pub pair: Vec<Complex64>,
    pub b: Option<Complex64>,
    pub n_phot_b: Option<f64>,
    pub b_sp: Option<Vec<Complex64>>,
    pub ab_cross: Option<Complex64>,
}

/// Precomputed operators and scratch space for the Lindblad right-hand side.
pub struct LindbladOracle {
    spec: HilbertSpec,
    h: DMatrix<Complex64>,
    /// Collapse operators with rates folded in (√κ a, √κ b, √Γ σₘ⁻) and
    /// their adjoints and products c†c.
    collapse: Vec<(DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)>,
    // Observable operators.
    a_op: DMatrix<Complex64>,
    b_op: Option<DMatrix<Complex64>>,
    sm_ops: Vec<DMatrix<Complex64>>,
    // Scratch for rhs().
    rho: DMatrix<Complex64>,
    drho: DMatrix<Complex64>,
    t1: DMatrix<Complex64>,
    t2: DMatrix<Complex64>,
}

/// Identity of dimension d.
fn eye(d: usize) -> DMatrix<Complex64> {
    DMatrix::identity(d, d)
}

/// Annihilation operator on cutoff+1 Fock levels.
fn annihilation(fock: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(fock, fock);
    for n in 1..fock {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// σ⁻ = |g⟩⟨e| in the basis (|g⟩, |e⟩).
fn sigma_minus() -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    m
}

/// Tr[ρ O] without forming the product matrix.
fn trace_product(rho: &DMatrix<Complex64>, op: &DMatrix<Complex64>) -> Complex64 {
    let d = rho.nrows();
    let mut acc = Complex64::default();
    for i in 0..d {
        for j in 0..d {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}

impl LindbladOracle {
    pub fn new(params: &SystemParams, spec: &HilbertSpec) -> Result<Self, OracleError> {
        spec.validate()?;
        if spec.two_mode != params.two_mode() {
            return Err(OracleError::BadSpec(
                "oracle mode count must match the system parameters".into(),
            ));
        }
        let fock = spec.fock_cutoff + 1;
        let n = spec.n_atoms;
        let d = spec.dim();

        // Embed single-subsystem operators: mode a ⊗ (mode b ⊗) atoms.
        let a_small = annihilation(fock);
        let atom_eye = eye(1 << n);
        let a_op = if spec.two_mode {
            a_small.kronecker(&eye(fock)).kronecker(&atom_eye)
        } else {
            a_small.kronecker(&atom_eye)
        };
        let b_op = spec
            .two_mode
            .then(|| eye(fock).kronecker(&a_small).kronecker(&atom_eye));
        let mode_eye = if spec.two_mode {
            eye(fock * fock)
        } else {
            eye(fock)
        };
        let sm_ops: Vec<DMatrix<Complex64>> = (0..n)
            .map(|m| {
                let mut at = eye(1);
                for j in 0..n {
                    let next = if j == m { sigma_minus() } else { eye(2) };
                    at = at.kronecker(&next);
                }
                mode_eye.kronecker(&at)
            })
            .collect();

        // Pump-frame Hamiltonian with the standing-wave (cos) and filter
        // (sin) coupling profiles evaluated at the pinned positions.
        let mut h: DMatrix<Complex64> = DMatrix::zeros(d, d);
        let n_a = a_op.adjoint() * &a_op;
        h += n_a.map(|z| z * Complex64::new(-params.delta_c, 0.0));
        if let Some(b) = &b_op {
            let n_b = b.adjoint() * b;
            let delta_c2 = params.delta_c2.expect("two-mode parameters");
            h += n_b.map(|z| z * Complex64::new(-delta_c2, 0.0));
        }
        for (m, sm) in sm_ops.iter().enumerate() {
            let (x, y) = spec.positions[m];
            let sp = sm.adjoint();
            h += (&sp * sm).map(|z| z * Complex64::new(-params.delta_a, 0.0));
            let ga = coupling(params, x, y);
            let couple = a_op.adjoint() * sm + &sp * &a_op;
            h += couple.map(|z| z * Complex64::new(ga, 0.0));
            if let Some(b) = &b_op {
                let gb = filter_coupling(params, x, y);
                let couple = b.adjoint() * sm + &sp * b;
                h += couple.map(|z| z * Complex64::new(gb, 0.0));
            }
            let om = pump_amplitude(params, y);
            let drive = sm + &sp;
            h += drive.map(|z| z * Complex64::new(om, 0.0));
        }

        let mut collapse = Vec::new();
        let mut push = |op: DMatrix<Complex64>, rate: f64| {
            let c = op.map(|z| z * Complex64::new(rate.sqrt(), 0.0));
            let cdag = c.adjoint();
            let cdagc = &cdag * &c;
            collapse.push((c, cdag, cdagc));
        };
        push(a_op.clone(), params.kappa);
        if let Some(b) = &b_op {
            push(b.clone(), params.kappa);
        }
        for sm in &sm_ops {
            push(sm.clone(), params.gamma);
        }

        Ok(LindbladOracle {
            spec: spec.clone(),
            h,
            collapse,
            a_op,
            b_op,
            sm_ops,
            rho: DMatrix::zeros(d, d),
            drho: DMatrix::zeros(d, d),
            t1: DMatrix::zeros(d, d),
            t2: DMatrix::zeros(d, d),
        })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    /// Build the initial density matrix.
    pub fn initial_state(&self, init: &OracleInit) -> DensityState {
        let d = self.spec.dim();
        let fock = self.spec.fock_cutoff + 1;
        let psi = match init {
            OracleInit::GroundVacuum => {
                let mut v = DVector::zeros(d);
                v[0] = Complex64::new(1.0, 0.0);
                v
            }
            OracleInit::Product { alpha, beta, atom } => {
                let coherent = |amp: Complex64| {
                    let mut v = DVector::zeros(fock);
                    let mut c = Complex64::new(1.0, 0.0);
                    v[0] = c;
                    for n in 1..fock {
                        c *= amp / (n as f64).sqrt();
                        v[n] = c;
                    }
                    v
                };
                let mut psi = coherent(*alpha);
                if self.spec.two_mode {
                    psi = psi.kronecker(&coherent(beta.unwrap_or_default()));
                }
                let at = DVector::from_column_slice(&[atom.0, atom.1]);
                for _ in 0..self.spec.n_atoms {
                    psi = psi.kronecker(&at);
                }
                psi
            }
        };
        let norm = psi.norm();
        let psi = psi.map(|z| z / norm);
        let mut rho = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        DensityState {
            spec: self.spec.clone(),
            rho,
        }
    }

    /// Flatten ρ row-major as (re, im) pairs, the layout `rhs` expects.
    pub fn flatten(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let d = self.spec.dim();
        let mut y = vec![0.0; 2 * d * d];
        for i in 0..d {
            for j in 0..d {
                let z = rho[(i, j)];
                y[2 * (i * d + j)] = z.re;
                y[2 * (i * d + j) + 1] = z.im;
            }
        }
        y
    }

    pub fn unflatten(&self, y: &[f64]) -> DMatrix<Complex64> {
        let d = self.spec.dim();
        let mut rho = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] = Complex64::new(y[2 * (i * d + j)], y[2 * (i * d + j) + 1]);
            }
        }
        rho
    }

    /// All tracked moments of a density matrix.
    pub fn expectations(&self, rho: &DMatrix<Complex64>) -> OracleExpectations {
        let n = self.spec.n_atoms;
        let a = trace_product(rho, &self.a_op);
        let n_phot = trace_product(rho, &(self.a_op.adjoint() * &self.a_op)).re;
        let mut sm = Vec::with_capacity(n);
        let mut a_sp = Vec::with_capacity(n);
        let mut pop = Vec::with_capacity(n);
        for op in &self.sm_ops {
            sm.push(trace_product(rho, op));
            let sp = op.adjoint();
            a_sp.push(trace_product(rho, &(&self.a_op * &sp)));
            pop.push(trace_product(rho, &(&sp * op)).re);
        }
        let mut pair = Vec::new();
        for m in 0..n {
            for j in m + 1..n {
                let op = self.sm_ops[m].adjoint() * &self.sm_ops[j];
                pair.push(trace_product(rho, &op));
            }
        }
        let (b, n_phot_b, b_sp, ab_cross) = match &self.b_op {
            Some(bop) => {
                let b = trace_product(rho, bop);
                let nb = trace_product(rho, &(bop.adjoint() * bop)).re;
                let bsp: Vec<Complex64> = self
                    .sm_ops
                    .iter()
                    .map(|op| trace_product(rho, &(bop * op.adjoint())))
                    .collect();
                let ab = trace_product(rho, &(self.a_op.adjoint() * bop));
                (Some(b), Some(nb), Some(bsp), Some(ab))
            }
            None => (None, None, None, None),
        };
        OracleExpectations {
            a,
            n_phot,
            sm,
            a_sp,
            pop,
            pair,
            b,
            n_phot_b,
            b_sp,
            ab_cross,
        }
    }
}

impl OdeSystem for LindbladOracle {
    fn dim(&self) -> usize {
        2 * self.spec.dim() * self.spec.dim()
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let d = self.spec.dim();
        for i in 0..d {
            for j in 0..d {
                self.rho[(i, j)] = Complex64::new(y[2 * (i * d + j)], y[2 * (i * d + j) + 1]);
            }
        }
        // −i[H, ρ]
        self.h.mul_to(&self.rho, &mut self.t1);
        self.rho.mul_to(&self.h, &mut self.t2);
        let minus_i = Complex64::new(0.0, -1.0);
        for i in 0..d {
            for j in 0..d {
                self.drho[(i, j)] = minus_i * (self.t1[(i, j)] - self.t2[(i, j)]);
            }
        }
        // Σ c ρ c† − ½{c†c, ρ}
        for (c, cdag, cdagc) in &self.collapse {
            c.mul_to(&self.rho, &mut self.t1);
            self.t1.mul_to(cdag, &mut self.t2);
            self.drho += &self.t2;
            cdagc.mul_to(&self.rho, &mut self.t1);
            self.rho.mul_to(cdagc, &mut self.t2);
            for i in 0..d {
                for j in 0..d {
                    self.drho[(i, j)] -= 0.5 * (self.t1[(i, j)] + self.t2[(i, j)]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let z = self.drho[(i, j)];
                dydt[2 * (i * d + j)] = z.re;
                dydt[2 * (i * d + j) + 1] = z.im;
            }
        }
    }

    fn inspect(&self, _t: f64, y: &[f64]) -> Result<bool, String> {
        let d = self.spec.dim();
        let mut tr = 0.0;
        for i in 0..d {
            tr += y[2 * (i * d + i)];
        }
        let defect = (tr - 1.0).abs();
        if defect > 1e-2 {
            Err(format!("density-matrix trace drifted to {tr:.6}"))
        } else {
            Ok(defect <= 1e-6)
        }
    }
}

/// Time-resolved oracle expectations.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub times: Vec<f64>,
    pub expectations: Vec<OracleExpectations>,
    pub final_state: DensityState,
}

/// Integrate the master equation and extract moments at every sample.
pub fn evolve(
    params: &SystemParams,
    spec: &HilbertSpec,
    init: &OracleInit,
    t_final: f64,
    settings: &IntegratorSettings,
) -> Result<OracleRun, OracleError> {
    let mut oracle = LindbladOracle::new(params, spec)?;
    let rho0 = oracle.initial_state(init);
    let y0 = oracle.flatten(&rho0.rho);
    let traj = integrate(&mut oracle, &y0, t_final, settings)?;
    let times = traj.times().to_vec();
    let expectations = times
        .iter()
        .enumerate()
        .map(|(i, _)| oracle.expectations(&oracle.unflatten(traj.sample(i))))
        .collect();
    let final_state = DensityState {
        spec: spec.clone(),
        rho: oracle.unflatten(&traj.final_state),
    };
    Ok(OracleRun {
        times,
        expectations,
        final_state,
    })
}

/// Re-run with the Fock cutoff raised by two and require the final photon
/// number to move by less than [`CONVERGENCE_TOL`]. Returns the observed
/// relative change.
pub fn convergence_check(
    params: &SystemParams,
    spec: &HilbertSpec,
    init: &OracleInit,
    t_final: f64,
    settings: &IntegratorSettings,
) -> Result<f64, OracleError> {
    let low = evolve(params, spec, init, t_final, settings)?;
    let mut bigger = spec.clone();
    bigger.fock_cutoff += 2;
    let high = evolve(params, &bigger, init, t_final, settings)?;
    let n_low = low.expectations.last().unwrap().n_phot;
    let n_high = high.expectations.last().unwrap().n_phot;
    let rel_change = (n_high - n_low).abs() / n_high.abs().max(1e-12);
    if rel_change > CONVERGENCE_TOL {
        Err(OracleError::Convergence {
            cutoff: spec.fock_cutoff,
            n_low,
            n_high,
            rel_change,
        })
    } else {
        Ok(rel_change)
    }
}

/// One variable of an oracle-vs-cumulant comparison.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub name: String,
    pub oracle: Complex64,
    pub cumulant: Complex64,
    pub ok: bool,
}

/// Compare every tracked moment against a packed cumulant state. A variable
/// passes when |oracle − cumulant| ≤ max(rel·|oracle|, floor).
pub fn compare_to_cumulant(
    exp: &OracleExpectations,
    layout: &Layout,
    flat: &[f64],
    rel: f64,
    floor: f64,
) -> Vec<Comparison> {
    let n = layout.n_atoms;
    let mut out = Vec::new();
    let mut push = |name: String, oracle: Complex64, cumulant: Complex64| {
        let ok = (oracle - cumulant).norm() <= rel * oracle.norm() + floor;
        out.push(Comparison {
            name,
            oracle,
            cumulant,
            ok,
        });
    };
    let re = |x: f64| Complex64::new(x, 0.0);
    push("a".into(), exp.a, layout.a_mean(flat));
    push("n_phot".into(), re(exp.n_phot), re(layout.photon_number(flat)));
    for m in 0..n {
        push(format!("sm[{m}]"), exp.sm[m], layout.sm(flat, m));
        push(format!("a_sp[{m}]"), exp.a_sp[m], layout.a_sp(flat, m));
        push(format!("pop[{m}]"), re(exp.pop[m]), re(layout.pops(flat)[m]));
    }
    let mut k = 0;
    for m in 0..n {
        for j in m + 1..n {
            push(format!("pair[{m},{j}]"), exp.pair[k], layout.pair(flat, m, j));
            k += 1;
        }
    }
    if let (Some(b), Some(nb), Some(bsp), Some(ab)) =
        (exp.b, exp.n_phot_b, exp.b_sp.as_ref(), exp.ab_cross)
    {
        push("b".into(), b, layout.b_mean(flat));
        push(
            "n_phot_b".into(),
            re(nb),
            re(layout.photon_number_b(flat).unwrap()),
        );
        for m in 0..n {
            push(format!("b_sp[{m}]"), bsp[m], layout.b_sp(flat, m));
        }
        push("ab_cross".into(), ab, layout.ab_cross(flat));
    }
    out
}
