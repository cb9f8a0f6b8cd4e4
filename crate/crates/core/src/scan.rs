//! Parallel two-dimensional parameter scans.
//!
//! A scan runs one simulation per grid cell (optionally several repetitions
//! with decorrelated initial clouds) and records windowed time averages of
//! the standard observables, plus the analytic threshold annotations
//! evaluated for the ideally ordered configuration. Cells are computed in
//! parallel but aggregated in a fixed row-major order, and every cell's seed
//! is derived from the *parameter values* rather than grid indices — so the
//! result of a given cell is independent of worker count, cell execution
//! order, and grid resolution (refining a grid reuses the coarse cells
//! bitwise).

use rayon::prelude::*;

use crate::cumulant::{init_mean_field, init_second_order, Engine, MeanFieldRhs, SecondOrderRhs};
use crate::integrator::{integrate, IntegratorSettings};
use crate::observables::{time_average, TimeAverage};
use crate::params::{PositionsSnapshot, SystemParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("scan spec: {0}")]
    BadSpec(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Parameter a scan axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParam {
    DeltaC,
    OmegaPump,
    G,
}

impl ScanParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanParam::DeltaC => "delta_c",
            ScanParam::OmegaPump => "omega_pump",
            ScanParam::G => "g",
        }
    }

    fn apply(&self, p: &mut SystemParams, value: f64) {
        match self {
            ScanParam::DeltaC => p.delta_c = value,
            ScanParam::OmegaPump => p.omega_pump = value,
            ScanParam::G => p.g = value,
        }
    }
}

impl std::str::FromStr for ScanParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delta_c" => Ok(ScanParam::DeltaC),
            "omega_pump" => Ok(ScanParam::OmegaPump),
            "g" => Ok(ScanParam::G),
            other => Err(format!(
                "unknown scan parameter `{other}` (expected delta_c, omega_pump or g)"
            )),
        }
    }
}

/// A uniformly spaced scan axis; `value(i) = min + i·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxis {
    pub param: ScanParam,
    pub min: f64,
    pub step: f64,
    pub count: usize,
}

impl ScanAxis {
    /// Axis from endpoints. A single-point axis collapses to `min` and
    /// requires `max == min`.
    pub fn from_range(param: ScanParam, min: f64, max: f64, count: usize) -> Result<Self, ScanError> {
        if count == 0 {
            return Err(ScanError::BadSpec("axis needs at least one point".into()));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(ScanError::BadSpec("axis endpoints must be finite".into()));
        }
        let step = if count == 1 {
            if min != max {
                return Err(ScanError::BadSpec(
                    "a single-point axis requires min == max".into(),
                ));
            }
            0.0
        } else {
            (max - min) / (count - 1) as f64
        };
        Ok(ScanAxis {
            param,
            min,
            step,
            count,
        })
    }

    pub fn value(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        self.min + i as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.value(i))
    }
}

/// How per-cell RNG seeds are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Every cell draws the same initial cloud (repetition index still
    /// decorrelates); cell (v1, v2) with one repetition then reproduces a
    /// plain run at those parameters exactly.
    Fixed,
    /// Mix the axis values into the seed so neighboring cells get
    /// independent clouds.
    CellIndexed,
}

/// Everything needed to run a scan.
#[derive(Debug, Clone)]
pub struct ScanSpec {
    pub base: SystemParams,
    pub engine: Engine,
    pub axis1: ScanAxis,
    pub axis2: ScanAxis,
    /// Repetitions per cell, averaged into the reported observables.
    pub reps: usize,
    pub seed_policy: SeedPolicy,
    pub integrator: IntegratorSettings,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<(), ScanError> {
        self.base
            .validate()
            .map_err(|e| ScanError::BadSpec(e.to_string()))?;
        self.integrator
            .validate()
            .map_err(ScanError::BadSpec)?;
        if self.axis1.param == self.axis2.param {
            return Err(ScanError::BadSpec(format!(
                "both axes vary `{}`",
                self.axis1.param.as_str()
            )));
        }
        if self.reps == 0 {
            return Err(ScanError::BadSpec("reps must be at least 1".into()));
        }
        if self.base.avg_window > self.base.t_final {
            return Err(ScanError::BadSpec(
                "avg_window must not exceed t_final".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub value1: f64,
    pub value2: f64,
    pub theta_abs: f64,
    pub theta_signed: f64,
    pub n_phot: f64,
    pub e_kin: f64,
    pub inversion: f64,
    /// Dispersively shifted detuning δ for the ordered configuration.
    pub delta: f64,
    /// Analytic threshold margin for the ordered configuration.
    pub threshold_margin: f64,
    /// None on success, the failure reason otherwise (numeric fields are
    /// NaN in that case).
    pub reason: Option<String>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.reason.is_none()
    }

    fn failed(value1: f64, value2: f64, delta: f64, margin: f64, reason: String) -> Self {
        CellResult {
            value1,
            value2,
            theta_abs: f64::NAN,
            theta_signed: f64::NAN,
            n_phot: f64::NAN,
            e_kin: f64::NAN,
            inversion: f64::NAN,
            delta,
            threshold_margin: margin,
            reason: Some(reason),
        }
    }
}

/// The full scan result, cells in row-major order (axis1 outer).
#[derive(Debug, Clone)]
pub struct ScanGrid {
    pub axis1: ScanAxis,
    pub axis2: ScanAxis,
    pub reps: usize,
    pub cells: Vec<CellResult>,
}

impl ScanGrid {
    pub fn cell(&self, i: usize, j: usize) -> &CellResult {
        &self.cells[i * self.axis2.count + j]
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one repetition of one cell. Value-keyed: depends on the axis
/// *values* (bit patterns), never on grid indices.
fn cell_seed(policy: SeedPolicy, base: u64, v1: f64, v2: f64, rep: u64) -> u64 {
    match policy {
        SeedPolicy::Fixed => {
            if rep == 0 {
                base
            } else {
                splitmix64(splitmix64(base) ^ rep)
            }
        }
        SeedPolicy::CellIndexed => {
            let mut s = splitmix64(base);
            s = splitmix64(s ^ v1.to_bits());
            s = splitmix64(s ^ v2.to_bits());
            splitmix64(s ^ rep)
        }
    }
}

/// Run every cell of the scan on `workers` threads (0 = one per core).
/// Results are bitwise independent of `workers` and of cell scheduling.
pub fn run_scan(spec: &ScanSpec, workers: usize) -> Result<ScanGrid, ScanError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ScanError::ThreadPool(e.to_string()))?;
    let total = spec.axis1.count * spec.axis2.count;
    let cells: Vec<CellResult> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|idx| run_cell(spec, idx / spec.axis2.count, idx % spec.axis2.count))
            .collect()
    });
    Ok(ScanGrid {
        axis1: spec.axis1.clone(),
        axis2: spec.axis2.clone(),
        reps: spec.reps,
        cells,
    })
}

fn run_cell(spec: &ScanSpec, i: usize, j: usize) -> CellResult {
    let v1 = spec.axis1.value(i);
    let v2 = spec.axis2.value(j);
    let mut p = spec.base.clone();
    spec.axis1.param.apply(&mut p, v1);
    spec.axis2.param.apply(&mut p, v2);

    // Analytic annotations for the ideally ordered configuration (all atoms
    // at even antinodes); NaN when undefined (e.g. delta_a = 0).
    let antinodes = PositionsSnapshot::uniform(p.n_atoms, 0.0, 0.0);
    let delta = p.effective_detuning(&antinodes).unwrap_or(f64::NAN);
    let margin = p.threshold_margin(&antinodes).unwrap_or(f64::NAN);

    if let Err(e) = p.validate() {
        return CellResult::failed(v1, v2, delta, margin, e.to_string());
    }

    let mut acc: Option<TimeAverage> = None;
    for rep in 0..spec.reps {
        p.seed = cell_seed(spec.seed_policy, spec.base.seed, v1, v2, rep as u64);
        let run = match run_one(&p, spec.engine, &spec.integrator) {
            Ok(avg) => avg,
            Err(reason) => return CellResult::failed(v1, v2, delta, margin, reason),
        };
        match acc.as_mut() {
            None => acc = Some(run),
            Some(a) => {
                a.theta_signed += run.theta_signed;
                a.theta_abs += run.theta_abs;
                a.n_phot += run.n_phot;
                a.e_kin += run.e_kin;
                a.inversion += run.inversion;
            }
        }
    }
    let a = acc.expect("reps >= 1");
    let w = 1.0 / spec.reps as f64;
    CellResult {
        value1: v1,
        value2: v2,
        theta_abs: a.theta_abs * w,
        theta_signed: a.theta_signed * w,
        n_phot: a.n_phot * w,
        e_kin: a.e_kin * w,
        inversion: a.inversion * w,
        delta,
        threshold_margin: margin,
        reason: None,
    }
}

/// One repetition: integrate and average the trailing window.
fn run_one(
    p: &SystemParams,
    engine: Engine,
    settings: &IntegratorSettings,
) -> Result<TimeAverage, String> {
    match engine {
        Engine::SecondOrder => {
            let y0 = init_second_order(p).pack();
            let mut rhs = SecondOrderRhs::new(p);
            let traj = integrate(&mut rhs, &y0, p.t_final, settings).map_err(|e| e.to_string())?;
            time_average(p, &rhs.layout(), &traj, p.avg_window)
        }
        Engine::MeanField => {
            let y0 = init_mean_field(p).pack();
            let mut rhs = MeanFieldRhs::new(p);
            let traj = integrate(&mut rhs, &y0, p.t_final, settings).map_err(|e| e.to_string())?;
            time_average(p, &rhs.layout(), &traj, p.avg_window)
        }
    }
}
