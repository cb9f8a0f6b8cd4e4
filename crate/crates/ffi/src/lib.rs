//! C ABI for the selforg cavity simulator.
//!
//! The interface follows the usual handle pattern: `selforg_sim_new` parses a
//! TOML configuration into an opaque simulation handle, `selforg_sim_run`
//! produces an opaque result handle, and typed getters copy observable time
//! series or trailing-window averages into caller-owned buffers. Every
//! fallible call reports a [`SelforgStatus`]; the message of the most recent
//! failure on the current thread is available through
//! `selforg_last_error_message`. All panics are caught at the boundary.
//!
//! The matching header is generated into `include/selforg.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use selforg::cumulant::{init_mean_field, init_second_order, Layout, MeanFieldRhs, SecondOrderRhs};
use selforg::integrator::integrate;
use selforg::observables::{records, time_average, ObservableRecord};
use selforg::params::from_toml_str;
use selforg::{Engine, IntegratorSettings, SystemParams, Trajectory};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelforgStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// The configuration, engine name, or integrator settings were rejected.
    InvalidConfig = 2,
    /// The integration aborted (stiffness or a physicality violation).
    RunFailed = 3,
    /// The request does not fit the run (wrong buffer length, observable not
    /// present in this model, meaningless average).
    BadRequest = 4,
    /// A panic was caught at the boundary.
    Panicked = 5,
}

/// Observables addressable through the getters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelforgObservable {
    /// Sample times, in 1/Γ.
    Time = 0,
    /// Signed checkerboard order parameter Θ ∈ [−1, 1].
    Theta = 1,
    /// |Θ|.
    ThetaAbs = 2,
    /// Kinetic energy per atom, in Γ.
    EKin = 3,
    /// Main-mode photon number ⟨a†a⟩.
    NPhot = 4,
    /// Mean atomic inversion ⟨σᶻ⟩.
    Inversion = 5,
    /// Filter-mode photon number ⟨b†b⟩ (two-mode configurations only).
    NPhotB = 6,
}

/// Opaque simulation handle: configuration, closure level, and integrator
/// settings.
pub struct SelforgSim {
    params: SystemParams,
    engine: Engine,
    settings: IntegratorSettings,
}

/// Opaque result handle: the sampled trajectory and its observable records.
pub struct SelforgRun {
    params: SystemParams,
    layout: Layout,
    trajectory: Trajectory,
    records: Vec<ObservableRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl ToString) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.to_string());
}

fn fail(status: SelforgStatus, message: impl ToString) -> SelforgStatus {
    set_error(message);
    status
}

/// Run `f` with panics converted into `Panicked`/`default` plus an error
/// message.
fn guarded<T>(default: T, f: impl FnOnce() -> T) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".into());
            set_error(format!("caught panic: {text}"));
            default
        }
    }
}

/// Copy the message of the most recent failure on this thread into `buf`
/// (truncated, always NUL-terminated when `len > 0`). Returns the full
/// length of the message in bytes, excluding the terminator; call with a
/// null `buf` to size a buffer first.
#[no_mangle]
pub unsafe extern "C" fn selforg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Version of the underlying crate as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn selforg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn cstr_arg(ptr: *const c_char, what: &str) -> Result<String, SelforgStatus> {
    if ptr.is_null() {
        fail(SelforgStatus::NullArgument, format!("{what} is null"));
        return Err(SelforgStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(SelforgStatus::InvalidConfig, format!("{what} is not UTF-8")))
}

/// Parse a TOML configuration and an engine name (`"second-order"` or
/// `"mean-field"`) into a simulation handle. Returns null on error; see
/// `selforg_last_error_message`. Free with `selforg_sim_free`.
#[no_mangle]
pub unsafe extern "C" fn selforg_sim_new(
    config_toml: *const c_char,
    engine: *const c_char,
) -> *mut SelforgSim {
    guarded(ptr::null_mut(), || {
        let Ok(text) = cstr_arg(config_toml, "config_toml") else {
            return ptr::null_mut();
        };
        let Ok(engine_name) = cstr_arg(engine, "engine") else {
            return ptr::null_mut();
        };
        let engine = match engine_name.as_str() {
            "second-order" => Engine::SecondOrder,
            "mean-field" => Engine::MeanField,
            other => {
                set_error(format!(
                    "unknown engine `{other}` (expected second-order or mean-field)"
                ));
                return ptr::null_mut();
            }
        };
        let params = match from_toml_str(&text, &[]) {
            Ok(p) => p,
            Err(e) => {
                set_error(e);
                return ptr::null_mut();
            }
        };
        Box::into_raw(Box::new(SelforgSim {
            params,
            engine,
            settings: IntegratorSettings::default(),
        }))
    })
}

/// Override the integrator settings of a simulation handle.
#[no_mangle]
pub unsafe extern "C" fn selforg_sim_set_integrator(
    sim: *mut SelforgSim,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    sample_dt: f64,
) -> SelforgStatus {
    guarded(SelforgStatus::Panicked, || {
        let Some(sim) = sim.as_mut() else {
            return fail(SelforgStatus::NullArgument, "sim is null");
        };
        let settings = IntegratorSettings {
            rel_tol,
            abs_tol,
            max_step,
            sample_dt,
        };
        if let Err(e) = settings.validate() {
            return fail(SelforgStatus::InvalidConfig, e);
        }
        sim.settings = settings;
        SelforgStatus::Ok
    })
}

/// Integrate the configured system from its seeded initial cloud to t_final
/// and hand back a result handle in `*out`. Free it with `selforg_run_free`.
#[no_mangle]
pub unsafe extern "C" fn selforg_sim_run(
    sim: *const SelforgSim,
    out: *mut *mut SelforgRun,
) -> SelforgStatus {
    guarded(SelforgStatus::Panicked, || {
        let Some(sim) = sim.as_ref() else {
            return fail(SelforgStatus::NullArgument, "sim is null");
        };
        if out.is_null() {
            return fail(SelforgStatus::NullArgument, "out is null");
        }
        let p = &sim.params;
        let result = match sim.engine {
            Engine::SecondOrder => {
                let mut rhs = SecondOrderRhs::new(p);
                let y0 = init_second_order(p).pack();
                integrate(&mut rhs, &y0, p.t_final, &sim.settings).map(|t| (rhs.layout(), t))
            }
            Engine::MeanField => {
                let mut rhs = MeanFieldRhs::new(p);
                let y0 = init_mean_field(p).pack();
                integrate(&mut rhs, &y0, p.t_final, &sim.settings).map(|t| (rhs.layout(), t))
            }
        };
        let (layout, trajectory) = match result {
            Ok(pair) => pair,
            Err(e) => return fail(SelforgStatus::RunFailed, e),
        };
        let recs = records(p, &layout, &trajectory);
        *out = Box::into_raw(Box::new(SelforgRun {
            params: p.clone(),
            layout,
            trajectory,
            records: recs,
        }));
        SelforgStatus::Ok
    })
}

/// Number of samples in a run (0 for a null handle).
#[no_mangle]
pub unsafe extern "C" fn selforg_run_len(run: *const SelforgRun) -> usize {
    guarded(0, || run.as_ref().map_or(0, |r| r.records.len()))
}

/// Copy one observable's time series into `buf`, which must hold exactly
/// `selforg_run_len` values.
#[no_mangle]
pub unsafe extern "C" fn selforg_run_series(
    run: *const SelforgRun,
    observable: SelforgObservable,
    buf: *mut f64,
    len: usize,
) -> SelforgStatus {
    guarded(SelforgStatus::Panicked, || {
        let Some(run) = run.as_ref() else {
            return fail(SelforgStatus::NullArgument, "run is null");
        };
        if buf.is_null() {
            return fail(SelforgStatus::NullArgument, "buf is null");
        }
        if len != run.records.len() {
            return fail(
                SelforgStatus::BadRequest,
                format!("buffer holds {len} values, run has {}", run.records.len()),
            );
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (slot, rec) in out.iter_mut().zip(&run.records) {
            *slot = match observable {
                SelforgObservable::Time => rec.t,
                SelforgObservable::Theta => rec.theta,
                SelforgObservable::ThetaAbs => rec.theta.abs(),
                SelforgObservable::EKin => rec.e_kin,
                SelforgObservable::NPhot => rec.n_phot,
                SelforgObservable::Inversion => rec.inversion,
                SelforgObservable::NPhotB => match rec.n_phot_b {
                    Some(v) => v,
                    None => {
                        return fail(
                            SelforgStatus::BadRequest,
                            "this configuration has no filter mode",
                        )
                    }
                },
            };
        }
        SelforgStatus::Ok
    })
}

/// Average one observable over the trailing `window` (in 1/Γ) of the run and
/// write it to `*out`. Θ averages signed, |Θ| averages the magnitude; the
/// time axis cannot be averaged.
#[no_mangle]
pub unsafe extern "C" fn selforg_run_average(
    run: *const SelforgRun,
    observable: SelforgObservable,
    window: f64,
    out: *mut f64,
) -> SelforgStatus {
    guarded(SelforgStatus::Panicked, || {
        let Some(run) = run.as_ref() else {
            return fail(SelforgStatus::NullArgument, "run is null");
        };
        if out.is_null() {
            return fail(SelforgStatus::NullArgument, "out is null");
        }
        let avg = match time_average(&run.params, &run.layout, &run.trajectory, window) {
            Ok(avg) => avg,
            Err(e) => return fail(SelforgStatus::BadRequest, e),
        };
        let value = match observable {
            SelforgObservable::Time => {
                return fail(SelforgStatus::BadRequest, "cannot average the time axis")
            }
            SelforgObservable::Theta => avg.theta_signed,
            SelforgObservable::ThetaAbs => avg.theta_abs,
            SelforgObservable::EKin => avg.e_kin,
            SelforgObservable::NPhot => avg.n_phot,
            SelforgObservable::Inversion => avg.inversion,
            SelforgObservable::NPhotB => match avg.n_phot_b {
                Some(v) => v,
                None => {
                    return fail(
                        SelforgStatus::BadRequest,
                        "this configuration has no filter mode",
                    )
                }
            },
        };
        *out = value;
        SelforgStatus::Ok
    })
}

/// Release a simulation handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn selforg_sim_free(sim: *mut SelforgSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Release a result handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn selforg_run_free(run: *mut SelforgRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
