//! Exercises the C surface the way a foreign caller would: opaque handles,
//! status codes, buffer discipline, and the thread-local error message.

use std::ffi::{c_char, CString};
use std::ptr;

use selforg_ffi::{
    selforg_last_error_message, selforg_run_average, selforg_run_free, selforg_run_len,
    selforg_run_series, selforg_sim_free, selforg_sim_new, selforg_sim_run,
    selforg_sim_set_integrator, selforg_version, SelforgObservable, SelforgStatus,
};

const CONFIG: &str = r#"
n_atoms = 4
g = 1.0
kappa = 10.0
gamma = 1.0
omega_pump = 5.0
delta_a = -20.0
delta_c = -10.0
waist = 1000.0
omega_r = 1.0
seed = 1
t_final = 10.0
avg_window = 3.0
init_pos_halfwidth = 0.4
init_mom_halfwidth = 0.5
"#;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe {
        let needed = selforg_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0u8; needed + 1];
        selforg_last_error_message(buf.as_mut_ptr().cast::<c_char>(), buf.len());
        buf.truncate(needed);
        String::from_utf8(buf).unwrap()
    }
}

/// Build a sim from `config` with the given engine, panicking on failure.
unsafe fn make_sim(config: &str, engine: &str) -> *mut selforg_ffi::SelforgSim {
    let sim = selforg_sim_new(cstr(config).as_ptr(), cstr(engine).as_ptr());
    assert!(!sim.is_null(), "sim_new failed: {}", last_error());
    sim
}

unsafe fn series(run: *const selforg_ffi::SelforgRun, obs: SelforgObservable) -> Vec<f64> {
    let len = selforg_run_len(run);
    let mut buf = vec![0.0; len];
    let status = selforg_run_series(run, obs, buf.as_mut_ptr(), len);
    assert_eq!(status, SelforgStatus::Ok, "series failed: {}", last_error());
    buf
}

#[test]
fn round_trip_runs_and_reads_series() {
    unsafe {
        let sim = make_sim(CONFIG, "second-order");
        let mut run = ptr::null_mut();
        assert_eq!(selforg_sim_run(sim, &mut run), SelforgStatus::Ok);
        let len = selforg_run_len(run);
        assert!(len > 50, "suspiciously few samples: {len}");

        let time = series(run, SelforgObservable::Time);
        assert_eq!(time[0], 0.0);
        assert!(time.windows(2).all(|w| w[1] > w[0]), "time not increasing");
        assert!((time[len - 1] - 10.0).abs() < 1e-9);

        let n_phot = series(run, SelforgObservable::NPhot);
        assert!(n_phot.iter().all(|v| v.is_finite()));
        assert!(n_phot[len - 1] > 1e-6, "no field built up");

        let theta = series(run, SelforgObservable::ThetaAbs);
        assert!(theta.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));

        // The trailing-window average must sit inside the range of the
        // series over that window.
        let mut avg = f64::NAN;
        assert_eq!(
            selforg_run_average(run, SelforgObservable::NPhot, 3.0, &mut avg),
            SelforgStatus::Ok
        );
        let tail: Vec<f64> = time
            .iter()
            .zip(&n_phot)
            .filter(|(&t, _)| t >= 10.0 - 3.0 - 1e-9)
            .map(|(_, &n)| n)
            .collect();
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (lo..=hi).contains(&avg),
            "average {avg} outside series range [{lo}, {hi}]"
        );

        selforg_run_free(run);
        selforg_sim_free(sim);
    }
}

#[test]
fn runs_are_deterministic_across_handles() {
    unsafe {
        let mut all = Vec::new();
        for _ in 0..2 {
            let sim = make_sim(CONFIG, "mean-field");
            let mut run = ptr::null_mut();
            assert_eq!(selforg_sim_run(sim, &mut run), SelforgStatus::Ok);
            all.push(series(run, SelforgObservable::NPhot));
            selforg_run_free(run);
            selforg_sim_free(sim);
        }
        assert_eq!(all[0], all[1], "identical configs produced different runs");
    }
}

#[test]
fn invalid_inputs_are_rejected_with_messages() {
    unsafe {
        // Null and malformed configuration strings.
        assert!(selforg_sim_new(ptr::null(), cstr("second-order").as_ptr()).is_null());
        assert!(last_error().contains("config_toml"));

        assert!(selforg_sim_new(cstr("not = [valid").as_ptr(), cstr("second-order").as_ptr())
            .is_null());
        assert!(!last_error().is_empty());

        assert!(selforg_sim_new(cstr(CONFIG).as_ptr(), cstr("fourth-order").as_ptr()).is_null());
        assert!(last_error().contains("fourth-order"));

        // A config rejected by validation (negative decay rate).
        let broken = CONFIG.replace("kappa = 10.0", "kappa = -1.0");
        assert!(selforg_sim_new(cstr(&broken).as_ptr(), cstr("second-order").as_ptr()).is_null());

        // Null handles on the remaining entry points.
        let mut run = ptr::null_mut();
        assert_eq!(
            selforg_sim_run(ptr::null(), &mut run),
            SelforgStatus::NullArgument
        );
        assert_eq!(selforg_run_len(ptr::null()), 0);

        // Buffer-length discipline and per-model observable availability.
        let sim = make_sim(CONFIG, "second-order");
        assert_eq!(selforg_sim_run(sim, &mut run), SelforgStatus::Ok);
        let len = selforg_run_len(run);
        let mut buf = vec![0.0; len - 1];
        assert_eq!(
            selforg_run_series(run, SelforgObservable::Theta, buf.as_mut_ptr(), len - 1),
            SelforgStatus::BadRequest
        );
        let mut full = vec![0.0; len];
        assert_eq!(
            selforg_run_series(run, SelforgObservable::NPhotB, full.as_mut_ptr(), len),
            SelforgStatus::BadRequest,
            "single-mode run offered a filter-mode series"
        );
        assert!(last_error().contains("filter"));

        let mut avg = 0.0;
        assert_eq!(
            selforg_run_average(run, SelforgObservable::Time, 3.0, &mut avg),
            SelforgStatus::BadRequest
        );
        assert_eq!(
            selforg_run_average(run, SelforgObservable::NPhot, -1.0, &mut avg),
            SelforgStatus::BadRequest
        );

        selforg_run_free(run);
        selforg_sim_free(sim);

        // Free functions shrug off null.
        selforg_sim_free(ptr::null_mut());
        selforg_run_free(ptr::null_mut());
    }
}

#[test]
fn filter_mode_observables_appear_in_two_mode_configs() {
    let two_mode = format!("{CONFIG}delta_c2 = -20.0\n");
    unsafe {
        let sim = make_sim(&two_mode, "second-order");
        let mut run = ptr::null_mut();
        assert_eq!(selforg_sim_run(sim, &mut run), SelforgStatus::Ok);
        let n_b = series(run, SelforgObservable::NPhotB);
        assert!(n_b.iter().all(|v| v.is_finite()));
        let mut avg = f64::NAN;
        assert_eq!(
            selforg_run_average(run, SelforgObservable::NPhotB, 3.0, &mut avg),
            SelforgStatus::Ok
        );
        assert!(avg.is_finite());
        selforg_run_free(run);
        selforg_sim_free(sim);
    }
}

#[test]
fn integrator_overrides_are_validated_and_applied() {
    unsafe {
        let sim = make_sim(CONFIG, "second-order");
        assert_eq!(
            selforg_sim_set_integrator(sim, -1.0, 1e-8, 1.0, 0.1),
            SelforgStatus::InvalidConfig
        );
        assert_eq!(
            selforg_sim_set_integrator(ptr::null_mut(), 1e-6, 1e-8, 1.0, 0.1),
            SelforgStatus::NullArgument
        );
        // A coarser sampling grid shows up in the run length.
        assert_eq!(
            selforg_sim_set_integrator(sim, 1e-6, 1e-8, 1.0, 0.5),
            SelforgStatus::Ok
        );
        let mut run = ptr::null_mut();
        assert_eq!(selforg_sim_run(sim, &mut run), SelforgStatus::Ok);
        let coarse = selforg_run_len(run);
        assert!(
            (20..=22).contains(&coarse),
            "expected ~21 samples at dt = 0.5 over t = 10, got {coarse}"
        );
        selforg_run_free(run);

        // An impossibly small step cap starves the controller below its
        // minimum step and must surface as a run failure.
        assert_eq!(
            selforg_sim_set_integrator(sim, 1e-6, 1e-8, 1e-30, 0.1),
            SelforgStatus::Ok
        );
        let mut dead = ptr::null_mut();
        assert_eq!(selforg_sim_run(sim, &mut dead), SelforgStatus::RunFailed);
        assert!(dead.is_null(), "failed run still produced a handle");

        selforg_sim_free(sim);
    }
}

#[test]
fn error_messages_truncate_safely_and_version_is_exposed() {
    unsafe {
        // Provoke an error with a known prefix.
        assert!(selforg_sim_new(ptr::null(), cstr("second-order").as_ptr()).is_null());
        let full = last_error();
        assert!(full.starts_with("config_toml"));

        let mut small = [0i8; 8];
        let needed = selforg_last_error_message(small.as_mut_ptr().cast::<c_char>(), small.len());
        assert_eq!(needed, full.len());
        assert_eq!(small[7], 0, "buffer not NUL-terminated");
        let prefix: Vec<u8> = small[..7].iter().map(|&b| b as u8).collect();
        assert_eq!(&prefix, &full.as_bytes()[..7]);

        let version = std::ffi::CStr::from_ptr(selforg_version());
        assert!(!version.to_str().unwrap().is_empty());
    }
}
