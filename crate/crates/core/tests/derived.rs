//! Cross-checks between the model levels: mean field against the full
//! closure, the dispersive ring-down against the effective-detuning helper,
//! scan cells against standalone runs, and linewidths against κ.

use selforg::cumulant::{init_mean_field, CumulantState, MeanFieldRhs, ModeTag, SecondOrderRhs};
use selforg::integrator::integrate;
use selforg::observables::time_average;
use selforg::params::PositionsSnapshot;
use selforg::scan::{run_scan, ScanAxis, ScanParam, ScanSpec, SeedPolicy};
use selforg::spectrum::{
    correlation_function, locate_features, spectrum_from_g1, CorrelationSettings, FeatureKind,
    SpectrumSettings,
};
use selforg::{Engine, IntegratorSettings, MeanFieldState, SystemParams};

fn reference_params(n_atoms: usize) -> SystemParams {
    SystemParams {
        n_atoms,
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
        t_final: 10.0,
        avg_window: 3.0,
        init_pos_halfwidth: 0.4,
        init_mom_halfwidth: 0.5,
    }
}

/// At weak coupling the field is almost entirely coherent, so the mean-field
/// photon number |⟨a⟩|² must track the full second-order ⟨a†a⟩ closely on a
/// pinned cloud.
#[test]
fn mean_field_tracks_the_closure_at_weak_coupling() {
    let mut p = reference_params(4);
    p.g = 0.05;
    // Keep the drive weak too: the incoherent part of ⟨a†a⟩ scales with the
    // mixedness of the atomic state, which a strong drive sustains at any g.
    p.omega_pump = 0.5;
    p.t_final = 10.0;

    let xs = vec![0.04, 0.11, 0.21, 0.32];
    let ys = vec![0.02, -0.06, 0.1, -0.03];

    let settings = IntegratorSettings {
        rel_tol: 1e-10,
        abs_tol: 1e-13,
        max_step: 0.1,
        sample_dt: 0.1,
    };

    let mut so_init = CumulantState::zeroed(4, false);
    so_init.x = xs.clone();
    so_init.y = ys.clone();
    let mut so_rhs = SecondOrderRhs::new(&p);
    so_rhs.freeze_motion = true;
    let so_layout = so_rhs.layout();
    let so = integrate(&mut so_rhs, &so_init.pack(), p.t_final, &settings).unwrap();

    let mut mf_init = MeanFieldState::zeroed(4, false);
    mf_init.x = xs;
    mf_init.y = ys;
    let mut mf_rhs = MeanFieldRhs::new(&p);
    mf_rhs.freeze_motion = true;
    let mf_layout = mf_rhs.layout();
    let mf = integrate(&mut mf_rhs, &mf_init.pack(), p.t_final, &settings).unwrap();

    assert_eq!(so.len(), mf.len());
    let mut scale_n: f64 = 0.0;
    let mut scale_pop: f64 = 0.0;
    for (_, s) in so.iter() {
        scale_n = scale_n.max(so_layout.photon_number(s));
        for m in 0..4 {
            scale_pop = scale_pop.max(so_layout.pops(s)[m]);
        }
    }
    assert!(scale_n > 1e-8, "no field built up");

    for i in 0..so.len() {
        let s = so.sample(i);
        let m = mf.sample(i);
        let dn = (so_layout.photon_number(s) - mf_layout.photon_number(m)).abs();
        assert!(
            dn <= 0.02 * scale_n + 1e-10,
            "photon numbers diverged at sample {i}: {dn:.3e} against scale {scale_n:.3e}"
        );
        for a in 0..4 {
            let dp = (so_layout.pops(s)[a] - mf_layout.pops(m)[a]).abs();
            assert!(
                dp <= 0.02 * scale_pop + 1e-10,
                "population {a} diverged at sample {i}: {dp:.3e} against scale {scale_pop:.3e}"
            );
        }
    }
}

/// Ring-down of a displaced field over ground-state atoms: the phase rotates
/// at the dressed detuning Δc − Σ g²(x)/Δa, not the bare Δc, matching the
/// `effective_detuning` helper; the envelope decays at κ/2.
#[test]
fn ringdown_rotates_at_the_effective_detuning() {
    let mut p = reference_params(2);
    p.omega_pump = 0.0;
    // Deep dispersive regime: the first-order pull Ng²/|Δa| = 0.18 has to
    // dominate the next correction ~ (g√N / (Δa − Δc))² · pull ≈ 4e-4.
    p.g = 3.0;
    p.delta_a = -100.0;
    p.t_final = 1.0;

    let positions = PositionsSnapshot::uniform(2, 0.0, 0.0);
    let predicted = p.effective_detuning(&positions).unwrap();
    assert!(
        (predicted - (p.delta_c - 2.0 * p.g * p.g / p.delta_a)).abs() < 1e-12,
        "helper changed its definition"
    );

    let mut init = CumulantState::zeroed(2, false);
    init.a = num_complex::Complex64::new(1.0, 0.0);
    init.n_phot = 1.0;

    let settings = IntegratorSettings {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        max_step: 0.01,
        sample_dt: 0.01,
    };
    let mut rhs = SecondOrderRhs::new(&p);
    rhs.freeze_motion = true;
    let layout = rhs.layout();
    let traj = integrate(&mut rhs, &init.pack(), p.t_final, &settings).unwrap();

    // Least-squares slope of the unwrapped phase and of log|a|.
    let mut ts = Vec::new();
    let mut phases = Vec::new();
    let mut logs = Vec::new();
    let mut prev = 0.0_f64;
    let mut offset = 0.0_f64;
    for (t, s) in traj.iter() {
        let a = layout.a_mean(s);
        if a.norm() < 1e-6 {
            break;
        }
        let mut ph = a.arg();
        while ph + offset - prev > std::f64::consts::PI {
            offset -= 2.0 * std::f64::consts::PI;
        }
        while ph + offset - prev < -std::f64::consts::PI {
            offset += 2.0 * std::f64::consts::PI;
        }
        ph += offset;
        prev = ph;
        ts.push(t);
        phases.push(ph);
        logs.push(a.norm().ln());
    }
    assert!(ts.len() > 50, "field decayed too fast to fit");

    let slope = |ys: &[f64]| -> f64 {
        let n = ts.len() as f64;
        let tm = ts.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let num: f64 = ts.iter().zip(ys).map(|(&t, &y)| (t - tm) * (y - ym)).sum();
        let den: f64 = ts.iter().map(|&t| (t - tm) * (t - tm)).sum();
        num / den
    };

    let omega_fit = slope(&phases);
    let decay_fit = -slope(&logs);
    let pull = (predicted - p.delta_c).abs();
    assert!(
        (omega_fit - predicted).abs() < 0.25 * pull,
        "phase rotates at {omega_fit:.4}, predicted {predicted:.4} (bare {:.4})",
        p.delta_c
    );
    assert!(
        (decay_fit - 0.5 * p.kappa).abs() < 0.02 * p.kappa,
        "envelope decays at {decay_fit:.4}, expected κ/2 = {:.4}",
        0.5 * p.kappa
    );
}

/// With the fixed seed policy and one repetition, every scan cell must
/// reproduce a standalone run at the same parameters exactly.
#[test]
fn fixed_seed_scan_cells_reproduce_standalone_runs() {
    let mut base = reference_params(4);
    base.t_final = 10.0;
    base.avg_window = 3.0;

    let spec = ScanSpec {
        base: base.clone(),
        engine: Engine::MeanField,
        axis1: ScanAxis::from_range(ScanParam::DeltaC, -14.0, -8.0, 3).unwrap(),
        axis2: ScanAxis::from_range(ScanParam::OmegaPump, 2.0, 6.0, 2).unwrap(),
        reps: 1,
        seed_policy: SeedPolicy::Fixed,
        integrator: IntegratorSettings::default(),
    };
    let grid = run_scan(&spec, 2).unwrap();

    for i in 0..3 {
        for j in 0..2 {
            let cell = grid.cell(i, j);
            assert!(cell.is_ok(), "cell ({i}, {j}) failed: {:?}", cell.reason);

            let mut p = base.clone();
            p.delta_c = spec.axis1.value(i);
            p.omega_pump = spec.axis2.value(j);
            let init = init_mean_field(&p);
            let mut rhs = MeanFieldRhs::new(&p);
            let layout = rhs.layout();
            let traj =
                integrate(&mut rhs, &init.pack(), p.t_final, &IntegratorSettings::default())
                    .unwrap();
            let avg = time_average(&p, &layout, &traj, p.avg_window).unwrap();

            assert_eq!(
                (cell.theta_abs, cell.n_phot, cell.e_kin, cell.inversion),
                (avg.theta_abs, avg.n_phot, avg.e_kin, avg.inversion),
                "cell ({i}, {j}) does not match its standalone run"
            );
        }
    }
}

/// The width of the empty-cavity line tracks κ across different decay rates,
/// and its center stays at −Δc.
#[test]
fn linewidth_tracks_the_cavity_decay_rate() {
    for kappa in [4.0, 16.0] {
        let mut p = reference_params(1);
        p.g = 0.0;
        p.omega_pump = 0.0;
        p.kappa = kappa;
        p.t_final = 1.0;

        let mut init = CumulantState::zeroed(1, false);
        init.a = num_complex::Complex64::new(2.0, 0.0);
        init.n_phot = 4.0;

        let corr = correlation_function(
            &p,
            &init.pack(),
            &CorrelationSettings {
                t_max: 200.0,
                dt: 0.02,
                mode: ModeTag::Main,
                averages: 1,
                spacing: 1.0,
                t0: 0.0,
            },
            &IntegratorSettings::default(),
        )
        .unwrap();
        let spectrum = spectrum_from_g1(
            &corr,
            &SpectrumSettings {
                apodization: None,
                normalize: true,
            },
        )
        .unwrap();
        let features = locate_features(&spectrum.omega, &spectrum.s, 0.5);
        let peak = features
            .iter()
            .filter(|f| f.kind == FeatureKind::Peak)
            .max_by(|a, b| a.prominence.total_cmp(&b.prominence))
            .expect("no peak found");
        assert!(
            (peak.omega + p.delta_c).abs() < 0.05,
            "κ = {kappa}: line sits at {:.3}, expected {:.3}",
            peak.omega,
            -p.delta_c
        );
        assert!(
            (peak.width - kappa).abs() < 0.05 * kappa,
            "κ = {kappa}: width {:.3} strayed from κ",
            peak.width
        );
    }
}
