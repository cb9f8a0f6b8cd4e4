//! CSV and JSON writers for runs, scans and spectra.
//!
//! All writers are deterministic: identical inputs produce byte-identical
//! files (numbers are formatted with the shortest round-trip representation,
//! JSON keys are sorted, nothing embeds a timestamp). Existing files are
//! never overwritten unless `force` is set.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::cumulant::Layout;
use crate::integrator::{IntegratorSettings, Trajectory};
use crate::observables::ObservableRecord;
use crate::params::SystemParams;
use crate::scan::ScanGrid;
use crate::spectrum::{CorrelationSeries, Feature, FeatureKind, SpectrumResult};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("refusing to overwrite `{path}` (pass --force to allow)")]
    Exists { path: PathBuf },
    #[error("writing `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn open(path: &Path, force: bool) -> Result<BufWriter<File>, OutputError> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    match opts.open(path) {
        Ok(f) => Ok(BufWriter::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(OutputError::Exists {
            path: path.to_path_buf(),
        }),
        Err(e) => Err(OutputError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shortest representation that parses back to the same bits ("NaN" for
/// sentinels, exponent form for extreme magnitudes).
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Quote a CSV field if it contains a delimiter, quote or newline.
fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sidecar path for metadata: `runs/traj.csv` → `runs/traj.meta.json`.
pub fn meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

/// Time series of derived observables, optionally followed by every raw
/// state component (one column per entry of the packed vector). The `clean`
/// column is 1 while the physicality monitor was quiet up to that sample.
pub fn write_trajectory_csv(
    path: &Path,
    params: &SystemParams,
    layout: &Layout,
    traj: &Trajectory,
    full_state: bool,
    force: bool,
) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    let err = io_err(path);

    let mut header = vec![
        "t".to_string(),
        "theta".to_string(),
        "e_kin".to_string(),
        "n_phot".to_string(),
        "inversion".to_string(),
    ];
    if layout.two_mode {
        header.push("n_phot_b".to_string());
    }
    header.push("clean".to_string());
    if full_state {
        header.extend(layout.csv_headers());
    }
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;

    for (i, (t, y)) in traj.iter().enumerate() {
        let rec = ObservableRecord::from_state(params, layout, t, y);
        let mut fields = vec![
            fmt(rec.t),
            fmt(rec.theta),
            fmt(rec.e_kin),
            fmt(rec.n_phot),
            fmt(rec.inversion),
        ];
        if let Some(nb) = rec.n_phot_b {
            fields.push(fmt(nb));
        }
        fields.push(if traj.flags()[i] { "1" } else { "0" }.to_string());
        if full_state {
            fields.extend(y.iter().map(|&v| fmt(v)));
        }
        writeln!(w, "{}", fields.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(err)
}

/// One row per scan cell, row-major. Failed cells keep their parameter
/// values and annotations but carry NaN observables and a reason.
pub fn scan_csv_to<W: Write>(w: &mut W, grid: &ScanGrid) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{},theta_abs,theta_signed,n_phot,e_kin,inversion,delta,threshold_margin,status,reason",
        grid.axis1.param.as_str(),
        grid.axis2.param.as_str()
    )?;
    for c in &grid.cells {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt(c.value1),
            fmt(c.value2),
            fmt(c.theta_abs),
            fmt(c.theta_signed),
            fmt(c.n_phot),
            fmt(c.e_kin),
            fmt(c.inversion),
            fmt(c.delta),
            fmt(c.threshold_margin),
            if c.is_ok() { "ok" } else { "failed" },
            csv_escape(c.reason.as_deref().unwrap_or("")),
        )?;
    }
    w.flush()
}

/// `scan_csv_to` into a fresh file.
pub fn write_scan_csv(path: &Path, grid: &ScanGrid, force: bool) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    scan_csv_to(&mut w, grid).map_err(io_err(path))
}

/// First-order correlation function, one row per delay.
pub fn write_g1_csv(path: &Path, series: &CorrelationSeries, force: bool) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    let err = io_err(path);
    writeln!(w, "tau,g1_re,g1_im").map_err(io_err(path))?;
    for (tau, g) in series.tau.iter().zip(&series.g1) {
        writeln!(w, "{},{},{}", fmt(*tau), fmt(g.re), fmt(g.im)).map_err(io_err(path))?;
    }
    w.flush().map_err(err)
}

/// Emission spectrum, one row per frequency bin.
pub fn write_spectrum_csv(
    path: &Path,
    spec: &SpectrumResult,
    force: bool,
) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    let err = io_err(path);
    writeln!(w, "omega,s,s_raw").map_err(io_err(path))?;
    for i in 0..spec.omega.len() {
        writeln!(
            w,
            "{},{},{}",
            fmt(spec.omega[i]),
            fmt(spec.s[i]),
            fmt(spec.s_raw[i])
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(err)
}

/// Detected spectral features, most prominent first.
pub fn write_features_csv(
    path: &Path,
    features: &[Feature],
    force: bool,
) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    let err = io_err(path);
    writeln!(w, "kind,omega,height,prominence,width").map_err(io_err(path))?;
    for f in features {
        writeln!(
            w,
            "{},{},{},{},{}",
            match f.kind {
                FeatureKind::Peak => "peak",
                FeatureKind::Dip => "dip",
            },
            fmt(f.omega),
            fmt(f.height),
            fmt(f.prominence),
            fmt(f.width)
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(err)
}

/// Metadata describing how an output file was produced: the resolved
/// parameters, integrator settings and any command-specific details. Keys
/// are sorted, so the file is byte-reproducible.
pub fn meta_json(
    command: &str,
    params: &SystemParams,
    engine: Option<&str>,
    integrator: &IntegratorSettings,
    details: serde_json::Value,
) -> serde_json::Value {
    serde_json::json!({
        "tool": "selforg",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "engine": engine,
        "params": params,
        "integrator": {
            "rel_tol": integrator.rel_tol,
            "abs_tol": integrator.abs_tol,
            "max_step": integrator.max_step,
            "sample_dt": integrator.sample_dt,
        },
        "details": details,
    })
}

pub fn write_meta_json(
    path: &Path,
    meta: &serde_json::Value,
    force: bool,
) -> Result<(), OutputError> {
    let mut w = open(path, force)?;
    let err = io_err(path);
    let text = serde_json::to_string_pretty(meta).expect("JSON value always serializes");
    writeln!(w, "{text}").map_err(io_err(path))?;
    w.flush().map_err(err)
}
