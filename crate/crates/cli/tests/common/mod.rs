#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use vcell_core::synth::straight_path;
use vcell_core::{GeoPoint, SynthConfig};

pub const DENSITY: f64 = 365.0;
pub const INTERVAL_S: f64 = 3.6;

/// Walking survey along a straight street: 365 APs/km, 50 m radius,
/// 0.9 detection, a scan every 3.6 s with the radio sweeping continuously.
pub fn walk(seed: u64, km: f64) -> SynthConfig {
    let origin = GeoPoint::new(8.59, -71.14).unwrap();
    let mut cfg = SynthConfig::new(seed, straight_path(origin, 1.0, km * 1000.0));
    cfg.ap_density = DENSITY;
    cfg.scan_interval_s = INTERVAL_S;
    cfg.scan_duration_s = INTERVAL_S;
    cfg
}

pub fn vcell(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcell"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn vcell")
}

/// Runs `vcell` and panics with its stderr on a non-zero exit.
pub fn vcell_ok(dir: &Path, args: &[&str]) -> Output {
    let out = vcell(dir, args);
    assert!(
        out.status.success(),
        "vcell {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Flags reproducing [`walk`] through `vcell simulate`.
pub const WALK_FLAGS: &[&str] = &[
    "--density",
    "365",
    "--radius",
    "50",
    "--detect-prob",
    "0.9",
    "--speed-kph",
    "5",
    "--interval-s",
    "3.6",
    "--scan-duration-s",
    "3.6",
];
