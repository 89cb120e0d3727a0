//! Synthetic AP deployments and scan traces along a path.
//!
//! APs are scattered along a polyline: their count is Poisson with mean
//! `density * length_km`, each sits at a uniform distance along the path and a
//! uniform lateral offset in `[-radius, radius]`. A walker then scans every
//! `speed * interval` meters; each scan reports every AP within
//! `detect_radius` of the scan point, independently with probability
//! `detect_prob`.
//!
//! With a non-zero `scan_duration_s` the walker keeps moving while it scans,
//! and an AP is reported only if it is in range at both ends of that stretch,
//! so faster scans report fewer APs.
//!
//! Random values come from [`rng`]: stream 1 drives the deployment
//! (count, then `(along, lateral)` per AP), stream 2 keys the detection coin
//! for scan `i` and AP `j` at counter `(i << 32) | j`.

pub mod rng;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{bearing, destination, haversine, EARTH_RADIUS_M};
use crate::scan::{ApId, GeoPoint, RawScan, ScanTrace};

use rng::Stream;

const STREAM_DEPLOY: u64 = 1;
const STREAM_DETECT: u64 = 2;

/// Locally administered prefix for generated BSSIDs.
pub const MAC_PREFIX: [u8; 3] = [0x02, 0x76, 0x63];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub path: Vec<GeoPoint>,
    /// APs per km of path.
    pub ap_density: f64,
    pub detect_radius_m: f64,
    pub detect_prob: f64,
    pub speed_kph: f64,
    pub scan_interval_s: f64,
    /// Distance along the path of the first scan.
    pub start_offset_m: f64,
    /// How long one scan takes. An AP is only reported if it stays within
    /// `detect_radius_m` over the whole stretch covered during the scan,
    /// centered on the scan position. Zero samples at a single point.
    pub scan_duration_s: f64,
}

impl SynthConfig {
    /// Walking-speed defaults: 100 APs/km, 50 m radius, 0.9 detection,
    /// 5 kph with a scan every 3.6 s (one scan per 5 m).
    pub fn new(seed: u64, path: Vec<GeoPoint>) -> Self {
        SynthConfig {
            seed,
            path,
            ap_density: 100.0,
            detect_radius_m: 50.0,
            detect_prob: 0.9,
            speed_kph: 5.0,
            scan_interval_s: 3.6,
            start_offset_m: 0.0,
            scan_duration_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SynthConfig(msg));
        if !(self.ap_density >= 0.0 && self.ap_density.is_finite()) {
            return bad(format!(
                "ap density must be non-negative, got {}",
                self.ap_density
            ));
        }
        if !(self.detect_radius_m > 0.0 && self.detect_radius_m.is_finite()) {
            return bad(format!(
                "detect radius must be positive, got {}",
                self.detect_radius_m
            ));
        }
        if !(self.detect_prob > 0.0 && self.detect_prob <= 1.0) {
            return bad(format!(
                "detect probability must lie in (0, 1], got {}",
                self.detect_prob
            ));
        }
        if !(self.speed_kph > 0.0 && self.speed_kph.is_finite()) {
            return bad(format!("speed must be positive, got {}", self.speed_kph));
        }
        if !(self.scan_interval_s > 0.0 && self.scan_interval_s.is_finite()) {
            return bad(format!(
                "scan interval must be positive, got {}",
                self.scan_interval_s
            ));
        }
        if !(self.start_offset_m >= 0.0 && self.start_offset_m.is_finite()) {
            return bad(format!(
                "start offset must be non-negative, got {}",
                self.start_offset_m
            ));
        }
        if !(self.scan_duration_s >= 0.0 && self.scan_duration_s.is_finite()) {
            return bad(format!(
                "scan duration must be non-negative, got {}",
                self.scan_duration_s
            ));
        }
        Ok(())
    }

    /// Meters travelled during one scan.
    pub fn sweep_m(&self) -> f64 {
        self.speed_kph / 3.6 * self.scan_duration_s
    }

    /// Meters travelled between consecutive scans.
    pub fn spacing_m(&self) -> f64 {
        self.speed_kph / 3.6 * self.scan_interval_s
    }
}

/// A path with cumulative segment lengths.
#[derive(Clone, Debug)]
pub struct Polyline {
    points: Vec<GeoPoint>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: &[GeoPoint]) -> Result<Self> {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + haversine(w[0], w[1]).get());
        }
        if points.len() < 2 || *cumulative.last().unwrap() <= 0.0 {
            return Err(Error::SynthConfig("path has zero length".into()));
        }
        Ok(Polyline {
            points: points.to_vec(),
            cumulative,
        })
    }

    pub fn length_m(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Position and heading at `d` meters along the path (clamped).
    pub fn at(&self, d: f64) -> (GeoPoint, f64) {
        let d = d.clamp(0.0, self.length_m());
        let seg = self
            .cumulative
            .partition_point(|&c| c <= d)
            .clamp(1, self.points.len() - 1)
            - 1;
        // skip zero-length segments so the heading is defined
        let seg = (seg..self.points.len() - 1)
            .find(|&i| self.cumulative[i + 1] > self.cumulative[i])
            .unwrap_or(seg);
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let heading = bearing(a, b);
        (destination(a, heading, d - self.cumulative[seg]), heading)
    }
}

/// A straight path of `length_m` meters from `origin` on `heading` (radians).
pub fn straight_path(origin: GeoPoint, heading: f64, length_m: f64) -> Vec<GeoPoint> {
    vec![origin, destination(origin, heading, length_m)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeployedAp {
    pub bssid: ApId,
    pub lat: f64,
    pub lon: f64,
}

impl DeployedAp {
    pub fn pos(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Ground-truth AP placement; serializes as `{"aps": [{bssid, lat, lon}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApDeployment {
    pub aps: Vec<DeployedAp>,
}

fn generated_id(counter: u32) -> ApId {
    let c = counter.to_be_bytes();
    ApId::from_octets([
        MAC_PREFIX[0],
        MAC_PREFIX[1],
        MAC_PREFIX[2],
        c[1],
        c[2],
        c[3],
    ])
}

pub fn gen_deployment(cfg: &SynthConfig) -> Result<ApDeployment> {
    cfg.validate()?;
    let path = Polyline::new(&cfg.path)?;
    let mut rng = Stream::new(cfg.seed, STREAM_DEPLOY);
    let count = rng.poisson(cfg.ap_density * path.length_m() / 1000.0);
    if count >= 1 << 24 {
        return Err(Error::SynthConfig(format!(
            "{count} APs exceed the 24-bit id space"
        )));
    }
    let r = cfg.detect_radius_m;
    let aps = (0..count as u32)
        .map(|i| {
            let along = rng.uniform(0.0, path.length_m());
            let lateral = rng.uniform(-r, r);
            let (base, heading) = path.at(along);
            let side = if lateral < 0.0 { -FRAC_PI_2 } else { FRAC_PI_2 };
            let pos = destination(base, heading + side, lateral.abs());
            DeployedAp {
                bssid: generated_id(i),
                lat: pos.lat,
                lon: pos.lon,
            }
        })
        .collect();
    Ok(ApDeployment { aps })
}

/// Scans the deployment along the configured path.
pub fn gen_trace(dep: &ApDeployment, cfg: &SynthConfig) -> Result<ScanTrace> {
    cfg.validate()?;
    let path = Polyline::new(&cfg.path)?;
    let spacing = cfg.spacing_m();
    let r = cfg.detect_radius_m;
    let positions: Vec<GeoPoint> = dep.aps.iter().map(DeployedAp::pos).collect();
    let dlat_max = (r / EARTH_RADIUS_M).to_degrees() * 1.01;
    let half_sweep = cfg.sweep_m() / 2.0;

    let mut raw = Vec::new();
    let mut i: u64 = 0;
    loop {
        let d = cfg.start_offset_m + i as f64 * spacing;
        if d > path.length_m() + 1e-6 {
            break;
        }
        let (pos, _) = path.at(d);
        let sweep_start = path.at(d - half_sweep).0;
        let sweep_end = path.at(d + half_sweep).0;
        let dlon_max = dlat_max / pos.lat.to_radians().cos().max(1e-6);
        let aps = positions
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                (p.lat - pos.lat).abs() <= dlat_max && (p.lon - pos.lon).abs() <= dlon_max
            })
            .filter(|(_, p)| haversine(pos, **p).get() <= r)
            .filter(|(_, p)| {
                half_sweep == 0.0
                    || (haversine(sweep_start, **p).get() <= r
                        && haversine(sweep_end, **p).get() <= r)
            })
            .filter(|(j, _)| {
                let coin = rng::to_unit(rng::draw(cfg.seed, STREAM_DETECT, (i << 32) | *j as u64));
                coin < cfg.detect_prob
            })
            .map(|(j, _)| dep.aps[j].bssid.clone())
            .collect();
        raw.push(RawScan {
            timestamp_ms: (i as f64 * cfg.scan_interval_s * 1000.0).round() as i64,
            pos,
            aps,
        });
        i += 1;
    }
    if raw.is_empty() {
        return Err(Error::SynthConfig(
            "start offset lies beyond the end of the path".into(),
        ));
    }
    ScanTrace::from_scans(format!("synth-{}", cfg.seed), Some(cfg.speed_kph), raw)
}
