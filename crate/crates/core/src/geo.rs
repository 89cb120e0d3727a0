//! Spherical-earth helpers. Vcells span city blocks, so a fixed-radius sphere
//! and a planar centroid in degrees are accurate enough.

use std::ops::Add;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scan::{GeoPoint, ScanTrace};

/// Mean Earth radius used by every distance computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A non-negative distance in meters.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default, Serialize)]
pub struct Meters(f64);

impl Meters {
    pub const ZERO: Meters = Meters(0.0);

    /// Returns `None` for negative or non-finite values.
    pub fn new(value: f64) -> Option<Self> {
        (value.is_finite() && value >= 0.0).then_some(Meters(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Add for Meters {
    type Output = Meters;
    fn add(self, rhs: Meters) -> Meters {
        Meters(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Meters {
    fn sum<I: Iterator<Item = Meters>>(iter: I) -> Meters {
        iter.fold(Meters::ZERO, Add::add)
    }
}

/// Great-circle distance.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> Meters {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let arc = 2.0 * h.sqrt().min(1.0).asin();
    Meters(EARTH_RADIUS_M * arc)
}

/// Arithmetic mean of latitudes and longitudes. Only meaningful for small
/// extents; refuses inputs spanning 90 degrees of longitude or more.
pub fn centroid(points: &[GeoPoint]) -> Result<GeoPoint> {
    let first = points.first().ok_or(Error::EmptyCentroid)?;
    let (mut lo, mut hi) = (first.lon, first.lon);
    let (mut lat_sum, mut lon_sum) = (0.0, 0.0);
    for p in points {
        lo = lo.min(p.lon);
        hi = hi.max(p.lon);
        lat_sum += p.lat;
        lon_sum += p.lon;
    }
    if hi - lo >= 90.0 {
        return Err(Error::AntimeridianSpan(hi - lo));
    }
    let n = points.len() as f64;
    GeoPoint::new(lat_sum / n, lon_sum / n)
}

/// Length of the path through consecutive scan positions.
pub fn trace_length(trace: &ScanTrace) -> Meters {
    path_length(trace.scans.iter().map(|s| s.pos))
}

pub fn path_length(points: impl IntoIterator<Item = GeoPoint>) -> Meters {
    let mut iter = points.into_iter();
    let Some(mut prev) = iter.next() else {
        return Meters::ZERO;
    };
    iter.map(|p| {
        let d = haversine(prev, p);
        prev = p;
        d
    })
    .sum()
}

/// Initial bearing from `a` to `b`, radians clockwise from north.
pub fn bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * lat2.cos();
    let x = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    y.atan2(x)
}

/// Point reached by travelling `distance` meters from `origin` on `bearing`.
pub fn destination(origin: GeoPoint, bearing: f64, distance: f64) -> GeoPoint {
    let delta = distance / EARTH_RADIUS_M;
    let lat1 = origin.lat.to_radians();
    let lon1 = origin.lon.to_radians();
    let lat2 = (lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * bearing.cos()).asin();
    let lon2 = lon1
        + (bearing.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * lat2.sin());
    let lon = (lon2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint {
        lat: lat2.to_degrees(),
        lon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::RawScan;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn equator_trace(lons: &[f64]) -> ScanTrace {
        let raw = lons
            .iter()
            .enumerate()
            .map(|(i, &lon)| RawScan {
                timestamp_ms: i as i64,
                pos: p(0.0, lon),
                aps: Default::default(),
            })
            .collect();
        ScanTrace::from_scans("eq", None, raw).unwrap()
    }

    // R * pi / 180
    const ONE_DEGREE_ARC: f64 = 111_194.926_644_558_73;

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine(p(0.0, 0.0), p(0.0, 0.0)).get(), 0.0);
        assert!((haversine(p(0.0, 0.0), p(0.0, 1.0)).get() - ONE_DEGREE_ARC).abs() < 0.1);
        assert!((ONE_DEGREE_ARC - EARTH_RADIUS_M * std::f64::consts::PI / 180.0).abs() < 1e-6);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&[p(0.0, 0.0)]).unwrap(), p(0.0, 0.0));
        assert_eq!(centroid(&[p(0.0, 0.0), p(0.0, 2.0)]).unwrap(), p(0.0, 1.0));
        assert_eq!(
            centroid(&[p(1.0, 1.0), p(2.0, 2.0), p(3.0, 3.0)]).unwrap(),
            p(2.0, 2.0)
        );
        assert!(matches!(centroid(&[]), Err(Error::EmptyCentroid)));
        assert!(matches!(
            centroid(&[p(0.0, -170.0), p(0.0, 170.0)]),
            Err(Error::AntimeridianSpan(_))
        ));
    }

    #[test]
    fn trace_length_examples() {
        assert_eq!(trace_length(&equator_trace(&[5.0])).get(), 0.0);
        let two = trace_length(&equator_trace(&[0.0, 1.0])).get();
        assert!((two - ONE_DEGREE_ARC).abs() < 0.1);
        let three = trace_length(&equator_trace(&[0.0, 0.5, 1.0])).get();
        assert!((three - two).abs() < 0.5);
    }

    #[test]
    fn destination_inverts_bearing_and_distance() {
        let a = p(8.59, -71.14);
        let b = destination(a, 0.7, 1234.5);
        assert!((haversine(a, b).get() - 1234.5).abs() < 1e-6);
        assert!((bearing(a, b) - 0.7).abs() < 1e-9);
    }

    #[test]
    fn meters_rejects_negative() {
        assert!(Meters::new(-1.0).is_none());
        assert!(Meters::new(f64::NAN).is_none());
        assert_eq!(Meters::new(2.0).unwrap().get(), 2.0);
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-89.0..89.0f64, -179.0..179.0f64).prop_map(|(lat, lon)| p(lat, lon))
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in point(), b in point()) {
            prop_assert_eq!(haversine(a, b), haversine(b, a));
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let ab = haversine(a, b).get();
            let bc = haversine(b, c).get();
            let ac = haversine(a, c).get();
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn repeating_last_point_adds_nothing(lons in prop::collection::vec(-1.0..1.0f64, 1..20)) {
            let mut extended = lons.clone();
            extended.push(*lons.last().unwrap());
            prop_assert_eq!(
                trace_length(&equator_trace(&lons)),
                trace_length(&equator_trace(&extended))
            );
        }
    }
}
