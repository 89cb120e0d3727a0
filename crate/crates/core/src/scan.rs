//! Scan traces: access-point identifiers, fingerprints, and the on-disk
//! scan-log formats.
//!
//! Two log formats are accepted:
//!
//! * **JSONL** - one scan per line, `{"t": <ms>, "lat": <deg>, "lon": <deg>, "aps": [<bssid>, ...]}`.
//!   Unknown fields are ignored, blank lines are skipped.
//! * **CSV** - header `t,lat,lon,bssid`, one row per AP sighting. Rows sharing a
//!   `t` form one scan. A row with an empty `bssid` records a scan that saw
//!   nothing.
//!
//! Scans are re-sequenced by timestamp after parsing. Two scans with the same
//! timestamp are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Canonical BSSID: six lowercase hex octets separated by colons.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApId(String);

impl ApId {
    /// Canonicalizes a MAC address written with `:`, `-` or `.` separators
    /// (or none at all) in any letter case.
    pub fn parse(raw: &str) -> Result<Self> {
        let digits: Vec<u8> = raw
            .trim()
            .bytes()
            .filter(|b| !matches!(b, b':' | b'-' | b'.'))
            .collect();
        if digits.len() != 12 || !digits.iter().all(u8::is_ascii_hexdigit) {
            return Err(Error::InvalidApId(raw.to_string()));
        }
        let mut out = String::with_capacity(17);
        for (i, pair) in digits.chunks(2).enumerate() {
            if i > 0 {
                out.push(':');
            }
            out.push(pair[0].to_ascii_lowercase() as char);
            out.push(pair[1].to_ascii_lowercase() as char);
        }
        Ok(ApId(out))
    }

    /// Builds an id from raw octets.
    pub fn from_octets(octets: [u8; 6]) -> Self {
        let s = octets
            .iter()
            .map(|o| format!("{o:02x}"))
            .collect::<Vec<_>>()
            .join(":");
        ApId(s)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ApId({})", self.0)
    }
}

impl FromStr for ApId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ApId::parse(s)
    }
}

impl Serialize for ApId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ApId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        ApId::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// A WGS-84 coordinate in decimal degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > 90.0 || lon.abs() > 180.0 {
            return Err(Error::InvalidGeoPoint { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lat: f64,
            lon: f64,
        }
        let raw = Raw::deserialize(d)?;
        GeoPoint::new(raw.lat, raw.lon).map_err(serde::de::Error::custom)
    }
}

/// One active scan.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub seq: u32,
    pub timestamp_ms: i64,
    pub pos: GeoPoint,
    pub aps: BTreeSet<ApId>,
}

impl Fingerprint {
    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }
}

/// An ordered sequence of scans taken along one journey.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanTrace {
    pub trace_id: String,
    pub speed_hint_kph: Option<f64>,
    pub scans: Vec<Fingerprint>,
}

/// An unsequenced scan, as read from a log or produced by a generator.
#[derive(Clone, Debug)]
pub struct RawScan {
    pub timestamp_ms: i64,
    pub pos: GeoPoint,
    pub aps: BTreeSet<ApId>,
}

impl ScanTrace {
    /// Sorts scans by timestamp and assigns `seq` from 0. Fails on an empty
    /// input or on repeated timestamps.
    pub fn from_scans(
        trace_id: impl Into<String>,
        speed_hint_kph: Option<f64>,
        mut raw: Vec<RawScan>,
    ) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyLog);
        }
        raw.sort_by_key(|r| r.timestamp_ms);
        let mut dups: Vec<i64> = raw
            .windows(2)
            .filter(|w| w[0].timestamp_ms == w[1].timestamp_ms)
            .map(|w| w[0].timestamp_ms)
            .collect();
        if !dups.is_empty() {
            dups.dedup();
            return Err(Error::DuplicateTimestamps(dups));
        }
        let scans = raw
            .into_iter()
            .enumerate()
            .map(|(i, r)| Fingerprint {
                seq: i as u32,
                timestamp_ms: r.timestamp_ms,
                pos: r.pos,
                aps: r.aps,
            })
            .collect();
        Ok(ScanTrace {
            trace_id: trace_id.into(),
            speed_hint_kph,
            scans,
        })
    }

    pub fn non_empty_scans(&self) -> impl Iterator<Item = &Fingerprint> {
        self.scans.iter().filter(|s| !s.is_empty())
    }
}

/// Supported scan-log encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl FromStr for LogFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(format!(
                "unknown scan-log format {other:?} (expected jsonl or csv)"
            )),
        }
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    t: i64,
    lat: f64,
    lon: f64,
    #[serde(default)]
    aps: Vec<String>,
}

#[derive(Serialize)]
struct JsonlOut<'a> {
    t: i64,
    lat: f64,
    lon: f64,
    aps: &'a BTreeSet<ApId>,
}

fn point_at(line: usize, lat: f64, lon: f64) -> Result<GeoPoint> {
    GeoPoint::new(lat, lon).map_err(|_| Error::CoordinateRange { line, lat, lon })
}

fn ap_set<'a>(line: usize, raw: impl IntoIterator<Item = &'a str>) -> Result<BTreeSet<ApId>> {
    raw.into_iter()
        .map(|s| {
            ApId::parse(s).map_err(|_| Error::Malformed {
                line,
                msg: format!("invalid BSSID {s:?}"),
            })
        })
        .collect()
}

/// Parses a scan log into a validated, re-sequenced trace.
pub fn parse_scan_log<R: Read>(input: R, format: LogFormat, trace_id: &str) -> Result<ScanTrace> {
    let raw = match format {
        LogFormat::Jsonl => read_jsonl(input)?,
        LogFormat::Csv => read_csv(input)?,
    };
    ScanTrace::from_scans(trace_id, None, raw)
}

fn read_jsonl<R: Read>(input: R) -> Result<Vec<RawScan>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        out.push(RawScan {
            timestamp_ms: rec.t,
            pos: point_at(line_no, rec.lat, rec.lon)?,
            aps: ap_set(line_no, rec.aps.iter().map(String::as_str))?,
        });
    }
    Ok(out)
}

fn read_csv<R: Read>(input: R) -> Result<Vec<RawScan>> {
    #[derive(Deserialize)]
    struct Row {
        t: i64,
        lat: f64,
        lon: f64,
        bssid: String,
    }

    let csv_err = |e: csv::Error| Error::Malformed {
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        msg: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut record = csv::StringRecord::new();
    let mut scans: BTreeMap<i64, RawScan> = BTreeMap::new();
    while reader.read_record(&mut record).map_err(csv_err)? {
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Malformed {
                line,
                msg: e.to_string(),
            })?;
        let pos = point_at(line, row.lat, row.lon)?;
        let scan = scans.entry(row.t).or_insert_with(|| RawScan {
            timestamp_ms: row.t,
            pos,
            aps: BTreeSet::new(),
        });
        if scan.pos != pos {
            return Err(Error::Malformed {
                line,
                msg: format!("scan t={} has conflicting positions", row.t),
            });
        }
        if !row.bssid.is_empty() {
            scan.aps.extend(ap_set(line, [row.bssid.as_str()])?);
        }
    }
    Ok(scans.into_values().collect())
}

/// Writes a trace as JSONL, one scan per line.
pub fn write_jsonl<W: Write>(trace: &ScanTrace, mut out: W) -> Result<()> {
    for scan in &trace.scans {
        let rec = JsonlOut {
            t: scan.timestamp_ms,
            lat: scan.pos.lat,
            lon: scan.pos.lon,
            aps: &scan.aps,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Summary of a trace's contents and invariants. Produced without mutation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub scans: usize,
    pub unique_aps: usize,
    pub empty_scans: Vec<u32>,
    pub seq_contiguous: bool,
    pub timestamps_increasing: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.scans > 0 && self.seq_contiguous && self.timestamps_increasing
    }
}

pub fn validate_trace(trace: &ScanTrace) -> ValidationReport {
    ValidationReport {
        scans: trace.scans.len(),
        unique_aps: ap_universe(trace).len(),
        empty_scans: trace
            .scans
            .iter()
            .filter(|s| s.is_empty())
            .map(|s| s.seq)
            .collect(),
        seq_contiguous: trace
            .scans
            .iter()
            .enumerate()
            .all(|(i, s)| s.seq as usize == i),
        timestamps_increasing: trace
            .scans
            .windows(2)
            .all(|w| w[0].timestamp_ms < w[1].timestamp_ms),
    }
}

/// Every access point seen anywhere on the journey.
pub fn ap_universe(trace: &ScanTrace) -> BTreeSet<ApId> {
    trace
        .scans
        .iter()
        .flat_map(|s| s.aps.iter().cloned())
        .collect()
}
