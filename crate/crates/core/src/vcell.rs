//! Sequential vcell formation.
//!
//! Scans are visited in order. A scan joins the current vcell when it shares
//! at least `cc * |vcell.aps|` access points with it; otherwise the current
//! vcell is closed and the scan seeds the next one. Empty scans are skipped
//! without closing the current vcell.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{centroid, haversine};
use crate::scan::{ApId, Fingerprint, GeoPoint, ScanTrace};

/// Fraction of the current vcell's APs a scan must share to be merged.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CellCondition(f64);

impl CellCondition {
    pub fn new(cc: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&cc) {
            Ok(CellCondition(cc))
        } else {
            Err(Error::CellCondition(cc))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for CellCondition {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        CellCondition::new(v)
    }
}

impl From<CellCondition> for f64 {
    fn from(cc: CellCondition) -> f64 {
        cc.0
    }
}

/// A member scan of a vcell, kept for geometry and density statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberScan {
    pub seq: u32,
    pub lat: f64,
    pub lon: f64,
    /// Number of APs this scan reported.
    pub n: u32,
}

impl MemberScan {
    pub fn pos(&self) -> GeoPoint {
        GeoPoint {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vcell {
    pub vcell_id: u32,
    pub first_seq: u32,
    pub last_seq: u32,
    pub anchor: GeoPoint,
    pub aps: BTreeSet<ApId>,
    pub scans: Vec<MemberScan>,
}

impl Vcell {
    pub fn contains_seq(&self, seq: u32) -> bool {
        self.scans.binary_search_by_key(&seq, |m| m.seq).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VcellList {
    pub trace_id: String,
    pub cc: CellCondition,
    pub cells: Vec<Vcell>,
}

impl VcellList {
    /// Checks the structural invariants of a list read from disk: ids are
    /// consecutive from 0, ranges are ordered and disjoint, member scans lie
    /// inside their range, and each cell's AP set is non-empty.
    pub fn check(&self) -> std::result::Result<(), String> {
        let mut prev_last: Option<u32> = None;
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.vcell_id as usize != i {
                return Err(format!("cell {i} has vcell_id {}", cell.vcell_id));
            }
            if cell.first_seq > cell.last_seq {
                return Err(format!("cell {i} has an inverted scan range"));
            }
            if prev_last.is_some_and(|p| cell.first_seq <= p) {
                return Err(format!("cell {i} overlaps the previous scan range"));
            }
            if cell.aps.is_empty() {
                return Err(format!("cell {i} has no access points"));
            }
            if !cell.scans.is_empty() {
                let seqs_ok = cell.scans.windows(2).all(|w| w[0].seq < w[1].seq);
                let first = cell.scans.first().map(|m| m.seq);
                let last = cell.scans.last().map(|m| m.seq);
                if !seqs_ok || first != Some(cell.first_seq) || last != Some(cell.last_seq) {
                    return Err(format!("cell {i} member scans disagree with its range"));
                }
            }
            prev_last = Some(cell.last_seq);
        }
        Ok(())
    }
}

struct CellBuilder<'a> {
    aps: BTreeSet<ApId>,
    members: Vec<&'a Fingerprint>,
}

impl<'a> CellBuilder<'a> {
    fn seed(scan: &'a Fingerprint) -> Self {
        CellBuilder {
            aps: scan.aps.clone(),
            members: vec![scan],
        }
    }

    fn accepts(&self, scan: &Fingerprint, cc: CellCondition) -> bool {
        let shared = scan.aps.intersection(&self.aps).count();
        shared as f64 >= cc.get() * self.aps.len() as f64
    }

    fn merge(&mut self, scan: &'a Fingerprint) {
        self.aps.extend(scan.aps.iter().cloned());
        self.members.push(scan);
    }

    fn finish(self, vcell_id: u32) -> Result<Vcell> {
        let points: Vec<GeoPoint> = self.members.iter().map(|s| s.pos).collect();
        let anchor = centroid(&points)?;
        Ok(Vcell {
            vcell_id,
            first_seq: self.members[0].seq,
            last_seq: self.members[self.members.len() - 1].seq,
            anchor,
            aps: self.aps,
            scans: self
                .members
                .iter()
                .map(|s| MemberScan {
                    seq: s.seq,
                    lat: s.pos.lat,
                    lon: s.pos.lon,
                    n: s.aps.len() as u32,
                })
                .collect(),
        })
    }
}

/// Forms vcells from a trace in a single pass.
pub fn form_vcells(trace: &ScanTrace, cc: CellCondition) -> Result<VcellList> {
    let mut scans = trace.non_empty_scans();
    let first = scans.next().ok_or(Error::NoNonEmptyScans)?;
    let mut cells = Vec::new();
    let mut current = CellBuilder::seed(first);
    for scan in scans {
        if current.accepts(scan, cc) {
            current.merge(scan);
        } else {
            let done = std::mem::replace(&mut current, CellBuilder::seed(scan));
            cells.push(done.finish(cells.len() as u32)?);
        }
    }
    cells.push(current.finish(cells.len() as u32)?);
    Ok(VcellList {
        trace_id: trace.trace_id.clone(),
        cc,
        cells,
    })
}

/// The vcell holding scan `seq`.
pub fn assign_scan(vcells: &VcellList, seq: u32) -> Result<u32> {
    let idx = vcells.cells.partition_point(|c| c.first_seq <= seq);
    let cell = idx
        .checked_sub(1)
        .map(|i| &vcells.cells[i])
        .filter(|c| c.contains_seq(seq))
        .ok_or(Error::UnassignedScan(seq))?;
    Ok(cell.vcell_id)
}

/// Size and density figures for a vcell list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellStats {
    pub cell_count: usize,
    pub ap_counts: Vec<usize>,
    pub scan_counts: Vec<usize>,
    /// Total AP sightings divided by total member scans.
    pub aps_per_fingerprint: f64,
    /// Largest pairwise distance between member scan positions, meters.
    pub diameters: Vec<f64>,
}

impl CellStats {
    pub fn mean_aps_per_cell(&self) -> f64 {
        self.ap_counts.iter().sum::<usize>() as f64 / self.cell_count.max(1) as f64
    }

    pub fn median_aps_per_cell(&self) -> f64 {
        median(&self.ap_counts)
    }
}

fn median(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    }
}

fn diameter(points: &[GeoPoint]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(haversine(*a, *b).get());
        }
    }
    best
}

pub fn vcell_stats(vcells: &VcellList) -> CellStats {
    let sightings: u64 = vcells
        .cells
        .iter()
        .flat_map(|c| c.scans.iter())
        .map(|m| m.n as u64)
        .sum();
    let scan_counts: Vec<usize> = vcells.cells.iter().map(|c| c.scans.len()).collect();
    let total_scans: usize = scan_counts.iter().sum();
    CellStats {
        cell_count: vcells.cells.len(),
        ap_counts: vcells.cells.iter().map(|c| c.aps.len()).collect(),
        aps_per_fingerprint: if total_scans == 0 {
            0.0
        } else {
            sightings as f64 / total_scans as f64
        },
        scan_counts,
        diameters: vcells
            .cells
            .iter()
            .map(|c| diameter(&c.scans.iter().map(MemberScan::pos).collect::<Vec<_>>()))
            .collect(),
    }
}
