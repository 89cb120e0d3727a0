//! Overlap regions between nearby vcells.
//!
//! Two vcells overlap when the share of access points they have in common
//! falls inside the half-open band `[lo, hi)`. Only pairs at most `window`
//! positions apart in formation order are compared; `window = usize::MAX`
//! compares every pair.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::ApId;
use crate::vcell::{Vcell, VcellList};

/// Half-open band `[lo, hi)` of shared-AP fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapCondition {
    lo: f64,
    hi: f64,
}

impl OverlapCondition {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0 {
            Ok(OverlapCondition { lo, hi })
        } else {
            Err(Error::OverlapCondition { lo, hi })
        }
    }

    /// A band over raw shared-AP counts, for use with [`OverlapNorm::Absolute`].
    pub fn counts(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi {
            Ok(OverlapCondition { lo, hi })
        } else {
            Err(Error::OverlapCondition { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, fraction: f64) -> bool {
        self.lo <= fraction && fraction < self.hi
    }
}

/// How the shared-AP count is normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapNorm {
    /// `|A ∩ B| / min(|A|, |B|)`
    #[default]
    Min,
    /// `|A ∩ B| / |A ∪ B|` (Jaccard)
    Union,
    /// `|A ∩ B|`, unnormalized
    Absolute,
}

impl FromStr for OverlapNorm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "min" => Ok(OverlapNorm::Min),
            "union" => Ok(OverlapNorm::Union),
            "absolute" => Ok(OverlapNorm::Absolute),
            other => Err(format!(
                "unknown overlap norm {other:?} (expected min, union or absolute)"
            )),
        }
    }
}

impl OverlapNorm {
    fn apply(self, shared: usize, a: usize, b: usize) -> f64 {
        match self {
            OverlapNorm::Min => {
                let d = a.min(b);
                if d == 0 {
                    0.0
                } else {
                    shared as f64 / d as f64
                }
            }
            OverlapNorm::Union => {
                let d = a + b - shared;
                if d == 0 {
                    0.0
                } else {
                    shared as f64 / d as f64
                }
            }
            OverlapNorm::Absolute => shared as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapRecord {
    pub a: u32,
    pub b: u32,
    pub fraction: f64,
    pub shared: BTreeSet<ApId>,
}

/// Serialized form of an overlap run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub oc: OverlapCondition,
    pub window: usize,
    #[serde(default)]
    pub norm: OverlapNorm,
    pub overlaps: Vec<OverlapRecord>,
}

impl OverlapSet {
    /// Records involving vcell `id`, in either position.
    pub fn for_cell(&self, id: u32) -> impl Iterator<Item = &OverlapRecord> {
        self.overlaps.iter().filter(move |r| r.a == id || r.b == id)
    }
}

/// `|A ∩ B| / min(|A|, |B|)`
pub fn overlap_fraction(a: &Vcell, b: &Vcell) -> f64 {
    let shared = a.aps.intersection(&b.aps).count();
    OverlapNorm::Min.apply(shared, a.aps.len(), b.aps.len())
}

pub fn find_overlaps(
    vcells: &VcellList,
    oc: OverlapCondition,
    window: usize,
) -> Vec<OverlapRecord> {
    find_overlaps_with(vcells, oc, window, OverlapNorm::Min)
}

/// Pairs `(i, j)` with `0 < j - i <= window` whose normalized overlap lies in
/// the band, sorted by `(a, b)`. Pairs with no shared AP are never emitted.
pub fn find_overlaps_with(
    vcells: &VcellList,
    oc: OverlapCondition,
    window: usize,
    norm: OverlapNorm,
) -> Vec<OverlapRecord> {
    let cells = &vcells.cells;
    let mut out = Vec::new();
    for (i, a) in cells.iter().enumerate() {
        let end = i.saturating_add(window).min(cells.len().saturating_sub(1));
        for b in cells.iter().take(end + 1).skip(i + 1) {
            let shared: BTreeSet<ApId> = a.aps.intersection(&b.aps).cloned().collect();
            if shared.is_empty() {
                continue;
            }
            let fraction = norm.apply(shared.len(), a.aps.len(), b.aps.len());
            if oc.contains(fraction) {
                out.push(OverlapRecord {
                    a: a.vcell_id,
                    b: b.vcell_id,
                    fraction,
                    shared,
                });
            }
        }
    }
    out
}
