//! Virtual cells ("vcells") from Wi-Fi scan traces.
//!
//! The pipeline groups consecutive active-scan fingerprints into vcells
//! ([`vcell`]), finds overlap regions between neighbouring cells
//! ([`overlap`]), encodes each cell as a Bloom filter ([`bloom`], [`index`])
//! and resolves a handful of scans back to a cell ([`locate`]). [`synth`]
//! generates deterministic deployments and traces to drive it.

pub mod bloom;
pub mod error;
pub mod geo;
pub mod geojson;
pub mod index;
pub mod locate;
pub mod overlap;
pub mod scan;
pub mod synth;
pub mod vcell;

pub use bloom::{fp_rate, size_for, BloomFilter, BloomParams};
pub use error::{Error, Result};
pub use geo::{centroid, haversine, trace_length, Meters};
pub use index::{build_index, IndexPolicy, VcellIndex};
pub use locate::{exact_locate, locate, score_cells, Fix, LocateParams, LocationEstimate, Query};
pub use overlap::{
    find_overlaps, overlap_fraction, OverlapCondition, OverlapNorm, OverlapRecord, OverlapSet,
};
pub use scan::{
    ap_universe, parse_scan_log, validate_trace, ApId, Fingerprint, GeoPoint, LogFormat, ScanTrace,
};
pub use synth::{gen_deployment, gen_trace, ApDeployment, SynthConfig};
pub use vcell::{
    assign_scan, form_vcells, vcell_stats, CellCondition, CellStats, Vcell, VcellList,
};
