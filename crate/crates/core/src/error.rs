use thiserror::Error;

/// Errors produced by the vcell pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("line {line}: coordinate out of range (lat={lat}, lon={lon})")]
    CoordinateRange { line: usize, lat: f64, lon: f64 },

    #[error("invalid coordinate (lat={lat}, lon={lon})")]
    InvalidGeoPoint { lat: f64, lon: f64 },

    #[error("invalid access point id {0:?}")]
    InvalidApId(String),

    #[error("duplicate scan timestamps: {0:?}")]
    DuplicateTimestamps(Vec<i64>),

    #[error("scan log contains no scans")]
    EmptyLog,

    #[error("trace has no non-empty scans")]
    NoNonEmptyScans,

    #[error("cell condition must lie in [0, 1], got {0}")]
    CellCondition(f64),

    #[error("overlap condition must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi})")]
    OverlapCondition { lo: f64, hi: f64 },

    #[error("scan {0} is not assigned to any vcell")]
    UnassignedScan(u32),

    #[error("centroid of an empty point set")]
    EmptyCentroid,

    #[error("points span {0:.1} degrees of longitude; centroid requires < 90")]
    AntimeridianSpan(f64),

    #[error("invalid Bloom parameters: {0}")]
    BloomParams(String),

    #[error("target false-positive rate must lie in (0, 1), got {0}")]
    TargetProbability(f64),

    #[error("vcell {0} has no access points")]
    EmptyCell(u32),

    #[error("vcell list is empty")]
    EmptyVcellList,

    #[error("index contains no cells")]
    EmptyIndex,

    #[error("index: bad magic")]
    BadMagic,

    #[error("index: unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("index: truncated ({0})")]
    Truncated(&'static str),

    #[error("index: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("query contains no access points")]
    EmptyQuery,

    #[error("invalid locate parameter: {0}")]
    LocateParams(String),

    #[error("invalid simulation config: {0}")]
    SynthConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
