use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use vcell_core::bloom::DEFAULT_SEEDS;
use vcell_core::geojson::to_geojson;
use vcell_core::locate::read_query_scans;
use vcell_core::overlap::find_overlaps_with;
use vcell_core::scan::write_jsonl;
use vcell_core::synth::straight_path;
use vcell_core::{
    build_index, form_vcells, gen_deployment, gen_trace, locate as run_locate, parse_scan_log,
    validate_trace, vcell_stats, BloomParams, CellCondition, Error, GeoPoint, IndexPolicy,
    LocateParams, LogFormat, OverlapCondition, OverlapNorm, OverlapSet, Query, ScanTrace,
    SynthConfig, VcellIndex, VcellList,
};

use crate::{
    BuildArgs, ExportArgs, IndexArgs, LocateArgs, OverlapArgs, SimulateArgs, StatsArgs,
    ValidateArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) => f.write_str(msg),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            Err(usage(format!("{}: no such file", path.display())))
        }
        Err(e) => Err(data(path, e)),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            Err(usage(format!("{}: no such file", path.display())))
        }
        Err(e) => Err(data(path, e)),
    }
}

fn write_out(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    let shown = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let res = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match body(&mut w).and_then(|_| w.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => other,
            }
        }
    };
    res.map_err(|e| data(&shown, e))
}

fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable output");
    write_out(path, |w| writeln!(w, "{text}"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| data(path, e))
}

fn read_cells(path: &Path) -> Result<VcellList> {
    let list: VcellList = read_json(path)?;
    list.check().map_err(|e| data(path, e))?;
    Ok(list)
}

fn log_format(flag: Option<&str>, input: &Path) -> Result<LogFormat> {
    match flag {
        Some(f) => f
            .parse()
            .map_err(|e: String| usage(format!("--format: {e}"))),
        None => Ok(match input.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LogFormat::Csv,
            _ => LogFormat::Jsonl,
        }),
    }
}

fn read_trace(input: &Path, format: LogFormat) -> Result<ScanTrace> {
    let id = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string();
    parse_scan_log(open(input)?, format, &id).map_err(|e| data(input, e))
}

fn cell_condition(cc: f64) -> Result<CellCondition> {
    CellCondition::new(cc).map_err(|e| usage(format!("--cc: {e}")))
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = SynthConfig::new(a.seed, Vec::new());
    cfg.ap_density = a.density;
    cfg.detect_radius_m = a.radius;
    cfg.detect_prob = a.detect_prob;
    cfg.speed_kph = a.speed_kph;
    cfg.scan_interval_s = a.interval_s;
    cfg.scan_duration_s = a.scan_duration_s;
    cfg.start_offset_m = a.start_offset_m;
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    cfg.path = match &a.path_file {
        Some(p) => read_json::<Vec<GeoPoint>>(p)?,
        None => {
            if !(a.length_km > 0.0 && a.length_km.is_finite()) {
                return Err(usage(format!(
                    "--length-km must be positive, got {}",
                    a.length_km
                )));
            }
            let origin = GeoPoint::new(a.origin_lat, a.origin_lon)
                .map_err(|e| usage(format!("--origin-lat/--origin-lon: {e}")))?;
            straight_path(origin, a.heading_deg.to_radians(), a.length_km * 1000.0)
        }
    };
    let shown = a
        .path_file
        .clone()
        .unwrap_or_else(|| PathBuf::from("<path>"));
    let dep = gen_deployment(&cfg).map_err(|e| data(&shown, e))?;
    let trace = gen_trace(&dep, &cfg).map_err(|e| data(&shown, e))?;

    if let Some(p) = &a.deployment {
        write_json(Some(p), &dep)?;
    }
    write_out(a.output.as_deref(), |w| {
        write_jsonl(&trace, w).map_err(|e| match e {
            Error::Io(e) => e,
            other => io::Error::other(other.to_string()),
        })
    })
}

fn parse_sweep(raw: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("--cc-sweep expects start:end:step, got {raw:?}"));
    let parts: Vec<f64> = raw
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    // round to kill accumulated binary noise in file names and values
    let values: Vec<f64> = (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect();
    for &v in &values {
        cell_condition(v)?;
    }
    Ok(values)
}

pub fn build(a: BuildArgs) -> Result<()> {
    let format = log_format(a.format.as_deref(), &a.input)?;
    let Some(sweep) = &a.cc_sweep else {
        let cc = cell_condition(a.cc)?;
        let trace = read_trace(&a.input, format)?;
        let cells = form_vcells(&trace, cc).map_err(|e| data(&a.input, e))?;
        return write_json(a.output.as_deref(), &cells);
    };

    let values = parse_sweep(sweep)?;
    let dir = a
        .output
        .clone()
        .ok_or_else(|| usage("--cc-sweep needs -o <directory>"))?;
    let trace = read_trace(&a.input, format)?;
    fs::create_dir_all(&dir).map_err(|e| data(&dir, e))?;

    let results: Vec<Result<()>> = std::thread::scope(|s| {
        let handles: Vec<_> = values
            .iter()
            .map(|&v| {
                let (trace, dir, input) = (&trace, &dir, &a.input);
                s.spawn(move || {
                    let cc = CellCondition::new(v).expect("validated");
                    let cells = form_vcells(trace, cc).map_err(|e| data(input, e))?;
                    write_json(Some(&dir.join(format!("cells-cc{v:.2}.json"))), &cells)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("build worker panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn overlap(a: OverlapArgs) -> Result<()> {
    let norm: OverlapNorm = a
        .overlap_norm
        .parse()
        .map_err(|e: String| usage(format!("--overlap-norm: {e}")))?;
    let oc = match norm {
        OverlapNorm::Absolute => OverlapCondition::counts(a.lo, a.hi),
        _ => OverlapCondition::new(a.lo, a.hi),
    }
    .map_err(|e| usage(format!("--lo/--hi: {e}")))?;
    if a.window == 0 {
        return Err(usage("--window must be at least 1"));
    }
    let cells = read_cells(&a.input)?;
    let set = OverlapSet {
        oc,
        window: a.window,
        norm,
        overlaps: find_overlaps_with(&cells, oc, a.window, norm),
    };
    write_json(a.output.as_deref(), &set)
}

pub fn index(a: IndexArgs) -> Result<()> {
    let seeds = [
        a.seed0.unwrap_or(DEFAULT_SEEDS[0]),
        a.seed1.unwrap_or(DEFAULT_SEEDS[1]),
    ];
    let policy = match (a.bits, a.hashes) {
        (Some(m), Some(k)) => IndexPolicy::Fixed(
            BloomParams::new(m, k, seeds).map_err(|e| usage(format!("--bits/--hashes: {e}")))?,
        ),
        _ => {
            if !(a.target_p > 0.0 && a.target_p < 1.0) {
                return Err(usage(format!(
                    "--target-p must lie in (0, 1), got {}",
                    a.target_p
                )));
            }
            IndexPolicy::TargetP {
                p: a.target_p,
                seeds,
            }
        }
    };
    let cells = read_cells(&a.input)?;
    let idx = build_index(&cells, policy).map_err(|e| data(&a.input, e))?;
    let bytes = idx.to_bytes();
    write_out(Some(&a.output), |w| w.write_all(&bytes))
}

pub fn locate(a: LocateArgs) -> Result<()> {
    let params = LocateParams {
        prev: a.prev,
        jump_delta: a.jump_delta,
        adjacency_radius: a.radius,
    };
    if !(params.jump_delta >= 0.0 && params.jump_delta <= 1.0) {
        return Err(usage(format!(
            "--jump-delta must lie in [0, 1], got {}",
            a.jump_delta
        )));
    }
    let idx = VcellIndex::from_bytes(&read_bytes(&a.input)?).map_err(|e| data(&a.input, e))?;
    let scans = read_query_scans(open(&a.query)?).map_err(|e| data(&a.query, e))?;

    if a.each {
        let mut prev = params.prev;
        let mut fixes = Vec::with_capacity(scans.len());
        for (line, aps) in scans.into_iter().enumerate() {
            let q =
                Query::new(aps).map_err(|e| data(&a.query, format!("query {}: {e}", line + 1)))?;
            let fix =
                run_locate(&idx, &q, &params.with_prev(prev)).map_err(|e| data(&a.input, e))?;
            prev = fix.vcell_id().or(prev);
            fixes.push(fix);
        }
        return write_json(a.output.as_deref(), &fixes);
    }

    let q = Query::new(scans.into_iter().flatten().collect()).map_err(|e| data(&a.query, e))?;
    let fix = run_locate(&idx, &q, &params).map_err(|e| data(&a.input, e))?;
    write_json(a.output.as_deref(), &fix)
}

#[derive(Serialize)]
struct StatsReport {
    cells: usize,
    mean_aps_per_cell: f64,
    median_aps_per_cell: f64,
    aps_per_fingerprint: f64,
    ap_counts: Vec<usize>,
    scan_counts: Vec<usize>,
    diameters_m: Vec<f64>,
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let cells = read_cells(&a.input)?;
    let st = vcell_stats(&cells);
    let report = StatsReport {
        cells: st.cell_count,
        mean_aps_per_cell: st.mean_aps_per_cell(),
        median_aps_per_cell: st.median_aps_per_cell(),
        aps_per_fingerprint: st.aps_per_fingerprint,
        ap_counts: st.ap_counts,
        scan_counts: st.scan_counts,
        diameters_m: st.diameters,
    };
    write_json(a.output.as_deref(), &report)
}

pub fn export(a: ExportArgs) -> Result<()> {
    if a.format != "geojson" {
        return Err(usage(format!(
            "--format: unsupported export format {:?} (expected geojson)",
            a.format
        )));
    }
    let cells = read_cells(&a.input)?;
    let overlaps = match &a.overlaps {
        Some(p) => {
            let set: OverlapSet = read_json(p)?;
            let n = cells.cells.len() as u32;
            if let Some(r) = set.overlaps.iter().find(|r| r.a >= n || r.b >= n) {
                return Err(data(
                    p,
                    format!(
                        "overlap ({}, {}) names a vcell not in {}",
                        r.a,
                        r.b,
                        a.input.display()
                    ),
                ));
            }
            Some(set)
        }
        None => None,
    };
    write_json(a.output.as_deref(), &to_geojson(&cells, overlaps.as_ref()))
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let format = log_format(a.format.as_deref(), &a.input)?;
    let trace = read_trace(&a.input, format)?;
    let report = validate_trace(&trace);
    write_json(None, &report)?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(data(&a.input, "trace failed validation"))
    }
}
