//! Query resolution against a vcell index.
//!
//! A cell's score is the fraction of query APs it (apparently) contains.
//! Cells are ranked by score, then by size (smaller first), then by id.
//! When the previous cell is known and the winner lies more than
//! `adjacency_radius` cells away from it, a nearby cell scoring within
//! `jump_delta` of the winner is preferred and the estimate is marked as
//! corrected.
//!
//! [`exact_locate`] applies the same rules to exact AP sets and serves as the
//! reference for [`locate`].

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::VcellIndex;
use crate::scan::{ApId, GeoPoint, ScanTrace};
use crate::vcell::VcellList;

/// Score differences at or below this are treated as equal when applying
/// `jump_delta`.
const SCORE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    aps: BTreeSet<ApId>,
}

impl Query {
    pub fn new(aps: BTreeSet<ApId>) -> Result<Self> {
        if aps.is_empty() {
            return Err(Error::EmptyQuery);
        }
        Ok(Query { aps })
    }

    /// Union of every scan in `trace`.
    pub fn from_trace(trace: &ScanTrace) -> Result<Self> {
        Query::new(
            trace
                .scans
                .iter()
                .flat_map(|s| s.aps.iter().cloned())
                .collect(),
        )
    }

    pub fn aps(&self) -> &BTreeSet<ApId> {
        &self.aps
    }

    pub fn len(&self) -> usize {
        self.aps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aps.is_empty()
    }
}

/// Reads query scans: JSONL with an `aps` array per line. Every other field,
/// positions and timestamps included, is ignored. Lines keep file order.
pub fn read_query_scans<R: Read>(input: R) -> Result<Vec<BTreeSet<ApId>>> {
    #[derive(Deserialize)]
    struct Line {
        aps: Vec<String>,
    }
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let malformed = |msg: String| Error::Malformed { line: idx + 1, msg };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let aps = rec
            .aps
            .iter()
            .map(|s| ApId::parse(s).map_err(|_| malformed(format!("invalid BSSID {s:?}"))))
            .collect::<Result<BTreeSet<ApId>>>()?;
        out.push(aps);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellScore {
    pub vcell_id: u32,
    pub score: f64,
    /// Query APs matched.
    #[serde(skip)]
    pub hits: usize,
    /// Size of the cell's AP set.
    #[serde(skip)]
    pub n: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocateParams {
    pub prev: Option<u32>,
    pub jump_delta: f64,
    pub adjacency_radius: u32,
}

impl Default for LocateParams {
    fn default() -> Self {
        LocateParams {
            prev: None,
            jump_delta: 0.1,
            adjacency_radius: 2,
        }
    }
}

impl LocateParams {
    pub fn with_prev(self, prev: Option<u32>) -> Self {
        LocateParams { prev, ..self }
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.jump_delta) {
            return Err(Error::LocateParams(format!(
                "jump_delta must lie in [0, 1], got {}",
                self.jump_delta
            )));
        }
        if self.adjacency_radius < 1 {
            return Err(Error::LocateParams(
                "adjacency_radius must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunnerUp {
    pub vcell_id: u32,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocationEstimate {
    pub vcell_id: u32,
    pub anchor: GeoPoint,
    pub score: f64,
    pub corrected: bool,
    pub runner_up: Option<RunnerUp>,
}

/// Outcome of a lookup. `NoFix` means no cell matched any query AP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fix {
    Located(LocationEstimate),
    NoFix,
}

impl Fix {
    pub fn estimate(&self) -> Option<&LocationEstimate> {
        match self {
            Fix::Located(e) => Some(e),
            Fix::NoFix => None,
        }
    }

    pub fn vcell_id(&self) -> Option<u32> {
        self.estimate().map(|e| e.vcell_id)
    }
}

impl Serialize for Fix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            vcell_id: Option<u32>,
            anchor: Option<&'a GeoPoint>,
            score: f64,
            corrected: bool,
            runner_up: Option<&'a RunnerUp>,
        }
        let out = match self {
            Fix::Located(e) => Out {
                vcell_id: Some(e.vcell_id),
                anchor: Some(&e.anchor),
                score: e.score,
                corrected: e.corrected,
                runner_up: e.runner_up.as_ref(),
            },
            Fix::NoFix => Out {
                vcell_id: None,
                anchor: None,
                score: 0.0,
                corrected: false,
                runner_up: None,
            },
        };
        out.serialize(s)
    }
}

fn rank(scores: &mut [CellScore]) {
    // Scores share the query-size denominator, so comparing hits is exact.
    scores.sort_by(|a, b| {
        b.hits
            .cmp(&a.hits)
            .then(a.n.cmp(&b.n))
            .then(a.vcell_id.cmp(&b.vcell_id))
    });
}

fn score_of(hits: usize, q: &Query) -> f64 {
    hits as f64 / q.len() as f64
}

/// Scores every cell of the index, best first.
pub fn score_cells(index: &VcellIndex, q: &Query) -> Result<Vec<CellScore>> {
    if index.entries.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let probes: Vec<Vec<u64>> = q.aps.iter().map(|id| index.params.positions(id)).collect();
    let mut scores: Vec<CellScore> = index
        .entries
        .iter()
        .map(|e| {
            let hits = probes
                .iter()
                .filter(|p| e.filter.contains_positions(p))
                .count();
            CellScore {
                vcell_id: e.vcell_id,
                score: score_of(hits, q),
                hits,
                n: e.n,
            }
        })
        .collect();
    rank(&mut scores);
    Ok(scores)
}

/// Scores computed from exact AP sets.
pub fn exact_scores(vcells: &VcellList, q: &Query) -> Result<Vec<CellScore>> {
    if vcells.cells.is_empty() {
        return Err(Error::EmptyVcellList);
    }
    let mut scores: Vec<CellScore> = vcells
        .cells
        .iter()
        .map(|c| {
            let hits = q.aps.intersection(&c.aps).count();
            CellScore {
                vcell_id: c.vcell_id,
                score: score_of(hits, q),
                hits,
                n: c.aps.len() as u32,
            }
        })
        .collect();
    rank(&mut scores);
    Ok(scores)
}

fn resolve(
    ranked: &[CellScore],
    anchor_of: impl Fn(u32) -> GeoPoint,
    params: &LocateParams,
) -> Result<Fix> {
    params.check()?;
    let Some(winner) = ranked.first() else {
        return Ok(Fix::NoFix);
    };
    if winner.hits == 0 {
        return Ok(Fix::NoFix);
    }
    let radius = params.adjacency_radius as i64;
    let near = |id: u32, prev: u32| (id as i64 - prev as i64).abs() <= radius;

    let mut chosen = 0usize;
    let mut corrected = false;
    if let Some(prev) = params.prev {
        if !near(winner.vcell_id, prev) {
            let alternative = ranked.iter().position(|c| {
                c.hits > 0
                    && near(c.vcell_id, prev)
                    && winner.score - c.score <= params.jump_delta + SCORE_EPS
            });
            if let Some(i) = alternative {
                chosen = i;
                corrected = true;
            }
        }
    }

    let best = ranked[chosen];
    let runner_up = ranked.get(chosen + 1).map(|c| RunnerUp {
        vcell_id: c.vcell_id,
        score: c.score,
    });
    Ok(Fix::Located(LocationEstimate {
        vcell_id: best.vcell_id,
        anchor: anchor_of(best.vcell_id),
        score: best.score,
        corrected,
        runner_up,
    }))
}

/// Resolves a query through the Bloom index.
pub fn locate(index: &VcellIndex, q: &Query, params: &LocateParams) -> Result<Fix> {
    let ranked = score_cells(index, q)?;
    let anchor_of = |id: u32| {
        index
            .entries
            .iter()
            .find(|e| e.vcell_id == id)
            .map(|e| e.anchor)
            .expect("ranked ids come from the index")
    };
    resolve(&ranked, anchor_of, params)
}

/// Resolves a query against exact AP sets.
pub fn exact_locate(vcells: &VcellList, q: &Query, params: &LocateParams) -> Result<Fix> {
    let ranked = exact_scores(vcells, q)?;
    let anchor_of = |id: u32| {
        vcells
            .cells
            .iter()
            .find(|c| c.vcell_id == id)
            .map(|c| c.anchor)
            .expect("ranked ids come from the list")
    };
    resolve(&ranked, anchor_of, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::{BloomParams, DEFAULT_SEEDS};
    use crate::index::{build_index, IndexPolicy};
    use crate::vcell::{CellCondition, Vcell};

    fn id(c: char) -> ApId {
        ApId::from_octets([0, 0, 0, 0, 0, c as u8])
    }

    fn q(s: &str) -> Query {
        Query::new(s.chars().map(id).collect()).unwrap()
    }

    fn list(cells: &[&str]) -> VcellList {
        VcellList {
            trace_id: "l".into(),
            cc: CellCondition::new(0.3).unwrap(),
            cells: cells
                .iter()
                .enumerate()
                .map(|(i, s)| Vcell {
                    vcell_id: i as u32,
                    first_seq: i as u32,
                    last_seq: i as u32,
                    anchor: GeoPoint::new(0.0, i as f64 * 1e-3).unwrap(),
                    aps: s.chars().map(id).collect(),
                    scans: Vec::new(),
                })
                .collect(),
        }
    }

    fn big_index(l: &VcellList) -> VcellIndex {
        let params = BloomParams::new(1 << 20, 8, DEFAULT_SEEDS).unwrap();
        build_index(l, IndexPolicy::Fixed(params)).unwrap()
    }

    fn ranked(pairs: &[(u32, usize, u32)], qlen: usize) -> Vec<CellScore> {
        let mut v: Vec<CellScore> = pairs
            .iter()
            .map(|&(vcell_id, hits, n)| CellScore {
                vcell_id,
                hits,
                n,
                score: hits as f64 / qlen as f64,
            })
            .collect();
        rank(&mut v);
        v
    }

    fn origin(_: u32) -> GeoPoint {
        GeoPoint { lat: 0.0, lon: 0.0 }
    }

    #[test]
    fn empty_query_rejected() {
        assert!(matches!(
            Query::new(BTreeSet::new()),
            Err(Error::EmptyQuery)
        ));
    }

    #[test]
    fn full_cell_query_scores_one() {
        let l = list(&["abcd", "efgh"]);
        let scores = score_cells(&big_index(&l), &q("efgh")).unwrap();
        assert_eq!((scores[0].vcell_id, scores[0].score), (1, 1.0));
    }

    #[test]
    fn unknown_aps_score_zero_and_give_no_fix() {
        let l = list(&["abcd", "efgh"]);
        let idx = big_index(&l);
        assert!(score_cells(&idx, &q("xyz"))
            .unwrap()
            .iter()
            .all(|s| s.score == 0.0));
        let p = LocateParams::default();
        assert_eq!(locate(&idx, &q("xyz"), &p).unwrap(), Fix::NoFix);
        assert_eq!(exact_locate(&l, &q("xyz"), &p).unwrap(), Fix::NoFix);
    }

    #[test]
    fn exact_oracle_scores_and_bloom_bound() {
        let l = list(&["abcd", "cdef"]);
        let exact = exact_scores(&l, &q("cde")).unwrap();
        let by_id = |v: &[CellScore], id: u32| v.iter().find(|s| s.vcell_id == id).unwrap().score;
        assert!((by_id(&exact, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(by_id(&exact, 1), 1.0);

        // A tiny filter forces false positives; scores can only go up.
        let params = BloomParams::new(16, 3, DEFAULT_SEEDS).unwrap();
        let idx = build_index(&l, IndexPolicy::Fixed(params)).unwrap();
        let bloom = score_cells(&idx, &q("cde")).unwrap();
        for id in 0..2 {
            assert!(by_id(&bloom, id) >= by_id(&exact, id));
        }
    }

    #[test]
    fn ties_prefer_smaller_then_lower_id() {
        let r = ranked(&[(0, 2, 10), (1, 2, 4), (2, 2, 4), (3, 1, 1)], 2);
        let order: Vec<u32> = r.iter().map(|c| c.vcell_id).collect();
        assert_eq!(order, vec![1, 2, 0, 3]);
    }

    #[test]
    fn no_prev_is_plain_argmax() {
        let r = ranked(&[(3, 39, 10), (17, 40, 10), (4, 39, 10)], 50);
        let fix = resolve(&r, origin, &LocateParams::default()).unwrap();
        let e = fix.estimate().unwrap();
        assert_eq!((e.vcell_id, e.corrected), (17, false));
        assert_eq!(e.runner_up.unwrap().vcell_id, 3);
    }

    #[test]
    fn jump_is_corrected_to_near_cell() {
        // winner 17 at 0.80, cell 4 at 0.78
        let r = ranked(&[(17, 40, 10), (4, 39, 10), (9, 10, 10)], 50);
        let params = LocateParams {
            prev: Some(3),
            jump_delta: 0.05,
            adjacency_radius: 1,
        };
        let e = *resolve(&r, origin, &params).unwrap().estimate().unwrap();
        assert_eq!((e.vcell_id, e.corrected), (4, true));
        assert!((e.score - 0.78).abs() < 1e-12);
        assert!(e.runner_up.unwrap().score <= e.score);
    }

    #[test]
    fn genuine_jump_is_kept() {
        // winner 17 at 0.80, best near cell at 0.40
        let r = ranked(&[(17, 40, 10), (4, 20, 10)], 50);
        let params = LocateParams {
            prev: Some(3),
            jump_delta: 0.05,
            adjacency_radius: 1,
        };
        let e = *resolve(&r, origin, &params).unwrap().estimate().unwrap();
        assert_eq!((e.vcell_id, e.corrected), (17, false));
    }

    #[test]
    fn correction_never_fires_within_radius() {
        let r = ranked(&[(5, 40, 10), (3, 40, 12)], 50);
        let params = LocateParams {
            prev: Some(3),
            jump_delta: 1.0,
            adjacency_radius: 2,
        };
        let e = *resolve(&r, origin, &params).unwrap().estimate().unwrap();
        assert_eq!((e.vcell_id, e.corrected), (5, false));
    }

    #[test]
    fn invalid_params_rejected() {
        let r = ranked(&[(0, 1, 1)], 1);
        let bad = LocateParams {
            jump_delta: 1.5,
            ..LocateParams::default()
        };
        assert!(resolve(&r, origin, &bad).is_err());
        let bad = LocateParams {
            adjacency_radius: 0,
            ..LocateParams::default()
        };
        assert!(resolve(&r, origin, &bad).is_err());
    }

    #[test]
    fn bloom_and_exact_agree_with_huge_filters() {
        let l = list(&["abcd", "defg", "ghij", "jklm", "mnop"]);
        let idx = big_index(&l);
        for query in ["a", "de", "ghi", "mno", "pj", "abcdefg", "z"] {
            let p = LocateParams::default().with_prev(Some(0));
            assert_eq!(
                locate(&idx, &q(query), &p).unwrap(),
                exact_locate(&l, &q(query), &p).unwrap()
            );
        }
    }

    #[test]
    fn fix_serialization() {
        let json = serde_json::to_string(&Fix::NoFix).unwrap();
        assert_eq!(
            json,
            r#"{"vcell_id":null,"anchor":null,"score":0.0,"corrected":false,"runner_up":null}"#
        );
        let l = list(&["ab"]);
        let fix = exact_locate(&l, &q("a"), &LocateParams::default()).unwrap();
        let json = serde_json::to_string(&fix).unwrap();
        assert_eq!(
            json,
            r#"{"vcell_id":0,"anchor":{"lat":0.0,"lon":0.0},"score":1.0,"corrected":false,"runner_up":null}"#
        );
    }

    #[test]
    fn query_log_ignores_positions() {
        let log = "{\"aps\":[\"AA:00:00:00:00:01\"]}\n\n{\"t\":5,\"lat\":1.0,\"aps\":[]}\n";
        let scans = read_query_scans(log.as_bytes()).unwrap();
        assert_eq!(scans.len(), 2);
        assert_eq!(
            scans[0].iter().next().unwrap().as_str(),
            "aa:00:00:00:00:01"
        );
        assert!(scans[1].is_empty());
        assert!(matches!(
            read_query_scans("{\"aps\":[\"bogus\"]}".as_bytes()),
            Err(Error::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn empty_index_is_an_error() {
        let idx = VcellIndex {
            params: BloomParams::new(8, 1, DEFAULT_SEEDS).unwrap(),
            entries: Vec::new(),
        };
        assert!(matches!(score_cells(&idx, &q("a")), Err(Error::EmptyIndex)));
    }
}
