//! GeoJSON export of vcells and overlaps.
//!
//! Each vcell becomes a Feature whose geometry is a GeometryCollection of its
//! anchor (Point) and member scan positions (MultiPoint). Each overlap record
//! becomes a LineString Feature between the two anchors. Coordinates are
//! `[lon, lat]`.

use serde_json::{json, Value};

use crate::overlap::OverlapSet;
use crate::scan::GeoPoint;
use crate::vcell::VcellList;

fn coord(p: GeoPoint) -> Value {
    json!([p.lon, p.lat])
}

pub fn to_geojson(vcells: &VcellList, overlaps: Option<&OverlapSet>) -> Value {
    let mut features: Vec<Value> = vcells
        .cells
        .iter()
        .map(|c| {
            json!({
                "type": "Feature",
                "properties": {
                    "kind": "vcell",
                    "vcell_id": c.vcell_id,
                    "first_seq": c.first_seq,
                    "last_seq": c.last_seq,
                    "n_aps": c.aps.len(),
                    "n_scans": c.scans.len(),
                },
                "geometry": {
                    "type": "GeometryCollection",
                    "geometries": [
                        { "type": "Point", "coordinates": coord(c.anchor) },
                        {
                            "type": "MultiPoint",
                            "coordinates": c.scans.iter().map(|m| coord(m.pos())).collect::<Vec<_>>(),
                        },
                    ],
                },
            })
        })
        .collect();

    if let Some(set) = overlaps {
        let anchor = |id: u32| {
            vcells
                .cells
                .iter()
                .find(|c| c.vcell_id == id)
                .map(|c| c.anchor)
        };
        for rec in &set.overlaps {
            let (Some(a), Some(b)) = (anchor(rec.a), anchor(rec.b)) else {
                continue;
            };
            features.push(json!({
                "type": "Feature",
                "properties": {
                    "kind": "overlap",
                    "a": rec.a,
                    "b": rec.b,
                    "fraction": rec.fraction,
                    "n_shared": rec.shared.len(),
                },
                "geometry": { "type": "LineString", "coordinates": [coord(a), coord(b)] },
            }));
        }
    }

    json!({ "type": "FeatureCollection", "features": features })
}

/// Structural check of a FeatureCollection: member types, geometry shapes and
/// coordinate ranges.
pub fn check_structure(doc: &Value) -> Result<(), String> {
    if doc["type"] != "FeatureCollection" {
        return Err("top level is not a FeatureCollection".into());
    }
    let features = doc["features"]
        .as_array()
        .ok_or("features is not an array")?;
    for (i, f) in features.iter().enumerate() {
        if f["type"] != "Feature" {
            return Err(format!("feature {i}: type is not Feature"));
        }
        if !f["properties"].is_object() && !f["properties"].is_null() {
            return Err(format!("feature {i}: properties must be an object or null"));
        }
        check_geometry(&f["geometry"]).map_err(|e| format!("feature {i}: {e}"))?;
    }
    Ok(())
}

fn check_position(v: &Value) -> Result<(), String> {
    let arr = v.as_array().ok_or("position is not an array")?;
    if arr.len() < 2 || !arr.iter().all(Value::is_number) {
        return Err("position needs at least two numbers".into());
    }
    let (lon, lat) = (arr[0].as_f64().unwrap(), arr[1].as_f64().unwrap());
    if lon.abs() > 180.0 || lat.abs() > 90.0 {
        return Err(format!("position [{lon}, {lat}] out of range"));
    }
    Ok(())
}

fn check_positions(v: &Value, min: usize) -> Result<(), String> {
    let arr = v.as_array().ok_or("coordinates is not an array")?;
    if arr.len() < min {
        return Err(format!("expected at least {min} positions"));
    }
    arr.iter().try_for_each(check_position)
}

fn check_geometry(g: &Value) -> Result<(), String> {
    match g["type"].as_str() {
        Some("Point") => check_position(&g["coordinates"]),
        Some("MultiPoint") => check_positions(&g["coordinates"], 0),
        Some("LineString") => check_positions(&g["coordinates"], 2),
        Some("GeometryCollection") => g["geometries"]
            .as_array()
            .ok_or("geometries is not an array")?
            .iter()
            .try_for_each(check_geometry),
        Some(other) => Err(format!("unsupported geometry type {other}")),
        None => Err("geometry has no type".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlap::{find_overlaps, OverlapCondition, OverlapNorm};
    use crate::scan::{ApId, RawScan, ScanTrace};
    use crate::vcell::{form_vcells, CellCondition};

    fn cells() -> VcellList {
        let id = |c: u8| ApId::from_octets([0, 0, 0, 0, 0, c]);
        let sets: [&[u8]; 4] = [b"abcd", b"bcde", b"dwxyz", b"wxyz"];
        let raw = sets
            .iter()
            .enumerate()
            .map(|(i, s)| RawScan {
                timestamp_ms: i as i64,
                pos: GeoPoint::new(8.59, -71.14 + i as f64 * 1e-4).unwrap(),
                aps: s.iter().map(|&c| id(c)).collect(),
            })
            .collect();
        let trace = ScanTrace::from_scans("g", None, raw).unwrap();
        form_vcells(&trace, CellCondition::new(0.5).unwrap()).unwrap()
    }

    #[test]
    fn export_is_structurally_valid() {
        let list = cells();
        let oc = OverlapCondition::new(0.1, 0.5).unwrap();
        let set = OverlapSet {
            oc,
            window: 1,
            norm: OverlapNorm::Min,
            overlaps: find_overlaps(&list, oc, 1),
        };
        assert_eq!(set.overlaps.len(), 1);
        let doc = to_geojson(&list, Some(&set));
        check_structure(&doc).unwrap();
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), list.cells.len() + 1);
        assert_eq!(features[0]["geometry"]["geometries"][0]["type"], "Point");
        assert_eq!(
            features[0]["geometry"]["geometries"][1]["coordinates"]
                .as_array()
                .unwrap()
                .len(),
            2
        );
        assert_eq!(features.last().unwrap()["geometry"]["type"], "LineString");
        // [lon, lat] order
        assert_eq!(
            features[0]["geometry"]["geometries"][0]["coordinates"][1],
            list.cells[0].anchor.lat
        );
    }

    #[test]
    fn checker_rejects_bad_documents() {
        assert!(check_structure(&json!({"type": "Feature"})).is_err());
        let bad = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {}, "geometry": {"type": "LineString", "coordinates": [[0, 0]]}}
        ]});
        assert!(check_structure(&bad).is_err());
        let bad = json!({"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [200, 0]}}
        ]});
        assert!(check_structure(&bad).is_err());
    }
}
