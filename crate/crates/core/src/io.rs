//! JSON-lines ingest, GeoJSON export and content digests.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::detect::EventCluster;
use crate::error::{Error, Result};
use crate::model::Record;

#[derive(Deserialize)]
struct RawRecord {
    id: Value,
    user: Value,
    ts: Value,
    lat: f64,
    lon: f64,
    text: String,
}

fn id_string(v: &Value, field: &str) -> std::result::Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(format!("`{field}` must be a string or number")),
    }
}

/// Epoch seconds, either as a JSON number or as a string holding an integer
/// or an ISO-8601 datetime. Datetimes without an offset are taken as UTC.
pub fn parse_timestamp(v: &Value) -> std::result::Result<i64, String> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.is_finite()).map(|f| f.floor() as i64))
            .ok_or_else(|| format!("bad timestamp {n}")),
        Value::String(s) => {
            let s = s.trim();
            if let Ok(n) = s.parse::<i64>() {
                return Ok(n);
            }
            if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
                return Ok(dt.timestamp());
            }
            for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
                if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                    return Ok(dt.and_utc().timestamp());
                }
            }
            Err(format!("unrecognized timestamp `{s}`"))
        }
        _ => Err("`ts` must be a number or string".into()),
    }
}

/// One record per non-blank line. Errors carry the 1-based line number.
pub fn parse_jsonl(src: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !(raw.lat.is_finite() && raw.lon.is_finite()) {
            return Err(err("non-finite coordinate".into()));
        }
        out.push(Record::new(
            id_string(&raw.id, "id").map_err(err)?,
            id_string(&raw.user, "user").map_err(err)?,
            parse_timestamp(&raw.ts).map_err(err)?,
            raw.lat,
            raw.lon,
            raw.text,
        ));
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<(Vec<Record>, String)> {
    let bytes = std::fs::read(path)?;
    let digest = sha256_hex(&bytes);
    let src = String::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    Ok((parse_jsonl(&src)?, digest))
}

/// Inverse of [`parse_jsonl`] with epoch-second timestamps.
pub fn to_jsonl(records: &[Record]) -> String {
    let mut s = String::new();
    for r in records {
        let v = json!({"id": r.id, "user": r.user, "ts": r.timestamp, "lat": r.lat, "lon": r.lon, "text": r.text});
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// FeatureCollection with one Point per clustered record, tagged with its
/// cluster, plus one centroid Point per cluster.
pub fn clusters_geojson(clusters: &[EventCluster], records: &[Record]) -> Value {
    let by_id: std::collections::HashMap<&str, &Record> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut features = Vec::new();
    for c in clusters {
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [c.centroid.1, c.centroid.0]},
            "properties": {
                "kind": "centroid",
                "cluster_id": c.id,
                "record_ids": c.record_ids,
                "n_records": c.record_ids.len(),
                "n_users": c.n_users,
                "median_timestamp": c.median_timestamp,
                "t80_interval": c.t80_interval,
                "top_terms": c.top_terms,
            }
        }));
        for id in &c.record_ids {
            if let Some(r) = by_id.get(id.as_str()) {
                features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [r.lon, r.lat]},
                    "properties": {
                        "kind": "record",
                        "cluster_id": c.id,
                        "record_id": r.id,
                        "user": r.user,
                        "timestamp": r.timestamp,
                    }
                }));
            }
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp(&json!(1_300_000_000)).unwrap(), 1_300_000_000);
        assert_eq!(parse_timestamp(&json!("1300000000")).unwrap(), 1_300_000_000);
        assert_eq!(parse_timestamp(&json!("2011-11-15T00:00:00Z")).unwrap(), 1_321_315_200);
        assert_eq!(parse_timestamp(&json!("2011-11-15T01:00:00+01:00")).unwrap(), 1_321_315_200);
        assert_eq!(parse_timestamp(&json!("2011-11-15 00:00:00")).unwrap(), 1_321_315_200);
        assert!(parse_timestamp(&json!("yesterday")).is_err());
        assert!(parse_timestamp(&json!(null)).is_err());
    }

    #[test]
    fn reports_bad_line() {
        let src = "{\"id\":\"a\",\"user\":\"u\",\"ts\":1,\"lat\":1,\"lon\":2,\"text\":\"x\"}\n\n{\"id\":\"b\"}\n";
        match parse_jsonl(src) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let recs = vec![Record::new("a", "u", 5, 40.7, -74.0, "hi \"there\"")];
        assert_eq!(parse_jsonl(&to_jsonl(&recs)).unwrap(), recs);
    }

    #[test]
    fn digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
