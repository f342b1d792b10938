use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{Catalog, Request, Trace, WorkloadError};
use crate::topology::{PopId, Topology};

const TRACE_HEADER: [&str; 4] = ["timestamp_s", "pop_id", "content_id", "bytes"];
const CATALOG_HEADER: [&str; 3] = ["content_id", "size_bytes", "origin_pop"];

struct RawRow {
    row: u64,
    timestamp: f64,
    pop: PopId,
    content: String,
    bytes: u64,
}

fn records<'a>(text: &'a str, header: &[&str]) -> Result<impl Iterator<Item = (u64, Result<StringRecord, csv::Error>)> + 'a, WorkloadError> {
    let mut rdr = ReaderBuilder::new().has_headers(true).trim(Trim::All).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| WorkloadError::Csv(e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(WorkloadError::MalformedRow { row: 1, message: format!("expected header `{}`", header.join(",")) });
    }
    Ok(rdr.into_records().map(|r| {
        let row = match &r {
            Ok(rec) => rec.position().map_or(0, |p| p.line()),
            Err(e) => e.position().map_or(0, |p| p.line()),
        };
        (row, r)
    }))
}

fn field<'r>(rec: &'r StringRecord, i: usize, row: u64) -> Result<&'r str, WorkloadError> {
    rec.get(i).ok_or_else(|| WorkloadError::MalformedRow { row, message: format!("missing column {}", i + 1) })
}

fn pop_field(rec: &StringRecord, i: usize, row: u64, topo: &Topology) -> Result<PopId, WorkloadError> {
    let raw = field(rec, i, row)?;
    let pop: u32 = raw
        .parse()
        .map_err(|_| WorkloadError::MalformedRow { row, message: format!("invalid pop id `{raw}`") })?;
    if !topo.contains(PopId(pop)) {
        return Err(WorkloadError::UnknownPop { row, pop });
    }
    Ok(PopId(pop))
}

fn positive_bytes(raw: &str, row: u64) -> Result<u64, WorkloadError> {
    let v: i128 = raw
        .parse()
        .map_err(|_| WorkloadError::MalformedRow { row, message: format!("invalid byte count `{raw}`") })?;
    if v <= 0 {
        return Err(WorkloadError::NonPositiveBytes { row });
    }
    u64::try_from(v).map_err(|_| WorkloadError::MalformedRow { row, message: "byte count overflows".into() })
}

fn raw_rows(text: &str, topo: &Topology) -> Result<Vec<RawRow>, WorkloadError> {
    let mut rows = Vec::new();
    for (row, rec) in records(text, &TRACE_HEADER)? {
        let rec = rec.map_err(|e| WorkloadError::MalformedRow { row, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(WorkloadError::MalformedRow { row, message: format!("expected 4 columns, found {}", rec.len()) });
        }
        let ts_raw = field(&rec, 0, row)?;
        let timestamp: f64 = ts_raw
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| WorkloadError::MalformedRow { row, message: format!("invalid timestamp `{ts_raw}`") })?;
        let pop = pop_field(&rec, 1, row, topo)?;
        let content = field(&rec, 2, row)?.to_string();
        if content.is_empty() {
            return Err(WorkloadError::MalformedRow { row, message: "empty content id".into() });
        }
        let bytes = positive_bytes(field(&rec, 3, row)?, row)?;
        rows.push(RawRow { row, timestamp, pop, content, bytes });
    }
    Ok(rows)
}

/// Parses a trace CSV, inferring each object's size as the largest byte count
/// requested for it. Objects originate at the topology's origin PoP.
pub fn parse_trace(text: &str, topo: &Topology) -> Result<(Catalog, Trace), WorkloadError> {
    let rows = raw_rows(text, topo)?;
    let mut sizes: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &rows {
        let e = sizes.entry(r.content.as_str()).or_insert(0);
        *e = (*e).max(r.bytes);
    }
    let catalog = Catalog::new(sizes.into_iter().map(|(n, s)| (n.to_string(), s, topo.origin())).collect());
    let trace = build_trace(rows, &catalog)?;
    Ok((catalog, trace))
}

/// Parses a trace CSV against an explicit catalog.
pub fn parse_trace_with_catalog(text: &str, topo: &Topology, catalog: &Catalog) -> Result<Trace, WorkloadError> {
    build_trace(raw_rows(text, topo)?, catalog)
}

fn build_trace(rows: Vec<RawRow>, catalog: &Catalog) -> Result<Trace, WorkloadError> {
    let mut requests = Vec::with_capacity(rows.len());
    for r in rows {
        let id = catalog
            .lookup(&r.content)
            .ok_or_else(|| WorkloadError::UnknownContent { row: r.row, content: r.content.clone() })?;
        let size = catalog.get(id).size;
        if r.bytes > size {
            return Err(WorkloadError::ExceedsObject { row: r.row, content: r.content, bytes: r.bytes, size });
        }
        requests.push(Request { timestamp: r.timestamp, pop: r.pop, content: id, bytes: r.bytes });
    }
    Ok(Trace::new(requests))
}

/// Parses a catalog CSV (`content_id,size_bytes,origin_pop`).
pub fn parse_catalog(text: &str, topo: &Topology) -> Result<Catalog, WorkloadError> {
    let mut entries = Vec::new();
    let mut seen = HashMap::new();
    for (row, rec) in records(text, &CATALOG_HEADER)? {
        let rec = rec.map_err(|e| WorkloadError::MalformedRow { row, message: e.to_string() })?;
        let name = field(&rec, 0, row)?.to_string();
        let size = positive_bytes(field(&rec, 1, row)?, row)?;
        let origin = pop_field(&rec, 2, row, topo)?;
        if seen.insert(name.clone(), row).is_some() {
            return Err(WorkloadError::DuplicateContent { row, content: name });
        }
        entries.push((name, size, origin));
    }
    Ok(Catalog::new(entries))
}

pub fn write_trace(catalog: &Catalog, trace: &Trace) -> String {
    let mut out = String::with_capacity(32 * trace.len() + 40);
    out.push_str(&TRACE_HEADER.join(","));
    out.push('\n');
    for r in trace.requests() {
        let _ = writeln!(out, "{},{},{},{}", r.timestamp, r.pop, catalog.get(r.content).name, r.bytes);
    }
    out
}

pub fn write_catalog(catalog: &Catalog) -> String {
    let mut out = CATALOG_HEADER.join(",");
    out.push('\n');
    for o in catalog.objects() {
        let _ = writeln!(out, "{},{},{}", o.name, o.size, o.origin);
    }
    out
}
