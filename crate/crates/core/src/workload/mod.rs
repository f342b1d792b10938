//! Content catalog, request traces, chunking and demand aggregation.

mod csvio;
mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::topology::PopId;

pub use csvio::{parse_catalog, parse_trace, parse_trace_with_catalog, write_catalog, write_trace};
pub use synth::{generate_synthetic_trace, SynthParams, SyntheticWorkload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentId(pub u32);

impl ContentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentObject {
    pub id: ContentId,
    pub name: String,
    pub size: u64,
    pub origin: PopId,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("row {row}: {message}")]
    MalformedRow { row: u64, message: String },
    #[error("row {row}: bytes must be positive")]
    NonPositiveBytes { row: u64 },
    #[error("row {row}: unknown pop {pop}")]
    UnknownPop { row: u64, pop: u32 },
    #[error("row {row}: content `{content}` is not in the catalog")]
    UnknownContent { row: u64, content: String },
    #[error("row {row}: request of {bytes} bytes exceeds size {size} of `{content}`")]
    ExceedsObject { row: u64, content: String, bytes: u64, size: u64 },
    #[error("row {row}: duplicate catalog entry `{content}`")]
    DuplicateContent { row: u64, content: String },
    #[error("invalid synthetic workload parameters: {0}")]
    InvalidParams(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Content objects indexed by [`ContentId`], sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    objects: Vec<ContentObject>,
    by_name: HashMap<String, ContentId>,
}

impl Catalog {
    /// Builds a catalog from `(name, size, origin)` entries; ids follow name order.
    pub fn new(mut entries: Vec<(String, u64, PopId)>) -> Self {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut objects = Vec::with_capacity(entries.len());
        let mut by_name = HashMap::with_capacity(entries.len());
        for (i, (name, size, origin)) in entries.into_iter().enumerate() {
            assert!(size > 0, "object `{name}` has zero size");
            let id = ContentId(i as u32);
            by_name.insert(name.clone(), id);
            objects.push(ContentObject { id, name, size, origin });
        }
        Catalog { objects, by_name }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn objects(&self) -> &[ContentObject] {
        &self.objects
    }

    pub fn get(&self, id: ContentId) -> &ContentObject {
        &self.objects[id.index()]
    }

    pub fn lookup(&self, name: &str) -> Option<ContentId> {
        self.by_name.get(name).copied()
    }

    pub fn total_bytes(&self) -> u64 {
        self.objects.iter().map(|o| o.size).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkId {
    pub content: ContentId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub id: ChunkId,
    pub size: u64,
}

/// A catalog split into fixed-size chunks. `chunk_size = None` keeps every
/// object whole (one chunk per object).
#[derive(Debug, Clone)]
pub struct ChunkedCatalog {
    catalog: Catalog,
    chunk_size: Option<u64>,
}

impl ChunkedCatalog {
    pub fn new(catalog: Catalog, chunk_size: Option<u64>) -> Self {
        assert!(chunk_size != Some(0), "chunk size must be positive");
        ChunkedCatalog { catalog, chunk_size }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn chunk_size(&self) -> Option<u64> {
        self.chunk_size
    }

    fn unit(&self, object_size: u64) -> u64 {
        self.chunk_size.unwrap_or(object_size).max(1)
    }

    pub fn chunk_count(&self, content: ContentId) -> u32 {
        let size = self.catalog.get(content).size;
        size.div_ceil(self.unit(size)) as u32
    }

    pub fn chunk_bytes(&self, id: ChunkId) -> u64 {
        let size = self.catalog.get(id.content).size;
        let unit = self.unit(size);
        let start = id.index as u64 * unit;
        debug_assert!(start < size, "chunk index out of range");
        unit.min(size - start)
    }

    pub fn origin(&self, id: ChunkId) -> PopId {
        self.catalog.get(id.content).origin
    }

    pub fn chunks_of(&self, content: ContentId) -> impl Iterator<Item = Chunk> + '_ {
        (0..self.chunk_count(content)).map(move |index| {
            let id = ChunkId { content, index };
            Chunk { id, size: self.chunk_bytes(id) }
        })
    }

    pub fn all_chunks(&self) -> impl Iterator<Item = Chunk> + '_ {
        self.catalog.objects().iter().flat_map(|o| self.chunks_of(o.id))
    }

    pub fn total_bytes(&self) -> u64 {
        self.catalog.total_bytes()
    }

    /// Maps a request for `bytes` of `content` onto its leading chunks; the
    /// last one may be partial. Byte totals are preserved exactly.
    pub fn expand_request(&self, content: ContentId, bytes: u64) -> Vec<(ChunkId, u64)> {
        let size = self.catalog.get(content).size;
        let unit = self.unit(size);
        let mut left = bytes;
        let mut out = Vec::with_capacity(bytes.div_ceil(unit) as usize);
        let mut index = 0u32;
        while left > 0 {
            let take = left.min(unit);
            out.push((ChunkId { content, index }, take));
            left -= take;
            index += 1;
        }
        out
    }

    pub fn chunk_label(&self, id: ChunkId) -> String {
        format!("{}#{}", self.catalog.get(id.content).name, id.index)
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.content.0, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    /// Seconds since trace start.
    pub timestamp: f64,
    pub pop: PopId,
    pub content: ContentId,
    pub bytes: u64,
}

/// Requests sorted by timestamp (stable with respect to input order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    requests: Vec<Request>,
}

impl Trace {
    pub fn new(mut requests: Vec<Request>) -> Self {
        requests.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Trace { requests }
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.requests.iter().map(|r| r.bytes).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.requests.last().map_or(0.0, |r| r.timestamp)
    }

    /// Requests with `start <= timestamp < end`.
    pub fn window(&self, start: f64, end: f64) -> &[Request] {
        let lo = self.requests.partition_point(|r| r.timestamp < start);
        let hi = self.requests.partition_point(|r| r.timestamp < end);
        &self.requests[lo..hi.max(lo)]
    }
}

/// Bytes requested per (chunk, PoP) over a half-open time window.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    pub start: f64,
    pub end: f64,
    demand: BTreeMap<(ChunkId, PopId), u64>,
}

impl DemandMatrix {
    pub fn empty(start: f64, end: f64) -> Self {
        assert!(end > start, "demand window must have positive length");
        DemandMatrix { start, end, demand: BTreeMap::new() }
    }

    pub fn from_entries(start: f64, end: f64, entries: impl IntoIterator<Item = ((ChunkId, PopId), u64)>) -> Self {
        let mut dm = DemandMatrix::empty(start, end);
        for (k, v) in entries {
            dm.add(k.0, k.1, v);
        }
        dm
    }

    pub fn add(&mut self, chunk: ChunkId, pop: PopId, bytes: u64) {
        if bytes > 0 {
            *self.demand.entry((chunk, pop)).or_insert(0) += bytes;
        }
    }

    pub fn get(&self, chunk: ChunkId, pop: PopId) -> u64 {
        self.demand.get(&(chunk, pop)).copied().unwrap_or(0)
    }

    pub fn window_seconds(&self) -> f64 {
        self.end - self.start
    }

    /// Nonzero entries in (chunk, pop) order.
    pub fn entries(&self) -> impl Iterator<Item = (ChunkId, PopId, u64)> + '_ {
        self.demand.iter().map(|(&(c, p), &b)| (c, p, b))
    }

    pub fn len(&self) -> usize {
        self.demand.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demand.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.demand.values().sum()
    }

    /// Total demand per chunk across PoPs.
    pub fn chunk_totals(&self) -> BTreeMap<ChunkId, u64> {
        let mut out = BTreeMap::new();
        for (c, _, b) in self.entries() {
            *out.entry(c).or_insert(0) += b;
        }
        out
    }
}

/// Sums requested bytes per (chunk, PoP) over `[start, end)`.
pub fn aggregate_demand(trace: &Trace, start: f64, end: f64, catalog: &ChunkedCatalog) -> DemandMatrix {
    let mut dm = DemandMatrix::empty(start, end);
    for r in trace.window(start, end) {
        for (chunk, bytes) in catalog.expand_request(r.content, r.bytes) {
            dm.add(chunk, r.pop, bytes);
        }
    }
    dm
}
