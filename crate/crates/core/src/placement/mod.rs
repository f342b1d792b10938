//! Content placement: online LRU caches, LP-driven daily placement (from
//! prior-day or oracle demand) and the hybrid budget split.

mod lru;
mod plan;

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{JointLpOptions, LpError, LpStatus, SolverOptions};
use crate::routing::RoutingError;
use crate::topology::PopId;
use crate::workload::{ChunkId, ChunkedCatalog};

pub use lru::{lru_access, AccessOutcome, CacheState};
pub(crate) use plan::induced_matrix;
pub use plan::{plan_placement_future, plan_placement_optimized, PlannedPlacement};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("expected {expected} per-pop budgets, got {got}")]
    BudgetCount { expected: usize, got: usize },
    #[error("joint placement program failed: {0}")]
    Lp(#[from] LpError),
    #[error("joint placement program returned status {0:?}")]
    UnexpectedStatus(LpStatus),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// Chunks materialized at each PoP for one epoch. The origin of a chunk
/// always holds it implicitly; that copy is never listed here.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub epoch: usize,
    /// Σ budgets / catalog bytes.
    pub storage_ratio: f64,
    stored: Vec<BTreeSet<ChunkId>>,
}

impl Placement {
    pub fn empty(epoch: usize, pop_count: usize, storage_ratio: f64) -> Self {
        Placement { epoch, storage_ratio, stored: vec![BTreeSet::new(); pop_count] }
    }

    pub fn pop_count(&self) -> usize {
        self.stored.len()
    }

    pub fn stored(&self, pop: PopId) -> &BTreeSet<ChunkId> {
        &self.stored[pop.index()]
    }

    pub fn holds(&self, pop: PopId, chunk: ChunkId) -> bool {
        self.stored[pop.index()].contains(&chunk)
    }

    pub fn insert(&mut self, pop: PopId, chunk: ChunkId) {
        self.stored[pop.index()].insert(chunk);
    }

    pub fn bytes_at(&self, pop: PopId, catalog: &ChunkedCatalog) -> u64 {
        self.stored[pop.index()].iter().map(|c| catalog.chunk_bytes(*c)).sum()
    }
}

/// Knobs shared by the LP-based planners.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanOptions {
    pub joint: JointLpOptions,
    pub solver: SolverOptions,
}

/// Splits each budget into (planned, cache) parts with
/// `cache = round(reserve · budget)`.
pub fn split_hybrid(budgets: &[u64], reserve: f64) -> (Vec<u64>, Vec<u64>) {
    assert!((0.0..=1.0).contains(&reserve), "reserve must lie in [0, 1]");
    budgets
        .iter()
        .map(|&b| {
            let cache = ((reserve * b as f64).round() as u64).min(b);
            (b - cache, cache)
        })
        .unzip()
}

/// `epoch,pop_id,chunk_id` rows for a series of placements.
pub fn write_placements(placements: &[Placement], catalog: &ChunkedCatalog) -> String {
    let mut out = String::from("epoch,pop_id,chunk_id\n");
    for p in placements {
        for (pop, set) in p.stored.iter().enumerate() {
            for c in set {
                let _ = writeln!(out, "{},{},{}", p.epoch, pop, catalog.chunk_label(*c));
            }
        }
    }
    out
}
