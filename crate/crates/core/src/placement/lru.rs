use std::collections::{BTreeMap, HashMap};

use crate::topology::PopId;
use crate::workload::ChunkId;

/// Result of one cache lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    /// `admitted` is false when the chunk is larger than the whole budget;
    /// such chunks bypass the cache and evict nothing.
    Miss { evicted: Vec<ChunkId>, admitted: bool },
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }
}

/// Byte-budgeted LRU cache of whole chunks at one PoP.
#[derive(Debug, Clone)]
pub struct CacheState {
    pop: PopId,
    budget: u64,
    used: u64,
    clock: u64,
    /// chunk -> (size, last-use stamp)
    entries: HashMap<ChunkId, (u64, u64)>,
    /// last-use stamp -> chunk, oldest first
    order: BTreeMap<u64, ChunkId>,
}

impl CacheState {
    pub fn new(pop: PopId, budget: u64) -> Self {
        CacheState { pop, budget, used: 0, clock: 0, entries: HashMap::new(), order: BTreeMap::new() }
    }

    pub fn pop(&self) -> PopId {
        self.pop
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, chunk: ChunkId) -> bool {
        self.entries.contains_key(&chunk)
    }

    /// Resident chunks with their sizes, least recently used first.
    pub fn resident(&self) -> impl Iterator<Item = (ChunkId, u64)> + '_ {
        self.order.values().map(|c| (*c, self.entries[c].0))
    }

    pub fn access(&mut self, chunk: ChunkId, size: u64) -> AccessOutcome {
        self.clock += 1;
        let now = self.clock;
        if let Some(entry) = self.entries.get_mut(&chunk) {
            self.order.remove(&entry.1);
            entry.1 = now;
            self.order.insert(now, chunk);
            return AccessOutcome::Hit;
        }
        if size > self.budget {
            return AccessOutcome::Miss { evicted: Vec::new(), admitted: false };
        }
        let mut evicted = Vec::new();
        while self.used + size > self.budget {
            let (_, victim) = self.order.pop_first().expect("resident bytes exceed an empty cache");
            let (vsize, _) = self.entries.remove(&victim).expect("order and entries agree");
            self.used -= vsize;
            evicted.push(victim);
        }
        self.entries.insert(chunk, (size, now));
        self.order.insert(now, chunk);
        self.used += size;
        AccessOutcome::Miss { evicted, admitted: true }
    }

    /// Checks the structural invariants; used by tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let sum: u64 = self.entries.values().map(|e| e.0).sum();
        if sum != self.used {
            return Err(format!("used {} but resident sizes sum to {sum}", self.used));
        }
        if self.used > self.budget {
            return Err(format!("used {} exceeds budget {}", self.used, self.budget));
        }
        if self.order.len() != self.entries.len() {
            return Err("recency order and resident set differ in size".into());
        }
        for (stamp, c) in &self.order {
            if self.entries.get(c).map(|e| e.1) != Some(*stamp) {
                return Err(format!("stale recency stamp for {c}"));
            }
        }
        Ok(())
    }
}

/// Functional form of [`CacheState::access`].
pub fn lru_access(state: &mut CacheState, chunk: ChunkId, size: u64) -> AccessOutcome {
    state.access(chunk, size)
}
