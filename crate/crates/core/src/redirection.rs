//! Request redirection: choosing the PoP that serves each request.

use std::fmt;
use std::io;

use crate::placement::{CacheState, Placement};
use crate::routing::{LinkLoads, RoutingSolution};
use crate::topology::{DistanceTable, PopId, Topology};
use crate::workload::{ChunkId, ChunkedCatalog};

/// Which non-origin PoPs currently hold a chunk.
pub trait ReplicaView {
    fn holds(&self, pop: PopId, chunk: ChunkId) -> bool;
}

impl ReplicaView for Placement {
    fn holds(&self, pop: PopId, chunk: ChunkId) -> bool {
        Placement::holds(self, pop, chunk)
    }
}

/// Union of a planned store and per-PoP caches; either part may be absent.
#[derive(Debug, Clone, Copy)]
pub struct PlacementView<'a> {
    pub planned: Option<&'a Placement>,
    pub caches: &'a [CacheState],
}

impl ReplicaView for PlacementView<'_> {
    fn holds(&self, pop: PopId, chunk: ChunkId) -> bool {
        self.planned.is_some_and(|p| p.holds(pop, chunk))
            || self.caches.get(pop.index()).is_some_and(|c| c.contains(chunk))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RedirectReason {
    LocalHit,
    RemoteReplica,
    Origin,
}

impl fmt::Display for RedirectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RedirectReason::LocalHit => "local-hit",
            RedirectReason::RemoteReplica => "remote-replica",
            RedirectReason::Origin => "origin",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedirectDecision {
    pub server: PopId,
    pub reason: RedirectReason,
}

impl RedirectDecision {
    /// Whether serving this request puts traffic on the network.
    pub fn is_remote(&self, client: PopId) -> bool {
        self.server != client
    }
}

/// Everything redirection needs to know about one request.
#[derive(Debug, Clone, Copy)]
pub struct RequestCtx {
    pub chunk: ChunkId,
    pub client: PopId,
    /// PoP that permanently holds the chunk.
    pub origin: PopId,
}

fn local(ctx: &RequestCtx, view: &impl ReplicaView) -> Option<RedirectDecision> {
    if ctx.client == ctx.origin {
        Some(RedirectDecision { server: ctx.client, reason: RedirectReason::Origin })
    } else if view.holds(ctx.client, ctx.chunk) {
        Some(RedirectDecision { server: ctx.client, reason: RedirectReason::LocalHit })
    } else {
        None
    }
}

fn replicas<'a>(topo: &'a Topology, ctx: &'a RequestCtx, view: &'a impl ReplicaView) -> impl Iterator<Item = PopId> + 'a {
    topo.pop_ids().filter(move |&p| p != ctx.client && p != ctx.origin && view.holds(p, ctx.chunk))
}

/// Nearest replica by InverseCap distance (ties to the lower PopId), the
/// origin only when no replica exists.
pub fn redirect_closest(topo: &Topology, dist: &DistanceTable, view: &impl ReplicaView, ctx: &RequestCtx) -> RedirectDecision {
    if let Some(d) = local(ctx, view) {
        return d;
    }
    let mut best: Option<(f64, PopId)> = None;
    for p in replicas(topo, ctx, view) {
        let d = dist.get(p, ctx.client);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, p));
        }
    }
    match best {
        Some((_, server)) => RedirectDecision { server, reason: RedirectReason::RemoteReplica },
        None => RedirectDecision { server: ctx.origin, reason: RedirectReason::Origin },
    }
}

/// Bottleneck utilization on the links that `server -> client` traffic uses
/// under `routing`, after adding `rate` to them.
pub fn bottleneck_after(
    topo: &Topology,
    routing: &RoutingSolution,
    loads: &LinkLoads,
    server: PopId,
    client: PopId,
    rate: f64,
) -> f64 {
    routing
        .fractions(server, client)
        .iter()
        .filter(|(_, f)| *f > 0.0)
        .map(|&(l, f)| (loads.get(l) + f * rate) / topo.capacity(l))
        .fold(0.0, f64::max)
}

/// Picks, among replicas and the origin, the server whose path bottleneck
/// after adding this request is lowest. Ties go to the nearer server, then
/// the lower PopId.
pub fn redirect_utilization_aware(
    topo: &Topology,
    dist: &DistanceTable,
    view: &impl ReplicaView,
    ctx: &RequestCtx,
    loads: &LinkLoads,
    routing: &RoutingSolution,
    rate: f64,
) -> RedirectDecision {
    if let Some(d) = local(ctx, view) {
        return d;
    }
    let mut best: Option<(f64, f64, PopId)> = None;
    for p in replicas(topo, ctx, view).chain(std::iter::once(ctx.origin)) {
        let key = (bottleneck_after(topo, routing, loads, p, ctx.client, rate), dist.get(p, ctx.client), p);
        let better = match best {
            None => true,
            Some(b) => key.0.total_cmp(&b.0).then(key.1.total_cmp(&b.1)).then(key.2.cmp(&b.2)).is_lt(),
        };
        if better {
            best = Some(key);
        }
    }
    let server = best.expect("origin is always a candidate").2;
    let reason = if server == ctx.origin { RedirectReason::Origin } else { RedirectReason::RemoteReplica };
    RedirectDecision { server, reason }
}

/// One line of the optional decision log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub timestamp: f64,
    pub client: PopId,
    pub chunk: ChunkId,
    pub decision: RedirectDecision,
}

/// Streams `timestamp_s,client_pop,chunk_id,server_pop,reason` rows.
pub struct DecisionLog<W: io::Write> {
    out: W,
}

impl<W: io::Write> DecisionLog<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "timestamp_s,client_pop,chunk_id,server_pop,reason")?;
        Ok(DecisionLog { out })
    }

    pub fn record(&mut self, rec: &DecisionRecord, catalog: &ChunkedCatalog) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            rec.timestamp,
            rec.client,
            catalog.chunk_label(rec.chunk),
            rec.decision.server,
            rec.decision.reason
        )
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{apply_routing, inverse_cap_routing, TrafficMatrix};
    use crate::topology::{inverse_cap_weights, parse_topology};
    use crate::workload::{Catalog, ContentId};
    use proptest::prelude::*;

    const CH: ChunkId = ChunkId { content: ContentId(0), index: 0 };

    /// Star of four leaves around a hub; pop 0 is the origin.
    fn star() -> Topology {
        parse_topology(
            "pop 0 O\npop 1 A\npop 2 B\npop 3 C\npop 4 H\n\
             link 0 4 1000\nlink 1 4 1000\nlink 2 4 1000\nlink 3 4 500\norigin 0\n",
        )
        .unwrap()
    }

    fn with(pops: &[u32]) -> Placement {
        let mut p = Placement::empty(0, 5, 1.0);
        for &i in pops {
            p.insert(PopId(i), CH);
        }
        p
    }

    fn ctx(client: u32) -> RequestCtx {
        RequestCtx { chunk: CH, client: PopId(client), origin: PopId(0) }
    }

    #[test]
    fn closest_prefers_nearer_replica() {
        let t = star();
        let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
        // 2 -> 1 crosses two 1000 links, 3 -> 1 crosses a 500 link.
        let r = redirect_closest(&t, &d, &with(&[2, 3]), &ctx(1));
        assert_eq!(r, RedirectDecision { server: PopId(2), reason: RedirectReason::RemoteReplica });
    }

    #[test]
    fn closest_local_and_origin_fallback() {
        let t = star();
        let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
        assert_eq!(redirect_closest(&t, &d, &with(&[1]), &ctx(1)).reason, RedirectReason::LocalHit);
        assert_eq!(redirect_closest(&t, &d, &with(&[]), &ctx(1)), RedirectDecision { server: PopId(0), reason: RedirectReason::Origin });
        assert_eq!(redirect_closest(&t, &d, &with(&[]), &ctx(0)), RedirectDecision { server: PopId(0), reason: RedirectReason::Origin });
    }

    #[test]
    fn closest_ties_break_on_lower_pop() {
        let t = star();
        let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
        assert_eq!(redirect_closest(&t, &d, &with(&[2, 4]), &ctx(1)).server, PopId(4));
        // Equidistant replicas 2 and 1 seen from the hub.
        assert_eq!(redirect_closest(&t, &d, &with(&[2, 1]), &ctx(4)).server, PopId(1));
    }

    #[test]
    fn utilization_aware_avoids_hot_path() {
        let t = star();
        let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
        let routing = inverse_cap_routing(&t).unwrap();
        let mut tm = TrafficMatrix::zeros(5);
        // Load 2->4 to 0.9 and 3->4 to 0.4.
        tm.add(PopId(2), PopId(4), 900.0);
        tm.add(PopId(3), PopId(4), 200.0);
        let loads = apply_routing(&t, &routing, &tm).unwrap();
        let mut origin_hot = tm.clone();
        origin_hot.add(PopId(0), PopId(4), 950.0);
        let loads_hot = apply_routing(&t, &routing, &origin_hot).unwrap();
        let view = with(&[2, 3]);
        // Origin path is idle and competes as a candidate.
        assert_eq!(redirect_utilization_aware(&t, &d, &view, &ctx(1), &loads, &routing, 10.0).server, PopId(0));
        assert_eq!(redirect_utilization_aware(&t, &d, &view, &ctx(1), &loads_hot, &routing, 10.0).server, PopId(3));
        assert_eq!(redirect_utilization_aware(&t, &d, &with(&[1]), &ctx(1), &loads_hot, &routing, 10.0).reason, RedirectReason::LocalHit);
    }

    #[test]
    fn utilization_aware_matches_closest_on_symmetric_idle_network() {
        // Complete graph with uniform capacities: every candidate reaches the
        // client over its own single link. The origin has the highest id so
        // that it never wins a tie against a replica.
        let mut text = String::from("pop 0 A\npop 1 B\npop 2 C\npop 3 O\n");
        for a in 0..4 {
            for b in 0..4 {
                if a < b {
                    text.push_str(&format!("link {a} {b} 100\n"));
                }
            }
        }
        text.push_str("origin 3\n");
        let t = parse_topology(&text).unwrap();
        let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
        let routing = inverse_cap_routing(&t).unwrap();
        let idle = LinkLoads::zeros(&t);
        for client in 0..4u32 {
            for mask in 0..8u32 {
                let mut p = Placement::empty(0, 4, 1.0);
                for s in (0..3).filter(|s| mask & (1 << s) != 0) {
                    p.insert(PopId(s), CH);
                }
                let c = RequestCtx { chunk: CH, client: PopId(client), origin: PopId(3) };
                let a = redirect_closest(&t, &d, &p, &c);
                let b = redirect_utilization_aware(&t, &d, &p, &c, &idle, &routing, 1.0);
                assert_eq!(a, b, "client {client} mask {mask}");
            }
        }
    }

    #[test]
    fn decision_log_format() {
        let cat = ChunkedCatalog::new(Catalog::new(vec![("a".into(), 5, PopId(0))]), None);
        let mut log = DecisionLog::new(Vec::new()).unwrap();
        let rec = DecisionRecord {
            timestamp: 12.5,
            client: PopId(2),
            chunk: CH,
            decision: RedirectDecision { server: PopId(0), reason: RedirectReason::Origin },
        };
        log.record(&rec, &cat).unwrap();
        let text = String::from_utf8(log.into_inner()).unwrap();
        assert_eq!(text, "timestamp_s,client_pop,chunk_id,server_pop,reason\n12.5,2,a#0,0,origin\n");
    }

    proptest! {
        #[test]
        fn decisions_name_a_holder(mask in 0u32..32, client in 0u32..5, loads in prop::collection::vec(0.0f64..1000.0, 8)) {
            let t = star();
            let d = DistanceTable::new(&t, &inverse_cap_weights(&t));
            let routing = inverse_cap_routing(&t).unwrap();
            let p = with(&(0..5).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>());
            let c = ctx(client);
            let l = LinkLoads { start: 0.0, end: 1.0, load: loads };
            for dec in [redirect_closest(&t, &d, &p, &c), redirect_utilization_aware(&t, &d, &p, &c, &l, &routing, 5.0)] {
                prop_assert!(dec.server == c.origin || p.holds(dec.server, CH));
                prop_assert_eq!(dec.reason == RedirectReason::Origin, dec.server == c.origin);
                prop_assert_eq!(dec.reason == RedirectReason::LocalHit, dec.server == c.client && c.client != c.origin);
            }
        }

        #[test]
        fn closest_ignores_uniform_capacity_scaling(mask in 0u32..32, client in 0u32..5, k in 0.01f64..100.0) {
            let t = star();
            let s = t.scale_capacities(k);
            let p = with(&(0..5).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>());
            let a = redirect_closest(&t, &DistanceTable::new(&t, &inverse_cap_weights(&t)), &p, &ctx(client));
            let b = redirect_closest(&s, &DistanceTable::new(&s, &inverse_cap_weights(&s)), &p, &ctx(client));
            prop_assert_eq!(a, b);
        }
    }
}
