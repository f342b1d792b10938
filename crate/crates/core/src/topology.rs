//! ISP backbone model: PoPs, directed capacitated links and the shortest-path
//! machinery behind InverseCap routing and redirection distances.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::routing::RoutingSolution;

/// Relative slack used when deciding whether two path weights tie.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct PopId(pub u32);

impl PopId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pop {
    pub id: PopId,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub src: PopId,
    pub dst: PopId,
    /// Capacity in bits per second.
    pub capacity_bps: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: link {src}->{dst} has non-positive capacity")]
    BadCapacity { line: usize, src: u32, dst: u32 },
    #[error("line {line}: duplicate directed link {src}->{dst}")]
    DuplicateLink { line: usize, src: u32, dst: u32 },
    #[error("line {line}: self-loop on pop {pop}")]
    SelfLoop { line: usize, pop: u32 },
    #[error("line {line}: unknown pop {pop}")]
    UnknownPop { line: usize, pop: u32 },
    #[error("pop ids must be exactly 0..{count} (missing {missing})")]
    NonContiguousPops { count: usize, missing: u32 },
    #[error("topology has no pops")]
    Empty,
    #[error("topology has no links")]
    NoLinks,
    #[error("pop {from} cannot reach pop {to}")]
    Disconnected { from: u32, to: u32 },
    #[error("no origin pop declared")]
    MissingOrigin,
    #[error("line {line}: origin declared more than once")]
    DuplicateOrigin { line: usize },
    #[error("origin pop {0} is not a declared pop")]
    UnknownOrigin(u32),
}

/// Directed capacitated PoP graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct Topology {
    pops: Vec<Pop>,
    links: Vec<Link>,
    origin: PopId,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Validates and builds a topology. Pop ids must be `0..pops.len()`;
    /// link ids are reassigned to their position in `links`.
    pub fn new(mut pops: Vec<Pop>, links: Vec<(PopId, PopId, u64)>, origin: PopId) -> Result<Self, TopologyError> {
        if pops.is_empty() {
            return Err(TopologyError::Empty);
        }
        pops.sort_by_key(|p| p.id);
        for (i, p) in pops.iter().enumerate() {
            if p.id.index() != i {
                return Err(TopologyError::NonContiguousPops { count: pops.len(), missing: i as u32 });
            }
        }
        let n = pops.len();
        if origin.index() >= n {
            return Err(TopologyError::UnknownOrigin(origin.0));
        }
        let mut seen = HashSet::new();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        let mut built = Vec::with_capacity(links.len());
        for (i, (src, dst, cap)) in links.into_iter().enumerate() {
            for p in [src, dst] {
                if p.index() >= n {
                    return Err(TopologyError::UnknownPop { line: 0, pop: p.0 });
                }
            }
            if src == dst {
                return Err(TopologyError::SelfLoop { line: 0, pop: src.0 });
            }
            if cap == 0 {
                return Err(TopologyError::BadCapacity { line: 0, src: src.0, dst: dst.0 });
            }
            if !seen.insert((src, dst)) {
                return Err(TopologyError::DuplicateLink { line: 0, src: src.0, dst: dst.0 });
            }
            let id = LinkId(i as u32);
            out_links[src.index()].push(id);
            in_links[dst.index()].push(id);
            built.push(Link { id, src, dst, capacity_bps: cap });
        }
        if n > 1 && built.is_empty() {
            return Err(TopologyError::NoLinks);
        }
        let topo = Topology { pops, links: built, origin, out_links, in_links };
        topo.check_strongly_connected()?;
        Ok(topo)
    }

    fn check_strongly_connected(&self) -> Result<(), TopologyError> {
        let root = PopId(0);
        for forward in [true, false] {
            let mut seen = vec![false; self.pops.len()];
            let mut stack = vec![root];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                let adj = if forward { &self.out_links[u.index()] } else { &self.in_links[u.index()] };
                for &l in adj {
                    let link = &self.links[l.index()];
                    let v = if forward { link.dst } else { link.src };
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        stack.push(v);
                    }
                }
            }
            if let Some(bad) = seen.iter().position(|s| !s) {
                let bad = bad as u32;
                return Err(if forward {
                    TopologyError::Disconnected { from: 0, to: bad }
                } else {
                    TopologyError::Disconnected { from: bad, to: 0 }
                });
            }
        }
        Ok(())
    }

    pub fn pop_count(&self) -> usize {
        self.pops.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn pops(&self) -> &[Pop] {
        &self.pops
    }

    pub fn pop_ids(&self) -> impl Iterator<Item = PopId> + '_ {
        (0..self.pops.len() as u32).map(PopId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn origin(&self) -> PopId {
        self.origin
    }

    pub fn contains(&self, pop: PopId) -> bool {
        pop.index() < self.pops.len()
    }

    pub fn out_links(&self, pop: PopId) -> &[LinkId] {
        &self.out_links[pop.index()]
    }

    pub fn in_links(&self, pop: PopId) -> &[LinkId] {
        &self.in_links[pop.index()]
    }

    pub fn find_link(&self, src: PopId, dst: PopId) -> Option<LinkId> {
        self.out_links[src.index()].iter().copied().find(|&l| self.links[l.index()].dst == dst)
    }

    pub fn capacity(&self, id: LinkId) -> f64 {
        self.links[id.index()].capacity_bps as f64
    }

    pub fn max_capacity(&self) -> u64 {
        self.links.iter().map(|l| l.capacity_bps).max().unwrap_or(0)
    }

    /// Copy with every capacity multiplied by `factor` (rounded, at least 1 bps).
    pub fn scale_capacities(&self, factor: f64) -> Topology {
        let mut t = self.clone();
        for l in &mut t.links {
            l.capacity_bps = ((l.capacity_bps as f64) * factor).round().max(1.0) as u64;
        }
        t
    }

    /// Renders the topology in the line format accepted by [`parse_topology`].
    /// Every directed link is emitted as an `arc`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.pops {
            out.push_str(&format!("pop {} {}\n", p.id, p.name));
        }
        for l in &self.links {
            let mbps = l.capacity_bps / 1_000_000;
            out.push_str(&format!("arc {} {} {}\n", l.src, l.dst, mbps));
        }
        out.push_str(&format!("origin {}\n", self.origin));
        out
    }

    /// Random symmetric backbone: a random spanning tree plus extra links until
    /// the undirected edge count reaches `edge_factor * n`. Capacities are drawn
    /// from `capacities_mbps`. Origin is pop 0.
    pub fn random(n: usize, edge_factor: f64, capacities_mbps: &[u64], seed: u64) -> Result<Topology, TopologyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pops = (0..n).map(|i| Pop { id: PopId(i as u32), name: format!("pop{i}") }).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.shuffle(&mut rng);
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut present = HashSet::new();
        for i in 1..n {
            let a = order[i];
            let b = order[rng.gen_range(0..i)];
            present.insert((a.min(b), a.max(b)));
            edges.push((a, b));
        }
        let target = ((edge_factor * n as f64).round() as usize).min(n * (n - 1) / 2);
        while edges.len() < target {
            let a = rng.gen_range(0..n as u32);
            let b = rng.gen_range(0..n as u32);
            if a == b || !present.insert((a.min(b), a.max(b))) {
                continue;
            }
            edges.push((a, b));
        }
        let mut links = Vec::with_capacity(edges.len() * 2);
        for (a, b) in edges {
            let cap = capacities_mbps[rng.gen_range(0..capacities_mbps.len())] * 1_000_000;
            links.push((PopId(a), PopId(b), cap));
            links.push((PopId(b), PopId(a), cap));
        }
        Topology::new(pops, links, PopId(0))
    }
}

/// Parses the line-oriented topology format:
///
/// ```text
/// pop <id> <name>
/// link <src> <dst> <mbps>   # both directions
/// arc <src> <dst> <mbps>    # one direction
/// origin <id>
/// ```
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut pops: Vec<Pop> = Vec::new();
    let mut pop_ids = HashSet::new();
    // (src, dst, bps, line)
    let mut links: Vec<(u32, u32, u64, usize)> = Vec::new();
    let mut origin: Option<u32> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let malformed = |message: &str| TopologyError::Malformed { line, message: message.to_string() };
        let int = |s: &str, what: &str| -> Result<u32, TopologyError> {
            s.parse::<u32>().map_err(|_| malformed(&format!("invalid {what} `{s}`")))
        };
        match toks[0] {
            "pop" => {
                if toks.len() < 3 {
                    return Err(malformed("expected `pop <id> <name>`"));
                }
                let id = int(toks[1], "pop id")?;
                if !pop_ids.insert(id) {
                    return Err(malformed(&format!("duplicate pop id {id}")));
                }
                pops.push(Pop { id: PopId(id), name: toks[2..].join(" ") });
            }
            kind @ ("link" | "arc") => {
                if toks.len() != 4 {
                    return Err(malformed(&format!("expected `{kind} <src> <dst> <capacity-mbps>`")));
                }
                let src = int(toks[1], "source pop")?;
                let dst = int(toks[2], "destination pop")?;
                let mbps: i64 = toks[3]
                    .parse()
                    .map_err(|_| malformed(&format!("invalid capacity `{}`", toks[3])))?;
                if mbps <= 0 {
                    return Err(TopologyError::BadCapacity { line, src, dst });
                }
                let bps = (mbps as u64)
                    .checked_mul(1_000_000)
                    .ok_or_else(|| malformed("capacity overflows"))?;
                links.push((src, dst, bps, line));
                if kind == "link" {
                    links.push((dst, src, bps, line));
                }
            }
            "origin" => {
                if toks.len() != 2 {
                    return Err(malformed("expected `origin <pop-id>`"));
                }
                if origin.is_some() {
                    return Err(TopologyError::DuplicateOrigin { line });
                }
                origin = Some(int(toks[1], "origin pop")?);
            }
            other => return Err(malformed(&format!("unknown directive `{other}`"))),
        }
    }

    let mut seen = HashSet::new();
    for &(src, dst, _, line) in &links {
        for p in [src, dst] {
            if !pop_ids.contains(&p) {
                return Err(TopologyError::UnknownPop { line, pop: p });
            }
        }
        if src == dst {
            return Err(TopologyError::SelfLoop { line, pop: src });
        }
        if !seen.insert((src, dst)) {
            return Err(TopologyError::DuplicateLink { line, src, dst });
        }
    }
    let origin = origin.ok_or(TopologyError::MissingOrigin)?;
    if !pop_ids.contains(&origin) {
        return Err(TopologyError::UnknownOrigin(origin));
    }
    Topology::new(
        pops,
        links.into_iter().map(|(s, d, c, _)| (PopId(s), PopId(d), c)).collect(),
        PopId(origin),
    )
}

/// Per-link dimensionless routing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap(Vec<f64>);

impl WeightMap {
    pub fn new(weights: Vec<f64>) -> Self {
        assert!(weights.iter().all(|w| w.is_finite() && *w > 0.0), "weights must be positive and finite");
        WeightMap(weights)
    }

    pub fn uniform(topo: &Topology) -> Self {
        WeightMap(vec![1.0; topo.link_count()])
    }

    pub fn get(&self, l: LinkId) -> f64 {
        self.0[l.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// InverseCap: `C_max / capacity`, so the fastest link weighs 1.
pub fn inverse_cap_weights(topo: &Topology) -> WeightMap {
    let cmax = topo.max_capacity() as f64;
    WeightMap(topo.links().iter().map(|l| cmax / l.capacity_bps as f64).collect())
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `root`. With `reverse`, distances are *to* `root`.
fn dijkstra(topo: &Topology, w: &WeightMap, root: PopId, reverse: bool) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; topo.pop_count()];
    let mut heap = BinaryHeap::new();
    dist[root.index()] = 0.0;
    heap.push(HeapEntry { dist: 0.0, node: root.0 });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > dist[node as usize] {
            continue;
        }
        let adj = if reverse { topo.in_links(PopId(node)) } else { topo.out_links(PopId(node)) };
        for &l in adj {
            let link = topo.link(l);
            let next = if reverse { link.src } else { link.dst };
            let nd = d + w.get(l);
            if nd < dist[next.index()] {
                dist[next.index()] = nd;
                heap.push(HeapEntry { dist: nd, node: next.0 });
            }
        }
    }
    dist
}

/// Weight of the minimum-weight `s -> t` path (0 when `s == t`, infinite if unreachable).
pub fn path_distance(topo: &Topology, w: &WeightMap, s: PopId, t: PopId) -> f64 {
    if s == t {
        return 0.0;
    }
    dijkstra(topo, w, s, false)[t.index()]
}

/// All-pairs shortest-path distances, row-major `[src][dst]`.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceTable {
    pub fn new(topo: &Topology, w: &WeightMap) -> Self {
        let n = topo.pop_count();
        let mut dist = Vec::with_capacity(n * n);
        for s in topo.pop_ids() {
            dist.extend(dijkstra(topo, w, s, false));
        }
        DistanceTable { n, dist }
    }

    pub fn get(&self, s: PopId, t: PopId) -> f64 {
        self.dist[s.index() * self.n + t.index()]
    }

    /// PoPs sorted by distance from `client`, ties by id; `client` itself first.
    pub fn by_proximity(&self, client: PopId) -> Vec<PopId> {
        let mut order: Vec<PopId> = (0..self.n as u32).map(PopId).collect();
        order.sort_by(|a, b| {
            self.get(client, *a).total_cmp(&self.get(client, *b)).then(a.cmp(b))
        });
        order
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_EPS * a.abs().max(b.abs()).max(1.0)
}

/// ECMP shortest-path routing: at every node, flow toward `t` splits evenly
/// across all outgoing links that lie on some minimum-weight path.
pub fn shortest_path_routes(topo: &Topology, w: &WeightMap) -> Result<RoutingSolution, RouteError> {
    let n = topo.pop_count();
    let mut routing = RoutingSolution::new(n);
    for t in topo.pop_ids() {
        let to_t = dijkstra(topo, w, t, true);
        // Next hops on shortest paths toward t.
        let next_hops: Vec<Vec<LinkId>> = topo
            .pop_ids()
            .map(|u| {
                topo.out_links(u)
                    .iter()
                    .copied()
                    .filter(|&l| {
                        let v = topo.link(l).dst;
                        to_t[v.index()].is_finite() && ties(to_t[u.index()], w.get(l) + to_t[v.index()])
                    })
                    .collect()
            })
            .collect();
        // Nodes in decreasing distance order: every next hop is strictly closer.
        let mut order: Vec<PopId> = topo.pop_ids().collect();
        order.sort_by(|a, b| to_t[b.index()].total_cmp(&to_t[a.index()]).then(a.cmp(b)));

        for s in topo.pop_ids() {
            if s == t {
                continue;
            }
            if !to_t[s.index()].is_finite() {
                return Err(RouteError::Unreachable { src: s, dst: t });
            }
            let mut inflow = vec![0.0; n];
            inflow[s.index()] = 1.0;
            let mut fracs = vec![0.0; topo.link_count()];
            for &u in &order {
                let amount = inflow[u.index()];
                if u == t || amount == 0.0 {
                    continue;
                }
                let hops = &next_hops[u.index()];
                let share = amount / hops.len() as f64;
                for &l in hops {
                    fracs[l.index()] += share;
                    inflow[topo.link(l).dst.index()] += share;
                }
            }
            let entries = fracs
                .into_iter()
                .enumerate()
                .filter(|(_, f)| *f > 0.0)
                .map(|(i, f)| (LinkId(i as u32), f))
                .collect();
            routing.set(s, t, entries);
        }
    }
    Ok(routing)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("pop {dst} is unreachable from pop {src}")]
    Unreachable { src: PopId, dst: PopId },
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = "pop 0 A\npop 1 B\npop 2 C\nlink 0 1 10000\nlink 1 2 10000\nlink 0 2 10000\norigin 0\n";

    #[test]
    fn parses_two_pop_file() {
        let t = parse_topology("pop 0 A\npop 1 B\nlink 0 1 10000\norigin 0\n").unwrap();
        assert_eq!(t.pop_count(), 2);
        assert_eq!(t.link_count(), 2);
        assert!(t.links().iter().all(|l| l.capacity_bps == 10_000_000_000));
        assert_eq!(t.origin(), PopId(0));
    }

    #[test]
    fn zero_capacity_names_line() {
        let err = parse_topology("pop 0 A\npop 1 B\nlink 0 1 0\norigin 0\n").unwrap_err();
        assert_eq!(err, TopologyError::BadCapacity { line: 3, src: 0, dst: 1 });
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn triangle_has_six_arcs() {
        let t = parse_topology(TRIANGLE).unwrap();
        assert_eq!(t.link_count(), 6);
    }

    #[test]
    fn comments_and_arcs() {
        let t = parse_topology("# backbone\npop 0 A\npop 1 B # edge\narc 0 1 100\narc 1 0 50\norigin 1\n").unwrap();
        assert_eq!(t.link_count(), 2);
        assert_eq!(t.capacity(t.find_link(PopId(1), PopId(0)).unwrap()), 50e6);
        assert_eq!(t.origin(), PopId(1));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\narc 0 1 10\norigin 0\n"),
            Err(TopologyError::Disconnected { .. })
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 0 1 10\nlink 1 0 10\norigin 0\n"),
            Err(TopologyError::DuplicateLink { line: 4, .. })
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 0 1 10\norigin 5\n"),
            Err(TopologyError::UnknownOrigin(5))
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 0 1 10\n"),
            Err(TopologyError::MissingOrigin)
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 0 1 ten\norigin 0\n"),
            Err(TopologyError::Malformed { line: 3, .. })
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 0 3 10\norigin 0\n"),
            Err(TopologyError::UnknownPop { line: 3, pop: 3 })
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\nlink 1 1 10\norigin 0\n"),
            Err(TopologyError::SelfLoop { .. })
        ));
        assert!(matches!(
            parse_topology("pop 0 A\norigin 0\n"),
            Ok(_)
        ));
        assert!(matches!(
            parse_topology("pop 0 A\npop 1 B\norigin 0\n"),
            Err(TopologyError::NoLinks)
        ));
    }

    #[test]
    fn inverse_cap_examples() {
        let t = parse_topology("pop 0 A\npop 1 B\npop 2 C\nlink 0 1 10000\nlink 1 2 2500\norigin 0\n").unwrap();
        let w = inverse_cap_weights(&t);
        let l01 = t.find_link(PopId(0), PopId(1)).unwrap();
        let l12 = t.find_link(PopId(1), PopId(2)).unwrap();
        assert_eq!(w.get(l01), 1.0);
        assert_eq!(w.get(l12), 4.0);

        let tri = parse_topology(TRIANGLE).unwrap();
        assert!(inverse_cap_weights(&tri).as_slice().iter().all(|&x| x == 1.0));

        let single = parse_topology("pop 0 A\npop 1 B\narc 0 1 7\narc 1 0 7\norigin 0\n").unwrap();
        assert_eq!(inverse_cap_weights(&single).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn triangle_direct_path_wins() {
        let t = parse_topology(TRIANGLE).unwrap();
        let r = shortest_path_routes(&t, &inverse_cap_weights(&t)).unwrap();
        let direct = t.find_link(PopId(0), PopId(1)).unwrap();
        assert_eq!(r.fractions(PopId(0), PopId(1)), &[(direct, 1.0)]);
    }

    #[test]
    fn ecmp_splits_evenly_over_disjoint_paths() {
        // 0 -> {1,2} -> 3, all equal weights.
        let t = parse_topology("pop 0 A\npop 1 B\npop 2 C\npop 3 D\nlink 0 1 10\nlink 0 2 10\nlink 1 3 10\nlink 2 3 10\norigin 0\n")
            .unwrap();
        let r = shortest_path_routes(&t, &WeightMap::uniform(&t)).unwrap();
        let fr = r.fractions(PopId(0), PopId(3));
        assert_eq!(fr.len(), 4);
        assert!(fr.iter().all(|(_, f)| (*f - 0.5).abs() < 1e-12));
    }

    #[test]
    fn distances() {
        let t = parse_topology(TRIANGLE).unwrap();
        let w = inverse_cap_weights(&t);
        assert_eq!(path_distance(&t, &w, PopId(2), PopId(2)), 0.0);
        assert_eq!(path_distance(&t, &w, PopId(0), PopId(1)), 1.0);
        let two = parse_topology("pop 0 A\npop 1 B\nlink 0 1 10\norigin 0\n").unwrap();
        assert_eq!(path_distance(&two, &inverse_cap_weights(&two), PopId(0), PopId(1)), 1.0);
        let table = DistanceTable::new(&t, &w);
        assert_eq!(table.by_proximity(PopId(1)), vec![PopId(1), PopId(0), PopId(2)]);
    }

    #[test]
    fn random_topology_is_valid_and_deterministic() {
        let a = Topology::random(20, 1.6, &[2500, 10000], 42).unwrap();
        let b = Topology::random(20, 1.6, &[2500, 10000], 42).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.link_count(), 64);
        let reparsed = parse_topology(&a.to_text()).unwrap();
        assert_eq!(reparsed.link_count(), a.link_count());
    }
}
