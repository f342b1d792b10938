//! Traffic matrices, fractional routings, link loads and MLU, plus the
//! demand-aware min-MLU routing planner.

use std::fmt::Write;

use csv::{ReaderBuilder, Trim};
use thiserror::Error;

use crate::lp::{build_min_mlu_lp, solve_lp_with, LpError, LpStatus, SolverOptions};
use crate::topology::{inverse_cap_weights, shortest_path_routes, LinkId, PopId, RouteError, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("routing has no entry for commodity {src}->{dst}")]
    MissingCommodity { src: PopId, dst: PopId },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("min-MLU program returned status {0:?}")]
    UnexpectedStatus(LpStatus),
    #[error("row {row}: {message}")]
    MalformedRow { row: u64, message: String },
}

/// Offered rate in bits/sec per ordered (src, dst) PoP pair. The diagonal is
/// always zero: local traffic never enters the network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    rate: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(n: usize) -> Self {
        TrafficMatrix { n, rate: vec![0.0; n * n] }
    }

    pub fn pop_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: PopId, t: PopId) -> f64 {
        self.rate[s.index() * self.n + t.index()]
    }

    /// Adds `rate` to `(s, t)`; diagonal contributions are dropped.
    pub fn add(&mut self, s: PopId, t: PopId, rate: f64) {
        debug_assert!(rate >= 0.0 && rate.is_finite());
        if s != t {
            self.rate[s.index() * self.n + t.index()] += rate;
        }
    }

    pub fn set(&mut self, s: PopId, t: PopId, rate: f64) {
        debug_assert!(rate >= 0.0 && rate.is_finite());
        if s != t {
            self.rate[s.index() * self.n + t.index()] = rate;
        }
    }

    /// Positive entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (PopId, PopId, f64)> + '_ {
        self.rate.iter().enumerate().filter(|(_, r)| **r > 0.0).map(move |(k, &r)| {
            (PopId((k / self.n) as u32), PopId((k % self.n) as u32), r)
        })
    }

    pub fn total(&self) -> f64 {
        self.rate.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rate.iter().all(|r| *r == 0.0)
    }

    pub fn scaled(&self, k: f64) -> TrafficMatrix {
        TrafficMatrix { n: self.n, rate: self.rate.iter().map(|r| r * k).collect() }
    }

    pub fn plus(&self, other: &TrafficMatrix) -> TrafficMatrix {
        assert_eq!(self.n, other.n);
        TrafficMatrix { n: self.n, rate: self.rate.iter().zip(&other.rate).map(|(a, b)| a + b).collect() }
    }

    pub fn clear(&mut self) {
        self.rate.iter_mut().for_each(|r| *r = 0.0);
    }
}

/// Parses `src_pop,dst_pop,rate_mbps` rows. Repeated pairs accumulate.
pub fn parse_traffic_matrix(text: &str, topo: &Topology) -> Result<TrafficMatrix, RoutingError> {
    let mut rdr = ReaderBuilder::new().has_headers(true).trim(Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| RoutingError::MalformedRow { row: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["src_pop", "dst_pop", "rate_mbps"] {
        return Err(RoutingError::MalformedRow { row: 1, message: "expected header `src_pop,dst_pop,rate_mbps`".into() });
    }
    let mut tm = TrafficMatrix::zeros(topo.pop_count());
    for rec in rdr.into_records() {
        let rec = rec.map_err(|e| RoutingError::MalformedRow {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| RoutingError::MalformedRow { row, message };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 columns, found {}", rec.len())));
        }
        let pop = |i: usize| -> Result<PopId, RoutingError> {
            let v: u32 = rec[i].parse().map_err(|_| bad(format!("invalid pop id `{}`", &rec[i])))?;
            if !topo.contains(PopId(v)) {
                return Err(bad(format!("unknown pop {v}")));
            }
            Ok(PopId(v))
        };
        let (s, t) = (pop(0)?, pop(1)?);
        let mbps: f64 = rec[2].parse().map_err(|_| bad(format!("invalid rate `{}`", &rec[2])))?;
        if !(mbps >= 0.0 && mbps.is_finite()) {
            return Err(bad(format!("rate must be finite and non-negative, got {mbps}")));
        }
        if s == t {
            if mbps > 0.0 {
                return Err(bad("diagonal entries must be zero".into()));
            }
            continue;
        }
        tm.add(s, t, mbps * 1e6);
    }
    Ok(tm)
}

pub fn write_traffic_matrix(tm: &TrafficMatrix) -> String {
    let mut out = String::from("src_pop,dst_pop,rate_mbps\n");
    for (s, t, r) in tm.entries() {
        let _ = writeln!(out, "{s},{t},{}", r / 1e6);
    }
    out
}

/// Fraction of each commodity's traffic carried by each link.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSolution {
    n: usize,
    paths: Vec<Vec<(LinkId, f64)>>,
}

impl RoutingSolution {
    pub fn new(n: usize) -> Self {
        RoutingSolution { n, paths: vec![Vec::new(); n * n] }
    }

    pub fn pop_count(&self) -> usize {
        self.n
    }

    pub fn set(&mut self, s: PopId, t: PopId, mut fractions: Vec<(LinkId, f64)>) {
        fractions.sort_by_key(|(l, _)| *l);
        self.paths[s.index() * self.n + t.index()] = fractions;
    }

    pub fn fractions(&self, s: PopId, t: PopId) -> &[(LinkId, f64)] {
        &self.paths[s.index() * self.n + t.index()]
    }

    pub fn covers(&self, s: PopId, t: PopId) -> bool {
        s == t || !self.fractions(s, t).is_empty()
    }

    /// Largest per-node flow-conservation error over all covered commodities.
    pub fn conservation_error(&self, topo: &Topology) -> f64 {
        let mut worst = 0.0f64;
        let mut net = vec![0.0; self.n];
        for s in topo.pop_ids() {
            for t in topo.pop_ids() {
                if s == t || self.fractions(s, t).is_empty() {
                    continue;
                }
                net.iter_mut().for_each(|v| *v = 0.0);
                for &(l, f) in self.fractions(s, t) {
                    let link = topo.link(l);
                    net[link.src.index()] += f;
                    net[link.dst.index()] -= f;
                    worst = worst.max(f - 1.0).max(-f);
                }
                for (v, &x) in net.iter().enumerate() {
                    let want = if v == s.index() {
                        1.0
                    } else if v == t.index() {
                        -1.0
                    } else {
                        0.0
                    };
                    worst = worst.max((x - want).abs());
                }
            }
        }
        worst
    }
}

/// Per-link offered load (bits/sec) over an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLoads {
    pub start: f64,
    pub end: f64,
    pub load: Vec<f64>,
}

impl LinkLoads {
    pub fn zeros(topo: &Topology) -> Self {
        LinkLoads { start: 0.0, end: 0.0, load: vec![0.0; topo.link_count()] }
    }

    pub fn get(&self, l: LinkId) -> f64 {
        self.load[l.index()]
    }
}

/// `load(l) = Σ_k rate(k) · frac(k, l)`.
pub fn apply_routing(topo: &Topology, routing: &RoutingSolution, tm: &TrafficMatrix) -> Result<LinkLoads, RoutingError> {
    let mut loads = LinkLoads::zeros(topo);
    add_routed(&mut loads.load, routing, tm)?;
    Ok(loads)
}

fn add_routed(load: &mut [f64], routing: &RoutingSolution, tm: &TrafficMatrix) -> Result<(), RoutingError> {
    for (s, t, rate) in tm.entries() {
        let fr = routing.fractions(s, t);
        if fr.is_empty() {
            return Err(RoutingError::MissingCommodity { src: s, dst: t });
        }
        for &(l, f) in fr {
            load[l.index()] += rate * f;
        }
    }
    Ok(())
}

/// Maximum link utilization; zero for a network without links.
pub fn mlu(loads: &LinkLoads, topo: &Topology) -> f64 {
    topo.links()
        .iter()
        .map(|l| loads.load[l.id.index()] / l.capacity_bps as f64)
        .fold(0.0, f64::max)
}

/// Adds transit traffic routed with `routing` on top of existing loads.
pub fn overlay_transit(
    loads: &LinkLoads,
    transit: &TrafficMatrix,
    routing: &RoutingSolution,
) -> Result<LinkLoads, RoutingError> {
    let mut out = loads.clone();
    add_routed(&mut out.load, routing, transit)?;
    Ok(out)
}

/// Static ECMP routing under InverseCap weights.
pub fn inverse_cap_routing(topo: &Topology) -> Result<RoutingSolution, RoutingError> {
    Ok(shortest_path_routes(topo, &inverse_cap_weights(topo))?)
}

#[derive(Debug, Clone)]
pub struct MinMluRouting {
    pub routing: RoutingSolution,
    /// Optimal MLU of the program.
    pub alpha: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

/// Minimizes MLU for `tm` with splittable routing. Commodities without demand
/// keep their InverseCap paths.
pub fn solve_min_mlu_routing(topo: &Topology, tm: &TrafficMatrix, opts: &SolverOptions) -> Result<MinMluRouting, RoutingError> {
    let mut routing = inverse_cap_routing(topo)?;
    if tm.is_zero() {
        return Ok(MinMluRouting { routing, alpha: 0.0, duality_gap: 0.0, iterations: 0 });
    }
    let prog = build_min_mlu_lp(topo, tm);
    let sol = solve_lp_with(&prog.lp, opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(RoutingError::UnexpectedStatus(sol.status));
    }
    for src in &prog.sources {
        let flows: Vec<f64> = src.link_vars.iter().map(|v| sol.value(*v)).collect();
        for (t, fr) in decompose_source_flow(topo, src.source, &flows, &src.demands) {
            routing.set(src.source, t, fr);
        }
    }
    Ok(MinMluRouting {
        routing,
        alpha: sol.value(prog.alpha),
        duality_gap: sol.duality_gap(),
        iterations: sol.iterations,
    })
}

/// Splits a single-source aggregate flow into per-destination link fractions:
/// cancels circulations, then strips source-to-sink paths.
pub(crate) fn decompose_source_flow(
    topo: &Topology,
    source: PopId,
    flows: &[f64],
    demands: &[(PopId, f64)],
) -> Vec<(PopId, Vec<(LinkId, f64)>)> {
    let n = topo.pop_count();
    let total: f64 = demands.iter().map(|d| d.1).sum();
    let eps = 1e-12 * total.max(1e-300);
    let mut f: Vec<f64> = flows.iter().map(|&v| if v > eps { v } else { 0.0 }).collect();
    cancel_cycles(topo, &mut f, eps);

    let mut absorb = vec![0.0; n];
    for &(t, d) in demands {
        absorb[t.index()] += d;
    }
    let mut carried: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut delivered = vec![0.0; n];
    let mut path: Vec<LinkId> = Vec::new();
    let mut guard = 0usize;
    let max_paths = 4 * (topo.link_count() + n) + 16;
    while delivered.iter().sum::<f64>() < total - eps && guard < max_paths {
        guard += 1;
        path.clear();
        let mut u = source;
        let mut visited = vec![false; n];
        visited[u.index()] = true;
        loop {
            if u != source && absorb[u.index()] > eps {
                break;
            }
            let next = topo
                .out_links(u)
                .iter()
                .copied()
                .filter(|l| f[l.index()] > eps && !visited[topo.link(*l).dst.index()])
                .max_by(|a, b| f[a.index()].total_cmp(&f[b.index()]).then(b.cmp(a)));
            match next {
                Some(l) => {
                    path.push(l);
                    u = topo.link(l).dst;
                    visited[u.index()] = true;
                }
                None => break,
            }
        }
        if u == source || absorb[u.index()] <= eps {
            break;
        }
        let amount = path.iter().map(|l| f[l.index()]).fold(absorb[u.index()], f64::min);
        for l in &path {
            f[l.index()] -= amount;
            if f[l.index()] <= eps {
                f[l.index()] = 0.0;
            }
        }
        absorb[u.index()] -= amount;
        delivered[u.index()] += amount;
        let row = &mut carried[u.index()];
        if row.is_empty() {
            row.resize(topo.link_count(), 0.0);
        }
        for l in &path {
            row[l.index()] += amount;
        }
    }

    let mut out = Vec::new();
    for &(t, d) in demands {
        if d <= 0.0 || delivered[t.index()] <= 0.0 {
            continue;
        }
        let norm = delivered[t.index()];
        let fr: Vec<(LinkId, f64)> = carried[t.index()]
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > 0.0)
            .map(|(i, a)| (LinkId(i as u32), a / norm))
            .collect();
        out.push((t, fr));
    }
    out
}

/// Removes directed cycles from a nonnegative link flow.
fn cancel_cycles(topo: &Topology, f: &mut [f64], eps: f64) {
    let n = topo.pop_count();
    loop {
        // Iterative DFS looking for a back edge in the positive-flow subgraph.
        let mut color = vec![0u8; n];
        let mut parent_link: Vec<Option<LinkId>> = vec![None; n];
        let mut found: Option<LinkId> = None;
        'outer: for root in 0..n {
            if color[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            color[root] = 1;
            while let Some(&mut (u, ref mut k)) = stack.last_mut() {
                let out = topo.out_links(PopId(u as u32));
                if *k < out.len() {
                    let l = out[*k];
                    *k += 1;
                    if f[l.index()] <= eps {
                        continue;
                    }
                    let v = topo.link(l).dst.index();
                    match color[v] {
                        0 => {
                            color[v] = 1;
                            parent_link[v] = Some(l);
                            stack.push((v, 0));
                        }
                        1 => {
                            found = Some(l);
                            break 'outer;
                        }
                        _ => {}
                    }
                } else {
                    color[u] = 2;
                    stack.pop();
                }
            }
        }
        let Some(back) = found else { return };
        // Walk parents from the back edge's tail to its head.
        let head = topo.link(back).dst;
        let mut cycle = vec![back];
        let mut u = topo.link(back).src;
        while u != head {
            let l = parent_link[u.index()].expect("cycle walk follows DFS tree");
            cycle.push(l);
            u = topo.link(l).src;
        }
        let m = cycle.iter().map(|l| f[l.index()]).fold(f64::INFINITY, f64::min);
        for l in cycle {
            f[l.index()] -= m;
            if f[l.index()] <= eps {
                f[l.index()] = 0.0;
            }
        }
    }
}
