//! Multicommodity-flow programs. Flow variables are aggregated per source
//! PoP: one commodity carries everything a PoP sends, and per-destination
//! routes are recovered afterwards by flow decomposition. Rates are divided
//! by the largest link capacity so the programs stay well scaled; the MLU
//! variable is unaffected by that normalization.

use std::collections::BTreeMap;

use super::{LinearProgram, Relation, VarId};
use crate::routing::TrafficMatrix;
use crate::topology::{inverse_cap_weights, DistanceTable, PopId, Topology};
use crate::workload::{ChunkId, ChunkedCatalog, DemandMatrix};

/// Link flow variables of one source-aggregated commodity.
#[derive(Debug, Clone)]
pub struct SourceFlows {
    pub source: PopId,
    /// One variable per link, indexed by `LinkId`.
    pub link_vars: Vec<VarId>,
    /// Normalized demand toward each destination.
    pub demands: Vec<(PopId, f64)>,
}

#[derive(Debug, Clone)]
pub struct MinMluProgram {
    pub lp: LinearProgram,
    pub alpha: VarId,
    pub sources: Vec<SourceFlows>,
    /// Rates in the program are `rate_bps / rate_scale`.
    pub rate_scale: f64,
}

fn add_link_flows(lp: &mut LinearProgram, topo: &Topology, source: PopId) -> Vec<VarId> {
    topo.links()
        .iter()
        .map(|l| {
            lp.add_var(format!("f_s{}_{}_{}", source, l.src, l.dst), 0.0, f64::INFINITY, 0.0)
                .expect("valid bounds")
        })
        .collect()
}

/// `Σ_out f - Σ_in f` at `node` for one commodity.
fn net_outflow(topo: &Topology, vars: &[VarId], node: PopId) -> Vec<(VarId, f64)> {
    let mut row: Vec<(VarId, f64)> = topo.out_links(node).iter().map(|l| (vars[l.index()], 1.0)).collect();
    row.extend(topo.in_links(node).iter().map(|l| (vars[l.index()], -1.0)));
    row
}

/// Rates are expressed relative to the largest demand so that demand
/// coefficients and flow coefficients share a magnitude.
fn positive_or_one(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

fn add_capacity_rows(lp: &mut LinearProgram, topo: &Topology, alpha: VarId, commodities: &[&[VarId]], scale: f64) {
    for l in topo.links() {
        let mut row: Vec<(VarId, f64)> = commodities.iter().map(|vars| (vars[l.id.index()], 1.0)).collect();
        row.push((alpha, -(l.capacity_bps as f64) / scale));
        lp.add_constraint(row, Relation::Le, 0.0).expect("valid row");
    }
}

/// Min-MLU routing program: minimize `alpha` subject to flow conservation
/// per commodity and `Σ_k f(k, l) <= alpha · capacity(l)`.
pub fn build_min_mlu_lp(topo: &Topology, tm: &TrafficMatrix) -> MinMluProgram {
    let scale = positive_or_one(tm.entries().map(|(_, _, r)| r).fold(0.0, f64::max));
    let mut lp = LinearProgram::new();
    let alpha = lp.add_var("alpha", 0.0, f64::INFINITY, 1.0).expect("valid bounds");
    let mut sources = Vec::new();
    for s in topo.pop_ids() {
        let demands: Vec<(PopId, f64)> = topo
            .pop_ids()
            .filter(|&t| t != s)
            .map(|t| (t, tm.get(s, t) / scale))
            .filter(|(_, d)| *d > 0.0)
            .collect();
        if demands.is_empty() {
            continue;
        }
        let vars = add_link_flows(&mut lp, topo, s);
        let total: f64 = demands.iter().map(|d| d.1).sum();
        for node in topo.pop_ids() {
            let supply = if node == s {
                total
            } else {
                -demands.iter().find(|d| d.0 == node).map_or(0.0, |d| d.1)
            };
            lp.add_constraint(net_outflow(topo, &vars, node), Relation::Eq, supply).expect("valid row");
        }
        sources.push(SourceFlows { source: s, link_vars: vars, demands });
    }
    let commodities: Vec<&[VarId]> = sources.iter().map(|s| s.link_vars.as_slice()).collect();
    add_capacity_rows(&mut lp, topo, alpha, &commodities, scale);
    MinMluProgram { lp, alpha, sources, rate_scale: scale }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointLpOptions {
    /// Restrict each client's candidate servers to itself, the chunk's
    /// origin and this many nearest other PoPs (InverseCap distance).
    /// `None` keeps every PoP as a candidate.
    pub candidate_limit: Option<usize>,
    /// Re-solve with α capped at its optimum and byte-distance as the
    /// objective, so that storage the MLU does not depend on still goes
    /// where the demand is.
    pub tie_break: bool,
}

impl Default for JointLpOptions {
    fn default() -> Self {
        JointLpOptions { candidate_limit: None, tie_break: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub chunk: ChunkId,
    pub client: PopId,
    pub server: PopId,
    pub var: VarId,
}

#[derive(Debug, Clone)]
pub struct JointProgram {
    pub lp: LinearProgram,
    pub alpha: VarId,
    /// Storage fraction of each chunk at each non-origin PoP.
    pub placement: BTreeMap<(ChunkId, PopId), VarId>,
    pub assignments: Vec<Assignment>,
    /// Flow variables per serving PoP, indexed by `LinkId`.
    pub server_flows: Vec<(PopId, Vec<VarId>)>,
    pub rate_scale: f64,
}

/// Joint placement and routing relaxation over the demand in `dm`
/// (converted to window-average rates). Each chunk's origin always holds it
/// and does not spend storage on it.
pub fn build_joint_lp(
    topo: &Topology,
    dm: &DemandMatrix,
    storage: &[u64],
    catalog: &ChunkedCatalog,
    opts: &JointLpOptions,
) -> JointProgram {
    assert_eq!(storage.len(), topo.pop_count(), "one storage budget per pop");
    let n = topo.pop_count();
    let bps = 8.0 / dm.window_seconds();
    let scale = positive_or_one(dm.entries().map(|(_, _, b)| b as f64 * bps).fold(0.0, f64::max));
    let to_rate = bps / scale;
    let mut lp = LinearProgram::new();
    let alpha = lp.add_var("alpha", 0.0, f64::INFINITY, 1.0).expect("valid bounds");

    let proximity: Option<Vec<Vec<PopId>>> = opts.candidate_limit.map(|_| {
        let dist = DistanceTable::new(topo, &inverse_cap_weights(topo));
        topo.pop_ids().map(|c| dist.by_proximity(c)).collect()
    });
    let candidates = |client: PopId, origin: PopId| -> Vec<PopId> {
        match (&proximity, opts.candidate_limit) {
            (Some(prox), Some(k)) => {
                let mut c: Vec<PopId> = prox[client.index()]
                    .iter()
                    .copied()
                    .filter(|&p| p != client && p != origin)
                    .take(k)
                    .collect();
                c.push(client);
                if origin != client {
                    c.push(origin);
                }
                c.sort();
                c
            }
            _ => topo.pop_ids().collect(),
        }
    };

    let mut placement = BTreeMap::new();
    let mut chunks: Vec<ChunkId> = dm.entries().map(|(c, _, _)| c).collect();
    chunks.dedup();
    for &c in &chunks {
        let origin = catalog.origin(c);
        for j in topo.pop_ids().filter(|&j| j != origin) {
            let v = lp.add_var(format!("x_{}_{}", c, j), 0.0, 1.0, 0.0).expect("valid bounds");
            placement.insert((c, j), v);
        }
    }

    // Per server: (client, normalized rate, y var) for remote service.
    let mut served: Vec<Vec<(PopId, f64, VarId)>> = vec![Vec::new(); n];
    let mut assignments = Vec::new();
    for (c, i, bytes) in dm.entries() {
        let origin = catalog.origin(c);
        let rate = bytes as f64 * to_rate;
        let mut sum_row = Vec::new();
        for j in candidates(i, origin) {
            let y = lp.add_var(format!("y_{}_{}_{}", c, i, j), 0.0, 1.0, 0.0).expect("valid bounds");
            sum_row.push((y, 1.0));
            assignments.push(Assignment { chunk: c, client: i, server: j, var: y });
            if let Some(&x) = placement.get(&(c, j)) {
                lp.add_constraint(vec![(y, 1.0), (x, -1.0)], Relation::Le, 0.0).expect("valid row");
            }
            if j != i {
                served[j.index()].push((i, rate, y));
            }
        }
        lp.add_constraint(sum_row, Relation::Eq, 1.0).expect("valid row");
    }

    for j in topo.pop_ids() {
        let row: Vec<(VarId, f64)> = placement
            .iter()
            .filter(|((_, p), _)| *p == j)
            .map(|((c, _), &v)| (v, catalog.chunk_bytes(*c) as f64))
            .collect();
        if !row.is_empty() {
            lp.add_constraint(row, Relation::Le, storage[j.index()] as f64).expect("valid row");
        }
    }

    let mut server_flows = Vec::new();
    for j in topo.pop_ids() {
        let remote = &served[j.index()];
        if remote.is_empty() {
            continue;
        }
        let vars = add_link_flows(&mut lp, topo, j);
        for node in topo.pop_ids() {
            let mut row = net_outflow(topo, &vars, node);
            if node == j {
                row.extend(remote.iter().map(|&(_, r, y)| (y, -r)));
            } else {
                row.extend(remote.iter().filter(|(i, _, _)| *i == node).map(|&(_, r, y)| (y, r)));
            }
            lp.add_constraint(row, Relation::Eq, 0.0).expect("valid row");
        }
        server_flows.push((j, vars));
    }
    let commodities: Vec<&[VarId]> = server_flows.iter().map(|(_, v)| v.as_slice()).collect();
    add_capacity_rows(&mut lp, topo, alpha, &commodities, scale);

    JointProgram { lp, alpha, placement, assignments, server_flows, rate_scale: scale }
}

/// Second stage of the joint program: α may not exceed `alpha_cap` and the
/// objective is [`tie_break_costs`].
pub fn tie_break_joint_lp(prog: &JointProgram, topo: &Topology, dm: &DemandMatrix, alpha_cap: f64) -> LinearProgram {
    let mut lp = prog.lp.clone();
    lp.set_cost(prog.alpha, 0.0);
    lp.add_constraint(vec![(prog.alpha, 1.0)], Relation::Le, alpha_cap).expect("finite cap");
    for (v, c) in tie_break_costs(prog, topo, dm) {
        lp.set_cost(v, c);
    }
    lp
}

/// Demand-weighted InverseCap distance from server to client for every
/// assignment variable, scaled so the largest cost is 1.
pub fn tie_break_costs(prog: &JointProgram, topo: &Topology, dm: &DemandMatrix) -> Vec<(VarId, f64)> {
    let dist = DistanceTable::new(topo, &inverse_cap_weights(topo));
    let weights: Vec<f64> = prog
        .assignments
        .iter()
        .map(|a| dm.get(a.chunk, a.client) as f64 * dist.get(a.server, a.client))
        .collect();
    let norm = positive_or_one(weights.iter().copied().fold(0.0, f64::max));
    prog.assignments.iter().zip(weights).map(|(a, w)| (a.var, w / norm)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, solve_lp_two_stage, LpStatus};
    use crate::topology::parse_topology;
    use crate::workload::{Catalog, ContentId};

    fn alpha_of(topo: &Topology, entries: &[(u32, u32, f64)]) -> f64 {
        let mut tm = TrafficMatrix::zeros(topo.pop_count());
        for &(s, t, r) in entries {
            tm.add(PopId(s), PopId(t), r);
        }
        let prog = build_min_mlu_lp(topo, &tm);
        let sol = solve_lp(&prog.lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.duality_gap() < 1e-9);
        sol.value(prog.alpha)
    }

    #[test]
    fn single_link_ratio() {
        let t = parse_topology("pop 0 A\npop 1 B\nlink 0 1 40\norigin 0\n").unwrap();
        assert!((alpha_of(&t, &[(0, 1, 10e6)]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn triangle_splits_direct_and_two_hop() {
        let t = parse_topology("pop 0 A\npop 1 B\npop 2 C\nlink 0 1 10\nlink 1 2 10\nlink 0 2 10\norigin 0\n").unwrap();
        assert!((alpha_of(&t, &[(0, 1, 9e6)]) - 0.45).abs() < 1e-9);
    }

    #[test]
    fn joint_program_localizes_demand() {
        // Two pops, each with room for one of two equal chunks; each pop
        // wants a different chunk. The origin sits at a third pop.
        let t = parse_topology("pop 0 O\npop 1 P\npop 2 Q\nlink 0 1 10\nlink 0 2 10\nlink 1 2 10\norigin 0\n").unwrap();
        let cat = Catalog::new(vec![("a".into(), 100, PopId(0)), ("b".into(), 100, PopId(0))]);
        let cc = ChunkedCatalog::new(cat, None);
        let a = ChunkId { content: ContentId(0), index: 0 };
        let b = ChunkId { content: ContentId(1), index: 0 };
        let dm = DemandMatrix::from_entries(0.0, 100.0, [((a, PopId(1)), 1000), ((b, PopId(2)), 1000)]);
        let prog = build_joint_lp(&t, &dm, &[0, 100, 100], &cc, &JointLpOptions::default());
        let sol = solve_lp(&prog.lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.value(prog.alpha).abs() < 1e-9);
        assert!((sol.value(prog.placement[&(a, PopId(1))]) - 1.0).abs() < 1e-9);
        assert!((sol.value(prog.placement[&(b, PopId(2))]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_second_stage_matches_cold_solve() {
        let t = parse_topology(
            "pop 0 O\npop 1 P\npop 2 Q\npop 3 R\nlink 0 1 10\nlink 1 2 40\nlink 2 3 10\nlink 3 0 40\nlink 0 2 10\norigin 0\n",
        )
        .unwrap();
        let cat = Catalog::new((0..4).map(|k| (format!("c{k}"), 100 + 20 * k as u64, PopId(0))).collect());
        let cc = ChunkedCatalog::new(cat, None);
        let chunk = |k: u32| ChunkId { content: ContentId(k), index: 0 };
        let mut entries = Vec::new();
        for k in 0..4u32 {
            for p in 1..4u32 {
                entries.push(((chunk(k), PopId(p)), 1000 * (1 + (k * 7 + p * 3) as u64 % 5)));
            }
        }
        let dm = DemandMatrix::from_entries(0.0, 100.0, entries);
        let prog = build_joint_lp(&t, &dm, &[0, 150, 120, 260], &cc, &JointLpOptions::default());
        let plain = solve_lp(&prog.lp).unwrap();
        let cap = |a: f64| a * (1.0 + 1e-6) + 1e-9;
        let costs = tie_break_costs(&prog, &t, &dm);
        let (first, second) = solve_lp_two_stage(&prog.lp, prog.alpha, cap, &costs, &Default::default()).unwrap();
        let alpha = first.value(prog.alpha);
        assert!(alpha > 0.0);
        assert!((alpha - plain.value(prog.alpha)).abs() < 1e-9);
        let second = second.unwrap();
        let cold = solve_lp(&tie_break_joint_lp(&prog, &t, &dm, cap(alpha))).unwrap();
        assert_eq!(second.status, LpStatus::Optimal);
        assert!((second.objective - cold.objective).abs() < 1e-7);
        assert!(second.value(prog.alpha) <= cap(alpha) + 1e-12);
        assert!(second.duality_gap() < 1e-6);
    }
}
