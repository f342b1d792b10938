use std::cmp::Reverse;

use super::{Placement, PlacementError, PlanOptions};
use crate::lp::{build_joint_lp, solve_lp_two_stage, solve_lp_with, tie_break_costs, LpStatus};
use crate::redirection::{redirect_closest, RequestCtx};
use crate::routing::{solve_min_mlu_routing, RoutingSolution, TrafficMatrix};
use crate::topology::{inverse_cap_weights, DistanceTable, Topology};
use crate::workload::{ChunkId, ChunkedCatalog, DemandMatrix};

/// A rounded placement together with the routing planned for it.
#[derive(Debug, Clone)]
pub struct PlannedPlacement {
    pub placement: Placement,
    pub routing: RoutingSolution,
    /// Optimum of the fractional joint program (a lower bound).
    pub lp_alpha: f64,
    /// Traffic the rounded placement induces when each request goes to its
    /// nearest replica.
    pub induced: TrafficMatrix,
    /// Min-MLU optimum for `induced`.
    pub routing_alpha: f64,
}

/// Plans from the previous epoch's demand.
pub fn plan_placement_optimized(
    dm: &DemandMatrix,
    topo: &Topology,
    catalog: &ChunkedCatalog,
    budgets: &[u64],
    epoch: usize,
    opts: &PlanOptions,
) -> Result<PlannedPlacement, PlacementError> {
    plan(dm, topo, catalog, budgets, epoch, opts)
}

/// Same planner fed the demand of the epoch being planned for.
pub fn plan_placement_future(
    dm_next: &DemandMatrix,
    topo: &Topology,
    catalog: &ChunkedCatalog,
    budgets: &[u64],
    epoch: usize,
    opts: &PlanOptions,
) -> Result<PlannedPlacement, PlacementError> {
    plan(dm_next, topo, catalog, budgets, epoch, opts)
}

fn plan(
    dm: &DemandMatrix,
    topo: &Topology,
    catalog: &ChunkedCatalog,
    budgets: &[u64],
    epoch: usize,
    opts: &PlanOptions,
) -> Result<PlannedPlacement, PlacementError> {
    let n = topo.pop_count();
    if budgets.len() != n {
        return Err(PlacementError::BudgetCount { expected: n, got: budgets.len() });
    }
    let total = catalog.total_bytes().max(1) as f64;
    let ratio = budgets.iter().sum::<u64>() as f64 / total;

    // x(c, j) from the relaxation; absent entries are zero.
    let mut frac = vec![Vec::<(ChunkId, f64)>::new(); n];
    let mut lp_alpha = None;
    if !dm.is_empty() && budgets.iter().any(|&b| b > 0) {
        let prog = build_joint_lp(topo, dm, budgets, catalog, &opts.joint);
        let sol = if opts.joint.tie_break {
            let second = tie_break_costs(&prog, topo, dm);
            let cap = |a: f64| a * (1.0 + 1e-6) + 1e-9;
            let (first, refined) = solve_lp_two_stage(&prog.lp, prog.alpha, cap, &second, &opts.solver)?;
            if first.status != LpStatus::Optimal {
                return Err(PlacementError::UnexpectedStatus(first.status));
            }
            lp_alpha = Some(first.value(prog.alpha));
            let refined = refined.expect("optimal first stage");
            if refined.status != LpStatus::Optimal {
                return Err(PlacementError::UnexpectedStatus(refined.status));
            }
            refined
        } else {
            let sol = solve_lp_with(&prog.lp, &opts.solver)?;
            if sol.status != LpStatus::Optimal {
                return Err(PlacementError::UnexpectedStatus(sol.status));
            }
            lp_alpha = Some(sol.value(prog.alpha));
            sol
        };
        for (&(c, j), &v) in &prog.placement {
            let x = sol.value(v);
            if x > 0.0 {
                frac[j.index()].push((c, x));
            }
        }
    }

    let placement = round(dm, topo, catalog, budgets, &frac, epoch, ratio);
    let dist = DistanceTable::new(topo, &inverse_cap_weights(topo));
    let induced = induced_matrix(dm, topo, catalog, &dist, &placement);
    let routed = solve_min_mlu_routing(topo, &induced, &opts.solver)?;
    Ok(PlannedPlacement {
        placement,
        routing: routed.routing,
        // With nothing to place the relaxation is the origin-only routing problem.
        lp_alpha: lp_alpha.unwrap_or(routed.alpha),
        induced,
        routing_alpha: routed.alpha,
    })
}

/// Per PoP, admits chunks in decreasing x (then local demand, then id) as
/// long as they fit. Every catalog chunk is a candidate, so leftover space
/// is filled with chunks the relaxation did not ask for.
fn round(
    dm: &DemandMatrix,
    topo: &Topology,
    catalog: &ChunkedCatalog,
    budgets: &[u64],
    frac: &[Vec<(ChunkId, f64)>],
    epoch: usize,
    ratio: f64,
) -> Placement {
    let mut placement = Placement::empty(epoch, topo.pop_count(), ratio);
    for j in topo.pop_ids() {
        let budget = budgets[j.index()];
        if budget == 0 {
            continue;
        }
        let mut x = std::collections::HashMap::new();
        for &(c, v) in &frac[j.index()] {
            // Quantize so solver noise cannot reorder chunks the LP treats alike.
            x.insert(c, (v * 1e9).round() as i64);
        }
        let mut order: Vec<(Reverse<i64>, Reverse<u64>, ChunkId, u64)> = catalog
            .all_chunks()
            .filter(|ch| catalog.origin(ch.id) != j)
            .map(|ch| (Reverse(x.get(&ch.id).copied().unwrap_or(0)), Reverse(dm.get(ch.id, j)), ch.id, ch.size))
            .collect();
        order.sort_unstable();
        let mut used = 0u64;
        for (_, _, c, size) in order {
            if used + size <= budget {
                used += size;
                placement.insert(j, c);
            }
        }
    }
    placement
}

/// Demand in `dm` served by nearest replicas, as a window-average rate matrix.
pub(crate) fn induced_matrix(
    dm: &DemandMatrix,
    topo: &Topology,
    catalog: &ChunkedCatalog,
    dist: &DistanceTable,
    placement: &Placement,
) -> TrafficMatrix {
    let mut tm = TrafficMatrix::zeros(topo.pop_count());
    let to_rate = 8.0 / dm.window_seconds();
    for (c, i, bytes) in dm.entries() {
        let ctx = RequestCtx { chunk: c, client: i, origin: catalog.origin(c) };
        let d = redirect_closest(topo, dist, placement, &ctx);
        if d.server != i {
            tm.add(d.server, i, bytes as f64 * to_rate);
        }
    }
    tm
}
