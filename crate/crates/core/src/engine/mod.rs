//! The day-loop simulator. Each day (epoch) a scheme fixes its planned
//! placement and routing, then the day's requests are replayed interval by
//! interval through redirection and the resulting link utilizations are
//! recorded.

mod report;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{build_joint_lp, build_min_mlu_lp};
use crate::placement::{plan_placement_future, plan_placement_optimized, split_hybrid, CacheState, Placement, PlacementError, PlanOptions, PlannedPlacement};
use crate::redirection::{
    redirect_closest, redirect_utilization_aware, DecisionRecord, PlacementView, RedirectDecision, RedirectReason, RequestCtx,
};
use crate::routing::{apply_routing, inverse_cap_routing, mlu, overlay_transit, solve_min_mlu_routing, LinkLoads, RoutingError, RoutingSolution, TrafficMatrix};
use crate::topology::{inverse_cap_weights, DistanceTable, PopId, Topology};
use crate::workload::{aggregate_demand, Catalog, ChunkedCatalog, DemandMatrix, Trace};

pub use report::{
    percentile, summarize_interval_csv, write_interval_csv, write_mlu_summary, write_summary_csv, ByteCounts, DayStats, IntervalStats, MluReport,
    MluSummaryRow,
};
pub use sweep::{check_ratios, compare_schemes, sweep_storage_ratio, write_comparison_csv, write_sweep_csv, Comparison, Sweep, SweepRow};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("request {index} comes from pop {pop}, which the topology does not have")]
    UnknownRequestPop { index: usize, pop: PopId },
    #[error("request {index} names content {content}, which the catalog does not have")]
    UnknownContent { index: usize, content: u32 },
    #[error("content `{name}` has origin pop {pop}, which the topology does not have")]
    UnknownOrigin { name: String, pop: PopId },
    #[error("topology has no links")]
    NoLinks,
    #[error("invalid scheme `{scheme}`: {message}")]
    InvalidScheme { scheme: String, message: String },
    #[error("invalid engine options: {0}")]
    InvalidOptions(String),
    #[error("scheme `{scheme}` plans from prior-day demand but the trace covers only {days} day(s)")]
    InsufficientDays { scheme: String, days: usize },
    #[error("scheme `{scheme}` needs demand for day {day}, past the end of the trace")]
    FutureBeyondTrace { scheme: String, day: usize },
    #[error("transit matrix covers {got} pops, topology has {expected}")]
    TransitShape { expected: usize, got: usize },
    #[error("storage ratio list must be non-empty, positive and ascending")]
    InvalidRatios,
    #[error("at least one scheme is required")]
    NoSchemes,
    #[error("row {row}: {message}")]
    Report { row: u64, message: String },
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementKind {
    /// Nothing stored outside the origin.
    OriginOnly,
    Lru,
    /// Planned once a day from the previous day's demand.
    Optimized,
    /// Planned from the demand of the day itself.
    Future,
    /// Optimized placement on `1 - reserve` of each budget, LRU on the rest.
    Hybrid { reserve: f64 },
}

impl PlacementKind {
    fn caches(&self) -> bool {
        matches!(self, PlacementKind::Lru | PlacementKind::Hybrid { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingKind {
    InverseCap,
    MinMluPriorDay,
    MinMluFuture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedirectionKind {
    Closest,
    UtilizationAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitMode {
    /// Routing is planned for NCDN traffic alone; transit rides on it.
    Separate,
    /// Min-MLU routing is planned for NCDN plus transit traffic together.
    Joint,
}

/// Constant background traffic carried in every interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    pub matrix: TrafficMatrix,
    pub mode: TransitMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub name: String,
    pub placement: PlacementKind,
    pub routing: RoutingKind,
    pub redirection: RedirectionKind,
    /// `None` keeps objects whole.
    pub chunk_size: Option<u64>,
    /// Total storage over catalog bytes, split evenly across PoPs.
    pub storage_ratio: f64,
    pub transit: Option<Transit>,
}

impl SchemeSpec {
    pub fn new(name: impl Into<String>, placement: PlacementKind, routing: RoutingKind) -> Self {
        SchemeSpec {
            name: name.into(),
            placement,
            routing,
            redirection: RedirectionKind::Closest,
            chunk_size: None,
            storage_ratio: 1.0,
            transit: None,
        }
    }

    pub fn with_ratio(&self, storage_ratio: f64) -> Self {
        SchemeSpec { storage_ratio, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidScheme { scheme: self.name.clone(), message: m.to_string() });
        if self.name.is_empty() || self.name.contains([',', '\n', '"']) {
            return bad("name must be non-empty and free of commas, quotes and newlines");
        }
        if !(self.storage_ratio > 0.0 && self.storage_ratio.is_finite()) {
            return bad("storage_ratio must be positive");
        }
        if let PlacementKind::Hybrid { reserve } = self.placement {
            if !(0.0..=1.0).contains(&reserve) {
                return bad("hybrid reserve must lie in [0, 1]");
            }
        }
        if self.chunk_size == Some(0) {
            return bad("chunk_size must be positive");
        }
        Ok(())
    }

    /// Whether any part of the scheme plans from the previous day.
    fn uses_prior_day(&self) -> bool {
        matches!(self.placement, PlacementKind::Optimized | PlacementKind::Hybrid { .. })
            || self.routing == RoutingKind::MinMluPriorDay
    }

    fn uses_future(&self) -> bool {
        self.placement == PlacementKind::Future || self.routing == RoutingKind::MinMluFuture
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub interval_s: f64,
    /// Epoch length.
    pub day_s: f64,
    /// Days to simulate; defaults to the days the trace touches.
    pub days: Option<usize>,
    pub plan: PlanOptions,
    /// Keep every interval's traffic matrix in the report.
    pub record_matrices: bool,
    /// Keep the text of the first program the run solves.
    pub capture_lp: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            interval_s: 300.0,
            day_s: 86_400.0,
            days: None,
            plan: PlanOptions::default(),
            record_matrices: false,
            capture_lp: false,
        }
    }
}

impl EngineOptions {
    fn validate(&self) -> Result<(), EngineError> {
        if !(self.interval_s > 0.0 && self.interval_s.is_finite()) {
            return Err(EngineError::InvalidOptions("interval_s must be positive".into()));
        }
        if !(self.day_s >= self.interval_s && self.day_s.is_finite()) {
            return Err(EngineError::InvalidOptions("day_s must be at least interval_s".into()));
        }
        if self.days == Some(0) {
            return Err(EngineError::InvalidOptions("days must be at least 1".into()));
        }
        Ok(())
    }

    /// Days the trace touches.
    pub fn trace_days(&self, trace: &Trace) -> usize {
        if trace.is_empty() {
            1
        } else {
            (trace.end_time() / self.day_s).floor() as usize + 1
        }
    }
}

/// Checks that every request and origin refers to known pops and content.
pub fn check_inputs(topo: &Topology, catalog: &Catalog, trace: &Trace) -> Result<(), EngineError> {
    if topo.link_count() == 0 {
        return Err(EngineError::NoLinks);
    }
    for o in catalog.objects() {
        if !topo.contains(o.origin) {
            return Err(EngineError::UnknownOrigin { name: o.name.clone(), pop: o.origin });
        }
    }
    for (index, r) in trace.requests().iter().enumerate() {
        if !topo.contains(r.pop) {
            return Err(EngineError::UnknownRequestPop { index, pop: r.pop });
        }
        if r.content.index() >= catalog.len() {
            return Err(EngineError::UnknownContent { index, content: r.content.0 });
        }
    }
    Ok(())
}

/// Per-PoP storage for `ratio`: an even share of `ratio` times the catalog.
pub fn uniform_budgets(topo: &Topology, catalog: &ChunkedCatalog, ratio: f64) -> Vec<u64> {
    let n = topo.pop_count();
    vec![(ratio * catalog.total_bytes() as f64 / n as f64).floor() as u64; n]
}

/// Runs one scheme over the trace.
pub fn run_experiment(
    topo: &Topology,
    catalog: &Catalog,
    trace: &Trace,
    scheme: &SchemeSpec,
    opts: &EngineOptions,
) -> Result<MluReport, EngineError> {
    run_experiment_with(topo, catalog, trace, scheme, opts, &mut |_| {})
}

/// [`run_experiment`] that also reports every redirection decision.
pub fn run_experiment_with(
    topo: &Topology,
    catalog: &Catalog,
    trace: &Trace,
    scheme: &SchemeSpec,
    opts: &EngineOptions,
    observer: &mut dyn FnMut(&DecisionRecord),
) -> Result<MluReport, EngineError> {
    scheme.validate()?;
    opts.validate()?;
    check_inputs(topo, catalog, trace)?;
    if let Some(t) = &scheme.transit {
        if t.matrix.pop_count() != topo.pop_count() {
            return Err(EngineError::TransitShape { expected: topo.pop_count(), got: t.matrix.pop_count() });
        }
    }
    let trace_days = opts.trace_days(trace);
    let days = opts.days.unwrap_or(trace_days);
    if scheme.uses_prior_day() && days < 2 {
        return Err(EngineError::InsufficientDays { scheme: scheme.name.clone(), days });
    }
    if scheme.uses_future() && days > trace_days {
        return Err(EngineError::FutureBeyondTrace { scheme: scheme.name.clone(), day: trace_days });
    }

    let cc = ChunkedCatalog::new(catalog.clone(), scheme.chunk_size);
    let mut sim = Sim::new(topo, &cc, trace, scheme, opts)?;
    let mut report = MluReport { scheme: scheme.name.clone(), ..Default::default() };
    for day in 0..days {
        sim.run_day(day, &mut report, observer)?;
    }
    Ok(report)
}

struct Sim<'a> {
    topo: &'a Topology,
    cc: &'a ChunkedCatalog,
    trace: &'a Trace,
    scheme: &'a SchemeSpec,
    opts: &'a EngineOptions,
    dist: DistanceTable,
    inverse_cap: RoutingSolution,
    planned_budgets: Vec<u64>,
    caches: Vec<CacheState>,
    /// Day-average rates actually served on the previous day.
    prior_realized: Option<TrafficMatrix>,
}

/// What one day's replay produced.
struct DayOutcome {
    mlus: Vec<f64>,
    starts: Vec<f64>,
    matrices: Vec<TrafficMatrix>,
    realized: TrafficMatrix,
    bytes: ByteCounts,
}

impl<'a> Sim<'a> {
    fn new(
        topo: &'a Topology,
        cc: &'a ChunkedCatalog,
        trace: &'a Trace,
        scheme: &'a SchemeSpec,
        opts: &'a EngineOptions,
    ) -> Result<Self, EngineError> {
        let n = topo.pop_count();
        let budgets = uniform_budgets(topo, cc, scheme.storage_ratio);
        let (planned_budgets, cache_budgets) = match scheme.placement {
            PlacementKind::OriginOnly => (vec![0; n], vec![0; n]),
            PlacementKind::Lru => (vec![0; n], budgets.clone()),
            PlacementKind::Optimized | PlacementKind::Future => (budgets.clone(), vec![0; n]),
            PlacementKind::Hybrid { reserve } => split_hybrid(&budgets, reserve),
        };
        let caches = if scheme.placement.caches() {
            topo.pop_ids().map(|p| CacheState::new(p, cache_budgets[p.index()])).collect()
        } else {
            Vec::new()
        };
        Ok(Sim {
            topo,
            cc,
            trace,
            scheme,
            opts,
            dist: DistanceTable::new(topo, &inverse_cap_weights(topo)),
            inverse_cap: inverse_cap_routing(topo)?,
            planned_budgets,
            caches,
            prior_realized: None,
        })
    }

    fn demand(&self, day: usize) -> DemandMatrix {
        let start = day as f64 * self.opts.day_s;
        aggregate_demand(self.trace, start, start + self.opts.day_s, self.cc)
    }

    fn run_day(&mut self, day: usize, report: &mut MluReport, observer: &mut dyn FnMut(&DecisionRecord)) -> Result<(), EngineError> {
        // Day 0 is warm-up for every demand-aware part: no planned store and
        // InverseCap routing.
        let planned = if day == 0 {
            None
        } else {
            match self.scheme.placement {
                PlacementKind::Optimized | PlacementKind::Hybrid { .. } => {
                    let dm = self.demand(day - 1);
                    self.capture_joint(report, &dm);
                    Some((day - 1, plan_placement_optimized(&dm, self.topo, self.cc, &self.planned_budgets, day, &self.opts.plan)?))
                }
                PlacementKind::Future => {
                    let dm = self.demand(day);
                    self.capture_joint(report, &dm);
                    Some((day, plan_placement_future(&dm, self.topo, self.cc, &self.planned_budgets, day, &self.opts.plan)?))
                }
                PlacementKind::OriginOnly | PlacementKind::Lru => None,
            }
        };
        let placement = planned.as_ref().map(|(_, p)| p.placement.clone());
        let routing = self.epoch_routing(day, planned.as_ref(), placement.as_ref(), report)?;

        let outcome = self.replay(day, placement.as_ref(), &routing, true, observer)?;
        for (&start, &m) in outcome.starts.iter().zip(&outcome.mlus) {
            report.intervals.push(IntervalStats { day, start, mlu: m });
        }
        report.days.push(report::day_stats(day, &outcome.mlus, outcome.bytes));
        if self.opts.record_matrices {
            report.matrices.extend(outcome.matrices);
        }
        if let Some(p) = placement {
            report.placements.push(p);
        }
        self.prior_realized = Some(outcome.realized);
        Ok(())
    }

    fn capture_joint(&self, report: &mut MluReport, dm: &DemandMatrix) {
        if self.opts.capture_lp && report.lp_text.is_none() && !dm.is_empty() {
            let prog = build_joint_lp(self.topo, dm, &self.planned_budgets, self.cc, &self.opts.plan.joint);
            report.lp_text = Some(prog.lp.to_lp_format());
        }
    }

    fn epoch_routing(
        &mut self,
        day: usize,
        planned: Option<&(usize, PlannedPlacement)>,
        placement: Option<&Placement>,
        report: &mut MluReport,
    ) -> Result<RoutingSolution, EngineError> {
        let source_day = match self.scheme.routing {
            RoutingKind::InverseCap => return Ok(self.inverse_cap.clone()),
            _ if day == 0 => return Ok(self.inverse_cap.clone()),
            RoutingKind::MinMluPriorDay => day - 1,
            RoutingKind::MinMluFuture => day,
        };
        let joint_transit = self.scheme.transit.as_ref().filter(|t| t.mode == TransitMode::Joint);

        let tm = if self.scheme.placement.caches() {
            // Cache contents evolve with the requests, so plan on served traffic.
            if source_day < day {
                self.prior_realized.clone().expect("previous day was replayed")
            } else {
                let saved = self.caches.clone();
                let dry = self.replay(day, placement, &self.inverse_cap.clone(), false, &mut |_| {})?;
                self.caches = saved;
                dry.realized
            }
        } else {
            match planned {
                // The planner already solved min-MLU for this exact matrix.
                Some((d, p)) if *d == source_day && joint_transit.is_none() => {
                    self.capture_min_mlu(report, &p.induced);
                    return Ok(p.routing.clone());
                }
                _ => {
                    let dm = self.demand(source_day);
                    let empty = Placement::empty(day, self.topo.pop_count(), 0.0);
                    crate::placement::induced_matrix(&dm, self.topo, self.cc, &self.dist, placement.unwrap_or(&empty))
                }
            }
        };
        let tm = match joint_transit {
            Some(t) => tm.plus(&t.matrix),
            None => tm,
        };
        self.capture_min_mlu(report, &tm);
        Ok(solve_min_mlu_routing(self.topo, &tm, &self.opts.plan.solver)?.routing)
    }

    fn capture_min_mlu(&self, report: &mut MluReport, tm: &TrafficMatrix) {
        if self.opts.capture_lp && report.lp_text.is_none() && !tm.is_zero() {
            report.lp_text = Some(build_min_mlu_lp(self.topo, tm).lp.to_lp_format());
        }
    }

    fn transit_loads(&self, routing: &RoutingSolution) -> Result<LinkLoads, EngineError> {
        let zero = LinkLoads::zeros(self.topo);
        Ok(match &self.scheme.transit {
            Some(t) => overlay_transit(&zero, &t.matrix, routing)?,
            None => zero,
        })
    }

    /// Replays one day under a fixed placement and routing. Caches are
    /// updated in place.
    fn replay(
        &mut self,
        day: usize,
        planned: Option<&Placement>,
        routing: &RoutingSolution,
        keep_matrices: bool,
        observer: &mut dyn FnMut(&DecisionRecord),
    ) -> Result<DayOutcome, EngineError> {
        let n = self.topo.pop_count();
        let day_start = day as f64 * self.opts.day_s;
        let day_end = day_start + self.opts.day_s;
        let steps = (self.opts.day_s / self.opts.interval_s).ceil() as usize;
        let base = self.transit_loads(routing)?;

        let mut out = DayOutcome {
            mlus: Vec::with_capacity(steps),
            starts: Vec::with_capacity(steps),
            matrices: Vec::new(),
            realized: TrafficMatrix::zeros(n),
            bytes: ByteCounts::default(),
        };
        let mut day_bits = TrafficMatrix::zeros(n);
        let mut tm = TrafficMatrix::zeros(n);
        for k in 0..steps {
            let start = day_start + k as f64 * self.opts.interval_s;
            let end = (start + self.opts.interval_s).min(day_end);
            let len = end - start;
            tm.clear();
            let mut live = base.clone();
            for r in self.trace.window(start, end) {
                for (chunk, bytes) in self.cc.expand_request(r.content, r.bytes) {
                    let ctx = RequestCtx { chunk, client: r.pop, origin: self.cc.origin(chunk) };
                    let rate = bytes as f64 * 8.0 / len;
                    let d = self.serve(&ctx, planned, routing, &live, rate);
                    out.bytes.total += bytes;
                    match d.reason {
                        RedirectReason::LocalHit => out.bytes.local += bytes,
                        RedirectReason::RemoteReplica => out.bytes.remote += bytes,
                        RedirectReason::Origin => out.bytes.origin += bytes,
                    }
                    if d.is_remote(ctx.client) {
                        tm.add(d.server, ctx.client, rate);
                        day_bits.add(d.server, ctx.client, bytes as f64 * 8.0);
                        for &(l, f) in routing.fractions(d.server, ctx.client) {
                            live.load[l.index()] += f * rate;
                        }
                    }
                    observer(&DecisionRecord { timestamp: r.timestamp, client: ctx.client, chunk, decision: d });
                }
            }
            let loads = apply_routing(self.topo, routing, &tm)?;
            let loads = match &self.scheme.transit {
                Some(t) => overlay_transit(&loads, &t.matrix, routing)?,
                None => loads,
            };
            out.mlus.push(mlu(&loads, self.topo));
            out.starts.push(start);
            if keep_matrices && self.opts.record_matrices {
                out.matrices.push(tm.clone());
            }
        }
        out.realized = day_bits.scaled(1.0 / self.opts.day_s);
        Ok(out)
    }

    /// Serves one chunk request: local cache first, then the planned store,
    /// then redirection. On a miss the client's cache admits the chunk.
    fn serve(
        &mut self,
        ctx: &RequestCtx,
        planned: Option<&Placement>,
        routing: &RoutingSolution,
        live: &LinkLoads,
        rate: f64,
    ) -> RedirectDecision {
        let client = ctx.client;
        if client == ctx.origin {
            return RedirectDecision { server: client, reason: RedirectReason::Origin };
        }
        let caching = !self.caches.is_empty();
        if caching && self.caches[client.index()].contains(ctx.chunk) {
            self.caches[client.index()].access(ctx.chunk, self.cc.chunk_bytes(ctx.chunk));
            return RedirectDecision { server: client, reason: RedirectReason::LocalHit };
        }
        if planned.is_some_and(|p| p.holds(client, ctx.chunk)) {
            return RedirectDecision { server: client, reason: RedirectReason::LocalHit };
        }
        let view = PlacementView { planned, caches: &self.caches };
        let d = match self.scheme.redirection {
            RedirectionKind::Closest => redirect_closest(self.topo, &self.dist, &view, ctx),
            RedirectionKind::UtilizationAware => {
                redirect_utilization_aware(self.topo, &self.dist, &view, ctx, live, routing, rate)
            }
        };
        if caching {
            self.caches[client.index()].access(ctx.chunk, self.cc.chunk_bytes(ctx.chunk));
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::parse_topology;
    use crate::workload::{ContentId, Request};

    const DAY: f64 = 3600.0;

    fn opts() -> EngineOptions {
        EngineOptions { interval_s: 600.0, day_s: DAY, record_matrices: true, ..Default::default() }
    }

    /// Origin 0 in a triangle with a spur to pop 3.
    fn topo() -> Topology {
        parse_topology("pop 0 O\npop 1 A\npop 2 B\npop 3 C\nlink 0 1 10\nlink 1 2 10\nlink 2 0 10\nlink 2 3 5\norigin 0\n").unwrap()
    }

    fn catalog() -> Catalog {
        Catalog::new((0..4).map(|i| (format!("o{i}"), 1_000_000 * (i + 1), PopId(0))).collect())
    }

    /// The same request pattern repeated every day.
    fn stationary(days: usize) -> Trace {
        let mut reqs = Vec::new();
        for d in 0..days {
            for k in 0..24u32 {
                let content = ContentId(k % 3 + u32::from(k % 7 == 0));
                reqs.push(Request {
                    timestamp: d as f64 * DAY + 100.0 + 140.0 * k as f64,
                    pop: PopId(1 + k % 3),
                    content,
                    bytes: 1_000_000 * (content.0 as u64 + 1),
                });
            }
        }
        Trace::new(reqs)
    }

    fn run(scheme: &SchemeSpec, trace: &Trace) -> MluReport {
        run_experiment(&topo(), &catalog(), trace, scheme, &opts()).unwrap()
    }

    #[test]
    fn bytes_are_conserved_per_interval() {
        let trace = stationary(3);
        for placement in [PlacementKind::Lru, PlacementKind::Optimized, PlacementKind::Hybrid { reserve: 0.5 }] {
            let mut scheme = SchemeSpec::new("s", placement, RoutingKind::MinMluPriorDay);
            scheme.storage_ratio = 0.5;
            scheme.chunk_size = Some(700_000);
            let mut remote_bits = vec![0.0; 18];
            let cc = ChunkedCatalog::new(catalog(), scheme.chunk_size);
            let mut observer = |r: &DecisionRecord| {
                if r.decision.is_remote(r.client) {
                    let k = (r.timestamp / 600.0) as usize;
                    remote_bits[k] += 8.0 * cc.chunk_bytes(r.chunk) as f64;
                }
            };
            let rep = run_experiment_with(&topo(), &catalog(), &trace, &scheme, &opts(), &mut observer).unwrap();
            assert_eq!(rep.matrices.len(), 18);
            for (tm, bits) in rep.matrices.iter().zip(&remote_bits) {
                let got = tm.total() * 600.0;
                assert!((got - bits).abs() <= 1e-6 * bits.max(1.0), "{got} vs {bits}");
            }
            let b = rep.bytes();
            assert_eq!(b.local + b.remote + b.origin, b.total);
            assert_eq!(b.total, 3 * trace.requests().iter().take(24).map(|r| r.bytes).sum::<u64>());
            assert!((rep.hit_ratio() + rep.origin_fraction() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_mlu_matches_recomputation() {
        let t = topo();
        let mut scheme = SchemeSpec::new("lru", PlacementKind::Lru, RoutingKind::InverseCap);
        scheme.storage_ratio = 0.3;
        let mut transit = TrafficMatrix::zeros(4);
        transit.add(PopId(1), PopId(3), 2e5);
        scheme.transit = Some(Transit { matrix: transit.clone(), mode: TransitMode::Separate });
        let rep = run(&scheme, &stationary(2));
        let routing = inverse_cap_routing(&t).unwrap();
        for (i, tm) in rep.intervals.iter().zip(&rep.matrices) {
            let loads = overlay_transit(&apply_routing(&t, &routing, tm).unwrap(), &transit, &routing).unwrap();
            assert_eq!(i.mlu, mlu(&loads, &t));
        }
        for d in &rep.days {
            let series: Vec<f64> = rep.intervals.iter().filter(|i| i.day == d.day).map(|i| i.mlu).collect();
            let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(lo <= d.p99_mlu && d.p99_mlu <= d.max_mlu);
        }
    }

    #[test]
    fn full_replication_gives_zero_after_warm_up() {
        let mut scheme = SchemeSpec::new("opt", PlacementKind::Optimized, RoutingKind::MinMluPriorDay);
        scheme.storage_ratio = 4.0;
        let rep = run(&scheme, &stationary(3));
        assert!(rep.intervals.iter().any(|i| i.day == 0 && i.mlu > 0.0));
        assert!(rep.intervals.iter().filter(|i| i.day > 0).all(|i| i.mlu == 0.0));
        assert_eq!(rep.mean_daily_p99(), 0.0);
    }

    #[test]
    fn stationary_optimized_matches_future() {
        let trace = stationary(3);
        let mut opt = SchemeSpec::new("x", PlacementKind::Optimized, RoutingKind::MinMluPriorDay);
        opt.storage_ratio = 0.6;
        let mut fut = opt.clone();
        fut.placement = PlacementKind::Future;
        fut.routing = RoutingKind::MinMluFuture;
        let a = run(&opt, &trace);
        let b = run(&fut, &trace);
        assert_eq!(a.intervals, b.intervals);
        assert_eq!(a.days, b.days);
        for (p, q) in a.placements.iter().zip(&b.placements) {
            assert_eq!(p.stored(PopId(1)), q.stored(PopId(1)));
        }
    }

    #[test]
    fn origin_pop_requests_count_as_origin() {
        let trace = Trace::new(vec![Request { timestamp: 1.0, pop: PopId(0), content: ContentId(1), bytes: 5 }]);
        let rep = run(&SchemeSpec::new("o", PlacementKind::OriginOnly, RoutingKind::InverseCap), &trace);
        assert_eq!(rep.bytes(), ByteCounts { total: 5, local: 0, remote: 0, origin: 5 });
        assert!(rep.intervals.iter().all(|i| i.mlu == 0.0));
        assert_eq!(rep.intervals.len(), 6);
    }

    #[test]
    fn validation_errors() {
        let t = topo();
        let c = catalog();
        let one_day = stationary(1);
        let o = opts();
        let opt = SchemeSpec::new("opt", PlacementKind::Optimized, RoutingKind::InverseCap);
        assert!(matches!(run_experiment(&t, &c, &one_day, &opt, &o), Err(EngineError::InsufficientDays { .. })));
        let fut = SchemeSpec::new("fut", PlacementKind::Future, RoutingKind::InverseCap);
        let long = EngineOptions { days: Some(3), ..opts() };
        assert!(matches!(run_experiment(&t, &c, &one_day, &fut, &long), Err(EngineError::FutureBeyondTrace { .. })));
        let bad = Trace::new(vec![Request { timestamp: 0.0, pop: PopId(9), content: ContentId(0), bytes: 1 }]);
        let lru = SchemeSpec::new("lru", PlacementKind::Lru, RoutingKind::InverseCap);
        assert!(matches!(run_experiment(&t, &c, &bad, &lru, &o), Err(EngineError::UnknownRequestPop { index: 0, .. })));
        let bad = Trace::new(vec![Request { timestamp: 0.0, pop: PopId(1), content: ContentId(7), bytes: 1 }]);
        assert!(matches!(run_experiment(&t, &c, &bad, &lru, &o), Err(EngineError::UnknownContent { .. })));
        let single = parse_topology("pop 0 O\norigin 0\n").unwrap();
        assert!(matches!(run_experiment(&single, &c, &one_day, &lru, &o), Err(EngineError::NoLinks)));
        for s in [lru.with_ratio(0.0), SchemeSpec { placement: PlacementKind::Hybrid { reserve: 1.5 }, ..lru.clone() }] {
            assert!(matches!(run_experiment(&t, &c, &one_day, &s, &o), Err(EngineError::InvalidScheme { .. })));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let trace = stationary(2);
        let mut s = SchemeSpec::new("h", PlacementKind::Hybrid { reserve: 0.3 }, RoutingKind::MinMluPriorDay);
        s.redirection = RedirectionKind::UtilizationAware;
        s.storage_ratio = 0.8;
        let a = run(&s, &trace);
        let b = run(&s, &trace);
        assert_eq!(write_interval_csv(&[a.clone()]), write_interval_csv(&[b.clone()]));
        assert_eq!(write_summary_csv(&[a]), write_summary_csv(&[b]));
    }

    #[test]
    fn comparison_and_sweep() {
        let (t, c, trace) = (topo(), catalog(), stationary(2));
        let lru = SchemeSpec::new("lru", PlacementKind::Lru, RoutingKind::InverseCap);
        let opt = SchemeSpec::new("opt", PlacementKind::Optimized, RoutingKind::MinMluPriorDay);
        let one = compare_schemes(&t, &c, &trace, &[lru.clone()], &opts(), 1).unwrap();
        let csv = write_comparison_csv(&one);
        assert!(csv.starts_with("day,lru,lru_ratio\n"));
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",1")));
        let both = compare_schemes(&t, &c, &trace, &[lru.clone(), opt.clone(), lru.clone()], &opts(), 3).unwrap();
        assert_eq!(both.reports[0].intervals, both.reports[2].intervals);
        assert!(compare_schemes(&t, &c, &trace, &[], &opts(), 1).is_err());

        let sweep = sweep_storage_ratio(&t, &c, &trace, &[lru.clone(), opt.clone()], &[0.5, 4.0], &opts(), 2).unwrap();
        assert_eq!(sweep.rows.len(), 4);
        assert_eq!(sweep.series("opt")[1], (4.0, 0.0));
        assert!(write_sweep_csv(&sweep).starts_with("storage_ratio,scheme,mean_p99_mlu\n0.5,lru,"));
        for bad in [&[][..], &[1.0, 0.5][..], &[0.0][..]] {
            assert!(matches!(sweep_storage_ratio(&t, &c, &trace, &[lru.clone()], bad, &opts(), 1), Err(EngineError::InvalidRatios)));
        }
    }
}
