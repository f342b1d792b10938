use std::fmt::Write;

use rayon::prelude::*;

use super::{run_experiment, EngineError, EngineOptions, MluReport, SchemeSpec};
use crate::topology::Topology;
use crate::workload::{Catalog, Trace};

/// Reports for several schemes run on the same trace, in input order.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub reports: Vec<MluReport>,
}

impl Comparison {
    /// Per-day p99 of scheme `k` over the first scheme's. Two zeros compare
    /// as 1.
    pub fn ratio(&self, k: usize, day: usize) -> f64 {
        let a = self.reports[k].days[day].p99_mlu;
        let b = self.reports[0].days[day].p99_mlu;
        if a == b {
            1.0
        } else {
            a / b
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub storage_ratio: f64,
    pub scheme: String,
    pub mean_daily_p99: f64,
    pub report: MluReport,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    /// `(ratio, mean daily p99)` for one scheme, ratios ascending.
    pub fn series(&self, scheme: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.scheme == scheme).map(|r| (r.storage_ratio, r.mean_daily_p99)).collect()
    }
}

/// Runs `jobs` runs at a time (at least one), keeping input order.
fn run_all(
    topo: &Topology,
    catalog: &Catalog,
    trace: &Trace,
    schemes: &[SchemeSpec],
    opts: &EngineOptions,
    jobs: usize,
) -> Result<Vec<MluReport>, EngineError> {
    for s in schemes {
        s.validate()?;
    }
    if jobs <= 1 {
        return schemes.iter().map(|s| run_experiment(topo, catalog, trace, s, opts)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| schemes.par_iter().map(|s| run_experiment(topo, catalog, trace, s, opts)).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

pub fn compare_schemes(
    topo: &Topology,
    catalog: &Catalog,
    trace: &Trace,
    schemes: &[SchemeSpec],
    opts: &EngineOptions,
    jobs: usize,
) -> Result<Comparison, EngineError> {
    if schemes.is_empty() {
        return Err(EngineError::NoSchemes);
    }
    Ok(Comparison { reports: run_all(topo, catalog, trace, schemes, opts, jobs)? })
}

/// Ratios must be non-empty, positive, finite and strictly ascending.
pub fn check_ratios(ratios: &[f64]) -> Result<(), EngineError> {
    let ascending = ratios.windows(2).all(|w| w[0] < w[1]);
    if ratios.is_empty() || !ascending || ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(EngineError::InvalidRatios);
    }
    Ok(())
}

/// Runs every template at every ratio. Rows are ordered by ratio, then by
/// template.
pub fn sweep_storage_ratio(
    topo: &Topology,
    catalog: &Catalog,
    trace: &Trace,
    templates: &[SchemeSpec],
    ratios: &[f64],
    opts: &EngineOptions,
    jobs: usize,
) -> Result<Sweep, EngineError> {
    if templates.is_empty() {
        return Err(EngineError::NoSchemes);
    }
    check_ratios(ratios)?;
    let runs: Vec<SchemeSpec> = ratios.iter().flat_map(|&r| templates.iter().map(move |t| t.with_ratio(r))).collect();
    let reports = run_all(topo, catalog, trace, &runs, opts, jobs)?;
    let rows = runs
        .into_iter()
        .zip(reports)
        .map(|(s, report)| SweepRow {
            storage_ratio: s.storage_ratio,
            scheme: s.name,
            mean_daily_p99: report.mean_daily_p99(),
            report,
        })
        .collect();
    Ok(Sweep { rows })
}

/// `day,<scheme>...,<scheme>_ratio...` with per-day p99 MLU.
pub fn write_comparison_csv(c: &Comparison) -> String {
    let mut out = String::from("day");
    for r in &c.reports {
        let _ = write!(out, ",{}", r.scheme);
    }
    for r in &c.reports {
        let _ = write!(out, ",{}_ratio", r.scheme);
    }
    out.push('\n');
    let days = c.reports.iter().map(|r| r.days.len()).min().unwrap_or(0);
    for d in 0..days {
        let _ = write!(out, "{d}");
        for r in &c.reports {
            let _ = write!(out, ",{}", r.days[d].p99_mlu);
        }
        for k in 0..c.reports.len() {
            let _ = write!(out, ",{}", c.ratio(k, d));
        }
        out.push('\n');
    }
    out
}

/// `storage_ratio,scheme,mean_p99_mlu`
pub fn write_sweep_csv(s: &Sweep) -> String {
    let mut out = String::from("storage_ratio,scheme,mean_p99_mlu\n");
    for r in &s.rows {
        let _ = writeln!(out, "{},{},{}", r.storage_ratio, r.scheme, r.mean_daily_p99);
    }
    out
}
