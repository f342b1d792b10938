use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Catalog, ContentId, Request, Trace, WorkloadError};
use crate::topology::{PopId, Topology};

/// Knobs for the synthetic Zipf workload with daily popularity churn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Objects ranked on any given day.
    pub catalog_size: usize,
    pub zipf_alpha: f64,
    pub requests_per_day: usize,
    pub days: usize,
    /// Fraction of the top ranks handed to never-seen objects each day.
    pub churn: f64,
    pub size_min: u64,
    pub size_max: u64,
    /// Peak-to-trough ratio of the sinusoidal arrival rate.
    pub diurnal_peak_ratio: f64,
    /// Per-PoP request share; uniform when absent.
    pub pop_weights: Option<Vec<f64>>,
    pub seed: u64,
    pub day_seconds: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            catalog_size: 60,
            zipf_alpha: 0.8,
            requests_per_day: 60_000,
            days: 7,
            churn: 0.2,
            size_min: 20_000_000,
            size_max: 500_000_000,
            diurnal_peak_ratio: 3.0,
            pop_weights: None,
            seed: 42,
            day_seconds: 86_400.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self, pop_count: usize) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::InvalidParams(m.to_string()));
        if self.catalog_size == 0 || self.requests_per_day == 0 || self.days == 0 {
            return bad("catalog_size, requests_per_day and days must be at least 1");
        }
        if !(self.zipf_alpha >= 0.0 && self.zipf_alpha.is_finite()) {
            return bad("zipf_alpha must be a finite value >= 0");
        }
        if !(0.0..=1.0).contains(&self.churn) {
            return bad("churn must lie in [0, 1]");
        }
        if self.size_min == 0 || self.size_min > self.size_max {
            return bad("object sizes need 0 < size_min <= size_max");
        }
        if !(self.diurnal_peak_ratio >= 1.0 && self.diurnal_peak_ratio.is_finite()) {
            return bad("diurnal_peak_ratio must be >= 1");
        }
        if !(self.day_seconds > 0.0 && self.day_seconds.is_finite()) {
            return bad("day_seconds must be positive");
        }
        if let Some(w) = &self.pop_weights {
            if w.len() != pop_count {
                return bad("pop_weights must have one entry per pop");
            }
            if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("pop_weights must be non-negative and sum to 1");
            }
        }
        Ok(())
    }
}

/// Generated workload plus the rank-to-object assignment used on each day.
#[derive(Debug, Clone)]
pub struct SyntheticWorkload {
    pub catalog: Catalog,
    pub trace: Trace,
    /// `rankings[d][r]` is the object holding popularity rank `r` on day `d`.
    pub rankings: Vec<Vec<ContentId>>,
}

fn object_name(i: usize) -> String {
    format!("o{i:07}")
}

/// Deterministic Zipf workload with diurnal arrivals and daily churn. New
/// objects enter at the top ranks, pushing the previous ranking down.
pub fn generate_synthetic_trace(params: &SynthParams, topo: &Topology) -> Result<SyntheticWorkload, WorkloadError> {
    params.validate(topo.pop_count())?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.catalog_size;

    let (ln_min, ln_max) = ((params.size_min as f64).ln(), (params.size_max as f64).ln());
    let mut sizes: Vec<u64> = Vec::new();
    let mut new_object = |rng: &mut ChaCha8Rng| -> usize {
        let s = if params.size_min == params.size_max {
            params.size_min
        } else {
            (rng.gen_range(ln_min..=ln_max)).exp().round() as u64
        };
        sizes.push(s.clamp(params.size_min, params.size_max));
        sizes.len() - 1
    };

    let mut ranking: Vec<usize> = (0..n).map(|_| new_object(&mut rng)).collect();
    ranking.shuffle(&mut rng);

    let zipf = WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(params.zipf_alpha)))
        .map_err(|e| WorkloadError::InvalidParams(e.to_string()))?;
    let uniform = vec![1.0 / topo.pop_count() as f64; topo.pop_count()];
    let pops = WeightedIndex::new(params.pop_weights.as_deref().unwrap_or(&uniform))
        .map_err(|e| WorkloadError::InvalidParams(e.to_string()))?;

    let amp = (params.diurnal_peak_ratio - 1.0) / (params.diurnal_peak_ratio + 1.0);
    let fresh_per_day = (params.churn * n as f64).round() as usize;
    let day = params.day_seconds;

    let mut rankings = Vec::with_capacity(params.days);
    let mut raw: Vec<(f64, PopId, usize)> = Vec::with_capacity(params.requests_per_day * params.days);
    for d in 0..params.days {
        if d > 0 && fresh_per_day > 0 {
            let fresh: Vec<usize> = (0..fresh_per_day).map(|_| new_object(&mut rng)).collect();
            ranking.truncate(n - fresh_per_day);
            ranking.splice(0..0, fresh);
        }
        rankings.push(ranking.iter().map(|&o| ContentId(o as u32)).collect());

        let mut times = Vec::with_capacity(params.requests_per_day);
        while times.len() < params.requests_per_day {
            let t: f64 = rng.gen_range(0.0..day);
            let rate = 1.0 - amp * (std::f64::consts::TAU * t / day).cos();
            if rng.gen::<f64>() * (1.0 + amp) < rate {
                times.push((t * 1000.0).floor() / 1000.0);
            }
        }
        times.sort_by(f64::total_cmp);
        for t in times {
            let obj = ranking[zipf.sample(&mut rng)];
            let pop = PopId(pops.sample(&mut rng) as u32);
            raw.push((d as f64 * day + t, pop, obj));
        }
    }

    let origin = topo.origin();
    let catalog = Catalog::new(sizes.iter().enumerate().map(|(i, &s)| (object_name(i), s, origin)).collect());
    let requests = raw
        .into_iter()
        .map(|(timestamp, pop, obj)| Request { timestamp, pop, content: ContentId(obj as u32), bytes: sizes[obj] })
        .collect();
    Ok(SyntheticWorkload { catalog, trace: Trace::new(requests), rankings })
}
