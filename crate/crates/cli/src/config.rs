//! Experiment config file (TOML).
//!
//! Relative paths are resolved against the directory holding the config.
//! The top-level `seed` drives both the synthetic workload and the random
//! topology, overriding any `seed` set inside `[synth]`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ncdn_core::engine::{EngineOptions, PlacementKind, RedirectionKind, RoutingKind, SchemeSpec, Transit, TransitMode};
use ncdn_core::placement::PlanOptions;
use ncdn_core::routing::parse_traffic_matrix;
use ncdn_core::topology::{parse_topology, Topology};
use ncdn_core::workload::{
    generate_synthetic_trace, parse_catalog, parse_trace, parse_trace_with_catalog, Catalog, SynthParams, Trace,
};

fn default_seed() -> u64 {
    42
}

fn default_interval() -> f64 {
    300.0
}

fn default_day() -> f64 {
    86_400.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub interval_s: f64,
    #[serde(default = "default_day")]
    pub day_s: f64,
    pub days: Option<usize>,
    /// When present, `simulate` sweeps every scheme over these ratios.
    pub storage_ratios: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub topology: TopologySource,
    pub workload: Option<TraceFiles>,
    pub synth: Option<SynthParams>,
    #[serde(default)]
    pub plan: PlanOptions,
    #[serde(default, rename = "scheme")]
    pub schemes: Vec<SchemeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySource {
    pub path: Option<PathBuf>,
    pub random: Option<RandomTopology>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTopology {
    pub pops: usize,
    #[serde(default = "default_edge_factor")]
    pub edge_factor: f64,
    #[serde(default = "default_capacities")]
    pub capacities_mbps: Vec<u64>,
}

fn default_edge_factor() -> f64 {
    1.6
}

fn default_capacities() -> Vec<u64> {
    vec![2500, 10000]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFiles {
    pub trace: PathBuf,
    /// Without a catalog, sizes are inferred from the trace and every object
    /// originates at the topology's origin.
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementName {
    OriginOnly,
    Lru,
    Optimized,
    Future,
    Hybrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub name: String,
    pub placement: PlacementName,
    pub routing: RoutingKind,
    #[serde(default = "default_redirection")]
    pub redirection: RedirectionKind,
    pub chunk_size: Option<u64>,
    #[serde(default = "default_ratio")]
    pub storage_ratio: f64,
    /// Hybrid only: share of each budget kept as LRU cache.
    pub reserve: Option<f64>,
    pub transit: Option<TransitConfig>,
}

fn default_redirection() -> RedirectionKind {
    RedirectionKind::Closest
}

fn default_ratio() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitConfig {
    /// `src_pop,dst_pop,rate_mbps` matrix.
    pub path: PathBuf,
    #[serde(default = "default_transit_mode")]
    pub mode: TransitMode,
}

fn default_transit_mode() -> TransitMode {
    TransitMode::Separate
}

/// Topology, catalog and trace built from a config.
pub struct Inputs {
    pub topology: Topology,
    pub catalog: Catalog,
    pub trace: Trace,
}

impl ExperimentConfig {
    /// Parses a config file and makes every path in it absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        let base = base.canonicalize().with_context(|| format!("cannot resolve {}", base.display()))?;
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.topology.path.as_mut() {
            abs(p);
        }
        if let Some(w) = cfg.workload.as_mut() {
            abs(&mut w.trace);
            if let Some(c) = w.catalog.as_mut() {
                abs(c);
            }
        }
        if let Some(o) = cfg.out.as_mut() {
            abs(o);
        }
        for s in &mut cfg.schemes {
            if let Some(t) = s.transit.as_mut() {
                abs(&mut t.path);
            }
        }
        if let Some(s) = cfg.synth.as_mut() {
            s.seed = cfg.seed;
        }
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(s) = self.synth.as_mut() {
            s.seed = seed;
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("cannot serialize config")
    }

    pub fn engine_options(&self) -> EngineOptions {
        EngineOptions { interval_s: self.interval_s, day_s: self.day_s, days: self.days, plan: self.plan, ..Default::default() }
    }

    pub fn load_topology(&self) -> Result<Topology> {
        match (&self.topology.path, &self.topology.random) {
            (Some(p), None) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read topology {}", p.display()))?;
                parse_topology(&text).with_context(|| format!("invalid topology {}", p.display()))
            }
            (None, Some(r)) => Topology::random(r.pops, r.edge_factor, &r.capacities_mbps, self.seed).context("cannot build random topology"),
            _ => bail!("[topology] needs exactly one of `path` or `random`"),
        }
    }

    /// Catalog and trace from files or from the synthetic generator.
    pub fn load_workload(&self, topo: &Topology) -> Result<(Catalog, Trace)> {
        match (&self.workload, &self.synth) {
            (Some(w), None) => {
                let text = fs::read_to_string(&w.trace).with_context(|| format!("cannot read trace {}", w.trace.display()))?;
                match &w.catalog {
                    Some(c) => {
                        let ctext = fs::read_to_string(c).with_context(|| format!("cannot read catalog {}", c.display()))?;
                        let catalog = parse_catalog(&ctext, topo).with_context(|| format!("invalid catalog {}", c.display()))?;
                        let trace = parse_trace_with_catalog(&text, topo, &catalog)
                            .with_context(|| format!("invalid trace {}", w.trace.display()))?;
                        Ok((catalog, trace))
                    }
                    None => parse_trace(&text, topo).with_context(|| format!("invalid trace {}", w.trace.display())),
                }
            }
            (None, Some(s)) => {
                let w = generate_synthetic_trace(s, topo).context("invalid [synth] block")?;
                Ok((w.catalog, w.trace))
            }
            _ => bail!("config needs exactly one of [workload] or [synth]"),
        }
    }

    pub fn load_inputs(&self) -> Result<Inputs> {
        let topology = self.load_topology()?;
        let (catalog, trace) = self.load_workload(&topology)?;
        Ok(Inputs { topology, catalog, trace })
    }

    pub fn scheme_specs(&self, topo: &Topology) -> Result<Vec<SchemeSpec>> {
        if self.schemes.is_empty() {
            bail!("config defines no [[scheme]]");
        }
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for s in &self.schemes {
            if !seen.insert(s.name.as_str()) {
                bail!("scheme name `{}` is used twice", s.name);
            }
            out.push(s.to_spec(topo)?);
        }
        Ok(out)
    }
}

impl SchemeConfig {
    pub fn to_spec(&self, topo: &Topology) -> Result<SchemeSpec> {
        let placement = match (self.placement, self.reserve) {
            (PlacementName::Hybrid, Some(reserve)) => PlacementKind::Hybrid { reserve },
            (PlacementName::Hybrid, None) => bail!("scheme `{}`: hybrid placement needs `reserve`", self.name),
            (_, Some(_)) => bail!("scheme `{}`: `reserve` applies only to hybrid placement", self.name),
            (PlacementName::OriginOnly, None) => PlacementKind::OriginOnly,
            (PlacementName::Lru, None) => PlacementKind::Lru,
            (PlacementName::Optimized, None) => PlacementKind::Optimized,
            (PlacementName::Future, None) => PlacementKind::Future,
        };
        let transit = match &self.transit {
            Some(t) => {
                let text = fs::read_to_string(&t.path).with_context(|| format!("cannot read transit matrix {}", t.path.display()))?;
                let matrix = parse_traffic_matrix(&text, topo).with_context(|| format!("invalid transit matrix {}", t.path.display()))?;
                Some(Transit { matrix, mode: t.mode })
            }
            None => None,
        };
        let spec = SchemeSpec {
            name: self.name.clone(),
            placement,
            routing: self.routing,
            redirection: self.redirection,
            chunk_size: self.chunk_size,
            storage_ratio: self.storage_ratio,
            transit,
        };
        spec.validate()?;
        Ok(spec)
    }
}
