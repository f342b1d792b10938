//! `ncdn`: runs network-CDN experiments from a config file.
//!
//! Exit codes: 0 on success, 1 for invalid input or config, 2 when a run
//! fails (solver trouble, unwritable output).

mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use ncdn_core::engine::{
    check_ratios, compare_schemes, run_experiment_with, summarize_interval_csv, sweep_storage_ratio, uniform_budgets, write_comparison_csv,
    write_interval_csv, write_mlu_summary, write_summary_csv, write_sweep_csv, Comparison, EngineError, EngineOptions, MluReport,
    SchemeSpec, Sweep, SweepRow,
};
use ncdn_core::lp::{build_joint_lp, build_min_mlu_lp};
use ncdn_core::placement::{plan_placement_optimized, write_placements};
use ncdn_core::redirection::DecisionLog;
use ncdn_core::routing::{parse_traffic_matrix, solve_min_mlu_routing, RoutingSolution};
use ncdn_core::topology::{parse_topology, Topology};
use ncdn_core::workload::{aggregate_demand, write_catalog, write_trace, ChunkedCatalog};

#[derive(Parser)]
#[command(name = "ncdn", version, about = "Network CDN placement, redirection and routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trace and catalog (and the topology) from `[synth]`.
    GenTrace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every configured scheme, or sweep them over `storage_ratios`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scheme runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the first program each scheme solves as `<scheme>.lp`.
        #[arg(long)]
        dump_lp: bool,
        /// Write every redirection as `decisions_<scheme>.csv` (runs sequentially).
        #[arg(long)]
        decision_log: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Min-MLU routing for one traffic matrix (`src_pop,dst_pop,rate_mbps`).
    SolveRouting {
        topology: PathBuf,
        matrix: PathBuf,
        /// Directory for `routing.lp` when `--dump-lp` is given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_lp: bool,
    },
    /// Plan one day's placement from the previous day's demand and dump it.
    SolvePlacement {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scheme supplying chunk size and storage ratio; the first by default.
        #[arg(long)]
        scheme: Option<String>,
        /// Day whose demand is planned from.
        #[arg(long, default_value_t = 0)]
        day: usize,
        #[arg(long)]
        dump_lp: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute per-day MLU statistics from an interval report CSV.
    Report {
        input: PathBuf,
        /// Directory for `mlu_summary.csv`; standard output otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult<T> = Result<T, Failure>;

trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn runtime(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn runtime(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn engine_failure(e: EngineError) -> Failure {
    match e {
        EngineError::Placement(_) | EngineError::Routing(_) => Failure::Runtime(e.into()),
        _ => Failure::Invalid(e.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTrace { config, out, seed } => gen_trace(&config, out, seed),
        Command::Simulate { config, out, jobs, dump_lp, decision_log, seed } => {
            simulate(&config, out, jobs, dump_lp, decision_log, seed)
        }
        Command::SolveRouting { topology, matrix, out, dump_lp } => solve_routing(&topology, &matrix, out, dump_lp),
        Command::SolvePlacement { config, out, scheme, day, dump_lp, seed } => {
            solve_placement(&config, out, scheme, day, dump_lp, seed)
        }
        Command::Report { input, out } => report(&input, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> CmdResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).invalid()?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> CmdResult<PathBuf> {
    let dir = flag.or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display())).runtime()?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CmdResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display())).runtime()
}

fn gen_trace(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> CmdResult<()> {
    let cfg = load_config(config, seed)?;
    if cfg.synth.is_none() {
        return Err(Failure::Invalid(anyhow!("gen-trace needs a [synth] block")));
    }
    let inputs = cfg.load_inputs().invalid()?;
    let dir = out_dir(out, Some(&cfg))?;
    write_file(&dir, "config.toml", &cfg.to_toml().runtime()?)?;
    write_file(&dir, "topology.txt", &inputs.topology.to_text())?;
    write_file(&dir, "catalog.csv", &write_catalog(&inputs.catalog))?;
    write_file(&dir, "trace.csv", &write_trace(&inputs.catalog, &inputs.trace))?;
    println!("wrote {} requests over {} objects to {}", inputs.trace.len(), inputs.catalog.len(), dir.display());
    Ok(())
}

fn simulate(config: &Path, out: Option<PathBuf>, jobs: usize, dump_lp: bool, decision_log: bool, seed: Option<u64>) -> CmdResult<()> {
    let cfg = load_config(config, seed)?;
    let inputs = cfg.load_inputs().invalid()?;
    let schemes = cfg.scheme_specs(&inputs.topology).invalid()?;
    let mut opts = cfg.engine_options();
    opts.capture_lp = dump_lp;
    let dir = out_dir(out, Some(&cfg))?;
    write_file(&dir, "config.toml", &cfg.to_toml().runtime()?)?;

    let (topo, catalog, trace) = (&inputs.topology, &inputs.catalog, &inputs.trace);
    let mut reports = match &cfg.storage_ratios {
        None => {
            let cmp = if decision_log {
                let reports = schemes
                    .iter()
                    .map(|s| logged_run(&inputs, s, &opts, &dir, &s.name))
                    .collect::<CmdResult<Vec<_>>>()?;
                Comparison { reports }
            } else {
                compare_schemes(topo, catalog, trace, &schemes, &opts, jobs).map_err(engine_failure)?
            };
            write_file(&dir, "comparison.csv", &write_comparison_csv(&cmp))?;
            cmp.reports
        }
        Some(ratios) => {
            let sweep = if decision_log {
                check_ratios(ratios).map_err(engine_failure)?;
                let mut rows = Vec::new();
                for &r in ratios {
                    for s in &schemes {
                        let spec = s.with_ratio(r);
                        let report = logged_run(&inputs, &spec, &opts, &dir, &format!("{}@{r}", s.name))?;
                        rows.push(SweepRow { storage_ratio: r, scheme: s.name.clone(), mean_daily_p99: report.mean_daily_p99(), report });
                    }
                }
                Sweep { rows }
            } else {
                sweep_storage_ratio(topo, catalog, trace, &schemes, ratios, &opts, jobs).map_err(engine_failure)?
            };
            write_file(&dir, "sweep.csv", &write_sweep_csv(&sweep))?;
            sweep
                .rows
                .into_iter()
                .map(|row| MluReport { scheme: format!("{}@{}", row.scheme, row.storage_ratio), ..row.report })
                .collect()
        }
    };
    write_file(&dir, "report.csv", &write_interval_csv(&reports))?;
    write_file(&dir, "summary.csv", &write_summary_csv(&reports))?;
    if dump_lp {
        for r in &mut reports {
            if let Some(text) = r.lp_text.take() {
                write_file(&dir, &format!("{}.lp", r.scheme), &text)?;
            }
        }
    }
    for r in &reports {
        println!("{}: mean daily p99 MLU {:.6}, hit ratio {:.4}", r.scheme, r.mean_daily_p99(), r.hit_ratio());
    }
    Ok(())
}

/// One run with its decisions streamed to `decisions_<label>.csv`.
fn logged_run(inputs: &config::Inputs, spec: &SchemeSpec, opts: &EngineOptions, dir: &Path, label: &str) -> CmdResult<MluReport> {
    let path = dir.join(format!("decisions_{label}.csv"));
    let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display())).runtime()?;
    let mut log = DecisionLog::new(BufWriter::new(file)).runtime()?;
    let cc = ChunkedCatalog::new(inputs.catalog.clone(), spec.chunk_size);
    let mut io_error = None;
    let report = run_experiment_with(&inputs.topology, &inputs.catalog, &inputs.trace, spec, opts, &mut |rec| {
        if io_error.is_none() {
            if let Err(e) = log.record(rec, &cc) {
                io_error = Some(e);
            }
        }
    })
    .map_err(engine_failure)?;
    if let Some(e) = io_error {
        return Err(Failure::Runtime(anyhow!(e).context(format!("cannot write {}", path.display()))));
    }
    log.into_inner().flush().with_context(|| format!("cannot write {}", path.display())).runtime()?;
    Ok(report)
}

fn routing_csv(topo: &Topology, routing: &RoutingSolution) -> String {
    let mut out = String::from("src_pop,dst_pop,link_src,link_dst,fraction\n");
    for s in topo.pop_ids() {
        for t in topo.pop_ids() {
            for &(l, f) in routing.fractions(s, t) {
                let link = topo.link(l);
                out.push_str(&format!("{s},{t},{},{},{f}\n", link.src, link.dst));
            }
        }
    }
    out
}

fn solve_routing(topology: &Path, matrix: &Path, out: Option<PathBuf>, dump_lp: bool) -> CmdResult<()> {
    let text = fs::read_to_string(topology).with_context(|| format!("cannot read topology {}", topology.display())).invalid()?;
    let topo = parse_topology(&text).with_context(|| format!("invalid topology {}", topology.display())).invalid()?;
    let text = fs::read_to_string(matrix).with_context(|| format!("cannot read traffic matrix {}", matrix.display())).invalid()?;
    let tm = parse_traffic_matrix(&text, &topo).with_context(|| format!("invalid traffic matrix {}", matrix.display())).invalid()?;
    let solved = solve_min_mlu_routing(&topo, &tm, &Default::default()).runtime()?;
    if dump_lp {
        let dir = out_dir(out, None)?;
        write_file(&dir, "routing.lp", &build_min_mlu_lp(&topo, &tm).lp.to_lp_format())?;
    }
    println!("alpha* = {}", solved.alpha);
    print!("{}", routing_csv(&topo, &solved.routing));
    Ok(())
}

fn solve_placement(
    config: &Path,
    out: Option<PathBuf>,
    scheme: Option<String>,
    day: usize,
    dump_lp: bool,
    seed: Option<u64>,
) -> CmdResult<()> {
    let cfg = load_config(config, seed)?;
    let inputs = cfg.load_inputs().invalid()?;
    let specs = cfg.scheme_specs(&inputs.topology).invalid()?;
    let spec = match &scheme {
        Some(name) => specs.iter().find(|s| &s.name == name).ok_or_else(|| Failure::Invalid(anyhow!("no scheme named `{name}`")))?,
        None => &specs[0],
    };
    let topo = &inputs.topology;
    let cc = ChunkedCatalog::new(inputs.catalog.clone(), spec.chunk_size);
    let budgets = uniform_budgets(topo, &cc, spec.storage_ratio);
    let start = day as f64 * cfg.day_s;
    let dm = aggregate_demand(&inputs.trace, start, start + cfg.day_s, &cc);
    let planned = plan_placement_optimized(&dm, topo, &cc, &budgets, day + 1, &cfg.plan).runtime()?;
    let dir = out_dir(out, Some(&cfg))?;
    write_file(&dir, "config.toml", &cfg.to_toml().runtime()?)?;
    write_file(&dir, "placement.csv", &write_placements(std::slice::from_ref(&planned.placement), &cc))?;
    write_file(&dir, "routing.csv", &routing_csv(topo, &planned.routing))?;
    if dump_lp {
        write_file(&dir, "joint.lp", &build_joint_lp(topo, &dm, &budgets, &cc, &cfg.plan.joint).lp.to_lp_format())?;
    }
    println!("relaxation alpha* = {}", planned.lp_alpha);
    println!("rounded placement alpha = {}", planned.routing_alpha);
    Ok(())
}

fn report(input: &Path, out: Option<PathBuf>) -> CmdResult<()> {
    let text = fs::read_to_string(input).with_context(|| format!("cannot read {}", input.display())).invalid()?;
    let rows = summarize_interval_csv(&text).with_context(|| format!("invalid report {}", input.display())).invalid()?;
    let csv = write_mlu_summary(&rows);
    match out {
        Some(_) => {
            let dir = out_dir(out, None)?;
            write_file(&dir, "mlu_summary.csv", &csv)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
