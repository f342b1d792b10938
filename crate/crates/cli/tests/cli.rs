use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ncdn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncdn")).args(args).current_dir(dir).output().expect("spawn ncdn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

const SMALL: &str = r#"
seed = 7
interval_s = 600.0
days = 2

[topology.random]
pops = 5

[synth]
catalog_size = 12
requests_per_day = 200
days = 2

[[scheme]]
name = "lru"
placement = "lru"
routing = "inverse-cap"
storage_ratio = 0.5

[[scheme]]
name = "opt"
placement = "optimized"
routing = "min-mlu-prior-day"
storage_ratio = 0.5
"#;

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_writes_parseable_reports() {
    let dir = setup(SMALL);
    let o = ncdn(&["simulate", "--config", "exp.toml", "--out", "res", "--jobs", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let res = dir.path().join("res");
    let report = read(&res, "report.csv");
    assert!(report.starts_with("scheme,day,interval_start_s,mlu\n"));
    assert_eq!(report.lines().count(), 1 + 2 * 2 * 144);
    for line in report.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 4);
        assert!(f[3].parse::<f64>().unwrap() >= 0.0);
    }
    let summary = read(&res, "summary.csv");
    assert!(summary.starts_with("scheme,day,p99_mlu,mean_mlu,hit_ratio,origin_fraction\n"));
    assert_eq!(summary.lines().count(), 5);
    assert!(read(&res, "comparison.csv").starts_with("day,lru,opt,lru_ratio,opt_ratio\n"));
    // The echoed config reproduces the run on its own.
    let again = ncdn(&["simulate", "--config", "res/config.toml", "--out", "res2"], dir.path());
    assert_eq!(code(&again), 0);
    assert_eq!(read(&dir.path().join("res2"), "report.csv"), report);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = setup(SMALL);
    for (out, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert_eq!(code(&ncdn(&["gen-trace", "--config", "exp.toml", "--out", out, "--seed", seed], dir.path())), 0);
    }
    let p = dir.path();
    assert_eq!(read(&p.join("a"), "trace.csv"), read(&p.join("b"), "trace.csv"));
    assert_ne!(read(&p.join("a"), "trace.csv"), read(&p.join("c"), "trace.csv"));
    assert!(read(&p.join("c"), "config.toml").contains("seed = 2"));
}

#[test]
fn generated_files_feed_a_simulation() {
    let dir = setup(SMALL);
    assert_eq!(code(&ncdn(&["gen-trace", "--config", "exp.toml", "--out", "gen"], dir.path())), 0);
    let cfg = r#"
interval_s = 600.0
[topology]
path = "gen/topology.txt"
[workload]
trace = "gen/trace.csv"
catalog = "gen/catalog.csv"
[[scheme]]
name = "hyb"
placement = "hybrid"
reserve = 0.2
routing = "min-mlu-prior-day"
redirection = "utilization-aware"
chunk_size = 50000000
"#;
    fs::write(dir.path().join("files.toml"), cfg).unwrap();
    let o = ncdn(&["simulate", "--config", "files.toml", "--out", "res", "--decision-log", "--dump-lp"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let res = dir.path().join("res");
    let log = read(&res, "decisions_hyb.csv");
    assert!(log.starts_with("timestamp_s,client_pop,chunk_id,server_pop,reason\n"));
    assert!(log.lines().count() > 400);
    assert!(read(&res, "hyb.lp").contains("Minimize"));
}

#[test]
fn sweep_mode() {
    let dir = setup(&format!("storage_ratios = [0.5, 5.0]\n{SMALL}"));
    let o = ncdn(&["simulate", "--config", "exp.toml", "--out", "res"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = read(&dir.path().join("res"), "sweep.csv");
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "storage_ratio,scheme,mean_p99_mlu");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[4], "5,opt,0");
    assert!(read(&dir.path().join("res"), "report.csv").contains("\nopt@5,1,"));
}

#[test]
fn missing_topology_is_a_validation_error() {
    let dir = setup("[topology]\npath = \"nowhere.txt\"\n[synth]\n[[scheme]]\nname = \"a\"\nplacement = \"lru\"\nrouting = \"inverse-cap\"\n");
    let o = ncdn(&["simulate", "--config", "exp.toml"], dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nowhere.txt"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn invalid_configs_exit_one() {
    let bad = [
        SMALL.replace("days = 2\n\n[topology", "days = 2\nbogus = 1\n\n[topology"),
        SMALL.replace("requests_per_day = 200\ndays = 2", "requests_per_day = 200\ndays = 0"),
        SMALL.replace("storage_ratio = 0.5\n\n[[scheme]]", "storage_ratio = -1.0\n\n[[scheme]]"),
        SMALL.replace("placement = \"lru\"", "placement = \"hybrid\""),
        format!("storage_ratios = [2.0, 1.0]\n{SMALL}"),
    ];
    for cfg in bad {
        let dir = setup(&cfg);
        let o = ncdn(&["simulate", "--config", "exp.toml"], dir.path());
        assert_eq!(code(&o), 1, "{cfg}\n{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn solve_routing_instances() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("par.txt"), "pop 0 S\npop 1 A\npop 2 B\npop 3 T\nlink 0 1 1\nlink 1 3 1\nlink 0 2 1\nlink 2 3 1\norigin 0\n").unwrap();
    fs::write(p.join("tm.csv"), "src_pop,dst_pop,rate_mbps\n0,3,1\n").unwrap();
    fs::write(p.join("empty.csv"), "src_pop,dst_pop,rate_mbps\n").unwrap();
    fs::write(p.join("bad.csv"), "src_pop,dst_pop,rate_mbps\n0,3,lots\n").unwrap();

    let o = ncdn(&["solve-routing", "par.txt", "tm.csv", "--dump-lp", "--out", "lp"], p);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let alpha: f64 = stdout.lines().next().unwrap().trim_start_matches("alpha* = ").parse().unwrap();
    assert!((alpha - 0.5).abs() < 1e-9, "{stdout}");
    assert!(p.join("lp/routing.lp").exists());

    let o = ncdn(&["solve-routing", "par.txt", "empty.csv"], p);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("alpha* = 0\n"));

    assert_eq!(code(&ncdn(&["solve-routing", "par.txt", "bad.csv"], p)), 1);
}

#[test]
fn solve_placement_dumps_plan() {
    let dir = setup(SMALL);
    let o = ncdn(&["solve-placement", "--config", "exp.toml", "--scheme", "opt", "--out", "plan", "--dump-lp"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plan = dir.path().join("plan");
    let placement = read(&plan, "placement.csv");
    assert!(placement.starts_with("epoch,pop_id,chunk_id\n"));
    assert!(placement.lines().skip(1).all(|l| l.starts_with("1,")));
    assert!(read(&plan, "routing.csv").starts_with("src_pop,dst_pop,link_src,link_dst,fraction\n"));
    assert!(plan.join("joint.lp").exists());
    let o = ncdn(&["solve-placement", "--config", "exp.toml", "--scheme", "nope"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn report_recomputes_summaries() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("r.csv"), "scheme,day,interval_start_s,mlu\na,0,0,0.5\na,0,300,0.25\nb,1,86400,1\n").unwrap();
    let o = ncdn(&["report", "r.csv"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "scheme,day,intervals,p99_mlu,mean_mlu,max_mlu\na,0,2,0.5,0.375,0.5\nb,1,1,1,1,1\n"
    );
    fs::write(p.join("bad.csv"), "scheme,day,interval_start_s,mlu\na,zero,0,0.5\n").unwrap();
    assert_eq!(code(&ncdn(&["report", "bad.csv"], p)), 1);
    assert_eq!(code(&ncdn(&["report", "missing.csv"], p)), 1);
}
