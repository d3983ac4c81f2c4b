use std::fs;
use std::process::Command;

use srspmd_cli::run::PARTIAL_MARKER;
use srspmd_cli::{run, ExperimentConfig, Pipeline};

fn small(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        out: dir.to_path_buf(),
        speeds_kmh: vec![2.5],
        ..ExperimentConfig::default()
    };
    cfg.synthetic.grid_cols = 6;
    cfg.synthetic.grid_rows = 6;
    cfg.synthetic.trips.n_trips = 40;
    cfg.synthetic.trips.max_length_m = 800.0;
    cfg
}

#[test]
fn empty_day_selection_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.days.clear();
    let err = run(&cfg).unwrap_err().to_string();
    assert!(err.contains("day selection is empty"), "{err}");
}

#[test]
fn three_trip_oracle_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.synthetic.trips.n_trips = 3;
    let bundle = run(&cfg).unwrap();
    assert_eq!(bundle.oracle.len(), 1);
    let rec = &bundle.oracle[0];
    assert_eq!(rec.n_trips, 3);
    assert!((1..=3).contains(&rec.fleet_size));
    assert_eq!(rec.fleet_size + rec.matched_pairs, 3);

    let chains = fs::read_to_string(tmp.path().join("oracle_chains_d0_v2p5.csv")).unwrap();
    let mut lines = chains.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash={} seed=0", bundle.config_hash));
    assert_eq!(lines.next().unwrap(), "vehicle_id,seq,trip_id");
    assert_eq!(lines.count(), 3);
    let json = fs::read_to_string(tmp.path().join("oracle.jsonl")).unwrap();
    assert_eq!(json.lines().count(), 1);
    assert!(json.contains(&format!("\"config_hash\":\"{}\"", bundle.config_hash)));
}

#[test]
fn identical_config_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("a"));
    cfg.pipelines = vec![Pipeline::Oracle, Pipeline::Online, Pipeline::Lookahead, Pipeline::Stats];
    cfg.days = vec![0, 3];
    let a = run(&cfg).unwrap();
    cfg.out = tmp.path().join("b");
    cfg.jobs = 2;
    let b = run(&cfg).unwrap();
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.files.len(), b.files.len());
    for (fa, fb) in a.files.iter().zip(&b.files) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(fs::read(fa).unwrap(), fs::read(fb).unwrap(), "{}", fa.display());
    }
    cfg.seed = 1;
    cfg.out = tmp.path().join("c");
    assert_ne!(run(&cfg).unwrap().oracle, a.oracle);
}

#[test]
fn summaries_agree_with_raw_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pipelines = vec![Pipeline::Oracle, Pipeline::Online];
    let bundle = run(&cfg).unwrap();
    let o = &bundle.oracle[0];
    assert_eq!(o.metrics.trips_per_vehicle, o.n_trips as f64 / (o.fleet_size * o.n_days) as f64);
    let s = &bundle.online[0];
    let log = fs::read_to_string(tmp.path().join("online_events_d0_v2p5.csv")).unwrap();
    let rows: Vec<&str> = log.lines().skip(2).collect();
    assert_eq!(rows.len(), s.result.n_requests);
    let vehicles: std::collections::BTreeSet<&str> = rows.iter().filter_map(|r| r.split(',').nth(4)).filter(|v| !v.is_empty()).collect();
    assert_eq!(vehicles.len(), s.result.fleet_size);
    assert_eq!(s.result.utilization, s.result.n_requests as f64 / (s.result.fleet_size * s.result.n_days) as f64);
}

#[test]
fn demand_sweep_structure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pipelines = vec![Pipeline::Demand];
    cfg.demand.n_t_grid = vec![100];
    cfg.demand.reps = 2;
    cfg.demand.params.max_route_m = 800.0;
    let sweep = run(&cfg).unwrap().demand.unwrap();
    assert_eq!(sweep.raw.len(), 2);
    assert_eq!(sweep.summary.len(), 1);
    assert!(sweep.fit.oracle.is_none());
    assert_eq!(sweep.fit.sampling, "with replacement");
    let mean = (sweep.raw[0].oracle_utilization + sweep.raw[1].oracle_utilization) / 2.0;
    assert!((sweep.summary[0].oracle_mean - mean).abs() < 1e-12);
    let raw = fs::read_to_string(tmp.path().join("demand_raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 4);
    assert_eq!(fs::read_to_string(tmp.path().join("demand_summary.csv")).unwrap().lines().count(), 3);
}

#[test]
fn failing_stage_is_named_and_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pipelines = vec![Pipeline::Oracle, Pipeline::Demand];
    // No OD pair is this short, so sampling has nothing to draw from.
    cfg.demand.params.max_route_m = 1.0;
    let err = format!("{:#}", run(&cfg).unwrap_err());
    assert!(err.contains("stage `demand` failed"), "{err}");
    let marker = fs::read_to_string(tmp.path().join(PARTIAL_MARKER)).unwrap();
    assert!(marker.contains("demand"));
    assert!(tmp.path().join("oracle.jsonl").exists());

    cfg.pipelines = vec![Pipeline::Oracle];
    run(&cfg).unwrap();
    assert!(!tmp.path().join(PARTIAL_MARKER).exists());
}

#[test]
fn upgrade_pipeline_never_enlarges_oracle_fleet() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pipelines = vec![Pipeline::Upgrade];
    cfg.speeds_kmh = vec![1.0, 5.0];
    let bundle = run(&cfg).unwrap();
    assert_eq!(bundle.upgrade.len(), 2 * cfg.upgrade.fractions.len());
    for r in &bundle.upgrade {
        assert!(r.comparison.upgraded_fleet <= r.comparison.baseline_fleet);
        if let Some(bt) = r.b_t {
            assert!(bt >= r.comparison.b_star - 1e-9);
        }
    }
    assert!(tmp.path().join("upgrade_frontier_d0_v1.csv").exists());
}

#[test]
fn stats_report_connection_limits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.pipelines = vec![Pipeline::Stats];
    cfg.stats.connection_limits_h = vec![0.25, 24.0];
    let bundle = run(&cfg).unwrap();
    assert_eq!(bundle.connection_limits.len(), 2);
    let (short, day) = (&bundle.connection_limits[0], &bundle.connection_limits[1]);
    assert!(short.edges <= day.edges);
    assert!(short.fleet_ratio >= 1.0);
    assert_eq!(day.fleet_ratio, 1.0);
    assert_eq!(bundle.stats[0].n_trips, 40);
    assert!(bundle.stats[0].max_concurrent >= 1);
}

#[test]
fn binary_cost_and_flags() {
    let exe = env!("CARGO_BIN_EXE_srspmd");
    let out = Command::new(exe).args(["cost", "--autonomous", "0", "--conventional", "15912"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"capital_conventional\":9006192.0"), "{text}");

    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("c.toml");
    fs::write(&cfg_path, "[synthetic]\ngrid_cols = 5\ngrid_rows = 5\n[synthetic.trips]\nn_trips = 20\nmax_length_m = 600.0\n").unwrap();
    let out_dir = tmp.path().join("out");
    let run_out = Command::new(exe)
        .args(["online", "--tw", "120", "--dwalk", "100", "--vr", "2.5,5", "--seed", "4", "--jobs", "1"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run_out.status.success());
    let summary = fs::read_to_string(out_dir.join("online.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.contains("\"t_w\":120.0") && summary.contains("\"d_walk\":100.0") && summary.contains("\"seed\":4"));

    let bad = Command::new(exe).args(["oracle", "--config", "/nonexistent.toml"]).output().unwrap();
    assert!(!bad.status.success());
}
