//! Pipeline orchestration and report emission.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use srspmd_core::demand::{sample_trips, DemandParams};
use srspmd_core::dispatch::{
    fleet_scaling, simulate_lookahead, simulate_online_fixed, simulate_online_growth, SimResult,
};
use srspmd_core::fit::{log_fit, LinearFit, PowerLawFit};
use srspmd_core::mincover::{approximation_report, min_fleet, min_fleet_weighted, trips_per_vehicle, utilization, CoverVariant, FleetMetrics};
use srspmd_core::pathnet::{PathNetwork, SpeedProfile};
use srspmd_core::shareability::{build_graph, ConnectionLimit};
use srspmd_core::trips::{concurrency_profile, usage_stats, write_usage_csv, Trip};
use srspmd_core::upgrade::{evaluate_upgrades, fill_bt, frontier, legs, EdgeUsage, UpgradeComparison};

use crate::config::{ExperimentConfig, Pipeline};
use crate::data::{load_dataset, load_od_table, Dataset};

/// Name of the marker written when a stage fails after earlier outputs exist.
pub const PARTIAL_MARKER: &str = "PARTIAL";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub day: i64,
    pub v_r_kmh: f64,
    pub variant: CoverVariant,
    pub connection_limit_h: Option<f64>,
    pub n_trips: usize,
    pub edges: usize,
    pub fleet_size: usize,
    pub matched_pairs: usize,
    pub n_days: usize,
    pub metrics: FleetMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub day: i64,
    pub v_r_kmh: f64,
    pub mode: String,
    pub t_b: f64,
    pub t_w: f64,
    pub d_walk: f64,
    pub t_la: f64,
    #[serde(flatten)]
    pub result: SimResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub day: i64,
    pub model: String,
    pub speeds_kmh: Vec<f64>,
    pub fleets: Vec<usize>,
    pub fit: Option<PowerLawFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeRecord {
    pub day: i64,
    pub v_r_kmh: f64,
    pub v_r_star_kmh: f64,
    /// Rerouted benefit estimate at the evaluated prefix.
    pub b_t: Option<f64>,
    #[serde(flatten)]
    pub comparison: UpgradeComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub day: i64,
    pub n_trips: usize,
    pub max_concurrent: usize,
    pub mean_duration_min: f64,
    pub mean_route_km: f64,
    pub speeds_kmh: Vec<f64>,
    pub shareability_edges: Vec<usize>,
}

/// Weighted solution under a connection-time cap relative to the uncapped one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionLimitRow {
    pub day: i64,
    pub v_r_kmh: f64,
    pub limit_hours: f64,
    pub edges: usize,
    pub matches: usize,
    pub fleet_size: usize,
    pub matches_ratio: f64,
    pub fleet_ratio: f64,
    pub utilization_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandRawRow {
    pub n_t: usize,
    pub rep: usize,
    pub seed: u64,
    pub n_trips: usize,
    pub oracle_fleet: usize,
    pub oracle_utilization: f64,
    pub online_fleet: usize,
    pub online_utilization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandSummaryRow {
    pub n_t: usize,
    pub reps: usize,
    pub oracle_mean: f64,
    pub oracle_sd: f64,
    pub online_mean: f64,
    pub online_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandFit {
    pub v_r_kmh: f64,
    /// OD pairs are drawn independently, with replacement.
    pub sampling: String,
    pub fit_max_n_t: Option<usize>,
    /// Utilization against ln(n_t) over the summary means; absent with
    /// fewer than two grid points.
    pub oracle: Option<LinearFit>,
    pub online: Option<LinearFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandSweep {
    pub raw: Vec<DemandRawRow>,
    pub summary: Vec<DemandSummaryRow>,
    pub fit: DemandFit,
}

/// Everything a run produced, in memory and as written files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub config_hash: String,
    pub seed: u64,
    pub oracle: Vec<OracleRecord>,
    pub online: Vec<SimRecord>,
    pub lookahead: Vec<SimRecord>,
    pub scaling: Vec<ScalingRecord>,
    pub upgrade: Vec<UpgradeRecord>,
    pub demand: Option<DemandSweep>,
    pub stats: Vec<StatsRecord>,
    pub connection_limits: Vec<ConnectionLimitRow>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    record: &'a T,
}

struct Writer {
    dir: PathBuf,
    hash: String,
    seed: u64,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &[u8]) -> Result<()> {
        let mut text = format!("# config_hash={} seed={}\n", self.hash, self.seed).into_bytes();
        text.extend_from_slice(body);
        self.write(name, &text)
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let mut text = String::new();
        for record in records {
            let stamped = Stamped {
                config_hash: &self.hash,
                seed: self.seed,
                record,
            };
            text.push_str(&serde_json::to_string(&stamped)?);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> srspmd_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

fn csv_writer() -> ::csv::Writer<Vec<u8>> {
    ::csv::Writer::from_writer(Vec::new())
}

fn slug(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

fn limit(cfg: &ExperimentConfig) -> ConnectionLimit {
    cfg.oracle.connection_limit_h.map_or(ConnectionLimit::Unlimited, ConnectionLimit::hours)
}

/// Independent (day, speed) jobs.
fn grid(data: &Dataset, cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    (0..data.days.len())
        .flat_map(|d| cfg.speeds_kmh.iter().map(move |&v| (d, v)))
        .collect()
}

fn oracle(cfg: &ExperimentConfig, data: &Dataset, out: &mut Writer, bundle: &mut Bundle) -> Result<()> {
    let jobs: Vec<(OracleRecord, Vec<u8>)> = grid(data, cfg)
        .into_par_iter()
        .map(|(d, v)| {
            let (day, trips) = &data.days[d];
            let g = build_graph(trips, &data.net, &SpeedProfile::uniform(v), limit(cfg));
            let sol = min_fleet(&g, trips, cfg.oracle.variant);
            let chains = render(|w| sol.write_chains_csv(trips, w))?;
            let record = OracleRecord {
                day: *day,
                v_r_kmh: v,
                variant: cfg.oracle.variant,
                connection_limit_h: cfg.oracle.connection_limit_h,
                n_trips: trips.len(),
                edges: g.edge_count(),
                fleet_size: sol.fleet_size,
                matched_pairs: sol.matched_pairs,
                n_days: 1,
                metrics: utilization(&sol, 1),
            };
            Ok((record, chains))
        })
        .collect::<Result<_>>()?;
    for (r, chains) in &jobs {
        out.csv(&format!("oracle_chains_d{}_v{}.csv", r.day, slug(r.v_r_kmh)), chains)?;
    }
    let records: Vec<OracleRecord> = jobs.into_iter().map(|(r, _)| r).collect();
    out.jsonl("oracle.jsonl", &records)?;
    let scaling = scaling_records("oracle", cfg, data, &records.iter().map(|r| r.fleet_size).collect::<Vec<_>>());
    out.jsonl("oracle_scaling.jsonl", &scaling)?;
    bundle.scaling.extend(scaling);
    bundle.oracle = records;
    Ok(())
}

fn scaling_records(model: &str, cfg: &ExperimentConfig, data: &Dataset, fleets: &[usize]) -> Vec<ScalingRecord> {
    let k = cfg.speeds_kmh.len();
    data.days
        .iter()
        .enumerate()
        .map(|(d, (day, _))| {
            let f = fleets[d * k..(d + 1) * k].to_vec();
            ScalingRecord {
                day: *day,
                model: model.to_string(),
                speeds_kmh: cfg.speeds_kmh.clone(),
                fit: fleet_scaling(&cfg.speeds_kmh, &f),
                fleets: f,
            }
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, data: &Dataset, out: &mut Writer, bundle: &mut Bundle, lookahead: bool) -> Result<()> {
    let prefix = if lookahead { "lookahead" } else { "online" };
    let jobs: Vec<(SimRecord, Vec<u8>)> = grid(data, cfg)
        .into_par_iter()
        .map(|(d, v)| {
            let (day, trips) = &data.days[d];
            let (mode, result) = if lookahead {
                ("lookahead", simulate_lookahead(trips, &data.net, &cfg.lookahead_params(v))?)
            } else {
                let p = cfg.sim_params(v);
                match cfg.sim.fleet {
                    Some(n) => ("fixed", simulate_online_fixed(trips, &data.net, n, &p)?),
                    None => ("growth", simulate_online_growth(trips, &data.net, &p)?),
                }
            };
            let p = if lookahead { cfg.lookahead_params(v) } else { cfg.sim_params(v) };
            let log = render(|w| result.write_event_log(w))?;
            let record = SimRecord {
                day: *day,
                v_r_kmh: v,
                mode: mode.to_string(),
                t_b: p.t_b,
                t_w: p.t_w,
                d_walk: p.d_walk,
                t_la: p.t_la,
                result,
            };
            Ok((record, log))
        })
        .collect::<Result<_>>()?;
    for (r, log) in &jobs {
        out.csv(&format!("{prefix}_events_d{}_v{}.csv", r.day, slug(r.v_r_kmh)), log)?;
    }
    let records: Vec<SimRecord> = jobs.into_iter().map(|(r, _)| r).collect();
    out.jsonl(&format!("{prefix}.jsonl"), &records)?;
    if lookahead || cfg.sim.fleet.is_none() {
        let fleets: Vec<usize> = records.iter().map(|r| r.result.fleet_size).collect();
        let scaling = scaling_records(prefix, cfg, data, &fleets);
        out.jsonl(&format!("{prefix}_scaling.jsonl"), &scaling)?;
        bundle.scaling.extend(scaling);
    }
    if lookahead {
        bundle.lookahead = records;
    } else {
        bundle.online = records;
    }
    Ok(())
}

fn upgrade(cfg: &ExperimentConfig, data: &Dataset, out: &mut Writer, bundle: &mut Bundle) -> Result<()> {
    let u = &cfg.upgrade;
    let jobs: Vec<(i64, f64, Vec<UpgradeRecord>, Vec<u8>)> = grid(data, cfg)
        .into_par_iter()
        .map(|(d, v)| {
            let (day, trips) = &data.days[d];
            let base = SpeedProfile::uniform(v);
            let g = build_graph(trips, &data.net, &base, ConnectionLimit::Unlimited);
            let sol = min_fleet_weighted(&g, trips);
            let all = legs(trips, Some(&sol), &data.net, &base);
            let mut plan = frontier(&EdgeUsage::from_legs(&all, &data.net).combined(), &data.net);
            fill_bt(&mut plan, &u.fractions, &all, &data.net, &SpeedProfile::two_tier(v, u.upgraded_kmh));
            let rows = evaluate_upgrades(trips, &data.net, &plan, &u.fractions, v, u.upgraded_kmh, u.mode, &cfg.sim_params(v))?;
            let records = rows
                .into_iter()
                .map(|comparison| UpgradeRecord {
                    day: *day,
                    v_r_kmh: v,
                    v_r_star_kmh: u.upgraded_kmh,
                    b_t: plan.b_t.iter().find(|(k, _)| *k == comparison.upgraded_edges).map(|&(_, b)| b),
                    comparison,
                })
                .collect();
            let csv = render(|w| plan.write_csv(&data.net, w))?;
            Ok((*day, v, records, csv))
        })
        .collect::<Result<_>>()?;
    for (day, v, _, csv) in &jobs {
        out.csv(&format!("upgrade_frontier_d{day}_v{}.csv", slug(*v)), csv)?;
    }
    let records: Vec<UpgradeRecord> = jobs.into_iter().flat_map(|(_, _, r, _)| r).collect();
    out.jsonl("upgrade.jsonl", &records)?;
    bundle.upgrade = records;
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Utilization against the daily trip count, repeated over seeds.
pub fn demand_sweep(cfg: &ExperimentConfig, net: &PathNetwork) -> Result<DemandSweep> {
    let d = &cfg.demand;
    let table = load_od_table(cfg, net)?;
    let cells: Vec<(usize, usize)> = d.n_t_grid.iter().flat_map(|&n| (0..d.reps).map(move |r| (n, r))).collect();
    let raw: Vec<DemandRawRow> = cells
        .into_par_iter()
        .map(|(n_t, rep)| {
            let seed = cfg.seed.wrapping_add(rep as u64);
            let params = DemandParams { n_t, seed, ..d.params };
            let trips: Vec<Trip> = sample_trips(&table, net, &params)?;
            let profile = SpeedProfile::uniform(d.speed_kmh);
            let g = build_graph(&trips, net, &profile, ConnectionLimit::Unlimited);
            let oracle_fleet = min_fleet_weighted(&g, &trips).fleet_size;
            let sim = cfg.sim_params(d.speed_kmh);
            let online_fleet = simulate_online_growth(&trips, net, &sim)?.fleet_size;
            Ok(DemandRawRow {
                n_t,
                rep,
                seed,
                n_trips: trips.len(),
                oracle_fleet,
                oracle_utilization: trips_per_vehicle(trips.len(), oracle_fleet, 1),
                online_fleet,
                online_utilization: trips_per_vehicle(trips.len(), online_fleet, 1),
            })
        })
        .collect::<Result<_>>()?;
    let summary: Vec<DemandSummaryRow> = d
        .n_t_grid
        .iter()
        .enumerate()
        .map(|(i, &n_t)| {
            let rows = &raw[i * d.reps..(i + 1) * d.reps];
            let (oracle_mean, oracle_sd) = mean_sd(&rows.iter().map(|r| r.oracle_utilization).collect::<Vec<_>>());
            let (online_mean, online_sd) = mean_sd(&rows.iter().map(|r| r.online_utilization).collect::<Vec<_>>());
            DemandSummaryRow {
                n_t,
                reps: d.reps,
                oracle_mean,
                oracle_sd,
                online_mean,
                online_sd,
            }
        })
        .collect();
    let fitted: Vec<&DemandSummaryRow> = summary
        .iter()
        .filter(|s| d.fit_max_n_t.is_none_or(|m| s.n_t <= m))
        .collect();
    let xs: Vec<f64> = fitted.iter().map(|s| s.n_t as f64).collect();
    let fit = DemandFit {
        v_r_kmh: d.speed_kmh,
        sampling: "with replacement".to_string(),
        fit_max_n_t: d.fit_max_n_t,
        oracle: log_fit(&xs, &fitted.iter().map(|s| s.oracle_mean).collect::<Vec<_>>()),
        online: log_fit(&xs, &fitted.iter().map(|s| s.online_mean).collect::<Vec<_>>()),
    };
    Ok(DemandSweep { raw, summary, fit })
}

fn demand(cfg: &ExperimentConfig, net: &PathNetwork, out: &mut Writer, bundle: &mut Bundle) -> Result<()> {
    let sweep = demand_sweep(cfg, net)?;
    out.csv("demand_raw.csv", &rows_csv(&sweep.raw)?)?;
    out.csv("demand_summary.csv", &rows_csv(&sweep.summary)?)?;
    out.jsonl("demand_fit.jsonl", std::slice::from_ref(&sweep.fit))?;
    bundle.demand = Some(sweep);
    Ok(())
}

fn stats(cfg: &ExperimentConfig, data: &Dataset, out: &mut Writer, bundle: &mut Bundle) -> Result<()> {
    let records: Vec<StatsRecord> = data
        .days
        .par_iter()
        .map(|(day, trips)| {
            let n = trips.len().max(1) as f64;
            StatsRecord {
                day: *day,
                n_trips: trips.len(),
                max_concurrent: concurrency_profile(trips).max_concurrent,
                mean_duration_min: trips.iter().map(Trip::duration).sum::<f64>() / n / 60.0,
                mean_route_km: trips.iter().filter_map(Trip::route_length).sum::<f64>() / n / 1000.0,
                speeds_kmh: cfg.speeds_kmh.clone(),
                shareability_edges: cfg
                    .speeds_kmh
                    .iter()
                    .map(|&v| build_graph(trips, &data.net, &SpeedProfile::uniform(v), limit(cfg)).edge_count())
                    .collect(),
            }
        })
        .collect();
    out.jsonl("stats.jsonl", &records)?;
    if !cfg.stats.connection_limits_h.is_empty() {
        // Run times are left out so that the file stays reproducible.
        let rows: Vec<ConnectionLimitRow> = grid(data, cfg)
            .into_par_iter()
            .flat_map_iter(|(d, v)| {
                let (day, trips) = &data.days[d];
                approximation_report(trips, &data.net, &SpeedProfile::uniform(v), &cfg.stats.connection_limits_h)
                    .into_iter()
                    .map(move |r| ConnectionLimitRow {
                        day: *day,
                        v_r_kmh: v,
                        limit_hours: r.limit_hours,
                        edges: r.edges,
                        matches: r.matches,
                        fleet_size: r.fleet_size,
                        matches_ratio: r.matches_ratio,
                        fleet_ratio: r.fleet_ratio,
                        utilization_ratio: r.utilization_ratio,
                    })
            })
            .collect();
        out.csv("connection_limits.csv", &rows_csv(&rows)?)?;
        bundle.connection_limits = rows;
    }
    let tagged: Vec<Trip> = data.days.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    let usage = usage_stats(&tagged);
    if !usage.is_empty() {
        out.csv("usage.csv", &render(|w| write_usage_csv(&usage, w))?)?;
    }
    bundle.stats = records;
    Ok(())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn run_stage(
    stage: Pipeline,
    cfg: &ExperimentConfig,
    data: &Dataset,
    out: &mut Writer,
    bundle: &mut Bundle,
) -> Result<()> {
    match stage {
        Pipeline::Oracle => oracle(cfg, data, out, bundle),
        Pipeline::Online => simulate(cfg, data, out, bundle, false),
        Pipeline::Lookahead => simulate(cfg, data, out, bundle, true),
        Pipeline::Upgrade => upgrade(cfg, data, out, bundle),
        Pipeline::Demand => demand(cfg, &data.net, out, bundle),
        Pipeline::Stats => stats(cfg, data, out, bundle),
    }
}

/// Validates `cfg`, runs every selected pipeline in order, and writes the
/// outputs under `cfg.out`. A failing stage aborts the run and leaves a
/// `PARTIAL` marker naming it.
pub fn run(cfg: &ExperimentConfig) -> Result<Bundle> {
    cfg.validate()?;
    let dir: &Path = &cfg.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let marker = dir.join(PARTIAL_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let hash = cfg.hash();
    let mut out = Writer {
        dir: dir.to_path_buf(),
        hash: hash.clone(),
        seed: cfg.seed,
        files: Vec::new(),
    };
    let echo = serde_json::json!({ "config_hash": hash, "seed": cfg.seed, "config": cfg.canonical() });
    out.write("config.json", format!("{echo}\n").as_bytes())?;
    let mut bundle = Bundle {
        config_hash: hash,
        seed: cfg.seed,
        ..Bundle::default()
    };
    let pool = thread_pool(cfg.jobs)?;
    let result = pool.install(|| -> Result<()> {
        let data = load_dataset(cfg).context("stage `load` failed")?;
        let mut stages = cfg.pipelines.clone();
        stages.dedup();
        for stage in stages {
            run_stage(stage, cfg, &data, &mut out, &mut bundle)
                .with_context(|| format!("stage `{}` failed", stage.name()))?;
        }
        Ok(())
    });
    if let Err(e) = result {
        let note = format!("{e:#}\nwritten before failure: {}\n", out.files.len());
        fs::write(&marker, note)?;
        return Err(e);
    }
    bundle.files = out.files;
    Ok(bundle)
}
