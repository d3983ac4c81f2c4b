//! Loading or synthesizing the network, the selected days of trips, and the
//! bus OD table.

use anyhow::{anyhow, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srspmd_core::demand::{BusOdTable, DayType};
use srspmd_core::pathnet::PathNetwork;
use srspmd_core::synthetic::{grid_network, random_trips};
use srspmd_core::trips::{filter_trips, load_trips, split_by_day, Trip, SECONDS_PER_DAY};

use crate::config::ExperimentConfig;

pub struct Dataset {
    pub net: PathNetwork,
    /// Selected days in configuration order.
    pub days: Vec<(i64, Vec<Trip>)>,
    pub synthetic: bool,
}

/// Seed of synthetic day `day`.
pub fn day_seed(seed: u64, day: i64) -> u64 {
    seed ^ (day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn load_network(cfg: &ExperimentConfig) -> Result<PathNetwork> {
    match (&cfg.input.nodes, &cfg.input.edges) {
        (Some(n), Some(e)) => PathNetwork::load(n, e).context("loading network"),
        _ => {
            let s = &cfg.synthetic;
            Ok(grid_network(s.grid_cols, s.grid_rows, s.spacing_m))
        }
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let net = load_network(cfg)?;
    let Some(path) = &cfg.input.trips else {
        let days = cfg
            .days
            .iter()
            .map(|&d| {
                let mut rng = ChaCha8Rng::seed_from_u64(day_seed(cfg.seed, d));
                let mut trips = random_trips(&mut rng, &net, &cfg.synthetic.trips);
                let shift = d as f64 * SECONDS_PER_DAY;
                for t in &mut trips {
                    t.start_time += shift;
                    t.end_time += shift;
                }
                (d, trips)
            })
            .collect();
        return Ok(Dataset {
            net,
            days,
            synthetic: true,
        });
    };
    let loaded = load_trips(path, &net).context("loading trips")?;
    let kept = filter_trips(loaded.trips, &net, &cfg.filter).kept;
    let mut by_day = split_by_day(&kept);
    let days = cfg
        .days
        .iter()
        .map(|&d| {
            let trips = by_day.remove(&d).ok_or_else(|| anyhow!("no trips on day {d}"))?;
            Ok((d, trips))
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        net,
        days,
        synthetic: false,
    })
}

/// The configured bus OD table, or a seeded synthetic one: stops on a coarse
/// lattice over the network and random hourly counts.
pub fn load_od_table(cfg: &ExperimentConfig, net: &PathNetwork) -> Result<BusOdTable> {
    let d = &cfg.demand;
    if let (Some(od), Some(stops)) = (&d.od, &d.stops) {
        return BusOdTable::load(od, stops, d.buildings.as_deref(), net).context("loading bus OD table");
    }
    let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
    for n in net.nodes() {
        x0 = x0.min(n.x);
        y0 = y0.min(n.y);
        x1 = x1.max(n.x);
        y1 = y1.max(n.y);
    }
    let k = 4usize;
    let stops: Vec<(String, f64, f64)> = (0..k * k)
        .map(|i| {
            let fx = (i % k) as f64 / (k - 1) as f64;
            let fy = (i / k) as f64 / (k - 1) as f64;
            (format!("S{i}"), x0 + fx * (x1 - x0), y0 + fy * (y1 - y0))
        })
        .collect();
    let buildings: Vec<(f64, f64)> = net.nodes().iter().map(|n| (n.x, n.y)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0D0D);
    let mut records = Vec::new();
    for o in 0..stops.len() {
        for t in 0..stops.len() {
            if o == t {
                continue;
            }
            for hour in 6..23 {
                let peak = matches!(hour, 7..=9 | 17..=19);
                let count = f64::from(rng.gen_range(0..if peak { 400u32 } else { 150 }));
                records.push((stops[o].0.clone(), stops[t].0.clone(), DayType::Workday, hour, count));
                records.push((stops[o].0.clone(), stops[t].0.clone(), DayType::Weekend, hour, count / 2.0));
            }
        }
    }
    Ok(BusOdTable::new(net, &stops, &buildings, records)?)
}
