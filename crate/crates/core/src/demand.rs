//! Synthetic trip demand sampled from bus origin-destination counts.

use std::collections::HashMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathnet::{PathNetwork, SpeedProfile};
use crate::trips::{sort_trips, RouteState, Trip};

/// Buildings within this distance of a stop are its candidate endpoints.
pub const BUILDING_RADIUS_M: f64 = 300.0;

/// Building redraws before falling back to the stop nodes.
const BUILDING_ATTEMPTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Workday,
    Weekend,
}

impl DayType {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "workday" | "weekday" => Some(DayType::Workday),
            "weekend" | "weekends/holiday" | "weekend/holiday" => Some(DayType::Weekend),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdRecord {
    /// Indices into [`BusOdTable::stops`].
    pub origin: usize,
    pub dest: usize,
    pub day_type: DayType,
    pub hour: u8,
    pub monthly_count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub node: usize,
    /// Candidate trip endpoints, never empty.
    pub building_nodes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusOdTable {
    pub stops: Vec<Stop>,
    pub records: Vec<OdRecord>,
}

#[derive(Deserialize)]
struct OdRow {
    origin_stop: String,
    dest_stop: String,
    day_type: String,
    hour: i64,
    monthly_count: f64,
}

#[derive(Deserialize)]
struct PointRow {
    #[serde(alias = "building_id")]
    stop_id: String,
    x_m: f64,
    y_m: f64,
}

fn read_points(path: &Path) -> Result<Vec<(String, f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    reader
        .deserialize::<PointRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::csv(path, e))?;
            Ok((row.stop_id, row.x_m, row.y_m))
        })
        .collect()
}

impl BusOdTable {
    /// Builds a table from stop coordinates and raw records. Each stop gets
    /// the nodes of every building within [`BUILDING_RADIUS_M`], or its own
    /// snapped node when there is none.
    pub fn new(
        net: &PathNetwork,
        stops: &[(String, f64, f64)],
        buildings: &[(f64, f64)],
        records: impl IntoIterator<Item = (String, String, DayType, i64, f64)>,
    ) -> Result<Self> {
        let ctx = "bus OD table";
        let snap = |x: f64, y: f64| net.snap_point(x, y).ok_or_else(|| Error::schema(ctx, "network has no nodes"));
        let building_nodes: Vec<((f64, f64), usize)> = buildings
            .iter()
            .map(|&(x, y)| Ok(((x, y), snap(x, y)?)))
            .collect::<Result<_>>()?;
        let mut index = HashMap::new();
        let mut out_stops = Vec::with_capacity(stops.len());
        for (id, x, y) in stops {
            if index.insert(id.clone(), out_stops.len()).is_some() {
                return Err(Error::schema(ctx, format!("duplicate stop id {id}")));
            }
            let node = snap(*x, *y)?;
            let r2 = BUILDING_RADIUS_M * BUILDING_RADIUS_M;
            let mut near: Vec<usize> = building_nodes
                .iter()
                .filter(|((bx, by), _)| (bx - x).powi(2) + (by - y).powi(2) <= r2)
                .map(|&(_, n)| n)
                .collect();
            near.sort_unstable();
            near.dedup();
            if near.is_empty() {
                near.push(node);
            }
            out_stops.push(Stop {
                stop_id: id.clone(),
                node,
                building_nodes: near,
            });
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::schema(ctx, format!("unknown stop id {id}")))
        };
        let mut out_records = Vec::new();
        for (o, d, day_type, hour, monthly_count) in records {
            if !(0..24).contains(&hour) {
                return Err(Error::schema(ctx, format!("hour {hour} out of range")));
            }
            if !(monthly_count >= 0.0) {
                return Err(Error::schema(ctx, format!("negative monthly count {monthly_count}")));
            }
            out_records.push(OdRecord {
                origin: lookup(&o)?,
                dest: lookup(&d)?,
                day_type,
                hour: hour as u8,
                monthly_count,
            });
        }
        Ok(Self {
            stops: out_stops,
            records: out_records,
        })
    }

    /// Loads `origin_stop,dest_stop,day_type,hour,monthly_count` and
    /// `stop_id,x_m,y_m`, plus optional `building_id,x_m,y_m`.
    pub fn load(
        od_file: impl AsRef<Path>,
        stops_file: impl AsRef<Path>,
        buildings_file: Option<&Path>,
        net: &PathNetwork,
    ) -> Result<Self> {
        let od_file = od_file.as_ref();
        let stops = read_points(stops_file.as_ref())?;
        let buildings: Vec<(f64, f64)> = match buildings_file {
            Some(p) => read_points(p)?.into_iter().map(|(_, x, y)| (x, y)).collect(),
            None => Vec::new(),
        };
        let mut reader = csv::Reader::from_path(od_file).map_err(|e| Error::csv(od_file, e))?;
        let mut records = Vec::new();
        for row in reader.deserialize::<OdRow>() {
            let row = row.map_err(|e| Error::csv(od_file, e))?;
            let day_type = DayType::parse(&row.day_type).ok_or_else(|| {
                Error::schema(od_file.display().to_string(), format!("unknown day type `{}`", row.day_type))
            })?;
            records.push((row.origin_stop, row.dest_stop, day_type, row.hour, row.monthly_count));
        }
        Self::new(net, &stops, &buildings, records)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandParams {
    pub n_t: usize,
    /// Longest allowed route, meters.
    pub max_route_m: f64,
    pub user_speed_kmh: f64,
    pub workdays_in_month: f64,
    pub weekend_days_in_month: f64,
    pub day_type: DayType,
    pub seed: u64,
}

impl Default for DemandParams {
    fn default() -> Self {
        Self {
            n_t: 1000,
            max_route_m: 2000.0,
            user_speed_kmh: 5.0,
            workdays_in_month: 22.0,
            weekend_days_in_month: 8.0,
            day_type: DayType::Workday,
            seed: 0,
        }
    }
}

impl DemandParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 {
            return Err(Error::invalid("n_t must be at least 1"));
        }
        if !(self.max_route_m > 0.0) {
            return Err(Error::invalid("maximum route length must be positive"));
        }
        if !(self.user_speed_kmh > 0.0) {
            return Err(Error::invalid("user speed must be positive"));
        }
        if !(self.workdays_in_month > 0.0 && self.weekend_days_in_month > 0.0) {
            return Err(Error::invalid("days per month must be positive"));
        }
        Ok(())
    }

    pub fn days_in_month(&self, day_type: DayType) -> f64 {
        match day_type {
            DayType::Workday => self.workdays_in_month,
            DayType::Weekend => self.weekend_days_in_month,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyRate {
    pub origin: usize,
    pub dest: usize,
    pub hour: u8,
    pub rate: f64,
}

/// Expected daily trips per (pair, hour) for one day type.
pub fn daily_rates(table: &BusOdTable, day_type: DayType, params: &DemandParams) -> Vec<DailyRate> {
    let days = params.days_in_month(day_type);
    table
        .records
        .iter()
        .filter(|r| r.day_type == day_type)
        .map(|r| DailyRate {
            origin: r.origin,
            dest: r.dest,
            hour: r.hour,
            rate: r.monthly_count / days,
        })
        .collect()
}

/// Network distances between stop nodes, searched up to `max_m`.
fn stop_distances(table: &BusOdTable, rates: &[DailyRate], net: &PathNetwork, max_m: f64) -> HashMap<(usize, usize), f64> {
    let mut dests: HashMap<usize, Vec<usize>> = HashMap::new();
    for r in rates {
        dests.entry(r.origin).or_default().push(r.dest);
    }
    let mut out = HashMap::new();
    let mut origins: Vec<usize> = dests.keys().copied().collect();
    origins.sort_unstable();
    for o in origins {
        let tree = net.search_within_length(table.stops[o].node, max_m);
        for &d in &dests[&o] {
            if let Some(len) = tree.length(table.stops[d].node) {
                out.insert((o, d), len);
            }
        }
    }
    out
}

/// Share of daily trips whose stop-to-stop network distance is strictly
/// below each limit. Unreachable pairs never count.
pub fn replaceable_share(
    table: &BusOdTable,
    net: &PathNetwork,
    limits_m: &[f64],
    day_type: DayType,
    params: &DemandParams,
) -> Vec<f64> {
    let rates = daily_rates(table, day_type, params);
    let total: f64 = rates.iter().map(|r| r.rate).sum();
    if total == 0.0 {
        return vec![0.0; limits_m.len()];
    }
    let max = limits_m.iter().copied().fold(0.0, f64::max);
    let dist = stop_distances(table, &rates, net, max);
    limits_m
        .iter()
        .map(|&limit| {
            rates
                .iter()
                .filter(|r| dist.get(&(r.origin, r.dest)).is_some_and(|&d| d < limit))
                .map(|r| r.rate)
                .sum::<f64>()
                / total
        })
        .collect()
}

/// The (pair, hour) cells eligible for sampling and their daily rates.
pub fn eligible_rates(table: &BusOdTable, net: &PathNetwork, params: &DemandParams) -> Vec<DailyRate> {
    let rates: Vec<DailyRate> = daily_rates(table, params.day_type, params)
        .into_iter()
        .filter(|r| r.rate > 0.0)
        .collect();
    let dist = stop_distances(table, &rates, net, params.max_route_m);
    rates
        .into_iter()
        .filter(|r| dist.get(&(r.origin, r.dest)).is_some_and(|&d| d > 0.0 && d <= params.max_route_m))
        .collect()
}

/// Draws `n_t` trips for one day, with replacement, proportionally to the
/// daily rates of eligible cells. Endpoints are uniform building nodes of the
/// two stops, redrawn while the route is longer than the limit.
pub fn sample_trips(table: &BusOdTable, net: &PathNetwork, params: &DemandParams) -> Result<Vec<Trip>> {
    params.validate()?;
    let cells = eligible_rates(table, net, params);
    if cells.is_empty() {
        return Err(Error::NoEligiblePairs);
    }
    let weights = WeightedIndex::new(cells.iter().map(|c| c.rate)).map_err(|_| Error::NoEligiblePairs)?;
    let profile = SpeedProfile::uniform(params.user_speed_kmh);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trips = Vec::with_capacity(params.n_t);
    for _ in 0..params.n_t {
        let cell = cells[weights.sample(&mut rng)];
        let start_time = f64::from(cell.hour) * 3600.0 + rng.gen_range(0.0..3600.0);
        let (o, d) = (&table.stops[cell.origin], &table.stops[cell.dest]);
        let mut chosen = None;
        for _ in 0..BUILDING_ATTEMPTS {
            let s = *o.building_nodes.choose(&mut rng).expect("stop has buildings");
            let e = *d.building_nodes.choose(&mut rng).expect("stop has buildings");
            if s == e {
                continue;
            }
            if let Ok(path) = net.shortest_path(s, e, &profile) {
                if path.length <= params.max_route_m {
                    chosen = Some((s, e, path));
                    break;
                }
            }
        }
        let (s, e, path) = match chosen {
            Some(c) => c,
            None => {
                let path = net
                    .shortest_path(o.node, d.node, &profile)
                    .expect("eligible stop pairs are connected");
                (o.node, d.node, path)
            }
        };
        let end_time = start_time + path.time;
        let mut trip = Trip::between_nodes(net, 0, start_time, end_time, s, e);
        trip.route = RouteState::Routed(path);
        trips.push(trip);
    }
    sort_trips(&mut trips);
    for (i, t) in trips.iter_mut().enumerate() {
        t.id = i as u64;
    }
    Ok(trips)
}
