//! Passenger trips: ingestion, routing, filtering and descriptive statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathnet::{PathNetwork, RoutedPath, SpeedProfile};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RouteState {
    Pending,
    Routed(RoutedPath),
    Unroutable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub id: u64,
    pub vehicle_tag: Option<String>,
    /// Seconds since the dataset epoch.
    pub start_time: f64,
    pub end_time: f64,
    /// Node indices into the network the trip was loaded against.
    pub start_node: usize,
    pub end_node: usize,
    /// Planar coordinates of the endpoints (meters).
    pub start_pos: (f64, f64),
    pub end_pos: (f64, f64),
    pub route: RouteState,
}

impl Trip {
    /// Trip between two nodes; positions are taken from the node coordinates.
    pub fn between_nodes(
        net: &PathNetwork,
        id: u64,
        start_time: f64,
        end_time: f64,
        start_node: usize,
        end_node: usize,
    ) -> Self {
        let s = net.node(start_node);
        let e = net.node(end_node);
        Self {
            id,
            vehicle_tag: None,
            start_time,
            end_time,
            start_node,
            end_node,
            start_pos: (s.x, s.y),
            end_pos: (e.x, e.y),
            route: RouteState::Pending,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.vehicle_tag = Some(tag.into());
        self
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    pub fn day_index(&self) -> i64 {
        (self.start_time / SECONDS_PER_DAY).floor() as i64
    }

    pub fn routed(&self) -> Option<&RoutedPath> {
        match &self.route {
            RouteState::Routed(p) => Some(p),
            _ => None,
        }
    }

    pub fn route_length(&self) -> Option<f64> {
        self.routed().map(|p| p.length)
    }
}

#[derive(Clone, Debug)]
pub struct LoadedTrips {
    pub trips: Vec<Trip>,
    pub rejected: usize,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Loads trips from CSV, snapping coordinate endpoints to the network.
///
/// Records whose end time is not after their start time, or that reference
/// unknown nodes, are skipped and counted in `rejected`.
pub fn load_trips(path: impl AsRef<Path>, net: &PathNetwork) -> Result<LoadedTrips> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let ctx = path.display().to_string();
    let need = |name: &str| {
        column(&headers, name)
            .ok_or_else(|| Error::schema(ctx.clone(), format!("missing column `{name}`")))
    };
    let id_col = need("trip_id")?;
    let tag_col = column(&headers, "vehicle_tag");
    let start_col = need("start_time_s")?;
    let end_col = need("end_time_s")?;

    enum Endpoints {
        Coords([usize; 4]),
        Nodes([usize; 2]),
    }
    let endpoints = if column(&headers, "start_x").is_some() {
        Endpoints::Coords([need("start_x")?, need("start_y")?, need("end_x")?, need("end_y")?])
    } else if column(&headers, "start_node").is_some() {
        Endpoints::Nodes([need("start_node")?, need("end_node")?])
    } else {
        return Err(Error::schema(ctx, "neither coordinate nor node endpoint columns present"));
    };

    let mut trips = Vec::new();
    let mut rejected = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let num = |col: usize| -> Result<f64> {
            record
                .get(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::schema(ctx.clone(), format!("record {}: bad number", line + 1)))
        };
        let id: u64 = record
            .get(id_col)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::schema(ctx.clone(), format!("record {}: bad trip_id", line + 1)))?;
        let start_time = num(start_col)?;
        let end_time = num(end_col)?;
        if !(end_time > start_time) {
            log::warn!("trip {id}: end time {end_time} not after start {start_time}, rejected");
            rejected += 1;
            continue;
        }
        let (start_node, end_node, start_pos, end_pos) = match endpoints {
            Endpoints::Coords([sx, sy, ex, ey]) => {
                let sp = (num(sx)?, num(sy)?);
                let ep = (num(ex)?, num(ey)?);
                let s = net
                    .snap_point(sp.0, sp.1)
                    .ok_or_else(|| Error::invalid("cannot snap trips to an empty network"))?;
                let e = net.snap_point(ep.0, ep.1).expect("network is non-empty");
                (s, e, sp, ep)
            }
            Endpoints::Nodes([sn, en]) => {
                let lookup = |col: usize| {
                    record
                        .get(col)
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .and_then(|id| net.node_ix(id))
                };
                match (lookup(sn), lookup(en)) {
                    (Some(s), Some(e)) => {
                        let (a, b) = (net.node(s), net.node(e));
                        (s, e, (a.x, a.y), (b.x, b.y))
                    }
                    _ => {
                        log::warn!("trip {id}: unknown endpoint node, rejected");
                        rejected += 1;
                        continue;
                    }
                }
            }
        };
        let vehicle_tag = tag_col
            .and_then(|c| record.get(c))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_owned);
        trips.push(Trip {
            id,
            vehicle_tag,
            start_time,
            end_time,
            start_node,
            end_node,
            start_pos,
            end_pos,
            route: RouteState::Pending,
        });
    }
    sort_trips(&mut trips);
    Ok(LoadedTrips { trips, rejected })
}

/// Sorts by start time, then end time, then id.
pub fn sort_trips(trips: &mut [Trip]) {
    trips.sort_by(|a, b| {
        a.start_time
            .total_cmp(&b.start_time)
            .then(a.end_time.total_cmp(&b.end_time))
            .then(a.id.cmp(&b.id))
    });
}

/// Writes trips in the node-id variant of the trips CSV schema.
pub fn write_trips_csv<W: Write>(trips: &[Trip], net: &PathNetwork, out: W) -> Result<()> {
    let wrap = |e: csv::Error| Error::csv("<trips output>", e);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trip_id",
        "vehicle_tag",
        "start_time_s",
        "end_time_s",
        "start_node",
        "end_node",
    ])
    .map_err(wrap)?;
    for t in trips {
        w.write_record([
            t.id.to_string(),
            t.vehicle_tag.clone().unwrap_or_default(),
            t.start_time.to_string(),
            t.end_time.to_string(),
            net.node(t.start_node).id.to_string(),
            net.node(t.end_node).id.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<trips output>".into(),
        source: e,
    })
}

/// Routes every trip on the time-shortest path under `profile`.
pub fn route_trips(trips: &mut [Trip], net: &PathNetwork, profile: &SpeedProfile) {
    trips.par_iter_mut().for_each(|t| {
        t.route = match net.shortest_path(t.start_node, t.end_node, profile) {
            Ok(p) => RouteState::Routed(p),
            Err(_) => RouteState::Unroutable,
        };
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub max_avg_speed_kmh: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_duration_s: 60.0,
            max_duration_s: 4.0 * 3600.0,
            max_avg_speed_kmh: 30.0,
        }
    }
}

impl FilterPolicy {
    /// Keeps everything.
    pub fn identity() -> Self {
        Self {
            min_duration_s: 0.0,
            max_duration_s: f64::INFINITY,
            max_avg_speed_kmh: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_duration_s < self.max_duration_s) {
            return Err(Error::invalid("min_duration must be below max_duration"));
        }
        if !(self.max_avg_speed_kmh > 0.0) {
            return Err(Error::invalid("max_avg_speed must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub unroutable: usize,
    pub too_short: usize,
    pub too_long: usize,
    pub too_fast: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.unroutable + self.too_short + self.too_long + self.too_fast
    }
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub kept: Vec<Trip>,
    pub dropped: DropCounts,
}

/// Drops unroutable trips and trips outside the duration or average-speed bounds.
/// Trips still pending are routed first on the distance-shortest path.
pub fn filter_trips(mut trips: Vec<Trip>, net: &PathNetwork, policy: &FilterPolicy) -> FilterOutcome {
    let pending: Vec<usize> = trips
        .iter()
        .enumerate()
        .filter(|(_, t)| t.route == RouteState::Pending)
        .map(|(i, _)| i)
        .collect();
    if !pending.is_empty() {
        let profile = SpeedProfile::uniform(3.6);
        let routes: Vec<RouteState> = pending
            .par_iter()
            .map(|&i| {
                let t = &trips[i];
                match net.shortest_path(t.start_node, t.end_node, &profile) {
                    Ok(p) => RouteState::Routed(p),
                    Err(_) => RouteState::Unroutable,
                }
            })
            .collect();
        for (i, r) in pending.into_iter().zip(routes) {
            trips[i].route = r;
        }
    }

    let mut dropped = DropCounts::default();
    let kept = trips
        .into_iter()
        .filter(|t| {
            let Some(length) = t.route_length() else {
                dropped.unroutable += 1;
                return false;
            };
            let duration = t.duration();
            if duration < policy.min_duration_s {
                dropped.too_short += 1;
                false
            } else if duration > policy.max_duration_s {
                dropped.too_long += 1;
                false
            } else if length / duration * 3.6 > policy.max_avg_speed_kmh {
                dropped.too_fast += 1;
                false
            } else {
                true
            }
        })
        .collect();
    FilterOutcome { kept, dropped }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcurrencyProfile {
    pub max_concurrent: usize,
    /// Step series: the count holds from each time until the next entry.
    pub series: Vec<(f64, usize)>,
}

/// Sweep over trip start/end events. Intervals are half-open, so a trip ending
/// exactly when another starts does not overlap it.
pub fn concurrency_profile(trips: &[Trip]) -> ConcurrencyProfile {
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(trips.len() * 2);
    for t in trips {
        events.push((t.start_time, 1));
        events.push((t.end_time, -1));
    }
    // Ends (-1) sort before starts (+1) at equal times.
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut current = 0i64;
    let mut max = 0i64;
    let mut series: Vec<(f64, usize)> = Vec::new();
    for (time, delta) in events {
        current += i64::from(delta);
        max = max.max(current);
        match series.last_mut() {
            Some(last) if last.0 == time => last.1 = current as usize,
            _ => series.push((time, current as usize)),
        }
    }
    ConcurrencyProfile {
        max_concurrent: max as usize,
        series,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityShare {
    pub start_share: f64,
    pub end_share: f64,
    pub either_share: f64,
}

/// Share of trips starting, ending, or either, within `threshold` meters of any POI.
pub fn proximity_share(trips: &[Trip], pois: &[(f64, f64)], threshold: f64) -> ProximityShare {
    if trips.is_empty() || pois.is_empty() {
        return ProximityShare {
            start_share: 0.0,
            end_share: 0.0,
            either_share: 0.0,
        };
    }
    let t2 = threshold * threshold;
    let near = |p: (f64, f64)| {
        pois.iter()
            .any(|q| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2) <= t2)
    };
    let (mut s, mut e, mut either) = (0usize, 0usize, 0usize);
    for t in trips {
        let ns = near(t.start_pos);
        let ne = near(t.end_pos);
        s += usize::from(ns);
        e += usize::from(ne);
        either += usize::from(ns || ne);
    }
    let n = trips.len() as f64;
    ProximityShare {
        start_share: s as f64 / n,
        end_share: e as f64 / n,
        either_share: either as f64 / n,
    }
}

/// Per-day usage of the current (tagged) fleet; only active tags count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayUsage {
    pub day: i64,
    pub trips: usize,
    pub used: usize,
    pub avg_trips_per_vehicle: f64,
    pub avg_time_used_per_vehicle_min: f64,
}

pub fn usage_stats(trips: &[Trip]) -> Vec<DayUsage> {
    let mut per_day: BTreeMap<i64, HashMap<&str, (usize, f64)>> = BTreeMap::new();
    for t in trips {
        let Some(tag) = t.vehicle_tag.as_deref() else { continue };
        let entry = per_day.entry(t.day_index()).or_default().entry(tag).or_default();
        entry.0 += 1;
        entry.1 += t.duration();
    }
    per_day
        .into_iter()
        .map(|(day, tags)| {
            let used = tags.len();
            let n: usize = tags.values().map(|v| v.0).sum();
            let secs: f64 = tags.values().map(|v| v.1).sum();
            DayUsage {
                day,
                trips: n,
                used,
                avg_trips_per_vehicle: n as f64 / used as f64,
                avg_time_used_per_vehicle_min: secs / 60.0 / used as f64,
            }
        })
        .collect()
}

pub fn write_usage_csv<W: Write>(rows: &[DayUsage], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv("<usage output>", e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<usage output>".into(),
        source: e,
    })
}

/// Groups trips by day index, preserving order within each day.
pub fn split_by_day(trips: &[Trip]) -> BTreeMap<i64, Vec<Trip>> {
    let mut days: BTreeMap<i64, Vec<Trip>> = BTreeMap::new();
    for t in trips {
        days.entry(t.day_index()).or_default().push(t.clone());
    }
    days
}

/// Distinct start nodes in first-seen order.
pub fn distinct_start_nodes(trips: &[Trip]) -> Vec<usize> {
    let mut seen = HashSet::new();
    trips
        .iter()
        .filter(|t| seen.insert(t.start_node))
        .map(|t| t.start_node)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathnet::{EdgeRecord, Node};

    fn line_net() -> PathNetwork {
        // 0 --1000 m-- 1 --1000 m-- 2
        PathNetwork::new(
            vec![
                Node { id: 0, x: 0.0, y: 0.0 },
                Node { id: 1, x: 1000.0, y: 0.0 },
                Node { id: 2, x: 2000.0, y: 0.0 },
                Node { id: 3, x: 9000.0, y: 0.0 },
            ],
            vec![EdgeRecord::new(0, 0, 1, 1000.0), EdgeRecord::new(1, 1, 2, 1000.0)],
        )
        .unwrap()
    }

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_empty_and_single() {
        let net = line_net();
        let empty = write_csv("trip_id,vehicle_tag,start_time_s,end_time_s,start_node,end_node\n");
        assert!(load_trips(empty.path(), &net).unwrap().trips.is_empty());

        let one = write_csv(
            "trip_id,vehicle_tag,start_time_s,end_time_s,start_node,end_node\n7,bike9,28800,29400,0,2\n",
        );
        let loaded = load_trips(one.path(), &net).unwrap();
        assert_eq!(loaded.trips.len(), 1);
        assert_eq!(loaded.trips[0].duration(), 600.0);
        assert_eq!(loaded.trips[0].vehicle_tag.as_deref(), Some("bike9"));
    }

    #[test]
    fn load_rejects_backwards_records_and_sorts() {
        let net = line_net();
        let f = write_csv(
            "trip_id,vehicle_tag,start_time_s,end_time_s,start_x,start_y,end_x,end_y\n\
             1,,500,400,0,0,10,0\n\
             2,,900,1000,990,3,2010,0\n\
             3,,100,200,0,0,1000,0\n",
        );
        let loaded = load_trips(f.path(), &net).unwrap();
        assert_eq!(loaded.rejected, 1);
        let ids: Vec<u64> = loaded.trips.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![3, 2]);
        assert_eq!(loaded.trips[1].start_node, 1);
        assert_eq!(loaded.trips[1].end_node, 2);
    }

    #[test]
    fn speed_filter() {
        let net = line_net();
        let fast = Trip::between_nodes(&net, 1, 0.0, 60.0, 0, 1);
        let slow = Trip::between_nodes(&net, 2, 0.0, 600.0, 0, 1);
        let out = filter_trips(vec![fast, slow], &net, &FilterPolicy::default());
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, 2);
        assert_eq!(out.dropped.too_fast, 1);
    }

    #[test]
    fn unroutable_is_dropped() {
        let net = line_net();
        let t = Trip::between_nodes(&net, 1, 0.0, 6000.0, 0, 3);
        let out = filter_trips(vec![t], &net, &FilterPolicy::identity());
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped.unroutable, 1);
    }

    #[test]
    fn identity_policy_keeps_all_routable() {
        let net = line_net();
        let trips: Vec<Trip> = (0..5)
            .map(|i| Trip::between_nodes(&net, i, 0.0, 1.0 + i as f64, 0, 2))
            .collect();
        let out = filter_trips(trips, &net, &FilterPolicy::identity());
        assert_eq!(out.kept.len(), 5);
    }

    #[test]
    fn routing_examples() {
        let net = line_net();
        let mut trips = vec![
            Trip::between_nodes(&net, 1, 0.0, 10.0, 1, 1),
            Trip::between_nodes(&net, 2, 0.0, 10.0, 0, 2),
            Trip::between_nodes(&net, 3, 5.0, 10.0, 0, 2),
        ];
        route_trips(&mut trips, &net, &SpeedProfile::uniform(5.0));
        assert_eq!(trips[0].route_length(), Some(0.0));
        assert_eq!(trips[1].routed().unwrap().edge_ids(&net), vec![0, 1]);
        assert_eq!(trips[1].route, trips[2].route);
    }

    #[test]
    fn concurrency_examples() {
        let net = line_net();
        let a = Trip::between_nodes(&net, 1, 0.0, 10.0, 0, 1);
        let b = Trip::between_nodes(&net, 2, 10.0, 20.0, 0, 1);
        let c = Trip::between_nodes(&net, 3, 5.0, 15.0, 0, 1);
        assert_eq!(concurrency_profile(&[a.clone(), b.clone()]).max_concurrent, 1);
        assert_eq!(concurrency_profile(&[a, c]).max_concurrent, 2);
        assert_eq!(concurrency_profile(&[]).max_concurrent, 0);
    }

    #[test]
    fn proximity_examples() {
        let net = line_net();
        let trips = vec![
            Trip::between_nodes(&net, 1, 0.0, 10.0, 0, 1),
            Trip::between_nodes(&net, 2, 0.0, 10.0, 2, 0),
        ];
        let none = proximity_share(&trips, &[], 200.0);
        assert_eq!((none.start_share, none.end_share, none.either_share), (0.0, 0.0, 0.0));
        let starts = proximity_share(&trips, &[(0.0, 0.0), (2000.0, 0.0)], 1.0);
        assert_eq!(starts.start_share, 1.0);
        // Trip 2 ends at a POI as well; either counts it once.
        assert_eq!(starts.either_share, 1.0);
        assert_eq!(starts.end_share, 0.5);
    }

    #[test]
    fn usage_examples() {
        let net = line_net();
        let one_tag = vec![
            Trip::between_nodes(&net, 1, 0.0, 60.0, 0, 1).with_tag("a"),
            Trip::between_nodes(&net, 2, 100.0, 220.0, 0, 1).with_tag("a"),
        ];
        let rows = usage_stats(&one_tag);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].avg_trips_per_vehicle, 2.0);
        assert_eq!(rows[0].avg_time_used_per_vehicle_min, 3.0);

        let two_tags = vec![
            Trip::between_nodes(&net, 1, 0.0, 60.0, 0, 1).with_tag("a"),
            Trip::between_nodes(&net, 2, 0.0, 60.0, 0, 1).with_tag("b"),
        ];
        assert_eq!(usage_stats(&two_tags)[0].avg_trips_per_vehicle, 1.0);
    }

    #[test]
    fn usage_csv_columns() {
        let mut buf = Vec::new();
        write_usage_csv(
            &[DayUsage {
                day: 0,
                trips: 2,
                used: 1,
                avg_trips_per_vehicle: 2.0,
                avg_time_used_per_vehicle_min: 3.0,
            }],
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "day,trips,used,avg_trips_per_vehicle,avg_time_used_per_vehicle_min"
        );
    }
}
