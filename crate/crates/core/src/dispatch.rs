//! Online dispatch simulation with batched assignment, and the look-ahead
//! (limited oracle) variant.
//!
//! Time advances in batches at multiples of `t_b`. Vehicles that finish a
//! trip between two batches become assignable at the next batch.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{power_law_fit, PowerLawFit};
use crate::matching::min_cost_max_matching;
use crate::pathnet::{kmh_to_mps, PathNetwork, SearchTree, SpeedProfile};
use crate::shareability::{build_graph, ConnectionLimit};
use crate::trips::{distinct_start_nodes, Trip};

/// Absolute slack (seconds) on time comparisons.
const SLACK_S: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Batch interval, seconds.
    pub t_b: f64,
    /// Maximum wait, seconds.
    pub t_w: f64,
    /// Maximum passenger walk to meet the vehicle, meters.
    pub d_walk: f64,
    pub walk_speed_kmh: f64,
    /// Look-ahead window, seconds. Zero for the pure online model.
    pub t_la: f64,
    pub seed: u64,
    pub profile: SpeedProfile,
}

impl SimParams {
    pub fn online(profile: SpeedProfile) -> Self {
        Self {
            t_b: 60.0,
            t_w: 300.0,
            d_walk: 0.0,
            walk_speed_kmh: 3.6,
            t_la: 0.0,
            seed: 0,
            profile,
        }
    }

    pub fn lookahead(profile: SpeedProfile, t_la: f64) -> Self {
        Self {
            t_b: 300.0,
            t_la,
            ..Self::online(profile)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_b > 0.0) {
            return Err(Error::invalid(format!("t_b must be positive, got {}", self.t_b)));
        }
        if !(self.t_w >= 0.0) {
            return Err(Error::invalid(format!("t_w must be non-negative, got {}", self.t_w)));
        }
        if !(self.d_walk >= 0.0) {
            return Err(Error::invalid(format!("d_walk must be non-negative, got {}", self.d_walk)));
        }
        if self.d_walk > 0.0 && !(self.walk_speed_kmh > 0.0) {
            return Err(Error::invalid("walk speed must be positive"));
        }
        if !(self.t_la >= 0.0) {
            return Err(Error::invalid(format!("t_la must be non-negative, got {}", self.t_la)));
        }
        self.profile.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    Idle,
    Relocating,
    InTrip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: usize,
    pub status: VehicleStatus,
    /// Current node when idle, destination otherwise.
    pub node: usize,
    pub pickup_at: f64,
    pub busy_until: f64,
}

impl VehicleState {
    fn idle(vehicle_id: usize, node: usize) -> Self {
        Self {
            vehicle_id,
            status: VehicleStatus::Idle,
            node,
            pickup_at: f64::NEG_INFINITY,
            busy_until: f64::NEG_INFINITY,
        }
    }

    fn advance(&mut self, now: f64) {
        self.status = if now >= self.busy_until {
            VehicleStatus::Idle
        } else if now >= self.pickup_at {
            VehicleStatus::InTrip
        } else {
            VehicleStatus::Relocating
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Served,
    /// Served by a vehicle created for it.
    Spawned,
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub trip_id: u64,
    pub request_s: f64,
    pub assign_s: Option<f64>,
    pub pickup_s: Option<f64>,
    pub vehicle_id: Option<usize>,
    pub walk_m: f64,
    pub outcome: Outcome,
    /// End of the trip, when the vehicle becomes free again.
    #[serde(skip)]
    pub release_s: Option<f64>,
}

impl RequestRecord {
    pub fn wait_s(&self) -> Option<f64> {
        self.pickup_s.map(|p| p - self.request_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub fleet_size: usize,
    pub n_requests: usize,
    pub served: usize,
    pub spawned: usize,
    pub dropped: usize,
    /// Over every served request, spawned ones included.
    pub mean_wait_s: f64,
    pub served_within_tw_fraction: f64,
    pub relocation_km: f64,
    pub mean_vehicle_distance_km: f64,
    pub n_days: usize,
    pub utilization: f64,
    #[serde(skip)]
    pub records: Vec<RequestRecord>,
}

impl SimResult {
    fn summarize(trips: &[Trip], records: Vec<RequestRecord>, fleet_size: usize, relocation_m: f64) -> Self {
        let n = records.len();
        let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
        let served = count(Outcome::Served);
        let spawned = count(Outcome::Spawned);
        let waits: Vec<f64> = records.iter().filter_map(RequestRecord::wait_s).collect();
        let mean_wait_s = if waits.is_empty() {
            0.0
        } else {
            waits.iter().sum::<f64>() / waits.len() as f64
        };
        let n_days = day_span(trips);
        let trip_m: f64 = trips
            .iter()
            .zip(&records)
            .filter(|(_, r)| r.outcome != Outcome::Dropped)
            .map(|(t, _)| t.route_length().unwrap_or(0.0))
            .sum();
        let per_vehicle = |total: f64| {
            if fleet_size == 0 {
                0.0
            } else {
                total / (fleet_size * n_days.max(1)) as f64
            }
        };
        Self {
            fleet_size,
            n_requests: n,
            served,
            spawned,
            dropped: count(Outcome::Dropped),
            mean_wait_s,
            served_within_tw_fraction: if n == 0 { 0.0 } else { (served + spawned) as f64 / n as f64 },
            relocation_km: relocation_m / 1000.0,
            mean_vehicle_distance_km: per_vehicle(trip_m + relocation_m) / 1000.0,
            n_days,
            utilization: per_vehicle((served + spawned) as f64),
            records,
        }
    }

    /// CSV rows `trip_id,request_s,assign_s,pickup_s,vehicle_id,walk_m,outcome`.
    pub fn write_event_log<W: std::io::Write>(&self, out: W) -> Result<()> {
        let wrap = |e: csv::Error| Error::csv("<event log>", e);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trip_id", "request_s", "assign_s", "pickup_s", "vehicle_id", "walk_m", "outcome"])
            .map_err(wrap)?;
        for r in &self.records {
            let outcome = match r.outcome {
                Outcome::Served => "served",
                Outcome::Spawned => "spawned",
                Outcome::Dropped => "dropped",
            };
            w.write_record([
                r.trip_id.to_string(),
                r.request_s.to_string(),
                opt(r.assign_s),
                opt(r.pickup_s),
                r.vehicle_id.map(|v| v.to_string()).unwrap_or_default(),
                r.walk_m.to_string(),
                outcome.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<event log>".into(),
            source: e,
        })
    }
}

/// Number of calendar days touched by the trips (at least 1).
pub fn day_span(trips: &[Trip]) -> usize {
    let mut days: Vec<i64> = trips.iter().map(Trip::day_index).collect();
    days.sort_unstable();
    days.dedup();
    days.len().max(1)
}

/// Memoized bounded single-source searches, keyed by source node.
#[derive(Debug)]
pub struct DistanceCache {
    profile: SpeedProfile,
    max_time: f64,
    trees: HashMap<usize, SearchTree>,
}

impl DistanceCache {
    pub fn new(profile: SpeedProfile, max_time: f64) -> Self {
        Self {
            profile,
            max_time,
            trees: HashMap::new(),
        }
    }

    /// Unit-speed cache whose times equal network lengths in meters.
    pub fn walking(max_length_m: f64) -> Self {
        Self::new(SpeedProfile::uniform(3.6), max_length_m)
    }

    pub fn tree(&mut self, net: &PathNetwork, node: usize) -> &SearchTree {
        let (profile, max_time) = (self.profile, self.max_time);
        self.trees
            .entry(node)
            .or_insert_with(|| net.search_from(node, &profile, max_time))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Request {
    /// Index of the trip in the simulated list.
    pub trip: usize,
    pub request_s: f64,
    pub node: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdleVehicle {
    pub vehicle_id: usize,
    pub node: usize,
}

/// A feasible (request, vehicle) pairing with its best meeting point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    /// Index into the pending slice.
    pub request: usize,
    pub vehicle_id: usize,
    pub meeting_node: usize,
    pub pickup_s: f64,
    pub walk_m: f64,
    pub drive_m: f64,
}

/// Search caches shared by the batches of one simulation.
#[derive(Debug)]
pub struct Caches {
    pub drive: DistanceCache,
    pub walk: DistanceCache,
}

impl Caches {
    pub fn new(params: &SimParams) -> Self {
        Self {
            drive: DistanceCache::new(params.profile, params.t_w),
            walk: DistanceCache::walking(params.d_walk),
        }
    }
}

/// All feasible pairs at batch time `now`, keeping per pair the meeting node
/// with the earliest pickup (then shortest walk, then smallest node).
pub fn feasible_pairs(
    pending: &[Request],
    idle: &[IdleVehicle],
    now: f64,
    params: &SimParams,
    net: &PathNetwork,
    caches: &mut Caches,
) -> Vec<Candidate> {
    let mut at_node: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in idle {
        at_node.entry(v.node).or_default().push(v.vehicle_id);
    }
    let walk_mps = kmh_to_mps(params.walk_speed_kmh);
    let mut out = Vec::new();
    for (ri, req) in pending.iter().enumerate() {
        let deadline = req.request_s + params.t_w + SLACK_S;
        let meeting: Vec<(usize, f64)> = if params.d_walk > 0.0 {
            caches
                .walk
                .tree(net, req.node)
                .settled()
                .map(|(m, _, len)| (m, len))
                .collect()
        } else {
            vec![(req.node, 0.0)]
        };
        let mut best: HashMap<usize, Candidate> = HashMap::new();
        for (m, walk_m) in meeting {
            let walk_s = if walk_m > 0.0 { walk_m / walk_mps } else { 0.0 };
            let walk_done = now + walk_s;
            if walk_done > deadline {
                continue;
            }
            for (a, drive_s, drive_m) in caches.drive.tree(net, m).settled() {
                let Some(vehicles) = at_node.get(&a) else { continue };
                let pickup_s = (now + drive_s).max(walk_done);
                if pickup_s > deadline {
                    continue;
                }
                for &vehicle_id in vehicles {
                    let cand = Candidate {
                        request: ri,
                        vehicle_id,
                        meeting_node: m,
                        pickup_s,
                        walk_m,
                        drive_m,
                    };
                    let better = match best.get(&vehicle_id) {
                        None => true,
                        Some(b) => (pickup_s, walk_m, m) < (b.pickup_s, b.walk_m, b.meeting_node),
                    };
                    if better {
                        best.insert(vehicle_id, cand);
                    }
                }
            }
        }
        let mut found: Vec<Candidate> = best.into_values().collect();
        found.sort_by_key(|c| c.vehicle_id);
        out.extend(found);
    }
    out
}

/// Assigns idle vehicles to pending requests: most requests served first,
/// then least total wait, then lower vehicle ids.
pub fn batch_assign(
    pending: &[Request],
    idle: &[IdleVehicle],
    now: f64,
    params: &SimParams,
    net: &PathNetwork,
    caches: &mut Caches,
) -> Vec<Candidate> {
    let cands = feasible_pairs(pending, idle, now, params, net, caches);
    if cands.is_empty() {
        return Vec::new();
    }
    let mut vehicles: Vec<usize> = cands.iter().map(|c| c.vehicle_id).collect();
    vehicles.sort_unstable();
    vehicles.dedup();
    let rank: HashMap<usize, usize> = vehicles.iter().enumerate().map(|(r, &v)| (v, r)).collect();
    // Any change in whole milliseconds of wait outweighs the id tie-break sum.
    let scale = (vehicles.len() * vehicles.len() + 1) as i64;
    let edges: Vec<(usize, usize, i64)> = cands
        .iter()
        .map(|c| {
            let wait_ms = ((c.pickup_s - pending[c.request].request_s).max(0.0) * 1000.0).round() as i64;
            (c.request, rank[&c.vehicle_id], wait_ms * scale + rank[&c.vehicle_id] as i64)
        })
        .collect();
    let m = min_cost_max_matching(pending.len(), vehicles.len(), &edges);
    let mut chosen: Vec<Candidate> = m
        .pairs()
        .map(|(ri, vr)| {
            *cands
                .iter()
                .find(|c| c.request == ri && c.vehicle_id == vehicles[vr])
                .expect("matched pair is a candidate")
        })
        .collect();
    chosen.sort_by_key(|c| c.request);
    chosen
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FleetMode {
    Growth,
    Fixed,
}

fn batch_at_or_after(t: f64, t_b: f64) -> f64 {
    (t / t_b).ceil() * t_b
}

fn check_sorted(trips: &[Trip]) {
    assert!(
        trips.windows(2).all(|w| w[0].start_time <= w[1].start_time),
        "trips must be sorted by start time"
    );
}

fn run_online(trips: &[Trip], net: &PathNetwork, params: &SimParams, mode: FleetMode, mut vehicles: Vec<VehicleState>) -> SimResult {
    check_sorted(trips);
    let mut caches = Caches::new(params);
    let mut records: Vec<Option<RequestRecord>> = vec![None; trips.len()];
    let mut pending: Vec<usize> = Vec::new();
    let mut next = 0usize;
    let mut relocation_m = 0.0;
    let mut now = match trips.first() {
        Some(t) => batch_at_or_after(t.start_time, params.t_b),
        None => 0.0,
    };

    while next < trips.len() || !pending.is_empty() {
        if pending.is_empty() {
            now = now.max(batch_at_or_after(trips[next].start_time, params.t_b));
        }
        while next < trips.len() && trips[next].start_time <= now {
            pending.push(next);
            next += 1;
        }
        for v in vehicles.iter_mut() {
            v.advance(now);
        }
        let idle: Vec<IdleVehicle> = vehicles
            .iter()
            .filter(|v| v.status == VehicleStatus::Idle)
            .map(|v| IdleVehicle {
                vehicle_id: v.vehicle_id,
                node: v.node,
            })
            .collect();
        let requests: Vec<Request> = pending
            .iter()
            .map(|&i| Request {
                trip: i,
                request_s: trips[i].start_time,
                node: trips[i].start_node,
            })
            .collect();
        let mut assigned = vec![false; pending.len()];
        if !idle.is_empty() {
            for c in batch_assign(&requests, &idle, now, params, net, &mut caches) {
                let trip = &trips[requests[c.request].trip];
                let v = &mut vehicles[c.vehicle_id];
                v.pickup_at = c.pickup_s;
                v.busy_until = c.pickup_s + trip.duration();
                v.node = trip.end_node;
                v.advance(now);
                relocation_m += c.drive_m;
                assigned[c.request] = true;
                records[requests[c.request].trip] = Some(RequestRecord {
                    trip_id: trip.id,
                    request_s: trip.start_time,
                    assign_s: Some(now),
                    pickup_s: Some(c.pickup_s),
                    vehicle_id: Some(c.vehicle_id),
                    walk_m: c.walk_m,
                    outcome: Outcome::Served,
                    release_s: Some(v.busy_until),
                });
            }
        }
        let next_batch = now + params.t_b;
        let mut still = Vec::with_capacity(pending.len());
        for (k, &i) in pending.iter().enumerate() {
            if assigned[k] {
                continue;
            }
            let trip = &trips[i];
            let expiry = trip.start_time + params.t_w;
            if next_batch <= expiry + SLACK_S {
                still.push(i);
                continue;
            }
            records[i] = Some(match mode {
                FleetMode::Growth => {
                    let id = vehicles.len();
                    let mut v = VehicleState::idle(id, trip.end_node);
                    v.pickup_at = expiry;
                    v.busy_until = expiry + trip.duration();
                    v.advance(now);
                    vehicles.push(v);
                    RequestRecord {
                        trip_id: trip.id,
                        request_s: trip.start_time,
                        assign_s: Some(expiry),
                        pickup_s: Some(expiry),
                        vehicle_id: Some(id),
                        walk_m: 0.0,
                        outcome: Outcome::Spawned,
                        release_s: Some(v.busy_until),
                    }
                }
                FleetMode::Fixed => RequestRecord {
                    trip_id: trip.id,
                    request_s: trip.start_time,
                    assign_s: None,
                    pickup_s: None,
                    vehicle_id: None,
                    walk_m: 0.0,
                    outcome: Outcome::Dropped,
                    release_s: None,
                },
            });
        }
        pending = still;
        now = next_batch;
    }
    let records: Vec<RequestRecord> = records.into_iter().map(|r| r.expect("every request resolved")).collect();
    SimResult::summarize(trips, records, vehicles.len(), relocation_m)
}

/// Online model starting from an empty fleet: a request about to go unserved
/// gets a new vehicle at its start node, picked up at the waiting limit.
pub fn simulate_online_growth(trips: &[Trip], net: &PathNetwork, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    Ok(run_online(trips, net, params, FleetMode::Growth, Vec::new()))
}

/// Initial vehicle nodes: uniform draws (seeded) over distinct trip start nodes.
/// A larger fleet extends the placement of a smaller one with the same seed.
pub fn initial_placement(trips: &[Trip], fleet_size: usize, seed: u64) -> Vec<usize> {
    let mut nodes = distinct_start_nodes(trips);
    nodes.sort_unstable();
    if nodes.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..fleet_size).map(|_| *nodes.choose(&mut rng).expect("non-empty")).collect()
}

/// Online model with a fixed fleet; requests unserved within `t_w` are dropped.
pub fn simulate_online_fixed(trips: &[Trip], net: &PathNetwork, fleet_size: usize, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    let vehicles = initial_placement(trips, fleet_size, params.seed)
        .into_iter()
        .enumerate()
        .map(|(id, node)| VehicleState::idle(id, node))
        .collect();
    let mut result = run_online(trips, net, params, FleetMode::Fixed, vehicles);
    result.fleet_size = fleet_size;
    Ok(result)
}

#[derive(Clone, Copy, Debug)]
struct Availability {
    time: f64,
    node: usize,
}

/// Limited-oracle model: every `t_b` the trips starting within `t_la` are
/// planned jointly with the current vehicles as a minimum path cover, and the
/// parts of the plan that cannot wait until the next batch are committed.
/// Trips are served without waiting; a trip no vehicle can reach in time gets
/// a new vehicle at its start.
pub fn simulate_lookahead(trips: &[Trip], net: &PathNetwork, params: &SimParams) -> Result<SimResult> {
    params.validate()?;
    if params.t_la < params.t_b {
        return Err(Error::invalid(format!(
            "look-ahead window {} s is shorter than the batch interval {} s",
            params.t_la, params.t_b
        )));
    }
    check_sorted(trips);
    let n = trips.len();
    let graph = build_graph(trips, net, &params.profile, ConnectionLimit::Unlimited);
    let mut cache = DistanceCache::new(params.profile, f64::INFINITY);
    let mut vehicles: Vec<Availability> = Vec::new();
    let mut vehicle_of: Vec<Option<usize>> = vec![None; n];
    let mut records: Vec<Option<RequestRecord>> = vec![None; n];
    let mut open: Vec<usize> = (0..n).collect();
    let mut relocation_m = 0.0;
    let mut batch = match trips.first() {
        Some(t) => (t.start_time / params.t_b).floor() * params.t_b,
        None => 0.0,
    };

    while !open.is_empty() {
        let first = trips[open[0]].start_time;
        if first >= batch + params.t_la {
            let k = ((first - params.t_la) / params.t_b).floor() + 1.0;
            batch = batch.max(k * params.t_b);
        }
        let horizon = batch + params.t_la;
        let commit_before = batch + params.t_b;
        let known: Vec<usize> = open.iter().copied().take_while(|&j| trips[j].start_time < horizon).collect();
        let pos: HashMap<usize, usize> = known.iter().enumerate().map(|(p, &j)| (j, p)).collect();
        let nv = vehicles.len();

        // Left side: vehicles, then known trips as predecessors.
        let mut edges: Vec<(usize, usize, i64)> = Vec::new();
        let mut reloc: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
        for (p, &j) in known.iter().enumerate() {
            let tj = &trips[j];
            let tree = cache.tree(net, tj.start_node);
            for (v, av) in vehicles.iter().enumerate() {
                let Some(tau) = tree.time(av.node) else { continue };
                if av.time.max(batch) + tau <= tj.start_time + SLACK_S {
                    let len = tree.length(av.node).expect("settled");
                    edges.push((v, p, len.round() as i64));
                    reloc.insert((v, p), (tau, len));
                }
            }
        }
        for (pi, &i) in known.iter().enumerate() {
            for e in graph.out_edges(i) {
                if let Some(&pj) = pos.get(&(e.to as usize)) {
                    edges.push((nv + pi, pj, e.distance_m.round() as i64));
                    reloc.insert((nv + pi, pj), (e.time_s, e.distance_m));
                }
            }
        }
        let m = min_cost_max_matching(nv + known.len(), known.len(), &edges);

        let mut committed = vec![false; known.len()];
        for (p, &j) in known.iter().enumerate() {
            let tj = &trips[j];
            let pred = m.right_to_left[p];
            let vehicle = match pred {
                None if tj.start_time < commit_before => {
                    vehicles.push(Availability {
                        time: tj.start_time,
                        node: tj.start_node,
                    });
                    Some((vehicles.len() - 1, 0.0, Outcome::Spawned))
                }
                None => None,
                Some(l) => {
                    let (tau, len) = reloc[&(l, p)];
                    let urgent = tj.start_time - tau < commit_before;
                    if l < nv {
                        urgent.then_some((l, len, Outcome::Served))
                    } else if committed[l - nv] && urgent {
                        let v = vehicle_of[known[l - nv]].expect("committed trip has a vehicle");
                        Some((v, len, Outcome::Served))
                    } else {
                        debug_assert!(tj.start_time >= commit_before, "due trip left unplanned");
                        None
                    }
                }
            };
            if let Some((v, len, outcome)) = vehicle {
                committed[p] = true;
                vehicle_of[j] = Some(v);
                relocation_m += len;
                // The vehicle is dispatched once it is free and the batch has run.
                let dispatched = vehicles[v].time.max(batch).min(tj.start_time);
                vehicles[v] = Availability {
                    time: tj.end_time,
                    node: tj.end_node,
                };
                records[j] = Some(RequestRecord {
                    trip_id: tj.id,
                    request_s: tj.start_time,
                    assign_s: Some(dispatched),
                    pickup_s: Some(tj.start_time),
                    vehicle_id: Some(v),
                    walk_m: 0.0,
                    outcome,
                    release_s: Some(tj.end_time),
                });
            }
        }
        open.retain(|&j| vehicle_of[j].is_none());
        batch += params.t_b;
    }
    let records: Vec<RequestRecord> = records.into_iter().map(|r| r.expect("every trip committed")).collect();
    Ok(SimResult::summarize(trips, records, vehicles.len(), relocation_m))
}

/// Idle vehicles needed so every point of `area_km2` lies within `v_r * t_w`
/// of one: each vehicle covers the square inscribed in its reachable disc,
/// of area `2 r^2`.
pub fn standby_bound(area_km2: f64, v_r_kmh: f64, t_w_s: f64) -> u64 {
    assert!(area_km2 > 0.0 && v_r_kmh > 0.0 && t_w_s > 0.0, "standby bound needs positive inputs");
    let r_km = v_r_kmh * t_w_s / 3600.0;
    (area_km2 / (2.0 * r_km * r_km)).round() as u64
}

/// Smallest fixed fleet (by bisection, same seed throughout) whose served
/// fraction reaches `target`, to within `tolerance` vehicles.
pub fn fleet_for_service_level(
    trips: &[Trip],
    net: &PathNetwork,
    params: &SimParams,
    target: f64,
    tolerance: usize,
) -> Result<usize> {
    params.validate()?;
    if target <= 0.0 {
        return Ok(1);
    }
    let served = |fleet: usize| -> Result<f64> {
        Ok(simulate_online_fixed(trips, net, fleet, params)?.served_within_tw_fraction)
    };
    let mut hi = trips.len();
    if served(hi)? < target {
        return Err(Error::UnattainableTarget { target, fleet: hi });
    }
    let mut lo = 0usize;
    let tolerance = tolerance.max(1);
    while hi - lo > tolerance {
        let mid = lo + (hi - lo) / 2;
        if served(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Fleet size against relocation speed in log-log space.
pub fn fleet_scaling(speeds_kmh: &[f64], fleets: &[usize]) -> Option<PowerLawFit> {
    let ys: Vec<f64> = fleets.iter().map(|&f| f as f64).collect();
    power_law_fit(speeds_kmh, &ys)
}

/// Largest number of vehicles simultaneously committed, from the event log.
pub fn max_simultaneous_commitments(records: &[RequestRecord]) -> usize {
    let intervals: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| Some((r.assign_s?, r.release_s?)))
        .collect();
    let mut events: Vec<(f64, i32)> = intervals.iter().flat_map(|&(a, b)| [(a, 1), (b, -1)]).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cur = 0i64;
    let mut max = 0i64;
    for (_, d) in events {
        cur += i64::from(d);
        max = max.max(cur);
    }
    max as usize
}

/// Checks that no vehicle holds two overlapping commitments. Returns the
/// first offending trip id.
pub fn find_double_booking(records: &[RequestRecord]) -> Option<u64> {
    let mut by_vehicle: HashMap<usize, Vec<(f64, f64, u64)>> = HashMap::new();
    for r in records {
        if let (Some(v), Some(a), Some(rel)) = (r.vehicle_id, r.assign_s, r.release_s) {
            by_vehicle.entry(v).or_default().push((a, rel, r.trip_id));
        }
    }
    let mut worst: Option<u64> = None;
    for list in by_vehicle.values_mut() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in list.windows(2) {
            if w[1].0 < w[0].1 - SLACK_S {
                worst = Some(worst.map_or(w[1].2, |x| x.min(w[1].2)));
            }
        }
    }
    worst
}
