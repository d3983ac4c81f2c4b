//! Seeded synthetic instances and exhaustive reference solvers for small ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pathnet::{EdgeRecord, Node, PathNetwork, SpeedProfile};
use crate::shareability::ShareabilityGraph;
use crate::trips::{route_trips, sort_trips, Trip};

/// `cols x rows` lattice with integer edge lengths of `spacing` meters.
pub fn grid_network(cols: usize, rows: usize, spacing: u32) -> PathNetwork {
    assert!(cols >= 1 && rows >= 1);
    let id = |c: usize, r: usize| (r * cols + c) as u64;
    let mut nodes = Vec::with_capacity(cols * rows);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(Node {
                id: id(c, r),
                x: c as f64 * f64::from(spacing),
                y: r as f64 * f64::from(spacing),
            });
            if c + 1 < cols {
                edges.push(EdgeRecord::new(edges.len() as u64, id(c, r), id(c + 1, r), f64::from(spacing)));
            }
            if r + 1 < rows {
                edges.push(EdgeRecord::new(edges.len() as u64, id(c, r), id(c, r + 1), f64::from(spacing)));
            }
        }
    }
    PathNetwork::new(nodes, edges).expect("grid is well formed")
}

/// Connected random network: a random spanning tree plus extra edges, with
/// integer lengths at least the Euclidean distance of the endpoints.
pub fn random_network<R: Rng>(rng: &mut R, n_nodes: usize, extra_edges: usize) -> PathNetwork {
    assert!(n_nodes >= 2);
    let nodes: Vec<Node> = (0..n_nodes)
        .map(|i| Node {
            id: i as u64,
            x: rng.gen_range(0.0..1000.0f64).round(),
            y: rng.gen_range(0.0..1000.0f64).round(),
        })
        .collect();
    let length = |a: usize, b: usize, rng: &mut R| {
        let d = ((nodes[a].x - nodes[b].x).powi(2) + (nodes[a].y - nodes[b].y).powi(2)).sqrt();
        (d * rng.gen_range(1.0..1.5)).ceil().max(1.0)
    };
    let mut edges = Vec::new();
    for i in 1..n_nodes {
        let j = rng.gen_range(0..i);
        let l = length(i, j, rng);
        edges.push(EdgeRecord::new(edges.len() as u64, i as u64, j as u64, l));
    }
    for _ in 0..extra_edges {
        let a = rng.gen_range(0..n_nodes);
        let b = rng.gen_range(0..n_nodes);
        if a != b {
            let l = length(a, b, rng);
            edges.push(EdgeRecord::new(edges.len() as u64, a as u64, b as u64, l));
        }
    }
    PathNetwork::new(nodes, edges).expect("random network is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripGenParams {
    pub n_trips: usize,
    pub user_speed_kmh: f64,
    pub min_length_m: f64,
    pub max_length_m: f64,
    /// Share of trips drawn around the morning and evening peaks.
    pub peak_share: f64,
    /// Time window of the day in which trips start, seconds.
    pub window_s: (f64, f64),
}

impl Default for TripGenParams {
    fn default() -> Self {
        Self {
            n_trips: 500,
            user_speed_kmh: 5.0,
            min_length_m: 200.0,
            max_length_m: 2000.0,
            peak_share: 0.5,
            window_s: (6.0 * 3600.0, 23.0 * 3600.0),
        }
    }
}

fn start_time<R: Rng>(rng: &mut R, p: &TripGenParams) -> f64 {
    let (lo, hi) = p.window_s;
    if rng.gen_bool(p.peak_share.clamp(0.0, 1.0)) {
        // Triangular bumps of one hour half-width around 08:30 and 18:00.
        let centre: f64 = if rng.gen_bool(0.5) { 8.5 * 3600.0 } else { 18.0 * 3600.0 };
        let offset = (rng.gen_range(0.0..1.0) - rng.gen_range(0.0..1.0)) * 3600.0;
        (centre + offset).clamp(lo, hi - 1.0)
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Random trips on `net` whose routed length is within the configured band.
/// Durations follow from the route length at the user speed. The output is
/// sorted, routed, and numbered from 0.
pub fn random_trips<R: Rng>(rng: &mut R, net: &PathNetwork, p: &TripGenParams) -> Vec<Trip> {
    let profile = SpeedProfile::uniform(p.user_speed_kmh);
    let n = net.node_count();
    assert!(n >= 2);
    let mut trips = Vec::with_capacity(p.n_trips);
    let mut attempts = 0usize;
    while trips.len() < p.n_trips {
        attempts += 1;
        assert!(attempts < 1000 * (p.n_trips + 1), "length band admits no node pairs");
        let s = rng.gen_range(0..n);
        let e = rng.gen_range(0..n);
        if s == e {
            continue;
        }
        let Some(len) = net.network_distance(s, e) else { continue };
        if len < p.min_length_m || len > p.max_length_m {
            continue;
        }
        let t0 = start_time(rng, p).round();
        let duration = (len / profile.base_mps()).ceil().max(1.0);
        trips.push(Trip::between_nodes(net, 0, t0, t0 + duration, s, e));
    }
    route_trips(&mut trips, net, &profile);
    sort_trips(&mut trips);
    for (i, t) in trips.iter_mut().enumerate() {
        t.id = i as u64;
    }
    trips
}

/// A small random network (2 to `max_nodes` nodes) with 1 to `max_trips`
/// trips starting within one hour, sized so that chaining is sometimes but
/// not always possible.
pub fn random_small_instance<R: Rng>(rng: &mut R, max_nodes: usize, max_trips: usize) -> (PathNetwork, Vec<Trip>) {
    let n_nodes = rng.gen_range(2..=max_nodes.max(2));
    let extra = rng.gen_range(0..=n_nodes);
    let net = random_network(rng, n_nodes, extra);
    let n_trips = rng.gen_range(1..=max_trips.max(1));
    let mut trips: Vec<Trip> = (0..n_trips)
        .map(|_| {
            let s = rng.gen_range(0..n_nodes);
            let e = rng.gen_range(0..n_nodes);
            let t0 = f64::from(rng.gen_range(0..3600u32));
            let dur = f64::from(rng.gen_range(60..900u32));
            Trip::between_nodes(&net, 0, t0, t0 + dur, s, e)
        })
        .collect();
    route_trips(&mut trips, &net, &SpeedProfile::uniform(5.0));
    sort_trips(&mut trips);
    for (i, t) in trips.iter_mut().enumerate() {
        t.id = i as u64;
    }
    (net, trips)
}

/// Fewest chains covering every trip, by dynamic programming over subsets.
/// A subset is one chain when, taken in start order, every consecutive pair
/// is an edge. Intended for at most about 12 trips.
pub fn brute_force_path_cover(g: &ShareabilityGraph, trips: &[Trip]) -> usize {
    let n = g.n_trips();
    assert!(n <= 16, "exhaustive cover is exponential");
    let full = (1usize << n) - 1;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| trips[a].start_time.total_cmp(&trips[b].start_time).then(a.cmp(&b)));
    let is_chain: Vec<bool> = (0..=full)
        .map(|mask| {
            let members: Vec<usize> = order.iter().copied().filter(|&i| mask & (1 << i) != 0).collect();
            members.windows(2).all(|w| g.edge(w[0], w[1]).is_some())
        })
        .collect();
    let mut best = vec![usize::MAX; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // Sub-masks of `rest`, each joined with the lowest element.
        let mut sub = rest;
        loop {
            let chain = sub | low;
            if is_chain[chain] && best[mask ^ chain] != usize::MAX {
                best[mask] = best[mask].min(best[mask ^ chain] + 1);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    best[full]
}

/// Size of a maximum matching between trip tails and heads and the least
/// total edge distance among maximum matchings, by exhaustive enumeration.
pub fn brute_force_matching(g: &ShareabilityGraph) -> (usize, f64) {
    let edges: Vec<(usize, usize, f64)> = g.iter().map(|(i, j, e)| (i, j, e.distance_m)).collect();
    let mut by_tail: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.n_trips()];
    for &(i, j, d) in &edges {
        by_tail[i].push((j, d));
    }
    fn rec(i: usize, by_tail: &[Vec<(usize, f64)>], used: &mut [bool], size: usize, cost: f64, best: &mut (usize, f64)) {
        if i == by_tail.len() {
            if size > best.0 || (size == best.0 && cost < best.1) {
                *best = (size, cost);
            }
            return;
        }
        rec(i + 1, by_tail, used, size, cost, best);
        for &(j, d) in &by_tail[i] {
            if !used[j] {
                used[j] = true;
                rec(i + 1, by_tail, used, size + 1, cost + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = (0, 0.0);
    rec(0, &by_tail, &mut vec![false; g.n_trips()], 0, 0.0, &mut best);
    best
}
