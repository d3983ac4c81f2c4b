//! Shareability graph: which ordered trip pairs one vehicle can serve in sequence.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathnet::{PathNetwork, SpeedProfile, TIME_EPS};
use crate::trips::{Trip, SECONDS_PER_DAY};

/// Walking speed for the stationary-vehicle variant, 1 m/s.
pub const WALK_SPEED_MPS: f64 = 1.0;

/// Longest idle gap tested in unlimited mode (one day).
pub const UNLIMITED_CONNECTION_S: f64 = SECONDS_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConnectionLimit {
    Unlimited,
    Seconds(f64),
}

impl ConnectionLimit {
    pub fn hours(h: f64) -> Self {
        ConnectionLimit::Seconds(h * 3600.0)
    }

    pub fn effective_seconds(&self) -> f64 {
        match *self {
            ConnectionLimit::Unlimited => UNLIMITED_CONNECTION_S,
            ConnectionLimit::Seconds(s) => s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphKind {
    Relocating {
        profile: SpeedProfile,
        max_connection: ConnectionLimit,
    },
    Stationary {
        walk_distance_m: f64,
        keep_observed_sequences: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareEdge {
    pub to: u32,
    pub distance_m: f64,
    pub time_s: f64,
}

/// Directed acyclic graph over trips (indices into the input slice, which is
/// sorted by start time). Adjacency is stored flat, indexed by source.
#[derive(Clone, Debug, PartialEq)]
pub struct ShareabilityGraph {
    n_trips: usize,
    offsets: Vec<usize>,
    edges: Vec<ShareEdge>,
    pub kind: GraphKind,
}

impl ShareabilityGraph {
    pub fn from_adjacency(out: Vec<Vec<ShareEdge>>, kind: GraphKind) -> Self {
        let mut offsets = Vec::with_capacity(out.len() + 1);
        offsets.push(0);
        let mut edges = Vec::with_capacity(out.iter().map(Vec::len).sum());
        for list in &out {
            edges.extend_from_slice(list);
            offsets.push(edges.len());
        }
        Self {
            n_trips: out.len(),
            offsets,
            edges,
            kind,
        }
    }

    pub fn n_trips(&self) -> usize {
        self.n_trips
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, i: usize) -> &[ShareEdge] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&ShareEdge> {
        self.out_edges(i).iter().find(|e| e.to as usize == j)
    }

    /// All edges as `(from, to, edge)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &ShareEdge)> + '_ {
        (0..self.n_trips).flat_map(move |i| self.out_edges(i).iter().map(move |e| (i, e.to as usize, e)))
    }

    /// Writes `i,j,dist_m,time_s` rows after a `#`-prefixed JSON line holding the
    /// construction parameters.
    pub fn write_edge_list<W: Write>(&self, mut out: W, metadata_json: &str) -> Result<()> {
        let io = |e: std::io::Error| Error::Io {
            path: "<edge list output>".into(),
            source: e,
        };
        writeln!(out, "# {metadata_json}").map_err(io)?;
        writeln!(out, "i,j,dist_m,time_s").map_err(io)?;
        for (i, j, e) in self.iter() {
            writeln!(out, "{i},{j},{},{}", e.distance_m, e.time_s).map_err(io)?;
        }
        Ok(())
    }
}

fn check_sorted(trips: &[Trip]) {
    debug_assert!(
        trips.windows(2).all(|w| w[0].start_time <= w[1].start_time),
        "trips must be sorted by start time"
    );
}

/// Index of the first trip with `start_time >= t`.
fn first_starting_at_or_after(trips: &[Trip], t: f64) -> usize {
    trips.partition_point(|x| x.start_time < t)
}

/// Builds the relocating-vehicle graph: `i -> j` iff a vehicle finishing `i` can
/// relocate to the start of `j` in time, and the idle gap is within the limit.
pub fn build_graph(
    trips: &[Trip],
    net: &PathNetwork,
    profile: &SpeedProfile,
    max_connection: ConnectionLimit,
) -> ShareabilityGraph {
    check_sorted(trips);
    let limit = max_connection.effective_seconds();
    let out: Vec<Vec<ShareEdge>> = (0..trips.len())
        .into_par_iter()
        .map(|i| {
            let src = &trips[i];
            let lo = first_starting_at_or_after(trips, src.end_time);
            let hi = trips.partition_point(|x| x.start_time <= src.end_time + limit);
            if lo >= hi {
                return Vec::new();
            }
            let horizon = trips[hi - 1].start_time - src.end_time;
            let tree = net.search_from(src.end_node, profile, horizon);
            let mut edges = Vec::new();
            for (j, dst) in trips.iter().enumerate().take(hi).skip(lo) {
                if j == i {
                    continue;
                }
                let Some(time) = tree.time(dst.start_node) else { continue };
                let gap = dst.start_time - src.end_time;
                if time <= gap + TIME_EPS * gap.max(1.0) {
                    edges.push(ShareEdge {
                        to: j as u32,
                        distance_m: tree.length(dst.start_node).expect("settled"),
                        time_s: time,
                    });
                }
            }
            edges
        })
        .collect();
    ShareabilityGraph::from_adjacency(
        out,
        GraphKind::Relocating {
            profile: *profile,
            max_connection,
        },
    )
}

/// Builds the no-autonomy graph: vehicles stay put and the next user walks to
/// the bike, up to `walk_distance_m` along the network at 1 m/s. Optionally each
/// pair of consecutive trips of the same `vehicle_tag` is added as an edge.
pub fn build_stationary_graph(
    trips: &[Trip],
    net: &PathNetwork,
    walk_distance_m: f64,
    keep_observed_sequences: bool,
) -> ShareabilityGraph {
    check_sorted(trips);
    let mut out: Vec<Vec<ShareEdge>> = (0..trips.len())
        .into_par_iter()
        .map(|i| {
            let src = &trips[i];
            let tree = net.search_within_length(src.end_node, walk_distance_m);
            let lo = first_starting_at_or_after(trips, src.end_time);
            let mut edges = Vec::new();
            if tree.is_empty() {
                return edges;
            }
            for (j, dst) in trips.iter().enumerate().skip(lo) {
                if j == i {
                    continue;
                }
                let Some(dist) = tree.length(dst.start_node) else { continue };
                if dist > walk_distance_m {
                    continue;
                }
                let walk = dist / WALK_SPEED_MPS;
                if dst.start_time >= src.end_time + walk - TIME_EPS {
                    edges.push(ShareEdge {
                        to: j as u32,
                        distance_m: dist,
                        time_s: walk,
                    });
                }
            }
            edges
        })
        .collect();

    if keep_observed_sequences {
        let mut last_by_tag: HashMap<&str, usize> = HashMap::new();
        for (j, t) in trips.iter().enumerate() {
            let Some(tag) = t.vehicle_tag.as_deref() else { continue };
            if let Some(i) = last_by_tag.insert(tag, j) {
                let prev = &trips[i];
                if t.start_time >= prev.end_time && !out[i].iter().any(|e| e.to as usize == j) {
                    let distance_m = net
                        .network_distance(prev.end_node, t.start_node)
                        .unwrap_or_else(|| net.euclidean(prev.end_node, t.start_node));
                    out[i].push(ShareEdge {
                        to: j as u32,
                        distance_m,
                        time_s: 0.0,
                    });
                    out[i].sort_by_key(|e| e.to);
                }
            }
        }
    }
    ShareabilityGraph::from_adjacency(
        out,
        GraphKind::Stationary {
            walk_distance_m,
            keep_observed_sequences,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub edges: usize,
    pub mean_out_degree: f64,
    pub bin_width_m: f64,
    /// Edge counts per relocation-distance bin `[k*w, (k+1)*w)`.
    pub weight_histogram: Vec<usize>,
}

pub fn graph_stats(g: &ShareabilityGraph, bin_width_m: f64) -> GraphStats {
    let mut hist: Vec<usize> = Vec::new();
    for (_, _, e) in g.iter() {
        let bin = (e.distance_m / bin_width_m).floor() as usize;
        if hist.len() <= bin {
            hist.resize(bin + 1, 0);
        }
        hist[bin] += 1;
    }
    GraphStats {
        edges: g.edge_count(),
        mean_out_degree: if g.n_trips() == 0 {
            0.0
        } else {
            g.edge_count() as f64 / g.n_trips() as f64
        },
        bin_width_m,
        weight_histogram: hist,
    }
}
