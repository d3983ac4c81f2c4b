//! Oracle fleet sizing: minimum path cover of the shareability graph via
//! bipartite matching, in unweighted and minimum-relocation-distance variants.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::matching::{hopcroft_karp, min_cost_max_matching, Matching};
use crate::pathnet::{PathNetwork, SpeedProfile};
use crate::shareability::{build_graph, ConnectionLimit, ShareabilityGraph};
use crate::trips::Trip;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverVariant {
    Unweighted,
    Weighted,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleUsage {
    pub trips: usize,
    /// Passenger plus relocation distance.
    pub distance_m: f64,
    /// Time spent serving trips.
    pub time_used_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetSolution {
    pub variant: CoverVariant,
    pub n_trips: usize,
    /// Trip indices per vehicle, in service order.
    pub chains: Vec<Vec<usize>>,
    pub fleet_size: usize,
    pub matched_pairs: usize,
    pub total_relocation_m: f64,
    pub total_trip_m: f64,
    pub vehicles: Vec<VehicleUsage>,
}

impl FleetSolution {
    /// Chains expressed with trip ids instead of indices.
    pub fn chain_ids(&self, trips: &[Trip]) -> Vec<Vec<u64>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|&i| trips[i].id).collect())
            .collect()
    }

    /// CSV rows `vehicle_id,seq,trip_id`.
    pub fn write_chains_csv<W: std::io::Write>(&self, trips: &[Trip], out: W) -> crate::Result<()> {
        let wrap = |e: csv::Error| crate::Error::csv("<chains output>", e);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vehicle_id", "seq", "trip_id"]).map_err(wrap)?;
        for (v, chain) in self.chains.iter().enumerate() {
            for (seq, &i) in chain.iter().enumerate() {
                w.write_record([v.to_string(), seq.to_string(), trips[i].id.to_string()])
                    .map_err(wrap)?;
            }
        }
        w.flush().map_err(|e| crate::Error::Io {
            path: "<chains output>".into(),
            source: e,
        })
    }
}

/// Minimum fleet by maximum-cardinality matching (Hopcroft-Karp).
pub fn min_fleet_unweighted(g: &ShareabilityGraph, trips: &[Trip]) -> FleetSolution {
    let adj: Vec<Vec<usize>> = (0..g.n_trips())
        .map(|i| g.out_edges(i).iter().map(|e| e.to as usize).collect())
        .collect();
    let m = hopcroft_karp(g.n_trips(), &adj);
    assemble(g, trips, &m, CoverVariant::Unweighted)
}

/// Minimum fleet that, among all minimum fleets, minimises total relocation
/// distance. Distances enter the assignment as whole meters.
pub fn min_fleet_weighted(g: &ShareabilityGraph, trips: &[Trip]) -> FleetSolution {
    let edges: Vec<(usize, usize, i64)> = g
        .iter()
        .map(|(i, j, e)| (i, j, e.distance_m.round() as i64))
        .collect();
    let m = min_cost_max_matching(g.n_trips(), g.n_trips(), &edges);
    assemble(g, trips, &m, CoverVariant::Weighted)
}

pub fn min_fleet(g: &ShareabilityGraph, trips: &[Trip], variant: CoverVariant) -> FleetSolution {
    match variant {
        CoverVariant::Unweighted => min_fleet_unweighted(g, trips),
        CoverVariant::Weighted => min_fleet_weighted(g, trips),
    }
}

fn assemble(g: &ShareabilityGraph, trips: &[Trip], m: &Matching, variant: CoverVariant) -> FleetSolution {
    let n = g.n_trips();
    assert_eq!(trips.len(), n, "graph was built for a different trip list");
    let mut chains = Vec::new();
    let mut total_relocation_m = 0.0;
    for head in 0..n {
        if m.right_to_left[head].is_some() {
            continue;
        }
        let mut chain = vec![head];
        let mut at = head;
        while let Some(next) = m.left_to_right[at] {
            total_relocation_m += g.edge(at, next).expect("matched pair is an edge").distance_m;
            chain.push(next);
            at = next;
        }
        chains.push(chain);
    }
    let trip_length = |i: usize| trips[i].route_length().unwrap_or(0.0);
    let vehicles: Vec<VehicleUsage> = chains
        .iter()
        .map(|chain| {
            let mut usage = VehicleUsage {
                trips: chain.len(),
                ..Default::default()
            };
            for (k, &i) in chain.iter().enumerate() {
                usage.distance_m += trip_length(i);
                usage.time_used_s += trips[i].duration();
                if let Some(&next) = chain.get(k + 1) {
                    usage.distance_m += g.edge(i, next).expect("edge").distance_m;
                }
            }
            usage
        })
        .collect();
    FleetSolution {
        variant,
        n_trips: n,
        fleet_size: chains.len(),
        chains,
        matched_pairs: m.size,
        total_relocation_m,
        total_trip_m: (0..n).map(trip_length).sum(),
        vehicles,
    }
}

/// Trips per vehicle per day; zero when there are no vehicles.
pub fn trips_per_vehicle(n_trips: usize, fleet_size: usize, n_days: usize) -> f64 {
    if fleet_size == 0 || n_days == 0 {
        0.0
    } else {
        n_trips as f64 / (fleet_size as f64 * n_days as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetMetrics {
    pub fleet_size: usize,
    pub trips_per_vehicle: f64,
    pub time_used_per_vehicle_min: f64,
    pub distance_per_vehicle_km: f64,
    pub trip_distance_km: f64,
    pub relocation_distance_km: f64,
}

pub fn utilization(sol: &FleetSolution, n_days: usize) -> FleetMetrics {
    let per_vehicle_day = |total: f64| {
        if sol.fleet_size == 0 || n_days == 0 {
            0.0
        } else {
            total / (sol.fleet_size * n_days) as f64
        }
    };
    let time_used: f64 = sol.vehicles.iter().map(|v| v.time_used_s).sum();
    FleetMetrics {
        fleet_size: sol.fleet_size,
        trips_per_vehicle: trips_per_vehicle(sol.n_trips, sol.fleet_size, n_days),
        time_used_per_vehicle_min: per_vehicle_day(time_used) / 60.0,
        distance_per_vehicle_km: per_vehicle_day(sol.total_trip_m + sol.total_relocation_m) / 1000.0,
        trip_distance_km: sol.total_trip_m / 1000.0,
        relocation_distance_km: sol.total_relocation_m / 1000.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRow {
    pub limit_hours: f64,
    pub edges: usize,
    pub matches: usize,
    pub fleet_size: usize,
    pub matches_ratio: f64,
    pub fleet_ratio: f64,
    pub utilization_ratio: f64,
    pub runtime_s: f64,
}

/// Effect of capping the idle connection time on the weighted solution,
/// relative to the unlimited graph.
pub fn approximation_report(
    trips: &[Trip],
    net: &PathNetwork,
    profile: &SpeedProfile,
    limits_hours: &[f64],
) -> Vec<ApproximationRow> {
    let full = build_graph(trips, net, profile, ConnectionLimit::Unlimited);
    let ideal = min_fleet_weighted(&full, trips);
    let ideal_util = trips_per_vehicle(ideal.n_trips, ideal.fleet_size, 1);
    limits_hours
        .iter()
        .map(|&h| {
            let started = Instant::now();
            let g = build_graph(trips, net, profile, ConnectionLimit::hours(h));
            let sol = min_fleet_weighted(&g, trips);
            let runtime_s = started.elapsed().as_secs_f64();
            let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
            ApproximationRow {
                limit_hours: h,
                edges: g.edge_count(),
                matches: sol.matched_pairs,
                fleet_size: sol.fleet_size,
                matches_ratio: ratio(sol.matched_pairs as f64, ideal.matched_pairs as f64),
                fleet_ratio: ratio(sol.fleet_size as f64, ideal.fleet_size as f64),
                utilization_ratio: ratio(trips_per_vehicle(sol.n_trips, sol.fleet_size, 1), ideal_util),
                runtime_s,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shareability::{GraphKind, ShareEdge};

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> ShareabilityGraph {
        let mut out = vec![Vec::new(); n];
        for &(i, j, d) in edges {
            out[i].push(ShareEdge {
                to: j as u32,
                distance_m: d,
                time_s: 0.0,
            });
        }
        ShareabilityGraph::from_adjacency(
            out,
            GraphKind::Stationary {
                walk_distance_m: 0.0,
                keep_observed_sequences: false,
            },
        )
    }

    fn dummy_trips(n: usize) -> Vec<Trip> {
        (0..n)
            .map(|i| Trip {
                id: i as u64 + 100,
                vehicle_tag: None,
                start_time: i as f64 * 100.0,
                end_time: i as f64 * 100.0 + 50.0,
                start_node: 0,
                end_node: 0,
                start_pos: (0.0, 0.0),
                end_pos: (0.0, 0.0),
                route: crate::trips::RouteState::Pending,
            })
            .collect()
    }

    #[test]
    fn single_trip() {
        let g = graph(1, &[]);
        let sol = min_fleet_unweighted(&g, &dummy_trips(1));
        assert_eq!(sol.fleet_size, 1);
        assert_eq!(sol.chains, vec![vec![0]]);
    }

    #[test]
    fn simple_chain() {
        let g = graph(3, &[(0, 1, 10.0), (1, 2, 10.0)]);
        let trips = dummy_trips(3);
        let sol = min_fleet_unweighted(&g, &trips);
        assert_eq!(sol.fleet_size, 1);
        assert_eq!(sol.chains, vec![vec![0, 1, 2]]);
        assert_eq!(sol.chain_ids(&trips), vec![vec![100, 101, 102]]);
    }

    #[test]
    fn weighted_picks_cheaper_maximum_matching() {
        // Two perfect-size options: {0->2, 1->3} = 500 m, {0->3, 1->2} = 300 m.
        let g = graph(4, &[(0, 2, 250.0), (1, 3, 250.0), (0, 3, 150.0), (1, 2, 150.0)]);
        let sol = min_fleet_weighted(&g, &dummy_trips(4));
        assert_eq!(sol.fleet_size, 2);
        assert_eq!(sol.total_relocation_m, 300.0);
    }

    #[test]
    fn single_edge_is_chosen() {
        let g = graph(2, &[(0, 1, 42.0)]);
        let sol = min_fleet_weighted(&g, &dummy_trips(2));
        assert_eq!(sol.matched_pairs, 1);
        assert_eq!(sol.total_relocation_m, 42.0);
    }

    #[test]
    fn chain_beats_cheap_skip() {
        let g = graph(3, &[(0, 1, 100.0), (1, 2, 100.0), (0, 2, 50.0)]);
        let sol = min_fleet_weighted(&g, &dummy_trips(3));
        assert_eq!(sol.matched_pairs, 2);
        assert_eq!(sol.total_relocation_m, 200.0);
        assert_eq!(sol.chains, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn utilization_arithmetic() {
        assert_eq!(trips_per_vehicle(10, 5, 1), 2.0);
        assert_eq!(trips_per_vehicle(10, 0, 1), 0.0);
        let g = graph(2, &[(0, 1, 1000.0)]);
        let sol = min_fleet_weighted(&g, &dummy_trips(2));
        let m = utilization(&sol, 1);
        assert_eq!(m.trips_per_vehicle, 2.0);
        assert_eq!(m.relocation_distance_km, 1.0);
        assert!((m.time_used_per_vehicle_min - 100.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn chains_csv() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let trips = dummy_trips(2);
        let sol = min_fleet_unweighted(&g, &trips);
        let mut buf = Vec::new();
        sol.write_chains_csv(&trips, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "vehicle_id,seq,trip_id\n0,0,100\n0,1,101\n");
    }
}
