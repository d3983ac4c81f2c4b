//! Path upgrades: edge usage ranking, the fixed-route benefit frontier, the
//! rerouted benefit, and end-to-end evaluation of upgraded networks.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{simulate_online_growth, SimParams};
use crate::error::{Error, Result};
use crate::mincover::{min_fleet_weighted, trips_per_vehicle, FleetSolution};
use crate::pathnet::{PathNetwork, RoutedPath, SpeedProfile};
use crate::shareability::{build_graph, ConnectionLimit};
use crate::trips::Trip;

/// Upgrade fractions evaluated by default.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.05, 0.1, 0.2, 0.25, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegKind {
    Passenger,
    Relocation,
}

/// One routed movement between two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Leg {
    pub from: usize,
    pub to: usize,
    pub kind: LegKind,
    pub path: RoutedPath,
}

/// Passenger routes of all trips plus, when a solution is given, the
/// relocation between each pair of consecutive trips in a chain. Unroutable
/// movements are skipped.
pub fn legs(trips: &[Trip], solution: Option<&FleetSolution>, net: &PathNetwork, profile: &SpeedProfile) -> Vec<Leg> {
    let mut out: Vec<Leg> = trips
        .par_iter()
        .filter_map(|t| {
            let path = match t.routed() {
                Some(p) => p.clone(),
                None => net.shortest_path(t.start_node, t.end_node, profile).ok()?,
            };
            Some(Leg {
                from: t.start_node,
                to: t.end_node,
                kind: LegKind::Passenger,
                path,
            })
        })
        .collect();
    if let Some(sol) = solution {
        let pairs: Vec<(usize, usize)> = sol
            .chains
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (trips[w[0]].end_node, trips[w[1]].start_node)))
            .collect();
        out.par_extend(pairs.into_par_iter().filter_map(|(a, b)| {
            let path = net.shortest_path(a, b, profile).ok()?;
            Some(Leg {
                from: a,
                to: b,
                kind: LegKind::Relocation,
                path,
            })
        }));
    }
    out
}

/// Per-edge traversal counts, indexed by edge index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeUsage {
    pub passenger: Vec<u64>,
    pub relocation: Vec<u64>,
}

impl EdgeUsage {
    pub fn from_legs(legs: &[Leg], net: &PathNetwork) -> Self {
        let mut usage = Self {
            passenger: vec![0; net.edge_count()],
            relocation: vec![0; net.edge_count()],
        };
        for leg in legs {
            let counts = match leg.kind {
                LegKind::Passenger => &mut usage.passenger,
                LegKind::Relocation => &mut usage.relocation,
            };
            for &e in &leg.path.edges {
                counts[e] += 1;
            }
        }
        usage
    }

    pub fn combined(&self) -> Vec<u64> {
        self.passenger.iter().zip(&self.relocation).map(|(a, b)| a + b).collect()
    }

    /// Sum of `l_e * n_e` over all edges, i.e. total routed distance.
    pub fn weighted_total(&self, net: &PathNetwork) -> f64 {
        self.combined()
            .iter()
            .zip(net.edges())
            .map(|(&n, e)| n as f64 * e.length)
            .sum()
    }
}

pub fn edge_usage(
    trips: &[Trip],
    solution: Option<&FleetSolution>,
    net: &PathNetwork,
    profile: &SpeedProfile,
) -> EdgeUsage {
    EdgeUsage::from_legs(&legs(trips, solution, net, profile), net)
}

/// Edges in upgrade order with cumulative cost and fixed-route benefit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradePlan {
    /// Edge indices, most used first.
    pub order: Vec<usize>,
    pub usage: Vec<u64>,
    pub lengths: Vec<f64>,
    /// `cum_length[k]` is the length of the first `k + 1` edges.
    pub cum_length: Vec<f64>,
    /// `b_star[k]` is the fixed-route benefit of upgrading the first `k + 1` edges.
    pub b_star: Vec<f64>,
    /// Rerouted benefit at selected prefixes `(k, B^T)` with `k` edges upgraded.
    pub b_t: Vec<(usize, f64)>,
    /// No edge was used; benefits are zero until the whole network is upgraded.
    pub degenerate: bool,
}

/// Orders edges by usage (more first), then by `l_e * n_e`, then by edge id.
pub fn frontier(usage: &[u64], net: &PathNetwork) -> UpgradePlan {
    assert_eq!(usage.len(), net.edge_count());
    let weight = |e: usize| usage[e] as f64 * net.edge(e).length;
    let mut order: Vec<usize> = (0..net.edge_count()).collect();
    order.sort_by(|&a, &b| {
        usage[b]
            .cmp(&usage[a])
            .then_with(|| weight(b).total_cmp(&weight(a)))
            .then_with(|| a.cmp(&b))
    });
    let total: f64 = order.iter().map(|&e| weight(e)).sum();
    let degenerate = total == 0.0;
    let n = order.len();
    let mut cum_length = Vec::with_capacity(n);
    let mut b_star = Vec::with_capacity(n);
    let (mut c, mut w) = (0.0, 0.0);
    for (k, &e) in order.iter().enumerate() {
        c += net.edge(e).length;
        w += weight(e);
        cum_length.push(c);
        b_star.push(if degenerate {
            if k + 1 == n {
                1.0
            } else {
                0.0
            }
        } else if k + 1 == n {
            1.0
        } else {
            (w / total).min(1.0)
        });
    }
    UpgradePlan {
        usage: order.iter().map(|&e| usage[e]).collect(),
        lengths: order.iter().map(|&e| net.edge(e).length).collect(),
        order,
        cum_length,
        b_star,
        b_t: Vec::new(),
        degenerate,
    }
}

impl UpgradePlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.cum_length.last().copied().unwrap_or(0.0)
    }

    /// Fixed-route benefit with the first `k` edges upgraded.
    pub fn b_star_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.b_star[k - 1]
        }
    }

    /// Step approximation: for `C` in `[C_i, C_{i+1})` the value is `B*_{i+1}`,
    /// with `C_0 = 0` and the last value held from `C_N` on.
    pub fn step(&self, cost: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let i = self.cum_length.partition_point(|&c| c <= cost);
        self.b_star[i.min(self.len() - 1)]
    }

    /// Largest prefix whose length does not exceed `r` times the network length.
    pub fn prefix_for_fraction(&self, r: f64) -> usize {
        let budget = r * self.total_length();
        let slack = 1e-12 * self.total_length();
        self.cum_length.partition_point(|&c| c <= budget + slack)
    }

    /// Upgrade flags (by edge index) for the first `k` edges.
    pub fn flags(&self, k: usize) -> Vec<bool> {
        let mut flags = vec![false; self.len()];
        for &e in &self.order[..k] {
            flags[e] = true;
        }
        flags
    }

    /// CSV rows `rank,edge_id,n_e,l_e,C_cum_m,B_star`, with a `B_T` column
    /// filled at the prefixes where it was computed.
    pub fn write_csv<W: Write>(&self, net: &PathNetwork, out: W) -> Result<()> {
        let wrap = |e: csv::Error| Error::csv("<frontier output>", e);
        let mut w = csv::Writer::from_writer(out);
        let with_bt = !self.b_t.is_empty();
        let mut header = vec!["rank", "edge_id", "n_e", "l_e", "C_cum_m", "B_star"];
        if with_bt {
            header.push("B_T");
        }
        w.write_record(&header).map_err(wrap)?;
        for k in 0..self.len() {
            let mut row = vec![
                (k + 1).to_string(),
                net.edge(self.order[k]).id.to_string(),
                self.usage[k].to_string(),
                self.lengths[k].to_string(),
                self.cum_length[k].to_string(),
                self.b_star[k].to_string(),
            ];
            if with_bt {
                let bt = self.b_t.iter().find(|&&(p, _)| p == k + 1).map(|&(_, v)| v.to_string());
                row.push(bt.unwrap_or_default());
            }
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<frontier output>".into(),
            source: e,
        })
    }
}

/// Fixed-route benefit of an arbitrary flag set: upgraded share of the legs' own routes.
pub fn fixed_route_benefit(flags: &[bool], legs: &[Leg], net: &PathNetwork) -> f64 {
    let (mut upg, mut total) = (0.0, 0.0);
    for leg in legs {
        for &e in &leg.path.edges {
            let l = net.edge(e).length;
            total += l;
            if flags[e] {
                upg += l;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        upg / total
    }
}

/// Rerouted benefit: every leg is routed time-optimally on the network with
/// `flags` upgraded, and the upgraded share of the new routes is returned.
pub fn bt_value(flags: &[bool], legs: &[Leg], net: &PathNetwork, profile: &SpeedProfile) -> f64 {
    let upgraded = net.with_upgrades(flags);
    let (upg, total) = legs
        .par_iter()
        .map(|leg| match upgraded.shortest_path(leg.from, leg.to, profile) {
            Ok(p) => {
                let (_, u) = p.split_length(&upgraded);
                (u, p.length)
            }
            Err(_) => (0.0, 0.0),
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0.0 {
        0.0
    } else {
        upg / total
    }
}

/// Computes `B^T` at the prefixes matching each fraction and stores them in the plan.
pub fn fill_bt(plan: &mut UpgradePlan, fractions: &[f64], legs: &[Leg], net: &PathNetwork, profile: &SpeedProfile) {
    let mut prefixes: Vec<usize> = fractions.iter().map(|&r| plan.prefix_for_fraction(r)).collect();
    prefixes.sort_unstable();
    prefixes.dedup();
    plan.b_t = prefixes
        .into_iter()
        .map(|k| (k, bt_value(&plan.flags(k), legs, net, profile)))
        .collect();
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Oracle,
    Online,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeComparison {
    pub mode: EvalMode,
    pub r: f64,
    pub upgraded_edges: usize,
    pub upgraded_length_m: f64,
    pub b_star: f64,
    pub baseline_fleet: usize,
    pub upgraded_fleet: usize,
    pub fleet_reduction: f64,
    pub utilization_ratio: f64,
}

fn fleet_with(trips: &[Trip], net: &PathNetwork, profile: &SpeedProfile, mode: EvalMode, params: &SimParams) -> Result<usize> {
    match mode {
        EvalMode::Oracle => {
            let g = build_graph(trips, net, profile, ConnectionLimit::Unlimited);
            Ok(min_fleet_weighted(&g, trips).fleet_size)
        }
        EvalMode::Online => {
            let p = SimParams {
                profile: *profile,
                ..*params
            };
            Ok(simulate_online_growth(trips, net, &p)?.fleet_size)
        }
    }
}

/// Re-solves with the top-ranked edges flagged for each fraction `r` and
/// compares against the uniform-speed baseline.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_upgrades(
    trips: &[Trip],
    net: &PathNetwork,
    plan: &UpgradePlan,
    fractions: &[f64],
    base_kmh: f64,
    upgraded_kmh: f64,
    mode: EvalMode,
    params: &SimParams,
) -> Result<Vec<UpgradeComparison>> {
    for &r in fractions {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("upgrade fraction {r} outside [0, 1]")));
        }
    }
    let two_tier = SpeedProfile::two_tier(base_kmh, upgraded_kmh);
    two_tier.validate()?;
    let baseline = fleet_with(trips, net, &SpeedProfile::uniform(base_kmh), mode, params)?;
    let util = |fleet: usize| trips_per_vehicle(trips.len(), fleet, 1);
    fractions
        .iter()
        .map(|&r| {
            let k = plan.prefix_for_fraction(r);
            let upgraded = if k == 0 {
                baseline
            } else {
                fleet_with(trips, &net.with_upgrades(&plan.flags(k)), &two_tier, mode, params)?
            };
            let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
            Ok(UpgradeComparison {
                mode,
                r,
                upgraded_edges: k,
                upgraded_length_m: if k == 0 { 0.0 } else { plan.cum_length[k - 1] },
                b_star: plan.b_star_at(k),
                baseline_fleet: baseline,
                upgraded_fleet: upgraded,
                fleet_reduction: 1.0 - ratio(upgraded as f64, baseline as f64),
                utilization_ratio: ratio(util(upgraded), util(baseline)),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_upgrade(
    trips: &[Trip],
    net: &PathNetwork,
    plan: &UpgradePlan,
    r: f64,
    base_kmh: f64,
    upgraded_kmh: f64,
    mode: EvalMode,
    params: &SimParams,
) -> Result<UpgradeComparison> {
    Ok(evaluate_upgrades(trips, net, plan, &[r], base_kmh, upgraded_kmh, mode, params)?.remove(0))
}
