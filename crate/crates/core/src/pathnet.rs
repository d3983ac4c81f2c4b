//! Path network: loading, validation and routing.
//!
//! Nodes and edges are stored sorted by id, so a node or edge *index* orders
//! exactly like its id. Every routine that breaks ties "by smallest id" relies
//! on that and compares indices.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u64;
pub type EdgeId = u64;

/// Relative tolerance used when comparing accumulated travel times.
pub(crate) const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

/// Input form of an edge, endpoints given by node id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub node_a: NodeId,
    pub node_b: NodeId,
    pub length: f64,
    pub upgraded: bool,
}

impl EdgeRecord {
    pub fn new(id: EdgeId, node_a: NodeId, node_b: NodeId, length: f64) -> Self {
        Self {
            id,
            node_a,
            node_b,
            length,
            upgraded: false,
        }
    }

    pub fn upgraded(mut self, flag: bool) -> Self {
        self.upgraded = flag;
        self
    }
}

/// An edge with endpoints resolved to node indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub upgraded: bool,
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Relocation speeds. Speeds are km/h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub base_kmh: f64,
    pub upgraded_kmh: f64,
    pub applies_upgrades: bool,
}

impl SpeedProfile {
    pub const DEFAULT_UPGRADED_KMH: f64 = 15.0;

    /// Every edge is traversed at `kmh`, upgrade flags are ignored.
    pub fn uniform(kmh: f64) -> Self {
        Self {
            base_kmh: kmh,
            upgraded_kmh: kmh,
            applies_upgrades: false,
        }
    }

    /// Upgraded edges are traversed at `upgraded_kmh`, all others at `base_kmh`.
    pub fn two_tier(base_kmh: f64, upgraded_kmh: f64) -> Self {
        Self {
            base_kmh,
            upgraded_kmh,
            applies_upgrades: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_kmh > 0.0 && self.base_kmh.is_finite()) {
            return Err(Error::invalid(format!(
                "relocation speed must be positive, got {}",
                self.base_kmh
            )));
        }
        if self.applies_upgrades && !(self.upgraded_kmh >= self.base_kmh) {
            return Err(Error::invalid(format!(
                "upgraded speed {} is below base speed {}",
                self.upgraded_kmh, self.base_kmh
            )));
        }
        Ok(())
    }

    pub fn base_mps(&self) -> f64 {
        kmh_to_mps(self.base_kmh)
    }

    pub fn upgraded_mps(&self) -> f64 {
        if self.applies_upgrades {
            kmh_to_mps(self.upgraded_kmh)
        } else {
            self.base_mps()
        }
    }

    #[inline]
    pub fn edge_time(&self, edge: &Edge) -> f64 {
        if edge.upgraded && self.applies_upgrades {
            edge.length / self.upgraded_mps()
        } else {
            edge.length / self.base_mps()
        }
    }
}

#[inline]
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

/// Seconds needed to cover the given base and upgraded lengths (meters).
pub fn traversal_time(length_on_base: f64, length_on_upgraded: f64, profile: &SpeedProfile) -> f64 {
    debug_assert!(length_on_base >= 0.0 && length_on_upgraded >= 0.0);
    length_on_base / profile.base_mps() + length_on_upgraded / profile.upgraded_mps()
}

/// A route as an ordered list of edge indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutedPath {
    pub edges: Vec<usize>,
    pub length: f64,
    pub time: f64,
}

impl RoutedPath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn edge_ids(&self, net: &PathNetwork) -> Vec<EdgeId> {
        self.edges.iter().map(|&e| net.edge(e).id).collect()
    }

    /// Length split into (base, upgraded) meters according to the network flags.
    pub fn split_length(&self, net: &PathNetwork) -> (f64, f64) {
        self.edges.iter().fold((0.0, 0.0), |(base, upg), &e| {
            let edge = net.edge(e);
            if edge.upgraded {
                (base, upg + edge.length)
            } else {
                (base + edge.length, upg)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: usize, to: usize },
}

/// Undirected path network with per-edge lengths and upgrade flags.
#[derive(Clone, Debug)]
pub struct PathNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_index: HashMap<NodeId, usize>,
    edge_index: HashMap<EdgeId, usize>,
    /// Per node: (edge index, neighbour index), ordered by edge index.
    adjacency: Vec<Vec<(usize, usize)>>,
    grid: SpatialGrid,
}

impl PathNetwork {
    pub fn new(mut nodes: Vec<Node>, mut edges: Vec<EdgeRecord>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::schema("nodes", format!("duplicate node id {}", pair[0].id)));
            }
        }
        for node in &nodes {
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(Error::schema("nodes", format!("node {} has non-finite coordinates", node.id)));
            }
        }
        let node_index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();

        edges.sort_by_key(|e| e.id);
        let mut resolved = Vec::with_capacity(edges.len());
        let mut edge_index = HashMap::with_capacity(edges.len());
        for rec in &edges {
            if edge_index.insert(rec.id, resolved.len()).is_some() {
                return Err(Error::schema("edges", format!("duplicate edge id {}", rec.id)));
            }
            let lookup = |id: NodeId| {
                node_index.get(&id).copied().ok_or_else(|| {
                    Error::schema("edges", format!("edge {} references unknown node {}", rec.id, id))
                })
            };
            let a = lookup(rec.node_a)?;
            let b = lookup(rec.node_b)?;
            if !(rec.length > 0.0 && rec.length.is_finite()) {
                return Err(Error::schema(
                    "edges",
                    format!("edge {} has non-positive length {}", rec.id, rec.length),
                ));
            }
            resolved.push(Edge {
                id: rec.id,
                a,
                b,
                length: rec.length,
                upgraded: rec.upgraded,
            });
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (ix, e) in resolved.iter().enumerate() {
            adjacency[e.a].push((ix, e.b));
            if e.a != e.b {
                adjacency[e.b].push((ix, e.a));
            }
        }
        let grid = SpatialGrid::build(&nodes);
        Ok(Self {
            nodes,
            edges: resolved,
            node_index,
            edge_index,
            adjacency,
            grid,
        })
    }

    /// Loads the nodes and edges CSV files.
    pub fn load(nodes_file: impl AsRef<Path>, edges_file: impl AsRef<Path>) -> Result<Self> {
        let nodes = read_nodes(nodes_file.as_ref())?;
        let edges = read_edges(edges_file.as_ref())?;
        Self::new(nodes, edges)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, ix: usize) -> &Node {
        &self.nodes[ix]
    }

    pub fn edge(&self, ix: usize) -> &Edge {
        &self.edges[ix]
    }

    pub fn node_ix(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn edge_ix(&self, id: EdgeId) -> Option<usize> {
        self.edge_index.get(&id).copied()
    }

    pub fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn upgraded_flags(&self) -> Vec<bool> {
        self.edges.iter().map(|e| e.upgraded).collect()
    }

    /// Copy of the network with upgrade flags replaced (indexed by edge index).
    pub fn with_upgrades(&self, flags: &[bool]) -> Self {
        assert_eq!(flags.len(), self.edges.len(), "one flag per edge");
        let mut net = self.clone();
        for (edge, &flag) in net.edges.iter_mut().zip(flags) {
            edge.upgraded = flag;
        }
        net
    }

    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (&self.nodes[a], &self.nodes[b]);
        (p.x - q.x).hypot(p.y - q.y)
    }

    /// Nearest node by Euclidean distance; ties go to the smallest node id.
    pub fn snap_point(&self, x: f64, y: f64) -> Option<usize> {
        self.grid.nearest(&self.nodes, x, y)
    }

    /// Time-shortest path, ties broken by the lexicographically smallest edge-id sequence.
    pub fn shortest_path(
        &self,
        from: usize,
        to: usize,
        profile: &SpeedProfile,
    ) -> Result<RoutedPath, RouteError> {
        if from == to {
            return Ok(RoutedPath::empty());
        }
        // Times towards the target; the walk from the source then only ever
        // steps along edges that stay on some time-shortest path.
        let search = Search::new(self, profile);
        let to_target = search.run(to, SearchLimit::UntilSettled(from));
        let total = to_target.time(from).ok_or(RouteError::Unreachable { from, to })?;
        let tolerance = |t: f64| TIME_EPS * t.max(1.0);

        let mut path = RoutedPath::empty();
        let mut at = from;
        while at != to {
            let here = to_target.time(at).expect("node on the path was settled");
            let step = self.adjacency[at].iter().find(|&&(e, w)| {
                let t = profile.edge_time(&self.edges[e]);
                match to_target.time(w) {
                    Some(rest) => rest < here && (t + rest - here).abs() <= tolerance(total),
                    None => false,
                }
            });
            let &(e, w) = step.expect("a tight edge exists on every shortest path");
            path.edges.push(e);
            path.length += self.edges[e].length;
            path.time += profile.edge_time(&self.edges[e]);
            at = w;
        }
        Ok(path)
    }

    /// Distance-shortest (uniform speed) path length, or `None` when unreachable.
    pub fn network_distance(&self, from: usize, to: usize) -> Option<f64> {
        let profile = SpeedProfile::uniform(3.6);
        let tree = Search::new(self, &profile).run(from, SearchLimit::UntilSettled(to));
        tree.length(to)
    }

    /// Single-source search returning, for every node reached within `max_time`
    /// seconds, the time and the length of the chosen time-shortest path.
    pub fn search_from(&self, source: usize, profile: &SpeedProfile, max_time: f64) -> SearchTree {
        Search::new(self, profile).run(source, SearchLimit::Time(max_time))
    }

    /// Like [`search_from`](Self::search_from) but bounded by path length (meters).
    pub fn search_within_length(&self, source: usize, max_length: f64) -> SearchTree {
        let profile = SpeedProfile::uniform(3.6);
        // 1 m/s, so time in seconds equals length in meters.
        Search::new(self, &profile).run(source, SearchLimit::Time(max_length))
    }

    /// Writes the edge list in the edges CSV schema, including upgrade flags.
    pub fn write_edges_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::csv("<edges output>", e);
        w.write_record(["edge_id", "node_a", "node_b", "length_m", "upgraded"])
            .map_err(wrap)?;
        for e in &self.edges {
            w.write_record([
                e.id.to_string(),
                self.nodes[e.a].id.to_string(),
                self.nodes[e.b].id.to_string(),
                e.length.to_string(),
                u8::from(e.upgraded).to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<edges output>".into(),
            source: e,
        })?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct NodeRow {
    node_id: NodeId,
    x_m: f64,
    y_m: f64,
}

#[derive(Deserialize)]
struct EdgeRow {
    edge_id: EdgeId,
    node_a: NodeId,
    node_b: NodeId,
    length_m: f64,
    #[serde(default)]
    upgraded: Option<u8>,
}

fn read_nodes(path: &Path) -> Result<Vec<Node>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut nodes = Vec::new();
    for row in reader.deserialize::<NodeRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        nodes.push(Node {
            id: row.node_id,
            x: row.x_m,
            y: row.y_m,
        });
    }
    Ok(nodes)
}

fn read_edges(path: &Path) -> Result<Vec<EdgeRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut edges = Vec::new();
    for row in reader.deserialize::<EdgeRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let upgraded = match row.upgraded {
            None | Some(0) => false,
            Some(1) => true,
            Some(other) => {
                return Err(Error::schema(
                    path.display().to_string(),
                    format!("edge {}: upgraded flag must be 0 or 1, got {other}", row.edge_id),
                ))
            }
        };
        edges.push(EdgeRecord {
            id: row.edge_id,
            node_a: row.node_a,
            node_b: row.node_b,
            length: row.length_m,
            upgraded,
        });
    }
    Ok(edges)
}

#[derive(Clone, Copy, Debug)]
enum SearchLimit {
    Time(f64),
    UntilSettled(usize),
}

/// Result of a single-source search. Only settled nodes carry values.
#[derive(Clone, Debug)]
pub struct SearchTree {
    times: HashMap<usize, (f64, f64)>,
    order: Vec<usize>,
}

impl SearchTree {
    pub fn time(&self, node: usize) -> Option<f64> {
        self.times.get(&node).map(|&(t, _)| t)
    }

    pub fn length(&self, node: usize) -> Option<f64> {
        self.times.get(&node).map(|&(_, l)| l)
    }

    /// Settled nodes in settle order (non-decreasing time).
    pub fn settled(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.order.iter().map(move |&n| {
            let (t, l) = self.times[&n];
            (n, t, l)
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    time: f64,
    length: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (time, length, node).
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.length.total_cmp(&self.length))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Search<'a> {
    net: &'a PathNetwork,
    profile: &'a SpeedProfile,
}

impl<'a> Search<'a> {
    fn new(net: &'a PathNetwork, profile: &'a SpeedProfile) -> Self {
        Self { net, profile }
    }

    fn run(&self, source: usize, limit: SearchLimit) -> SearchTree {
        let mut best: HashMap<usize, (f64, f64)> = HashMap::new();
        let mut settled: HashMap<usize, (f64, f64)> = HashMap::new();
        let mut order = Vec::new();
        let mut heap = BinaryHeap::new();
        let mut stop_at: Option<f64> = None;
        best.insert(source, (0.0, 0.0));
        heap.push(HeapItem {
            time: 0.0,
            length: 0.0,
            node: source,
        });
        while let Some(item) = heap.pop() {
            if settled.contains_key(&item.node) {
                continue;
            }
            if let Some(bound) = stop_at {
                if item.time > bound {
                    break;
                }
            }
            if let SearchLimit::Time(max) = limit {
                if item.time > max * (1.0 + TIME_EPS) + TIME_EPS {
                    break;
                }
            }
            settled.insert(item.node, (item.time, item.length));
            order.push(item.node);
            if let SearchLimit::UntilSettled(target) = limit {
                if item.node == target && stop_at.is_none() {
                    // Keep settling near-ties so callers comparing with a
                    // tolerance see every node on a shortest path.
                    stop_at = Some(item.time * (1.0 + TIME_EPS) + TIME_EPS);
                }
            }
            for &(e, w) in &self.net.adjacency[item.node] {
                if settled.contains_key(&w) {
                    continue;
                }
                let edge = &self.net.edges[e];
                let cand = HeapItem {
                    time: item.time + self.profile.edge_time(edge),
                    length: item.length + edge.length,
                    node: w,
                };
                let improves = match best.get(&w) {
                    None => true,
                    Some(&(t, l)) => cand.time < t || (cand.time == t && cand.length < l),
                };
                if improves {
                    best.insert(w, (cand.time, cand.length));
                    heap.push(cand);
                }
            }
        }
        SearchTree {
            times: settled,
            order,
        }
    }
}

/// Uniform grid over node coordinates for nearest-node queries.
#[derive(Clone, Debug)]
struct SpatialGrid {
    min_x: f64,
    min_y: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl SpatialGrid {
    fn build(nodes: &[Node]) -> Self {
        if nodes.is_empty() {
            return Self {
                min_x: 0.0,
                min_y: 0.0,
                cell: 1.0,
                cols: 0,
                rows: 0,
                cells: Vec::new(),
            };
        }
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for n in nodes {
            min_x = min_x.min(n.x);
            min_y = min_y.min(n.y);
            max_x = max_x.max(n.x);
            max_y = max_y.max(n.y);
        }
        let width = (max_x - min_x).max(1.0);
        let height = (max_y - min_y).max(1.0);
        let cell = ((width * height) / nodes.len() as f64).sqrt().max(1.0);
        let cols = ((width / cell).floor() as usize + 1).min(4096);
        let rows = ((height / cell).floor() as usize + 1).min(4096);
        let cell = cell.max(width / cols as f64).max(height / rows as f64);
        let mut grid = Self {
            min_x,
            min_y,
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        };
        for (ix, n) in nodes.iter().enumerate() {
            let (cx, cy) = grid.cell_of(n.x, n.y);
            grid.cells[cy * cols + cx].push(ix);
        }
        grid
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let cx = ((x - self.min_x) / self.cell).floor().max(0.0) as usize;
        let cy = ((y - self.min_y) / self.cell).floor().max(0.0) as usize;
        (cx.min(self.cols - 1), cy.min(self.rows - 1))
    }

    fn nearest(&self, nodes: &[Node], x: f64, y: f64) -> Option<usize> {
        if self.cells.is_empty() {
            return None;
        }
        let (cx, cy) = self.cell_of(x, y);
        let mut best: Option<(f64, usize)> = None;
        let consider = |ix: usize, best: &mut Option<(f64, usize)>| {
            let n = &nodes[ix];
            let d2 = (n.x - x).powi(2) + (n.y - y).powi(2);
            let better = match *best {
                None => true,
                Some((bd, bix)) => d2 < bd || (d2 == bd && ix < bix),
            };
            if better {
                *best = Some((d2, ix));
            }
        };
        let mut r = 0usize;
        loop {
            let x0 = cx.saturating_sub(r);
            let x1 = (cx + r).min(self.cols - 1);
            let y0 = cy.saturating_sub(r);
            let y1 = (cy + r).min(self.rows - 1);
            for gy in y0..=y1 {
                for gx in x0..=x1 {
                    let on_ring = gx == x0 || gx == x1 || gy == y0 || gy == y1;
                    if r == 0 || on_ring {
                        for &ix in &self.cells[gy * self.cols + gx] {
                            consider(ix, &mut best);
                        }
                    }
                }
            }
            // Lower bound on the distance to any node outside the searched block.
            let mut bound = f64::INFINITY;
            if x0 > 0 {
                bound = bound.min((x - (self.min_x + x0 as f64 * self.cell)).max(0.0));
            }
            if x1 + 1 < self.cols {
                bound = bound.min((self.min_x + (x1 + 1) as f64 * self.cell - x).max(0.0));
            }
            if y0 > 0 {
                bound = bound.min((y - (self.min_y + y0 as f64 * self.cell)).max(0.0));
            }
            if y1 + 1 < self.rows {
                bound = bound.min((self.min_y + (y1 + 1) as f64 * self.cell - y).max(0.0));
            }
            if let Some((d2, _)) = best {
                if d2.sqrt() < bound || bound.is_infinite() {
                    break;
                }
            } else if bound.is_infinite() {
                break;
            }
            r += 1;
        }
        best.map(|(_, ix)| ix)
    }
}

/// Area (km²) of the union of discs of `radius` around `points`, estimated by
/// counting grid cells of side `cell` whose centres fall inside any disc.
pub fn coverage_area(points: &[(f64, f64)], radius: f64, cell: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid("coverage radius must be positive"));
    }
    if !(cell > 0.0 && cell <= radius / 2.0) {
        return Err(Error::invalid("coverage cell must be in (0, radius/2]"));
    }
    let r2 = radius * radius;
    let mut covered: HashSet<(i64, i64)> = HashSet::new();
    for &(px, py) in points {
        let i0 = ((px - radius) / cell).floor() as i64 - 1;
        let i1 = ((px + radius) / cell).ceil() as i64 + 1;
        let j0 = ((py - radius) / cell).floor() as i64 - 1;
        let j1 = ((py + radius) / cell).ceil() as i64 + 1;
        for i in i0..=i1 {
            let cx = (i as f64 + 0.5) * cell;
            let dx2 = (cx - px).powi(2);
            if dx2 > r2 {
                continue;
            }
            for j in j0..=j1 {
                let cy = (j as f64 + 0.5) * cell;
                if dx2 + (cy - py).powi(2) <= r2 {
                    covered.insert((i, j));
                }
            }
        }
    }
    Ok(covered.len() as f64 * cell * cell / 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: NodeId, x: f64, y: f64) -> Node {
        Node { id, x, y }
    }

    fn line() -> PathNetwork {
        PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 100.0, 0.0), node(2, 300.0, 0.0)],
            vec![EdgeRecord::new(10, 0, 1, 100.0), EdgeRecord::new(11, 1, 2, 200.0)],
        )
        .unwrap()
    }

    #[test]
    fn minimal_graph_loads() {
        let net = PathNetwork::new(
            vec![node(1, 0.0, 0.0), node(2, 100.0, 0.0)],
            vec![EdgeRecord::new(1, 1, 2, 100.0)],
        )
        .unwrap();
        assert_eq!((net.node_count(), net.edge_count()), (2, 1));
    }

    #[test]
    fn unknown_endpoint_is_schema_error() {
        let err = PathNetwork::new(
            vec![node(1, 0.0, 0.0), node(2, 100.0, 0.0)],
            vec![EdgeRecord::new(5, 1, 99, 100.0)],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(msg.contains("edge 5") && msg.contains("99"), "{msg}");
    }

    #[test]
    fn non_positive_length_rejected() {
        for len in [0.0, -3.0] {
            let err = PathNetwork::new(
                vec![node(1, 0.0, 0.0), node(2, 1.0, 0.0)],
                vec![EdgeRecord::new(1, 1, 2, len)],
            )
            .unwrap_err();
            assert!(matches!(err, Error::Schema { .. }));
        }
    }

    #[test]
    fn triangle_total_length() {
        let net = PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 100.0, 0.0), node(2, 0.0, 200.0)],
            vec![
                EdgeRecord::new(0, 0, 1, 100.0),
                EdgeRecord::new(1, 1, 2, 200.0),
                EdgeRecord::new(2, 2, 0, 250.0),
            ],
        )
        .unwrap();
        assert_eq!(net.edge_count(), 3);
        assert_eq!(net.total_length(), 550.0);
    }

    #[test]
    fn parallel_edges_are_kept() {
        let net = PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 1.0, 0.0)],
            vec![EdgeRecord::new(0, 0, 1, 5.0), EdgeRecord::new(1, 0, 1, 3.0)],
        )
        .unwrap();
        assert_eq!(net.edge_count(), 2);
        let p = net.shortest_path(0, 1, &SpeedProfile::uniform(3.6)).unwrap();
        assert_eq!(p.edges, vec![1]);
    }

    #[test]
    fn identity_route_is_empty() {
        let p = line().shortest_path(1, 1, &SpeedProfile::uniform(5.0)).unwrap();
        assert!(p.edges.is_empty());
        assert_eq!((p.length, p.time), (0.0, 0.0));
    }

    #[test]
    fn line_route() {
        let net = line();
        let p = net.shortest_path(0, 2, &SpeedProfile::uniform(3.6)).unwrap();
        assert_eq!(p.length, 300.0);
        assert_eq!(p.edge_ids(&net), vec![10, 11]);
        assert!((p.time - 300.0).abs() < 1e-9);
    }

    #[test]
    fn upgraded_detour_wins_on_time() {
        // 0 -> 1 directly (800 m, base) or 0 -> 2 -> 1 (1000 m, upgraded).
        let net = PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 800.0, 0.0), node(2, 400.0, 300.0)],
            vec![
                EdgeRecord::new(0, 0, 1, 800.0),
                EdgeRecord::new(1, 0, 2, 500.0).upgraded(true),
                EdgeRecord::new(2, 2, 1, 500.0).upgraded(true),
            ],
        )
        .unwrap();
        let p = net.shortest_path(0, 1, &SpeedProfile::two_tier(1.0, 15.0)).unwrap();
        assert_eq!(p.length, 1000.0);
        assert!((p.time - 240.0).abs() < 1e-9);
        let direct = net.shortest_path(0, 1, &SpeedProfile::uniform(1.0)).unwrap();
        assert!((direct.time - 2880.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_is_unreachable() {
        let net = PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 1.0, 0.0), node(2, 5.0, 0.0)],
            vec![EdgeRecord::new(0, 0, 1, 1.0)],
        )
        .unwrap();
        assert_eq!(
            net.shortest_path(0, 2, &SpeedProfile::uniform(1.0)),
            Err(RouteError::Unreachable { from: 0, to: 2 })
        );
        assert_eq!(net.network_distance(0, 2), None);
    }

    #[test]
    fn equal_cost_routes_take_smallest_edge_sequence() {
        // Square 0-1-3 and 0-2-3 with identical lengths.
        let net = PathNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 10.0, 0.0), node(2, 0.0, 10.0), node(3, 10.0, 10.0)],
            vec![
                EdgeRecord::new(4, 0, 1, 10.0),
                EdgeRecord::new(2, 0, 2, 10.0),
                EdgeRecord::new(3, 1, 3, 10.0),
                EdgeRecord::new(7, 2, 3, 10.0),
            ],
        )
        .unwrap();
        let p = net.shortest_path(0, 3, &SpeedProfile::uniform(3.6)).unwrap();
        assert_eq!(p.edge_ids(&net), vec![2, 7]);
    }

    #[test]
    fn traversal_time_examples() {
        assert_eq!(traversal_time(0.0, 0.0, &SpeedProfile::uniform(3.0)), 0.0);
        assert!((traversal_time(1000.0, 0.0, &SpeedProfile::uniform(5.0)) - 720.0).abs() < 1e-9);
        let t = traversal_time(500.0, 500.0, &SpeedProfile::two_tier(1.0, 15.0));
        assert!((t - 1920.0).abs() < 1e-9);
    }

    #[test]
    fn snapping() {
        let nodes: Vec<Node> = (0..12).map(|i| node(i, (i * 10) as f64, 0.0)).collect();
        let net = PathNetwork::new(nodes, Vec::new()).unwrap();
        assert_eq!(net.node(net.snap_point(70.0, 0.0).unwrap()).id, 7);
        // Equidistant to 3 and 4: smaller id.
        assert_eq!(net.node(net.snap_point(35.0, 5.0).unwrap()).id, 3);
        let far = PathNetwork::new(vec![node(0, 0.0, 0.0), node(1, 100.0, 0.0)], Vec::new()).unwrap();
        assert_eq!(far.node(far.snap_point(5.0, 0.0).unwrap()).id, 0);
        assert_eq!(far.node(far.snap_point(-500.0, 900.0).unwrap()).id, 0);
    }

    #[test]
    fn snap_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let nodes: Vec<Node> = (0..300)
            .map(|i| node(i, rng.gen_range(0.0..1000.0), rng.gen_range(0.0..400.0)))
            .collect();
        let net = PathNetwork::new(nodes.clone(), Vec::new()).unwrap();
        for _ in 0..500 {
            let (x, y) = (rng.gen_range(-200.0..1200.0), rng.gen_range(-200.0..600.0));
            let brute = (0..nodes.len())
                .min_by(|&a, &b| {
                    let da = (nodes[a].x - x).powi(2) + (nodes[a].y - y).powi(2);
                    let db = (nodes[b].x - x).powi(2) + (nodes[b].y - y).powi(2);
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .unwrap();
            assert_eq!(net.snap_point(x, y), Some(brute));
        }
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage_area(&[], 100.0, 5.0).unwrap(), 0.0);
        let one = coverage_area(&[(0.0, 0.0)], 100.0, 5.0).unwrap();
        let exact = std::f64::consts::PI * 0.01;
        assert!((one - exact).abs() / exact < 0.02, "{one}");
        let two = coverage_area(&[(0.0, 0.0), (0.0, 0.0)], 100.0, 5.0).unwrap();
        assert_eq!(one, two);
        assert!(coverage_area(&[(0.0, 0.0)], 100.0, 60.0).is_err());
    }

    #[test]
    fn upgrade_flags_roundtrip_through_csv() {
        let net = line().with_upgrades(&[true, false]);
        let mut buf = Vec::new();
        net.write_edges_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "10,0,1,100,1");
        assert_eq!(text.lines().nth(2).unwrap(), "11,1,2,200,0");
    }
}
