//! Bipartite matching: Hopcroft-Karp for maximum cardinality and successive
//! shortest paths for minimum cost among maximum-cardinality matchings.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub left_to_right: Vec<Option<usize>>,
    pub right_to_left: Vec<Option<usize>>,
    pub size: usize,
    /// Sum of edge costs of the matched pairs (0 for unweighted matchings).
    pub cost: i64,
}

impl Matching {
    fn empty(n_left: usize, n_right: usize) -> Self {
        Self {
            left_to_right: vec![None; n_left],
            right_to_left: vec![None; n_right],
            size: 0,
            cost: 0,
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left_to_right
            .iter()
            .enumerate()
            .filter_map(|(l, r)| r.map(|r| (l, r)))
    }
}

const UNSEEN: u32 = u32::MAX;

/// Maximum-cardinality matching. `adj[l]` lists the right vertices adjacent to `l`.
pub fn hopcroft_karp(n_right: usize, adj: &[Vec<usize>]) -> Matching {
    let n_left = adj.len();
    let mut m = Matching::empty(n_left, n_right);
    let mut level = vec![UNSEEN; n_left];
    let mut queue = VecDeque::new();
    // Per-left cursor into its adjacency list for the DFS phase.
    let mut cursor = vec![0usize; n_left];
    let mut stack: Vec<usize> = Vec::new();

    loop {
        // BFS layering from free left vertices.
        queue.clear();
        for l in 0..n_left {
            if m.left_to_right[l].is_none() {
                level[l] = 0;
                queue.push_back(l);
            } else {
                level[l] = UNSEEN;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                match m.right_to_left[r] {
                    None => found = true,
                    Some(next) if level[next] == UNSEEN => {
                        level[next] = level[l] + 1;
                        queue.push_back(next);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }

        // Iterative DFS along the layered graph.
        cursor.iter_mut().for_each(|c| *c = 0);
        for root in 0..n_left {
            if m.left_to_right[root].is_some() {
                continue;
            }
            stack.clear();
            stack.push(root);
            let mut augmented_at: Option<usize> = None;
            while let Some(&l) = stack.last() {
                if cursor[l] >= adj[l].len() {
                    level[l] = UNSEEN;
                    stack.pop();
                    continue;
                }
                let r = adj[l][cursor[l]];
                match m.right_to_left[r] {
                    None => {
                        augmented_at = Some(r);
                        break;
                    }
                    Some(next) if level[next] != UNSEEN && level[next] == level[l] + 1 => {
                        stack.push(next);
                    }
                    Some(_) => cursor[l] += 1,
                }
            }
            if let Some(mut r) = augmented_at {
                // Flip the alternating path from the top of the stack down.
                while let Some(l) = stack.pop() {
                    let prev = m.left_to_right[l];
                    m.left_to_right[l] = Some(r);
                    m.right_to_left[r] = Some(l);
                    cursor[l] += 1;
                    match prev {
                        Some(p) => r = p,
                        None => break,
                    }
                }
                m.size += 1;
            }
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    rev: usize,
    cap: i32,
    cost: i64,
}

/// Minimum-cost matching among all maximum-cardinality matchings.
///
/// `edges` are `(left, right, cost)` with non-negative costs. Successive
/// shortest augmenting paths produce, for every k, a minimum-cost matching of
/// size k; running to exhaustion therefore yields the lexicographic optimum
/// (cardinality first, then cost).
pub fn min_cost_max_matching(n_left: usize, n_right: usize, edges: &[(usize, usize, i64)]) -> Matching {
    let source = n_left + n_right;
    let sink = source + 1;
    let n = sink + 1;
    let mut graph: Vec<Vec<Arc>> = vec![Vec::new(); n];
    let add = |graph: &mut Vec<Vec<Arc>>, from: usize, to: usize, cost: i64| {
        let rev_from = graph[to].len();
        let rev_to = graph[from].len();
        graph[from].push(Arc { to, rev: rev_from, cap: 1, cost });
        graph[to].push(Arc { to: from, rev: rev_to, cap: 0, cost: -cost });
    };
    for l in 0..n_left {
        add(&mut graph, source, l, 0);
    }
    for &(l, r, c) in edges {
        assert!(c >= 0, "matching costs must be non-negative");
        assert!(l < n_left && r < n_right);
        add(&mut graph, l, n_left + r, c);
    }
    for r in 0..n_right {
        add(&mut graph, n_left + r, sink, 0);
    }

    let mut potential = vec![0i64; n];
    let mut dist = vec![i64::MAX; n];
    let mut done = vec![false; n];
    let mut parent: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); n];
    let mut heap = BinaryHeap::new();
    let mut total_cost = 0i64;

    loop {
        dist.iter_mut().for_each(|d| *d = i64::MAX);
        done.iter_mut().for_each(|d| *d = false);
        heap.clear();
        dist[source] = 0;
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == sink {
                break;
            }
            for (ai, arc) in graph[u].iter().enumerate() {
                if arc.cap == 0 || done[arc.to] {
                    continue;
                }
                let reduced = arc.cost + potential[u] - potential[arc.to];
                debug_assert!(reduced >= 0, "negative reduced cost");
                let nd = d + reduced;
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    parent[arc.to] = (u, ai);
                    heap.push(Reverse((nd, arc.to)));
                }
            }
        }
        if !done[sink] {
            break;
        }
        let reach = dist[sink];
        for v in 0..n {
            potential[v] += if done[v] { dist[v] } else { reach };
        }
        // Augment one unit along the parent chain.
        let mut v = sink;
        while v != source {
            let (u, ai) = parent[v];
            let rev = graph[u][ai].rev;
            graph[u][ai].cap -= 1;
            graph[v][rev].cap += 1;
            total_cost += graph[u][ai].cost;
            v = u;
        }
    }

    let mut m = Matching::empty(n_left, n_right);
    for l in 0..n_left {
        for arc in &graph[l] {
            if arc.to >= n_left && arc.to < n_left + n_right && arc.cap == 0 && arc.cost >= 0 {
                // Forward arcs start with cap 1; a used one has cap 0.
                let r = arc.to - n_left;
                m.left_to_right[l] = Some(r);
                m.right_to_left[r] = Some(l);
                m.size += 1;
            }
        }
    }
    m.cost = total_cost;
    m
}
