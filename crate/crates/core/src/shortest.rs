//! Dijkstra variants over a [`RoadNetwork`] with pluggable link costs.
//!
//! Exits are absorbing: searches never expand out of an exit node. Ties
//! are broken towards the smaller node id (heap order is `(dist, node)`)
//! and a label is only replaced on strict improvement.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::netmodel::RoadNetwork;

#[derive(Debug, Clone, Copy)]
struct Entry {
    dist: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest route from `source` to the nearest exit. `cost` returns `None`
/// for links that may not be used; nodes flagged in `banned` are never
/// entered. Returns the link sequence and its length.
pub fn shortest_to_exit(
    net: &RoadNetwork,
    source: usize,
    cost: impl Fn(usize) -> Option<f64>,
    banned: Option<&[bool]>,
) -> Option<(Vec<usize>, f64)> {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry { dist: 0.0, node: source });
    while let Some(Entry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if net.is_exit(u) {
            let mut links = Vec::new();
            let mut v = u;
            while let Some(l) = pred[v] {
                links.push(l);
                v = net.link(l).from;
            }
            links.reverse();
            return Some((links, d));
        }
        for &l in net.out_links(u) {
            let Some(c) = cost(l) else { continue };
            let v = net.link(l).to;
            if done[v] || banned.is_some_and(|b| b[v]) {
                continue;
            }
            let nd = d + c;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(l);
                heap.push(Entry { dist: nd, node: v });
            }
        }
    }
    None
}

/// Shortest distance from every node to the exit set, with the first link
/// of one shortest route (`None` at exits and unreachable nodes).
pub fn distances_to_exits(
    net: &RoadNetwork,
    cost: impl Fn(usize) -> Option<f64>,
) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for e in net.exits() {
        dist[e] = 0.0;
        heap.push(Entry { dist: 0.0, node: e });
    }
    while let Some(Entry { dist: d, node: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &l in net.in_links(v) {
            let u = net.link(l).from;
            if done[u] || net.is_exit(u) {
                continue;
            }
            let Some(c) = cost(l) else { continue };
            let nd = d + c;
            if nd < dist[u] {
                dist[u] = nd;
                next[u] = Some(l);
                heap.push(Entry { dist: nd, node: u });
            }
        }
    }
    (dist, next)
}
