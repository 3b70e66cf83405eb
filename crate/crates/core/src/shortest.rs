//! Dijkstra shortest paths on the rho-weighted node graph. Used as the
//! discrete geodesic oracle for leaf minimality.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::domain::MetricDomain;
use crate::geometry::{dist, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Eight,
    Sixteen,
}

impl Stencil {
    fn offsets(self) -> &'static [(isize, isize)] {
        const EIGHT: [(isize, isize); 8] = [
            (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
        ];
        const SIXTEEN: [(isize, isize); 16] = [
            (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
            (2, 1), (2, -1), (-2, 1), (-2, -1), (1, 2), (1, -2), (-1, 2), (-1, -2),
        ];
        match self {
            Stencil::Eight => &EIGHT,
            Stencil::Sixteen => &SIXTEEN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPath {
    pub length: f64,
    pub points: Vec<Point>,
}

#[derive(PartialEq)]
struct State(f64, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Weighted length of the straight segment `a`-`b`, by Simpson's rule on rho.
fn segment_cost(dom: &MetricDomain, a: Point, b: Point) -> f64 {
    let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    dist(a, b) * (dom.rho_at(a) + 4.0 * dom.rho_at(m) + dom.rho_at(b)) / 6.0
}

/// Shortest path between the nodes nearest to `p` and `q`, extended by the
/// straight connections to `p` and `q` themselves.
pub fn shortest_path(dom: &MetricDomain, p: Point, q: Point, stencil: Stencil) -> Option<ShortestPath> {
    let src = dom.nearest_node(p);
    let dst = dom.nearest_node(q);
    let n = dom.n_nodes();
    let mut best = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    best[src] = 0.0;
    heap.push(State(0.0, src));
    while let Some(State(d, u)) = heap.pop() {
        if u == dst {
            break;
        }
        if d > best[u] {
            continue;
        }
        let (i, j) = dom.node_ij(u);
        let pu = dom.node_pos(u);
        for &(di, dj) in stencil.offsets() {
            let (a, b) = (i as isize + di, j as isize + dj);
            if a < 0 || b < 0 || a > dom.nx as isize || b > dom.ny as isize {
                continue;
            }
            let v = dom.node(a as usize, b as usize);
            if !dom.node_active(v) {
                continue;
            }
            let pv = dom.node_pos(v);
            let mid = [(pu[0] + pv[0]) / 2.0, (pu[1] + pv[1]) / 2.0];
            if !dom.contains(mid) {
                continue;
            }
            let nd = d + segment_cost(dom, pu, pv);
            if nd < best[v] {
                best[v] = nd;
                prev[v] = u;
                heap.push(State(nd, v));
            }
        }
    }
    if !best[dst].is_finite() {
        return None;
    }
    let mut nodes = vec![dst];
    while *nodes.last().unwrap() != src {
        nodes.push(prev[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let mut points = vec![p];
    points.extend(nodes.iter().map(|&k| dom.node_pos(k)));
    points.push(q);
    let length = best[dst]
        + segment_cost(dom, p, dom.node_pos(src))
        + segment_cost(dom, dom.node_pos(dst), q);
    Some(ShortestPath { length, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainConfig;

    #[test]
    fn axis_path_is_exact() {
        let d = MetricDomain::build(&DomainConfig::rect(32, 32, 1.0 / 32.0), None).unwrap();
        let sp = shortest_path(&d, [0.0, 0.5], [1.0, 0.5], Stencil::Eight).unwrap();
        assert!((sp.length - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_with_sixteen_stencil_is_close() {
        let d = MetricDomain::build(&DomainConfig::rect(64, 64, 1.0 / 64.0), None).unwrap();
        let sp = shortest_path(&d, [0.0, 0.0], [1.0, 0.5], Stencil::Sixteen).unwrap();
        assert!((sp.length - 1.25f64.sqrt()).abs() < 1e-9);
    }
}
