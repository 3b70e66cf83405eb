//! Marching squares on the active cells of a [`MetricDomain`].
//!
//! Contours are oriented so that the region `{inside}` lies to their left.
//! Saddle cells are resolved by the mean of their four corners.

use std::collections::HashMap;

use crate::domain::{MetricDomain, NodeField};
use crate::geometry::{lerp, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<Point>,
    pub closed: bool,
}

/// Edge key: horizontal edges from node `n` are `2n`, vertical ones `2n + 1`.
type EdgeKey = usize;

/// Traces the boundary of `{v : inside(u_v)}` where `inside` is evaluated on
/// nodes and crossings are placed by linear interpolation of `u - y`.
pub fn trace(u: &NodeField, y: f64, dom: &MetricDomain, superlevel: bool) -> Vec<Contour> {
    let s = dom.nx + 1;
    let inside = |v: f64| if superlevel { v > y } else { v < y };
    let mut points: HashMap<EdgeKey, Point> = HashMap::new();
    let mut next: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    let mut has_pred: HashMap<EdgeKey, bool> = HashMap::new();

    let mut crossing = |a: usize, b: usize, key: EdgeKey| -> EdgeKey {
        points.entry(key).or_insert_with(|| {
            let (ua, ub) = (u.values[a], u.values[b]);
            let t = if ub != ua { ((y - ua) / (ub - ua)).clamp(0.0, 1.0) } else { 0.5 };
            lerp(dom.node_pos(a), dom.node_pos(b), t)
        });
        key
    };

    for (i, j) in dom.active_cells() {
        let k = dom.node(i, j);
        let c = [k, k + 1, k + s + 1, k + s];
        let vals = c.map(|n| u.values[n]);
        let ins = vals.map(inside);
        if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
            continue;
        }
        // Counter-clockwise edges: south, east, north (reversed), west (reversed).
        let keys = [2 * k, 2 * (k + 1) + 1, 2 * (k + s), 2 * k + 1];
        let mut exits = Vec::with_capacity(2);
        let mut entries = Vec::with_capacity(2);
        for (e, &edge) in keys.iter().enumerate() {
            let (a, b) = (e, (e + 1) % 4);
            if ins[a] != ins[b] {
                let key = crossing(c[a], c[b], edge);
                if ins[a] {
                    exits.push((e, key));
                } else {
                    entries.push((e, key));
                }
            }
        }
        let center_inside = inside(vals.iter().sum::<f64>() / 4.0);
        for &(e, from) in &exits {
            // Pair with the next entry counter-clockwise when the centre joins
            // the inside, otherwise with the previous one.
            let pick = entries
                .iter()
                .min_by_key(|&&(f, _)| {
                    if center_inside {
                        (f + 4 - e) % 4
                    } else {
                        (e + 4 - f) % 4
                    }
                })
                .map(|&(_, key)| key)
                .expect("entries and exits come in pairs");
            next.insert(from, pick);
            has_pred.insert(pick, true);
        }
    }

    let mut starts: Vec<EdgeKey> = next.keys().copied().filter(|k| !has_pred.contains_key(k)).collect();
    starts.sort_unstable();
    let mut loops: Vec<EdgeKey> = next.keys().copied().collect();
    loops.sort_unstable();
    let mut used: HashMap<EdgeKey, bool> = HashMap::new();
    let mut out = Vec::new();
    for start in starts.into_iter().chain(loops) {
        if used.contains_key(&start) {
            continue;
        }
        let mut pts = vec![points[&start]];
        used.insert(start, true);
        let mut cur = start;
        let mut closed = false;
        while let Some(&n) = next.get(&cur) {
            if n == start {
                closed = true;
                break;
            }
            if used.contains_key(&n) {
                break;
            }
            used.insert(n, true);
            pts.push(points[&n]);
            cur = n;
        }
        out.push(Contour { points: pts, closed });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainConfig;

    #[test]
    fn linear_field_gives_one_vertical_segment() {
        let dom = MetricDomain::build(&DomainConfig::rect(10, 10, 0.1), None).unwrap();
        let u = dom.sample(|p| p[0]);
        let cs = trace(&u, 0.55, &dom, true);
        assert_eq!(cs.len(), 1);
        assert!(!cs[0].closed);
        assert_eq!(cs[0].points.len(), 11);
        assert!(cs[0].points.iter().all(|p| (p[0] - 0.55).abs() < 1e-12));
        // {x > 0.55} lies to the left of the direction of travel: downward.
        assert!(cs[0].points[0][1] > cs[0].points[10][1]);
    }

    #[test]
    fn bump_gives_closed_loop() {
        let dom = MetricDomain::build(&DomainConfig::rect(20, 20, 0.05), None).unwrap();
        let u = dom.sample(|p| -((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)));
        let cs = trace(&u, -0.09, &dom, true);
        assert_eq!(cs.len(), 1);
        assert!(cs[0].closed);
        let r: Vec<f64> = cs[0].points.iter().map(|p| (p[0] - 0.5).hypot(p[1] - 0.5)).collect();
        assert!(r.iter().all(|r| (r - 0.3).abs() < 0.01));
        // Counter-clockwise around the superlevel disk.
        let area: f64 = cs[0]
            .points
            .iter()
            .zip(cs[0].points.iter().cycle().skip(1))
            .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
            .sum();
        assert!(area > 0.0);
    }
}
