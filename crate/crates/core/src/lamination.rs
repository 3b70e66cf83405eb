//! Level-set leaves of a scalar field and their geometric checks.

use serde::{Deserialize, Serialize};

use crate::contour::trace;
use crate::domain::{grad, cell_mass, MetricDomain, NodeField};
use crate::error::{LaminaError, Result};
use crate::geometry::{
    closest_on_polyline, cross, cumulative_length, dist, dot, hausdorff, normalize, perp,
    point_at, resample, segment_intersection, simplify, sub, Point,
};
use crate::shortest::{shortest_path, Stencil};
use crate::solver::MASS_FLOOR_REL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafKind {
    Superlevel,
    Sublevel,
    /// Constructed directly rather than extracted from a field.
    Synthetic,
}

/// One leaf: a simple polyline with `{u > label}` on its left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub label: f64,
    pub kind: LeafKind,
    pub points: Vec<Point>,
    #[serde(default)]
    pub closed: bool,
    /// Geodesic curvature per vertex; `None` where the estimate window does
    /// not fit (near open ends).
    #[serde(default)]
    pub curvature: Vec<Option<f64>>,
    #[serde(default)]
    pub sup_curvature: f64,
}

impl Leaf {
    pub fn new(points: Vec<Point>, label: f64, kind: LeafKind, closed: bool) -> Self {
        Leaf {
            label,
            kind,
            points,
            closed,
            curvature: Vec::new(),
            sup_curvature: 0.0,
        }
    }

    pub fn synthetic(points: Vec<Point>, label: f64) -> Self {
        Self::new(points, label, LeafKind::Synthetic, false)
    }

    /// Vertices with the closing vertex repeated for closed leaves.
    pub fn path(&self) -> Vec<Point> {
        let mut p = self.points.clone();
        if self.closed && p.len() > 1 {
            p.push(p[0]);
        }
        p
    }

    pub fn euclidean_length(&self) -> f64 {
        crate::geometry::polyline_length(&self.path())
    }

    /// Unit normal of segment `k`, pointing into `{u > label}`.
    pub fn normal(&self, k: usize) -> Point {
        let p = self.path();
        perp(normalize(sub(p[k + 1], p[k])))
    }

    /// Computes and stores curvature samples.
    pub fn with_curvature(mut self, dom: &MetricDomain, window: f64) -> Self {
        if let Ok(c) = leaf_curvature(&self, dom, window) {
            self.sup_curvature = c.iter().flatten().fold(0.0, |a, b| a.max(b.abs()));
            self.curvature = c;
        }
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub both_kinds: bool,
    /// Contours shorter than this many cells are dropped.
    pub min_length_cells: f64,
    pub simplify_cells: f64,
    /// Sublevel leaves within this Hausdorff distance (in cells) of a
    /// superlevel leaf are duplicates.
    pub dedup_cells: f64,
    /// Curvature window; `None` picks [`default_window`].
    pub window: Option<f64>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            both_kinds: true,
            min_length_cells: 3.0,
            simplify_cells: 0.25,
            dedup_cells: 2.0,
            window: None,
        }
    }
}

/// Arclength window for curvature estimates: a quarter unit, but never below 16 cells.
pub fn default_window(dom: &MetricDomain) -> f64 {
    (16.0 * dom.h).max(0.25)
}

/// Curvature tolerance `0.1 + 8h / window^2`.
pub fn curvature_tolerance(h: f64, window: f64) -> f64 {
    0.1 + 8.0 * h / (window * window)
}

fn field_range(u: &NodeField, dom: &MetricDomain) -> (f64, f64) {
    dom.active_nodes()
        .map(|n| u.values[n])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Extracts `∂{u > y}` and optionally `∂{u < y}` for every threshold.
pub fn extract_leaves(
    u: &NodeField,
    thresholds: &[f64],
    dom: &MetricDomain,
    opts: &ExtractOptions,
) -> Result<Vec<Leaf>> {
    dom.check_node_field(u)?;
    let (min, max) = field_range(u, dom);
    if let Some(&y) = thresholds.iter().find(|&&y| !(y >= min && y <= max)) {
        return Err(LaminaError::ThresholdOutOfRange { y, min, max });
    }
    let h = dom.h;
    let window = opts.window.unwrap_or_else(|| default_window(dom));
    let mut out = Vec::new();
    for &y in thresholds {
        let mut level: Vec<Leaf> = trace(u, y, dom, true)
            .into_iter()
            .map(|c| Leaf::new(c.points, y, LeafKind::Superlevel, c.closed))
            .collect();
        if opts.both_kinds {
            let supers = level.clone();
            for c in trace(u, y, dom, false) {
                let mut pts = c.points;
                pts.reverse();
                let leaf = Leaf::new(pts, y, LeafKind::Sublevel, c.closed);
                let dup = supers
                    .iter()
                    .any(|s| hausdorff(&s.path(), &leaf.path(), h / 2.0) <= opts.dedup_cells * h);
                if !dup {
                    level.push(leaf);
                }
            }
        }
        for mut leaf in level {
            if leaf.euclidean_length() < opts.min_length_cells * h {
                continue;
            }
            leaf.points = simplify_leaf(&leaf, opts.simplify_cells * h, h);
            out.push(leaf.with_curvature(dom, window));
        }
    }
    Ok(out)
}

/// Simplifies with tolerance `tol`, then resamples at spacing `spacing`.
fn simplify_leaf(leaf: &Leaf, tol: f64, spacing: f64) -> Vec<Point> {
    let mut s = resample(&simplify(&leaf.path(), tol), spacing);
    if leaf.closed && s.len() > 1 {
        s.pop();
    }
    s
}

/// Quantiles of the coarea distribution of `u` (each cell spreads its mass
/// uniformly over its range of values), merged with `extra` and kept
/// strictly inside the range of `u`.
pub fn select_thresholds(u: &NodeField, dom: &MetricDomain, count: usize, extra: &[f64]) -> Result<Vec<f64>> {
    let du = grad(u, dom)?;
    let mass = cell_mass(&du, dom);
    let max_mass = mass.iter().copied().fold(0.0, f64::max);
    let s = dom.nx + 1;
    let mut cells = Vec::new();
    for (i, j) in dom.active_cells() {
        let m = mass[j * dom.nx + i];
        if m > MASS_FLOOR_REL * max_mass && max_mass > 0.0 {
            let k = dom.node(i, j);
            let c = [k, k + 1, k + s, k + s + 1].map(|n| u.values[n]);
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            cells.push((lo, hi, m));
        }
    }
    let total: f64 = cells.iter().map(|c| c.2).sum();
    let cdf = |y: f64| {
        cells
            .iter()
            .map(|&(lo, hi, m)| {
                if y >= hi {
                    m
                } else if y <= lo {
                    0.0
                } else {
                    m * (y - lo) / (hi - lo)
                }
            })
            .sum::<f64>()
            / total
    };
    let (min, max) = field_range(u, dom);
    let mut out: Vec<f64> = extra.to_vec();
    if total > 0.0 {
        for q in 0..count {
            let t = (q as f64 + 0.5) / count as f64;
            let (mut a, mut b) = (min, max);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if cdf(m) < t {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out.retain(|&y| y > min && y < max);
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    Ok(out)
}

/// Geodesic curvature per vertex from circumcircles through points at
/// arclength `±window / 2`, corrected by the conformal connection term.
pub fn leaf_curvature(leaf: &Leaf, dom: &MetricDomain, window: f64) -> Result<Vec<Option<f64>>> {
    if leaf.points.len() < 5 {
        return Err(LaminaError::TooShort(leaf.points.len()));
    }
    let path = leaf.path();
    let cum = cumulative_length(&path);
    let total = *cum.last().unwrap();
    let half = 0.5 * window;
    let at = |s: f64| {
        let s = if leaf.closed { s.rem_euclid(total) } else { s };
        point_at(&path, &cum, s)
    };
    Ok((0..leaf.points.len())
        .map(|k| {
            let s = cum[k];
            if !leaf.closed && (s < half || s > total - half) {
                return None;
            }
            let (a, b, c) = (at(s - half), leaf.points[k], at(s + half));
            let denom = dist(a, b) * dist(b, c) * dist(a, c);
            if denom == 0.0 {
                return Some(0.0);
            }
            let kappa_e = 2.0 * cross(sub(b, a), sub(c, b)) / denom;
            let n = perp(normalize(sub(c, a)));
            let g = dom.grad_log_rho(b);
            Some((kappa_e - dot(g, n)) / dom.rho_at(b))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub a: usize,
    pub b: usize,
    pub point: Point,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub min_distance: f64,
    pub crossings: Vec<Crossing>,
}

impl DisjointnessReport {
    pub fn disjoint(&self) -> bool {
        self.crossings.is_empty()
    }
}

fn bbox(p: &[Point]) -> [f64; 4] {
    p.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, q| [b[0].min(q[0]), b[1].min(q[1]), b[2].max(q[0]), b[3].max(q[1])],
    )
}

fn bbox_gap(a: [f64; 4], b: [f64; 4]) -> f64 {
    let dx = (a[0] - b[2]).max(b[0] - a[2]).max(0.0);
    let dy = (a[1] - b[3]).max(b[1] - a[3]).max(0.0);
    dx.hypot(dy)
}

/// Proper crossings between distinct leaves and their minimum distance.
pub fn check_disjointness(leaves: &[Leaf]) -> DisjointnessReport {
    let paths: Vec<Vec<Point>> = leaves.iter().map(Leaf::path).collect();
    let boxes: Vec<[f64; 4]> = paths.iter().map(|p| bbox(p)).collect();
    let mut report = DisjointnessReport {
        min_distance: f64::INFINITY,
        crossings: Vec::new(),
    };
    for a in 0..paths.len() {
        for b in a + 1..paths.len() {
            if bbox_gap(boxes[a], boxes[b]) >= report.min_distance {
                continue;
            }
            for sa in paths[a].windows(2) {
                let ba = bbox(sa);
                for sb in paths[b].windows(2) {
                    if bbox_gap(ba, bbox(sb)) > 0.0 {
                        continue;
                    }
                    if let Some(p) = proper_intersection(sa[0], sa[1], sb[0], sb[1]) {
                        report.crossings.push(Crossing { a, b, point: p });
                    }
                }
            }
            let d = polyline_distance(&paths[a], &paths[b]);
            report.min_distance = report.min_distance.min(d);
        }
    }
    report
}

fn proper_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let p = segment_intersection(p1, p2, q1, q2)?;
    let eps = 1e-12 * (dist(p1, p2) + dist(q1, q2));
    let strict = |a: Point, b: Point| dist(p, a) > eps && dist(p, b) > eps;
    (strict(p1, p2) && strict(q1, q2)).then_some(p)
}

fn polyline_distance(a: &[Point], b: &[Point]) -> f64 {
    let one = |x: &[Point], y: &[Point]| {
        x.iter()
            .filter_map(|&p| closest_on_polyline(p, y).map(|c| c.distance))
            .fold(f64::INFINITY, f64::min)
    };
    one(a, b).min(one(b, a))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NestingReport {
    pub pairs_checked: usize,
    /// `(y1, y2, node)` with `u(node) > y2` but not `> y1`.
    pub violations: Vec<(f64, f64, usize)>,
}

/// Verifies `{u > y2} ⊆ {u > y1}` on nodes for consecutive thresholds `y1 < y2`.
pub fn check_nesting(u: &NodeField, thresholds: &[f64], dom: &MetricDomain) -> NestingReport {
    let mut ys = thresholds.to_vec();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut report = NestingReport::default();
    for w in ys.windows(2) {
        report.pairs_checked += 1;
        for n in dom.active_nodes() {
            let v = u.values[n];
            if v > w[1] && v <= w[0] {
                report.violations.push((w[0], w[1], n));
            }
        }
    }
    report
}

/// Removes leaves within `tol` Hausdorff distance of an earlier one.
pub fn dedup_leaves(leaves: Vec<Leaf>, tol: f64) -> Vec<Leaf> {
    let mut out: Vec<Leaf> = Vec::new();
    for leaf in leaves {
        let p = leaf.path();
        let bb = bbox(&p);
        let dup = out.iter().any(|o| {
            let q = o.path();
            bbox_gap(bb, bbox(&q)) <= tol && hausdorff(&p, &q, tol / 4.0) <= tol
        });
        if !dup {
            out.push(leaf);
        }
    }
    out
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TubeReport {
    pub samples: usize,
    pub curvature_bound: f64,
    /// Largest `|f(x)| - A x^2 - 3h` over the samples.
    pub max_excess: f64,
    /// Samples whose neighbourhood turned more than 45 degrees.
    pub graph_failures: usize,
}

impl TubeReport {
    pub fn passed(&self) -> bool {
        self.max_excess <= 0.0
    }
}

/// Represents the leaf near sampled points as a graph over its tangent line
/// and checks `|f(x)| <= A x^2 + 3h` for `|x| <= radius`.
pub fn tube_check(leaf: &Leaf, dom: &MetricDomain, bound: Option<f64>, radius: f64, samples: usize) -> TubeReport {
    let a = bound.unwrap_or(leaf.sup_curvature);
    let path = resample(&leaf.path(), dom.h / 4.0);
    let cum = cumulative_length(&path);
    let total = *cum.last().unwrap_or(&0.0);
    let mut report = TubeReport {
        curvature_bound: a,
        max_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    if path.len() < 3 {
        report.max_excess = 0.0;
        return report;
    }
    let step = 2.0 * dom.h;
    for q in 0..samples.max(1) {
        let s = total * (q as f64 + 0.5) / samples.max(1) as f64;
        let k = cum.partition_point(|&c| c < s).min(path.len() - 1);
        let origin = path[k];
        let t = normalize(sub(point_at(&path, &cum, s + step), point_at(&path, &cum, s - step)));
        let n = perp(t);
        report.samples += 1;
        let mut failed = false;
        for dir in [-1isize, 1] {
            let mut m = k as isize;
            loop {
                m += dir;
                if m < 0 || m as usize >= path.len() {
                    break;
                }
                let d = sub(path[m as usize], origin);
                let x = dot(d, t);
                if x.abs() > radius || dist(path[m as usize], origin) > 2.0 * radius {
                    break;
                }
                let prev = path[(m - dir) as usize];
                let seg = normalize(sub(path[m as usize], prev));
                if dot(seg, t) * (dir as f64) < std::f64::consts::FRAC_1_SQRT_2 {
                    failed = true;
                    break;
                }
                let f = dot(d, n);
                report.max_excess = report.max_excess.max(f.abs() - a * x * x - 3.0 * dom.h);
            }
        }
        if failed {
            report.graph_failures += 1;
        }
    }
    if report.max_excess == f64::NEG_INFINITY {
        report.max_excess = 0.0;
    }
    report
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub center: Point,
    pub radius: f64,
    pub exits: [Point; 2],
    pub leaf_length: f64,
    pub oracle_length: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Largest admissible window radius `min(i, 1/(4A), 1/(4 sqrt(K + eps)))`.
pub fn window_bound(dom: &MetricDomain, curvature: f64) -> f64 {
    let a = if curvature > 0.0 { 0.25 / curvature } else { f64::INFINITY };
    let k = 0.25 / (dom.riem_bound + 1e-12).sqrt();
    dom.injectivity_radius.min(a).min(k)
}

/// Compares the weighted length of the leaf inside `B(center, radius)` with
/// the 8-connected Dijkstra path joining the same exit points.
pub fn local_minimality_test(
    leaf: &Leaf,
    dom: &MetricDomain,
    center: Option<Point>,
    radius: f64,
) -> Result<MinimalityReport> {
    let path = resample(&leaf.path(), dom.h / 4.0);
    let cum = cumulative_length(&path);
    let center = center.unwrap_or_else(|| point_at(&path, &cum, 0.5 * cum.last().copied().unwrap_or(0.0)));
    let r = radius.min(window_bound(dom, leaf.sup_curvature));
    let min = 4.0 * dom.h;
    if r < min {
        return Err(LaminaError::WindowTooSmall { radius: r, min });
    }
    let k = closest_on_polyline(center, &path)
        .map(|c| c.segment)
        .ok_or(LaminaError::TooShort(path.len()))?;
    let walk = |dir: isize| {
        let mut m = k as isize;
        while m + dir >= 0 && ((m + dir) as usize) < path.len() && dist(path[(m + dir) as usize], center) < r {
            m += dir;
        }
        m as usize
    };
    let (lo, hi) = (walk(-1), walk(1));
    let piece = &path[lo..=hi];
    let exits = [path[lo], path[hi]];
    let leaf_length = dom.polyline_length(piece);
    let oracle_length = if dist(exits[0], exits[1]) > 0.0 {
        shortest_path(dom, exits[0], exits[1], Stencil::Eight)
            .map(|p| p.length)
            .unwrap_or(f64::INFINITY)
    } else {
        0.0
    };
    let slack = 3.0 * dom.h;
    Ok(MinimalityReport {
        center,
        radius: r,
        exits,
        leaf_length,
        oracle_length,
        slack,
        passed: leaf_length <= oracle_length + slack,
    })
}

/// Weighted length of the part of the leaf inside `B(c, r)`.
pub fn length_in_ball(leaf: &Leaf, dom: &MetricDomain, c: Point, r: f64) -> f64 {
    let path = resample(&leaf.path(), dom.h / 4.0);
    path.windows(2)
        .filter(|w| dist(w[0], c) <= r && dist(w[1], c) <= r)
        .map(|w| dom.polyline_length(w))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainConfig;

    fn unit(n: usize) -> MetricDomain {
        MetricDomain::build(&DomainConfig::rect(n, n, 1.0 / n as f64), None).unwrap()
    }

    #[test]
    fn linear_field_has_one_vertical_leaf() {
        let dom = unit(32);
        let u = dom.sample(|p| p[0]);
        let leaves = extract_leaves(&u, &[0.5], &dom, &ExtractOptions::default()).unwrap();
        assert_eq!(leaves.len(), 1);
        let l = &leaves[0];
        assert_eq!(l.kind, LeafKind::Superlevel);
        assert!(l.points.iter().all(|p| (p[0] - 0.5).abs() < 1e-12));
        assert!(l.normal(0)[0] > 0.99);
    }

    #[test]
    fn out_of_range_threshold() {
        let dom = unit(8);
        let u = dom.sample(|p| p[0]);
        assert!(matches!(
            extract_leaves(&u, &[1.5], &dom, &ExtractOptions::default()),
            Err(LaminaError::ThresholdOutOfRange { .. })
        ));
    }

    #[test]
    fn crossing_segments_are_reported() {
        let a = Leaf::synthetic(vec![[0.0, 0.0], [1.0, 1.0]], 0.0);
        let b = Leaf::synthetic(vec![[0.0, 1.0], [1.0, 0.0]], 1.0);
        let r = check_disjointness(&[a, b]);
        assert_eq!(r.crossings.len(), 1);
        assert!(dist(r.crossings[0].point, [0.5, 0.5]) < 1e-12);

        let a = Leaf::synthetic(vec![[0.3, 0.0], [0.3, 1.0]], 0.0);
        let b = Leaf::synthetic(vec![[0.6, 0.0], [0.6, 1.0]], 1.0);
        let r = check_disjointness(&[a, b]);
        assert!(r.disjoint());
        assert!((r.min_distance - 0.3).abs() < 1e-12);
    }

    #[test]
    fn circle_curvature() {
        let dom = MetricDomain::build(&DomainConfig::rect(64, 64, 1.0 / 64.0).with_origin([-0.5, -0.5]), None).unwrap();
        let r = 0.3;
        let pts: Vec<Point> = (0..200)
            .map(|k| {
                let t = k as f64 / 200.0 * std::f64::consts::TAU;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let mut leaf = Leaf::synthetic(pts, 0.0);
        leaf.closed = true;
        let c = leaf_curvature(&leaf, &dom, 0.2).unwrap();
        assert!(c.iter().all(|k| (k.unwrap() - 1.0 / r).abs() < 0.05));
    }

    #[test]
    fn wavy_curve_is_not_minimal() {
        let dom = unit(64);
        let straight = Leaf::synthetic((0..=64).map(|k| [k as f64 / 64.0, 0.5]).collect(), 0.0);
        let wavy = Leaf::synthetic(
            (0..=640)
                .map(|k| {
                    let x = k as f64 / 640.0;
                    [x, 0.5 + 0.05 * (40.0 * x).sin()]
                })
                .collect(),
            0.0,
        );
        let s = local_minimality_test(&straight, &dom, Some([0.5, 0.5]), 0.4).unwrap();
        assert!(s.passed);
        assert!((s.leaf_length - s.oracle_length).abs() <= dom.h);
        let w = local_minimality_test(&wavy, &dom, Some([0.5, 0.5]), 0.4).unwrap();
        assert!(!w.passed, "{w:?}");
    }
}
