//! Flow-box charts `F(xi, eta) = o + xi t + f(xi, eta) n` flattening a family
//! of disjoint leaves, and the lamination assembled from them.
//!
//! Inside a box every nearby leaf is a graph `eta = u_k(xi)` labelled by
//! `k = u_k(0)`; between consecutive labels `f` interpolates linearly in
//! `eta`, beyond the extreme labels it translates the extreme graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::MetricDomain;
use crate::error::{LaminaError, Result};
use crate::geometry::{add, closest_on_polyline, dist, dot, normalize, perp, resample, scale, sub, Point};
use crate::lamination::{check_disjointness, dedup_leaves, Leaf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowBoxOptions {
    /// Half extents along the leaves and across them; `None` means `16 h`.
    pub half_width: Option<f64>,
    pub half_height: Option<f64>,
    /// Graph slope bound is `3 delta`.
    pub delta: f64,
    pub max_halvings: usize,
    /// Configured bound on `max(lip_F, lip_Finv)`.
    pub lip_bound: f64,
    pub lip_samples: usize,
    /// Samples per graph along `xi`.
    pub graph_samples: usize,
    pub seed: u64,
}

impl Default for FlowBoxOptions {
    fn default() -> Self {
        FlowBoxOptions {
            half_width: None,
            half_height: None,
            delta: 0.2,
            max_halvings: 5,
            lip_bound: 4.0,
            lip_samples: 10_000,
            graph_samples: 65,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowBox {
    pub base: Point,
    pub origin: Point,
    pub tangent: Point,
    pub normal: Point,
    pub half_width: f64,
    pub half_height: f64,
    /// Sorted labels `k`, with the index of the leaf each graph comes from.
    pub labels: Vec<f64>,
    pub leaf_ids: Vec<usize>,
    /// Common `xi` samples and per-label graph values.
    pub xi: Vec<f64>,
    pub graphs: Vec<Vec<f64>>,
    pub lip_f: f64,
    pub lip_finv: f64,
    /// Largest `|F(F^-1(x)) - x|` over the sampled points.
    pub inverse_error: f64,
    /// Largest distance between a leaf point and its graph.
    pub graph_error: f64,
    pub max_slope: f64,
    pub halvings: usize,
}

impl FlowBox {
    /// Value of graph `m` at `xi` by linear interpolation.
    pub fn graph_at(&self, m: usize, xi: f64) -> f64 {
        interp(&self.xi, &self.graphs[m], xi)
    }

    /// The filled-in chart function `f(xi, eta)`.
    pub fn f(&self, xi: f64, eta: f64) -> f64 {
        let k = &self.labels;
        let last = k.len() - 1;
        if eta <= k[0] {
            return self.graph_at(0, xi) + (eta - k[0]);
        }
        if eta >= k[last] {
            return self.graph_at(last, xi) + (eta - k[last]);
        }
        let m = k.partition_point(|&v| v <= eta) - 1;
        let (a, b) = (self.graph_at(m, xi), self.graph_at(m + 1, xi));
        a + (eta - k[m]) / (k[m + 1] - k[m]) * (b - a)
    }

    pub fn chart(&self, xi: f64, eta: f64) -> Point {
        add(
            self.origin,
            add(scale(self.tangent, xi), scale(self.normal, self.f(xi, eta))),
        )
    }

    /// Inverse chart; `None` outside the `xi` range.
    pub fn inverse(&self, p: Point) -> Option<(f64, f64)> {
        let d = sub(p, self.origin);
        let xi = dot(d, self.tangent);
        if xi.abs() > self.half_width * (1.0 + 1e-12) {
            return None;
        }
        let nu = dot(d, self.normal);
        let k = &self.labels;
        let last = k.len() - 1;
        let g: Vec<f64> = (0..k.len()).map(|m| self.graph_at(m, xi)).collect();
        let eta = if nu <= g[0] {
            k[0] + (nu - g[0])
        } else if nu >= g[last] {
            k[last] + (nu - g[last])
        } else {
            let m = g.partition_point(|&v| v <= nu).saturating_sub(1).min(last - 1);
            let span = g[m + 1] - g[m];
            if span > 0.0 {
                k[m] + (nu - g[m]) / span * (k[m + 1] - k[m])
            } else {
                k[m]
            }
        };
        Some((xi, eta))
    }

    /// True when `p` maps into the box shrunk by `margin` on every side.
    pub fn covers(&self, p: Point, margin: f64) -> bool {
        self.inverse(p).is_some_and(|(xi, eta)| {
            xi.abs() <= self.half_width - margin && eta.abs() <= self.half_height - margin
        })
    }

    pub fn lip_max(&self) -> f64 {
        self.lip_f.max(self.lip_finv)
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let m = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[m]) / (xs[m + 1] - xs[m]);
    ys[m] + t * (ys[m + 1] - ys[m])
}

/// Pieces of a leaf path inside the slab `|xi| <= a`, in local coordinates.
fn slab_runs(path: &[Point], origin: Point, t: Point, n: Point, a: f64) -> Vec<Vec<[f64; 2]>> {
    let local: Vec<[f64; 2]> = path
        .iter()
        .map(|&p| {
            let d = sub(p, origin);
            [dot(d, t), dot(d, n)]
        })
        .collect();
    let mut runs = Vec::new();
    let mut cur: Vec<[f64; 2]> = Vec::new();
    for w in local.windows(2) {
        let (p, q) = (w[0], w[1]);
        // Clip the segment to |xi| <= a.
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let dx = q[0] - p[0];
        for (bound, sign) in [(a, 1.0), (-a, -1.0)] {
            if dx == 0.0 {
                if sign * p[0] > sign * bound {
                    t0 = 1.0;
                    t1 = 0.0;
                }
                continue;
            }
            let tb = (bound - p[0]) / dx;
            if sign * dx > 0.0 {
                t1 = t1.min(tb);
            } else {
                t0 = t0.max(tb);
            }
        }
        if t0 >= t1 {
            if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let at = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
        if t0 > 0.0 && !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
        if cur.is_empty() {
            cur.push(at(t0));
        }
        cur.push(at(t1));
        if t1 < 1.0 {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

struct Graphs {
    labels: Vec<f64>,
    leaf_ids: Vec<usize>,
    graphs: Vec<Vec<f64>>,
    graph_error: f64,
    max_slope: f64,
}

/// Leaves near the box as graphs over the `xi` samples, or `None` when some
/// leaf touching the box is not a graph of slope at most `max_slope`.
#[allow(clippy::too_many_arguments)]
fn collect_graphs(
    leaves: &[Vec<Point>],
    origin: Point,
    t: Point,
    n: Point,
    a: f64,
    b: f64,
    xs: &[f64],
    max_slope: f64,
    at_boundary: &dyn Fn(Point) -> bool,
) -> Option<Graphs> {
    let mut found: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    let mut graph_error: f64 = 0.0;
    let mut slope_seen: f64 = 0.0;
    for (id, path) in leaves.iter().enumerate() {
        for mut run in slab_runs(path, origin, t, n, a) {
            if run.iter().all(|p| p[1].abs() > b) {
                continue;
            }
            if run.len() < 2 {
                return None;
            }
            if run[0][0] > run[run.len() - 1][0] {
                run.reverse();
            }
            // Each end must leave through a side of the box or stop on the
            // domain boundary.
            let global = |q: [f64; 2]| add(origin, add(scale(t, q[0]), scale(n, q[1])));
            let (first, last) = (run[0], run[run.len() - 1]);
            let spans = ((first[0] + a).abs() < 1e-9 * a.max(1.0) || at_boundary(global(first)))
                && ((last[0] - a).abs() < 1e-9 * a.max(1.0) || at_boundary(global(last)));
            let monotone = run.windows(2).all(|w| w[1][0] > w[0][0]);
            if !spans || !monotone {
                return None;
            }
            let rx: Vec<f64> = run.iter().map(|p| p[0]).collect();
            let ry: Vec<f64> = run.iter().map(|p| p[1]).collect();
            let g: Vec<f64> = xs.iter().map(|&x| interp(&rx, &ry, x)).collect();
            for w in xs.windows(2).zip(g.windows(2)) {
                slope_seen = slope_seen.max(((w.1[1] - w.1[0]) / (w.0[1] - w.0[0])).abs());
            }
            if slope_seen > max_slope {
                return None;
            }
            for p in &run {
                graph_error = graph_error.max((p[1] - interp(xs, &g, p[0])).abs());
            }
            found.push((interp(xs, &g, 0.0), id, g));
        }
    }
    if found.is_empty() {
        return None;
    }
    found.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    found.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-12);
    Some(Graphs {
        labels: found.iter().map(|f| f.0).collect(),
        leaf_ids: found.iter().map(|f| f.1).collect(),
        graphs: found.into_iter().map(|f| f.2).collect(),
        graph_error,
        max_slope: slope_seen,
    })
}

/// Builds a flow box near `p`, framed by the closest leaf.
pub fn build_flow_box(leaves: &[Leaf], p: Point, dom: &MetricDomain, opts: &FlowBoxOptions) -> Result<FlowBox> {
    let h = dom.h;
    let mut a = opts.half_width.unwrap_or(16.0 * h);
    let mut b = opts.half_height.unwrap_or(16.0 * h);
    let paths: Vec<Vec<Point>> = leaves.iter().map(|l| resample(&l.path(), h / 2.0)).collect();

    let nearest = paths
        .iter()
        .filter_map(|path| closest_on_polyline(p, path).map(|c| (c, path)))
        .min_by(|x, y| x.0.distance.partial_cmp(&y.0.distance).unwrap());
    let (closest, path) = match nearest {
        Some((c, path)) if c.distance <= b => (c, path),
        _ => return Err(LaminaError::NoLeavesNearby(p[0], p[1])),
    };
    let origin = closest.point;
    let s = closest.segment;
    let (lo, hi) = (s.saturating_sub(4), (s + 5).min(path.len() - 1));
    let tangent = normalize(sub(path[hi], path[lo]));
    let normal = perp(tangent);

    let mut halvings = 0;
    loop {
        let m = opts.graph_samples.max(3);
        let xs: Vec<f64> = (0..m).map(|k| -a + 2.0 * a * k as f64 / (m - 1) as f64).collect();
        let at_boundary = |q: Point| near_boundary(dom, q, 2.0 * h);
        if let Some(g) = collect_graphs(&paths, origin, tangent, normal, a, b, &xs, 3.0 * opts.delta, &at_boundary) {
            let mut bx = FlowBox {
                base: p,
                origin,
                tangent,
                normal,
                half_width: a,
                half_height: b,
                labels: g.labels,
                leaf_ids: g.leaf_ids,
                xi: xs,
                graphs: g.graphs,
                lip_f: 0.0,
                lip_finv: 0.0,
                inverse_error: 0.0,
                graph_error: g.graph_error,
                max_slope: g.max_slope,
                halvings,
            };
            estimate_lipschitz(&mut bx, dom, opts.lip_samples, opts.seed);
            return Ok(bx);
        }
        if halvings == opts.max_halvings || a / 2.0 < 4.0 * h {
            return Err(LaminaError::BoxDegenerate(2.0 * a));
        }
        a /= 2.0;
        b /= 2.0;
        halvings += 1;
    }
}

/// True when some node within `r` of `p` is outside the grid, inactive or on
/// the boundary.
pub fn near_boundary(dom: &MetricDomain, p: Point, r: f64) -> bool {
    let h = dom.h;
    let lo = |x: f64, o: f64| ((x - r - o) / h).floor() as i64;
    let hi = |x: f64, o: f64| ((x + r - o) / h).ceil() as i64;
    for j in lo(p[1], dom.origin[1])..=hi(p[1], dom.origin[1]) {
        for i in lo(p[0], dom.origin[0])..=hi(p[0], dom.origin[0]) {
            if i < 0 || j < 0 || i > dom.nx as i64 || j > dom.ny as i64 {
                return true;
            }
            let n = dom.node(i as usize, j as usize);
            if !dom.node_active(n) || dom.is_boundary(n) {
                return true;
            }
        }
    }
    false
}

/// Lipschitz constants of the chart and its inverse from seeded point pairs
/// (half spread over the box, half at mesh scale) whose images lie in the
/// domain, plus the inverse error.
fn estimate_lipschitz(bx: &mut FlowBox, dom: &MetricDomain, samples: usize, seed: u64) {
    let h = dom.h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (bx.half_width, bx.half_height);
    let mut lip_f: f64 = 0.0;
    let mut lip_finv: f64 = 0.0;
    let mut inv_err: f64 = 0.0;
    for s in 0..samples {
        let x = [rng.gen_range(-a..=a), rng.gen_range(-b..=b)];
        let y = if s % 2 == 0 {
            [rng.gen_range(-a..=a), rng.gen_range(-b..=b)]
        } else {
            [
                (x[0] + rng.gen_range(-h..=h)).clamp(-a, a),
                (x[1] + rng.gen_range(-h..=h)).clamp(-b, b),
            ]
        };
        let d = dist(x, y);
        if d == 0.0 {
            continue;
        }
        let (fx, fy) = (bx.chart(x[0], x[1]), bx.chart(y[0], y[1]));
        if !dom.contains(fx) || !dom.contains(fy) {
            continue;
        }
        let df = dist(fx, fy);
        lip_f = lip_f.max(df / d);
        lip_finv = lip_finv.max(if df > 0.0 { d / df } else { f64::INFINITY });
        if let Some((xi, eta)) = bx.inverse(fx) {
            inv_err = inv_err.max(dist(bx.chart(xi, eta), fx));
        }
    }
    bx.lip_f = lip_f;
    bx.lip_finv = lip_finv;
    bx.inverse_error = inv_err;
}

/// Label re-indexing between two overlapping boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub a: usize,
    pub b: usize,
    /// `(label in a, label in b)` for every shared leaf.
    pub pairs: Vec<(f64, f64)>,
    /// The re-indexing is strictly monotone.
    pub consistent: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lamination {
    pub leaves: Vec<Leaf>,
    /// Cells touched by some leaf.
    pub support: Vec<bool>,
    pub atlas: Vec<FlowBox>,
    pub transitions: Vec<Transition>,
    pub curvature_bound: f64,
    /// Support cells no box could be built around.
    pub uncovered: Vec<(usize, usize)>,
}

impl Lamination {
    pub fn flow_box(&self, p: Point, dom: &MetricDomain, opts: &FlowBoxOptions) -> Result<FlowBox> {
        build_flow_box(&self.leaves, p, dom, opts)
    }

    pub fn support_cells(&self) -> usize {
        self.support.iter().filter(|&&b| b).count()
    }
}

/// Cells met by the leaves, sampled at half the mesh size.
pub fn support_raster(leaves: &[Leaf], dom: &MetricDomain) -> Vec<bool> {
    let mut s = vec![false; dom.n_cells()];
    for leaf in leaves {
        for p in resample(&leaf.path(), dom.h / 2.0) {
            if let Some((i, j)) = dom.locate(p) {
                s[j * dom.nx + i] = true;
            }
        }
    }
    s
}

/// Deduplicates, checks disjointness, rasterises the support and covers it
/// by flow boxes overlapping by at least `2h`.
pub fn assemble_lamination(leaves: Vec<Leaf>, dom: &MetricDomain, opts: &FlowBoxOptions) -> Result<Lamination> {
    let leaves = dedup_leaves(leaves, 2.0 * dom.h);
    if leaves.len() >= 2 {
        let report = check_disjointness(&leaves);
        if let Some(c) = report.crossings.first() {
            return Err(LaminaError::DisjointnessViolated(format!(
                "leaves {} and {} cross at ({:.6}, {:.6})",
                c.a, c.b, c.point[0], c.point[1]
            )));
        }
    }
    let support = support_raster(&leaves, dom);
    let margin = 2.0 * dom.h;
    let mut atlas: Vec<FlowBox> = Vec::new();
    let mut uncovered = Vec::new();
    for (i, j) in dom.active_cells() {
        if !support[j * dom.nx + i] {
            continue;
        }
        let c = dom.cell_center(i, j);
        if atlas.iter().any(|b| b.covers(c, margin)) {
            continue;
        }
        match build_flow_box(&leaves, c, dom, opts) {
            Ok(b) if b.covers(c, margin) => atlas.push(b),
            _ => uncovered.push((i, j)),
        }
    }
    let transitions = transitions(&atlas);
    let curvature_bound = leaves.iter().map(|l| l.sup_curvature).fold(0.0, f64::max);
    Ok(Lamination {
        leaves,
        support,
        atlas,
        transitions,
        curvature_bound,
        uncovered,
    })
}

fn transitions(atlas: &[FlowBox]) -> Vec<Transition> {
    let mut out = Vec::new();
    for a in 0..atlas.len() {
        for b in a + 1..atlas.len() {
            let (ba, bb) = (&atlas[a], &atlas[b]);
            let reach = ba.half_width.hypot(ba.half_height) + bb.half_width.hypot(bb.half_height);
            if dist(ba.origin, bb.origin) > reach {
                continue;
            }
            let overlap = (0..ba.labels.len()).any(|m| {
                ba.xi.iter().any(|&x| bb.covers(ba.chart(x, ba.labels[m]), 0.0))
            });
            if !overlap {
                continue;
            }
            let mut pairs = Vec::new();
            for (ma, id) in ba.leaf_ids.iter().enumerate() {
                if let Some(mb) = bb.leaf_ids.iter().position(|x| x == id) {
                    pairs.push((ba.labels[ma], bb.labels[mb]));
                }
            }
            let inc = pairs.windows(2).all(|w| w[1].1 > w[0].1);
            let dec = pairs.windows(2).all(|w| w[1].1 < w[0].1);
            out.push(Transition {
                a,
                b,
                consistent: inc || dec,
                pairs,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainConfig;

    fn unit(n: usize) -> MetricDomain {
        MetricDomain::build(&DomainConfig::rect(n, n, 1.0 / n as f64), None).unwrap()
    }

    fn vertical(x: f64) -> Leaf {
        Leaf::synthetic((0..=64).map(|k| [x, k as f64 / 64.0]).collect(), x)
    }

    #[test]
    fn parallel_lines_give_flat_chart() {
        let dom = unit(64);
        let leaves: Vec<Leaf> = [0.2, 0.4, 0.8].iter().map(|&x| vertical(x)).collect();
        let opts = FlowBoxOptions {
            half_width: Some(0.25),
            half_height: Some(0.7),
            ..Default::default()
        };
        let b = build_flow_box(&leaves, [0.3, 0.5], &dom, &opts).unwrap();
        assert_eq!(b.labels.len(), 3);
        assert!((b.lip_f - 1.0).abs() <= 0.01, "{}", b.lip_f);
        assert!((b.lip_finv - 1.0).abs() <= 0.01, "{}", b.lip_finv);
        assert!(b.inverse_error <= 1e-12);
        let (xi, eta) = b.inverse([0.35, 0.45]).unwrap();
        assert!(dist(b.chart(xi, eta), [0.35, 0.45]) < 1e-12);
    }

    #[test]
    fn no_leaves_nearby() {
        let dom = unit(32);
        let r = build_flow_box(&[vertical(0.1)], [0.9, 0.5], &dom, &FlowBoxOptions::default());
        assert!(matches!(r, Err(LaminaError::NoLeavesNearby(..))));
    }

    #[test]
    fn crossing_leaves_are_rejected() {
        let dom = unit(32);
        let a = Leaf::synthetic(vec![[0.0, 0.0], [1.0, 1.0]], 0.0);
        let b = Leaf::synthetic(vec![[0.0, 1.0], [1.0, 0.0]], 1.0);
        assert!(matches!(
            assemble_lamination(vec![a, b], &dom, &FlowBoxOptions::default()),
            Err(LaminaError::DisjointnessViolated(_))
        ));
    }

    #[test]
    fn single_leaf_is_covered_consistently() {
        let dom = unit(32);
        let lam = assemble_lamination(vec![vertical(0.5)], &dom, &FlowBoxOptions::default()).unwrap();
        assert!(!lam.atlas.is_empty());
        assert!(lam.transitions.iter().all(|t| t.consistent));
        assert!(lam.atlas.iter().all(|b| b.labels.len() == 1));
        assert_eq!(lam.support_cells(), 32);
    }
}
