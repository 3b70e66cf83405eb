//! Transverse profiles and measures of flow boxes, the Ruelle-Sullivan
//! current they define, and its primitive.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::contour::trace;
use crate::domain::{cell_covector, cell_curl, cell_mass, grad, EdgeField, MetricDomain, NodeField};
use crate::error::{LaminaError, Result};
use crate::flowbox::{FlowBox, Lamination};
use crate::geometry::{dist, dot, lerp, Point};
use crate::solver::{CurrentField, MASS_FLOOR_REL};

/// Values of `u` along the transverse axis `eta -> F(0, eta)` of a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseProfile {
    /// Transverse coordinates, increasing.
    pub labels: Vec<f64>,
    /// Profile values after orientation, nondecreasing.
    pub values: Vec<f64>,
    /// Sign of each increment before monotone cleanup.
    pub sign: Vec<i8>,
    /// `-1` when the box axis was reversed to make the profile nondecreasing.
    pub orientation: f64,
    /// Largest drop below the running maximum before cleanup.
    pub max_drop: f64,
    /// Largest variation of `u` along plaques, with its tolerance `2h ||du||_inf`.
    pub plaque_variation: f64,
    pub plaque_tolerance: f64,
}

impl TransverseProfile {
    /// Builds a profile directly from samples (for constructed inputs).
    pub fn from_samples(labels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(LaminaError::ShapeMismatch {
                expected: labels.len(),
                got: values.len(),
            });
        }
        let sign = increments_sign(&values);
        let (k1, k2) = first_drop(&labels, &values, 0.0);
        if let (Some(k1), Some(k2)) = (k1, k2) {
            return Err(LaminaError::NonMonotoneProfile { k1, k2 });
        }
        Ok(TransverseProfile {
            labels,
            values,
            sign,
            orientation: 1.0,
            max_drop: 0.0,
            plaque_variation: 0.0,
            plaque_tolerance: 0.0,
        })
    }

    pub fn total_mass(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }
}

fn increments_sign(v: &[f64]) -> Vec<i8> {
    v.windows(2)
        .map(|w| match w[1].partial_cmp(&w[0]) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        })
        .collect()
}

/// Witness of non-monotonicity: a label where the profile rises and one
/// where it falls by more than `tol` below its running maximum.
fn first_drop(labels: &[f64], values: &[f64], tol: f64) -> (Option<f64>, Option<f64>) {
    let mut run_max = f64::NEG_INFINITY;
    let mut rise = None;
    for i in 0..values.len() {
        if i > 0 && values[i] > values[i - 1] && rise.is_none() {
            rise = Some(labels[i]);
        }
        if values[i] < run_max - tol {
            return (rise.or(Some(labels[0])), Some(labels[i]));
        }
        run_max = run_max.max(values[i]);
    }
    (None, None)
}

/// Largest per-cell euclidean gradient norm of `u`.
fn grad_sup(u: &NodeField, dom: &MetricDomain) -> Result<f64> {
    let du = grad(u, dom)?;
    Ok(dom
        .active_cells()
        .map(|(i, j)| {
            let c = cell_covector(&du, dom, i, j);
            c[0].hypot(c[1])
        })
        .fold(0.0, f64::max))
}

/// Samples `u` at the nearest node along the transverse axis of `bx`,
/// orients the axis so the profile is nondecreasing and checks constancy
/// along plaques. Drops below `mono_tol` times the total variation are
/// cleaned up by the running maximum; larger ones are an error.
pub fn extract_profile(u: &NodeField, bx: &FlowBox, dom: &MetricDomain, mono_tol: f64) -> Result<TransverseProfile> {
    dom.check_node_field(u)?;
    let h = dom.h;
    let n = ((2.0 * bx.half_height / (0.5 * h)).ceil() as usize).max(2);
    let mut labels = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let eta = -bx.half_height + 2.0 * bx.half_height * i as f64 / n as f64;
        let p = bx.chart(0.0, eta);
        if dom.contains(p) {
            labels.push(eta);
            values.push(u.values[dom.nearest_node(p)]);
        }
    }
    if labels.len() < 2 {
        return Err(LaminaError::BoxMismatch);
    }
    let mut orientation = 1.0;
    if values[values.len() - 1] < values[0] {
        orientation = -1.0;
        labels = labels.iter().rev().map(|k| -k).collect();
        values.reverse();
    }
    let sign = increments_sign(&values);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let tol = mono_tol * (hi - lo);
    if let (Some(k1), Some(k2)) = first_drop(&labels, &values, tol) {
        return Err(LaminaError::NonMonotoneProfile { k1, k2 });
    }
    let mut max_drop: f64 = 0.0;
    let mut run_max = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        max_drop = max_drop.max(run_max - *v);
        run_max = run_max.max(*v);
        *v = run_max;
    }

    // Plaques midway between consecutive labels of the box.
    let mut plaque_variation: f64 = 0.0;
    let mids: Vec<f64> = bx.labels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    for eta in mids {
        let base = bx.chart(0.0, eta);
        if !dom.contains(base) {
            continue;
        }
        let u0 = u.values[dom.nearest_node(base)];
        for &xi in &bx.xi {
            let p = bx.chart(xi, eta);
            if dom.contains(p) {
                plaque_variation = plaque_variation.max((u.values[dom.nearest_node(p)] - u0).abs());
            }
        }
    }
    Ok(TransverseProfile {
        labels,
        values,
        sign,
        orientation,
        max_drop: max_drop.max(0.0),
        plaque_variation,
        plaque_tolerance: 2.0 * h * grad_sup(u, dom)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub k: f64,
    pub mass: f64,
}

/// Measure on the labels of one box, as a cumulative distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseMeasure {
    pub labels: Vec<f64>,
    pub cdf: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub total_mass: f64,
    /// Orientation of the profile relative to the box axis.
    #[serde(default = "one")]
    pub orientation: f64,
}

fn one() -> f64 {
    1.0
}

impl TransverseMeasure {
    /// `mu([k1, k2])` by interpolating the cumulative distribution.
    pub fn mass_between(&self, k1: f64, k2: f64) -> f64 {
        let (a, b) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        self.cdf_at(b) - self.cdf_at(a)
    }

    pub fn cdf_at(&self, k: f64) -> f64 {
        let l = &self.labels;
        if l.is_empty() || k <= l[0] {
            return 0.0;
        }
        if k >= l[l.len() - 1] {
            return self.total_mass;
        }
        let m = l.partition_point(|&v| v <= k) - 1;
        let t = (k - l[m]) / (l[m + 1] - l[m]);
        self.cdf[m] + t * (self.cdf[m + 1] - self.cdf[m])
    }
}

/// Atom threshold relative to the total mass.
pub const ATOM_TOL_REL: f64 = 1.0 / 1024.0;

/// Samples on either side used to tell an atom from a steep continuous part.
pub const ATOM_WINDOW: usize = 4;

/// Indices `i` of increments `cdf[i + 1] - cdf[i]` that carry an atom: above
/// `2^-10` of the total mass and above three quarters of the mass within
/// `ATOM_WINDOW` samples.
pub fn atom_increments(cdf: &[f64]) -> Vec<usize> {
    let total = match (cdf.first(), cdf.last()) {
        (Some(a), Some(b)) => b - a,
        _ => return Vec::new(),
    };
    if total <= 0.0 {
        return Vec::new();
    }
    let n = cdf.len() - 1;
    (0..n)
        .filter(|&i| {
            let inc = cdf[i + 1] - cdf[i];
            let lo = i.saturating_sub(ATOM_WINDOW);
            let hi = (i + 1 + ATOM_WINDOW).min(n);
            inc > ATOM_TOL_REL * total && inc > 0.75 * (cdf[hi] - cdf[lo])
        })
        .collect()
}

/// CDF differences of a monotone profile, with isolated large increments
/// reported as atoms.
pub fn profile_to_measure(profile: &TransverseProfile) -> Result<TransverseMeasure> {
    if let (Some(k1), Some(k2)) = first_drop(&profile.labels, &profile.values, 0.0) {
        return Err(LaminaError::NonMonotoneProfile { k1, k2 });
    }
    let v0 = profile.values.first().copied().unwrap_or(0.0);
    let cdf: Vec<f64> = profile.values.iter().map(|v| v - v0).collect();
    let total_mass = cdf.last().copied().unwrap_or(0.0);
    let k = &profile.labels;
    let atoms = atom_increments(&cdf)
        .into_iter()
        .map(|i| Atom {
            k: 0.5 * (k[i] + k[i + 1]),
            mass: cdf[i + 1] - cdf[i],
        })
        .collect();
    Ok(TransverseMeasure {
        labels: profile.labels.clone(),
        cdf,
        atoms,
        total_mass,
        orientation: profile.orientation,
    })
}

/// Profiles and measures for every box of the atlas.
pub fn measure_lamination(u: &NodeField, lam: &Lamination, dom: &MetricDomain, mono_tol: f64) -> Result<Vec<TransverseMeasure>> {
    lam.atlas
        .iter()
        .map(|bx| profile_to_measure(&extract_profile(u, bx, dom, mono_tol)?))
        .collect()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub checked: usize,
    pub max_deviation: f64,
}

/// Compares `mu_a` and `mu_b` between consecutive shared leaves of every
/// transition.
pub fn transition_invariance(lam: &Lamination, measures: &[TransverseMeasure]) -> InvarianceReport {
    let mut r = InvarianceReport::default();
    for t in &lam.transitions {
        let (ma, mb) = (&measures[t.a], &measures[t.b]);
        for w in t.pairs.windows(2) {
            let ka = [w[0].0 * ma.orientation, w[1].0 * ma.orientation];
            let kb = [w[0].1 * mb.orientation, w[1].1 * mb.orientation];
            let da = ma.mass_between(ka[0], ka[1]);
            let db = mb.mass_between(kb[0], kb[1]);
            r.checked += 1;
            r.max_deviation = r.max_deviation.max((da - db).abs());
        }
    }
    r
}

/// Hat-function weight of `p` in `bx`, zero outside.
fn hat(bx: &FlowBox, p: Point) -> f64 {
    match bx.inverse(p) {
        Some((xi, eta)) => {
            (1.0 - xi.abs() / bx.half_width).max(0.0) * (1.0 - eta.abs() / bx.half_height).max(0.0)
        }
        None => 0.0,
    }
}

/// Partition of unity `chi_alpha(p)` subordinate to the atlas.
pub fn partition_weight(atlas: &[FlowBox], alpha: usize, p: Point) -> f64 {
    let own = hat(&atlas[alpha], p);
    if own == 0.0 {
        return 0.0;
    }
    let reach = |b: &FlowBox| b.half_width.hypot(b.half_height) + 1e-12;
    let total: f64 = atlas
        .iter()
        .filter(|b| dist(b.origin, p) <= 2.0 * reach(b))
        .map(|b| hat(b, p))
        .sum();
    own / total
}

/// Adds the jump `mass` across a curve (with `{u > y}` on its left) to the
/// edges it crosses, scaled by `weight(p)` at each crossing point.
fn rasterize_curve(curve: &[Point], mass: f64, dom: &MetricDomain, weight: &dyn Fn(Point) -> f64, t: &mut EdgeField) {
    let h = dom.h;
    let o = dom.origin;
    let last = curve.len().saturating_sub(2);
    for (k, w) in curve.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let d = [q[0] - p[0], q[1] - p[1]];
        // Horizontal grid lines `y = o + j h` carry horizontal edges, vertical
        // lines vertical ones. Crossings are counted on `[start, end)`, and on
        // the closed interval for the final segment.
        for axis in 0..2 {
            if d[axis] == 0.0 {
                continue;
            }
            let other = 1 - axis;
            let (a, b) = ((p[axis] - o[axis]) / h, (q[axis] - o[axis]) / h);
            let closed = k == last;
            let lines: Vec<i64> = if a < b {
                let end = if closed { b.floor() as i64 + 1 } else { b.ceil() as i64 };
                (a.ceil() as i64..end).collect()
            } else {
                let start = if closed { b.ceil() as i64 } else { b.floor() as i64 + 1 };
                (start..=a.floor() as i64).collect()
            };
            let (n_line, n_along) = if axis == 1 { (dom.ny, dom.nx) } else { (dom.nx, dom.ny) };
            for line in lines {
                let s = (line as f64 - a) / (b - a);
                let c = lerp(p, q, s);
                let f = (c[other] - o[other]) / h;
                if line < 0 || line > n_line as i64 || f < 0.0 || f >= n_along as f64 {
                    continue;
                }
                let along = f.floor() as usize;
                let line = line as usize;
                if axis == 1 {
                    let n = dom.node(along, line);
                    if dom.hedge_active(n) {
                        let sgn = if d[1] < 0.0 { 1.0 } else { -1.0 };
                        t.ex[n] += sgn * mass * weight(c) / h;
                    }
                } else {
                    let n = dom.node(line, along);
                    if dom.vedge_active(n) {
                        let sgn = if d[0] > 0.0 { 1.0 } else { -1.0 };
                        t.ey[n] += sgn * mass * weight(c) / h;
                    }
                }
            }
        }
    }
}

/// The Ruelle-Sullivan current `sum_alpha chi_alpha n_lambda mu_alpha`,
/// rasterised through the plaques `F_alpha(., k)` of every box.
pub fn ruelle_sullivan(lam: &Lamination, measures: &[TransverseMeasure], dom: &MetricDomain) -> Result<CurrentField> {
    if measures.len() != lam.atlas.len() {
        return Err(LaminaError::InconsistentMeasures(format!(
            "{} measures for {} boxes",
            measures.len(),
            lam.atlas.len()
        )));
    }
    if lam.atlas.is_empty() || measures.iter().all(|m| m.total_mass <= 0.0) {
        return Err(LaminaError::InconsistentMeasures(
            "transverse measure must have full support".into(),
        ));
    }
    let mut t = EdgeField::zeros(dom.n_nodes());
    let h = dom.h;
    for (alpha, (bx, mu)) in lam.atlas.iter().zip(measures).enumerate() {
        let steps = ((2.0 * bx.half_width / (0.25 * h)).ceil() as usize).max(2);
        let weight = |p: Point| partition_weight(&lam.atlas, alpha, p);
        for (k, c) in mu.labels.windows(2).zip(mu.cdf.windows(2)) {
            let m = c[1] - c[0];
            if m <= 0.0 {
                continue;
            }
            let eta = 0.5 * (k[0] + k[1]) * mu.orientation;
            let mut curve: Vec<Point> = (0..=steps)
                .map(|s| bx.chart(-bx.half_width + 2.0 * bx.half_width * s as f64 / steps as f64, eta))
                .collect();
            // {u > y} lies on the side of increasing oriented label.
            if mu.orientation < 0.0 {
                curve.reverse();
            }
            rasterize_curve(&curve, m, dom, &weight, &mut t);
        }
    }
    Ok(CurrentField::from_edges(t, dom))
}

/// Rasterises a single curve carrying `mass` (useful for constructed currents).
pub fn curve_current(curve: &[Point], mass: f64, dom: &MetricDomain) -> EdgeField {
    let mut t = EdgeField::zeros(dom.n_nodes());
    rasterize_curve(curve, mass, dom, &|_| 1.0, &mut t);
    t
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PolarReport {
    /// `|sum |T| - sum mu| / sum mu`.
    pub mass_error: f64,
    pub max_angle_deg: f64,
    pub blocks_checked: usize,
}

/// Compares `|T|` with the rasterised transverse measure and the direction
/// of `T` with the leaf normals, aggregated over blocks of `block` cells.
pub fn polar_check(
    t: &CurrentField,
    lam: &Lamination,
    measures: &[TransverseMeasure],
    dom: &MetricDomain,
    block: usize,
) -> PolarReport {
    let h = dom.h;
    let nb = |n: usize| n.div_ceil(block);
    let (bx_n, by_n) = (nb(dom.nx), nb(dom.ny));
    let mut mu_mass = vec![0.0; bx_n * by_n];
    let mut normal = vec![[0.0; 2]; bx_n * by_n];
    for (alpha, (bx, mu)) in lam.atlas.iter().zip(measures).enumerate() {
        let steps = ((2.0 * bx.half_width / (0.25 * h)).ceil() as usize).max(2);
        for (k, c) in mu.labels.windows(2).zip(mu.cdf.windows(2)) {
            let m = c[1] - c[0];
            if m <= 0.0 {
                continue;
            }
            let eta = 0.5 * (k[0] + k[1]) * mu.orientation;
            let pts: Vec<Point> = (0..=steps)
                .map(|s| bx.chart(-bx.half_width + 2.0 * bx.half_width * s as f64 / steps as f64, eta))
                .collect();
            for w in pts.windows(2) {
                let mid = lerp(w[0], w[1], 0.5);
                let Some((i, j)) = dom.locate(mid) else { continue };
                if !dom.cell_active(i, j) {
                    continue;
                }
                let chi = partition_weight(&lam.atlas, alpha, mid);
                let len = dom.rho_at(mid) * dist(w[0], w[1]);
                let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
                let nrm = (d[0].hypot(d[1])).max(1e-300);
                let mut n = [-d[1] / nrm, d[0] / nrm];
                if mu.orientation < 0.0 {
                    n = [-n[0], -n[1]];
                }
                let b = (j / block) * bx_n + i / block;
                mu_mass[b] += chi * m * len;
                normal[b][0] += chi * m * len * n[0];
                normal[b][1] += chi * m * len * n[1];
            }
        }
    }
    let mut t_mass = vec![0.0; bx_n * by_n];
    let mut t_dir = vec![[0.0; 2]; bx_n * by_n];
    for (i, j) in dom.active_cells() {
        let b = (j / block) * bx_n + i / block;
        let c = cell_covector(&t.values, dom, i, j);
        let m = t.mass[j * dom.nx + i];
        t_mass[b] += m;
        let w = dom.cell_rho(i, j) * h * h;
        t_dir[b][0] += w * c[0];
        t_dir[b][1] += w * c[1];
    }
    let total_mu: f64 = mu_mass.iter().sum();
    let total_t: f64 = t_mass.iter().sum();
    let floor = MASS_FLOOR_REL * mu_mass.iter().copied().fold(0.0, f64::max);
    let mut report = PolarReport {
        mass_error: if total_mu > 0.0 { (total_t - total_mu).abs() / total_mu } else { total_t },
        ..Default::default()
    };
    for b in 0..mu_mass.len() {
        if mu_mass[b] <= floor.max(1e-12 * total_mu) {
            continue;
        }
        let (u, v) = (t_dir[b], normal[b]);
        let nu = u[0].hypot(u[1]);
        let nv = v[0].hypot(v[1]);
        if nu == 0.0 || nv == 0.0 {
            continue;
        }
        let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
        report.max_angle_deg = report.max_angle_deg.max(cos.acos().to_degrees());
        report.blocks_checked += 1;
    }
    report
}

#[derive(Debug, Clone)]
pub struct Primitive {
    pub u: NodeField,
    pub base: usize,
    pub max_curl: f64,
    /// `sum h^2 |grad u - T|` over edges.
    pub residual: f64,
}

/// Integrates a closed 1-form along a breadth-first spanning tree from the
/// first active node. `curl_tol` bounds `max |curl T| / max |T|`.
pub fn integrate_current(t: &EdgeField, dom: &MetricDomain, curl_tol: f64) -> Result<Primitive> {
    dom.check_edge_field(t)?;
    if !dom.is_simply_connected() {
        return Err(LaminaError::NotSimplyConnected);
    }
    let scale = t.ex.iter().chain(&t.ey).fold(0.0f64, |a, b| a.max(b.abs()));
    let max_curl = cell_curl(t, dom).iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let rel = if scale > 0.0 { max_curl / (scale * dom.h) } else { 0.0 };
    if rel > curl_tol {
        return Err(LaminaError::NotClosed(rel));
    }
    let base = dom.active_nodes().next().ok_or(LaminaError::EmptyMask)?;
    let s = dom.nx + 1;
    let h = dom.h;
    let mut u = vec![f64::NAN; dom.n_nodes()];
    u[base] = 0.0;
    let mut q = VecDeque::from([base]);
    while let Some(k) = q.pop_front() {
        let (i, j) = dom.node_ij(k);
        let mut visit = |m: usize, du: f64, u: &mut Vec<f64>| {
            if u[m].is_nan() && dom.node_active(m) {
                u[m] = u[k] + du;
                q.push_back(m);
            }
        };
        if i < dom.nx && dom.hedge_active(k) {
            visit(k + 1, h * t.ex[k], &mut u);
        }
        if i > 0 && dom.hedge_active(k - 1) {
            visit(k - 1, -h * t.ex[k - 1], &mut u);
        }
        if j < dom.ny && dom.vedge_active(k) {
            visit(k + s, h * t.ey[k], &mut u);
        }
        if j > 0 && dom.vedge_active(k - s) {
            visit(k - s, -h * t.ey[k - s], &mut u);
        }
    }
    let u = NodeField {
        values: u.into_iter().map(|v| if v.is_nan() { 0.0 } else { v }).collect(),
    };
    let g = grad(&u, dom)?;
    let residual = h * h
        * (0..dom.n_nodes())
            .map(|n| {
                let a = if dom.hedge_active(n) { (g.ex[n] - t.ex[n]).abs() } else { 0.0 };
                let b = if dom.vedge_active(n) { (g.ey[n] - t.ey[n]).abs() } else { 0.0 };
                a + b
            })
            .sum::<f64>();
    Ok(Primitive {
        u,
        base,
        max_curl,
        residual,
    })
}

/// `min_c sum |u - v - c| h^2` over active nodes.
pub fn l1_distance_mod_constant(u: &NodeField, v: &NodeField, dom: &MetricDomain) -> f64 {
    let mut d: Vec<f64> = dom.active_nodes().map(|n| u.values[n] - v.values[n]).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c = d[d.len() / 2];
    d.iter().map(|x| (x - c).abs()).sum::<f64>() * dom.h * dom.h
}

/// `||u||_1 + int *|du|`.
pub fn bv_norm(u: &NodeField, dom: &MetricDomain) -> Result<f64> {
    let l1: f64 = dom.active_nodes().map(|n| u.values[n].abs()).sum::<f64>() * dom.h * dom.h;
    let tv: f64 = cell_mass(&grad(u, dom)?, dom).iter().sum();
    Ok(l1 + tv)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CoareaReport {
    pub total_variation: f64,
    pub level_integral: f64,
    pub relative_error: f64,
    pub thresholds: usize,
}

/// Compares `int *|du|` with the midpoint-rule integral over thresholds of
/// the weighted length of `∂{u > y}`.
pub fn coarea_check(u: &NodeField, dom: &MetricDomain, n_thresholds: usize) -> Result<CoareaReport> {
    let tv: f64 = cell_mass(&grad(u, dom)?, dom).iter().sum();
    let (lo, hi) = dom
        .active_nodes()
        .map(|n| u.values[n])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let n = n_thresholds.max(1);
    let dy = (hi - lo) / n as f64;
    let mut integral = 0.0;
    if dy > 0.0 {
        for i in 0..n {
            let y = lo + (i as f64 + 0.5) * dy;
            let len: f64 = trace(u, y, dom, true)
                .iter()
                .map(|c| {
                    let mut p = c.points.clone();
                    if c.closed {
                        p.push(p[0]);
                    }
                    dom.polyline_length(&p)
                })
                .sum();
            integral += len * dy;
        }
    }
    Ok(CoareaReport {
        total_variation: tv,
        level_integral: integral,
        relative_error: if tv > 0.0 { (integral - tv).abs() / tv } else { integral },
        thresholds: n,
    })
}
