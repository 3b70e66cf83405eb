//! Convergence diagnostics for sequences of laminations and measures:
//! Hausdorff limits, Thurston's geometric topology, flow-box convergence,
//! vague convergence of currents and the geodesic-space picture on the
//! Poincare disk.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{cell_mass, EdgeField, MetricDomain};
use crate::error::{LaminaError, Result};
use crate::flowbox::{build_flow_box, support_raster, FlowBox, FlowBoxOptions};
use crate::geometry::{closest_on_polyline, dist, norm, resample, sub, Point};
use crate::hyperbolic::{endpoint_pair_distance, normalize_angle, PoincareGeodesic};
use crate::lamination::{curvature_tolerance, default_window, leaf_curvature, Leaf};
use crate::testforms::{line_integral, pair, TestForm};
use crate::transverse::curve_current;

/// True when the last half of `seq` stays within `max(tol, ratio * max of the first half)`.
pub fn tail_converges(seq: &[f64], tol: f64, ratio: f64) -> bool {
    if seq.len() < 2 {
        return seq.iter().all(|v| v.abs() <= tol);
    }
    let mid = seq.len() / 2;
    let head = seq[..mid].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tail = seq[mid..].iter().fold(0.0f64, |a, b| a.max(b.abs()));
    tail <= tol.max(ratio * head)
}

/// Default tail window: the last quarter of the sequence.
pub fn tail_window(n: usize) -> usize {
    (n / 4).max(1)
}

/// Leaves with an atomic transverse measure (one mass per leaf); `masses`
/// is empty for unmeasured laminations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasuredLamination {
    pub leaves: Vec<Leaf>,
    #[serde(default)]
    pub masses: Vec<f64>,
}

impl MeasuredLamination {
    pub fn new(leaves: Vec<Leaf>, masses: Vec<f64>) -> Self {
        MeasuredLamination { leaves, masses }
    }

    pub fn unmeasured(leaves: Vec<Leaf>) -> Self {
        MeasuredLamination { leaves, masses: Vec::new() }
    }

    pub fn is_measured(&self) -> bool {
        !self.masses.is_empty()
    }

    /// `sum_l m_l [leaf_l]` rasterised on edges, with `{u > label}` to the
    /// left of each leaf.
    pub fn current(&self, dom: &MetricDomain) -> Result<EdgeField> {
        if self.masses.len() != self.leaves.len() {
            return Err(LaminaError::NonAtomicMeasure(format!(
                "{} masses for {} leaves",
                self.masses.len(),
                self.leaves.len()
            )));
        }
        let mut t = EdgeField::zeros(dom.n_nodes());
        for (leaf, &m) in self.leaves.iter().zip(&self.masses) {
            t.add_assign(&curve_current(&leaf.path(), m, dom));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaminationSequence {
    pub items: Vec<MeasuredLamination>,
    /// Largest sampled leaf curvature over all items.
    pub curvature_bound: f64,
}

impl LaminationSequence {
    pub fn new(items: Vec<MeasuredLamination>) -> Self {
        let curvature_bound = items
            .iter()
            .flat_map(|it| it.leaves.iter().map(|l| l.sup_curvature))
            .fold(0.0, f64::max);
        LaminationSequence { items, curvature_bound }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn currents(&self, dom: &MetricDomain) -> Result<Vec<EdgeField>> {
        self.items.iter().map(|it| it.current(dom)).collect()
    }
}

fn dilate(r: &[bool], dom: &MetricDomain) -> Vec<bool> {
    let (nx, ny) = (dom.nx, dom.ny);
    let mut out = vec![false; r.len()];
    for j in 0..ny {
        for i in 0..nx {
            if !r[j * nx + i] {
                continue;
            }
            for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                    out[jj * nx + ii] = true;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitRasters {
    pub liminf: Vec<bool>,
    pub limsup: Vec<bool>,
    pub window: usize,
}

impl LimitRasters {
    pub fn liminf_cells(&self) -> usize {
        self.liminf.iter().filter(|&&b| b).count()
    }

    pub fn limsup_cells(&self) -> usize {
        self.limsup.iter().filter(|&&b| b).count()
    }
}

/// A cell is in the lower limit when each of the last `window` items meets
/// its 3x3 neighbourhood, and in the upper limit when at least `window`
/// items do.
pub fn hausdorff_liminf_limsup(seq: &LaminationSequence, dom: &MetricDomain, window: Option<usize>) -> LimitRasters {
    let n = seq.len();
    let w = window.unwrap_or_else(|| tail_window(n)).clamp(1, n.max(1));
    let mut count = vec![0usize; dom.n_cells()];
    let mut tail = vec![true; dom.n_cells()];
    for (idx, item) in seq.items.iter().enumerate() {
        let r = dilate(&support_raster(&item.leaves, dom), dom);
        for (c, &hit) in r.iter().enumerate() {
            if hit {
                count[c] += 1;
            }
            if idx + w >= n && !hit {
                tail[c] = false;
            }
        }
    }
    LimitRasters {
        liminf: if n == 0 { vec![false; dom.n_cells()] } else { tail },
        limsup: count.iter().map(|&c| c >= w && n > 0).collect(),
        window: w,
    }
}

/// Points of a lamination with the angle of the line through them.
fn directed_points(leaves: &[Leaf], spacing: f64) -> Vec<(Point, f64)> {
    let mut out = Vec::new();
    for leaf in leaves {
        let p = resample(&leaf.path(), spacing);
        if p.len() < 2 {
            continue;
        }
        for k in 0..p.len() {
            let (a, b) = (p[k.saturating_sub(1)], p[(k + 1).min(p.len() - 1)]);
            let d = sub(b, a);
            out.push((p[k], d[1].atan2(d[0])));
        }
    }
    out
}

/// Angle between two unoriented lines, in `[0, pi/2]`.
pub fn line_angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThurstonWitness {
    pub point: Point,
    pub eps: f64,
    /// First index from which every item is close; `len` when none is.
    pub i0: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThurstonReport {
    pub passed: bool,
    pub samples: usize,
    /// Largest `i0` at each `eps` of the schedule.
    pub i0_by_eps: Vec<(f64, usize)>,
    pub worst: Option<ThurstonWitness>,
    pub window: usize,
}

/// For every sampled point `x` of the candidate and every `eps`, finds the
/// first index after which all items have a point within `eps` of `x` whose
/// tangent line is within `2 eps` of the candidate's. Passes when that
/// index leaves at least the tail window.
pub fn thurston_converges(
    seq: &LaminationSequence,
    candidate: &[Leaf],
    eps_schedule: &[f64],
    dom: &MetricDomain,
    window: Option<usize>,
) -> ThurstonReport {
    let n = seq.len();
    let w = window.unwrap_or_else(|| tail_window(n)).clamp(1, n.max(1));
    let h = dom.h;
    let mut samples = directed_points(candidate, 2.0 * h);
    if samples.len() > 512 {
        let stride = samples.len().div_ceil(512);
        samples = samples.into_iter().step_by(stride).collect();
    }
    let clouds: Vec<Vec<(Point, f64)>> = seq.items.iter().map(|it| directed_points(&it.leaves, h / 2.0)).collect();
    let mut i0_by_eps = Vec::new();
    let mut worst: Option<ThurstonWitness> = None;
    let mut passed = n > 0;
    for &eps in eps_schedule {
        let mut worst_i0 = 0;
        for &(x, ang) in &samples {
            let ok = |cloud: &Vec<(Point, f64)>| {
                cloud
                    .iter()
                    .any(|&(y, b)| dist(x, y) < eps && line_angle_distance(ang, b) < 2.0 * eps)
            };
            let mut i0 = n;
            for i in (0..n).rev() {
                if ok(&clouds[i]) {
                    i0 = i;
                } else {
                    break;
                }
            }
            if i0 > worst_i0 || worst.is_none() {
                worst_i0 = worst_i0.max(i0);
                if worst.as_ref().is_none_or(|wt| i0 > wt.i0) {
                    worst = Some(ThurstonWitness { point: x, eps, i0 });
                }
            }
            if i0 + w > n {
                passed = false;
            }
        }
        i0_by_eps.push((eps, worst_i0));
    }
    ThurstonReport {
        passed: passed && !samples.is_empty(),
        samples: samples.len(),
        i0_by_eps,
        worst,
        window: w,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalityReport {
    pub limsup_cells: usize,
    /// Upper-limit cells farther than `2h` from every candidate leaf.
    pub violations: Vec<(usize, usize)>,
    pub max_distance: f64,
    pub maximal: bool,
}

/// Checks that every cell met by at least `window` items lies within `2h`
/// of the candidate; otherwise a larger limit exists.
pub fn maximality_check(
    seq: &LaminationSequence,
    candidate: &[Leaf],
    dom: &MetricDomain,
    window: Option<usize>,
) -> MaximalityReport {
    let n = seq.len();
    let w = window.unwrap_or_else(|| tail_window(n)).clamp(1, n.max(1));
    let mut count = vec![0usize; dom.n_cells()];
    for item in &seq.items {
        for (c, hit) in support_raster(&item.leaves, dom).into_iter().enumerate() {
            if hit {
                count[c] += 1;
            }
        }
    }
    let paths: Vec<Vec<Point>> = candidate.iter().map(|l| l.path()).collect();
    let mut violations = Vec::new();
    let mut max_distance: f64 = 0.0;
    let mut limsup_cells = 0;
    for (i, j) in dom.active_cells() {
        if count[j * dom.nx + i] < w {
            continue;
        }
        limsup_cells += 1;
        let c = dom.cell_center(i, j);
        let d = paths
            .iter()
            .filter_map(|p| closest_on_polyline(c, p).map(|q| q.distance))
            .fold(f64::INFINITY, f64::min);
        max_distance = max_distance.max(d);
        if d > 2.0 * dom.h {
            violations.push((i, j));
        }
    }
    MaximalityReport {
        limsup_cells,
        maximal: violations.is_empty(),
        violations,
        max_distance,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowboxTrace {
    pub base: Point,
    /// `||F_n - F||_C0` per item.
    pub c0: Vec<f64>,
    /// Largest Holder quotient of `F_n - F` divided by `||F_n - F||_C0^(1 - theta)`, per theta and item.
    pub holder_constant: Vec<Vec<f64>>,
    /// Sup differences of tangential derivatives of order 1 to 3, per item.
    pub tangential: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowboxReport {
    pub thetas: Vec<f64>,
    /// `(2 L)^theta` per theta.
    pub bounds: Vec<f64>,
    pub traces: Vec<FlowboxTrace>,
    pub c0_decays: bool,
    pub tangential_decays: bool,
    pub holder_bounded: bool,
    pub passed: bool,
}

/// Chart points of a box on a regular grid, restricted to common extents.
fn chart_grid(bx: &FlowBox, a: f64, b: f64, m: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let xi = -a + 2.0 * a * i as f64 / (m - 1) as f64;
            let eta = -b + 2.0 * b * j as f64 / (m - 1) as f64;
            out.push(bx.chart(xi, eta));
        }
    }
    out
}

/// Compares the flow boxes of every item with those of the candidate at
/// the same base points: the `C^0` distance, Holder quotients of the
/// difference and tangential derivatives along the plaques.
pub fn flowbox_converges(
    seq: &LaminationSequence,
    candidate: &[Leaf],
    bases: &[Point],
    thetas: &[f64],
    dom: &MetricDomain,
    opts: &FlowBoxOptions,
) -> Result<FlowboxReport> {
    let n = seq.len();
    let m = 17;
    let bounds: Vec<f64> = thetas.iter().map(|&t| (2.0 * opts.lip_bound).powf(t)).collect();
    let mut traces = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for &p in bases {
        let reference = build_flow_box(candidate, p, dom, opts).map_err(|e| LaminaError::BoxConstructionFailed {
            index: n,
            source: Box::new(e),
        })?;
        let mut trace = FlowboxTrace {
            base: p,
            c0: Vec::with_capacity(n),
            holder_constant: vec![Vec::with_capacity(n); thetas.len()],
            tangential: Vec::with_capacity(n),
        };
        for (idx, item) in seq.items.iter().enumerate() {
            let bx = build_flow_box(&item.leaves, p, dom, opts).map_err(|e| LaminaError::BoxConstructionFailed {
                index: idx,
                source: Box::new(e),
            })?;
            let a = bx.half_width.min(reference.half_width);
            let b = bx.half_height.min(reference.half_height);
            let gn = chart_grid(&bx, a, b, m);
            let g0 = chart_grid(&reference, a, b, m);
            let z: Vec<Point> = (0..m * m)
                .map(|k| {
                    let (i, j) = (k % m, k / m);
                    [
                        -a + 2.0 * a * i as f64 / (m - 1) as f64,
                        -b + 2.0 * b * j as f64 / (m - 1) as f64,
                    ]
                })
                .collect();
            let diff: Vec<Point> = gn.iter().zip(&g0).map(|(x, y)| sub(*x, *y)).collect();
            let c0 = diff.iter().map(|d| norm(*d)).fold(0.0, f64::max);
            trace.c0.push(c0);
            for (ti, &theta) in thetas.iter().enumerate() {
                let mut best: f64 = 0.0;
                for _ in 0..2000 {
                    let (k1, k2) = (rng.gen_range(0..m * m), rng.gen_range(0..m * m));
                    if k1 == k2 {
                        continue;
                    }
                    let q = norm(sub(diff[k1], diff[k2])) / dist(z[k1], z[k2]).powf(theta);
                    best = best.max(q);
                }
                let c = if c0 > 0.0 { best / c0.powf(1.0 - theta) } else { 0.0 };
                trace.holder_constant[ti].push(c);
            }
            let dxi = 2.0 * a / (m - 1) as f64;
            let mut tang = [0.0f64; 3];
            for j in 0..m {
                let row: Vec<Point> = (0..m).map(|i| diff[j * m + i]).collect();
                let mut d: Vec<Point> = row;
                for t in tang.iter_mut() {
                    d = d.windows(2).map(|w| [(w[1][0] - w[0][0]) / dxi, (w[1][1] - w[0][1]) / dxi]).collect();
                    *t = d.iter().map(|v| norm(*v)).fold(*t, f64::max);
                }
            }
            trace.tangential.push(tang);
        }
        traces.push(trace);
    }
    let tol = 1e-9 * dom.h;
    let c0_decays = traces.iter().all(|t| tail_converges(&t.c0, tol, 0.5));
    let tangential_decays = traces.iter().all(|t| {
        let d1: Vec<f64> = t.tangential.iter().map(|v| v[0]).collect();
        tail_converges(&d1, 1e-9, 0.5)
    });
    let holder_bounded = traces
        .iter()
        .all(|t| t.holder_constant.iter().zip(&bounds).all(|(c, &b)| c.iter().all(|&v| v <= b)));
    Ok(FlowboxReport {
        thetas: thetas.to_vec(),
        bounds,
        traces,
        c0_decays,
        tangential_decays,
        holder_bounded,
        passed: c0_decays && tangential_decays && holder_bounded,
    })
}

/// Open axis-aligned window `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn contains(&self, p: Point) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }
}

/// Mass of a current on the cells whose centres lie in `w`.
pub fn mass_in_window(t: &EdgeField, w: &Window, dom: &MetricDomain) -> f64 {
    let m = cell_mass(t, dom);
    dom.active_cells()
        .filter(|&(i, j)| w.contains(dom.cell_center(i, j)))
        .map(|(i, j)| m[j * dom.nx + i])
        .sum()
}

/// Five windows: the whole box and its four quadrants, shrunk by `2h`.
pub fn sample_windows(dom: &MetricDomain) -> Vec<Window> {
    let (o, h) = (dom.origin, dom.h);
    let (x1, y1) = (o[0] + dom.nx as f64 * h, o[1] + dom.ny as f64 * h);
    let (xm, ym) = ((o[0] + x1) / 2.0, (o[1] + y1) / 2.0);
    let s = 2.0 * h;
    vec![
        Window { x0: o[0] + s, x1: x1 - s, y0: o[1] + s, y1: y1 - s },
        Window { x0: o[0] + s, x1: xm, y0: o[1] + s, y1: ym },
        Window { x0: xm, x1: x1 - s, y0: o[1] + s, y1: ym },
        Window { x0: o[0] + s, x1: xm, y0: ym, y1: y1 - s },
        Window { x0: xm, x1: x1 - s, y0: ym, y1: y1 - s },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VagueOptions {
    /// Tolerance relative to the largest pairing of each form.
    pub tol_rel: f64,
    /// Required contraction of the tail against the head.
    pub ratio: f64,
    pub min_forms: usize,
}

impl Default for VagueOptions {
    fn default() -> Self {
        VagueOptions {
            tol_rel: 0.02,
            ratio: 0.5,
            min_forms: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormTrace {
    pub pairings: Vec<f64>,
    pub limit: f64,
    pub cauchy: bool,
    pub converges: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowMass {
    pub window: Window,
    pub limit: f64,
    /// Smallest mass over the second half of the sequence.
    pub tail_min: f64,
    pub lsc: bool,
    pub strict: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VagueReport {
    pub forms: Vec<FormTrace>,
    pub windows: Vec<WindowMass>,
    pub cauchy: bool,
    pub converges: bool,
    pub mass_lsc: bool,
    pub strict_lsc: bool,
    pub passed: bool,
}

/// Pairs every current with every test form and checks the Cauchy tail
/// criterion and convergence to `candidate`, plus lower semicontinuity of
/// mass on `windows`.
pub fn vague_converges(
    currents: &[EdgeField],
    candidate: &EdgeField,
    forms: &[TestForm],
    windows: &[Window],
    dom: &MetricDomain,
    opts: &VagueOptions,
) -> VagueReport {
    let pairings = forms
        .iter()
        .map(|f| (currents.iter().map(|t| pair(t, f, dom)).collect(), pair(candidate, f, dom)))
        .collect();
    vague_report(pairings, window_masses(currents, candidate, windows, dom), forms, opts)
}

/// As [`vague_converges`] for atomic measured laminations, pairing and
/// measuring mass exactly along the leaves.
pub fn vague_converges_measured(
    seq: &LaminationSequence,
    candidate: &MeasuredLamination,
    forms: &[TestForm],
    windows: &[Window],
    dom: &MetricDomain,
    opts: &VagueOptions,
) -> Result<VagueReport> {
    let pairings = forms
        .iter()
        .map(|f| (seq.items.iter().map(|it| leaf_pairing(it, f)).collect(), leaf_pairing(candidate, f)))
        .collect();
    let masses = windows
        .iter()
        .map(|w| {
            (
                *w,
                seq.items.iter().map(|it| leaf_mass_in_window(it, w, dom)).collect(),
                leaf_mass_in_window(candidate, w, dom),
            )
        })
        .collect();
    Ok(vague_report(pairings, masses, forms, opts))
}

/// Mass of an atomic current in the open window `w`: the weighted length of
/// the leaves inside it.
pub fn leaf_mass_in_window(lam: &MeasuredLamination, w: &Window, dom: &MetricDomain) -> f64 {
    lam.leaves
        .iter()
        .zip(&lam.masses)
        .map(|(l, &m)| {
            let p = resample(&l.path(), dom.h / 4.0);
            m * p
                .windows(2)
                .filter(|s| w.contains([(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0]))
                .map(|s| dom.polyline_length(s))
                .sum::<f64>()
        })
        .sum()
}

fn window_masses(currents: &[EdgeField], candidate: &EdgeField, windows: &[Window], dom: &MetricDomain) -> Vec<(Window, Vec<f64>, f64)> {
    windows
        .iter()
        .map(|w| {
            (
                *w,
                currents.iter().map(|t| mass_in_window(t, w, dom)).collect(),
                mass_in_window(candidate, w, dom),
            )
        })
        .collect()
}

fn vague_report(
    pairings: Vec<(Vec<f64>, f64)>,
    masses: Vec<(Window, Vec<f64>, f64)>,
    forms: &[TestForm],
    opts: &VagueOptions,
) -> VagueReport {
    let osc = |s: &[f64]| {
        let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if s.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    let mut traces = Vec::with_capacity(pairings.len());
    for ((pairings, limit), form) in pairings.into_iter().zip(forms) {
        let n = pairings.len();
        let mid = n / 2;
        let scale = pairings.iter().fold(limit.abs().max(form.norm()), |a, b| a.max(b.abs()));
        let tol = opts.tol_rel * scale + 1e-12;
        let cauchy = n < 2 || osc(&pairings[mid..]) <= tol.max(opts.ratio * osc(&pairings[..mid]));
        let errors: Vec<f64> = pairings.iter().map(|p| p - limit).collect();
        let converges = tail_converges(&errors, tol, opts.ratio);
        traces.push(FormTrace {
            pairings,
            limit,
            cauchy,
            converges,
        });
    }
    let windows: Vec<WindowMass> = masses
        .into_iter()
        .map(|(window, seq, limit)| {
            let tail_min = seq[seq.len() - tail_window(seq.len())..].iter().copied().fold(f64::INFINITY, f64::min);
            let tol = opts.tol_rel * limit.max(tail_min.min(1e300)) + 1e-12;
            WindowMass {
                window,
                limit,
                tail_min,
                lsc: limit <= tail_min + tol,
                strict: limit < tail_min - tol,
            }
        })
        .collect();
    let cauchy = traces.iter().all(|t| t.cauchy);
    let converges = traces.iter().all(|t| t.converges);
    let mass_lsc = windows.iter().all(|m| m.lsc);
    let strict_lsc = windows.iter().any(|m| m.strict);
    VagueReport {
        passed: cauchy && converges && mass_lsc && forms.len() >= opts.min_forms,
        forms: traces,
        windows,
        cauchy,
        converges,
        mass_lsc,
        strict_lsc,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub eps_schedule: Vec<f64>,
    pub thetas: Vec<f64>,
    pub bases: Vec<Point>,
    pub window: Option<usize>,
    pub flowbox: FlowBoxOptions,
    pub vague: VagueOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub vague: VagueReport,
    /// False when the measures do not converge, so the implications say nothing.
    pub applicable: bool,
    pub thurston: Option<ThurstonReport>,
    pub flowbox: Option<FlowboxReport>,
    /// Candidate support inside the dilated lower limit.
    pub support_contained: Option<bool>,
    pub passed: bool,
}

/// Vague convergence of the measured sequence, then Thurston and flow-box
/// convergence and support containment on the same data.
pub fn implication_suite(
    seq: &LaminationSequence,
    candidate: &MeasuredLamination,
    forms: &[TestForm],
    dom: &MetricDomain,
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    let vague = vague_converges_measured(seq, candidate, forms, &sample_windows(dom), dom, &opts.vague)?;
    if !(vague.cauchy && vague.converges) {
        return Ok(SuiteReport {
            vague,
            applicable: false,
            thurston: None,
            flowbox: None,
            support_contained: None,
            passed: false,
        });
    }
    let thurston = thurston_converges(seq, &candidate.leaves, &opts.eps_schedule, dom, opts.window);
    let flowbox = flowbox_converges(seq, &candidate.leaves, &opts.bases, &opts.thetas, dom, &opts.flowbox)?;
    let limits = hausdorff_liminf_limsup(seq, dom, opts.window);
    let grown = dilate(&limits.liminf, dom);
    let contained = support_raster(&candidate.leaves, dom)
        .iter()
        .zip(&grown)
        .all(|(&s, &g)| !s || g);
    let passed = thurston.passed && flowbox.passed && contained;
    Ok(SuiteReport {
        vague,
        applicable: true,
        thurston: Some(thurston),
        flowbox: Some(flowbox),
        support_contained: Some(contained),
        passed,
    })
}

/// Unordered endpoint pair with `theta1 < theta2` in `[0, 2 pi)`.
pub fn canonical_pair(a: f64, b: f64) -> (f64, f64) {
    let (a, b) = (normalize_angle(a), normalize_angle(b));
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// An atomic measure on the space of geodesics of the Poincare disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSpaceMeasure {
    /// Canonical endpoint pairs.
    pub support: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
    /// Endpoints in the direction of travel with `{u > label}` on the left.
    pub oriented: Vec<(f64, f64)>,
}

impl GeodesicSpaceMeasure {
    /// Builds a measure from oriented endpoint pairs.
    pub fn atomic(oriented: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if oriented.len() != weights.len() {
            return Err(LaminaError::ShapeMismatch {
                expected: oriented.len(),
                got: weights.len(),
            });
        }
        for (&(a, b), &w) in oriented.iter().zip(&weights) {
            if endpoint_pair_distance((a, a), (b, b)) < 1e-12 {
                return Err(LaminaError::IdenticalEndpoints);
            }
            if w.is_nan() || w <= 0.0 {
                return Err(LaminaError::NonAtomicMeasure(format!("weight {w} is not positive")));
            }
        }
        Ok(GeodesicSpaceMeasure {
            support: oriented.iter().map(|&(a, b)| canonical_pair(a, b)).collect(),
            weights,
            oriented,
        })
    }

    /// `int f d mu_hat`.
    pub fn integrate(&self, f: impl Fn((f64, f64)) -> f64) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    /// Leaves sampled inside `|p| <= r_max`, oriented as stored.
    pub fn leaves(&self, r_max: f64, spacing: f64) -> Vec<Leaf> {
        self.oriented
            .iter()
            .map(|&(a, b)| {
                let g = PoincareGeodesic::from_endpoints(a, b);
                let mut pts = g.sample(r_max, spacing);
                orient_towards(&mut pts, a, b);
                Leaf::synthetic(pts, 0.0)
            })
            .collect()
    }

    pub fn lamination(&self, r_max: f64, spacing: f64) -> MeasuredLamination {
        MeasuredLamination::new(self.leaves(r_max, spacing), self.weights.clone())
    }
}

/// Reverses `pts` unless it runs from endpoint `a` towards endpoint `b`.
fn orient_towards(pts: &mut [Point], a: f64, b: f64) {
    if pts.len() < 2 {
        return;
    }
    let (pa, pb) = ([a.cos(), a.sin()], [b.cos(), b.sin()]);
    let first = pts[0];
    if dist(first, pb) < dist(first, pa) {
        pts.reverse();
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `(int T ^ phi, int_G int_gamma phi dmu_hat)` per form, the left side
    /// integrated along the leaves.
    pub pairs: Vec<(f64, f64)>,
    pub max_error: f64,
    /// Largest difference between the edge raster of `T` and the leaf integral.
    pub raster_error: f64,
}

/// `int T ^ phi` of an atomic current, integrated along its leaves.
pub fn leaf_pairing(lam: &MeasuredLamination, form: &TestForm) -> f64 {
    // With {u > label} on the left, int T ^ phi runs along the reversed leaf.
    lam.leaves
        .iter()
        .zip(&lam.masses)
        .map(|(l, &m)| -m * line_integral(&l.path(), form))
        .sum()
}

/// Maps each geodesic leaf to its endpoint pair, weighted by its mass, and
/// compares `int T ^ phi` with `int_G int_gamma phi dmu_hat` on `forms`.
pub fn geodesic_space_measure(
    lam: &MeasuredLamination,
    dom: &MetricDomain,
    forms: &[TestForm],
) -> Result<(GeodesicSpaceMeasure, IdentityReport)> {
    if lam.masses.len() != lam.leaves.len() {
        return Err(LaminaError::NonAtomicMeasure(format!(
            "{} masses for {} leaves",
            lam.masses.len(),
            lam.leaves.len()
        )));
    }
    let window = default_window_len(dom);
    let tol = curvature_tolerance(dom.h, window);
    let mut oriented = Vec::with_capacity(lam.leaves.len());
    for (index, leaf) in lam.leaves.iter().enumerate() {
        let kappa = if leaf.curvature.is_empty() {
            leaf_curvature(leaf, dom, window)?
                .iter()
                .flatten()
                .fold(0.0f64, |a, b| a.max(b.abs()))
        } else {
            leaf.sup_curvature
        };
        if kappa > tol || leaf.closed {
            return Err(LaminaError::LeafNotGeodesic { index, kappa });
        }
        let p = leaf.path();
        let (first, last) = (p[0], p[p.len() - 1]);
        let (a, b) = PoincareGeodesic::through(first, last).endpoints();
        let (pa, pb) = ([a.cos(), a.sin()], [b.cos(), b.sin()]);
        oriented.push(if dist(first, pa) <= dist(first, pb) { (a, b) } else { (b, a) });
    }
    let mu = GeodesicSpaceMeasure::atomic(oriented, lam.masses.clone())?;
    let t = lam.current(dom)?;
    let fine = MeasuredLamination::new(mu.leaves(1.0 - 1e-9, dom.h / 8.0), mu.weights.clone());
    let mut pairs = Vec::with_capacity(forms.len());
    let mut max_error: f64 = 0.0;
    let mut raster_error: f64 = 0.0;
    for f in forms {
        let lhs = leaf_pairing(lam, f);
        let rhs = leaf_pairing(&fine, f);
        max_error = max_error.max((lhs - rhs).abs());
        raster_error = raster_error.max((pair(&t, f, dom) - lhs).abs());
        pairs.push((lhs, rhs));
    }
    Ok((
        mu,
        IdentityReport {
            pairs,
            max_error,
            raster_error,
        },
    ))
}

fn default_window_len(dom: &MetricDomain) -> f64 {
    default_window(dom)
}

/// Continuous function `(1 - d / r)^2_+` of the distance to a centre pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartFunction {
    pub center: (f64, f64),
    pub radius: f64,
}

impl ChartFunction {
    pub fn eval(&self, p: (f64, f64)) -> f64 {
        let t = (1.0 - endpoint_pair_distance(p, self.center) / self.radius).max(0.0);
        t * t
    }
}

/// Seeded bank of chart functions at three radii.
pub fn chart_bank(count: usize, seed: u64) -> Vec<ChartFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii = [1.2, 0.6, 0.3];
    (0..count)
        .map(|k| ChartFunction {
            center: canonical_pair(rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU),
            radius: radii[k % radii.len()],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub currents_converge: bool,
    pub chart_converges: bool,
    pub agree: bool,
    pub current_errors: Vec<f64>,
    pub chart_errors: Vec<f64>,
}

/// Tests vague convergence of the currents on the disk and of the
/// geodesic-space measures on the endpoint chart, which must agree.
pub fn geodesic_equivalence_test(
    seq: &[GeodesicSpaceMeasure],
    limit: &GeodesicSpaceMeasure,
    dom: &MetricDomain,
    forms: &[TestForm],
    functions: &[ChartFunction],
    opts: &VagueOptions,
) -> Result<EquivalenceReport> {
    let r_max = 1.0 - 3.0 * dom.h;
    let laminations = LaminationSequence::new(seq.iter().map(|m| m.lamination(r_max, dom.h)).collect());
    let candidate = limit.lamination(r_max, dom.h);
    let vague = vague_converges_measured(&laminations, &candidate, forms, &[], dom, opts)?;
    let current_errors = vague
        .forms
        .iter()
        .map(|t| t.pairings.iter().map(|p| (p - t.limit).abs()).fold(0.0, f64::max))
        .collect();
    let mut chart_ok = true;
    let mut chart_errors = Vec::with_capacity(functions.len());
    for f in functions {
        let values: Vec<f64> = seq.iter().map(|m| m.integrate(|p| f.eval(p))).collect();
        let target = limit.integrate(|p| f.eval(p));
        let errors: Vec<f64> = values.iter().map(|v| v - target).collect();
        let scale = values.iter().fold(target.abs(), |a, b| a.max(b.abs()));
        chart_ok &= tail_converges(&errors, opts.tol_rel * scale + 1e-12, opts.ratio);
        chart_errors.push(errors.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }
    let currents_converge = vague.cauchy && vague.converges;
    Ok(EquivalenceReport {
        currents_converge,
        chart_converges: chart_ok,
        agree: currents_converge == chart_ok,
        current_errors,
        chart_errors,
    })
}
