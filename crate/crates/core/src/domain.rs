//! Discrete 2D Riemannian domains on a regular staggered grid.
//!
//! Scalars live on nodes, 1-forms on edges and areas on cells. The metric is
//! conformal, `g = rho^2 (dx^2 + dy^2)`, with `rho` stored per node. In two
//! dimensions the L2 inner product of 1-forms is conformally invariant, so the
//! edge weights are `h^2` while node weights carry `rho^2 h^2`; with these
//! weights `div` is the exact negative adjoint of `grad`.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LaminaError, Result};
use crate::geometry::{dist, Point};
use crate::hyperbolic::{poincare_rho, PoincareGeodesic};

/// Volume of the unit ball in dimension 1 (the length of [-1, 1]).
pub const OMEGA_1: f64 = 2.0;
/// Volume of the unit ball in dimension 2.
pub const OMEGA_2: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    PoincareDisk,
    Custom,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Lower-left node position. Defaults to the origin for rectangles and to
    /// a grid centred on the origin for disks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Point>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    RhoCsv { rho_csv: PathBuf },
}

/// JSON description of a domain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainConfig {
    pub grid: GridSpec,
    /// `"rect"`, `"disk:<r>"` or a path to a CSV of 0/1 cell flags (one row per
    /// grid row, bottom row first).
    pub mask: String,
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub riem_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injectivity_radius: Option<f64>,
}

impl DomainConfig {
    pub fn rect(nx: usize, ny: usize, h: f64) -> Self {
        DomainConfig {
            grid: GridSpec {
                nx,
                ny,
                h,
                origin: None,
            },
            mask: "rect".into(),
            metric: MetricSpec::Named("euclidean".into()),
            riem_bound: None,
            injectivity_radius: None,
        }
    }

    /// Square grid of `n` cells per side covering `[-extent, extent]^2`, masked to a disk.
    pub fn disk(n: usize, extent: f64, radius: f64, metric: &str) -> Self {
        DomainConfig {
            grid: GridSpec {
                nx: n,
                ny: n,
                h: 2.0 * extent / n as f64,
                origin: Some([-extent, -extent]),
            },
            mask: format!("disk:{radius}"),
            metric: MetricSpec::Named(metric.into()),
            riem_bound: None,
            injectivity_radius: None,
        }
    }

    pub fn with_origin(mut self, origin: Point) -> Self {
        self.grid.origin = Some(origin);
        self
    }
}

/// Scalar values on grid nodes (a discrete 0-form).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    pub values: Vec<f64>,
}

/// Values on grid edges (a discrete 1-form). `ex[n]` is the horizontal edge
/// leaving node `n` eastwards, `ey[n]` the vertical edge leaving it northwards.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,
}

impl NodeField {
    pub fn zeros(n: usize) -> Self {
        NodeField {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl EdgeField {
    pub fn zeros(n: usize) -> Self {
        EdgeField {
            ex: vec![0.0; n],
            ey: vec![0.0; n],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        EdgeField {
            ex: self.ex.iter().map(|v| v * s).collect(),
            ey: self.ey.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &EdgeField) {
        for (a, b) in self.ex.iter_mut().zip(&other.ex) {
            *a += b;
        }
        for (a, b) in self.ey.iter_mut().zip(&other.ey) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &EdgeField) -> EdgeField {
        EdgeField {
            ex: self.ex.iter().zip(&other.ex).map(|(a, b)| a - b).collect(),
            ey: self.ey.iter().zip(&other.ey).map(|(a, b)| a - b).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricDomain {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
    pub kind: MetricKind,
    pub riem_bound: f64,
    pub injectivity_radius: f64,
    cell_mask: Vec<bool>,
    node_active: Vec<bool>,
    boundary: Vec<bool>,
    rho: Vec<f64>,
}

impl MetricDomain {
    /// Builds and validates a domain from a configuration. Relative CSV paths
    /// are resolved against `base_dir`.
    pub fn build(config: &DomainConfig, base_dir: Option<&Path>) -> Result<Self> {
        let GridSpec { nx, ny, h, origin } = config.grid.clone();
        if !h.is_finite() || h <= 0.0 {
            return Err(LaminaError::NonpositiveSpacing(h));
        }
        if nx == 0 || ny == 0 {
            return Err(LaminaError::EmptyMask);
        }
        let resolve = |p: &Path| match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        let kind = match &config.metric {
            MetricSpec::Named(s) if s == "euclidean" => MetricKind::Euclidean,
            MetricSpec::Named(s) if s == "poincare" || s == "poincare_disk" => {
                MetricKind::PoincareDisk
            }
            MetricSpec::Named(s) => {
                return Err(LaminaError::config(
                    "/metric",
                    format!("unknown metric {s:?}"),
                ))
            }
            MetricSpec::RhoCsv { .. } => MetricKind::Custom,
        };

        let mask_spec = config.mask.trim();
        let is_disk = mask_spec.starts_with("disk:");
        let origin = origin.unwrap_or(if is_disk {
            [-(nx as f64) * h / 2.0, -(ny as f64) * h / 2.0]
        } else {
            [0.0, 0.0]
        });
        let center = |i: usize, j: usize| {
            [
                origin[0] + (i as f64 + 0.5) * h,
                origin[1] + (j as f64 + 0.5) * h,
            ]
        };

        let mut cell_mask = if mask_spec == "rect" {
            vec![true; nx * ny]
        } else if let Some(r) = mask_spec.strip_prefix("disk:") {
            let r: f64 = r
                .trim()
                .parse()
                .map_err(|_| LaminaError::config("/mask", format!("bad disk radius {r:?}")))?;
            let mut m = vec![false; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let c = center(i, j);
                    m[j * nx + i] = c[0].hypot(c[1]) < r;
                }
            }
            m
        } else {
            read_mask_csv(&resolve(Path::new(mask_spec)), nx, ny)?
        };
        if kind == MetricKind::PoincareDisk {
            let rmax = 1.0 - 2.0 * h;
            for j in 0..ny {
                for i in 0..nx {
                    let c = center(i, j);
                    if c[0].hypot(c[1]) > rmax {
                        cell_mask[j * nx + i] = false;
                    }
                }
            }
        }

        let n_nodes = (nx + 1) * (ny + 1);
        let mut rho = vec![1.0; n_nodes];
        match (&config.metric, kind) {
            (_, MetricKind::PoincareDisk) => {
                for j in 0..=ny {
                    for i in 0..=nx {
                        let p = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
                        let r2 = p[0] * p[0] + p[1] * p[1];
                        rho[j * (nx + 1) + i] = if r2 < 1.0 { poincare_rho(p) } else { f64::NAN };
                    }
                }
            }
            (MetricSpec::RhoCsv { rho_csv }, _) => {
                rho = vec![f64::NAN; n_nodes];
                for (i, j, v) in crate::io::csv::read_node_triples(&resolve(rho_csv))? {
                    if i <= nx && j <= ny {
                        rho[j * (nx + 1) + i] = v;
                    }
                }
            }
            _ => {}
        }

        let (riem_bound, injectivity_radius) = default_curvature(config, kind, nx, ny, h)?;
        let mut dom = MetricDomain {
            nx,
            ny,
            h,
            origin,
            kind,
            riem_bound,
            injectivity_radius,
            cell_mask,
            node_active: vec![false; n_nodes],
            boundary: vec![false; n_nodes],
            rho,
        };
        dom.finish()?;
        Ok(dom)
    }

    /// Builds a domain directly from a cell mask and per-node conformal factor.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        nx: usize,
        ny: usize,
        h: f64,
        origin: Point,
        cell_mask: Vec<bool>,
        rho: Vec<f64>,
        kind: MetricKind,
        riem_bound: f64,
        injectivity_radius: f64,
    ) -> Result<Self> {
        if h.is_nan() || h <= 0.0 {
            return Err(LaminaError::NonpositiveSpacing(h));
        }
        if cell_mask.len() != nx * ny {
            return Err(LaminaError::ShapeMismatch {
                expected: nx * ny,
                got: cell_mask.len(),
            });
        }
        if rho.len() != (nx + 1) * (ny + 1) {
            return Err(LaminaError::ShapeMismatch {
                expected: (nx + 1) * (ny + 1),
                got: rho.len(),
            });
        }
        let n_nodes = rho.len();
        let mut dom = MetricDomain {
            nx,
            ny,
            h,
            origin,
            kind,
            riem_bound,
            injectivity_radius,
            cell_mask,
            node_active: vec![false; n_nodes],
            boundary: vec![false; n_nodes],
            rho,
        };
        dom.finish()?;
        Ok(dom)
    }

    fn finish(&mut self) -> Result<()> {
        let (nx, ny) = (self.nx, self.ny);
        if !self.cell_mask.iter().any(|&b| b) {
            return Err(LaminaError::EmptyMask);
        }
        let components = count_components(&self.cell_mask, nx, ny);
        if components > 1 {
            return Err(LaminaError::DisconnectedMask { components });
        }
        for j in 0..=ny {
            for i in 0..=nx {
                let n = self.node(i, j);
                let mut any = false;
                let mut all = true;
                for (ci, cj) in self.node_cells(i, j) {
                    let active = ci.zip(cj).is_some_and(|(a, b)| self.cell_active(a, b));
                    any |= active;
                    all &= active;
                }
                self.node_active[n] = any;
                self.boundary[n] = any && !all;
                if any {
                    let r = self.rho[n];
                    if !r.is_finite() || r <= 0.0 {
                        return Err(LaminaError::NonpositiveConformalFactor { i, j, value: r });
                    }
                }
            }
        }
        Ok(())
    }

    fn node_cells(&self, i: usize, j: usize) -> [(Option<usize>, Option<usize>); 4] {
        let ci = |d: isize| {
            let v = i as isize + d;
            (v >= 0 && (v as usize) < self.nx).then_some(v as usize)
        };
        let cj = |d: isize| {
            let v = j as isize + d;
            (v >= 0 && (v as usize) < self.ny).then_some(v as usize)
        };
        [(ci(-1), cj(-1)), (ci(0), cj(-1)), (ci(-1), cj(0)), (ci(0), cj(0))]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_active(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.ny && self.cell_mask[j * self.nx + i]
    }

    pub fn cell_mask(&self) -> &[bool] {
        &self.cell_mask
    }

    #[inline]
    pub fn node_active(&self, n: usize) -> bool {
        self.node_active[n]
    }

    #[inline]
    pub fn is_boundary(&self, n: usize) -> bool {
        self.boundary[n]
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&n| self.node_active[n])
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&n| self.boundary[n])
    }

    pub fn active_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| self.cell_active(i, j))
    }

    pub fn n_active_cells(&self) -> usize {
        self.cell_mask.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn rho(&self, n: usize) -> f64 {
        self.rho[n]
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    /// Conformal factor at a cell centre (mean of its corners).
    #[inline]
    pub fn cell_rho(&self, i: usize, j: usize) -> f64 {
        let n = self.node(i, j);
        let s = self.nx + 1;
        0.25 * (self.rho[n] + self.rho[n + 1] + self.rho[n + s] + self.rho[n + s + 1])
    }

    #[inline]
    pub fn node_pos(&self, n: usize) -> Point {
        let (i, j) = self.node_ij(n);
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Active cell containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p[0] - self.origin[0]) / self.h;
        let fy = (p[1] - self.origin[1]) / self.h;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let i = if i == self.nx && fx <= self.nx as f64 { i - 1 } else { i };
        let j = if j == self.ny && fy <= self.ny as f64 { j - 1 } else { j };
        self.cell_active(i, j).then_some((i, j))
    }

    pub fn contains(&self, p: Point) -> bool {
        self.locate(p).is_some()
    }

    /// Nearest active node to `p`.
    pub fn nearest_node(&self, p: Point) -> usize {
        let i = ((p[0] - self.origin[0]) / self.h).round().clamp(0.0, self.nx as f64) as usize;
        let j = ((p[1] - self.origin[1]) / self.h).round().clamp(0.0, self.ny as f64) as usize;
        let n = self.node(i, j);
        if self.node_active[n] {
            return n;
        }
        self.active_nodes()
            .min_by(|&a, &b| {
                dist(self.node_pos(a), p)
                    .partial_cmp(&dist(self.node_pos(b), p))
                    .unwrap()
            })
            .unwrap_or(n)
    }

    /// Conformal factor at an arbitrary point: analytic for the named metrics,
    /// bilinear interpolation of the node values otherwise.
    pub fn rho_at(&self, p: Point) -> f64 {
        match self.kind {
            MetricKind::Euclidean => 1.0,
            MetricKind::PoincareDisk => poincare_rho(p),
            MetricKind::Custom => {
                let fx = ((p[0] - self.origin[0]) / self.h).clamp(0.0, self.nx as f64);
                let fy = ((p[1] - self.origin[1]) / self.h).clamp(0.0, self.ny as f64);
                let i = (fx.floor() as usize).min(self.nx - 1);
                let j = (fy.floor() as usize).min(self.ny - 1);
                let (tx, ty) = (fx - i as f64, fy - j as f64);
                let n = self.node(i, j);
                let s = self.nx + 1;
                let v = [self.rho[n], self.rho[n + 1], self.rho[n + s], self.rho[n + s + 1]];
                (1.0 - tx) * (1.0 - ty) * v[0]
                    + tx * (1.0 - ty) * v[1]
                    + (1.0 - tx) * ty * v[2]
                    + tx * ty * v[3]
            }
        }
    }

    /// Gradient of `log rho` at `p` (central differences for custom metrics).
    pub fn grad_log_rho(&self, p: Point) -> Point {
        match self.kind {
            MetricKind::Euclidean => [0.0, 0.0],
            MetricKind::PoincareDisk => {
                let d = 1.0 - (p[0] * p[0] + p[1] * p[1]);
                [2.0 * p[0] / d, 2.0 * p[1] / d]
            }
            MetricKind::Custom => {
                let e = self.h;
                let f = |q: Point| self.rho_at(q).ln();
                [
                    (f([p[0] + e, p[1]]) - f([p[0] - e, p[1]])) / (2.0 * e),
                    (f([p[0], p[1] + e]) - f([p[0], p[1] - e])) / (2.0 * e),
                ]
            }
        }
    }

    /// Riemannian length of a polyline, by midpoint quadrature on each segment.
    pub fn polyline_length(&self, poly: &[Point]) -> f64 {
        poly.windows(2)
            .map(|w| {
                let m = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
                dist(w[0], w[1]) * self.rho_at(m)
            })
            .sum()
    }

    #[inline]
    pub fn hedge_active(&self, n: usize) -> bool {
        let (i, j) = self.node_ij(n);
        i < self.nx && (self.cell_active(i, j) || (j > 0 && self.cell_active(i, j - 1)))
    }

    #[inline]
    pub fn vedge_active(&self, n: usize) -> bool {
        let (i, j) = self.node_ij(n);
        j < self.ny && (self.cell_active(i, j) || (i > 0 && self.cell_active(i - 1, j)))
    }

    /// Metric area attached to a node (the node weight of the 0-form inner product).
    #[inline]
    pub fn node_area(&self, n: usize) -> f64 {
        self.rho[n] * self.rho[n] * self.h * self.h
    }

    pub fn check_node_field(&self, u: &NodeField) -> Result<()> {
        if u.len() != self.n_nodes() {
            return Err(LaminaError::ShapeMismatch {
                expected: self.n_nodes(),
                got: u.len(),
            });
        }
        Ok(())
    }

    pub fn check_edge_field(&self, x: &EdgeField) -> Result<()> {
        if x.ex.len() != self.n_nodes() || x.ey.len() != self.n_nodes() {
            return Err(LaminaError::ShapeMismatch {
                expected: self.n_nodes(),
                got: x.ex.len().min(x.ey.len()),
            });
        }
        Ok(())
    }

    /// Node field sampled from a function of position (zero off the mask).
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> NodeField {
        NodeField {
            values: (0..self.n_nodes())
                .map(|n| if self.node_active[n] { f(self.node_pos(n)) } else { 0.0 })
                .collect(),
        }
    }

    /// Edge field sampled from a covector field `(a, b) = a dx + b dy` at edge midpoints.
    pub fn sample_form(&self, f: impl Fn(Point) -> Point) -> EdgeField {
        let mut out = EdgeField::zeros(self.n_nodes());
        let hh = self.h / 2.0;
        for n in 0..self.n_nodes() {
            let p = self.node_pos(n);
            if self.hedge_active(n) {
                out.ex[n] = f([p[0] + hh, p[1]])[0];
            }
            if self.vedge_active(n) {
                out.ey[n] = f([p[0], p[1] + hh])[1];
            }
        }
        out
    }

    /// Whether the complement of the mask is connected to the outside of the grid.
    pub fn is_simply_connected(&self) -> bool {
        let (nx, ny) = (self.nx + 2, self.ny + 2);
        let mut outside = vec![true; nx * ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                outside[(j + 1) * nx + i + 1] = !self.cell_active(i, j);
            }
        }
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(c) = queue.pop_front() {
            let (i, j) = (c % nx, c / nx);
            let mut visit = |a: usize, b: usize| {
                let k = b * nx + a;
                if outside[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < nx {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < ny {
                visit(i, j + 1);
            }
        }
        outside.iter().zip(&seen).all(|(&o, &s)| !o || s)
    }
}

fn default_curvature(
    config: &DomainConfig,
    kind: MetricKind,
    nx: usize,
    ny: usize,
    h: f64,
) -> Result<(f64, f64)> {
    let diameter = (nx as f64).hypot(ny as f64) * h;
    let expected_k = match kind {
        MetricKind::Euclidean => Some(0.0),
        MetricKind::PoincareDisk => Some(1.0),
        MetricKind::Custom => None,
    };
    let k = match (config.riem_bound, expected_k) {
        (Some(k), Some(e)) if (k - e).abs() > 1e-12 => {
            return Err(LaminaError::InconsistentMetric(format!(
                "riem_bound {k} but {kind:?} requires {e}"
            )))
        }
        (Some(k), _) if k < 0.0 => {
            return Err(LaminaError::InconsistentMetric(format!("riem_bound {k} < 0")))
        }
        (Some(k), _) => k,
        (None, Some(e)) => e,
        (None, None) => 0.0,
    };
    let inj = config.injectivity_radius.unwrap_or(diameter);
    if inj.is_nan() || inj <= 0.0 {
        return Err(LaminaError::InconsistentMetric(format!(
            "injectivity radius {inj} must be positive"
        )));
    }
    Ok((k, inj))
}

fn count_components(mask: &[bool], nx: usize, ny: usize) -> usize {
    let mut label = vec![false; mask.len()];
    let mut components = 0;
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        components += 1;
        label[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            let (i, j) = (c % nx, c / nx);
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 {
                nbrs.push(c - 1);
            }
            if i + 1 < nx {
                nbrs.push(c + 1);
            }
            if j > 0 {
                nbrs.push(c - nx);
            }
            if j + 1 < ny {
                nbrs.push(c + nx);
            }
            for k in nbrs {
                if mask[k] && !label[k] {
                    label[k] = true;
                    queue.push_back(k);
                }
            }
        }
    }
    components
}

fn read_mask_csv(path: &Path, nx: usize, ny: usize) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| LaminaError::io(path, e))?;
    let mut mask = vec![false; nx * ny];
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != ny {
        return Err(LaminaError::Csv {
            path: path.into(),
            line: rows.len(),
            message: format!("expected {ny} rows"),
        });
    }
    for (j, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() != nx {
            return Err(LaminaError::Csv {
                path: path.into(),
                line: j + 1,
                message: format!("expected {nx} columns"),
            });
        }
        for (i, c) in cols.iter().enumerate() {
            mask[j * nx + i] = matches!(*c, "1" | "true");
        }
    }
    Ok(mask)
}

/// Forward-difference exterior derivative. Metric-free.
pub fn grad(u: &NodeField, dom: &MetricDomain) -> Result<EdgeField> {
    dom.check_node_field(u)?;
    let s = dom.nx + 1;
    let mut out = EdgeField::zeros(dom.n_nodes());
    for n in 0..dom.n_nodes() {
        if dom.hedge_active(n) {
            out.ex[n] = (u.values[n + 1] - u.values[n]) / dom.h;
        }
        if dom.vedge_active(n) {
            out.ey[n] = (u.values[n + s] - u.values[n]) / dom.h;
        }
    }
    Ok(out)
}

/// Negative adjoint of [`grad`] for the metric inner products.
pub fn div(x: &EdgeField, dom: &MetricDomain) -> Result<NodeField> {
    dom.check_edge_field(x)?;
    let s = dom.nx + 1;
    let h = dom.h;
    let mut acc = vec![0.0; dom.n_nodes()];
    for n in 0..dom.n_nodes() {
        if dom.hedge_active(n) {
            let f = h * x.ex[n];
            acc[n] += f;
            acc[n + 1] -= f;
        }
        if dom.vedge_active(n) {
            let f = h * x.ey[n];
            acc[n] += f;
            acc[n + s] -= f;
        }
    }
    for (n, a) in acc.iter_mut().enumerate() {
        *a = if dom.node_active(n) { *a / dom.node_area(n) } else { 0.0 };
    }
    Ok(NodeField { values: acc })
}

/// Metric inner product of 0-forms.
pub fn node_inner(u: &NodeField, v: &NodeField, dom: &MetricDomain) -> f64 {
    dom.active_nodes()
        .map(|n| dom.node_area(n) * u.values[n] * v.values[n])
        .sum()
}

/// Metric inner product of 1-forms (conformally invariant in 2D).
pub fn edge_inner(a: &EdgeField, b: &EdgeField, dom: &MetricDomain) -> f64 {
    let w = dom.h * dom.h;
    (0..dom.n_nodes())
        .map(|n| {
            let mut s = 0.0;
            if dom.hedge_active(n) {
                s += a.ex[n] * b.ex[n];
            }
            if dom.vedge_active(n) {
                s += a.ey[n] * b.ey[n];
            }
            w * s
        })
        .sum()
}

/// Per-node metric norm of a 1-form. Each node pairs its east and north edges,
/// falling back to the west / south edge on the far side of the mask.
pub fn metric_norm_1form(x: &EdgeField, dom: &MetricDomain) -> Result<NodeField> {
    dom.check_edge_field(x)?;
    let s = dom.nx + 1;
    let values = (0..dom.n_nodes())
        .map(|n| {
            if !dom.node_active(n) {
                return 0.0;
            }
            let (i, j) = dom.node_ij(n);
            let a = if dom.hedge_active(n) {
                x.ex[n]
            } else if i > 0 && dom.hedge_active(n - 1) {
                x.ex[n - 1]
            } else {
                0.0
            };
            let b = if dom.vedge_active(n) {
                x.ey[n]
            } else if j > 0 && dom.vedge_active(n - s) {
                x.ey[n - s]
            } else {
                0.0
            };
            a.hypot(b) / dom.rho(n)
        })
        .collect();
    Ok(NodeField { values })
}

/// Per-cell covector built from the cell's own south and west edges.
#[inline]
pub fn cell_covector(x: &EdgeField, dom: &MetricDomain, i: usize, j: usize) -> Point {
    let n = dom.node(i, j);
    [x.ex[n], x.ey[n]]
}

/// Mass `*|x|` per active cell: `|x|_g` times the metric cell area.
pub fn cell_mass(x: &EdgeField, dom: &MetricDomain) -> Vec<f64> {
    let h2 = dom.h * dom.h;
    let mut out = vec![0.0; dom.n_cells()];
    for (i, j) in dom.active_cells() {
        let c = cell_covector(x, dom, i, j);
        out[j * dom.nx + i] = dom.cell_rho(i, j) * h2 * c[0].hypot(c[1]);
    }
    out
}

/// Total variation `\int *|du|` of a node field.
pub fn total_variation(u: &NodeField, dom: &MetricDomain) -> Result<f64> {
    Ok(cell_mass(&grad(u, dom)?, dom).iter().sum())
}

/// Discrete curl per cell (circulation of the 1-form around the cell).
pub fn cell_curl(x: &EdgeField, dom: &MetricDomain) -> Vec<f64> {
    let s = dom.nx + 1;
    let mut out = vec![0.0; dom.n_cells()];
    for (i, j) in dom.active_cells() {
        let n = dom.node(i, j);
        out[j * dom.nx + i] = dom.h * (x.ex[n] + x.ey[n + 1] - x.ex[n + s] - x.ey[n]);
    }
    out
}

/// Geodesic between two points of the domain as a polyline sampled at
/// spacing at most `h`.
pub fn geodesic_arc(p: Point, q: Point, dom: &MetricDomain) -> Result<Vec<Point>> {
    if dist(p, q) == 0.0 {
        return Err(LaminaError::IdenticalEndpoints);
    }
    for x in [p, q] {
        if !dom.contains(x) {
            return Err(LaminaError::OutsideDomain(x[0], x[1]));
        }
    }
    match dom.kind {
        MetricKind::Euclidean => Ok(PoincareGeodesic::Diameter { direction: [1.0, 0.0] }
            .segment(p, q, dom.h)),
        MetricKind::PoincareDisk => Ok(PoincareGeodesic::through(p, q).segment(p, q, dom.h)),
        MetricKind::Custom => {
            let path = crate::shortest::shortest_path(dom, p, q, crate::shortest::Stencil::Sixteen)
                .ok_or(LaminaError::OutsideDomain(q[0], q[1]))?;
            Ok(path.points)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> MetricDomain {
        MetricDomain::build(&DomainConfig::rect(n, n, 1.0 / n as f64), None).unwrap()
    }

    #[test]
    fn unit_square_has_identity_metric() {
        let d = unit_square(64);
        assert_eq!(d.n_active_cells(), 4096);
        assert!(d.active_nodes().all(|n| d.rho(n) == 1.0));
        assert_eq!(d.boundary_nodes().count(), 4 * 64);
    }

    #[test]
    fn poincare_conformal_factor() {
        let d = MetricDomain::build(&DomainConfig::disk(64, 1.0, 0.9, "poincare"), None).unwrap();
        assert!((d.rho_at([0.0, 0.0]) - 2.0).abs() < 1e-15);
        assert!((d.rho_at([0.9, 0.0]) - 2.0 / (1.0 - 0.81)).abs() < 1e-12);
        assert!((d.rho_at([0.9, 0.0]) - 10.526).abs() < 1e-3);
        assert_eq!(d.riem_bound, 1.0);
    }

    #[test]
    fn poincare_mask_is_clipped() {
        let d = MetricDomain::build(&DomainConfig::disk(32, 1.0, 1.0, "poincare"), None).unwrap();
        let rmax = 1.0 - 2.0 * d.h;
        for (i, j) in d.active_cells() {
            let c = d.cell_center(i, j);
            assert!(c[0].hypot(c[1]) <= rmax);
        }
    }

    #[test]
    fn zero_spacing_rejected() {
        let err = MetricDomain::build(&DomainConfig::rect(4, 4, 0.0), None).unwrap_err();
        assert!(matches!(err, LaminaError::NonpositiveSpacing(_)));
    }

    #[test]
    fn disconnected_mask_rejected() {
        let mut mask = vec![false; 16];
        mask[0] = true;
        mask[15] = true;
        let err = MetricDomain::from_parts(
            4, 4, 0.25, [0.0, 0.0], mask, vec![1.0; 25], MetricKind::Euclidean, 0.0, 1.0,
        )
        .unwrap_err();
        assert!(matches!(err, LaminaError::DisconnectedMask { components: 2 }));
    }

    #[test]
    fn nonpositive_rho_rejected() {
        let mut rho = vec![1.0; 25];
        rho[6] = -1.0;
        let err = MetricDomain::from_parts(
            4, 4, 0.25, [0.0, 0.0], vec![true; 16], rho, MetricKind::Custom, 0.0, 1.0,
        )
        .unwrap_err();
        assert!(matches!(err, LaminaError::NonpositiveConformalFactor { .. }));
    }

    #[test]
    fn inconsistent_curvature_rejected() {
        let mut cfg = DomainConfig::rect(4, 4, 0.25);
        cfg.riem_bound = Some(1.0);
        assert!(matches!(
            MetricDomain::build(&cfg, None),
            Err(LaminaError::InconsistentMetric(_))
        ));
    }

    #[test]
    fn grad_of_linear_field() {
        let d = unit_square(64);
        let u = d.sample(|p| p[0]);
        let g = grad(&u, &d).unwrap();
        for n in 0..d.n_nodes() {
            if d.hedge_active(n) {
                assert!((g.ex[n] - 1.0).abs() < 1e-12);
            }
            assert_eq!(g.ey[n], 0.0);
        }
        let c = grad(&d.sample(|_| 3.0), &d).unwrap();
        assert!(c.ex.iter().chain(&c.ey).all(|&v| v == 0.0));
    }

    #[test]
    fn grad_is_forward_difference() {
        let d = unit_square(64);
        let u = d.sample(|p| p[0] * p[0]);
        let g = grad(&u, &d).unwrap();
        for i in 0..64 {
            let (a, b) = (i as f64 / 64.0, (i + 1) as f64 / 64.0);
            assert!((g.ex[d.node(i, 10)] - (b * b - a * a) * 64.0).abs() < 1e-12);
        }
    }

    #[test]
    fn div_of_constant_field_vanishes_inside() {
        let d = unit_square(32);
        let g = grad(&d.sample(|p| p[0]), &d).unwrap();
        let v = div(&g, &d).unwrap();
        for n in d.active_nodes() {
            if !d.is_boundary(n) {
                assert!(v.values[n].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn metric_norm_examples() {
        let d = unit_square(16);
        let g = grad(&d.sample(|p| p[0]), &d).unwrap();
        let m = metric_norm_1form(&g, &d).unwrap();
        assert!(d.active_nodes().all(|n| (m.values[n] - 1.0).abs() < 1e-12));
        let z = metric_norm_1form(&EdgeField::zeros(d.n_nodes()), &d).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));

        let p = MetricDomain::build(&DomainConfig::disk(64, 1.0, 0.9, "poincare"), None).unwrap();
        let g = grad(&p.sample(|q| q[0]), &p).unwrap();
        let m = metric_norm_1form(&g, &p).unwrap();
        let o = p.nearest_node([0.0, 0.0]);
        assert!((m.values[o] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_detected() {
        let d = unit_square(4);
        assert!(matches!(
            grad(&NodeField::zeros(3), &d),
            Err(LaminaError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn geodesic_arc_cases() {
        let p = MetricDomain::build(&DomainConfig::disk(64, 1.0, 0.9, "poincare"), None).unwrap();
        let arc = geodesic_arc([-0.5, 0.0], [0.5, 0.0], &p).unwrap();
        assert!(arc.iter().all(|q| q[1].abs() < 1e-12));
        assert!(arc.windows(2).all(|w| dist(w[0], w[1]) <= p.h + 1e-12));
        assert!(matches!(
            geodesic_arc([0.1, 0.1], [0.1, 0.1], &p),
            Err(LaminaError::IdenticalEndpoints)
        ));
        assert!(matches!(
            geodesic_arc([0.1, 0.1], [0.99, 0.0], &p),
            Err(LaminaError::OutsideDomain(..))
        ));
        let e = unit_square(16);
        let seg = geodesic_arc([0.0, 0.0], [1.0, 1.0], &e).unwrap();
        assert!(seg.iter().all(|q| (q[0] - q[1]).abs() < 1e-12));
    }

    #[test]
    fn simply_connected_detection() {
        let d = unit_square(8);
        assert!(d.is_simply_connected());
        let mut mask = vec![true; 64];
        mask[3 * 8 + 3] = false;
        let holed = MetricDomain::from_parts(
            8, 8, 0.125, [0.0, 0.0], mask, vec![1.0; 81], MetricKind::Euclidean, 0.0, 1.0,
        )
        .unwrap();
        assert!(!holed.is_simply_connected());
    }
}
