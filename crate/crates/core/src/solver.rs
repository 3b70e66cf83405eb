//! Relaxed least-gradient Dirichlet problem.
//!
//! Minimises `Phi_h(v) = \int *|dv| + \int_{\partial M} |v - h|` with a
//! diagonally preconditioned first-order primal-dual iteration on the saddle
//! problem `min_u max_{|p| <= rho h} <Ku, p> + boundary fidelity`, where `K`
//! pairs each cell's south and west edges into an isotropic gradient. Lower
//! bounds come from the dual of the problem restricted to `[min h, max h]`,
//! which has the same minimum by the maximum principle and a finite dual at
//! every iterate.
//!
//! The dual variable scaled by `1/h` is the calibration covector: at a saddle
//! point it has metric norm at most one, is divergence free in the interior
//! and pairs with `du` to `|du|`.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{cell_covector, cell_mass, div, grad, EdgeField, MetricDomain, NodeField};
use crate::error::{LaminaError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub domain: Arc<MetricDomain>,
    /// Boundary data per node; only boundary nodes are read.
    pub boundary: Vec<f64>,
    pub fidelity_weight: f64,
}

impl DirichletProblem {
    pub fn new(domain: Arc<MetricDomain>, data: impl Fn(Point) -> f64) -> Result<Self> {
        let boundary = (0..domain.n_nodes())
            .map(|n| {
                if domain.is_boundary(n) {
                    data(domain.node_pos(n))
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_values(domain, boundary)
    }

    pub fn from_values(domain: Arc<MetricDomain>, boundary: Vec<f64>) -> Result<Self> {
        if boundary.len() != domain.n_nodes() {
            return Err(LaminaError::ShapeMismatch {
                expected: domain.n_nodes(),
                got: boundary.len(),
            });
        }
        if let Some(n) = domain.boundary_nodes().find(|&n| !boundary[n].is_finite()) {
            let (i, j) = domain.node_ij(n);
            return Err(LaminaError::InvalidBoundaryData(format!(
                "non-finite value at boundary node ({i}, {j})"
            )));
        }
        Ok(DirichletProblem {
            domain,
            boundary,
            fidelity_weight: 1.0,
        })
    }

    /// Range `[min h, max h]` of the boundary data.
    pub fn data_range(&self) -> (f64, f64) {
        self.domain
            .boundary_nodes()
            .map(|n| self.boundary[n])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }

    /// Boundary length weight `rho h` of a boundary node.
    fn boundary_weight(&self, n: usize) -> f64 {
        self.fidelity_weight * self.domain.rho(n) * self.domain.h
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Absolute gap tolerance; `None` means `1e-6` times the initial energy.
    pub gap_tol: Option<f64>,
    /// Iterations between gap evaluations.
    pub check_every: usize,
    /// Primal/dual step balance; `None` picks `0.1 / median(rho h)`.
    pub balance: Option<f64>,
    /// Interior divergence bound on the calibration for declaring
    /// convergence; `None` means `5e-4 / h`.
    pub div_tol: Option<f64>,
    /// Required `min <X, du> / |du|_g` above the mass floor at convergence.
    pub min_pairing: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 200_000,
            gap_tol: None,
            check_every: 50,
            balance: None,
            div_tol: None,
            min_pairing: 0.995,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct CalibrationResiduals {
    /// `sup (|X|_g - 1)^+`.
    pub sup_norm_excess: f64,
    /// `||div X||_inf` over interior nodes.
    pub div_residual: f64,
    /// `min <X, du> / |du|_g` over cells above the mass floor.
    pub min_pairing: f64,
}

/// Dual calibration covector on the cells' own edges.
#[derive(Debug, Clone)]
pub struct CalibrationField {
    pub x: EdgeField,
    pub residuals: CalibrationResiduals,
}

/// The vector measure `du` together with its per-cell mass `*|du|`.
#[derive(Debug, Clone)]
pub struct CurrentField {
    pub values: EdgeField,
    pub mass: Vec<f64>,
}

impl CurrentField {
    pub fn from_edges(values: EdgeField, dom: &MetricDomain) -> Self {
        let mass = cell_mass(&values, dom);
        CurrentField { values, mass }
    }

    pub fn from_u(u: &NodeField, dom: &MetricDomain) -> Result<Self> {
        Ok(Self::from_edges(grad(u, dom)?, dom))
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `(iteration, value)` samples of the primal energy.
    pub primal_energy: Vec<(usize, f64)>,
    pub dual_energy: Vec<(usize, f64)>,
    pub final_gap: f64,
    pub gap_tol: f64,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Boundary misfit with and without the conformal weight.
    pub boundary_term_weighted: f64,
    pub boundary_term_raw: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: NodeField,
    pub calibration: CalibrationField,
    pub report: SolveReport,
}

/// `Phi_h(u)`: total variation plus rho-weighted boundary misfit.
pub fn energy(u: &NodeField, problem: &DirichletProblem) -> Result<f64> {
    let dom = &problem.domain;
    dom.check_node_field(u)?;
    let tv: f64 = cell_mass(&grad(u, dom)?, dom).iter().sum();
    Ok(tv + boundary_misfit(u, problem).0)
}

/// Boundary misfit `(weighted, raw)`.
pub fn boundary_misfit(u: &NodeField, problem: &DirichletProblem) -> (f64, f64) {
    let dom = &problem.domain;
    dom.boundary_nodes().fold((0.0, 0.0), |(w, r), n| {
        let d = (u.values[n] - problem.boundary[n]).abs();
        (w + problem.boundary_weight(n) * d, r + dom.h * d)
    })
}

/// Precomputed operator data for the primal-dual loop.
struct Operator {
    stride: usize,
    /// Per node index: whether the cell with this lower-left corner is active.
    cell: Vec<bool>,
    /// TV weight `rho_c h` per cell.
    weight: Vec<f64>,
    /// Per node: active flag, boundary fidelity weight, data.
    active: Vec<bool>,
    beta: Vec<f64>,
    data: Vec<f64>,
    degree: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Operator {
    fn new(problem: &DirichletProblem) -> Self {
        let dom = &problem.domain;
        let n = dom.n_nodes();
        let stride = dom.nx + 1;
        let mut cell = vec![false; n];
        let mut weight = vec![0.0; n];
        let mut degree = vec![0.0; n];
        for (i, j) in dom.active_cells() {
            let k = dom.node(i, j);
            cell[k] = true;
            weight[k] = dom.cell_rho(i, j) * dom.h;
            degree[k] += 2.0;
            degree[k + 1] += 1.0;
            degree[k + stride] += 1.0;
        }
        let (lo, hi) = problem.data_range();
        Operator {
            stride,
            cell,
            weight,
            active: (0..n).map(|k| dom.node_active(k)).collect(),
            beta: (0..n)
                .map(|k| if dom.is_boundary(k) { problem.boundary_weight(k) } else { 0.0 })
                .collect(),
            data: problem.boundary.clone(),
            degree,
            lo,
            hi,
        }
    }

    fn primal(&self, u: &[f64]) -> f64 {
        let s = self.stride;
        let mut e = 0.0;
        for k in 0..u.len() {
            if self.cell[k] {
                let gx = u[k + 1] - u[k];
                let gy = u[k + s] - u[k];
                e += self.weight[k] * gx.hypot(gy);
            }
            if self.beta[k] > 0.0 {
                e += self.beta[k] * (u[k] - self.data[k]).abs();
            }
        }
        e
    }

    /// `K^T p` accumulated into `out`.
    fn adjoint(&self, px: &[f64], py: &[f64], out: &mut [f64]) {
        let s = self.stride;
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..px.len() {
            if self.cell[k] {
                out[k] -= px[k] + py[k];
                out[k + 1] += px[k];
                out[k + s] += py[k];
            }
        }
    }

    /// Largest interior divergence of the calibration `p / h` given `g = K^T p`.
    fn div_residual(&self, g: &[f64], dom: &MetricDomain) -> f64 {
        let h2 = dom.h * dom.h;
        (0..g.len())
            .filter(|&k| self.active[k] && self.beta[k] == 0.0)
            .map(|k| g[k].abs() / (dom.rho(k).powi(2) * h2))
            .fold(0.0, f64::max)
    }

    fn min_pairing(&self, u: &[f64], px: &[f64], py: &[f64]) -> f64 {
        let s = self.stride;
        let mass = |k: usize| self.weight[k] * (u[k + 1] - u[k]).hypot(u[k + s] - u[k]);
        let max = (0..u.len()).filter(|&k| self.cell[k]).map(mass).fold(0.0, f64::max);
        let floor = MASS_FLOOR_REL * max;
        let mut worst = 1.0f64;
        for k in (0..u.len()).filter(|&k| self.cell[k]) {
            let m = mass(k);
            if m > floor && max > 0.0 {
                let p = px[k] * (u[k + 1] - u[k]) + py[k] * (u[k + s] - u[k]);
                worst = worst.min(p / m);
            }
        }
        worst
    }

    /// Lagrangian dual of the box-restricted problem.
    fn dual(&self, g: &[f64]) -> f64 {
        let mut d = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            if !self.active[k] {
                continue;
            }
            let f = |u: f64| gk * u + self.beta[k] * (u - self.data[k]).abs();
            let mut m = f(self.lo).min(f(self.hi));
            if self.beta[k] > 0.0 {
                m = m.min(f(self.data[k].clamp(self.lo, self.hi)));
            }
            d += m;
        }
        d
    }
}

/// Initial guess: every node takes the data of the nearest boundary node (BFS).
fn initial_guess(problem: &DirichletProblem) -> Vec<f64> {
    let dom = &problem.domain;
    let n = dom.n_nodes();
    let mut u = vec![f64::NAN; n];
    let mut queue = VecDeque::new();
    for b in dom.boundary_nodes() {
        u[b] = problem.boundary[b];
        queue.push_back(b);
    }
    let s = dom.nx + 1;
    while let Some(k) = queue.pop_front() {
        let (i, j) = dom.node_ij(k);
        let mut nb = Vec::with_capacity(4);
        if i > 0 {
            nb.push(k - 1);
        }
        if i < dom.nx {
            nb.push(k + 1);
        }
        if j > 0 {
            nb.push(k - s);
        }
        if j < dom.ny {
            nb.push(k + s);
        }
        for m in nb {
            if dom.node_active(m) && u[m].is_nan() {
                u[m] = u[k];
                queue.push_back(m);
            }
        }
    }
    u.iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect()
}

/// Solves the relaxed problem. Hitting `max_iter` is not an error: the last
/// iterate is returned with `report.converged == false`.
pub fn solve(problem: &DirichletProblem, opts: &SolverOptions) -> Result<Solution> {
    if opts.max_iter == 0 {
        return Err(LaminaError::InvalidOptions("max_iter must be at least 1".into()));
    }
    let start = Instant::now();
    let dom = &problem.domain;
    let op = Operator::new(problem);
    let n = dom.n_nodes();
    let s = op.stride;

    let mut u = initial_guess(problem);
    let mut u_bar = u.clone();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut g = vec![0.0; n];

    let balance = opts.balance.unwrap_or_else(|| {
        let mut w: Vec<f64> = op.weight.iter().copied().filter(|&w| w > 0.0).collect();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        0.1 / w[w.len() / 2]
    });
    let sigma = 0.5 / balance;
    let tau: Vec<f64> = op
        .degree
        .iter()
        .map(|&d| if d > 0.0 { balance / d } else { balance })
        .collect();

    let initial = op.primal(&u);
    let gap_tol = opts.gap_tol.unwrap_or(1e-6 * initial.max(f64::MIN_POSITIVE));
    let mut report = SolveReport {
        gap_tol,
        ..Default::default()
    };
    let check = opts.check_every.max(1);
    let div_tol = opts.div_tol.unwrap_or(5e-4 / dom.h);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        // Dual ascent with projection onto |p_c| <= rho_c h.
        for k in 0..n {
            if !op.cell[k] {
                continue;
            }
            let qx = px[k] + sigma * (u_bar[k + 1] - u_bar[k]);
            let qy = py[k] + sigma * (u_bar[k + s] - u_bar[k]);
            let norm = qx.hypot(qy);
            let w = op.weight[k];
            if norm > w {
                px[k] = qx * w / norm;
                py[k] = qy * w / norm;
            } else {
                px[k] = qx;
                py[k] = qy;
            }
        }
        op.adjoint(&px, &py, &mut g);
        // Primal descent with boundary shrinkage.
        for k in 0..n {
            if !op.active[k] {
                continue;
            }
            let old = u[k];
            let mut v = old - tau[k] * g[k];
            let b = op.beta[k];
            if b > 0.0 {
                let d = v - op.data[k];
                let t = tau[k] * b;
                v = op.data[k] + d.signum() * (d.abs() - t).max(0.0);
            }
            u[k] = v;
            u_bar[k] = 2.0 * v - old;
        }
        iterations = it;
        if it % check == 0 || it == opts.max_iter {
            let primal = op.primal(&u);
            op.adjoint(&px, &py, &mut g);
            let dual = op.dual(&g);
            gap = primal - dual;
            let div_res = op.div_residual(&g, dom);
            let done = gap <= gap_tol
                && div_res <= div_tol
                && op.min_pairing(&u, &px, &py) >= opts.min_pairing;
            if it % (check * 20) == 0 || it == opts.max_iter || done {
                report.primal_energy.push((it, primal));
                report.dual_energy.push((it, dual));
            }
            if done {
                report.converged = true;
                break;
            }
        }
    }
    report.iterations = iterations;
    report.final_gap = gap;

    let u = NodeField { values: u };
    let (weighted, raw) = boundary_misfit(&u, problem);
    report.boundary_term_weighted = weighted;
    report.boundary_term_raw = raw;

    let mut x = EdgeField::zeros(n);
    for k in 0..n {
        if op.cell[k] {
            x.ex[k] = px[k] / dom.h;
            x.ey[k] = py[k] / dom.h;
        }
    }
    let du = CurrentField::from_u(&u, dom)?;
    let residuals = check_calibration(&x, &du, dom)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(Solution {
        u,
        calibration: CalibrationField { x, residuals },
        report,
    })
}

/// Relative mass floor below which the direction of `du` is not trusted.
pub const MASS_FLOOR_REL: f64 = 1e-6;

/// Residuals of the calibration conditions for a covector field `x` and the
/// current `du`.
pub fn check_calibration(
    x: &EdgeField,
    du: &CurrentField,
    dom: &MetricDomain,
) -> Result<CalibrationResiduals> {
    dom.check_edge_field(x)?;
    let mut sup_excess: f64 = 0.0;
    let max_mass = du.mass.iter().copied().fold(0.0, f64::max);
    let floor = MASS_FLOOR_REL * max_mass;
    let mut min_pairing = 1.0f64;
    for (i, j) in dom.active_cells() {
        let rho = dom.cell_rho(i, j);
        let xc = cell_covector(x, dom, i, j);
        sup_excess = sup_excess.max(xc[0].hypot(xc[1]) / rho - 1.0);
        if du.mass[j * dom.nx + i] > floor && max_mass > 0.0 {
            let g = cell_covector(&du.values, dom, i, j);
            let pairing = (xc[0] * g[0] + xc[1] * g[1]) / (rho * g[0].hypot(g[1]));
            min_pairing = min_pairing.min(pairing);
        }
    }
    let d = div(x, dom)?;
    let div_residual = dom
        .active_nodes()
        .filter(|&n| !dom.is_boundary(n))
        .map(|n| d.values[n].abs())
        .fold(0.0, f64::max);
    Ok(CalibrationResiduals {
        sup_norm_excess: sup_excess.max(0.0),
        div_residual,
        min_pairing,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationOptions {
    pub trials: usize,
    pub seed: u64,
    pub slack_abs: f64,
    /// Slack proportional to `||v||_BV`; `None` means `2 h`.
    pub slack_bv: Option<f64>,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        PerturbationOptions {
            trials: 200,
            seed: 0,
            slack_abs: 1e-8,
            slack_bv: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest value of `TV_supp(u + v) - TV_supp(u) + slack`.
    pub worst_margin: f64,
    pub worst_trial: Option<usize>,
}

/// Local total variation over the cells touching the support of `v`, for `u`
/// and `u + v`.
fn local_tv_pair(u: &NodeField, v: &NodeField, dom: &MetricDomain) -> (f64, f64, f64) {
    let s = dom.nx + 1;
    let h2 = dom.h * dom.h;
    let (mut a, mut b, mut bv) = (0.0, 0.0, 0.0);
    for (i, j) in dom.active_cells() {
        let k = dom.node(i, j);
        let corners = [k, k + 1, k + s, k + s + 1];
        if corners.iter().all(|&c| v.values[c] == 0.0) {
            continue;
        }
        let w = dom.cell_rho(i, j) * h2 / dom.h;
        let g = |f: &dyn Fn(usize) -> f64| (f(k + 1) - f(k)).hypot(f(k + s) - f(k));
        a += w * g(&|c| u.values[c]);
        b += w * g(&|c| u.values[c] + v.values[c]);
        bv += w * g(&|c| v.values[c]);
    }
    (a, b, bv)
}

/// Tests `u` against explicit compactly supported perturbations.
pub fn perturbation_test_with(
    u: &NodeField,
    problem: &DirichletProblem,
    perturbations: &[NodeField],
    opts: &PerturbationOptions,
) -> PerturbationReport {
    let dom = &problem.domain;
    let slack_bv = opts.slack_bv.unwrap_or(2.0 * dom.h);
    let mut report = PerturbationReport {
        trials: perturbations.len(),
        worst_margin: f64::INFINITY,
        ..Default::default()
    };
    for (t, v) in perturbations.iter().enumerate() {
        let (before, after, bv) = local_tv_pair(u, v, dom);
        let margin = after - before + opts.slack_abs + slack_bv * bv;
        if margin < 0.0 {
            report.violations += 1;
        }
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_trial = Some(t);
        }
    }
    report
}

/// Random compactly supported bumps (smooth and indicator) away from the boundary.
pub fn random_bumps(dom: &MetricDomain, trials: usize, amplitude: f64, seed: u64) -> Vec<NodeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = [dom.nx as f64 * dom.h, dom.ny as f64 * dom.h];
    let rmax = 0.25 * ext[0].min(ext[1]);
    let rmin = (3.0 * dom.h).min(rmax);
    let mut out = Vec::with_capacity(trials);
    let mut attempts = 0;
    while out.len() < trials && attempts < 100 * trials.max(1) {
        attempts += 1;
        let c = [
            dom.origin[0] + rng.gen::<f64>() * ext[0],
            dom.origin[1] + rng.gen::<f64>() * ext[1],
        ];
        let r = rmin + rng.gen::<f64>() * (rmax - rmin);
        let a = amplitude * (0.05 + 0.95 * rng.gen::<f64>()) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let indicator = rng.gen::<f64>() < 0.3;
        let v = dom.sample(|p| {
            let q = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (r * r);
            if q >= 1.0 {
                0.0
            } else if indicator {
                a
            } else {
                a * (1.0 - q).powi(2)
            }
        });
        let touches_boundary = dom.boundary_nodes().any(|n| v.values[n] != 0.0);
        if !touches_boundary && v.values.iter().any(|&x| x != 0.0) {
            out.push(v);
        }
    }
    out
}

/// Least-gradient check against random bumps.
pub fn perturbation_test(
    u: &NodeField,
    problem: &DirichletProblem,
    opts: &PerturbationOptions,
) -> PerturbationReport {
    let (lo, hi) = u
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let amp = if hi > lo { hi - lo } else { 1.0 };
    let bumps = random_bumps(&problem.domain, opts.trials, amp, opts.seed);
    perturbation_test_with(u, problem, &bumps, opts)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub l1_distances: Vec<f64>,
    /// Per item, the largest pairing deviation from the limit over the form bank.
    pub pairing_deviations: Vec<f64>,
    pub l1_converges: bool,
    pub vague_converges: bool,
}

/// Solves a sequence of problems on one domain (and the limit problem) and
/// checks that `L^1` convergence of the solutions comes with vague
/// convergence of their derivatives.
pub fn l1_stability_test(
    problems: &[DirichletProblem],
    limit: &DirichletProblem,
    opts: &SolverOptions,
    forms: &[crate::testforms::TestForm],
) -> Result<StabilityReport> {
    let dom = &limit.domain;
    let lim = solve(limit, opts)?;
    let du_lim = grad(&lim.u, dom)?;
    let lim_pairs: Vec<f64> = forms
        .iter()
        .map(|f| crate::testforms::pair(&du_lim, f, dom))
        .collect();
    let mut l1 = Vec::new();
    let mut dev = Vec::new();
    for p in problems {
        if p.domain.n_nodes() != dom.n_nodes() {
            return Err(LaminaError::ShapeMismatch {
                expected: dom.n_nodes(),
                got: p.domain.n_nodes(),
            });
        }
        let sol = solve(p, opts)?;
        let d: f64 = dom
            .active_nodes()
            .map(|n| dom.node_area(n) * (sol.u.values[n] - lim.u.values[n]).abs())
            .sum();
        l1.push(d);
        let du = grad(&sol.u, dom)?;
        let worst = forms
            .iter()
            .zip(&lim_pairs)
            .map(|(f, l)| (crate::testforms::pair(&du, f, dom) - l).abs())
            .fold(0.0, f64::max);
        dev.push(worst);
    }
    let scale = lim_pairs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-12);
    Ok(StabilityReport {
        l1_converges: crate::convergence::tail_converges(&l1, 1e-9, 0.5),
        vague_converges: crate::convergence::tail_converges(&dev, 1e-9 * scale, 0.5),
        l1_distances: l1,
        pairing_deviations: dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainConfig;

    fn square(n: usize) -> Arc<MetricDomain> {
        Arc::new(MetricDomain::build(&DomainConfig::rect(n, n, 1.0 / n as f64), None).unwrap())
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let dom = square(16);
        let p = DirichletProblem::new(dom.clone(), |_| 3.0).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(dom.active_nodes().all(|n| (sol.u.values[n] - 3.0).abs() < 1e-12));
        assert_eq!(energy(&sol.u, &p).unwrap(), 0.0);
        assert!(sol.report.final_gap.abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let dom = square(64);
        let c = DirichletProblem::new(dom.clone(), |_| 2.0).unwrap();
        assert_eq!(energy(&dom.sample(|_| 2.0), &c).unwrap(), 0.0);

        let step = |p: Point| if p[0] >= 0.5 { 1.0 } else { 0.0 };
        let hp = DirichletProblem::new(dom.clone(), step).unwrap();
        // Oracle: one jump edge per row of cells, each of length h.
        let cut_edges = 64.0;
        let e = energy(&dom.sample(step), &hp).unwrap();
        assert!((e - cut_edges / 64.0).abs() < 0.02);

        let small = Arc::new(
            MetricDomain::build(&DomainConfig::rect(16, 16, 1.0 / 64.0), None).unwrap(),
        );
        let one = DirichletProblem::new(small.clone(), |_| 1.0).unwrap();
        let e = energy(&NodeField::zeros(small.n_nodes()), &one).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let dom = square(4);
        assert!(matches!(
            DirichletProblem::new(dom.clone(), |_| f64::NAN),
            Err(LaminaError::InvalidBoundaryData(_))
        ));
        let p = DirichletProblem::new(dom, |_| 0.0).unwrap();
        let opts = SolverOptions {
            max_iter: 0,
            ..Default::default()
        };
        assert!(matches!(solve(&p, &opts), Err(LaminaError::InvalidOptions(_))));
    }

    #[test]
    fn calibration_of_linear_field() {
        let dom = square(32);
        let u = dom.sample(|p| p[0]);
        let du = CurrentField::from_u(&u, &dom).unwrap();
        let x = grad(&u, &dom).unwrap();
        let r = check_calibration(&x, &du, &dom).unwrap();
        assert!(r.sup_norm_excess.abs() < 1e-12);
        assert!(r.div_residual <= 1e-10);
        assert!((r.min_pairing - 1.0).abs() < 1e-12);
        let r = check_calibration(&x.scaled(1.1), &du, &dom).unwrap();
        assert!((r.sup_norm_excess - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_field_survives_bumps() {
        let dom = square(32);
        let p = DirichletProblem::new(dom.clone(), |q| q[0]).unwrap();
        let u = dom.sample(|q| q[0]);
        let opts = PerturbationOptions {
            slack_bv: Some(0.0),
            ..Default::default()
        };
        let r = perturbation_test(&u, &p, &opts);
        assert_eq!(r.trials, 200);
        assert_eq!(r.violations, 0, "{r:?}");
    }
}
