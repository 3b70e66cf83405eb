//! Scenario files and the verification driver.
//!
//! A scenario names a domain, boundary data, the checks to run and expected
//! values with their provenance. [`run_scenario`] chains solve, extract,
//! measure and decompose, writes every artifact to the output directory and
//! returns a [`VerificationReport`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{total_variation, DomainConfig, MetricDomain, MetricKind, NodeField};
use crate::error::{LaminaError, Result};
use crate::expr::Formula;
use crate::family::ShapeSpec;
use crate::flowbox::{assemble_lamination, FlowBoxOptions, Lamination};
use crate::geometry::{hausdorff, Point};
use crate::gorny::{decompose_profile, glue_components, GornyOptions, PARTS};
use crate::io::csv::{read_node_triples, write_atomic, write_edge_field, write_node_field};
use crate::io::mincut::per_threshold_sum;
use crate::lamination::{
    check_disjointness, check_nesting, curvature_tolerance, dedup_leaves, default_window, extract_leaves,
    local_minimality_test, select_thresholds, ExtractOptions, Leaf,
};
use crate::solver::{energy, perturbation_test, solve, DirichletProblem, PerturbationOptions, SolverOptions};
use crate::transverse::{
    bv_norm, coarea_check, extract_profile, integrate_current, l1_distance_mod_constant, measure_lamination,
    polar_check, profile_to_measure, ruelle_sullivan, transition_invariance, TransverseMeasure,
};

/// Origin of an expected value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Paper,
    Trivial,
    Derived(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Paper => write!(f, "paper"),
            Provenance::Trivial => write!(f, "trivial"),
            Provenance::Derived(o) => write!(f, "derived:{o}"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper" => Ok(Provenance::Paper),
            "trivial" => Ok(Provenance::Trivial),
            _ => match s.strip_prefix("derived:") {
                Some(o) if !o.is_empty() => Ok(Provenance::Derived(o.to_string())),
                _ => Err(format!("provenance {s:?} is not paper, trivial or derived:<oracle>")),
            },
        }
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    /// Name of a measurement recorded by the driver.
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// Tolerance relative to `|value|`.
    #[serde(default)]
    pub relative: bool,
    pub provenance: Provenance,
}

/// Counterclockwise arc of boundary angles `[from, to)` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// Piecewise constant data by polar angle; angles outside every arc get `default`.
    Arcs {
        arcs: Vec<ArcSpec>,
        #[serde(default)]
        default: f64,
        #[serde(default)]
        center: Point,
    },
    /// Formula in `x`, `y`, `r`, `theta`.
    Expr { expr: Formula },
    /// `(i, j, value)` rows covering every boundary node.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Solver,
    Calibration,
    MincutEnergy,
    Coarea,
    Curvature,
    Disjointness,
    Nesting,
    LeafHausdorff,
    Minimality,
    Flowbox,
    Measure,
    Roundtrip,
    Polar,
    Decompose,
    Perturbation,
}

impl Check {
    pub fn name(self) -> String {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::String(s)) => s,
            _ => format!("{self:?}"),
        }
    }

    fn needs_leaves(self) -> bool {
        !matches!(
            self,
            Check::Solver | Check::Calibration | Check::MincutEnergy | Check::Coarea | Check::Nesting | Check::Perturbation
        )
    }

    fn needs_lamination(self) -> bool {
        matches!(
            self,
            Check::Flowbox | Check::Measure | Check::Roundtrip | Check::Polar | Check::Decompose
        )
    }
}

fn default_levels() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: DomainConfig,
    pub boundary: BoundarySpec,
    /// Prescribed field in `x`, `y`, `r`, `theta`, used instead of solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<Formula>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub flowbox: FlowBoxOptions,
    #[serde(default)]
    pub gorny: GornyOptions,
    /// Number of level-set thresholds.
    #[serde(default = "default_levels")]
    pub levels: usize,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub expected: Vec<Expected>,
    /// Analytic leaves compared with the extracted ones.
    #[serde(default)]
    pub reference_leaves: Vec<ShapeSpec>,
    /// Overrides of the default tolerance per check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Converts a serde path into an RFC 6901 JSON pointer.
pub(crate) fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        let s = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.replace('~', "~0").replace('/', "~1"),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&s);
    }
    out
}

/// Deserializes JSON, reporting failures as `ConfigInvalid` with a pointer.
pub(crate) fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| LaminaError::config(json_pointer(e.path()), e.inner().to_string()))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| LaminaError::io(path, e))
}

/// Re-anchors domain construction errors at the offending config field.
pub(crate) fn domain_config_error(prefix: &str, e: LaminaError) -> LaminaError {
    let field = match &e {
        LaminaError::NonpositiveSpacing(_) => "/grid/h",
        LaminaError::EmptyMask | LaminaError::DisconnectedMask { .. } => "/mask",
        LaminaError::InconsistentMetric(_) | LaminaError::NonpositiveConformalFactor { .. } => "/metric",
        LaminaError::Io { .. } | LaminaError::Csv { .. } => "",
        _ => "",
    };
    LaminaError::config(format!("{prefix}{field}"), e.to_string())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = from_json(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(LaminaError::config("/name", "empty scenario name"));
        }
        if self.levels < 1 {
            return Err(LaminaError::config("/levels", "at least one level is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, e) in self.expected.iter().enumerate() {
            if !seen.insert(e.name.as_str()) {
                return Err(LaminaError::config(format!("/expected/{i}/name"), format!("duplicate expected value {:?}", e.name)));
            }
            if e.tolerance.is_nan() || e.tolerance < 0.0 {
                return Err(LaminaError::config(format!("/expected/{i}/tolerance"), "tolerance must be nonnegative"));
            }
        }
        for (k, v) in &self.tolerances {
            if v.is_nan() || *v < 0.0 {
                return Err(LaminaError::config(format!("/tolerances/{k}"), "tolerance must be nonnegative"));
            }
        }
        if self.checks.contains(&Check::LeafHausdorff) && self.reference_leaves.is_empty() {
            return Err(LaminaError::config("/reference_leaves", "leaf_hausdorff needs reference leaves"));
        }
        Ok(())
    }

    pub fn build_domain(&self, base_dir: Option<&Path>) -> Result<MetricDomain> {
        MetricDomain::build(&self.domain, base_dir).map_err(|e| domain_config_error("/domain", e))
    }

    pub fn build_problem(&self, dom: Arc<MetricDomain>, base_dir: Option<&Path>) -> Result<DirichletProblem> {
        self.boundary.problem(dom, base_dir)
    }

    fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

impl BoundarySpec {
    pub fn problem(&self, dom: Arc<MetricDomain>, base_dir: Option<&Path>) -> Result<DirichletProblem> {
        let bad = |ptr: &str, e: LaminaError| LaminaError::config(format!("/boundary{ptr}"), e.to_string());
        match self {
            BoundarySpec::Arcs { arcs, default, center } => {
                let c = *center;
                let arcs = arcs.clone();
                let d = *default;
                let value = move |t: f64| arcs.iter().find(|a| in_arc(t, a.from, a.to)).map_or(d, |a| a.value);
                DirichletProblem::new(dom, move |p| {
                    let t = (p[1] - c[1]).atan2(p[0] - c[0]);
                    // nodes on a jump take the mean of both sides
                    let (lo, hi) = (value(t - 1e-9), value(t + 1e-9));
                    if lo == hi {
                        value(t)
                    } else {
                        0.5 * (lo + hi)
                    }
                })
                .map_err(|e| bad("/arcs", e))
            }
            BoundarySpec::Expr { expr } => {
                let mut err = None;
                let vals: Vec<f64> = (0..dom.n_nodes())
                    .map(|n| {
                        if !dom.is_boundary(n) {
                            return 0.0;
                        }
                        match eval_field(expr, dom.node_pos(n)) {
                            Ok(v) => v,
                            Err(e) => {
                                err.get_or_insert(e);
                                0.0
                            }
                        }
                    })
                    .collect();
                if let Some(e) = err {
                    return Err(bad("/expr", e));
                }
                DirichletProblem::from_values(dom, vals).map_err(|e| bad("/expr", e))
            }
            BoundarySpec::Csv { path } => {
                let full = match base_dir {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let rows = read_node_triples(&full).map_err(|e| bad("/path", e))?;
                let mut vals = vec![f64::NAN; dom.n_nodes()];
                for (i, j, v) in rows {
                    if i > dom.nx || j > dom.ny {
                        return Err(bad("/path", LaminaError::OutsideDomain(i as f64, j as f64)));
                    }
                    vals[dom.node(i, j)] = v;
                }
                for (n, v) in vals.iter_mut().enumerate() {
                    if !dom.is_boundary(n) && v.is_nan() {
                        *v = 0.0;
                    }
                }
                DirichletProblem::from_values(dom, vals).map_err(|e| bad("/path", e))
            }
        }
    }
}

/// Domain, boundary data and solver options; the subset of a scenario the
/// single-step commands need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        from_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn build_domain(&self, base_dir: Option<&Path>) -> Result<MetricDomain> {
        MetricDomain::build(&self.domain, base_dir).map_err(|e| domain_config_error("/domain", e))
    }

    pub fn build_problem(&self, dom: Arc<MetricDomain>, base_dir: Option<&Path>) -> Result<DirichletProblem> {
        self.boundary
            .as_ref()
            .ok_or_else(|| LaminaError::config("/boundary", "missing boundary data"))?
            .problem(dom, base_dir)
    }
}

fn in_arc(t: f64, from: f64, to: f64) -> bool {
    use std::f64::consts::TAU;
    let span = (to - from).rem_euclid(TAU);
    let span = if span == 0.0 && to != from { TAU } else { span };
    (t - from).rem_euclid(TAU) < span
}

fn eval_field(f: &Formula, p: Point) -> Result<f64> {
    f.eval(&[
        ("x", p[0]),
        ("y", p[1]),
        ("r", p[0].hypot(p[1])),
        ("theta", p[1].atan2(p[0])),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// How `measured` is compared with the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `measured <= tolerance`.
    AtMost,
    /// `measured >= tolerance`.
    AtLeast,
    /// `|measured - expected| <= tolerance`.
    Within,
    /// The check holds or fails without a number.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub rule: Rule,
    pub measured: Option<f64>,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CheckResult {
    fn new(name: &str, rule: Rule, measured: Option<f64>, expected: Option<f64>, tolerance: Option<f64>, ok: bool) -> Self {
        CheckResult {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            rule,
            measured,
            expected,
            tolerance,
            provenance: None,
            note: String::new(),
        }
    }

    pub fn at_most(name: &str, measured: f64, tol: f64) -> Self {
        Self::new(name, Rule::AtMost, Some(measured), None, Some(tol), measured <= tol)
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self::new(name, Rule::AtLeast, Some(measured), None, Some(bound), measured >= bound)
    }

    pub fn within(name: &str, measured: f64, expected: f64, tol: f64) -> Self {
        Self::new(name, Rule::Within, Some(measured), Some(expected), Some(tol), (measured - expected).abs() <= tol)
    }

    pub fn holds(name: &str, ok: bool, note: impl Into<String>) -> Self {
        let mut c = Self::new(name, Rule::Holds, None, None, None, ok);
        c.note = note.into();
        c
    }

    pub fn failed(name: &str, note: impl Into<String>) -> Self {
        Self::holds(name, false, note)
    }

    pub fn skipped(name: &str, note: impl Into<String>) -> Self {
        let mut c = Self::holds(name, true, note);
        c.status = Status::Skipped;
        c
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub grid: [usize; 2],
    pub h: f64,
    pub metric: String,
    pub seed: u64,
    pub lamina_version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn new(dom: Option<&MetricDomain>, seed: u64) -> Self {
        Environment {
            grid: dom.map_or([0, 0], |d| [d.nx, d.ny]),
            h: dom.map_or(0.0, |d| d.h),
            metric: dom.map_or(String::new(), |d| metric_name(d.kind).to_string()),
            seed,
            lamina_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

fn metric_name(k: MetricKind) -> &'static str {
    match k {
        MetricKind::Euclidean => "euclidean",
        MetricKind::PoincareDisk => "poincare",
        MetricKind::Custom => "custom",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub measurements: BTreeMap<String, f64>,
    pub environment: Environment,
    /// Seconds per stage; the only nondeterministic part of the report.
    pub wall_times: BTreeMap<String, f64>,
}

impl VerificationReport {
    pub fn new(scenario: &str, env: Environment) -> Self {
        VerificationReport {
            scenario: scenario.to_string(),
            passed: true,
            checks: Vec::new(),
            measurements: BTreeMap::new(),
            environment: env,
            wall_times: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.passed &= c.status != Status::Fail;
        self.checks.push(c);
    }

    pub fn measure(&mut self, name: &str, v: f64) {
        self.measurements.insert(name.to_string(), v);
    }

    pub fn time(&mut self, stage: &str, since: Instant) {
        *self.wall_times.entry(stage.to_string()).or_default() += since.elapsed().as_secs_f64();
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// The report without wall times, for reproducibility comparisons.
    pub fn deterministic(&self) -> Self {
        VerificationReport {
            wall_times: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Compares every expected value with the recorded measurement.
    pub fn apply_expected(&mut self, expected: &[Expected]) {
        for e in expected {
            let name = format!("expected.{}", e.name);
            let tol = if e.relative { e.tolerance * e.value.abs() } else { e.tolerance };
            let mut c = match self.measurements.get(&e.name) {
                Some(&m) => CheckResult::within(&name, m, e.value, tol),
                None => CheckResult::failed(&name, "quantity was not measured"),
            };
            c.provenance = Some(e.provenance.clone());
            self.push(c);
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, (serde_json::to_string_pretty(self)? + "\n").as_bytes())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Artifact directory; defaults to `out/<scenario name>`.
    pub out_dir: Option<PathBuf>,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
}

/// Loads, runs and writes a scenario.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<VerificationReport> {
    let sc = Scenario::load(path)?;
    let out = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    execute(&sc, path.parent(), &out, opts.seed.or(sc.seed).unwrap_or(0))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_atomic(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| LaminaError::io(dir, e))
}

pub const DEFAULT_MINCUT_LEVELS: usize = 64;
pub const CURL_TOL: f64 = 0.05;

/// Runs the declared checks of a parsed scenario, writing artifacts into `out`.
pub fn execute(sc: &Scenario, base_dir: Option<&Path>, out: &Path, seed: u64) -> Result<VerificationReport> {
    let t = Instant::now();
    let dom = Arc::new(sc.build_domain(base_dir)?);
    let problem = sc.build_problem(dom.clone(), base_dir)?;
    create_dir(out)?;
    let mut rep = VerificationReport::new(&sc.name, Environment::new(Some(&dom), seed));
    rep.time("setup", t);
    let checks: BTreeSet<Check> = sc.checks.iter().copied().collect();
    let h = dom.h;

    let t = Instant::now();
    let (u, solution) = match &sc.field {
        Some(f) => {
            let err = std::cell::RefCell::new(None);
            let u = dom.sample(|p| {
                eval_field(f, p).unwrap_or_else(|e| {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                })
            });
            if let Some(e) = err.into_inner() {
                return Err(LaminaError::config("/field", e.to_string()));
            }
            (u, None)
        }
        None => {
            let sol = solve(&problem, &sc.solver).map_err(|e| LaminaError::config("/solver", e.to_string()))?;
            write_edge_field(&out.join("x.csv"), &dom, &sol.calibration.x)?;
            write_json(&out.join("solve_report.json"), &sol.report)?;
            rep.measure("iterations", sol.report.iterations as f64);
            rep.measure("boundary_term_weighted", sol.report.boundary_term_weighted);
            rep.measure("boundary_term_raw", sol.report.boundary_term_raw);
            (sol.u.clone(), Some(sol))
        }
    };
    write_node_field(&out.join("u.csv"), &dom, &u)?;
    rep.time("solve", t);
    let e = energy(&u, &problem)?;
    let tv = total_variation(&u, &dom)?;
    rep.measure("energy", e);
    rep.measure("total_variation", tv);

    if checks.contains(&Check::Solver) {
        rep.push(match &solution {
            Some(s) => CheckResult::at_most("solver.gap", s.report.final_gap, s.report.gap_tol)
                .with_note(if s.report.converged { "converged" } else { "iteration limit reached" }),
            None => CheckResult::skipped("solver.gap", "field prescribed"),
        });
    }
    if checks.contains(&Check::Calibration) {
        match &solution {
            Some(s) => {
                let r = &s.calibration.residuals;
                rep.push(CheckResult::at_most("calibration.sup_norm", r.sup_norm_excess, sc.tolerance("calibration.sup_norm", 1e-3)));
                rep.push(CheckResult::at_most("calibration.divergence", r.div_residual, sc.tolerance("calibration.divergence", 1e-3 / h)));
                rep.push(CheckResult::at_least("calibration.pairing", r.min_pairing, sc.tolerance("calibration.pairing", 0.99)));
            }
            None => rep.push(CheckResult::skipped("calibration", "field prescribed")),
        }
    }
    if checks.contains(&Check::MincutEnergy) {
        let t = Instant::now();
        let oracle = per_threshold_sum(&problem, DEFAULT_MINCUT_LEVELS)?;
        rep.time("mincut", t);
        rep.measure("mincut_sum", oracle);
        let rel = if oracle.abs() > 1e-12 { (e - oracle).abs() / oracle.abs() } else { (e - oracle).abs() };
        let mut c = CheckResult::at_most("mincut_energy", rel, sc.tolerance("mincut_energy", 0.01));
        c.provenance = Some(Provenance::Derived("mincut".into()));
        rep.push(c);
    }
    if checks.contains(&Check::Coarea) {
        let t = Instant::now();
        let r = coarea_check(&u, &dom, 256)?;
        rep.time("coarea", t);
        rep.measure("coarea_relative_error", r.relative_error);
        rep.push(CheckResult::at_most("coarea", r.relative_error, sc.tolerance("coarea", 0.03)));
    }
    if checks.contains(&Check::Perturbation) {
        let t = Instant::now();
        let r = perturbation_test(&u, &problem, &PerturbationOptions { seed, ..Default::default() });
        rep.time("perturbation", t);
        rep.push(CheckResult::at_most("perturbation", r.violations as f64, 0.0).with_note(format!("{} trials", r.trials)));
    }

    let (lo, hi) = dom
        .active_nodes()
        .map(|n| u.values[n])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let flat = hi - lo <= 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let thresholds = if flat { Vec::new() } else { select_thresholds(&u, &dom, sc.levels, &[])? };
    rep.measure("thresholds", thresholds.len() as f64);
    if checks.contains(&Check::Nesting) {
        let r = check_nesting(&u, &thresholds, &dom);
        rep.push(CheckResult::at_most("nesting", r.violations.len() as f64, 0.0).with_note(format!("{} pairs", r.pairs_checked)));
    }
    if !checks.iter().any(|c| c.needs_leaves()) {
        return finish(rep, sc, out);
    }

    let t = Instant::now();
    let window = default_window(&dom);
    let raw = extract_leaves(&u, &thresholds, &dom, &ExtractOptions::default())?;
    let n_raw = raw.len();
    let leaves = dedup_leaves(raw, 2.0 * h);
    write_json(&out.join("leaves.json"), &leaves)?;
    rep.time("extract", t);
    rep.measure("leaf_count", leaves.len() as f64);

    if checks.contains(&Check::Curvature) {
        let sup = leaves.iter().map(|l| l.sup_curvature).fold(0.0, f64::max);
        rep.measure("max_curvature", sup);
        rep.push(CheckResult::at_most("curvature", sup, sc.tolerance("curvature", curvature_tolerance(h, window))));
    }
    if checks.contains(&Check::Disjointness) {
        let r = check_disjointness(&leaves);
        rep.push(
            CheckResult::at_most("disjointness", r.crossings.len() as f64, 0.0)
                .with_note(format!("{} leaves from {n_raw} raw", leaves.len())),
        );
    }
    if checks.contains(&Check::LeafHausdorff) {
        let tol = sc.tolerance("leaf_hausdorff", 2.0 * h);
        let mut worst: f64 = 0.0;
        for (i, s) in sc.reference_leaves.iter().enumerate() {
            let r = s
                .polyline(f64::INFINITY, &dom)
                .map_err(|e| LaminaError::config(format!("/reference_leaves/{i}"), e.to_string()))?;
            let best = leaves
                .iter()
                .map(|l| hausdorff(&l.path(), &r, h / 2.0))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        rep.measure("leaf_hausdorff", worst);
        rep.push(CheckResult::at_most("leaf_hausdorff", worst, tol));
    }
    if checks.contains(&Check::Minimality) {
        let t = Instant::now();
        rep.push(minimality(&leaves, &dom));
        rep.time("minimality", t);
    }
    if !checks.iter().any(|c| c.needs_lamination()) {
        return finish(rep, sc, out);
    }

    let t = Instant::now();
    let fb_opts = FlowBoxOptions { seed, ..sc.flowbox.clone() };
    let lam = match assemble_lamination(leaves, &dom, &fb_opts) {
        Ok(l) => l,
        Err(e) => {
            for c in checks.iter().filter(|c| c.needs_lamination()) {
                rep.push(CheckResult::failed(&c.name(), format!("lamination: {e}")));
            }
            return finish(rep, sc, out);
        }
    };
    write_json(&out.join("lamination.json"), &lam)?;
    rep.time("flowbox", t);
    rep.measure("box_count", lam.atlas.len() as f64);
    if checks.contains(&Check::Flowbox) {
        flowbox_checks(&mut rep, sc, &lam, h, &fb_opts);
    }

    let wants_measures = [Check::Measure, Check::Roundtrip, Check::Polar]
        .iter()
        .any(|c| checks.contains(c));
    if wants_measures {
        let t = Instant::now();
        match measure_lamination(&u, &lam, &dom, 1e-3) {
            Ok(ms) => {
                write_json(&out.join("measure.json"), &ms)?;
                rep.time("measure", t);
                measure_checks(&mut rep, sc, &checks, &u, &lam, &ms, &dom, out)?;
            }
            Err(e) => {
                for c in [Check::Measure, Check::Roundtrip, Check::Polar] {
                    if checks.contains(&c) {
                        rep.push(CheckResult::failed(&c.name(), format!("measure: {e}")));
                    }
                }
            }
        }
    }
    if checks.contains(&Check::Decompose) {
        let t = Instant::now();
        decompose_checks(&mut rep, sc, &u, &lam, &dom, out, tv)?;
        rep.time("decompose", t);
    }
    finish(rep, sc, out)
}

fn finish(mut rep: VerificationReport, sc: &Scenario, out: &Path) -> Result<VerificationReport> {
    rep.apply_expected(&sc.expected);
    rep.write(&out.join("report.json"))?;
    Ok(rep)
}

fn minimality(leaves: &[Leaf], dom: &MetricDomain) -> CheckResult {
    let (mut tested, mut failed, mut worst) = (0, 0, f64::NEG_INFINITY);
    for l in leaves {
        let Ok(r) = local_minimality_test(l, dom, None, f64::INFINITY) else {
            continue;
        };
        tested += 1;
        failed += usize::from(!r.passed);
        worst = worst.max(r.leaf_length - r.oracle_length - r.slack);
    }
    if tested == 0 {
        return CheckResult::skipped("minimality", "no leaf admits a window");
    }
    CheckResult::at_most("minimality", worst, 0.0).with_note(format!("{failed} of {tested} leaves exceed the oracle"))
}

fn flowbox_checks(rep: &mut VerificationReport, sc: &Scenario, lam: &Lamination, h: f64, opts: &FlowBoxOptions) {
    let lip = lam.atlas.iter().map(|b| b.lip_max()).fold(0.0, f64::max);
    let inv = lam.atlas.iter().map(|b| b.inverse_error).fold(0.0, f64::max);
    rep.measure("max_lipschitz", lip);
    rep.push(CheckResult::at_most("flowbox.lipschitz", lip, sc.tolerance("flowbox.lipschitz", opts.lip_bound)));
    rep.push(CheckResult::at_most("flowbox.inverse", inv, sc.tolerance("flowbox.inverse", h)));
    rep.push(
        CheckResult::at_most("flowbox.uncovered", lam.uncovered.len() as f64, 0.0)
            .with_note(format!("{} boxes over {} cells", lam.atlas.len(), lam.support_cells())),
    );
    let bad = lam.transitions.iter().filter(|t| !t.consistent).count();
    rep.push(CheckResult::at_most("flowbox.transitions", bad as f64, 0.0));
}

#[allow(clippy::too_many_arguments)]
fn measure_checks(
    rep: &mut VerificationReport,
    sc: &Scenario,
    checks: &BTreeSet<Check>,
    u: &NodeField,
    lam: &Lamination,
    ms: &[TransverseMeasure],
    dom: &MetricDomain,
    out: &Path,
) -> Result<()> {
    let max_mass = ms.iter().map(|m| m.total_mass).fold(0.0, f64::max);
    if checks.contains(&Check::Measure) {
        let r = transition_invariance(lam, ms);
        let rel = if max_mass > 0.0 { r.max_deviation / max_mass } else { r.max_deviation };
        rep.push(CheckResult::at_most("measure.invariance", rel, sc.tolerance("measure.invariance", 1e-3)).with_note(format!("{} overlaps", r.checked)));
    }
    if !(checks.contains(&Check::Roundtrip) || checks.contains(&Check::Polar)) {
        return Ok(());
    }
    let t = Instant::now();
    let cur = match ruelle_sullivan(lam, ms, dom) {
        Ok(c) => c,
        Err(e) => {
            for c in [Check::Roundtrip, Check::Polar] {
                if checks.contains(&c) {
                    rep.push(CheckResult::failed(&c.name(), e.to_string()));
                }
            }
            return Ok(());
        }
    };
    write_edge_field(&out.join("t.csv"), dom, &cur.values)?;
    rep.time("current", t);
    rep.measure("current_mass", cur.total_mass());
    if checks.contains(&Check::Roundtrip) {
        match integrate_current(&cur.values, dom, CURL_TOL) {
            Ok(p) => {
                let ratio = l1_distance_mod_constant(u, &p.u, dom) / bv_norm(u, dom)?;
                rep.measure("roundtrip_ratio", ratio);
                rep.push(CheckResult::at_most("roundtrip", ratio, sc.tolerance("roundtrip", 0.02)));
            }
            Err(e) => rep.push(CheckResult::failed("roundtrip", e.to_string())),
        }
    }
    if checks.contains(&Check::Polar) {
        let r = polar_check(&cur, lam, ms, dom, 4);
        rep.push(CheckResult::at_most("polar.mass", r.mass_error, sc.tolerance("polar.mass", 0.02)));
        rep.push(CheckResult::at_most("polar.angle_deg", r.max_angle_deg, sc.tolerance("polar.angle_deg", 5.0)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMasses {
    pub ac: f64,
    pub c: f64,
    pub j: f64,
}

fn decompose_checks(
    rep: &mut VerificationReport,
    sc: &Scenario,
    u: &NodeField,
    lam: &Lamination,
    dom: &MetricDomain,
    out: &Path,
    tv: f64,
) -> Result<()> {
    let mut decs = Vec::new();
    let mut recon: f64 = 0.0;
    for bx in &lam.atlas {
        let d = extract_profile(u, bx, dom, 1e-3).and_then(|p| {
            let d = decompose_profile(&p, &sc.gorny)?;
            let scale = p.total_mass().max(1e-300);
            let err = d
                .reconstruct()
                .iter()
                .zip(&p.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            recon = recon.max(err / scale);
            Ok(d)
        });
        match d {
            Ok(d) => decs.push(d),
            Err(e) => {
                rep.push(CheckResult::failed("decompose", e.to_string()));
                return Ok(());
            }
        }
    }
    rep.push(CheckResult::at_most("decompose.reconstruction", recon, sc.tolerance("decompose.reconstruction", 1e-9)));
    let box_mass: [f64; 3] = PARTS.map(|p| decs.iter().map(|d| d.masses[p.index()]).sum());
    let total: f64 = box_mass.iter().sum();
    for p in PARTS {
        let frac = if total > 0.0 { box_mass[p.index()] / total } else { 0.0 };
        rep.measure(&format!("fraction_{}", p.name()), frac);
    }
    match glue_components(&decs, lam, dom, sc.tolerance("decompose.overlap", 1e-3) * total.max(1e-300), CURL_TOL) {
        Ok(fields) => {
            let mut tvs = [0.0; 3];
            for p in PARTS {
                write_node_field(&out.join(format!("parts_{}.csv", p.name())), dom, &fields[p.index()])?;
                tvs[p.index()] = total_variation(&fields[p.index()], dom)?;
            }
            write_json(
                &out.join("masses.json"),
                &PartMasses {
                    ac: tvs[0],
                    c: tvs[1],
                    j: tvs[2],
                },
            )?;
            let sum: f64 = tvs.iter().sum();
            let rel = if tv > 0.0 { (sum - tv).abs() / tv } else { sum };
            rep.measure("parts_total_variation", sum);
            rep.push(CheckResult::at_most("decompose.mass_balance", rel, sc.tolerance("decompose.mass_balance", 0.02)));
        }
        Err(e) => rep.push(CheckResult::failed("decompose.glue", e.to_string())),
    }
    Ok(())
}

/// Transverse measures of every box, for the `measure` subcommand.
pub fn measures_for(u: &NodeField, lam: &Lamination, dom: &MetricDomain) -> Result<Vec<TransverseMeasure>> {
    lam.atlas
        .iter()
        .map(|bx| profile_to_measure(&extract_profile(u, bx, dom, 1e-3)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "domain": {"grid": {"nx": 8, "ny": 8, "h": 0.125}, "mask": "rect", "metric": "euclidean"},
        "boundary": {"kind": "expr", "expr": "x"},
        "checks": ["solver"]
    }"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.levels, 32);
        assert_eq!(s.checks, vec![Check::Solver]);
        let back = Scenario::parse(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&s).unwrap());
    }

    fn pointer_of(text: &str) -> String {
        match Scenario::parse(text) {
            Err(LaminaError::ConfigInvalid { pointer, .. }) => pointer,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_carry_pointers() {
        assert_eq!(pointer_of(&MINIMAL.replace("0.125", "\"x\"")), "/domain/grid/h");
        assert_eq!(pointer_of(&MINIMAL.replace("\"solver\"", "\"bogus\"")), "/checks/0");
        assert!(pointer_of(&MINIMAL.replace("\"x\"}", "\"x +\"}")).starts_with("/boundary"));
        let dup = MINIMAL.replace(
            "\"checks\"",
            r#""expected": [{"name": "energy", "value": 1, "tolerance": 0.1, "provenance": "trivial"},
                           {"name": "energy", "value": 1, "tolerance": 0.1, "provenance": "trivial"}],
               "checks""#,
        );
        assert_eq!(pointer_of(&dup), "/expected/1/name");
        let prov = MINIMAL.replace(
            "\"checks\"",
            r#""expected": [{"name": "energy", "value": 1, "tolerance": 0.1, "provenance": "folklore"}], "checks""#,
        );
        assert_eq!(pointer_of(&prov), "/expected/0/provenance");
        assert!(matches!(Scenario::parse("{ not json"), Err(LaminaError::ConfigInvalid { .. })));
    }

    #[test]
    fn bad_spacing_points_at_grid() {
        let s = Scenario::parse(&MINIMAL.replace("0.125", "-1")).unwrap();
        match s.build_domain(None) {
            Err(LaminaError::ConfigInvalid { pointer, .. }) => assert_eq!(pointer, "/domain/grid/h"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn provenance_strings() {
        for s in ["paper", "trivial", "derived:mincut"] {
            let p: Provenance = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("derived:".parse::<Provenance>().is_err());
    }

    #[test]
    fn arcs_wrap() {
        use std::f64::consts::PI;
        assert!(in_arc(0.0, -PI / 2.0, PI / 2.0));
        assert!(!in_arc(PI, -PI / 2.0, PI / 2.0));
        assert!(in_arc(PI, PI / 2.0, -PI / 2.0));
        assert!(in_arc(1.0, 0.0, 2.0 * PI));
    }

    #[test]
    fn runs_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let text = MINIMAL.replace(
            "[\"solver\"]",
            "[\"solver\", \"calibration\", \"coarea\", \"nesting\", \"curvature\", \"disjointness\"]",
        );
        let s = Scenario::parse(&text).unwrap();
        let a = execute(&s, None, &dir.path().join("a"), 3).unwrap();
        let b = execute(&s, None, &dir.path().join("b"), 3).unwrap();
        assert!(a.passed, "{:#?}", a.failures().collect::<Vec<_>>());
        assert_eq!(
            serde_json::to_string(&a.deterministic()).unwrap(),
            serde_json::to_string(&b.deterministic()).unwrap()
        );
        for f in ["u.csv", "x.csv", "leaves.json", "report.json", "solve_report.json"] {
            assert!(dir.path().join("a").join(f).exists(), "{f}");
        }
        let back: VerificationReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
