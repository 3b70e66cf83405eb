use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use lamina::domain::{div, edge_inner, grad, node_inner, DomainConfig, EdgeField, MetricDomain, NodeField};
use lamina::expr::cantor;
use lamina::family::{run_convergence, ConvergenceReport, ConvergenceScenario};
use lamina::flowbox::{assemble_lamination, FlowBox, FlowBoxOptions, Lamination};
use lamina::geometry::hausdorff;
use lamina::gorny::{decompose_profile, GornyOptions, Part};
use lamina::hyperbolic::PoincareGeodesic;
use lamina::io::csv::read_node_field;
use lamina::io::mincut::{exhaustive_cut, mincut_oracle, per_threshold_sum};
use lamina::lamination::{
    check_disjointness, check_nesting, curvature_tolerance, dedup_leaves, default_window, extract_leaves,
    local_minimality_test, select_thresholds, Leaf,
};
use lamina::plot::load_leaves;
use lamina::scenario::{run_scenario, ProblemConfig, RunOptions, VerificationReport};
use lamina::solver::{energy, DirichletProblem};
use lamina::transverse::{coarea_check, TransverseProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type Profile<'a> = (&'a str, &'a dyn Fn(f64) -> f64, [f64; 3]);

const SOLVED: [&str; 4] = ["chord", "poincare", "linear", "constant"];
const ALL: [&str; 5] = ["chord", "poincare", "linear", "constant", "cantor"];

struct Run {
    report: VerificationReport,
    out: PathBuf,
    cfg: ProblemConfig,
    dom: Arc<MetricDomain>,
}

impl Run {
    fn u(&self) -> NodeField {
        read_node_field(&self.out.join("u.csv"), &self.dom).unwrap()
    }

    fn leaves(&self) -> Vec<Leaf> {
        load_leaves(&self.out.join("leaves.json")).unwrap()
    }

    fn measured(&self, name: &str) -> Result<f64, String> {
        self.report
            .check(name)
            .and_then(|c| c.measured)
            .ok_or_else(|| format!("{}: no measured value for {name}", self.report.scenario))
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn out_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn runs() -> &'static HashMap<&'static str, Run> {
    static RUNS: OnceLock<HashMap<&'static str, Run>> = OnceLock::new();
    RUNS.get_or_init(|| {
        std::thread::scope(|s| {
            let handles: Vec<_> = ALL
                .iter()
                .map(|&name| {
                    s.spawn(move || {
                        let path = scenarios().join(format!("{name}.json"));
                        let out = out_root().join(name);
                        let report = run_scenario(
                            &path,
                            &RunOptions {
                                out_dir: Some(out.clone()),
                                seed: None,
                            },
                        )
                        .unwrap();
                        let cfg = ProblemConfig::load(&path).unwrap();
                        let dom = Arc::new(cfg.build_domain(Some(&scenarios())).unwrap());
                        (name, Run { report, out, cfg, dom })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chord_oracle() -> Outcome {
    let r = &runs()["chord"];
    let dom = &r.dom;
    let p = r.cfg.build_problem(dom.clone(), Some(&scenarios())).unwrap();
    let e = energy(&r.u(), &p).unwrap();
    let m = per_threshold_sum(&p, 64).unwrap();
    let rel = (e - m).abs() / m;
    ensure(rel <= 0.01, || format!("energy {e} vs min-cut {m}"))?;

    let chord: Vec<[f64; 2]> = (0..=400).map(|k| [0.0, -1.0 + k as f64 / 200.0]).collect();
    let leaves = r.leaves();
    ensure(!leaves.is_empty(), || "no leaves".into())?;
    let d = leaves
        .iter()
        .map(|l| hausdorff(&l.path(), &chord, dom.h / 4.0))
        .fold(0.0, f64::max);
    ensure(d <= 2.0 * dom.h, || format!("hausdorff {d} > 2h"))?;

    let solve: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(r.out.join("solve_report.json")).unwrap()).unwrap();
    let secs = solve["wall_time_s"].as_f64().unwrap();
    ensure(secs < 60.0, || format!("solve took {secs:.1}s"))?;
    Ok(format!("energy rel err {rel:.1e}, hausdorff {d:.4} (2h {:.4}), solve {secs:.1}s", 2.0 * dom.h))
}

fn calibration() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 1.0f64);
    for name in SOLVED {
        let r = &runs()[name];
        let sup = r.measured("calibration.sup_norm")?;
        let dv = r.measured("calibration.divergence")?;
        let pair = r.measured("calibration.pairing")?;
        ensure(sup <= 1e-3, || format!("{name}: sup(|X|-1)+ = {sup}"))?;
        ensure(dv <= 1e-3 / r.dom.h, || format!("{name}: |div X| = {dv}"))?;
        ensure(pair >= 0.99, || format!("{name}: pairing {pair}"))?;
        worst = (worst.0.max(sup), worst.1.max(dv * r.dom.h), worst.2.min(pair));
    }
    Ok(format!(
        "sup {:.1e}, h|div| {:.1e}, pairing {:.4} over {} scenarios",
        worst.0,
        worst.1,
        worst.2,
        SOLVED.len()
    ))
}

fn coarea() -> Outcome {
    let (mut tested, mut worst) = (0, 0.0f64);
    for name in ALL {
        let r = &runs()[name];
        let c = coarea_check(&r.u(), &r.dom, 256).unwrap();
        if c.total_variation <= 0.1 {
            continue;
        }
        ensure(c.relative_error <= 0.03, || format!("{name}: coarea error {}", c.relative_error))?;
        tested += 1;
        worst = worst.max(c.relative_error);
    }
    ensure(tested >= 4, || format!("only {tested} scenarios with variation"))?;
    Ok(format!("max rel err {worst:.1e} over {tested} scenarios, 256 thresholds"))
}

fn minimality() -> Outcome {
    let mut leaves_checked = 0;
    for name in ALL {
        let r = &runs()[name];
        let w = default_window(&r.dom);
        let tol = curvature_tolerance(r.dom.h, w);
        for l in r.leaves() {
            let k = l.with_curvature(&r.dom, w).sup_curvature;
            ensure(k <= tol, || format!("{name}: curvature {k} > {tol}"))?;
            leaves_checked += 1;
        }
    }
    let r = &runs()["poincare"];
    let mut tested = 0;
    for l in r.leaves() {
        let Ok(m) = local_minimality_test(&l, &r.dom, None, f64::INFINITY) else {
            continue;
        };
        tested += 1;
        ensure(m.leaf_length <= m.oracle_length + 3.0 * r.dom.h, || {
            format!("leaf {} vs oracle {}", m.leaf_length, m.oracle_length)
        })?;
    }
    ensure(tested > 0, || "no Poincare leaf tested".into())?;
    Ok(format!("{leaves_checked} leaves within curvature bound, {tested} Poincare leaves minimal"))
}

fn disjointness() -> Outcome {
    let mut pairs = 0;
    for name in ALL {
        let r = &runs()[name];
        let u = r.u();
        let ys = select_thresholds(&u, &r.dom, 32, &[]).unwrap();
        if ys.is_empty() {
            continue;
        }
        ensure(ys.len() >= 32, || format!("{name}: {} thresholds", ys.len()))?;
        let leaves = dedup_leaves(extract_leaves(&u, &ys, &r.dom, &Default::default()).unwrap(), 2.0 * r.dom.h);
        let d = check_disjointness(&leaves);
        ensure(d.crossings.is_empty(), || format!("{name}: {} crossings", d.crossings.len()))?;
        let n = check_nesting(&u, &ys, &r.dom);
        ensure(n.violations.is_empty(), || format!("{name}: {} nesting violations", n.violations.len()))?;
        pairs += n.pairs_checked;
    }
    Ok(format!("no crossings, {pairs} nested threshold pairs"))
}

fn check_boxes(atlas: &[FlowBox], dom: &MetricDomain, pairs: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64, usize), String> {
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let (mut lip, mut inv, mut used) = (0.0f64, 0.0f64, 0);
    for bx in atlas {
        let (a, b) = (bx.half_width, bx.half_height);
        for s in 0..pairs.div_ceil(atlas.len()) {
            let x = [rng.gen_range(-a..=a), rng.gen_range(-b..=b)];
            let y = if s % 2 == 0 {
                [rng.gen_range(-a..=a), rng.gen_range(-b..=b)]
            } else {
                let r = dom.h * rng.gen_range(0.01..1.0);
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [(x[0] + r * t.cos()).clamp(-a, a), (x[1] + r * t.sin()).clamp(-b, b)]
            };
            let (fx, fy) = (bx.chart(x[0], x[1]), bx.chart(y[0], y[1]));
            if !dom.contains(fx) || !dom.contains(fy) || x == y {
                continue;
            }
            let (d, df) = (dist(x, y), dist(fx, fy));
            lip = lip.max(df / d).max(if df > 0.0 { d / df } else { f64::INFINITY });
            let (xi, eta) = bx.inverse(fx).ok_or("chart point outside its own box")?;
            inv = inv.max(dist(bx.chart(xi, eta), fx));
            used += 1;
        }
    }
    Ok((lip, inv, used))
}

fn flow_boxes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1ab);
    let dom = MetricDomain::build(&DomainConfig::disk(128, 1.0, 1.0, "poincare"), None).unwrap();
    let mut leaves = Vec::new();
    for (k, th) in [0.3f64, 0.6, 0.9, 1.2].into_iter().enumerate() {
        for c in [0.0, std::f64::consts::PI] {
            let pts = PoincareGeodesic::from_endpoints(c - th, c + th).sample(1.0 - 3.0 * dom.h, dom.h);
            leaves.push(Leaf::synthetic(pts, k as f64).with_curvature(&dom, default_window(&dom)));
        }
    }
    let geo = assemble_lamination(leaves, &dom, &FlowBoxOptions::default()).unwrap();
    let cantor_run = &runs()["cantor"];
    let text = std::fs::read_to_string(cantor_run.out.join("lamination.json")).unwrap();
    let vertical: Lamination = serde_json::from_str(&text).unwrap();

    let mut parts = Vec::new();
    for (name, lam, dom) in [("geodesics", &geo, &dom), ("cantor", &vertical, &*cantor_run.dom)] {
        ensure(!lam.atlas.is_empty(), || format!("{name}: empty atlas"))?;
        let (lip, inv, used) = check_boxes(&lam.atlas, dom, 10_000, &mut rng)?;
        ensure(used >= 5_000, || format!("{name}: only {used} usable pairs"))?;
        ensure(lip <= 4.0, || format!("{name}: lipschitz {lip}"))?;
        ensure(inv <= dom.h, || format!("{name}: F(F^-1) error {inv}"))?;
        parts.push(format!("{name} {} boxes lip {lip:.3} inv {inv:.1e}", lam.atlas.len()));
    }
    Ok(parts.join("; "))
}

fn roundtrip() -> Outcome {
    let mut parts = Vec::new();
    for name in ["chord", "cantor"] {
        let r = &runs()[name];
        let rt = r.measured("roundtrip")?;
        let mass = r.measured("polar.mass")?;
        let angle = r.measured("polar.angle_deg")?;
        ensure(rt <= 0.02, || format!("{name}: roundtrip {rt}"))?;
        ensure(mass <= 0.02, || format!("{name}: polar mass {mass}"))?;
        ensure(angle <= 5.0, || format!("{name}: polar angle {angle}"))?;
        parts.push(format!("{name} rt {rt:.1e} mass {mass:.1e} angle {angle:.2}"));
    }
    Ok(parts.join("; "))
}

fn gorny() -> Outcome {
    let m = 6561;
    let labels: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let step = |k: f64| if k > 0.5 { 1.0 } else { 0.0 };
    let cases: [Profile; 4] = [
        ("ac", &|k| k, [1.0, 0.0, 0.0]),
        ("cantor", &|k| cantor(k, 12), [0.0, 1.0, 0.0]),
        ("jump", &step, [0.0, 0.0, 1.0]),
        ("mixture", &|k| 0.3 * k + 0.3 * cantor(k, 12) + 0.4 * step(k), [0.3, 0.3, 0.4]),
    ];
    let mut parts = Vec::new();
    for (name, f, want) in cases {
        let values: Vec<f64> = labels.iter().map(|&k| f(k)).collect();
        let tv: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let p = TransverseProfile::from_samples(labels.clone(), values.clone()).unwrap();
        let d = decompose_profile(&p, &GornyOptions::default()).unwrap();
        let rec = d.reconstruct();
        let err = rec.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-9, || format!("{name}: reconstruction {err}"))?;
        let sum: f64 = d.masses.iter().sum();
        ensure((sum - tv).abs() <= 0.02 * tv, || format!("{name}: masses {sum} vs variation {tv}"))?;
        let tol = if name == "mixture" { 0.05 } else { 0.0 };
        for part in [Part::Ac, Part::Cantor, Part::Jump] {
            let (got, w) = (d.masses[part.index()] / tv, want[part.index()]);
            if name == "mixture" {
                ensure((got - w).abs() <= tol, || format!("{name}: {} fraction {got}", part.name()))?;
            } else if w == 0.0 {
                ensure(got <= 0.02, || format!("{name}: foreign {} mass {got}", part.name()))?;
            }
        }
        let f = d.masses.map(|v| v / tv);
        parts.push(format!("{name} [{:.3} {:.3} {:.3}]", f[0], f[1], f[2]));
    }
    for name in ["chord", "cantor"] {
        let b = runs()[name].measured("decompose.mass_balance")?;
        ensure(b <= 0.02, || format!("{name}: variation additivity {b}"))?;
    }
    Ok(parts.join(", "))
}

fn convergence() -> Outcome {
    let mut reports: Vec<(String, ConvergenceScenario, ConvergenceReport)> = Vec::new();
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    for path in files {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        if v.get("family").is_none() {
            continue;
        }
        let sc = ConvergenceScenario::load(&path).unwrap();
        let out = out_root().join(&sc.name);
        let rep = run_convergence(&sc, path.parent(), None, None, Some(&out)).unwrap();
        ensure(rep.verification.passed, || format!("{}: verdicts failed", sc.name))?;
        reports.push((sc.name.clone(), sc, rep));
    }
    ensure(reports.len() >= 5, || format!("only {} families", reports.len()))?;

    let (mut chains, mut equiv) = (0, 0);
    for (name, sc, rep) in &reports {
        let m = &rep.modes;
        let converges = m.vague.as_ref().is_some_and(|v| v.converges);
        if converges {
            if let Some(t) = &m.thurston {
                ensure(t.passed, || format!("{name}: vague without Thurston"))?;
            }
            if let Some(x) = &m.maximality {
                ensure(x.maximal && x.violations.is_empty(), || format!("{name}: support not contained"))?;
            }
            if m.thurston.is_some() && m.maximality.is_some() {
                chains += 1;
            }
        }
        if let Some(f) = &m.flowbox {
            for (i, &theta) in f.thetas.iter().enumerate() {
                let bound = 8f64.powf(theta);
                ensure(f.bounds[i] <= bound + 1e-12, || format!("{name}: bound {}", f.bounds[i]))?;
                for t in &f.traces {
                    let c = t.holder_constant[i].iter().copied().fold(0.0, f64::max);
                    ensure(c <= bound, || format!("{name}: Holder constant {c} at theta {theta}"))?;
                }
            }
        }
        if let Some(e) = &m.equivalence {
            ensure(e.agree, || format!("{name}: current and chart convergence disagree"))?;
            equiv += 1;
        }
        if name == "mass_escape" {
            let v = m.vague.as_ref().ok_or("mass_escape: no vague report")?;
            ensure(v.converges && v.strict_lsc, || "mass_escape: no strict mass drop".into())?;
            let dom = MetricDomain::build(&sc.domain, Some(&scenarios())).unwrap();
            let (_, lim) = sc.build(&dom, Some(&scenarios())).unwrap();
            ensure(lim.leaves.len() == 1, || format!("limit has {} leaves", lim.leaves.len()))?;
        }
    }
    ensure(equiv >= 3, || format!("only {equiv} equivalence families"))?;
    Ok(format!("{} families, {chains} full implication chains, {equiv} equivalence families", reports.len()))
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c1e);
    let mut instances = 0;
    for nx in 1..=3 {
        for ny in 1..=3 {
            for _ in 0..4 {
                let dom = Arc::new(MetricDomain::build(&DomainConfig::rect(nx, ny, 1.0 / 3.0), None).unwrap());
                let data: Vec<f64> = (0..dom.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let p = DirichletProblem::from_values(dom.clone(), data).unwrap();
                for _ in 0..5 {
                    let y = rng.gen_range(-1.0..1.0);
                    let (a, b) = (mincut_oracle(&p, y).unwrap().value(), exhaustive_cut(&p, y).unwrap().value());
                    ensure((a - b).abs() <= 1e-12 * b.abs().max(1.0), || {
                        format!("{nx}x{ny} at {y}: min-cut {a} vs enumeration {b}")
                    })?;
                    instances += 1;
                }
            }
        }
    }
    let domains = [
        DomainConfig::rect(17, 13, 0.1),
        DomainConfig::disk(32, 1.0, 1.0, "euclidean"),
        DomainConfig::disk(32, 1.0, 1.0, "poincare"),
    ];
    let mut worst = 0.0f64;
    for cfg in &domains {
        let dom = MetricDomain::build(cfg, None).unwrap();
        let n = dom.n_nodes();
        for _ in 0..100 {
            let mut u = NodeField::zeros(n);
            for k in dom.active_nodes() {
                u.values[k] = rng.gen_range(-1.0..1.0);
            }
            let mut x = EdgeField::zeros(n);
            for k in 0..n {
                x.ex[k] = rng.gen_range(-1.0..1.0);
                x.ey[k] = rng.gen_range(-1.0..1.0);
            }
            let du = grad(&u, &dom).unwrap();
            let lhs = edge_inner(&du, &x, &dom);
            let rhs = -node_inner(&u, &div(&x, &dom).unwrap(), &dom);
            let scale = edge_inner(&du, &du, &dom).sqrt() * edge_inner(&x, &x, &dom).sqrt();
            let rel = (lhs - rhs).abs() / scale;
            ensure(rel <= 1e-12, || format!("adjointness {rel:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("{instances} cut instances exact, adjointness {worst:.1e} on 300 pairs"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("chord oracle", chord_oracle),
        ("calibration", calibration),
        ("coarea", coarea),
        ("leaf minimality", minimality),
        ("disjointness", disjointness),
        ("flow boxes", flow_boxes),
        ("roundtrip", roundtrip),
        ("decomposition", gorny),
        ("convergence", convergence),
        ("oracle integrity", oracles),
    ];
    let t = Instant::now();
    let _ = runs();
    println!("scenarios ready in {:.1}s", t.elapsed().as_secs_f64());
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name:<17} PASS ({secs:.1}s) {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} {name:<17} FAIL ({secs:.1}s) {e}", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
