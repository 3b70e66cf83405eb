use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lamina::domain::{DomainConfig, MetricDomain};
use lamina::error::{LaminaError, Result};
use lamina::family::{run_convergence, ConvergenceScenario, Mode};
use lamina::flowbox::{assemble_lamination, build_flow_box, FlowBoxOptions, Lamination};
use lamina::gorny::{decompose_lamination, glue_components, GornyOptions, PARTS};
use lamina::io::csv::{read_node_field, write_atomic, write_edge_field, write_node_field};
use lamina::io::mincut::{exhaustive_cut, mincut_oracle};
use lamina::lamination::{dedup_leaves, extract_leaves, select_thresholds, ExtractOptions};
use lamina::plot::{emit_plot_data, load_leaves};
use lamina::scenario::{measures_for, run_scenario, ProblemConfig, RunOptions, Status, VerificationReport, CURL_TOL};
use lamina::solver::solve;
use lamina::transverse::{ruelle_sullivan, TransverseMeasure};

/// Least-gradient solver and minimal lamination laboratory.
#[derive(Parser, Debug)]
#[command(name = "lamina", version, about)]
struct Cli {
    /// Seed for every randomized step
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent scenarios
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are written under
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct DomainArg {
    /// JSON with a domain config, at top level or under "domain"
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the least-gradient Dirichlet problem
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "u.csv")]
        out_u: PathBuf,
        #[arg(long, default_value = "x.csv")]
        out_x: PathBuf,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
    },
    /// Extract level-set leaves of a field
    Extract {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        u: PathBuf,
        #[arg(long, default_value_t = 32)]
        levels: usize,
        /// Also extract sublevel boundaries
        #[arg(long)]
        both_kinds: bool,
        #[arg(long, default_value = "leaves.json")]
        out: PathBuf,
    },
    /// Build one flow box, or the full atlas when --at is omitted
    Flowbox {
        #[command(flatten)]
        domain: DomainArg,
        /// Leaves or lamination JSON
        #[arg(long)]
        lamination: PathBuf,
        /// Base point "x,y"
        #[arg(long, value_parser = parse_point)]
        at: Option<[f64; 2]>,
        #[arg(long, default_value = "box.json")]
        out: PathBuf,
    },
    /// Transverse measures of every flow box
    Measure {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        lamination: PathBuf,
        #[arg(long, default_value = "measure.json")]
        out: PathBuf,
    },
    /// Ruelle-Sullivan current of a measured lamination
    Rs {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        lamination: PathBuf,
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, default_value = "t.csv")]
        out: PathBuf,
    },
    /// Split the transverse measures into ac, Cantor and jump parts
    Decompose {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        lamination: PathBuf,
        #[arg(long, default_value = "parts_")]
        out_prefix: String,
    },
    /// Run convergence modes on a lamination family
    Converge {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated: vague, thurston, maximality, flowbox, equivalence
        #[arg(long)]
        modes: Option<String>,
        #[arg(long, default_value = "conv.json")]
        report: PathBuf,
    },
    /// Run scenario files (or directories of them) and their checks
    Verify {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Exact minimum cut for one threshold
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threshold: f64,
        /// Enumerate all labellings instead (at most 20 nodes)
        #[arg(long)]
        exhaustive: bool,
        #[arg(long, default_value = "cut.json")]
        out: PathBuf,
    },
    /// Write CSV series for plotting (heatmap, leaves, cdf, traces)
    Plot {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        kind: String,
    },
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y] => Ok([x, y]),
        _ => Err(format!("expected x,y, got {s:?}")),
    }
}

struct Ctx {
    seed: u64,
    threads: usize,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn out(&self, p: &Path) -> Result<PathBuf> {
        let p = match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        };
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| LaminaError::io(parent, e))?;
        }
        Ok(p)
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_atomic(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| LaminaError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_domain(path: &Path) -> Result<MetricDomain> {
    let v: serde_json::Value = read_json(path)?;
    let (v, prefix) = match v.get("domain") {
        Some(d) => (d.clone(), "/domain"),
        None => (v, ""),
    };
    let cfg: DomainConfig = serde_json::from_value(v).map_err(|e| LaminaError::config(prefix, e.to_string()))?;
    MetricDomain::build(&cfg, path.parent()).map_err(|e| LaminaError::config(prefix, e.to_string()))
}

fn load_lamination(path: &Path, dom: &MetricDomain, opts: &FlowBoxOptions) -> Result<Lamination> {
    let v: serde_json::Value = read_json(path)?;
    if v.get("atlas").is_some() {
        return Ok(serde_json::from_value(v)?);
    }
    assemble_lamination(load_leaves(path)?, dom, opts)
}

fn report_line(r: &VerificationReport, secs: f64) -> String {
    let mut s = format!(
        "{} {} ({} checks, {:.2} s)",
        if r.passed { "PASS" } else { "FAIL" },
        r.scenario,
        r.checks.len(),
        secs
    );
    for c in r.checks.iter().filter(|c| c.status == Status::Fail) {
        s.push_str(&format!("\n    fail {}: measured {:?} tolerance {:?} {}", c.name, c.measured, c.tolerance, c.note));
    }
    s
}

fn scenario_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| LaminaError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn verify_one(path: &Path, ctx: &Ctx) -> Result<VerificationReport> {
    let v: serde_json::Value = read_json(path)?;
    let name = v.get("name").and_then(|n| n.as_str()).unwrap_or("scenario").to_string();
    let dir = ctx.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")).join(&name);
    if v.get("family").is_some() {
        let sc = ConvergenceScenario::load(path)?;
        let r = run_convergence(&sc, path.parent(), None, Some(ctx.seed), Some(&dir))?;
        write_json(&dir.join("conv.json"), &r)?;
        Ok(r.verification)
    } else {
        run_scenario(
            path,
            &RunOptions {
                out_dir: Some(dir),
                seed: Some(ctx.seed),
            },
        )
    }
}

type Slot = Option<(Result<VerificationReport>, f64)>;

fn verify(files: Vec<PathBuf>, ctx: &Ctx) -> Result<bool> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Slot>> = Mutex::new((0..files.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..ctx.threads.clamp(1, files.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= files.len() {
                    break;
                }
                let t = Instant::now();
                let r = verify_one(&files[k], ctx);
                results.lock().unwrap()[k] = Some((r, t.elapsed().as_secs_f64()));
            });
        }
    });
    let (mut all, mut first_err) = (true, None);
    for (f, r) in files.iter().zip(results.into_inner().unwrap()) {
        match r {
            Some((Ok(rep), secs)) => {
                all &= rep.passed;
                println!("{}", report_line(&rep, secs));
            }
            Some((Err(e), _)) => {
                println!("ERROR {}: {e}", f.display());
                first_err.get_or_insert(e);
            }
            None => all = false,
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(all),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        threads: cli
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Solve {
            config,
            out_u,
            out_x,
            report,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let dom = Arc::new(cfg.build_domain(config.parent())?);
            let problem = cfg.build_problem(dom.clone(), config.parent())?;
            let sol = solve(&problem, &cfg.solver)?;
            write_node_field(&ctx.out(&out_u)?, &dom, &sol.u)?;
            write_edge_field(&ctx.out(&out_x)?, &dom, &sol.calibration.x)?;
            write_json(&ctx.out(&report)?, &sol.report)?;
            println!(
                "solve: {} iterations, gap {:.3e} (tol {:.3e}), converged {}",
                sol.report.iterations, sol.report.final_gap, sol.report.gap_tol, sol.report.converged
            );
            Ok(sol.report.converged)
        }
        Command::Extract {
            domain,
            u,
            levels,
            both_kinds,
            out,
        } => {
            let dom = load_domain(&domain.config)?;
            let u = read_node_field(&u, &dom)?;
            let ys = select_thresholds(&u, &dom, levels, &[])?;
            let opts = ExtractOptions {
                both_kinds,
                ..ExtractOptions::default()
            };
            let leaves = dedup_leaves(extract_leaves(&u, &ys, &dom, &opts)?, 2.0 * dom.h);
            write_json(&ctx.out(&out)?, &leaves)?;
            println!("extract: {} leaves from {} thresholds", leaves.len(), ys.len());
            Ok(true)
        }
        Command::Flowbox {
            domain,
            lamination,
            at,
            out,
        } => {
            let dom = load_domain(&domain.config)?;
            let opts = FlowBoxOptions {
                seed: ctx.seed,
                ..FlowBoxOptions::default()
            };
            match at {
                Some(p) => {
                    let b = build_flow_box(&load_leaves(&lamination)?, p, &dom, &opts)?;
                    write_json(&ctx.out(&out)?, &b)?;
                    println!("flowbox: {} plaques, lip {:.3}", b.labels.len(), b.lip_max());
                }
                None => {
                    let lam = assemble_lamination(load_leaves(&lamination)?, &dom, &opts)?;
                    write_json(&ctx.out(&out)?, &lam)?;
                    println!("flowbox: {} boxes, {} uncovered cells", lam.atlas.len(), lam.uncovered.len());
                }
            }
            Ok(true)
        }
        Command::Measure {
            domain,
            u,
            lamination,
            out,
        } => {
            let dom = load_domain(&domain.config)?;
            let u = read_node_field(&u, &dom)?;
            let lam = load_lamination(&lamination, &dom, &FlowBoxOptions::default())?;
            let ms = measures_for(&u, &lam, &dom)?;
            write_json(&ctx.out(&out)?, &ms)?;
            println!("measure: {} boxes", ms.len());
            Ok(true)
        }
        Command::Rs {
            domain,
            lamination,
            measure,
            out,
        } => {
            let dom = load_domain(&domain.config)?;
            let lam = load_lamination(&lamination, &dom, &FlowBoxOptions::default())?;
            let ms: Vec<TransverseMeasure> = read_json(&measure)?;
            let t = ruelle_sullivan(&lam, &ms, &dom)?;
            write_edge_field(&ctx.out(&out)?, &dom, &t.values)?;
            println!("rs: mass {:.6}", t.total_mass());
            Ok(true)
        }
        Command::Decompose {
            domain,
            u,
            lamination,
            out_prefix,
        } => {
            let dom = load_domain(&domain.config)?;
            let u = read_node_field(&u, &dom)?;
            let lam = load_lamination(&lamination, &dom, &FlowBoxOptions::default())?;
            let decs = decompose_lamination(&u, &lam, &dom, &GornyOptions::default())?;
            let total: f64 = decs.iter().map(|d| d.total_mass()).sum();
            let fields = glue_components(&decs, &lam, &dom, 1e-3 * total.max(1e-300), CURL_TOL)?;
            let prefix = ctx.out(Path::new(&out_prefix))?;
            let dir = prefix.parent().map(Path::to_path_buf).unwrap_or_default();
            let mut masses = serde_json::Map::new();
            for p in PARTS {
                let name = format!("{}{}.csv", prefix.display(), p.name());
                write_node_field(Path::new(&name), &dom, &fields[p.index()])?;
                let m: f64 = decs.iter().map(|d| d.masses[p.index()]).sum();
                masses.insert(p.name().to_string(), m.into());
            }
            write_json(&dir.join("masses.json"), &masses)?;
            write_json(&dir.join("decomposition.json"), &decs)?;
            println!("decompose: {}", serde_json::Value::Object(masses));
            Ok(true)
        }
        Command::Converge { scenario, modes, report } => {
            let sc = ConvergenceScenario::load(&scenario)?;
            let modes = modes.as_deref().map(Mode::parse_list).transpose()?;
            let report_path = ctx.out(&report)?;
            let t = Instant::now();
            let r = run_convergence(&sc, scenario.parent(), modes.as_deref(), Some(ctx.seed), report_path.parent())?;
            write_json(&report_path, &r)?;
            println!("{}", report_line(&r.verification, t.elapsed().as_secs_f64()));
            Ok(r.verification.passed)
        }
        Command::Verify { scenarios } => verify(scenario_files(&scenarios)?, &ctx),
        Command::Oracle {
            config,
            threshold,
            exhaustive,
            out,
        } => {
            let cfg = ProblemConfig::load(&config)?;
            let dom = Arc::new(cfg.build_domain(config.parent())?);
            let problem = cfg.build_problem(dom, config.parent())?;
            let cut = if exhaustive {
                exhaustive_cut(&problem, threshold)?
            } else {
                mincut_oracle(&problem, threshold)?
            };
            #[derive(Serialize)]
            struct CutFile {
                threshold: f64,
                perimeter: f64,
                boundary_term: f64,
                value: f64,
                inside: Vec<usize>,
            }
            let inside: Vec<usize> = (0..cut.inside.len()).filter(|&n| cut.inside[n]).collect();
            write_json(
                &ctx.out(&out)?,
                &CutFile {
                    threshold,
                    perimeter: cut.perimeter,
                    boundary_term: cut.boundary_term,
                    value: cut.value(),
                    inside,
                },
            )?;
            println!("oracle: perimeter {:.6}, boundary term {:.6}", cut.perimeter, cut.boundary_term);
            Ok(true)
        }
        Command::Plot { artifact, kind } => {
            let dir = ctx.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            for p in emit_plot_data(&artifact, &kind, &dir)? {
                println!("plot: wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
