mod config;
mod output;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use backflow_core::current::{self, crossings, current_trace, linspace, window_integral};
use backflow_core::extremal::{
    self, backflow_infimum, global_minimum, massless_estimates, minimize_alpha, AlphaSearch, GlobalSearch,
};
use backflow_core::line::{line_infimum, line_min_eig, LineParams, PANEL_ORDER};
use backflow_core::search::open_grid;
use backflow_core::two_mode;
use backflow_core::{Error, RingParams};
use clap::Parser;
use serde_json::{json, Value};

use config::{Cli, Command, FileConfig, Overlay, RunSettings};
use output::{num, opt, Artifacts, Cache, ResultRecord, Table, SCHEMA_VERSION};

struct Computed {
    outputs: Value,
    diagnostics: Value,
    tables: Vec<Table>,
}

type Job = Box<dyn FnOnce(&RunSettings) -> Result<Computed>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", json!({ "error": msg.trim_end(), "kind": "input", "exit_code": 2 }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(&summary).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", json!({ "error": format!("{e:#}"), "kind": kind, "exit_code": code }));
            ExitCode::from(code)
        }
    }
}

/// 2 for bad input, 3 for numerical failure, 1 for anything else (I/O).
fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<Error>() {
            return if core.is_input_error() { (2, "input") } else { (3, "numerical") };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return (2, "input");
        }
    }
    (1, "io")
}

fn run(cli: Cli) -> Result<Vec<u8>> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path).map_err(|e| e.context(Error::InvalidArgument("unreadable config file".into())))?,
        None => FileConfig::default(),
    };
    let settings = RunSettings::resolve(&cli.global.clone().overlay(file.global.clone()))?;
    configure_workers(settings.workers)?;

    let name = cli.command.name();
    let (inputs, job) = plan(cli.command, &file)?;
    let inputs = json!({ "command": inputs, "profile": settings.profile, "schedule": settings.schedule });
    let hash = output::config_hash(name, &inputs);
    let cache = settings.cache_dir.clone().map(Cache::new);

    if let Some(hit) = cache.as_ref().and_then(|c| c.load(&hash)) {
        log::info!("cache hit {hash}");
        hit.write_to(&settings.out)?;
        return Ok(hit.summary);
    }

    let start = Instant::now();
    let computed = job(&settings)?;
    let mut diagnostics = computed.diagnostics;
    if let Value::Object(m) = &mut diagnostics {
        m.insert("elapsed_ms".into(), json!(start.elapsed().as_millis() as u64));
        m.insert("workers".into(), json!(backflow_core::par::workers()));
        if let Some(seed) = settings.seed {
            m.insert("seed".into(), json!(seed));
        }
    }
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        code_version: extremal::CODE_VERSION.to_string(),
        command: name.to_string(),
        config_hash: hash.clone(),
        inputs,
        outputs: computed.outputs,
        diagnostics,
        artifacts: Vec::new(),
    };
    let artifacts = Artifacts::build(record, &computed.tables)?;
    artifacts.write_to(&settings.out)?;
    if let Some(c) = &cache {
        if let Err(e) = c.store(&hash, &artifacts) {
            log::warn!("could not store cache entry: {e:#}");
        }
    }
    Ok(artifacts.summary)
}

#[cfg(feature = "parallel")]
fn configure_workers(workers: Option<usize>) -> Result<()> {
    use anyhow::Context;
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_workers(workers: Option<usize>) -> Result<()> {
    if workers.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; --workers is ignored");
    }
    Ok(())
}

fn params(chi: f64, beta: f64, alpha_over_pi: f64) -> Result<RingParams> {
    Ok(RingParams::from_alpha_over_pi(chi, beta, alpha_over_pi)?)
}

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg.to_string()).into())
    }
}

/// Resolves defaults, validates every input and returns the canonical inputs
/// together with the deferred computation.
fn plan(command: Command, file: &FileConfig) -> Result<(Value, Job)> {
    match command {
        Command::TwoMode(a) => {
            let a = a.overlay(file.two_mode.clone());
            let chi = a.chi.unwrap_or(0.05);
            let betas = a.beta.unwrap_or_else(|| vec![0.0, -0.025, -0.05, -0.075]);
            let step = a.alpha_step.unwrap_or(two_mode::ALPHA_STEP);
            let max = a.alpha_max.unwrap_or(two_mode::ALPHA_MAX);
            let (l1, l2) = (a.l1.unwrap_or(0), a.l2.unwrap_or(1));
            need(!betas.is_empty(), "no beta values")?;
            need(step > 0.0 && max >= step, "alpha grid needs 0 < step <= max")?;
            need(0 <= l1 && l1 < l2, "two-mode indices need 0 <= l1 < l2")?;
            for &b in &betas {
                params(chi, b, step)?;
            }
            if let Some(x) = a.alpha_over_pi {
                params(chi, betas[0], x)?;
            }
            let inputs = json!({ "chi": chi, "beta": betas, "alpha_over_pi": a.alpha_over_pi,
                                 "alpha_step": step, "alpha_max": max, "l1": l1, "l2": l2 });
            let job: Job = Box::new(move |_| {
                let grid = open_grid(step, max);
                let mut table = Table::new("fig1.csv", &["alpha_over_pi", "beta", "chi", "p_min"]);
                let mut optima = Vec::new();
                for &b in &betas {
                    let curve = two_mode::alpha_curve(chi, b, l1, l2, &grid)?;
                    for (x, v) in grid.iter().zip(&curve) {
                        table.push(vec![num(*x), num(b), num(chi), num(*v)]);
                    }
                    let o = two_mode::optimize_alpha(chi, b, l1, l2)?;
                    optima.push(json!({ "beta": b, "alpha_over_pi": o.alpha_over_pi, "p_min": o.p_min }));
                }
                let p_min = match a.alpha_over_pi {
                    Some(x) => {
                        let p = params(chi, betas[0], x)?;
                        Some(two_mode::two_mode_min(&p, p.first_mode() + l1, p.first_mode() + l2)?)
                    }
                    None => None,
                };
                Ok(Computed {
                    outputs: json!({ "p_min": p_min, "optima": optima }),
                    diagnostics: json!({ "grid_points": grid.len() }),
                    tables: vec![table],
                })
            });
            Ok((inputs, job))
        }
        Command::Infimum(a) => {
            let a = a.overlay(file.infimum.clone());
            let chi = a.chi.unwrap_or(0.73);
            let beta = a.beta.unwrap_or(0.0);
            let x = a.alpha_over_pi.unwrap_or(0.36252);
            let optimize = a.optimize_alpha.unwrap_or(false);
            params(chi, beta, x)?;
            let inputs = json!({ "chi": chi, "beta": beta, "alpha_over_pi": if optimize { Value::Null } else { json!(x) },
                                 "optimize_alpha": optimize });
            let job: Job = Box::new(move |s| {
                let (x, r, evals) = if optimize {
                    let o = minimize_alpha(chi, beta, &s.schedule, &AlphaSearch::default())?;
                    (o.alpha_over_pi, o.result, o.evaluations)
                } else {
                    (x, backflow_infimum(&params(chi, beta, x)?, &s.schedule)?, 1)
                };
                let mut samples = Table::new("infimum.csv", &["n_max", "lambda_min", "residual", "matvecs"]);
                for t in &r.samples {
                    samples.push(vec![t.n_max.to_string(), num(t.lambda_min), num(t.residual), t.matvecs.to_string()]);
                }
                let mut state = Table::new("state.csv", &["l", "c_l"]);
                let first = r.params.first_mode();
                for (k, c) in r.best_vector.iter().enumerate() {
                    state.push(vec![(first + k as i64).to_string(), num(*c)]);
                }
                Ok(Computed {
                    outputs: json!({ "chi": chi, "beta": beta, "alpha_over_pi": x, "p_value": r.p_value,
                                     "coeffs": r.extrapolation.coeffs }),
                    diagnostics: json!({ "ssr": r.extrapolation.ssr, "poor_fit": r.extrapolation.poor_fit,
                                         "escalated": r.escalated, "monotone": r.monotone, "evaluations": evals }),
                    tables: vec![samples, state],
                })
            });
            Ok((inputs, job))
        }
        Command::Scan(a) => {
            let a = a.overlay(file.scan.clone());
            let panel_chi = match a.panel {
                None => None,
                Some('a') => Some(0.05),
                Some('b') => Some(0.725),
                Some('c') => Some(1.0),
                Some('d') => Some(2.0),
                Some(p) => return Err(Error::InvalidArgument(format!("unknown panel {p:?} (expected a-d)")).into()),
            };
            let chis = a.chi.or(panel_chi.map(|c| vec![c])).ok_or_else(|| {
                Error::InvalidArgument("scan needs --chi or --panel".into())
            })?;
            let betas = a.beta.unwrap_or_else(|| vec![0.0, -0.25, -0.5, -0.75]);
            need(!chis.is_empty() && !betas.is_empty(), "empty chi or beta list")?;
            let scale = AlphaSearch::scale(chis.iter().cloned().fold(0.0, f64::max));
            let step = a.alpha_step.unwrap_or(0.01 * scale);
            let max = a.alpha_max.unwrap_or(1.5 * scale);
            need(step > 0.0 && max >= step, "alpha grid needs 0 < step <= max")?;
            let mut chis_sorted = chis.clone();
            chis_sorted.sort_by(f64::total_cmp);
            let mut betas_sorted = betas.clone();
            betas_sorted.sort_by(f64::total_cmp);
            for &c in &chis_sorted {
                for &b in &betas_sorted {
                    params(c, b, step)?;
                }
            }
            let file_name = match a.panel {
                Some(p) => format!("fig2_{p}.csv"),
                None => "scan.csv".to_string(),
            };
            let inputs = json!({ "chi": chis_sorted, "beta": betas_sorted, "alpha_step": step, "alpha_max": max,
                                 "file": file_name });
            let job: Job = Box::new(move |s| {
                let grid = open_grid(step, max);
                let surf = extremal::scan_surface(&chis_sorted, &betas_sorted, &grid, &s.schedule)?;
                let mut table = Table::new(file_name, &["chi", "beta", "alpha_over_pi", "p_value", "ssr", "error"]);
                for p in &surf.points {
                    table.push(vec![num(p.chi), num(p.beta), num(p.alpha_over_pi), opt(p.p_value), opt(p.ssr),
                                    p.error.clone().unwrap_or_default()]);
                }
                let mut minima = Vec::new();
                for (ic, &c) in surf.chi.iter().enumerate() {
                    for (ib, &b) in surf.beta.iter().enumerate() {
                        let best = (0..grid.len())
                            .filter_map(|ia| surf.get(ic, ib, ia).p_value.map(|v| (grid[ia], v)))
                            .min_by(|x, y| x.1.total_cmp(&y.1));
                        if let Some((x, v)) = best {
                            minima.push(json!({ "chi": c, "beta": b, "alpha_over_pi": x, "p_value": v }));
                        }
                    }
                }
                let failures = surf.points.iter().filter(|p| p.error.is_some()).count();
                Ok(Computed {
                    outputs: json!({ "grid_minima": minima }),
                    diagnostics: json!({ "points": surf.points.len(), "failures": failures,
                                         "surface_hash": surf.provenance.config_hash }),
                    tables: vec![table],
                })
            });
            Ok((inputs, job))
        }
        Command::GlobalMin(a) => {
            let a = a.overlay(file.global_min.clone());
            let (lo, hi, step) = (a.chi_min.unwrap_or(0.05), a.chi_max.unwrap_or(2.0), a.chi_step.unwrap_or(0.025));
            need(step > 0.0 && hi > lo, "chi grid needs chi_min < chi_max and a positive step")?;
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            let grid: Vec<f64> = (0..=n).map(|k| lo + step * k as f64).collect();
            need(grid.len() >= 3, "chi grid needs at least 3 points")?;
            for &c in &grid {
                params(c, 0.0, 0.1)?;
            }
            let inputs = json!({ "chi_min": lo, "chi_max": hi, "chi_step": step });
            let job: Job = Box::new(move |s| {
                let g = global_minimum(&grid, &s.schedule, &GlobalSearch::default())?;
                let mut table = Table::new("fig3.csv", &["chi", "alpha_over_pi", "p_value"]);
                for p in &g.curve {
                    table.push(vec![num(p.chi), num(p.alpha_over_pi), num(p.p_value)]);
                }
                Ok(Computed {
                    outputs: json!({ "chi": g.chi, "alpha_over_pi": g.alpha_over_pi, "beta": g.beta,
                                     "p_value": g.p_value, "beta_check": g.beta_check }),
                    diagnostics: json!({ "ssr": g.result.extrapolation.ssr, "curve_points": g.curve.len() }),
                    tables: vec![table],
                })
            });
            Ok((inputs, job))
        }
        Command::Massless(a) => {
            let a = a.overlay(file.massless.clone());
            let chis = a.chi.unwrap_or_else(|| extremal::MASSLESS_CHI.to_vec());
            need(!chis.is_empty(), "no chi values")?;
            for &c in &chis {
                params(c, 0.0, 0.1)?;
            }
            let inputs = json!({ "chi": chis });
            let job: Job = Box::new(move |s| {
                let rows = massless_estimates(&chis, &s.schedule, &AlphaSearch::default())?;
                let mut table = Table::new("table1.csv", &["chi", "alpha_over_pi", "p_value"]);
                for r in &rows {
                    table.push(vec![num(r.chi), num(r.alpha_over_pi), num(r.p_value)]);
                }
                Ok(Computed {
                    outputs: json!({ "rows": rows }),
                    diagnostics: json!({}),
                    tables: vec![table],
                })
            });
            Ok((inputs, job))
        }
        Command::Current(a) => {
            let a = a.overlay(file.current.clone());
            let chi = a.chi.unwrap_or(0.73);
            let beta = a.beta.unwrap_or(0.0);
            let x = a.alpha_over_pi.unwrap_or(0.36252);
            let points = a.points.unwrap_or(current::DEFAULT_POINTS);
            let zoom_points = a.zoom_points.unwrap_or(10_001);
            params(chi, beta, x)?;
            need(points >= 2 && zoom_points >= 2, "grids need at least 2 points")?;
            let inputs = json!({ "chi": chi, "beta": beta, "alpha_over_pi": x, "points": points,
                                 "zoom_points": zoom_points });
            let job: Job = Box::new(move |s| {
                let r = backflow_infimum(&params(chi, beta, x)?, &s.schedule)?;
                let full = current_trace(&r, &linspace(-current::T_LIMIT, current::T_LIMIT, points))?;
                let zoom = current_trace(&r, &current::zoom_grid(-0.5, 0.005, zoom_points))?;
                let integral = window_integral(&full).ok();
                let interior_max = full
                    .t_over_t
                    .iter()
                    .zip(&full.j_times_t)
                    .filter(|(t, _)| t.abs() < 0.499)
                    .map(|(_, j)| *j)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut tables = Vec::new();
                for (name, tr) in [("fig4a.csv", &full), ("fig4b.csv", &zoom)] {
                    let mut t = Table::new(name, &["t_over_T", "j_times_T"]);
                    for (tt, j) in tr.t_over_t.iter().zip(&tr.j_times_t) {
                        t.push(vec![num(*tt), num(*j)]);
                    }
                    tables.push(t);
                }
                Ok(Computed {
                    outputs: json!({ "p_value": r.p_value, "quadratic_form": full.quadratic_form,
                                     "window_integral": integral, "interior_max": interior_max,
                                     "zoom_crossings": crossings(&zoom) }),
                    diagnostics: json!({ "modes_used": full.modes_used, "coefficient_cutoff": full.cutoff,
                                         "n_max": r.best_vector.len() - 1, "ssr": r.extrapolation.ssr }),
                    tables,
                })
            });
            Ok((inputs, job))
        }
        Command::Line(a) => {
            let a = a.overlay(file.line.clone());
            let eps = a.eps.unwrap_or_else(|| vec![0.01]);
            let z_max = a.z_max.unwrap_or(20.0);
            let n_nodes = a.n_nodes.unwrap_or(400);
            let extrapolate = a.extrapolate.unwrap_or(false);
            need(!eps.is_empty(), "no eps values")?;
            for &e in &eps {
                LineParams::new(e, z_max, n_nodes)?;
            }
            let inputs = json!({ "eps": eps, "z_max": z_max, "n_nodes": n_nodes, "extrapolate": extrapolate });
            let job: Job = Box::new(move |_| {
                let mut table = Table::new(
                    "line.csv",
                    &["eps", "lambda_min", "nodes", "zmax", "node_change", "cutoff_change", "lambda_extrapolated"],
                );
                let mut rows = Vec::new();
                for &e in &eps {
                    let p = LineParams::new(e, z_max, n_nodes)?;
                    let r = line_min_eig(&p)?;
                    let ext = if extrapolate { Some(line_infimum(&p)?) } else { None };
                    let nodes = p.panels() * PANEL_ORDER;
                    table.push(vec![num(e), num(r.lambda_min), nodes.to_string(), num(z_max), num(r.node_change),
                                    num(r.cutoff_change), opt(ext.as_ref().map(|x| x.value))]);
                    rows.push(json!({ "eps": e, "lambda_min": r.lambda_min, "converged": r.converged(),
                                      "lambda_extrapolated": ext.map(|x| x.value) }));
                }
                Ok(Computed {
                    outputs: json!({ "rows": rows }),
                    diagnostics: json!({}),
                    tables: vec![table],
                })
            });
            Ok((inputs, job))
        }
    }
}
