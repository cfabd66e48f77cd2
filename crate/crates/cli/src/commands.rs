use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use spm_core::metrics::{convergence_order, OrderDirection};
use spm_core::problems::{benchmark_u0, REFERENCE_EDGE_LIMIT};
use spm_core::reference::{self_convergence_order, strang_run};
use spm_core::{benchmark_1d_with_reference, Method, ProblemSpec, ReferenceConfig, RunRecord, Solver, SolverConfig};

use crate::config::{particle_count, Resolved};
use crate::output::{ensure_dir, write_atomic};
use crate::{CompareArgs, ReferenceArgs};

/// Configure the global worker pool; returns `(threads, source)` for meta.txt.
fn setup_threads(r: &Resolved) -> Result<(usize, String)> {
    let (n, source) = match (r.threads, std::env::var("SPM_THREADS").ok()) {
        (Some(n), _) => (n, "--threads".to_string()),
        (None, Some(v)) => {
            let n: usize = v.trim().parse().with_context(|| format!("SPM_THREADS='{v}' is not a count"))?;
            (n, format!("SPM_THREADS={v}"))
        }
        (None, None) => (0, "default".to_string()),
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    Ok((rayon::current_num_threads(), source))
}

fn problem_name(r: &Resolved) -> &str {
    r.problem.as_deref().unwrap_or("benchmark1d")
}

/// The problem with a reference valid at `report_times`.
fn build_problem(r: &Resolved, report_times: &[f64]) -> Result<ProblemSpec> {
    let name = problem_name(r);
    if name == "benchmark1d" {
        if r.dim != 1 {
            bail!("benchmark1d is one-dimensional");
        }
        let cfg = ReferenceConfig::benchmark();
        return Ok(benchmark_1d_with_reference(&cfg, r.t_final, report_times)?);
    }
    Ok(ProblemSpec::by_name(name, r.dim)?)
}

fn report_times(tau: f64, t_final: f64, every: usize) -> Vec<f64> {
    let steps = (t_final / tau).round() as usize;
    let mut times: Vec<f64> = (1..=steps).filter(|s| s % every == 0).map(|s| s as f64 * tau).collect();
    if !steps.is_multiple_of(every) {
        times.push(t_final);
    }
    times
}

fn solver_config(
    r: &Resolved,
    method: Method,
    n0: usize,
    tau: f64,
    h: f64,
    seed: u64,
    times: Vec<f64>,
) -> SolverConfig {
    SolverConfig {
        n_a: r.na,
        method,
        chunk_size: r.chunk_size,
        audit_window: r.audit_window,
        report_times: times,
        ..SolverConfig::new(tau, h, r.t_final, n0, seed)
    }
}

fn single<T: Copy>(values: &[T], name: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("run takes a single value for --{name}, got {}", values.len()),
    }
}

fn write_meta(dir: &Path, invocation: &str, r: &Resolved, threads: (usize, String), extra: &str) -> Result<()> {
    let mut meta = String::new();
    writeln!(meta, "version = spm {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(meta, "invocation = {invocation}")?;
    writeln!(meta, "problem = {}", problem_name(r))?;
    writeln!(meta, "dim = {}", r.dim)?;
    writeln!(meta, "method = {}", r.method.name())?;
    writeln!(meta, "n0 = {:?}", r.n0)?;
    writeln!(meta, "tau = {:?}", r.tau)?;
    writeln!(meta, "h = {:?}", r.h)?;
    writeln!(meta, "T = {}", r.t_final)?;
    writeln!(meta, "na = {}", r.na)?;
    writeln!(meta, "seeds = {:?}", r.seeds)?;
    writeln!(meta, "chunk_size = {}", r.chunk_size)?;
    writeln!(meta, "report_every = {}", r.report_every)?;
    writeln!(meta, "audit_window = {},{}", r.audit_window.0, r.audit_window.1)?;
    writeln!(meta, "threads = {} ({})", threads.0, threads.1)?;
    meta.push_str(extra);
    write_atomic(&dir.join("meta.txt"), "", |w| w.write_all(meta.as_bytes()))
}

pub fn run(r: Resolved, invocation: &str) -> Result<()> {
    let threads = setup_threads(&r)?;
    let (n0, tau, h, seed) =
        (single(&r.n0, "n0")?, single(&r.tau, "tau")?, single(&r.h, "h")?, single(&r.seeds, "seed")?);
    let times = report_times(tau, r.t_final, r.report_every);
    let problem = build_problem(&r, &times)?;
    let cfg = solver_config(&r, r.method, n0, tau, h, seed, times);
    let record = Solver::run(problem, cfg)?;
    ensure_dir(&r.out)?;
    let comment = format!("{invocation}  seed={seed}");
    write_atomic(&r.out.join("run.csv"), &comment, |w| record.write_csv(w))?;
    if let Some(p) = &record.final_projection {
        write_atomic(&r.out.join("projection.csv"), &comment, |w| p.write_csv(w))?;
    } else {
        write_atomic(&r.out.join("reconstruction.csv"), &comment, |w| record.final_grid.write_csv(w))?;
    }
    let mut extra = String::new();
    writeln!(extra, "wall_ms = {:.3}", record.wall_ms())?;
    writeln!(extra, "final_count = {}", record.final_count)?;
    if let Some(e) = record.final_error() {
        writeln!(extra, "final_error = {e:e}")?;
        println!("E2({}) = {e:.6}", r.t_final);
    }
    write_meta(&r.out, invocation, &r, threads, &extra)
}

struct Entry {
    method: Method,
    n0: usize,
    tau: f64,
    h: f64,
    seed: u64,
}

struct Outcome {
    error: f64,
    wall_ms: f64,
}

fn run_entry(r: &Resolved, problem: &ProblemSpec, e: &Entry) -> Result<Outcome> {
    let cfg = solver_config(r, e.method, e.n0, e.tau, e.h, e.seed, vec![r.t_final]);
    let record: RunRecord = Solver::run(problem.clone(), cfg)?;
    let error = record.final_error().context("no reference available at T")?;
    Ok(Outcome { error, wall_ms: record.wall_ms() })
}

#[derive(Clone, Copy)]
enum Varying {
    N0,
    Tau,
    H,
}

pub fn convergence(r: Resolved, invocation: &str) -> Result<()> {
    let threads = setup_threads(&r)?;
    let varying: Vec<Varying> = [(Varying::N0, r.n0.len()), (Varying::Tau, r.tau.len()), (Varying::H, r.h.len())]
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(v, _)| v)
        .collect();
    let varying = match varying.as_slice() {
        [] => Varying::N0,
        [v] => *v,
        _ => bail!("exactly one of --n0, --tau, --h may list several values"),
    };
    let params: Vec<f64> = match varying {
        Varying::N0 => r.n0.iter().map(|&n| n as f64).collect(),
        Varying::Tau => r.tau.clone(),
        Varying::H => r.h.clone(),
    };
    let problem = build_problem(&r, &[r.t_final])?;
    let (method, n0, tau, h) = (r.method, r.n0[0], r.tau[0], r.h[0]);
    let entries: Vec<(usize, Entry)> = params
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| {
            r.seeds.iter().map(move |&seed| {
                let entry = match varying {
                    Varying::N0 => Entry { method, n0: p as usize, tau, h, seed },
                    Varying::Tau => Entry { method, n0, tau: p, h, seed },
                    Varying::H => Entry { method, n0, tau, h: p, seed },
                };
                (i, entry)
            })
        })
        .collect();
    let outcomes: Vec<Outcome> = entries.par_iter().map(|(_, e)| run_entry(&r, &problem, e)).collect::<Result<_>>()?;

    ensure_dir(&r.out)?;
    let comment = format!("{invocation}  seeds={:?}", r.seeds);
    write_atomic(&r.out.join("convergence.csv"), &comment, |w| {
        writeln!(w, "parameter,seed,error,wall_ms")?;
        for ((i, e), o) in entries.iter().zip(&outcomes) {
            writeln!(w, "{},{},{:e},{:.3}", params[*i], e.seed, o.error, o.wall_ms)?;
        }
        Ok(())
    })?;

    let means: Vec<(f64, f64)> = params
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let errs: Vec<f64> =
                entries.iter().zip(&outcomes).filter(|((j, _), _)| *j == i).map(|(_, o)| o.error).collect();
            (p, errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    let direction = match varying {
        Varying::N0 => OrderDirection::Increasing,
        _ => OrderDirection::Decreasing,
    };
    let orders = if means.len() >= 2 { convergence_order(&means, direction)? } else { Vec::new() };
    write_atomic(&r.out.join("orders.csv"), &comment, |w| {
        writeln!(w, "from,to,mean_error_from,mean_error_to,order")?;
        for (k, o) in orders.iter().enumerate() {
            writeln!(w, "{},{},{:e},{:e},{o:.4}", means[k].0, means[k + 1].0, means[k].1, means[k + 1].1)?;
        }
        Ok(())
    })?;
    for (p, e) in &means {
        println!("{p}\t{e:.6}");
    }
    for o in &orders {
        println!("order {o:.3}");
    }
    write_meta(&r.out, invocation, &r, threads, "")
}

pub fn compare(r: Resolved, args: &CompareArgs, invocation: &str) -> Result<()> {
    let threads = setup_threads(&r)?;
    let to_counts = |v: &[f64]| v.iter().map(|&n| particle_count(n)).collect::<Result<Vec<_>>>();
    let mut plan: Vec<(Method, usize)> = Vec::new();
    for n in to_counts(&args.spm_n0)? {
        plan.push((Method::BaselineSpm, n));
    }
    for n in to_counts(&args.bd_n0)? {
        plan.push((Method::BirthDeath, n));
    }
    if plan.is_empty() {
        plan = r.n0.iter().map(|&n| (r.method, n)).collect();
    }
    let problem = build_problem(&r, &[r.t_final])?;
    let (tau, h) = (single(&r.tau, "tau")?, single(&r.h, "h")?);
    // entries run one at a time so that wall times are comparable
    let mut rows = Vec::new();
    for &(method, n0) in &plan {
        for &seed in &r.seeds {
            let o = run_entry(&r, &problem, &Entry { method, n0, tau, h, seed })?;
            rows.push((method, n0, seed, o));
        }
    }
    ensure_dir(&r.out)?;
    let comment = format!("{invocation}  seeds={:?}", r.seeds);
    write_atomic(&r.out.join("efficiency.csv"), &comment, |w| {
        writeln!(w, "method,n0,seed,error,wall_ms")?;
        for (m, n0, seed, o) in &rows {
            writeln!(w, "{},{n0},{seed},{:e},{:.3}", m.name(), o.error, o.wall_ms)?;
        }
        Ok(())
    })?;
    for &(method, n0) in &plan {
        let sel: Vec<&Outcome> =
            rows.iter().filter(|(m, n, _, _)| *m == method && *n == n0).map(|(_, _, _, o)| o).collect();
        let k = sel.len() as f64;
        println!(
            "{}\tn0={n0}\tmean_error={:.6}\tmean_wall_ms={:.1}",
            method.name(),
            sel.iter().map(|o| o.error).sum::<f64>() / k,
            sel.iter().map(|o| o.wall_ms).sum::<f64>() / k
        );
    }
    write_meta(&r.out, invocation, &r, threads, "")
}

pub fn reference(r: Resolved, args: &ReferenceArgs, invocation: &str) -> Result<()> {
    if problem_name(&r) != "benchmark1d" {
        bail!("the reference solver covers benchmark1d only");
    }
    let threads = setup_threads(&r)?;
    let defaults = ReferenceConfig::benchmark();
    let cfg = ReferenceConfig {
        half_width: args.half_width.unwrap_or(defaults.half_width),
        n_modes: args.modes.unwrap_or(defaults.n_modes),
        tau: args.tau_ref.unwrap_or(defaults.tau),
        ..defaults
    };
    // snapshots at every whole time unit and at T
    let mut times: Vec<f64> = (1..).map(|k| k as f64).take_while(|&t| t < r.t_final - 1e-9).collect();
    times.push(r.t_final);
    let start = Instant::now();
    let table = strang_run(&cfg, benchmark_u0, r.t_final, &times)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let edge = table.edge_ratio();
    if edge > REFERENCE_EDGE_LIMIT {
        let msg = format!("reference touches the periodic boundary: edge ratio {edge:e} > {REFERENCE_EDGE_LIMIT:e}");
        if r.strict {
            bail!(msg);
        }
        eprintln!("warning: {msg}");
    }
    ensure_dir(&r.out)?;
    write_atomic(&r.out.join("reference.csv"), invocation, |w| table.write_csv(w))?;
    let mut extra = String::new();
    writeln!(extra, "half_width = {}", cfg.half_width)?;
    writeln!(extra, "modes = {}", cfg.n_modes)?;
    writeln!(extra, "tau_ref = {}", cfg.tau)?;
    writeln!(extra, "edge_ratio = {edge:e}")?;
    writeln!(extra, "wall_ms = {wall:.3}")?;
    if args.self_convergence {
        let order = self_convergence_order(&cfg, benchmark_u0, r.t_final)?;
        println!("self-convergence order: {order:.3}");
        writeln!(extra, "self_convergence_order = {order:.4}")?;
    }
    write_meta(&r.out, invocation, &r, threads, &extra)?;
    fs::metadata(r.out.join("reference.csv"))?;
    Ok(())
}
