use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use ie_core::decomposition::{solve_dd_with, DdSolution, Scheme};
use ie_core::greens::KernelKind;
use ie_core::logsim::simulate_log;
use ie_core::operators::KernelCache;
use ie_core::sources::{background_e_on_grid, background_h, receiver_h};
use ie_core::Complex64;
use serde::Serialize;

use crate::config::{Artifact, Config, SolveSetup};

/// Whether every solve in the command converged.
pub type Converged = bool;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_residuals(w: &mut impl Write, sol: &DdSolution) -> Result<()> {
    writeln!(w, "sweep,subdomain,gmres_iters,inner_tol,full_residual")?;
    writeln!(w, "0,,0,,{:e}", sol.state.history[0])?;
    for rec in &sol.state.records {
        for (i, n) in rec.subdomain_iterations.iter().enumerate() {
            writeln!(w, "{},{},{},{:e},{:e}", rec.sweep, i, n, rec.inner_tol, rec.full_residual)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    sweep: usize,
    subdomain_iterations: Vec<usize>,
    inner_tol: f64,
    full_residual: f64,
}

#[derive(Serialize)]
struct ReceiverReport {
    id: String,
    position: [f64; 3],
    /// `[re, im]` per component.
    h: [[f64; 2]; 3],
    h_background: [[f64; 2]; 3],
}

#[derive(Serialize)]
struct SolveReport {
    command: &'static str,
    scheme: String,
    grid_dims: [usize; 3],
    spacing: [f64; 3],
    anomalous_cells: usize,
    subdomains: usize,
    outer_tol: f64,
    converged: bool,
    sweeps: usize,
    total_gmres_iterations: usize,
    residual_history: Vec<f64>,
    sweep_records: Vec<SweepReport>,
    receivers: Vec<ReceiverReport>,
    wall_time_s: f64,
}

fn pairs(v: [Complex64; 3]) -> [[f64; 2]; 3] {
    v.map(|c| [c.re, c.im])
}

fn sweep_reports(sol: &DdSolution) -> Vec<SweepReport> {
    sol.state
        .records
        .iter()
        .map(|r| SweepReport {
            sweep: r.sweep,
            subdomain_iterations: r.subdomain_iterations.clone(),
            inner_tol: r.inner_tol,
            full_residual: r.full_residual,
        })
        .collect()
}

fn run_scheme(setup: &SolveSetup, scheme: Scheme, cache: &KernelCache) -> Result<DdSolution> {
    let e0 = background_e_on_grid(&setup.source, setup.model.grid(), &setup.background)?;
    let plan = setup.plan.clone().with_scheme(scheme);
    Ok(solve_dd_with(&setup.model.contrast(), &plan, &e0, &setup.gmres, cache)?)
}

pub fn solve(cfg: &Config) -> Result<Converged> {
    let setup = cfg.solve_setup()?;
    let start = Instant::now();
    let cache = KernelCache::new(KernelKind::Electric, setup.model.grid().spacing(), setup.background);
    let sol = run_scheme(&setup, setup.plan.scheme, &cache)?;
    let contrast = setup.model.contrast();
    let h = receiver_h(&sol.field, &contrast, &setup.receivers, &setup.source, &setup.background)?;
    let points: Vec<[f64; 3]> = setup.receivers.iter().map(|r| r.position).collect();
    let h0 = background_h(&setup.source, &points, &setup.background)?;
    let wall = start.elapsed().as_secs_f64();
    if !sol.converged {
        log::error!(
            "{} did not reach {:e} in {} sweeps (residual {:e})",
            setup.plan.scheme,
            setup.plan.outer_tol,
            sol.sweeps(),
            sol.state.residual
        );
    }

    let out = &cfg.output;
    fs::create_dir_all(&out.directory).with_context(|| format!("cannot create {}", out.directory.display()))?;
    let dir = out.directory.as_path();
    if out.wants(Artifact::Fields) {
        sol.field.write_binary(dir.join("field.bin"))?;
        setup.model.write_binary(dir.join("model.bin"))?;
    }
    if out.wants(Artifact::Logs) {
        let mut w = create(dir, "receivers.csv")?;
        writeln!(w, "receiver,x,y,z,component,real,imag,magnitude,background_real,background_imag")?;
        for ((rx, v), v0) in setup.receivers.iter().zip(&h).zip(&h0) {
            for c in 0..3 {
                writeln!(
                    w,
                    "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    rx.id,
                    rx.position[0],
                    rx.position[1],
                    rx.position[2],
                    ["x", "y", "z"][c],
                    v[c].re,
                    v[c].im,
                    v[c].norm(),
                    v0[c].re,
                    v0[c].im
                )?;
            }
        }
        w.flush()?;
        let mut w = create(dir, "residuals.csv")?;
        write_residuals(&mut w, &sol)?;
        w.flush()?;
    }
    if out.wants(Artifact::Report) {
        let report = SolveReport {
            command: "solve",
            scheme: setup.plan.scheme.to_string(),
            grid_dims: setup.model.grid().dims(),
            spacing: setup.model.grid().spacing(),
            anomalous_cells: contrast.mask.count(),
            subdomains: setup.plan.boxes.len(),
            outer_tol: setup.plan.outer_tol,
            converged: sol.converged,
            sweeps: sol.sweeps(),
            total_gmres_iterations: sol.total_gmres_iterations(),
            residual_history: sol.state.history.clone(),
            sweep_records: sweep_reports(&sol),
            receivers: setup
                .receivers
                .iter()
                .zip(&h)
                .zip(&h0)
                .map(|((r, v), v0)| ReceiverReport {
                    id: r.id.clone(),
                    position: r.position,
                    h: pairs(*v),
                    h_background: pairs(*v0),
                })
                .collect(),
            wall_time_s: wall,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(sol.converged)
}

#[derive(Serialize)]
struct CompareRow {
    scheme: String,
    /// `adaptive` or the fixed tolerance.
    target_inner_tol: String,
    total_gmres_iterations: Option<usize>,
    outer_iterations: Option<usize>,
    final_residual: Option<f64>,
    status: String,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct CompareReport {
    command: &'static str,
    grid_dims: [usize; 3],
    anomalous_cells: usize,
    subdomains: usize,
    outer_tol: f64,
    rows: Vec<CompareRow>,
}

pub fn compare(cfg: &Config) -> Result<Converged> {
    let schemes = cfg.compare_schemes()?;
    let setup = cfg.solve_setup()?;
    if schemes.contains(&Scheme::FullDomain) {
        anyhow::ensure!(setup.plan.boxes.len() <= 1, "full_domain needs a single box");
    }
    let cache = KernelCache::new(KernelKind::Electric, setup.model.grid().spacing(), setup.background);
    let mut rows = Vec::new();
    let mut solutions = Vec::new();
    for &scheme in &schemes {
        let start = Instant::now();
        let result = run_scheme(&setup, scheme, &cache);
        let wall = start.elapsed().as_secs_f64();
        let target = match scheme {
            Scheme::GsFixed => format!("{:e}", setup.plan.inner_tol_fixed),
            Scheme::FullDomain => format!("{:e}", setup.plan.outer_tol),
            _ => "adaptive".to_string(),
        };
        let row = match &result {
            Ok(sol) => CompareRow {
                scheme: scheme.to_string(),
                target_inner_tol: target,
                total_gmres_iterations: Some(sol.total_gmres_iterations()),
                outer_iterations: Some(sol.sweeps()),
                final_residual: Some(sol.state.residual),
                status: if sol.converged { "converged" } else { "failed" }.to_string(),
                wall_time_s: wall,
            },
            Err(e) => {
                log::error!("{scheme}: {e:#}");
                CompareRow {
                    scheme: scheme.to_string(),
                    target_inner_tol: target,
                    total_gmres_iterations: None,
                    outer_iterations: None,
                    final_residual: None,
                    status: "failed".to_string(),
                    wall_time_s: wall,
                }
            }
        };
        rows.push(row);
        solutions.push(result.ok());
    }

    let out = &cfg.output;
    fs::create_dir_all(&out.directory).with_context(|| format!("cannot create {}", out.directory.display()))?;
    let dir = out.directory.as_path();
    if out.wants(Artifact::Logs) {
        let mut w = create(dir, "comparison.csv")?;
        writeln!(
            w,
            "scheme,target_inner_tol,total_gmres_iterations,outer_iterations,final_residual,status,wall_time_s"
        )?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.3}",
                r.scheme,
                r.target_inner_tol,
                opt(r.total_gmres_iterations.map(|v| v.to_string())),
                opt(r.outer_iterations.map(|v| v.to_string())),
                opt(r.final_residual.map(|v| format!("{v:e}"))),
                r.status,
                r.wall_time_s
            )?;
        }
        w.flush()?;
        for (scheme, sol) in schemes.iter().zip(&solutions) {
            if let Some(sol) = sol {
                let mut w = create(dir, &format!("residuals_{scheme}.csv"))?;
                write_residuals(&mut w, sol)?;
                w.flush()?;
            }
        }
    }
    let ok = rows.iter().all(|r| r.status == "converged");
    if out.wants(Artifact::Report) {
        let report = CompareReport {
            command: "compare",
            grid_dims: setup.model.grid().dims(),
            anomalous_cells: setup.model.contrast().mask.count(),
            subdomains: setup.plan.boxes.len(),
            outer_tol: setup.plan.outer_tol,
            rows,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(ok)
}

#[derive(Serialize)]
struct StationReport {
    index: usize,
    position: [f64; 3],
    sweeps: usize,
    gmres_iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct LogReport {
    command: &'static str,
    window_dims: [usize; 3],
    stations: Vec<StationReport>,
    failed_stations: usize,
    wall_time_s: f64,
}

pub fn logsim(cfg: &Config) -> Result<Converged> {
    let setup = cfg.log_setup()?;
    let start = Instant::now();
    let log = simulate_log(setup.global.as_ref(), &setup.trajectory, &setup.tool, &setup.window, &setup.cfg)?;
    let wall = start.elapsed().as_secs_f64();
    for st in &log.stations {
        if let Some(e) = &st.error {
            log::error!("station {} at {:?}: {e}", st.index, st.position);
        }
    }

    let out = &cfg.output;
    fs::create_dir_all(&out.directory).with_context(|| format!("cannot create {}", out.directory.display()))?;
    let dir = out.directory.as_path();
    if out.wants(Artifact::Logs) {
        let mut w = create(dir, "log.csv")?;
        log.write_csv(&mut w)?;
        w.flush()?;
    }
    if out.wants(Artifact::Report) {
        let report = LogReport {
            command: "logsim",
            window_dims: setup.window.dims()?,
            stations: log
                .stations
                .iter()
                .map(|s| StationReport {
                    index: s.index,
                    position: s.position,
                    sweeps: s.sweeps,
                    gmres_iterations: s.gmres_iterations,
                    residual: s.residual,
                    residual_history: s.residual_history.clone(),
                    error: s.error.clone(),
                })
                .collect(),
            failed_stations: log.failed_stations(),
            wall_time_s: wall,
        };
        write_json(dir, "report.json", &report)?;
    }
    Ok(log.failed_stations() == 0)
}
