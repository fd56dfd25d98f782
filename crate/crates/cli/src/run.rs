use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dissipative_core::estimates::{check_lemma41, check_theorem41, fit_rate, SweepGrid, Verdict};
use dissipative_core::kernels::truncate_for;
use dissipative_core::linear::{solve_linear, SolveCertificate};
use dissipative_core::model::{Field, Grid};
use dissipative_core::nonlinear::{solve_nonlinear, IterationLog};
use dissipative_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{parse_kernel_kind, Command, RunConfig};
use crate::io::{read_field_csv, write_csv, write_csv_text, write_field_csv, write_json, Metadata};

/// How a run ended; mapped to the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    BoundViolation,
    NonConvergence,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::BoundViolation => 2,
            Self::NonConvergence => 3,
        }
    }
}

pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub meta: Metadata,
    pub quiet: bool,
}

impl RunContext {
    fn path(&self, prefix: &str, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{prefix}{suffix}"))
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

pub fn run(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome> {
    let prefix = cfg.prefix();
    match cfg.command {
        Command::KernelEval => kernel_eval(cfg, ctx, &prefix),
        Command::SolveLinear => linear(cfg, ctx, &prefix),
        Command::SolveNonlinear => nonlinear(cfg, ctx, &prefix),
        Command::SolveFd => fd(cfg, ctx, &prefix),
        Command::VerifyBounds => verify_bounds(cfg, ctx, &prefix),
        Command::RateFit => rate_fit(cfg, ctx, &prefix),
        Command::Compare => compare(cfg, ctx, &prefix),
    }
}

fn core<T>(r: dissipative_core::Result<T>) -> Result<T> {
    r.map_err(anyhow::Error::from)
}

#[derive(Serialize)]
struct ParamsOut {
    a: f64,
    c: f64,
    eps: f64,
}

fn params_out(cfg: &RunConfig) -> Result<ParamsOut> {
    let p = cfg.model_params()?;
    Ok(ParamsOut {
        a: p.a(),
        c: p.c(),
        eps: p.eps(),
    })
}

#[derive(Serialize)]
struct KernelReport {
    params: ParamsOut,
    kind: String,
    n_max: usize,
    tol: f64,
    tail_bound: f64,
    points: usize,
}

fn kernel_eval(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let k = cfg.kernel_section()?;
    let kind = parse_kernel_kind(&k.kind)?;
    let mut points = Vec::new();
    for &t in &k.t {
        for &xi in &k.xi {
            for &x in &k.x {
                points.push((x, xi, t));
            }
        }
    }
    if let Some(n) = k.random_points {
        let t_max = k.t_max.unwrap_or(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        for _ in 0..n {
            points.push((rng.gen_range(0.0..=PI), rng.gen_range(0.0..=PI), rng.gen_range(0.0..=t_max)));
        }
    }
    let mut t_nodes: Vec<f64> = points.iter().map(|p| p.2).collect();
    t_nodes.sort_by(|a, b| a.total_cmp(b));
    t_nodes.dedup();
    let series = core(truncate_for(kind, &params, &t_nodes, k.tol))?;
    let mut rows = Vec::with_capacity(points.len());
    for &(x, xi, t) in &points {
        let v = core(series.eval_certified(x, xi, t))?;
        rows.push(vec![x, xi, t, v.value, v.bound]);
    }
    write_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &["x", "xi", "t", "value", "tail_bound"], rows)?;
    let report = KernelReport {
        params: params_out(cfg)?,
        kind: kind.name().to_string(),
        n_max: series.n_max(),
        tol: k.tol,
        tail_bound: series.tail_bound(),
        points: points.len(),
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
    ctx.say(format!(
        "{}: {} points, n_max = {}, tail bound {:.3e}",
        kind.name(),
        points.len(),
        series.n_max(),
        series.tail_bound()
    ));
    Ok(Outcome::Success)
}

fn grid(cfg: &RunConfig) -> Result<Arc<Grid<f64>>> {
    let g = cfg.grid_section()?;
    Ok(Arc::new(core(Grid::uniform(g.nx, g.t_end, g.nt))?))
}

#[derive(Serialize)]
struct LinearReport {
    params: ParamsOut,
    source: String,
    boundary: String,
    form: String,
    n_max: usize,
    certificate: SolveCertificate,
    sup_norm: f64,
}

fn linear(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let source = cfg.source_spec()?;
    let opts = cfg.linear_options()?;
    let boundary = cfg.boundary();
    let sol = core(solve_linear(boundary, &source, &params, grid(cfg)?, &opts))?;
    write_field_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &sol.field)?;
    let report = LinearReport {
        params: params_out(cfg)?,
        source: source.label().to_string(),
        boundary: format!("{boundary:?}").to_lowercase(),
        form: format!("{:?}", opts.form),
        n_max: sol.n_max,
        certificate: sol.certificate,
        sup_norm: sol.field.sup_norm(),
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
    ctx.say(format!(
        "solved with n_max = {}, certificate {:.3e}{}",
        sol.n_max,
        sol.certificate.total,
        if sol.certificate.truncation_rigorous { "" } else { " (fitted truncation)" }
    ));
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct NonlinearReport {
    params: ParamsOut,
    source: String,
    boundary: String,
    n_max: usize,
    iterations: usize,
    certificate: f64,
    pde_residual: Option<f64>,
    log: IterationLog,
    u0_log: IterationLog,
}

#[derive(Serialize)]
struct FailureReport {
    error: String,
    iterations: usize,
    last_residual: f64,
    history: Vec<f64>,
}

fn nonlinear(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let source = cfg.source_spec()?;
    let opts = cfg.linear_options()?;
    let picard = cfg.picard_config()?;
    let boundary = cfg.boundary();
    let sol = match solve_nonlinear(boundary, &source, &params, grid(cfg)?, &opts, &picard) {
        Ok(s) => s,
        Err(e) => {
            let Error::NonConvergence {
                iterations,
                last_residual,
                history,
            } = &e
            else {
                return Err(e.into());
            };
            let report = FailureReport {
                error: e.to_string(),
                iterations: *iterations,
                last_residual: *last_residual,
                history: history.clone(),
            };
            write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
            eprintln!("error: {e}");
            return Ok(Outcome::NonConvergence);
        }
    };
    write_field_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &sol.u_eps)?;
    write_field_csv(&ctx.path(prefix, "_u0.csv"), &ctx.meta, &sol.u0)?;
    let report = NonlinearReport {
        params: params_out(cfg)?,
        source: source.label().to_string(),
        boundary: format!("{boundary:?}").to_lowercase(),
        n_max: sol.n_max,
        iterations: sol.iterations(),
        certificate: sol.certificate,
        pde_residual: sol.pde_residual,
        log: sol.log.clone(),
        u0_log: sol.u0_log.clone(),
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
    ctx.say(format!(
        "converged in {} iterations, n_max = {}, certificate {:.3e}",
        sol.iterations(),
        sol.n_max,
        sol.certificate
    ));
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct FdReport {
    params: ParamsOut,
    source: String,
    nx: usize,
    dt: f64,
    scheme: String,
    boundary: String,
    rk4_stability_bound: f64,
    final_energy: f64,
}

fn fd(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let source = cfg.source_spec()?;
    let fd_cfg = cfg.fd_config()?;
    let sol = core(dissipative_core::oracle::solve_fd(&source, &params, &fd_cfg, cfg.fd_horizon()?))?;
    write_field_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &sol.field)?;
    let energy_rows = sol.field.grid().t().iter().zip(&sol.energy).map(|(&t, &e)| vec![t, e]);
    write_csv(&ctx.path(prefix, "_energy.csv"), &ctx.meta, &["t", "energy"], energy_rows)?;
    let report = FdReport {
        params: params_out(cfg)?,
        source: source.label().to_string(),
        nx: fd_cfg.nx,
        dt: sol.field.grid().dt(),
        scheme: format!("{:?}", fd_cfg.scheme),
        boundary: format!("{:?}", fd_cfg.bc),
        rk4_stability_bound: sol.rk4_stability_bound,
        final_energy: sol.energy.last().copied().unwrap_or(0.0),
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
    ctx.say(format!(
        "FD solve on {} x nodes, {} steps",
        sol.field.grid().nx(),
        sol.field.grid().nt() - 1
    ));
    Ok(Outcome::Success)
}

type Points = Vec<(f64, f64)>;

/// Diagonal sweep plus seeded `(x, xi)` spot checks.
fn sweep(cfg: &RunConfig, seed: u64) -> Result<(SweepGrid<f64>, Points)> {
    let b = cfg.bounds_section()?;
    let diag = core(SweepGrid::diagonal(b.nx, b.nt, b.t_end))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spots: Vec<(f64, f64)> = (0..b.spot_checks.unwrap_or(0))
        .map(|_| (rng.gen_range(0.0..=PI), rng.gen_range(0.0..=PI)))
        .collect();
    let mut points = diag.points().to_vec();
    points.extend(&spots);
    Ok((core(SweepGrid::new(points, diag.times().to_vec()))?, spots))
}

#[derive(Serialize)]
struct BoundsOut<'a> {
    params: ParamsOut,
    eps: &'a [f64],
    inequalities: &'static str,
    spot_checks: Vec<(f64, f64)>,
    #[serde(flatten)]
    report: &'a dissipative_core::estimates::BoundReport,
}

fn verify_bounds(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let b = cfg.bounds_section()?;
    let (grid, spots) = sweep(cfg, ctx.seed)?;
    let theorem = b.theorem.unwrap_or(false);
    let report = if theorem {
        core(check_theorem41(&params, b.k, &grid, &b.eps))?
    } else {
        core(check_lemma41(&params, b.k, &grid, &b.eps))?
    };
    write_csv_text(&ctx.path(prefix, ".csv"), &ctx.meta, &report.to_csv())?;
    let out = BoundsOut {
        params: params_out(cfg)?,
        eps: &b.eps,
        inequalities: if theorem { "theorem" } else { "lemma" },
        spot_checks: spots,
        report: &report,
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &out)?;
    let failures = report.failures().count();
    ctx.say(format!(
        "{} samples, {} out of hypothesis, {failures} certified violations, verdict {:?}",
        report.samples.len(),
        report.out_of_hypothesis,
        report.verdict.overall
    ));
    Ok(if report.verdict.overall == Verdict::Fail {
        Outcome::BoundViolation
    } else {
        Outcome::Success
    })
}

#[derive(Serialize)]
struct RateOut<'a> {
    params: ParamsOut,
    k: f64,
    #[serde(flatten)]
    fit: &'a dissipative_core::estimates::RateFit,
}

fn rate_fit(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let params = cfg.model_params()?;
    let b = cfg.bounds_section()?;
    let (grid, _) = sweep(cfg, ctx.seed)?;
    let fit = core(fit_rate(&params, &b.eps, &grid))?;
    let rows = fit.points.iter().map(|p| vec![p.eps, p.sup_measured, p.certificate]);
    write_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &["eps", "sup_measured", "certificate"], rows)?;
    write_json(
        &ctx.path(prefix, ".json"),
        &ctx.meta,
        &RateOut {
            params: params_out(cfg)?,
            k: b.k,
            fit: &fit,
        },
    )?;
    match &fit.fit {
        Some(f) => ctx.say(format!("slope {:.4} ({:?})", f.slope, fit.verdict)),
        None => ctx.say(format!("no fit ({:?})", fit.verdict)),
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct CompareReport {
    left: String,
    right: String,
    sup_diff: f64,
    at_x: f64,
    at_t: f64,
    tolerance: Option<f64>,
    within_tolerance: Option<bool>,
}

fn check_same_grid(left: &Field<f64>, right: &Field<f64>, lp: &Path, rp: &Path) -> Result<()> {
    let (gl, gr) = (left.grid(), right.grid());
    if gl.nx() != gr.nx() {
        bail!(
            "grid mismatch: {} has {} x nodes, {} has {}",
            lp.display(),
            gl.nx(),
            rp.display(),
            gr.nx()
        );
    }
    if gl.nt() != gr.nt() {
        bail!(
            "grid mismatch: {} has {} time nodes, {} has {}",
            lp.display(),
            gl.nt(),
            rp.display(),
            gr.nt()
        );
    }
    if let Some(i) = (0..gl.nx()).find(|&i| (gl.x()[i] - gr.x()[i]).abs() > 1e-9) {
        bail!("grid mismatch: x node {i} is {} vs {}", gl.x()[i], gr.x()[i]);
    }
    if (gl.dt() - gr.dt()).abs() > 1e-9 * gl.dt() {
        bail!("grid mismatch: time step {} vs {}", gl.dt(), gr.dt());
    }
    Ok(())
}

fn compare(cfg: &RunConfig, ctx: &RunContext, prefix: &str) -> Result<Outcome> {
    let c = cfg.compare_section()?;
    let left = read_field_csv(&c.left).with_context(|| format!("reading {}", c.left.display()))?;
    let right = read_field_csv(&c.right).with_context(|| format!("reading {}", c.right.display()))?;
    check_same_grid(&left, &right, &c.left, &c.right)?;
    let grid = left.grid().clone();
    let diff_values: Vec<f64> = left.values().iter().zip(right.values()).map(|(a, b)| a - b).collect();
    let (mut worst, mut at) = (0.0_f64, 0usize);
    for (i, d) in diff_values.iter().enumerate() {
        if d.abs() > worst {
            worst = d.abs();
            at = i;
        }
    }
    let nx = grid.nx();
    let diff = core(Field::new(grid.clone(), diff_values, "difference"))?;
    write_field_csv(&ctx.path(prefix, ".csv"), &ctx.meta, &diff)?;
    let within = c.tolerance.map(|tol| worst <= tol);
    let report = CompareReport {
        left: c.left.display().to_string(),
        right: c.right.display().to_string(),
        sup_diff: worst,
        at_x: grid.x()[at % nx],
        at_t: grid.t()[at / nx],
        tolerance: c.tolerance,
        within_tolerance: within,
    };
    write_json(&ctx.path(prefix, ".json"), &ctx.meta, &report)?;
    ctx.say(format!(
        "sup |left - right| = {worst:.3e} at x = {:.4}, t = {:.4}",
        report.at_x, report.at_t
    ));
    Ok(if within == Some(false) {
        Outcome::BoundViolation
    } else {
        Outcome::Success
    })
}
