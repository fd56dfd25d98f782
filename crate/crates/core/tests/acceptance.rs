//! End-to-end acceptance checks. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use dissipative_core::estimates::{
    approx_error_field, check_lemma41, check_theorem41, fit_power_law, fit_rate, horizon_spread, BoundConstants,
    SweepGrid, Verdict,
};
use dissipative_core::kernels::{h_n, regime_of, KernelKind, KernelSeries, ModeSpectrum, Regime};
use dissipative_core::linear::{solve_linear, BoundaryKind, LinearOptions, SolveForm};
use dissipative_core::model::{Grid, ModelParams, SourceSpec};
use dissipative_core::nonlinear::{solve_nonlinear, PicardConfig};
use dissipative_core::oracle::{solve_fd, FdBoundary, FdConfig, FdScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Taylor-series stepping for `y'' + p y' + q y = 0`, `y(0) = 0`, `y'(0) = 1`.
fn taylor_ode(p: f64, q: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let scale = p.abs().max(q.sqrt()).max(1.0);
    let steps = (t * scale / 0.25).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let (mut y, mut dy) = (0.0_f64, 1.0_f64);
    let order = 40;
    let mut a = vec![0.0; order + 2];
    for _ in 0..steps {
        a[0] = y;
        a[1] = dy;
        for k in 0..order {
            a[k + 2] = -(p * (k as f64 + 1.0) * a[k + 1] + q * a[k]) / ((k as f64 + 1.0) * (k as f64 + 2.0));
        }
        let (mut ny, mut ndy) = (0.0, 0.0);
        let mut hk = 1.0;
        for k in 0..=order + 1 {
            ny += a[k] * hk;
            if k < order + 1 {
                ndy += (k as f64 + 1.0) * a[k + 1] * hk;
            }
            hk *= h;
        }
        y = ny;
        dy = ndy;
    }
    y
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0_f64;
    let mut seen = [0usize; 3];
    for i in 0..50 {
        let a = rng.gen_range(0.05..1.5);
        let c = rng.gen_range(0.5..2.0);
        let (eps, n) = match i % 3 {
            0 => {
                let n = rng.gen_range(1..12usize);
                (rng.gen_range(0.0..0.02), n)
            }
            1 => {
                // resonant: a + eps n^2 / 2 = c n
                let n = rng.gen_range(1..8usize);
                let n = if c * n as f64 <= a { n + (a / c).ceil() as usize } else { n };
                (2.0 * (c * n as f64 - a) / (n * n) as f64, n)
            }
            _ => {
                let n = rng.gen_range(20..60usize);
                (rng.gen_range(0.1..0.5), n)
            }
        };
        let params = ModelParams::new(a, c, eps).unwrap();
        match regime_of(&params, n) {
            Regime::Trigonometric => seen[0] += 1,
            Regime::Resonant => seen[1] += 1,
            Regime::Hyperbolic => seen[2] += 1,
        }
        let t = rng.gen_range(0.0..10.0);
        let nf = n as f64;
        let oracle = taylor_ode(eps * nf * nf + 2.0 * a, c * c * nf * nf, t);
        let value = h_n(&params, n, t).unwrap();
        let env = ModeSpectrum::new(&params, n).abs_bound(t);
        let rel = (value - oracle).abs() / oracle.abs().max(env).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    check(
        worst <= 1e-9 && seen.iter().all(|s| *s > 0),
        format!("max rel err {worst:.2e} over 50 samples, regimes trig/res/hyp = {seen:?}"),
    )
}

fn manufactured(eps: f64) -> SourceSpec<f64> {
    let (a, c2) = (0.5, 1.0);
    // v = sin x g(t), g = (1 - cos t) e^{-t}
    SourceSpec::linear("manufactured", move |x: f64, t: f64| {
        let e = (-t).exp();
        let g = (1.0 - t.cos()) * e;
        let g1 = t.sin() * e - g;
        let g2 = t.cos() * e - 2.0 * t.sin() * e + g;
        x.sin() * (eps * g1 + c2 * g + g2 + 2.0 * a * g1)
    })
}

fn manufactured_exact(x: f64, t: f64) -> f64 {
    x.sin() * (1.0 - t.cos()) * (-t).exp()
}

fn criterion_2() -> Outcome {
    let params = ModelParams::new(0.5, 1.0, 0.05).unwrap();
    let src = manufactured(0.05);
    let t_end = 5.0;
    let mut fd_err = Vec::new();
    let mut sp_err = Vec::new();
    let mut cross = 0.0_f64;
    for (nx, dt) in [(39usize, 0.04), (79, 0.02), (159, 0.01)] {
        let cfg = FdConfig::new(nx, dt, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
        let fd = solve_fd(&src, &params, &cfg, t_end).unwrap();
        let grid = fd.field.grid().clone();
        let mut e = 0.0_f64;
        for (it, &t) in grid.t().iter().enumerate() {
            for (ix, &x) in grid.x().iter().enumerate() {
                e = e.max((fd.field.at(ix, it) - manufactured_exact(x, t)).abs());
            }
        }
        fd_err.push(e);
        let sp = solve_linear(BoundaryKind::Dirichlet, &src, &params, grid.clone(), &LinearOptions::default()).unwrap();
        let mut e = 0.0_f64;
        for (it, &t) in grid.t().iter().enumerate() {
            for (ix, &x) in grid.x().iter().enumerate() {
                e = e.max((sp.field.at(ix, it) - manufactured_exact(x, t)).abs());
            }
        }
        sp_err.push(e);
        cross = sp.field.sup_diff(&fd.field).unwrap();
    }
    let order = |e: &[f64]| -> Vec<f64> { e.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };
    let (ofd, osp) = (order(&fd_err), order(&sp_err));
    let in_band = |o: &[f64]| o.iter().all(|v| (1.8..=2.2).contains(v));
    check(
        cross <= 1e-3 && in_band(&ofd) && in_band(&osp),
        format!(
            "spectral vs FD {cross:.2e} at nx=159, dt=0.01; FD orders {:.3?}, spectral orders {:.3?}",
            ofd, osp
        ),
    )
}

fn criterion_3() -> Outcome {
    let params = ModelParams::new(0.5, 1.0, 0.05).unwrap();
    let grid = Arc::new(Grid::uniform(40, 4.0, 400).unwrap());
    let sources = vec![
        SourceSpec::linear("sin_x_exp_t", |x: f64, t: f64| x.sin() * (-t).exp())
            .with_xx(|x: f64, t: f64| -x.sin() * (-t).exp()),
        SourceSpec::linear("parabola_sin_t", |x: f64, t: f64| x * (PI - x) * t.sin()).with_xx(|_, t: f64| -2.0 * t.sin()),
        SourceSpec::linear("sin_cubed", |x: f64, t: f64| x.sin().powi(3) * (1.0 - (-t).exp())).with_xx(|x: f64, t: f64| {
            let (s, c) = (x.sin(), x.cos());
            (6.0 * s * c * c - 3.0 * s * s * s) * (1.0 - (-t).exp())
        }),
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for src in &sources {
        let mut sols = Vec::new();
        for form in [SolveForm::GForm, SolveForm::HForm] {
            let opts = LinearOptions {
                form,
                tol: 1e-5,
                max_modes: 4096,
                ..Default::default()
            };
            sols.push(solve_linear(BoundaryKind::Dirichlet, src, &params, grid.clone(), &opts).unwrap());
        }
        let diff = sols[0].field.sup_diff(&sols[1].field).unwrap();
        let budget = 2.0 * (sols[0].certificate.total + sols[1].certificate.total);
        ok &= diff <= budget;
        lines.push(format!("{}: {diff:.2e} <= {budget:.2e}", src.label()));
    }
    check(ok, lines.join("; "))
}

fn lemma_sweep() -> (ModelParams<f64>, SweepGrid<f64>, [f64; 4]) {
    (
        ModelParams::new(0.5, 1.0, 0.0).unwrap(),
        SweepGrid::diagonal(20, 50, 10.0).unwrap(),
        [1e-1, 1e-2, 1e-3, 1e-4],
    )
}

fn criterion_4() -> Outcome {
    let (p, sweep, eps) = lemma_sweep();
    let rep = check_lemma41(&p, 0.9, &sweep, &eps).unwrap();
    let fails = rep.samples.iter().filter(|s| s.in_hypothesis && !(s.r1.pass && s.r2.pass)).count();
    let margin = rep
        .samples
        .iter()
        .flat_map(|s| [s.r1.log_margin, s.r2.log_margin])
        .flatten()
        .fold(f64::INFINITY, f64::min);
    check(
        rep.verdict.overall == Verdict::Pass && fails == 0,
        format!("{} samples, {fails} certified violations, min log-margin {margin:.2}", rep.samples.len()),
    )
}

fn criterion_5() -> Outcome {
    let (p, sweep, eps) = lemma_sweep();
    let rep = check_theorem41(&p, 0.9, &sweep, &eps).unwrap();
    let fails = rep.samples.iter().filter(|s| s.in_hypothesis && !s.theorem.pass).count();
    // far-field point: bound and measurement both tiny at t = 50
    let far = SweepGrid::at_point(PI / 2.0, PI / 2.0, 2, 50.0).unwrap();
    let rep_far = check_theorem41(&p, 0.9, &far, &eps).unwrap();
    check(
        rep.verdict.overall == Verdict::Pass && fails == 0 && rep_far.verdict.overall == Verdict::Pass,
        format!(
            "gamma = {:.4}, {} samples, {fails} certified violations; t = 50 check {:?}",
            rep.gamma_used,
            rep.samples.len(),
            rep_far.verdict.overall
        ),
    )
}

fn criterion_6() -> Outcome {
    let (p, sweep, eps) = lemma_sweep();
    let fit = fit_rate(&p, &eps, &sweep).unwrap();
    let slope = fit.fit.as_ref().map_or(f64::NAN, |f| f.slope);
    let e = [1e-1, 1e-2, 1e-3, 1e-4];
    let synth: Vec<f64> = e.iter().map(|v| 0.42 * v).collect();
    let synth_slope = fit_power_law(&e, &synth).unwrap().slope;
    check(
        slope >= 0.9 && (synth_slope - 1.0).abs() <= 1e-6,
        format!("fitted slope {slope:.4}, synthetic slope {synth_slope:.9}"),
    )
}

fn criterion_7() -> Outcome {
    let eps = 0.01;
    let k = 0.9;
    let params = ModelParams::new(0.5, 1.0, eps).unwrap();
    let lim = params.telegraph_limit();
    let src = SourceSpec::linear("sin_x_exp_t", |x: f64, t: f64| x.sin() * (-t).exp())
        .with_xx(|x: f64, t: f64| -x.sin() * (-t).exp());
    let consts = BoundConstants::new(&params, k).unwrap();
    let gamma = consts.gamma(&[eps]).unwrap();
    // the rigorous tail bound only sees sup |f_xx|, so 1e-6 would need > 1024 modes
    let opts = LinearOptions {
        tol: 1e-5,
        ..Default::default()
    };
    let mut reports = Vec::new();
    for t_end in [5.0, 10.0, 20.0] {
        let grid = Arc::new(Grid::uniform(32, t_end, (t_end / 0.01) as usize).unwrap());
        let ue = solve_linear(BoundaryKind::Dirichlet, &src, &params, grid.clone(), &opts).unwrap();
        let u0 = solve_linear(BoundaryKind::Dirichlet, &src, &lim, grid, &opts).unwrap();
        reports.push(approx_error_field(&ue.field, &u0.field, &src, &params, k, gamma).unwrap());
    }
    let spread = horizon_spread(&reports);
    let all_within = reports.iter().all(|r| r.within_gamma1);
    let normalized: Vec<f64> = reports.iter().filter_map(|r| r.normalized).collect();
    check(
        spread < 0.1 && all_within && normalized.len() == 3,
        format!(
            "normalized residuals {:.4?} (gamma1 = {:.2}), spread {:.2}%",
            normalized,
            reports[0].gamma1,
            100.0 * spread
        ),
    )
}

fn criterion_8() -> Outcome {
    let params = ModelParams::new(0.5, 1.0, 0.02).unwrap();
    let t_end = 5.0;
    let src = SourceSpec::sine_gordon(1.0, 0.5);
    let cfg = FdConfig::new(127, 0.005, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
    let fd = solve_fd(&src, &params, &cfg, t_end).unwrap();
    let grid = fd.field.grid().clone();
    let opts = LinearOptions {
        n_max: Some(64),
        ..Default::default()
    };
    let picard = PicardConfig {
        tol: 1e-10,
        max_iters: 200,
        ..Default::default()
    };
    let sol = match solve_nonlinear(BoundaryKind::Dirichlet, &src, &params, grid.clone(), &opts, &picard) {
        Ok(s) => s,
        Err(e) => return Err(format!("Picard failed: {e}")),
    };
    let diff = sol.u_eps.sup_diff(&fd.field).unwrap();
    let res = sol.log.final_residuals();
    let ratios: Vec<f64> = res.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
    let geometric = !ratios.is_empty() && ratios.iter().all(|r| *r < 1.0);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);

    let lin_src = SourceSpec::linear("two_modes", |x: f64, t: f64| {
        x.sin() * (-t).exp() + 0.3 * (3.0 * x).sin() * t * (-t).exp()
    });
    let lin_grid = Arc::new(Grid::uniform(32, t_end, 1000).unwrap());
    let lin_opts = LinearOptions {
        n_max: Some(16),
        ..Default::default()
    };
    let nl = solve_nonlinear(BoundaryKind::Dirichlet, &lin_src, &params, lin_grid.clone(), &lin_opts, &picard).unwrap();
    let ln = solve_linear(BoundaryKind::Dirichlet, &lin_src, &params, lin_grid, &lin_opts).unwrap();
    let path = nl.u_eps.sup_diff(&ln.field).unwrap();
    let path_budget = nl.certificate + ln.certificate.total;
    check(
        diff <= 5e-3 && geometric && path <= path_budget,
        format!(
            "Picard {} iterations, max residual ratio {max_ratio:.3}, sup|u - u_fd| = {diff:.2e}; linear path {path:.2e} <= {path_budget:.2e}",
            sol.iterations()
        ),
    )
}

fn one_sided_wall_derivative(values: &[f64], h: f64) -> f64 {
    (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
}

fn criterion_9() -> Outcome {
    let params = ModelParams::new(0.5, 1.0, 0.05).unwrap();
    let series = KernelSeries::with_n_max(KernelKind::KEps, &params, 0, &[0.0]);
    let mut worst = 0.0_f64;
    for i in 0..=400 {
        let t = 20.0 * i as f64 / 400.0;
        let closed = (1.0 - (-2.0 * 0.5 * t).exp()) / (2.0 * PI * 0.5);
        for (x, xi) in [(0.0, 0.0), (1.0, 2.0), (PI, 0.3)] {
            worst = worst.max((series.eval(x, xi, t).unwrap() - closed).abs());
        }
    }

    let src = SourceSpec::linear("neumann_ramp", |x: f64, t: f64| (x + 0.3) * (1.0 - (-t).exp()));
    let t_end = 2.0;
    let mut sp = Vec::new();
    let mut fd = Vec::new();
    for nx in [19usize, 39, 79] {
        let cfg = FdConfig::new(nx, 0.004, FdScheme::ImplicitTrapezoid, FdBoundary::NeumannZero).unwrap();
        let f = solve_fd(&src, &params, &cfg, t_end).unwrap();
        let grid = f.field.grid().clone();
        let h = grid.x()[1];
        let last = grid.nt() - 1;
        fd.push(one_sided_wall_derivative(f.field.time_slice(last), h).abs());
        let opts = LinearOptions {
            n_max: Some(256),
            ..Default::default()
        };
        let s = solve_linear(BoundaryKind::Neumann, &src, &params, grid, &opts).unwrap();
        sp.push(one_sided_wall_derivative(s.field.time_slice(last), h).abs());
    }
    let order = |e: &[f64]| -> Vec<f64> { e.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };
    let (osp, ofd) = (order(&sp), order(&fd));
    let second = |o: &[f64]| o.iter().all(|v| *v >= 1.8);
    check(
        worst <= 1e-12 && second(&osp) && second(&ofd),
        format!("constant-mode err {worst:.1e}; wall-derivative orders spectral {osp:.3?}, FD {ofd:.3?}"),
    )
}

fn criterion_10() -> Outcome {
    let (a, c, n) = (0.5, 1.0, 4usize);
    let eps_star = 2.0 * (c * n as f64 - a) / (n * n) as f64;
    let mut worst = 0.0_f64;
    let mut finite = true;
    for t in [0.01, 0.5, 2.0, 10.0] {
        let at = |e: f64| h_n(&ModelParams::new(a, c, e).unwrap(), n, t).unwrap();
        let center = at(eps_star);
        finite &= center.is_finite();
        for rel in [1e-15, 1e-13, 1e-11] {
            let lo = at(eps_star * (1.0 - rel));
            let hi = at(eps_star * (1.0 + rel));
            finite &= lo.is_finite() && hi.is_finite();
            worst = worst.max((hi - lo).abs() / center.abs());
        }
    }
    let regime = regime_of(&ModelParams::new(a, c, eps_star).unwrap(), n);
    check(
        finite && worst <= 1e-8 && regime == Regime::Resonant,
        format!("eps* = {eps_star}, regime {regime:?}, max relative jump {worst:.2e}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 kernel vs mode ODE", criterion_1),
        ("2 solver vs FD oracle", criterion_2),
        ("3 G/H path equivalence", criterion_3),
        ("4 two-band bounds", criterion_4),
        ("5 uniform-in-time bound", criterion_5),
        ("6 rate recovery", criterion_6),
        ("7 approximation residual", criterion_7),
        ("8 nonlinear consistency", criterion_8),
        ("9 Neumann kernel", criterion_9),
        ("10 resonant continuity", criterion_10),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {name}: PASS ({secs:.1}s) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
