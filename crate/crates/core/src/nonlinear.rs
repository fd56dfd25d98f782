//! Picard iteration for state-dependent sources.
//!
//! The limit problem (`eps = 0`) is solved first for `u0`. The correction
//! `v = u_eps - u0` is then the fixed point of
//! `v = int int G_eps F(xi, tau, u0 + v)` with
//! `F = f(u0 + v) - f(u0) + eps u0_xxt`, where `u0_xxt` comes from the mode
//! series (`-n^2 d/dt u0_n`). The state, its time derivative and its x
//! derivative are all evaluated spectrally at the projection nodes.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Basis;
use crate::linear::{
    basis_fn, convolve_modes, fitted_decay, project_with, quadrature_pair, response_tail, solve_linear, synthesize,
    BoundaryKind, CoarseKind, ConvolutionMethod, KernelWeight, LinearOptions, ModalKernel, ModeSeries, SolveForm,
    XQuadrature,
};
use crate::model::{Field, Grid, ModelParams, SourcePoint, SourceSpec, StateDependence};
use crate::oracle::pde_residual;
use crate::scalar::Real;

/// Iterates whose modal sup-norm exceeds this are treated as divergent.
const BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig<T> {
    pub max_iters: usize,
    /// Stop when the modal sup-norm change between iterates is at most `tol`.
    pub tol: T,
    /// Damping `omega` in `v <- v + omega (T(v) - v)`.
    pub relaxation: T,
    /// Length of the expanding horizons; one window covering the whole grid when `None`.
    pub window: Option<T>,
}

impl<T: Real> Default for PicardConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: T::lit(1e-10),
            relaxation: T::one(),
            window: None,
        }
    }
}

impl<T: Real> PicardConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "need at least one iteration".into(),
            });
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("Picard tolerance must be positive, got {}", self.tol),
            });
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "relaxation",
                reason: format!("relaxation must lie in (0, 1], got {}", self.relaxation),
            });
        }
        if let Some(w) = self.window {
            if !(w > T::zero()) {
                return Err(Error::InvalidParameter {
                    name: "window",
                    reason: format!("window length must be positive, got {w}"),
                });
            }
        }
        Ok(())
    }
}

/// Iteration record of one horizon window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLog {
    pub horizon: f64,
    pub iterations: usize,
    /// Modal sup-norm change per iteration.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub windows: Vec<WindowLog>,
    /// Non-fatal observations (residual increases, noisy derivatives).
    pub diagnostics: Vec<String>,
}

impl IterationLog {
    pub fn total_iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations).sum()
    }

    /// Residual history of the final window.
    pub fn final_residuals(&self) -> &[f64] {
        self.windows.last().map_or(&[], |w| w.residuals.as_slice())
    }
}

/// A solution carried as modes of the field and of its time derivative.
#[derive(Debug, Clone)]
pub struct ModalState<T> {
    pub value: ModeSeries<T>,
    pub rate: ModeSeries<T>,
}

#[derive(Debug, Clone)]
pub struct U0Solution<T> {
    pub field: Field<T>,
    pub state: ModalState<T>,
    pub log: IterationLog,
    /// Error budget: quadrature errors, truncation estimate and final Picard change.
    pub certificate: f64,
}

#[derive(Debug, Clone)]
pub struct NonlinearSolution<T> {
    pub u_eps: Field<T>,
    pub v: Field<T>,
    pub u0: Field<T>,
    pub n_max: usize,
    /// Iterations for the correction `v`.
    pub log: IterationLog,
    /// Iterations for the limit problem.
    pub u0_log: IterationLog,
    pub certificate: f64,
    /// Sup of the finite-difference residual of the full equation at interior nodes
    /// (absent on non-uniform x grids).
    pub pde_residual: Option<f64>,
}

impl<T> NonlinearSolution<T> {
    pub fn iterations(&self) -> usize {
        self.log.total_iterations()
    }
}

/// Values of `phi_n` and `phi_n'` at the projection nodes.
struct NodeTables<T> {
    nodes: Vec<T>,
    phi: Vec<Vec<T>>,
    dphi: Vec<Vec<T>>,
}

impl<T: Real> NodeTables<T> {
    fn new(nodes: Vec<T>, basis: Basis, n_max: usize, first: usize) -> Self {
        let phi = (first..=n_max)
            .map(|n| nodes.iter().map(|&x| basis_fn(basis, n, x)).collect())
            .collect();
        let dphi = (first..=n_max)
            .map(|n| {
                let nf = T::from_usize_lossy(n);
                nodes
                    .iter()
                    .map(|&x| match basis {
                        Basis::Sine => nf * (nf * x).cos(),
                        Basis::CosineWithConstant => -nf * (nf * x).sin(),
                    })
                    .collect()
            })
            .collect();
        Self { nodes, phi, dphi }
    }

    fn index(&self, x: T) -> usize {
        self.nodes
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite nodes"))
            .expect("projection nodes are tabulated")
    }

    fn eval(&self, modes: &ModeSeries<T>, it: usize, table: &[Vec<T>]) -> Vec<T> {
        let mut out = vec![T::zero(); self.nodes.len()];
        for (k, n) in modes.modes().enumerate() {
            let c = modes.coeff(n)[it];
            if c == T::zero() {
                continue;
            }
            for (o, p) in out.iter_mut().zip(&table[k]) {
                *o += c * *p;
            }
        }
        out
    }
}

/// Everything a Picard map needs besides the current iterate.
struct Problem<'a, T> {
    kernel: ModelParams<T>,
    source: &'a SourceSpec<T>,
    basis: Basis,
    n_max: usize,
    dt: T,
    tables: NodeTables<T>,
    fine: XQuadrature<T>,
    coarse: XQuadrature<T>,
    coarse_kind: CoarseKind,
    method: ConvolutionMethod,
    /// State the iterate is added to, sampled at the nodes: `[it][q]` for value, rate, x-derivative.
    base: Option<[Vec<Vec<T>>; 3]>,
    /// `f(base)` at the nodes, subtracted from `f(base + v)`.
    base_source: Option<Vec<Vec<T>>>,
    /// Fixed modal forcing added to the projected source.
    extra: Option<ModeSeries<T>>,
    needs_rate: bool,
}

impl<'a, T: Real> Problem<'a, T> {
    fn zero_state(&self, nt: usize) -> ModalState<T> {
        let z = ModeSeries::zeros(self.basis, self.n_max, self.dt, nt);
        ModalState {
            value: z.clone(),
            rate: z,
        }
    }

    /// Samples the effective forcing at every node and time.
    fn forcing(&self, state: &ModalState<T>, nt: usize) -> Vec<Vec<T>> {
        let dep = self.source.dependence();
        (0..nt)
            .into_par_iter()
            .map(|it| {
                let t = self.dt * T::from_usize_lossy(it);
                let mut u = self.tables.eval(&state.value, it, &self.tables.phi);
                let mut ut = if dep == StateDependence::ValueAndDerivatives {
                    self.tables.eval(&state.rate, it, &self.tables.phi)
                } else {
                    vec![T::zero(); u.len()]
                };
                let mut ux = if dep == StateDependence::ValueAndDerivatives {
                    self.tables.eval(&state.value, it, &self.tables.dphi)
                } else {
                    vec![T::zero(); u.len()]
                };
                if let Some([bv, br, bx]) = &self.base {
                    for q in 0..u.len() {
                        u[q] += bv[it][q];
                        ut[q] += br[it][q];
                        ux[q] += bx[it][q];
                    }
                }
                (0..u.len())
                    .map(|q| {
                        let p = SourcePoint {
                            x: self.tables.nodes[q],
                            t,
                            u: u[q],
                            u_t: ut[q],
                            u_x: ux[q],
                        };
                        let f = self.source.eval(&p);
                        match &self.base_source {
                            Some(b) => f - b[it][q],
                            None => f,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Modes of the effective forcing for a given iterate.
    fn forcing_modes(&self, state: &ModalState<T>, nt: usize) -> Result<ModeSeries<T>> {
        let samples = self.forcing(state, nt);
        let mut f_modes = project_with(
            |x, it| samples[it][self.tables.index(x)],
            &self.fine,
            &self.coarse,
            self.coarse_kind,
            self.basis,
            self.n_max,
            self.dt,
            nt,
        )?;
        if let Some(extra) = &self.extra {
            for n in f_modes.modes() {
                let e = extra.coeff(n);
                for (c, v) in f_modes.coeff_mut(n).iter_mut().zip(e) {
                    *c += *v;
                }
                let err = f_modes.error(n) + extra.error(n);
                f_modes.set_error(n, err);
            }
        }
        Ok(f_modes)
    }

    /// One application of the integral operator.
    fn apply(&self, state: &ModalState<T>, nt: usize) -> Result<ModalState<T>> {
        let f_modes = self.forcing_modes(state, nt)?;
        let value = convolve_modes(&f_modes, &self.kernel, KernelWeight::Unit, ModalKernel::Response, self.method)?;
        let rate = if self.needs_rate {
            convolve_modes(&f_modes, &self.kernel, KernelWeight::Unit, ModalKernel::Rate, self.method)?
        } else {
            ModeSeries::zeros(self.basis, self.n_max, self.dt, nt)
        };
        Ok(ModalState { value, rate })
    }

    /// Fixed point on the first `nt` time samples starting from `init`.
    fn iterate(
        &self,
        init: ModalState<T>,
        nt: usize,
        cfg: &PicardConfig<T>,
        log: &mut IterationLog,
    ) -> Result<(ModalState<T>, T)> {
        let horizon = self.dt * T::from_usize_lossy(nt - 1);
        let mut window = WindowLog {
            horizon: horizon.as_f64(),
            iterations: 0,
            residuals: Vec::new(),
        };
        let mut state = init;
        let mut last = T::infinity();
        // a state-independent forcing is reproduced exactly by one application
        let single_pass = self.source.is_linear();
        for iter in 1..=cfg.max_iters {
            let next = self.apply(&state, nt)?;
            let (relaxed, change) = relax(&state, &next, cfg.relaxation);
            window.iterations = iter;
            window.residuals.push(change.as_f64());
            let size = modal_sup(&relaxed.value);
            if !size.is_finite() || size > T::lit(BLOWUP) {
                let history = window.residuals.clone();
                log.windows.push(window);
                return Err(Error::NonConvergence {
                    iterations: iter,
                    last_residual: change.as_f64(),
                    history,
                });
            }
            if iter > 2 && change > last {
                log.diagnostics.push(format!(
                    "horizon {:.4}: residual increased at iteration {iter} ({:.3e} -> {:.3e})",
                    horizon.as_f64(),
                    last.as_f64(),
                    change.as_f64()
                ));
            }
            state = relaxed;
            last = change;
            if single_pass {
                log.windows.push(window);
                return Ok((state, T::zero()));
            }
            if change <= cfg.tol {
                log.windows.push(window);
                return Ok((state, change));
            }
        }
        let history = window.residuals.clone();
        log.windows.push(window);
        Err(Error::NonConvergence {
            iterations: cfg.max_iters,
            last_residual: last.as_f64(),
            history,
        })
    }

    /// Expanding-horizon Picard over the whole time axis of length `nt`.
    fn solve(&self, nt: usize, cfg: &PicardConfig<T>, log: &mut IterationLog) -> Result<(ModalState<T>, T)> {
        let breaks = window_breaks(nt, self.dt, cfg.window);
        let mut state = self.zero_state(breaks[0]);
        let mut change = T::zero();
        for (k, &len) in breaks.iter().enumerate() {
            let init = if k == 0 {
                state
            } else {
                ModalState {
                    value: extend_hold(&state.value, len),
                    rate: extend_hold(&state.rate, len),
                }
            };
            let (s, c) = self.iterate(init, len, cfg, log)?;
            state = s;
            change = c;
        }
        Ok((state, change))
    }
}

/// Number of time samples of every window, ending with `nt`.
fn window_breaks<T: Real>(nt: usize, dt: T, window: Option<T>) -> Vec<usize> {
    let Some(w) = window else {
        return vec![nt];
    };
    let steps_per = (w / dt).round().to_usize().unwrap_or(1).max(1);
    let mut out = Vec::new();
    let mut steps = steps_per;
    while steps < nt - 1 {
        out.push(steps + 1);
        steps += steps_per;
    }
    out.push(nt);
    out
}

/// Pads a series to `nt` samples by holding the last value.
fn extend_hold<T: Real>(ms: &ModeSeries<T>, nt: usize) -> ModeSeries<T> {
    let coeffs = ms
        .modes()
        .map(|n| {
            let c = ms.coeff(n);
            let last = c.last().copied().unwrap_or(T::zero());
            let mut row = c.to_vec();
            row.resize(nt, last);
            row
        })
        .collect();
    let errors = ms.modes().map(|n| ms.error(n)).collect();
    ModeSeries::from_parts(ms.basis(), ms.n_max(), ms.dt(), coeffs, errors).expect("same layout")
}

/// `sum_n sup_t |c_n(t)|`, an upper bound for the sup-norm of the synthesized field.
fn modal_sup<T: Real>(ms: &ModeSeries<T>) -> T {
    ms.sup_magnitudes().into_iter().fold(T::zero(), |s, v| s + v)
}

fn relax<T: Real>(old: &ModalState<T>, new: &ModalState<T>, omega: T) -> (ModalState<T>, T) {
    let mut value = new.value.clone();
    let mut rate = new.rate.clone();
    let mut change = T::zero();
    for n in value.modes() {
        let o = old.value.coeff(n);
        let mut worst = T::zero();
        for (v, ov) in value.coeff_mut(n).iter_mut().zip(o) {
            let d = *v - *ov;
            *v = *ov + omega * d;
            worst = worst.max((omega * d).abs());
        }
        change += worst;
        if omega < T::one() {
            for (r, orv) in rate.coeff_mut(n).iter_mut().zip(old.rate.coeff(n)) {
                *r = *orv + omega * (*r - *orv);
            }
        }
    }
    (ModalState { value, rate }, change)
}

/// Shared setup: truncation, quadrature and node tables.
fn build_problem<'a, T: Real>(
    boundary: BoundaryKind,
    source: &'a SourceSpec<T>,
    kernel: ModelParams<T>,
    grid: &Grid<T>,
    opts: &LinearOptions<T>,
) -> Result<Problem<'a, T>> {
    let n_max = match opts.n_max {
        Some(n) => n,
        None => {
            let frozen_src = source.clone();
            let frozen = SourceSpec::linear(source.label().to_string(), move |x, t| frozen_src.eval_xt(x, t));
            let probe = LinearOptions {
                form: SolveForm::GForm,
                ..*opts
            };
            let sol = solve_linear(boundary, &frozen, &kernel, Arc::new(grid.clone()), &probe)?;
            sol.n_max.max(32)
        }
    };
    let (fine, coarse, coarse_kind) = quadrature_pair(opts.quadrature, grid, n_max)?;
    let mut nodes: Vec<T> = fine.nodes().iter().chain(coarse.nodes()).copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    nodes.dedup();
    let basis = boundary.basis();
    let first = match basis {
        Basis::Sine => 1,
        Basis::CosineWithConstant => 0,
    };
    Ok(Problem {
        kernel,
        source,
        basis,
        n_max,
        dt: grid.dt(),
        tables: NodeTables::new(nodes, basis, n_max, first),
        fine,
        coarse,
        coarse_kind,
        method: opts.method,
        base: None,
        base_source: None,
        extra: None,
        needs_rate: source.dependence() == StateDependence::ValueAndDerivatives,
    })
}

fn check_grid<T: Real>(grid: &Grid<T>) -> Result<()> {
    if grid.nt() < 3 || !(grid.dt() > T::zero()) {
        return Err(Error::GridMismatch("Picard iteration needs a uniform time grid with >= 3 nodes".into()));
    }
    Ok(())
}

fn truncation_estimate<T: Real>(problem: &Problem<'_, T>, state: &ModalState<T>, nt: usize) -> Result<T> {
    // fitted decay of the converged forcing, propagated through the modal responses
    let f_modes = problem.forcing_modes(state, nt)?;
    let (c, p) = fitted_decay(&f_modes);
    let horizon = problem.dt * T::from_usize_lossy(nt - 1);
    Ok(response_tail(&problem.kernel, c, p, problem.n_max, horizon))
}

/// Solves the limit problem `eps = 0` with source `f_bar(x, t, u)` by Picard iteration.
pub fn solve_u0<T: Real>(
    boundary: BoundaryKind,
    f_bar: &SourceSpec<T>,
    params: &ModelParams<T>,
    grid: Arc<Grid<T>>,
    opts: &LinearOptions<T>,
    picard: &PicardConfig<T>,
) -> Result<U0Solution<T>> {
    picard.validate()?;
    check_grid(&grid)?;
    let kernel = params.telegraph_limit();
    let mut problem = build_problem(boundary, f_bar, kernel, &grid, opts)?;
    problem.needs_rate = true;
    let mut log = IterationLog {
        windows: Vec::new(),
        diagnostics: Vec::new(),
    };
    let (state, change) = problem.solve(grid.nt(), picard, &mut log)?;
    let field = synthesize(&state.value, grid.clone(), format!("u0[{}]", f_bar.label()))?;
    let certificate =
        state.value.total_error() + change + truncation_estimate(&problem, &state, grid.nt())?;
    Ok(U0Solution {
        field,
        state,
        log,
        certificate: certificate.as_f64(),
    })
}

/// Solves the dissipative problem with source `f(x, t, u, u_t, u_x)`:
/// `u_eps = u0 + v`, `u0` from [`solve_u0`] with the same source.
pub fn solve_nonlinear<T: Real>(
    boundary: BoundaryKind,
    source: &SourceSpec<T>,
    params: &ModelParams<T>,
    grid: Arc<Grid<T>>,
    opts: &LinearOptions<T>,
    picard: &PicardConfig<T>,
) -> Result<NonlinearSolution<T>> {
    picard.validate()?;
    check_grid(&grid)?;
    let mut problem = build_problem(boundary, source, *params, &grid, opts)?;
    let u0_opts = LinearOptions {
        n_max: Some(problem.n_max),
        ..*opts
    };
    let u0 = solve_u0(boundary, source, params, grid.clone(), &u0_opts, picard)?;
    let nt = grid.nt();

    // u0 and f(u0) at the projection nodes
    let tables = &problem.tables;
    let base_v: Vec<Vec<T>> = (0..nt).map(|it| tables.eval(&u0.state.value, it, &tables.phi)).collect();
    let base_r: Vec<Vec<T>> = (0..nt).map(|it| tables.eval(&u0.state.rate, it, &tables.phi)).collect();
    let base_x: Vec<Vec<T>> = (0..nt).map(|it| tables.eval(&u0.state.value, it, &tables.dphi)).collect();
    let base_source: Vec<Vec<T>> = (0..nt)
        .into_par_iter()
        .map(|it| {
            let t = grid.dt() * T::from_usize_lossy(it);
            (0..tables.nodes.len())
                .map(|q| {
                    source.eval(&SourcePoint {
                        x: tables.nodes[q],
                        t,
                        u: base_v[it][q],
                        u_t: base_r[it][q],
                        u_x: base_x[it][q],
                    })
                })
                .collect()
        })
        .collect();
    // eps u0_xxt = -eps n^2 d/dt u0_n
    let eps = params.eps();
    let extra = u0.state.rate.map_modes(|n| -eps * T::from_usize_lossy(n * n));

    problem.base = Some([base_v, base_r, base_x]);
    problem.base_source = Some(base_source);
    problem.extra = Some(extra);

    let mut log = IterationLog {
        windows: Vec::new(),
        diagnostics: Vec::new(),
    };
    let (state, change) = problem.solve(nt, picard, &mut log)?;

    if problem.needs_rate {
        let noise: T = state
            .value
            .modes()
            .map(|n| T::from_usize_lossy(n.max(1)) * state.value.error(n) + state.rate.error(n))
            .fold(T::zero(), |s, v| s + v);
        if noise > picard.tol {
            log.diagnostics.push(format!(
                "derivative evaluation noise {:.3e} exceeds the Picard tolerance {:.3e}",
                noise.as_f64(),
                picard.tol.as_f64()
            ));
        }
    }

    let v = synthesize(&state.value, grid.clone(), format!("v[{}]", source.label()))?;
    let mut u_eps = u0.field.add(&v)?;
    u_eps.set_label(format!("u_eps[{}]", source.label()));
    let certificate = u0.certificate
        + (state.value.total_error() + change + truncation_estimate(&problem, &state, nt)?).as_f64();
    let pde_residual = pde_residual(&u_eps, source, params).ok().map(|r| r.as_f64());
    Ok(NonlinearSolution {
        u_eps,
        v,
        u0: u0.field,
        n_max: problem.n_max,
        log,
        u0_log: u0.log,
        certificate,
        pde_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams::new(0.5, 1.0, 0.05).unwrap()
    }

    fn opts() -> LinearOptions<f64> {
        LinearOptions {
            n_max: Some(16),
            ..Default::default()
        }
    }

    #[test]
    fn zero_source_gives_zero_limit_solution() {
        let grid = Arc::new(Grid::uniform(16, 1.0, 40).unwrap());
        let src = SourceSpec::linear("zero", |_, _| 0.0);
        let u0 = solve_u0(BoundaryKind::Dirichlet, &src, &params(), grid, &opts(), &PicardConfig::default()).unwrap();
        assert_eq!(u0.field.sup_norm(), 0.0);
        assert_eq!(u0.log.total_iterations(), 1);
    }

    #[test]
    fn linear_limit_source_matches_linear_solver() {
        let grid = Arc::new(Grid::uniform(24, 3.0, 300).unwrap());
        let src = SourceSpec::linear("sin_x_exp_t", |x: f64, t: f64| x.sin() * (-t).exp());
        let lim = params().telegraph_limit();
        let u0 = solve_u0(BoundaryKind::Dirichlet, &src, &params(), grid.clone(), &opts(), &PicardConfig::default())
            .unwrap();
        let lin = solve_linear(BoundaryKind::Dirichlet, &src, &lim, grid, &opts()).unwrap();
        let diff = u0.field.sup_diff(&lin.field).unwrap();
        assert!(diff <= 1e-12 + u0.certificate + lin.certificate.total, "{diff}");
    }

    #[test]
    fn weak_sine_gordon_contracts_geometrically() {
        let grid = Arc::new(Grid::uniform(24, 2.0, 200).unwrap());
        let src = SourceSpec::nonlinear("weak", StateDependence::Value, |p: &SourcePoint<f64>| {
            p.x.sin() - 0.1 * p.u.sin()
        });
        let u0 = solve_u0(BoundaryKind::Dirichlet, &src, &params(), grid, &opts(), &PicardConfig::default()).unwrap();
        let r = u0.log.final_residuals();
        assert!(r.len() > 2);
        for w in r[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(*r.last().unwrap() <= 1e-10);
    }

    #[test]
    fn linear_source_path_equivalence() {
        let grid = Arc::new(Grid::uniform(24, 2.0, 400).unwrap());
        let src = SourceSpec::linear("two_modes", |x: f64, t: f64| {
            x.sin() * (-t).exp() + 0.3 * (3.0 * x).sin() * t * (-t).exp()
        });
        let nl = solve_nonlinear(BoundaryKind::Dirichlet, &src, &params(), grid.clone(), &opts(), &PicardConfig::default())
            .unwrap();
        assert_eq!(nl.iterations(), 1);
        let lin = solve_linear(BoundaryKind::Dirichlet, &src, &params(), grid, &opts()).unwrap();
        let diff = nl.u_eps.sup_diff(&lin.field).unwrap();
        assert!(diff <= nl.certificate + lin.certificate.total, "{diff} {} {}", nl.certificate, lin.certificate.total);
    }

    #[test]
    fn windows_cover_the_axis() {
        assert_eq!(window_breaks(11, 0.1, None), vec![11]);
        assert_eq!(window_breaks(11, 0.1, Some(0.3)), vec![4, 7, 10, 11]);
        assert_eq!(window_breaks(11, 0.1, Some(5.0)), vec![11]);
    }

    #[test]
    fn config_is_validated() {
        let grid = Arc::new(Grid::uniform(16, 1.0, 40).unwrap());
        let src = SourceSpec::sine_gordon(1.0, 0.1);
        for bad in [
            PicardConfig { max_iters: 0, ..Default::default() },
            PicardConfig { relaxation: 1.5, ..Default::default() },
            PicardConfig { tol: 0.0, ..Default::default() },
        ] {
            assert!(solve_nonlinear(BoundaryKind::Dirichlet, &src, &params(), grid.clone(), &opts(), &bad).is_err());
        }
    }

    #[test]
    fn divergence_is_reported_with_history() {
        let grid = Arc::new(Grid::uniform(16, 4.0, 100).unwrap());
        let src = SourceSpec::nonlinear("explosive", StateDependence::Value, |p: &SourcePoint<f64>| {
            p.x.sin() + 50.0 * p.u * p.u.abs()
        });
        let cfg = PicardConfig { max_iters: 40, ..Default::default() };
        match solve_u0(BoundaryKind::Dirichlet, &src, &params(), grid, &opts(), &cfg) {
            Err(Error::NonConvergence { history, .. }) => assert!(!history.is_empty()),
            other => panic!("expected divergence, got {:?}", other.map(|s| s.log)),
        }
    }
}
