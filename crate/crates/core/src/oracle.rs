//! Method-of-lines finite-difference solver used as an independent check on the
//! spectral results.
//!
//! Second differences in x turn the equation into `u'' = (eps D2 - 2a) u' + c^2 D2 u + f`,
//! which is integrated as a first-order system in `(u, w = u')`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Field, Grid, ModelParams, SourcePoint, SourceSpec, StateDependence};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdScheme {
    /// Crank-Nicolson on `(u, w)`, one tridiagonal solve per step (two for state-dependent sources).
    ImplicitTrapezoid,
    /// Classical RK4; only accepted below the computed stability bound.
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdBoundary {
    DirichletZero,
    /// Ghost-node mirror closure `u_{-1} = u_1`.
    NeumannZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig<T> {
    /// Interior x nodes; the grid spacing is `pi / (nx + 1)`.
    pub nx: usize,
    pub dt: T,
    pub scheme: FdScheme,
    pub bc: FdBoundary,
}

impl<T: Real> FdConfig<T> {
    pub fn new(nx: usize, dt: T, scheme: FdScheme, bc: FdBoundary) -> Result<Self> {
        if nx < 8 {
            return Err(Error::InvalidParameter {
                name: "nx",
                reason: format!("need at least 8 interior nodes, got {nx}"),
            });
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive, got {dt}"),
            });
        }
        Ok(Self { nx, dt, scheme, bc })
    }

    pub fn spacing(&self) -> T {
        T::PI() / T::from_usize_lossy(self.nx + 1)
    }
}

#[derive(Debug, Clone)]
pub struct FdSolution<T> {
    pub field: Field<T>,
    /// Discrete energy `1/2 |w|^2 + c^2/2 |D1 u|^2` at every time node.
    pub energy: Vec<T>,
    /// Largest stable RK4 step for this configuration (always computed).
    pub rk4_stability_bound: T,
}

/// Discrete second-difference operator as a tridiagonal matrix over the unknowns.
struct Tridiagonal<T> {
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    fn second_difference(m: usize, h: T, bc: FdBoundary) -> Self {
        let inv = T::one() / (h * h);
        let two = T::lit(2.0);
        let mut lower = vec![inv; m];
        let diag = vec![-two * inv; m];
        let mut upper = vec![inv; m];
        lower[0] = T::zero();
        upper[m - 1] = T::zero();
        if bc == FdBoundary::NeumannZero {
            upper[0] = two * inv;
            lower[m - 1] = two * inv;
        }
        Self { lower, diag, upper }
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        let m = v.len();
        for i in 0..m {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.lower[i] * v[i - 1];
            }
            if i + 1 < m {
                s += self.upper[i] * v[i + 1];
            }
            out[i] = s;
        }
    }

    /// `alpha I + beta self`.
    fn shifted(&self, alpha: T, beta: T) -> Self {
        Self {
            lower: self.lower.iter().map(|v| beta * *v).collect(),
            diag: self.diag.iter().map(|v| alpha + beta * *v).collect(),
            upper: self.upper.iter().map(|v| beta * *v).collect(),
        }
    }
}

/// Pre-factored Thomas solver.
struct ThomasFactor<T> {
    lower: Vec<T>,
    c_prime: Vec<T>,
    denom: Vec<T>,
}

impl<T: Real> ThomasFactor<T> {
    fn new(m: &Tridiagonal<T>) -> Self {
        let n = m.diag.len();
        let mut c_prime = vec![T::zero(); n];
        let mut denom = vec![T::zero(); n];
        denom[0] = m.diag[0];
        c_prime[0] = m.upper[0] / denom[0];
        for i in 1..n {
            denom[i] = m.diag[i] - m.lower[i] * c_prime[i - 1];
            c_prime[i] = m.upper[i] / denom[i];
        }
        Self {
            lower: m.lower.clone(),
            c_prime,
            denom,
        }
    }

    fn solve(&self, rhs: &mut [T]) {
        let n = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c_prime[i] * next;
        }
    }
}

/// Layout of the unknowns on the full node set `0..=nx+1`.
struct Layout<T> {
    bc: FdBoundary,
    h: T,
    x_full: Vec<T>,
}

impl<T: Real> Layout<T> {
    fn new(cfg: &FdConfig<T>) -> Self {
        let h = cfg.spacing();
        let x_full = (0..cfg.nx + 2).map(|i| T::from_usize_lossy(i) * h).collect();
        Self { bc: cfg.bc, h, x_full }
    }

    /// Index into `x_full` of the first unknown.
    fn offset(&self) -> usize {
        match self.bc {
            FdBoundary::DirichletZero => 1,
            FdBoundary::NeumannZero => 0,
        }
    }

    fn unknowns(&self) -> usize {
        match self.bc {
            FdBoundary::DirichletZero => self.x_full.len() - 2,
            FdBoundary::NeumannZero => self.x_full.len(),
        }
    }

    fn x(&self, k: usize) -> T {
        self.x_full[k + self.offset()]
    }

    /// Central x-derivative of the unknown vector at unknown `k`.
    fn dx(&self, u: &[T], k: usize) -> T {
        let m = u.len();
        let two_h = self.h + self.h;
        match self.bc {
            FdBoundary::DirichletZero => {
                let left = if k == 0 { T::zero() } else { u[k - 1] };
                let right = if k + 1 == m { T::zero() } else { u[k + 1] };
                (right - left) / two_h
            }
            FdBoundary::NeumannZero => {
                if k == 0 || k + 1 == m {
                    T::zero()
                } else {
                    (u[k + 1] - u[k - 1]) / two_h
                }
            }
        }
    }

    /// Quadrature weights making the second-difference operator symmetric.
    fn energy_weight(&self, k: usize, m: usize) -> T {
        match self.bc {
            FdBoundary::NeumannZero if k == 0 || k + 1 == m => T::lit(0.5) * self.h,
            _ => self.h,
        }
    }

    fn energy(&self, u: &[T], w: &[T], c: T) -> T {
        let m = u.len();
        let half = T::lit(0.5);
        let mut kinetic = T::zero();
        for (k, &wk) in w.iter().enumerate().take(m) {
            kinetic += self.energy_weight(k, m) * wk * wk;
        }
        let mut strain = T::zero();
        let full = self.full(u);
        for i in 0..full.len() - 1 {
            let d = (full[i + 1] - full[i]) / self.h;
            strain += self.h * d * d;
        }
        half * kinetic + half * c * c * strain
    }

    /// Unknowns plus boundary values on the full node set.
    fn full(&self, u: &[T]) -> Vec<T> {
        match self.bc {
            FdBoundary::DirichletZero => {
                let mut v = Vec::with_capacity(u.len() + 2);
                v.push(T::zero());
                v.extend_from_slice(u);
                v.push(T::zero());
                v
            }
            FdBoundary::NeumannZero => u.to_vec(),
        }
    }
}

fn eval_source<T: Real>(source: &SourceSpec<T>, layout: &Layout<T>, t: T, u: &[T], w: &[T], out: &mut [T]) {
    let needs_dx = source.dependence() == StateDependence::ValueAndDerivatives;
    for k in 0..u.len() {
        let p = SourcePoint {
            x: layout.x(k),
            t,
            u: u[k],
            u_t: w[k],
            u_x: if needs_dx { layout.dx(u, k) } else { T::zero() },
        };
        out[k] = source.eval(&p);
    }
}

/// RK4 amplification `1 + z + z^2/2 + z^3/6 + z^4/24` for complex `z = (re, im)`.
fn rk4_amplification<T: Real>(re: T, im: T) -> T {
    // Horner in complex arithmetic
    let coeffs = [T::one() / T::lit(24.0), T::one() / T::lit(6.0), T::lit(0.5), T::one(), T::one()];
    let (mut pr, mut pi) = (T::zero(), T::zero());
    for c in coeffs {
        let nr = pr * re - pi * im + c;
        let ni = pr * im + pi * re;
        pr = nr;
        pi = ni;
    }
    (pr * pr + pi * pi).sqrt()
}

/// Largest `dt` for which every semi-discrete mode lies in the RK4 stability region.
pub fn rk4_stability_bound<T: Real>(params: &ModelParams<T>, nx: usize, bc: FdBoundary) -> T {
    let h = T::PI() / T::from_usize_lossy(nx + 1);
    let (first, last) = match bc {
        FdBoundary::DirichletZero => (1, nx),
        FdBoundary::NeumannZero => (0, nx + 1),
    };
    let four = T::lit(4.0);
    let mut roots: Vec<(T, T)> = Vec::new();
    for k in first..=last {
        let s = (T::from_usize_lossy(k) * T::PI() / T::from_usize_lossy(2 * (nx + 1))).sin();
        let kappa = four / (h * h) * s * s;
        let b = params.eps() * kappa + T::lit(2.0) * params.a();
        let q = params.c() * params.c() * kappa;
        let disc = b * b - four * q;
        if disc >= T::zero() {
            let r = disc.sqrt();
            roots.push((T::lit(-0.5) * (b - r), T::zero()));
            roots.push((T::lit(-0.5) * (b + r), T::zero()));
        } else {
            let im = T::lit(0.5) * (-disc).sqrt();
            roots.push((T::lit(-0.5) * b, im));
            roots.push((T::lit(-0.5) * b, -im));
        }
    }
    let stable = |dt: T| {
        roots
            .iter()
            .all(|(re, im)| rk4_amplification(*re * dt, *im * dt) <= T::one() + T::lit(1e-12))
    };
    let mut hi = T::one();
    while stable(hi) && hi < T::lit(1e6) {
        hi *= T::lit(2.0);
    }
    let mut lo = T::zero();
    for _ in 0..80 {
        let mid = T::lit(0.5) * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Integrates the zero-data problem on `[0, t_end]`.
pub fn solve_fd<T: Real>(
    source: &SourceSpec<T>,
    params: &ModelParams<T>,
    cfg: &FdConfig<T>,
    t_end: T,
) -> Result<FdSolution<T>> {
    if !(t_end > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("horizon must be positive, got {t_end}"),
        });
    }
    let steps = (t_end / cfg.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let dt = t_end / T::from_usize_lossy(steps);
    let bound = rk4_stability_bound(params, cfg.nx, cfg.bc);
    if cfg.scheme == FdScheme::ExplicitRk4 && dt > bound {
        return Err(Error::Unstable {
            dt: dt.as_f64(),
            bound: bound.as_f64(),
        });
    }
    let layout = Layout::new(cfg);
    let m = layout.unknowns();
    let d2 = Tridiagonal::second_difference(m, layout.h, cfg.bc);
    let grid = Arc::new(Grid::uniform(cfg.nx + 1, t_end, steps)?);

    let mut u = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    let mut out = Vec::with_capacity((steps + 1) * (m + 2));
    let mut energy = Vec::with_capacity(steps + 1);
    out.extend(layout.full(&u));
    energy.push(layout.energy(&u, &w, params.c()));

    match cfg.scheme {
        FdScheme::ImplicitTrapezoid => {
            let half = T::lit(0.5);
            let (a, c, eps) = (params.a(), params.c(), params.eps());
            let k = half * eps * dt + c * c * dt * dt / T::lit(4.0);
            let lhs = d2.shifted(T::one() + a * dt, -k);
            let rhs_op = d2.shifted(T::one() - a * dt, k);
            let factor = ThomasFactor::new(&lhs);
            let coupled = !source.is_linear();
            let mut f_now = vec![T::zero(); m];
            let mut f_next = vec![T::zero(); m];
            let mut base = vec![T::zero(); m];
            let mut d2u = vec![T::zero(); m];
            let mut rhs = vec![T::zero(); m];
            let mut w_next = vec![T::zero(); m];
            let mut u_next = vec![T::zero(); m];
            eval_source(source, &layout, T::zero(), &u, &w, &mut f_now);
            for step in 0..steps {
                let t_next = T::from_usize_lossy(step + 1) * dt;
                rhs_op.apply(&w, &mut base);
                d2.apply(&u, &mut d2u);
                for i in 0..m {
                    base[i] += dt * c * c * d2u[i];
                }
                // predictor: f at the explicit extrapolation of the state
                if coupled {
                    let u_pred: Vec<T> = (0..m).map(|i| u[i] + dt * w[i]).collect();
                    eval_source(source, &layout, t_next, &u_pred, &w, &mut f_next);
                } else {
                    eval_source(source, &layout, t_next, &u, &w, &mut f_next);
                }
                let passes = if coupled { 2 } else { 1 };
                for pass in 0..passes {
                    for i in 0..m {
                        rhs[i] = base[i] + half * dt * (f_now[i] + f_next[i]);
                    }
                    factor.solve(&mut rhs);
                    w_next.copy_from_slice(&rhs);
                    for i in 0..m {
                        u_next[i] = u[i] + half * dt * (w[i] + w_next[i]);
                    }
                    if pass + 1 < passes {
                        eval_source(source, &layout, t_next, &u_next, &w_next, &mut f_next);
                    }
                }
                if coupled {
                    eval_source(source, &layout, t_next, &u_next, &w_next, &mut f_now);
                } else {
                    std::mem::swap(&mut f_now, &mut f_next);
                }
                std::mem::swap(&mut u, &mut u_next);
                std::mem::swap(&mut w, &mut w_next);
                out.extend(layout.full(&u));
                energy.push(layout.energy(&u, &w, params.c()));
            }
        }
        FdScheme::ExplicitRk4 => {
            let (a, c, eps) = (params.a(), params.c(), params.eps());
            let two = T::lit(2.0);
            let rhs = |t: T, u: &[T], w: &[T], du: &mut [T], dw: &mut [T]| {
                let mut tmp = vec![T::zero(); m];
                let mut f = vec![T::zero(); m];
                eval_source(source, &layout, t, u, w, &mut f);
                du.copy_from_slice(w);
                d2.apply(w, &mut tmp);
                for i in 0..m {
                    dw[i] = eps * tmp[i] - two * a * w[i] + f[i];
                }
                d2.apply(u, &mut tmp);
                for i in 0..m {
                    dw[i] += c * c * tmp[i];
                }
            };
            let mut ks_u = vec![vec![T::zero(); m]; 4];
            let mut ks_w = vec![vec![T::zero(); m]; 4];
            let half = T::lit(0.5);
            for step in 0..steps {
                let t = T::from_usize_lossy(step) * dt;
                let stages = [(T::zero(), T::zero()), (half, half), (half, half), (T::one(), T::one())];
                for s in 0..4 {
                    let (ct, cw) = stages[s];
                    let (us, ws): (Vec<T>, Vec<T>) = if s == 0 {
                        (u.clone(), w.clone())
                    } else {
                        (
                            (0..m).map(|i| u[i] + cw * dt * ks_u[s - 1][i]).collect(),
                            (0..m).map(|i| w[i] + cw * dt * ks_w[s - 1][i]).collect(),
                        )
                    };
                    let (ku, kw) = (&mut ks_u, &mut ks_w);
                    let mut du = vec![T::zero(); m];
                    let mut dw = vec![T::zero(); m];
                    rhs(t + ct * dt, &us, &ws, &mut du, &mut dw);
                    ku[s] = du;
                    kw[s] = dw;
                }
                let sixth = dt / T::lit(6.0);
                for i in 0..m {
                    u[i] += sixth * (ks_u[0][i] + two * ks_u[1][i] + two * ks_u[2][i] + ks_u[3][i]);
                    w[i] += sixth * (ks_w[0][i] + two * ks_w[1][i] + two * ks_w[2][i] + ks_w[3][i]);
                }
                out.extend(layout.full(&u));
                energy.push(layout.energy(&u, &w, params.c()));
            }
        }
    }

    let field = Field::new(grid, out, format!("fd[{}]", source.label()))?;
    Ok(FdSolution {
        field,
        energy,
        rk4_stability_bound: bound,
    })
}

/// Sup over interior nodes of `eps u_xxt + c^2 u_xx - u_tt - 2a u_t + f` by central differences.
///
/// Requires a uniform x grid; the first and last time nodes are skipped.
pub fn pde_residual<T: Real>(field: &Field<T>, source: &SourceSpec<T>, params: &ModelParams<T>) -> Result<T> {
    let grid = field.grid();
    let nx = grid.nx();
    let nt = grid.nt();
    if nx < 3 || nt < 3 {
        return Err(Error::GridMismatch("residual needs at least 3 nodes in x and t".into()));
    }
    let h = grid.x()[1] - grid.x()[0];
    let tol = T::lit(1e-9) * h;
    if grid.x().windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
        return Err(Error::GridMismatch("residual needs a uniform x grid".into()));
    }
    let dt = grid.dt();
    let two = T::lit(2.0);
    let u = |i: usize, j: usize| field.at(i, j);
    let uxx = |i: usize, j: usize| (u(i + 1, j) - two * u(i, j) + u(i - 1, j)) / (h * h);
    let mut worst = T::zero();
    for j in 1..nt - 1 {
        let t = grid.t()[j];
        for i in 1..nx - 1 {
            let ut = (u(i, j + 1) - u(i, j - 1)) / (two * dt);
            let utt = (u(i, j + 1) - two * u(i, j) + u(i, j - 1)) / (dt * dt);
            let uxxt = (uxx(i, j + 1) - uxx(i, j - 1)) / (two * dt);
            let ux = (u(i + 1, j) - u(i - 1, j)) / (two * h);
            let f = source.eval(&SourcePoint {
                x: grid.x()[i],
                t,
                u: u(i, j),
                u_t: ut,
                u_x: ux,
            });
            let r = params.eps() * uxxt + params.c() * params.c() * uxx(i, j) - utt - two * params.a() * ut + f;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams::new(0.5, 1.0, 0.05).unwrap()
    }

    #[test]
    fn zero_source_stays_zero() {
        let cfg = FdConfig::new(16, 0.01, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
        let src = SourceSpec::linear("zero", |_, _| 0.0);
        let sol = solve_fd(&src, &params(), &cfg, 1.0).unwrap();
        assert_eq!(sol.field.sup_norm(), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(FdConfig::new(4, 0.01_f64, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).is_err());
        assert!(FdConfig::new(16, 0.0_f64, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).is_err());
    }

    #[test]
    fn explicit_scheme_refused_above_bound() {
        let p = params();
        let bound = rk4_stability_bound(&p, 63, FdBoundary::DirichletZero);
        assert!(bound > 0.0);
        let src = SourceSpec::linear("s", |x: f64, _| x.sin());
        let bad = FdConfig::new(63, 1.5 * bound, FdScheme::ExplicitRk4, FdBoundary::DirichletZero).unwrap();
        assert!(matches!(solve_fd(&src, &p, &bad, 1.0), Err(Error::Unstable { .. })));
        let ok = FdConfig::new(63, 0.9 * bound, FdScheme::ExplicitRk4, FdBoundary::DirichletZero).unwrap();
        let sol = solve_fd(&src, &p, &ok, 1.0).unwrap();
        assert!(sol.field.sup_norm() < 1.0);
    }

    #[test]
    fn schemes_agree_on_smooth_problem() {
        let p = params();
        let src = SourceSpec::linear("s", |x: f64, t: f64| x.sin() * (-t).exp());
        let bound = rk4_stability_bound(&p, 31, FdBoundary::DirichletZero);
        let imp = FdConfig::new(31, bound / 4.0, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
        let exp = FdConfig::new(31, bound / 4.0, FdScheme::ExplicitRk4, FdBoundary::DirichletZero).unwrap();
        let a = solve_fd(&src, &p, &imp, 2.0).unwrap();
        let b = solve_fd(&src, &p, &exp, 2.0).unwrap();
        assert!(a.field.sup_diff(&b.field).unwrap() < 1e-4);
    }

    #[test]
    fn energy_decays_without_forcing() {
        let p = params();
        // impulse forcing for a short time, then free decay
        let src = SourceSpec::linear("kick", |x: f64, t: f64| if t < 0.2 { (2.0 * x).sin() * 10.0 } else { 0.0 });
        for bc in [FdBoundary::DirichletZero, FdBoundary::NeumannZero] {
            let cfg = FdConfig::new(40, 0.01, FdScheme::ImplicitTrapezoid, bc).unwrap();
            let sol = solve_fd(&src, &p, &cfg, 5.0).unwrap();
            let start = 21;
            for w in sol.energy[start..].windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{bc:?}");
            }
            assert!(sol.energy.last().unwrap() < &sol.energy[start]);
        }
    }

    #[test]
    fn dirichlet_walls_are_exactly_zero() {
        let p = params();
        let src = SourceSpec::linear("s", |x: f64, t: f64| x * (std::f64::consts::PI - x) + t);
        let cfg = FdConfig::new(20, 0.02, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
        let sol = solve_fd(&src, &p, &cfg, 1.0).unwrap();
        let nx = sol.field.grid().nx();
        for it in 0..sol.field.grid().nt() {
            assert_eq!(sol.field.at(0, it), 0.0);
            assert_eq!(sol.field.at(nx - 1, it), 0.0);
        }
    }
}
