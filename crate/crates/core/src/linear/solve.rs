//! Linear solves of the zero-data problem by projection, modal convolution and synthesis.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::convolution::{convolve_modes, ConvolutionMethod, KernelWeight, ModalKernel};
use super::modes::{project_with, synthesize, CoarseKind, ModeSeries};
use super::quadrature::{QuadratureChoice, XQuadrature};
use crate::error::{Error, Result};
use crate::kernels::{Basis, ModeSpectrum};
use crate::model::{Field, Grid, ModelParams, SourceSpec};
use crate::scalar::Real;
use crate::summation::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `v(0, t) = v(pi, t) = 0`.
    Dirichlet,
    /// `v_x(0, t) = v_x(pi, t) = 0`.
    Neumann,
}

impl BoundaryKind {
    pub fn basis(self) -> Basis {
        match self {
            Self::Dirichlet => Basis::Sine,
            Self::Neumann => Basis::CosineWithConstant,
        }
    }
}

/// Which representation of the solution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveForm {
    /// Green function against `F`.
    GForm,
    /// `1/n^2`-weighted kernel against `-F_xx`.
    HForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions<T> {
    /// Target for the spectral truncation error of the field.
    pub tol: T,
    pub form: SolveForm,
    /// Fixed truncation index; chosen adaptively when `None`.
    pub n_max: Option<usize>,
    pub quadrature: QuadratureChoice,
    pub method: ConvolutionMethod,
    /// Upper limit for the adaptive truncation search.
    pub max_modes: usize,
}

impl<T: Real> Default for LinearOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            form: SolveForm::GForm,
            n_max: None,
            quadrature: QuadratureChoice::Auto,
            method: ConvolutionMethod::Direct,
            max_modes: 1024,
        }
    }
}

/// Error budget of a solve. Every entry bounds a sup-norm contribution to the field error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveCertificate {
    /// Discarded modes `n > n_max`.
    pub truncation: f64,
    /// True when the truncation bound follows from `|F_n| <= sup|F_xx| / n^2` rather than a fit.
    pub truncation_rigorous: bool,
    /// Projection error propagated through the modal kernels.
    pub projection: f64,
    /// Time-quadrature error of the convolutions (Richardson estimate plus rounding).
    pub convolution: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct LinearSolution<T> {
    pub field: Field<T>,
    /// Modal coefficients `v_n(t_j)` of the solution.
    pub modes: ModeSeries<T>,
    /// Modal coefficients of the source as fed to the convolution.
    pub source_modes: ModeSeries<T>,
    pub n_max: usize,
    pub certificate: SolveCertificate,
}

/// Builds the fine/coarse quadrature pair for a choice.
pub(crate) fn quadrature_pair<T: Real>(
    choice: QuadratureChoice,
    grid: &Grid<T>,
    n_max: usize,
) -> Result<(XQuadrature<T>, XQuadrature<T>, CoarseKind)> {
    match choice.resolve(n_max) {
        QuadratureChoice::GridTrapezoid => Ok((
            XQuadrature::trapezoid(grid.x()),
            XQuadrature::trapezoid_coarse(grid.x()),
            CoarseKind::TrapezoidHalf,
        )),
        QuadratureChoice::GaussLegendre { panels, order } => {
            let coarse_order = if order > 2 { order - 2 } else { 1 };
            Ok((
                XQuadrature::gauss_legendre(panels, order)?,
                XQuadrature::gauss_legendre(panels, coarse_order)?,
                CoarseKind::LowerOrder,
            ))
        }
        QuadratureChoice::Auto => unreachable!("resolved above"),
    }
}

/// Upper bound for `sum_{n > n_max} c n^{-p} int_0^T |h_n|`.
pub fn response_tail<T: Real>(params: &ModelParams<T>, c: T, p: T, n_max: usize, horizon: T) -> T {
    if c == T::zero() || horizon == T::zero() {
        return T::zero();
    }
    let (a, cw, eps) = (params.a(), params.c(), params.eps());
    let sqrt2 = T::lit(std::f64::consts::SQRT_2);
    let threshold = if eps > T::zero() {
        (T::lit(2.0) * sqrt2 * cw / eps).ceil()
    } else {
        (sqrt2 * a / cw).ceil()
    };
    let explicit_cap = 2_000_000usize;
    let last = threshold
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(n_max.saturating_mul(64))
        .min(n_max + explicit_cap)
        .max(n_max + 1);
    let big_l = T::from_usize_lossy(last);
    let mut acc = CompensatedSum::new();
    for n in (n_max + 1..=last).rev() {
        let nf = T::from_usize_lossy(n);
        acc.add(c * nf.powf(-p) * ModeSpectrum::new(params, n).integral_abs_bound(horizon));
    }
    // beyond `last`: int |h_n| <= T beta_n
    let far = if eps > T::zero() && big_l >= threshold {
        // beta_n <= sqrt(2)/(eps n^2)
        let q = p + T::lit(2.0);
        c * horizon * sqrt2 / eps * big_l.powf(T::one() - q) / (q - T::one())
    } else if eps == T::zero() && big_l >= threshold {
        let next = big_l + T::one();
        let kappa = (cw * cw - a * a / (next * next)).sqrt();
        let q = p + T::one();
        c * horizon / kappa * big_l.powf(T::one() - q) / (q - T::one())
    } else {
        // int |h_n| <= T^2/2
        let q = p;
        if q > T::one() {
            c * horizon * horizon / T::lit(2.0) * big_l.powf(T::one() - q) / (q - T::one())
        } else {
            T::infinity()
        }
    };
    acc.value() + far
}

/// Least-squares fit of `|F_n| ~ C n^{-p}` on the upper half of the projected modes.
pub(crate) fn fitted_decay<T: Real>(source_modes: &ModeSeries<T>) -> (T, T) {
    let n_max = source_modes.n_max();
    let mags = source_modes.sup_magnitudes();
    let first = source_modes.first_mode();
    let noise = source_modes
        .modes()
        .map(|n| source_modes.error(n))
        .fold(T::zero(), T::max)
        .max(T::lit(64.0) * T::epsilon() * mags.iter().copied().fold(T::zero(), T::max))
        .max(T::min_positive_value());
    let lo = (n_max / 2).max(1);
    let pts: Vec<(T, T)> = (lo..=n_max)
        .filter(|&n| n >= first && n > 0)
        .map(|n| (n, mags[n - first]))
        .filter(|(_, m)| *m > T::lit(4.0) * noise)
        .map(|(n, m)| (T::from_usize_lossy(n).ln(), m.ln()))
        .collect();
    let nf = T::from_usize_lossy(n_max.max(1));
    if pts.len() < 3 {
        // nothing resolved above the quadrature noise: assume it continues at that level
        let two = T::lit(2.0);
        return (T::lit(4.0) * noise * nf.powf(two), two);
    }
    let k = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let p = (-slope).max(T::lit(0.5));
    // envelope constant: dominate every fitted point
    let c = pts
        .iter()
        .map(|(ln_n, ln_m)| (*ln_m + p * *ln_n).exp())
        .fold(T::zero(), T::max);
    (c, p)
}

/// Bound `sup_{t} (2/pi) int |F_xx| dx` with the fine quadrature.
fn second_derivative_level<T: Real>(source: &SourceSpec<T>, grid: &Grid<T>, quad: &XQuadrature<T>) -> T {
    grid.t()
        .iter()
        .map(|&t| {
            let s = CompensatedSum::sum_iter(
                quad.nodes()
                    .iter()
                    .zip(quad.weights())
                    .map(|(&x, &w)| w * source.eval_xx(x, t).unwrap_or(T::zero()).abs()),
            );
            T::FRAC_2_PI() * s
        })
        .fold(T::zero(), T::max)
}

fn sampled_scale<T: Real>(source: &SourceSpec<T>, grid: &Grid<T>) -> T {
    let mut m = T::zero();
    for &t in grid.t().iter().step_by((grid.nt() / 16).max(1)) {
        for k in 0..=32 {
            let x = T::PI() * T::from_usize_lossy(k) / T::lit(32.0);
            m = m.max(source.eval_xt(x, t).abs());
        }
    }
    m
}

/// Checks the boundary compatibility needed by the second-derivative form.
fn compatible<T: Real>(source: &SourceSpec<T>, boundary: BoundaryKind, grid: &Grid<T>) -> Result<()> {
    let scale = sampled_scale(source, grid).max(T::one());
    match boundary {
        BoundaryKind::Dirichlet => source.check_dirichlet_compatible(grid.t(), T::lit(1e-9) * scale),
        BoundaryKind::Neumann => source.check_neumann_compatible(grid.t(), T::lit(1e-5) * scale),
    }
}

/// Modal source coefficients as fed to the convolution, for the chosen form.
fn source_modes<T: Real>(
    source: &SourceSpec<T>,
    boundary: BoundaryKind,
    form: SolveForm,
    grid: &Grid<T>,
    n_max: usize,
    quadrature: QuadratureChoice,
) -> Result<ModeSeries<T>> {
    let (fine, coarse, kind) = quadrature_pair(quadrature, grid, n_max)?;
    let basis = boundary.basis();
    let ts = grid.t();
    let plain = || {
        project_with(
            |x, it| source.eval_xt(x, ts[it]),
            &fine,
            &coarse,
            kind,
            basis,
            n_max,
            grid.dt(),
            grid.nt(),
        )
    };
    match form {
        SolveForm::GForm => plain(),
        SolveForm::HForm => {
            let mut xx = project_with(
                |x, it| -source.eval_xx(x, ts[it]).unwrap_or(T::zero()),
                &fine,
                &coarse,
                kind,
                basis,
                n_max,
                grid.dt(),
                grid.nt(),
            )?;
            if basis == Basis::CosineWithConstant {
                // the constant mode has no second-derivative representation
                let f = plain()?;
                *xx.coeff_mut(0) = f.coeff(0).to_vec();
                xx.set_error(0, f.error(0));
            }
            Ok(xx)
        }
    }
}

/// Solves the zero-data problem for a linear source.
pub fn solve_linear<T: Real>(
    boundary: BoundaryKind,
    source: &SourceSpec<T>,
    params: &ModelParams<T>,
    grid: Arc<Grid<T>>,
    opts: &LinearOptions<T>,
) -> Result<LinearSolution<T>> {
    if !source.is_linear() {
        return Err(Error::Config(format!(
            "source `{}` depends on the state; use the nonlinear solver",
            source.label()
        )));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {}", opts.tol),
        });
    }
    if opts.form == SolveForm::HForm {
        if !source.has_xx() {
            return Err(Error::Config(format!(
                "second-derivative form requested but source `{}` has no F_xx evaluator",
                source.label()
            )));
        }
        compatible(source, boundary, &grid)?;
    }
    let rigorous_tail = source.has_xx() && compatible(source, boundary, &grid).is_ok();
    let horizon = grid.t_end();

    let mut n_max = opts.n_max.unwrap_or(16).max(1);
    let (f_modes, truncation) = loop {
        let f_modes = source_modes(source, boundary, opts.form, &grid, n_max, opts.quadrature)?;
        let truncation = if rigorous_tail {
            let (fine, _, _) = quadrature_pair(opts.quadrature, &grid, n_max)?;
            let m2 = second_derivative_level(source, &grid, &fine);
            response_tail(params, m2, T::lit(2.0), n_max, horizon)
        } else {
            let (c, p) = fitted_decay(&f_modes);
            response_tail(params, c, p, n_max, horizon)
        };
        if opts.n_max.is_some() || truncation <= opts.tol {
            break (f_modes, truncation);
        }
        if n_max >= opts.max_modes {
            return Err(Error::ToleranceUnreachable {
                requested: opts.tol.as_f64(),
                achievable: truncation.as_f64(),
                cap: opts.max_modes,
            });
        }
        n_max = (n_max * 2).min(opts.max_modes);
    };

    let weight = match opts.form {
        SolveForm::GForm => KernelWeight::Unit,
        SolveForm::HForm => KernelWeight::InverseSquare,
    };
    let modes = convolve_modes(&f_modes, params, weight, ModalKernel::Response, opts.method)?;

    let projection = CompensatedSum::sum_iter(f_modes.modes().map(|n| {
        let w = match (opts.form, n) {
            (SolveForm::HForm, n) if n > 0 => T::one() / T::from_usize_lossy(n * n),
            _ => T::one(),
        };
        w * f_modes.error(n) * ModeSpectrum::new(params, n).integral_abs_bound(horizon)
    }));
    let quadrature_total = modes.total_error();
    let convolution = (quadrature_total - projection).max(T::zero());
    let field = synthesize(&modes, grid, format!("v[{}]", source.label()))?;
    let certificate = SolveCertificate {
        truncation: truncation.as_f64(),
        truncation_rigorous: rigorous_tail,
        projection: projection.as_f64(),
        convolution: convolution.as_f64(),
        total: (truncation + quadrature_total).as_f64(),
    };
    Ok(LinearSolution {
        field,
        modes,
        source_modes: f_modes,
        n_max,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_source_gives_zero_solution() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let grid = Arc::new(Grid::uniform(16, 1.0, 50).unwrap());
        let src = SourceSpec::linear("zero", |_, _| 0.0).with_xx(|_, _| 0.0);
        for form in [SolveForm::GForm, SolveForm::HForm] {
            let opts = LinearOptions { form, ..Default::default() };
            let sol = solve_linear(BoundaryKind::Dirichlet, &src, &p, grid.clone(), &opts).unwrap();
            assert_eq!(sol.field.sup_norm(), 0.0);
        }
    }

    #[test]
    fn h_form_without_second_derivative_is_a_config_error() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let grid = Arc::new(Grid::uniform(16, 1.0, 10).unwrap());
        let src = SourceSpec::linear("sin", |x: f64, _| x.sin());
        let opts = LinearOptions {
            form: SolveForm::HForm,
            ..Default::default()
        };
        assert!(matches!(
            solve_linear(BoundaryKind::Dirichlet, &src, &p, grid, &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn h_form_rejects_incompatible_source() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let grid = Arc::new(Grid::uniform(16, 1.0, 10).unwrap());
        let src = SourceSpec::linear("one", |_, _| 1.0).with_xx(|_, _| 0.0);
        let opts = LinearOptions {
            form: SolveForm::HForm,
            ..Default::default()
        };
        assert!(matches!(
            solve_linear(BoundaryKind::Dirichlet, &src, &p, grid, &opts),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn nonlinear_source_is_refused() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let grid = Arc::new(Grid::uniform(16, 1.0, 10).unwrap());
        let src = SourceSpec::sine_gordon(1.0, 0.1);
        assert!(solve_linear(BoundaryKind::Dirichlet, &src, &p, grid, &LinearOptions::default()).is_err());
    }

    #[test]
    fn dirichlet_solution_vanishes_at_walls_and_time_zero() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let grid = Arc::new(Grid::uniform(20, 2.0, 200).unwrap());
        let src = SourceSpec::linear("parabola", |x: f64, t: f64| x * (std::f64::consts::PI - x) * (1.0 + t));
        let sol = solve_linear(BoundaryKind::Dirichlet, &src, &p, grid.clone(), &LinearOptions::default()).unwrap();
        for it in 0..grid.nt() {
            assert_eq!(sol.field.at(0, it), 0.0);
            assert!(sol.field.at(grid.nx() - 1, it).abs() < 1e-12);
        }
        assert!(sol.field.time_slice(0).iter().all(|v| *v == 0.0));
    }
}
