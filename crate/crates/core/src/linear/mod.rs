//! Fourier projection, per-mode convolution and synthesis for linear sources.

mod convolution;
mod modes;
mod quadrature;
mod solve;

pub use convolution::{convolve_modes, trapezoid_convolution, ConvolutionMethod, KernelWeight, ModalKernel};
pub use modes::{project_field, synthesize, synthesize_values, ModeSeries};
pub use quadrature::{QuadratureChoice, XQuadrature};
pub use solve::{
    response_tail, solve_linear, BoundaryKind, LinearOptions, LinearSolution, SolveCertificate, SolveForm,
};

pub(crate) use modes::{basis_fn, project_with, CoarseKind};
pub(crate) use solve::{fitted_decay, quadrature_pair};

use crate::error::Result;
use crate::kernels::Basis;
use crate::model::{Grid, SourceSpec};
use crate::scalar::Real;

/// Projects an evaluable linear source on the grid's time nodes.
pub fn project<T: Real>(
    source: &SourceSpec<T>,
    basis: Basis,
    n_max: usize,
    grid: &Grid<T>,
    quadrature: QuadratureChoice,
) -> Result<ModeSeries<T>> {
    let (fine, coarse, kind) = quadrature_pair(quadrature, grid, n_max)?;
    let ts = grid.t();
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
}
