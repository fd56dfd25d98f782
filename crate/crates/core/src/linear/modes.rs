//! Modal time series, projection onto the sine/cosine basis, and synthesis.

use std::sync::Arc;

use rayon::prelude::*;

use super::quadrature::XQuadrature;
use crate::error::{Error, Result};
use crate::kernels::Basis;
use crate::model::{Field, Grid};
use crate::scalar::Real;
use crate::summation::CompensatedSum;

/// Per-mode time samples `c_n(t_j)` on a uniform time axis.
///
/// Sine series hold modes `1..=n_max`, cosine series `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSeries<T> {
    basis: Basis,
    n_max: usize,
    dt: T,
    nt: usize,
    coeffs: Vec<Vec<T>>,
    errors: Vec<T>,
}

impl<T: Real> ModeSeries<T> {
    pub fn zeros(basis: Basis, n_max: usize, dt: T, nt: usize) -> Self {
        let count = mode_count(basis, n_max);
        Self {
            basis,
            n_max,
            dt,
            nt,
            coeffs: vec![vec![T::zero(); nt]; count],
            errors: vec![T::zero(); count],
        }
    }

    /// Builds a series from explicit samples, one vector per mode in ascending order.
    pub fn from_parts(basis: Basis, n_max: usize, dt: T, coeffs: Vec<Vec<T>>, errors: Vec<T>) -> Result<Self> {
        let count = mode_count(basis, n_max);
        if coeffs.len() != count || errors.len() != count {
            return Err(Error::Config(format!(
                "expected {count} modes for n_max = {n_max}, got {} coefficient rows and {} errors",
                coeffs.len(),
                errors.len()
            )));
        }
        let nt = coeffs.first().map_or(0, Vec::len);
        if coeffs.iter().any(|c| c.len() != nt) {
            return Err(Error::Config("mode rows have different lengths".into()));
        }
        Ok(Self {
            basis,
            n_max,
            dt,
            nt,
            coeffs,
            errors,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn first_mode(&self) -> usize {
        first_mode(self.basis)
    }

    pub fn modes(&self) -> std::ops::RangeInclusive<usize> {
        self.first_mode()..=self.n_max
    }

    pub fn coeff(&self, n: usize) -> &[T] {
        &self.coeffs[n - self.first_mode()]
    }

    pub fn coeff_mut(&mut self, n: usize) -> &mut Vec<T> {
        let k = n - self.first_mode();
        &mut self.coeffs[k]
    }

    /// Sup-in-time error estimate attached to mode `n`.
    pub fn error(&self, n: usize) -> T {
        self.errors[n - self.first_mode()]
    }

    pub fn set_error(&mut self, n: usize, e: T) {
        let k = n - self.first_mode();
        self.errors[k] = e;
    }

    /// Sum of the per-mode error estimates (bounds the synthesized field error).
    pub fn total_error(&self) -> T {
        CompensatedSum::sum_iter(self.errors.iter().copied())
    }

    /// `sup_t |c_n(t)|` for every mode.
    pub fn sup_magnitudes(&self) -> Vec<T> {
        self.coeffs
            .iter()
            .map(|c| c.iter().fold(T::zero(), |m, v| m.max(v.abs())))
            .collect()
    }

    /// `sum_j (pi/2) c_n(t_j)^2` over modes (plus `pi c_0^2` for cosine): the squared L2 norm
    /// of the synthesized function at time node `it`.
    pub fn l2_norm_sq(&self, it: usize) -> T {
        let half_pi = T::FRAC_PI_2();
        let mut acc = CompensatedSum::new();
        for n in self.modes() {
            let c = self.coeff(n)[it];
            let w = if n == 0 { T::PI() } else { half_pi };
            acc.add(w * c * c);
        }
        acc.value()
    }

    /// Keeps the first `nt` time samples.
    pub fn truncated_in_time(&self, nt: usize) -> Self {
        let nt = nt.min(self.nt);
        Self {
            basis: self.basis,
            n_max: self.n_max,
            dt: self.dt,
            nt,
            coeffs: self.coeffs.iter().map(|c| c[..nt].to_vec()).collect(),
            errors: self.errors.clone(),
        }
    }

    /// Pointwise map of every coefficient row; errors scale by `|scale(n)|`.
    pub fn map_modes(&self, scale: impl Fn(usize) -> T) -> Self {
        let mut out = self.clone();
        for n in self.modes() {
            let s = scale(n);
            out.coeff_mut(n).iter_mut().for_each(|v| *v *= s);
            out.set_error(n, self.error(n) * s.abs());
        }
        out
    }
}

fn first_mode(basis: Basis) -> usize {
    match basis {
        Basis::Sine => 1,
        Basis::CosineWithConstant => 0,
    }
}

fn mode_count(basis: Basis, n_max: usize) -> usize {
    n_max + 1 - first_mode(basis)
}

#[inline]
pub(crate) fn basis_fn<T: Real>(basis: Basis, n: usize, x: T) -> T {
    let nx = T::from_usize_lossy(n) * x;
    match basis {
        Basis::Sine => nx.sin(),
        Basis::CosineWithConstant => nx.cos(),
    }
}

/// Projection normalization: `2/pi`, or `1/pi` for the constant cosine mode.
fn norm<T: Real>(n: usize) -> T {
    if n == 0 {
        T::FRAC_1_PI()
    } else {
        T::FRAC_2_PI()
    }
}

/// Whether the coarse rule is the trapezoid subset of the fine one (Richardson factor 1/3)
/// or an independent lower-order rule (factor 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CoarseKind {
    TrapezoidHalf,
    LowerOrder,
}

/// Core projection: `sample(x, it)` gives the integrand at quadrature nodes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn project_with<T, F>(
    sample: F,
    fine: &XQuadrature<T>,
    coarse: &XQuadrature<T>,
    coarse_kind: CoarseKind,
    basis: Basis,
    n_max: usize,
    dt: T,
    nt: usize,
) -> Result<ModeSeries<T>>
where
    T: Real,
    F: Fn(T, usize) -> T + Sync,
{
    fine.check_resolves(n_max)?;
    let first = first_mode(basis);
    let count = mode_count(basis, n_max);
    let table = |q: &XQuadrature<T>| -> Vec<Vec<T>> {
        (first..=n_max)
            .map(|n| {
                q.nodes()
                    .iter()
                    .zip(q.weights())
                    .map(|(&x, &w)| norm::<T>(n) * w * basis_fn(basis, n, x))
                    .collect()
            })
            .collect()
    };
    let fine_tab = table(fine);
    let coarse_tab = table(coarse);
    let richardson = match coarse_kind {
        CoarseKind::TrapezoidHalf => T::one() / T::lit(3.0),
        CoarseKind::LowerOrder => T::one(),
    };
    let round = T::lit(16.0) * T::epsilon();

    // per time node: (coefficients, error estimates)
    let per_time: Vec<(Vec<T>, Vec<T>)> = (0..nt)
        .into_par_iter()
        .map(|it| {
            let fv: Vec<T> = fine.nodes().iter().map(|&x| sample(x, it)).collect();
            let cv: Vec<T> = coarse.nodes().iter().map(|&x| sample(x, it)).collect();
            let mut coeffs = Vec::with_capacity(count);
            let mut errs = Vec::with_capacity(count);
            for k in 0..count {
                let mut acc = CompensatedSum::new();
                let mut mag = T::zero();
                for (wphi, f) in fine_tab[k].iter().zip(&fv) {
                    let term = *wphi * *f;
                    acc.add(term);
                    mag += term.abs();
                }
                let value = acc.value();
                let coarse_value = CompensatedSum::sum_iter(coarse_tab[k].iter().zip(&cv).map(|(w, f)| *w * *f));
                coeffs.push(value);
                errs.push(richardson * (value - coarse_value).abs() + round * mag);
            }
            (coeffs, errs)
        })
        .collect();

    let mut coeffs = vec![vec![T::zero(); nt]; count];
    let mut errors = vec![T::zero(); count];
    for (it, (c, e)) in per_time.into_iter().enumerate() {
        for k in 0..count {
            coeffs[k][it] = c[k];
            errors[k] = errors[k].max(e[k]);
        }
    }
    if coeffs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("projection produced non-finite coefficients".into()));
    }
    ModeSeries::from_parts(basis, n_max, dt, coeffs, errors)
}

/// Projects a sampled field with the trapezoid rule on its own x nodes.
pub fn project_field<T: Real>(field: &Field<T>, basis: Basis, n_max: usize) -> Result<ModeSeries<T>> {
    let grid = field.grid();
    let fine = XQuadrature::trapezoid(grid.x());
    let coarse = XQuadrature::trapezoid_coarse(grid.x());
    let lookup = |x: T| -> usize {
        grid.x()
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite nodes"))
            .expect("quadrature nodes are grid nodes")
    };
    project_with(
        |x, it| field.at(lookup(x), it),
        &fine,
        &coarse,
        CoarseKind::TrapezoidHalf,
        basis,
        n_max,
        grid.dt(),
        grid.nt(),
    )
}

/// Evaluates `sum_n c_n(t_j) phi_n(x_i)` on the given x nodes.
pub fn synthesize_values<T: Real>(modes: &ModeSeries<T>, x_nodes: &[T]) -> Vec<T> {
    let nx = x_nodes.len();
    let phi: Vec<Vec<T>> = modes
        .modes()
        .map(|n| x_nodes.iter().map(|&x| basis_fn(modes.basis(), n, x)).collect())
        .collect();
    let first = modes.first_mode();
    let rows: Vec<Vec<T>> = (0..modes.nt())
        .into_par_iter()
        .map(|it| {
            (0..nx)
                .map(|ix| {
                    let mut acc = CompensatedSum::new();
                    for n in modes.modes().rev() {
                        acc.add(modes.coeff(n)[it] * phi[n - first][ix]);
                    }
                    acc.value()
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Synthesizes a [`Field`] on `grid` (time axes must agree).
pub fn synthesize<T: Real>(modes: &ModeSeries<T>, grid: Arc<Grid<T>>, label: impl Into<String>) -> Result<Field<T>> {
    if grid.nt() != modes.nt() || grid.dt() != modes.dt() {
        return Err(Error::GridMismatch(format!(
            "mode series has {} samples at dt = {}, grid has {} at dt = {}",
            modes.nt(),
            modes.dt(),
            grid.nt(),
            grid.dt()
        )));
    }
    let values = synthesize_values(modes, grid.x());
    Field::new(grid, values, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gl(panels: usize, order: usize) -> (XQuadrature<f64>, XQuadrature<f64>) {
        (
            XQuadrature::gauss_legendre(panels, order).unwrap(),
            XQuadrature::gauss_legendre(panels, order - 2).unwrap(),
        )
    }

    #[test]
    fn single_mode_projects_to_itself() {
        let (f, c) = gl(16, 10);
        let m = project_with(
            |x, it| (3.0 * x).sin() * (1.0 + it as f64),
            &f,
            &c,
            CoarseKind::LowerOrder,
            Basis::Sine,
            12,
            0.1,
            4,
        )
        .unwrap();
        for n in 1..=12 {
            for it in 0..4 {
                let expect = if n == 3 { 1.0 + it as f64 } else { 0.0 };
                assert!((m.coeff(n)[it] - expect).abs() < 1e-13, "n={n}");
            }
        }
    }

    #[test]
    fn parabola_coefficients_match_closed_form() {
        let (f, c) = gl(32, 10);
        let m = project_with(|x, _| x * (PI - x), &f, &c, CoarseKind::LowerOrder, Basis::Sine, 31, 1.0, 1).unwrap();
        for n in 1..=31 {
            let expect = if n % 2 == 1 { 8.0 / (PI * (n as f64).powi(3)) } else { 0.0 };
            assert!((m.coeff(n)[0] - expect).abs() < 1e-13, "n={n}");
            assert!(m.error(n) < 1e-10);
        }
    }

    #[test]
    fn cosine_constant_mode_is_mean() {
        let (f, c) = gl(8, 10);
        let m = project_with(|x, _| 2.0 + x.cos(), &f, &c, CoarseKind::LowerOrder, Basis::CosineWithConstant, 4, 1.0, 1)
            .unwrap();
        assert!((m.coeff(0)[0] - 2.0).abs() < 1e-14);
        assert!((m.coeff(1)[0] - 1.0).abs() < 1e-14);
        assert!(m.coeff(2)[0].abs() < 1e-14);
    }

    #[test]
    fn underresolved_projection_is_refused() {
        let (f, c) = gl(2, 4);
        let err = project_with(|x, _| x, &f, &c, CoarseKind::LowerOrder, Basis::Sine, 40, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientResolution { .. }));
    }

    #[test]
    fn synthesize_single_mode() {
        let grid = Arc::new(Grid::<f64>::uniform(10, 1.0, 3).unwrap());
        let mut m = ModeSeries::zeros(Basis::Sine, 5, grid.dt(), grid.nt());
        m.coeff_mut(1).iter_mut().for_each(|v| *v = 1.0);
        let field = synthesize(&m, grid.clone(), "v").unwrap();
        for it in 0..grid.nt() {
            for (ix, x) in grid.x().iter().enumerate() {
                assert!((field.at(ix, it) - x.sin()).abs() < 1e-15);
            }
        }
        assert_eq!(field.at(0, 1), 0.0);
    }

    #[test]
    fn parseval_on_projected_field() {
        let grid = Arc::new(Grid::<f64>::uniform(400, 1.0, 1).unwrap());
        let vals: Vec<f64> = (0..grid.nt())
            .flat_map(|_| grid.x().iter().map(|x| x.sin() + 0.5 * (2.0 * x).sin()).collect::<Vec<_>>())
            .collect();
        let field = Field::new(grid, vals, "f").unwrap();
        let m = project_field(&field, Basis::Sine, 8).unwrap();
        // int_0^pi (sin x + 0.5 sin 2x)^2 = pi/2 (1 + 0.25)
        assert!((m.l2_norm_sq(0) - PI / 2.0 * 1.25).abs() < 1e-6);
    }
}
