//! Problem parameters, space-time grids, source descriptions and sampled fields.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Physical parameters of `eps*u_xxt + c^2*u_xx - u_tt - 2a*u_t = -f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    a: T,
    c: T,
    eps: T,
    b1: Option<T>,
}

impl<T: Real> ModelParams<T> {
    /// Validates `a > 0`, `c > 0`, `eps >= 0`.
    ///
    /// `b1 = sqrt(c^2 - a^2)` is populated only when `a < c`.
    pub fn new(a: T, c: T, eps: T) -> Result<Self> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("damping must be positive and finite, got {a}"),
            });
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("wave speed must be positive and finite, got {c}"),
            });
        }
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("dissipation must be non-negative and finite, got {eps}"),
            });
        }
        let b1 = (a < c).then(|| ((c - a) * (c + a)).sqrt());
        Ok(Self { a, c, eps, b1 })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// `sqrt(c^2 - a^2)`, absent when `a >= c`.
    pub fn b1(&self) -> Option<T> {
        self.b1
    }

    /// True in the overdamped-first-mode regime `a >= c`.
    pub fn damping_dominates(&self) -> bool {
        self.b1.is_none()
    }

    /// Same `a`, `c` with a different dissipation.
    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::new(self.a, self.c, eps)
    }

    /// The hyperbolic limit `eps = 0`.
    pub fn telegraph_limit(&self) -> Self {
        Self { eps: T::zero(), ..*self }
    }
}

/// Tensor grid on the strip `[0, pi] x [0, T]`, uniform in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    x: Vec<T>,
    t: Vec<T>,
    dt: T,
}

impl<T: Real> Grid<T> {
    /// `x` must start at 0, end at pi and increase strictly; the time axis is
    /// `0, dt, ..., steps*dt`.
    pub fn new(x: Vec<T>, dt: T, steps: usize) -> Result<Self> {
        let pi = T::PI();
        if x.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "x_nodes",
                reason: "need at least the two endpoints".into(),
            });
        }
        let tol = T::lit(64.0) * T::epsilon() * pi;
        if x[0].abs() > tol || (x[x.len() - 1] - pi).abs() > tol {
            return Err(Error::InvalidParameter {
                name: "x_nodes",
                reason: "first node must be 0 and last node pi".into(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter {
                name: "x_nodes",
                reason: "nodes must be strictly increasing".into(),
            });
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive, got {dt}"),
            });
        }
        let mut x = x;
        x[0] = T::zero();
        let last = x.len() - 1;
        x[last] = pi;
        let t = (0..=steps).map(|j| T::from_usize_lossy(j) * dt).collect();
        Ok(Self { x, t, dt })
    }

    /// `nx` uniform intervals in x, `nt` uniform steps up to `t_end`.
    pub fn uniform(nx: usize, t_end: T, nt: usize) -> Result<Self> {
        if nx == 0 || nt == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need at least one interval in x and t".into(),
            });
        }
        if !(t_end > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("horizon must be positive, got {t_end}"),
            });
        }
        let h = T::PI() / T::from_usize_lossy(nx);
        let x = (0..=nx).map(|i| T::from_usize_lossy(i) * h).collect();
        Self::new(x, t_end / T::from_usize_lossy(nt), nt)
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn t(&self) -> &[T] {
        &self.t
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn t_end(&self) -> T {
        self.t[self.t.len() - 1]
    }

    pub fn max_x_gap(&self) -> T {
        self.x
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    /// Same x nodes, time axis cut at `steps`.
    pub fn truncated(&self, steps: usize) -> Self {
        let steps = steps.min(self.nt() - 1);
        Self {
            x: self.x.clone(),
            t: self.t[..=steps].to_vec(),
            dt: self.dt,
        }
    }

    /// Replaces the x nodes, keeping the time axis.
    pub fn with_x(&self, x: Vec<T>) -> Result<Self> {
        Self::new(x, self.dt, self.nt() - 1)
    }

    /// Exact node-for-node comparison.
    pub fn aligned_with(&self, other: &Self) -> bool {
        self.dt == other.dt && self.x == other.x && self.t == other.t
    }
}

/// Arguments passed to a source evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePoint<T> {
    pub x: T,
    pub t: T,
    pub u: T,
    pub u_t: T,
    pub u_x: T,
}

impl<T: Real> SourcePoint<T> {
    pub fn at(x: T, t: T) -> Self {
        Self {
            x,
            t,
            u: T::zero(),
            u_t: T::zero(),
            u_x: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    LinearTabulated,
    Closure,
    SineGordon,
}

/// Which parts of the state a source reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StateDependence {
    None,
    Value,
    ValueAndDerivatives,
}

type Evaluator<T> = Arc<dyn Fn(&SourcePoint<T>) -> T + Send + Sync>;
type XxEvaluator<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// A forcing term `f(x, t, u, u_t, u_x)`.
#[derive(Clone)]
pub struct SourceSpec<T> {
    kind: SourceKind,
    dependence: StateDependence,
    evaluator: Evaluator<T>,
    xx_evaluator: Option<XxEvaluator<T>>,
    label: String,
}

impl<T> fmt::Debug for SourceSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceSpec")
            .field("kind", &self.kind)
            .field("dependence", &self.dependence)
            .field("has_xx", &self.xx_evaluator.is_some())
            .field("label", &self.label)
            .finish()
    }
}

impl<T: Real> SourceSpec<T> {
    /// A linear source `F(x, t)`.
    pub fn linear<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(T, T) -> T + Send + Sync + 'static,
    {
        Self {
            kind: SourceKind::Closure,
            dependence: StateDependence::None,
            evaluator: Arc::new(move |p: &SourcePoint<T>| f(p.x, p.t)),
            xx_evaluator: None,
            label: label.into(),
        }
    }

    /// Attaches `F_xx(x, t)`, needed by the second-derivative solve.
    pub fn with_xx<G>(mut self, g: G) -> Self
    where
        G: Fn(T, T) -> T + Send + Sync + 'static,
    {
        self.xx_evaluator = Some(Arc::new(g));
        self
    }

    /// A general state-dependent closure.
    pub fn nonlinear<F>(label: impl Into<String>, dependence: StateDependence, f: F) -> Self
    where
        F: Fn(&SourcePoint<T>) -> T + Send + Sync + 'static,
    {
        Self {
            kind: SourceKind::Closure,
            dependence,
            evaluator: Arc::new(f),
            xx_evaluator: None,
            label: label.into(),
        }
    }

    /// Perturbed sine-Gordon forcing `f = forcing*sin(x) - lambda*sin(u)`.
    ///
    /// With `lambda = 1` the governing equation becomes
    /// `u_tt - c^2 u_xx + 2a u_t - eps u_xxt + sin(u) = forcing*sin(x)`.
    pub fn sine_gordon(lambda: T, forcing: T) -> Self {
        Self {
            kind: SourceKind::SineGordon,
            dependence: StateDependence::Value,
            evaluator: Arc::new(move |p: &SourcePoint<T>| forcing * p.x.sin() - lambda * p.u.sin()),
            xx_evaluator: None,
            label: format!("sine_gordon(lambda={lambda}, forcing={forcing})"),
        }
    }

    /// Bilinear interpolation of a table `values[it * x.len() + ix]`.
    pub fn tabulated(label: impl Into<String>, x: Vec<T>, t: Vec<T>, values: Vec<T>) -> Result<Self> {
        if x.len() < 2 || t.len() < 2 || values.len() != x.len() * t.len() {
            return Err(Error::Config(format!(
                "tabulated source needs >= 2 x and t nodes and {} values, got {}",
                x.len() * t.len(),
                values.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("tabulated nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("tabulated source contains non-finite values".into()));
        }
        let table = Arc::new((x, t, values));
        Ok(Self {
            kind: SourceKind::LinearTabulated,
            dependence: StateDependence::None,
            evaluator: Arc::new(move |p: &SourcePoint<T>| {
                let (x, t, v) = &*table;
                let (ix, wx) = bracket(x, p.x);
                let (it, wt) = bracket(t, p.t);
                let nx = x.len();
                let at = |i: usize, j: usize| v[j * nx + i];
                let lo = at(ix, it) * (T::one() - wx) + at(ix + 1, it) * wx;
                let hi = at(ix, it + 1) * (T::one() - wx) + at(ix + 1, it + 1) * wx;
                lo * (T::one() - wt) + hi * wt
            }),
            xx_evaluator: None,
            label: label.into(),
        })
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn dependence(&self) -> StateDependence {
        self.dependence
    }

    pub fn is_linear(&self) -> bool {
        self.dependence == StateDependence::None
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_xx(&self) -> bool {
        self.xx_evaluator.is_some()
    }

    #[inline]
    pub fn eval(&self, p: &SourcePoint<T>) -> T {
        (self.evaluator)(p)
    }

    #[inline]
    pub fn eval_xt(&self, x: T, t: T) -> T {
        (self.evaluator)(&SourcePoint::at(x, t))
    }

    pub fn eval_xx(&self, x: T, t: T) -> Option<T> {
        self.xx_evaluator.as_ref().map(|g| g(x, t))
    }

    /// Samples `F(0, t)` and `F(pi, t)` (state frozen at zero) and rejects the
    /// source when either exceeds `tol`.
    pub fn check_dirichlet_compatible(&self, t_nodes: &[T], tol: T) -> Result<()> {
        let pi = T::PI();
        for &t in t_nodes {
            for x in [T::zero(), pi] {
                let v = self.eval_xt(x, t);
                if !(v.abs() <= tol) {
                    return Err(Error::Compatibility(format!(
                        "source `{}` is {v} at x = {x}, t = {t}; F(0,t) = F(pi,t) = 0 is required",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// Samples the one-sided x-derivative at both walls.
    pub fn check_neumann_compatible(&self, t_nodes: &[T], tol: T) -> Result<()> {
        let pi = T::PI();
        let h = T::lit(1e-4).max(T::epsilon().cbrt());
        let three = T::lit(3.0);
        let four = T::lit(4.0);
        let two = T::lit(2.0);
        for &t in t_nodes {
            let left = (-three * self.eval_xt(T::zero(), t) + four * self.eval_xt(h, t)
                - self.eval_xt(two * h, t))
                / (two * h);
            let right = (three * self.eval_xt(pi, t) - four * self.eval_xt(pi - h, t)
                + self.eval_xt(pi - two * h, t))
                / (two * h);
            for (x, d) in [(T::zero(), left), (pi, right)] {
                if !(d.abs() <= tol) {
                    return Err(Error::Compatibility(format!(
                        "source `{}` has F_x = {d} at x = {x}, t = {t}; zero wall flux is required",
                        self.label
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Index of the cell containing `v` and the fractional position inside it.
/// Values outside the table are clamped to the end cells.
fn bracket<T: Real>(nodes: &[T], v: T) -> (usize, T) {
    let last = nodes.len() - 2;
    let i = match nodes.binary_search_by(|n| n.partial_cmp(&v).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(last),
        Err(0) => 0,
        Err(i) => (i - 1).min(last),
    };
    let w = ((v - nodes[i]) / (nodes[i + 1] - nodes[i])).max(T::zero()).min(T::one());
    (i, w)
}

/// Samples on a [`Grid`], stored time-major: `values[it * nx + ix]`.
#[derive(Debug, Clone)]
pub struct Field<T> {
    values: Vec<T>,
    grid: Arc<Grid<T>>,
    label: String,
}

impl<T: Real> Field<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.nx() * grid.nt() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.nt()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite field entry at x-node {}, t-node {}",
                pos % grid.nx(),
                pos / grid.nx()
            )));
        }
        Ok(Self {
            values,
            grid,
            label: label.into(),
        })
    }

    pub fn zeros(grid: Arc<Grid<T>>, label: impl Into<String>) -> Self {
        let n = grid.nx() * grid.nt();
        Self {
            values: vec![T::zero(); n],
            grid,
            label: label.into(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn at(&self, ix: usize, it: usize) -> T {
        self.values[it * self.grid.nx() + ix]
    }

    pub fn time_slice(&self, it: usize) -> &[T] {
        let nx = self.grid.nx();
        &self.values[it * nx..(it + 1) * nx]
    }

    fn check_aligned(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.aligned_with(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "`{}` is on a {}x{} grid, `{}` on a {}x{} grid (or nodes differ)",
                self.label,
                self.grid.nx(),
                self.grid.nt(),
                other.label,
                other.grid.nx(),
                other.grid.nt()
            )))
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_aligned(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect();
        Field::new(self.grid.clone(), values, format!("{} + {}", self.label, other.label))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_aligned(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a - *b).collect();
        Field::new(self.grid.clone(), values, format!("{} - {}", self.label, other.label))
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Sup-norm over time nodes `0..=it_max`.
    pub fn sup_norm_until(&self, it_max: usize) -> T {
        let nx = self.grid.nx();
        let end = ((it_max + 1) * nx).min(self.values.len());
        self.values[..end].iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sup_diff(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.sup_norm())
    }
}
