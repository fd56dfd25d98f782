//! Truncated Green-function series with certified tail bounds.

use serde::{Deserialize, Serialize};

use super::mode::{ModeSpectrum, Regime};
use super::regimes::regimes;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::summation::CompensatedSum;

/// Hard cap on the truncation index.
pub const MAX_MODES: usize = 1 << 24;

/// Above this many modes the explicit part of a tail bound switches to a cruder estimate.
const EXPLICIT_TAIL_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// Dirichlet Green function of the dissipative operator.
    #[serde(rename = "G_eps")]
    GEps,
    /// `G_eps` with the extra `1/n^2` weight (second-derivative form).
    #[serde(rename = "H_eps")]
    HEps,
    /// Neumann Green function (cosine basis plus constant mode).
    #[serde(rename = "K_eps")]
    KEps,
    /// Telegraph-equation Green function (`eps = 0`).
    #[serde(rename = "G_0")]
    G0,
    /// `G_0` with the `1/n^2` weight.
    #[serde(rename = "H_0")]
    H0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Sine,
    CosineWithConstant,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [Self::GEps, Self::HEps, Self::KEps, Self::G0, Self::H0];

    pub fn basis(self) -> Basis {
        match self {
            Self::KEps => Basis::CosineWithConstant,
            _ => Basis::Sine,
        }
    }

    /// True for the `1/n^2`-weighted kinds.
    pub fn second_derivative_form(self) -> bool {
        matches!(self, Self::HEps | Self::H0)
    }

    pub fn uses_dissipation(self) -> bool {
        matches!(self, Self::GEps | Self::HEps | Self::KEps)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::GEps => "G_eps",
            Self::HEps => "H_eps",
            Self::KEps => "K_eps",
            Self::G0 => "G_0",
            Self::H0 => "H_0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    fn effective_params<T: Real>(self, params: &ModelParams<T>) -> ModelParams<T> {
        if self.uses_dissipation() {
            *params
        } else {
            params.telegraph_limit()
        }
    }
}

/// A value together with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certified<T> {
    pub value: T,
    pub bound: T,
}

/// Rigorous bound on `(2/pi) sum_{n > m} n^{-2p} |h_n(t)|`, `p = 1` when `weighted`.
pub fn tail_bound_at<T: Real>(params: &ModelParams<T>, weighted: bool, m: usize, t: T) -> T {
    if t == T::zero() {
        return T::zero();
    }
    let two_over_pi = T::lit(2.0) / T::PI();
    let (a, c, eps) = (params.a(), params.c(), params.eps());
    let weight = |n: usize| {
        if weighted {
            let nf = T::from_usize_lossy(n);
            T::one() / (nf * nf)
        } else {
            T::one()
        }
    };

    // L: beyond it every mode obeys a closed-form majorant
    let last_explicit = if eps > T::zero() {
        let n1 = (T::lit(2.0 * std::f64::consts::SQRT_2) * c / eps).ceil();
        n1.to_usize().unwrap_or(usize::MAX).max(m)
    } else {
        let n1 = (T::lit(std::f64::consts::SQRT_2) * a / c).ceil();
        n1.to_usize().unwrap_or(usize::MAX).max(m)
    };

    let mut middle = CompensatedSum::new();
    if last_explicit - m <= EXPLICIT_TAIL_CAP {
        for n in (m + 1..=last_explicit).rev() {
            middle.add(weight(n) * ModeSpectrum::new(params, n).abs_bound(t));
        }
    } else {
        // |h_n| <= t for every mode
        let crude = if weighted {
            t / T::from_usize_lossy(m.max(1))
        } else {
            t * T::from_usize_lossy(last_explicit - m)
        };
        middle.add(crude);
    }

    let big_l = T::from_usize_lossy(last_explicit);
    let next = big_l + T::one();
    let far = if eps > T::zero() {
        // hyperbolic modes: beta_n <= sqrt(2)/(eps n^2), mu_n >= c^2 n^2 / (2a + eps n^2)
        let mu = c * c * next * next / (T::lit(2.0) * a + eps * next * next);
        let decay = (-mu * t).exp();
        let sqrt2 = T::lit(std::f64::consts::SQRT_2);
        if weighted {
            decay * (t / big_l).min(sqrt2 / (T::lit(3.0) * eps * big_l * big_l * big_l))
        } else {
            decay * sqrt2 / (eps * big_l)
        }
    } else {
        // oscillating modes: b_n >= kappa n with kappa^2 = c^2 - a^2/(L+1)^2
        let kappa = (c * c - a * a / (next * next)).sqrt();
        let decay = (-a * t).exp();
        if weighted {
            decay * (t / big_l).min(T::one() / (T::lit(2.0) * kappa * big_l * big_l))
        } else {
            T::infinity()
        }
    };
    two_over_pi * (middle.value() + far)
}

/// A truncated kernel series. `tail_bound` is the sup of the tail certificate
/// over the time nodes it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSeries<T> {
    kind: KernelKind,
    params: ModelParams<T>,
    n_max: usize,
    tail_bound: T,
}

impl<T: Real> KernelSeries<T> {
    /// Fixed truncation index; the certificate is computed over `t_nodes`.
    pub fn with_n_max(kind: KernelKind, params: &ModelParams<T>, n_max: usize, t_nodes: &[T]) -> Self {
        let params = kind.effective_params(params);
        let tail_bound = sup_tail(&params, kind, n_max, t_nodes);
        Self {
            kind,
            params,
            n_max,
            tail_bound,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    /// Tail certificate at a single time.
    pub fn tail_at(&self, t: T) -> T {
        tail_bound_at(&self.params, self.kind.second_derivative_form(), self.n_max, t)
    }

    /// Partial sum up to `n_max`.
    pub fn eval(&self, x: T, xi: T, t: T) -> Result<T> {
        check_point(x, xi, t)?;
        let mut acc = CompensatedSum::new();
        let weighted = self.kind.second_derivative_form();
        let cosine = self.kind.basis() == Basis::CosineWithConstant;
        for n in (1..=self.n_max).rev() {
            let ms = ModeSpectrum::new(&self.params, n);
            let h = ms.response(t);
            if h == T::zero() {
                continue;
            }
            let nf = T::from_usize_lossy(n);
            let shape = if cosine {
                (nf * x).cos() * (nf * xi).cos()
            } else {
                (nf * x).sin() * (nf * xi).sin()
            };
            let w = if weighted { T::one() / (nf * nf) } else { T::one() };
            acc.add(w * h * shape);
        }
        let mut value = T::lit(2.0) / T::PI() * acc.value();
        if cosine {
            value += constant_mode(&self.params, t) / T::PI();
        }
        Ok(value)
    }

    /// Partial sum with the tail certificate at `t`.
    pub fn eval_certified(&self, x: T, xi: T, t: T) -> Result<Certified<T>> {
        Ok(Certified {
            value: self.eval(x, xi, t)?,
            bound: self.tail_at(t),
        })
    }
}

/// `h_0(t) = (1 - exp(-2at))/(2a)`.
pub fn constant_mode<T: Real>(params: &ModelParams<T>, t: T) -> T {
    let two_a = params.a() + params.a();
    -(-two_a * t).exp_m1() / two_a
}

fn check_point<T: Real>(x: T, xi: T, t: T) -> Result<()> {
    let pi = T::PI();
    for (name, v) in [("x", x), ("xi", xi)] {
        if !(v >= T::zero() && v <= pi) {
            return Err(Error::Domain(format!("{name} = {v} outside [0, pi]")));
        }
    }
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("t = {t} must be finite and non-negative")));
    }
    Ok(())
}

fn sup_tail<T: Real>(params: &ModelParams<T>, kind: KernelKind, m: usize, t_nodes: &[T]) -> T {
    let weighted = kind.second_derivative_form();
    t_nodes
        .iter()
        .map(|&t| tail_bound_at(params, weighted, m, t))
        .fold(T::zero(), T::max)
}

/// Smallest truncation index (at or above the oscillating-band floor) whose
/// certified tail over `t_nodes` is at most `tol`.
pub fn truncate_for<T: Real>(
    kind: KernelKind,
    params: &ModelParams<T>,
    t_nodes: &[T],
    tol: T,
) -> Result<KernelSeries<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    if let Some(&bad) = t_nodes.iter().find(|t| !(**t >= T::zero()) || !t.is_finite()) {
        return Err(Error::Domain(format!("time node {bad} must be finite and non-negative")));
    }
    let eff = kind.effective_params(params);
    let floor = regimes(&eff).truncation_floor().min(MAX_MODES);
    let tail = |m: usize| sup_tail(&eff, kind, m, t_nodes);

    if tail(floor) <= tol {
        return Ok(KernelSeries::with_n_max(kind, params, floor, t_nodes));
    }
    let mut lo = floor;
    let mut hi = floor.max(8);
    loop {
        if tail(hi) <= tol {
            break;
        }
        if hi >= MAX_MODES {
            return Err(Error::ToleranceUnreachable {
                requested: tol.as_f64(),
                achievable: tail(MAX_MODES).as_f64(),
                cap: MAX_MODES,
            });
        }
        lo = hi;
        hi = (hi * 2).min(MAX_MODES);
    }
    // the tail bound is non-increasing in m
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(KernelSeries::with_n_max(kind, params, hi, t_nodes))
}

/// Convenience wrapper around [`KernelSeries::eval`].
pub fn kernel_eval<T: Real>(series: &KernelSeries<T>, x: T, xi: T, t: T) -> Result<T> {
    series.eval(x, xi, t)
}

/// `H_eps - H_0` at one point, summed modewise as `sum r_n g_n`, with both
/// series truncated so the combined certificate is at most `tol`.
pub fn delta_h<T: Real>(params: &ModelParams<T>, x: T, xi: T, t: T, tol: T) -> Result<Certified<T>> {
    check_point(x, xi, t)?;
    let half = T::lit(0.5) * tol;
    let dissipative = truncate_for(KernelKind::HEps, params, &[t], half)?;
    let limit = truncate_for(KernelKind::H0, params, &[t], half)?;
    let n_max = dissipative.n_max().max(limit.n_max());
    let lim_params = params.telegraph_limit();
    let mut acc = CompensatedSum::new();
    for n in (1..=n_max).rev() {
        let nf = T::from_usize_lossy(n);
        let he = ModeSpectrum::new(params, n).response(t);
        let h0 = ModeSpectrum::new(&lim_params, n).response(t);
        acc.add((he - h0) / (nf * nf) * (nf * x).sin() * (nf * xi).sin());
    }
    let bound = tail_bound_at(params, true, n_max, t) + tail_bound_at(&lim_params, true, n_max, t);
    Ok(Certified {
        value: T::lit(2.0) / T::PI() * acc.value(),
        bound,
    })
}

/// Convenience re-export of the regime test for a single mode.
pub fn regime_of<T: Real>(params: &ModelParams<T>, n: usize) -> Regime {
    ModeSpectrum::new(params, n).regime
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> ModelParams<f64> {
        ModelParams::new(0.5, 1.0, 0.05).unwrap()
    }

    #[test]
    fn dirichlet_kernels_vanish_at_walls() {
        let p = params();
        for kind in [KernelKind::GEps, KernelKind::HEps, KernelKind::H0] {
            let s = KernelSeries::with_n_max(kind, &p, 200, &[1.0]);
            for xi in [0.3, 1.0, 2.9] {
                assert!(s.eval(0.0, xi, 1.0).unwrap().abs() < 1e-15);
                assert!(s.eval(PI, xi, 1.0).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernels_vanish_at_time_zero() {
        let p = params();
        for kind in KernelKind::ALL {
            let s = KernelSeries::with_n_max(kind, &p, 64, &[0.0]);
            assert_eq!(s.tail_bound(), 0.0);
            assert_eq!(s.eval(0.7, 1.9, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn out_of_range_arguments_are_rejected() {
        let s = KernelSeries::with_n_max(KernelKind::GEps, &params(), 10, &[1.0]);
        assert!(s.eval(-0.1, 1.0, 1.0).is_err());
        assert!(s.eval(1.0, 3.2, 1.0).is_err());
        assert!(s.eval(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn infinite_tolerance_returns_band_floor() {
        let p = ModelParams::new(0.5, 1.0, 0.1).unwrap();
        let s = truncate_for(KernelKind::HEps, &p, &[0.5, 1.0], f64::INFINITY).unwrap();
        assert_eq!(s.n_max(), 20);
    }

    #[test]
    fn undissipated_g_series_cannot_be_certified() {
        let p = params();
        let err = truncate_for(KernelKind::G0, &p, &[1.0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::ToleranceUnreachable { .. }));
        // only t = 0 in the domain: every term vanishes
        assert!(truncate_for(KernelKind::G0, &p, &[0.0], 1e-3).is_ok());
    }

    #[test]
    fn truncation_meets_requested_tolerance() {
        let p = params();
        let ts: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        for kind in [KernelKind::GEps, KernelKind::HEps, KernelKind::KEps, KernelKind::H0] {
            let s = truncate_for(kind, &p, &ts, 1e-6).unwrap();
            assert!(s.tail_bound() <= 1e-6, "{kind:?}");
            assert!(s.n_max() >= regimes(&p).truncation_floor());
        }
    }

    #[test]
    fn neumann_constant_mode() {
        let p = params();
        let s = KernelSeries::with_n_max(KernelKind::KEps, &p, 0, &[1.0]);
        for t in [0.0_f64, 0.3, 5.0, 20.0] {
            let expect = (1.0 - (-2.0 * 0.5 * t).exp()) / (2.0 * PI * 0.5);
            assert!((s.eval(0.4, 2.0, t).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(KernelKind::parse(k.name()), Some(k));
        }
        assert_eq!(KernelKind::parse("nope"), None);
    }
}
