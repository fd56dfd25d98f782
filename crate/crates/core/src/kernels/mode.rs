//! Per-mode response of `y'' + (eps n^2 + 2a) y' + c^2 n^2 y = 0`, `y(0) = 0`, `y'(0) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;

/// Relative width of the band `|D_n| <= RESONANCE_REL * (c n)^2` treated as critical damping.
pub const RESONANCE_REL: f64 = 1e-12;

/// Below this value of `|D_n| t^2` the response is evaluated from its power series,
/// which is valid on both sides of the critical point.
const SERIES_SWITCH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Trigonometric,
    Resonant,
    Hyperbolic,
}

/// Modal constants for index `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpectrum<T> {
    pub n: usize,
    /// Decay rate `a + (eps/2) n^2`.
    pub a_n: T,
    /// Discriminant `c^2 n^2 - a_n^2`.
    pub d_n: T,
    pub regime: Regime,
    /// `c^2 n^2 - a^2`, the discriminant of the undissipated mode.
    pub b_n_sq: T,
    cn_sq: T,
}

impl<T: Real> ModeSpectrum<T> {
    pub fn new(params: &ModelParams<T>, n: usize) -> Self {
        let nf = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        let a = params.a();
        let c = params.c();
        let a_n = a + half * params.eps() * nf * nf;
        let cn = c * nf;
        let cn_sq = cn * cn;
        // (cn - a_n)(cn + a_n) keeps the sign exact near the critical point
        let d_n = (cn - a_n) * (cn + a_n);
        let b_n_sq = (cn - a) * (cn + a);
        let regime = if d_n.abs() <= T::lit(RESONANCE_REL) * cn_sq {
            Regime::Resonant
        } else if d_n > T::zero() {
            Regime::Trigonometric
        } else {
            Regime::Hyperbolic
        };
        Self {
            n,
            a_n,
            d_n,
            regime,
            b_n_sq,
            cn_sq,
        }
    }

    /// `h_n(t)`. Always finite for finite `t >= 0`.
    pub fn response(&self, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        let z = self.d_n * t * t;
        match self.regime {
            Regime::Resonant => t * (-self.a_n * t).exp(),
            _ if z.abs() <= T::lit(SERIES_SWITCH) => {
                t * (-self.a_n * t).exp() * sinc_like(-z)
            }
            Regime::Trigonometric => {
                let omega = self.d_n.sqrt();
                (-self.a_n * t).exp() * (omega * t).sin() / omega
            }
            Regime::Hyperbolic => {
                let s = (-self.d_n).sqrt();
                let mu = self.slow_rate(s);
                let two_s = s + s;
                (-mu * t).exp() * (-(-two_s * t).exp_m1()) / two_s
            }
        }
    }

    /// `h_n'(t)`.
    pub fn response_rate(&self, t: T) -> T {
        if t == T::zero() {
            return T::one();
        }
        let z = self.d_n * t * t;
        let decay = (-self.a_n * t).exp();
        match self.regime {
            Regime::Resonant => decay * (T::one() - self.a_n * t),
            _ if z.abs() <= T::lit(SERIES_SWITCH) => {
                decay * (cos_like(-z) - self.a_n * t * sinc_like(-z))
            }
            Regime::Trigonometric => {
                let omega = self.d_n.sqrt();
                decay * ((omega * t).cos() - self.a_n * (omega * t).sin() / omega)
            }
            Regime::Hyperbolic => {
                let s = (-self.d_n).sqrt();
                let mu = self.slow_rate(s);
                let fast = self.a_n + s;
                let two_s = s + s;
                (fast * (-fast * t).exp() - mu * (-mu * t).exp()) / two_s
            }
        }
    }

    /// `a_n - s` evaluated as `c^2 n^2 / (a_n + s)`.
    fn slow_rate(&self, s: T) -> T {
        self.cn_sq / (self.a_n + s)
    }

    /// `(beta, mu)` with `|h_n(t)| <= min(t, beta) * exp(-mu t)` for all `t >= 0`.
    pub fn envelope(&self) -> (T, T) {
        match self.regime {
            Regime::Trigonometric => (T::one() / self.d_n.sqrt(), self.a_n),
            Regime::Resonant => (T::infinity(), self.a_n),
            Regime::Hyperbolic => {
                let s = (-self.d_n).sqrt();
                (T::one() / (s + s), self.slow_rate(s))
            }
        }
    }

    /// Upper bound for `|h_n(t)|`.
    pub fn abs_bound(&self, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        let (beta, mu) = self.envelope();
        t.min(beta) * (-mu * t).exp()
    }

    /// Upper bound for `int_0^horizon |h_n|`.
    pub fn integral_abs_bound(&self, horizon: T) -> T {
        let (beta, mu) = self.envelope();
        let half = T::lit(0.5);
        let mut best = (half * horizon * horizon).min(beta * horizon);
        if mu > T::zero() {
            best = best.min(T::one() / (mu * mu));
            if beta.is_finite() {
                best = best.min(beta / mu);
            }
        }
        best
    }
}

/// `sum_k z^k / (2k+1)!`, i.e. `sinh(sqrt z)/sqrt z` (equivalently `sin(sqrt -z)/sqrt -z`).
fn sinc_like<T: Real>(z: T) -> T {
    let mut term = T::one();
    let mut acc = T::one();
    for k in 1..30 {
        let kk = T::from_usize_lossy(2 * k);
        term = term * z / (kk * (kk + T::one()));
        acc += term;
        if term.abs() <= T::epsilon() * acc.abs() {
            break;
        }
    }
    acc
}

/// `sum_k z^k / (2k)!`, i.e. `cosh(sqrt z)`.
fn cos_like<T: Real>(z: T) -> T {
    let mut term = T::one();
    let mut acc = T::one();
    for k in 1..30 {
        let kk = T::from_usize_lossy(2 * k);
        term = term * z / ((kk - T::one()) * kk);
        acc += term;
        if term.abs() <= T::epsilon() * acc.abs() {
            break;
        }
    }
    acc
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and non-negative, got {t}")))
    }
}

/// Modal impulse response `h_n(t, eps)`.
pub fn h_n<T: Real>(params: &ModelParams<T>, n: usize, t: T) -> Result<T> {
    check_time(t)?;
    Ok(ModeSpectrum::new(params, n).response(t))
}

/// Time derivative of [`h_n`].
pub fn h_n_rate<T: Real>(params: &ModelParams<T>, n: usize, t: T) -> Result<T> {
    check_time(t)?;
    Ok(ModeSpectrum::new(params, n).response_rate(t))
}

/// `h_n(t, eps)/n^2 - h_n(t, 0)/n^2`.
pub fn r_n<T: Real>(params: &ModelParams<T>, n: usize, t: T) -> Result<T> {
    check_time(t)?;
    if n == 0 {
        return Err(Error::Domain("r_n is defined for n >= 1".into()));
    }
    let dissipative = ModeSpectrum::new(params, n).response(t);
    let limit = ModeSpectrum::new(&params.telegraph_limit(), n).response(t);
    let nf = T::from_usize_lossy(n);
    Ok((dissipative - limit) / (nf * nf))
}
