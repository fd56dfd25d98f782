use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::scalar::Real;

/// Band `k1 <= n <= k2` of oscillating modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRegimes<T> {
    pub k1: T,
    /// `+inf` when `eps = 0`.
    pub k2: T,
    /// `floor(k2)`; `None` when every mode above `k1` oscillates (`eps = 0`).
    pub n_split: Option<usize>,
    /// False when `2 a eps > c^2`: no mode oscillates.
    pub valid: bool,
}

impl<T: Real> SpectralRegimes<T> {
    /// Smallest truncation index that keeps the whole oscillating band.
    pub fn truncation_floor(&self) -> usize {
        match self.n_split {
            Some(n) => n + 1,
            None => 1,
        }
    }

    /// True when `eps = 0` (no upper threshold).
    pub fn is_degenerate(&self) -> bool {
        self.n_split.is_none()
    }
}

/// Thresholds `K1 = (c/eps)(1 - sqrt(1 - 2 a eps / c^2))`, `K2 = (c/eps)(1 + sqrt(..))`, `N = floor(K2)`.
pub fn regimes<T: Real>(params: &ModelParams<T>) -> SpectralRegimes<T> {
    let (a, c, eps) = (params.a(), params.c(), params.eps());
    let two = T::lit(2.0);
    if eps == T::zero() {
        return SpectralRegimes {
            k1: a / c,
            k2: T::infinity(),
            n_split: None,
            valid: true,
        };
    }
    let disc = T::one() - two * a * eps / (c * c);
    if disc < T::zero() {
        return SpectralRegimes {
            k1: T::nan(),
            k2: T::nan(),
            n_split: Some(0),
            valid: false,
        };
    }
    let root = disc.sqrt();
    // rationalized lower root, free of cancellation for small eps
    let k1 = two * a / (c * (T::one() + root));
    let k2 = (c / eps) * (T::one() + root);
    let n_split = k2.floor().to_usize();
    SpectralRegimes {
        k1,
        k2,
        n_split: Some(n_split.unwrap_or(usize::MAX - 1)),
        valid: true,
    }
}
