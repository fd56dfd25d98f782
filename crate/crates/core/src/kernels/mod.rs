//! Modal responses and the Green-function series built from them.

mod mode;
mod regimes;
mod series;

pub use mode::{h_n, h_n_rate, r_n, ModeSpectrum, Regime, RESONANCE_REL};
pub use regimes::{regimes, SpectralRegimes};
pub use series::{
    constant_mode, delta_h, kernel_eval, regime_of, tail_bound_at, truncate_for, Basis, Certified,
    KernelKind, KernelSeries, MAX_MODES,
};
