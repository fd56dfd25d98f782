//! Per-mode causal time convolution `v_n = h_n * F_n` by the composite trapezoid rule.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::modes::ModeSeries;
use crate::error::{Error, Result};
use crate::kernels::ModeSpectrum;
use crate::model::ModelParams;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// O(J^2) direct sum.
    #[default]
    Direct,
    /// Zero-padded FFT product, O(J log J).
    Fft,
}

/// Extra modal weight applied after convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelWeight {
    Unit,
    /// `1/n^2` (second-derivative form); mode 0 is left unweighted.
    InverseSquare,
}

impl KernelWeight {
    fn factor<T: Real>(self, n: usize) -> T {
        match self {
            Self::InverseSquare if n > 0 => {
                let nf = T::from_usize_lossy(n);
                T::one() / (nf * nf)
            }
            _ => T::one(),
        }
    }
}

/// Which modal kernel is convolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalKernel {
    /// `h_n(t)`.
    Response,
    /// `h_n'(t)`, giving the time derivative of the response.
    Rate,
}

/// Trapezoid approximation of `int_0^{t_j} f(tau) k(t_j - tau) dtau` for every node.
pub fn trapezoid_convolution<T: Real>(f: &[T], kernel: &[T], dt: T, method: ConvolutionMethod) -> Vec<T> {
    let j_len = f.len().min(kernel.len());
    if j_len == 0 {
        return Vec::new();
    }
    let full = match method {
        ConvolutionMethod::Direct => direct_causal(&f[..j_len], &kernel[..j_len]),
        ConvolutionMethod::Fft => fft_causal(&f[..j_len], &kernel[..j_len]),
    };
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(j_len);
    out.push(T::zero());
    for j in 1..j_len {
        out.push(dt * (full[j] - half * f[0] * kernel[j] - half * f[j] * kernel[0]));
    }
    out
}

fn direct_causal<T: Real>(f: &[T], k: &[T]) -> Vec<T> {
    (0..f.len())
        .map(|j| {
            let mut acc = T::zero();
            for i in 0..=j {
                acc += f[i] * k[j - i];
            }
            acc
        })
        .collect()
}

fn fft_causal<T: Real>(f: &[T], k: &[T]) -> Vec<T> {
    let n = f.len();
    let len = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let pad = |v: &[T]| -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); len];
        for (o, x) in out.iter_mut().zip(v) {
            o.re = *x;
        }
        out
    };
    let mut a = pad(f);
    let mut b = pad(k);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = T::one() / T::from_usize_lossy(len);
    a[..n].iter().map(|c| c.re * scale).collect()
}

/// Convolves every mode of `f_modes` with the modal kernel of `params`.
///
/// The error attached to each output mode combines a Richardson estimate of the
/// trapezoid error (comparison with the `2 dt` subsampled rule), the input error
/// propagated through `int |kernel|`, and a rounding allowance.
pub fn convolve_modes<T: Real>(
    f_modes: &ModeSeries<T>,
    params: &ModelParams<T>,
    weight: KernelWeight,
    kernel: ModalKernel,
    method: ConvolutionMethod,
) -> Result<ModeSeries<T>> {
    let dt = f_modes.dt();
    if !(dt > T::zero()) {
        return Err(Error::Config("convolution requires a uniform time grid with dt > 0".into()));
    }
    let nt = f_modes.nt();
    let horizon = dt * T::from_usize_lossy(nt.saturating_sub(1));
    let modes: Vec<usize> = f_modes.modes().collect();
    let results: Vec<(Vec<T>, T)> = modes
        .par_iter()
        .map(|&n| {
            let ms = ModeSpectrum::new(params, n);
            let samples: Vec<T> = (0..nt)
                .map(|j| {
                    let t = dt * T::from_usize_lossy(j);
                    match kernel {
                        ModalKernel::Response => ms.response(t),
                        ModalKernel::Rate => ms.response_rate(t),
                    }
                })
                .collect();
            let f = f_modes.coeff(n);
            let w = weight.factor::<T>(n);
            let fine = trapezoid_convolution(f, &samples, dt, method);

            let f2: Vec<T> = f.iter().step_by(2).copied().collect();
            let k2: Vec<T> = samples.iter().step_by(2).copied().collect();
            let coarse = trapezoid_convolution(&f2, &k2, dt + dt, method);
            let richardson = coarse
                .iter()
                .enumerate()
                .map(|(j, c)| (fine[2 * j] - *c).abs())
                .fold(T::zero(), T::max)
                / T::lit(3.0);

            let kernel_l1 = match kernel {
                ModalKernel::Response => ms.integral_abs_bound(horizon),
                ModalKernel::Rate => dt * samples.iter().fold(T::zero(), |s, v| s + v.abs()),
            };
            let f_max = f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let k_max = samples.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let rounding = T::lit(8.0) * T::epsilon() * horizon * f_max * k_max * T::from_usize_lossy(nt).sqrt();
            let err = w.abs() * (richardson + f_modes.error(n) * kernel_l1 + rounding);
            (fine.into_iter().map(|v| v * w).collect(), err)
        })
        .collect();

    let (coeffs, errors): (Vec<Vec<T>>, Vec<T>) = results.into_iter().unzip();
    if coeffs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("convolution produced non-finite values".into()));
    }
    ModeSeries::from_parts(f_modes.basis(), f_modes.n_max(), dt, coeffs, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Basis;

    #[test]
    fn zero_input_gives_zero_output() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let f = ModeSeries::zeros(Basis::Sine, 6, 0.01, 101);
        let v = convolve_modes(&f, &p, KernelWeight::Unit, ModalKernel::Response, ConvolutionMethod::Direct).unwrap();
        assert!(v.sup_magnitudes().iter().all(|m| *m == 0.0));
        assert_eq!(v.total_error(), 0.0);
    }

    #[test]
    fn fft_path_agrees_with_direct_sum() {
        let n = 777;
        let f: Vec<f64> = (0..n).map(|j| (0.01 * j as f64).sin() + 0.3).collect();
        let k: Vec<f64> = (0..n).map(|j| (-0.02 * j as f64).exp() * (0.05 * j as f64).sin()).collect();
        let a = trapezoid_convolution(&f, &k, 0.01, ConvolutionMethod::Direct);
        let b = trapezoid_convolution(&f, &k, 0.01, ConvolutionMethod::Fft);
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn constant_times_linear_kernel_is_exact() {
        // int_0^t 1 * (t - tau) dtau = t^2/2; trapezoid is exact for linear integrands
        let dt = 0.1;
        let f = vec![1.0; 21];
        let k: Vec<f64> = (0..21).map(|j| j as f64 * dt).collect();
        let v = trapezoid_convolution(&f, &k, dt, ConvolutionMethod::Direct);
        for (j, vj) in v.iter().enumerate() {
            let t = j as f64 * dt;
            assert!((vj - 0.5 * t * t).abs() < 1e-13);
        }
    }
}
