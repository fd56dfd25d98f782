use std::f64::consts::PI;
use std::sync::Arc;

use dissipative_core::estimates::fit_power_law;
use dissipative_core::kernels::{h_n, tail_bound_at, Basis, KernelKind, KernelSeries, ModeSpectrum};
use dissipative_core::linear::{project_field, synthesize, trapezoid_convolution, ConvolutionMethod};
use dissipative_core::model::{Field, Grid, ModelParams, SourceSpec};
use dissipative_core::oracle::{solve_fd, FdBoundary, FdConfig, FdScheme};
use dissipative_core::summation::CompensatedSum;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams<f64>> {
    (0.05..1.5_f64, 0.3..2.5_f64, 0.0..0.5_f64).prop_map(|(a, c, eps)| ModelParams::new(a, c, eps).unwrap())
}

proptest! {
    #[test]
    fn envelope_dominates_mode_response(p in params(), n in 1usize..200, t in 0.0..30.0_f64) {
        let h = h_n(&p, n, t).unwrap();
        let env = ModeSpectrum::new(&p, n).abs_bound(t);
        prop_assert!(h.abs() <= env * (1.0 + 1e-10) + 1e-300, "h = {h}, env = {env}");
    }

    #[test]
    fn mode_response_starts_at_rest(p in params(), n in 1usize..100) {
        prop_assert_eq!(h_n(&p, n, 0.0).unwrap(), 0.0);
        let dt = 1e-7;
        let slope = h_n(&p, n, dt).unwrap() / dt;
        prop_assert!((slope - 1.0).abs() < 1e-3, "initial slope {slope}");
    }

    #[test]
    fn tail_bound_shrinks_with_truncation(p in params(), m in 1usize..500, t in 0.01..20.0_f64, weighted in any::<bool>()) {
        let lo = tail_bound_at(&p, weighted, m, t);
        let hi = tail_bound_at(&p, weighted, 2 * m, t);
        prop_assert!(hi <= lo * (1.0 + 1e-12), "{hi} > {lo}");
    }

    #[test]
    fn dirichlet_kernel_is_symmetric(p in params(), x in 0.0..PI, xi in 0.0..PI, t in 0.0..10.0_f64) {
        let series = KernelSeries::with_n_max(KernelKind::GEps, &p, 40, &[t]);
        let a = series.eval(x, xi, t).unwrap();
        let b = series.eval(xi, x, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn fft_and_direct_convolution_agree(
        f in prop::collection::vec(-1.0..1.0_f64, 2..300),
        seed in 0.1..3.0_f64,
    ) {
        let dt = 0.01;
        let kernel: Vec<f64> = (0..f.len()).map(|j| (seed * j as f64 * dt).sin() * (-(j as f64) * dt).exp()).collect();
        let direct = trapezoid_convolution(&f, &kernel, dt, ConvolutionMethod::Direct);
        let fft = trapezoid_convolution(&f, &kernel, dt, ConvolutionMethod::Fft);
        for (d, g) in direct.iter().zip(&fft) {
            prop_assert!((d - g).abs() <= 1e-11, "{d} vs {g}");
        }
    }

    #[test]
    fn compensated_sum_cancels_exactly(values in prop::collection::vec(-1e12..1e12_f64, 1..200)) {
        let mut acc = CompensatedSum::new();
        for v in &values {
            acc.add(*v);
            acc.add(1e-3);
        }
        for v in values.iter().rev() {
            acc.add(-*v);
        }
        let expected = 1e-3 * values.len() as f64;
        prop_assert!((acc.value() - expected).abs() <= 1e-9 * expected.max(1.0), "{} vs {expected}", acc.value());
    }

    #[test]
    fn power_law_fit_recovers_exponent(c in 1e-3..1e3_f64, p in 0.2..2.0_f64) {
        let eps = [1e-1_f64, 1e-2, 1e-3, 1e-4];
        let values: Vec<f64> = eps.iter().map(|e| c * e.powf(p)).collect();
        let fit = fit_power_law(&eps, &values).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
    }

    #[test]
    fn sine_projection_round_trips(amps in prop::collection::vec(-1.0..1.0_f64, 1..6)) {
        let grid = Arc::new(Grid::uniform(65, 1.0, 2).unwrap());
        let mut values = Vec::new();
        for _ in grid.t() {
            for &x in grid.x() {
                values.push(amps.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * x).sin()).sum::<f64>());
            }
        }
        let field = Field::new(grid.clone(), values, "sines").unwrap();
        let modes = project_field(&field, Basis::Sine, 8).unwrap();
        let back = synthesize(&modes, grid, "back").unwrap();
        prop_assert!(back.sup_diff(&field).unwrap() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dirichlet_walls_stay_at_zero(p in params(), amp in -2.0..2.0_f64) {
        let src = SourceSpec::linear("ramp", move |x: f64, t: f64| amp * (x + 1.0) * t.cos());
        let cfg = FdConfig::new(16, 0.02, FdScheme::ImplicitTrapezoid, FdBoundary::DirichletZero).unwrap();
        let sol = solve_fd(&src, &p, &cfg, 1.0).unwrap();
        let nx = sol.field.grid().nx();
        for it in 0..sol.field.grid().nt() {
            let row = sol.field.time_slice(it);
            prop_assert_eq!(row[0], 0.0);
            prop_assert_eq!(row[nx - 1], 0.0);
        }
    }
}
