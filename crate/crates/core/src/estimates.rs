//! Small-dissipation estimates for `H_eps - H_0`: bound constants, certified
//! sweeps of the two-band bounds and the uniform-in-time bound, and rate fits.
//!
//! Measured kernel differences always carry a rigorous truncation certificate.
//! A sample fails only when `measured - certificate` exceeds the bound, so a
//! reported failure is never a truncation artifact. Comparisons happen in log
//! space because the fast-time factor `exp(-c^2 t / (2 eps))` underflows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{regimes, tail_bound_at, truncate_for, Certified, KernelKind, ModeSpectrum};
use crate::model::{Field, ModelParams, SourceSpec};
use crate::scalar::Real;
use crate::summation::CompensatedSum;

/// Truncated value of the Euler-Mascheroni constant used by the bound constants.
pub const EULER_C0: f64 = 0.5773;

/// Relative tolerance (in units of `eps * exp(-a t)`) for kernel truncation in sweeps.
const SWEEP_REL_TOL: f64 = 1e-7;

/// Constants of the small-dissipation bounds for fixed `a < c` and order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants<T> {
    pub a: T,
    pub c: T,
    pub k: T,
    pub c0: T,
    pub b1: T,
}

impl<T: Real> BoundConstants<T> {
    /// Refuses `a >= c` (no real `b1`) and `k` outside `(0, 1)`.
    pub fn new(params: &ModelParams<T>, k: T) -> Result<Self> {
        if !(k > T::zero() && k < T::one()) {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("order must lie in (0, 1), got {k}"),
            });
        }
        let b1 = params.b1().ok_or_else(|| {
            Error::Hypothesis(format!(
                "a = {} >= c = {}: the oscillating band starts at floor(K1) > 1 and no bound constants \
                 are available for it; certification is refused",
                params.a(),
                params.c()
            ))
        })?;
        Ok(Self {
            a: params.a(),
            c: params.c(),
            k,
            c0: T::lit(EULER_C0),
            b1,
        })
    }

    /// `t (2 + a t) / b1`.
    pub fn rho(&self, t: T) -> T {
        t * (T::lit(2.0) + self.a * t) / self.b1
    }

    /// `(eps + 2 c0 c + (2c)^(2-k) eps^(k-1)) / (pi c (1-k))`; infinite at `eps = 0`.
    pub fn c1(&self, eps: T) -> T {
        let two_c = T::lit(2.0) * self.c;
        let num = eps + T::lit(2.0) * self.c0 * self.c + two_c.powf(T::lit(2.0) - self.k) * eps.powf(self.k - T::one());
        num / (T::PI() * self.c * (T::one() - self.k))
    }

    /// `eps^(1-k) c1(eps)`, finite as `eps -> 0`.
    pub fn scaled_c1(&self, eps: T) -> T {
        let two_c = T::lit(2.0) * self.c;
        let lead = (eps + T::lit(2.0) * self.c0 * self.c) * eps.powf(T::one() - self.k);
        (lead + two_c.powf(T::lit(2.0) - self.k)) / (T::PI() * self.c * (T::one() - self.k))
    }

    /// `max(1, pi / (c b1)) / 3`.
    pub fn c2(&self) -> T {
        T::one().max(T::PI() / (self.c * self.b1)) / T::lit(3.0)
    }

    /// `min(a, c^2 / (4 eps))`.
    pub fn b(&self, eps: T) -> T {
        if eps == T::zero() {
            return self.a;
        }
        self.a.min(self.c * self.c / (T::lit(4.0) * eps))
    }

    /// `1 + 4 / (c^2 e)`.
    fn fast_factor(&self) -> T {
        T::one() + T::lit(4.0) / (self.c * self.c * T::E())
    }

    /// `eps^(1-k) [c1(eps) rho(t) + c2 (1 + 4/(c^2 e))]`.
    pub fn r(&self, eps: T, t: T) -> T {
        self.scaled_c1(eps) * self.rho(t) + eps.powf(T::one() - self.k) * self.c2() * self.fast_factor()
    }

    /// Smallest eps at which `c1` stops decreasing: `2c (1-k)^(1/(2-k))`.
    pub fn c1_turning_point(&self) -> T {
        T::lit(2.0) * self.c * (T::one() - self.k).powf(T::one() / (T::lit(2.0) - self.k))
    }

    /// `ln(eps c1(eps) rho(t) e^{-a t})`.
    pub fn ln_bound_r1(&self, eps: T, t: T) -> T {
        if eps == T::zero() || t == T::zero() {
            return T::neg_infinity();
        }
        eps.ln() + self.c1(eps).ln() + self.rho(t).ln() - self.a * t
    }

    /// `ln(eps c2 [e^{-a t} + theta e^{-c^2 theta / 2}])`, `theta = t / eps`.
    pub fn ln_bound_r2(&self, eps: T, t: T) -> T {
        if eps == T::zero() {
            return T::neg_infinity();
        }
        let theta = t / eps;
        let fast = if t == T::zero() {
            T::neg_infinity()
        } else {
            theta.ln() - T::lit(0.5) * self.c * self.c * theta
        };
        eps.ln() + self.c2().ln() + log_add_exp(-self.a * t, fast)
    }

    /// Constructive `gamma` for one `eps`: `sup_t r(t) / (1 + t + t^2)`.
    pub fn gamma_at(&self, eps: T) -> T {
        // r(t) = alpha t + beta t^2 + gamma0 with rho expanded
        let s1 = self.scaled_c1(eps);
        let alpha = T::lit(2.0) * s1 / self.b1;
        let beta = self.a * s1 / self.b1;
        let base = eps.powf(T::one() - self.k) * self.c2() * self.fast_factor();
        let f = |t: T| (base + alpha * t + beta * t * t) / (T::one() + t + t * t);
        let mut best = base.max(beta);
        // stationary points: (beta - alpha) t^2 + 2 (beta - base) t + (alpha - base) = 0
        let qa = beta - alpha;
        let qb = T::lit(2.0) * (beta - base);
        let qc = alpha - base;
        let mut roots = Vec::new();
        if qa.abs() <= T::epsilon() * (alpha.abs() + beta.abs()) {
            if qb != T::zero() {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - T::lit(4.0) * qa * qc;
            if disc >= T::zero() {
                let sq = disc.sqrt();
                roots.push((-qb + sq) / (T::lit(2.0) * qa));
                roots.push((-qb - sq) / (T::lit(2.0) * qa));
            }
        }
        for t in roots.into_iter().filter(|t| *t >= T::zero() && t.is_finite()) {
            best = best.max(f(t));
        }
        best
    }

    /// `gamma` maximized over the positive entries of `eps_list`.
    pub fn gamma(&self, eps_list: &[T]) -> Result<T> {
        let g = eps_list
            .iter()
            .filter(|e| **e > T::zero())
            .map(|e| self.gamma_at(*e))
            .fold(T::zero(), T::max);
        if g > T::zero() {
            Ok(g)
        } else {
            Err(Error::InvalidParameter {
                name: "eps_list",
                reason: "gamma needs at least one positive eps".into(),
            })
        }
    }

    /// `ln(gamma eps^k (1 + t + t^2) e^{-b t})`.
    pub fn ln_theorem_bound(&self, gamma: T, eps: T, t: T) -> T {
        if eps == T::zero() {
            return T::neg_infinity();
        }
        gamma.ln() + self.k * eps.ln() + (T::one() + t + t * t).ln() - self.b(eps) * t
    }

    /// `gamma pi (1/b + 1/b^2 + 2/b^3)`, dominating `gamma pi int_0^inf (1+s+s^2) e^{-b s} ds`.
    pub fn gamma1(&self, gamma: T, eps: T) -> T {
        let b = self.b(eps);
        gamma * T::PI() * (T::one() / b + T::one() / (b * b) + T::lit(2.0) / (b * b * b))
    }
}

/// `ln(e^x + e^y)` without overflow.
fn log_add_exp<T: Real>(x: T, y: T) -> T {
    if x == T::neg_infinity() {
        return y;
    }
    if y == T::neg_infinity() {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Both sides of `theta e^{-c^2 theta / 2} <= (4 / (c^2 e)) e^{-c^2 theta / 4}`.
pub fn fast_time_inequality<T: Real>(c: T, theta: T) -> (T, T) {
    let c2 = c * c;
    let lhs = theta * (-T::lit(0.5) * c2 * theta).exp();
    let rhs = T::lit(4.0) / (c2 * T::E()) * (-T::lit(0.25) * c2 * theta).exp();
    (lhs, rhs)
}

/// Sample points `(x, xi)` crossed with time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid<T> {
    points: Vec<(T, T)>,
    t: Vec<T>,
}

impl<T: Real> SweepGrid<T> {
    pub fn new(points: Vec<(T, T)>, t: Vec<T>) -> Result<Self> {
        if points.is_empty() || t.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sweep",
                reason: "need at least one point and one time".into(),
            });
        }
        for &(x, xi) in &points {
            for v in [x, xi] {
                if !(v >= T::zero() && v <= T::PI()) {
                    return Err(Error::Domain(format!("sweep coordinate {v} outside [0, pi]")));
                }
            }
        }
        if let Some(bad) = t.iter().find(|t| !(**t >= T::zero()) || !t.is_finite()) {
            return Err(Error::Domain(format!("sweep time {bad} must be finite and non-negative")));
        }
        Ok(Self { points, t })
    }

    /// `nx` interior diagonal points `x = xi = j pi / (nx + 1)` and `nt` uniform times on `[0, t_end]`.
    pub fn diagonal(nx: usize, nt: usize, t_end: T) -> Result<Self> {
        let h = T::PI() / T::from_usize_lossy(nx + 1);
        let points = (1..=nx).map(|j| (T::from_usize_lossy(j) * h, T::from_usize_lossy(j) * h)).collect();
        Self::new(points, uniform_times(nt, t_end))
    }

    /// A single `(x, xi)` pair at `nt` uniform times.
    pub fn at_point(x: T, xi: T, nt: usize, t_end: T) -> Result<Self> {
        Self::new(vec![(x, xi)], uniform_times(nt, t_end))
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn times(&self) -> &[T] {
        &self.t
    }
}

fn uniform_times<T: Real>(nt: usize, t_end: T) -> Vec<T> {
    if nt <= 1 {
        return vec![t_end];
    }
    let step = t_end / T::from_usize_lossy(nt - 1);
    (0..nt).map(|i| T::from_usize_lossy(i) * step).collect()
}

/// `cos(n theta)` by rotation, resynchronized periodically against the direct value.
struct CosineWalk<T> {
    theta: T,
    cos1: T,
    sin1: T,
    cos_n: T,
    sin_n: T,
    n: usize,
}

impl<T: Real> CosineWalk<T> {
    const RESYNC: usize = 64;

    fn new(theta: T) -> Self {
        Self {
            theta,
            cos1: theta.cos(),
            sin1: theta.sin(),
            cos_n: T::one(),
            sin_n: T::zero(),
            n: 0,
        }
    }

    fn next(&mut self) -> T {
        self.n += 1;
        if self.n.is_multiple_of(Self::RESYNC) {
            let arg = T::from_usize_lossy(self.n) * self.theta;
            self.cos_n = arg.cos();
            self.sin_n = arg.sin();
        } else {
            let c = self.cos_n * self.cos1 - self.sin_n * self.sin1;
            let s = self.sin_n * self.cos1 + self.cos_n * self.sin1;
            self.cos_n = c;
            self.sin_n = s;
        }
        self.cos_n
    }
}

/// Band split of `H_eps - H_0` at one `(x, xi, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BandSample<T> {
    r1: T,
    r2: T,
    certificate: T,
}

/// Per-time mode table `r_n(t) = (h_n^eps - h_n^0) / n^2` and its certificate.
struct ModeTable<T> {
    r: Vec<T>,
    certificate: T,
}

fn mode_table<T: Real>(params: &ModelParams<T>, t: T, tol: T) -> Result<ModeTable<T>> {
    let split = regimes(params).truncation_floor().saturating_sub(1);
    if t == T::zero() {
        return Ok(ModeTable {
            r: vec![T::zero(); split],
            certificate: T::zero(),
        });
    }
    let lim = params.telegraph_limit();
    let half = T::lit(0.5) * tol;
    let n_eps = truncate_for(KernelKind::HEps, params, &[t], half)?.n_max();
    let n_lim = truncate_for(KernelKind::H0, params, &[t], half)?.n_max();
    let n_max = n_eps.max(n_lim).max(split);
    let r = (1..=n_max)
        .map(|n| {
            let nf = T::from_usize_lossy(n);
            let he = ModeSpectrum::new(params, n).response(t);
            let h0 = ModeSpectrum::new(&lim, n).response(t);
            (he - h0) / (nf * nf)
        })
        .collect();
    let certificate = tail_bound_at(params, true, n_max, t) + tail_bound_at(&lim, true, n_max, t);
    Ok(ModeTable { r, certificate })
}

fn band_sums<T: Real>(table: &ModeTable<T>, split: usize, x: T, xi: T) -> BandSample<T> {
    let mut diff = CosineWalk::new(x - xi);
    let mut sum = CosineWalk::new(x + xi);
    let mut r1 = CompensatedSum::new();
    let mut r2 = CompensatedSum::new();
    let half = T::lit(0.5);
    for (i, rn) in table.r.iter().enumerate() {
        // sin(n x) sin(n xi) = (cos(n(x - xi)) - cos(n(x + xi))) / 2
        let g = half * (diff.next() - sum.next());
        if i < split {
            r1.add(*rn * g);
        } else {
            r2.add(*rn * g);
        }
    }
    let scale = T::lit(2.0) / T::PI();
    BandSample {
        r1: scale * r1.value(),
        r2: scale * r2.value(),
        certificate: table.certificate,
    }
}

/// Measures the band split on every sweep sample; result indexed `[it][ip]`.
fn measure_sweep<T: Real>(params: &ModelParams<T>, sweep: &SweepGrid<T>) -> Result<Vec<Vec<BandSample<T>>>> {
    let eps = params.eps();
    let zero = BandSample {
        r1: T::zero(),
        r2: T::zero(),
        certificate: T::zero(),
    };
    if eps == T::zero() {
        return Ok(vec![vec![zero; sweep.points.len()]; sweep.t.len()]);
    }
    let split = regimes(params).truncation_floor().saturating_sub(1);
    sweep
        .t
        .par_iter()
        .map(|&t| {
            let tol = T::lit(SWEEP_REL_TOL) * eps * (-params.a() * t).exp();
            let table = mode_table(params, t, tol.max(T::min_positive_value()))?;
            Ok(sweep.points.iter().map(|&(x, xi)| band_sums(&table, split, x, xi)).collect())
        })
        .collect()
}

/// `H_eps - H_0 = R1 + R2` with `R1` the exact sum over the oscillating band `n <= N`
/// and `R2` the certified remainder.
pub fn split_r1_r2<T: Real>(
    params: &ModelParams<T>,
    x: T,
    xi: T,
    t: T,
    tol: T,
) -> Result<(Certified<T>, Certified<T>)> {
    if params.damping_dominates() {
        return Err(Error::Hypothesis(
            "a >= c: the oscillating band does not start at n = 1, so the two-band split is not defined".into(),
        ));
    }
    let sweep = SweepGrid::new(vec![(x, xi)], vec![t])?;
    if params.eps() == T::zero() {
        let z = Certified {
            value: T::zero(),
            bound: T::zero(),
        };
        return Ok((z, z));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    let split = regimes(params).truncation_floor().saturating_sub(1);
    let table = mode_table(params, sweep.t[0], tol)?;
    let s = band_sums(&table, split, x, xi);
    Ok((
        Certified {
            value: s.r1,
            bound: T::zero(),
        },
        Certified {
            value: s.r2,
            bound: s.certificate,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Every sample lies outside the hypotheses of the bound.
    NotApplicable,
}

/// One certified comparison. `log_margin = ln(bound) - ln(measured - certificate)`,
/// absent when the certified excess is not positive (trivially satisfied).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub measured: f64,
    pub bound: f64,
    pub ln_bound: f64,
    pub log_margin: Option<f64>,
    pub pass: bool,
}

impl Comparison {
    fn new<T: Real>(measured: T, certificate: T, ln_bound: T) -> Self {
        let excess = measured - certificate;
        let (pass, log_margin) = if excess <= T::zero() {
            (true, None)
        } else {
            let m = ln_bound - excess.ln();
            (m >= T::zero(), Some(m.as_f64()))
        };
        Self {
            measured: measured.as_f64(),
            bound: ln_bound.exp().as_f64(),
            ln_bound: if ln_bound == T::neg_infinity() { f64::MIN } else { ln_bound.as_f64() },
            log_margin,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub eps: f64,
    pub x: f64,
    pub xi: f64,
    pub t: f64,
    /// Truncation certificate of the measured values.
    pub certificate: f64,
    /// False when `eps >= 2(c - a)`; such samples never count as failures.
    pub in_hypothesis: bool,
    pub r1: Comparison,
    pub r2: Comparison,
    pub lemma_total: Comparison,
    pub theorem: Comparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub r1: Verdict,
    pub r2: Verdict,
    pub theorem: Verdict,
    /// Verdict of the inequality set the report was requested for.
    pub overall: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub a: f64,
    pub c: f64,
    pub k: f64,
    pub gamma_used: f64,
    /// `c1` decreasing across the in-hypothesis eps values of the sweep.
    pub c1_monotone: bool,
    pub out_of_hypothesis: usize,
    pub samples: Vec<BoundSample>,
    pub verdict: Verdicts,
}

impl BoundReport {
    pub fn failures(&self) -> impl Iterator<Item = &BoundSample> {
        self.samples
            .iter()
            .filter(|s| s.in_hypothesis && !(s.r1.pass && s.r2.pass && s.theorem.pass))
    }

    /// Flat rows `eps, t, x, xi, measured, certificate, bound_r1, bound_r2, bound_total, theorem_bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,t,x,xi,measured,certificate,bound_r1,bound_r2,bound_total,theorem_bound,in_hypothesis\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:e},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
                s.eps,
                s.t,
                s.x,
                s.xi,
                s.theorem.measured,
                s.certificate,
                s.r1.bound,
                s.r2.bound,
                s.lemma_total.bound,
                s.theorem.bound,
                s.in_hypothesis
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Inequalities {
    Lemma,
    Theorem,
}

fn in_hypothesis<T: Real>(params: &ModelParams<T>, eps: T) -> bool {
    eps < T::lit(2.0) * (params.c() - params.a())
}

fn verdict_of(samples: &[BoundSample], pick: impl Fn(&BoundSample) -> bool) -> Verdict {
    let mut any = false;
    for s in samples.iter().filter(|s| s.in_hypothesis) {
        any = true;
        if !pick(s) {
            return Verdict::Fail;
        }
    }
    if any {
        Verdict::Pass
    } else {
        Verdict::NotApplicable
    }
}

fn certify<T: Real>(
    params: &ModelParams<T>,
    k: T,
    sweep: &SweepGrid<T>,
    eps_list: &[T],
    which: Inequalities,
) -> Result<BoundReport> {
    let consts = BoundConstants::new(params, k)?;
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "need at least one eps".into(),
        });
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let valid: Vec<T> = eps_sorted
        .iter()
        .copied()
        .filter(|e| *e > T::zero() && in_hypothesis(params, *e))
        .collect();
    let gamma = if valid.is_empty() {
        T::zero()
    } else {
        consts.gamma(&valid)?
    };
    let c1_monotone = valid.windows(2).all(|w| consts.c1(w[1]) > consts.c1(w[0]));

    let mut samples = Vec::new();
    let mut out_of_hypothesis = 0;
    for &eps in &eps_sorted {
        let p = params.with_eps(eps)?;
        let hyp = in_hypothesis(params, eps);
        let measured = measure_sweep(&p, sweep)?;
        for (it, row) in measured.iter().enumerate() {
            let t = sweep.t[it];
            let ln_r1 = consts.ln_bound_r1(eps, t);
            let ln_r2 = consts.ln_bound_r2(eps, t);
            let ln_th = if gamma > T::zero() {
                consts.ln_theorem_bound(gamma, eps, t)
            } else {
                T::neg_infinity()
            };
            for (ip, s) in row.iter().enumerate() {
                let (x, xi) = sweep.points[ip];
                let total = s.r1 + s.r2;
                if !hyp {
                    out_of_hypothesis += 1;
                }
                samples.push(BoundSample {
                    eps: eps.as_f64(),
                    x: x.as_f64(),
                    xi: xi.as_f64(),
                    t: t.as_f64(),
                    certificate: s.certificate.as_f64(),
                    in_hypothesis: hyp,
                    r1: Comparison::new(s.r1.abs(), T::zero(), ln_r1),
                    r2: Comparison::new(s.r2.abs(), s.certificate, ln_r2),
                    lemma_total: Comparison::new(total.abs(), s.certificate, log_add_exp(ln_r1, ln_r2)),
                    theorem: Comparison::new(total.abs(), s.certificate, ln_th),
                });
            }
        }
    }
    let r1 = verdict_of(&samples, |s| s.r1.pass);
    let r2 = verdict_of(&samples, |s| s.r2.pass);
    let theorem = verdict_of(&samples, |s| s.theorem.pass);
    let overall = match which {
        Inequalities::Lemma => match (r1, r2) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Pass, _) => Verdict::Pass,
            _ => Verdict::NotApplicable,
        },
        Inequalities::Theorem => theorem,
    };
    Ok(BoundReport {
        a: params.a().as_f64(),
        c: params.c().as_f64(),
        k: k.as_f64(),
        gamma_used: gamma.as_f64(),
        c1_monotone,
        out_of_hypothesis,
        samples,
        verdict: Verdicts {
            r1,
            r2,
            theorem,
            overall,
        },
    })
}

/// Certifies the two band bounds `|R1| <= eps c1 rho e^{-at}` and
/// `|R2| <= eps c2 [e^{-at} + theta e^{-c^2 theta/2}]` on every sweep sample.
pub fn check_lemma41<T: Real>(params: &ModelParams<T>, k: T, sweep: &SweepGrid<T>, eps_list: &[T]) -> Result<BoundReport> {
    certify(params, k, sweep, eps_list, Inequalities::Lemma)
}

/// Certifies `|H_eps - H_0| <= gamma eps^k (1 + t + t^2) e^{-b t}` with the constructive `gamma`.
pub fn check_theorem41<T: Real>(
    params: &ModelParams<T>,
    k: T,
    sweep: &SweepGrid<T>,
    eps_list: &[T],
) -> Result<BoundReport> {
    certify(params, k, sweep, eps_list, Inequalities::Theorem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Slopes between consecutive points, in input order.
    pub local_slopes: Vec<f64>,
}

/// Least-squares fit of `ln value = slope ln eps + intercept`.
pub fn fit_power_law(eps: &[f64], values: &[f64]) -> Result<PowerLawFit> {
    if eps.len() != values.len() || eps.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("need at least two (eps, value) pairs, got {} and {}", eps.len(), values.len()),
        });
    }
    if eps.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("power-law fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs distinct eps values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let local_slopes = lx.windows(2).zip(ly.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
    Ok(PowerLawFit {
        slope,
        intercept: my - slope * mx,
        local_slopes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub eps: f64,
    /// `sup |H_eps - H_0|` over the sweep.
    pub sup_measured: f64,
    /// Truncation certificate at the maximizing sample.
    pub certificate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVerdict {
    Conclusive,
    /// Too few measurements rise above their truncation certificates.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<RatePoint>,
    pub fit: Option<PowerLawFit>,
    pub verdict: RateVerdict,
}

/// Fits the empirical eps-rate of `sup |H_eps - H_0|` over the sweep.
pub fn fit_rate<T: Real>(params: &ModelParams<T>, eps_list: &[T], sweep: &SweepGrid<T>) -> Result<RateFit> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: format!("rate fit needs at least 4 eps values, got {}", eps_list.len()),
        });
    }
    if eps_list.iter().any(|e| !(*e > T::zero())) {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "rate fit needs positive eps values".into(),
        });
    }
    let lo = eps_list.iter().copied().fold(T::infinity(), T::min);
    let hi = eps_list.iter().copied().fold(T::zero(), T::max);
    if (hi / lo).log10() < T::lit(2.0) - T::lit(1e-9) {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: format!("rate fit needs eps spanning two decades, got [{lo}, {hi}]"),
        });
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut points = Vec::with_capacity(eps_sorted.len());
    for &eps in &eps_sorted {
        let p = params.with_eps(eps)?;
        let measured = measure_sweep(&p, sweep)?;
        let (mut sup, mut cert) = (T::zero(), T::zero());
        for s in measured.iter().flatten() {
            let v = (s.r1 + s.r2).abs();
            if v > sup {
                sup = v;
                cert = s.certificate;
            }
        }
        points.push(RatePoint {
            eps: eps.as_f64(),
            sup_measured: sup.as_f64(),
            certificate: cert.as_f64(),
        });
    }
    let usable: Vec<&RatePoint> = points.iter().filter(|p| p.sup_measured > p.certificate).collect();
    if usable.len() < 2 {
        return Ok(RateFit {
            points,
            fit: None,
            verdict: RateVerdict::Inconclusive,
        });
    }
    let e: Vec<f64> = usable.iter().map(|p| p.eps).collect();
    let v: Vec<f64> = usable.iter().map(|p| p.sup_measured).collect();
    let fit = fit_power_law(&e, &v)?;
    Ok(RateFit {
        points,
        fit: Some(fit),
        verdict: RateVerdict::Conclusive,
    })
}

/// Comparison of `u_eps` and `u_0` against the source's `sup |f_xx|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub eps: f64,
    pub k: f64,
    pub horizon: f64,
    pub sup_diff: f64,
    /// `sup |f_xx|` over the grid nodes.
    pub uf_norm: f64,
    /// `sup_diff / (eps^k uf_norm)`; absent when `uf_norm = 0`.
    pub normalized: Option<f64>,
    pub gamma1: f64,
    pub within_gamma1: bool,
}

/// Measures `sup |u_eps - u_0|` and its normalization by `eps^k sup |f_xx|`.
///
/// Without an analytic `f_xx` on the source, a fourth-order central difference in x
/// is used at interior nodes.
pub fn approx_error_field<T: Real>(
    u_eps: &Field<T>,
    u_0: &Field<T>,
    source: &SourceSpec<T>,
    params: &ModelParams<T>,
    k: T,
    gamma: T,
) -> Result<ApproxReport> {
    if !source.is_linear() {
        return Err(Error::Config("approximation report needs a state-independent source".into()));
    }
    let consts = BoundConstants::new(params, k)?;
    let sup_diff = u_eps.sup_diff(u_0)?;
    let grid = u_eps.grid();
    let h = T::lit(1e-2);
    let mut uf = T::zero();
    for &t in grid.t() {
        for &x in grid.x() {
            let v = match source.eval_xx(x, t) {
                Some(v) => v,
                None => {
                    let x = x.max(T::lit(2.0) * h).min(T::PI() - T::lit(2.0) * h);
                    let f = |d: T| source.eval_xt(x + d, t);
                    (-f(T::lit(2.0) * h) + T::lit(16.0) * f(h) - T::lit(30.0) * f(T::zero()) + T::lit(16.0) * f(-h)
                        - f(-T::lit(2.0) * h))
                        / (T::lit(12.0) * h * h)
                }
            };
            uf = uf.max(v.abs());
        }
    }
    let eps = params.eps();
    let gamma1 = consts.gamma1(gamma, eps);
    let normalized = (uf > T::zero() && eps > T::zero()).then(|| sup_diff / (eps.powf(k) * uf));
    Ok(ApproxReport {
        eps: eps.as_f64(),
        k: k.as_f64(),
        horizon: grid.t_end().as_f64(),
        sup_diff: sup_diff.as_f64(),
        uf_norm: uf.as_f64(),
        normalized: normalized.map(|v| v.as_f64()),
        gamma1: gamma1.as_f64(),
        within_gamma1: normalized.is_none_or(|v| v <= gamma1),
    })
}

/// `(max - min) / max` of the normalized residuals; 0 for an empty or all-absent set.
pub fn horizon_spread(reports: &[ApproxReport]) -> f64 {
    let vals: Vec<f64> = reports.iter().filter_map(|r| r.normalized).collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if vals.is_empty() || hi <= 0.0 {
        0.0
    } else {
        (hi - lo) / hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::delta_h;
    use std::f64::consts::PI;

    fn params() -> ModelParams<f64> {
        ModelParams::new(0.5, 1.0, 0.0).unwrap()
    }

    #[test]
    fn constants_refuse_overdamped_and_bad_order() {
        let p = ModelParams::new(1.2, 1.0, 0.01).unwrap();
        assert!(matches!(BoundConstants::new(&p, 0.9), Err(Error::Hypothesis(_))));
        assert!(BoundConstants::new(&params(), 1.0).is_err());
        assert!(BoundConstants::new(&params(), 0.0).is_err());
    }

    #[test]
    fn constants_are_positive_and_b_is_capped() {
        let k = BoundConstants::new(&params(), 0.9).unwrap();
        for eps in [1e-1, 1e-2, 1e-4] {
            assert!(k.c1(eps) > 0.0 && k.c2() > 0.0);
            assert!(k.b(eps) <= 0.5);
        }
        // switch point c^2/(4a) = 0.5
        let below = k.b(0.5 - 1e-12);
        let above = k.b(0.5 + 1e-12);
        assert!((below - above).abs() < 1e-11);
        assert!((k.b(2.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn scaled_c1_matches_definition() {
        let k = BoundConstants::new(&params(), 0.9).unwrap();
        for eps in [0.3_f64, 1e-3] {
            let direct = eps.powf(0.1) * k.c1(eps);
            assert!((k.scaled_c1(eps) - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn c1_decreases_below_turning_point() {
        let k = BoundConstants::new(&params(), 0.9).unwrap();
        let star = k.c1_turning_point();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let eps = star * (i as f64 + 1.0) / 201.0;
            let v = k.c1(eps);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gamma_dominates_r_on_dense_grid() {
        let k = BoundConstants::new(&params(), 0.9).unwrap();
        for eps in [1e-1, 1e-3] {
            let g = k.gamma_at(eps);
            let mut sup = 0.0_f64;
            for i in 0..20000 {
                let t = i as f64 * 0.005;
                sup = sup.max(k.r(eps, t) / (1.0 + t + t * t));
            }
            assert!(sup <= g * (1.0 + 1e-12));
            assert!(sup >= g * (1.0 - 1e-3));
        }
    }

    #[test]
    fn fast_time_inequality_holds() {
        for c in [0.5, 1.0, 2.0] {
            for theta in [0.1, 1.0, 10.0] {
                let (l, r) = fast_time_inequality(c, theta);
                assert!(l <= r);
            }
        }
    }

    #[test]
    fn split_reassembles_delta_h() {
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        for (x, xi, t) in [(0.4, 1.1, 0.7), (PI / 2.0, PI / 2.0, 3.0), (2.5, 0.2, 8.0)] {
            let (r1, r2) = split_r1_r2(&p, x, xi, t, 1e-10).unwrap();
            let d = delta_h(&p, x, xi, t, 1e-10).unwrap();
            assert!((r1.value + r2.value - d.value).abs() <= r2.bound + d.bound + 1e-14);
        }
    }

    #[test]
    fn split_trivial_cases() {
        let (r1, r2) = split_r1_r2(&params(), 1.0, 2.0, 1.0, 1e-8).unwrap();
        assert_eq!((r1.value, r2.value), (0.0, 0.0));
        let p = ModelParams::new(0.5, 1.0, 0.05).unwrap();
        let (r1, r2) = split_r1_r2(&p, 1.0, 2.0, 0.0, 1e-8).unwrap();
        assert_eq!((r1.value, r2.value), (0.0, 0.0));
        let over = ModelParams::new(2.0, 1.0, 0.05).unwrap();
        assert!(split_r1_r2(&over, 1.0, 2.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn small_lemma_sweep_passes() {
        let sweep = SweepGrid::at_point(PI / 2.0, PI / 2.0, 11, 10.0).unwrap();
        let rep = check_lemma41(&params(), 0.9, &sweep, &[1e-1, 1e-2]).unwrap();
        assert_eq!(rep.verdict.overall, Verdict::Pass);
        assert_eq!(rep.samples.len(), 22);
        assert!(rep.c1_monotone);
        let rep = check_theorem41(&params(), 0.9, &sweep, &[1e-1, 1e-2]).unwrap();
        assert_eq!(rep.verdict.overall, Verdict::Pass);
    }

    #[test]
    fn out_of_hypothesis_eps_is_flagged_not_failed() {
        let sweep = SweepGrid::at_point(1.0, 1.0, 3, 2.0).unwrap();
        let rep = check_lemma41(&params(), 0.9, &sweep, &[1.5]).unwrap();
        assert_eq!(rep.out_of_hypothesis, 3);
        assert_eq!(rep.verdict.overall, Verdict::NotApplicable);
        assert_eq!(rep.failures().count(), 0);
    }

    #[test]
    fn zero_eps_gives_zero_difference() {
        let sweep = SweepGrid::at_point(1.0, 1.0, 3, 2.0).unwrap();
        let rep = check_theorem41(&params(), 0.9, &sweep, &[0.0, 0.1]).unwrap();
        for s in rep.samples.iter().filter(|s| s.eps == 0.0) {
            assert_eq!(s.theorem.measured, 0.0);
            assert!(s.theorem.pass);
        }
    }

    #[test]
    fn power_law_recovers_exact_slope() {
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let v: Vec<f64> = eps.iter().map(|e| 3.7 * e).collect();
        let fit = fit_power_law(&eps, &v).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.intercept - 3.7_f64.ln()).abs() < 1e-9);
        assert!(fit_power_law(&[0.1], &[0.2]).is_err());
    }

    #[test]
    fn rate_fit_preconditions() {
        let sweep = SweepGrid::at_point(1.0, 1.0, 3, 2.0).unwrap();
        assert!(fit_rate(&params(), &[0.1], &sweep).is_err());
        assert!(fit_rate(&params(), &[0.1, 0.08, 0.05, 0.02], &sweep).is_err());
    }

    #[test]
    fn log_add_exp_is_stable() {
        assert!((log_add_exp(-1000.0_f64, -1000.0) - (-1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
