//! Error-free-transformation accumulation.

use crate::scalar::Real;

/// Neumaier-style compensated accumulator (TwoSum per addition).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        // TwoSum: exact rounding error of sum + value
        let bp = t - self.sum;
        let err = (self.sum - (t - bp)) + (value - bp);
        self.compensation += err;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.compensation
    }

    pub fn sum_iter<I: IntoIterator<Item = T>>(iter: I) -> T {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

impl<T: Real> Extend<T> for CompensatedSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let terms = [1.0e16_f64, 1.0, -1.0e16, 1.0];
        let naive: f64 = terms.iter().sum();
        let comp = CompensatedSum::sum_iter(terms);
        assert_eq!(comp, 2.0);
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn harmonic_tail_matches_reverse_order() {
        let n = 200_000;
        let fwd = CompensatedSum::sum_iter((1..=n).map(|k| 1.0_f32 / k as f32));
        let rev = CompensatedSum::sum_iter((1..=n).rev().map(|k| 1.0_f32 / k as f32));
        let exact: f64 = (1..=n).rev().map(|k| 1.0 / k as f64).sum();
        assert!((fwd as f64 - exact).abs() < 2e-6);
        assert!((rev as f64 - exact).abs() < 2e-6);
    }
}
