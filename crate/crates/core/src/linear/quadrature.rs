use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A quadrature rule on `[0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct XQuadrature<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

/// How the x-integrals of a projection are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureChoice {
    /// Composite trapezoid on the grid's own x nodes.
    GridTrapezoid,
    /// Composite Gauss-Legendre with `panels` panels of `order` points.
    GaussLegendre { panels: usize, order: usize },
    /// Gauss-Legendre sized from the truncation index.
    #[default]
    Auto,
}

impl QuadratureChoice {
    /// Resolves [`QuadratureChoice::Auto`] for `n_max` modes.
    pub fn resolve(self, n_max: usize) -> Self {
        match self {
            Self::Auto => Self::GaussLegendre {
                panels: n_max.div_ceil(2).max(4),
                order: 10,
            },
            other => other,
        }
    }
}

impl<T: Real> XQuadrature<T> {
    /// Composite trapezoid over arbitrary increasing nodes.
    pub fn trapezoid(nodes: &[T]) -> Self {
        let half = T::lit(0.5);
        let mut weights = vec![T::zero(); nodes.len()];
        for i in 0..nodes.len().saturating_sub(1) {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += half * h;
            weights[i + 1] += half * h;
        }
        Self {
            nodes: nodes.to_vec(),
            weights,
        }
    }

    /// Trapezoid on every other node (endpoints always kept).
    pub fn trapezoid_coarse(nodes: &[T]) -> Self {
        let last = nodes.len() - 1;
        let sub: Vec<T> = nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 2 == 0 || *i == last)
            .map(|(_, v)| *v)
            .collect();
        Self::trapezoid(&sub)
    }

    pub fn gauss_legendre(panels: usize, order: usize) -> Result<Self> {
        if panels == 0 || order == 0 {
            return Err(Error::Config("Gauss-Legendre rule needs at least one panel and one point".into()));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("nonzero"));
        let width = std::f64::consts::PI / panels as f64;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = p as f64 * width;
            for &(node, weight) in rule.as_node_weight_pairs() {
                pairs.push((lo + 0.5 * width * (node + 1.0), 0.5 * width * weight));
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        Ok(Self {
            nodes: pairs.iter().map(|p| T::lit(p.0)).collect(),
            weights: pairs.iter().map(|p| T::lit(p.1)).collect(),
        })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest gap between consecutive nodes, counting the walls.
    pub fn max_gap(&self) -> T {
        let mut prev = T::zero();
        let mut gap = T::zero();
        for &x in &self.nodes {
            gap = gap.max(x - prev);
            prev = x;
        }
        gap.max(T::PI() - prev)
    }

    /// Refuses rules with fewer than about four nodes per shortest wavelength.
    pub fn check_resolves(&self, n_max: usize) -> Result<()> {
        if n_max == 0 {
            return Ok(());
        }
        let required = T::PI() / (T::lit(2.0) * T::from_usize_lossy(n_max));
        let gap = self.max_gap();
        if gap > required * (T::one() + T::lit(1e-12)) {
            return Err(Error::InsufficientResolution {
                nodes: self.len(),
                modes: n_max,
                max_gap: gap.as_f64(),
                required_gap: required.as_f64(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_smooth_functions() {
        let q = XQuadrature::<f64>::gauss_legendre(4, 8).unwrap();
        let s: f64 = q.nodes().iter().zip(q.weights()).map(|(x, w)| w * x.sin()).sum();
        assert!((s - 2.0).abs() < 1e-14);
        assert_eq!(q.len(), 32);
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let nodes = vec![0.0, 0.3, 1.1, 2.0, std::f64::consts::PI];
        let q = XQuadrature::trapezoid(&nodes);
        let total: f64 = q.weights().iter().sum();
        assert!((total - std::f64::consts::PI).abs() < 1e-15);
        let c = XQuadrature::trapezoid_coarse(&nodes);
        assert_eq!(c.nodes(), &[0.0, 1.1, std::f64::consts::PI]);
    }

    #[test]
    fn resolution_check() {
        let q = XQuadrature::<f64>::gauss_legendre(8, 4).unwrap();
        assert!(q.check_resolves(4).is_ok());
        assert!(matches!(q.check_resolves(64), Err(Error::InsufficientResolution { .. })));
    }
}
