//! Tensor-product Gauss-Legendre quadrature over a rectangle, split into
//! panels at interior break points, with order doubling until two successive
//! estimates agree.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Nodes per axis per panel at the first level.
    pub base_order: usize,
    /// Multiplier applied to the order at each refinement.
    pub refinement_factor: usize,
    pub rel_tolerance: f64,
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_order: 8,
            refinement_factor: 2,
            rel_tolerance: 1e-9,
            max_refinements: 6,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_order < 8 {
            return Err(Error::validation(
                "base_order",
                format!("must be at least 8, got {}", self.base_order),
            ));
        }
        if self.refinement_factor < 2 {
            return Err(Error::validation(
                "refinement_factor",
                format!("must be at least 2, got {}", self.refinement_factor),
            ));
        }
        if !(1e-14..=1e-3).contains(&self.rel_tolerance) {
            return Err(Error::validation(
                "rel_tolerance",
                format!("must lie in [1e-14, 1e-3], got {}", self.rel_tolerance),
            ));
        }
        Ok(())
    }

    /// Node count per axis per panel after `level` refinements.
    pub fn order_at(&self, level: usize) -> usize {
        self.base_order * self.refinement_factor.pow(level as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: Complex64,
    /// Magnitude of the difference between the last two estimates.
    pub abs_error: f64,
    /// Node count per axis per panel of the accepted estimate.
    pub order: usize,
}

/// Gauss-Legendre nodes and weights mapped onto a union of panels.
#[derive(Debug, Clone)]
struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PanelRule {
    fn new(rule: &GaussLegendre, breaks: &[f64]) -> Self {
        let pairs = rule.as_node_weight_pairs();
        let mut nodes = Vec::with_capacity(pairs.len() * (breaks.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            for &(x, wt) in pairs {
                nodes.push(mid + half * x);
                weights.push(half * wt);
            }
        }
        Self { nodes, weights }
    }
}

/// Integrates `f(x, y)` over `[x_breaks[0], x_breaks.last()] x [y_breaks[0],
/// y_breaks.last()]`. Each axis is split at its interior break points and every
/// panel gets the same Gauss-Legendre order.
pub fn integrate_2d<F>(
    f: F,
    x_breaks: &[f64],
    y_breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadratureEstimate>
where
    F: Fn(f64, f64) -> Complex64,
{
    spec.validate()?;
    if x_breaks.len() < 2 || y_breaks.len() < 2 {
        return Err(Error::InvalidArgument(
            "each axis needs at least two break points".into(),
        ));
    }

    let mut previous = tensor_sum(&f, x_breaks, y_breaks, spec.order_at(0));
    for level in 1..=spec.max_refinements {
        let order = spec.order_at(level);
        let current = tensor_sum(&f, x_breaks, y_breaks, order);
        let abs_error = (current - previous).norm();
        if current.is_finite() && abs_error <= spec.rel_tolerance * current.norm() {
            return Ok(QuadratureEstimate {
                value: current,
                abs_error,
                order,
            });
        }
        if !current.is_finite() || level == spec.max_refinements {
            return Err(Error::Convergence {
                refinements: level,
                previous,
                last: current,
            });
        }
        previous = current;
    }
    // A single estimate carries no error information.
    Err(Error::Convergence {
        refinements: 0,
        previous,
        last: previous,
    })
}

fn tensor_sum<F>(f: &F, x_breaks: &[f64], y_breaks: &[f64], order: usize) -> Complex64
where
    F: Fn(f64, f64) -> Complex64,
{
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order is at least 8"));
    let xr = PanelRule::new(&rule, x_breaks);
    let yr = PanelRule::new(&rule, y_breaks);
    let mut total = Complex64::new(0.0, 0.0);
    for (&y, &wy) in yr.nodes.iter().zip(&yr.weights) {
        let mut row = Complex64::new(0.0, 0.0);
        for (&x, &wx) in xr.nodes.iter().zip(&xr.weights) {
            row += f(x, y) * wx;
        }
        total += row * wy;
    }
    total
}
