//! Per-round composite costs `f_t = s_t + r_t`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::prox::{NonsmoothPart, QuadraticCost};
use crate::vecops::{add, dot, sub};

/// Value-and-gradient oracle for a differentiable convex function.
pub trait SmoothFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Clone)]
pub enum SmoothPart {
    Zero,
    /// `⟨c, x⟩`
    Linear(Vec<f64>),
    /// `(weight/2)‖x − target‖²`
    Quadratic(QuadraticCost),
    /// `Σᵢ (wᵢ/2)(xᵢ − cᵢ)²`
    DiagQuadratic { target: Vec<f64>, weights: Vec<f64> },
    /// Portfolio log loss `−log⟨r, x⟩`.
    LogLoss { returns: Vec<f64> },
    Custom(Arc<dyn SmoothFunction>),
}

impl fmt::Debug for SmoothPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothPart::Zero => write!(f, "Zero"),
            SmoothPart::Linear(c) => f.debug_tuple("Linear").field(c).finish(),
            SmoothPart::Quadratic(q) => f.debug_tuple("Quadratic").field(q).finish(),
            SmoothPart::DiagQuadratic { target, weights } => f
                .debug_struct("DiagQuadratic")
                .field("target", target)
                .field("weights", weights)
                .finish(),
            SmoothPart::LogLoss { returns } => {
                f.debug_struct("LogLoss").field("returns", returns).finish()
            }
            SmoothPart::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl SmoothPart {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothPart::Zero => 0.0,
            SmoothPart::Linear(c) => dot(c, x),
            SmoothPart::Quadratic(q) => q.value(x),
            SmoothPart::DiagQuadratic { target, weights } => x
                .iter()
                .zip(target)
                .zip(weights)
                .map(|((xi, ci), wi)| 0.5 * wi * (xi - ci) * (xi - ci))
                .sum(),
            SmoothPart::LogLoss { returns } => -dot(returns, x).ln(),
            SmoothPart::Custom(c) => c.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SmoothPart::Zero => vec![0.0; x.len()],
            SmoothPart::Linear(c) => c.clone(),
            SmoothPart::Quadratic(q) => q.gradient(x),
            SmoothPart::DiagQuadratic { target, weights } => x
                .iter()
                .zip(target)
                .zip(weights)
                .map(|((xi, ci), wi)| wi * (xi - ci))
                .collect(),
            SmoothPart::LogLoss { returns } => {
                let inner = dot(returns, x);
                returns.iter().map(|r| -r / inner).collect()
            }
            SmoothPart::Custom(c) => c.gradient(x),
        }
    }
}

/// `f_t = s_t + r_t` with smoothness constant β and strong-convexity
/// constant α of the smooth part (w.r.t. the setup's primal norm).
#[derive(Clone, Debug)]
pub struct CompositeCost {
    pub smooth: SmoothPart,
    pub nonsmooth: NonsmoothPart,
    pub beta: f64,
    pub alpha: f64,
}

impl CompositeCost {
    pub fn new(smooth: SmoothPart, nonsmooth: NonsmoothPart, beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0) || !(alpha >= 0.0) {
            return Err(Error::Config(format!(
                "need beta > 0 and alpha >= 0 (got {beta}, {alpha})"
            )));
        }
        nonsmooth.validate()?;
        Ok(CompositeCost {
            smooth,
            nonsmooth,
            beta,
            alpha,
        })
    }

    /// The tracking cost `½‖x − u‖² + λ‖x‖₁`.
    pub fn tracking(target: Vec<f64>, l1: f64) -> Self {
        CompositeCost {
            smooth: SmoothPart::Quadratic(QuadraticCost {
                target,
                weight: 1.0,
            }),
            nonsmooth: NonsmoothPart::L1 { weight: l1 },
            beta: 1.0,
            alpha: 1.0,
        }
    }

    /// The portfolio loss `−log⟨r, x⟩` with a configured smoothness constant.
    pub fn log_loss(returns: Vec<f64>, beta: f64) -> Self {
        CompositeCost {
            smooth: SmoothPart::LogLoss { returns },
            nonsmooth: NonsmoothPart::Zero,
            beta,
            alpha: 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.nonsmooth.value(x)
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.smooth.gradient(x)
    }

    /// A subgradient of the whole cost (zero element of ∂|·| at kinks).
    pub fn full_subgradient(&self, x: &[f64]) -> Vec<f64> {
        add(&self.smooth.gradient(x), &self.nonsmooth.subgradient(x))
    }

    /// Sampled β-smoothness check: `‖∇s(x) − ∇s(y)‖_* ≤ β‖x − y‖`.
    pub fn smoothness_holds(
        &self,
        setup: &crate::geometry::MirrorSetup,
        pairs: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<bool> {
        for (x, y) in pairs {
            check_dim(setup.dim, x.len())?;
            let lhs = setup.dual_norm(&sub(&self.smooth.gradient(x), &self.smooth.gradient(y)))?;
            let rhs = self.beta * setup.primal_norm(&sub(x, y));
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Sampled strong-convexity check
    /// `s(x) − s(y) ≤ ⟨∇s(x), x − y⟩ − (α/2)‖x − y‖²`.
    pub fn strong_convexity_holds(
        &self,
        setup: &crate::geometry::MirrorSetup,
        pairs: &[(Vec<f64>, Vec<f64>)],
    ) -> bool {
        pairs.iter().all(|(x, y)| {
            let d = sub(x, y);
            let n = setup.primal_norm(&d);
            let lhs = self.smooth.value(x) - self.smooth.value(y);
            let rhs = dot(&self.smooth.gradient(x), &d) - 0.5 * self.alpha * n * n;
            lhs <= rhs + 1e-9 * (1.0 + lhs.abs())
        })
    }
}
