//! Composite proximal subproblems.
//!
//! Every update rule in this crate reduces to
//!
//! ```text
//! arg min_{x ∈ X}  η⟨w, x⟩ + η·r(x) + B_h(x, v)
//! ```
//!
//! Closed forms cover the euclidean geometry with zero, ℓ1 and quadratic(+ℓ1)
//! terms on every set kind, and the multiplicative update for the negative
//! entropy on the simplex. Custom convex terms go through an iterative
//! fallback that certifies its optimality gap.
//!
//! The subproblem is 1-strongly convex in the primal norm, so its minimizer
//! is unique.

use std::fmt;
use std::sync::Arc;

use crate::cost::{CompositeCost, SmoothPart};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{floor_and_normalize, FeasibleSet, MirrorMap, MirrorSetup};
use crate::vecops::{dot, norm1, norm2, sign0, soft_threshold, sub};

/// `(weight/2)‖x − target‖²`
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub target: Vec<f64>,
    pub weight: f64,
}

impl QuadraticCost {
    pub fn new(target: Vec<f64>, weight: f64) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::Config(format!("quadratic weight must be > 0, got {weight}")));
        }
        Ok(QuadraticCost { target, weight })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = sub(x, &self.target);
        0.5 * self.weight * dot(&d, &d)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.target)
            .map(|(xi, ci)| self.weight * (xi - ci))
            .collect()
    }
}

/// Value and subgradient oracle for a convex function.
pub trait ConvexFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;
}

/// The non-linearized term `r` of a composite step.
#[derive(Clone)]
pub enum NonsmoothPart {
    Zero,
    L1 { weight: f64 },
    /// A full quadratic cost plus an optional ℓ1 term. Used when a step keeps
    /// the whole cost unlinearized (implicit updates).
    Quadratic { cost: QuadraticCost, l1: f64 },
    Custom(Arc<dyn ConvexFunction>),
}

impl fmt::Debug for NonsmoothPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonsmoothPart::Zero => write!(f, "Zero"),
            NonsmoothPart::L1 { weight } => write!(f, "L1({weight})"),
            NonsmoothPart::Quadratic { cost, l1 } => f
                .debug_struct("Quadratic")
                .field("cost", cost)
                .field("l1", l1)
                .finish(),
            NonsmoothPart::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl NonsmoothPart {
    pub fn validate(&self) -> Result<()> {
        match self {
            NonsmoothPart::L1 { weight } | NonsmoothPart::Quadratic { l1: weight, .. }
                if !(weight.is_finite() && *weight >= 0.0) =>
            {
                Err(Error::Config(format!("l1 weight must be finite and >= 0, got {weight}")))
            }
            NonsmoothPart::Quadratic { cost, .. } if !(cost.weight > 0.0) => {
                Err(Error::Config("quadratic weight must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NonsmoothPart::Zero => true,
            NonsmoothPart::L1 { weight } => *weight == 0.0,
            _ => false,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            NonsmoothPart::Zero => 0.0,
            NonsmoothPart::L1 { weight } => weight * norm1(x),
            NonsmoothPart::Quadratic { cost, l1 } => cost.value(x) + l1 * norm1(x),
            NonsmoothPart::Custom(c) => c.value(x),
        }
    }

    /// A subgradient; for ℓ1 the zero element is chosen at zero coordinates.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            NonsmoothPart::Zero => vec![0.0; x.len()],
            NonsmoothPart::L1 { weight } => x.iter().map(|v| weight * sign0(*v)).collect(),
            NonsmoothPart::Quadratic { cost, l1 } => cost
                .gradient(x)
                .iter()
                .zip(x)
                .map(|(g, v)| g + l1 * sign0(*v))
                .collect(),
            NonsmoothPart::Custom(c) => c.subgradient(x),
        }
    }

    /// Midpoint-convexity spot check on the given pairs.
    pub fn midpoint_convex(&self, pairs: &[(Vec<f64>, Vec<f64>)]) -> bool {
        pairs.iter().all(|(x, y)| {
            let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = self.value(&mid);
            let rhs = 0.5 * (self.value(x) + self.value(y));
            lhs <= rhs + 1e-12 * (1.0 + rhs.abs())
        })
    }
}

/// Iteration budget of the certified fallback solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackConfig {
    pub max_iter: usize,
    pub gap_tol: f64,
}

impl Default for FallbackConfig {
    fn default() -> Self {
        FallbackConfig {
            max_iter: 500,
            gap_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProxMethod {
    ClosedForm,
    Bisection { iterations: usize },
    Fallback { iterations: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxSolution {
    pub point: Vec<f64>,
    pub method: ProxMethod,
}

/// Objective `η⟨w, x⟩ + η·r(x) + B_h(x, v)` of the composite subproblem.
pub fn subproblem_objective(
    setup: &MirrorSetup,
    w: &[f64],
    r: &NonsmoothPart,
    eta: f64,
    v: &[f64],
    x: &[f64],
) -> Result<f64> {
    Ok(eta * dot(w, x) + eta * r.value(x) + setup.bregman(x, v)?)
}

/// `arg min_{x ∈ X} η⟨w, x⟩ + η·r(x) + B_h(x, v)`.
pub fn composite_prox(
    setup: &MirrorSetup,
    w: &[f64],
    r: &NonsmoothPart,
    eta: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    composite_prox_detailed(setup, w, r, eta, v, FallbackConfig::default()).map(|s| s.point)
}

pub fn composite_prox_detailed(
    setup: &MirrorSetup,
    w: &[f64],
    r: &NonsmoothPart,
    eta: f64,
    v: &[f64],
    fallback: FallbackConfig,
) -> Result<ProxSolution> {
    check_dim(setup.dim, w.len())?;
    check_dim(setup.dim, v.len())?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("step size must be positive and finite, got {eta}")));
    }
    r.validate()?;
    let v = prepare_center(setup, v)?;

    match setup.map {
        MirrorMap::Euclidean => {
            let (center, threshold) = match r {
                NonsmoothPart::Zero => (axpy_scaled(&v, -eta, w), 0.0),
                NonsmoothPart::L1 { weight } => (axpy_scaled(&v, -eta, w), eta * weight),
                NonsmoothPart::Quadratic { cost, l1 } => {
                    check_dim(setup.dim, cost.target.len())?;
                    let denom = 1.0 + eta * cost.weight;
                    let center = v
                        .iter()
                        .zip(w)
                        .zip(&cost.target)
                        .map(|((vi, wi), ci)| (vi - eta * wi + eta * cost.weight * ci) / denom)
                        .collect();
                    (center, eta * l1 / denom)
                }
                NonsmoothPart::Custom(f) => {
                    let f = f.clone();
                    return fallback_solve(
                        setup,
                        &v,
                        |x| eta * dot(w, x) + eta * f.value(x),
                        |x| {
                            f.subgradient(x)
                                .iter()
                                .zip(w)
                                .map(|(g, wi)| eta * (g + wi))
                                .collect()
                        },
                        fallback,
                    );
                }
            };
            Ok(euclidean_l1_prox(&setup.set, &center, threshold))
        }
        MirrorMap::NegativeEntropy => match r {
            NonsmoothPart::Zero => Ok(ProxSolution {
                point: multiplicative_update(&v, w, eta),
                method: ProxMethod::ClosedForm,
            }),
            NonsmoothPart::L1 { weight } if *weight == 0.0 => Ok(ProxSolution {
                point: multiplicative_update(&v, w, eta),
                method: ProxMethod::ClosedForm,
            }),
            NonsmoothPart::L1 { .. } => Err(Error::UnsupportedCombination(
                "negative entropy with a nonzero l1 term".into(),
            )),
            other => {
                let other = other.clone();
                fallback_solve(
                    setup,
                    &v,
                    |x| eta * dot(w, x) + eta * other.value(x),
                    |x| {
                        other
                            .subgradient(x)
                            .iter()
                            .zip(w)
                            .map(|(g, wi)| eta * (g + wi))
                            .collect()
                    },
                    fallback,
                )
            }
        },
    }
}

/// `arg min_{x ∈ X} η·f(x) + B_h(x, v)` with the whole cost unlinearized.
pub fn implicit_prox(
    setup: &MirrorSetup,
    cost: &CompositeCost,
    eta: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    implicit_prox_detailed(setup, cost, eta, v, FallbackConfig::default()).map(|s| s.point)
}

pub fn implicit_prox_detailed(
    setup: &MirrorSetup,
    cost: &CompositeCost,
    eta: f64,
    v: &[f64],
    fallback: FallbackConfig,
) -> Result<ProxSolution> {
    let zero = vec![0.0; setup.dim];
    if setup.map == MirrorMap::Euclidean {
        if let Some((r, linear)) = merge_quadratic(&cost.smooth, &cost.nonsmooth, setup.dim) {
            return composite_prox_detailed(setup, &linear, &r, eta, v, fallback);
        }
    }
    match (&cost.smooth, setup.map) {
        (SmoothPart::Zero, _) => composite_prox_detailed(setup, &zero, &cost.nonsmooth, eta, v, fallback),
        (SmoothPart::Linear(c), _) => {
            composite_prox_detailed(setup, c, &cost.nonsmooth, eta, v, fallback)
        }
        _ => {
            check_dim(setup.dim, v.len())?;
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::Config(format!("step size must be positive, got {eta}")));
            }
            let v = prepare_center(setup, v)?;
            fallback_solve(
                setup,
                &v,
                |x| eta * cost.value(x),
                |x| cost.full_subgradient(x).iter().map(|g| eta * g).collect(),
                fallback,
            )
        }
    }
}

/// Folds a quadratic/linear smooth part and a zero/ℓ1/quadratic term into a
/// single quadratic-plus-ℓ1 term and a residual linear term.
fn merge_quadratic(
    smooth: &SmoothPart,
    nonsmooth: &NonsmoothPart,
    dim: usize,
) -> Option<(NonsmoothPart, Vec<f64>)> {
    let (mut weight, mut weighted_target, mut l1) = (0.0, vec![0.0; dim], 0.0);
    let mut linear = vec![0.0; dim];
    match smooth {
        SmoothPart::Zero => {}
        SmoothPart::Linear(c) if c.len() == dim => linear = c.clone(),
        SmoothPart::Quadratic(q) if q.target.len() == dim => {
            weight += q.weight;
            for (acc, c) in weighted_target.iter_mut().zip(&q.target) {
                *acc += q.weight * c;
            }
        }
        _ => return None,
    }
    match nonsmooth {
        NonsmoothPart::Zero => {}
        NonsmoothPart::L1 { weight: w } => l1 = *w,
        NonsmoothPart::Quadratic { cost, l1: w } if cost.target.len() == dim => {
            weight += cost.weight;
            l1 = *w;
            for (acc, c) in weighted_target.iter_mut().zip(&cost.target) {
                *acc += cost.weight * c;
            }
        }
        _ => return None,
    }
    let r = if weight > 0.0 {
        NonsmoothPart::Quadratic {
            cost: QuadraticCost {
                target: weighted_target.iter().map(|c| c / weight).collect(),
                weight,
            },
            l1,
        }
    } else if l1 > 0.0 {
        NonsmoothPart::L1 { weight: l1 }
    } else {
        NonsmoothPart::Zero
    };
    Some((r, linear))
}

fn prepare_center(setup: &MirrorSetup, v: &[f64]) -> Result<Vec<f64>> {
    match (&setup.map, &setup.set) {
        (MirrorMap::NegativeEntropy, _) | (MirrorMap::Euclidean, FeasibleSet::Simplex) => {
            if v.iter().any(|x| !(x.is_finite()) || *x < -1e-9) {
                return Err(Error::DomainViolation("center outside the simplex".into()));
            }
            setup.normalize_point(v)
        }
        _ => {
            if !setup.set.contains(v) {
                return Err(Error::DomainViolation("center outside the feasible set".into()));
            }
            Ok(v.to_vec())
        }
    }
}

fn axpy_scaled(v: &[f64], s: f64, w: &[f64]) -> Vec<f64> {
    v.iter().zip(w).map(|(a, b)| a + s * b).collect()
}

/// `xᵢ ∝ vᵢ·exp(−η wᵢ)`, computed in log space and floored.
fn multiplicative_update(v: &[f64], w: &[f64], eta: f64) -> Vec<f64> {
    let logs: Vec<f64> = v.iter().zip(w).map(|(vi, wi)| vi.ln() - eta * wi).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    floor_and_normalize(&unnormalized)
}

/// `arg min_{x ∈ X} ½‖x − m‖² + k‖x‖₁` for each euclidean set kind.
pub(crate) fn euclidean_l1_prox(set: &FeasibleSet, m: &[f64], k: f64) -> ProxSolution {
    let closed = |point| ProxSolution {
        point,
        method: ProxMethod::ClosedForm,
    };
    match set {
        FeasibleSet::WholeSpace => closed(soft_threshold(m, k)),
        // separable: clamping the 1-D minimizer is exact
        FeasibleSet::Box { .. } => closed(set.euclidean_projection(&soft_threshold(m, k))),
        // ‖x‖₁ = 1 on the simplex, so the ℓ1 term is constant there
        FeasibleSet::Simplex => closed(set.euclidean_projection(m)),
        FeasibleSet::Ball { center, radius } => {
            if k == 0.0 {
                return closed(set.euclidean_projection(m));
            }
            ball_l1_prox(m, k, center, *radius)
        }
    }
}

/// Bisection on the multiplier of the ball constraint. For μ ≥ 0 the
/// penalized minimizer is `soft((m + μc)/(1 + μ), k/(1 + μ))` and its
/// distance to the center is nonincreasing in μ.
fn ball_l1_prox(m: &[f64], k: f64, center: &[f64], radius: f64) -> ProxSolution {
    let at = |mu: f64| -> Vec<f64> {
        let shifted: Vec<f64> = m
            .iter()
            .zip(center)
            .map(|(mi, ci)| (mi + mu * ci) / (1.0 + mu))
            .collect();
        soft_threshold(&shifted, k / (1.0 + mu))
    };
    let dist = |x: &[f64]| norm2(&sub(x, center));
    let free = at(0.0);
    if dist(&free) <= radius {
        return ProxSolution {
            point: free,
            method: ProxMethod::ClosedForm,
        };
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    while dist(&at(hi)) > radius && iterations < 2000 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
    }
    while hi - lo > 1e-15 * (1.0 + hi) && iterations < 2000 {
        let mid = 0.5 * (lo + hi);
        if dist(&at(mid)) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut point = at(hi);
    let d = dist(&point);
    if d > radius {
        point = center
            .iter()
            .zip(&point)
            .map(|(c, p)| c + (p - c) * radius / d)
            .collect();
    }
    ProxSolution {
        point,
        method: ProxMethod::Bisection { iterations },
    }
}

/// Certified gap of `Ψ` at `x` given a subgradient `g`: the linear
/// minimization gap `max_{y ∈ X} ⟨g, x − y⟩` on bounded sets, and
/// `‖g‖²/2` (Ψ is 1-strongly convex) on the whole space.
fn certified_gap(set: &FeasibleSet, x: &[f64], g: &[f64]) -> f64 {
    match set {
        FeasibleSet::WholeSpace => 0.5 * dot(g, g),
        FeasibleSet::Box { lower, upper } => {
            let mut gap = 0.0;
            for i in 0..x.len() {
                gap += g[i] * x[i] - (g[i] * lower[i]).min(g[i] * upper[i]);
            }
            gap
        }
        FeasibleSet::Ball { center, radius } => dot(g, &sub(x, center)) + radius * norm2(g),
        FeasibleSet::Simplex => {
            let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
            dot(g, x) - min
        }
    }
}

/// Projected (mirror) gradient with backtracking on
/// `Ψ(x) = φ(x) + B_h(x, v)`, tracking the best certified iterate.
fn fallback_solve<F, G>(
    setup: &MirrorSetup,
    v: &[f64],
    phi: F,
    phi_sub: G,
    config: FallbackConfig,
) -> Result<ProxSolution>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let entropy = setup.map == MirrorMap::NegativeEntropy;
    let psi = |x: &[f64]| phi(x) + setup.bregman(x, v).unwrap_or(f64::INFINITY);
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut g = phi_sub(x);
        for i in 0..x.len() {
            g[i] += if entropy { x[i].ln() - v[i].ln() } else { x[i] - v[i] };
        }
        g
    };
    let step_from = |x: &[f64], g: &[f64], tau: f64| -> Vec<f64> {
        if entropy {
            multiplicative_update(x, g, tau)
        } else {
            let moved: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - tau * b).collect();
            setup.set.euclidean_projection(&moved)
        }
    };
    let local_div = |a: &[f64], b: &[f64]| -> f64 { setup.bregman(a, b).unwrap_or(f64::INFINITY) };

    let mut x = v.to_vec();
    let mut g = grad(&x);
    let mut best = (certified_gap(&setup.set, &x, &g), x.clone());
    let mut tau: f64 = 1.0;
    for iteration in 0..config.max_iter {
        if best.0 < config.gap_tol {
            return Ok(ProxSolution {
                point: best.1,
                method: ProxMethod::Fallback {
                    iterations: iteration,
                    gap: best.0,
                },
            });
        }
        let fx = psi(&x);
        let mut accepted = None;
        // the Bregman term alone is 1-smooth relative to h, so τ ≤ 1
        let mut trial_tau = (tau * 1.5).min(1.0);
        for _ in 0..60 {
            let cand = step_from(&x, &g, trial_tau);
            let div = local_div(&cand, &x) / trial_tau;
            let model = fx + dot(&g, &sub(&cand, &x)) + div;
            // below round-off of Ψ the decrease test is replaced by a
            // curvature test on gradients, which has no cancellation
            let ok = if div <= 1e-10 * (1.0 + fx.abs()) {
                0.5 * dot(&sub(&grad(&cand), &g), &sub(&cand, &x)) <= div
            } else {
                psi(&cand) <= model + 1e-15 * (1.0 + fx.abs())
            };
            if ok {
                accepted = Some(cand);
                break;
            }
            trial_tau *= 0.5;
        }
        let next = match accepted {
            Some(c) => {
                tau = trial_tau;
                c
            }
            // no sufficient decrease (nonsmooth kink): diminishing subgradient step
            None => step_from(&x, &g, 1.0 / (iteration as f64 + 1.0)),
        };
        x = next;
        g = grad(&x);
        let gap = certified_gap(&setup.set, &x, &g);
        if gap < best.0 {
            best = (gap, x.clone());
        }
    }
    if best.0 < config.gap_tol {
        return Ok(ProxSolution {
            point: best.1,
            method: ProxMethod::Fallback {
                iterations: config.max_iter,
                gap: best.0,
            },
        });
    }
    Err(Error::NonConvergence {
        best: best.1,
        gap: best.0,
        iterations: config.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn euclid(dim: usize) -> MirrorSetup {
        MirrorSetup::euclidean(dim, FeasibleSet::WholeSpace).unwrap()
    }

    #[test]
    fn l1_whole_space_example() {
        // grid oracle value frozen from a 1e-3 grid plus refinement: (2, 0)
        let x = composite_prox(
            &euclid(2),
            &[-3.0, 0.5],
            &NonsmoothPart::L1 { weight: 1.0 },
            1.0,
            &[0.0, 0.0],
        )
        .unwrap();
        assert_eq!(x, vec![2.0, 0.0]);
    }

    #[test]
    fn entropy_zero_linear_term_keeps_center() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        for eta in [1e-3, 1.0, 50.0] {
            let x = composite_prox(&s, &[0.0, 0.0], &NonsmoothPart::Zero, eta, &[0.3, 0.7]).unwrap();
            assert_abs_diff_eq!(x[0], 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(x[1], 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn entropy_multiplicative_example() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        let x = composite_prox(&s, &[4f64.ln(), 0.0], &NonsmoothPart::Zero, 1.0, &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(x[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn entropy_l1_is_rejected() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        let r = composite_prox(&s, &[0.0, 0.0], &NonsmoothPart::L1 { weight: 0.5 }, 1.0, &[0.5, 0.5]);
        assert!(matches!(r, Err(Error::UnsupportedCombination(_))));
    }

    #[test]
    fn implicit_quadratic_examples() {
        let s = euclid(1);
        let c = CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![1.0], 1.0).unwrap()),
            NonsmoothPart::Zero,
            1.0,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(implicit_prox(&s, &c, 1.0, &[0.0]).unwrap()[0], 0.5, epsilon = 1e-15);
        let c2 = CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![2.0], 2.0).unwrap()),
            NonsmoothPart::Zero,
            2.0,
            2.0,
        )
        .unwrap();
        assert_abs_diff_eq!(implicit_prox(&s, &c2, 0.5, &[1.0]).unwrap()[0], 1.5, epsilon = 1e-15);
        // vanishing step
        let x = implicit_prox(&s, &c2, 1e-9, &[1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn implicit_quadratic_with_l1_soft_thresholds() {
        let s = euclid(1);
        let c = CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![3.0], 1.0).unwrap()),
            NonsmoothPart::L1 { weight: 1.0 },
            1.0,
            1.0,
        )
        .unwrap();
        // minimize ½(x−3)² + |x| + ½x²: x = (3 − 1)/2 = 1
        assert_abs_diff_eq!(implicit_prox(&s, &c, 1.0, &[0.0]).unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ball_l1_is_feasible_and_optimal() {
        let set = FeasibleSet::centered_ball(2, 1.0);
        let s = MirrorSetup::euclidean(2, set.clone()).unwrap();
        let r = NonsmoothPart::L1 { weight: 0.3 };
        let v = [0.5, 0.0];
        let w = [-4.0, -2.0];
        let sol = composite_prox_detailed(&s, &w, &r, 1.0, &v, FallbackConfig::default()).unwrap();
        assert!(matches!(sol.method, ProxMethod::Bisection { .. }));
        assert!(set.contains(&sol.point));
        let f = |x: &[f64]| subproblem_objective(&s, &w, &r, 1.0, &v, x).unwrap();
        let best = f(&sol.point);
        for i in 0..400 {
            let th = i as f64 / 400.0 * std::f64::consts::TAU;
            for rad in [0.25, 0.5, 0.9, 1.0] {
                assert!(best <= f(&[rad * th.cos(), rad * th.sin()]) + 1e-10);
            }
        }
    }

    struct Huber;
    impl ConvexFunction for Huber {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter()
                .map(|v| if v.abs() <= 1.0 { 0.5 * v * v } else { v.abs() - 0.5 })
                .sum()
        }
        fn subgradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
        }
    }

    #[test]
    fn fallback_matches_grid_on_smooth_custom_term() {
        let s = MirrorSetup::euclidean(
            2,
            FeasibleSet::Box {
                lower: vec![-2.0, -2.0],
                upper: vec![2.0, 2.0],
            },
        )
        .unwrap();
        let r = NonsmoothPart::Custom(Arc::new(Huber));
        let w = [1.5, -3.0];
        let v = [0.2, -0.1];
        let sol = composite_prox_detailed(&s, &w, &r, 0.7, &v, FallbackConfig::default()).unwrap();
        match sol.method {
            ProxMethod::Fallback { gap, iterations } => {
                assert!(gap < 1e-8);
                assert!(iterations <= 500);
            }
            other => panic!("unexpected method {other:?}"),
        }
        let f = |x: &[f64]| subproblem_objective(&s, &w, &r, 0.7, &v, x).unwrap();
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let n = 800;
        for i in 0..=n {
            for j in 0..=n {
                let p = [-2.0 + 4.0 * i as f64 / n as f64, -2.0 + 4.0 * j as f64 / n as f64];
                let val = f(&p);
                if val < best.0 {
                    best = (val, p);
                }
            }
        }
        assert!(norm2(&sub(&sol.point, &best.1)) < 2e-2);
        assert!(f(&sol.point) <= best.0 + 1e-9);
    }

    #[test]
    fn entropy_fallback_for_quadratic_term() {
        let s = MirrorSetup::entropy_simplex(3).unwrap();
        let r = NonsmoothPart::Quadratic {
            cost: QuadraticCost::new(vec![0.6, 0.3, 0.1], 4.0).unwrap(),
            l1: 0.0,
        };
        let v = [1.0 / 3.0; 3];
        let sol = composite_prox(&s, &[0.1, 0.0, -0.1], &r, 2.0, &v).unwrap();
        assert!(s.contains(&sol));
        let f = |x: &[f64]| subproblem_objective(&s, &[0.1, 0.0, -0.1], &r, 2.0, &v, x).unwrap();
        let n = 300;
        for i in 1..n {
            for j in 1..(n - i) {
                let p = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                assert!(f(&sol) <= f(&p) + 1e-8);
            }
        }
    }

    #[test]
    fn nonconvergence_reports_best_iterate() {
        let s = euclid(2);
        let r = NonsmoothPart::Custom(Arc::new(Huber));
        let cfg = FallbackConfig {
            max_iter: 1,
            gap_tol: 1e-30,
        };
        match composite_prox_detailed(&s, &[5.0, 5.0], &r, 1.0, &[0.0, 0.0], cfg) {
            Err(Error::NonConvergence { best, gap, iterations }) => {
                assert_eq!(best.len(), 2);
                assert!(gap > 0.0);
                assert_eq!(iterations, 1);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = euclid(2);
        assert!(matches!(
            composite_prox(&s, &[0.0], &NonsmoothPart::Zero, 1.0, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(composite_prox(&s, &[0.0, 0.0], &NonsmoothPart::Zero, 0.0, &[0.0, 0.0]).is_err());
        assert!(composite_prox(&s, &[0.0, 0.0], &NonsmoothPart::L1 { weight: -1.0 }, 1.0, &[0.0, 0.0]).is_err());
    }
}
