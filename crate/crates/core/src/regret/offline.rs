//! Offline comparator: minimizes the average cost `(1/T) Σ f_t` over the
//! feasible set with an accelerated proximal gradient method and reports a
//! certified optimality gap.
//!
//! Quadratic, diagonal-quadratic and linear smooth parts (and quadratic
//! nonsmooth parts) are folded into one diagonal quadratic so an iteration
//! costs `O(n)` plus the non-aggregable terms. ℓ1 weights are summed. Custom
//! nonsmooth parts are rejected.

use crate::cost::{CompositeCost, SmoothPart};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{FeasibleSet, MirrorSetup};
use crate::prox::{euclidean_l1_prox, NonsmoothPart};
use crate::vecops::{dot, norm1, norm2, sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfflineConfig {
    pub max_iter: usize,
    /// Stop once `gap ≤ rel_gap · max(1, |F(x)|)`.
    pub rel_gap: f64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            max_iter: 10_000,
            rel_gap: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub point: Vec<f64>,
    /// Average objective at `point`.
    pub value: f64,
    /// Certified bound on `F(point) − min F`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Aggregate<'a> {
    n: usize,
    // Σ (w_i/2) x_i² − b_i x_i, already divided by T
    w: Vec<f64>,
    b: Vec<f64>,
    others: Vec<&'a SmoothPart>,
    inv_t: f64,
    l1: f64,
}

impl<'a> Aggregate<'a> {
    fn build(dim: usize, costs: &'a [CompositeCost]) -> Result<Self> {
        let mut agg = Aggregate {
            n: dim,
            w: vec![0.0; dim],
            b: vec![0.0; dim],
            others: Vec::new(),
            inv_t: 1.0 / costs.len() as f64,
            l1: 0.0,
        };
        for cost in costs {
            match &cost.smooth {
                SmoothPart::Zero => {}
                SmoothPart::Linear(c) => {
                    check_dim(dim, c.len())?;
                    for i in 0..dim {
                        agg.b[i] -= c[i];
                    }
                }
                SmoothPart::Quadratic(q) => {
                    check_dim(dim, q.target.len())?;
                    for i in 0..dim {
                        agg.w[i] += q.weight;
                        agg.b[i] += q.weight * q.target[i];
                    }
                }
                SmoothPart::DiagQuadratic { target, weights } => {
                    check_dim(dim, target.len())?;
                    check_dim(dim, weights.len())?;
                    for i in 0..dim {
                        agg.w[i] += weights[i];
                        agg.b[i] += weights[i] * target[i];
                    }
                }
                other => agg.others.push(other),
            }
            match &cost.nonsmooth {
                NonsmoothPart::Zero => {}
                NonsmoothPart::L1 { weight } => agg.l1 += weight,
                NonsmoothPart::Quadratic { cost: q, l1 } => {
                    check_dim(dim, q.target.len())?;
                    agg.l1 += l1;
                    for i in 0..dim {
                        agg.w[i] += q.weight;
                        agg.b[i] += q.weight * q.target[i];
                    }
                }
                NonsmoothPart::Custom(_) => {
                    return Err(Error::UnsupportedCombination(
                        "offline comparator with a custom nonsmooth term".into(),
                    ))
                }
            }
        }
        let s = agg.inv_t;
        agg.w.iter_mut().for_each(|v| *v *= s);
        agg.b.iter_mut().for_each(|v| *v *= s);
        agg.l1 *= s;
        Ok(agg)
    }

    /// Smooth part up to an additive constant.
    fn smooth_value(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.n {
            v += 0.5 * self.w[i] * x[i] * x[i] - self.b[i] * x[i];
        }
        for o in &self.others {
            v += self.inv_t * o.value(x);
        }
        v
    }

    fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = (0..self.n).map(|i| self.w[i] * x[i] - self.b[i]).collect();
        for o in &self.others {
            for (gi, oi) in g.iter_mut().zip(o.gradient(x)) {
                *gi += self.inv_t * oi;
            }
        }
        g
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.l1 * norm1(x)
    }

    fn strong_convexity(&self) -> f64 {
        if self.others.is_empty() {
            self.w.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            0.0
        }
    }
}

/// Linear-minimization gap of the composite objective on box and simplex.
fn lmo_gap(set: &FeasibleSet, x: &[f64], g: &[f64], l1: f64) -> Option<f64> {
    match set {
        FeasibleSet::Box { lower, upper } => {
            let mut gap = 0.0;
            for i in 0..x.len() {
                let phi = |y: f64| g[i] * y + l1 * y.abs();
                let mut best = phi(lower[i]).min(phi(upper[i]));
                if lower[i] <= 0.0 && upper[i] >= 0.0 {
                    best = best.min(0.0);
                }
                gap += phi(x[i]) - best;
            }
            Some(gap.max(0.0))
        }
        // ‖y‖₁ = 1 on the simplex
        FeasibleSet::Simplex => {
            let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
            Some((dot(g, x) - min).max(0.0))
        }
        _ => None,
    }
}

pub fn minimize_average(
    setup: &MirrorSetup,
    costs: &[CompositeCost],
    config: OfflineConfig,
) -> Result<OfflineSolution> {
    if costs.is_empty() {
        return Err(Error::Config("offline comparator needs at least one cost".into()));
    }
    let agg = Aggregate::build(setup.dim, costs)?;
    let set = &setup.set;
    let alpha = agg.strong_convexity();
    let diameter = set.euclidean_diameter();

    let prox_step = |y: &[f64], gy: &[f64], lip: f64| -> Vec<f64> {
        let moved: Vec<f64> = y.iter().zip(gy).map(|(a, b)| a - b / lip).collect();
        euclidean_l1_prox(set, &moved, agg.l1 / lip).point
    };
    // Backtracked proximal step from y; returns (x⁺, L used).
    let backtrack = |y: &[f64], gy: &[f64], mut lip: f64| -> (Vec<f64>, f64) {
        let sy = agg.smooth_value(y);
        for _ in 0..80 {
            let xp = prox_step(y, gy, lip);
            let d = sub(&xp, y);
            let model = sy + dot(gy, &d) + 0.5 * lip * dot(&d, &d);
            if agg.smooth_value(&xp) <= model + 1e-14 * (1.0 + sy.abs()) {
                return (xp, lip);
            }
            lip *= 2.0;
        }
        (prox_step(y, gy, lip), lip)
    };
    // Certificate at a point reached by a prox step from `from`.
    let residual_gap = |from: &[f64], g_from: &[f64], to: &[f64], lip: f64| -> f64 {
        // s ∈ ∂F(to) + N_X(to)
        let g_to = agg.smooth_gradient(to);
        let s: Vec<f64> = (0..to.len())
            .map(|i| lip * (from[i] - to[i]) + g_to[i] - g_from[i])
            .collect();
        let ns = norm2(&s);
        if diameter.is_finite() {
            ns * diameter
        } else if alpha > 0.0 {
            ns * ns / (2.0 * alpha)
        } else {
            f64::INFINITY
        }
    };

    let start = setup.project(&setup.center())?;
    let mut x = start.clone();
    let mut y = start;
    let mut momentum: f64 = 1.0;
    let mut lip = 1.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;

    for it in 0..config.max_iter {
        iterations = it + 1;
        let gy = agg.smooth_gradient(&y);
        let (x_next, l_used) = backtrack(&y, &gy, lip);
        lip = l_used;

        let gap = match lmo_gap(set, &x_next, &agg.smooth_gradient(&x_next), agg.l1) {
            Some(g) => g.min(residual_gap(&y, &gy, &x_next, lip)),
            None => residual_gap(&y, &gy, &x_next, lip),
        };
        if best.as_ref().is_none_or(|(b, _)| gap < *b) {
            best = Some((gap, x_next.clone()));
        }
        let fx = agg.value(&x_next);
        if gap <= config.rel_gap * fx.abs().max(1.0) {
            x = x_next;
            break;
        }

        // gradient-based adaptive restart
        let restart = dot(&sub(&y, &x_next), &sub(&x_next, &x)) > 0.0;
        let next_momentum = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) };
        let coef = if restart { 0.0 } else { (momentum - 1.0) / next_momentum };
        y = x_next.iter().zip(&x).map(|(a, b)| a + coef * (a - b)).collect();
        if restart {
            y = x_next.clone();
        }
        momentum = next_momentum;
        x = x_next;
        lip *= 0.95;
    }

    let (gap, point) = best.unwrap_or((f64::INFINITY, x));
    let value = agg.value(&point);
    let converged = gap <= config.rel_gap * value.abs().max(1.0);
    Ok(OfflineSolution {
        point,
        value,
        gap,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::QuadraticCost;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_sum_on_line() {
        let setup = MirrorSetup::euclidean(1, FeasibleSet::unit_box(1, 2.0)).unwrap();
        let t = 10;
        let costs: Vec<_> = (1..=t)
            .map(|k| CompositeCost::tracking(vec![k as f64 / t as f64], 0.0))
            .collect();
        let sol = minimize_average(&setup, &costs, OfflineConfig::default()).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.point[0], (t + 1) as f64 / (2 * t) as f64, epsilon = 1e-8);
    }

    #[test]
    fn l1_on_box_soft_thresholds() {
        let setup = MirrorSetup::euclidean(2, FeasibleSet::unit_box(2, 5.0)).unwrap();
        let costs = vec![CompositeCost::tracking(vec![3.0, 0.5], 1.0)];
        let sol = minimize_average(&setup, &costs, OfflineConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.point[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.point[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn log_loss_on_simplex_prefers_best_asset() {
        let setup = MirrorSetup::entropy_simplex(2).unwrap();
        let costs: Vec<_> = (0..20)
            .map(|_| CompositeCost::log_loss(vec![1.2, 0.9], 9.0))
            .collect();
        let sol = minimize_average(&setup, &costs, OfflineConfig::default()).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.point[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn ball_uses_residual_certificate() {
        let setup = MirrorSetup::euclidean(2, FeasibleSet::centered_ball(2, 1.0)).unwrap();
        let costs = vec![CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![3.0, 4.0], 1.0).unwrap()),
            NonsmoothPart::Zero,
            1.0,
            1.0,
        )
        .unwrap()];
        let sol = minimize_average(&setup, &costs, OfflineConfig::default()).unwrap();
        assert!(sol.converged, "gap {}", sol.gap);
        assert_abs_diff_eq!(sol.point[0], 0.6, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.point[1], 0.8, epsilon = 1e-6);
    }
}
