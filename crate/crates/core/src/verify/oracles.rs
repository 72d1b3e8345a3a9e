//! Independent reference computations: brute-force grid minimization of the
//! composite subproblem and random instance generators.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, MirrorSetup};
use crate::prox::{ConvexFunction, NonsmoothPart, QuadraticCost};
use crate::vecops::{dot, norm2};

/// `Σ weight·huber_δ(x_i − c_i)`.
#[derive(Debug, Clone)]
pub struct Huber {
    pub center: Vec<f64>,
    pub delta: f64,
    pub weight: f64,
}

impl ConvexFunction for Huber {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| {
                let a = (xi - ci).abs();
                if a <= self.delta {
                    0.5 * a * a / self.delta
                } else {
                    a - 0.5 * self.delta
                }
            })
            .sum::<f64>()
            * self.weight
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| self.weight * ((xi - ci) / self.delta).clamp(-1.0, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    WholeSpace,
    Box,
    Ball,
    Simplex,
    EntropySimplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonsmoothKind {
    Zero,
    L1,
    Quadratic,
    Custom,
}

impl SetKind {
    pub const ALL: [SetKind; 5] = [
        SetKind::WholeSpace,
        SetKind::Box,
        SetKind::Ball,
        SetKind::Simplex,
        SetKind::EntropySimplex,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SetKind::WholeSpace => "euclidean/whole",
            SetKind::Box => "euclidean/box",
            SetKind::Ball => "euclidean/ball",
            SetKind::Simplex => "euclidean/simplex",
            SetKind::EntropySimplex => "entropy/simplex",
        }
    }

    /// ℓ1 with the entropy map is rejected by design.
    pub fn supports(&self, r: NonsmoothKind) -> bool {
        !(matches!(self, SetKind::EntropySimplex) && r == NonsmoothKind::L1)
    }
}

impl NonsmoothKind {
    pub const ALL: [NonsmoothKind; 4] = [
        NonsmoothKind::Zero,
        NonsmoothKind::L1,
        NonsmoothKind::Quadratic,
        NonsmoothKind::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NonsmoothKind::Zero => "zero",
            NonsmoothKind::L1 => "l1",
            NonsmoothKind::Quadratic => "quadratic",
            NonsmoothKind::Custom => "custom",
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect()
}

pub fn random_setup<R: Rng + ?Sized>(kind: SetKind, dim: usize, rng: &mut R) -> Result<MirrorSetup> {
    match kind {
        SetKind::WholeSpace => MirrorSetup::euclidean(dim, FeasibleSet::WholeSpace),
        SetKind::Box => {
            let lower: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..0.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.2..3.0)).collect();
            MirrorSetup::euclidean(dim, FeasibleSet::Box { lower, upper })
        }
        SetKind::Ball => MirrorSetup::euclidean(
            dim,
            FeasibleSet::Ball {
                center: normal_vec(rng, dim, 0.5),
                radius: rng.random_range(0.2..2.0),
            },
        ),
        SetKind::Simplex => MirrorSetup::euclidean(dim, FeasibleSet::Simplex),
        SetKind::EntropySimplex => MirrorSetup::entropy_simplex(dim),
    }
}

/// A feasible point; strictly positive on the simplex.
pub fn random_point<R: Rng + ?Sized>(setup: &MirrorSetup, rng: &mut R) -> Vec<f64> {
    let n = setup.dim;
    match &setup.set {
        FeasibleSet::WholeSpace => normal_vec(rng, n, 1.5),
        FeasibleSet::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| rng.random_range(*l..=*u)).collect(),
        FeasibleSet::Ball { center, radius } => {
            let dir = normal_vec(rng, n, 1.0);
            let len = norm2(&dir).max(1e-12);
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            center.iter().zip(&dir).map(|(c, d)| c + r * d / len).collect()
        }
        FeasibleSet::Simplex => {
            let e: Vec<f64> = (0..n).map(|_| -rng.random_range(1e-3f64..1.0).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        }
    }
}

pub fn random_nonsmooth<R: Rng + ?Sized>(kind: NonsmoothKind, dim: usize, rng: &mut R) -> NonsmoothPart {
    match kind {
        NonsmoothKind::Zero => NonsmoothPart::Zero,
        NonsmoothKind::L1 => NonsmoothPart::L1 {
            weight: rng.random_range(0.0..1.5),
        },
        NonsmoothKind::Quadratic => NonsmoothPart::Quadratic {
            cost: QuadraticCost {
                target: normal_vec(rng, dim, 1.0),
                weight: rng.random_range(0.1..2.0),
            },
            l1: if rng.random::<bool>() { rng.random_range(0.0..1.0) } else { 0.0 },
        },
        NonsmoothKind::Custom => NonsmoothPart::Custom(Arc::new(Huber {
            center: normal_vec(rng, dim, 1.0),
            delta: rng.random_range(0.05..1.0),
            weight: rng.random_range(0.1..1.5),
        })),
    }
}

/// Nested grid refinement on `[lo0, hi0]`; `periodic` coordinates are never
/// clipped so a minimizer near the seam stays reachable.
fn zoom_search<F: Fn(&[f64]) -> f64>(
    lo0: &[f64],
    hi0: &[f64],
    periodic: &[bool],
    points: usize,
    shrink_cells: f64,
    f: F,
) -> Option<Vec<f64>> {
    let n = lo0.len();
    let mut lo = lo0.to_vec();
    let mut hi = hi0.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..60 {
        let h: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / (points - 1) as f64).collect();
        let total = points.pow(n as u32);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut rem = idx;
            for i in 0..n {
                x[i] = lo[i] + h[i] * (rem % points) as f64;
                rem /= points;
            }
            let v = f(&x);
            if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x.clone()));
            }
        }
        let (_, centre) = best.as_ref()?;
        if h.iter().all(|hi| *hi < 1e-7) {
            break;
        }
        for i in 0..n {
            lo[i] = centre[i] - shrink_cells * h[i];
            hi[i] = centre[i] + shrink_cells * h[i];
            if !periodic[i] {
                lo[i] = lo[i].max(lo0[i]);
                hi[i] = hi[i].min(hi0[i]);
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Brute-force `arg min_{x ∈ X} η⟨w, x⟩ + η·r(x) + B(x, v)` for dims 1–2 by
/// nested grid refinement.
pub fn grid_argmin(setup: &MirrorSetup, w: &[f64], r: &NonsmoothPart, eta: f64, v: &[f64]) -> Result<Vec<f64>> {
    let n = setup.dim;
    if n > 2 {
        return Err(Error::Config("grid oracle covers dimensions 1 and 2".into()));
    }
    let objective = |x: &[f64]| -> f64 {
        if !setup.contains(x) {
            return f64::INFINITY;
        }
        match setup.bregman(x, v) {
            Ok(b) => eta * dot(w, x) + eta * r.value(x) + b,
            Err(_) => f64::INFINITY,
        }
    };
    if let FeasibleSet::Simplex = setup.set {
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let param = |s: &[f64]| objective(&[s[0], 1.0 - s[0]]);
        let s = zoom_search(&[0.0], &[1.0], &[false], 2001, 4.0, param).expect("segment is non-empty");
        return Ok(vec![s[0], 1.0 - s[0]]);
    }
    // Ψ + ι_X is 1-strongly convex, so ‖u − v‖ ≤ 2‖∂Ψ(v)‖ with ∂Ψ(v) = η(w + ∂r(v)).
    let g: Vec<f64> = w.iter().zip(r.subgradient(v)).map(|(a, b)| eta * (a + b)).collect();
    let rho = 2.0 * norm2(&g) + 1e-3;
    let (mut lo, mut hi): (Vec<f64>, Vec<f64>) = v.iter().map(|c| (c - rho, c + rho)).unzip();
    match &setup.set {
        FeasibleSet::Box { lower, upper } => {
            for i in 0..n {
                lo[i] = lo[i].max(lower[i]);
                hi[i] = hi[i].min(upper[i]);
            }
        }
        FeasibleSet::Ball { center, radius } => {
            for i in 0..n {
                lo[i] = lo[i].max(center[i] - radius);
                hi[i] = hi[i].min(center[i] + radius);
            }
        }
        _ => {}
    }
    let (points, shrink) = if n == 1 { (2001, 4.0) } else { (61, 5.0) };
    let mut candidates: Vec<Vec<f64>> = zoom_search(&lo, &hi, &[false; 2][..n], points, shrink, objective)
        .into_iter()
        .collect();
    if let (FeasibleSet::Ball { center, radius }, 2) = (&setup.set, n) {
        // a square lattice has few points on the circle or near an ℓ1 kink
        // line, so also search the disc in polar form, the circle itself and
        // each kink line inside the disc
        let pi = std::f64::consts::PI;
        let polar = |p: &[f64]| vec![center[0] + p[0] * p[1].cos(), center[1] + p[0] * p[1].sin()];
        let inner = radius * (1.0 - 1e-12);
        candidates.extend(
            zoom_search(&[0.0, -pi], &[inner, pi], &[false, true], 81, 5.0, |p| objective(&polar(p))).map(|p| polar(&p)),
        );
        candidates.extend(
            zoom_search(&[-pi], &[pi], &[true], 2001, 4.0, |t| objective(&polar(&[inner, t[0]])))
                .map(|t| polar(&[inner, t[0]])),
        );
        if l1_weight(r) > 0.0 {
            for axis in 0..2 {
                let other = 1 - axis;
                let off = center[axis];
                if off.abs() >= *radius {
                    continue;
                }
                let half = (radius * radius - off * off).sqrt() * (1.0 - 1e-12);
                let at = |s: f64| {
                    let mut x = vec![0.0; 2];
                    x[other] = s;
                    x
                };
                candidates.extend(
                    zoom_search(&[center[other] - half], &[center[other] + half], &[false], 2001, 4.0, |s| {
                        objective(&at(s[0]))
                    })
                    .map(|s| at(s[0])),
                );
            }
        }
    }
    candidates
        .into_iter()
        .map(|x| (objective(&x), x))
        .filter(|(f, _)| f.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, x)| x)
        .ok_or_else(|| Error::NumericalBreakdown("grid oracle found no feasible point".into()))
}

fn l1_weight(r: &NonsmoothPart) -> f64 {
    match r {
        NonsmoothPart::L1 { weight } => *weight,
        NonsmoothPart::Quadratic { l1, .. } => *l1,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_finds_soft_threshold() {
        let s = MirrorSetup::euclidean(2, FeasibleSet::WholeSpace).unwrap();
        let x = grid_argmin(&s, &[-2.0, 0.3], &NonsmoothPart::L1 { weight: 1.0 }, 0.5, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_on_entropy_segment() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        let x = grid_argmin(&s, &[1.0, 0.0], &NonsmoothPart::Zero, 1.0, &[0.5, 0.5]).unwrap();
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(x[0], e / (1.0 + e), epsilon = 1e-7);
    }
}
