//! Mirror maps, Bregman divergences, norm pairs and feasible sets.
//!
//! Two geometries are supported: the euclidean map `h(x) = ½‖x‖₂²` over
//! whole-space, box, ball or simplex sets (norm pair ℓ2/ℓ2), and the negative
//! entropy `h(x) = Σ xᵢ log xᵢ` over the probability simplex (norm pair ℓ1/ℓ∞).

use crate::error::{check_dim, Error, Result};
use crate::vecops::{dot, norm1, norm2, norm_inf, sub};

/// Floor applied to negative-entropy iterates before renormalization.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Tolerance on `Σ xᵢ = 1` for simplex membership.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    WholeSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex,
}

impl FeasibleSet {
    pub fn unit_box(dim: usize, half_width: f64) -> Self {
        FeasibleSet::Box {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Self {
        FeasibleSet::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            FeasibleSet::WholeSpace | FeasibleSet::Simplex => Ok(()),
            FeasibleSet::Box { lower, upper } => {
                check_dim(dim, lower.len())?;
                check_dim(dim, upper.len())?;
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::Config("box requires lower <= upper".into()));
                }
                Ok(())
            }
            FeasibleSet::Ball { center, radius } => {
                check_dim(dim, center.len())?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::WholeSpace => x.iter().all(|v| v.is_finite()),
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u),
            FeasibleSet::Ball { center, radius } => {
                // relative slack absorbs the rounding of the radial rescale
                norm2(&sub(x, center)) <= radius * (1.0 + 1e-12)
            }
            FeasibleSet::Simplex => {
                x.iter().all(|v| *v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            }
        }
    }

    /// Largest euclidean distance between two points of the set.
    pub fn euclidean_diameter(&self) -> f64 {
        match self {
            FeasibleSet::WholeSpace => f64::INFINITY,
            FeasibleSet::Box { lower, upper } => norm2(&sub(upper, lower)),
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Simplex => std::f64::consts::SQRT_2,
        }
    }

    /// Euclidean projection onto the set.
    pub fn euclidean_projection(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FeasibleSet::WholeSpace => x.to_vec(),
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                let d = sub(x, center);
                let n = norm2(&d);
                if n <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(&d)
                        .map(|(c, di)| c + di * radius / n)
                        .collect()
                }
            }
            FeasibleSet::Simplex => project_simplex(x),
        }
    }
}

/// Euclidean projection onto the probability simplex by sorting.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (i as f64 + 1.0);
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorMap {
    Euclidean,
    NegativeEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorSetup {
    pub dim: usize,
    pub map: MirrorMap,
    pub set: FeasibleSet,
    /// Upper bound R² on the Bregman divergence between feasible points.
    pub diameter_sq: f64,
    /// Constant γ of the Lipschitz-like condition `B(x,z) − B(y,z) ≤ γ‖x − y‖`.
    pub bregman_lipschitz: f64,
}

impl MirrorSetup {
    /// Euclidean setup. R² = ½·diam² and γ = diam are derived from the set;
    /// both are infinite for the whole space unless overridden.
    pub fn euclidean(dim: usize, set: FeasibleSet) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        set.validate(dim)?;
        let diam = set.euclidean_diameter();
        Ok(MirrorSetup {
            dim,
            map: MirrorMap::Euclidean,
            set,
            diameter_sq: 0.5 * diam * diam,
            bregman_lipschitz: diam,
        })
    }

    /// Negative entropy on the simplex. With iterates floored at ε the
    /// divergence stays below log(1/ε) and γ = log(1/ε) + 1.
    pub fn entropy_simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let log_inv_floor = -ENTROPY_FLOOR.ln();
        Ok(MirrorSetup {
            dim,
            map: MirrorMap::NegativeEntropy,
            set: FeasibleSet::Simplex,
            diameter_sq: log_inv_floor,
            bregman_lipschitz: log_inv_floor + 1.0,
        })
    }

    pub fn new(
        dim: usize,
        map: MirrorMap,
        set: FeasibleSet,
        diameter_sq: f64,
        bregman_lipschitz: f64,
    ) -> Result<Self> {
        let base = match map {
            MirrorMap::Euclidean => Self::euclidean(dim, set)?,
            MirrorMap::NegativeEntropy => {
                if set != FeasibleSet::Simplex {
                    return Err(Error::Config(
                        "negative entropy is only paired with the simplex".into(),
                    ));
                }
                Self::entropy_simplex(dim)?
            }
        };
        base.with_diameter_sq(diameter_sq)?
            .with_bregman_lipschitz(bregman_lipschitz)
    }

    pub fn with_diameter_sq(mut self, r2: f64) -> Result<Self> {
        if !(r2 > 0.0) {
            return Err(Error::Config("R² must be positive".into()));
        }
        self.diameter_sq = r2;
        Ok(self)
    }

    pub fn with_bregman_lipschitz(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Config("γ must be positive".into()));
        }
        self.bregman_lipschitz = gamma;
        Ok(self)
    }

    pub fn is_entropy(&self) -> bool {
        self.map == MirrorMap::NegativeEntropy
    }

    pub fn primal_norm(&self, x: &[f64]) -> f64 {
        match self.map {
            MirrorMap::Euclidean => norm2(x),
            MirrorMap::NegativeEntropy => norm1(x),
        }
    }

    pub fn dual_norm(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim, w.len())?;
        Ok(match self.map {
            MirrorMap::Euclidean => norm2(w),
            MirrorMap::NegativeEntropy => norm_inf(w),
        })
    }

    /// Value of the mirror map h.
    pub fn mirror_value(&self, x: &[f64]) -> f64 {
        match self.map {
            MirrorMap::Euclidean => 0.5 * dot(x, x),
            MirrorMap::NegativeEntropy => x
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
                .sum(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.set.contains(x)
    }

    /// `B_h(x, y) = h(x) − h(y) − ⟨∇h(y), x − y⟩`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, y.len())?;
        match self.map {
            MirrorMap::Euclidean => {
                let d = sub(x, y);
                Ok(0.5 * dot(&d, &d))
            }
            MirrorMap::NegativeEntropy => {
                let mut acc = 0.0;
                for (&xi, &yi) in x.iter().zip(y) {
                    if yi <= 0.0 {
                        return Err(Error::DomainViolation(format!(
                            "entropy divergence at zero coordinate of y ({yi})"
                        )));
                    }
                    if xi < 0.0 {
                        return Err(Error::DomainViolation(format!(
                            "negative coordinate in x ({xi})"
                        )));
                    }
                    // generalized form: equal on the simplex, termwise ≥ 0
                    // and free of cancellation for nearby points
                    let u = xi / yi - 1.0;
                    acc += if xi > 0.0 {
                        yi * ((1.0 + u) * u.ln_1p() - u)
                    } else {
                        yi
                    };
                }
                Ok(acc.max(0.0))
            }
        }
    }

    /// Bregman projection onto the feasible set. Euclidean setups use the
    /// closed-form projections; the entropy setup floors at ε and
    /// renormalizes (the KL projection of a positive vector).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        match self.map {
            MirrorMap::Euclidean => Ok(self.set.euclidean_projection(x)),
            MirrorMap::NegativeEntropy => Ok(floor_and_normalize(x)),
        }
    }

    /// Brings an incoming point onto the set without rejecting near-feasible
    /// input: simplex points are renormalized, entropy points floored.
    pub fn normalize_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        match (&self.map, &self.set) {
            (MirrorMap::NegativeEntropy, _) => Ok(floor_and_normalize(x)),
            (MirrorMap::Euclidean, FeasibleSet::Simplex) => {
                let s: f64 = x.iter().sum();
                if x.iter().all(|v| *v >= 0.0) && s > 0.0 {
                    Ok(x.iter().map(|v| v / s).collect())
                } else {
                    Ok(project_simplex(x))
                }
            }
            _ => Ok(self.set.euclidean_projection(x)),
        }
    }

    /// A canonical interior starting point.
    pub fn center(&self) -> Vec<f64> {
        match &self.set {
            FeasibleSet::Simplex => vec![1.0 / self.dim as f64; self.dim],
            FeasibleSet::WholeSpace => vec![0.0; self.dim],
            FeasibleSet::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            FeasibleSet::Ball { center, .. } => center.clone(),
        }
    }
}

pub(crate) fn floor_and_normalize(x: &[f64]) -> Vec<f64> {
    let floored: Vec<f64> = x
        .iter()
        .map(|v| if v.is_finite() { v.max(ENTROPY_FLOOR) } else { ENTROPY_FLOOR })
        .collect();
    let s: f64 = floored.iter().sum();
    floored.iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn euclidean_bregman_examples() {
        let s = MirrorSetup::euclidean(2, FeasibleSet::WholeSpace).unwrap();
        assert_eq!(s.bregman(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(s.bregman(&[3.0, 0.0], &[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn entropy_bregman_example() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        let got = s.bregman(&[0.2, 0.8], &[0.5, 0.5]).unwrap();
        // independent route: h(x) − h(y) − ⟨∇h(y), x − y⟩ with a
        // central-difference gradient of h
        let x = [0.2, 0.8];
        let y = [0.5, 0.5];
        let h = |p: &[f64]| s.mirror_value(p);
        let step = 1e-6;
        let mut lin = 0.0;
        for i in 0..2 {
            let mut up = y.to_vec();
            let mut dn = y.to_vec();
            up[i] += step;
            dn[i] -= step;
            lin += (h(&up) - h(&dn)) / (2.0 * step) * (x[i] - y[i]);
        }
        let fd = h(&x) - h(&y) - lin;
        assert_abs_diff_eq!(got, 0.192_744_757_021_757_5, epsilon = 1e-12);
        assert_abs_diff_eq!(got, fd, epsilon = 1e-8);
    }

    #[test]
    fn entropy_rejects_zero_in_y() {
        let s = MirrorSetup::entropy_simplex(2).unwrap();
        assert!(matches!(
            s.bregman(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::DomainViolation(_))
        ));
        // 0·log 0 = 0
        assert_abs_diff_eq!(
            s.bregman(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn dual_norm_examples() {
        let e = MirrorSetup::euclidean(2, FeasibleSet::WholeSpace).unwrap();
        let h = MirrorSetup::entropy_simplex(2).unwrap();
        assert_eq!(e.dual_norm(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(h.dual_norm(&[3.0, -4.0]).unwrap(), 4.0);
        assert_eq!(e.dual_norm(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(h.dual_norm(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            e.dual_norm(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn projection_examples() {
        let b = MirrorSetup::euclidean(2, FeasibleSet::unit_box(2, 0.5))
            .unwrap();
        let b = MirrorSetup {
            set: FeasibleSet::Box {
                lower: vec![0.0, 0.0],
                upper: vec![1.0, 1.0],
            },
            ..b
        };
        assert_eq!(b.project(&[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        let s = MirrorSetup::euclidean(2, FeasibleSet::Simplex).unwrap();
        assert_eq!(s.project(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        let s3 = MirrorSetup::euclidean(3, FeasibleSet::Simplex).unwrap();
        let p = s3.project(&[1.3, 0.3, 0.3]).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn simplex_projection_matches_grid() {
        // brute-force grid minimizer of ‖p − x‖² over the 3-simplex at 1e-3
        let x = [1.3, 0.3, 0.3];
        let n = 1000;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let d: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, p);
                }
            }
        }
        let got = project_simplex(&x);
        for k in 0..3 {
            assert_abs_diff_eq!(got[k], best.1[k], epsilon = 1e-3);
        }
    }

    #[test]
    fn entropy_only_on_simplex() {
        assert!(MirrorSetup::new(
            2,
            MirrorMap::NegativeEntropy,
            FeasibleSet::WholeSpace,
            1.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(MirrorSetup::euclidean(
            2,
            FeasibleSet::Box {
                lower: vec![1.0, 0.0],
                upper: vec![0.0, 1.0]
            }
        )
        .is_err());
        assert!(MirrorSetup::euclidean(2, FeasibleSet::centered_ball(2, 0.0)).is_err());
    }

    #[test]
    fn normalize_point_renormalizes_simplex() {
        let s = MirrorSetup::euclidean(2, FeasibleSet::Simplex).unwrap();
        let p = s.normalize_point(&[0.5 + 1e-8, 0.5]).unwrap();
        assert!(s.contains(&p));
        let h = MirrorSetup::entropy_simplex(2).unwrap();
        let q = h.normalize_point(&[1.0, 0.0]).unwrap();
        assert!(q[1] > 0.0 && h.contains(&q));
    }
}
