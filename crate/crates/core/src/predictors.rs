//! Gradient predictors for tracking, return predictors for portfolios and the
//! clamp transform applied to predicted returns.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cost::CompositeCost;
use crate::error::{check_dim, Error, Result};
use crate::vecops::dot;

/// Standard deviation of the tracking prediction noise (variance 0.5).
pub const TRACKING_NOISE_STD: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Standard deviation of the noisy return model (variance 0.3).
pub const RETURN_NOISE_STD: f64 = 0.547_722_557_505_166_1;
pub const R_MIN: f64 = 0.5;
pub const R_MAX: f64 = 1.5;
pub const RLS_DELTA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackingModel {
    Perfect,
    Noisy,
    NoisyBias,
    Previous,
    Random,
}

impl TrackingModel {
    pub const ALL: [TrackingModel; 5] = [
        TrackingModel::Perfect,
        TrackingModel::Noisy,
        TrackingModel::NoisyBias,
        TrackingModel::Previous,
        TrackingModel::Random,
    ];

    pub fn parse(id: &str) -> Result<Self> {
        match id.trim().to_ascii_lowercase().as_str() {
            "perfect" => Ok(Self::Perfect),
            "noisy" => Ok(Self::Noisy),
            "noisy+bias" | "noisy_bias" => Ok(Self::NoisyBias),
            "previous" => Ok(Self::Previous),
            "random" => Ok(Self::Random),
            _ => Err(Error::UnknownModel(id.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::Noisy => "noisy",
            Self::NoisyBias => "noisy+bias",
            Self::Previous => "previous",
            Self::Random => "random",
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<f64> {
    let law = Normal::new(0.0, std).expect("finite positive std");
    (0..n).map(|_| law.sample(rng)).collect()
}

/// Predicted `∇s_t(y_{t−1})`. `previous_cost` is `None` at the first round,
/// where the previous model predicts zero.
pub fn tracking_grad_pred<R: Rng + ?Sized>(
    model: TrackingModel,
    cost: &CompositeCost,
    previous_cost: Option<&CompositeCost>,
    y_prev: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    tracking_grad_pred_scaled(model, cost, previous_cost, y_prev, TRACKING_NOISE_STD, rng)
}

pub fn tracking_grad_pred_scaled<R: Rng + ?Sized>(
    model: TrackingModel,
    cost: &CompositeCost,
    previous_cost: Option<&CompositeCost>,
    y_prev: &[f64],
    noise_std: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = y_prev.len();
    let noise = |rng: &mut R| {
        if noise_std > 0.0 {
            gaussian(rng, n, noise_std)
        } else {
            vec![0.0; n]
        }
    };
    match model {
        TrackingModel::Perfect => cost.smooth_gradient(y_prev),
        TrackingModel::Noisy => {
            let w = noise(rng);
            cost.smooth_gradient(y_prev).iter().zip(w).map(|(g, w)| g + w).collect()
        }
        TrackingModel::NoisyBias => {
            let w = noise(rng);
            cost.smooth_gradient(y_prev).iter().zip(w).map(|(g, w)| g + w - 1.0).collect()
        }
        TrackingModel::Previous => match previous_cost {
            Some(c) => c.smooth_gradient(y_prev),
            None => vec![0.0; n],
        },
        TrackingModel::Random => noise(rng),
    }
}

/// `g(r)`: `r_max` above 1, `1` at exactly 1, `r_min` below 1, per coordinate.
pub fn clamp_g(r_tilde: &[f64], r_min: f64, r_max: f64) -> Vec<f64> {
    r_tilde
        .iter()
        .map(|&r| {
            if r > 1.0 {
                r_max
            } else if r == 1.0 {
                1.0
            } else {
                r_min
            }
        })
        .collect()
}

/// `−r̂ / ⟨r̂, y⟩`.
pub fn portfolio_grad_pred(r_hat: &[f64], y_prev: &[f64]) -> Result<Vec<f64>> {
    check_dim(y_prev.len(), r_hat.len())?;
    let ip = dot(r_hat, y_prev);
    if !(ip > 1e-15) {
        return Err(Error::DegenerateInnerProduct(ip));
    }
    Ok(r_hat.iter().map(|r| -r / ip).collect())
}

/// Exact recursive least squares with forgetting factor 1 on features
/// `(lag_1, …, lag_k, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub weights: DVector<f64>,
    pub p: DMatrix<f64>,
    pub delta: f64,
}

impl RlsState {
    pub fn new(features: usize, delta: f64) -> Self {
        RlsState {
            weights: DVector::zeros(features),
            p: DMatrix::identity(features, features) * delta,
            delta,
        }
    }

    pub fn predict(&self, phi: &[f64]) -> f64 {
        self.weights.dot(&DVector::from_column_slice(phi))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.p.clone().cholesky().is_some()
    }

    /// On loss of positive definiteness the state is reset and an error returned.
    pub fn update(&mut self, phi: &[f64], target: f64) -> Result<()> {
        check_dim(self.weights.len(), phi.len())?;
        let phi = DVector::from_column_slice(phi);
        let p_phi = &self.p * &phi;
        let denom = 1.0 + phi.dot(&p_phi);
        let gain = &p_phi / denom;
        let err = target - phi.dot(&self.weights);
        self.weights += &gain * err;
        // P is symmetric, so φᵀP = (Pφ)ᵀ
        self.p -= &gain * p_phi.transpose();
        self.p = (&self.p + self.p.transpose()) * 0.5;
        if !denom.is_finite() || !self.is_positive_definite() {
            *self = RlsState::new(self.weights.len(), self.delta);
            return Err(Error::NumericalBreakdown(
                "recursive least squares covariance lost positive definiteness".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReturnModel {
    MovingAverage(usize),
    Previous,
    Noisy,
    Random,
    RecursiveLs(usize),
}

impl ReturnModel {
    /// Accepts `ma(k)`, `previous`, `noisy`, `random`, `recursive_ls(k)`.
    pub fn parse(id: &str) -> Result<Self> {
        let s = id.trim().to_ascii_lowercase();
        let lag = |prefix: &str| -> Option<usize> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.trim().parse().ok().filter(|k| *k >= 1)
        };
        match s.as_str() {
            "previous" => return Ok(Self::Previous),
            "noisy" => return Ok(Self::Noisy),
            "random" => return Ok(Self::Random),
            _ => {}
        }
        if let Some(k) = lag("ma") {
            return Ok(Self::MovingAverage(k));
        }
        if let Some(k) = lag("recursive_ls").or_else(|| lag("recursivels")) {
            return Ok(Self::RecursiveLs(k));
        }
        Err(Error::UnknownModel(id.to_string()))
    }

    pub fn id(&self) -> String {
        match self {
            Self::MovingAverage(k) => format!("ma({k})"),
            Self::Previous => "previous".into(),
            Self::Noisy => "noisy".into(),
            Self::Random => "random".into(),
            Self::RecursiveLs(k) => format!("recursive_ls({k})"),
        }
    }

    /// Uses the realized return of the current round.
    pub fn is_causal(&self) -> bool {
        !matches!(self, Self::Noisy)
    }
}

/// Per-run state of a return predictor.
#[derive(Debug, Clone)]
pub struct ReturnPredictor {
    pub model: ReturnModel,
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Most recent return last.
    history: Vec<Vec<f64>>,
    rls: Vec<RlsState>,
    pub breakdowns: usize,
}

impl ReturnPredictor {
    pub fn new(model: ReturnModel, n: usize) -> Self {
        Self::with_bounds(model, n, R_MIN, R_MAX, RLS_DELTA)
    }

    pub fn with_bounds(model: ReturnModel, n: usize, r_min: f64, r_max: f64, delta: f64) -> Self {
        let rls = match model {
            ReturnModel::RecursiveLs(k) => vec![RlsState::new(k + 1, delta); n],
            _ => Vec::new(),
        };
        ReturnPredictor {
            model,
            n,
            r_min,
            r_max,
            history: Vec::new(),
            rls,
            breakdowns: 0,
        }
    }

    fn window(&self) -> usize {
        match self.model {
            ReturnModel::MovingAverage(k) => k,
            ReturnModel::RecursiveLs(k) => k + 1,
            _ => 1,
        }
    }

    fn fallback(&self) -> Vec<f64> {
        self.history.last().cloned().unwrap_or_else(|| vec![1.0; self.n])
    }

    fn features(&self, asset: usize, lags: usize, from_end: usize) -> Vec<f64> {
        // lags r_{s−1}, …, r_{s−k} where r_{s−1} = history[len − 1 − from_end]
        let len = self.history.len();
        let mut phi: Vec<f64> = (0..lags).map(|j| self.history[len - 1 - from_end - j][asset]).collect();
        phi.push(1.0);
        phi
    }

    /// Raw prediction `r̃_t`. `realized` is only read by the noisy model.
    pub fn predict<R: Rng + ?Sized>(&self, realized: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.predict_scaled(realized, RETURN_NOISE_STD, rng)
    }

    pub fn predict_scaled<R: Rng + ?Sized>(&self, realized: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        match self.model {
            ReturnModel::MovingAverage(k) => {
                if self.history.len() < k {
                    return Ok(self.fallback());
                }
                let tail = &self.history[self.history.len() - k..];
                Ok((0..self.n).map(|i| tail.iter().map(|r| r[i]).sum::<f64>() / k as f64).collect())
            }
            ReturnModel::Previous => Ok(self.fallback()),
            ReturnModel::Noisy => {
                check_dim(self.n, realized.len())?;
                if noise_std > 0.0 {
                    let v = gaussian(rng, self.n, noise_std);
                    Ok(realized.iter().zip(v).map(|(r, v)| r + v).collect())
                } else {
                    Ok(realized.to_vec())
                }
            }
            ReturnModel::Random => Ok((0..self.n).map(|_| rng.random_range(self.r_min..=self.r_max)).collect()),
            ReturnModel::RecursiveLs(k) => {
                if self.history.len() < k {
                    return Ok(self.fallback());
                }
                Ok((0..self.n).map(|i| self.rls[i].predict(&self.features(i, k, 0))).collect())
            }
        }
    }

    /// Records the realized return and refits stateful models.
    pub fn observe(&mut self, realized: &[f64]) -> Result<()> {
        check_dim(self.n, realized.len())?;
        self.history.push(realized.to_vec());
        if let ReturnModel::RecursiveLs(k) = self.model {
            if self.history.len() > k {
                for i in 0..self.n {
                    let phi = self.features(i, k, 1);
                    if self.rls[i].update(&phi, realized[i]).is_err() {
                        self.breakdowns += 1;
                    }
                }
            }
        }
        let keep = self.window();
        if self.history.len() > keep {
            self.history.drain(..self.history.len() - keep);
        }
        Ok(())
    }

    pub fn rls_states(&self) -> &[RlsState] {
        &self.rls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clamp_branches() {
        assert_eq!(clamp_g(&[1.2, 1.0, 0.97], R_MIN, R_MAX), vec![1.5, 1.0, 0.5]);
    }

    #[test]
    fn portfolio_prediction_examples() {
        assert_eq!(portfolio_grad_pred(&[1.0, 1.0, 1.0], &[0.2, 0.3, 0.5]).unwrap(), vec![-1.0; 3]);
        assert_eq!(portfolio_grad_pred(&[1.5, 0.5], &[0.5, 0.5]).unwrap(), vec![-1.5, -0.5]);
        assert!(matches!(
            portfolio_grad_pred(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::DegenerateInnerProduct(_))
        ));
    }

    #[test]
    fn rls_single_update() {
        let mut s = RlsState::new(2, RLS_DELTA);
        s.update(&[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(s.weights[0], 100.0 / 201.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.weights[1], 100.0 / 201.0, epsilon = 1e-15);
        assert!(s.is_positive_definite());
    }

    #[test]
    fn model_ids_round_trip() {
        for id in ["ma(3)", "previous", "noisy", "random", "recursive_ls(2)"] {
            assert_eq!(ReturnModel::parse(id).unwrap().id(), id);
        }
        for m in TrackingModel::ALL {
            assert_eq!(TrackingModel::parse(m.id()).unwrap(), m);
        }
        assert!(ReturnModel::parse("ma(0)").is_err());
        assert!(matches!(TrackingModel::parse("oracle"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn noisy_bias_without_noise_subtracts_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cost = CompositeCost::tracking(vec![1.0, 2.0], 1.0);
        let g = tracking_grad_pred_scaled(TrackingModel::NoisyBias, &cost, None, &[0.0, 0.0], 0.0, &mut rng);
        assert_eq!(g, vec![-2.0, -3.0]);
        let p = tracking_grad_pred(TrackingModel::Previous, &cost, None, &[0.0, 0.0], &mut rng);
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn ma_one_is_previous_and_first_round_is_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ma = ReturnPredictor::new(ReturnModel::MovingAverage(1), 2);
        let mut prev = ReturnPredictor::new(ReturnModel::Previous, 2);
        assert_eq!(ma.predict(&[1.1, 0.9], &mut rng).unwrap(), vec![1.0, 1.0]);
        for r in [[1.1, 0.9], [0.8, 1.3], [1.2, 1.0]] {
            ma.observe(&r).unwrap();
            prev.observe(&r).unwrap();
            assert_eq!(ma.predict(&r, &mut rng).unwrap(), prev.predict(&r, &mut rng).unwrap());
        }
    }
}
