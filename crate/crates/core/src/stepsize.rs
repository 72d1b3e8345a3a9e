//! Adaptive step-size schedules driven by running prediction-error measures.
//!
//! Accumulator conventions, after `k` calls to [`StepSizeState::accumulate`]:
//! `d_prime = D'_k`, `v_prime = V'_k`, and `c_prime = C'_{k−1}` because the
//! reference step `‖u_k − Φ(u_{k−1})‖` only becomes observable in round `k`
//! (round 1 contributes 0).

use crate::error::{Error, Result};

/// Default cap for the implicit schedule when no function error has been seen.
pub const DEFAULT_ETA_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Convex composite case.
    Thm1,
    /// Strongly convex case with exact function predictions.
    Thm2,
    /// Dynamic convex case; same rule as [`Schedule::Thm1`].
    Thm3,
    /// Fully implicit case, `η_t = τ / V'_{t−1}`.
    Thm4,
    /// Dynamic case with exact function predictions.
    Thm5,
}

impl Schedule {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "thm1" | "1" => Ok(Schedule::Thm1),
            "thm2" | "2" => Ok(Schedule::Thm2),
            "thm3" | "3" => Ok(Schedule::Thm3),
            "thm4" | "4" => Ok(Schedule::Thm4),
            "thm5" | "5" => Ok(Schedule::Thm5),
            other => match other.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(eta)) if eta > 0.0 && eta.is_finite() => Ok(Schedule::Constant(eta)),
                _ => Err(Error::UnknownTheorem(s.to_string())),
            },
        }
    }

    /// Inverse of [`Schedule::parse`].
    pub fn id(&self) -> String {
        match self {
            Schedule::Constant(eta) => format!("constant:{eta}"),
            Schedule::Thm1 => "thm1".into(),
            Schedule::Thm2 => "thm2".into(),
            Schedule::Thm3 => "thm3".into(),
            Schedule::Thm4 => "thm4".into(),
            Schedule::Thm5 => "thm5".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeState {
    pub beta: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// σ is a running maximum of observed errors rather than a known bound.
    pub sigma_estimated: bool,
    pub tau: f64,
    pub eta_max: f64,
    /// Function predictions are declared exact (`r̂_t = r_t`).
    pub exact_function_predictions: bool,
    pub d_prime: f64,
    pub v_prime: f64,
    pub c_prime: f64,
    pub theta: f64,
    pub eta_prev: Option<f64>,
    // index k holds the value after k accumulated rounds
    d_hist: Vec<f64>,
    v_hist: Vec<f64>,
    c_hist: Vec<f64>,
}

impl StepSizeState {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(StepSizeState {
            beta,
            alpha: 0.0,
            sigma: 0.0,
            sigma_estimated: true,
            tau: 0.0,
            eta_max: DEFAULT_ETA_MAX,
            exact_function_predictions: false,
            d_prime: 0.0,
            v_prime: 0.0,
            c_prime: 0.0,
            theta: 0.0,
            eta_prev: None,
            d_hist: vec![0.0],
            v_hist: vec![0.0],
            c_hist: vec![0.0],
        })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Supplies a known bound σ; disables running estimation.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self.sigma_estimated = false;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_eta_max(mut self, eta_max: f64) -> Self {
        self.eta_max = eta_max;
        self
    }

    pub fn with_exact_function_predictions(mut self, exact: bool) -> Self {
        self.exact_function_predictions = exact;
        self
    }

    pub fn rounds(&self) -> usize {
        self.d_hist.len() - 1
    }

    /// `D'_k` for `k ≤ rounds()`.
    pub fn d_prime_at(&self, k: usize) -> f64 {
        self.d_hist[k.min(self.rounds())]
    }

    pub fn v_prime_at(&self, k: usize) -> f64 {
        self.v_hist[k.min(self.rounds())]
    }

    /// `C'_k`; `C'_k` is available once `k + 1` rounds are accumulated.
    pub fn c_prime_at(&self, k: usize) -> f64 {
        self.c_hist[(k + 1).min(self.rounds())]
    }

    pub fn accumulate(&mut self, grad_err_sq: f64, delta_abs: f64, ref_step: f64) -> Result<()> {
        for v in [grad_err_sq, delta_abs, ref_step] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeInput(v));
            }
        }
        self.d_prime += grad_err_sq;
        self.v_prime += delta_abs;
        self.c_prime += ref_step;
        self.d_hist.push(self.d_prime);
        self.v_hist.push(self.v_prime);
        self.c_hist.push(self.c_prime);
        if self.sigma_estimated {
            self.sigma = self.sigma.max(grad_err_sq.sqrt());
        }
        Ok(())
    }

    pub fn eta(&mut self, schedule: Schedule, t: usize) -> Result<f64> {
        let eta = match schedule {
            Schedule::Constant(eta) => eta,
            Schedule::Thm1 | Schedule::Thm3 => self.eta_thm1(t)?,
            Schedule::Thm2 => self.eta_thm2(t)?,
            Schedule::Thm4 => self.eta_thm4(t)?,
            Schedule::Thm5 => self.eta_thm5(t)?,
        };
        self.eta_prev = Some(eta);
        Ok(eta)
    }

    fn check_round(&self, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::Config("rounds are numbered from 1".into()));
        }
        Ok(())
    }

    /// `η₁ = 1/(2β)`, then `(4β² + V'²_{t−1} + D'_{t−1})^{−1/2}`.
    pub fn eta_thm1(&self, t: usize) -> Result<f64> {
        self.check_round(t)?;
        if t == 1 {
            return Ok(0.5 / self.beta);
        }
        let v = self.v_prime_at(t - 1);
        let d = self.d_prime_at(t - 1);
        Ok((4.0 * self.beta * self.beta + v * v + d).powf(-0.5))
    }

    /// `η_t = (2β + α/(2σ²)·D'_{t−1})^{−1}`.
    pub fn eta_thm2(&self, t: usize) -> Result<f64> {
        self.check_round(t)?;
        if !(self.alpha > 0.0) {
            return Err(Error::Config("strongly convex schedule needs alpha > 0".into()));
        }
        if !self.exact_function_predictions {
            return Err(Error::Config(
                "strongly convex schedule needs exact function predictions".into(),
            ));
        }
        if t == 1 {
            return Ok(0.5 / self.beta);
        }
        let d = self.d_prime_at(t - 1);
        if d == 0.0 {
            return Ok(0.5 / self.beta);
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("strongly convex schedule needs sigma > 0".into()));
        }
        Ok(1.0 / (2.0 * self.beta + self.alpha / (2.0 * self.sigma * self.sigma) * d))
    }

    /// `η_t = τ / V'_{t−1}`, capped at `eta_max` (also used for `t = 1`).
    pub fn eta_thm4(&self, t: usize) -> Result<f64> {
        self.check_round(t)?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if t == 1 {
            return Ok(self.eta_max);
        }
        let v = self.v_prime_at(t - 1);
        if v == 0.0 {
            return Ok(self.eta_max);
        }
        Ok((self.tau / v).min(self.eta_max))
    }

    /// `η₁ = η₂ = 1/(2β)`, then `sqrt((C'_{t−2} + 1)/(D'_{t−1} + θ_t))` with
    /// the smallest θ_t keeping η nonincreasing and below `1/(2β)`.
    /// Advances θ; call once per round, in order.
    pub fn eta_thm5(&mut self, t: usize) -> Result<f64> {
        self.check_round(t)?;
        if t <= 2 {
            self.theta = 0.0;
            return Ok(0.5 / self.beta);
        }
        let theta = self.theta_at(t, self.theta);
        self.theta = theta;
        let num = self.c_prime_at(t - 2) + 1.0;
        Ok((num / (self.d_prime_at(t - 1) + theta)).sqrt())
    }

    fn theta_at(&self, t: usize, theta_prev: f64) -> f64 {
        let b2 = 4.0 * self.beta * self.beta;
        let c2 = self.c_prime_at(t - 2) + 1.0;
        let d1 = self.d_prime_at(t - 1);
        let mut theta = theta_prev.max(b2 * c2 - d1).max(0.0);
        if t >= 4 {
            let c3 = self.c_prime_at(t - 3) + 1.0;
            let d2 = self.d_prime_at(t - 2);
            theta = theta.max(c2 * (d2 + theta_prev) / c3 - d1);
        }
        theta
    }

    /// θ_{T+2} evaluated on a copy after one extra round with gradient error
    /// `extra_d` and reference step `extra_c`.
    pub fn theta_lookahead(&self, extra_d: f64, extra_c: f64) -> Result<f64> {
        let mut probe = self.clone();
        let t_final = probe.rounds();
        probe.accumulate(extra_d, 0.0, extra_c)?;
        // θ is a function of the histories alone; replay from θ₂ = 0
        let mut theta = 0.0;
        for t in 3..=t_final + 2 {
            theta = probe.theta_at(t, theta);
        }
        Ok(theta)
    }
}

/// Both sides of `Σ a_t sqrt(b_t/(c_t + Σ_{k≤t} a_k)) ≤ 2 sqrt(b_T (c_T + Σ a_t))`.
/// Terms with a vanishing denominator have `a_t = 0` and contribute 0.
pub fn sqrt_sum_sides(a: &[f64], b: &[f64], c: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() != c.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: c.len() });
    }
    if a.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut prefix = 0.0;
    let mut lhs = 0.0;
    for i in 0..a.len() {
        prefix += a[i];
        let denom = c[i] + prefix;
        if a[i] > 0.0 && denom > 0.0 {
            lhs += a[i] * (b[i] / denom).sqrt();
        }
    }
    let last = a.len() - 1;
    Ok((lhs, 2.0 * (b[last] * (c[last] + prefix)).sqrt()))
}

/// Both sides of `b(1/b − 1/a) ≤ log(a/b)` for positive `a`, `b`.
pub fn log_ratio_sides(a: f64, b: f64) -> (f64, f64) {
    (b * (1.0 / b - 1.0 / a), (a / b).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn thm1_examples() {
        let s = StepSizeState::new(9.0).unwrap();
        assert_eq!(s.eta_thm1(1).unwrap(), 1.0 / 18.0);
        let mut s = StepSizeState::new(9.0).unwrap();
        s.accumulate(0.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.eta_thm1(2).unwrap(), 1.0 / 18.0, epsilon = 1e-15);
        let mut s = StepSizeState::new(1.0).unwrap();
        s.accumulate(96.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.eta_thm1(2).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn thm2_examples_and_errors() {
        let base = StepSizeState::new(1.0)
            .unwrap()
            .with_alpha(2.0)
            .with_sigma(1.0)
            .with_exact_function_predictions(true);
        let mut s = base.clone();
        s.accumulate(2.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.eta_thm2(2).unwrap(), 0.25, epsilon = 1e-15);
        let mut z = base.clone();
        for _ in 0..5 {
            z.accumulate(0.0, 0.0, 0.0).unwrap();
        }
        assert_eq!(z.eta_thm2(6).unwrap(), 0.5);
        assert!(base.clone().with_alpha(0.0).eta_thm2(2).is_err());
        assert!(base.with_exact_function_predictions(false).eta_thm2(2).is_err());
    }

    #[test]
    fn thm4_examples() {
        let mut s = StepSizeState::new(1.0).unwrap().with_tau(10.0);
        assert_eq!(s.eta_thm4(1).unwrap(), DEFAULT_ETA_MAX);
        s.accumulate(0.0, 0.0, 0.0).unwrap();
        assert_eq!(s.eta_thm4(2).unwrap(), DEFAULT_ETA_MAX);
        s.accumulate(0.0, 5.0, 0.0).unwrap();
        assert_eq!(s.eta_thm4(3).unwrap(), 2.0);
        s.accumulate(0.0, 5.0, 0.0).unwrap();
        assert_eq!(s.eta_thm4(4).unwrap(), 1.0);
        assert!(StepSizeState::new(1.0).unwrap().eta_thm4(2).is_err());
    }

    #[test]
    fn thm5_static_reference_pins_cap() {
        let mut s = StepSizeState::new(1.0).unwrap();
        for t in 1..=20 {
            let eta = s.eta_thm5(t).unwrap();
            assert_abs_diff_eq!(eta, 0.5, epsilon = 1e-15);
            if t >= 3 {
                assert_eq!(s.theta, 4.0);
            }
            s.accumulate(0.0, 0.0, 0.0).unwrap();
        }
    }

    #[test]
    fn accumulate_rejects_negative_and_sums() {
        let mut s = StepSizeState::new(1.0).unwrap();
        assert!(matches!(s.accumulate(-1.0, 0.0, 0.0), Err(Error::NegativeInput(_))));
        s.accumulate(1.0, 1.0, 1.0).unwrap();
        assert_eq!((s.d_prime, s.v_prime, s.c_prime), (1.0, 1.0, 1.0));
        let mut w = StepSizeState::new(1.0).unwrap();
        for _ in 0..7 {
            w.accumulate(0.25, 0.0, 0.0).unwrap();
        }
        assert_abs_diff_eq!(w.d_prime, 0.25 * 7.0, epsilon = 1e-15);
    }

    #[test]
    fn estimated_sigma_is_running_max() {
        let mut s = StepSizeState::new(1.0).unwrap();
        s.accumulate(4.0, 0.0, 0.0).unwrap();
        s.accumulate(1.0, 0.0, 0.0).unwrap();
        assert_eq!(s.sigma, 2.0);
        assert!(s.sigma_estimated);
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!(Schedule::parse("thm3").unwrap(), Schedule::Thm3);
        assert_eq!(Schedule::parse("constant:1").unwrap(), Schedule::Constant(1.0));
        assert!(matches!(Schedule::parse("thm9"), Err(Error::UnknownTheorem(_))));
    }

    #[test]
    fn lemma_sides_small_cases() {
        let (l, r) = sqrt_sum_sides(&[1.0], &[1.0], &[0.0]).unwrap();
        assert!(l <= r);
        let (l, r) = log_ratio_sides(2.0, 1.0);
        assert_abs_diff_eq!(l, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 2f64.ln(), epsilon = 1e-15);
    }
}
