//! One-step update rules.
//!
//! Every step consumes a step size and mutates an [`AlgorithmState`]; the
//! returned [`StepRecord`] carries the played action and the per-round
//! quantities the step-size accumulators need.
//!
//! The optimistic steps take separate step sizes for the predicted half-step
//! (`eta_x`) and the corrected half-step (`eta_y`); the theorem-conforming
//! variants use the same value for both.

use std::fmt;
use std::sync::Arc;

use crate::cost::{CompositeCost, SmoothPart};
use crate::error::{check_dim, Error, Result};
use crate::geometry::MirrorSetup;
use crate::prox::{composite_prox, implicit_prox, NonsmoothPart};
use crate::vecops::{mat_vec, sub};

pub type VectorMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Gradient prediction `∇ŝ_t`.
#[derive(Clone)]
pub enum GradPred {
    Zero,
    /// A prediction already evaluated at `y_{t−1}` by the caller.
    Fixed(Vec<f64>),
    Smooth(SmoothPart),
    Map(VectorMap),
}

impl fmt::Debug for GradPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradPred::Zero => write!(f, "Zero"),
            GradPred::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            GradPred::Smooth(s) => f.debug_tuple("Smooth").field(s).finish(),
            GradPred::Map(_) => write!(f, "Map(..)"),
        }
    }
}

impl GradPred {
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        match self {
            GradPred::Zero => vec![0.0; y.len()],
            GradPred::Fixed(v) => v.clone(),
            GradPred::Smooth(s) => s.gradient(y),
            GradPred::Map(m) => m(y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PredictionBundle {
    pub grad_pred: GradPred,
    pub func_pred: NonsmoothPart,
    /// Known bound on `‖∇s_t(x) − ∇ŝ_t(x)‖_*`, if any.
    pub sigma: Option<f64>,
}

impl PredictionBundle {
    pub fn new(grad_pred: GradPred, func_pred: NonsmoothPart) -> Self {
        PredictionBundle {
            grad_pred,
            func_pred,
            sigma: None,
        }
    }

    /// Exact gradient and function predictions of `cost`.
    pub fn perfect(cost: &CompositeCost) -> Self {
        PredictionBundle {
            grad_pred: GradPred::Smooth(cost.smooth.clone()),
            func_pred: cost.nonsmooth.clone(),
            sigma: Some(0.0),
        }
    }

    /// No gradient information; the function prediction is `r_t` itself.
    pub fn zero_gradient(cost: &CompositeCost) -> Self {
        PredictionBundle::new(GradPred::Zero, cost.nonsmooth.clone())
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    /// Sampled check of `‖∇s(x) − ∇ŝ(x)‖_* ≤ σ`.
    pub fn sigma_holds(&self, setup: &MirrorSetup, cost: &CompositeCost, samples: &[Vec<f64>]) -> Result<bool> {
        let Some(sigma) = self.sigma else {
            return Ok(true);
        };
        for x in samples {
            let err = setup.dual_norm(&sub(&cost.smooth_gradient(x), &self.grad_pred.eval(x)))?;
            if err > sigma * (1.0 + 1e-12) + 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Dynamics model `Φ_t` of the reference sequence.
#[derive(Clone)]
pub enum DynamicsModel {
    Identity,
    Linear(Vec<Vec<f64>>),
    Scale(f64),
    Shift(Vec<f64>),
    Custom(VectorMap),
}

impl fmt::Debug for DynamicsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsModel::Identity => write!(f, "Identity"),
            DynamicsModel::Linear(m) => f.debug_tuple("Linear").field(m).finish(),
            DynamicsModel::Scale(s) => f.debug_tuple("Scale").field(s).finish(),
            DynamicsModel::Shift(s) => f.debug_tuple("Shift").field(s).finish(),
            DynamicsModel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl DynamicsModel {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            DynamicsModel::Identity => x.to_vec(),
            DynamicsModel::Linear(m) => mat_vec(m, x),
            DynamicsModel::Scale(s) => x.iter().map(|v| s * v).collect(),
            DynamicsModel::Shift(o) => x.iter().zip(o).map(|(a, b)| a + b).collect(),
            DynamicsModel::Custom(f) => f(x),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, DynamicsModel::Identity)
    }

    /// Sampled check of `B(Φ(x), Φ(y)) ≤ B(x, y)`.
    pub fn is_nonexpansive(&self, setup: &MirrorSetup, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<bool> {
        for (x, y) in pairs {
            if !nonexpansive_at(self, setup, x, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn nonexpansive_at(phi: &DynamicsModel, setup: &MirrorSetup, x: &[f64], y: &[f64]) -> Result<bool> {
    let before = setup.bregman(x, y)?;
    let after = setup.bregman(&phi.apply(x), &phi.apply(y))?;
    Ok(after <= before * (1.0 + 1e-9) + 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState {
    pub x_prev: Vec<f64>,
    /// Auxiliary iterate; tracks `x_prev` for the non-optimistic methods.
    pub y_prev: Vec<f64>,
    /// Index of the next round to be played, starting at 1.
    pub round: usize,
}

impl AlgorithmState {
    pub fn new(setup: &MirrorSetup, x0: &[f64]) -> Result<Self> {
        check_dim(setup.dim, x0.len())?;
        let x0 = setup.normalize_point(x0)?;
        if !setup.contains(&x0) {
            return Err(Error::DomainViolation("initial point outside the feasible set".into()));
        }
        Ok(AlgorithmState {
            x_prev: x0.clone(),
            y_prev: x0,
            round: 1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRecord {
    pub round: usize,
    /// Action played this round.
    pub played: Vec<f64>,
    /// Corrected half-step before the dynamics map (optimistic methods).
    pub y_tilde: Option<Vec<f64>>,
    /// `‖∇s_t(y_{t−1}) − ∇ŝ_t(y_{t−1})‖_*²`
    pub grad_err_sq: f64,
    /// `r_t(x_t) − r̂_t(x_t) + r̂_t(ỹ_t) − r_t(ỹ_t)`
    pub delta: f64,
    /// `max{‖g_t(x_t) − ĝ_t(ỹ_t)‖_*, ‖g_t(ỹ_t) − ĝ_t(x_t)‖_*}`
    pub g_mismatch: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub warnings: Vec<String>,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("step size must be positive and finite, got {eta}")));
    }
    Ok(())
}

fn advance(state: &mut AlgorithmState, x_next: Vec<f64>, y_next: Vec<f64>) {
    state.x_prev = x_next;
    state.y_prev = y_next;
    state.round += 1;
}

/// `x_{t+1} = arg min η⟨∇f_t(x_t), x⟩ + B(x, x_t)`.
pub fn omd_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    eta: f64,
) -> Result<StepRecord> {
    check_eta(eta)?;
    let x_t = state.x_prev.clone();
    let next = composite_prox(setup, &cost.full_subgradient(&x_t), &NonsmoothPart::Zero, eta, &x_t)?;
    let record = simple_record(state.round, x_t, eta);
    advance(state, next.clone(), next);
    Ok(record)
}

/// `x_{t+1} = arg min η⟨∇s_t(x_t), x⟩ + η r_t(x) + B(x, x_t)`.
pub fn comid_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    eta: f64,
) -> Result<StepRecord> {
    check_eta(eta)?;
    let x_t = state.x_prev.clone();
    let next = composite_prox(setup, &cost.smooth_gradient(&x_t), &cost.nonsmooth, eta, &x_t)?;
    let record = simple_record(state.round, x_t, eta);
    advance(state, next.clone(), next);
    Ok(record)
}

/// `x_{t+1} = arg min η f_t(x) + B(x, x_t)`.
pub fn iomd_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    eta: f64,
) -> Result<StepRecord> {
    check_eta(eta)?;
    let x_t = state.x_prev.clone();
    let next = implicit_prox(setup, cost, eta, &x_t)?;
    let record = simple_record(state.round, x_t, eta);
    advance(state, next.clone(), next);
    Ok(record)
}

fn simple_record(round: usize, played: Vec<f64>, eta: f64) -> StepRecord {
    StepRecord {
        round,
        played,
        eta_x: eta,
        eta_y: eta,
        ..StepRecord::default()
    }
}

/// Optimistic step with the whole cost linearized and no composite term.
pub fn optmd_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    eta: f64,
) -> Result<StepRecord> {
    linearized_optimistic(setup, state, cost, bundle, &DynamicsModel::Identity, eta, eta)
}

/// Optimistic step on the fully linearized cost followed by `y ← Φ(y)`.
pub fn doptmd_baseline_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    dynamics: &DynamicsModel,
    eta_x: f64,
    eta_y: f64,
) -> Result<StepRecord> {
    linearized_optimistic(setup, state, cost, bundle, dynamics, eta_x, eta_y)
}

fn linearized_optimistic(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    dynamics: &DynamicsModel,
    eta_x: f64,
    eta_y: f64,
) -> Result<StepRecord> {
    check_eta(eta_x)?;
    check_eta(eta_y)?;
    let y = state.y_prev.clone();
    let pred = bundle.grad_pred.eval(&y);
    check_dim(setup.dim, pred.len())?;
    let x_t = composite_prox(setup, &pred, &NonsmoothPart::Zero, eta_x, &y)?;
    let y_tilde = composite_prox(setup, &cost.full_subgradient(&x_t), &NonsmoothPart::Zero, eta_y, &y)?;
    let grad_err_sq = setup.dual_norm(&sub(&cost.full_subgradient(&y), &pred))?.powi(2);
    let mut warnings = Vec::new();
    let y_next = apply_dynamics(setup, dynamics, &y_tilde, &y, &mut warnings)?;
    let record = StepRecord {
        round: state.round,
        played: x_t.clone(),
        y_tilde: Some(y_tilde),
        grad_err_sq,
        eta_x,
        eta_y,
        warnings,
        ..StepRecord::default()
    };
    advance(state, x_t, y_next);
    Ok(record)
}

/// Optimistic composite step: predicted half-step with `(∇ŝ_t, r̂_t)`,
/// corrected half-step with `(∇s_t(x_t), r_t)`.
pub fn optcmd_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    eta: f64,
) -> Result<StepRecord> {
    optdcmd_step_split(setup, state, cost, bundle, &DynamicsModel::Identity, eta, eta)
}

/// [`optcmd_step`] followed by `y_t = Φ_t(ỹ_t)`.
pub fn optdcmd_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    dynamics: &DynamicsModel,
    eta: f64,
) -> Result<StepRecord> {
    optdcmd_step_split(setup, state, cost, bundle, dynamics, eta, eta)
}

pub fn optdcmd_step_split(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    bundle: &PredictionBundle,
    dynamics: &DynamicsModel,
    eta_x: f64,
    eta_y: f64,
) -> Result<StepRecord> {
    check_eta(eta_x)?;
    check_eta(eta_y)?;
    let y = state.y_prev.clone();
    let pred = bundle.grad_pred.eval(&y);
    check_dim(setup.dim, pred.len())?;
    let x_t = composite_prox(setup, &pred, &bundle.func_pred, eta_x, &y)?;
    let y_tilde = composite_prox(setup, &cost.smooth_gradient(&x_t), &cost.nonsmooth, eta_y, &y)?;

    let grad_err_sq = setup.dual_norm(&sub(&cost.smooth_gradient(&y), &pred))?.powi(2);
    let r = &cost.nonsmooth;
    let r_hat = &bundle.func_pred;
    let delta = r.value(&x_t) - r_hat.value(&x_t) + r_hat.value(&y_tilde) - r.value(&y_tilde);
    let g_mismatch = setup
        .dual_norm(&sub(&r.subgradient(&x_t), &r_hat.subgradient(&y_tilde)))?
        .max(setup.dual_norm(&sub(&r.subgradient(&y_tilde), &r_hat.subgradient(&x_t)))?);

    let mut warnings = Vec::new();
    let y_next = apply_dynamics(setup, dynamics, &y_tilde, &y, &mut warnings)?;
    let record = StepRecord {
        round: state.round,
        played: x_t.clone(),
        y_tilde: Some(y_tilde),
        grad_err_sq,
        delta,
        g_mismatch,
        eta_x,
        eta_y,
        warnings,
    };
    advance(state, x_t, y_next);
    Ok(record)
}

/// `x_{t+1} = Φ_t(arg min η⟨∇s_t(x_t), x⟩ + η r_t(x) + B(x, x_t))`.
pub fn dmd_baseline_step(
    setup: &MirrorSetup,
    state: &mut AlgorithmState,
    cost: &CompositeCost,
    dynamics: &DynamicsModel,
    eta: f64,
) -> Result<StepRecord> {
    check_eta(eta)?;
    let x_t = state.x_prev.clone();
    let stepped = composite_prox(setup, &cost.smooth_gradient(&x_t), &cost.nonsmooth, eta, &x_t)?;
    let mut record = simple_record(state.round, x_t.clone(), eta);
    let next = apply_dynamics(setup, dynamics, &stepped, &x_t, &mut record.warnings)?;
    advance(state, next.clone(), next);
    Ok(record)
}

fn apply_dynamics(
    setup: &MirrorSetup,
    dynamics: &DynamicsModel,
    point: &[f64],
    previous: &[f64],
    warnings: &mut Vec<String>,
) -> Result<Vec<f64>> {
    if dynamics.is_identity() {
        return Ok(point.to_vec());
    }
    let mapped = dynamics.apply(point);
    check_dim(setup.dim, mapped.len())?;
    let mapped = if setup.is_entropy() {
        if mapped.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InfeasibleDynamics);
        }
        setup.normalize_point(&mapped)?
    } else {
        mapped
    };
    if !setup.contains(&mapped) {
        return Err(Error::InfeasibleDynamics);
    }
    if !nonexpansive_at(dynamics, setup, point, previous)? {
        warnings.push("dynamics model expanded the Bregman divergence".into());
    }
    Ok(mapped)
}

/// Constant uniform portfolio.
pub fn cup_baseline(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("portfolio needs at least one asset".into()));
    }
    Ok(vec![1.0 / n as f64; n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use crate::prox::QuadraticCost;
    use approx::assert_abs_diff_eq;

    fn line() -> MirrorSetup {
        MirrorSetup::euclidean(1, FeasibleSet::WholeSpace).unwrap()
    }

    fn quad(target: f64, l1: f64) -> CompositeCost {
        CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![target], 1.0).unwrap()),
            if l1 > 0.0 { NonsmoothPart::L1 { weight: l1 } } else { NonsmoothPart::Zero },
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn omd_examples() {
        let s = line();
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        omd_step(&s, &mut st, &quad(1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(st.x_prev[0], 1.0, epsilon = 1e-15);

        let e = MirrorSetup::entropy_simplex(2).unwrap();
        let lin = CompositeCost::new(SmoothPart::Linear(vec![4f64.ln(), 0.0]), NonsmoothPart::Zero, 1.0, 0.0).unwrap();
        let mut st = AlgorithmState::new(&e, &[0.5, 0.5]).unwrap();
        omd_step(&e, &mut st, &lin, 1.0).unwrap();
        assert_abs_diff_eq!(st.x_prev[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn optmd_perfect_prediction_example() {
        let s = line();
        let c = quad(1.0, 0.0);
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        let rec = optmd_step(&s, &mut st, &c, &PredictionBundle::perfect(&c), 0.5).unwrap();
        assert_abs_diff_eq!(rec.played[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(st.y_prev[0], 0.25, epsilon = 1e-15);
        assert_eq!(rec.grad_err_sq, 0.0);
    }

    #[test]
    fn comid_example_and_dead_zone() {
        let s = line();
        let c = CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(vec![0.0], 1.0).unwrap()),
            NonsmoothPart::L1 { weight: 1.0 },
            1.0,
            1.0,
        )
        .unwrap();
        let mut st = AlgorithmState::new(&s, &[3.0]).unwrap();
        comid_step(&s, &mut st, &c, 1.0).unwrap();
        assert_eq!(st.x_prev[0], 0.0);
    }

    #[test]
    fn optcmd_and_optdcmd_examples() {
        let s = line();
        let c = quad(1.0, 0.1);
        let bundle = PredictionBundle::perfect(&c);
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        let rec = optcmd_step(&s, &mut st, &c, &bundle, 0.5).unwrap();
        assert_abs_diff_eq!(rec.played[0], 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(st.y_prev[0], 0.225, epsilon = 1e-15);
        assert_eq!(rec.grad_err_sq, 0.0);
        assert_eq!(rec.delta, 0.0);

        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        optdcmd_step(&s, &mut st, &c, &bundle, &DynamicsModel::Scale(0.5), 0.5).unwrap();
        assert_abs_diff_eq!(st.y_prev[0], 0.1125, epsilon = 1e-15);
    }

    #[test]
    fn dmd_with_shift() {
        let s = line();
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        let rec = dmd_baseline_step(&s, &mut st, &quad(1.0, 0.0), &DynamicsModel::Shift(vec![1.0]), 0.5).unwrap();
        // step to 0.5, then shift by one; the shift is non-expansive
        assert_abs_diff_eq!(st.x_prev[0], 1.5, epsilon = 1e-15);
        assert!(rec.warnings.is_empty());
    }

    #[test]
    fn expansive_dynamics_is_flagged() {
        let s = line();
        let c = quad(1.0, 0.0);
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        let rec = optdcmd_step(&s, &mut st, &c, &PredictionBundle::perfect(&c), &DynamicsModel::Scale(2.0), 0.5).unwrap();
        assert_eq!(rec.warnings.len(), 1);
    }

    #[test]
    fn infeasible_dynamics_is_an_error() {
        let s = MirrorSetup::euclidean(1, FeasibleSet::unit_box(1, 1.0)).unwrap();
        let c = quad(1.0, 0.0);
        let mut st = AlgorithmState::new(&s, &[0.0]).unwrap();
        let r = optdcmd_step(&s, &mut st, &c, &PredictionBundle::perfect(&c), &DynamicsModel::Shift(vec![5.0]), 0.5);
        assert!(matches!(r, Err(Error::InfeasibleDynamics)));
    }

    #[test]
    fn cup() {
        assert_eq!(cup_baseline(2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(cup_baseline(4).unwrap(), vec![0.25; 4]);
        assert!(cup_baseline(0).is_err());
    }
}
