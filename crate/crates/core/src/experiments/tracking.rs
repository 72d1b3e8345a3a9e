//! Tracking of parameters driven by linear dynamics with sign-quantized
//! Gaussian noise, comparing OptDCMD against DMD and dynamic OptMD.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{difference, repetition_rng, Curve, RunLedgers};
use crate::algorithms::{
    dmd_baseline_step, doptmd_baseline_step, optdcmd_step_split, AlgorithmState, DynamicsModel, GradPred,
    PredictionBundle, StepRecord,
};
use crate::cost::CompositeCost;
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, MirrorSetup};
use crate::predictors::{tracking_grad_pred_scaled, TrackingModel, TRACKING_NOISE_STD};
use crate::prox::NonsmoothPart;
use crate::regret::{bound_for, BoundConstants, BoundMeasures, RegretLedger, RoundInput, Theorem};
use crate::stepsize::{Schedule, StepSizeState};
use crate::vecops::sub;

pub fn default_dynamics() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 0.1, 0.0, 0.0],
        vec![0.0, 1.0, 0.1, 0.0],
        vec![0.0, 0.0, 1.0, 0.1],
        vec![0.0, 0.0, 0.0, 1.0],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Dynamics of the reference sequence.
    pub a: Vec<Vec<f64>>,
    /// Model `Φ(x) = A_model x` handed to the player; defaults to `a`.
    pub model_a: Option<Vec<Vec<f64>>>,
    /// Noise value where the latent Gaussian is positive.
    pub noise_high: f64,
    pub noise_low: f64,
    /// Latent covariance `BBᵀ + jitter·I` with standard normal `B`.
    pub cov_jitter: f64,
    pub l1_weight: f64,
    pub u1: Vec<f64>,
    pub y0: Vec<f64>,
    pub models: Vec<TrackingModel>,
    /// Standard deviation of `w_t` in the noisy and random models.
    pub prediction_noise_std: f64,
    pub schedule: Schedule,
    /// Step of the ỹ-update; `None` reuses the x-update step.
    pub eta_y: Option<f64>,
    pub dmd_eta: f64,
    /// Half-width of a box feasible set; `None` is the whole space.
    pub box_half_width: Option<f64>,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            horizon: 1000,
            repetitions: 100,
            seed: 0,
            a: default_dynamics(),
            model_a: None,
            noise_high: 2.0,
            noise_low: -1.0,
            cov_jitter: 0.1,
            l1_weight: 1.0,
            u1: vec![0.0; 4],
            y0: vec![0.0; 4],
            models: TrackingModel::ALL.to_vec(),
            prediction_noise_std: TRACKING_NOISE_STD,
            schedule: Schedule::Thm3,
            eta_y: Some(1.0),
            dmd_eta: 1.0,
            box_half_width: None,
        }
    }
}

impl TrackingConfig {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let square = |m: &[Vec<f64>]| m.len() == n && m.iter().all(|r| r.len() == n && r.iter().all(|v| v.is_finite()));
        if n == 0 || !square(&self.a) {
            return Err(Error::Config("dynamics matrix must be square, finite and non-empty".into()));
        }
        if let Some(m) = &self.model_a {
            if !square(m) {
                return Err(Error::Config("model dynamics must match the dynamics matrix".into()));
            }
        }
        if self.horizon == 0 || self.repetitions == 0 {
            return Err(Error::Config("horizon and repetitions must be at least 1".into()));
        }
        if self.u1.len() != n || self.y0.len() != n {
            return Err(Error::Config("initial points must match the dimension".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one prediction model is required".into()));
        }
        if !(self.cov_jitter > 0.0) || !(self.l1_weight >= 0.0) || !(self.prediction_noise_std >= 0.0) {
            return Err(Error::Config("need cov_jitter > 0, l1_weight >= 0 and noise std >= 0".into()));
        }
        if !(self.dmd_eta > 0.0) || self.eta_y.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        if !matches!(self.schedule, Schedule::Thm3 | Schedule::Thm1 | Schedule::Thm5 | Schedule::Constant(_)) {
            return Err(Error::Config("tracking supports thm1, thm3, thm5 or constant schedules".into()));
        }
        if let Some(h) = self.box_half_width {
            if !(h > 0.0) {
                return Err(Error::Config("box half-width must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn setup(&self) -> Result<MirrorSetup> {
        let set = match self.box_half_width {
            Some(h) => FeasibleSet::unit_box(self.dim(), h),
            None => FeasibleSet::WholeSpace,
        };
        MirrorSetup::euclidean(self.dim(), set)
    }

    pub fn dynamics(&self) -> DynamicsModel {
        DynamicsModel::Linear(self.model_a.clone().unwrap_or_else(|| self.a.clone()))
    }

    /// The ỹ-update uses a different step than the theorems assume.
    pub fn is_hybrid(&self) -> bool {
        self.eta_y.is_some()
    }
}

/// `u_1, …, u_{T+1}` with `u_{t+1} = A u_t + v_t`, `v_t` the sign-quantized
/// latent Gaussian.
pub fn generate_trajectory<R: Rng + ?Sized>(config: &TrackingConfig, steps: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let n = config.dim();
    let b = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let cov = &b * b.transpose() + DMatrix::identity(n, n) * config.cov_jitter;
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::NumericalBreakdown("noise covariance is not positive definite".into()))?;
    let l = chol.l();
    let mut u = vec![config.u1.clone()];
    for _ in 1..steps {
        let z = nalgebra::DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
        let latent = &l * z;
        let prev = u.last().expect("non-empty");
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let drift: f64 = (0..n).map(|j| config.a[i][j] * prev[j]).sum();
                drift + if latent[i] > 0.0 { config.noise_high } else { config.noise_low }
            })
            .collect();
        u.push(next);
    }
    Ok(u)
}

/// One OptDCMD trajectory with its ledger and theorem bounds.
#[derive(Debug, Clone)]
pub struct DynamicRun {
    pub ledger: RegretLedger,
    pub etas: Vec<f64>,
    pub regret: f64,
    pub bound_thm3: f64,
    /// Only with the Theorem 5 schedule.
    pub bound_thm5: Option<f64>,
    pub d_prime: f64,
    pub v_prime: f64,
    /// `C'_T`, including the step into `u_{T+1}`.
    pub c_prime: f64,
    pub expansion_warnings: usize,
}

/// Gradient prediction at `y_{t−1}` for round `t` (1-based).
pub type Predictor<'a> = dyn FnMut(usize, &[f64]) -> Vec<f64> + 'a;

/// Runs OptDCMD on `costs` (length T) against `refs` (length T+1). `predict`
/// is called once more for round T+1 to evaluate `D'_{T+1}` for Theorem 5.
/// Without `func_preds` each round predicts its own nonsmooth part.
#[allow(clippy::too_many_arguments)]
pub fn run_optdcmd(
    setup: &MirrorSetup,
    costs: &[CompositeCost],
    refs: &[Vec<f64>],
    next_cost: &CompositeCost,
    dynamics: &DynamicsModel,
    y0: &[f64],
    schedule: Schedule,
    eta_y: Option<f64>,
    func_preds: Option<&[NonsmoothPart]>,
    predict: &mut Predictor<'_>,
) -> Result<DynamicRun> {
    let horizon = costs.len();
    if refs.len() != horizon + 1 {
        return Err(Error::LengthMismatch {
            left: horizon + 1,
            right: refs.len(),
        });
    }
    if let Some(f) = func_preds {
        if f.len() != horizon {
            return Err(Error::LengthMismatch {
                left: horizon,
                right: f.len(),
            });
        }
    }
    let beta = costs.iter().map(|c| c.beta).fold(0.0, f64::max);
    let mut steps = StepSizeState::new(beta)?;
    let mut state = AlgorithmState::new(setup, y0)?;
    let mut ledger = RegretLedger::new();
    let mut etas = Vec::with_capacity(horizon);
    let mut expansion_warnings = 0;
    let ref_step = |t: usize| -> f64 {
        // observed in round t: ‖u_t − Φ(u_{t−1})‖
        if t >= 2 {
            setup.primal_norm(&sub(&refs[t - 1], &dynamics.apply(&refs[t - 2])))
        } else {
            0.0
        }
    };
    for t in 1..=horizon {
        let cost = &costs[t - 1];
        let pred = predict(t, &state.y_prev);
        let r_hat = func_preds.map_or_else(|| cost.nonsmooth.clone(), |f| f[t - 1].clone());
        let bundle = PredictionBundle::new(GradPred::Fixed(pred), r_hat);
        let eta_x = steps.eta(schedule, t)?;
        let rec = optdcmd_step_split(setup, &mut state, cost, &bundle, dynamics, eta_x, eta_y.unwrap_or(eta_x))?;
        expansion_warnings += rec.warnings.len();
        let step = ref_step(t);
        steps.accumulate(rec.grad_err_sq, rec.delta.abs(), step)?;
        etas.push(eta_x);
        ledger.push(round_input(&rec, cost, &refs[t - 1], step, eta_x))?;
    }

    let last_step = ref_step(horizon + 1);
    let c_prime = steps.c_prime + last_step;
    let constants = BoundConstants {
        beta,
        diameter_sq: setup.diameter_sq,
        bregman_lipschitz: setup.bregman_lipschitz,
        ..BoundConstants::default()
    };
    let mut measures = BoundMeasures {
        d_prime: steps.d_prime,
        v_prime: steps.v_prime,
        c_prime,
        eta_first: etas.first().copied().unwrap_or(0.5 / beta),
        eta_last: etas.last().copied().unwrap_or(0.5 / beta),
        ..BoundMeasures::default()
    };
    let bound_thm3 = bound_for(Theorem::Three, &constants, &measures)?;
    let bound_thm5 = if schedule == Schedule::Thm5 {
        let pred = predict(horizon + 1, &state.y_prev);
        let next_err = setup.dual_norm(&sub(&next_cost.smooth_gradient(&state.y_prev), &pred))?.powi(2);
        measures.theta_lookahead = steps.theta_lookahead(next_err, last_step)?;
        measures.d_prime_next = steps.d_prime + next_err;
        Some(bound_for(Theorem::Five, &constants, &measures)?)
    } else {
        None
    };
    let regret = ledger.last().map_or(0.0, |r| r.reg_d);
    Ok(DynamicRun {
        ledger,
        etas,
        regret,
        bound_thm3,
        bound_thm5,
        d_prime: steps.d_prime,
        v_prime: steps.v_prime,
        c_prime,
        expansion_warnings,
    })
}

fn round_input(rec: &StepRecord, cost: &CompositeCost, reference: &[f64], ref_step: f64, eta: f64) -> RoundInput {
    RoundInput {
        played: rec.played.clone(),
        loss: cost.value(&rec.played),
        comparator_loss: Some(cost.value(reference)),
        grad_err_sq: rec.grad_err_sq,
        delta_abs: rec.delta.abs(),
        ref_step,
        eta,
    }
}

#[derive(Debug, Clone)]
pub struct TrackingResult {
    pub config: TrackingConfig,
    /// `optdcmd` and `doptmd` per model, then `dmd`.
    pub ledgers: Vec<RunLedgers>,
    /// `Reg^d_t(OptDCMD) − Reg^d_t(DMD)` per model.
    pub vs_dmd: Vec<Curve>,
    /// `Reg^d_t(OptDCMD) − Reg^d_t(d-OptMD)` per model.
    pub vs_doptmd: Vec<Curve>,
    /// `(model_id, repetition, regret, Theorem 3 bound)` for OptDCMD runs.
    pub bound_checks: Vec<(String, usize, f64, f64)>,
    pub expansion_warnings: usize,
    pub notes: Vec<String>,
}

impl TrackingResult {
    pub fn final_regret(&self, algorithm: &str, model_id: &str) -> Option<f64> {
        let run = self
            .ledgers
            .iter()
            .find(|r| r.algorithm == algorithm && r.model_id == model_id)?;
        let n = run.ledgers.len() as f64;
        Some(run.ledgers.iter().map(|l| l.last().map_or(0.0, |r| r.reg_d)).sum::<f64>() / n)
    }

    pub fn bound_violations(&self) -> usize {
        self.bound_checks.iter().filter(|(_, _, reg, bound)| reg > bound).count()
    }
}

struct Repetition {
    optdcmd: Vec<DynamicRun>,
    doptmd: Vec<RegretLedger>,
    dmd: RegretLedger,
    warnings: usize,
}

fn run_repetition(config: &TrackingConfig, rep: usize) -> Result<Repetition> {
    let setup = config.setup()?;
    let dynamics = config.dynamics();
    let mut rng = repetition_rng(config.seed, rep);
    let horizon = config.horizon;
    let refs = generate_trajectory(config, horizon + 2, &mut rng)?;
    let costs: Vec<CompositeCost> = refs
        .iter()
        .map(|u| CompositeCost::tracking(u.clone(), config.l1_weight))
        .collect();
    let model_seed: u64 = rng.random();
    let std = config.prediction_noise_std;

    let mut optdcmd = Vec::new();
    let mut doptmd = Vec::new();
    for (m, &model) in config.models.iter().enumerate() {
        let base_rng = repetition_rng(model_seed, m);
        let mut pred_rng = base_rng.clone();
        let mut predict = |t: usize, y: &[f64]| {
            let prev = if t >= 2 { Some(&costs[t - 2]) } else { None };
            tracking_grad_pred_scaled(model, &costs[t - 1], prev, y, std, &mut pred_rng)
        };
        optdcmd.push(run_optdcmd(
            &setup,
            &costs[..horizon],
            &refs[..=horizon],
            &costs[horizon],
            &dynamics,
            &config.y0,
            config.schedule,
            config.eta_y,
            None,
            &mut predict,
        )?);
        doptmd.push(run_doptmd(config, &setup, &dynamics, &costs[..horizon], &refs, model, base_rng)?);
    }
    let dmd = run_dmd(config, &setup, &dynamics, &costs[..horizon], &refs)?;
    let warnings = optdcmd.iter().map(|r| r.expansion_warnings).sum();
    Ok(Repetition {
        optdcmd,
        doptmd,
        dmd,
        warnings,
    })
}

/// Dynamic OptMD: the whole cost is linearized. The prediction of `∇f_t` is
/// the model's `∇ŝ_t` plus the exact subgradient of `r_t` at `y_{t−1}`.
fn run_doptmd(
    config: &TrackingConfig,
    setup: &MirrorSetup,
    dynamics: &DynamicsModel,
    costs: &[CompositeCost],
    refs: &[Vec<f64>],
    model: TrackingModel,
    mut rng: ChaCha8Rng,
) -> Result<RegretLedger> {
    let mut steps = StepSizeState::new(1.0)?;
    let mut state = AlgorithmState::new(setup, &config.y0)?;
    let mut ledger = RegretLedger::new();
    let schedule = match config.schedule {
        Schedule::Thm5 => Schedule::Thm5,
        Schedule::Constant(e) => Schedule::Constant(e),
        _ => Schedule::Thm1,
    };
    for (i, cost) in costs.iter().enumerate() {
        let t = i + 1;
        let prev = if t >= 2 { Some(&costs[t - 2]) } else { None };
        let y = state.y_prev.clone();
        let mut pred = tracking_grad_pred_scaled(model, cost, prev, &y, config.prediction_noise_std, &mut rng);
        for (p, s) in pred.iter_mut().zip(cost.nonsmooth.subgradient(&y)) {
            *p += s;
        }
        let bundle = PredictionBundle::new(GradPred::Fixed(pred), cost.nonsmooth.clone());
        let eta_x = steps.eta(schedule, t)?;
        let rec = doptmd_baseline_step(setup, &mut state, cost, &bundle, dynamics, eta_x, config.eta_y.unwrap_or(eta_x))?;
        steps.accumulate(rec.grad_err_sq, 0.0, 0.0)?;
        ledger.push(round_input(&rec, cost, &refs[i], 0.0, eta_x))?;
    }
    Ok(ledger)
}

fn run_dmd(
    config: &TrackingConfig,
    setup: &MirrorSetup,
    dynamics: &DynamicsModel,
    costs: &[CompositeCost],
    refs: &[Vec<f64>],
) -> Result<RegretLedger> {
    let mut state = AlgorithmState::new(setup, &config.y0)?;
    let mut ledger = RegretLedger::new();
    for (i, cost) in costs.iter().enumerate() {
        let rec = dmd_baseline_step(setup, &mut state, cost, dynamics, config.dmd_eta)?;
        ledger.push(round_input(&rec, cost, &refs[i], 0.0, config.dmd_eta))?;
    }
    Ok(ledger)
}

fn reg_series(ledger: &RegretLedger) -> Vec<f64> {
    ledger.rows.iter().map(|r| r.reg_d).collect()
}

pub fn run_tracking(config: &TrackingConfig) -> Result<TrackingResult> {
    config.validate()?;
    let reps: Vec<Repetition> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(config, rep))
        .collect::<Result<Vec<_>>>()?;

    let mut ledgers = Vec::new();
    let mut vs_dmd = Vec::new();
    let mut vs_doptmd = Vec::new();
    let mut bound_checks = Vec::new();
    for (m, model) in config.models.iter().enumerate() {
        let id = model.id().to_string();
        let opt: Vec<RegretLedger> = reps.iter().map(|r| r.optdcmd[m].ledger.clone()).collect();
        let base: Vec<RegretLedger> = reps.iter().map(|r| r.doptmd[m].clone()).collect();
        let d1: Vec<Vec<f64>> = reps
            .iter()
            .map(|r| difference(&reg_series(&r.optdcmd[m].ledger), &reg_series(&r.dmd)))
            .collect();
        let d2: Vec<Vec<f64>> = reps
            .iter()
            .map(|r| difference(&reg_series(&r.optdcmd[m].ledger), &reg_series(&r.doptmd[m])))
            .collect();
        vs_dmd.push(Curve::from_series(id.clone(), &d1));
        vs_doptmd.push(Curve::from_series(id.clone(), &d2));
        for (rep, r) in reps.iter().enumerate() {
            bound_checks.push((id.clone(), rep, r.optdcmd[m].regret, r.optdcmd[m].bound_thm3));
        }
        ledgers.push(RunLedgers {
            algorithm: "optdcmd".into(),
            model_id: id.clone(),
            ledgers: opt,
        });
        ledgers.push(RunLedgers {
            algorithm: "doptmd".into(),
            model_id: id,
            ledgers: base,
        });
    }
    ledgers.push(RunLedgers {
        algorithm: "dmd".into(),
        model_id: "none".into(),
        ledgers: reps.iter().map(|r| r.dmd.clone()).collect(),
    });

    let expansion_warnings = reps.iter().map(|r| r.warnings).sum();
    let mut notes = Vec::new();
    if config.is_hybrid() {
        notes.push("the constant ỹ step lies outside the Theorem 3 hypotheses; its bound is reported, not guaranteed".into());
    }
    if expansion_warnings > 0 {
        notes.push(format!(
            "the dynamics model expanded the Bregman divergence in {expansion_warnings} steps (non-expansiveness does not hold)"
        ));
    }
    if config.box_half_width.is_none() {
        notes.push("unbounded feasible set: R² and γ are infinite, so the Theorem 3 bound is vacuous".into());
    }
    Ok(TrackingResult {
        config: config.clone(),
        ledgers,
        vs_dmd,
        vs_doptmd,
        bound_checks,
        expansion_warnings,
        notes,
    })
}
