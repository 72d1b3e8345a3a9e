//! Online portfolio selection with OptMD on the simplex under the negative
//! entropy, driven by clamped return predictions, against the constant
//! uniform portfolio.

use rayon::prelude::*;

use super::{difference, repetition_rng, Curve, MarketDataset, RunLedgers};
use crate::algorithms::{cup_baseline, optcmd_step, AlgorithmState, GradPred, PredictionBundle};
use crate::cost::CompositeCost;
use crate::error::{Error, Result};
use crate::geometry::MirrorSetup;
use crate::predictors::{
    clamp_g, portfolio_grad_pred, ReturnModel, ReturnPredictor, RETURN_NOISE_STD, RLS_DELTA, R_MAX, R_MIN,
};
use crate::prox::NonsmoothPart;
use crate::regret::{bound_for, static_regret, BoundConstants, BoundMeasures, RegretLedger, RoundInput, Theorem};
use crate::stepsize::{Schedule, StepSizeState};

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioConfig {
    pub beta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub models: Vec<ReturnModel>,
    pub rls_delta: f64,
    /// Standard deviation of the noisy return model.
    pub noise_std: f64,
    /// Clip the dataset to `[r_min, r_max]` before running.
    pub clip: bool,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            beta: 9.0,
            r_min: R_MIN,
            r_max: R_MAX,
            repetitions: 10,
            seed: 0,
            models: vec![
                ReturnModel::MovingAverage(5),
                ReturnModel::Previous,
                ReturnModel::Noisy,
                ReturnModel::Random,
                ReturnModel::RecursiveLs(3),
            ],
            rls_delta: RLS_DELTA,
            noise_std: RETURN_NOISE_STD,
            clip: true,
        }
    }
}

impl PortfolioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config("beta must be positive".into()));
        }
        if !(self.r_min > 0.0 && self.r_min <= 1.0 && self.r_max >= 1.0 && self.r_max.is_finite()) {
            return Err(Error::Config("need 0 < r_min <= 1 <= r_max".into()));
        }
        if self.repetitions == 0 || self.models.is_empty() {
            return Err(Error::Config("need at least one repetition and one model".into()));
        }
        if !(self.rls_delta > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("need rls_delta > 0 and noise_std >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PortfolioResult {
    pub config: PortfolioConfig,
    pub dataset_name: String,
    pub clipped_entries: usize,
    /// One `optmd` entry per model, then `cup`.
    pub ledgers: Vec<RunLedgers>,
    /// `Reg^s_t(OptMD) − Reg^s_t(CUP)` per model.
    pub vs_cup: Vec<Curve>,
    /// Best fixed portfolio in hindsight.
    pub comparator: Vec<f64>,
    /// Certified width of the static regret bracket.
    pub comparator_gap_total: f64,
    /// `(model_id, repetition, regret upper bracket, Theorem 1 bound)`.
    pub bound_checks: Vec<(String, usize, f64, f64)>,
    pub rls_breakdowns: usize,
    pub notes: Vec<String>,
}

impl PortfolioResult {
    /// Mean final static regret of OptMD with `model_id`, or of `cup`.
    pub fn final_regret(&self, model_id: &str) -> Option<f64> {
        let run = self.ledgers.iter().find(|r| r.model_id == model_id)?;
        let n = run.ledgers.len() as f64;
        Some(run.ledgers.iter().map(|l| l.last().map_or(0.0, |r| r.reg_s)).sum::<f64>() / n)
    }

    pub fn bound_violations(&self) -> usize {
        self.bound_checks.iter().filter(|(_, _, reg, bound)| reg > bound).count()
    }
}

struct ModelRun {
    ledger: RegretLedger,
    d_prime: f64,
    breakdowns: usize,
}

fn run_optmd(
    config: &PortfolioConfig,
    setup: &MirrorSetup,
    costs: &[CompositeCost],
    returns: &[Vec<f64>],
    model: ReturnModel,
    rep: usize,
    model_index: usize,
) -> Result<ModelRun> {
    let n = setup.dim;
    let mut rng = repetition_rng(config.seed ^ (model_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15), rep);
    let mut predictor = ReturnPredictor::with_bounds(model, n, config.r_min, config.r_max, config.rls_delta);
    let mut steps = StepSizeState::new(config.beta)?;
    let mut state = AlgorithmState::new(setup, &cup_baseline(n)?)?;
    let mut ledger = RegretLedger::new();
    for (i, cost) in costs.iter().enumerate() {
        let t = i + 1;
        let raw = predictor.predict_scaled(&returns[i], config.noise_std, &mut rng)?;
        let r_hat = clamp_g(&raw, config.r_min, config.r_max);
        let m = portfolio_grad_pred(&r_hat, &state.y_prev)?;
        let bundle = PredictionBundle::new(GradPred::Fixed(m), NonsmoothPart::Zero);
        let eta = steps.eta(Schedule::Thm1, t)?;
        let rec = optcmd_step(setup, &mut state, cost, &bundle, eta)?;
        steps.accumulate(rec.grad_err_sq, 0.0, 0.0)?;
        ledger.push(RoundInput {
            loss: cost.value(&rec.played),
            played: rec.played,
            comparator_loss: None,
            grad_err_sq: rec.grad_err_sq,
            delta_abs: 0.0,
            ref_step: 0.0,
            eta,
        })?;
        predictor.observe(&returns[i])?;
    }
    Ok(ModelRun {
        ledger,
        d_prime: steps.d_prime,
        breakdowns: predictor.breakdowns,
    })
}

fn reg_series(ledger: &RegretLedger) -> Vec<f64> {
    ledger.rows.iter().map(|r| r.reg_s).collect()
}

pub fn run_portfolio(config: &PortfolioConfig, dataset: &MarketDataset) -> Result<PortfolioResult> {
    config.validate()?;
    let mut data = dataset.clone();
    let clipped_entries = if config.clip {
        data.clip(config.r_min, config.r_max)
    } else {
        data.count_outside(config.r_min, config.r_max)
    };
    let n = data.n_assets();
    let setup = MirrorSetup::entropy_simplex(n)?;
    let costs: Vec<CompositeCost> = data
        .returns
        .iter()
        .map(|r| CompositeCost::log_loss(r.clone(), config.beta))
        .collect();

    let cup = cup_baseline(n)?;
    let mut cup_ledger = RegretLedger::new();
    for cost in &costs {
        cup_ledger.push(RoundInput {
            played: cup.clone(),
            loss: cost.value(&cup),
            comparator_loss: None,
            grad_err_sq: 0.0,
            delta_abs: 0.0,
            ref_step: 0.0,
            eta: 0.0,
        })?;
    }
    let comparator = static_regret(&cup_ledger.losses(), &costs, &setup)?;
    cup_ledger.set_static_comparator(&comparator.comparator_losses)?;
    let gap_total = comparator.upper - comparator.lower;

    let jobs: Vec<(usize, usize)> = (0..config.models.len())
        .flat_map(|m| (0..config.repetitions).map(move |r| (m, r)))
        .collect();
    let runs: Vec<ModelRun> = jobs
        .par_iter()
        .map(|&(m, rep)| run_optmd(config, &setup, &costs, &data.returns, config.models[m], rep, m))
        .collect::<Result<Vec<_>>>()?;

    let constants = BoundConstants {
        beta: config.beta,
        diameter_sq: setup.diameter_sq,
        bregman_lipschitz: setup.bregman_lipschitz,
        ..BoundConstants::default()
    };
    let mut ledgers = Vec::new();
    let mut vs_cup = Vec::new();
    let mut bound_checks = Vec::new();
    let mut rls_breakdowns = 0;
    let cup_series = reg_series(&cup_ledger);
    for (m, model) in config.models.iter().enumerate() {
        let id = model.id();
        let mut model_ledgers = Vec::new();
        let mut diffs = Vec::new();
        for rep in 0..config.repetitions {
            let run = &runs[m * config.repetitions + rep];
            let mut ledger = run.ledger.clone();
            ledger.set_static_comparator(&comparator.comparator_losses)?;
            let measures = BoundMeasures {
                d_prime: run.d_prime,
                ..BoundMeasures::default()
            };
            let upper = ledger.last().map_or(0.0, |r| r.reg_s) + gap_total;
            bound_checks.push((id.clone(), rep, upper, bound_for(Theorem::One, &constants, &measures)?));
            diffs.push(difference(&reg_series(&ledger), &cup_series));
            rls_breakdowns += run.breakdowns;
            model_ledgers.push(ledger);
        }
        vs_cup.push(Curve::from_series(id.clone(), &diffs));
        ledgers.push(RunLedgers {
            algorithm: "optmd".into(),
            model_id: id,
            ledgers: model_ledgers,
        });
    }
    ledgers.push(RunLedgers {
        algorithm: "cup".into(),
        model_id: "cup".into(),
        ledgers: vec![cup_ledger; config.repetitions],
    });

    let mut notes = Vec::new();
    if config.models.iter().any(|m| !m.is_causal()) {
        notes.push("the noisy return model reads the realized return of the current round (non-causal reference)".into());
    }
    if clipped_entries > 0 {
        let verb = if config.clip { "clipped" } else { "found outside" };
        notes.push(format!("{clipped_entries} entries {verb} [r_min, r_max]"));
    }
    if rls_breakdowns > 0 {
        notes.push(format!("recursive least squares was re-initialized {rls_breakdowns} times"));
    }
    Ok(PortfolioResult {
        config: config.clone(),
        dataset_name: data.name.clone(),
        clipped_entries,
        ledgers,
        vs_cup,
        comparator: comparator.minimizer,
        comparator_gap_total: gap_total,
        bound_checks,
        rls_breakdowns,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_returns_give_zero_everything() {
        let data = MarketDataset::new("ones", vec!["a".into(), "b".into(), "c".into()], vec![vec![1.0; 3]; 40]).unwrap();
        let config = PortfolioConfig {
            repetitions: 2,
            ..PortfolioConfig::default()
        };
        let res = run_portfolio(&config, &data).unwrap();
        for c in &res.vs_cup {
            assert!(c.mean.iter().all(|v| v.abs() < 1e-12), "{}", c.model_id);
        }
        for run in &res.ledgers {
            for l in &run.ledgers {
                assert!(l.rows.iter().all(|r| r.loss.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn cup_loss_is_log_mean() {
        let rows = vec![vec![1.2, 0.8, 1.1], vec![0.9, 1.3, 1.0]];
        let data = MarketDataset::new("x", vec!["a".into(), "b".into(), "c".into()], rows.clone()).unwrap();
        let res = run_portfolio(&PortfolioConfig::default(), &data).unwrap();
        let cup = res.ledgers.last().unwrap();
        for (row, r) in cup.ledgers[0].rows.iter().zip(&rows) {
            assert_abs_diff_eq!(row.loss, -(r.iter().sum::<f64>() / 3.0).ln(), epsilon = 1e-15);
        }
    }
}
