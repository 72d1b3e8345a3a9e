//! Random problem instances on which measured regret is compared with the
//! theorem bound expressions.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::oracles::normal_vec;
use crate::algorithms::{optcmd_step, optdcmd_step_split, AlgorithmState, DynamicsModel, GradPred, PredictionBundle};
use crate::cost::{CompositeCost, SmoothPart};
use crate::error::Result;
use crate::experiments::tracking::{run_optdcmd, DynamicRun};
use crate::geometry::{FeasibleSet, MirrorSetup};
use crate::prox::{NonsmoothPart, QuadraticCost};
use crate::regret::{bound_for, minimize_average, static_regret, BoundConstants, BoundMeasures, OfflineConfig, Theorem};
use crate::stepsize::{Schedule, StepSizeState};
use crate::vecops::{norm2, sub};

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundOutcome {
    /// Certified upper end of the measured regret.
    pub regret: f64,
    pub bound: f64,
    pub d_prime: f64,
    pub v_prime: f64,
    pub c_prime: f64,
}

impl BoundOutcome {
    pub fn holds(&self) -> bool {
        self.regret <= self.bound
    }
}

/// Upper ends of the static regret bracket at each checkpoint `T`.
pub fn prefix_static_regret(
    setup: &MirrorSetup,
    losses: &[f64],
    costs: &[CompositeCost],
    checkpoints: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let mut cumulative = Vec::with_capacity(losses.len());
    let mut acc = 0.0;
    for l in losses {
        acc += l;
        cumulative.push(acc);
    }
    checkpoints
        .iter()
        .map(|&t| {
            let prefix = &costs[..t];
            let sol = minimize_average(setup, prefix, OfflineConfig::default())?;
            let best: f64 = prefix.iter().map(|c| c.value(&sol.point)).sum();
            Ok((t, cumulative[t - 1] - best + t as f64 * sol.gap))
        })
        .collect()
}

struct StaticRun {
    setup: MirrorSetup,
    costs: Vec<CompositeCost>,
    losses: Vec<f64>,
    d_prime: f64,
    v_prime: f64,
    beta: f64,
}

/// A convex composite instance: diagonal quadratics with i.i.d. targets plus
/// a time-varying ℓ1 term on a box. With `noise > 0` predictions are stale
/// and perturbed; `noise` also scales the ℓ1 weight error.
pub struct Theorem1Instance {
    pub setup: MirrorSetup,
    pub beta: f64,
    pub costs: Vec<CompositeCost>,
    pub grad_preds: Vec<SmoothPart>,
    pub func_preds: Vec<NonsmoothPart>,
}

pub fn theorem1_instance(seed: u64, horizon: usize, noise: f64) -> Result<Theorem1Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let half = rng.random_range(0.5..2.0);
    let setup = MirrorSetup::euclidean(n, FeasibleSet::unit_box(n, half))?;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0) * 3.0).collect();
    let beta = weights.iter().cloned().fold(0.0, f64::max);
    let mut costs = Vec::with_capacity(horizon);
    let mut grad_preds = Vec::with_capacity(horizon);
    let mut func_preds = Vec::with_capacity(horizon);
    let mean = normal_vec(&mut rng, n, 0.5 * half);
    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..horizon {
        let centre: Vec<f64> = mean.iter().map(|m| m + half * gauss(&mut rng)).collect();
        let lambda = rng.random_range(0.0..0.4);
        costs.push(CompositeCost::new(
            SmoothPart::DiagQuadratic {
                target: centre.clone(),
                weights: weights.clone(),
            },
            NonsmoothPart::L1 { weight: lambda },
            beta,
            0.0,
        )?);
        // noisy predictions aim at the previous round's target
        let base = if noise > 0.0 { prev.as_ref().unwrap_or(&centre) } else { &centre };
        let shifted: Vec<f64> = base.iter().map(|c| c + noise * gauss(&mut rng)).collect();
        grad_preds.push(SmoothPart::DiagQuadratic {
            target: shifted,
            weights: weights.clone(),
        });
        let lambda_hat = (lambda + noise * rng.random_range(-0.2..0.2)).max(0.0);
        func_preds.push(NonsmoothPart::L1 { weight: lambda_hat });
        prev = Some(centre);
    }
    Ok(Theorem1Instance {
        setup,
        beta,
        costs,
        grad_preds,
        func_preds,
    })
}

fn run_static(
    setup: MirrorSetup,
    costs: Vec<CompositeCost>,
    bundles: impl Iterator<Item = PredictionBundle>,
    mut steps: StepSizeState,
    schedule: Schedule,
    beta: f64,
) -> Result<StaticRun> {
    let mut state = AlgorithmState::new(&setup, &setup.project(&setup.center())?)?;
    let mut losses = Vec::with_capacity(costs.len());
    for (i, (cost, bundle)) in costs.iter().zip(bundles).enumerate() {
        let eta = steps.eta(schedule, i + 1)?;
        let rec = optcmd_step(&setup, &mut state, cost, &bundle, eta)?;
        steps.accumulate(rec.grad_err_sq, rec.delta.abs(), 0.0)?;
        losses.push(cost.value(&rec.played));
    }
    Ok(StaticRun {
        setup,
        costs,
        losses,
        d_prime: steps.d_prime,
        v_prime: steps.v_prime,
        beta,
    })
}

fn theorem1_run(inst: Theorem1Instance) -> Result<StaticRun> {
    let bundles = inst
        .grad_preds
        .into_iter()
        .zip(inst.func_preds)
        .map(|(g, r)| PredictionBundle::new(GradPred::Smooth(g), r));
    let steps = StepSizeState::new(inst.beta)?;
    run_static(inst.setup, inst.costs, bundles, steps, Schedule::Thm1, inst.beta)
}

fn theorem1_bound(run: &StaticRun, d_prime: f64, v_prime: f64) -> Result<f64> {
    let k = BoundConstants {
        beta: run.beta,
        diameter_sq: run.setup.diameter_sq,
        ..BoundConstants::default()
    };
    let m = BoundMeasures {
        d_prime,
        v_prime,
        ..BoundMeasures::default()
    };
    bound_for(Theorem::One, &k, &m)
}

/// OptCMD with the Theorem 1 step on a random instance.
pub fn theorem1_check(seed: u64, horizon: usize, noise: f64) -> Result<BoundOutcome> {
    let run = theorem1_run(theorem1_instance(seed, horizon, noise)?)?;
    let sr = static_regret(&run.losses, &run.costs, &run.setup)?;
    Ok(BoundOutcome {
        regret: sr.upper,
        bound: theorem1_bound(&run, run.d_prime, run.v_prime)?,
        d_prime: run.d_prime,
        v_prime: run.v_prime,
        c_prime: 0.0,
    })
}

/// Perfect predictions: the largest regret over the checkpoints and the
/// `D' = V' = 0` bound constant.
pub fn theorem1_constant_regret(seed: u64, checkpoints: &[usize]) -> Result<(f64, f64)> {
    let horizon = checkpoints.iter().copied().max().unwrap_or(0);
    let run = theorem1_run(theorem1_instance(seed, horizon, 0.0)?)?;
    let curve = prefix_static_regret(&run.setup, &run.losses, &run.costs, checkpoints)?;
    let worst = curve.iter().map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);
    Ok((worst, theorem1_bound(&run, 0.0, 0.0)?))
}

/// An α-strongly convex instance on a ball: `(w_t/2)‖x − c_t‖² + λ‖x‖₁` with
/// targets uniform in a ball. The gradient prediction blends the current
/// gradient with a fraction `staleness` of the previous round's, so its error
/// is bounded by the returned σ.
fn theorem2_run(seed: u64, horizon: usize, staleness: f64) -> Result<(StaticRun, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let radius = rng.random_range(0.5..2.0);
    let setup = MirrorSetup::euclidean(n, FeasibleSet::centered_ball(n, radius))?;
    let alpha = rng.random_range(0.3..1.0);
    let beta = alpha * rng.random_range(1.0..3.0);
    let lambda = rng.random_range(0.0..0.3);
    let mean = normal_vec(&mut rng, n, 0.5 * radius);
    let spread = radius;
    // ‖w'(y − c') − w(y − c)‖ ≤ (β − α)‖y‖ + 2β max‖c‖
    let sigma = staleness * ((beta - alpha) * radius + 2.0 * beta * (norm2(&mean) + spread));
    let mut costs = Vec::with_capacity(horizon);
    let mut bundles = Vec::with_capacity(horizon);
    let mut prev: Option<(Vec<f64>, f64)> = None;
    for _ in 0..horizon {
        let w = rng.random_range(alpha..=beta);
        let dir = normal_vec(&mut rng, n, 1.0);
        let len = rng.random::<f64>().powf(1.0 / n as f64) * spread / norm2(&dir).max(1e-12);
        let target: Vec<f64> = mean.iter().zip(&dir).map(|(m, d)| m + len * d).collect();
        let (old_c, old_w) = prev.clone().unwrap_or((target.clone(), w));
        // (1 − κ)w(y − c) + κw'(y − c') is a quadratic with the blended weight
        let (a, b) = ((1.0 - staleness) * w, staleness * old_w);
        let blend: Vec<f64> = target.iter().zip(&old_c).map(|(c, o)| (a * c + b * o) / (a + b)).collect();
        let cost = CompositeCost::new(
            SmoothPart::Quadratic(QuadraticCost::new(target.clone(), w)?),
            NonsmoothPart::L1 { weight: lambda },
            beta,
            alpha,
        )?;
        let grad_pred = if staleness > 0.0 {
            SmoothPart::Quadratic(QuadraticCost::new(blend, a + b)?)
        } else {
            cost.smooth.clone()
        };
        bundles.push(PredictionBundle::new(GradPred::Smooth(grad_pred), cost.nonsmooth.clone()));
        costs.push(cost);
        prev = Some((target, w));
    }
    let steps = StepSizeState::new(beta)?
        .with_alpha(alpha)
        .with_sigma(sigma)
        .with_exact_function_predictions(true);
    Ok((run_static(setup, costs, bundles.into_iter(), steps, Schedule::Thm2, beta)?, alpha, sigma))
}

fn theorem2_bound(run: &StaticRun, alpha: f64, sigma: f64, d_prime: f64) -> Result<f64> {
    let k = BoundConstants {
        beta: run.beta,
        alpha,
        sigma,
        diameter_sq: run.setup.diameter_sq,
        ..BoundConstants::default()
    };
    let m = BoundMeasures {
        d_prime,
        ..BoundMeasures::default()
    };
    bound_for(Theorem::Two, &k, &m)
}

/// `staleness ∈ [0, 1]` sets the prediction error level.
pub fn theorem2_check(seed: u64, horizon: usize, staleness: f64) -> Result<BoundOutcome> {
    let (run, alpha, sigma) = theorem2_run(seed, horizon, staleness)?;
    let sr = static_regret(&run.losses, &run.costs, &run.setup)?;
    Ok(BoundOutcome {
        regret: sr.upper,
        bound: theorem2_bound(&run, alpha, sigma, run.d_prime)?,
        d_prime: run.d_prime,
        v_prime: 0.0,
        c_prime: 0.0,
    })
}

/// Static regret at each checkpoint of one strongly convex run.
pub fn theorem2_curve(seed: u64, staleness: f64, checkpoints: &[usize]) -> Result<Vec<(usize, f64)>> {
    let horizon = checkpoints.iter().copied().max().unwrap_or(0);
    let (run, _, _) = theorem2_run(seed, horizon, staleness)?;
    prefix_static_regret(&run.setup, &run.losses, &run.costs, checkpoints)
}

/// Tracking on a ball with `Φ = ρQ` (Q orthogonal, ρ ≤ 1) and cost
/// `½‖x − u_t‖² + λ‖x‖₁`. With `perturbation > 0` the reference leaves the
/// model's prediction by Gaussian steps. `exact_functions` selects `r̂ = r`.
pub fn dynamic_instance_run(
    seed: u64,
    horizon: usize,
    perturbation: f64,
    grad_noise: f64,
    exact_functions: bool,
    schedule: Schedule,
) -> Result<DynamicRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let radius = 2.0;
    let setup = MirrorSetup::euclidean(n, FeasibleSet::centered_ball(n, radius))?;
    let draws = DMatrix::<f64>::from_fn(n, n, |_, _| gauss(&mut rng));
    let q = draws.qr().q();
    let rho = rng.random_range(0.9..=1.0);
    let phi_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rho * q[(i, j)]).collect()).collect();
    let dynamics = DynamicsModel::Linear(phi_rows);
    let lambda = rng.random_range(0.0..0.5);

    let mut u = normal_vec(&mut rng, n, 0.6);
    let ball = FeasibleSet::centered_ball(n, 1.5);
    u = ball.euclidean_projection(&u);
    let mut refs = Vec::with_capacity(horizon + 2);
    for _ in 0..horizon + 2 {
        refs.push(u.clone());
        let mut next = dynamics.apply(&u);
        if perturbation > 0.0 {
            for v in next.iter_mut() {
                *v += perturbation * gauss(&mut rng);
            }
            next = ball.euclidean_projection(&next);
        }
        u = next;
    }
    let costs: Vec<CompositeCost> = refs.iter().map(|u| CompositeCost::tracking(u.clone(), lambda)).collect();
    let func_preds: Vec<NonsmoothPart> = (0..horizon)
        .map(|_| {
            if exact_functions {
                NonsmoothPart::L1 { weight: lambda }
            } else {
                NonsmoothPart::L1 {
                    weight: (lambda + rng.random_range(-0.2..0.2)).max(0.0),
                }
            }
        })
        .collect();
    let noises: Vec<Vec<f64>> = (0..=horizon).map(|_| normal_vec(&mut rng, n, grad_noise)).collect();
    let mut predict = |t: usize, y: &[f64]| -> Vec<f64> {
        costs[t - 1]
            .smooth_gradient(y)
            .iter()
            .zip(&noises[t - 1])
            .map(|(g, e)| g + e)
            .collect()
    };
    let y0 = vec![0.0; n];
    run_optdcmd(
        &setup,
        &costs[..horizon],
        &refs[..=horizon],
        &costs[horizon],
        &dynamics,
        &y0,
        schedule,
        None,
        Some(&func_preds),
        &mut predict,
    )
}

/// Fully implicit instance (`s ≡ 0`): `f_t = (w/2)‖x − c_t‖² + λ‖x‖₁` on a box
/// with function predictions whose targets are off by `error` in scale.
/// Returns the outcome against the min-form bound and `τ = C'_T`.
pub fn theorem4_check(seed: u64, horizon: usize, error: f64) -> Result<BoundOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4);
    let half = rng.random_range(0.5..2.0);
    let set = FeasibleSet::unit_box(n, half);
    let setup = MirrorSetup::euclidean(n, set.clone())?;
    let w = rng.random_range(0.2..2.0);
    let lambda = rng.random_range(0.0..0.5);
    let mut centre = normal_vec(&mut rng, n, 0.5 * half);
    let mut costs = Vec::with_capacity(horizon);
    let mut preds = Vec::with_capacity(horizon);
    let mut refs = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        for c in centre.iter_mut() {
            *c += 0.02 * half * gauss(&mut rng);
        }
        refs.push(set.euclidean_projection(&centre));
        if t == horizon {
            break;
        }
        let r = NonsmoothPart::Quadratic {
            cost: QuadraticCost::new(centre.clone(), w)?,
            l1: lambda,
        };
        costs.push(CompositeCost::new(SmoothPart::Zero, r, 1.0, 0.0)?);
        let off: Vec<f64> = centre
            .iter()
            .map(|c| c + error * gauss(&mut rng))
            .collect();
        preds.push(NonsmoothPart::Quadratic {
            cost: QuadraticCost::new(off, w)?,
            l1: lambda,
        });
    }
    let tau_exact: f64 = refs.windows(2).map(|p| setup.primal_norm(&sub(&p[1], &p[0]))).sum();
    let tau = tau_exact.max(1e-6);
    let mut steps = StepSizeState::new(1.0)?.with_tau(tau).with_eta_max(10.0);
    let mut state = AlgorithmState::new(&setup, &setup.center())?;
    let mut regret = 0.0;
    let mut g_sq_sum = 0.0;
    let mut eta_last = 0.0;
    for t in 1..=horizon {
        let cost = &costs[t - 1];
        let bundle = PredictionBundle::new(GradPred::Zero, preds[t - 1].clone());
        let eta = steps.eta(Schedule::Thm4, t)?;
        let rec = optdcmd_step_split(&setup, &mut state, cost, &bundle, &DynamicsModel::Identity, eta, eta)?;
        let ref_step = if t >= 2 { setup.primal_norm(&sub(&refs[t - 1], &refs[t - 2])) } else { 0.0 };
        steps.accumulate(rec.grad_err_sq, rec.delta.abs(), ref_step)?;
        regret += cost.value(&rec.played) - cost.value(&refs[t - 1]);
        g_sq_sum += rec.g_mismatch * rec.g_mismatch;
        eta_last = eta;
    }
    let k = BoundConstants {
        diameter_sq: setup.diameter_sq,
        bregman_lipschitz: setup.bregman_lipschitz,
        tau,
        beta: 1.0,
        ..BoundConstants::default()
    };
    let m = BoundMeasures {
        v_prime: steps.v_prime,
        eta_last,
        g_sq_sum,
        ..BoundMeasures::default()
    };
    Ok(BoundOutcome {
        regret,
        bound: bound_for(Theorem::Four, &k, &m)?,
        d_prime: steps.d_prime,
        v_prime: steps.v_prime,
        c_prime: tau_exact,
    })
}
