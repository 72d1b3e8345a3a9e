//! Property and bound suites shared by the test harness and `verify`
//! command. Each suite reports counts rather than panicking so the caller can
//! render a report.

pub mod oracles;
pub mod theorems;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algorithms::{
    comid_step, omd_step, optcmd_step, optdcmd_step, optmd_step, AlgorithmState, DynamicsModel, GradPred,
    PredictionBundle,
};
use crate::cost::{CompositeCost, SmoothPart};
use crate::error::{Error, Result};
use crate::geometry::MirrorSetup;
use crate::predictors::RlsState;
use crate::prox::{
    composite_prox, composite_prox_detailed, subproblem_objective, FallbackConfig, NonsmoothPart, ProxMethod,
    QuadraticCost,
};
use crate::regret::{RegretLedger, RoundInput};
use crate::stepsize::{log_ratio_sides, sqrt_sum_sides, Schedule};
use crate::vecops::sub;
use oracles::{grid_argmin, normal_vec, random_nonsmooth, random_point, random_setup, NonsmoothKind, SetKind};

pub const SUITES: [&str; 12] = [
    "prox_grid",
    "lemma2",
    "lemma3",
    "lemma4",
    "reduction",
    "thm1",
    "thm2",
    "thm3_5",
    "thm4",
    "stepsize",
    "rls",
    "ledger",
];

const MAX_COUNTEREXAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplies every case count; 1.0 is the full acceptance size.
    pub scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, scale: 1.0 }
    }
}

impl VerifyOptions {
    fn count(&self, full: usize) -> usize {
        ((full as f64 * self.scale).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub description: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest amount by which a checked inequality or tolerance was exceeded;
    /// ≤ 0 when everything holds.
    pub max_violation: f64,
    pub passed: bool,
    pub counterexamples: Vec<String>,
    pub seconds: f64,
}

struct Tally {
    cases: usize,
    violations: usize,
    max_violation: f64,
    counterexamples: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cases: 0,
            violations: 0,
            max_violation: f64::NEG_INFINITY,
            counterexamples: Vec::new(),
        }
    }

    /// Records one case with `excess = lhs − allowed`; positive is a violation.
    fn check(&mut self, excess: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        self.max_violation = self.max_violation.max(excess);
        if excess > 0.0 {
            self.violations += 1;
            if self.counterexamples.len() < MAX_COUNTEREXAMPLES {
                self.counterexamples.push(describe());
            }
        }
    }

    fn fail(&mut self, message: String) {
        self.check(f64::INFINITY, || message);
    }

    fn finish(self, name: &str, description: &str, started: Instant) -> SuiteReport {
        SuiteReport {
            name: name.into(),
            description: description.into(),
            cases: self.cases,
            violations: self.violations,
            max_violation: if self.cases == 0 { 0.0 } else { self.max_violation },
            passed: self.violations == 0 && self.cases > 0,
            counterexamples: self.counterexamples,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

pub type ProxFn<'a> = dyn Fn(&MirrorSetup, &[f64], &NonsmoothPart, f64, &[f64]) -> Result<Vec<f64>> + Sync + 'a;

pub fn run_suite(name: &str, opts: VerifyOptions) -> Result<SuiteReport> {
    match name {
        "prox_grid" => Ok(prox_grid_suite_with(opts.count(200), opts.seed, &composite_prox)),
        "lemma2" => Ok(lemma2_suite(opts.count(1000), opts.seed)),
        "lemma3" => Ok(lemma3_suite(opts.count(10_000), opts.seed)),
        "lemma4" => Ok(lemma4_suite(opts.count(10_000), opts.seed)),
        "reduction" => Ok(reduction_suite(opts.count(20), opts.seed)),
        "thm1" => Ok(theorem1_suite(opts.count(50), opts.seed, horizon(2000, opts.scale))),
        "thm2" => Ok(theorem2_suite(opts.count(50), opts.seed, opts.scale)),
        "thm3_5" => Ok(theorem35_suite(opts.count(20), opts.seed, horizon(1000, opts.scale))),
        "thm4" => Ok(theorem4_suite(opts.count(20), opts.seed, horizon(1000, opts.scale))),
        "stepsize" => Ok(stepsize_suite(opts.count(200), opts.seed)),
        "rls" => Ok(rls_suite(opts.count(200), opts.seed)),
        "ledger" => Ok(ledger_suite(opts.count(200), opts.seed)),
        other => Err(Error::Config(format!(
            "unknown suite {other:?}; known: {}",
            SUITES.join(", ")
        ))),
    }
}

fn horizon(full: usize, scale: f64) -> usize {
    ((full as f64 * scale.min(1.0)).ceil() as usize).max(50)
}

/// Runs every suite whose name contains one of the comma-separated filter
/// terms (all suites for an empty filter).
pub fn run_selected(filter: &str, opts: VerifyOptions) -> Result<Vec<SuiteReport>> {
    let terms: Vec<&str> = filter.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let chosen: Vec<&str> = SUITES
        .iter()
        .copied()
        .filter(|s| terms.is_empty() || terms.iter().any(|t| s.contains(t)))
        .collect();
    if chosen.is_empty() {
        return Err(Error::Config(format!(
            "filter {filter:?} matches no suite; known: {}",
            SUITES.join(", ")
        )));
    }
    chosen.into_iter().map(|s| run_suite(s, opts)).collect()
}

fn combo_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// `prox_fn` against the grid oracle on `cases` instances per (set, r, dim).
pub fn prox_grid_suite_with(cases: usize, seed: u64, prox_fn: &ProxFn<'_>) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut tag = 0;
    for set in SetKind::ALL {
        for r_kind in NonsmoothKind::ALL {
            if !set.supports(r_kind) {
                continue;
            }
            for dim in 1..=2 {
                tag += 1;
                let mut rng = combo_rng(seed, tag);
                for i in 0..cases {
                    let case = (|| -> Result<(f64, String)> {
                        let setup = random_setup(set, dim, &mut rng)?;
                        let w = normal_vec(&mut rng, dim, 1.5);
                        let r = random_nonsmooth(r_kind, dim, &mut rng);
                        let eta = rng.random_range(0.05..2.0);
                        let v = random_point(&setup, &mut rng);
                        let got = prox_fn(&setup, &w, &r, eta, &v)?;
                        let want = grid_argmin(&setup, &w, &r, eta, &v)?;
                        let err = setup.primal_norm(&sub(&got, &want));
                        let f_got = subproblem_objective(&setup, &w, &r, eta, &v, &got)?;
                        let f_grid = subproblem_objective(&setup, &w, &r, eta, &v, &want)?;
                        Ok((
                            err,
                            format!(
                                "{} r={} dim={dim} case={i} w={w:?} eta={eta} v={v:?} r={r:?} set={:?} got={got:?} ({f_got}) grid={want:?} ({f_grid})",
                                set.name(),
                                r_kind.name(),
                                setup.set
                            ),
                        ))
                    })();
                    match case {
                        Ok((err, msg)) => tally.check(err - 2e-3, || format!("{msg} err={err:.3e}")),
                        Err(e) => tally.fail(format!("{} r={} dim={dim} case={i}: {e}", set.name(), r_kind.name())),
                    }
                }
            }
        }
    }
    tally.finish(
        "prox_grid",
        "composite prox matches brute-force grid minimization within 2e-3",
        started,
    )
}

/// Nonsmooth parts solved in closed form or by bisection for `set`.
fn exact_kinds(set: SetKind) -> &'static [NonsmoothKind] {
    match set {
        SetKind::EntropySimplex => &[NonsmoothKind::Zero],
        _ => &[NonsmoothKind::Zero, NonsmoothKind::L1, NonsmoothKind::Quadratic],
    }
}

fn is_exact(method: &ProxMethod) -> bool {
    !matches!(method, ProxMethod::Fallback { .. })
}

/// Nonexpansiveness of the prox in its linear term, on exactly solved
/// subproblems (iterative solutions carry their own tolerance).
pub fn lemma2_suite(cases: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    for (s, set) in SetKind::ALL.into_iter().enumerate() {
        let mut rng = combo_rng(seed, 100 + s as u64);
        let mut done = 0;
        let mut attempts = 0;
        while done < cases && attempts < 20 * cases {
            attempts += 1;
            let dim = rng.random_range(1..=5);
            let kinds = exact_kinds(set);
            let r_kind = kinds[rng.random_range(0..kinds.len())];
            let case = (|| -> Result<Option<(f64, String)>> {
                let setup = random_setup(set, dim, &mut rng)?;
                let r = random_nonsmooth(r_kind, dim, &mut rng);
                let eta = rng.random_range(0.01..3.0);
                let v = random_point(&setup, &mut rng);
                let w1 = normal_vec(&mut rng, dim, 2.0);
                let w2: Vec<f64> = if rng.random::<bool>() {
                    w1.iter().map(|x| x + 0.01 * rng.random_range(-1.0..1.0)).collect()
                } else {
                    normal_vec(&mut rng, dim, 2.0)
                };
                let u1 = composite_prox_detailed(&setup, &w1, &r, eta, &v, FallbackConfig::default())?;
                let u2 = composite_prox_detailed(&setup, &w2, &r, eta, &v, FallbackConfig::default())?;
                if !is_exact(&u1.method) || !is_exact(&u2.method) {
                    return Ok(None);
                }
                let lhs = setup.primal_norm(&sub(&u1.point, &u2.point));
                let rhs = eta * setup.dual_norm(&sub(&w1, &w2))?;
                Ok(Some((lhs - rhs, format!("{} r={r:?} eta={eta} v={v:?} w1={w1:?} w2={w2:?} lhs={lhs} rhs={rhs}", set.name()))))
            })();
            match case {
                Ok(Some((excess, msg))) => {
                    done += 1;
                    tally.check(excess - 1e-10, || msg);
                }
                Ok(None) => {}
                Err(e) => {
                    done += 1;
                    tally.fail(format!("{}: {e}", set.name()));
                }
            }
        }
        if done < cases {
            tally.fail(format!("{}: only {done} exactly solved instances", set.name()));
        }
    }
    tally.finish("lemma2", "prox is η-Lipschitz in the linear term", started)
}

fn nondecreasing<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    let mut acc = if rng.random::<bool>() { 0.0 } else { scale * rng.random::<f64>() };
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < 0.7 {
                acc += scale * rng.random::<f64>();
            }
            acc
        })
        .collect()
}

pub fn lemma3_suite(cases: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 200);
    for i in 0..cases {
        let len = rng.random_range(1..=60);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let a: Vec<f64> = (0..len)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { scale * rng.random::<f64>() })
            .collect();
        let b_scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let b = nondecreasing(&mut rng, len, b_scale);
        let c_scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let c = nondecreasing(&mut rng, len, c_scale);
        match sqrt_sum_sides(&a, &b, &c) {
            Ok((lhs, rhs)) => tally.check(lhs - rhs - 1e-10, || format!("case {i}: a={a:?} b={b:?} c={c:?} lhs={lhs} rhs={rhs}")),
            Err(e) => tally.fail(format!("case {i}: {e}")),
        }
    }
    tally.finish("lemma3", "weighted square-root sum inequality", started)
}

pub fn lemma4_suite(cases: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 300);
    for i in 0..cases {
        let a = 10f64.powf(rng.random_range(-6.0..6.0));
        let b = if rng.random::<f64>() < 0.3 {
            a * (1.0 + rng.random_range(-1e-3..1e-3))
        } else {
            10f64.powf(rng.random_range(-6.0..6.0))
        };
        let (lhs, rhs) = log_ratio_sides(a, b);
        tally.check(lhs - rhs - 1e-10, || format!("case {i}: a={a} b={b} lhs={lhs} rhs={rhs}"));
    }
    tally.finish("lemma4", "1 − b/a ≤ log(a/b) for positive a, b", started)
}

fn random_smooth<R: Rng + ?Sized>(setup: &MirrorSetup, rng: &mut R) -> Result<SmoothPart> {
    let n = setup.dim;
    if setup.is_entropy() {
        return Ok(if rng.random::<bool>() {
            SmoothPart::LogLoss {
                returns: (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
            }
        } else {
            SmoothPart::Linear(normal_vec(rng, n, 1.0))
        });
    }
    Ok(match rng.random_range(0..3) {
        0 => SmoothPart::Linear(normal_vec(rng, n, 1.0)),
        1 => SmoothPart::Quadratic(QuadraticCost::new(normal_vec(rng, n, 1.0), rng.random_range(0.2..2.0))?),
        _ => SmoothPart::DiagQuadratic {
            target: normal_vec(rng, n, 1.0),
            weights: (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
        },
    })
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Trajectory identities over 100 rounds: OptCMD with `r = r̂ = 0` equals
/// OptMD; OptMD with zero predictions plays the OMD iterates; OptDCMD with
/// `Φ = id` equals OptCMD; COMID with `r = 0` equals OMD.
pub fn reduction_suite(trajectories: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 400);
    let rounds = 100;
    for i in 0..trajectories {
        let set = SetKind::ALL[i % SetKind::ALL.len()];
        let result = (|| -> Result<[f64; 4]> {
            let dim = rng.random_range(1..=4);
            let setup = random_setup(set, dim, &mut rng)?;
            let x0 = random_point(&setup, &mut rng);
            let mut worst = [0.0f64; 4];
            let mut s_cmd = AlgorithmState::new(&setup, &x0)?;
            let mut s_md = s_cmd.clone();
            let mut s_md0 = s_cmd.clone();
            let mut s_omd = s_cmd.clone();
            let mut s_comid = s_cmd.clone();
            let mut s_dcmd = s_cmd.clone();
            let mut s_cmd2 = s_cmd.clone();
            let r_kind = if setup.is_entropy() { NonsmoothKind::Quadratic } else { NonsmoothKind::L1 };
            for _ in 0..rounds {
                let eta = rng.random_range(0.05..1.0);
                let smooth = random_smooth(&setup, &mut rng)?;
                let plain = CompositeCost::new(smooth.clone(), NonsmoothPart::Zero, 1.0, 0.0)?;
                let m = normal_vec(&mut rng, dim, 1.0);
                let bundle = PredictionBundle::new(GradPred::Fixed(m), NonsmoothPart::Zero);

                let a = optcmd_step(&setup, &mut s_cmd, &plain, &bundle, eta)?;
                let b = optmd_step(&setup, &mut s_md, &plain, &bundle, eta)?;
                worst[0] = worst[0].max(max_gap(&a.played, &b.played)).max(max_gap(&s_cmd.y_prev, &s_md.y_prev));

                let zero = PredictionBundle::new(GradPred::Zero, NonsmoothPart::Zero);
                let c = optmd_step(&setup, &mut s_md0, &plain, &zero, eta)?;
                let d = omd_step(&setup, &mut s_omd, &plain, eta)?;
                worst[1] = worst[1].max(max_gap(&c.played, &d.played)).max(max_gap(&s_md0.y_prev, &s_omd.x_prev));

                let r = random_nonsmooth(r_kind, dim, &mut rng);
                let composite = CompositeCost::new(smooth, r.clone(), 1.0, 0.0)?;
                let r_hat = random_nonsmooth(r_kind, dim, &mut rng);
                let m2 = normal_vec(&mut rng, dim, 1.0);
                let bundle2 = PredictionBundle::new(GradPred::Fixed(m2), r_hat);
                let e = optdcmd_step(&setup, &mut s_dcmd, &composite, &bundle2, &DynamicsModel::Identity, eta)?;
                let f = optcmd_step(&setup, &mut s_cmd2, &composite, &bundle2, eta)?;
                worst[2] = worst[2].max(max_gap(&e.played, &f.played)).max(max_gap(&s_dcmd.y_prev, &s_cmd2.y_prev));

                comid_step(&setup, &mut s_comid, &plain, eta)?;
                worst[3] = worst[3].max(max_gap(&s_comid.x_prev, &s_omd.x_prev));
            }
            Ok(worst)
        })();
        let labels = ["optcmd->optmd", "optmd->omd", "optdcmd->optcmd", "comid->omd"];
        match result {
            Ok(worst) => {
                for (label, gap) in labels.iter().zip(worst) {
                    tally.check(gap - 1e-10, || format!("trajectory {i} ({}): {label} differs by {gap:.3e}", set.name()));
                }
            }
            Err(e) => tally.fail(format!("trajectory {i} ({}): {e}", set.name())),
        }
    }
    tally.finish("reduction", "reduction identities between algorithm variants to 1e-10", started)
}

pub fn theorem1_suite(instances: usize, seed: u64, horizon: usize) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    for i in 0..instances {
        let s = seed.wrapping_add(1000 + i as u64);
        let noise = [0.0, 0.5, 1.0, 2.0, 4.0][i % 5];
        match theorems::theorem1_check(s, horizon, noise) {
            Ok(o) => tally.check(o.regret - o.bound, || format!("instance seed {s}, noise {noise}: {o:?}")),
            Err(e) => tally.fail(format!("instance seed {s}: {e}")),
        }
    }
    let checkpoints: Vec<usize> = (1..=20).map(|k| k * horizon / 20).filter(|&t| t > 0).collect();
    for i in 0..instances.div_ceil(5) {
        let s = seed.wrapping_add(5000 + i as u64);
        match theorems::theorem1_constant_regret(s, &checkpoints) {
            Ok((worst, constant)) => tally.check(worst - constant, || {
                format!("perfect predictions, seed {s}: regret {worst} exceeds constant {constant}")
            }),
            Err(e) => tally.fail(format!("perfect predictions, seed {s}: {e}")),
        }
    }
    tally.finish("thm1", "convex composite regret bound and constant regret under perfect predictions", started)
}

/// Least-squares slope of `y` on `ln T`.
fn log_slope(curve: &[(usize, f64)]) -> f64 {
    let n = curve.len() as f64;
    let xs: Vec<f64> = curve.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = curve.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(curve).map(|(x, (_, y))| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits `a + c·ln T` on the first half of `curve` and returns, for each later
/// point, `(T, value, allowed)` with allowed = fit + the first half's scatter
/// + 5% of the fitted growth since the first checkpoint.
pub fn log_growth_excess(curve: &[(usize, f64)]) -> Vec<(usize, f64, f64)> {
    let half = curve.len() / 2 + 1;
    let fit = &curve[..half.min(curve.len())];
    let c = log_slope(fit).max(0.0);
    let ln = |t: usize| (t as f64).ln();
    let a = fit.iter().map(|(t, y)| y - c * ln(*t)).sum::<f64>() / fit.len() as f64;
    let scatter = fit.iter().map(|(t, y)| (y - a - c * ln(*t)).abs()).fold(0.0, f64::max);
    let t0 = curve[0].0;
    curve[half.min(curve.len())..]
        .iter()
        .map(|&(t, y)| {
            let growth = c * (ln(t) - ln(t0));
            (t, y, a + c * ln(t) + scatter + 0.05 * growth + 1e-9 * y.abs().max(1.0))
        })
        .collect()
}

pub fn theorem2_suite(instances: usize, seed: u64, scale: f64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let horizon_t = horizon(2000, scale);
    for i in 0..instances {
        let s = seed.wrapping_add(2000 + i as u64);
        let staleness = [0.0, 0.1, 0.3, 0.6, 1.0][i % 5];
        match theorems::theorem2_check(s, horizon_t, staleness) {
            Ok(o) => tally.check(o.regret - o.bound, || format!("instance seed {s}, staleness {staleness}: {o:?}")),
            Err(e) => tally.fail(format!("instance seed {s}: {e}")),
        }
    }
    // growth: mean curve over several stale-prediction runs, fitted as
    // a + c·ln T on the first half of [500, 5000]; the second half may exceed
    // that fit by the first half's scatter plus 5% of the fitted growth. A
    // √T curve overshoots such an extrapolation by roughly 14%.
    let top = horizon(5000, scale).max(500);
    let checkpoints: Vec<usize> = (0..=18).map(|k| 500 + k * (top - 500) / 18).collect();
    let runs = instances.div_ceil(5).max(1);
    let mut mean = vec![0.0; checkpoints.len()];
    let mut ok = true;
    for i in 0..runs {
        let s = seed.wrapping_add(7000 + i as u64);
        match theorems::theorem2_curve(s, 1.0, &checkpoints) {
            Ok(curve) => {
                for (m, (_, r)) in mean.iter_mut().zip(curve) {
                    *m += r / runs as f64;
                }
            }
            Err(e) => {
                ok = false;
                tally.fail(format!("growth run seed {s}: {e}"));
            }
        }
    }
    if ok {
        let curve: Vec<(usize, f64)> = checkpoints.iter().copied().zip(mean).collect();
        for (t, y, allowed) in log_growth_excess(&curve) {
            tally.check(y - allowed, || format!("T={t}: mean regret {y} above extrapolated log fit {allowed}"));
        }
    }
    tally.finish("thm2", "strongly convex regret bound and logarithmic growth", started)
}

pub fn theorem35_suite(instances: usize, seed: u64, horizon: usize) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    for i in 0..instances {
        let s = seed.wrapping_add(3000 + i as u64);
        let perturbation = if i % 2 == 0 { 0.0 } else { 0.05 };
        // Theorem 3 step with inexact function predictions
        match theorems::dynamic_instance_run(s, horizon, perturbation, 0.3, false, Schedule::Thm3) {
            Ok(run) => tally.check(run.regret - run.bound_thm3, || {
                format!("thm3 seed {s} perturbation {perturbation}: regret {} bound {} C'={} V'={}", run.regret, run.bound_thm3, run.c_prime, run.v_prime)
            }),
            Err(e) => tally.fail(format!("thm3 seed {s}: {e}")),
        }
        match theorems::dynamic_instance_run(s, horizon, perturbation, 0.3, true, Schedule::Thm5) {
            Ok(run) => {
                let bound = run.bound_thm5.unwrap_or(f64::NAN);
                tally.check(run.regret - bound, || {
                    format!("thm5 seed {s} perturbation {perturbation}: regret {} bound {bound} C'={}", run.regret, run.c_prime)
                });
                tally.check(run.regret - run.bound_thm3.max(bound), || format!("thm5 seed {s}: bound missing"));
                let cap = 0.5; // 1/(2β) with β = 1
                let mut prev = cap;
                let mut worst = f64::NEG_INFINITY;
                for &eta in &run.etas {
                    worst = worst.max(eta - prev);
                    prev = eta;
                }
                tally.check(worst - 1e-15, || format!("thm5 seed {s}: step size increased by {worst}"));
            }
            Err(e) => tally.fail(format!("thm5 seed {s}: {e}")),
        }
    }
    tally.finish("thm3_5", "dynamic regret bounds and nonincreasing dynamic step sizes", started)
}

pub fn theorem4_suite(instances: usize, seed: u64, horizon: usize) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    for i in 0..instances {
        let s = seed.wrapping_add(4000 + i as u64);
        for error in [0.0, 0.2] {
            match theorems::theorem4_check(s, horizon, error) {
                Ok(o) => {
                    tally.check(o.regret - o.bound, || format!("seed {s} error {error}: {o:?}"));
                    if error == 0.0 {
                        tally.check(o.v_prime - 1e-12, || format!("seed {s}: V' = {} with exact predictions", o.v_prime));
                    }
                }
                Err(e) => tally.fail(format!("seed {s} error {error}: {e}")),
            }
        }
    }
    tally.finish("thm4", "implicit-update dynamic regret bound", started)
}

/// Theorem 1 and 5 step sizes are nonincreasing and capped by `1/(2β)` on
/// random error histories.
pub fn stepsize_suite(cases: usize, seed: u64) -> SuiteReport {
    use crate::stepsize::StepSizeState;
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 500);
    for i in 0..cases {
        let beta = 10f64.powf(rng.random_range(-1.0..1.5));
        let rounds = rng.random_range(3..200);
        for schedule in [Schedule::Thm1, Schedule::Thm5] {
            let mut st = match StepSizeState::new(beta) {
                Ok(s) => s,
                Err(e) => {
                    tally.fail(format!("case {i}: {e}"));
                    continue;
                }
            };
            let mut prev = 0.5 / beta;
            let mut worst = f64::NEG_INFINITY;
            for t in 1..=rounds {
                match st.eta(schedule, t) {
                    Ok(eta) => {
                        worst = worst.max(eta - prev);
                        prev = eta;
                    }
                    Err(e) => {
                        worst = f64::INFINITY;
                        tally.counterexamples.push(format!("case {i}: {e}"));
                        break;
                    }
                }
                let d = if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random_range(0.0..5.0) };
                let v = rng.random_range(0.0..1.0);
                let c = if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random_range(0.0..2.0) };
                let _ = st.accumulate(d, v, c);
            }
            tally.check(worst * beta - 1e-12, || format!("case {i} {schedule:?}: β={beta}, step increased by {worst}"));
        }
    }
    tally.finish("stepsize", "adaptive step sizes are nonincreasing and below 1/(2β)", started)
}

/// Recursive least squares equals batch ridge regression with penalty `1/δ`.
pub fn rls_suite(cases: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 600);
    for i in 0..cases {
        let p = rng.random_range(1..=5);
        let k = rng.random_range(1..=40);
        let delta = 10f64.powf(rng.random_range(-1.0..2.0));
        let mut rls = RlsState::new(p, delta);
        let mut rows = Vec::with_capacity(k * p);
        let mut ys = Vec::with_capacity(k);
        let mut failed = None;
        for _ in 0..k {
            let phi = normal_vec(&mut rng, p, 1.0);
            let y = rng.random_range(-2.0..2.0);
            if let Err(e) = rls.update(&phi, y) {
                failed = Some(e);
                break;
            }
            rows.extend_from_slice(&phi);
            ys.push(y);
        }
        if let Some(e) = failed {
            tally.fail(format!("case {i}: {e}"));
            continue;
        }
        let x = DMatrix::from_row_slice(k, p, &rows);
        let gram = x.transpose() * &x + DMatrix::identity(p, p) / delta;
        let rhs = x.transpose() * DVector::from_vec(ys);
        match gram.cholesky() {
            Some(ch) => {
                let w = ch.solve(&rhs);
                let err = (&rls.weights - &w).amax() / w.amax().max(1.0);
                tally.check(err - 1e-8, || format!("case {i}: p={p} k={k} δ={delta}, relative error {err:.3e}"));
            }
            None => tally.fail(format!("case {i}: ridge system not positive definite")),
        }
    }
    tally.finish("rls", "recursive least squares matches batch ridge to 1e-8", started)
}

/// Cumulative static and dynamic regret equal the sums of per-round terms.
pub fn ledger_suite(cases: usize, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let mut tally = Tally::new();
    let mut rng = combo_rng(seed, 700);
    for i in 0..cases {
        let mut ledger = RegretLedger::new();
        let rounds = rng.random_range(1..100);
        let mut ok = true;
        for _ in 0..rounds {
            let input = RoundInput {
                played: normal_vec(&mut rng, 2, 1.0),
                loss: rng.random_range(-5.0..5.0),
                comparator_loss: Some(rng.random_range(-5.0..5.0)),
                grad_err_sq: rng.random_range(0.0..3.0),
                delta_abs: rng.random_range(0.0..1.0),
                ref_step: rng.random_range(0.0..1.0),
                eta: rng.random_range(0.01..1.0),
            };
            ok &= ledger.push(input).is_ok();
        }
        let statics: Vec<f64> = (0..rounds).map(|_| rng.random_range(-5.0..5.0)).collect();
        ok &= ledger.set_static_comparator(&statics).is_ok();
        let holds = ok && ledger.resummation_holds();
        tally.check(if holds { -1.0 } else { 1.0 }, || format!("case {i}: resummation failed over {rounds} rounds"));
    }
    tally.finish("ledger", "regret ledgers resum to their per-round terms", started)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(f: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        (0..=18).map(|k| 500 + k * 250).map(|t| (t, f(t as f64))).collect()
    }

    #[test]
    fn growth_check_accepts_log_and_rejects_sqrt() {
        let ok = log_growth_excess(&curve(|t| 3.0 + 20.0 * t.ln()));
        assert!(ok.iter().all(|(_, y, allowed)| y <= allowed));
        let bad = log_growth_excess(&curve(|t| 2.0 * t.sqrt()));
        assert!(bad.iter().any(|(_, y, allowed)| y > allowed));
    }

    #[test]
    fn selection_filter() {
        let opts = VerifyOptions { seed: 1, scale: 0.01 };
        let reports = run_selected("lemma2", opts).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].name, "lemma2");
        assert!(run_selected("nonexistent", opts).is_err());
    }

    #[test]
    fn mutated_soft_threshold_is_caught() {
        let wrong = |s: &MirrorSetup, w: &[f64], r: &NonsmoothPart, eta: f64, v: &[f64]| match r {
            NonsmoothPart::L1 { weight } => composite_prox(s, w, &NonsmoothPart::L1 { weight: 2.0 * weight }, eta, v),
            _ => composite_prox(s, w, r, eta, v),
        };
        let report = prox_grid_suite_with(10, 3, &wrong);
        assert!(!report.passed);
        assert!(report.counterexamples.iter().any(|c| c.contains("r=l1")));
    }
}
