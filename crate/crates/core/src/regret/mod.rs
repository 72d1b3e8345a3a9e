//! Regret accounting, regularity measures and bound expressions.

pub mod offline;

use std::io::Write;

use crate::algorithms::DynamicsModel;
use crate::cost::CompositeCost;
use crate::error::{Error, Result};
use crate::geometry::MirrorSetup;
use crate::vecops::sub;

pub use offline::{minimize_average, OfflineConfig, OfflineSolution};

/// Ledger CSV columns, in order.
pub const LEDGER_COLUMNS: [&str; 9] = [
    "t",
    "loss",
    "comparator_loss",
    "reg_s",
    "reg_d",
    "d_prime",
    "v_prime",
    "c_prime",
    "eta",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RoundInput {
    pub played: Vec<f64>,
    pub loss: f64,
    /// `f_t(u_t)` for a dynamic comparator, if one exists.
    pub comparator_loss: Option<f64>,
    pub grad_err_sq: f64,
    pub delta_abs: f64,
    pub ref_step: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: usize,
    pub loss: f64,
    /// NaN when no dynamic comparator is recorded.
    pub comparator_loss: f64,
    /// Against the best fixed action of the whole horizon; NaN until set.
    pub reg_s: f64,
    pub reg_d: f64,
    pub d_prime: f64,
    pub v_prime: f64,
    pub c_prime: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    pub rows: Vec<LedgerRow>,
    pub played: Vec<Vec<f64>>,
    grad_err_sq: Vec<f64>,
    delta_abs: Vec<f64>,
    ref_step: Vec<f64>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, input: RoundInput) -> Result<()> {
        for v in [input.grad_err_sq, input.delta_abs, input.ref_step] {
            if !(v >= 0.0) {
                return Err(Error::NegativeInput(v));
            }
        }
        let prev = self.rows.last().copied();
        let cmp = input.comparator_loss.unwrap_or(f64::NAN);
        let row = LedgerRow {
            t: self.rows.len() + 1,
            loss: input.loss,
            comparator_loss: cmp,
            reg_s: f64::NAN,
            reg_d: prev.map_or(0.0, |p| p.reg_d) + (input.loss - cmp),
            d_prime: prev.map_or(0.0, |p| p.d_prime) + input.grad_err_sq,
            v_prime: prev.map_or(0.0, |p| p.v_prime) + input.delta_abs,
            c_prime: prev.map_or(0.0, |p| p.c_prime) + input.ref_step,
            eta: input.eta,
        };
        self.rows.push(row);
        self.played.push(input.played);
        self.grad_err_sq.push(input.grad_err_sq);
        self.delta_abs.push(input.delta_abs);
        self.ref_step.push(input.ref_step);
        Ok(())
    }

    /// Fills `reg_s` from per-round losses of a fixed comparator.
    pub fn set_static_comparator(&mut self, comparator_losses: &[f64]) -> Result<()> {
        if comparator_losses.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                left: self.rows.len(),
                right: comparator_losses.len(),
            });
        }
        let mut acc = 0.0;
        for (row, c) in self.rows.iter_mut().zip(comparator_losses) {
            acc += row.loss - c;
            row.reg_s = acc;
        }
        Ok(())
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.rows.iter().map(|r| r.loss).sum()
    }

    pub fn last(&self) -> Option<&LedgerRow> {
        self.rows.last()
    }

    /// Cumulative fields equal a fresh re-summation of the per-round inputs.
    pub fn resummation_holds(&self) -> bool {
        let (mut d, mut v, mut c, mut reg) = (0.0, 0.0, 0.0, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            d += self.grad_err_sq[i];
            v += self.delta_abs[i];
            c += self.ref_step[i];
            reg += row.loss - row.comparator_loss;
            let reg_ok = (reg.is_nan() && row.reg_d.is_nan()) || reg == row.reg_d;
            if d != row.d_prime || v != row.v_prime || c != row.c_prime || !reg_ok {
                return false;
            }
        }
        true
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LEDGER_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(row_fields(r)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn row_fields(r: &LedgerRow) -> [String; 9] {
    [
        r.t.to_string(),
        fmt_g12(r.loss),
        fmt_g12(r.comparator_loss),
        fmt_g12(r.reg_s),
        fmt_g12(r.reg_d),
        fmt_g12(r.d_prime),
        fmt_g12(r.v_prime),
        fmt_g12(r.c_prime),
        fmt_g12(r.eta),
    ]
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros removed.
pub fn fmt_g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticRegret {
    /// Regret against the returned comparator (a lower bound on the true value).
    pub value: f64,
    pub lower: f64,
    /// `lower + T·gap`.
    pub upper: f64,
    pub minimizer: Vec<f64>,
    /// Certified gap of the average objective.
    pub gap: f64,
    pub comparator_losses: Vec<f64>,
}

/// `Σ f_t(x_t) − min_x Σ f_t(x)` with a certified bracket.
pub fn static_regret(losses: &[f64], costs: &[CompositeCost], setup: &MirrorSetup) -> Result<StaticRegret> {
    static_regret_with(losses, costs, setup, OfflineConfig::default())
}

pub fn static_regret_with(
    losses: &[f64],
    costs: &[CompositeCost],
    setup: &MirrorSetup,
    config: OfflineConfig,
) -> Result<StaticRegret> {
    if losses.len() != costs.len() {
        return Err(Error::LengthMismatch {
            left: losses.len(),
            right: costs.len(),
        });
    }
    let sol = minimize_average(setup, costs, config)?;
    let comparator_losses: Vec<f64> = costs.iter().map(|c| c.value(&sol.point)).collect();
    let lower = losses.iter().sum::<f64>() - comparator_losses.iter().sum::<f64>();
    let upper = lower + costs.len() as f64 * sol.gap;
    if !sol.converged {
        return Err(Error::SolverFailure {
            lower,
            upper,
            gap: sol.gap,
        });
    }
    Ok(StaticRegret {
        value: lower,
        lower,
        upper,
        minimizer: sol.point,
        gap: sol.gap,
        comparator_losses,
    })
}

/// `Σ f_t(x_t) − Σ f_t(u_t)`.
pub fn dynamic_regret(losses: &[f64], comparator_losses: &[f64]) -> Result<f64> {
    if losses.len() != comparator_losses.len() {
        return Err(Error::LengthMismatch {
            left: losses.len(),
            right: comparator_losses.len(),
        });
    }
    Ok(losses.iter().zip(comparator_losses).map(|(a, b)| a - b).sum())
}

/// `(C_T, C'_T)` in the setup's primal norm; without dynamics both coincide.
pub fn path_length(setup: &MirrorSetup, refs: &[Vec<f64>], dynamics: Option<&DynamicsModel>) -> (f64, f64) {
    let mut c = 0.0;
    let mut c_prime = 0.0;
    for pair in refs.windows(2) {
        let step = setup.primal_norm(&sub(&pair[1], &pair[0]));
        c += step;
        c_prime += match dynamics {
            Some(phi) => setup.primal_norm(&sub(&pair[1], &phi.apply(&pair[0]))),
            None => step,
        };
    }
    (c, c_prime)
}

/// `(D_T, D'_T)`: squared dual-norm errors of the predictions `m_t`
/// (evaluated at `y_{t−1}`) against `∇s_t(x_t)` and `∇s_t(y_{t−1})`.
pub fn gradient_error_measures(
    setup: &MirrorSetup,
    played: &[Vec<f64>],
    y_prev: &[Vec<f64>],
    costs: &[CompositeCost],
    predictions: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let t = costs.len();
    for len in [played.len(), y_prev.len(), predictions.len()] {
        if len != t {
            return Err(Error::LengthMismatch { left: t, right: len });
        }
    }
    let mut d = 0.0;
    let mut d_prime = 0.0;
    for i in 0..t {
        d += setup.dual_norm(&sub(&costs[i].smooth_gradient(&played[i]), &predictions[i]))?.powi(2);
        d_prime += setup.dual_norm(&sub(&costs[i].smooth_gradient(&y_prev[i]), &predictions[i]))?.powi(2);
    }
    Ok((d, d_prime))
}

/// Sampled estimate (a lower bound) of `Σ_t max_x |f_t(x) − f_{t−1}(x)|`.
pub fn temporal_variability(costs: &[CompositeCost], samples: &[Vec<f64>]) -> f64 {
    costs
        .windows(2)
        .map(|w| {
            samples
                .iter()
                .map(|x| (w[1].value(x) - w[0].value(x)).abs())
                .fold(0.0, f64::max)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    One,
    Two,
    Three,
    Four,
    Five,
}

impl Theorem {
    pub fn parse(id: &str) -> Result<Self> {
        match id.trim().to_ascii_lowercase().as_str() {
            "1" | "thm1" => Ok(Theorem::One),
            "2" | "thm2" => Ok(Theorem::Two),
            "3" | "thm3" => Ok(Theorem::Three),
            "4" | "thm4" => Ok(Theorem::Four),
            "5" | "thm5" => Ok(Theorem::Five),
            _ => Err(Error::UnknownTheorem(id.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundConstants {
    pub beta: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// R²
    pub diameter_sq: f64,
    /// γ
    pub bregman_lipschitz: f64,
    /// τ ≥ C'_T
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundMeasures {
    pub d_prime: f64,
    pub v_prime: f64,
    pub c_prime: f64,
    pub eta_first: f64,
    /// η_T
    pub eta_last: f64,
    /// θ_{T+2}
    pub theta_lookahead: f64,
    /// D'_{T+1}
    pub d_prime_next: f64,
    /// Σ G_t²
    pub g_sq_sum: f64,
}

pub fn bound_expression(theorem_id: &str, k: &BoundConstants, m: &BoundMeasures) -> Result<f64> {
    bound_for(Theorem::parse(theorem_id)?, k, m)
}

pub fn bound_for(theorem: Theorem, k: &BoundConstants, m: &BoundMeasures) -> Result<f64> {
    let r2 = k.diameter_sq;
    let b = k.beta;
    let tail = m.v_prime + (4.0 * b * b + m.d_prime).sqrt();
    Ok(match theorem {
        Theorem::One => (5.0 + 1.5 * r2) * tail,
        Theorem::Two => {
            let lambda = k.alpha / 2.0;
            if !(lambda > 0.0) {
                return Err(Error::Config("strongly convex bound needs alpha > 0".into()));
            }
            let s2 = k.sigma * k.sigma;
            let log_term = if s2 > 0.0 {
                (2.0 * s2 / lambda) * (lambda * m.d_prime / (2.0 * b * s2)).ln_1p()
            } else {
                0.0
            };
            2.0 * b * r2 + s2 / b + log_term
        }
        Theorem::Three => (5.0 + 1.5 * r2 + k.bregman_lipschitz * m.c_prime) * tail,
        Theorem::Four => {
            if !(k.tau > 0.0) || !(m.eta_last > 0.0) {
                return Err(Error::Config("implicit bound needs tau > 0 and eta_T > 0".into()));
            }
            let g = k.bregman_lipschitz;
            let head = (r2 + g * k.tau) / m.eta_last;
            let direct = head + m.v_prime;
            let c = r2 / k.tau + g + 1.0;
            // the G-branch absorbs head into c·V'_T, which needs 1/η_T ≤ V'_T/τ
            let slack = (head - (r2 / k.tau + g) * m.v_prime).max(0.0);
            let via_g = slack + c * (2.0 * r2 + 2.0 * k.tau * c).sqrt() * m.g_sq_sum.sqrt();
            direct.min(via_g)
        }
        Theorem::Five => {
            if !(m.eta_first > 0.0) || !(m.eta_last > 0.0) {
                return Err(Error::Config("bound needs positive step sizes".into()));
            }
            let g = k.bregman_lipschitz;
            2.0 * g * r2 / m.eta_first
                + 1.5 * r2 / m.eta_last
                + (4.0 + 2.0 * g) * ((m.theta_lookahead + m.d_prime_next) * (1.0 + m.c_prime)).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FeasibleSet;
    use approx::assert_abs_diff_eq;

    #[test]
    fn g12_formatting() {
        assert_eq!(fmt_g12(0.0), "0");
        assert_eq!(fmt_g12(1.0), "1");
        assert_eq!(fmt_g12(0.1), "0.1");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(-2.5e-7), "-2.5e-07");
        assert_eq!(fmt_g12(123456789012.0), "123456789012");
        assert_eq!(fmt_g12(1234567890123.0), "1.23456789012e+12");
        assert_eq!(fmt_g12(0.0001), "0.0001");
        assert_eq!(fmt_g12(f64::NAN), "nan");
        assert_eq!(fmt_g12(999999999999.9), "1e+12");
    }

    #[test]
    fn bound_examples() {
        let k = BoundConstants {
            beta: 1.0,
            diameter_sq: 1.0,
            ..Default::default()
        };
        let zero = BoundMeasures::default();
        assert_abs_diff_eq!(bound_expression("thm1", &k, &zero).unwrap(), 13.0, epsilon = 1e-12);
        let m = BoundMeasures {
            d_prime: 96.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(bound_expression("1", &k, &m).unwrap(), 65.0, epsilon = 1e-12);
        let k2 = BoundConstants {
            alpha: 2.0,
            sigma: 0.5,
            ..k
        };
        assert_abs_diff_eq!(bound_expression("thm2", &k2, &zero).unwrap(), 2.0 + 0.25, epsilon = 1e-12);
        assert!(matches!(bound_expression("thm7", &k, &zero), Err(Error::UnknownTheorem(_))));
    }

    #[test]
    fn dynamic_regret_and_paths() {
        assert_eq!(dynamic_regret(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(dynamic_regret(&[1.0], &[]).is_err());
        let s = MirrorSetup::euclidean(1, FeasibleSet::WholeSpace).unwrap();
        let refs: Vec<Vec<f64>> = (1..=5).map(|t| vec![t as f64]).collect();
        let (c, cp) = path_length(&s, &refs, Some(&DynamicsModel::Shift(vec![1.0])));
        assert_eq!((c, cp), (4.0, 0.0));
        assert_eq!(path_length(&s, &refs, None), (4.0, 4.0));
    }

    #[test]
    fn static_regret_closed_form() {
        let s = MirrorSetup::euclidean(1, FeasibleSet::unit_box(1, 1.0)).unwrap();
        let t = 8;
        let costs: Vec<_> = (1..=t)
            .map(|k| CompositeCost::tracking(vec![k as f64 / t as f64], 0.0))
            .collect();
        let losses: Vec<f64> = costs.iter().map(|c| c.value(&[0.0])).collect();
        let sr = static_regret(&losses, &costs, &s).unwrap();
        // x* = (T+1)/(2T); regret = (T/2)·x*²
        let xs = (t + 1) as f64 / (2 * t) as f64;
        assert_abs_diff_eq!(sr.value, 0.5 * t as f64 * xs * xs, epsilon = 1e-8);
        assert!(sr.lower <= sr.upper);
    }

    #[test]
    fn ledger_resums_and_exports() {
        let mut l = RegretLedger::new();
        for t in 0..5 {
            l.push(RoundInput {
                played: vec![t as f64],
                loss: 0.1 * t as f64,
                comparator_loss: Some(0.05),
                grad_err_sq: 0.3,
                delta_abs: 0.0,
                ref_step: 0.7,
                eta: 0.5,
            })
            .unwrap();
        }
        assert!(l.resummation_holds());
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,loss,comparator_loss,reg_s,reg_d,d_prime,v_prime,c_prime,eta\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
