//! Experiment harnesses: parameter tracking with dynamics and online
//! portfolio selection, plus market data handling and result export.

pub mod market;
pub mod portfolio;
pub mod tracking;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::regret::{csv_err, fmt_g12, row_fields, RegretLedger, LEDGER_COLUMNS};

pub use market::{ingest_dataset, parse_dataset, synth_market, MarketDataset, MarketLaw};
pub use portfolio::{run_portfolio, PortfolioConfig, PortfolioResult};
pub use tracking::{run_tracking, TrackingConfig, TrackingResult};

/// Independent stream per repetition of one master seed.
pub fn repetition_rng(seed: u64, repetition: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(repetition as u64);
    rng
}

/// Per-round mean and sample standard deviation over repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub model_id: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Curve {
    /// `series[rep][t]`; all series share one length.
    pub fn from_series(model_id: impl Into<String>, series: &[Vec<f64>]) -> Self {
        let len = series.first().map_or(0, Vec::len);
        let n = series.len() as f64;
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for t in 0..len {
            let m = series.iter().map(|s| s[t]).sum::<f64>() / n;
            mean[t] = m;
            if series.len() > 1 {
                let ss: f64 = series.iter().map(|s| (s[t] - m).powi(2)).sum();
                std[t] = (ss / (n - 1.0)).sqrt();
            }
        }
        Curve {
            model_id: model_id.into(),
            mean,
            std,
        }
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }
}

/// Running difference of two cumulative series, `a − b` per round.
pub fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Ledgers of one (algorithm, predictor) pair across repetitions.
#[derive(Debug, Clone)]
pub struct RunLedgers {
    pub algorithm: String,
    pub model_id: String,
    pub ledgers: Vec<RegretLedger>,
}

impl RunLedgers {
    pub fn file_stem(&self) -> String {
        let safe: String = self
            .model_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let safe = safe.trim_end_matches('_');
        if safe == self.algorithm {
            return safe.to_string();
        }
        format!("{}_{}", self.algorithm, safe)
    }

    /// Ledger schema followed by `repetition, model_id`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<&str> = LEDGER_COLUMNS.to_vec();
        header.extend(["repetition", "model_id"]);
        w.write_record(&header).map_err(csv_err)?;
        for (rep, ledger) in self.ledgers.iter().enumerate() {
            for row in &ledger.rows {
                let mut rec: Vec<String> = row_fields(row).to_vec();
                rec.push(rep.to_string());
                rec.push(self.model_id.clone());
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `t, mean, std` for one curve.
pub fn write_curve_csv(curve: &Curve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "mean", "std", "model_id"]).map_err(csv_err)?;
    for (i, (m, s)) in curve.mean.iter().zip(&curve.std).enumerate() {
        w.write_record([(i + 1).to_string(), fmt_g12(*m), fmt_g12(*s), curve.model_id.clone()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Tidy long format: `experiment, comparison, model_id, t, mean, std`.
pub fn write_plot_data(experiment: &str, groups: &[(&str, &[Curve])], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["experiment", "comparison", "model_id", "t", "mean", "std"])
        .map_err(csv_err)?;
    for (comparison, curves) in groups {
        for c in curves.iter() {
            for (i, (m, s)) in c.mean.iter().zip(&c.std).enumerate() {
                w.write_record([
                    experiment.to_string(),
                    comparison.to_string(),
                    c.model_id.clone(),
                    (i + 1).to_string(),
                    fmt_g12(*m),
                    fmt_g12(*s),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
