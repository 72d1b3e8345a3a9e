//! Config file schema, `--set` overrides and conversion to library configs.
//!
//! Every section has defaults, so an empty file (or none) is a valid config.

use std::path::Path;

use optcmd::experiments::{MarketLaw, PortfolioConfig, TrackingConfig};
use optcmd::predictors::{ReturnModel, TrackingModel};
use optcmd::verify::VerifyOptions;
use optcmd::Schedule;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub track: TrackSection,
    pub portfolio: PortfolioSection,
    pub market: MarketSection,
    pub verify: VerifySection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub models: Vec<String>,
    pub schedule: String,
    /// 0 reuses the x-update step.
    pub eta_y: f64,
    pub dmd_eta: f64,
    pub l1_weight: f64,
    pub noise_high: f64,
    pub noise_low: f64,
    pub cov_jitter: f64,
    pub prediction_noise_std: f64,
    /// 0 is the whole space.
    pub box_half_width: f64,
    pub a: Vec<Vec<f64>>,
    /// Empty hands the player the true dynamics.
    pub model_a: Vec<Vec<f64>>,
    pub u1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Default for TrackSection {
    fn default() -> Self {
        let d = TrackingConfig::default();
        TrackSection {
            horizon: d.horizon,
            repetitions: d.repetitions,
            seed: d.seed,
            models: d.models.iter().map(|m| m.id().to_string()).collect(),
            schedule: d.schedule.id(),
            eta_y: d.eta_y.unwrap_or(0.0),
            dmd_eta: d.dmd_eta,
            l1_weight: d.l1_weight,
            noise_high: d.noise_high,
            noise_low: d.noise_low,
            cov_jitter: d.cov_jitter,
            prediction_noise_std: d.prediction_noise_std,
            box_half_width: d.box_half_width.unwrap_or(0.0),
            a: d.a,
            model_a: d.model_a.unwrap_or_default(),
            u1: d.u1,
            y0: d.y0,
        }
    }
}

impl TrackSection {
    pub fn to_config(&self) -> Result<TrackingConfig, CliError> {
        let models = self
            .models
            .iter()
            .map(|m| TrackingModel::parse(m))
            .collect::<optcmd::Result<Vec<_>>>()?;
        let config = TrackingConfig {
            horizon: self.horizon,
            repetitions: self.repetitions,
            seed: self.seed,
            a: self.a.clone(),
            model_a: (!self.model_a.is_empty()).then(|| self.model_a.clone()),
            noise_high: self.noise_high,
            noise_low: self.noise_low,
            cov_jitter: self.cov_jitter,
            l1_weight: self.l1_weight,
            u1: self.u1.clone(),
            y0: self.y0.clone(),
            models,
            prediction_noise_std: self.prediction_noise_std,
            schedule: Schedule::parse(&self.schedule)?,
            eta_y: (self.eta_y != 0.0).then_some(self.eta_y),
            dmd_eta: self.dmd_eta,
            box_half_width: (self.box_half_width != 0.0).then_some(self.box_half_width),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortfolioSection {
    pub beta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub models: Vec<String>,
    pub rls_delta: f64,
    pub noise_std: f64,
    pub clip: bool,
    /// Empty generates a market from `[market]`.
    pub dataset: String,
}

impl Default for PortfolioSection {
    fn default() -> Self {
        let d = PortfolioConfig::default();
        PortfolioSection {
            beta: d.beta,
            r_min: d.r_min,
            r_max: d.r_max,
            repetitions: d.repetitions,
            seed: d.seed,
            models: d.models.iter().map(ReturnModel::id).collect(),
            rls_delta: d.rls_delta,
            noise_std: d.noise_std,
            clip: d.clip,
            dataset: String::new(),
        }
    }
}

impl PortfolioSection {
    pub fn to_config(&self) -> Result<PortfolioConfig, CliError> {
        let models = self
            .models
            .iter()
            .map(|m| ReturnModel::parse(m))
            .collect::<optcmd::Result<Vec<_>>>()?;
        let config = PortfolioConfig {
            beta: self.beta,
            r_min: self.r_min,
            r_max: self.r_max,
            repetitions: self.repetitions,
            seed: self.seed,
            models,
            rls_delta: self.rls_delta,
            noise_std: self.noise_std,
            clip: self.clip,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Synthetic market used when no dataset is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    pub assets: usize,
    pub horizon: usize,
    pub seed: u64,
    pub mean_log: f64,
    pub drift_spread: f64,
    pub phi: f64,
    pub noise: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        let law = MarketLaw::default();
        MarketSection {
            assets: 10,
            horizon: 1000,
            seed: 0,
            mean_log: law.mean_log,
            drift_spread: law.drift_spread,
            phi: law.phi,
            noise: law.noise,
        }
    }
}

impl MarketSection {
    /// Returns are clipped to the portfolio's bounds.
    pub fn law(&self, portfolio: &PortfolioSection) -> MarketLaw {
        MarketLaw {
            mean_log: self.mean_log,
            drift_spread: self.drift_spread,
            phi: self.phi,
            noise: self.noise,
            r_min: portfolio.r_min,
            r_max: portfolio.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Comma-separated substrings of suite names; empty runs all.
    pub suites: String,
    pub seed: u64,
    pub scale: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = VerifyOptions::default();
        VerifySection {
            suites: String::new(),
            seed: d.seed,
            scale: d.scale,
        }
    }
}

impl VerifySection {
    pub fn options(&self) -> Result<VerifyOptions, CliError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CliError::Config(format!("verify.scale must be positive, got {}", self.scale)));
        }
        Ok(VerifyOptions {
            seed: self.seed,
            scale: self.scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub rounds: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            rounds: 2000,
            dim: 4,
            seed: 0,
        }
    }
}

/// Reads a TOML config, or the `config` object of a run manifest when the path
/// ends in `.json`, then applies `--set` overrides. A bare key belongs to
/// `default_section`.
pub fn load(path: Option<&Path>, overrides: &[String], default_section: &str) -> Result<FileConfig, CliError> {
    let mut table = match path {
        None => toml::Table::new(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            if p.extension().is_some_and(|e| e == "json") {
                let manifest: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let config = manifest
                    .get("config")
                    .ok_or_else(|| CliError::Config(format!("{}: no config object", p.display())))?;
                toml::Table::deserialize(config).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            } else {
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        }
    };
    for o in overrides {
        apply_override(&mut table, o, default_section)?;
    }
    FileConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
}

fn apply_override(table: &mut toml::Table, arg: &str, default_section: &str) -> Result<(), CliError> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {arg:?} is not KEY=VALUE")))?;
    let key = key.trim();
    let (section, field) = key.split_once('.').unwrap_or((default_section, key));
    if section.is_empty() || field.is_empty() || field.contains('.') {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let value = parse_value(raw.trim());
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("{section} is not a section"))),
    }
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = FileConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: FileConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(c.track.to_config().is_ok());
        assert!(c.portfolio.to_config().is_ok());
    }

    #[test]
    fn overrides_target_sections() {
        let sets = ["horizon=50".to_string(), "portfolio.models=[\"previous\"]".to_string(), "track.schedule=thm5".into()];
        let c = load(None, &sets, "track").unwrap();
        assert_eq!(c.track.horizon, 50);
        assert_eq!(c.track.schedule, "thm5");
        assert_eq!(c.portfolio.models, ["previous"]);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        for bad in ["track.nope=1", "nosection.x=1", "noequals", "horizon=\"ten\""] {
            assert!(matches!(load(None, &[bad.to_string()], "track"), Err(CliError::Config(_))), "{bad}");
        }
    }
}
