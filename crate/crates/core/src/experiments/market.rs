//! Market datasets of price relatives: CSV ingestion and a synthetic
//! AR(1)-in-log generator.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    pub name: String,
    pub assets: Vec<String>,
    /// `returns[t][i]`, strictly positive.
    pub returns: Vec<Vec<f64>>,
}

impl MarketDataset {
    pub fn new(name: impl Into<String>, assets: Vec<String>, returns: Vec<Vec<f64>>) -> Result<Self> {
        let n = assets.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no assets".into()));
        }
        for (t, row) in returns.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!("round {} has {} entries, expected {n}", t + 1, row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::Validation(format!("round {} has non-positive entry {v}", t + 1)));
            }
        }
        Ok(MarketDataset {
            name: name.into(),
            assets,
            returns,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn horizon(&self) -> usize {
        self.returns.len()
    }

    /// Entries outside `[r_min, r_max]`.
    pub fn count_outside(&self, r_min: f64, r_max: f64) -> usize {
        self.returns.iter().flatten().filter(|v| **v < r_min || **v > r_max).count()
    }

    /// Clips in place and returns the number of entries changed.
    pub fn clip(&mut self, r_min: f64, r_max: f64) -> usize {
        let mut count = 0;
        for v in self.returns.iter_mut().flatten() {
            let c = v.clamp(r_min, r_max);
            if c != *v {
                count += 1;
                *v = c;
            }
        }
        count
    }
}

/// Header `asset_1,…,asset_n`, then one round of price relatives per line.
pub fn parse_dataset(name: &str, text: &str) -> Result<MarketDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let assets: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if assets.is_empty() || assets.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    let mut returns = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != assets.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", assets.len(), record.len()),
            });
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Validation(format!("line {line}: entry {v} is not strictly positive")));
        }
        returns.push(row);
    }
    if returns.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows after the header".into(),
        });
    }
    MarketDataset::new(name, assets, returns)
}

pub fn ingest_dataset(path: &Path) -> Result<MarketDataset> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_dataset(&name, &text)
}

/// `z_t = m + φ(z_{t−1} − m) + s·ε_t` per asset with `r_t = exp(z_t)` clipped
/// to `[r_min, r_max]`. Asset means `m_i` are drawn once from
/// `N(mean_log, drift_spread²)`; `z_0 = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketLaw {
    pub mean_log: f64,
    pub drift_spread: f64,
    pub phi: f64,
    pub noise: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for MarketLaw {
    fn default() -> Self {
        MarketLaw {
            mean_log: 0.0,
            drift_spread: 0.002,
            phi: 0.0,
            noise: 0.05,
            r_min: 0.5,
            r_max: 1.5,
        }
    }
}

impl MarketLaw {
    fn validate(&self) -> Result<()> {
        let finite = [self.mean_log, self.drift_spread, self.phi, self.noise]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.drift_spread < 0.0 || self.noise < 0.0 {
            return Err(Error::Config("market law needs finite, non-negative spreads".into()));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::Config("market AR(1) coefficient must satisfy |phi| < 1".into()));
        }
        if !(self.r_min > 0.0 && self.r_min <= 1.0 && self.r_max >= 1.0 && self.r_max.is_finite()) {
            return Err(Error::Config("need 0 < r_min <= 1 <= r_max".into()));
        }
        Ok(())
    }
}

pub fn synth_market<R: Rng + ?Sized>(n: usize, horizon: usize, law: &MarketLaw, rng: &mut R) -> Result<MarketDataset> {
    law.validate()?;
    if n == 0 || horizon == 0 {
        return Err(Error::Config("synthetic market needs n >= 1 and T >= 1".into()));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let means: Vec<f64> = (0..n)
        .map(|_| law.mean_log + law.drift_spread * std_normal.sample(rng))
        .collect();
    let mut z = means.clone();
    let mut returns = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let row: Vec<f64> = (0..n)
            .map(|i| {
                z[i] = means[i] + law.phi * (z[i] - means[i]) + law.noise * std_normal.sample(rng);
                z[i].exp().clamp(law.r_min, law.r_max)
            })
            .collect();
        returns.push(row);
    }
    let assets = (1..=n).map(|i| format!("asset_{i}")).collect();
    MarketDataset::new(format!("synthetic_{n}x{horizon}"), assets, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_small_file() {
        let d = parse_dataset("x", "asset_1,asset_2\n1.0,1.1\n0.9,1.2\n1.05,0.95\n").unwrap();
        assert_eq!(d.horizon(), 3);
        assert_eq!(d.n_assets(), 2);
        assert_eq!(d.returns[2], vec![1.05, 0.95]);
    }

    #[test]
    fn rejects_zero_and_header_only() {
        assert!(matches!(parse_dataset("x", "a,b\n1.0,0\n"), Err(Error::Validation(_))));
        assert!(matches!(parse_dataset("x", "a,b\n"), Err(Error::Parse { .. })));
        match parse_dataset("x", "a,b\n1.0,1.0\n1.0,abc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_dataset("x", "a,b\n1.0,1.0\n1.0\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn synthetic_is_reproducible_and_bounded() {
        let law = MarketLaw {
            noise: 0.5,
            ..MarketLaw::default()
        };
        let a = synth_market(4, 300, &law, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = synth_market(4, 300, &law, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.returns.iter().flatten().all(|v| (0.5..=1.5).contains(v)));
        let flat = MarketLaw {
            noise: 0.0,
            ..law
        };
        let c = synth_market(3, 20, &flat, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(c.returns.windows(2).all(|w| w[0] == w[1]));
    }
}
