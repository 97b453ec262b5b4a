//! Run configuration file (TOML).
//!
//! Every key is optional; omitted keys take the defaults below.
//!
//! ```toml
//! seed = 0
//! n_candidates = 10
//! literal_cos = false
//!
//! [input]
//! date_column = "date"
//! value_column = "value"
//! delimiter = ","
//! ma_len = 13
//!
//! [ensemble]
//! span_min_months = 6.0
//! span_max_months = 18.0
//! step_days = 7.0
//! probs = [0.05, 0.2, 0.5, 0.8, 0.95]
//! horizon_years = 0.5
//! density = "kde"            # or "histogram"
//! density_points = 201
//! require_negative_b = false
//!
//! [scan]
//! n_t2 = 7
//! step_days = 7.0
//!
//! [tabu]
//! evaluations_per_region = 2000
//! start_regions = 3
//! initial_step = 0.1
//! min_step = 1e-4
//! patience = 5
//! tenure = 50
//! tabu_radius = 1e-3
//! distinct_separation = 0.01
//!
//! [lm]
//! initial_lambda = 1e-3
//! lambda_factor = 10.0
//! ssr_tolerance = 1e-10
//! step_tolerance = 1e-10
//! max_iterations = 500
//! max_lambda = 1e16
//! ```

use serde::{Deserialize, Serialize};

use crate::ensemble::{DensityMethod, EnsembleConfig, WindowGrid, DAY, DEFAULT_PROBS, MONTH};
use crate::error::{Error, Result};
use crate::model::OscillationForm;
use crate::optimizer::{FitConfig, LmConfig, TabuConfig, DEFAULT_CANDIDATES};
use crate::timeseries::{CsvConfig, DEFAULT_MA_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub date_column: String,
    pub value_column: String,
    pub delimiter: String,
    pub ma_len: usize,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            value_column: "value".into(),
            delimiter: ",".into(),
            ma_len: DEFAULT_MA_LEN,
        }
    }
}

impl InputSection {
    pub fn csv(&self) -> Result<CsvConfig> {
        Ok(CsvConfig {
            date_column: self.date_column.clone(),
            value_column: self.value_column.clone(),
            delimiter: parse_delimiter(&self.delimiter)?,
        })
    }
}

/// Single-byte delimiter; accepts `\t` or `tab` for tabs.
pub fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "\\t" | "tab" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(Error::Config(format!("delimiter must be one ASCII character, got '{s}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub span_min_months: f64,
    pub span_max_months: f64,
    pub step_days: f64,
    pub probs: Vec<f64>,
    pub horizon_years: f64,
    pub density: DensityMethod,
    pub density_points: usize,
    pub require_negative_b: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            span_min_months: 6.0,
            span_max_months: 18.0,
            step_days: 7.0,
            probs: DEFAULT_PROBS.to_vec(),
            horizon_years: 0.5,
            density: DensityMethod::Kde,
            density_points: 201,
            require_negative_b: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub n_t2: usize,
    pub step_days: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { n_t2: 7, step_days: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_candidates: Option<usize>,
    pub literal_cos: bool,
    pub input: InputSection,
    pub ensemble: EnsembleSection,
    pub scan: ScanSection,
    pub tabu: TabuConfig,
    pub lm: LmConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            form: if self.literal_cos {
                OscillationForm::Literal
            } else {
                OscillationForm::Standard
            },
            n_candidates: self.n_candidates.unwrap_or(DEFAULT_CANDIDATES),
            seed: self.seed,
            tabu: self.tabu.clone(),
            lm: self.lm.clone(),
        }
    }

    pub fn ensemble_config(&self) -> Result<EnsembleConfig> {
        let e = &self.ensemble;
        let durations = [e.span_min_months, e.span_max_months, e.step_days, e.horizon_years];
        if durations.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Config("all durations must be positive".into()));
        }
        let cfg = EnsembleConfig {
            fit: self.fit_config(),
            grid: WindowGrid {
                span_min: e.span_min_months * MONTH,
                span_max: e.span_max_months * MONTH,
                step: e.step_days * DAY,
            },
            probs: e.probs.clone(),
            horizon: e.horizon_years,
            density: e.density,
            density_points: e.density_points,
            require_negative_b: e.require_negative_b,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scan_step(&self) -> Result<f64> {
        if !(self.scan.step_days > 0.0) || self.scan.n_t2 == 0 {
            return Err(Error::Config("scan step must be positive and n_t2 >= 1".into()));
        }
        Ok(self.scan.step_days * DAY)
    }
}
