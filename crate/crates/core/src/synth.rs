//! Synthetic LPPL series with known ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ensemble::WEEK;
use crate::error::{Error, Result};
use crate::model::{LinearParams, Model, NonlinearParams, OscillationForm};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub nl: NonlinearParams,
    pub lin: LinearParams,
    pub start: f64,
    pub end: f64,
    pub spacing: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub form: OscillationForm,
}

impl SynthSpec {
    /// Fixture defaults (m = 0.5, ω = 8, φ = 1) on a weekly grid ending one
    /// month before `tc`.
    pub fn fixture(tc: f64, years: f64) -> Self {
        let end = tc - 1.0 / 12.0;
        Self {
            nl: NonlinearParams::new(tc, 0.5, 8.0, 1.0),
            lin: LinearParams::new(10.0, -2.0, 0.3),
            start: end - years,
            end,
            spacing: WEEK,
            noise_sigma: 0.0,
            seed: 0,
            form: OscillationForm::Standard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.end) {
            return Err(Error::Validation(format!("start {} must precede end {}", self.start, self.end)));
        }
        if !(self.end < self.nl.tc) {
            return Err(Error::Validation(format!(
                "end {} must precede the critical time {}",
                self.end, self.nl.tc
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Validation("spacing must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Validation(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }

    /// `start + k spacing` for `k = 0 ..= floor((end - start) / spacing)`.
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.spacing + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.spacing).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub phi: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub form: OscillationForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub series: TimeSeries,
    /// Model values before noise.
    pub clean: Vec<f64>,
    pub truth: GroundTruth,
}

pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    generate_at(&spec.times(), spec)
}

/// Same as [`generate`] but on caller-supplied times (all before `tc`).
pub fn generate_at(times: &[f64], spec: &SynthSpec) -> Result<Synthetic> {
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Validation(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let model = Model::new(spec.form);
    let clean: Vec<f64> = times
        .iter()
        .map(|&t| model.value(&spec.nl, &spec.lin, t))
        .collect::<Result<_>>()
        .map_err(|e| Error::Validation(format!("synthetic grid reaches the critical time: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
        clean.iter().map(|v| v + normal.sample(&mut rng)).collect()
    } else {
        clean.clone()
    };
    let series = TimeSeries::new(times.to_vec(), values, "synthetic")?;
    Ok(Synthetic {
        series,
        clean,
        truth: GroundTruth {
            tc: spec.nl.tc,
            m: spec.nl.m,
            omega: spec.nl.omega,
            phi: spec.nl.phi,
            a: spec.lin.a,
            b: spec.lin.b,
            c: spec.lin.c,
            noise_sigma: spec.noise_sigma,
            seed: spec.seed,
            form: spec.form,
        },
    })
}
