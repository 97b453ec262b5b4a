//! Window calibration: tabu search proposes starting points over the
//! 4-dimensional nonlinear box, Levenberg-Marquardt refines each, and the
//! lowest-ssr refinement wins.

mod bounds;
mod lm;
mod taboo;

pub use bounds::{SearchBounds, M_RANGE, OMEGA_RANGE, PHI_RANGE, TC_HORIZON_FRACTION};
pub use lm::{levenberg_marquardt, LmConfig, LmOutcome, Termination};
pub use taboo::{taboo_search, Candidate, TabuConfig};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearParams, Model, NonlinearParams, OscillationForm};
use crate::timeseries::{slice, TimeSeries, Window};

pub const DEFAULT_CANDIDATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub form: OscillationForm,
    pub n_candidates: usize,
    pub seed: u64,
    pub tabu: TabuConfig,
    pub lm: LmConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            form: OscillationForm::Standard,
            n_candidates: DEFAULT_CANDIDATES,
            seed: 0,
            tabu: TabuConfig::default(),
            lm: LmConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn model(&self) -> Model {
        Model::new(self.form)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::Config("n_candidates must be at least 1".into()));
        }
        self.tabu.validate()?;
        self.lm.validate()
    }
}

/// One calibrated window.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub window: Window,
    pub nl: NonlinearParams,
    pub lin: LinearParams,
    pub ssr: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub seed: u64,
    /// ssr at the winning start and after each accepted LM step.
    pub ssr_trace: Vec<f64>,
    /// Objective at the tabu candidate the winning refinement started from.
    pub start_objective: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-window seed, a pure function of the global seed and the window edges.
pub fn window_seed(global_seed: u64, window: &Window) -> u64 {
    let h = splitmix64(global_seed);
    let h = splitmix64(h ^ window.t1.to_bits());
    splitmix64(h ^ window.t2.to_bits().rotate_left(17))
}

/// LM from `start`; an end on a phase bound is retried once from the
/// equivalent phase at the opposite bound. Returns every run, first one
/// first.
fn refine_runs(
    model: &Model,
    data: &TimeSeries,
    start: &NonlinearParams,
    bounds: &SearchBounds,
    cfg: &LmConfig,
) -> Result<Vec<LmOutcome>> {
    let out = levenberg_marquardt(model, data, start, bounds, cfg)?;
    let (lo, hi) = (bounds.lo()[3], bounds.hi()[3]);
    let phi = out.nl.phi;
    if !(phi <= lo || phi >= hi) || lo == hi {
        return Ok(vec![out]);
    }
    let wrapped = if phi >= hi { phi - TAU } else { phi + TAU };
    let restart = NonlinearParams {
        phi: wrapped.clamp(lo, hi),
        ..out.nl
    };
    match levenberg_marquardt(model, data, &restart, bounds, cfg) {
        Ok(again) => Ok(vec![out, again]),
        Err(_) => Ok(vec![out]),
    }
}

/// Lowest-ssr run of [`refine_runs`].
fn refine(
    model: &Model,
    data: &TimeSeries,
    start: &NonlinearParams,
    bounds: &SearchBounds,
    cfg: &LmConfig,
) -> Result<LmOutcome> {
    let runs = refine_runs(model, data, start, bounds, cfg)?;
    let mut best = None;
    for r in runs {
        if best.as_ref().is_none_or(|b: &LmOutcome| r.ssr < b.ssr) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Every LM run [`fit_window`] performs, with the candidate each started
/// from. Failed runs are omitted.
pub fn window_refinements(data: &TimeSeries, window: &Window, config: &FitConfig) -> Result<Vec<(Candidate, LmOutcome)>> {
    config.validate()?;
    let sub = slice(data, window)?;
    let bounds = SearchBounds::for_window(window);
    let model = config.model();
    let candidates = taboo_search(&model, &sub, &bounds, config.seed, config.n_candidates, &config.tabu)?;
    let mut runs = Vec::new();
    for cand in candidates {
        if let Ok(outs) = refine_runs(&model, &sub, &cand.nl, &bounds, &config.lm) {
            runs.extend(outs.into_iter().map(|o| (cand, o)));
        }
    }
    Ok(runs)
}

/// Calibrates the model on the observations inside `window`, using
/// `config.seed` as given.
pub fn fit_window(data: &TimeSeries, window: &Window, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let sub = slice(data, window)?;
    let bounds = SearchBounds::for_window(window);
    let model = config.model();
    let candidates = taboo_search(&model, &sub, &bounds, config.seed, config.n_candidates, &config.tabu)?;

    let mut best: Option<(LmOutcome, f64)> = None;
    let mut causes = Vec::new();
    for cand in &candidates {
        match refine(&model, &sub, &cand.nl, &bounds, &config.lm) {
            Ok(out) => {
                if best.as_ref().is_none_or(|(b, _)| out.ssr < b.ssr) {
                    best = Some((out, cand.objective));
                }
            }
            Err(e) => causes.push(e.to_string()),
        }
    }
    let (out, start_objective) = best.ok_or(Error::WindowFit { causes })?;
    Ok(FitResult {
        window: *window,
        nl: out.nl,
        lin: out.lin,
        ssr: out.ssr,
        n_obs: sub.len(),
        converged: out.converged(),
        termination: out.termination,
        iterations: out.iterations,
        seed: config.seed,
        ssr_trace: out.ssr_trace,
        start_objective,
    })
}
