//! Levenberg-Marquardt on the slaved residual vector. Box constraints are
//! enforced by projecting each trial point; coordinates already on a bound
//! whose step points outward are held fixed for that step.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LinearParams, Model, NonlinearParams};
use crate::optimizer::SearchBounds;
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub initial_lambda: f64,
    pub lambda_factor: f64,
    /// Stop once an accepted step improves ssr by less than this fraction.
    pub ssr_tolerance: f64,
    /// Stop once a proposed step is shorter than this, in box widths.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub max_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_factor: 10.0,
            ssr_tolerance: 1e-10,
            step_tolerance: 1e-10,
            max_iterations: 500,
            max_lambda: 1e16,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lambda > 0.0 && self.lambda_factor > 1.0 && self.max_lambda > self.initial_lambda) {
            return Err(Error::Config("LM damping must satisfy 0 < initial_lambda < max_lambda, factor > 1".into()));
        }
        if !(self.ssr_tolerance >= 0.0 && self.step_tolerance >= 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("LM tolerances must be nonnegative and max_iterations positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    SsrTolerance,
    StepTolerance,
    /// Damping grew past its cap without finding a decrease.
    DampingSaturated,
    MaxIterations,
    /// The Jacobian could not be formed at an accepted point.
    JacobianUnavailable,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::SsrTolerance | Termination::StepTolerance | Termination::DampingSaturated
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub nl: NonlinearParams,
    pub lin: LinearParams,
    pub ssr: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// ssr at the start point and after every accepted step.
    pub ssr_trace: Vec<f64>,
    /// The start point and every accepted point, aligned with `ssr_trace`.
    pub path: Vec<NonlinearParams>,
}

impl LmOutcome {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

fn fit_failure(init: &NonlinearParams, cause: Error) -> Error {
    Error::FitFailure {
        tc: init.tc,
        m: init.m,
        omega: init.omega,
        phi: init.phi,
        cause: Box::new(cause),
    }
}

/// Solves the damped system, freezing coordinates that sit on a bound and
/// whose free step points out of the box.
fn projected_step(damped: &Matrix4<f64>, g: &Vector4<f64>, p: &[f64; 4], bounds: &SearchBounds) -> Option<[f64; 4]> {
    let lo = bounds.lo();
    let hi = bounds.hi();
    let mut free: [bool; 4] = std::array::from_fn(|j| bounds.width(j) > 0.0);
    // at most one pass per coordinate
    for _ in 0..4 {
        let idx: Vec<usize> = (0..4).filter(|&j| free[j]).collect();
        if idx.is_empty() {
            return Some([0.0; 4]);
        }
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| damped[(idx[a], idx[b])]);
        let rhs = DVector::from_fn(k, |a, _| -g[idx[a]]);
        let sol = sub.cholesky()?.solve(&rhs);
        let mut delta = [0.0; 4];
        for (a, &j) in idx.iter().enumerate() {
            delta[j] = sol[a];
        }
        let mut changed = false;
        for &j in &idx {
            let outward = (p[j] <= lo[j] && delta[j] < 0.0) || (p[j] >= hi[j] && delta[j] > 0.0);
            if outward {
                free[j] = false;
                changed = true;
            }
        }
        if !changed {
            return Some(delta);
        }
    }
    Some([0.0; 4])
}

fn ssr_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Refines `init` within `bounds`. Every accepted step strictly lowers ssr.
pub fn levenberg_marquardt(
    model: &Model,
    data: &TimeSeries,
    init: &NonlinearParams,
    bounds: &SearchBounds,
    cfg: &LmConfig,
) -> Result<LmOutcome> {
    cfg.validate()?;
    if !bounds.contains(init) {
        return Err(fit_failure(init, Error::Validation("start point outside search bounds".into())));
    }
    let (mut r, mut lin) = model.residuals(init, data).map_err(|e| fit_failure(init, e))?;
    let mut ssr = ssr_of(&r);
    let mut jac = model
        .residual_jacobian(init, data, bounds)
        .map_err(|e| fit_failure(init, e))?;
    let mut p = init.to_array();
    let mut trace = vec![ssr];
    let mut path = vec![*init];
    let mut lambda = cfg.initial_lambda;
    let mut iterations = 0;

    let termination = loop {
        if ssr == 0.0 {
            break Termination::SsrTolerance;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }

        let jt = jac.transpose();
        let normal = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let a = Matrix4::from_fn(|i, j| normal[(i, j)]);
        let g = Vector4::new(grad[0], grad[1], grad[2], grad[3]);
        let diag_max = (0..4).map(|i| a[(i, i)]).fold(0.0, f64::max);
        if !(diag_max > 0.0) {
            break Termination::StepTolerance;
        }
        let floor = diag_max * 1e-12;

        let mut damped = a;
        for i in 0..4 {
            damped[(i, i)] += lambda * a[(i, i)].max(floor);
        }
        iterations += 1;

        let Some(delta) = projected_step(&damped, &g, &p, bounds) else {
            lambda *= cfg.lambda_factor;
            if lambda > cfg.max_lambda {
                break Termination::DampingSaturated;
            }
            continue;
        };
        let mut raw = p;
        for j in 0..4 {
            raw[j] += delta[j];
        }
        let trial = bounds.clamp(raw);
        let mut step = [0.0; 4];
        for j in 0..4 {
            step[j] = trial[j] - p[j];
        }
        if !(bounds.unit_norm(step) >= cfg.step_tolerance) {
            break Termination::StepTolerance;
        }

        let trial_nl = NonlinearParams::from_array(trial);
        match model.residuals(&trial_nl, data) {
            Ok((rt, lt)) if ssr_of(&rt) < ssr => {
                let ssr_t = ssr_of(&rt);
                let improvement = (ssr - ssr_t) / ssr;
                p = trial;
                r = rt;
                lin = lt;
                ssr = ssr_t;
                trace.push(ssr);
                path.push(trial_nl);
                lambda = (lambda / cfg.lambda_factor).max(1e-15);
                if improvement < cfg.ssr_tolerance {
                    break Termination::SsrTolerance;
                }
                match model.residual_jacobian(&trial_nl, data, bounds) {
                    Ok(j) => jac = j,
                    Err(_) => break Termination::JacobianUnavailable,
                }
            }
            _ => {
                lambda *= cfg.lambda_factor;
                if lambda > cfg.max_lambda {
                    break Termination::DampingSaturated;
                }
            }
        }
    };

    Ok(LmOutcome {
        nl: NonlinearParams::from_array(p),
        lin,
        ssr,
        iterations,
        termination,
        ssr_trace: trace,
        path,
    })
}
