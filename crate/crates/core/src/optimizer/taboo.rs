//! Tabu search over the normalized `(tc, m, omega, phi)` hypercube.
//!
//! Each start region runs a steepest-admissible walk over the 8 axis moves
//! `±step`. Recently visited points are tabu unless a move beats the global
//! best. The step is halved whenever the region best stalls, and the walk
//! jumps to a random point when every move is tabu. All visited points are
//! pooled, and the best mutually distinct ones become starting points for
//! local refinement.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, NonlinearParams};
use crate::optimizer::SearchBounds;
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabuConfig {
    /// Objective evaluations spent in each start region.
    pub evaluations_per_region: usize,
    pub start_regions: usize,
    pub initial_step: f64,
    pub min_step: f64,
    /// Consecutive non-improving moves before the step is halved.
    pub patience: usize,
    /// Length of the tabu list.
    pub tenure: usize,
    /// Per-coordinate radius within which a destination counts as revisited.
    pub tabu_radius: f64,
    /// Minimum per-coordinate separation between returned candidates.
    pub distinct_separation: f64,
}

impl Default for TabuConfig {
    fn default() -> Self {
        Self {
            evaluations_per_region: 2000,
            start_regions: 3,
            initial_step: 0.1,
            min_step: 1e-4,
            patience: 5,
            tenure: 50,
            tabu_radius: 1e-3,
            distinct_separation: 0.01,
        }
    }
}

impl TabuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.evaluations_per_region == 0 || self.start_regions == 0 {
            return Err(Error::Config("tabu budgets must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(Error::Config("tabu steps must satisfy 0 < min_step <= initial_step".into()));
        }
        if self.patience == 0 || self.tenure == 0 {
            return Err(Error::Config("tabu patience and tenure must be positive".into()));
        }
        if !(self.tabu_radius >= 0.0 && self.distinct_separation >= 0.0) {
            return Err(Error::Config("tabu radii must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub nl: NonlinearParams,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy)]
struct Visit {
    unit: [f64; 4],
    value: f64,
}

/// Radical inverse of `index` in `base` (van der Corput).
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut x = 0.0;
    while index > 0 {
        x += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    x
}

/// Halton point `index` (bases 2, 3, 5, 7) with a seeded toroidal shift.
fn start_point(index: u64, shift: &[f64; 4]) -> [f64; 4] {
    const BASES: [u64; 4] = [2, 3, 5, 7];
    let mut u = [0.0; 4];
    for j in 0..4 {
        u[j] = (radical_inverse(index, BASES[j]) + shift[j]).fract();
    }
    u
}

fn chebyshev(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const PHI: usize = 3;

struct Walker<'a> {
    model: &'a Model,
    data: &'a TimeSeries,
    bounds: &'a SearchBounds,
    visits: Vec<Visit>,
    global_best: f64,
}

impl Walker<'_> {
    fn evaluate(&mut self, unit: [f64; 4]) -> f64 {
        let nl = self.bounds.from_unit(unit);
        let value = match self.model.objective(&nl, self.data) {
            Ok(v) if v.is_finite() => v,
            // degenerate or outside the model's domain
            _ => f64::INFINITY,
        };
        self.visits.push(Visit { unit, value });
        if value < self.global_best {
            self.global_best = value;
        }
        value
    }

    fn run_region(&mut self, start: [f64; 4], budget: usize, cfg: &TabuConfig, rng: &mut ChaCha8Rng) {
        let live: Vec<usize> = (0..4).filter(|&j| self.bounds.width(j) > 0.0).collect();
        let mut spent = 1;
        let mut current = start;
        let mut region_best = self.evaluate(current);
        let mut tabu: VecDeque<[f64; 4]> = VecDeque::with_capacity(cfg.tenure + 1);
        tabu.push_back(current);
        let mut step = cfg.initial_step;
        let mut stall = 0;

        while spent < budget {
            let best_before = self.global_best;
            let mut chosen: Option<([f64; 4], f64)> = None;
            for &j in &live {
                for sign in [1.0, -1.0] {
                    if spent >= budget {
                        break;
                    }
                    let mut next = current;
                    next[j] = if j == PHI {
                        // the phase box spans one period
                        (next[j] + sign * step).rem_euclid(1.0)
                    } else {
                        (next[j] + sign * step).clamp(0.0, 1.0)
                    };
                    if next[j] == current[j] {
                        continue;
                    }
                    let value = self.evaluate(next);
                    spent += 1;
                    let is_tabu = tabu.iter().any(|t| chebyshev(t, &next) < cfg.tabu_radius);
                    let aspirates = value < best_before;
                    if is_tabu && !aspirates {
                        continue;
                    }
                    if chosen.is_none_or(|(_, v)| value < v) {
                        chosen = Some((next, value));
                    }
                }
            }

            let (next, value) = match chosen {
                Some(c) => c,
                None => {
                    if spent >= budget {
                        break;
                    }
                    // every move tabu: diversify
                    let mut jump = [0.0; 4];
                    for x in jump.iter_mut() {
                        *x = rng.random::<f64>();
                    }
                    let v = self.evaluate(jump);
                    spent += 1;
                    (jump, v)
                }
            };
            current = next;
            tabu.push_back(current);
            if tabu.len() > cfg.tenure {
                tabu.pop_front();
            }

            if value < region_best {
                region_best = value;
                stall = 0;
            } else {
                stall += 1;
                if stall >= cfg.patience {
                    step = (step * 0.5).max(cfg.min_step);
                    stall = 0;
                }
            }
        }
    }
}

/// Returns up to `n_candidates` mutually distinct low-objective points,
/// sorted by objective. Deterministic for a given `(data, bounds, seed)`.
pub fn taboo_search(
    model: &Model,
    data: &TimeSeries,
    bounds: &SearchBounds,
    seed: u64,
    n_candidates: usize,
    cfg: &TabuConfig,
) -> Result<Vec<Candidate>> {
    if n_candidates == 0 {
        return Err(Error::Config("n_candidates must be at least 1".into()));
    }
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = [0.0; 4];
    for s in shift.iter_mut() {
        *s = rng.random::<f64>();
    }

    let mut walker = Walker {
        model,
        data,
        bounds,
        visits: Vec::with_capacity(cfg.evaluations_per_region * cfg.start_regions),
        global_best: f64::INFINITY,
    };
    for region in 0..cfg.start_regions {
        let start = start_point(region as u64 + 1, &shift);
        walker.run_region(start, cfg.evaluations_per_region, cfg, &mut rng);
    }

    let mut pool: Vec<Visit> = walker
        .visits
        .into_iter()
        .filter(|v| v.value.is_finite())
        .collect();
    if pool.is_empty() {
        return Err(Error::SearchFailure);
    }
    // stable sort keeps visit order among ties
    pool.sort_by(|a, b| a.value.total_cmp(&b.value));

    let mut picked: Vec<Visit> = Vec::with_capacity(n_candidates);
    for v in pool {
        if picked.len() == n_candidates {
            break;
        }
        if picked
            .iter()
            .all(|p| chebyshev(&p.unit, &v.unit) >= cfg.distinct_separation)
        {
            picked.push(v);
        }
    }
    Ok(picked
        .into_iter()
        .map(|v| Candidate {
            nl: bounds.from_unit(v.unit),
            objective: v.value,
        })
        .collect())
}
