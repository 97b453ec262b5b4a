//! Window ensembles: many `(t1, t2)` fits sharing one `t2`, aggregated into
//! crash-time quantiles, a crash-time density and forward extrapolation bands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::optimizer::{fit_window, window_seed, FitConfig, FitResult};
use crate::timeseries::{TimeSeries, Window};

/// One month, as a fixed fraction of a year.
pub const MONTH: f64 = 1.0 / 12.0;
/// One day, in years.
pub const DAY: f64 = 1.0 / 365.25;
pub const WEEK: f64 = 7.0 * DAY;

/// Probabilities reported for crash-time quantiles unless configured otherwise.
pub const DEFAULT_PROBS: [f64; 5] = [0.05, 0.20, 0.50, 0.80, 0.95];
/// Probabilities of the extrapolation bands.
pub const BAND_PROBS: [f64; 5] = [0.05, 0.20, 0.50, 0.80, 0.95];

const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowGrid {
    /// Shortest window length, years.
    pub span_min: f64,
    /// Longest window length, years.
    pub span_max: f64,
    /// Spacing between successive `t1`, years.
    pub step: f64,
}

impl Default for WindowGrid {
    fn default() -> Self {
        Self {
            span_min: 6.0 * MONTH,
            span_max: 18.0 * MONTH,
            step: WEEK,
        }
    }
}

/// `t1 = t2 - span_max, t2 - span_max + step, ...` up to `t2 - span_min`.
pub fn generate_windows(t2: f64, grid: &WindowGrid) -> Result<Vec<Window>> {
    if !(grid.step > 0.0) {
        return Err(Error::Config(format!("window step must be positive, got {}", grid.step)));
    }
    if !(grid.span_min > 0.0 && grid.span_min <= grid.span_max) {
        return Err(Error::Config(format!(
            "window spans must satisfy 0 < span_min <= span_max, got {} and {}",
            grid.span_min, grid.span_max
        )));
    }
    let count = ((grid.span_max - grid.span_min) / grid.step + GRID_EPS).floor() as usize + 1;
    let windows: Vec<Window> = (0..count)
        .map(|k| Window::new(t2 - grid.span_max + k as f64 * grid.step, t2))
        .collect::<Result<_>>()?;
    if windows.is_empty() {
        return Err(Error::Config("window grid is empty".into()));
    }
    Ok(windows)
}

/// Empirical quantiles with linear interpolation between order statistics
/// at rank `h = (n - 1) p + 1`.
pub fn tc_quantiles(tcs: &[f64], probs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if tcs.is_empty() {
        return Err(Error::Validation("quantiles of an empty sample".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Validation(format!("probability {p} outside [0, 1]")));
    }
    let mut sorted = tcs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(probs.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect())
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    #[default]
    Kde,
    Histogram,
}

/// Crash-time density on a grid, or a point mass when every `tc` coincides.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Curve {
        points: Vec<(f64, f64)>,
        bandwidth: f64,
    },
    PointMass {
        at: f64,
    },
}

impl Density {
    /// Location of the highest density value (first on ties).
    pub fn mode(&self) -> f64 {
        match self {
            Density::PointMass { at } => *at,
            Density::Curve { points, .. } => {
                points
                    .iter()
                    .fold((f64::NAN, f64::NEG_INFINITY), |best, &(x, y)| {
                        if y > best.1 {
                            (x, y)
                        } else {
                            best
                        }
                    })
                    .0
            }
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        match self {
            Density::Curve { points, .. } => points,
            Density::PointMass { .. } => &[],
        }
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^(-1/5)`, floored at `min_bandwidth`.
/// Returns zero only when the sample has no spread.
pub fn silverman_bandwidth(tcs: &[f64], min_bandwidth: f64) -> f64 {
    let (_, sd) = mean_sd(tcs);
    if sd == 0.0 {
        return 0.0;
    }
    let mut sorted = tcs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (tcs.len() as f64).powf(-0.2);
    h.max(min_bandwidth)
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

fn normalize(mut points: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    let area = trapezoid(&points);
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::Validation("density has no mass on the grid".into()));
    }
    for p in points.iter_mut() {
        p.1 /= area;
    }
    Ok(points)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("density grid needs >= 2 increasing points".into()));
    }
    Ok(())
}

/// Gaussian kernel density estimate on `grid`, renormalized so the
/// trapezoid integral over the grid is one.
pub fn tc_density(tcs: &[f64], grid: &[f64], min_bandwidth: f64) -> Result<Density> {
    if tcs.is_empty() {
        return Err(Error::Validation("density of an empty sample".into()));
    }
    let h = silverman_bandwidth(tcs, min_bandwidth);
    if h == 0.0 {
        return Ok(Density::PointMass { at: tcs[0] });
    }
    check_grid(grid)?;
    let norm = 1.0 / (tcs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let points = grid
        .iter()
        .map(|&x| {
            let s: f64 = tcs.iter().map(|&c| (-0.5 * ((x - c) / h).powi(2)).exp()).sum();
            (x, s * norm)
        })
        .collect();
    Ok(Density::Curve {
        points: normalize(points)?,
        bandwidth: h,
    })
}

/// Histogram with one bin centred on each grid point, normalized like
/// [`tc_density`].
pub fn tc_histogram(tcs: &[f64], grid: &[f64]) -> Result<Density> {
    if tcs.is_empty() {
        return Err(Error::Validation("histogram of an empty sample".into()));
    }
    if tcs.iter().all(|&t| t == tcs[0]) {
        return Ok(Density::PointMass { at: tcs[0] });
    }
    check_grid(grid)?;
    let width = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let mut counts = vec![0usize; grid.len()];
    for &t in tcs {
        let k = ((t - grid[0]) / width).round();
        if k >= 0.0 && (k as usize) < grid.len() {
            counts[k as usize] += 1;
        }
    }
    let points = grid
        .iter()
        .zip(&counts)
        .map(|(&x, &c)| (x, c as f64 / (tcs.len() as f64 * width)))
        .collect();
    Ok(Density::Curve {
        points: normalize(points)?,
        bandwidth: width,
    })
}

/// Evenly spaced grid covering the sample plus three bandwidths each side.
pub fn density_grid(tcs: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let lo = tcs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = tcs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let n = points.max(2);
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Cross-fit quantiles of the extrapolated model at one future time.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub t: f64,
    /// Fits whose critical time lies beyond `t`.
    pub n_contributing: usize,
    /// One value per requested probability; `None` marks a gap.
    pub quantiles: Option<Vec<f64>>,
}

impl BandPoint {
    pub fn is_gap(&self) -> bool {
        self.quantiles.is_none()
    }
}

/// For each time, evaluates every fit with `tc > t` and takes quantiles
/// across fits.
pub fn extrapolation_band(model: &Model, fits: &[FitResult], times: &[f64], probs: &[f64]) -> Result<Vec<BandPoint>> {
    times
        .iter()
        .map(|&t| {
            let values: Vec<f64> = fits
                .iter()
                .filter(|f| f.nl.tc > t)
                .filter_map(|f| model.value(&f.nl, &f.lin, t).ok())
                .collect();
            let quantiles = if values.is_empty() {
                None
            } else {
                Some(tc_quantiles(&values, probs)?.into_iter().map(|(_, v)| v).collect())
            };
            Ok(BandPoint {
                t,
                n_contributing: values.len(),
                quantiles,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub fit: FitConfig,
    pub grid: WindowGrid,
    pub probs: Vec<f64>,
    /// How far past `t2` to extrapolate, years.
    pub horizon: f64,
    pub extrapolation_step: f64,
    pub density: DensityMethod,
    pub density_points: usize,
    /// Keep only fits with `B < 0`.
    pub require_negative_b: bool,
    /// Fit windows on the rayon pool; results do not depend on this.
    pub parallel: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            grid: WindowGrid::default(),
            probs: DEFAULT_PROBS.to_vec(),
            horizon: 0.5,
            extrapolation_step: WEEK,
            density: DensityMethod::Kde,
            density_points: 201,
            require_negative_b: false,
            parallel: true,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("quantile probabilities must lie in [0, 1]".into()));
        }
        if !(self.horizon >= 0.0 && self.extrapolation_step > 0.0) {
            return Err(Error::Config("extrapolation horizon must be >= 0 and step > 0".into()));
        }
        if self.density_points < 2 {
            return Err(Error::Config("density needs at least 2 grid points".into()));
        }
        Ok(())
    }

    /// Probabilities in use for crash-time quantiles, always including the median.
    pub fn quantile_probs(&self) -> Vec<f64> {
        let mut probs = self.probs.clone();
        if !probs.contains(&0.5) {
            probs.push(0.5);
        }
        probs.sort_by(f64::total_cmp);
        probs.dedup();
        probs
    }

    pub fn extrapolation_times(&self, t2: f64) -> Vec<f64> {
        let n = (self.horizon / self.extrapolation_step + GRID_EPS).floor() as usize;
        (0..=n).map(|k| t2 + k as f64 * self.extrapolation_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowFailure {
    pub window: Window,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub t2: f64,
    pub n_windows: usize,
    pub n_success: usize,
    pub n_failed: usize,
    /// Successful fits removed by the `B < 0` filter.
    pub n_filtered: usize,
    /// Fits entering the aggregates, in window order.
    pub fits: Vec<FitResult>,
    pub failures: Vec<WindowFailure>,
    pub tc_quantiles: Vec<(f64, f64)>,
    pub density: Density,
    pub extrapolation: Vec<BandPoint>,
    pub band_probs: Vec<f64>,
}

impl EnsembleSummary {
    /// Aggregates fitted windows. `spacing` floors the density bandwidth.
    pub fn from_fits(
        t2: f64,
        outcomes: Vec<(Window, Result<FitResult>)>,
        config: &EnsembleConfig,
        spacing: f64,
    ) -> Result<Self> {
        let n_windows = outcomes.len();
        let mut fits = Vec::new();
        let mut failures = Vec::new();
        for (window, outcome) in outcomes {
            match outcome {
                Ok(fit) => fits.push(fit),
                Err(e) => failures.push(WindowFailure {
                    window,
                    error: e.to_string(),
                }),
            }
        }
        let n_success = fits.len();
        if config.require_negative_b {
            fits.retain(|f| f.lin.b < 0.0);
        }
        let n_filtered = n_success - fits.len();
        if fits.is_empty() {
            return Err(Error::EnsembleFailure { t2, n_windows });
        }

        let tcs: Vec<f64> = fits.iter().map(|f| f.nl.tc).collect();
        let tc_quantiles = tc_quantiles(&tcs, &config.quantile_probs())?;
        let bandwidth = silverman_bandwidth(&tcs, spacing);
        let density = if bandwidth == 0.0 {
            Density::PointMass { at: tcs[0] }
        } else {
            let grid = density_grid(&tcs, bandwidth, config.density_points);
            match config.density {
                DensityMethod::Kde => tc_density(&tcs, &grid, spacing)?,
                DensityMethod::Histogram => tc_histogram(&tcs, &grid)?,
            }
        };
        let model = config.fit.model();
        let extrapolation =
            extrapolation_band(&model, &fits, &config.extrapolation_times(t2), &BAND_PROBS)?;

        Ok(Self {
            t2,
            n_windows,
            n_success,
            n_failed: failures.len(),
            n_filtered,
            fits,
            failures,
            tc_quantiles,
            density,
            extrapolation,
            band_probs: BAND_PROBS.to_vec(),
        })
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.tc_quantiles.iter().find(|(q, _)| *q == p).map(|&(_, v)| v)
    }
}

fn check_coverage(data: &TimeSeries, t2: f64, grid: &WindowGrid) -> Result<()> {
    if t2 > data.last_time() + GRID_EPS || t2 < data.first_time() {
        return Err(Error::Coverage(format!(
            "t2 outside data support: {t2} not in [{}, {}]",
            data.first_time(),
            data.last_time()
        )));
    }
    if t2 - grid.span_max < data.first_time() - GRID_EPS {
        return Err(Error::Coverage(format!(
            "longest window starts at {} before the first observation {}",
            t2 - grid.span_max,
            data.first_time()
        )));
    }
    Ok(())
}

/// Fits every window ending at `t2` and aggregates the results.
pub fn run_ensemble(data: &TimeSeries, t2: f64, config: &EnsembleConfig) -> Result<EnsembleSummary> {
    config.validate()?;
    check_coverage(data, t2, &config.grid)?;
    let windows = generate_windows(t2, &config.grid)?;
    let fit_one = |w: &Window| {
        let mut cfg = config.fit.clone();
        cfg.seed = window_seed(config.fit.seed, w);
        (*w, fit_window(data, w, &cfg))
    };
    let outcomes: Vec<(Window, Result<FitResult>)> = if config.parallel {
        windows.par_iter().map(fit_one).collect()
    } else {
        windows.iter().map(fit_one).collect()
    };
    let spacing = data.median_spacing().unwrap_or(0.0);
    EnsembleSummary::from_fits(t2, outcomes, config, spacing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub t2: f64,
    pub outcome: std::result::Result<EnsembleSummary, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub t2: f64,
    pub mode: Option<f64>,
    /// Change of mode from the previous successful `t2`.
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub entries: Vec<ScanEntry>,
    pub stability: Vec<StabilityRow>,
}

impl ScanReport {
    /// Sum of absolute mode changes over the first `k` entries; `None` when
    /// any of them failed.
    pub fn total_drift(&self, k: usize) -> Option<f64> {
        let modes: Option<Vec<f64>> = self.stability.iter().take(k).map(|r| r.mode).collect();
        let modes = modes?;
        Some(modes.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
    }
}

/// `t2` values `center + k step` with `k` running over `n_t2` consecutive
/// integers centred on zero.
pub fn scan_t2_values(center: f64, n_t2: usize, step: f64) -> Vec<f64> {
    let half = (n_t2.saturating_sub(1) / 2) as i64;
    (0..n_t2 as i64)
        .map(|i| {
            let k = i - half;
            if k == 0 {
                center
            } else {
                center + k as f64 * step
            }
        })
        .collect()
}

/// Runs one ensemble per `t2` around `center`. Individual failures are kept
/// in the report rather than aborting the scan.
pub fn scan_t2(
    data: &TimeSeries,
    center: f64,
    n_t2: usize,
    step: f64,
    config: &EnsembleConfig,
) -> Result<ScanReport> {
    if n_t2 == 0 {
        return Err(Error::Config("n_t2 must be at least 1".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Config("t2 step must be positive".into()));
    }
    scan_t2_at(data, &scan_t2_values(center, n_t2, step), config)
}

/// [`scan_t2`] over explicit `t2` values, reported in the given order.
pub fn scan_t2_at(data: &TimeSeries, t2s: &[f64], config: &EnsembleConfig) -> Result<ScanReport> {
    if t2s.is_empty() {
        return Err(Error::Config("n_t2 must be at least 1".into()));
    }
    config.validate()?;
    let run = |&t2: &f64| ScanEntry {
        t2,
        outcome: run_ensemble(data, t2, config),
    };
    let entries: Vec<ScanEntry> = if config.parallel {
        t2s.par_iter().map(run).collect()
    } else {
        t2s.iter().map(run).collect()
    };

    let mut stability = Vec::with_capacity(entries.len());
    let mut previous: Option<f64> = None;
    for e in &entries {
        let mode = e.outcome.as_ref().ok().map(|s| s.density.mode());
        let drift = match (mode, previous) {
            (Some(m), Some(p)) => Some(m - p),
            _ => None,
        };
        if mode.is_some() {
            previous = mode;
        }
        stability.push(StabilityRow { t2: e.t2, mode, drift });
    }
    Ok(ScanReport { entries, stability })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearParams, NonlinearParams};
    use crate::optimizer::Termination;

    fn fake_fit(t1: f64, t2: f64, tc: f64, b: f64) -> FitResult {
        FitResult {
            window: Window::new(t1, t2).unwrap(),
            nl: NonlinearParams::new(tc, 0.5, 8.0, 1.0),
            lin: LinearParams::new(10.0, b, 0.3),
            ssr: 1.0,
            n_obs: 30,
            converged: true,
            termination: Termination::SsrTolerance,
            iterations: 3,
            seed: 0,
            ssr_trace: vec![1.0],
            start_objective: 1.0,
        }
    }

    #[test]
    fn default_grid_has_53_windows() {
        let w = generate_windows(2008.0, &WindowGrid::default()).unwrap();
        // floor(1.0 / (7 / 365.25)) + 1
        assert_eq!((1.0 / (7.0 / 365.25_f64)).floor() as usize + 1, 53);
        assert_eq!(w.len(), 53);
        assert!((w[0].t1 - 2006.5).abs() < 1e-12);
        assert!(w.iter().all(|x| x.t2 == 2008.0));
        assert!(w.last().unwrap().t1 <= 2008.0 - 0.5 + 1e-12);
        for p in w.windows(2) {
            assert!((p[1].t1 - p[0].t1 - WEEK).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_grids() {
        let same = WindowGrid {
            span_min: 1.0,
            span_max: 1.0,
            step: WEEK,
        };
        assert_eq!(generate_windows(2008.0, &same).unwrap().len(), 1);
        let coarse = WindowGrid {
            step: 2.0,
            ..Default::default()
        };
        assert_eq!(generate_windows(2008.0, &coarse).unwrap().len(), 1);
        let bad = WindowGrid {
            span_min: 2.0,
            span_max: 1.0,
            step: WEEK,
        };
        assert!(matches!(generate_windows(2008.0, &bad), Err(Error::Config(_))));
        let zero = WindowGrid {
            step: 0.0,
            ..Default::default()
        };
        assert!(generate_windows(2008.0, &zero).is_err());
    }

    #[test]
    fn quantile_examples() {
        let q = tc_quantiles(&[2008.2], &DEFAULT_PROBS).unwrap();
        assert!(q.iter().all(|&(_, v)| v == 2008.2));

        let hundred: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(tc_quantiles(&hundred, &[0.2]).unwrap()[0].1, 20.0);

        let xs = [3.0, -1.0, 7.5, 2.0];
        let q = tc_quantiles(&xs, &[0.0, 1.0]).unwrap();
        assert_eq!(q[0].1, -1.0);
        assert_eq!(q[1].1, 7.5);

        // rank h = 3*0.5 + 1 = 2.5 -> halfway between 2.0 and 3.0
        assert_eq!(tc_quantiles(&xs, &[0.5]).unwrap()[0].1, 2.5);

        assert!(tc_quantiles(&[], &[0.5]).is_err());
        assert!(tc_quantiles(&xs, &[1.5]).is_err());
    }

    #[test]
    fn density_point_mass_and_symmetry() {
        let grid: Vec<f64> = (0..401).map(|i| -2.0 + i as f64 * 0.01).collect();
        assert_eq!(
            tc_density(&[2008.3; 5], &grid, 0.0).unwrap(),
            Density::PointMass { at: 2008.3 }
        );
        let d = tc_density(&[-0.5, 0.5], &grid, 0.0).unwrap();
        let pts = d.points();
        for i in 0..pts.len() {
            let j = pts.len() - 1 - i;
            assert!((pts[i].1 - pts[j].1).abs() < 1e-10);
        }
        assert!((trapezoid(pts) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_mode_near_median() {
        // deterministic tight unimodal cloud
        let tcs: Vec<f64> = (0..60)
            .map(|i| {
                let u = (i as f64 + 0.5) / 60.0;
                2008.2 + 0.01 * (u - 0.5) * (1.0 + 4.0 * (u - 0.5).powi(2))
            })
            .collect();
        let h = silverman_bandwidth(&tcs, 0.0);
        let grid = density_grid(&tcs, h, 801);
        let d = tc_density(&tcs, &grid, 0.0).unwrap();
        let median = tc_quantiles(&tcs, &[0.5]).unwrap()[0].1;
        assert!((d.mode() - median).abs() <= h, "mode {} median {median} h {h}", d.mode());
        assert!((trapezoid(d.points()) - 1.0).abs() < 1e-6);
        assert!(d.points().iter().all(|p| p.1 >= 0.0));
    }

    #[test]
    fn bandwidth_floor_applies() {
        let tcs = [2008.0, 2008.0001, 2008.0002];
        assert!(silverman_bandwidth(&tcs, 0.0) < WEEK);
        assert_eq!(silverman_bandwidth(&tcs, WEEK), WEEK);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let tcs = [2008.1, 2008.12, 2008.15, 2008.2, 2008.2];
        let grid: Vec<f64> = (0..50).map(|i| 2008.0 + i as f64 * 0.01).collect();
        let d = tc_histogram(&tcs, &grid).unwrap();
        assert!((trapezoid(d.points()) - 1.0).abs() < 1e-6);
        assert!(d.points().iter().all(|p| p.1 >= 0.0));
    }

    #[test]
    fn single_fit_band_collapses_to_trajectory() {
        let model = Model::default();
        let fit = fake_fit(2007.0, 2008.0, 2008.3, -2.0);
        let times = [2008.0, 2008.1, 2008.2, 2008.3, 2008.4];
        let band = extrapolation_band(&model, std::slice::from_ref(&fit), &times, &BAND_PROBS).unwrap();
        for bp in &band[..3] {
            let v = model.value(&fit.nl, &fit.lin, bp.t).unwrap();
            assert!(bp.quantiles.as_ref().unwrap().iter().all(|&q| q == v));
        }
        assert!(band[3].is_gap() && band[4].is_gap());
    }

    #[test]
    fn outer_band_contains_inner() {
        let model = Model::default();
        let fits: Vec<FitResult> = (0..20)
            .map(|i| fake_fit(2007.0, 2008.0, 2008.1 + 0.01 * i as f64, -2.0 + 0.05 * i as f64))
            .collect();
        let times: Vec<f64> = (0..20).map(|i| 2008.0 + i as f64 * 0.01).collect();
        let band = extrapolation_band(&model, &fits, &times, &BAND_PROBS).unwrap();
        for bp in band.iter().filter(|b| !b.is_gap()) {
            let q = bp.quantiles.as_ref().unwrap();
            assert!(q[0] <= q[1] && q[3] <= q[4]);
            assert!(q.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn summary_from_single_fit() {
        let cfg = EnsembleConfig::default();
        let outcomes = vec![
            (Window::new(2007.0, 2008.0).unwrap(), Ok(fake_fit(2007.0, 2008.0, 2008.2, -2.0))),
            (Window::new(2007.1, 2008.0).unwrap(), Err(Error::SearchFailure)),
        ];
        let s = EnsembleSummary::from_fits(2008.0, outcomes, &cfg, WEEK).unwrap();
        assert!(s.tc_quantiles.iter().all(|&(_, v)| v == 2008.2));
        assert_eq!(s.density, Density::PointMass { at: 2008.2 });
        assert_eq!(s.n_windows, s.n_success + s.n_failed);
        assert_eq!(s.n_failed, 1);
        assert_eq!(s.extrapolation.len(), 27);
    }

    #[test]
    fn negative_b_filter_only_removes() {
        let mk = |require| {
            let cfg = EnsembleConfig {
                require_negative_b: require,
                ..Default::default()
            };
            let outcomes = (0..6)
                .map(|i| {
                    let w = Window::new(2007.0 + 0.01 * i as f64, 2008.0).unwrap();
                    let b = if i % 2 == 0 { -1.0 } else { 1.0 };
                    (w, Ok(fake_fit(w.t1, 2008.0, 2008.1 + 0.02 * i as f64, b)))
                })
                .collect();
            EnsembleSummary::from_fits(2008.0, outcomes, &cfg, WEEK).unwrap()
        };
        let all = mk(false);
        let kept = mk(true);
        assert_eq!(kept.n_filtered, 3);
        assert_eq!(kept.fits.len(), 3);
        for f in &kept.fits {
            assert!(all.fits.contains(f));
        }
    }

    #[test]
    fn all_failed_is_ensemble_failure() {
        let outcomes = vec![(Window::new(2007.0, 2008.0).unwrap(), Err(Error::SearchFailure))];
        assert!(matches!(
            EnsembleSummary::from_fits(2008.0, outcomes, &EnsembleConfig::default(), WEEK),
            Err(Error::EnsembleFailure { n_windows: 1, .. })
        ));
    }

    #[test]
    fn scan_values() {
        let v = scan_t2_values(2008.0, 7, WEEK);
        assert_eq!(v.len(), 7);
        assert_eq!(v[3], 2008.0);
        assert!((v[6] - v[0] - 6.0 * WEEK).abs() < 1e-12);
        // six weekly gaps
        assert!(((v[6] - v[0]) / DAY - 42.0).abs() < 1e-9);
        assert_eq!(scan_t2_values(2008.0, 1, WEEK), vec![2008.0]);
    }

    #[test]
    fn extrapolation_grid_default() {
        let t = EnsembleConfig::default().extrapolation_times(2008.0);
        assert_eq!(t.len(), 27);
        assert_eq!(t[0], 2008.0);
        assert!(*t.last().unwrap() <= 2008.5);
    }
}
