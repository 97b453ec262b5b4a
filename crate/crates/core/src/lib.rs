//! Calibration of the log-periodic power law (LPPL) bubble model to
//! univariate time series, with window ensembles that turn many fits into
//! crash-time quantiles, densities and extrapolation bands.
//!
//! Pipeline: [`timeseries::parse_csv`] → [`timeseries::moving_average`] →
//! [`ensemble::run_ensemble`] (one [`optimizer::fit_window`] per window) →
//! [`report`] renderings.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod report;
pub mod synth;
pub mod timeseries;

pub use ensemble::{run_ensemble, scan_t2, scan_t2_at, EnsembleConfig, EnsembleSummary, ScanReport};
pub use error::{Error, Result};
pub use model::{LinearParams, Model, NonlinearParams, OscillationForm};
pub use optimizer::{fit_window, FitConfig, FitResult, SearchBounds};
pub use timeseries::{TimeSeries, Window};
