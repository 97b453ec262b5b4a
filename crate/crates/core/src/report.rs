//! JSON and CSV renderings of ensemble summaries and scan reports.
//!
//! Summary JSON layout:
//!
//! ```text
//! { t2, t2_date, n_windows, n_success, n_failed, n_filtered,
//!   fits: [{t1, t2, tc, m, omega, phi, A, B, C, ssr, converged, seed, n_obs, iterations, termination}],
//!   failures: [{t1, t2, error}],
//!   tc_quantiles: {"0.05": tc, ...},
//!   bandwidth, density_point_mass,
//!   density: [[tc, value], ...],
//!   extrapolation: [{t, n, q05, q20, q50, q80, q95}] }
//! ```
//!
//! Extrapolation quantiles are `null` where no fit is defined (a gap).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::ensemble::{Density, EnsembleSummary, ScanReport};
use crate::optimizer::{FitResult, Termination};
use crate::timeseries::from_decimal_years;

#[derive(Debug, Serialize)]
struct FitRecord {
    t1: f64,
    t2: f64,
    tc: f64,
    m: f64,
    omega: f64,
    phi: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "C")]
    c: f64,
    ssr: f64,
    converged: bool,
    seed: u64,
    n_obs: usize,
    iterations: usize,
    termination: Termination,
}

impl From<&FitResult> for FitRecord {
    fn from(f: &FitResult) -> Self {
        Self {
            t1: f.window.t1,
            t2: f.window.t2,
            tc: f.nl.tc,
            m: f.nl.m,
            omega: f.nl.omega,
            phi: f.nl.phi,
            a: f.lin.a,
            b: f.lin.b,
            c: f.lin.c,
            ssr: f.ssr,
            converged: f.converged,
            seed: f.seed,
            n_obs: f.n_obs,
            iterations: f.iterations,
            termination: f.termination,
        }
    }
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    t1: f64,
    t2: f64,
    error: String,
}

#[derive(Debug, Serialize)]
struct BandRecord {
    t: f64,
    n: usize,
    q05: Option<f64>,
    q20: Option<f64>,
    q50: Option<f64>,
    q80: Option<f64>,
    q95: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SummaryRecord {
    t2: f64,
    t2_date: String,
    n_windows: usize,
    n_success: usize,
    n_failed: usize,
    n_filtered: usize,
    fits: Vec<FitRecord>,
    failures: Vec<FailureRecord>,
    tc_quantiles: BTreeMap<String, f64>,
    bandwidth: Option<f64>,
    density_point_mass: Option<f64>,
    density: Vec<[f64; 2]>,
    extrapolation: Vec<BandRecord>,
}

fn prob_key(p: f64) -> String {
    format!("{p}")
}

fn band_records(s: &EnsembleSummary) -> Vec<BandRecord> {
    s.extrapolation
        .iter()
        .map(|bp| {
            let q = |p: f64| {
                let idx = s.band_probs.iter().position(|&x| x == p)?;
                bp.quantiles.as_ref().map(|v| v[idx])
            };
            BandRecord {
                t: bp.t,
                n: bp.n_contributing,
                q05: q(0.05),
                q20: q(0.20),
                q50: q(0.50),
                q80: q(0.80),
                q95: q(0.95),
            }
        })
        .collect()
}

fn summary_record(s: &EnsembleSummary) -> SummaryRecord {
    let (bandwidth, point_mass) = match &s.density {
        Density::Curve { bandwidth, .. } => (Some(*bandwidth), None),
        Density::PointMass { at } => (None, Some(*at)),
    };
    SummaryRecord {
        t2: s.t2,
        t2_date: from_decimal_years(s.t2).to_string(),
        n_windows: s.n_windows,
        n_success: s.n_success,
        n_failed: s.n_failed,
        n_filtered: s.n_filtered,
        fits: s.fits.iter().map(FitRecord::from).collect(),
        failures: s
            .failures
            .iter()
            .map(|f| FailureRecord {
                t1: f.window.t1,
                t2: f.window.t2,
                error: f.error.clone(),
            })
            .collect(),
        tc_quantiles: s.tc_quantiles.iter().map(|&(p, v)| (prob_key(p), v)).collect(),
        bandwidth,
        density_point_mass: point_mass,
        density: s.density.points().iter().map(|&(x, y)| [x, y]).collect(),
        extrapolation: band_records(s),
    }
}

pub fn summary_json(s: &EnsembleSummary) -> String {
    let mut out = serde_json::to_string_pretty(&summary_record(s)).expect("summary serializes");
    out.push('\n');
    out
}

pub fn fits_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from("t1,t2,tc,m,omega,phi,A,B,C,ssr,converged,seed\n");
    for f in &s.fits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            f.window.t1, f.window.t2, f.nl.tc, f.nl.m, f.nl.omega, f.nl.phi, f.lin.a, f.lin.b, f.lin.c, f.ssr,
            f.converged, f.seed
        );
    }
    out
}

pub fn quantiles_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from("prob,tc,date\n");
    for &(p, v) in &s.tc_quantiles {
        let _ = writeln!(out, "{p},{v},{}", from_decimal_years(v));
    }
    out
}

pub fn density_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from("tc,density\n");
    match &s.density {
        Density::Curve { points, .. } => {
            for (x, y) in points {
                let _ = writeln!(out, "{x},{y}");
            }
        }
        Density::PointMass { at } => {
            let _ = writeln!(out, "{at},inf");
        }
    }
    out
}

pub fn extrapolation_csv(s: &EnsembleSummary) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("t,date,n,q05,q20,q50,q80,q95\n");
    for b in band_records(s) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            b.t,
            from_decimal_years(b.t),
            b.n,
            cell(b.q05),
            cell(b.q20),
            cell(b.q50),
            cell(b.q80),
            cell(b.q95)
        );
    }
    out
}

#[derive(Debug, Serialize)]
struct StabilityRecord {
    t2: f64,
    t2_date: String,
    status: &'static str,
    error: Option<String>,
    mode: Option<f64>,
    drift: Option<f64>,
}

#[derive(Debug, Serialize)]
struct StabilityReport {
    center_t2: f64,
    n_t2: usize,
    rows: Vec<StabilityRecord>,
    /// Sum of |mode drift| over the first four t2 values, when all succeeded.
    total_drift_first4: Option<f64>,
    total_drift_all: Option<f64>,
}

pub fn stability_json(report: &ScanReport, center_t2: f64) -> String {
    let rows = report
        .stability
        .iter()
        .zip(&report.entries)
        .map(|(row, entry)| StabilityRecord {
            t2: row.t2,
            t2_date: from_decimal_years(row.t2).to_string(),
            status: if entry.outcome.is_ok() { "ok" } else { "failed" },
            error: entry.outcome.as_ref().err().map(|e| e.to_string()),
            mode: row.mode,
            drift: row.drift,
        })
        .collect();
    let rec = StabilityReport {
        center_t2,
        n_t2: report.entries.len(),
        rows,
        total_drift_first4: report.total_drift(4.min(report.entries.len())),
        total_drift_all: report.total_drift(report.entries.len()),
    };
    let mut out = serde_json::to_string_pretty(&rec).expect("stability serializes");
    out.push('\n');
    out
}

pub fn stability_csv(report: &ScanReport) -> String {
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("t2,date,status,mode,drift\n");
    for (row, entry) in report.stability.iter().zip(&report.entries) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.t2,
            from_decimal_years(row.t2),
            if entry.outcome.is_ok() { "ok" } else { "failed" },
            cell(row.mode),
            cell(row.drift)
        );
    }
    out
}

fn require<'a>(obj: &'a serde_json::Map<String, Value>, key: &str, what: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("{what}: missing key '{key}'"))
}

fn require_number(obj: &serde_json::Map<String, Value>, key: &str, what: &str) -> Result<f64, String> {
    require(obj, key, what)?
        .as_f64()
        .ok_or_else(|| format!("{what}: '{key}' is not a number"))
}

/// Structural check of a summary document against the layout above.
pub fn validate_summary_json(doc: &Value) -> Result<(), String> {
    let root = doc.as_object().ok_or("summary: not an object")?;
    let t2 = require_number(root, "t2", "summary")?;
    for key in ["n_windows", "n_success", "n_failed", "n_filtered"] {
        require(root, key, "summary")?
            .as_u64()
            .ok_or_else(|| format!("summary: '{key}' is not a count"))?;
    }
    let n_windows = root["n_windows"].as_u64().unwrap_or(0);
    let n_success = root["n_success"].as_u64().unwrap_or(0);
    let n_failed = root["n_failed"].as_u64().unwrap_or(0);
    if n_windows != n_success + n_failed {
        return Err("summary: n_windows != n_success + n_failed".into());
    }

    let fits = require(root, "fits", "summary")?.as_array().ok_or("summary: fits not an array")?;
    if fits.is_empty() {
        return Err("summary: fits is empty".into());
    }
    for (i, fit) in fits.iter().enumerate() {
        let what = format!("fits[{i}]");
        let obj = fit.as_object().ok_or_else(|| format!("{what}: not an object"))?;
        for key in ["t1", "t2", "tc", "m", "omega", "phi", "A", "B", "C", "ssr"] {
            require_number(obj, key, &what)?;
        }
        require(obj, "converged", &what)?
            .as_bool()
            .ok_or_else(|| format!("{what}: converged is not a bool"))?;
        require(obj, "seed", &what)?
            .as_u64()
            .ok_or_else(|| format!("{what}: seed is not an integer"))?;
        if obj["t2"].as_f64() != Some(t2) {
            return Err(format!("{what}: t2 differs from summary t2"));
        }
    }

    let quantiles = require(root, "tc_quantiles", "summary")?
        .as_object()
        .ok_or("summary: tc_quantiles not an object")?;
    let mut qs: Vec<(f64, f64)> = Vec::new();
    for (k, v) in quantiles {
        let p: f64 = k.parse().map_err(|_| format!("tc_quantiles: key '{k}' is not a probability"))?;
        let v = v.as_f64().ok_or_else(|| format!("tc_quantiles['{k}'] is not a number"))?;
        qs.push((p, v));
    }
    qs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if qs.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err("tc_quantiles: not monotone in probability".into());
    }

    let density = require(root, "density", "summary")?
        .as_array()
        .ok_or("summary: density not an array")?;
    for pair in density {
        let p = pair.as_array().ok_or("density: entry not a pair")?;
        if p.len() != 2 || p.iter().any(|x| x.as_f64().is_none()) {
            return Err("density: entry not a numeric pair".into());
        }
        if p[1].as_f64().unwrap_or(-1.0) < 0.0 {
            return Err("density: negative value".into());
        }
    }

    let bands = require(root, "extrapolation", "summary")?
        .as_array()
        .ok_or("summary: extrapolation not an array")?;
    for (i, b) in bands.iter().enumerate() {
        let what = format!("extrapolation[{i}]");
        let obj = b.as_object().ok_or_else(|| format!("{what}: not an object"))?;
        require_number(obj, "t", &what)?;
        for key in ["q05", "q20", "q80", "q95"] {
            let v = require(obj, key, &what)?;
            if !(v.is_null() || v.is_number()) {
                return Err(format!("{what}: {key} must be a number or null"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleConfig, WEEK};
    use crate::model::{LinearParams, NonlinearParams};
    use crate::timeseries::Window;

    fn summary() -> EnsembleSummary {
        let fits = (0..5).map(|i| {
            let w = Window::new(2007.0 + 0.02 * i as f64, 2008.0).unwrap();
            let fit = FitResult {
                window: w,
                nl: NonlinearParams::new(2008.1 + 0.01 * i as f64, 0.5, 8.0, 1.0),
                lin: LinearParams::new(10.0, -2.0, 0.3),
                ssr: 0.1,
                n_obs: 40,
                converged: true,
                termination: Termination::SsrTolerance,
                iterations: 4,
                seed: u64::MAX - i,
                ssr_trace: vec![0.2, 0.1],
                start_objective: 0.2,
            };
            (w, Ok(fit))
        });
        EnsembleSummary::from_fits(2008.0, fits.collect(), &EnsembleConfig::default(), WEEK).unwrap()
    }

    #[test]
    fn json_validates_and_keeps_seed_exact() {
        let s = summary();
        let text = summary_json(&s);
        let doc: Value = serde_json::from_str(&text).unwrap();
        validate_summary_json(&doc).unwrap();
        assert_eq!(doc["fits"][0]["seed"].as_u64(), Some(u64::MAX));
        assert_eq!(doc["t2_date"], "2008-01-01");
        assert!(doc["tc_quantiles"]["0.5"].is_number());
    }

    #[test]
    fn validator_rejects_broken_documents() {
        let doc: Value = serde_json::from_str(&summary_json(&summary())).unwrap();
        let mut missing = doc.clone();
        missing.as_object_mut().unwrap().remove("fits");
        assert!(validate_summary_json(&missing).is_err());
        let mut bad_count = doc.clone();
        bad_count["n_failed"] = Value::from(3);
        assert!(validate_summary_json(&bad_count).is_err());
        let mut bad_q = doc;
        bad_q["tc_quantiles"]["0.95"] = Value::from(1900.0);
        assert!(validate_summary_json(&bad_q).is_err());
    }

    #[test]
    fn csv_shapes() {
        let s = summary();
        assert_eq!(fits_csv(&s).lines().count(), 6);
        assert_eq!(extrapolation_csv(&s).lines().count(), 28);
        assert_eq!(quantiles_csv(&s).lines().count(), 6);
        assert!(density_csv(&s).lines().count() > 2);
    }
}
