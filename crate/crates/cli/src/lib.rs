//! The `lppl` command line: fit, scan, synth and smooth.
//!
//! Exit status: 0 success, 1 input or configuration error (including bad
//! usage), 2 computation failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lppl_core::config::{parse_delimiter, RunConfig};
use lppl_core::ensemble::{DensityMethod, EnsembleConfig, EnsembleSummary};
use lppl_core::model::{LinearParams, NonlinearParams, OscillationForm};
use lppl_core::report;
use lppl_core::synth::{generate_at, SynthSpec};
use lppl_core::timeseries::{from_decimal_years, moving_average, parse_csv, parse_iso_date, to_decimal_years};
use lppl_core::{scan_t2_at, Error, TimeSeries};

#[derive(Parser)]
#[command(name = "lppl", version, about = "LPPL crash-time ensembles for univariate series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One window ensemble ending at --t2.
    Fit(FitArgs),
    /// Ensembles for several t2 values around --center, plus a stability report.
    Scan(ScanArgs),
    /// Write a synthetic series and its ground truth.
    Synth(SynthArgs),
    /// Trailing moving average of a series.
    Smooth(SmoothArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }
    fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Kde,
    Histogram,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long)]
    value_column: Option<String>,
    /// One character, or `tab`.
    #[arg(long)]
    delimiter: Option<String>,
    /// Moving-average length in observations; 1 disables smoothing.
    #[arg(long)]
    ma_len: Option<usize>,
}

#[derive(Args)]
struct CommonArgs {
    #[command(flatten)]
    input: InputArgs,
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    span_min_months: Option<f64>,
    #[arg(long)]
    span_max_months: Option<f64>,
    #[arg(long)]
    step_days: Option<f64>,
    /// Comma-separated quantile probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_candidates: Option<usize>,
    #[arg(long)]
    density: Option<DensityArg>,
    /// Drop fits with B >= 0 before aggregating.
    #[arg(long)]
    require_negative_b: bool,
    /// Use cos(ln(ω τ) + φ) instead of cos(ω ln τ + φ).
    #[arg(long)]
    literal_cos: bool,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// End of every window (ISO date).
    #[arg(long)]
    t2: String,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Middle t2 of the scan (ISO date).
    #[arg(long)]
    center: String,
    #[arg(long)]
    n_t2: Option<usize>,
    /// Days between consecutive t2 values.
    #[arg(long)]
    scan_step_days: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "2006-01-04")]
    start: String,
    #[arg(long, default_value = "2008-02-13")]
    end: String,
    #[arg(long, default_value = "2008-03-14")]
    tc: String,
    #[arg(long, default_value_t = 0.5)]
    m: f64,
    #[arg(long, default_value_t = 8.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    phi: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 7)]
    spacing_days: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    literal_cos: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Error with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::EmptyInput
            | Error::InsufficientData { .. }
            | Error::Coverage(_)
            | Error::Config(_)
            | Error::Io(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

/// Runs one invocation; `args` includes the program name. Returns the exit
/// status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Smooth(a) => cmd_smooth(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?;
            Ok(RunConfig::from_toml(&text)?)
        }
    }
}

fn apply_input(rc: &mut RunConfig, a: &InputArgs) -> CliResult<()> {
    if let Some(v) = &a.date_column {
        rc.input.date_column = v.clone();
    }
    if let Some(v) = &a.value_column {
        rc.input.value_column = v.clone();
    }
    if let Some(v) = &a.delimiter {
        parse_delimiter(v)?;
        rc.input.delimiter = v.clone();
    }
    if let Some(v) = a.ma_len {
        rc.input.ma_len = v;
    }
    Ok(())
}

fn apply_common(rc: &mut RunConfig, a: &CommonArgs) -> CliResult<()> {
    apply_input(rc, &a.input)?;
    let e = &mut rc.ensemble;
    if let Some(v) = a.span_min_months {
        e.span_min_months = v;
    }
    if let Some(v) = a.span_max_months {
        e.span_max_months = v;
    }
    if let Some(v) = a.step_days {
        e.step_days = v;
    }
    if let Some(v) = &a.probs {
        e.probs = v.clone();
    }
    if let Some(d) = a.density {
        e.density = match d {
            DensityArg::Kde => DensityMethod::Kde,
            DensityArg::Histogram => DensityMethod::Histogram,
        };
    }
    if a.require_negative_b {
        e.require_negative_b = true;
    }
    if let Some(v) = a.seed {
        rc.seed = v;
    }
    if let Some(v) = a.n_candidates {
        rc.n_candidates = Some(v);
    }
    if a.literal_cos {
        rc.literal_cos = true;
    }
    Ok(())
}

/// Reads and smooths the input series.
fn load_series(rc: &RunConfig, path: &Path) -> CliResult<TimeSeries> {
    let csv = rc.input.csv()?;
    let file = fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    let raw = parse_csv(file, &csv)?;
    Ok(moving_average(&raw, rc.input.ma_len)?)
}

fn date_arg(name: &str, s: &str) -> CliResult<NaiveDate> {
    parse_iso_date(s).map_err(|e| input_error(format!("--{name}: {e}")))
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(input_error("--jobs must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| input_error(format!("thread pool: {e}")))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))
}

fn write_summary(dir: &Path, stem: &str, s: &EnsembleSummary, format: Format) -> CliResult<()> {
    if format.json() {
        write(dir, &format!("{stem}.json"), &report::summary_json(s))?;
    }
    if format.csv() {
        write(dir, &format!("{stem}.fits.csv"), &report::fits_csv(s))?;
        write(dir, &format!("{stem}.quantiles.csv"), &report::quantiles_csv(s))?;
        write(dir, &format!("{stem}.density.csv"), &report::density_csv(s))?;
        write(dir, &format!("{stem}.extrapolation.csv"), &report::extrapolation_csv(s))?;
    }
    Ok(())
}

fn describe(date: NaiveDate, s: &EnsembleSummary) -> String {
    let band = match (s.quantile(0.05), s.quantile(0.95)) {
        (Some(lo), Some(hi)) => format!("tc 5-95%: {} .. {}", from_decimal_years(lo), from_decimal_years(hi)),
        _ => format!("tc median: {}", from_decimal_years(s.quantile(0.5).unwrap_or(f64::NAN))),
    };
    format!(
        "t2 {date}: {} windows, {} failed, {} filtered, {band}",
        s.n_windows, s.n_failed, s.n_filtered
    )
}

fn ensemble_setup(a: &CommonArgs) -> CliResult<(RunConfig, EnsembleConfig, TimeSeries)> {
    let mut rc = load_config(a.config.as_deref())?;
    apply_common(&mut rc, a)?;
    let cfg = rc.ensemble_config()?;
    let data = load_series(&rc, &a.input.input)?;
    Ok((rc, cfg, data))
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let t2 = date_arg("t2", &a.t2)?;
    let (_, cfg, data) = ensemble_setup(&a.common)?;
    let pool = pool(a.common.jobs)?;
    let summary = pool.install(|| lppl_core::run_ensemble(&data, to_decimal_years(t2), &cfg))?;
    prepare_out(&a.common.out)?;
    write_summary(&a.common.out, &format!("fit_{t2}"), &summary, a.common.format)?;
    println!("{}", describe(t2, &summary));
    Ok(())
}

fn cmd_scan(a: ScanArgs) -> CliResult<()> {
    let center = date_arg("center", &a.center)?;
    let mut rc = load_config(a.common.config.as_deref())?;
    apply_common(&mut rc, &a.common)?;
    if let Some(n) = a.n_t2 {
        rc.scan.n_t2 = n;
    }
    if let Some(d) = a.scan_step_days {
        rc.scan.step_days = d;
    }
    rc.scan_step()?;
    if rc.scan.step_days.fract() != 0.0 {
        return Err(input_error("scan step must be a whole number of days"));
    }
    let cfg = rc.ensemble_config()?;
    let data = load_series(&rc, &a.common.input.input)?;

    let half = (rc.scan.n_t2 as i64 - 1) / 2;
    let step = rc.scan.step_days as i64;
    let dates: Vec<NaiveDate> = (0..rc.scan.n_t2 as i64)
        .map(|i| center + Duration::days((i - half) * step))
        .collect();
    let t2s: Vec<f64> = dates.iter().map(|&d| to_decimal_years(d)).collect();
    let pool = pool(a.common.jobs)?;
    let scan = pool.install(|| scan_t2_at(&data, &t2s, &cfg))?;

    prepare_out(&a.common.out)?;
    let mut first_error = None;
    for (date, entry) in dates.iter().zip(&scan.entries) {
        match &entry.outcome {
            Ok(s) => {
                write_summary(&a.common.out, &format!("scan_{date}"), s, a.common.format)?;
                println!("{}", describe(*date, s));
            }
            Err(e) => {
                eprintln!("t2 {date}: failed: {e}");
                first_error.get_or_insert_with(|| e.clone());
            }
        }
    }
    let stem = format!("scan_{center}");
    if a.common.format.json() {
        write(&a.common.out, &format!("{stem}.stability.json"), &report::stability_json(&scan, to_decimal_years(center)))?;
    }
    if a.common.format.csv() {
        write(&a.common.out, &format!("{stem}.stability.csv"), &report::stability_csv(&scan))?;
    }
    if scan.entries.iter().all(|e| e.outcome.is_err()) {
        let all_input = scan.entries.iter().all(|e| matches!(e.outcome, Err(Error::Coverage(_))));
        let err = first_error.expect("at least one entry");
        let mut f = Failure::from(err);
        f.code = if all_input { 1 } else { 2 };
        f.message = format!("every t2 failed; first: {}", f.message);
        return Err(f);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let start = date_arg("start", &a.start)?;
    let end = date_arg("end", &a.end)?;
    let tc = date_arg("tc", &a.tc)?;
    if a.spacing_days <= 0 {
        return Err(input_error("--spacing-days must be positive"));
    }
    if start >= end {
        return Err(input_error("--start must precede --end"));
    }
    let spec = SynthSpec {
        nl: NonlinearParams::new(to_decimal_years(tc), a.m, a.omega, a.phi),
        lin: LinearParams::new(a.a, a.b, a.c),
        start: to_decimal_years(start),
        end: to_decimal_years(end),
        spacing: a.spacing_days as f64 / 365.25,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
        form: if a.literal_cos {
            OscillationForm::Literal
        } else {
            OscillationForm::Standard
        },
    };
    spec.validate()?;
    let mut dates = Vec::new();
    let mut d = start;
    while d <= end {
        dates.push(d);
        d += Duration::days(a.spacing_days);
    }
    let times: Vec<f64> = dates.iter().map(|&d| to_decimal_years(d)).collect();
    let out = generate_at(&times, &spec)?;

    prepare_out(&a.out)?;
    let stem = format!("synth_{end}");
    write(&a.out, &format!("{stem}.csv"), &out.series.to_csv())?;
    let mut truth = serde_json::to_string_pretty(&out.truth).expect("truth serializes");
    truth.push('\n');
    write(&a.out, &format!("{stem}.truth.json"), &truth)?;
    println!("{} observations {} .. {}", out.series.len(), start, end);
    Ok(())
}

fn cmd_smooth(a: SmoothArgs) -> CliResult<()> {
    let mut rc = load_config(a.config.as_deref())?;
    apply_input(&mut rc, &a.input)?;
    let smoothed = load_series(&rc, &a.input.input)?;
    let last = from_decimal_years(smoothed.last_time());
    prepare_out(&a.out)?;
    write(&a.out, &format!("smooth_{last}.csv"), &smoothed.to_csv())?;
    println!("{} smoothed observations through {last}", smoothed.len());
    Ok(())
}
