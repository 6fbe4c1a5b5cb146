//! Command-line front end: run scenarios, evaluate the closed-form moment
//! curves, and analyze measured frequency CSVs.
//!
//! Exit codes: 0 success, 2 validation/domain error, 3 simulation divergence.

use clap::{Parser, Subcommand, ValueEnum};
use freqlab::error::Error;
use freqlab::measured::MeasuredSeries;
use freqlab::oracle::{
    mean_delta_omega, stationary_sigma, var_delta_omega, var_zero_damping, SimplifiedSystem,
    SinusoidDrive,
};
use freqlab::scenario::{builtin_scenario, run, GridScenario, RunArtifacts};
use freqlab::sde::OuParams;
use freqlab::stats::{
    deadband_stats, modality, normalize_density, window_aggregate, AggregationWindow, Histogram,
    ModalityReport, SeriesUnit,
};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "freqlab",
    version,
    about = "Simulate and analyze power-system frequency fluctuations driven by stochastic loads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (builtin label or TOML file) and write its artifacts.
    Simulate {
        /// Builtin scenario label (a-i, si) or path to a scenario TOML file.
        #[arg(long)]
        scenario: String,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for samples.csv, histogram.csv, modality.txt, report.txt.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override the scenario's duration (s).
        #[arg(long)]
        duration_override: Option<f64>,
    },
    /// Print a closed-form moment curve of the two-state linear model as CSV.
    Oracle {
        /// Inertia constant H (s).
        #[arg(long)]
        h: f64,
        /// Load damping D_L (pu/pu).
        #[arg(long)]
        dl: f64,
        /// Load reversal rate alpha (1/s).
        #[arg(long)]
        alpha: f64,
        /// Load noise intensity b (pu/sqrt(s)).
        #[arg(long)]
        b: f64,
        /// Sinusoidal drive amplitude rho (pu/s); requires --psi.
        #[arg(long, requires = "psi")]
        rho: Option<f64>,
        /// Sinusoidal drive angular frequency psi (rad/s); requires --rho.
        #[arg(long, requires = "rho")]
        psi: Option<f64>,
        #[arg(long, value_enum)]
        curve: Curve,
        /// Last time point (s).
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        /// Time step between rows (s).
        #[arg(long, default_value_t = 1.0)]
        t_step: f64,
    },
    /// Analyze a measured `timestamp,frequency_hz` CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = WindowArg::Full)]
        window: WindowArg,
        /// Dead-band half-width (mHz) for exceedance statistics.
        #[arg(long)]
        d_za_mhz: Option<f64>,
        /// Nominal frequency (Hz).
        #[arg(long, default_value_t = 60.0)]
        f0_hz: f64,
        /// Histogram bin count.
        #[arg(long, default_value_t = 101)]
        bins: usize,
        /// Output directory for per-window histograms and summaries.
        #[arg(long, default_value = "analysis")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    /// Stationary standard deviation (a single value).
    Sigma,
    /// Transient variance Var[delta_omega](t).
    Var,
    /// Zero-damping variance growth (requires --dl 0).
    Var0,
    /// Transient mean under the sinusoidal drive.
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Hourly,
    Daily,
    Full,
}

impl From<WindowArg> for AggregationWindow {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Hourly => AggregationWindow::Hourly,
            WindowArg::Daily => AggregationWindow::Daily,
            WindowArg::Full => AggregationWindow::Full,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out_dir,
            duration_override,
        } => cmd_simulate(&scenario, seed, &out_dir, duration_override),
        Command::Oracle {
            h,
            dl,
            alpha,
            b,
            rho,
            psi,
            curve,
            t_max,
            t_step,
        } => cmd_oracle(h, dl, alpha, b, rho, psi, curve, t_max, t_step),
        Command::Analyze {
            input,
            window,
            d_za_mhz,
            f0_hz,
            bins,
            out_dir,
        } => cmd_analyze(&input, window.into(), d_za_mhz, f0_hz, bins, &out_dir),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::SimulationDiverged { .. } => 3,
                _ => 2,
            };
            std::process::exit(code);
        }
    }
}

fn load_scenario(spec: &str) -> Result<GridScenario, Error> {
    let path = Path::new(spec);
    if path.exists() {
        GridScenario::load(path)
    } else {
        builtin_scenario(spec).map_err(|_| {
            Error::InvalidArgument(format!(
                "'{spec}' is neither an existing scenario file nor a builtin label"
            ))
        })
    }
}

fn cmd_simulate(
    spec: &str,
    seed: Option<u64>,
    out_dir: &Path,
    duration_override: Option<f64>,
) -> Result<(), Error> {
    let mut sc = load_scenario(spec)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(d) = duration_override {
        sc.duration_s = d;
    }
    let art = run(&sc)?;
    std::fs::create_dir_all(out_dir)?;

    let mut samples = BufWriter::new(File::create(out_dir.join("samples.csv"))?);
    art.series.write_csv(&mut samples)?;
    samples.flush()?;

    let mut hist = BufWriter::new(File::create(out_dir.join("histogram.csv"))?);
    art.histogram.write_csv(&mut hist)?;
    hist.flush()?;

    let mut modality_out = BufWriter::new(File::create(out_dir.join("modality.txt"))?);
    art.modality.write_text(&mut modality_out)?;
    modality_out.flush()?;

    let mut report = BufWriter::new(File::create(out_dir.join("report.txt"))?);
    write_report(&art, &mut report)?;
    report.flush()?;
    Ok(())
}

fn write_report<W: Write>(art: &RunArtifacts, out: &mut W) -> Result<(), Error> {
    let (mean, var) = art.series.moments();
    writeln!(out, "label={}", art.scenario.label)?;
    writeln!(out, "seed={}", art.scenario.seed)?;
    writeln!(out, "duration_s={}", art.scenario.duration_s)?;
    writeln!(out, "dt_s={}", art.scenario.dt_s)?;
    writeln!(out, "cadence_s={}", art.scenario.cadence_s)?;
    writeln!(out, "n_samples={}", art.series.count())?;
    writeln!(out, "mean_pu={mean:.9e}")?;
    writeln!(out, "variance_pu2={var:.9e}")?;
    writeln!(out, "std_mhz={:.6}", var.sqrt() * 60.0 * 1000.0)?;
    writeln!(out, "d_za_pu={:.9e}", art.d_za_pu)?;
    writeln!(out, "fraction_outside_deadband={:.9}", art.deadband.fraction_outside)?;
    writeln!(out, "deadband_crossings={}", art.deadband.crossing_count)?;
    writeln!(out, "wear_events={}", art.wear_events)?;
    writeln!(out, "exceedance_trend_z={:.6}", art.deadband.trend.z_score)?;
    writeln!(out, "modality_verdict={}", art.modality.verdict)?;
    if let Some(si) = &art.si {
        writeln!(out, "si_battery_min_mj={:.6}", si.e_min_mj)?;
        writeln!(out, "si_battery_max_mj={:.6}", si.e_max_mj)?;
        writeln!(out, "si_power_mean_mw={:.9e}", si.power_mean_mw)?;
        writeln!(out, "si_power_std_mw={:.6}", si.power_std_mw)?;
    }
    match &art.comparison {
        Some(cmp) => {
            writeln!(out, "oracle_comparison=present")?;
            cmp.write_text(out)?;
        }
        None => writeln!(out, "oracle_comparison=not-applicable")?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    h: f64,
    dl: f64,
    alpha: f64,
    b: f64,
    rho: Option<f64>,
    psi: Option<f64>,
    curve: Curve,
    t_max: f64,
    t_step: f64,
) -> Result<(), Error> {
    let ou = OuParams {
        mu: 0.0,
        alpha,
        b,
        eta0: 0.0,
    };
    let drive = match (rho, psi) {
        (Some(rho), Some(psi)) => Some(SinusoidDrive { rho, psi }),
        _ => None,
    };
    let sys = SimplifiedSystem::new(h, dl, ou, drive)?;
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if let Curve::Sigma = curve {
        writeln!(out, "{:.6}", stationary_sigma(&sys)?)?;
        out.flush()?;
        return Ok(());
    }
    if !(t_step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_step must be positive, got {t_step}"
        )));
    }
    if t_max < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "t_max must be nonnegative, got {t_max}"
        )));
    }
    let eval: fn(f64, &SimplifiedSystem) -> Result<f64, Error> = match curve {
        Curve::Var => var_delta_omega,
        Curve::Var0 => var_zero_damping,
        Curve::Mean => mean_delta_omega,
        Curve::Sigma => unreachable!(),
    };
    // probe t=0 first so domain errors surface before any output
    eval(0.0, &sys)?;
    writeln!(out, "t,value")?;
    let n_rows = (t_max / t_step).floor() as u64;
    for i in 0..=n_rows {
        let t = (i as f64 * t_step).min(t_max);
        writeln!(out, "{t:.9e},{:.9e}", eval(t, &sys)?)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_analyze(
    input: &Path,
    window: AggregationWindow,
    d_za_mhz: Option<f64>,
    f0_hz: f64,
    bins: usize,
    out_dir: &Path,
) -> Result<(), Error> {
    let file = File::open(input)?;
    let source = input.display().to_string();
    let measured = MeasuredSeries::parse(BufReader::new(file), f0_hz, &source)?;
    let series = measured.deviation_series()?;

    let (_, var) = series.moments();
    let d_za_hz = d_za_mhz.unwrap_or(0.0) / 1000.0;
    let half_range = 3.0 * d_za_hz.max(2.0 * var.sqrt()).max(1e-9);
    let (windows, combined) = window_aggregate(&series, window, bins, (-half_range, half_range))?;

    std::fs::create_dir_all(out_dir)?;

    // windows are independent; diagnose them on the worker pool
    let diagnosed: Vec<Result<(Histogram, ModalityReport), Error>> = {
        use rayon::prelude::*;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = freqlab::scenario::thread_cap() {
            builder = builder.num_threads(n);
        }
        let diagnose = |h: &Histogram| -> Result<(Histogram, ModalityReport), Error> {
            let norm = normalize_density(h)?;
            let report = modality(&norm)?;
            Ok((norm, report))
        };
        match builder.build() {
            Ok(pool) => pool.install(|| windows.par_iter().map(diagnose).collect()),
            Err(_) => windows.iter().map(diagnose).collect(),
        }
    };

    let mut verdicts = BufWriter::new(File::create(out_dir.join("verdicts.txt"))?);
    let mut drift = BufWriter::new(File::create(out_dir.join("drift.csv"))?);
    writeln!(drift, "window,start_time_s,mean_hz,variance_hz2")?;
    let per_window = windows
        .first()
        .map(|h| h.total_samples() as usize)
        .unwrap_or(0);
    for (w, item) in diagnosed.into_iter().enumerate() {
        let (norm, report) = item?;
        let mut hist_out =
            BufWriter::new(File::create(out_dir.join(format!("window_{w:03}.csv")))?);
        norm.write_csv(&mut hist_out)?;
        hist_out.flush()?;
        writeln!(verdicts, "window_{w:03}={}", report.verdict)?;
        let chunk = &series.values[w * per_window..((w + 1) * per_window).min(series.count())];
        let (mean, cvar) = chunk
            .iter()
            .fold((0.0, 0.0), |(s, s2), v| (s + v, s2 + v * v));
        let n = chunk.len() as f64;
        let (mean, cvar) = (mean / n, (cvar / n - (mean / n).powi(2)).max(0.0));
        let start = series.start_time + (w * per_window) as f64 * series.cadence;
        writeln!(drift, "{w},{start:.9e},{mean:.9e},{cvar:.9e}")?;
    }
    let combined_norm = normalize_density(&combined)?;
    let combined_report = modality(&combined_norm)?;
    let mut hist_out = BufWriter::new(File::create(out_dir.join("combined.csv"))?);
    combined_norm.write_csv(&mut hist_out)?;
    hist_out.flush()?;
    writeln!(verdicts, "combined={}", combined_report.verdict)?;
    verdicts.flush()?;
    drift.flush()?;

    let mut summary = BufWriter::new(File::create(out_dir.join("summary.txt"))?);
    writeln!(summary, "source={source}")?;
    writeln!(summary, "rows_total={}", measured.total_rows)?;
    writeln!(summary, "rows_bad={}", measured.bad_rows)?;
    writeln!(summary, "rows_outside_sanity={}", measured.sanity_violations)?;
    writeln!(summary, "samples_used={}", measured.frequency_hz.len())?;
    writeln!(summary, "cadence_s={}", measured.cadence_s())?;
    writeln!(summary, "gap_count={}", measured.gaps.len())?;
    for (before, after) in &measured.gaps {
        writeln!(summary, "gap={before}..{after}")?;
    }
    writeln!(summary, "windows={}", windows.len())?;
    writeln!(summary, "combined_verdict={}", combined_report.verdict)?;
    if let Some(mhz) = d_za_mhz {
        let db = deadband_stats(&series, mhz / 1000.0, SeriesUnit::Hz)?;
        writeln!(summary, "deadband_mhz={mhz}")?;
        writeln!(summary, "fraction_outside_deadband={:.9}", db.fraction_outside)?;
        writeln!(summary, "deadband_crossings={}", db.crossing_count)?;
        writeln!(summary, "exceedance_trend_z={:.6}", db.trend.z_score)?;
    }
    summary.flush()?;
    Ok(())
}
