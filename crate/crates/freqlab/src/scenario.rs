//! Declarative scenario configuration, the built-in scenario library,
//! orchestration of simulation plus statistics, and analytic-vs-empirical
//! comparison reports.
//!
//! Scenario files are TOML with units spelled out in the key names
//! (`d_za_mhz`, `p_l0_mw`, `e_cap_mj`, ...). Unknown keys are rejected.

use crate::error::{Error, Result};
use crate::grid::{
    step_grid, Agc, DriftingLoad, GridModel, StochasticLoad, SyntheticInertia,
};
use crate::oracle::{self, SimplifiedSystem};
use crate::rng::NoiseStream;
use crate::sde::OuParams;
use crate::stats::{
    build_histogram, deadband_stats, modality, normalize_density, DeadbandStats, Histogram,
    ModalityReport, SampleSeries, SeriesUnit,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticLoadConfig {
    pub p_l0_mw: f64,
    pub alpha_per_s: f64,
    pub b_per_sqrt_s: f64,
    #[serde(default)]
    pub mu_per_s: f64,
    #[serde(default)]
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgcConfig {
    pub k_agc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftingLoadConfig {
    pub p_d0_mw: f64,
    pub amplitude_pu: f64,
    pub timescale_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInertiaConfig {
    pub p_max_mw: f64,
    pub e_cap_mj: f64,
    pub e0_mj: f64,
    pub k_derivative_mw_s_per_hz: f64,
    pub k_proportional_mw_per_hz: f64,
    pub filter_fc_hz: f64,
}

/// A fully-specified simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridScenario {
    pub label: String,
    pub duration_s: f64,
    pub dt_s: f64,
    pub warmup_s: f64,
    pub seed: u64,
    pub d_l_pu: f64,
    pub d_za_mhz: f64,
    pub inertia_multiplier: f64,
    pub cadence_s: f64,
    pub n_bins: usize,
    pub stochastic_load: StochasticLoadConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agc: Option<AgcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drifting_load: Option<DriftingLoadConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_inertia: Option<SyntheticInertiaConfig>,
}

impl GridScenario {
    pub fn validate(&self) -> Result<()> {
        if self.duration_s < 3600.0 {
            return Err(Error::InvalidArgument(format!(
                "duration must be at least 3600 s, got {}",
                self.duration_s
            )));
        }
        if !(self.dt_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt_s
            )));
        }
        if !(self.inertia_multiplier > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inertia_multiplier must be positive, got {}",
                self.inertia_multiplier
            )));
        }
        if self.d_za_mhz < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "d_za_mhz must be nonnegative, got {}",
                self.d_za_mhz
            )));
        }
        if self.d_l_pu < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "d_l_pu must be nonnegative, got {}",
                self.d_l_pu
            )));
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_bins must be at least 2, got {}",
                self.n_bins
            )));
        }
        let ou = self.ou_params();
        ou.validate()?;
        if self.warmup_s < 10.0 / ou.alpha {
            return Err(Error::InvalidArgument(format!(
                "warmup of {} s is below the stationarity floor 10/alpha = {} s",
                self.warmup_s,
                10.0 / ou.alpha
            )));
        }
        let ratio = self.cadence_s / self.dt_s;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio < 1.0 - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "cadence {} s must be an integer multiple of dt {} s",
                self.cadence_s, self.dt_s
            )));
        }
        if let Some(si) = &self.synthetic_inertia {
            // reject up front rather than letting the constructor fail mid-run
            SyntheticInertia::new(
                si.p_max_mw,
                si.e_cap_mj,
                si.e0_mj,
                si.k_derivative_mw_s_per_hz,
                si.k_proportional_mw_per_hz,
                si.filter_fc_hz,
            )?;
        }
        Ok(())
    }

    pub fn ou_params(&self) -> OuParams {
        OuParams {
            mu: self.stochastic_load.mu_per_s,
            alpha: self.stochastic_load.alpha_per_s,
            b: self.stochastic_load.b_per_sqrt_s,
            eta0: self.stochastic_load.eta0,
        }
    }

    pub fn load(path: &Path) -> Result<GridScenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<GridScenario> {
        let sc: GridScenario = toml::from_str(text)
            .map_err(|e| Error::ScenarioParse(format!("scenario file invalid: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::ScenarioParse(format!("scenario serialization failed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn to_grid_model(&self) -> Result<GridModel> {
        self.validate()?;
        let stochastic = StochasticLoad::new(self.stochastic_load.p_l0_mw, self.ou_params())?;
        let drifting = self.drifting_load.as_ref().map(|d| DriftingLoad {
            p_d0: d.p_d0_mw,
            amplitude: d.amplitude_pu,
            timescale: d.timescale_s,
        });
        let agc = match &self.agc {
            Some(a) => Agc::new(a.k_agc),
            None => Agc::disabled(),
        };
        let si = match &self.synthetic_inertia {
            Some(s) => Some(SyntheticInertia::new(
                s.p_max_mw,
                s.e_cap_mj,
                s.e0_mj,
                s.k_derivative_mw_s_per_hz,
                s.k_proportional_mw_per_hz,
                s.filter_fc_hz,
            )?),
            None => None,
        };
        GridModel::two_machine(
            self.d_l_pu,
            self.d_za_mhz / 1000.0,
            self.inertia_multiplier,
            stochastic,
            drifting,
            agc,
            si,
        )
    }

    /// Two-state linear reduction (aggregate inertia, damping, OU load in
    /// system pu) used for oracle comparisons. Only meaningful when
    /// governors, AGC and SI are out of the picture.
    pub fn linear_reduction(&self) -> Result<SimplifiedSystem> {
        let model = self.to_grid_model()?;
        let scale = self.stochastic_load.p_l0_mw / model.s_base;
        let ou = self.ou_params();
        let ou_pu = OuParams {
            mu: ou.mu * scale,
            alpha: ou.alpha,
            b: ou.b * scale,
            eta0: ou.eta0 * scale,
        };
        SimplifiedSystem::new(model.h_total(), self.d_l_pu, ou_pu, None)
    }
}

fn base_scenario(label: &str) -> GridScenario {
    GridScenario {
        label: label.to_string(),
        duration_s: 86_400.0,
        dt_s: 0.01,
        warmup_s: 600.0,
        seed: 20_240_601,
        d_l_pu: 2.0,
        d_za_mhz: 0.0,
        inertia_multiplier: 1.0,
        cadence_s: 1.0,
        n_bins: 101,
        stochastic_load: StochasticLoadConfig {
            p_l0_mw: 1.0,
            alpha_per_s: 0.5,
            b_per_sqrt_s: 1.0,
            mu_per_s: 0.0,
            eta0: 0.0,
        },
        agc: None,
        drifting_load: None,
        synthetic_inertia: None,
    }
}

/// Drifting load with a period of exactly one day.
fn daily_drift() -> DriftingLoadConfig {
    DriftingLoadConfig {
        p_d0_mw: 14.9,
        amplitude_pu: 0.12,
        timescale_s: 86_400.0 / std::f64::consts::TAU,
    }
}

/// Synthetic-inertia controller gains, tuned so the device meets its
/// variance-reduction target within the 2 MW / 160 MJ limits, then frozen.
fn default_si() -> SyntheticInertiaConfig {
    SyntheticInertiaConfig {
        p_max_mw: 2.0,
        e_cap_mj: 160.0,
        e0_mj: 80.0,
        k_derivative_mw_s_per_hz: 50.0,
        k_proportional_mw_per_hz: 2000.0,
        filter_fc_hz: 1000.0,
    }
}

/// The built-in scenario library: cases (a)-(i) plus the synthetic-inertia
/// case (si). Parameters are frozen; tests assert the literal table.
pub fn builtin_scenarios() -> Vec<GridScenario> {
    let mut out = Vec::new();

    // (a) nominal: stochastic load only, no dead-bands
    out.push(base_scenario("a"));

    // (b) dead-bands of 36 mHz
    let mut b = base_scenario("b");
    b.d_za_mhz = 36.0;
    out.push(b);

    // (c) dead-bands, no load damping
    let mut c = base_scenario("c");
    c.d_za_mhz = 36.0;
    c.d_l_pu = 0.0;
    out.push(c);

    // (d) no damping, ten-fold stochastic load
    let mut d = base_scenario("d");
    d.d_za_mhz = 36.0;
    d.d_l_pu = 0.0;
    d.stochastic_load.p_l0_mw = 10.0;
    out.push(d);

    // (e) wide dead-bands, drifting load, no AGC. The drift timescale is set
    // so one full cycle fits in the simulated day: the daily mean must swing
    // both above and below nominal for the two-sided histogram to form.
    let mut e = base_scenario("e");
    e.d_za_mhz = 100.0;
    e.drifting_load = Some(daily_drift());
    out.push(e);

    // (f) as (e) with AGC and 36 mHz dead-bands
    let mut f = base_scenario("f");
    f.d_za_mhz = 36.0;
    f.drifting_load = Some(daily_drift());
    f.agc = Some(AgcConfig { k_agc: 0.01 });
    out.push(f);

    // (g)/(h)/(i) inertia scaling studies, no damping
    let mut g = base_scenario("g");
    g.d_za_mhz = 36.0;
    g.d_l_pu = 0.0;
    g.inertia_multiplier = 10.0;
    out.push(g);

    let mut h = base_scenario("h");
    h.d_za_mhz = 36.0;
    h.d_l_pu = 0.0;
    h.inertia_multiplier = 10.0;
    h.duration_s = 4.0 * 86_400.0;
    out.push(h);

    let mut i = base_scenario("i");
    i.d_za_mhz = 36.0;
    i.d_l_pu = 0.0;
    i.inertia_multiplier = 100.0;
    i.duration_s = 8.0 * 86_400.0;
    out.push(i);

    // (si) synthetic inertia on the no-damping case, no AGC, no drift
    let mut si = base_scenario("si");
    si.d_za_mhz = 36.0;
    si.d_l_pu = 0.0;
    si.dt_s = 0.001;
    si.synthetic_inertia = Some(default_si());
    out.push(si);

    out
}

pub fn builtin_scenario(label: &str) -> Result<GridScenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.label == label)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown built-in scenario '{label}' (available: a-i, si)"
            ))
        })
}

/// One pass/fail line of a comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub name: String,
    pub threshold: f64,
    pub relative_error: f64,
    pub pass: bool,
}

/// Analytic-vs-empirical comparison for a linear-regime run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Aggregate inertia, damping and OU parameters used (audit trail of the
    /// MW -> pu conversion).
    pub h: f64,
    pub d_l: f64,
    pub b_pu: f64,
    pub sigma_analytic: Option<f64>,
    pub pooled_variance: f64,
    pub criteria: Vec<CriterionOutcome>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "h_total_s={:.6}", self.h)?;
        writeln!(out, "d_l_pu={:.6}", self.d_l)?;
        writeln!(out, "b_pu={:.6e}", self.b_pu)?;
        if let Some(sigma) = self.sigma_analytic {
            writeln!(out, "sigma_analytic_pu={sigma:.9e}")?;
        }
        writeln!(out, "pooled_variance_pu2={:.9e}", self.pooled_variance)?;
        for c in &self.criteria {
            writeln!(
                out,
                "criterion={} threshold={:.3} relative_error={:.6} outcome={}",
                c.name,
                c.threshold,
                c.relative_error,
                if c.pass { "pass" } else { "fail" }
            )?;
        }
        Ok(())
    }
}

/// Estimates the linear variance-growth rate of a zero-damping series by
/// regressing mean-squared increments on the lag. Squared-value-vs-time
/// fits are useless here: the deviations of a single run are correlated on
/// the scale of the whole run.
pub fn zero_damping_slope_estimate(series: &SampleSeries) -> Result<f64> {
    let n = series.count();
    if n < 1000 {
        return Err(Error::EmptyInput(format!(
            "slope estimate needs at least 1000 samples, got {n}"
        )));
    }
    // lags from 10 to 100 cadences: long enough that the OU memory (~1/alpha)
    // is negligible, short enough for many increments per lag
    let lags: Vec<usize> = (1..=10).map(|k| 10 * k).collect();
    let mut sum_l = 0.0;
    let mut sum_ll = 0.0;
    let mut sum_v = 0.0;
    let mut sum_lv = 0.0;
    for &lag in &lags {
        let mut acc = 0.0;
        let mut count = 0usize;
        // non-overlapping increments keep the regression points independent
        let mut i = 0;
        while i + lag < n {
            let d = series.values[i + lag] - series.values[i];
            acc += d * d;
            count += 1;
            i += lag;
        }
        let var = acc / count as f64;
        let l = lag as f64 * series.cadence;
        sum_l += l;
        sum_ll += l * l;
        sum_v += var;
        sum_lv += l * var;
    }
    let k = lags.len() as f64;
    let denom = k * sum_ll - sum_l * sum_l;
    if denom.abs() < f64::EPSILON {
        return Err(Error::NumericalFailure("degenerate lag grid".into()));
    }
    Ok((k * sum_lv - sum_l * sum_v) / denom)
}

/// Compares a linear-regime sample series against the closed-form moments.
/// Refuses when dead-band activity was recorded: the closed forms only
/// describe the reduction without governor action.
pub fn compare_with_oracle(
    series: &SampleSeries,
    sys: &SimplifiedSystem,
    deadband_crossings: u64,
) -> Result<ComparisonReport> {
    if deadband_crossings > 0 {
        return Err(Error::RegimeMismatch(format!(
            "{deadband_crossings} dead-band crossings recorded; the linear \
             reduction does not describe governor action"
        )));
    }
    if series.unit != SeriesUnit::Pu {
        return Err(Error::InvalidArgument(
            "oracle comparison expects a pu series".into(),
        ));
    }
    let (_, pooled_var) = series.moments();
    let mut criteria = Vec::new();
    let mut sigma_analytic = None;

    if sys.d_l > 0.0 {
        let sigma = oracle::stationary_sigma(sys)?;
        sigma_analytic = Some(sigma);
        let rel = (pooled_var / (sigma * sigma) - 1.0).abs();
        criteria.push(CriterionOutcome {
            name: "stationary_variance".into(),
            threshold: 0.05,
            relative_error: rel,
            pass: rel < 0.05,
        });

        // Transient variance curve: the ODE propagation against the closed
        // form at ten points spanning the relaxation.
        let linear = sys.to_linear()?;
        let horizon = 10.0 * 2.0 * sys.h / sys.d_l;
        let w0 = nalgebra::DMatrix::zeros(2, 2);
        let curve =
            crate::sde::propagate_covariance(&linear, &w0, horizon, horizon / 10.0)?;
        let mut worst: f64 = 0.0;
        for (t, w) in &curve {
            if *t == 0.0 {
                continue;
            }
            let analytic = oracle::var_delta_omega(*t, sys)?;
            worst = worst.max((w[(0, 0)] / analytic - 1.0).abs());
        }
        criteria.push(CriterionOutcome {
            name: "transient_variance_curve".into(),
            threshold: 0.05,
            relative_error: worst,
            pass: worst < 0.05,
        });
    } else {
        let slope_analytic = oracle::var_zero_damping_slope(sys)?;
        let slope = zero_damping_slope_estimate(series)?;
        let rel = (slope / slope_analytic - 1.0).abs();
        criteria.push(CriterionOutcome {
            name: "variance_growth_slope".into(),
            threshold: 0.10,
            relative_error: rel,
            pass: rel < 0.10,
        });
    }

    Ok(ComparisonReport {
        h: sys.h,
        d_l: sys.d_l,
        b_pu: sys.ou.b,
        sigma_analytic,
        pooled_variance: pooled_var,
        criteria,
    })
}

/// Battery/converter telemetry recorded during a synthetic-inertia run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiTelemetry {
    pub e_min_mj: f64,
    pub e_max_mj: f64,
    pub power_mean_mw: f64,
    pub power_std_mw: f64,
    pub samples: u64,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub scenario: GridScenario,
    /// Post-warmup frequency deviations (pu) at the sampling cadence.
    pub series: SampleSeries,
    pub histogram: Histogram,
    pub modality: ModalityReport,
    pub deadband: DeadbandStats,
    pub wear_events: u64,
    pub d_za_pu: f64,
    /// Oracle comparison, present only when the linear reduction applies.
    pub comparison: Option<ComparisonReport>,
    pub si: Option<SiTelemetry>,
}

/// Runs a scenario end to end: simulate, discard warmup, sample at the
/// cadence, histogram, diagnose modality and dead-band statistics, and
/// attach the oracle comparison when the linear reduction applies.
pub fn run(sc: &GridScenario) -> Result<RunArtifacts> {
    sc.validate()?;
    let model = sc.to_grid_model()?;
    let d_za_pu = sc.d_za_mhz / 1000.0 / model.f0;
    let mut st = model.initial_state(NoiseStream::new(sc.seed));
    let stride = (sc.cadence_s / sc.dt_s).round() as u64;
    let total_steps = (sc.duration_s / sc.dt_s).round() as u64;
    let warmup_steps = (sc.warmup_s / sc.dt_s).round() as u64;

    let mut values = Vec::with_capacity(((sc.duration_s - sc.warmup_s) / sc.cadence_s) as usize + 1);
    let mut si_tel: Option<SiTelemetry> = model.si.map(|si| SiTelemetry {
        e_min_mj: si.e_state,
        e_max_mj: si.e_state,
        power_mean_mw: 0.0,
        power_std_mw: 0.0,
        samples: 0,
    });
    let mut p_sum = 0.0;
    let mut p_sum2 = 0.0;

    for step in 1..=total_steps {
        st = step_grid(&model, &st, sc.dt_s)?;
        if let (Some(tel), Some(si)) = (si_tel.as_mut(), st.si.as_ref()) {
            tel.e_min_mj = tel.e_min_mj.min(si.e_state);
            tel.e_max_mj = tel.e_max_mj.max(si.e_state);
            if step > warmup_steps {
                p_sum += st.last_si_power_mw;
                p_sum2 += st.last_si_power_mw * st.last_si_power_mw;
                tel.samples += 1;
            }
        }
        if step >= warmup_steps && (step - warmup_steps) % stride == 0 {
            values.push(st.delta_omega);
        }
    }
    if let Some(tel) = si_tel.as_mut() {
        if tel.samples > 0 {
            let n = tel.samples as f64;
            tel.power_mean_mw = p_sum / n;
            tel.power_std_mw = (p_sum2 / n - tel.power_mean_mw * tel.power_mean_mw)
                .max(0.0)
                .sqrt();
        }
    }

    let series = SampleSeries::new(sc.warmup_s, sc.cadence_s, values, SeriesUnit::Pu)?;
    let (_, var) = series.moments();
    let sigma_hat = var.sqrt();
    let half_range = 3.0 * (d_za_pu.max(2.0 * sigma_hat)).max(1e-9);
    let histogram =
        normalize_density(&build_histogram(&series, sc.n_bins, (-half_range, half_range))?)?;
    let modality_report = modality(&histogram)?;
    let deadband = deadband_stats(&series, d_za_pu, SeriesUnit::Pu)?;

    let linear_regime = sc.agc.is_none()
        && sc.synthetic_inertia.is_none()
        && sc.drifting_load.is_none()
        && st.wear_events == 0
        && deadband.fraction_outside == 0.0;
    let comparison = if linear_regime {
        Some(compare_with_oracle(
            &series,
            &sc.linear_reduction()?,
            st.wear_events,
        )?)
    } else {
        None
    };

    Ok(RunArtifacts {
        scenario: sc.clone(),
        series,
        histogram,
        modality: modality_report,
        deadband,
        wear_events: st.wear_events,
        d_za_pu,
        comparison,
        si: si_tel,
    })
}

/// Worker-thread cap honored by the parallel scenario runner.
pub fn thread_cap() -> Option<usize> {
    std::env::var("FREQLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs several scenarios on a worker pool; result order matches input order.
pub fn run_many(scenarios: &[GridScenario]) -> Vec<Result<RunArtifacts>> {
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| scenarios.par_iter().map(run).collect()),
        Err(_) => scenarios.iter().map(run).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModalityVerdict;

    #[test]
    fn builtin_library_table() {
        let lib = builtin_scenarios();
        assert_eq!(lib.len(), 10);
        let labels: Vec<&str> = lib.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c", "d", "e", "f", "g", "h", "i", "si"]);

        let get = |l: &str| lib.iter().find(|s| s.label == l).unwrap();
        assert_eq!(get("a").d_za_mhz, 0.0);
        assert_eq!(get("a").d_l_pu, 2.0);
        assert_eq!(get("b").d_za_mhz, 36.0);
        assert_eq!(get("b").stochastic_load.p_l0_mw, 1.0);
        assert_eq!(get("b").d_l_pu, 2.0);
        assert_eq!(get("c").d_l_pu, 0.0);
        assert_eq!(get("d").stochastic_load.p_l0_mw, 10.0);
        assert_eq!(get("d").d_l_pu, 0.0);
        assert_eq!(get("e").d_za_mhz, 100.0);
        assert!(get("e").drifting_load.is_some());
        assert!(get("e").agc.is_none());
        assert_eq!(get("f").agc.as_ref().unwrap().k_agc, 0.01);
        assert_eq!(get("f").d_za_mhz, 36.0);
        assert_eq!(get("g").inertia_multiplier, 10.0);
        assert_eq!(get("g").duration_s, 86_400.0);
        assert_eq!(get("h").duration_s, 4.0 * 86_400.0);
        assert_eq!(get("i").inertia_multiplier, 100.0);
        assert_eq!(get("i").duration_s, 8.0 * 86_400.0);
        let si = get("si").synthetic_inertia.as_ref().unwrap();
        assert_eq!(si.e_cap_mj, 160.0);
        assert_eq!(si.p_max_mw, 2.0);
        assert_eq!(get("si").dt_s, 0.001);
        assert!(get("si").agc.is_none());
        assert!(get("si").drifting_load.is_none());

        for sc in &lib {
            sc.validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_identity() {
        for sc in builtin_scenarios() {
            let text = sc.to_toml().unwrap();
            let back = GridScenario::from_toml(&text).unwrap();
            assert_eq!(sc, back);
        }
    }

    #[test]
    fn negative_deadband_rejected() {
        let mut sc = builtin_scenario("b").unwrap();
        sc.d_za_mhz = -5.0;
        let text = sc.to_toml().unwrap();
        assert!(GridScenario::from_toml(&text).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = builtin_scenario("a").unwrap().to_toml().unwrap();
        text.push_str("\nmystery_knob = 3\n");
        match GridScenario::from_toml(&text) {
            Err(Error::ScenarioParse(msg)) => assert!(msg.contains("mystery_knob")),
            other => panic!("expected parse rejection, got {other:?}"),
        }
    }

    #[test]
    fn short_duration_and_warmup_rejected() {
        let mut sc = builtin_scenario("a").unwrap();
        sc.duration_s = 100.0;
        assert!(sc.validate().is_err());
        let mut sc = builtin_scenario("a").unwrap();
        sc.warmup_s = 5.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        let sc = builtin_scenario("f").unwrap();
        sc.save(&path).unwrap();
        assert_eq!(GridScenario::load(&path).unwrap(), sc);
    }

    fn short_scenario(label: &str) -> GridScenario {
        let mut sc = builtin_scenario(label).unwrap();
        sc.duration_s = 3600.0;
        sc
    }

    #[test]
    fn run_is_deterministic() {
        let sc = short_scenario("b");
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.histogram, b.histogram);
        let mut sc2 = sc;
        sc2.seed += 1;
        let c = run(&sc2).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn nominal_short_run_is_tight_and_unimodal() {
        let art = run(&short_scenario("a")).unwrap();
        assert_eq!(art.series.count(), 3001);
        let d36 = 0.036 / 60.0;
        let inside = art
            .series
            .values
            .iter()
            .filter(|v| v.abs() <= d36)
            .count() as f64
            / art.series.count() as f64;
        assert!(inside >= 0.99, "inside fraction {inside}");
        assert_ne!(art.modality.verdict, ModalityVerdict::Bimodal);
    }

    #[test]
    fn deadband_scenario_skips_oracle_and_reports_activity() {
        let art = run(&short_scenario("b")).unwrap();
        assert!(art.wear_events > 0);
        assert!(art.comparison.is_none());
        // explicit refusal path
        let sys = short_scenario("b").linear_reduction().unwrap();
        match compare_with_oracle(&art.series, &sys, art.wear_events) {
            Err(Error::RegimeMismatch(_)) => {}
            other => panic!("expected regime mismatch, got {other:?}"),
        }
    }

    #[test]
    fn linear_reduction_conversions() {
        let sys = builtin_scenario("a").unwrap().linear_reduction().unwrap();
        assert!((sys.h - 35.5842).abs() < 1e-3, "h = {}", sys.h);
        assert_eq!(sys.d_l, 2.0);
        assert!((sys.ou.b - 0.01).abs() < 1e-15);
        assert_eq!(sys.ou.alpha, 0.5);
    }

    #[test]
    fn zero_damping_slope_estimator_on_linear_run() {
        use crate::sde::{simulate_linear, LinearSde};
        // H = 3 reference case: slope = b^2 / (4 H^2 alpha^2) = 1/9
        let ou = OuParams {
            mu: 0.0,
            alpha: 0.5,
            b: 1.0,
            eta0: 0.0,
        };
        let sys = LinearSde::two_state(3.0, 0.0, ou, None).unwrap();
        let traj = simulate_linear(&sys, 4.0 * 3600.0, 1.0, NoiseStream::new(11)).unwrap();
        let series = crate::stats::sample_series(&traj, "delta_omega", 1.0).unwrap();
        let slope = zero_damping_slope_estimate(&series).unwrap();
        assert!(
            (slope / (1.0 / 9.0) - 1.0).abs() < 0.10,
            "slope = {slope}, target 1/9"
        );
    }

    #[test]
    fn comparison_report_on_linear_series() {
        use crate::sde::{simulate_linear, LinearSde};
        let ou = OuParams {
            mu: 0.0,
            alpha: 0.5,
            b: 1.0,
            eta0: 0.0,
        };
        let lin = LinearSde::two_state(3.0, 2.0, ou, None).unwrap();
        let traj = simulate_linear(&lin, 86_400.0, 1.0, NoiseStream::new(5)).unwrap();
        let full = crate::stats::sample_series(&traj, "delta_omega", 1.0).unwrap();
        let series = SampleSeries::new(
            600.0,
            1.0,
            full.values[600..].to_vec(),
            SeriesUnit::Pu,
        )
        .unwrap();
        let sys = SimplifiedSystem::new(3.0, 2.0, ou, None).unwrap();
        let report = compare_with_oracle(&series, &sys, 0).unwrap();
        assert!(report.all_pass(), "report: {report:?}");
        assert!((report.sigma_analytic.unwrap() - 0.1f64.sqrt()).abs() < 1e-12);
        let mut buf = Vec::new();
        report.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("stationary_variance"));
        assert!(text.contains("outcome=pass"));
    }

    #[test]
    fn run_many_preserves_order_and_determinism() {
        let scs = vec![short_scenario("a"), short_scenario("b")];
        let out = run_many(&scs);
        assert_eq!(out.len(), 2);
        let direct = run(&scs[1]).unwrap();
        assert_eq!(out[1].as_ref().unwrap().series, direct.series);
    }
}
