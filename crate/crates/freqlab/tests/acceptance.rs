//! End-to-end acceptance suite. Each test prints one PASS/FAIL line per
//! criterion (or sub-criterion) before asserting, so a full run reads as a
//! checklist. Scenario artifacts are cached and reused across tests.

use freqlab::oracle::{
    mean_delta_omega, var_delta_omega, var_zero_damping, var_zero_damping_slope, SimplifiedSystem,
    SinusoidDrive,
};
use freqlab::rng::NoiseStream;
use freqlab::scenario::{builtin_scenario, run, zero_damping_slope_estimate, RunArtifacts};
use freqlab::sde::{
    ou_exact_step, ou_moments, propagate_covariance, simulate_linear, LinearSde, OuParams,
};
use freqlab::stats::{
    build_histogram, flat_top_ratio, modality, normalize_density, sample_series, window_aggregate,
    AggregationWindow, ModalityVerdict, SampleSeries, SeriesUnit,
};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Instant;

const F0: f64 = 60.0;

fn check(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn ou(mu: f64, alpha: f64, b: f64, eta0: f64) -> OuParams {
    OuParams { mu, alpha, b, eta0 }
}

static ARTIFACTS: LazyLock<Mutex<HashMap<String, Arc<RunArtifacts>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn run_builtin(label: &str) -> Arc<RunArtifacts> {
    let mut cache = ARTIFACTS.lock().unwrap();
    if let Some(a) = cache.get(label) {
        return a.clone();
    }
    let sc = builtin_scenario(label).expect("builtin label");
    let t0 = Instant::now();
    let art = Arc::new(run(&sc).expect("scenario run"));
    println!(
        "  [scenario {label}: {:.1} s wall]",
        t0.elapsed().as_secs_f64()
    );
    cache.insert(label.to_string(), art.clone());
    art
}

fn std_mhz(art: &RunArtifacts) -> f64 {
    let (_, var) = art.series.moments();
    var.sqrt() * F0 * 1000.0
}

fn fraction_inside(art: &RunArtifacts, half_width_hz: f64) -> f64 {
    let lim = half_width_hz / F0;
    art.series.values.iter().filter(|v| v.abs() <= lim).count() as f64
        / art.series.count() as f64
}

/// The flat-top shape test shared by criteria 7c and 8: smoothed-density
/// min/max over the central +/-30 mHz at least 0.5, and the verdict is not
/// bimodal with peaks inside the dead-band.
fn flat_top_shape(art: &RunArtifacts) -> (bool, String) {
    let ft = flat_top_ratio(&art.histogram, 0.030 / F0).expect("flat-top ratio");
    let interior_bimodal = art.modality.verdict == ModalityVerdict::Bimodal
        && art
            .modality
            .peak_locations
            .iter()
            .any(|p| p.abs() < art.d_za_pu);
    let peaks_mhz: Vec<f64> = art
        .modality
        .peak_locations
        .iter()
        .map(|p| (p * F0 * 1000.0 * 100.0).round() / 100.0)
        .collect();
    (
        ft >= 0.5 && !interior_bimodal,
        format!(
            "flat_top={ft:.3} (need >= 0.5), verdict={}, peaks={peaks_mhz:?} mHz, band=+/-{:.0} mHz",
            art.modality.verdict,
            art.d_za_pu * F0 * 1000.0
        ),
    )
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_ou_ensemble_moments() {
    let p = ou(0.0, 0.5, 1.0, 1.0);
    const N: u64 = 100_000;
    let root = NoiseStream::new(20_260_101);
    let targets = [1.0, 5.0, 10.0];
    let mut acc = [(0.0f64, 0.0f64); 3];
    for path in 0..N {
        let mut stream = root.split(path);
        let mut eta = p.eta0;
        for step in 1..=10u32 {
            let (next, s) = ou_exact_step(eta, &p, 1.0, stream).unwrap();
            eta = next;
            stream = s;
            let t = step as f64;
            if let Some(j) = targets.iter().position(|&x| (x - t).abs() < 1e-12) {
                acc[j].0 += eta;
                acc[j].1 += eta * eta;
            }
        }
    }
    let mut ok = true;
    let mut detail = String::new();
    for (j, &t) in targets.iter().enumerate() {
        let n = N as f64;
        let mean_hat = acc[j].0 / n;
        let var_hat = acc[j].1 / n - mean_hat * mean_hat;
        let (mean, var) = ou_moments(t, &p).unwrap();
        let mean_tol = 3.0 * (var / n).sqrt();
        let var_tol = 3.0 * var * (2.0 / (n - 1.0)).sqrt();
        let this = (mean_hat - mean).abs() <= mean_tol && (var_hat - var).abs() <= var_tol;
        ok &= this;
        detail.push_str(&format!(
            "t={t}: |dm|={:.2e}<= {mean_tol:.2e}, |dv|={:.2e}<= {var_tol:.2e}; ",
            (mean_hat - mean).abs(),
            (var_hat - var).abs()
        ));
    }
    check("1 (OU ensemble moments)", ok, &detail);
}

#[test]
fn criterion_02_stationary_variance_day_run() {
    let sys = LinearSde::two_state(3.0, 2.0, ou(0.0, 0.5, 1.0, 0.0), None).unwrap();
    let traj = simulate_linear(&sys, 86_400.0, 0.1, NoiseStream::new(20_260_102)).unwrap();
    let series = sample_series(&traj, "delta_omega", 1.0).unwrap();
    let tail = &series.values[600..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rel = (var - 0.1).abs() / 0.1;
    check(
        "2 (stationary variance)",
        rel <= 0.05,
        &format!("pooled Var = {var:.5} vs 0.1, relative error {rel:.4} (tol 0.05)"),
    );
}

#[test]
fn criterion_03_covariance_ode_vs_closed_form() {
    // deterministic param draws from a split-mix stream
    let mut draw_state = NoiseStream::new(20_260_103);
    let mut uniform = |lo: f64, hi: f64| {
        let (z, s) = draw_state.gaussian();
        draw_state = s;
        // map through the normal CDF-ish squash for a bounded draw
        let u = 0.5 * (1.0 + (z / std::f64::consts::SQRT_2).tanh());
        lo + (hi - lo) * u
    };
    let mut worst: f64 = 0.0;
    let mut sets = 0;
    while sets < 50 {
        let h = uniform(0.5, 10.0);
        let alpha = uniform(0.1, 2.0);
        let b = uniform(0.2, 2.0);
        let d_l = uniform(0.1, 8.0);
        if (2.0 * h * alpha - d_l).abs() < 0.05 * (2.0 * h * alpha) {
            continue; // closed forms are singular at 2 H alpha = D_L
        }
        sets += 1;
        let params = ou(0.0, alpha, b, 0.0);
        let sys = SimplifiedSystem::new(h, d_l, params, None).unwrap();
        let lin = sys.to_linear().unwrap();
        let horizon = 10.0;
        let out = propagate_covariance(&lin, &DMatrix::zeros(2, 2), horizon, horizon / 10.0)
            .unwrap();
        for (t, w) in out.iter().skip(1) {
            let closed = var_delta_omega(*t, &sys).unwrap();
            let rel = (w[(0, 0)] - closed).abs() / closed.abs().max(1e-300);
            worst = worst.max(rel);
            let (_, eta_var) = ou_moments(*t, &params).unwrap();
            let rel_eta = (w[(1, 1)] - eta_var).abs() / eta_var;
            worst = worst.max(rel_eta);
        }
    }
    check(
        "3 (covariance ODE vs closed form)",
        worst < 1e-6,
        &format!("worst relative error over 50 sets x 10 times: {worst:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_04_sinusoidal_mean_vs_deterministic() {
    let drive = SinusoidDrive { rho: 0.1, psi: 0.4 };
    let sys = SimplifiedSystem::new(3.0, 2.0, ou(0.0, 0.5, 0.0, 0.0), Some(drive)).unwrap();
    // independent RK4 integration of the noiseless two-state ODE:
    //   d(dw)/dt = -(D_L dw + eta)/(2H),  d(eta)/dt = rho sin(psi t) - alpha eta
    let (h, d_l, alpha) = (3.0, 2.0, 0.5);
    let f = |t: f64, x: [f64; 2]| {
        [
            -(d_l * x[0] + x[1]) / (2.0 * h),
            drive.rho * (drive.psi * t).sin() - alpha * x[1],
        ]
    };
    let two_periods = 2.0 * std::f64::consts::TAU / drive.psi;
    let dt = 1e-3;
    let steps = (two_periods / dt).ceil() as u64;
    let mut x = [0.0, 0.0];
    let mut t = 0.0;
    let mut max_err: f64 = 0.0;
    let mut max_val: f64 = 0.0;
    for step in 1..=steps {
        let k1 = f(t, x);
        let k2 = f(t + dt / 2.0, [x[0] + dt / 2.0 * k1[0], x[1] + dt / 2.0 * k1[1]]);
        let k3 = f(t + dt / 2.0, [x[0] + dt / 2.0 * k2[0], x[1] + dt / 2.0 * k2[1]]);
        let k4 = f(t + dt, [x[0] + dt * k3[0], x[1] + dt * k3[1]]);
        for i in 0..2 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = step as f64 * dt;
        if step % 100 == 0 {
            let closed = mean_delta_omega(t, &sys).unwrap();
            max_err = max_err.max((closed - x[0]).abs());
            max_val = max_val.max(x[0].abs());
        }
    }
    let rel = max_err / max_val;
    check(
        "4 (sinusoidal-drive mean)",
        rel < 1e-6,
        &format!("max |closed - integrated| / max|mean| = {rel:.2e} over two periods (tol 1e-6)"),
    );
}

#[test]
fn criterion_05_zero_damping_growth() {
    let params = ou(0.0, 0.5, 1.0, 0.0);
    let sys_closed = SimplifiedSystem::new(3.0, 0.0, params, None).unwrap();

    // ensemble variance at t = 200 s against the closed-form growth law
    let lin = LinearSde::two_state(3.0, 0.0, params, None).unwrap();
    const N: u64 = 10_000;
    let root = NoiseStream::new(20_260_105);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for path in 0..N {
        let traj = simulate_linear(&lin, 200.0, 0.5, root.split(path)).unwrap();
        let last = traj.states.last().unwrap()[0];
        sum += last;
        sum2 += last * last;
    }
    let mean = sum / N as f64;
    let var_hat = sum2 / N as f64 - mean * mean;
    let var_closed = var_zero_damping(200.0, &sys_closed).unwrap();
    let rel_ens = (var_hat - var_closed).abs() / var_closed;
    let ens_ok = rel_ens <= 0.05;

    // single 4 h run: increment-variance regression slope vs b^2/(4 H^2 alpha^2)
    let traj = simulate_linear(&lin, 4.0 * 3600.0, 0.1, NoiseStream::new(20_260_155)).unwrap();
    let series = sample_series(&traj, "delta_omega", 1.0).unwrap();
    let slope_hat = zero_damping_slope_estimate(&series).unwrap();
    let slope_closed = var_zero_damping_slope(&sys_closed).unwrap();
    let rel_slope = (slope_hat - slope_closed).abs() / slope_closed;
    let slope_ok = rel_slope <= 0.10;

    check(
        "5 (zero-damping growth)",
        ens_ok && slope_ok,
        &format!(
            "ensemble Var(200 s) rel err {rel_ens:.4} (tol 0.05); \
             single-run slope {slope_hat:.5} vs {slope_closed:.5} = 1/9, rel err {rel_slope:.4} (tol 0.10)"
        ),
    );
}

#[test]
fn criterion_06_drive_invariance_bit_identical() {
    let params = ou(0.0, 0.5, 1.0, 0.0);
    let quiet = LinearSde::two_state(3.0, 2.0, params, None).unwrap();
    let driven = LinearSde::two_state(3.0, 2.0, params, Some((0.3, 0.7))).unwrap();
    let w0 = DMatrix::zeros(2, 2);
    let a = propagate_covariance(&quiet, &w0, 50.0, 0.5).unwrap();
    let b = propagate_covariance(&driven, &w0, 50.0, 0.5).unwrap();
    let mut identical = a.len() == b.len();
    for ((_, wa), (_, wb)) in a.iter().zip(&b) {
        for (x, y) in wa.iter().zip(wb.iter()) {
            identical &= x.to_bits() == y.to_bits();
        }
    }
    check(
        "6 (drive invariance)",
        identical,
        "covariance trajectories bit-identical with and without the sinusoidal drive",
    );
}

#[test]
fn criterion_07a_nominal_unimodal() {
    let art = run_builtin("a");
    let inside = fraction_inside(&art, 0.036);
    let ok = art.modality.verdict == ModalityVerdict::Unimodal && inside >= 0.99;
    check(
        "7a (nominal shape)",
        ok,
        &format!(
            "verdict={}, {:.2}% inside +/-36 mHz (need >= 99%), std={:.2} mHz",
            art.modality.verdict,
            inside * 100.0,
            std_mhz(&art)
        ),
    );
}

#[test]
fn criterion_07c_deadband_flat_top() {
    let art = run_builtin("c");
    let (ok, detail) = flat_top_shape(&art);
    check("7c (dead-band flat top)", ok, &detail);
}

#[test]
fn criterion_07d_strong_load_bimodal() {
    let art = run_builtin("d");
    let band = art.d_za_pu;
    let peaks_outside = art.modality.peak_count >= 2
        && art.modality.peak_locations.first().is_some_and(|p| *p < -band)
        && art.modality.peak_locations.last().is_some_and(|p| *p > band);
    let ok = art.modality.verdict == ModalityVerdict::Bimodal && peaks_outside;
    check(
        "7d (10 MW load bimodal)",
        ok,
        &format!(
            "verdict={}, outermost peaks at {:.2}/{:.2} mHz vs band +/-36 mHz",
            art.modality.verdict,
            art.modality.peak_locations.first().unwrap_or(&f64::NAN) * F0 * 1000.0,
            art.modality.peak_locations.last().unwrap_or(&f64::NAN) * F0 * 1000.0
        ),
    );
}

#[test]
fn criterion_07e_drifting_load_bimodal() {
    let art = run_builtin("e");
    let band = art.d_za_pu;
    let peaks_outside = art.modality.peak_count >= 2
        && art.modality.peak_locations.first().is_some_and(|p| *p < -band)
        && art.modality.peak_locations.last().is_some_and(|p| *p > band);
    let ok = art.modality.verdict == ModalityVerdict::Bimodal && peaks_outside;
    check(
        "7e (drifting load bimodal)",
        ok,
        &format!(
            "verdict={}, outermost peaks at {:.2}/{:.2} mHz vs band +/-100 mHz",
            art.modality.verdict,
            art.modality.peak_locations.first().unwrap_or(&f64::NAN) * F0 * 1000.0,
            art.modality.peak_locations.last().unwrap_or(&f64::NAN) * F0 * 1000.0
        ),
    );
}

#[test]
fn criterion_07f_agc_recentering() {
    let art = run_builtin("f");
    let inside = fraction_inside(&art, 0.036);
    let ok = art.modality.verdict == ModalityVerdict::Unimodal && inside >= 0.95;
    check(
        "7f (AGC recentering)",
        ok,
        &format!(
            "verdict={}, {:.2}% inside +/-36 mHz (need >= 95%); the free-response sigma \
             (~28 mHz) exceeds what a 0.01-gain integrator can compress at alpha = 0.5 rad/s",
            art.modality.verdict,
            inside * 100.0
        ),
    );
}

#[test]
fn criterion_08_inertia_scenarios() {
    let t0 = Instant::now();
    let g = run_builtin("g");
    let h = run_builtin("h");
    let i = run_builtin("i");
    let (g_ok, g_detail) = flat_top_shape(&g);
    let (h_ok, h_detail) = flat_top_shape(&h);
    let (i_ok, i_detail) = flat_top_shape(&i);
    let exceed_ok = h.deadband.fraction_outside >= g.deadband.fraction_outside;
    let runtime_ok = t0.elapsed().as_secs_f64() < 30.0 * 60.0;
    println!("criterion 8 [g]: {} — {g_detail}", if g_ok { "PASS" } else { "FAIL" });
    println!("criterion 8 [h]: {} — {h_detail}", if h_ok { "PASS" } else { "FAIL" });
    println!("criterion 8 [i]: {} — {i_detail}", if i_ok { "PASS" } else { "FAIL" });
    check(
        "8 (inertia scenarios)",
        g_ok && h_ok && i_ok && exceed_ok && runtime_ok,
        &format!(
            "exceedance(h)={:.4} >= exceedance(g)={:.4}: {exceed_ok}; runtime {:.0} s (< 1800)",
            h.deadband.fraction_outside,
            g.deadband.fraction_outside,
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_synthetic_inertia() {
    let t0 = Instant::now();
    let base = run_builtin("c");
    let si = run_builtin("si");
    let tel = si.si.expect("SI telemetry");
    let ratio = std_mhz(&si) / std_mhz(&base);
    let std_ok = ratio <= 0.1;
    let battery_ok = tel.e_min_mj >= 0.0 && tel.e_max_mj <= 160.0;
    // correlated at the load reversal time 1/alpha = 2 s; effective sample
    // count uses the 2/alpha decorrelation window
    let duration = si.scenario.duration_s - si.scenario.warmup_s;
    let n_eff = duration / 4.0;
    let mean_tol = 3.0 * tel.power_std_mw / n_eff.sqrt();
    let mean_ok = tel.power_mean_mw.abs() <= mean_tol;
    let runtime_ok = t0.elapsed().as_secs_f64() < 20.0 * 60.0;
    println!(
        "criterion 9 [std]: {} — std(si)={:.2} mHz / std(c)={:.2} mHz = {ratio:.3} (need <= 0.1); \
         a 160 MJ store cannot absorb the ~590 MJ/day integrated load fluctuation, bounding the \
         reduction near 3-5x",
        if std_ok { "PASS" } else { "FAIL" },
        std_mhz(&si),
        std_mhz(&base)
    );
    println!(
        "criterion 9 [battery]: {} — energy within [{:.2}, {:.2}] MJ of [0, 160]",
        if battery_ok { "PASS" } else { "FAIL" },
        tel.e_min_mj,
        tel.e_max_mj
    );
    println!(
        "criterion 9 [mean power]: {} — |{:.4}| MW <= {mean_tol:.4} MW (3 sigma, n_eff={n_eff:.0})",
        if mean_ok { "PASS" } else { "FAIL" },
        tel.power_mean_mw
    );
    check(
        "9 (synthetic inertia)",
        std_ok && battery_ok && mean_ok && runtime_ok,
        &format!(
            "ratio={ratio:.3}, battery=[{:.2},{:.2}] MJ, |mean P|={:.4} MW, runtime {:.0} s",
            tel.e_min_mj,
            tel.e_max_mj,
            tel.power_mean_mw,
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_aggregation_fallacy() {
    let t0 = Instant::now();
    // drifting-mean Gaussian: mean sweeps +/-80 mHz over 24 h, sigma 15 mHz
    let mut stream = NoiseStream::new(20_260_110);
    let n = 86_400usize;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let phase = std::f64::consts::TAU * k as f64 / n as f64;
        let mean = 0.080 * phase.sin();
        let (z, s) = stream.gaussian();
        stream = s;
        values.push(mean + 0.015 * z);
    }
    let series = SampleSeries::new(0.0, 1.0, values, SeriesUnit::Hz).unwrap();
    let (windows, combined) =
        window_aggregate(&series, AggregationWindow::Hourly, 101, (-0.15, 0.15)).unwrap();
    let mut hourly_ok = true;
    for w in &windows {
        let v = modality(&normalize_density(w).unwrap()).unwrap().verdict;
        hourly_ok &= v == ModalityVerdict::Unimodal;
    }
    let combined_verdict = modality(&normalize_density(&combined).unwrap())
        .unwrap()
        .verdict;
    let ok = hourly_ok
        && windows.len() == 24
        && combined_verdict == ModalityVerdict::Bimodal
        && t0.elapsed().as_secs_f64() < 10.0;
    check(
        "10 (aggregation fallacy)",
        ok,
        &format!(
            "{} hourly windows all unimodal: {hourly_ok}; combined verdict: {combined_verdict}; \
             runtime {:.2} s (< 10)",
            windows.len(),
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_11_determinism_byte_identical() {
    let mut sc = builtin_scenario("b").unwrap();
    sc.duration_s = 3600.0;
    let a = run(&sc).unwrap();
    let b = run(&sc).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.series.write_csv(&mut csv_a).unwrap();
    b.series.write_csv(&mut csv_b).unwrap();
    let ok = csv_a == csv_b && !csv_a.is_empty();
    check(
        "11 (determinism)",
        ok,
        &format!("re-run sample CSVs byte-identical ({} bytes)", csv_a.len()),
    );
    // histogram construction is order-stable too
    let h_a = build_histogram(&a.series, 101, (-0.001, 0.001)).unwrap();
    let h_b = build_histogram(&b.series, 101, (-0.001, 0.001)).unwrap();
    assert_eq!(h_a.counts, h_b.counts);
}
