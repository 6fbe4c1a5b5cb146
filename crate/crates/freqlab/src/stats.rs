//! Frequency-sample statistics: uniform sampling of trajectories,
//! fixed-range histogramming, density normalization, KDE-based modality
//! diagnostics, window aggregation, and dead-band crossing statistics.

use crate::error::{Error, Result};
use crate::sde::Trajectory;
use std::io::Write;

/// Unit tag carried by sample series and dead-band thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesUnit {
    Pu,
    Hz,
}

impl std::fmt::Display for SeriesUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeriesUnit::Pu => write!(f, "pu"),
            SeriesUnit::Hz => write!(f, "Hz"),
        }
    }
}

/// Uniformly sampled frequency-deviation series.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    /// Time of the first sample (s from scenario start).
    pub start_time: f64,
    /// Sampling cadence (s).
    pub cadence: f64,
    pub values: Vec<f64>,
    pub unit: SeriesUnit,
}

impl SampleSeries {
    pub fn new(start_time: f64, cadence: f64, values: Vec<f64>, unit: SeriesUnit) -> Result<Self> {
        if !(cadence > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cadence must be positive, got {cadence}"
            )));
        }
        Ok(SampleSeries {
            start_time,
            cadence,
            values,
            unit,
        })
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Sample mean and (population) variance.
    pub fn moments(&self) -> (f64, f64) {
        slice_moments(&self.values)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,value_{}", self.unit)?;
        for (i, v) in self.values.iter().enumerate() {
            let t = self.start_time + i as f64 * self.cadence;
            writeln!(out, "{t:.9e},{v:.9e}")?;
        }
        Ok(())
    }
}

pub(crate) fn slice_moments(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Picks the state value at each cadence boundary (no interpolation).
pub fn sample_series(traj: &Trajectory, component: &str, cadence: f64) -> Result<SampleSeries> {
    traj.validate()?;
    let idx = traj
        .component_index(component)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown component '{component}'")))?;
    if traj.t.len() < 2 {
        return Err(Error::EmptyInput("trajectory has fewer than two stamps".into()));
    }
    let step = traj.t[1] - traj.t[0];
    if cadence < step - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "cadence {cadence} is smaller than trajectory step {step}"
        )));
    }
    let ratio = cadence / step;
    let stride = ratio.round();
    if (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::InvalidArgument(format!(
            "cadence {cadence} is not an integer multiple of trajectory step {step}"
        )));
    }
    let stride = stride as usize;
    let values: Vec<f64> = traj
        .states
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0)
        .map(|(_, x)| x[idx])
        .collect();
    SampleSeries::new(traj.t[0], cadence, values, SeriesUnit::Pu)
}

/// Equal-width histogram over a fixed range, with explicit overflow tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Ascending bin edges; len = bins + 1.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Normalized densities per bin, present after `normalize_density`.
    pub density: Option<Vec<f64>>,
    /// Samples below the first / above the last edge. Reported, never dropped.
    pub underflow: u64,
    pub overflow: u64,
    pub unit: SeriesUnit,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn total_accepted(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_samples(&self) -> u64 {
        self.total_accepted() + self.underflow + self.overflow
    }

    /// CSV export: `bin_left,bin_right,count,density`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "bin_left,bin_right,count,density")?;
        for (i, c) in self.counts.iter().enumerate() {
            match &self.density {
                Some(d) => writeln!(
                    out,
                    "{:.9e},{:.9e},{},{:.9e}",
                    self.edges[i],
                    self.edges[i + 1],
                    c,
                    d[i]
                )?,
                None => writeln!(out, "{:.9e},{:.9e},{},", self.edges[i], self.edges[i + 1], c)?,
            }
        }
        Ok(())
    }

    /// Binned-data moments: mean, variance, skewness g1, excess kurtosis g2,
    /// computed at bin centers weighted by counts.
    fn binned_moments(&self) -> (f64, f64, f64, f64, f64) {
        let n: f64 = self.total_accepted() as f64;
        let mean = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * self.bin_center(i))
            .sum::<f64>()
            / n;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let d = self.bin_center(i) - mean;
            let w = c as f64;
            m2 += w * d * d;
            m3 += w * d * d * d;
            m4 += w * d * d * d * d;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        let g1 = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        let g2 = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
        (n, mean, m2, g1, g2)
    }
}

pub fn build_histogram(s: &SampleSeries, n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    if s.values.is_empty() {
        return Err(Error::EmptyInput("cannot histogram an empty series".into()));
    }
    if n_bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_bins must be >= 2, got {n_bins}"
        )));
    }
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; n_bins];
    let mut underflow = 0u64;
    let mut overflow = 0u64;
    for &v in &s.values {
        if v < lo {
            underflow += 1;
        } else if v >= hi {
            // the top edge is half-open except the exact maximum
            if v == hi {
                counts[n_bins - 1] += 1;
            } else {
                overflow += 1;
            }
        } else {
            let mut idx = ((v - lo) / width) as usize;
            if idx >= n_bins {
                idx = n_bins - 1;
            }
            counts[idx] += 1;
        }
    }
    Ok(Histogram {
        edges,
        counts,
        density: None,
        underflow,
        overflow,
        unit: s.unit,
    })
}

/// Attaches a density estimate: density[i] = counts[i] / (accepted * width).
pub fn normalize_density(h: &Histogram) -> Result<Histogram> {
    let total = h.total_accepted();
    if total == 0 {
        return Err(Error::EmptyInput("histogram has zero accepted counts".into()));
    }
    let width = h.bin_width();
    let density = h
        .counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * width))
        .collect();
    let mut out = h.clone();
    out.density = Some(density);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalityVerdict {
    Unimodal,
    Bimodal,
    Indeterminate,
}

impl std::fmt::Display for ModalityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModalityVerdict::Unimodal => write!(f, "unimodal"),
            ModalityVerdict::Bimodal => write!(f, "bimodal"),
            ModalityVerdict::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

/// Peak/bimodality diagnostics for one histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityReport {
    pub peak_count: usize,
    /// Locations of the detected density peaks, in histogram units.
    pub peak_locations: Vec<f64>,
    pub bimodality_coefficient: f64,
    /// Valley-to-peak density ratio between the outermost peaks, when at
    /// least two peaks exist.
    pub valley_ratio: Option<f64>,
    pub verdict: ModalityVerdict,
    pub unit: SeriesUnit,
}

impl ModalityReport {
    /// Flat key=value text.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "verdict={}", self.verdict)?;
        writeln!(out, "peak_count={}", self.peak_count)?;
        let locs: Vec<String> = self.peak_locations.iter().map(|p| format!("{p:.6e}")).collect();
        writeln!(out, "peak_locations={}", locs.join(";"))?;
        writeln!(out, "bimodality_coefficient={:.6}", self.bimodality_coefficient)?;
        match self.valley_ratio {
            Some(v) => writeln!(out, "valley_ratio={v:.6}")?,
            None => writeln!(out, "valley_ratio=")?,
        }
        writeln!(out, "unit={}", self.unit)?;
        Ok(())
    }
}

const BC_THRESHOLD: f64 = 5.0 / 9.0;
const PEAK_PROMINENCE_FRACTION: f64 = 0.05;
const MODALITY_MIN_SAMPLES: u64 = 1000;
// A valley this far below the flanking peaks marks a bimodal profile even
// when wide side-lobes keep the kurtosis (and hence the bimodality
// coefficient) high. Calibrated on the scenario library, then frozen.
const DEEP_VALLEY_RATIO: f64 = 0.85;

/// Gaussian-KDE smoothing of the binned density, evaluated at bin centers.
/// Bandwidth: 1.06 * sigma_hat * N^(-1/5) (Silverman).
pub fn smoothed_density(h: &Histogram) -> Result<Vec<f64>> {
    let total = h.total_accepted();
    if total == 0 {
        return Err(Error::EmptyInput("histogram has zero accepted counts".into()));
    }
    let (n, _, m2, _, _) = h.binned_moments();
    let sigma = m2.sqrt();
    let bw = (1.06 * sigma * n.powf(-0.2)).max(h.bin_width() * 0.5);
    let centers: Vec<f64> = (0..h.counts.len()).map(|i| h.bin_center(i)).collect();
    let norm = 1.0 / (n * bw * (std::f64::consts::TAU).sqrt());
    let mut out = vec![0.0; centers.len()];
    for (i, &x) in centers.iter().enumerate() {
        let mut acc = 0.0;
        for (j, &c) in h.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let z = (x - centers[j]) / bw;
            if z.abs() > 8.0 {
                continue;
            }
            acc += c as f64 * (-0.5 * z * z).exp();
        }
        out[i] = acc * norm;
    }
    Ok(out)
}

/// Ratio of the minimum to the maximum smoothed density over bins whose
/// centers lie within +/- half_width. Near 1 for a flat-topped profile,
/// small for a peaked or bimodal one.
pub fn flat_top_ratio(h: &Histogram, half_width: f64) -> Result<f64> {
    let smooth = smoothed_density(h)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (i, &d) in smooth.iter().enumerate() {
        if h.bin_center(i).abs() <= half_width {
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    if !lo.is_finite() || hi == 0.0 {
        return Err(Error::EmptyInput(
            "no histogram bins inside the requested band".into(),
        ));
    }
    Ok(lo / hi)
}

/// Strict local maxima with topographic prominence above the threshold.
fn find_peaks(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(values[i] > values[i - 1] && values[i] > values[i + 1]) {
            continue;
        }
        // Walk each side to the nearest higher point; the base is the lowest
        // value encountered on the way.
        let mut left_base = values[i];
        let mut j = i;
        while j > 0 {
            j -= 1;
            left_base = left_base.min(values[j]);
            if values[j] > values[i] {
                break;
            }
        }
        let mut right_base = values[i];
        let mut j = i;
        while j + 1 < n {
            j += 1;
            right_base = right_base.min(values[j]);
            if values[j] > values[i] {
                break;
            }
        }
        let prominence = values[i] - left_base.max(right_base);
        if prominence >= min_prominence {
            peaks.push(i);
        }
    }
    peaks
}

/// Peak and bimodality diagnostics. Below 1000 samples the verdict is
/// indeterminate by contract.
pub fn modality(h: &Histogram) -> Result<ModalityReport> {
    let total = h.total_accepted();
    if total == 0 {
        return Err(Error::EmptyInput("histogram has zero accepted counts".into()));
    }
    let smooth = smoothed_density(h)?;
    let global_max = smooth.iter().cloned().fold(0.0, f64::max);
    let peak_idx = find_peaks(&smooth, PEAK_PROMINENCE_FRACTION * global_max);
    let peak_idx = if peak_idx.is_empty() {
        // A monotone or boundary-dominated profile still has one mode.
        vec![smooth
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()]
    } else {
        peak_idx
    };
    let peak_locations: Vec<f64> = peak_idx.iter().map(|&i| h.bin_center(i)).collect();
    let valley_ratio = if peak_idx.len() >= 2 {
        let (lo, hi) = (peak_idx[0], *peak_idx.last().unwrap());
        let valley = smooth[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
        let lower_peak = smooth[lo].min(smooth[hi]);
        Some(valley / lower_peak)
    } else {
        None
    };

    let (n, _, _, g1, g2) = h.binned_moments();
    // Bimodality coefficient with the small-sample kurtosis correction.
    let corr = if n > 3.0 {
        3.0 * (n - 1.0).powi(2) / ((n - 2.0) * (n - 3.0))
    } else {
        3.0
    };
    let skew = if n > 2.0 {
        g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
    } else {
        g1
    };
    let bc = (skew * skew + 1.0) / (g2 + corr);

    let deep_valley = valley_ratio.is_some_and(|v| v < DEEP_VALLEY_RATIO);
    let verdict = if total < MODALITY_MIN_SAMPLES {
        ModalityVerdict::Indeterminate
    } else if peak_idx.len() >= 2 && (bc > BC_THRESHOLD || deep_valley) {
        ModalityVerdict::Bimodal
    } else if peak_idx.len() == 1 && bc <= BC_THRESHOLD {
        ModalityVerdict::Unimodal
    } else {
        ModalityVerdict::Indeterminate
    };
    Ok(ModalityReport {
        peak_count: peak_idx.len(),
        peak_locations,
        bimodality_coefficient: bc,
        valley_ratio,
        verdict,
        unit: h.unit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationWindow {
    Hourly,
    Daily,
    Full,
}

impl AggregationWindow {
    pub fn seconds(&self, series_span: f64) -> f64 {
        match self {
            AggregationWindow::Hourly => 3600.0,
            AggregationWindow::Daily => 86_400.0,
            AggregationWindow::Full => series_span,
        }
    }
}

/// Splits the series into non-overlapping windows, histograms each over the
/// shared edges, and returns the per-window histograms plus their bin-wise sum.
pub fn window_aggregate(
    s: &SampleSeries,
    window: AggregationWindow,
    n_bins: usize,
    range: (f64, f64),
) -> Result<(Vec<Histogram>, Histogram)> {
    let span = s.count() as f64 * s.cadence;
    let win = window.seconds(span);
    if win > span {
        return Err(Error::InvalidArgument(format!(
            "window of {win} s is longer than the series span of {span} s"
        )));
    }
    let per_window = (win / s.cadence).round() as usize;
    if per_window == 0 {
        return Err(Error::InvalidArgument("window shorter than one sample".into()));
    }
    let n_windows = s.count() / per_window;
    let mut windows = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let chunk = &s.values[w * per_window..(w + 1) * per_window];
        let sub = SampleSeries::new(
            s.start_time + (w * per_window) as f64 * s.cadence,
            s.cadence,
            chunk.to_vec(),
            s.unit,
        )?;
        windows.push(build_histogram(&sub, n_bins, range)?);
    }
    let mut combined = windows[0].clone();
    for h in &windows[1..] {
        for (c, add) in combined.counts.iter_mut().zip(&h.counts) {
            *c += add;
        }
        combined.underflow += h.underflow;
        combined.overflow += h.overflow;
    }
    Ok((windows, combined))
}

/// Mann-Kendall monotone-trend statistic over a short sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendTest {
    pub s_statistic: i64,
    pub z_score: f64,
    /// One-sided increasing trend at the 95% level.
    pub increasing_95: bool,
}

pub fn mann_kendall(values: &[f64]) -> TrendTest {
    let n = values.len();
    if n < 2 {
        return TrendTest {
            s_statistic: 0,
            z_score: 0.0,
            increasing_95: false,
        };
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            s += match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let var = (n * (n - 1) * (2 * n + 5)) as f64 / 18.0;
    let z = if var > 0.0 {
        let adj = if s > 0 {
            s as f64 - 1.0
        } else if s < 0 {
            s as f64 + 1.0
        } else {
            0.0
        };
        adj / var.sqrt()
    } else {
        0.0
    };
    TrendTest {
        s_statistic: s,
        z_score: z,
        increasing_95: z > 1.645,
    }
}

/// Dead-band exceedance statistics for a sample series.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadbandStats {
    pub fraction_outside: f64,
    /// Transitions inside <-> outside between consecutive samples.
    pub crossing_count: u64,
    /// Exceedance fraction per 6-hour window.
    pub window_fractions: Vec<f64>,
    pub trend: TrendTest,
}

pub fn deadband_stats(s: &SampleSeries, d_za: f64, d_za_unit: SeriesUnit) -> Result<DeadbandStats> {
    if d_za_unit != s.unit {
        return Err(Error::InvalidArgument(format!(
            "dead-band unit {} does not match series unit {}",
            d_za_unit, s.unit
        )));
    }
    if s.values.is_empty() {
        return Ok(DeadbandStats {
            fraction_outside: 0.0,
            crossing_count: 0,
            window_fractions: Vec::new(),
            trend: mann_kendall(&[]),
        });
    }
    let outside: Vec<bool> = s.values.iter().map(|v| v.abs() > d_za).collect();
    let n_out = outside.iter().filter(|&&o| o).count();
    let crossings = outside.windows(2).filter(|w| w[0] != w[1]).count() as u64;
    let per_window = ((6.0 * 3600.0) / s.cadence).round() as usize;
    let mut window_fractions = Vec::new();
    if per_window > 0 {
        for chunk in outside.chunks_exact(per_window) {
            window_fractions
                .push(chunk.iter().filter(|&&o| o).count() as f64 / per_window as f64);
        }
    }
    let trend = mann_kendall(&window_fractions);
    Ok(DeadbandStats {
        fraction_outside: n_out as f64 / s.values.len() as f64,
        crossing_count: crossings,
        window_fractions,
        trend,
    })
}

/// Non-overlapping window means/variances: (window start time, mean, variance).
pub fn moment_series(s: &SampleSeries, window: f64) -> Result<Vec<(f64, f64, f64)>> {
    if window < 10.0 * s.cadence {
        return Err(Error::InvalidArgument(format!(
            "window {} s must be at least 10 cadences ({} s)",
            window,
            10.0 * s.cadence
        )));
    }
    let per_window = (window / s.cadence).round() as usize;
    let mut out = Vec::new();
    for (w, chunk) in s.values.chunks_exact(per_window).enumerate() {
        let (mean, var) = slice_moments(chunk);
        out.push((s.start_time + (w * per_window) as f64 * s.cadence, mean, var));
    }
    Ok(out)
}
