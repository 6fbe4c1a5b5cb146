//! Ingestion of externally measured frequency time series
//! (`timestamp,frequency_hz` CSV) for offline histogram analysis.

use crate::error::{Error, Result};
use crate::stats::{SampleSeries, SeriesUnit};
use chrono::{DateTime, NaiveDateTime};
use std::io::BufRead;

/// Width of the plausibility window around the nominal frequency (Hz).
pub const SANITY_WINDOW_HZ: f64 = 2.0;

/// A measured frequency series with its data-quality bookkeeping.
/// Gaps are recorded, never interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSeries {
    /// Epoch seconds, nondecreasing.
    pub timestamps: Vec<i64>,
    /// Frequency samples (Hz), same length as `timestamps`.
    pub frequency_hz: Vec<f64>,
    pub source: String,
    pub f0: f64,
    /// Rows that failed to parse.
    pub bad_rows: u64,
    /// Rows parsed but outside the f0 +/- 2 Hz sanity window (excluded).
    pub sanity_violations: u64,
    pub total_rows: u64,
    /// (last timestamp before, first timestamp after) of each cadence gap.
    pub gaps: Vec<(i64, i64)>,
}

fn parse_timestamp(field: &str) -> Option<i64> {
    let field = field.trim();
    if let Ok(epoch) = field.parse::<i64>() {
        return Some(epoch);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(field, fmt) {
            return Some(naive.and_utc().timestamp());
        }
    }
    None
}

impl MeasuredSeries {
    /// Parses `timestamp,frequency_hz` rows with an optional header.
    /// Timestamps are integer epoch seconds or ISO-8601, normalized to epoch
    /// seconds. More than 50% unusable rows is a validation error.
    pub fn parse<R: BufRead>(reader: R, f0: f64, source: &str) -> Result<MeasuredSeries> {
        if !(f0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "nominal frequency must be positive, got {f0}"
            )));
        }
        let mut timestamps = Vec::new();
        let mut frequency_hz = Vec::new();
        let mut bad_rows = 0u64;
        let mut sanity_violations = 0u64;
        let mut total_rows = 0u64;

        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line_no == 0 && line.to_ascii_lowercase().starts_with("timestamp") {
                continue; // header
            }
            total_rows += 1;
            let Some((ts_field, f_field)) = line.split_once(',') else {
                bad_rows += 1;
                continue;
            };
            let (Some(ts), Ok(f)) = (parse_timestamp(ts_field), f_field.trim().parse::<f64>())
            else {
                bad_rows += 1;
                continue;
            };
            if let Some(&last) = timestamps.last() {
                if ts < last {
                    bad_rows += 1; // out-of-order row
                    continue;
                }
            }
            if (f - f0).abs() > SANITY_WINDOW_HZ {
                sanity_violations += 1;
                continue;
            }
            timestamps.push(ts);
            frequency_hz.push(f);
        }

        if total_rows == 0 {
            return Err(Error::EmptyInput(format!(
                "'{source}' contains no data rows"
            )));
        }
        let unusable = bad_rows + sanity_violations;
        if 2 * unusable > total_rows {
            return Err(Error::InvalidArgument(format!(
                "'{source}': {unusable} of {total_rows} rows unusable \
                 ({bad_rows} unparseable, {sanity_violations} outside {f0} +/- {SANITY_WINDOW_HZ} Hz)"
            )));
        }

        let mut series = MeasuredSeries {
            timestamps,
            frequency_hz,
            source: source.to_string(),
            f0,
            bad_rows,
            sanity_violations,
            total_rows,
            gaps: Vec::new(),
        };
        let cadence = series.cadence_s();
        series.gaps = series
            .timestamps
            .windows(2)
            .filter(|w| (w[1] - w[0]) as f64 > 1.5 * cadence)
            .map(|w| (w[0], w[1]))
            .collect();
        Ok(series)
    }

    /// Modal timestamp increment (s); 1.0 for a single sample.
    pub fn cadence_s(&self) -> f64 {
        let mut counts = std::collections::HashMap::new();
        for w in self.timestamps.windows(2) {
            *counts.entry(w[1] - w[0]).or_insert(0u64) += 1;
        }
        counts
            .into_iter()
            .filter(|&(dt, _)| dt > 0)
            .max_by_key(|&(_, c)| c)
            .map(|(dt, _)| dt as f64)
            .unwrap_or(1.0)
    }

    /// Frequency deviations from nominal (Hz) as a sample series. Gaps are
    /// ignored for distribution statistics; they remain listed in `gaps`.
    pub fn deviation_series(&self) -> Result<SampleSeries> {
        let values: Vec<f64> = self.frequency_hz.iter().map(|f| f - self.f0).collect();
        SampleSeries::new(
            self.timestamps.first().copied().unwrap_or(0) as f64,
            self.cadence_s(),
            values,
            SeriesUnit::Hz,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<MeasuredSeries> {
        MeasuredSeries::parse(Cursor::new(text), 60.0, "test")
    }

    #[test]
    fn parses_epoch_and_header() {
        let m = parse("timestamp,frequency_hz\n100,60.01\n101,59.99\n102,60.00\n").unwrap();
        assert_eq!(m.timestamps, vec![100, 101, 102]);
        assert_eq!(m.bad_rows, 0);
        assert_eq!(m.cadence_s(), 1.0);
        let s = m.deviation_series().unwrap();
        assert!((s.values[0] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn parses_iso8601_variants() {
        let m = parse(
            "2026-01-01T00:00:00Z,60.0\n2026-01-01T00:00:01,60.0\n2026-01-01 00:00:02,60.0\n",
        )
        .unwrap();
        assert_eq!(m.timestamps[1] - m.timestamps[0], 1);
        assert_eq!(m.timestamps[2] - m.timestamps[1], 1);
    }

    #[test]
    fn gaps_recorded_not_interpolated() {
        let m = parse("0,60.0\n1,60.0\n2,60.0\n10,60.0\n11,60.0\n").unwrap();
        assert_eq!(m.gaps, vec![(2, 10)]);
        assert_eq!(m.frequency_hz.len(), 5);
    }

    #[test]
    fn sanity_window_filters_and_reports() {
        let m = parse("0,60.0\n1,63.5\n2,60.0\n3,55.0\n4,60.0\n").unwrap();
        assert_eq!(m.sanity_violations, 2);
        assert_eq!(m.frequency_hz.len(), 3);
    }

    #[test]
    fn header_only_is_empty_input() {
        match parse("timestamp,frequency_hz\n") {
            Err(Error::EmptyInput(_)) => {}
            other => panic!("expected empty-input error, got {other:?}"),
        }
    }

    #[test]
    fn majority_bad_rows_rejected() {
        let text = "0,60.0\nnot,a,row\ngarbage\nmore garbage\n";
        match parse(text) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("unusable")),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn out_of_order_rows_counted_bad() {
        let m = parse("5,60.0\n4,60.0\n6,60.0\n7,60.0\n").unwrap();
        assert_eq!(m.bad_rows, 1);
        assert_eq!(m.timestamps, vec![5, 6, 7]);
    }
}
