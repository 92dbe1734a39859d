//! The observation matrix and its CSV form.
//!
//! Input CSV: header `timestamp,<id_1>,...,<id_N>`, timestamps either
//! epoch seconds or ISO-8601, one row per interval. Rows are sorted on
//! load; duplicate timestamps and irregular intervals are rejected.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};

/// A dense time-by-series traffic matrix with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficFrame {
    /// Row-major `len x series` values (row = one timestep).
    values: Vec<f64>,
    /// Epoch-second timestamps, strictly increasing, constant interval.
    timestamps: Vec<i64>,
    series_ids: Vec<String>,
    interval: i64,
}

impl TrafficFrame {
    pub fn new(values: Vec<f64>, timestamps: Vec<i64>, series_ids: Vec<String>) -> Result<Self> {
        let n = series_ids.len();
        if n == 0 || timestamps.is_empty() {
            return Err(Error::format("frame needs at least one series and one row"));
        }
        if values.len() != n * timestamps.len() {
            return Err(Error::format(format!(
                "value count {} does not match {} rows x {} series",
                values.len(),
                timestamps.len(),
                n
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::format("frame contains non-finite values"));
        }
        let interval = if timestamps.len() > 1 {
            timestamps[1] - timestamps[0]
        } else {
            1
        };
        if interval <= 0 {
            return Err(Error::format("timestamps must be strictly increasing"));
        }
        for (i, pair) in timestamps.windows(2).enumerate() {
            let delta = pair[1] - pair[0];
            if delta == 0 {
                return Err(Error::format(format!(
                    "duplicate timestamp at row {}",
                    i + 2
                )));
            }
            if delta != interval {
                return Err(Error::format(format!(
                    "non-uniform interval at row {}: {delta}s vs {interval}s",
                    i + 2
                )));
            }
        }
        Ok(TrafficFrame {
            values,
            timestamps,
            series_ids,
            interval,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn series_count(&self) -> usize {
        self.series_ids.len()
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn interval(&self) -> i64 {
        self.interval
    }

    pub fn value(&self, row: usize, series: usize) -> f64 {
        self.values[row * self.series_count() + series]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.series_count();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One series as a contiguous vector.
    pub fn series(&self, series: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.value(r, series)).collect()
    }

    /// Contiguous row range as a new frame.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<TrafficFrame> {
        if start + len > self.len() || len == 0 {
            return Err(Error::config(format!(
                "row slice {start}..{} out of bounds for {} rows",
                start + len,
                self.len()
            )));
        }
        let n = self.series_count();
        TrafficFrame::new(
            self.values[start * n..(start + len) * n].to_vec(),
            self.timestamps[start..start + len].to_vec(),
            self.series_ids.clone(),
        )
    }
}

fn parse_timestamp(raw: &str, line: usize) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(epoch) = raw.parse::<i64>() {
        return Ok(epoch);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc().timestamp());
        }
    }
    Err(Error::Parse {
        line,
        message: format!("unrecognized timestamp '{raw}'"),
    })
}

/// Parse an ingestion-format CSV into a frame.
pub fn load_csv(path: &Path) -> Result<TrafficFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("missing header row: {e}")))?
        .clone();
    if headers.len() < 2 || headers.get(0) != Some("timestamp") {
        return Err(Error::format(
            "header must be 'timestamp,<id_1>,...,<id_N>'".to_string(),
        ));
    }
    let series_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = series_ids.len();

    let mut rows: Vec<(i64, Vec<f64>, usize)> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        if record.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", n + 1, record.len()),
            });
        }
        let ts = parse_timestamp(&record[0], line)?;
        let mut values = Vec::with_capacity(n);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid value '{field}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            values.push(v);
        }
        rows.push((ts, values, line));
    }
    if rows.is_empty() {
        return Err(Error::format("file has no data rows"));
    }

    rows.sort_by_key(|(ts, _, _)| *ts);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::Parse {
                line: pair[1].2,
                message: format!("duplicate timestamp {}", pair[1].0),
            });
        }
    }

    let timestamps: Vec<i64> = rows.iter().map(|(ts, _, _)| *ts).collect();
    let values: Vec<f64> = rows.into_iter().flat_map(|(_, v, _)| v).collect();
    TrafficFrame::new(values, timestamps, series_ids)
}

/// Write a frame in the ingestion format (epoch-second timestamps,
/// shortest-roundtrip float formatting).
pub fn write_csv(frame: &TrafficFrame, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::format(format!("cannot create {}: {e}", path.display())))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(frame.series_ids().iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::format(e.to_string()))?;
    for row in 0..frame.len() {
        let mut record = vec![frame.timestamps()[row].to_string()];
        record.extend(frame.row(row).iter().map(|v| v.to_string()));
        writer
            .write_record(&record)
            .map_err(|e| Error::format(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Exponentially weighted moving smoothing per series:
/// `y_t = alpha * x_t + (1 - alpha) * y_{t-1}`.
pub fn exponential_smooth(frame: &TrafficFrame, alpha: f64) -> Result<TrafficFrame> {
    if !(0.0 < alpha && alpha <= 1.0) {
        return Err(Error::config(format!(
            "smoothing factor must lie in (0, 1], got {alpha}"
        )));
    }
    let n = frame.series_count();
    let mut values = frame.values().to_vec();
    for s in 0..n {
        let mut prev = values[s];
        for row in 1..frame.len() {
            let idx = row * n + s;
            values[idx] = alpha * values[idx] + (1.0 - alpha) * prev;
            prev = values[idx];
        }
    }
    TrafficFrame::new(values, frame.timestamps().to_vec(), frame.series_ids().to_vec())
}
