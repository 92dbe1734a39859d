//! Chronological splitting and train-fit z-score normalization.

use crate::error::{Error, Result};

use super::TrafficFrame;

const STD_FLOOR: f64 = 1e-8;

/// train:val:test as positive integers, e.g. `5:2:55`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::config(format!("split must be train:val:test, got '{text}'")));
        }
        let nums: Vec<u32> = parts
            .iter()
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::config(format!("bad split ratio '{p}'"))))
            .collect::<Result<_>>()?;
        let spec = SplitSpec { train: nums[0], val: nums[1], test: nums[2] };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::config("split ratios must all be positive"));
        }
        Ok(())
    }

    /// Chronological row counts: train and val floor, test takes the rest.
    pub fn row_counts(&self, total: usize) -> (usize, usize, usize) {
        let sum = (self.train + self.val + self.test) as usize;
        let train = total * self.train as usize / sum;
        let val = total * self.val as usize / sum;
        let test = total - train - val;
        (train, val, test)
    }
}

/// Per-series z-score parameters, fit on the training segment only.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Normalizer {
    pub fn fit(frame: &TrafficFrame) -> Self {
        let n = frame.series_count();
        let rows = frame.len() as f64;
        let mut means = vec![0.0; n];
        for r in 0..frame.len() {
            for (m, v) in means.iter_mut().zip(frame.row(r)) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= rows;
        }
        let mut stds = vec![0.0; n];
        for r in 0..frame.len() {
            for (s, (v, m)) in stds.iter_mut().zip(frame.row(r).iter().zip(&means)) {
                *s += (v - m).powi(2);
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / rows).sqrt().max(STD_FLOOR);
        }
        Normalizer { means, stds }
    }

    pub fn transform(&self, frame: &TrafficFrame) -> Result<TrafficFrame> {
        let n = frame.series_count();
        if n != self.means.len() {
            return Err(Error::Dimension {
                op: "normalize",
                left: vec![n],
                right: vec![self.means.len()],
            });
        }
        let mut out = frame.clone();
        for r in 0..frame.len() {
            for s in 0..n {
                let idx = r * n + s;
                out.values_mut()[idx] = (frame.values()[idx] - self.means[s]) / self.stds[s];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, frame: &TrafficFrame) -> Result<TrafficFrame> {
        let n = frame.series_count();
        if n != self.means.len() {
            return Err(Error::Dimension {
                op: "denormalize",
                left: vec![n],
                right: vec![self.means.len()],
            });
        }
        let mut out = frame.clone();
        for r in 0..frame.len() {
            for s in 0..n {
                let idx = r * n + s;
                out.values_mut()[idx] = frame.values()[idx] * self.stds[s] + self.means[s];
            }
        }
        Ok(out)
    }

    /// Undo the transform on a flat series-major block (`N x len`).
    pub fn inverse_flat(&self, block: &mut [f64], per_series: usize) {
        for (s, chunk) in block.chunks_mut(per_series).enumerate() {
            for v in chunk.iter_mut() {
                *v = *v * self.stds[s] + self.means[s];
            }
        }
    }
}

/// Split chronologically, fit the normalizer on train only, and z-score
/// all three segments. `min_segment_rows` is the shortest usable segment
/// (typically `T + tau`).
pub fn split_and_normalize(
    frame: &TrafficFrame,
    spec: &SplitSpec,
    min_segment_rows: usize,
) -> Result<(TrafficFrame, TrafficFrame, TrafficFrame, Normalizer)> {
    spec.validate()?;
    let (train_rows, val_rows, test_rows) = spec.row_counts(frame.len());
    for (name, rows) in [("train", train_rows), ("val", val_rows), ("test", test_rows)] {
        if rows < min_segment_rows {
            return Err(Error::config(format!(
                "{name} segment has {rows} rows, need at least {min_segment_rows}"
            )));
        }
    }
    let train = frame.slice_rows(0, train_rows)?;
    let val = frame.slice_rows(train_rows, val_rows)?;
    let test = frame.slice_rows(train_rows + val_rows, test_rows)?;
    let normalizer = Normalizer::fit(&train);
    Ok((
        normalizer.transform(&train)?,
        normalizer.transform(&val)?,
        normalizer.transform(&test)?,
        normalizer,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_frame(rows: usize, n: usize, seed: u64) -> TrafficFrame {
        let mut rng = Rng::from_seed(seed);
        let values: Vec<f64> = (0..rows * n)
            .map(|i| rng.uniform(0.0, 10.0) + (i % n) as f64 * 5.0)
            .collect();
        let timestamps: Vec<i64> = (0..rows as i64).map(|r| r * 600).collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        TrafficFrame::new(values, timestamps, ids).unwrap()
    }

    #[test]
    fn milan_ratio_row_counts() {
        let spec = SplitSpec::parse("5:2:55").unwrap();
        assert_eq!(spec.row_counts(8928), (720, 288, 7920));
    }

    #[test]
    fn rejects_bad_ratio_strings() {
        assert!(SplitSpec::parse("5:2").is_err());
        assert!(SplitSpec::parse("5:0:55").is_err());
        assert!(SplitSpec::parse("a:b:c").is_err());
    }

    #[test]
    fn train_segment_is_standardized() {
        let frame = random_frame(500, 3, 1);
        let spec = SplitSpec { train: 3, val: 1, test: 1 };
        let (train, _val, _test, _norm) = split_and_normalize(&frame, &spec, 10).unwrap();
        for s in 0..3 {
            let series = train.series(s);
            let mean: f64 = series.iter().sum::<f64>() / series.len() as f64;
            let var: f64 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / series.len() as f64;
            assert!(mean.abs() < 1e-10, "mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "std {}", var.sqrt());
        }
    }

    #[test]
    fn no_leakage_from_validation_or_test() {
        // Refit on val gives different parameters; the returned normalizer
        // equals a fit on train alone regardless of what follows it.
        let frame = random_frame(600, 2, 2);
        let spec = SplitSpec { train: 2, val: 2, test: 2 };
        let (train_rows, val_rows, _) = spec.row_counts(frame.len());
        let (_, _, _, norm) = split_and_normalize(&frame, &spec, 10).unwrap();

        let train_alone = frame.slice_rows(0, train_rows).unwrap();
        assert_eq!(norm, Normalizer::fit(&train_alone));

        let val_alone = frame.slice_rows(train_rows, val_rows).unwrap();
        let val_fit = Normalizer::fit(&val_alone);
        assert_ne!(norm.means, val_fit.means);

        // Mutating the test rows does not change the fitted normalizer.
        let mut tampered = frame.clone();
        let start = (train_rows + val_rows) * tampered.series_count();
        for v in tampered.values_mut()[start..].iter_mut() {
            *v += 1000.0;
        }
        let (_, _, _, norm2) = split_and_normalize(&tampered, &spec, 10).unwrap();
        assert_eq!(norm, norm2);
    }

    #[test]
    fn transform_inverse_is_identity() {
        let frame = random_frame(100, 4, 3);
        let norm = Normalizer::fit(&frame);
        let fwd = norm.transform(&frame).unwrap();
        let back = norm.inverse(&fwd).unwrap();
        for (a, b) in frame.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn short_segment_is_a_config_error() {
        let frame = random_frame(30, 2, 4);
        let spec = SplitSpec { train: 1, val: 1, test: 1 };
        let err = split_and_normalize(&frame, &spec, 11).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn constant_series_uses_std_floor() {
        let frame = TrafficFrame::new(
            vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0],
            vec![0, 60, 120],
            vec!["flat".into(), "rising".into()],
        )
        .unwrap();
        let norm = Normalizer::fit(&frame);
        assert_eq!(norm.stds[0], STD_FLOOR);
        let out = norm.transform(&frame).unwrap();
        assert!(out.values().iter().all(|v| v.is_finite()));
    }
}
