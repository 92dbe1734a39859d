//! Recompute metrics from a saved prediction log.

use std::io::{BufRead, BufReader};
use std::path::Path;

use mgstc_core::data::MetricTrace;
use mgstc_core::error::{Error, Result};
use mgstc_core::model::{mae, mse};

use super::PredRecord;

pub fn run(pred_path: &Path) -> Result<MetricTrace> {
    let file = std::fs::File::open(pred_path).map_err(Error::Io)?;
    let reader = BufReader::new(file);
    let mut trace = MetricTrace::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let m = mse(&record.prediction, &record.target)?;
        let a = mae(&record.prediction, &record.target)?;
        trace.push(m, a, false);
    }
    if trace.is_empty() {
        return Err(Error::format("prediction file has no records"));
    }
    let stdout = std::io::stdout();
    trace.write_csv(stdout.lock())?;
    eprintln!(
        "{} records, final cumulative MSE {:.6}",
        trace.len(),
        trace.final_cumulative_mse().unwrap_or(f64::NAN)
    );
    Ok(trace)
}
