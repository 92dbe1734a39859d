//! Streaming evaluation: replay the test split, with the full online
//! strategy or a frozen model.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mgstc_core::data::{self, Sample};
use mgstc_core::error::{Error, Result};
use mgstc_core::model::checkpoint;
use mgstc_core::online::{online_loop, DriftEvent};

use crate::config::ResolvedConfig;

use super::PredRecord;

#[derive(Debug)]
pub struct StreamOutcome {
    pub batches: usize,
    pub final_cum_mse: f64,
    pub drift_events: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    resolved: &ResolvedConfig,
    data_path: &Path,
    checkpoint_path: &Path,
    online: bool,
    metrics_out: Option<&Path>,
    drift_log: Option<&Path>,
    pred_out: Option<&Path>,
) -> Result<StreamOutcome> {
    let model = checkpoint::load(checkpoint_path)?;
    let conflicts = resolved.geometry_conflicts(&model.config);
    if !conflicts.is_empty() {
        return Err(Error::config(format!(
            "configuration conflicts with checkpoint on: {}",
            conflicts.join(", ")
        )));
    }
    let run = &resolved.run;
    let history = model.config.chunking.history;
    let horizon = model.config.horizon;

    let mut frame = data::load_csv(data_path)?;
    if let Some(alpha) = run.smooth {
        frame = data::exponential_smooth(&frame, alpha)?;
    }
    if frame.series_count() != model.config.series {
        return Err(Error::config(format!(
            "configuration conflicts with checkpoint on: series (data has {}, checkpoint has {})",
            frame.series_count(),
            model.config.series
        )));
    }
    let (_train, _val, test, normalizer) =
        data::split_and_normalize(&frame, &run.split, history + horizon)?;
    let stream: Vec<Sample> = data::windows(&test, history, horizon, 1)?.collect();

    let config = resolved.online_config(online);
    let mut pred_writer = match pred_out {
        Some(path) => Some(BufWriter::new(File::create(path).map_err(Error::Io)?)),
        None => None,
    };
    let mut pred_error: Option<Error> = None;
    let metric_space = if run.denorm_metrics { Some(&normalizer) } else { None };
    let (trace, records, _model) = online_loop(
        model,
        &stream,
        horizon,
        config,
        metric_space,
        |sample_idx, sample, pred| {
            if let Some(writer) = pred_writer.as_mut() {
                let record = PredRecord {
                    sample: sample_idx,
                    prediction: pred.to_vec(),
                    target: sample.target.clone(),
                };
                let line = serde_json::to_string(&record).expect("prediction serializes");
                if let Err(e) = writeln!(writer, "{line}") {
                    pred_error.get_or_insert(Error::Io(e));
                }
            }
        },
    )?;
    if let Some(err) = pred_error {
        return Err(err);
    }

    match metrics_out {
        Some(path) => {
            let file = File::create(path).map_err(Error::Io)?;
            trace.write_csv(BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            trace.write_csv(stdout.lock())?;
        }
    }

    let mut drift_events = 0;
    let mut drift_lines = Vec::new();
    for record in &records {
        if let Some(update) = &record.update {
            let event = DriftEvent {
                batch_index: update.updated_batch,
                z: update.verdict.z_statistic,
                p_value: update.verdict.p_value,
                drifted: update.verdict.drifted,
                stage: update.stage.name().to_string(),
            };
            if update.verdict.drifted {
                drift_events += 1;
            }
            drift_lines
                .push(serde_json::to_string(&event).map_err(|e| Error::format(e.to_string()))?);
        }
    }
    if let Some(path) = drift_log {
        let mut writer = BufWriter::new(File::create(path).map_err(Error::Io)?);
        for line in &drift_lines {
            writeln!(writer, "{line}")?;
        }
    }

    let final_cum_mse = trace.final_cumulative_mse().unwrap_or(f64::NAN);
    eprintln!(
        "{} mode: {} batches, final cumulative MSE {final_cum_mse:.6}, {drift_events} drift events",
        if online { "online" } else { "frozen" },
        trace.len()
    );
    Ok(StreamOutcome {
        batches: trace.len(),
        final_cum_mse,
        drift_events,
    })
}
