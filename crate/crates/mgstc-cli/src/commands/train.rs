//! Offline training with early stopping on validation MSE.

use std::io::Write;
use std::path::Path;

use mgstc_core::data::{self, Sample};
use mgstc_core::error::{Error, Result};
use mgstc_core::model::{checkpoint, mse, ModelState};
use mgstc_core::rng::Rng;

use crate::config::ResolvedConfig;

#[derive(Debug)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub initial_val_mse: f64,
    pub best_val_mse: f64,
    pub best_epoch: usize,
}

fn validation_mse(model: &ModelState, samples: &[Sample]) -> Result<f64> {
    let windows: Vec<Vec<f64>> = samples.iter().map(|s| s.window.clone()).collect();
    let preds = model.predict(&windows)?;
    let mut total = 0.0;
    for (pred, sample) in preds.iter().zip(samples) {
        total += mse(pred, &sample.target)?;
    }
    Ok(total / samples.len() as f64)
}

pub fn run(
    resolved: &ResolvedConfig,
    data_path: &Path,
    out_path: &Path,
    log_path: Option<&Path>,
) -> Result<TrainOutcome> {
    resolved.validate()?;
    let run = &resolved.run;

    let mut frame = data::load_csv(data_path)?;
    if let Some(alpha) = run.smooth {
        frame = data::exponential_smooth(&frame, alpha)?;
    }
    let min_rows = run.history + run.horizon;
    let (train, val, _test, _norm) = data::split_and_normalize(&frame, &run.split, min_rows)?;

    let train_samples: Vec<Sample> = data::windows(&train, run.history, run.horizon, 1)?.collect();
    let val_samples: Vec<Sample> = data::windows(&val, run.history, run.horizon, 1)?.collect();

    let config = resolved.model_config(frame.series_count());
    let mut model = ModelState::init(config, run.seed)?;

    let mut log_lines = vec!["epoch,train_mse,val_mse".to_string()];
    let initial_val = validation_mse(&model, &val_samples)?;
    println!("epoch 0 (init): val_mse {initial_val:.6}");
    log_lines.push(format!("0,,{initial_val}"));

    let mut best = model.clone();
    let mut best_val = initial_val;
    let mut best_epoch = 0;
    let mut stale_epochs = 0;
    let mut shuffle_rng = Rng::from_seed(run.seed).derive("train-shuffle");
    let mut epochs_run = 0;

    for epoch in 1..=run.epochs {
        epochs_run = epoch;
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(run.batch_size) {
            let windows: Vec<Vec<f64>> =
                chunk.iter().map(|&i| train_samples[i].window.clone()).collect();
            let targets: Vec<Vec<f64>> =
                chunk.iter().map(|&i| train_samples[i].target.clone()).collect();
            epoch_loss += model.train_step(&windows, &targets, run.lr)?;
            batches += 1;
        }
        let train_mse = epoch_loss / batches as f64;
        let val_mse = validation_mse(&model, &val_samples)?;
        println!("epoch {epoch}: train_mse {train_mse:.6} val_mse {val_mse:.6}");
        log_lines.push(format!("{epoch},{train_mse},{val_mse}"));

        if val_mse < best_val {
            best_val = val_mse;
            best = model.clone();
            best_epoch = epoch;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= run.patience {
                println!("early stop: no validation improvement for {stale_epochs} epochs");
                break;
            }
        }
    }

    checkpoint::save(&best, out_path)?;
    println!(
        "saved checkpoint (epoch {best_epoch}, val_mse {best_val:.6}) to {}",
        out_path.display()
    );
    if let Some(path) = log_path {
        let mut f = std::fs::File::create(path).map_err(Error::Io)?;
        for line in &log_lines {
            writeln!(f, "{line}")?;
        }
    }
    Ok(TrainOutcome {
        epochs_run,
        initial_val_mse: initial_val,
        best_val_mse: best_val,
        best_epoch,
    })
}
