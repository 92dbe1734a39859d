//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured numbers once its assertions hold.
//!
//! Run with `cargo test --test acceptance` (use `-- --nocapture` to see
//! the per-criterion lines).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mgstc_core::data::{self, DriftKind, DriftPlan, DriftSpec, Sample, SplitSpec};
use mgstc_core::model::{
    mse, spatial_attention_flops, Activation, ModelConfig, ModelState,
};
use mgstc_core::online::{
    online_loop, verify_appendix, DriftMonitor, OnlineConfig, ReplayStores,
};
use mgstc_core::rng::Rng;
use mgstc_core::segment::{count_chunks, pad_series, segment, ChunkConfig};
use mgstc_core::tensor::gradcheck::{central_difference, max_relative_error};
use mgstc_core::tensor::{Tape, Tensor};

fn linear_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - (slope * x + intercept)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

// ── Criterion 1: gradient integrity ─────────────────────────────────

#[test]
fn criterion_01_gradient_integrity() {
    let start = Instant::now();
    let config = ModelConfig {
        series: 3,
        chunking: ChunkConfig { history: 16, chunk: 8, stride: 4, dim: 8 },
        horizon: 2,
        heads: 2,
        aggregators: 2,
        activation: Activation::Gelu,
        use_fgsa: true,
    };
    assert_eq!(config.num_chunks().unwrap(), 4);
    let state = ModelState::init(config, 101).unwrap();

    let mut rng = Rng::from_seed(102);
    let windows: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..config.window_len()).map(|_| rng.uniform(-1.5, 1.5)).collect())
        .collect();
    let targets: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..config.target_len()).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();

    // Analytic gradients for every parameter in one backward pass.
    let mut tape = Tape::new();
    let bound = state.bind(&mut tape, true);
    let (loss, _) = state.batch_loss(&mut tape, &bound, &windows, &targets).unwrap();
    tape.backward(loss).unwrap();

    let mut worst = (0.0f64, String::new());
    let mut checked = 0usize;
    for (idx, param) in state.parameters().iter().enumerate() {
        let analytic = tape.grad(bound.ids[idx]).unwrap().to_vec();
        let base = param.value.data().to_vec();
        let name = param.name.clone();
        let eval = |values: &[f64]| -> f64 {
            let mut probe = state.clone();
            probe.parameters_mut()[idx].value =
                Tensor::from_vec(param.value.shape().to_vec(), values.to_vec()).unwrap();
            let mut t = Tape::new();
            let b = probe.bind(&mut t, false);
            let (l, _) = probe.batch_loss(&mut t, &b, &windows, &targets).unwrap();
            t.data(l)[0]
        };
        let numeric = central_difference(&base, 1e-5, eval);
        let err = max_relative_error(&analytic, &numeric, 1e-8);
        checked += analytic.len();
        if err > worst.0 {
            worst = (err, name);
        }
        assert!(err < 1e-3, "parameter {} gradient error {err}", param.name);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "gradcheck took {elapsed:?}");
    println!(
        "criterion 1 (gradient integrity): PASS — {checked} entries, worst rel err {:.2e} ({}), {:.1?}",
        worst.0, worst.1, elapsed
    );
}

// ── Criterion 2: segmentation oracle ────────────────────────────────

#[test]
fn criterion_02_segmentation_oracle() {
    // Brute force: stride-S windows of length C over the padded series.
    let mut rng = Rng::from_seed(202);
    let mut configs = 0usize;
    for history in 1..=64usize {
        let series: Vec<f64> = (0..history).map(|_| rng.uniform(-5.0, 5.0)).collect();
        for chunk in 1..=history {
            for stride in 1..=chunk {
                let padded = pad_series(&series, stride).unwrap();
                let expected: Vec<&[f64]> = (0..)
                    .map(|m| m * stride)
                    .take_while(|s| s + chunk <= padded.len())
                    .map(|s| &padded[s..s + chunk])
                    .collect();
                let m = count_chunks(history, chunk, stride).unwrap();
                assert_eq!(m, expected.len(), "count at T={history} C={chunk} S={stride}");
                let cfg = ChunkConfig { history, chunk, stride, dim: 2 };
                let got = segment(&series, &cfg).unwrap();
                assert_eq!(got.rows, m);
                for (row, want) in expected.iter().enumerate() {
                    assert_eq!(got.row(row), *want, "row {row} at T={history} C={chunk} S={stride}");
                }
                configs += 1;
            }
        }
    }
    assert_eq!(count_chunks(128, 48, 32).unwrap(), 4);
    println!(
        "criterion 2 (segmentation oracle): PASS — {configs} geometries exhaustively matched, (T=128,C=48,S=32) gives M=4"
    );
}

// ── Criterion 3: spatial attention complexity ───────────────────────

#[test]
fn criterion_03_fgsa_complexity() {
    let ns = [64usize, 128, 256];
    let mut fgsa = Vec::new();
    let mut full = Vec::new();
    for &n in &ns {
        let (f, q) = spatial_attention_flops(n, 10, 64, 4, 303).unwrap();
        fgsa.push(f as f64);
        full.push(q as f64);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let r2 = linear_r2(&xs, &fgsa);
    assert!(r2 > 0.99, "linear fit R^2 = {r2}");

    let fgsa_ratio = fgsa[2] / fgsa[0];
    assert!(
        (fgsa_ratio - 4.0).abs() / 4.0 < 0.10,
        "aggregator-routed 256/64 ratio {fgsa_ratio}"
    );
    let full_ratio = full[2] / full[0];
    assert!(
        (full_ratio - 16.0).abs() / 16.0 < 0.10,
        "full attention 256/64 ratio {full_ratio}"
    );
    println!(
        "criterion 3 (spatial attention complexity): PASS — R^2 {r2:.6}, ratios {fgsa_ratio:.3} vs {full_ratio:.3}"
    );
}

// ── Criterion 4: overfit capacity ───────────────────────────────────

/// Nearly deterministic coupled task: shared-phase sinusoid per series
/// plus neighbor-attenuated bursts and a whisper of noise.
fn overfit_task(n_series: usize, length: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::from_seed(seed);
    let period = 64.0;
    let mut series = vec![vec![0.0; length]; n_series];
    for (s, row) in series.iter_mut().enumerate() {
        let amp = 0.8 + 0.1 * s as f64;
        for (t, v) in row.iter_mut().enumerate() {
            *v = amp * (std::f64::consts::TAU * t as f64 / period).sin();
        }
    }
    // Coupled bursts.
    let mut t = 0.0f64;
    loop {
        t += -60.0 * rng.uniform(1e-9, 1.0).ln();
        if t as usize >= length {
            break;
        }
        let center = rng.index(n_series);
        let amp = rng.uniform(1.0, 2.0);
        let width = rng.uniform(4.0, 9.0);
        for (s, row) in series.iter_mut().enumerate() {
            let reach = amp * 0.7f64.powi((s as i64 - center as i64).unsigned_abs() as i32);
            let lo = (t - 4.0 * width).max(0.0) as usize;
            let hi = ((t + 4.0 * width) as usize).min(length - 1);
            for (tt, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = (tt as f64 - t) / width;
                *v += reach * (-0.5 * d * d).exp();
            }
        }
    }
    for row in series.iter_mut() {
        for v in row.iter_mut() {
            *v += rng.normal(0.0, 0.05);
        }
    }
    series
}

fn samples_from_series(
    series: &[Vec<f64>],
    from: usize,
    to: usize,
    history: usize,
    horizon: usize,
) -> Vec<Sample> {
    let n = series.len();
    (from..to - history - horizon + 1)
        .map(|start| {
            let mut window = Vec::with_capacity(n * history);
            let mut target = Vec::with_capacity(n * horizon);
            for row in series {
                window.extend_from_slice(&row[start..start + history]);
                target.extend_from_slice(&row[start + history..start + history + horizon]);
            }
            Sample { window, target }
        })
        .collect()
}

#[test]
fn criterion_04_overfit_capacity() {
    let start = Instant::now();
    let config = ModelConfig {
        series: 4,
        chunking: ChunkConfig { history: 32, chunk: 8, stride: 8, dim: 64 },
        horizon: 4,
        heads: 4,
        aggregators: 2,
        activation: Activation::Gelu,
        use_fgsa: true,
    };
    let series = overfit_task(4, 2000, 404);
    let train = samples_from_series(&series, 0, 1500, 32, 4);
    let val = samples_from_series(&series, 1500, 2000, 32, 4);

    let mut model = ModelState::init(config, 405).unwrap();
    let eval_set: Vec<&Sample> = train.iter().step_by(16).collect();
    let eval_mse = |m: &ModelState| -> f64 {
        let windows: Vec<Vec<f64>> = eval_set.iter().map(|s| s.window.clone()).collect();
        let preds = m.predict(&windows).unwrap();
        preds
            .iter()
            .zip(&eval_set)
            .map(|(p, s)| mse(p, &s.target).unwrap())
            .sum::<f64>()
            / eval_set.len() as f64
    };

    let untrained = eval_mse(&model);
    let mut rng = Rng::from_seed(406);
    for _step in 0..200 {
        let picks = rng.sample_without_replacement(train.len(), 16);
        let windows: Vec<Vec<f64>> = picks.iter().map(|&i| train[i].window.clone()).collect();
        let targets: Vec<Vec<f64>> = picks.iter().map(|&i| train[i].target.clone()).collect();
        model.train_step(&windows, &targets, 1e-3).unwrap();
    }
    let trained = eval_mse(&model);
    assert!(
        trained < 0.1 * untrained,
        "training MSE {untrained:.4} -> {trained:.4}, ratio {:.3}",
        trained / untrained
    );

    // Validation against the repeat-last-value baseline.
    let val_windows: Vec<Vec<f64>> = val.iter().map(|s| s.window.clone()).collect();
    let preds = model.predict(&val_windows).unwrap();
    let mut model_mse = 0.0;
    let mut baseline_mse = 0.0;
    for (pred, sample) in preds.iter().zip(&val) {
        model_mse += mse(pred, &sample.target).unwrap();
        let mut naive = Vec::with_capacity(sample.target.len());
        for s in 0..4 {
            let last = sample.window[(s + 1) * 32 - 1];
            naive.extend(std::iter::repeat(last).take(4));
        }
        baseline_mse += mse(&naive, &sample.target).unwrap();
    }
    model_mse /= val.len() as f64;
    baseline_mse /= val.len() as f64;
    assert!(
        model_mse <= 0.7 * baseline_mse,
        "validation: model {model_mse:.4} vs repeat-last {baseline_mse:.4}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "overfit run took {elapsed:?}");
    println!(
        "criterion 4 (overfit capacity): PASS — train {untrained:.3}->{trained:.4} ({:.1}%), val {model_mse:.4} vs baseline {baseline_mse:.4} ({:.0}% better), {:.1?}",
        100.0 * trained / untrained,
        100.0 * (1.0 - model_mse / baseline_mse),
        elapsed
    );
}

// ── Criterion 5: drift detection calibration and latency ────────────

#[test]
fn criterion_05_drift_detection() {
    // Calibration: stationary losses, 10,000 checks at d = 0.05.
    let d = 0.05;
    let batch = 16;
    let cap = 100;
    let mut monitor = DriftMonitor::new(cap, d).unwrap();
    let mut rng = Rng::from_seed(505);
    for _ in 0..cap {
        monitor.push_loss(rng.normal(1.0, 0.1));
    }
    let mut alarms = 0usize;
    for i in 0..10_000 {
        let losses: Vec<f64> = (0..batch).map(|_| rng.normal(1.0, 0.1)).collect();
        if monitor.check(&losses, i).drifted {
            alarms += 1;
        }
        for &l in &losses {
            monitor.push_loss(l);
        }
    }
    let rate = alarms as f64 / 10_000.0;
    assert!(
        (0.025..=0.10).contains(&rate),
        "false alarm rate {rate} outside [0.025, 0.10]"
    );

    // Latency: a 5-sigma step shift at batch 40 must be flagged within
    // cap/batch + 5 batches, with monitor resets applied on detection.
    let mut latencies = Vec::new();
    for trial in 0..20 {
        let mut monitor = DriftMonitor::new(cap, d).unwrap();
        let mut rng = Rng::from_seed(5100 + trial);
        let shift_at = 40usize;
        let mut detected_at = None;
        for k in 0..80 {
            let mean = if k < shift_at { 1.0 } else { 1.0 + 5.0 * 0.1 };
            let losses: Vec<f64> = (0..batch).map(|_| rng.normal(mean, 0.1)).collect();
            let verdict = monitor.check(&losses, k);
            if verdict.drifted && k >= shift_at && detected_at.is_none() {
                detected_at = Some(k);
                break;
            }
            if verdict.drifted {
                monitor.reset();
            } else {
                for &l in &losses {
                    monitor.push_loss(l);
                }
            }
        }
        let at = detected_at.expect("shift must be detected");
        let latency = at - shift_at;
        assert!(
            latency <= cap / batch + 5,
            "trial {trial}: detection latency {latency} batches"
        );
        latencies.push(latency);
    }
    let max_latency = latencies.iter().max().unwrap();
    println!(
        "criterion 5 (drift detection): PASS — false alarm rate {rate:.4} in [0.025, 0.10], worst shift latency {max_latency} batches (bound {})",
        cap / batch + 5
    );
}

// ── Criteria 6 and 9 run the actual binary ──────────────────────────

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgstc"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "mgstc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_file(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn final_cum_mse(metrics_csv: &Path) -> f64 {
    let text = std::fs::read_to_string(metrics_csv).unwrap();
    let last = text.lines().last().expect("metrics rows");
    last.split(',').nth(3).unwrap().parse().unwrap()
}

/// Desk-scale run configuration shared by the binary-level criteria.
fn desk_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.conf");
    write_file(
        &path,
        "history=32\nhorizon=8\ndim=32\nchunk=8\nstride=8\nheads=4\naggregators=3\n\
         batch_size=8\nepochs=3\nlr=0.002\nsplit=2:1:9\ncap_b=64\ncap_h=128\naggr_epochs=3\n\
         drift_threshold=0.05\n",
    );
    path
}

#[test]
fn criterion_06_online_beats_frozen() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    // Two level shifts inside the test segment (rows 1500..6000 of the
    // 2:1:9 split).
    write_file(
        &plan,
        "series=5\nlength=6000\ndrift=2600,mean_shift,2.0\ndrift=4400,mean_shift,2.5\n",
    );
    let data = dir.path().join("stream.csv");
    run_ok(&["synth", "--plan", plan.to_str().unwrap(), "--out", data.to_str().unwrap(), "--seed", "606"]);

    let config = desk_config(dir.path());
    let ckpt = dir.path().join("model.json");
    run_ok(&[
        "train",
        "--data", data.to_str().unwrap(),
        "--out", ckpt.to_str().unwrap(),
        "--config", config.to_str().unwrap(),
        "--seed", "607",
    ]);

    let frozen_csv = dir.path().join("frozen.csv");
    run_ok(&[
        "stream",
        "--data", data.to_str().unwrap(),
        "--checkpoint", ckpt.to_str().unwrap(),
        "--frozen",
        "--metrics-out", frozen_csv.to_str().unwrap(),
        "--config", config.to_str().unwrap(),
        "--seed", "607",
    ]);
    let online_csv = dir.path().join("online.csv");
    let drift_log = dir.path().join("drift.ndjson");
    run_ok(&[
        "stream",
        "--data", data.to_str().unwrap(),
        "--checkpoint", ckpt.to_str().unwrap(),
        "--online",
        "--metrics-out", online_csv.to_str().unwrap(),
        "--drift-log", drift_log.to_str().unwrap(),
        "--config", config.to_str().unwrap(),
        "--seed", "607",
    ]);

    let frozen = final_cum_mse(&frozen_csv);
    let online = final_cum_mse(&online_csv);
    let batches = std::fs::read_to_string(&online_csv).unwrap().lines().count() - 1;
    assert!(batches >= 500, "stream has only {batches} batches");
    assert!(online < frozen, "online {online} not below frozen {frozen}");
    let improvement = (frozen - online) / frozen;
    assert!(
        improvement >= 0.10,
        "online {online} vs frozen {frozen}: only {:.1}% better",
        improvement * 100.0
    );
    // The injected drifts actually fired the detector.
    let drift_text = std::fs::read_to_string(&drift_log).unwrap();
    let fired = drift_text.lines().filter(|l| l.contains("\"drifted\":true")).count();
    assert!(fired >= 1, "no drift events logged");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "paired run took {elapsed:?}");
    println!(
        "criterion 6 (online beats frozen): PASS — {batches} batches, cumulative MSE {online:.4} vs {frozen:.4} ({:.1}% better), {fired} drift event(s), {:.0?}",
        improvement * 100.0,
        elapsed
    );
}

// ── Criterion 7: ablation ordering ──────────────────────────────────

#[test]
fn criterion_07_ablation_ordering() {
    let model_config = |use_fgsa: bool| ModelConfig {
        series: 5,
        chunking: ChunkConfig { history: 32, chunk: 8, stride: 8, dim: 32 },
        horizon: 8,
        heads: 4,
        aggregators: 3,
        activation: Activation::Gelu,
        use_fgsa,
    };
    let plan = DriftPlan {
        events: vec![
            DriftSpec { start: 1800, kind: DriftKind::MeanShift, magnitude: 1.5 },
            DriftSpec { start: 3000, kind: DriftKind::MeanShift, magnitude: 2.0 },
        ],
    };
    let frame = data::synth_stream(5, 4000, &plan, 707).unwrap();
    let split = SplitSpec { train: 2, val: 1, test: 5 };
    let (train, _val, test, _norm) = data::split_and_normalize(&frame, &split, 40).unwrap();
    let train_samples: Vec<Sample> = data::windows(&train, 32, 8, 1).unwrap().collect();
    let stream: Vec<Sample> = data::windows(&test, 32, 8, 1).unwrap().collect();

    let train_model = |use_fgsa: bool| -> ModelState {
        let mut model = ModelState::init(model_config(use_fgsa), 708).unwrap();
        let mut rng = Rng::from_seed(709);
        for _epoch in 0..3 {
            let mut order: Vec<usize> = (0..train_samples.len()).collect();
            rng.shuffle(&mut order);
            for chunk in order.chunks(8) {
                let windows: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| train_samples[i].window.clone()).collect();
                let targets: Vec<Vec<f64>> =
                    chunk.iter().map(|&i| train_samples[i].target.clone()).collect();
                model.train_step(&windows, &targets, 2e-3).unwrap();
            }
        }
        model
    };

    let online = |model: ModelState, eta_fine: f64, eta_aggr: f64| -> f64 {
        let config = OnlineConfig {
            eta_fine,
            eta_aggressive: eta_aggr,
            drift_threshold: 0.05,
            cap_buffer: 64,
            cap_history: 128,
            aggressive_epochs: 3,
            perturb_variance: 0.05 * 0.05,
            batch_size: 8,
            replay_single: false,
            lr: 2e-3,
            updates_enabled: true,
            seed: 710,
        };
        let (trace, _, _) = online_loop(model, &stream, 8, config, None, |_, _, _| {}).unwrap();
        trace.final_cumulative_mse().unwrap()
    };

    let full_model = train_model(true);
    let full = online(full_model.clone(), 0.5, 0.5);
    let no_fgsa = online(train_model(false), 0.5, 0.5);
    let no_short = online(full_model.clone(), 0.0, 0.5);
    let no_long = online(full_model, 0.5, 0.0);

    assert!(no_fgsa > full, "without spatial stage: {no_fgsa:.4} vs full {full:.4}");
    assert!(no_short >= full, "eta_fine=0: {no_short:.4} vs full {full:.4}");
    assert!(no_long >= full, "eta_aggr=0: {no_long:.4} vs full {full:.4}");
    println!(
        "criterion 7 (ablation ordering): PASS — full {full:.4} <= eta_fine=0 {no_short:.4}, eta_aggr=0 {no_long:.4}; no-FGSA {no_fgsa:.4} > full"
    );
}

// ── Criterion 8: appendix lemma ─────────────────────────────────────

#[test]
fn criterion_08_appendix_lemma() {
    let report = verify_appendix(10_000, 808).unwrap();
    assert_eq!(report.violations, 0, "inequality violated {} times", report.violations);
    assert!(
        (report.worked_plain - 1.0 / 3.0).abs() < 1e-12,
        "worked example plain gap {}",
        report.worked_plain
    );
    assert!(
        (report.worked_augmented - 0.15556).abs() < 1e-4,
        "worked example augmented gap {}",
        report.worked_augmented
    );
    assert!(
        report.spectral_max_error < 1e-8,
        "spectral cross-check error {}",
        report.spectral_max_error
    );
    println!(
        "criterion 8 (appendix lemma): PASS — {} tuples, 0 violations, worked {:.4}/{:.4}, spectral err {:.2e} over {} instances",
        report.trials, report.worked_plain, report.worked_augmented,
        report.spectral_max_error, report.spectral_checks
    );
}

// ── Criterion 9: determinism of train and stream ────────────────────

#[test]
fn criterion_09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    write_file(&plan, "series=3\nlength=700\ndrift=500,mean_shift,2.0\n");
    let data = dir.path().join("stream.csv");
    run_ok(&["synth", "--plan", plan.to_str().unwrap(), "--out", data.to_str().unwrap(), "--seed", "909"]);

    let config = dir.path().join("run.conf");
    write_file(
        &config,
        "history=24\nhorizon=4\ndim=16\nchunk=8\nstride=8\nheads=2\naggregators=2\n\
         batch_size=8\nepochs=2\nlr=0.002\nsplit=2:1:4\ncap_b=24\ncap_h=48\naggr_epochs=2\n",
    );

    let train_to = |name: &str| -> PathBuf {
        let ckpt = dir.path().join(name);
        run_ok(&[
            "train",
            "--data", data.to_str().unwrap(),
            "--out", ckpt.to_str().unwrap(),
            "--config", config.to_str().unwrap(),
            "--seed", "910",
        ]);
        ckpt
    };
    let ckpt_a = train_to("a.json");
    let ckpt_b = train_to("b.json");
    let bytes_a = std::fs::read(&ckpt_a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&ckpt_b).unwrap(), "checkpoints differ across reruns");

    let stream_to = |metrics: &str, drift: &str| {
        run_ok(&[
            "stream",
            "--data", data.to_str().unwrap(),
            "--checkpoint", ckpt_a.to_str().unwrap(),
            "--online",
            "--metrics-out", dir.path().join(metrics).to_str().unwrap(),
            "--drift-log", dir.path().join(drift).to_str().unwrap(),
            "--config", config.to_str().unwrap(),
            "--seed", "911",
        ]);
    };
    stream_to("m1.csv", "d1.ndjson");
    stream_to("m2.csv", "d2.ndjson");
    let m1 = std::fs::read(dir.path().join("m1.csv")).unwrap();
    assert_eq!(m1, std::fs::read(dir.path().join("m2.csv")).unwrap(), "metric traces differ");
    let d1 = std::fs::read(dir.path().join("d1.ndjson")).unwrap();
    assert_eq!(d1, std::fs::read(dir.path().join("d2.ndjson")).unwrap(), "drift logs differ");
    assert!(!m1.is_empty());
    println!(
        "criterion 9 (determinism): PASS — identical checkpoints ({} bytes) and metric traces ({} bytes)",
        bytes_a.len(),
        m1.len()
    );
}

// ── Criterion 10: FIFO semantics ────────────────────────────────────

#[test]
fn criterion_10_fifo_semantics() {
    struct Reference {
        buffer: Vec<u64>,
        history: Vec<u64>,
        cap_b: usize,
        cap_h: usize,
    }
    impl Reference {
        fn push(&mut self, tag: u64) {
            if self.buffer.len() == self.cap_b {
                self.buffer.remove(0);
            }
            self.buffer.push(tag);
        }
        fn flush(&mut self) {
            for tag in std::mem::take(&mut self.buffer) {
                if self.history.len() == self.cap_h {
                    self.history.remove(0);
                }
                self.history.push(tag);
            }
        }
    }

    let mut rng = Rng::from_seed(1010);
    let mut events = 0usize;
    let mut flushes = 0usize;
    for trial in 0..10 {
        let cap_b = 1 + rng.index(16);
        let cap_h = 1 + rng.index(32);
        let mut stores = ReplayStores::new(cap_b, cap_h).unwrap();
        let mut reference = Reference { buffer: Vec::new(), history: Vec::new(), cap_b, cap_h };
        let mut tag = 0u64;
        for _ in 0..1000 {
            events += 1;
            // Occasional drift-triggered flush among a stream of pushes.
            if rng.uniform(0.0, 1.0) < 0.07 {
                flushes += 1;
                stores.flush_to_history();
                reference.flush();
            } else {
                let sample = Sample { window: vec![tag as f64], target: vec![] };
                stores.push_recent(sample, tag as f64);
                reference.push(tag);
                tag += 1;
            }
            let got_b: Vec<u64> = stores.buffer().map(|s| s.loss as u64).collect();
            let got_h: Vec<u64> = stores.history().map(|s| s.window[0] as u64).collect();
            assert_eq!(got_b, reference.buffer, "trial {trial} buffer diverged");
            assert_eq!(got_h, reference.history, "trial {trial} history diverged");
            assert!(stores.buffer_len() <= cap_b);
            assert!(stores.history_len() <= cap_h);
        }
    }
    println!(
        "criterion 10 (FIFO semantics): PASS — {events} events ({flushes} drift flushes) matched the reference queues exactly"
    );
}
