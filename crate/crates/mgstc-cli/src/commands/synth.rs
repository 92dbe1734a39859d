//! Synthetic stream generation from a drift plan file.
//!
//! Plan format (key=value lines, `#` comments):
//!
//! ```text
//! series=8
//! length=2000
//! drift=500,mean_shift,5.0
//! drift=1200,correlation_shift,0.6
//! ```

use std::path::Path;

use mgstc_core::data::{self, DriftKind, DriftPlan, DriftSpec};
use mgstc_core::error::{Error, Result};

pub fn parse_plan(text: &str) -> Result<(usize, usize, DriftPlan)> {
    let mut series: Option<usize> = None;
    let mut length: Option<usize> = None;
    let mut events = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected key=value, got '{line}'"),
        })?;
        let value = value.trim();
        match key.trim() {
            "series" => {
                series = Some(value.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad series count '{value}'"),
                })?)
            }
            "length" => {
                length = Some(value.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad length '{value}'"),
                })?)
            }
            "drift" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("drift needs start,kind,magnitude, got '{value}'"),
                    });
                }
                let start = parts[0].parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad drift start '{}'", parts[0]),
                })?;
                let kind = DriftKind::parse(parts[1])?;
                let magnitude = parts[2].parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad drift magnitude '{}'", parts[2]),
                })?;
                events.push(DriftSpec { start, kind, magnitude });
            }
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("unknown plan key '{other}'"),
                })
            }
        }
    }
    let series = series.ok_or_else(|| Error::config("plan must set series"))?;
    let length = length.ok_or_else(|| Error::config("plan must set length"))?;
    Ok((series, length, DriftPlan { events }))
}

pub fn run(plan_path: &Path, out_path: &Path, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(plan_path)?;
    let (series, length, plan) = parse_plan(&text)?;
    let frame = data::synth_stream(series, length, &plan, seed)?;
    data::write_csv(&frame, out_path)?;
    println!(
        "wrote {length} x {series} synthetic stream with {} drift event(s) to {}",
        plan.events.len(),
        out_path.display()
    );
    Ok(())
}
