//! Numeric verification of the augmentation gap bound.

use mgstc_core::error::Result;
use mgstc_core::online::{verify_appendix, VerifyReport};

pub fn run(trials: usize, seed: u64) -> Result<VerifyReport> {
    let report = verify_appendix(trials, seed)?;
    println!("{report}");
    Ok(report)
}
