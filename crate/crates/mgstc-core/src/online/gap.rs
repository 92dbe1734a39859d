//! Closed-form gap bounds for perturbation-augmented replay, plus the
//! Monte Carlo verifier that checks the augmented gap stays below the
//! plain one and cross-checks the plain closed form against an explicit
//! matrix construction.

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::spectral;

/// Parameters of the two-population correlation model: historical
/// eigenlift `alpha`, fresh-data scale `beta`, mixture weight `gamma`,
/// perturbation variance `xi`, and the largest correlated eigenvalue
/// `nu_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub nu_inf: f64,
}

impl GapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > self.alpha) {
            return Err(Error::domain(format!(
                "need 0 < alpha < beta, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.xi > 0.0) {
            return Err(Error::domain(format!("xi must be positive, got {}", self.xi)));
        }
        let spread = self.beta - self.alpha;
        if !(self.nu_inf >= spread && self.nu_inf <= 2.0 * spread) {
            return Err(Error::domain(format!(
                "nu_inf must lie in [{spread}, {}], got {}",
                2.0 * spread,
                self.nu_inf
            )));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        (1.0 - self.gamma) * self.alpha + self.gamma * self.beta
    }
}

/// `(gap_plain, gap_augmented)` closed forms:
/// `gap_plain = gamma (beta - alpha) / lambda`,
/// `gap_augmented = 1 - (gamma (beta - alpha - xi) + lambda) / (lambda + gamma nu_inf)`.
pub fn augmentation_gap(params: &GapParams) -> Result<(f64, f64)> {
    params.validate()?;
    let lambda = params.lambda();
    let spread = params.beta - params.alpha;
    let plain = params.gamma * spread / lambda;
    let augmented =
        1.0 - (params.gamma * (spread - params.xi) + lambda) / (lambda + params.gamma * params.nu_inf);
    Ok((plain, augmented))
}

/// Largest perturbation variance for which the augmented gap provably
/// stays below the plain one over the whole `nu_inf` region:
/// `xi < 2 gamma (beta - alpha)^2 / lambda`.
pub fn xi_regime_bound(alpha: f64, beta: f64, gamma: f64) -> f64 {
    let lambda = (1.0 - gamma) * alpha + gamma * beta;
    2.0 * gamma * (beta - alpha).powi(2) / lambda
}

/// Draw parameters uniformly from the validity region, with `xi` inside
/// the small-perturbation regime.
pub fn sample_valid_params(rng: &mut Rng) -> GapParams {
    let alpha = rng.uniform(0.1, 3.0);
    let beta = alpha + rng.uniform(0.1, 3.0);
    let gamma = rng.uniform(0.02, 0.98);
    let spread = beta - alpha;
    let nu_inf = rng.uniform(spread, 2.0 * spread);
    let bound = xi_regime_bound(alpha, beta, gamma);
    let xi = rng.uniform(1e-9, bound * 0.999);
    GapParams { alpha, beta, gamma, xi, nu_inf }
}

/// The fixed worked example used by the verifier report.
pub fn worked_example() -> GapParams {
    GapParams { alpha: 1.0, beta: 2.0, gamma: 0.5, xi: 0.2, nu_inf: 1.5 }
}

/// Outcome of the appendix verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub trials: usize,
    pub violations: usize,
    pub worked_plain: f64,
    pub worked_augmented: f64,
    pub spectral_checks: usize,
    pub spectral_max_error: f64,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "worked example: gap_plain={:.4} gap_augmented={:.4}",
            self.worked_plain, self.worked_augmented
        )?;
        writeln!(
            f,
            "sampled {} valid tuples: {} violations of gap_augmented < gap_plain",
            self.trials, self.violations
        )?;
        write!(
            f,
            "spectral cross-check on {} random instances: max |closed form - matrix norm| = {:.3e}",
            self.spectral_checks, self.spectral_max_error
        )
    }
}

/// Sample `n_trials` valid tuples and check the inequality on each; also
/// cross-check the plain closed form against the spectral norm of an
/// explicitly constructed gap matrix on random small instances.
pub fn verify_appendix(n_trials: usize, seed: u64) -> Result<VerifyReport> {
    if n_trials == 0 {
        return Err(Error::config("verifier needs at least one trial"));
    }
    let root = Rng::from_seed(seed);
    let mut rng = root.derive("gap-tuples");
    let mut violations = 0;
    for _ in 0..n_trials {
        let params = sample_valid_params(&mut rng);
        let (plain, augmented) = augmentation_gap(&params)?;
        if !(augmented < plain) {
            violations += 1;
        }
    }

    let (worked_plain, worked_augmented) = augmentation_gap(&worked_example())?;

    let mut spec_rng = root.derive("gap-spectral");
    let spectral_checks = 25;
    let mut spectral_max_error = 0.0f64;
    for _ in 0..spectral_checks {
        let params = sample_valid_params(&mut spec_rng);
        let t = 4 + spec_rng.index(29); // T in [4, 32]
        let k_max = (t - 1).min(8);
        let k = 1 + spec_rng.index(k_max);
        let err = spectral::closed_form_vs_matrix_error(&params, t, k, &mut spec_rng)?;
        spectral_max_error = spectral_max_error.max(err);
    }

    Ok(VerifyReport {
        trials: n_trials,
        violations,
        worked_plain,
        worked_augmented,
        spectral_checks,
        spectral_max_error,
    })
}
