//! Explicit matrix route for the gap bound: build the correlation
//! matrices from a random orthonormal basis, form the normalized gap
//! matrix with a generic symmetric eigendecomposition, and take its
//! spectral norm. Entirely independent of the closed forms it checks.

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::gap::GapParams;

/// Cyclic Jacobi eigendecomposition of a symmetric `n x n` matrix.
/// Returns (eigenvalues, row-major eigenvector matrix V with columns as
/// eigenvectors, i.e. A = V diag(w) V^T).
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i * n + i]).collect();
    (eigenvalues, v)
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm_sym(matrix: &[f64], n: usize) -> f64 {
    let (eigenvalues, _) = jacobi_eigen(matrix, n);
    eigenvalues.iter().fold(0.0f64, |m, w| m.max(w.abs()))
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for p in 0..n {
            let av = a[i * n + p];
            if av == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += av * b[p * n + j];
            }
        }
    }
    out
}

/// Random `t x k` matrix with orthonormal columns (Gram-Schmidt on
/// Gaussian draws).
pub fn random_orthonormal(t: usize, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if k > t {
        return Err(Error::config(format!("need k <= t, got k={k} t={t}")));
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut candidate: Vec<f64> = (0..t).map(|_| rng.normal(0.0, 1.0)).collect();
        for prev in &cols {
            let dot: f64 = candidate.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (c, p) in candidate.iter_mut().zip(prev) {
                *c -= dot * p;
            }
        }
        let norm: f64 = candidate.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // degenerate draw, retry
        }
        for c in candidate.iter_mut() {
            *c /= norm;
        }
        cols.push(candidate);
    }
    let mut u = vec![0.0; t * k];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..t {
            u[i * k + j] = col[i];
        }
    }
    Ok(u)
}

/// Build `R_A = alpha I + U diag(nu) U^T`, `R_B = beta I`,
/// `R = (1-gamma) R_A + gamma R_B`, then
/// `G = R^{-1/2} (R - R_A) R^{-1/2}` with `R^{-1/2}` from a generic
/// eigendecomposition, and return the spectral norm of `G`.
pub fn gap_matrix_spectral_norm(
    params: &GapParams,
    nu: &[f64],
    u: &[f64],
    t: usize,
    k: usize,
) -> f64 {
    assert_eq!(nu.len(), k);
    assert_eq!(u.len(), t * k);
    // R_A
    let mut r_a = vec![0.0; t * t];
    for i in 0..t {
        r_a[i * t + i] = params.alpha;
    }
    for (j, &nu_j) in nu.iter().enumerate() {
        for i in 0..t {
            for l in 0..t {
                r_a[i * t + l] += nu_j * u[i * k + j] * u[l * k + j];
            }
        }
    }
    // R = (1-gamma) R_A + gamma beta I
    let mut r = r_a.iter().map(|v| (1.0 - params.gamma) * v).collect::<Vec<f64>>();
    for i in 0..t {
        r[i * t + i] += params.gamma * params.beta;
    }
    // R^{-1/2} via eigendecomposition.
    let (eigenvalues, vectors) = jacobi_eigen(&r, t);
    let mut r_inv_sqrt = vec![0.0; t * t];
    for (j, &w) in eigenvalues.iter().enumerate() {
        let scale = 1.0 / w.sqrt();
        for i in 0..t {
            for l in 0..t {
                r_inv_sqrt[i * t + l] += scale * vectors[i * t + j] * vectors[l * t + j];
            }
        }
    }
    // G = R^{-1/2} (R - R_A) R^{-1/2}
    let mut diff = vec![0.0; t * t];
    for i in 0..t * t {
        diff[i] = r[i] - r_a[i];
    }
    let tmp = matmul(&r_inv_sqrt, &diff, t);
    let mut g = matmul(&tmp, &r_inv_sqrt, t);
    // Symmetrize against round-off before the eigen solve.
    for i in 0..t {
        for j in i + 1..t {
            let avg = 0.5 * (g[i * t + j] + g[j * t + i]);
            g[i * t + j] = avg;
            g[j * t + i] = avg;
        }
    }
    spectral_norm_sym(&g, t)
}

/// |closed-form plain gap - explicit matrix spectral norm| for a random
/// instance with `nu` components drawn inside the validity region and
/// `nu_inf` attained.
pub fn closed_form_vs_matrix_error(
    params: &GapParams,
    t: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<f64> {
    params.validate()?;
    if k >= t {
        return Err(Error::config("need k < t for the complement branch to exist"));
    }
    let spread = params.beta - params.alpha;
    let mut nu: Vec<f64> = (0..k).map(|_| rng.uniform(spread, params.nu_inf)).collect();
    nu[0] = params.nu_inf; // make sure the infinity norm is attained
    let u = random_orthonormal(t, k, rng)?;
    let matrix_norm = gap_matrix_spectral_norm(params, &nu, &u, t, k);
    let closed = params.gamma * spread / params.lambda();
    Ok((matrix_norm - closed).abs())
}
