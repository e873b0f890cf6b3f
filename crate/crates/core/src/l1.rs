//! Equality-constrained basis pursuit: `min ||x||_1  s.t.  Phi x = y`,
//! the convex baseline the greedy algorithms are compared against.
//!
//! Solved by ADMM on the splitting `f(x) = indicator(Phi x = y)`,
//! `g(z) = ||z||_1`: the x-update is a projection onto the affine
//! constraint (one factorization of `Phi Phi^T` per call, reused across
//! iterations), the z-update is soft thresholding. The observation is
//! normalized internally so the iteration is scale equivariant and the
//! penalty parameter needs no per-problem tuning.
//!
//! The returned estimate is post-processed for comparability with greedy
//! outputs: entries below `1e-8 * ||x||_inf` are zeroed and the survivors
//! are refit by least squares on their support.

use crate::error::{Error, Result};
use crate::linalg::{norm2, restricted_least_squares, top_k_indices, DenseMatrix, IndexSet};
use serde::{Deserialize, Serialize};

/// Solver configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    /// Drives both the primal/dual stopping test and the feasibility
    /// guarantee of the returned estimate.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            tolerance: 1e-8,
            max_iterations: 5000,
        }
    }
}

/// ADMM penalty and over-relaxation; fixed because the observation is
/// normalized before iterating.
const PENALTY: f64 = 1.0;
const OVER_RELAXATION: f64 = 1.8;
const DEBIAS_THRESHOLD: f64 = 1e-8;

/// Outcome of one basis-pursuit solve.
#[derive(Clone, Debug)]
pub struct L1Result {
    /// Debiased estimate, length N.
    pub estimate: Vec<f64>,
    pub iterations: usize,
    /// Primal/dual residuals fell below tolerance before the iteration cap.
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `||Phi x - y|| / ||y||` of the returned estimate.
    pub feasibility_gap: f64,
}

pub fn basis_pursuit(phi: &DenseMatrix, y: &[f64], cfg: &L1Config) -> Result<L1Result> {
    if y.len() != phi.rows() {
        return Err(Error::invalid(format!(
            "basis pursuit: rhs length {} does not match {} rows",
            y.len(),
            phi.rows()
        )));
    }
    if cfg.tolerance <= 0.0 || !cfg.tolerance.is_finite() {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if cfg.max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be at least 1"));
    }
    let m = phi.rows();
    let n = phi.cols();
    let y_norm = norm2(y);
    if y_norm == 0.0 {
        return Ok(L1Result {
            estimate: vec![0.0; n],
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            feasibility_gap: 0.0,
        });
    }
    let y_scaled: Vec<f64> = y.iter().map(|v| v / y_norm).collect();

    // Gram of the rows, factored once.
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for l in 0..n {
                acc += phi.get(i, l) * phi.get(j, l);
            }
            gram[i * m + j] = acc;
            gram[j * m + i] = acc;
        }
    }
    let chol = cholesky(&gram, m).ok_or_else(|| {
        Error::invalid("basis pursuit: Phi Phi^T is singular (dependent rows)")
    })?;

    let project = |v: &[f64]| -> Vec<f64> {
        let av = phi.mul_vec(v);
        let mut rhs: Vec<f64> = av.iter().zip(&y_scaled).map(|(a, b)| a - b).collect();
        chol_solve(&chol, m, &mut rhs);
        let corr = phi.transpose_mul(&rhs);
        v.iter().zip(&corr).map(|(a, b)| a - b).collect()
    };

    let kappa = 1.0 / PENALTY;
    let mut z = project(&vec![0.0; n]); // least-norm feasible point
    let mut u = vec![0.0; n];
    let mut x = z.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let sqrt_n = (n as f64).sqrt();

    for iter in 1..=cfg.max_iterations {
        iterations = iter;
        let v: Vec<f64> = z.iter().zip(&u).map(|(zi, ui)| zi - ui).collect();
        x = project(&v);
        let z_old = z.clone();
        let mut z_new = vec![0.0; n];
        for i in 0..n {
            let relaxed = OVER_RELAXATION * x[i] + (1.0 - OVER_RELAXATION) * z_old[i];
            z_new[i] = soft_threshold(relaxed + u[i], kappa);
            u[i] += relaxed - z_new[i];
        }
        z = z_new;

        primal = x
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        dual = PENALTY
            * z.iter()
                .zip(&z_old)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        let x_norm = norm2(&x);
        let z_norm = norm2(&z);
        let u_norm = norm2(&u);
        let eps_pri = sqrt_n * cfg.tolerance + cfg.tolerance * x_norm.max(z_norm);
        let eps_dual = sqrt_n * cfg.tolerance + cfg.tolerance * PENALTY * u_norm;
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    // The projected iterate x is feasible by construction; z is sparse.
    // Take the support from z, fall back to x when z is still all-zero.
    let candidate = if z.iter().any(|v| *v != 0.0) { &z } else { &x };
    let estimate = debias(phi, y, candidate, y_norm)?;
    let ax = phi.mul_vec(&estimate);
    let gap = ax
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
        / y_norm;
    Ok(L1Result {
        estimate,
        iterations,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        feasibility_gap: gap,
    })
}

/// Zero the near-zero entries and refit the survivors by least squares,
/// so exact-recovery decisions are comparable with greedy outputs.
fn debias(phi: &DenseMatrix, y: &[f64], raw: &[f64], y_norm: f64) -> Result<Vec<f64>> {
    let m = phi.rows();
    let n = phi.cols();
    let peak = raw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let cut = DEBIAS_THRESHOLD * peak;
    let mut survivors: Vec<usize> = (0..n).filter(|&i| raw[i].abs() > cut).collect();
    if survivors.is_empty() {
        return Ok(vec![0.0; n]);
    }
    if survivors.len() > m {
        // Keep the m largest magnitudes so the refit stays determined.
        let masked: Vec<f64> = (0..n)
            .map(|i| if raw[i].abs() > cut { raw[i] } else { 0.0 })
            .collect();
        survivors = top_k_indices(&masked, m)?.as_slice().to_vec();
    }
    let sol = restricted_least_squares(phi, y, &IndexSet::new(survivors))?;
    let _ = y_norm;
    Ok(sol.estimate)
}

fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// In-place lower Cholesky factor of a symmetric positive-definite matrix
/// stored row-major; returns None when a pivot is not positive.
fn cholesky(a: &[f64], nn: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; nn * nn];
    for i in 0..nn {
        for j in 0..=i {
            let mut acc = a[i * nn + j];
            for k in 0..j {
                acc -= l[i * nn + k] * l[j * nn + k];
            }
            if i == j {
                if acc <= 0.0 {
                    return None;
                }
                l[i * nn + i] = acc.sqrt();
            } else {
                l[i * nn + j] = acc / l[j * nn + j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[f64], nn: usize, b: &mut [f64]) {
    for i in 0..nn {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[i * nn + k] * b[k];
        }
        b[i] = acc / l[i * nn + i];
    }
    for i in (0..nn).rev() {
        let mut acc = b[i];
        for k in (i + 1)..nn {
            acc -= l[k * nn + i] * b[k];
        }
        b[i] = acc / l[i * nn + i];
    }
}

#[cfg(test)]
mod tests {
    #![allow(clippy::needless_range_loop)] // oracle code is deliberately naive
    use super::*;
    use crate::linalg::IndexSet;
    use crate::problem::{build_instance, SignalKind};
    use crate::rng::RngStream;

    fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
        let diff: f64 = estimate
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / norm2(truth)
    }

    #[test]
    fn identity_matrix_returns_the_observation() {
        let phi = DenseMatrix::identity(6);
        let y = [1.0, -2.0, 0.5, 3.0, -0.25, 1.5];
        let res = basis_pursuit(&phi, &y, &L1Config::default()).unwrap();
        assert!(res.converged);
        for i in 0..6 {
            assert!((res.estimate[i] - y[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn recovers_verified_unique_sparse_solution() {
        let inst =
            build_instance(8, 12, 2, SignalKind::Gaussian, 0.0, RngStream::new(55, 9)).unwrap();
        let truth = inst.truth.as_ref().unwrap();
        // Cross-validate uniqueness of the sparsest solution first.
        let mut zero_residual_supports = 0;
        for a in 0..12 {
            for b in (a + 1)..12 {
                let sol = restricted_least_squares(
                    &inst.phi,
                    &inst.y,
                    &IndexSet::new(vec![a, b]),
                )
                .unwrap();
                if sol.residual_norm < 1e-10 * norm2(&inst.y) {
                    zero_residual_supports += 1;
                }
            }
        }
        assert_eq!(zero_residual_supports, 1, "sparsest solution not unique");
        let res = basis_pursuit(&inst.phi, &inst.y, &L1Config::default()).unwrap();
        assert!(res.converged);
        assert!(
            relative_error(&res.estimate, truth.values()) < 1e-6,
            "relative error {}",
            relative_error(&res.estimate, truth.values())
        );
    }

    #[test]
    fn feasibility_holds_on_converged_runs() {
        for t in 0..5 {
            let inst = build_instance(
                30,
                90,
                4,
                SignalKind::Cars,
                0.0,
                RngStream::new(700, t),
            )
            .unwrap();
            let res = basis_pursuit(&inst.phi, &inst.y, &L1Config::default()).unwrap();
            assert!(res.converged);
            assert!(
                res.feasibility_gap <= 1e-8,
                "feasibility gap {}",
                res.feasibility_gap
            );
        }
    }

    #[test]
    fn scaling_equivariance() {
        let inst =
            build_instance(20, 60, 3, SignalKind::Gaussian, 0.0, RngStream::new(81, 3)).unwrap();
        let cfg = L1Config::default();
        let base = basis_pursuit(&inst.phi, &inst.y, &cfg).unwrap();
        let c = 3.7;
        let scaled_y: Vec<f64> = inst.y.iter().map(|v| c * v).collect();
        let scaled = basis_pursuit(&inst.phi, &scaled_y, &cfg).unwrap();
        for i in 0..60 {
            assert!(
                (scaled.estimate[i] - c * base.estimate[i]).abs()
                    <= 1e-8 * (1.0 + base.estimate[i].abs()),
                "entry {i}"
            );
        }
    }

    #[test]
    fn l1_norm_beats_feasible_grid() {
        use nalgebra::{DMatrix, DVector};
        // Tiny instance; enumerate feasible points x_p + null-space combos.
        let inst =
            build_instance(3, 5, 1, SignalKind::Gaussian, 0.0, RngStream::new(14, 1)).unwrap();
        let res = basis_pursuit(&inst.phi, &inst.y, &L1Config::default()).unwrap();
        assert!(res.converged);
        let l1_hat: f64 = res.estimate.iter().map(|v| v.abs()).sum();

        let a = DMatrix::from_fn(3, 5, |i, j| inst.phi.get(i, j));
        let gram_inv = (&a * a.transpose()).try_inverse().unwrap();
        let null_project = |v: &DVector<f64>| -> DVector<f64> {
            v - a.transpose() * (&gram_inv * (&a * v))
        };
        // Two orthonormal null-space directions by Gram-Schmidt over
        // projected canonical vectors.
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for c in 0..5 {
            if basis.len() == 2 {
                break;
            }
            let mut cand = null_project(&DVector::from_fn(5, |i, _| f64::from(i == c)));
            for b in &basis {
                let coef = b.dot(&cand);
                cand -= b * coef;
            }
            let norm = cand.norm();
            if norm > 1e-8 {
                basis.push(cand / norm);
            }
        }
        assert_eq!(basis.len(), 2);
        let x_p = a
            .clone()
            .svd(true, true)
            .solve(&DVector::from_column_slice(&inst.y), 1e-12)
            .unwrap();
        let mut best = f64::INFINITY;
        let steps = 41;
        for i in 0..steps {
            for j in 0..steps {
                let t1 = -2.0 + 4.0 * (i as f64) / (steps - 1) as f64;
                let t2 = -2.0 + 4.0 * (j as f64) / (steps - 1) as f64;
                let mut l1 = 0.0;
                for c in 0..5 {
                    l1 += (x_p[c] + t1 * basis[0][c] + t2 * basis[1][c]).abs();
                }
                best = best.min(l1);
            }
        }
        assert!(
            l1_hat <= best + 1e-6,
            "solver l1 {l1_hat} vs grid best {best}"
        );
    }

    #[test]
    fn iteration_cap_is_flagged_not_fatal() {
        let inst =
            build_instance(20, 60, 3, SignalKind::Gaussian, 0.0, RngStream::new(5, 5)).unwrap();
        let res = basis_pursuit(
            &inst.phi,
            &inst.y,
            &L1Config {
                tolerance: 1e-8,
                max_iterations: 1,
            },
        )
        .unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }
}
