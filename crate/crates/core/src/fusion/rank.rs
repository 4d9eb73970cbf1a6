//! Full-rankness checks: factor design matrix, second moment, covariance
//! bound and the logit Jacobian's column rank.

use super::{BranchFeatures, FusionModel};
use crate::linalg::{rank_by_elimination, singular_values, symmetric_eigenvalues};
use crate::num::{to_f64, Scalar};
use serde::{Deserialize, Serialize};

pub const DESIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub min_eigenvalue_second_moment: f64,
    pub balance_epsilon: f64,
    pub covariance_min_eigenvalue: f64,
    /// covariance min eigenvalue ≥ ε(1 − ε) − 1e−9.
    pub covariance_bound_holds: bool,
    pub n: usize,
}

pub fn design_matrix_rank(bits: &[[bool; 4]]) -> RankReport {
    let n = bits.len();
    let rows: Vec<Vec<f64>> = bits.iter().map(|r| r.iter().map(|&b| b as u8 as f64).collect()).collect();
    let rank = rank_by_elimination(&rows, DESIGN_TOL);
    let nf = n.max(1) as f64;
    let mean: Vec<f64> = (0..4).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / nf).collect();
    let mut second = vec![vec![0.0; 4]; 4];
    for r in &rows {
        for i in 0..4 {
            for j in 0..4 {
                second[i][j] += r[i] * r[j] / nf;
            }
        }
    }
    let cov: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| second[i][j] - mean[i] * mean[j]).collect()).collect();
    let min_second = symmetric_eigenvalues(&second)[0];
    let min_cov = symmetric_eigenvalues(&cov)[0];
    let eps = mean.iter().map(|&p| p.min(1.0 - p)).fold(f64::INFINITY, f64::min);
    let eps = if n == 0 { 0.0 } else { eps };
    RankReport {
        rank,
        min_eigenvalue_second_moment: min_second,
        balance_epsilon: eps,
        covariance_min_eigenvalue: min_cov,
        covariance_bound_holds: n > 0 && min_cov >= eps * (1.0 - eps) - DESIGN_TOL,
        n,
    }
}

/// Numerical rank of the four stacked logit gradients ∂logit/∂z_k.
pub fn jacobian_column_rank<T: Scalar>(model: &FusionModel<T>, x: &BranchFeatures<T>) -> usize {
    let cols: Vec<Vec<f64>> = match model.logit_jacobian(x) {
        Ok(v) => v.iter().map(|col| col.iter().map(|&t| to_f64(t)).collect()).collect(),
        Err(_) => return 0,
    };
    let sv = singular_values(&cols);
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_and_flips() {
        let mut rows = vec![[false; 4]];
        for k in 0..4 {
            let mut r = [false; 4];
            r[k] = true;
            rows.push(r);
        }
        assert_eq!(design_matrix_rank(&rows).rank, 4);
    }

    #[test]
    fn identical_rows() {
        let r = design_matrix_rank(&[[true, false, true, true]; 5]);
        assert_eq!(r.rank, 1);
        assert_eq!(r.balance_epsilon, 0.0);
    }

    #[test]
    fn full_factorial_covariance() {
        let rows: Vec<[bool; 4]> = (0..16u8).map(|m| std::array::from_fn(|k| m >> k & 1 == 1)).collect();
        let r = design_matrix_rank(&rows);
        assert_eq!(r.rank, 4);
        assert!((r.covariance_min_eigenvalue - 0.25).abs() < 1e-12);
        assert_eq!(r.balance_epsilon, 0.5);
        assert!(r.covariance_bound_holds);
    }
}
