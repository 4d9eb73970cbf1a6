//! Small dense routines used by the rank checks. Matrices are row-major
//! `Vec<Vec<T>>`; sizes here never exceed a few dozen.

use crate::num::Scalar;

/// Rank by Gaussian elimination with partial pivoting. Pivots whose
/// magnitude is at most `tol` are treated as zero.
pub fn rank_by_elimination<T: Scalar>(rows: &[Vec<T>], tol: T) -> usize {
    let mut a: Vec<Vec<T>> = rows.to_vec();
    let m = a.len();
    if m == 0 {
        return 0;
    }
    let n = a[0].len();
    let mut rank = 0;
    for col in 0..n {
        if rank == m {
            break;
        }
        let (piv, val) =
            (rank..m)
                .map(|r| (r, a[r][col].abs()))
                .fold((rank, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if val <= tol {
            continue;
        }
        a.swap(rank, piv);
        for r in (rank + 1)..m {
            let f = a[r][col] / a[rank][col];
            if f != T::zero() {
                for k in col..n {
                    let v = a[rank][k];
                    a[r][k] = a[r][k] - f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(m: &[Vec<T>]) -> Vec<T> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let two = T::one() + T::one();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off = off + a[i][j] * a[i][j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Singular values of a tall matrix given as columns (one-sided Jacobi),
/// descending.
pub fn singular_values<T: Scalar>(columns: &[Vec<T>]) -> Vec<T> {
    let mut u: Vec<Vec<T>> = columns.to_vec();
    let n = u.len();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = crate::num::dot(&u[p], &u[p]);
                let beta = crate::num::dot(&u[q], &u[q]);
                let gamma = crate::num::dot(&u[p], &u[q]);
                if gamma == T::zero() || gamma.abs() <= T::epsilon() * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                for k in 0..u[p].len() {
                    let x = u[p][k];
                    let y = u[q][k];
                    u[p][k] = cs * x - sn * y;
                    u[q][k] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = u.iter().map(|c| crate::num::norm2(c)).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elimination_rank_basic() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 1.0]];
        assert_eq!(rank_by_elimination(&rows, 1e-9), 2);
        let zero: Vec<Vec<f64>> = vec![vec![0.0; 3]; 2];
        assert_eq!(rank_by_elimination(&zero, 1e-9), 0);
    }

    #[test]
    fn jacobi_eigen_diagonalizes() {
        let m = vec![vec![2.0f64, 1.0], vec![1.0, 2.0]];
        let ev = symmetric_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_of_orthogonal_columns() {
        let cols = vec![vec![3.0, 0.0, 0.0], vec![0.0, 4.0, 0.0], vec![0.0, 0.0, 0.0]];
        let sv = singular_values(&cols);
        assert_eq!(sv, vec![4.0, 3.0, 0.0]);
        let cols = vec![vec![1.0f32, 1.0], vec![1.0, -1.0]];
        let sv = singular_values(&cols);
        assert!((sv[0] - 2f32.sqrt()).abs() < 1e-6 && (sv[1] - 2f32.sqrt()).abs() < 1e-6);
    }
}
