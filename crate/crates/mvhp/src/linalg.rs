//! Small dense linear-algebra helpers sized for the handful-of-processes
//! regime: Gaussian elimination with partial pivoting and a power-iteration
//! spectral radius. Matrices are `Vec<Vec<f64>>` row-major.

use crate::error::{Error, Result};

/// Solve `m x = rhs` in place via Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = m.len();
    for row in &m {
        if row.len() != n {
            return Err(Error::DimensionMismatch("matrix is not square".into()));
        }
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch(
            "rhs length does not match matrix".into(),
        ));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidParameter("singular linear system".into()));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let (pivot_rows, rest) = m.split_at_mut(col + 1);
        let pivot_row = &pivot_rows[col];
        let (rhs_head, rhs_rest) = rhs.split_at_mut(col + 1);
        for (target, r) in rest.iter_mut().zip(rhs_rest.iter_mut()) {
            let f = target[col] / pivot_row[col];
            if f == 0.0 {
                continue;
            }
            for (t, p) in target[col..].iter_mut().zip(pivot_row[col..].iter()) {
                *t -= f * p;
            }
            *r -= f * rhs_head[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for col in row + 1..n {
            acc -= m[row][col] * x[col];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Spectral radius of a nonnegative matrix by power iteration with a strictly
/// positive start vector; converges for reducible and even nilpotent inputs
/// (where the iterate collapses toward zero and the estimate follows).
pub(crate) fn spectral_radius_nonneg(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut rho = 0.0;
    for _ in 0..500 {
        let mut next = vec![0.0; n];
        for (i, row) in m.iter().enumerate() {
            next[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let norm: f64 = next.iter().map(|x| x.abs()).sum();
        if norm < 1e-300 {
            return 0.0;
        }
        let new_rho = norm; // since |v| was normalized to 1 in l1
        for x in &mut next {
            *x /= norm;
        }
        v = next;
        if (new_rho - rho).abs() <= 1e-12 * (1.0 + new_rho) {
            return new_rho;
        }
        rho = new_rho;
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_identity() {
        let x = solve(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![3.0, 4.0]).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
    }

    #[test]
    fn solve_known_system() {
        // [[2,1],[1,3]] x = [5,10] -> x = [1,3]
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_needs_pivoting() {
        // Zero on the diagonal forces a row swap.
        let x = solve(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0, 7.0]).unwrap();
        assert!((x[0] - 7.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn spectral_radius_diagonal() {
        let m = vec![vec![0.3, 0.0], vec![0.0, 0.7]];
        assert!((spectral_radius_nonneg(&m) - 0.7).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_known_2x2() {
        // [[0.5,0.3],[0,0.6]] upper triangular -> eigenvalues on the diagonal.
        let m = vec![vec![0.5, 0.3], vec![0.0, 0.6]];
        assert!((spectral_radius_nonneg(&m) - 0.6).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_nilpotent_is_zero() {
        let m = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        assert!(spectral_radius_nonneg(&m) < 1e-9);
    }

    #[test]
    fn spectral_radius_symmetric_pair() {
        // [[0,a],[a,0]] has radius a.
        let m = vec![vec![0.0, 0.4], vec![0.4, 0.0]];
        assert!((spectral_radius_nonneg(&m) - 0.4).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_empty() {
        assert_eq!(spectral_radius_nonneg(&[]), 0.0);
    }
}
