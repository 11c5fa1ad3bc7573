use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest accepted pivot of the unit-diagonal-scaled Cholesky factor.
const PIVOT_TOL: f64 = 1e-11;

/// Solve `m x = b` for symmetric positive definite `m`. The matrix is scaled to
/// unit diagonal first so the rank test does not depend on column units.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let q = m.nrows();
    let mut scale = DVector::zeros(q);
    for j in 0..q {
        let d = m[(j, j)];
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Singular(format!("zero or non-finite diagonal at column {j}")));
        }
        scale[j] = 1.0 / d.sqrt();
    }
    let scaled = DMatrix::from_fn(q, q, |i, j| m[(i, j)] * scale[i] * scale[j]);
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::Singular("cross-product matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    for j in 0..q {
        if l[(j, j)] * l[(j, j)] < PIVOT_TOL {
            return Err(Error::Singular(format!("rank deficient at column {j}")));
        }
    }
    let rhs = b.component_mul(&scale);
    let sol = chol.solve(&rhs);
    Ok(sol.component_mul(&scale))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_and_rank_check() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let x = solve_spd(&m, &DVector::from_vec(vec![2.0, 1.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && x[1].abs() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            solve_spd(&singular, &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn sample_variance_divisor() {
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_variance(&[5.0]), 0.0);
        assert!((expit(logit(0.3)) - 0.3).abs() < 1e-15);
    }
}
