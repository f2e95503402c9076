use rand::Rng;

use super::dense::{norm2, Mat};
use super::sparse::DataMatrix;
use crate::error::{Error, Result};
use crate::rng;

const POWER_SEED: u64 = 0x005e_ed0f_5eed;
const POWER_MAX_ITER: usize = 100_000;

/// `‖QᵀQ − I_K‖_F`.
pub fn stiefel_residual(q: &Mat) -> f64 {
    let k = q.cols();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            let g = super::dense::dot(q.col(i), q.col(j)) - if i == j { 1.0 } else { 0.0 };
            acc += g * g;
        }
    }
    acc.sqrt()
}

/// Power-iteration estimate `s` of the spectral norm with `s ≤ ‖X‖`.
///
/// Iterates on whichever of `XXᵀ`, `XᵀX` is smaller from a fixed seeded
/// start and stops once the estimate moves by less than `rel_tol / 1000`
/// relative, which in practice leaves `‖X‖ ≤ s·(1 + rel_tol)`.
pub fn spectral_norm(x: &DataMatrix, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    x.ensure_finite()?;
    if x.is_zero() {
        return Ok(0.0);
    }
    let left = x.rows() <= x.cols();
    let dim = if left { x.rows() } else { x.cols() };
    let mut r = rng::stream(POWER_SEED, 0);
    let mut v = Mat::from_fn(dim, 1, |_, _| r.random_range(-1.0..1.0));
    normalize(&mut v);

    // One application of the Gram operator; returns ‖X v‖ (or ‖Xᵀ v‖) too.
    let apply = |v: &Mat| -> Result<(Mat, f64)> {
        if left {
            let t = x.t_mul(v)?;
            let s = t.frob_norm();
            Ok((x.mul(&t)?, s))
        } else {
            let t = x.mul(v)?;
            let s = t.frob_norm();
            Ok((x.t_mul(&t)?, s))
        }
    };

    let mut estimate = 0.0f64;
    for it in 0..POWER_MAX_ITER {
        let (mut w, s) = apply(&v)?;
        if w.frob_norm() == 0.0 {
            // Start landed in the null space; restart along a canonical direction.
            v = Mat::zeros(dim, 1);
            v[(it % dim, 0)] = 1.0;
            continue;
        }
        let converged = it > 3 && (s - estimate).abs() <= 1e-3 * rel_tol * s;
        estimate = estimate.max(s);
        if converged {
            break;
        }
        normalize(&mut w);
        v = w;
    }
    Ok(estimate)
}

fn normalize(v: &mut Mat) {
    let n = norm2(v.as_slice());
    if n > 0.0 {
        for x in v.as_mut_slice() {
            *x /= n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiefel_residual_examples() {
        assert_eq!(stiefel_residual(&Mat::eye(3, 2)), 0.0);
        assert_eq!(stiefel_residual(&Mat::column_vector(&[2.0, 0.0])), 3.0);
    }

    #[test]
    fn spectral_norm_examples() {
        let diag = DataMatrix::Dense(Mat::diag(&[3.0, 1.0]));
        let s = spectral_norm(&diag, 1e-8).unwrap();
        assert!(s <= 3.0 && 3.0 <= s * (1.0 + 1e-8));

        let zero = DataMatrix::Dense(Mat::zeros(3, 2));
        assert_eq!(spectral_norm(&zero, 1e-6).unwrap(), 0.0);

        let ones = DataMatrix::Dense(Mat::filled(2, 2, 1.0));
        let s = spectral_norm(&ones, 1e-8).unwrap();
        assert!(s <= 2.0 + 1e-15 && 2.0 <= s * (1.0 + 1e-8));
    }

    #[test]
    fn spectral_norm_rejects_bad_tolerance_and_nan() {
        let m = DataMatrix::Dense(Mat::identity(2));
        assert!(spectral_norm(&m, 0.0).is_err());
        assert!(spectral_norm(&m, 1.0).is_err());
        let nan = DataMatrix::Dense(Mat::from_rows(&[&[f64::NAN]]));
        assert!(spectral_norm(&nan, 1e-6).is_err());
    }
}
