use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polar_factor, DataMatrix, Mat};
use crate::model::{
    ensure_feasible, sign_select, subgrad_dist_h, subgrad_dist_linear, SignMatrix, StiefelPoint,
};

/// Entries of `XᵀQ*` at or below this magnitude count as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Hard cap on `nK` for [`enumerate_oracle`].
pub const ORACLE_MAX_SIGNS: usize = 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalityReport {
    /// `dist(0, ∂h(P*, Q*))`.
    pub h_residual: f64,
    /// Residual of `0 ∈ −X sign(P* + XᵀQ*/α_*) + N_St(Q*)`.
    pub gen_eq_residual: f64,
    /// Smallest nonzero `|(XᵀQ*)_ij|`; zero when every entry vanishes.
    pub alpha_condition_threshold: f64,
    pub alpha_star_used: f64,
    pub certified_critical_for_l1: bool,
    /// Residual of `0 ∈ −X sign(XᵀQ*) + N_St(Q*)`.
    pub l1_residual: f64,
    /// Set when `XᵀQ* = 0`, where the threshold is a minimum over nothing.
    pub alpha_condition_vacuous: bool,
}

/// Returns `(α_* < threshold, threshold)` with `threshold` the smallest
/// entry of `|XᵀQ*|` above `zero_tol`, or `(false, 0)` if there is none.
pub fn check_alpha_condition(
    x: &DataMatrix,
    q_star: &Mat,
    alpha_star: f64,
    zero_tol: f64,
) -> Result<(bool, f64)> {
    if !(alpha_star > 0.0 && alpha_star.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha_star must be positive, got {alpha_star}")));
    }
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("zero_tol must be >= 0, got {zero_tol}")));
    }
    ensure_feasible(q_star, "Q*")?;
    let y = x.t_mul(q_star)?;
    Ok(alpha_threshold(&y, alpha_star, zero_tol))
}

fn alpha_threshold(y: &Mat, alpha_star: f64, zero_tol: f64) -> (bool, f64) {
    let threshold = y
        .as_slice()
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > zero_tol)
        .fold(f64::INFINITY, f64::min);
    if threshold.is_finite() {
        (alpha_star < threshold, threshold)
    } else {
        (false, 0.0)
    }
}

pub fn criticality_report(
    x: &DataMatrix,
    p_star: &SignMatrix,
    q_star: &Mat,
    alpha_star: f64,
) -> Result<CriticalityReport> {
    criticality_report_with_tol(x, p_star, q_star, alpha_star, DEFAULT_ZERO_TOL)
}

pub fn criticality_report_with_tol(
    x: &DataMatrix,
    p_star: &SignMatrix,
    q_star: &Mat,
    alpha_star: f64,
    zero_tol: f64,
) -> Result<CriticalityReport> {
    let (certified, threshold) = check_alpha_condition(x, q_star, alpha_star, zero_tol)?;
    let h_residual = subgrad_dist_h(x, p_star, q_star)?;
    let y = x.t_mul(q_star)?;

    let mut shifted = p_star.as_mat().clone();
    shifted.axpy_assign(1.0 / alpha_star, &y)?;
    let gen_sign = sign_select(&shifted, p_star)?;
    let gen_eq_residual = subgrad_dist_linear(&x.mul(&gen_sign)?.scaled(-1.0), q_star)?;

    let l1_sign = sign_select(&y, p_star)?;
    let l1_residual = subgrad_dist_linear(&x.mul(&l1_sign)?.scaled(-1.0), q_star)?;

    Ok(CriticalityReport {
        h_residual,
        gen_eq_residual,
        alpha_condition_threshold: threshold,
        alpha_star_used: alpha_star,
        certified_critical_for_l1: certified,
        l1_residual,
        alpha_condition_vacuous: threshold == 0.0,
    })
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub value: f64,
    pub p_best: SignMatrix,
    pub q_best: StiefelPoint,
}

/// Global maximum of `‖XᵀQ‖₁` by enumerating sign matrices.
///
/// For fixed `P` the best `Q` is the polar factor of `XP`, with value
/// `⟨P, XᵀQ⟩`. Flipping a column of `P` flips the matching column of `Q`,
/// so the first row of `P` is pinned to `+1`.
pub fn enumerate_oracle(x: &DataMatrix, k: usize) -> Result<OracleResult> {
    let (d, n) = (x.rows(), x.cols());
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidInput(format!("K={k} must satisfy 1 <= K <= min(n={n}, d={d})")));
    }
    if n * k > ORACLE_MAX_SIGNS {
        return Err(Error::Refused(format!(
            "enumeration over 2^(nK) sign matrices needs nK <= {ORACLE_MAX_SIGNS}, got {}",
            n * k
        )));
    }
    let free = (n - 1) * k;
    let mut best: Option<(f64, Mat, Mat)> = None;
    for mask in 0u64..(1u64 << free) {
        let p = Mat::from_fn(n, k, |i, j| {
            if i == 0 {
                1.0
            } else {
                let bit = j * (n - 1) + (i - 1);
                if mask >> bit & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            }
        });
        let q = polar_factor(&x.mul(&p)?)?;
        let value = p.inner(&x.t_mul(&q)?)?;
        if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
            best = Some((value, p, q));
        }
    }
    let (_, p, q) = best.expect("at least one sign matrix");
    let q_best = StiefelPoint::new(q)?;
    let value = x.t_mul(&q_best)?.abs_sum();
    let p_best = sign_select(&x.t_mul(&q_best)?, &SignMatrix::new(p)?)?;
    Ok(OracleResult { value, p_best, q_best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::Dense(Mat::from_rows(rows))
    }

    #[test]
    fn alpha_condition_examples() {
        let x = DataMatrix::Dense(Mat::from_rows(&[&[0.5, -0.2, 0.0]]));
        let q = Mat::from_rows(&[&[1.0]]);
        assert_eq!(check_alpha_condition(&x, &q, 0.1, 1e-12).unwrap(), (true, 0.2));
        assert_eq!(check_alpha_condition(&x, &q, 0.3, 1e-12).unwrap(), (false, 0.2));
        let zero = DataMatrix::Dense(Mat::zeros(1, 3));
        assert_eq!(check_alpha_condition(&zero, &q, 0.1, 1e-12).unwrap(), (false, 0.0));
    }

    #[test]
    fn alpha_condition_rejects_infeasible_point() {
        let x = dense(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let q = Mat::from_rows(&[&[2.0], &[0.0]]);
        assert!(matches!(check_alpha_condition(&x, &q, 0.1, 0.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn oracle_examples() {
        let eye = dense(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = enumerate_oracle(&eye, 1).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-14);
        let h = 0.5f64.sqrt();
        assert!((r.q_best[(0, 0)].abs() - h).abs() < 1e-14);
        assert_eq!(r.q_best[(0, 0)], r.q_best[(1, 0)]);

        let r = enumerate_oracle(&dense(&[&[3.0, 0.0], &[0.0, 0.0]]), 1).unwrap();
        assert!((r.value - 3.0).abs() < 1e-14);
        assert!((r.q_best[(0, 0)].abs() - 1.0).abs() < 1e-14);

        let r = enumerate_oracle(&DataMatrix::Dense(Mat::zeros(2, 3)), 1).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let x = DataMatrix::Dense(Mat::filled(3, 12, 1.0));
        assert!(matches!(enumerate_oracle(&x, 2), Err(Error::Refused(_))));
    }

    #[test]
    fn oracle_optimum_is_critical() {
        let x = dense(&[&[1.0, -2.0, 0.5], &[0.3, 1.0, 2.0], &[-1.0, 0.2, 0.7]]);
        let r = enumerate_oracle(&x, 2).unwrap();
        let rep = criticality_report(&x, &r.p_best, &r.q_best, 1e-6).unwrap();
        assert!(rep.l1_residual <= 1e-10, "{rep:?}");
        assert!(rep.certified_critical_for_l1);
    }

    #[test]
    fn zero_data_report() {
        let x = DataMatrix::Dense(Mat::zeros(2, 2));
        let q = Mat::from_rows(&[&[1.0], &[0.0]]);
        let rep = criticality_report(&x, &SignMatrix::ones(2, 1), &q, 0.1).unwrap();
        assert_eq!(rep.h_residual, 0.0);
        assert_eq!(rep.gen_eq_residual, 0.0);
        assert_eq!(rep.l1_residual, 0.0);
        assert!(!rep.certified_critical_for_l1);
        assert!(rep.alpha_condition_vacuous);
    }
}
