//! Problem data and the quantities evaluated at a point: the L1 objective,
//! the two-block objective `h`, the potential `Ψ_β`, the residual map
//! `R(Q) = A − Q Aᵀ Q`, and exact subgradient distances on the Stiefel manifold.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{stiefel_residual, DataMatrix, Mat};

/// Feasibility tolerance when constructing a [`StiefelPoint`].
pub const STIEFEL_CONSTRUCT_TOL: f64 = 1e-8;
/// Feasibility tolerance for operation preconditions.
pub const STIEFEL_PRECONDITION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub x: DataMatrix,
    pub k: usize,
    pub labels: Option<Vec<i64>>,
}

impl ProblemInstance {
    pub fn new(x: impl Into<DataMatrix>, k: usize) -> Result<Self> {
        let x = x.into();
        let (d, n) = (x.rows(), x.cols());
        if k == 0 || k > d.min(n) {
            return Err(Error::InvalidInput(format!(
                "subspace dimension K={k} must satisfy 1 <= K <= min(n={n}, d={d})"
            )));
        }
        x.ensure_finite()?;
        Ok(ProblemInstance { x, k, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::dims(
                "labels",
                format!("{} labels", self.n()),
                format!("{}", labels.len()),
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.x.rows()
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }
}

/// A `d × K` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StiefelPoint(Mat);

impl StiefelPoint {
    pub fn new(q: Mat) -> Result<Self> {
        if q.rows() < q.cols() || q.cols() == 0 {
            return Err(Error::InvalidInput(format!(
                "Stiefel point needs d >= K >= 1, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        q.ensure_finite("Stiefel point")?;
        let res = stiefel_residual(&q);
        if res > STIEFEL_CONSTRUCT_TOL {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal (residual {res:.3e})"
            )));
        }
        Ok(StiefelPoint(q))
    }

    /// Wraps a matrix produced by a polar factor without re-checking it.
    pub(crate) fn from_polar(q: Mat) -> Self {
        debug_assert!(stiefel_residual(&q) <= STIEFEL_CONSTRUCT_TOL);
        StiefelPoint(q)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

impl Deref for StiefelPoint {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// An `n × K` matrix with every entry exactly `±1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignMatrix(Mat);

impl SignMatrix {
    pub fn new(p: Mat) -> Result<Self> {
        if p.as_slice().iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidInput("sign matrix entries must be exactly ±1".into()));
        }
        Ok(SignMatrix(p))
    }

    pub fn ones(n: usize, k: usize) -> Self {
        SignMatrix(Mat::filled(n, k, 1.0))
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

impl Deref for SignMatrix {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.0
    }
}

fn check_q_rows(x: &DataMatrix, q: &Mat) -> Result<()> {
    if q.rows() != x.rows() {
        return Err(Error::dims("Q", format!("{} rows", x.rows()), format!("{}", q.rows())));
    }
    Ok(())
}

fn check_pq(x: &DataMatrix, p: &Mat, q: &Mat) -> Result<()> {
    check_q_rows(x, q)?;
    if p.rows() != x.cols() || p.cols() != q.cols() {
        return Err(Error::dims(
            "P",
            format!("{}x{}", x.cols(), q.cols()),
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_feasible(q: &Mat, what: &str) -> Result<()> {
    let res = stiefel_residual(q);
    if res > STIEFEL_PRECONDITION_TOL || !res.is_finite() {
        return Err(Error::Precondition(format!(
            "{what} is not on the Stiefel manifold (residual {res:.3e})"
        )));
    }
    Ok(())
}

/// `‖XᵀQ‖₁`; the L1-PCA objective `ℓ(Q)` is its negation.
pub fn objective_l1(x: &DataMatrix, q: &Mat) -> Result<f64> {
    check_q_rows(x, q)?;
    Ok(x.t_mul(q)?.abs_sum())
}

/// `h(P, Q) = −⟨P, XᵀQ⟩` on the feasible set.
pub fn objective_h(x: &DataMatrix, p: &Mat, q: &Mat) -> Result<f64> {
    check_pq(x, p, q)?;
    Ok(-p.inner(&x.t_mul(q)?)?)
}

/// `Ψ_β(P, Q, Q′) = h(P, Q) + (β/2)‖Q − Q′‖²_F`.
pub fn potential_psi(x: &DataMatrix, p: &Mat, q: &Mat, q_prev: &Mat, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!("beta must be >= 0, got {beta}")));
    }
    q.check_same_shape(q_prev, "potential_psi")?;
    let h = objective_h(x, p, q)?;
    let gap = q.dist(q_prev)?;
    Ok(h + 0.5 * beta * gap * gap)
}

/// `R(Q) = A − Q AᵀQ`.
pub fn residual_r(a: &Mat, q: &Mat) -> Result<Mat> {
    a.check_same_shape(q, "residual_r")?;
    let atq = a.t_matmul(q)?;
    a.sub(&q.matmul(&atq)?)
}

/// Exact `dist(0, ∂g(Q))` for `g(Q) = ⟨A, Q⟩ + δ_St(Q)`, which is the norm of
/// the tangent-space projection `(I − ½QQᵀ)R(Q)`.
pub fn subgrad_dist_linear(a: &Mat, q: &Mat) -> Result<f64> {
    a.check_same_shape(q, "subgrad_dist_linear")?;
    ensure_feasible(q, "Q")?;
    Ok(tangent_projection(a, q)?.frob_norm())
}

/// `(I − ½QQᵀ) R(Q)`.
pub(crate) fn tangent_projection(a: &Mat, q: &Mat) -> Result<Mat> {
    let r = residual_r(a, q)?;
    let qtr = q.t_matmul(&r)?;
    let mut out = r;
    out.axpy_assign(-0.5, &q.matmul(&qtr)?)?;
    Ok(out)
}

/// `dist(0, ∂h(P, Q))`.
///
/// The `P`-block contributes nothing: every sign matrix is an isolated point
/// of the finite feasible set, so its normal cone is the whole space. What is
/// left is the `Q`-block distance with `A = −XP`.
pub fn subgrad_dist_h(x: &DataMatrix, p: &Mat, q: &Mat) -> Result<f64> {
    check_pq(x, p, q)?;
    ensure_feasible(q, "Q")?;
    if p.as_slice().iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Precondition("P is not a sign matrix".into()));
    }
    let xp = x.mul(p)?;
    subgrad_dist_linear(&xp.scaled(-1.0), q)
}

/// Entrywise sign with the tie rule `sign(0) = previous entry`.
pub fn sign_select(m: &Mat, prev: &SignMatrix) -> Result<SignMatrix> {
    m.check_same_shape(prev, "sign_select")?;
    m.ensure_finite("sign_select argument")?;
    let data = m
        .as_slice()
        .iter()
        .zip(prev.as_slice())
        .map(|(&v, &p)| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                p
            }
        })
        .collect();
    Ok(SignMatrix(Mat::from_col_major(m.rows(), m.cols(), data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn eye2() -> DataMatrix {
        DataMatrix::Dense(Mat::identity(2))
    }

    #[test]
    fn objective_l1_examples() {
        let q = Mat::column_vector(&[SQRT_HALF, SQRT_HALF]);
        assert!((objective_l1(&eye2(), &q).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let zero = DataMatrix::Dense(Mat::zeros(2, 2));
        assert_eq!(objective_l1(&zero, &q).unwrap(), 0.0);
        assert_eq!(objective_l1(&eye2(), &Mat::column_vector(&[1.0, 0.0])).unwrap(), 1.0);
        assert!(objective_l1(&eye2(), &Mat::column_vector(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn objective_h_examples() {
        let q = Mat::column_vector(&[0.6, 0.8]);
        let p = Mat::column_vector(&[1.0, -1.0]);
        assert!((objective_h(&eye2(), &p, &q).unwrap() - 0.2).abs() < 1e-15);

        let signs = Mat::column_vector(&[1.0, 1.0]);
        let h = objective_h(&eye2(), &signs, &q).unwrap();
        assert!((h + objective_l1(&eye2(), &q).unwrap()).abs() < 1e-15);

        let zero = DataMatrix::Dense(Mat::zeros(2, 2));
        assert_eq!(objective_h(&zero, &p, &q).unwrap(), 0.0);
    }

    #[test]
    fn potential_psi_examples() {
        let p = Mat::column_vector(&[1.0, -1.0]);
        let q = Mat::column_vector(&[0.6, 0.8]);
        let h = objective_h(&eye2(), &p, &q).unwrap();
        assert_eq!(potential_psi(&eye2(), &p, &q, &q, 5.0).unwrap(), h);
        let other = Mat::column_vector(&[0.8, -0.6]);
        assert_eq!(potential_psi(&eye2(), &p, &q, &other, 0.0).unwrap(), h);
        let shifted = Mat::column_vector(&[0.6, -0.2]);
        assert!((q.dist(&shifted).unwrap() - 1.0).abs() < 1e-15);
        let psi = potential_psi(&eye2(), &p, &q, &shifted, 2.0).unwrap();
        assert!((psi - (h + 1.0)).abs() < 1e-14);
        assert!(potential_psi(&eye2(), &p, &q, &q, -1.0).is_err());
    }

    #[test]
    fn residual_r_examples() {
        let r = residual_r(&Mat::column_vector(&[2.0, 0.0]), &Mat::column_vector(&[1.0, 0.0]))
            .unwrap();
        assert!(r.is_zero());
        let r = residual_r(&Mat::column_vector(&[1.0, 0.0]), &Mat::column_vector(&[0.0, 1.0]))
            .unwrap();
        assert_eq!(r, Mat::column_vector(&[1.0, 0.0]));
        let r = residual_r(&Mat::zeros(3, 2), &Mat::eye(3, 2)).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn subgrad_dist_linear_examples() {
        let d = subgrad_dist_linear(&Mat::column_vector(&[1.0, 0.0]), &Mat::column_vector(&[0.0, 1.0]))
            .unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let d = subgrad_dist_linear(&Mat::column_vector(&[2.0, 0.0]), &Mat::column_vector(&[1.0, 0.0]))
            .unwrap();
        assert_eq!(d, 0.0);
        let theta = std::f64::consts::FRAC_PI_2;
        let q = Mat::column_vector(&[theta.cos(), theta.sin()]);
        let d = subgrad_dist_linear(&Mat::column_vector(&[2.0, 0.0]), &q).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn subgrad_dist_linear_rejects_infeasible_q() {
        let err = subgrad_dist_linear(&Mat::column_vector(&[1.0, 0.0]), &Mat::column_vector(&[2.0, 0.0]));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn subgrad_dist_h_examples() {
        let p = Mat::column_vector(&[1.0, 1.0]);
        let q = Mat::column_vector(&[1.0, 0.0]);
        assert!((subgrad_dist_h(&eye2(), &p, &q).unwrap() - 1.0).abs() < 1e-15);
        let zero = DataMatrix::Dense(Mat::zeros(2, 2));
        assert_eq!(subgrad_dist_h(&zero, &p, &q).unwrap(), 0.0);
    }

    #[test]
    fn sign_select_examples() {
        let prev = SignMatrix::new(Mat::from_rows(&[&[-1.0, -1.0], &[1.0, 1.0]])).unwrap();
        let out = sign_select(&Mat::zeros(2, 2), &prev).unwrap();
        assert_eq!(out, prev);
        let out = sign_select(&Mat::from_rows(&[&[0.5, 0.0], &[-2.0, 0.0]]), &prev).unwrap();
        assert_eq!(out.as_mat(), &Mat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        let single = SignMatrix::ones(1, 1);
        let out = sign_select(&Mat::column_vector(&[-0.3]), &single).unwrap();
        assert_eq!(out[(0, 0)], -1.0);
        assert!(sign_select(&Mat::column_vector(&[f64::NAN]), &single).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(StiefelPoint::new(Mat::column_vector(&[2.0, 0.0])).is_err());
        assert!(StiefelPoint::new(Mat::eye(3, 2)).is_ok());
        assert!(SignMatrix::new(Mat::column_vector(&[1.0, 0.0])).is_err());
        assert!(ProblemInstance::new(Mat::zeros(2, 3), 3).is_err());
        assert!(ProblemInstance::new(Mat::zeros(2, 3), 2).is_ok());
    }
}
