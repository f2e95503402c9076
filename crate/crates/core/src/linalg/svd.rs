//! Thin SVD for tall-skinny matrices, the polar factor, and a symmetric
//! eigensolver.
//!
//! The SVD runs one-sided (Hestenes) Jacobi on the columns of `M`. Each
//! rotation is the Jacobi rotation that would diagonalize the corresponding
//! 2×2 block of the Gram matrix `MᵀM`, so the cost per sweep is `O(dK²)`,
//! but `MᵀM` is never formed and small singular values keep their relative
//! accuracy.

use super::dense::{dot, norm2, Mat};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `M = U · diag(sigma) · Vᵀ` with `k = min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Mat {
        self.u
            .scale_columns(&self.sigma)
            .matmul_t(&self.v)
            .expect("svd factors are conformable")
    }
}

pub fn thin_svd(m: &Mat) -> Result<ThinSvd> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidInput("thin_svd of an empty matrix".into()));
    }
    m.ensure_finite("thin_svd input")?;
    let mut svd = if m.rows() >= m.cols() {
        tall_svd(m)
    } else {
        let t = tall_svd(&m.transpose());
        ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        }
    };
    fix_signs(&mut svd);
    Ok(svd)
}

/// Orthogonal Procrustes solution: `U Vᵀ` from a thin SVD of `M`, the
/// maximizer of `⟨M, Q⟩` over the Stiefel manifold.
pub fn polar_factor(m: &Mat) -> Result<Mat> {
    if m.cols() == 0 || m.rows() < m.cols() {
        return Err(Error::InvalidInput(format!(
            "polar_factor needs rows >= cols >= 1, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let svd = thin_svd(m)?;
    svd.u.matmul_t(&svd.v)
}

fn tall_svd(m: &Mat) -> ThinSvd {
    let (d, k) = m.shape();
    let mut w = m.clone();
    let mut v = Mat::identity(k);
    let tol = f64::EPSILON * (d as f64).sqrt().max(1.0);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k.saturating_sub(1) {
            for q in p + 1..k {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..k).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = sigma[0];
    let rank_tol = sigma_max * (d.max(k) as f64) * f64::EPSILON * 4.0;

    let mut u = Mat::zeros(d, k);
    let mut v_sorted = Mat::zeros(k, k);
    let mut filled = vec![false; k];
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        if sigma[dst] > rank_tol {
            let inv = 1.0 / sigma[dst];
            for (ui, wi) in u.col_mut(dst).iter_mut().zip(w.col(src)) {
                *ui = wi * inv;
            }
            filled[dst] = true;
        }
    }
    fill_missing_columns(&mut u, &mut filled);
    ThinSvd {
        u,
        sigma,
        v: v_sorted,
    }
}

fn rotate(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let (cp, cq) = m.col_pair_mut(p, q);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Largest-magnitude entry of each `V` column is made positive.
fn fix_signs(svd: &mut ThinSvd) {
    for j in 0..svd.v.cols() {
        let col = svd.v.col(j);
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            for x in svd.v.col_mut(j) {
                *x = -*x;
            }
            for x in svd.u.col_mut(j) {
                *x = -*x;
            }
        }
    }
}

/// Fills the columns of `u` not marked in `filled` with unit vectors
/// orthogonal to every other column, drawn deterministically from the
/// canonical basis.
fn fill_missing_columns(u: &mut Mat, filled: &mut [bool]) {
    let d = u.rows();
    let accept = 0.7 / (d as f64).sqrt();
    let mut next_candidate = 0;
    for j in 0..u.cols() {
        if filled[j] {
            continue;
        }
        for i in next_candidate..d {
            let mut cand = vec![0.0; d];
            cand[i] = 1.0;
            for _ in 0..2 {
                for c in 0..u.cols() {
                    if filled[c] {
                        let proj = dot(u.col(c), &cand);
                        for (x, y) in cand.iter_mut().zip(u.col(c)) {
                            *x -= proj * y;
                        }
                    }
                }
            }
            let nrm = norm2(&cand);
            if nrm > accept {
                for (dst, x) in u.col_mut(j).iter_mut().zip(&cand) {
                    *dst = x / nrm;
                }
                filled[j] = true;
                next_candidate = i + 1;
                break;
            }
        }
        assert!(filled[j], "canonical completion always finds a direction");
    }
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal-column matrix `q` (`d × K`); returns `d × (d − K)`.
pub fn orthonormal_complement(q: &Mat) -> Mat {
    let (d, k) = q.shape();
    let mut full = Mat::zeros(d, d);
    let mut filled = vec![false; d];
    for j in 0..k {
        full.col_mut(j).copy_from_slice(q.col(j));
        filled[j] = true;
    }
    fill_missing_columns(&mut full, &mut filled);
    full.columns(k..d)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in nonincreasing order with matching columns.
pub fn sym_eigen(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::dims("sym_eigen", "square", format!("{}x{}", a.rows(), a.cols())));
    }
    a.ensure_finite("sym_eigen input")?;
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _ in 0..MAX_SWEEPS {
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
        let floor = f64::EPSILON * f64::EPSILON * scale;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= floor || apq.abs() <= f64::EPSILON * (m[(p, p)] * m[(q, q)]).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A ← Jᵀ A J with J the (p, q) rotation.
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::stiefel_residual;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn svd_of_a_column_vector_is_its_normalization() {
        let svd = thin_svd(&Mat::column_vector(&[3.0, 4.0])).unwrap();
        assert!(close(svd.sigma[0], 5.0, 1e-14));
        assert!(close(svd.u[(0, 0)], 0.6, 1e-14));
        assert!(close(svd.u[(1, 0)], 0.8, 1e-14));
        assert_eq!(svd.v[(0, 0)], 1.0);
    }

    #[test]
    fn svd_of_identity_has_unit_spectrum() {
        let svd = thin_svd(&Mat::identity(3)).unwrap();
        assert_eq!(svd.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn svd_of_antidiagonal() {
        // MᵀM = diag(1, 4).
        let m = Mat::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]]);
        let svd = thin_svd(&m).unwrap();
        assert!(close(svd.sigma[0], 2.0, 1e-14));
        assert!(close(svd.sigma[1], 1.0, 1e-14));
        assert!(svd.reconstruct().dist(&m).unwrap() < 1e-14);
    }

    #[test]
    fn wide_input_returns_min_dimension_factorization() {
        let m = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[0.0, -1.0, 4.0]]);
        let svd = thin_svd(&m).unwrap();
        assert_eq!(svd.u.shape(), (2, 2));
        assert_eq!(svd.v.shape(), (3, 2));
        assert!(svd.reconstruct().dist(&m).unwrap() < 1e-13);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let m = Mat::from_rows(&[&[1.0], &[f64::NAN]]);
        assert!(matches!(thin_svd(&m), Err(Error::InvalidInput(_))));
        assert!(polar_factor(&m).is_err());
    }

    #[test]
    fn polar_factor_examples() {
        let q = polar_factor(&Mat::column_vector(&[3.0, 4.0])).unwrap();
        assert!(close(q[(0, 0)], 0.6, 1e-15) && close(q[(1, 0)], 0.8, 1e-15));

        let q = polar_factor(&Mat::identity(2).scaled(2.0)).unwrap();
        assert!(q.dist(&Mat::identity(2)).unwrap() < 1e-15);

        let q = polar_factor(&Mat::from_rows(&[&[0.0, 2.0], &[1.0, 0.0]])).unwrap();
        let expected = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(q.dist(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn rank_deficient_polar_is_feasible_and_deterministic() {
        let m = Mat::from_rows(&[&[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]]);
        let q1 = polar_factor(&m).unwrap();
        let q2 = polar_factor(&m).unwrap();
        assert_eq!(q1, q2);
        assert!(stiefel_residual(&q1) < 1e-14);
        let zero = polar_factor(&Mat::zeros(4, 2)).unwrap();
        assert!(stiefel_residual(&zero) < 1e-15);
    }

    #[test]
    fn complement_spans_the_rest() {
        let q = polar_factor(&Mat::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[2.0, 0.0]]))
            .unwrap();
        let c = orthonormal_complement(&q);
        assert_eq!(c.shape(), (4, 2));
        let full = q.hcat(&c).unwrap();
        assert!(stiefel_residual(&full) < 1e-13);
    }

    #[test]
    fn sym_eigen_diagonalizes() {
        let a = Mat::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 5.0]]);
        let (vals, vecs) = sym_eigen(&a).unwrap();
        assert!(close(vals[0], 5.0, 1e-13));
        assert!(close(vals[1], 3.0, 1e-13));
        assert!(close(vals[2], 1.0, 1e-13));
        let recon = vecs.scale_columns(&vals).matmul_t(&vecs).unwrap();
        assert!(recon.dist(&a).unwrap() < 1e-12);
    }
}
