use serde::{Deserialize, Serialize};

use super::dense::{axpy, dot, Mat};
use crate::error::{Error, Result};

/// Compressed sparse column matrix.
///
/// Row indices are strictly increasing within each column and all below `rows`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != cols + 1 {
            return Err(Error::InvalidInput(format!(
                "col_ptr has length {}, expected {}",
                col_ptr.len(),
                cols + 1
            )));
        }
        if col_ptr[0] != 0 || *col_ptr.last().unwrap() != row_idx.len() {
            return Err(Error::InvalidInput("col_ptr does not span row_idx".into()));
        }
        if row_idx.len() != values.len() {
            return Err(Error::InvalidInput(
                "row_idx and values differ in length".into(),
            ));
        }
        for j in 0..cols {
            let (s, e) = (col_ptr[j], col_ptr[j + 1]);
            if s > e {
                return Err(Error::InvalidInput(format!("col_ptr decreases at column {j}")));
            }
            let idx = &row_idx[s..e];
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
            if idx.last().is_some_and(|&r| r >= rows) {
                return Err(Error::InvalidInput(format!(
                    "row index out of range in column {j}"
                )));
            }
        }
        Ok(CscMatrix {
            rows,
            cols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from per-column `(row, value)` lists; rows must already be strictly increasing.
    pub fn from_columns(rows: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            for &(r, v) in col {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self::try_new(rows, columns.len(), col_ptr, row_idx, values)
    }

    pub fn from_dense(m: &Mat) -> Self {
        let cols: Vec<Vec<(usize, f64)>> = (0..m.cols())
            .map(|j| {
                m.col(j)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        Self::from_columns(m.rows(), &cols).expect("dense conversion yields valid CSC")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            let (idx, vals) = self.col(j);
            for (&i, &v) in idx.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Returns a copy with `rows` raised to `new_rows` (appending all-zero rows).
    pub fn with_rows(mut self, new_rows: usize) -> Result<Self> {
        if new_rows < self.rows {
            return Err(Error::InvalidInput(format!(
                "cannot shrink {} rows to {new_rows}",
                self.rows
            )));
        }
        self.rows = new_rows;
        Ok(self)
    }
}

/// The data matrix `X ∈ R^{d×n}`: features in rows, samples in columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataMatrix {
    Dense(Mat),
    Sparse(CscMatrix),
}

impl DataMatrix {
    pub fn rows(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.rows(),
            DataMatrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.cols(),
            DataMatrix::Sparse(s) => s.cols(),
        }
    }

    pub fn to_dense(&self) -> Mat {
        match self {
            DataMatrix::Dense(m) => m.clone(),
            DataMatrix::Sparse(s) => s.to_dense(),
        }
    }

    fn stored_values(&self) -> &[f64] {
        match self {
            DataMatrix::Dense(m) => m.as_slice(),
            DataMatrix::Sparse(s) => &s.values,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.stored_values().iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.stored_values().iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("data matrix has non-finite entries".into()))
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        dot(self.stored_values(), self.stored_values())
    }

    /// `Xᵀ Q` for a `d × K` matrix `Q`; the result is `n × K`.
    pub fn t_mul(&self, q: &Mat) -> Result<Mat> {
        if q.rows() != self.rows() {
            return Err(Error::dims(
                "X^T Q",
                format!("{} rows", self.rows()),
                format!("{}", q.rows()),
            ));
        }
        let n = self.cols();
        let mut out = Mat::zeros(n, q.cols());
        match self {
            DataMatrix::Dense(x) => {
                for j in 0..q.cols() {
                    let qj = q.col(j);
                    let dst = out.col_mut(j);
                    for (i, d) in dst.iter_mut().enumerate() {
                        *d = dot(x.col(i), qj);
                    }
                }
            }
            DataMatrix::Sparse(s) => {
                for j in 0..q.cols() {
                    let qj = q.col(j);
                    let dst = out.col_mut(j);
                    for (i, d) in dst.iter_mut().enumerate() {
                        let (idx, vals) = s.col(i);
                        *d = idx.iter().zip(vals).map(|(&r, &v)| v * qj[r]).sum();
                    }
                }
            }
        }
        Ok(out)
    }

    /// `X P` for an `n × K` matrix `P`; the result is `d × K`.
    pub fn mul(&self, p: &Mat) -> Result<Mat> {
        if p.rows() != self.cols() {
            return Err(Error::dims(
                "X P",
                format!("{} rows", self.cols()),
                format!("{}", p.rows()),
            ));
        }
        let d = self.rows();
        let mut out = Mat::zeros(d, p.cols());
        match self {
            DataMatrix::Dense(x) => {
                for j in 0..p.cols() {
                    let dst = out.col_mut(j);
                    for (i, &pij) in p.col(j).iter().enumerate() {
                        if pij != 0.0 {
                            axpy(pij, x.col(i), dst);
                        }
                    }
                }
            }
            DataMatrix::Sparse(s) => {
                for j in 0..p.cols() {
                    let dst = out.col_mut(j);
                    for (i, &pij) in p.col(j).iter().enumerate() {
                        if pij != 0.0 {
                            let (idx, vals) = s.col(i);
                            for (&r, &v) in idx.iter().zip(vals) {
                                dst[r] += pij * v;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix of the smaller side: `X Xᵀ` when `d ≤ n`, else `Xᵀ X`.
    /// Both share the same nonzero spectrum.
    pub fn small_gram(&self) -> Mat {
        let (d, n) = (self.rows(), self.cols());
        let dense = self.to_dense();
        if d <= n {
            let xt = dense.transpose();
            xt.t_matmul(&xt).expect("square gram")
        } else {
            dense.t_matmul(&dense).expect("square gram")
        }
    }
}

impl From<Mat> for DataMatrix {
    fn from(m: Mat) -> Self {
        DataMatrix::Dense(m)
    }
}

impl From<CscMatrix> for DataMatrix {
    fn from(s: CscMatrix) -> Self {
        DataMatrix::Sparse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Mat {
        Mat::from_rows(&[&[1.0, 0.0, -2.0], &[0.0, 0.0, 3.0], &[4.0, 0.5, 0.0]])
    }

    #[test]
    fn rejects_unsorted_or_out_of_range_indices() {
        assert!(CscMatrix::try_new(3, 1, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::try_new(3, 1, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::try_new(3, 1, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(CscMatrix::try_new(3, 1, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn dense_and_sparse_products_agree() {
        let x = sample();
        let dense = DataMatrix::Dense(x.clone());
        let sparse = DataMatrix::Sparse(CscMatrix::from_dense(&x));
        let q = Mat::from_rows(&[&[0.3, -1.0], &[0.1, 2.0], &[-0.7, 0.25]]);
        let a = dense.t_mul(&q).unwrap();
        let b = sparse.t_mul(&q).unwrap();
        assert!(a.dist(&b).unwrap() <= 1e-12);
        let p = Mat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0], &[1.0, 1.0]]);
        let a = dense.mul(&p).unwrap();
        let b = sparse.mul(&p).unwrap();
        assert!(a.dist(&b).unwrap() <= 1e-12);
        assert_eq!(sparse.to_dense(), x);
    }
}
