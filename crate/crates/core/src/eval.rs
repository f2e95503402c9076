//! Solution quality: explained variation, clustering accuracy on the
//! projected data, and choice of `K` by captured variance.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polar_factor, sym_eigen, DataMatrix, Mat};
use crate::model::ensure_feasible;
use crate::rng;

/// Largest Gram side solved by a dense eigendecomposition; above it the
/// leading eigenvalues come from subspace iteration.
pub const EXACT_EIGEN_MAX_DIM: usize = 300;
/// When `min(n, d)` reaches this size the chosen `K` is capped.
pub const LARGE_DATA_DIM: usize = 10_000;
pub const LARGE_DATA_K: usize = 50;
pub const DEFAULT_RESTARTS: usize = 10;
const LLOYD_MAX_ITER: usize = 300;
const EXACT_PERMUTATION_MAX_K: usize = 8;

/// `‖XᵀQ‖²_F` over the sum of the `K` largest eigenvalues of `XXᵀ`.
pub fn tev(x: &DataMatrix, q: &Mat) -> Result<f64> {
    if q.rows() != x.rows() {
        return Err(Error::dims("tev", format!("{} rows", x.rows()), format!("{}", q.rows())));
    }
    ensure_feasible(q, "Q")?;
    if x.is_zero() {
        return Err(Error::UndefinedMetric("TEV of zero data".into()));
    }
    let num = x.t_mul(q)?.frob_norm_sq();
    let den: f64 = top_eigenvalues(x, q.cols())?.iter().sum();
    Ok(num / den)
}

/// Eigenvalues of `XXᵀ` in nonincreasing order, the `k` largest.
pub fn top_eigenvalues(x: &DataMatrix, k: usize) -> Result<Vec<f64>> {
    let m = x.rows().min(x.cols());
    let k = k.min(m);
    if m <= EXACT_EIGEN_MAX_DIM {
        let (vals, _) = sym_eigen(&x.small_gram())?;
        return Ok(vals.into_iter().take(k).map(|v| v.max(0.0)).collect());
    }
    subspace_eigenvalues(x, k)
}

fn subspace_eigenvalues(x: &DataMatrix, k: usize) -> Result<Vec<f64>> {
    let left = x.rows() <= x.cols();
    let m = if left { x.rows() } else { x.cols() };
    let b = (k + 8).min(m);
    let apply = |v: &Mat| -> Result<Mat> {
        if left {
            x.mul(&x.t_mul(v)?)
        } else {
            x.t_mul(&x.mul(v)?)
        }
    };
    let mut r = rng::stream(0x7e7, 0);
    let mut v = polar_factor(&Mat::from_fn(m, b, |_, _| r.random::<f64>() - 0.5))?;
    let mut prev = vec![0.0; k];
    for _ in 0..2000 {
        let w = apply(&v)?;
        let basis = polar_factor(&w)?;
        let h = basis.t_matmul(&apply(&basis)?)?;
        let h = h.add(&h.transpose())?.scaled(0.5);
        let (vals, vecs) = sym_eigen(&h)?;
        v = basis.matmul(&vecs)?;
        let cur: Vec<f64> = vals[..k].to_vec();
        let done = cur
            .iter()
            .zip(&prev)
            .all(|(a, p)| (a - p).abs() <= 1e-14 * cur[0].abs().max(f64::MIN_POSITIVE));
        prev = cur;
        if done {
            break;
        }
    }
    Ok(prev.into_iter().map(|v| v.max(0.0)).collect())
}

/// Smallest `K` whose leading squared singular values reach `threshold` of
/// the total; [`LARGE_DATA_K`] once `min(n, d) ≥ LARGE_DATA_DIM`.
pub fn choose_k_by_variance(x: &DataMatrix, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    if x.is_zero() {
        return Err(Error::UndefinedMetric("variance split of zero data".into()));
    }
    let m = x.rows().min(x.cols());
    if m >= LARGE_DATA_DIM {
        return Ok(LARGE_DATA_K);
    }
    let total = x.frob_norm_sq();
    let target = threshold * total * (1.0 - 1e-12);
    let mut k = 8.min(m);
    loop {
        let vals = top_eigenvalues(x, k)?;
        let mut acc = 0.0;
        for (i, v) in vals.iter().enumerate() {
            acc += v;
            if acc >= target {
                return Ok(i + 1);
            }
        }
        if k == m {
            return Ok(m);
        }
        k = (2 * k).min(m);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAccuracy {
    pub accuracy: f64,
    /// Within-cluster sum of squares of the chosen restart.
    pub wcss: f64,
    /// All projected points coincide; `accuracy` is the majority-label share.
    pub degenerate: bool,
}

/// Projects samples onto `Q`, clusters with k-means (k-means++ seeding, best
/// of `restarts` by WCSS) and scores the best cluster-to-label matching.
pub fn kmeans_accuracy(
    x: &DataMatrix,
    q: &Mat,
    labels: &[i64],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterAccuracy> {
    let n = x.cols();
    if labels.len() != n {
        return Err(Error::dims("labels", format!("{n}"), format!("{}", labels.len())));
    }
    ensure_feasible(q, "Q")?;
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if k == 0 || classes.len() > k || k > n {
        return Err(Error::InvalidInput(format!(
            "k={k} must cover the {} distinct labels and not exceed n={n}",
            classes.len()
        )));
    }
    let label_idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let pts = x.t_mul(q)?.transpose();

    let first = pts.col(0);
    if (1..n).all(|j| pts.col(j) == first) {
        let mut counts = vec![0usize; classes.len()];
        for &c in &label_idx {
            counts[c] += 1;
        }
        let best = *counts.iter().max().expect("n >= 1");
        return Ok(ClusterAccuracy { accuracy: best as f64 / n as f64, wcss: 0.0, degenerate: true });
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut r = rng::stream(seed, restart as u64);
        let (wcss, assign) = lloyd(&pts, k, &mut r);
        if best.as_ref().is_none_or(|(w, _)| wcss < *w) {
            best = Some((wcss, assign));
        }
    }
    let (wcss, assign) = best.expect("at least one restart");
    let mut table = vec![vec![0usize; k]; k];
    for (c, &l) in assign.iter().zip(&label_idx) {
        table[*c][l] += 1;
    }
    let matched = if k <= EXACT_PERMUTATION_MAX_K {
        best_permutation(&table)
    } else {
        hungarian_max(&table)
    };
    Ok(ClusterAccuracy { accuracy: matched as f64 / n as f64, wcss, degenerate: false })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One k-means run on the columns of `pts`: `(WCSS, assignment)`.
fn lloyd(pts: &Mat, k: usize, r: &mut rng::Rng) -> (f64, Vec<usize>) {
    let (dim, n) = pts.shape();
    let mut centers = Mat::zeros(dim, k);
    centers.col_mut(0).copy_from_slice(pts.col(r.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|j| sq_dist(pts.col(j), centers.col(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = r.random::<f64>() * total;
            let mut chosen = n - 1;
            for (j, &w) in d2.iter().enumerate() {
                if t < w {
                    chosen = j;
                    break;
                }
                t -= w;
            }
            chosen
        } else {
            r.random_range(0..n)
        };
        centers.col_mut(c).copy_from_slice(pts.col(pick));
        for j in 0..n {
            d2[j] = d2[j].min(sq_dist(pts.col(j), centers.col(c)));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for j in 0..n {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let dd = sq_dist(pts.col(j), centers.col(c));
                if dd < best.0 {
                    best = (dd, c);
                }
            }
            if assign[j] != best.1 {
                assign[j] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Mat::zeros(dim, k);
        let mut counts = vec![0usize; k];
        for j in 0..n {
            counts[assign[j]] += 1;
            for (s, v) in sums.col_mut(assign[j]).iter_mut().zip(pts.col(j)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centers.col_mut(c).iter_mut().zip(sums.col(c)) {
                    *dst = s * inv;
                }
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(pts.col(a), centers.col(assign[a]));
                        let db = sq_dist(pts.col(b), centers.col(assign[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= 1");
                centers.col_mut(c).copy_from_slice(pts.col(far));
            }
        }
    }
    let wcss = (0..n).map(|j| sq_dist(pts.col(j), centers.col(assign[j]))).sum();
    (wcss, assign)
}

fn best_permutation(table: &[Vec<usize>]) -> usize {
    fn go(row: usize, table: &[Vec<usize>], used: &mut [bool], acc: usize, best: &mut usize) {
        if row == table.len() {
            *best = (*best).max(acc);
            return;
        }
        for c in 0..table.len() {
            if !used[c] {
                used[c] = true;
                go(row + 1, table, used, acc + table[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = 0;
    go(0, table, &mut vec![false; table.len()], 0, &mut best);
    best
}

/// Maximum-weight perfect matching on a square table (Kuhn–Munkres with potentials).
fn hungarian_max(table: &[Vec<usize>]) -> usize {
    let n = table.len();
    let top = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| top - table[i][j] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| table[p[j] - 1][j - 1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tev_examples() {
        let x = DataMatrix::Dense(Mat::diag(&[3.0, 1.0]));
        assert!((tev(&x, &Mat::column_vector(&[1.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((tev(&x, &Mat::column_vector(&[0.0, 1.0])).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        let zero = DataMatrix::Dense(Mat::zeros(2, 2));
        assert!(matches!(tev(&zero, &Mat::column_vector(&[1.0, 0.0])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn subspace_eigenvalues_match_dense() {
        let x = DataMatrix::Dense(Mat::from_fn(40, 60, |i, j| (((i * 13 + j * 7) % 17) as f64 - 8.0) / (1.0 + i as f64)));
        let exact = top_eigenvalues(&x, 5).unwrap();
        let iter = subspace_eigenvalues(&x, 5).unwrap();
        for (a, b) in exact.iter().zip(&iter) {
            assert!((a - b).abs() <= 1e-10 * exact[0], "{a} vs {b}");
        }
    }

    #[test]
    fn choose_k_examples() {
        let x = DataMatrix::Dense(Mat::diag(&[3.0, 1.0]));
        assert_eq!(choose_k_by_variance(&x, 0.8).unwrap(), 1);
        assert_eq!(choose_k_by_variance(&x, 0.95).unwrap(), 2);
        let r1 = DataMatrix::Dense(Mat::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(choose_k_by_variance(&r1, 1.0).unwrap(), 1);
        assert!(choose_k_by_variance(&x, 0.0).is_err());
    }

    fn two_clouds() -> (DataMatrix, Vec<i64>) {
        let x = Mat::from_fn(3, 40, |i, j| {
            let offset = if j < 20 { 10.0 } else { -10.0 };
            let jitter = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
            if i == 0 { offset + jitter } else { jitter }
        });
        let labels = (0..40).map(|j| if j < 20 { 1 } else { -1 }).collect();
        (DataMatrix::Dense(x), labels)
    }

    #[test]
    fn separable_clouds_cluster_perfectly() {
        let (x, labels) = two_clouds();
        let q = Mat::column_vector(&[1.0, 0.0, 0.0]);
        let acc = kmeans_accuracy(&x, &q, &labels, 2, 5, 1).unwrap();
        assert_eq!(acc.accuracy, 1.0);
        assert!(!acc.degenerate);
        assert_eq!(acc, kmeans_accuracy(&x, &q, &labels, 2, 5, 1).unwrap());
    }

    #[test]
    fn single_label_and_degenerate_data() {
        let (x, _) = two_clouds();
        let q = Mat::column_vector(&[1.0, 0.0, 0.0]);
        let same = vec![4; 40];
        assert_eq!(kmeans_accuracy(&x, &q, &same, 1, 3, 0).unwrap().accuracy, 1.0);

        let flat = DataMatrix::Dense(Mat::filled(2, 5, 1.0));
        let acc = kmeans_accuracy(&flat, &Mat::column_vector(&[1.0, 0.0]), &[1, 1, 1, 2, 2], 2, 3, 0).unwrap();
        assert!(acc.degenerate);
        assert_eq!(acc.accuracy, 0.6);
    }

    #[test]
    fn random_two_class_labels_score_at_least_half() {
        let mut r = rng::stream(3, 0);
        let x = DataMatrix::Dense(Mat::from_fn(4, 50, |_, _| r.random::<f64>()));
        let labels: Vec<i64> = (0..50).map(|_| r.random_range(0..2)).collect();
        let q = Mat::eye(4, 2);
        assert!(kmeans_accuracy(&x, &q, &labels, 2, 4, 2).unwrap().accuracy >= 0.5);
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        let mut r = rng::stream(8, 0);
        for _ in 0..50 {
            let k = r.random_range(1..7);
            let t: Vec<Vec<usize>> = (0..k).map(|_| (0..k).map(|_| r.random_range(0..20)).collect()).collect();
            assert_eq!(hungarian_max(&t), best_permutation(&t));
        }
    }
}
