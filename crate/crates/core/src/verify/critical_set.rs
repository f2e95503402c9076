use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_complement, polar_factor, stiefel_residual, thin_svd, Mat, ThinSvd};
use crate::model::StiefelPoint;
use crate::rng::{self, Rng};

/// Singular values within this relative gap share one block.
pub const TIE_REL_TOL: f64 = 1e-9;
/// Singular values at or below this fraction of the largest count as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Describes the critical set `Q̄_q` of `Q ↦ ⟨A, Q⟩` over the Stiefel manifold.
#[derive(Clone, Debug)]
pub struct CriticalSetSpec {
    pub a: Mat,
    /// One `±1` per positive singular value.
    pub q: Vec<f64>,
    /// Sizes `h_1..h_p` of the groups of equal positive singular values.
    pub block_multiplicities: Vec<usize>,
    pub singular_data: ThinSvd,
}

impl CriticalSetSpec {
    pub fn new(a: Mat, q: Vec<f64>) -> Result<Self> {
        if a.rows() < a.cols() || a.cols() == 0 {
            return Err(Error::InvalidInput(format!(
                "A must be d x K with d >= K >= 1, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let svd = thin_svd(&a)?;
        let blocks = singular_blocks(&svd.sigma);
        let r: usize = blocks.iter().sum();
        if q.len() != r {
            return Err(Error::dims("q", format!("{r} signs (rank of A)"), format!("{}", q.len())));
        }
        if q.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidInput("q entries must be exactly ±1".into()));
        }
        Ok(CriticalSetSpec {
            a,
            q,
            block_multiplicities: blocks,
            singular_data: svd,
        })
    }

    pub fn rank(&self) -> usize {
        self.block_multiplicities.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.a.rows()
    }

    pub fn k(&self) -> usize {
        self.a.cols()
    }

    /// Number of `+1` entries of `q` inside each block.
    pub fn sign_counts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.block_multiplicities.len());
        let mut start = 0;
        for &h in &self.block_multiplicities {
            out.push(self.q[start..start + h].iter().filter(|&&s| s > 0.0).count());
            start += h;
        }
        out
    }

    /// `U_A` completed to a `d × d` orthogonal matrix.
    fn full_u(&self) -> Mat {
        let u = &self.singular_data.u;
        u.hcat(&orthonormal_complement(u)).expect("row counts agree")
    }
}

/// Group sizes of the positive entries of a nonincreasing sequence.
pub(crate) fn singular_blocks(sigma: &[f64]) -> Vec<usize> {
    let top = sigma.first().copied().unwrap_or(0.0);
    let mut blocks: Vec<usize> = Vec::new();
    let mut lead = f64::NAN;
    for &s in sigma {
        if s <= top * RANK_REL_TOL || s == 0.0 {
            break;
        }
        if blocks.is_empty() || (lead - s) > TIE_REL_TOL * lead {
            blocks.push(1);
            lead = s;
        } else {
            *blocks.last_mut().unwrap() += 1;
        }
    }
    blocks
}

fn check_orthogonal(m: &Mat, what: &str) -> Result<()> {
    let res = stiefel_residual(m);
    if res > 1e-10 {
        return Err(Error::InvalidInput(format!("{what} is not orthonormal (residual {res:.3e})")));
    }
    Ok(())
}

/// The member `U_A [[blkdiag(U_i diag(q_i) U_iᵀ), 0], [0, V]] V_Aᵀ` of `Q̄_q`.
///
/// `u_blocks[i]` is an orthogonal `h_i × h_i` matrix and `v` a
/// `(d − r) × (K − r)` matrix with orthonormal columns.
pub fn build_critical_point(spec: &CriticalSetSpec, u_blocks: &[Mat], v: &Mat) -> Result<StiefelPoint> {
    let (d, k, r) = (spec.d(), spec.k(), spec.rank());
    if u_blocks.len() != spec.block_multiplicities.len() {
        return Err(Error::dims(
            "u_blocks",
            format!("{} blocks", spec.block_multiplicities.len()),
            format!("{}", u_blocks.len()),
        ));
    }
    if v.shape() != (d - r, k - r) {
        return Err(Error::dims("V", format!("{}x{}", d - r, k - r), format!("{}x{}", v.rows(), v.cols())));
    }
    if k > r {
        check_orthogonal(v, "V")?;
    }
    let mut core = Mat::zeros(d, k);
    let mut start = 0;
    for (i, (ub, &h)) in u_blocks.iter().zip(&spec.block_multiplicities).enumerate() {
        if ub.shape() != (h, h) {
            return Err(Error::dims("U block", format!("{h}x{h}"), format!("{}x{}", ub.rows(), ub.cols())));
        }
        check_orthogonal(ub, &format!("U block {i}"))?;
        let signed = ub.scale_columns(&spec.q[start..start + h]);
        core.set_block(start, start, &signed.matmul_t(ub)?);
        start += h;
    }
    if k > r {
        core.set_block(r, r, v);
    }
    let q = spec.full_u().matmul(&core)?.matmul_t(&spec.singular_data.v)?;
    Ok(StiefelPoint::from_polar(q))
}

pub(crate) fn random_orthonormal(rows: usize, cols: usize, r: &mut Rng) -> Mat {
    if cols == 0 {
        return Mat::zeros(rows, 0);
    }
    let g = Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(r));
    polar_factor(&g).expect("Gaussian matrices are finite")
}

/// A random member of `Q̄_q`.
pub fn sample_critical_point(spec: &CriticalSetSpec, r: &mut Rng) -> StiefelPoint {
    let blocks: Vec<Mat> = spec
        .block_multiplicities
        .iter()
        .map(|&h| random_orthonormal(h, h, r))
        .collect();
    let v = random_orthonormal(spec.d() - spec.rank(), spec.k() - spec.rank(), r);
    build_critical_point(spec, &blocks, &v).expect("sampled blocks are valid")
}

/// Smallest Frobenius distance between `samples` random pairs drawn from
/// `Q̄_q` and `Q̄_q′`.
pub fn critical_set_separation_probe(
    a: &Mat,
    q: &[f64],
    q_prime: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let s1 = CriticalSetSpec::new(a.clone(), q.to_vec())?;
    let s2 = CriticalSetSpec::new(a.clone(), q_prime.to_vec())?;
    if s1.sign_counts() == s2.sign_counts() {
        return Err(Error::Precondition(
            "q and q' have equal sign counts in every block, so they describe the same set".into(),
        ));
    }
    let mut r = rng::stream(seed, 0);
    let mut best = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let a1 = sample_critical_point(&s1, &mut r);
        let a2 = sample_critical_point(&s2, &mut r);
        best = best.min(a1.dist(&a2)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaConstant {
    pub kappa: f64,
    pub eta_g: f64,
    /// Number of distinct positive singular values.
    pub p: usize,
    /// `min δ_ij`; infinite when `p = 1`.
    pub delta_min: f64,
}

/// Error-bound constant `κ = (1/a_r)(13 + 6(6p − 5)/min δ_ij²)^{1/2}` and the
/// KL constant `η_g = (2κ²‖A‖)^{−1/2}`.
pub fn kappa_constant(a: &Mat) -> Result<KappaConstant> {
    if a.is_zero() {
        return Err(Error::InvalidInput("kappa_constant of a zero matrix".into()));
    }
    let svd = thin_svd(a)?;
    kappa_from_sigma(&svd.sigma)
}

pub(crate) fn kappa_from_sigma(sigma: &[f64]) -> Result<KappaConstant> {
    let blocks = singular_blocks(sigma);
    if blocks.is_empty() {
        return Err(Error::InvalidInput("no positive singular values".into()));
    }
    let mut distinct = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for &h in &blocks {
        distinct.push(sigma[start]);
        start += h;
    }
    let p = distinct.len();
    let a_r = sigma[start - 1];
    let mut delta_min = f64::INFINITY;
    for i in 0..p {
        for j in i + 1..p {
            let delta = (distinct[i] / distinct[j] - distinct[j] / distinct[i]).abs();
            delta_min = delta_min.min(delta);
        }
    }
    let inner = if p == 1 {
        13.0
    } else {
        13.0 + 6.0 * (6.0 * p as f64 - 5.0) / (delta_min * delta_min)
    };
    let kappa = inner.sqrt() / a_r;
    let eta_g = (2.0 * kappa * kappa * sigma[0]).powf(-0.5);
    Ok(KappaConstant { kappa, eta_g, p, delta_min })
}
