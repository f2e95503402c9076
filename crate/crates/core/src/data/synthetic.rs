use rand::Rng as _;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polar_factor, thin_svd, DataMatrix, Mat};
use crate::model::StiefelPoint;
use crate::rng;

const STREAM_Y: u64 = 1;
const STREAM_A: u64 = 2;
const STREAM_E: u64 = 3;
const MAX_RETRIES: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedEffectSpec {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Standard deviation of the Laplace noise.
    pub sigma: f64,
    pub seed: u64,
}

impl FixedEffectSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n.min(self.d) {
            return Err(Error::InvalidInput(format!(
                "K={} must satisfy 1 <= K <= min(n={}, d={})",
                self.k, self.n, self.d
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FixedEffectInstance {
    pub x: DataMatrix,
    /// Ground-truth subspace basis.
    pub u: StiefelPoint,
    /// Noise-free centered signal `z_i = U(a_i − ā)` in columns.
    pub z: Mat,
}

/// Draws from the Laplace law with scale `b` by inverting its CDF.
pub fn laplace_sample(b: f64, r: &mut rng::Rng) -> f64 {
    let u: f64 = Open01.sample(r);
    let v = u - 0.5;
    -b * v.signum() * (1.0 - 2.0 * v.abs()).ln()
}

/// `x_i = U(a_i − ā) + e_i` with `U` the orthonormal factor of a Gaussian
/// `d × K` matrix, `a_i` uniform on `[0, 1]^K` and Laplace noise of variance `σ²`.
pub fn gen_fixed_effect(spec: &FixedEffectSpec) -> Result<FixedEffectInstance> {
    spec.validate()?;
    let FixedEffectSpec { n, d, k, sigma, seed } = *spec;

    let mut u = None;
    for attempt in 0..=MAX_RETRIES {
        let mut r = rng::stream(seed.wrapping_add(attempt), STREAM_Y);
        let y = Mat::from_fn(d, k, |_, _| StandardNormal.sample(&mut r));
        let svd = thin_svd(&y)?;
        let smallest = *svd.sigma.last().expect("K >= 1");
        if smallest > svd.sigma[0] * 1e-12 {
            u = Some(polar_factor(&y)?);
            break;
        }
    }
    let u = u.ok_or_else(|| Error::InvalidInput("Gaussian basis stayed singular after retries".into()))?;

    let mut r = rng::stream(seed, STREAM_A);
    let a = Mat::from_fn(k, n, |_, _| r.random::<f64>());
    let mean: Vec<f64> = (0..k)
        .map(|i| (0..n).map(|j| a[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let centered = Mat::from_fn(k, n, |i, j| a[(i, j)] - mean[i]);
    let z = u.matmul(&centered)?;

    let mut x = z.clone();
    if sigma > 0.0 {
        let b = sigma / std::f64::consts::SQRT_2;
        let mut r = rng::stream(seed, STREAM_E);
        for v in x.as_mut_slice() {
            *v += laplace_sample(b, &mut r);
        }
    }
    Ok(FixedEffectInstance {
        x: DataMatrix::Dense(x),
        u: StiefelPoint::new(u)?,
        z,
    })
}
