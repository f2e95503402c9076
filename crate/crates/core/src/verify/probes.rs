use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::critical_set::{kappa_constant, random_orthonormal, singular_blocks};
use super::report::{finite, ProbeReport};
use crate::error::{Error, Result};
use crate::linalg::{polar_factor, thin_svd, DataMatrix, Mat};
use crate::model::{
    ensure_feasible, residual_r, subgrad_dist_h, subgrad_dist_linear, tangent_projection,
    SignMatrix,
};
use crate::rng::{self, Rng};

/// Sandwich check tolerance, relative to `‖R(Q)‖_F`.
pub const SANDWICH_REL_TOL: f64 = 1e-12;
/// Zero entries of `XᵀQ` beyond this count fall back to a `+1` selection.
pub const MAX_ENUMERATED_ZEROS: usize = 12;
/// Largest accepted spread `max η̂ / min η̂` across radii.
pub const KL_STABILITY_FACTOR: f64 = 10.0;

pub(crate) fn gaussian(rows: usize, cols: usize, r: &mut Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(r))
}

/// Unit-norm Gaussian direction in the tangent space at `q`.
fn tangent_direction(q: &Mat, r: &mut Rng) -> Mat {
    loop {
        let z = gaussian(q.rows(), q.cols(), r);
        let qtz = q.t_matmul(&z).expect("conformable");
        let sym = qtz.add(&qtz.transpose()).expect("square").scaled(0.5);
        let t = z.sub(&q.matmul(&sym).expect("conformable")).expect("same shape");
        let nrm = t.frob_norm();
        if nrm > 1e-12 {
            return t.scaled(1.0 / nrm);
        }
    }
}

/// `polar(Q + t·Z)` for a random unit tangent direction `Z`.
fn retract_step(q: &Mat, t: f64, r: &mut Rng) -> Mat {
    let z = tangent_direction(q, r);
    let mut m = q.clone();
    m.axpy_assign(t, &z).expect("same shape");
    polar_factor(&m).expect("finite")
}

/// Checks `½‖R(Q)‖_F ≤ dist(0, ∂g(Q)) ≤ ‖R(Q)‖_F` on random Gaussian `A`
/// and random Stiefel `Q` for every `(d, K)` pair with `K ≤ d`.
pub fn sandwich_probe(dims: &[(usize, usize)], samples: usize, seed: u64) -> Result<ProbeReport> {
    let mut rep = ProbeReport::new(
        "sandwich",
        json!({ "dims": dims, "samples": samples, "seed": seed, "rel_tol": SANDWICH_REL_TOL }),
    );
    let pairs: Vec<(usize, usize)> = dims.iter().copied().filter(|&(d, k)| k >= 1 && k <= d).collect();
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no (d, K) pair with 1 <= K <= d".into()));
    }
    let mut r = rng::stream(seed, 0);
    let (mut lo_ratio, mut hi_ratio) = (f64::INFINITY, 0.0f64);
    for i in 0..samples {
        let (d, k) = pairs[i % pairs.len()];
        let a = gaussian(d, k, &mut r);
        let q = random_orthonormal(d, k, &mut r);
        let rn = residual_r(&a, &q)?.frob_norm();
        let dist = subgrad_dist_linear(&a, &q)?;
        let slack = SANDWICH_REL_TOL * rn;
        if dist < 0.5 * rn - slack || dist > rn + slack {
            rep.violation_count += 1;
        }
        if rn > 0.0 {
            lo_ratio = lo_ratio.min(dist / rn);
            hi_ratio = hi_ratio.max(dist / rn);
        }
        rep.sample_count += 1;
    }
    rep.min_ratio = finite(lo_ratio);
    rep.worst_ratio = Some(hi_ratio);
    rep.pass = rep.violation_count == 0;
    Ok(rep)
}

/// The single point `Q̄_q` in the regimes where it is a singleton.
fn isolated_critical_point(a: &Mat, q: &[f64]) -> Result<Mat> {
    let (d, k) = a.shape();
    if a.is_zero() {
        return Err(Error::InvalidInput("A must be nonzero".into()));
    }
    let svd = thin_svd(a)?;
    let blocks = singular_blocks(&svd.sigma);
    let r: usize = blocks.iter().sum();
    if q.len() != r || q.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::InvalidInput(format!("q must hold {r} entries of ±1")));
    }
    if k == 1 {
        return Ok(a.scaled(q[0] / a.frob_norm()));
    }
    if d == k && r == k && blocks.iter().all(|&h| h == 1) {
        return svd.u.scale_columns(q).matmul_t(&svd.v);
    }
    Err(Error::Refused(
        "error-bound probe needs K = 1, or d = K = rank(A) with distinct singular values; \
         otherwise the distance to the critical set is not exactly computable"
            .into(),
    ))
}

/// Samples feasible `Q` with `dist(Q, Q̄_q) < min(radius, 1)` and reports
/// the worst `dist / ‖R(Q)‖_F` against `κ`.
pub fn error_bound_probe(a: &Mat, q: &[f64], samples: usize, radius: f64, seed: u64) -> Result<ProbeReport> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let center = isolated_critical_point(a, q)?;
    let kappa = kappa_constant(a)?;
    let limit = radius.min(1.0);
    let mut rep = ProbeReport::new(
        "error-bound",
        json!({
            "d": a.rows(), "K": a.cols(), "q": q, "radius": radius, "seed": seed,
            "kappa": kappa.kappa, "p": kappa.p,
        }),
    );
    let mut r = rng::stream(seed, 0);
    let mut worst = 0.0f64;
    let mut attempts = 0usize;
    while rep.sample_count < samples {
        attempts += 1;
        if attempts > samples.saturating_mul(100).max(1000) {
            return Err(Error::InvalidInput("could not draw samples inside the radius".into()));
        }
        let t = limit * r.random::<f64>();
        let qs = retract_step(&center, t, &mut r);
        let dist = qs.dist(&center)?;
        if dist >= limit {
            continue;
        }
        rep.sample_count += 1;
        let rn = residual_r(a, &qs)?.frob_norm();
        let ratio = if dist == 0.0 { 0.0 } else if rn == 0.0 { f64::INFINITY } else { dist / rn };
        if !(ratio <= kappa.kappa) {
            rep.violation_count += 1;
        }
        worst = worst.max(ratio);
    }
    rep.worst_ratio = finite(worst);
    rep.pass = rep.violation_count == 0;
    Ok(rep)
}

/// `dist(0, ∂ℓ(Q))` for `ℓ(Q) = −‖XᵀQ‖₁ + δ_St(Q)`: the minimum of
/// `dist(0, −Xξ + N_St(Q))` over sign selections `ξ ∈ sign(XᵀQ)`.
///
/// Entries with `|(XᵀQ)_ij| ≤ zero_tol` are enumerated when there are at most
/// [`MAX_ENUMERATED_ZEROS`]; otherwise they take `+1` and the result is flagged.
pub fn l1_subgrad_dist(x: &DataMatrix, q: &Mat, zero_tol: f64) -> Result<(f64, bool)> {
    ensure_feasible(q, "Q")?;
    let y = x.t_mul(q)?;
    let mut xi = y.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
    let zeros: Vec<usize> = y
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= zero_tol)
        .map(|(i, _)| i)
        .collect();
    let xi_dist = |xi: &Mat| -> Result<f64> { Ok(tangent_projection(&x.mul(xi)?.scaled(-1.0), q)?.frob_norm()) };
    if zeros.len() > MAX_ENUMERATED_ZEROS {
        return Ok((xi_dist(&xi)?, true));
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << zeros.len()) {
        for (b, &idx) in zeros.iter().enumerate() {
            xi.as_mut_slice()[idx] = if mask >> b & 1 == 1 { -1.0 } else { 1.0 };
        }
        best = best.min(xi_dist(&xi)?);
    }
    Ok((best, false))
}

/// Per-radius outcome of a KL probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlRadius {
    pub radius: f64,
    /// `None` when every sample was flat (`ℓ(Q) = ℓ(Q*)`).
    pub min_ratio: Option<f64>,
    pub evaluated: usize,
    pub skipped_flat: usize,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlProbe {
    pub radii: Vec<KlRadius>,
    pub all_flat: bool,
    pub positive: bool,
    pub stable: bool,
}

impl KlProbe {
    pub fn pass(&self) -> bool {
        self.positive && self.stable
    }

    pub fn report(&self, name: &str, parameters: serde_json::Value) -> ProbeReport {
        let ratios: Vec<f64> = self.radii.iter().filter_map(|r| r.min_ratio).collect();
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(0.0f64, f64::max);
        let mut rep = ProbeReport::new(name, parameters);
        rep.sample_count = self.radii.iter().map(|r| r.evaluated).sum();
        rep.min_ratio = finite(min);
        rep.worst_ratio = finite(max);
        rep.violation_count = usize::from(!self.positive) + usize::from(!self.stable);
        rep.pass = self.pass();
        rep
    }
}

fn kl_probe_core(
    q_star: &Mat,
    radii: &[f64],
    samples: usize,
    seed: u64,
    mut eval: impl FnMut(&Mat) -> Result<(f64, f64, bool)>,
) -> Result<KlProbe> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("radii must be a nonempty list of positive values".into()));
    }
    let mut out = Vec::with_capacity(radii.len());
    for (ri, &radius) in radii.iter().enumerate() {
        let mut r = rng::stream(seed, ri as u64);
        let mut rec = KlRadius { radius, min_ratio: None, evaluated: 0, skipped_flat: 0, flagged: 0 };
        let mut min_ratio = f64::INFINITY;
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < samples && attempts < samples.saturating_mul(100).max(1000) {
            attempts += 1;
            let t = radius * r.random::<f64>();
            let qs = retract_step(q_star, t, &mut r);
            if qs.dist(q_star)? > radius {
                continue;
            }
            drawn += 1;
            let (dist, gap, flagged) = eval(&qs)?;
            if gap == 0.0 {
                rec.skipped_flat += 1;
                continue;
            }
            rec.evaluated += 1;
            rec.flagged += usize::from(flagged);
            min_ratio = min_ratio.min(dist / gap.abs().sqrt());
        }
        rec.min_ratio = finite(min_ratio);
        out.push(rec);
    }
    let ratios: Vec<f64> = out.iter().filter_map(|r| r.min_ratio).collect();
    let all_flat = ratios.is_empty();
    let positive = !all_flat && ratios.iter().all(|&v| v > 0.0);
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let stable = positive && hi < KL_STABILITY_FACTOR * lo;
    Ok(KlProbe { radii: out, all_flat, positive, stable })
}

/// Gaps below this multiple of `1 + |f*|` are treated as flat.
const FLAT_REL: f64 = 1e-13;

/// Empirical KL ratio `dist(0, ∂ℓ(Q)) / |ℓ(Q) − ℓ(Q*)|^{1/2}` around a critical
/// point `Q*` of `ℓ`, minimized over samples at each radius.
pub fn kl_ratio_probe(x: &DataMatrix, q_star: &Mat, radii: &[f64], samples: usize, seed: u64) -> Result<KlProbe> {
    let (res, _) = l1_subgrad_dist(x, q_star, 1e-10)?;
    if res > 1e-8 {
        return Err(Error::Precondition(format!("Q* is not critical for l (residual {res:.3e})")));
    }
    let l_star = -x.t_mul(q_star)?.abs_sum();
    kl_probe_core(q_star, radii, samples, seed, |qs| {
        let l = -x.t_mul(qs)?.abs_sum();
        let gap = l - l_star;
        let gap = if gap.abs() <= FLAT_REL * (1.0 + l_star.abs()) { 0.0 } else { gap };
        let (dist, flagged) = l1_subgrad_dist(x, qs, 0.0)?;
        Ok((dist, gap, flagged))
    })
}

/// The same probe for `h(P*, ·)` with `P` held at `P*`.
pub fn kl_ratio_probe_h(
    x: &DataMatrix,
    p_star: &SignMatrix,
    q_star: &Mat,
    radii: &[f64],
    samples: usize,
    seed: u64,
) -> Result<KlProbe> {
    let res = subgrad_dist_h(x, p_star, q_star)?;
    if res > 1e-8 {
        return Err(Error::Precondition(format!("(P*, Q*) is not critical for h (residual {res:.3e})")));
    }
    let xp = x.mul(p_star)?;
    let h_star = -xp.inner(q_star)?;
    let minus_xp = xp.scaled(-1.0);
    kl_probe_core(q_star, radii, samples, seed, |qs| {
        let gap = -xp.inner(qs)? - h_star;
        let gap = if gap.abs() <= FLAT_REL * (1.0 + h_star.abs()) { 0.0 } else { gap };
        Ok((subgrad_dist_linear(&minus_xp, qs)?, gap, false))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sandwich_holds_on_random_pairs() {
        let rep = sandwich_probe(&[(2, 1), (5, 2), (20, 5)], 300, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.sample_count, 300);
        assert!(rep.min_ratio.unwrap() >= 0.5 - 1e-12);
        assert!(rep.worst_ratio.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn error_bound_closed_form_point() {
        let a = Mat::column_vector(&[2.0, 0.0]);
        let th = std::f64::consts::FRAC_PI_4;
        let q = Mat::column_vector(&[th.cos(), th.sin()]);
        let center = isolated_critical_point(&a, &[1.0]).unwrap();
        let dist = q.dist(&center).unwrap();
        let rn = residual_r(&a, &q).unwrap().frob_norm();
        assert!((dist - 2.0 * (th / 2.0).sin()).abs() < 1e-15);
        assert!((rn - 2.0 * th.sin()).abs() < 1e-15);
        assert!((dist / rn - 0.5412).abs() < 1e-4);
    }

    #[test]
    fn error_bound_probe_regimes() {
        let rep = error_bound_probe(&Mat::column_vector(&[2.0, 0.0]), &[1.0], 200, 1.0, 2).unwrap();
        assert!(rep.pass, "{rep:?}");
        let rep = error_bound_probe(&Mat::diag(&[2.0, 1.0]), &[1.0, 1.0], 200, 0.5, 2).unwrap();
        assert!(rep.pass && rep.worst_ratio.unwrap() <= 5.6274, "{rep:?}");
        let err = error_bound_probe(&Mat::diag(&[1.0, 1.0]), &[1.0, 1.0], 10, 0.5, 2).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }

    #[test]
    fn l1_distance_enumerates_zero_entries() {
        let x = DataMatrix::Dense(Mat::identity(2));
        let q = Mat::column_vector(&[1.0, 0.0]);
        let (d, flagged) = l1_subgrad_dist(&x, &q, 0.0).unwrap();
        assert!(!flagged);
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kl_probe_at_identity_optimum() {
        let x = DataMatrix::Dense(Mat::identity(2));
        let h = 0.5f64.sqrt();
        let q = Mat::column_vector(&[h, h]);
        let probe = kl_ratio_probe(&x, &q, &[0.1], 1000, 3).unwrap();
        assert!(probe.radii[0].min_ratio.unwrap() > 0.0);
        assert!(probe.pass());

        let p = SignMatrix::ones(2, 1);
        let probe = kl_ratio_probe_h(&x, &p, &q, &[0.3, 0.01], 500, 3).unwrap();
        assert!(probe.pass(), "{probe:?}");
    }

    #[test]
    fn kl_probe_requires_critical_point() {
        let x = DataMatrix::Dense(Mat::diag(&[2.0, 1.0]));
        let q = Mat::column_vector(&[0.6, 0.8]);
        assert!(matches!(kl_ratio_probe(&x, &q, &[0.1], 10, 0), Err(Error::Precondition(_))));
    }
}
