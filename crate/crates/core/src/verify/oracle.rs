use serde_json::json;

use super::certificate::enumerate_oracle;
use super::probes::gaussian;
use super::report::ProbeReport;
use crate::error::Result;
use crate::linalg::DataMatrix;
use crate::model::{objective_l1, subgrad_dist_h, ProblemInstance};
use crate::rng;
use crate::solvers::{initial_point, solve, SolverConfig};

/// Objective values within this absolute gap count as the global optimum.
pub const ORACLE_VALUE_TOL: f64 = 1e-8;
/// Limits with `dist(0, ∂h)` above this are not critical.
pub const ORACLE_CRITICAL_TOL: f64 = 1e-6;
/// Share of instances whose best restart must reach the global optimum.
pub const ORACLE_MATCH_FRACTION: f64 = 0.8;

/// Gaussian `d × n` data drawn from `seed`.
pub fn gaussian_data(d: usize, n: usize, seed: u64) -> DataMatrix {
    DataMatrix::Dense(gaussian(d, n, &mut rng::stream(seed, 0)))
}

/// Solves `instances` random Gaussian problems from `restarts` seeded starts
/// each and compares the best value with exhaustive enumeration.
///
/// `worst_ratio` is the largest `dist(0, ∂h)` at a limit and `min_ratio` the
/// share of matched instances.
pub fn oracle_agreement_probe(
    n: usize,
    d: usize,
    k: usize,
    instances: usize,
    restarts: usize,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<ProbeReport> {
    let mut rep = ProbeReport::new(
        "oracle",
        json!({
            "n": n, "d": d, "K": k, "instances": instances, "restarts": restarts,
            "method": cfg.method, "seed": seed, "value_tol": ORACLE_VALUE_TOL,
            "critical_tol": ORACLE_CRITICAL_TOL,
        }),
    );
    let mut matched = 0usize;
    let mut worst_residual = 0.0f64;
    let mut non_critical = 0usize;
    for i in 0..instances {
        let x = gaussian_data(d, n, seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
        let oracle = enumerate_oracle(&x, k)?;
        let inst = ProblemInstance::new(x, k)?;
        let mut best = f64::NEG_INFINITY;
        for j in 0..restarts.max(1) {
            let (p0, q0) = initial_point(&inst, seed.wrapping_add((i * restarts.max(1) + j) as u64))?;
            let res = solve(&inst, cfg, &p0, &q0)?;
            let residual = subgrad_dist_h(&inst.x, &res.p_final, &res.q_final)?;
            worst_residual = worst_residual.max(residual);
            if residual > ORACLE_CRITICAL_TOL {
                non_critical += 1;
            }
            best = best.max(objective_l1(&inst.x, &res.q_final)?);
        }
        if (best - oracle.value).abs() <= ORACLE_VALUE_TOL {
            matched += 1;
        }
        rep.sample_count += 1;
    }
    let share = if instances == 0 { 1.0 } else { matched as f64 / instances as f64 };
    rep.worst_ratio = Some(worst_residual);
    rep.min_ratio = Some(share);
    rep.violation_count = non_critical + (instances - matched);
    rep.pass = non_critical == 0 && share >= ORACLE_MATCH_FRACTION;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Method;

    #[test]
    fn pame_agrees_with_enumeration_on_tiny_problems() {
        let cfg = SolverConfig::new(Method::Pame).with_steps(1e-5, 10.0).with_gamma(0.5).with_tol(1e-12, 20_000);
        let rep = oracle_agreement_probe(3, 4, 2, 10, 20, &cfg, 5).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
