use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::ProbeReport;
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::model::{subgrad_dist_linear, ProblemInstance, SignMatrix, StiefelPoint};
use crate::solvers::{solve_observed, IterationObserver, SolveResult, SolverConfig, StepView, TheoremBounds};

/// Absolute slack allowed in both audited inequalities.
pub const AUDIT_SLACK: f64 = 1e-10;

/// Audit of one update `C^k → C^{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditStep {
    pub k: usize,
    /// `Ψ(C^{k+1}) − Ψ(C^k)`.
    pub psi_change: f64,
    /// `−κ1‖C^{k+1} − C^k‖²`.
    pub decrease_bound: f64,
    /// Norm of the subgradient element of `Ψ` at `C^{k+1}` built from the update.
    pub subgradient_norm: f64,
    /// `κ2‖C^{k+1} − C^k‖`.
    pub error_bound: f64,
}

impl AuditStep {
    pub fn decrease_ok(&self) -> bool {
        self.psi_change <= self.decrease_bound + AUDIT_SLACK
    }

    pub fn error_ok(&self) -> bool {
        self.subgradient_norm <= self.error_bound + AUDIT_SLACK
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bounds: TheoremBounds,
    pub iterations: usize,
    pub decrease_violations: usize,
    pub error_violations: usize,
    /// Largest `psi_change − decrease_bound`.
    pub worst_decrease_slack: f64,
    /// Largest `subgradient_norm / error_bound` over steps that moved.
    pub worst_error_ratio: f64,
    pub steps: Vec<AuditStep>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.decrease_violations == 0 && self.error_violations == 0
    }

    pub fn probe_report(&self) -> ProbeReport {
        let mut rep = ProbeReport::new(
            "audit",
            json!({
                "kappa1": self.bounds.kappa1,
                "kappa2": self.bounds.kappa2,
                "beta_star": self.bounds.beta_star,
                "gamma_bound": self.bounds.gamma_bound,
                "decrease_violations": self.decrease_violations,
                "error_violations": self.error_violations,
                "worst_decrease_slack": self.worst_decrease_slack,
            }),
        );
        rep.sample_count = self.steps.len();
        rep.worst_ratio = Some(self.worst_error_ratio);
        rep.violation_count = self.decrease_violations + self.error_violations;
        rep.pass = self.pass();
        rep
    }
}

/// Observer evaluating both inequalities on every step of a run.
pub struct AuditObserver<'a> {
    x: &'a DataMatrix,
    bounds: TheoremBounds,
    steps: Vec<AuditStep>,
    failure: Option<Error>,
}

impl<'a> AuditObserver<'a> {
    pub fn new(x: &'a DataMatrix, bounds: TheoremBounds) -> Self {
        AuditObserver { x, bounds, steps: Vec::new(), failure: None }
    }

    fn audit(&self, s: &StepView<'_>) -> Result<AuditStep> {
        let beta_star = self.bounds.beta_star;
        let dp = s.p_next.sub(s.p_k)?;
        let dq = s.q_next.sub(s.q_k)?;
        let dq_old = s.q_k.sub(s.q_prev)?;
        let (dp_sq, dq_sq, dq_old_sq) = (dp.frob_norm_sq(), dq.frob_norm_sq(), dq_old.frob_norm_sq());
        let dc_sq = dp_sq + dq_sq + dq_old_sq;

        let h_change = -s.xp_next.inner(&dq)? - dp.inner(s.xtq_k)?;
        let psi_change = h_change + 0.5 * beta_star * (dq_sq - dq_old_sq);

        let mut p_part = self.x.t_mul(&s.anchor.sub(s.q_next)?)?;
        p_part.axpy_assign(-s.alpha, &dp)?;
        let mut a = s.xp_next.scaled(-1.0);
        a.axpy_assign(beta_star, &dq)?;
        let q_part = subgrad_dist_linear(&a, s.q_next)?;
        let qprev_part = beta_star * dq_sq.sqrt();
        let subgradient_norm =
            (p_part.frob_norm_sq() + q_part * q_part + qprev_part * qprev_part).sqrt();

        Ok(AuditStep {
            k: s.k,
            psi_change,
            decrease_bound: -self.bounds.kappa1 * dc_sq,
            subgradient_norm,
            error_bound: self.bounds.kappa2 * dc_sq.sqrt(),
        })
    }

    pub fn finish(self, iterations: usize) -> Result<AuditReport> {
        if let Some(e) = self.failure {
            return Err(e);
        }
        let decrease_violations = self.steps.iter().filter(|s| !s.decrease_ok()).count();
        let error_violations = self.steps.iter().filter(|s| !s.error_ok()).count();
        let worst_decrease_slack = self
            .steps
            .iter()
            .map(|s| s.psi_change - s.decrease_bound)
            .fold(f64::NEG_INFINITY, f64::max);
        let worst_error_ratio = self
            .steps
            .iter()
            .filter(|s| s.error_bound > 0.0)
            .map(|s| s.subgradient_norm / s.error_bound)
            .fold(0.0, f64::max);
        Ok(AuditReport {
            bounds: self.bounds,
            iterations,
            decrease_violations,
            error_violations,
            worst_decrease_slack,
            worst_error_ratio,
            steps: self.steps,
        })
    }
}

impl IterationObserver for AuditObserver<'_> {
    fn observe(&mut self, step: &StepView<'_>) {
        if self.failure.is_some() {
            return;
        }
        match self.audit(step) {
            Ok(s) => self.steps.push(s),
            Err(e) => self.failure = Some(e),
        }
    }
}

/// Runs PAMe or PAM under a theorem-mode configuration and audits sufficient
/// decrease and relative error of the potential `Ψ_{β_*}` at every step.
pub fn decrease_and_error_audit(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    p0: &SignMatrix,
    q0: &StiefelPoint,
) -> Result<(SolveResult, AuditReport)> {
    if !cfg.theorem_mode {
        return Err(Error::Refused("the audit needs a theorem-mode configuration".into()));
    }
    let bounds = cfg.theorem_bounds(&inst.x)?;
    let mut obs = AuditObserver::new(&inst.x, bounds);
    let res = solve_observed(inst, cfg, p0, q0, &mut obs)?;
    let report = obs.finish(res.iterations)?;
    Ok((res, report))
}

/// `h(P^k, Q^k)` minus its final value, from a trace, as base-10 logs with
/// nonpositive gaps dropped.
pub fn log_h_gaps(res: &SolveResult) -> Vec<(usize, f64)> {
    res.trace
        .h_gaps()
        .into_iter()
        .enumerate()
        .filter(|&(_, g)| g > 0.0)
        .map(|(k, g)| (k, g.log10()))
        .collect()
}

/// Least-squares line through `(x, y)` points: `(slope, R²)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::solvers::{initial_point, Method};

    fn instance() -> ProblemInstance {
        let x = Mat::from_fn(6, 10, |i, j| (((i * 7 + j * 3) % 11) as f64 - 5.0) / 3.0);
        ProblemInstance::new(x, 2).unwrap()
    }

    #[test]
    fn pam_audit_has_no_violations() {
        let inst = instance();
        let (p0, q0) = initial_point(&inst, 0).unwrap();
        let cfg = SolverConfig::new(Method::Pam)
            .with_steps(0.5, 20.0)
            .with_tol(1e-10, 2000)
            .with_theorem_mode(true);
        let (res, rep) = decrease_and_error_audit(&inst, &cfg, &p0, &q0).unwrap();
        assert!(rep.pass(), "{rep:?}");
        assert_eq!(rep.steps.len(), res.iterations);
        assert_eq!(rep.bounds.kappa1, (0.25f64).min(20.0 * 2.0 / 3.0 / 4.0));
    }

    #[test]
    fn pame_audit_has_no_violations() {
        let inst = instance();
        let (p0, q0) = initial_point(&inst, 1).unwrap();
        let s = crate::linalg::spectral_norm(&inst.x, 1e-6).unwrap();
        let beta = 1.5 * s * s;
        let cfg = SolverConfig::new(Method::Pame)
            .with_steps(1.0, beta)
            .with_gamma(0.3)
            .with_tol(1e-10, 5000)
            .with_theorem_mode(true);
        let (_, rep) = decrease_and_error_audit(&inst, &cfg, &p0, &q0).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn audit_refuses_non_theorem_runs() {
        let inst = instance();
        let (p0, q0) = initial_point(&inst, 0).unwrap();
        let cfg = SolverConfig::new(Method::Pame);
        assert!(matches!(decrease_and_error_audit(&inst, &cfg, &p0, &q0), Err(Error::Refused(_))));
    }

    #[test]
    fn zero_data_audit_is_vacuous() {
        let inst = ProblemInstance::new(Mat::zeros(3, 3), 1).unwrap();
        let (p0, q0) = initial_point(&inst, 0).unwrap();
        let cfg = SolverConfig::new(Method::Pam).with_steps(1.0, 3.0).with_theorem_mode(true);
        let (res, rep) = decrease_and_error_audit(&inst, &cfg, &p0, &q0).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(rep.pass());
    }

    #[test]
    fn linear_fit_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (slope, r2) = linear_fit(&pts);
        assert!((slope + 0.5).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }
}
