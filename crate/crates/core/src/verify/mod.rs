//! Numerical certificates for the structure behind the solvers: criticality
//! of limit points, the critical sets of linear functions on the Stiefel
//! manifold, error-bound and KL ratios, and per-step decrease audits.

mod audit;
mod certificate;
mod critical_set;
mod oracle;
mod probes;
mod report;

pub use audit::{
    decrease_and_error_audit, linear_fit, log_h_gaps, AuditObserver, AuditReport, AuditStep,
    AUDIT_SLACK,
};
pub use certificate::{
    check_alpha_condition, criticality_report, criticality_report_with_tol, enumerate_oracle,
    CriticalityReport, OracleResult, DEFAULT_ZERO_TOL, ORACLE_MAX_SIGNS,
};
pub use critical_set::{
    build_critical_point, critical_set_separation_probe, kappa_constant, sample_critical_point,
    CriticalSetSpec, KappaConstant, RANK_REL_TOL, TIE_REL_TOL,
};
pub use oracle::{
    gaussian_data, oracle_agreement_probe, ORACLE_CRITICAL_TOL, ORACLE_MATCH_FRACTION,
    ORACLE_VALUE_TOL,
};
pub use probes::{
    error_bound_probe, kl_ratio_probe, kl_ratio_probe_h, l1_subgrad_dist, sandwich_probe, KlProbe,
    KlRadius, KL_STABILITY_FACTOR, MAX_ENUMERATED_ZEROS, SANDWICH_REL_TOL,
};
pub use report::ProbeReport;
