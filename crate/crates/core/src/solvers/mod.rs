//! PAMe and the five baseline methods on one update toolkit.
//!
//! Every method iterates on `C^k = (P^k, Q^k, Q^{k−1})` with `Q^{−1} = Q^0`,
//! records one [`IterateRecord`] per iterate, and stops once
//! `‖C^{k+1} − C^k‖_F < tol`.

mod config;
mod engine;
mod trace;

pub use config::{Method, MethodParams, Schedule, SolverConfig, TheoremBounds, NORM_REL_TOL};
pub use engine::{
    fpm_solve, gipalm_solve, initial_point, ipalm_gamma, ipalm_solve, pam_solve, pame_solve,
    pdcae_solve, restarted_fista_gamma, run_comparison, solve, solve_observed, IterationObserver,
    StepView,
};
pub use trace::{IterateRecord, IterateTrace, SolveResult, TerminationReason};
