use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

use super::config::{Method, SolverConfig};
use super::trace::{IterateRecord, IterateTrace, SolveResult, TerminationReason};
use crate::error::{Error, Result};
use crate::linalg::{polar_factor, Mat};
use crate::model::{ensure_feasible, sign_select, ProblemInstance, SignMatrix, StiefelPoint};
use crate::rng;

const START_STREAM: u64 = 11;

/// Everything an observer may need about one update `C^k → C^{k+1}`.
///
/// `anchor` is the point whose image `Xᵀ·anchor` drove the sign update:
/// `E^k` for PAMe, `Q̄^k` for GiPALM and `Q^k` otherwise.
pub struct StepView<'a> {
    pub k: usize,
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_k: &'a Mat,
    pub p_next: &'a Mat,
    pub q_prev: &'a Mat,
    pub q_k: &'a Mat,
    pub q_next: &'a Mat,
    pub anchor: &'a Mat,
    /// `Xᵀ Q^k`.
    pub xtq_k: &'a Mat,
    /// `Xᵀ Q^{k+1}`.
    pub xtq_next: &'a Mat,
    /// `X P^{k+1}`.
    pub xp_next: &'a Mat,
}

pub trait IterationObserver {
    fn observe(&mut self, step: &StepView<'_>);
}

impl IterationObserver for () {
    fn observe(&mut self, _: &StepView<'_>) {}
}

/// Seeded starting point shared by all methods: `Q^0` is the polar factor of
/// a Gaussian `d × K` matrix and `P^0 = sign(XᵀQ^0)` with ties set to `+1`.
pub fn initial_point(inst: &ProblemInstance, seed: u64) -> Result<(SignMatrix, StiefelPoint)> {
    let mut r = rng::stream(seed, START_STREAM);
    let g = Mat::from_fn(inst.d(), inst.k, |_, _| StandardNormal.sample(&mut r));
    let q = StiefelPoint::new(polar_factor(&g)?)?;
    let p = sign_select(&inst.x.t_mul(&q)?, &SignMatrix::ones(inst.n(), inst.k))?;
    Ok((p, q))
}

pub fn solve(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    p0: &SignMatrix,
    q0: &StiefelPoint,
) -> Result<SolveResult> {
    solve_observed(inst, cfg, p0, q0, &mut ())
}

fn with_method(cfg: &SolverConfig, method: Method) -> SolverConfig {
    SolverConfig {
        method,
        ..cfg.clone()
    }
}

pub fn pame_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Pame), p0, q0)
}

pub fn pam_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Pam), p0, q0)
}

pub fn fpm_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Fpm), p0, q0)
}

pub fn pdcae_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Pdcae), p0, q0)
}

pub fn ipalm_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Ipalm), p0, q0)
}

pub fn gipalm_solve(inst: &ProblemInstance, cfg: &SolverConfig, p0: &SignMatrix, q0: &StiefelPoint) -> Result<SolveResult> {
    solve(inst, &with_method(cfg, Method::Gipalm), p0, q0)
}

/// Runs every configuration from the same seeded start, in parallel.
/// Results keep the order of `configs`; a failing run does not stop the others.
pub fn run_comparison(
    inst: &ProblemInstance,
    configs: &[SolverConfig],
    start_seed: u64,
) -> Result<Vec<Result<SolveResult>>> {
    let (p0, q0) = initial_point(inst, start_seed)?;
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let (p0, q0) = (&p0, &q0);
                s.spawn(move || solve(inst, cfg, p0, q0))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    Ok(results)
}

/// `γ_k` of the FISTA momentum sequence restarted every `interval` iterations.
pub fn restarted_fista_gamma(k: usize, interval: usize) -> f64 {
    let j = k % interval;
    let mut theta_prev = 1.0f64;
    let mut theta = 1.0f64;
    for _ in 0..j {
        let next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        theta_prev = theta;
        theta = next;
    }
    (theta_prev - 1.0) / theta
}

/// `γ_k = max{0, (k − 1)/(k + 2)}`.
pub fn ipalm_gamma(k: usize) -> f64 {
    (k as f64 - 1.0).max(0.0) / (k as f64 + 2.0)
}

fn extrapolate(cur: &Mat, prev: &Mat, gamma: f64) -> Mat {
    let data = cur
        .as_slice()
        .iter()
        .zip(prev.as_slice())
        .map(|(&c, &p)| c + gamma * (c - p))
        .collect();
    Mat::from_col_major(cur.rows(), cur.cols(), data).expect("shapes match")
}

fn sign_step(base: &Mat, grad: &Mat, alpha: f64, prev: &SignMatrix) -> Result<SignMatrix> {
    let mut arg = base.clone();
    arg.axpy_assign(1.0 / alpha, grad)?;
    sign_select(&arg, prev)
}

struct Update {
    p_next: SignMatrix,
    xp: Mat,
    anchor: Mat,
    q_arg: Mat,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

struct State {
    p: SignMatrix,
    p_prev: SignMatrix,
    q: Mat,
    q_prev: Mat,
    xtq: Mat,
    xtq_prev: Mat,
}

fn propose(inst: &ProblemInstance, cfg: &SolverConfig, s: &State, k: usize) -> Result<Update> {
    let x = &inst.x;
    let (alpha, beta) = (cfg.alpha.at(k), cfg.beta.at(k));
    match cfg.method {
        Method::Pame | Method::Pam => {
            let gamma = cfg.gamma_at(k);
            let e = extrapolate(&s.q, &s.q_prev, gamma);
            let xte = extrapolate(&s.xtq, &s.xtq_prev, gamma);
            let p_next = sign_step(&s.p, &xte, alpha, &s.p)?;
            let xp = x.mul(&p_next)?;
            let mut q_arg = s.q.clone();
            q_arg.axpy_assign(1.0 / beta, &xp)?;
            Ok(Update { p_next, xp, anchor: e, q_arg, alpha, beta, gamma })
        }
        Method::Fpm => {
            let p_next = sign_select(&s.xtq, &s.p)?;
            let xp = x.mul(&p_next)?;
            if xp.is_zero() {
                return Err(Error::DegenerateUpdate {
                    iteration: k,
                    reason: "X P vanishes, so its polar factor is undefined".into(),
                });
            }
            let q_arg = xp.clone();
            Ok(Update { p_next, xp, anchor: s.q.clone(), q_arg, alpha: 0.0, beta: 0.0, gamma: 0.0 })
        }
        Method::Pdcae => {
            let gamma = restarted_fista_gamma(k, cfg.method_params.restart_interval);
            let p_next = sign_select(&s.xtq, &s.p)?;
            let xp = x.mul(&p_next)?;
            let mut q_arg = extrapolate(&s.q, &s.q_prev, gamma);
            q_arg.axpy_assign(1.0 / beta, &xp)?;
            Ok(Update { p_next, xp, anchor: s.q.clone(), q_arg, alpha: 0.0, beta, gamma })
        }
        Method::Ipalm | Method::Gipalm => {
            let (gamma_p, gamma_q) = if cfg.method == Method::Ipalm {
                (ipalm_gamma(k), ipalm_gamma(k))
            } else {
                (cfg.method_params.gipalm_gamma_p, cfg.method_params.gipalm_gamma_q)
            };
            let p_bar = extrapolate(&s.p, &s.p_prev, gamma_p);
            let q_bar = extrapolate(&s.q, &s.q_prev, gamma_q);
            let (anchor, grad) = if cfg.method == Method::Ipalm {
                (s.q.clone(), s.xtq.clone())
            } else {
                (q_bar.clone(), extrapolate(&s.xtq, &s.xtq_prev, gamma_q))
            };
            let p_next = sign_step(&p_bar, &grad, alpha, &s.p)?;
            let xp = x.mul(&p_next)?;
            let mut q_arg = q_bar;
            q_arg.axpy_assign(1.0 / beta, &xp)?;
            Ok(Update { p_next, xp, anchor, q_arg, alpha, beta, gamma: gamma_q })
        }
    }
}

pub fn solve_observed(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    p0: &SignMatrix,
    q0: &StiefelPoint,
    observer: &mut dyn IterationObserver,
) -> Result<SolveResult> {
    cfg.validate()?;
    let (n, d, k_dim) = (inst.n(), inst.d(), inst.k);
    if p0.shape() != (n, k_dim) {
        return Err(Error::dims("P0", format!("{n}x{k_dim}"), format!("{}x{}", p0.rows(), p0.cols())));
    }
    if q0.shape() != (d, k_dim) {
        return Err(Error::dims("Q0", format!("{d}x{k_dim}"), format!("{}x{}", q0.rows(), q0.cols())));
    }
    ensure_feasible(q0, "Q0")?;
    if cfg.theorem_mode {
        cfg.theorem_bounds(&inst.x)?;
    }
    let x = &inst.x;
    let beta_star = cfg.beta_lower();
    let q_cap = 2.0 * (k_dim as f64).sqrt();
    let clock = Instant::now();

    let xtq0 = x.t_mul(q0)?;
    let h0 = -p0.inner(&xtq0)?;
    let mut trace = IterateTrace {
        records: vec![IterateRecord {
            k: 0,
            h_value: h0,
            psi_value: h0,
            delta_p_norm: 0.0,
            delta_q_norm: 0.0,
            delta_c_norm: 0.0,
            wall_time_seconds: clock.elapsed().as_secs_f64(),
            h_step: 0.0,
        }],
    };
    if !h0.is_finite() {
        return Err(Error::Diverged { iteration: 0, reason: "non-finite h at the start".into(), trace: Box::new(trace) });
    }
    let mut s = State {
        p: p0.clone(),
        p_prev: p0.clone(),
        q: q0.as_mat().clone(),
        q_prev: q0.as_mat().clone(),
        xtq: xtq0.clone(),
        xtq_prev: xtq0,
    };
    let mut dq_prev_sq = 0.0;

    for k in 0..cfg.max_iter {
        let up = propose(inst, cfg, &s, k)?;
        let diverged = |reason: String, trace: IterateTrace| Error::Diverged {
            iteration: k + 1,
            reason,
            trace: Box::new(trace),
        };
        if !up.q_arg.is_finite() {
            return Err(diverged("non-finite Procrustes argument".into(), trace));
        }
        let q_next = polar_factor(&up.q_arg)?;
        if !q_next.is_finite() || q_next.frob_norm() > q_cap {
            return Err(diverged(format!("iterate left the Stiefel manifold (‖Q‖_F = {})", q_next.frob_norm()), trace));
        }
        let xtq_next = x.t_mul(&q_next)?;

        let dp = up.p_next.sub(&s.p)?;
        let dq = q_next.sub(&s.q)?;
        let (dp_sq, dq_sq) = (dp.frob_norm_sq(), dq.frob_norm_sq());
        let h = -up.p_next.inner(&xtq_next)?;
        let h_step = -up.xp.inner(&dq)? - dp.inner(&s.xtq)?;
        let psi = h + 0.5 * beta_star * dq_sq;
        let delta_c = (dp_sq + dq_sq + dq_prev_sq).sqrt();
        let rec = IterateRecord {
            k: k + 1,
            h_value: h,
            psi_value: psi,
            delta_p_norm: dp_sq.sqrt(),
            delta_q_norm: dq_sq.sqrt(),
            delta_c_norm: delta_c,
            wall_time_seconds: clock.elapsed().as_secs_f64(),
            h_step,
        };
        if ![h, psi, delta_c, h_step].iter().all(|v| v.is_finite()) {
            return Err(diverged("non-finite trace value".into(), trace));
        }
        trace.records.push(rec);

        observer.observe(&StepView {
            k,
            method: cfg.method,
            alpha: up.alpha,
            beta: up.beta,
            gamma: up.gamma,
            p_k: &s.p,
            p_next: &up.p_next,
            q_prev: &s.q_prev,
            q_k: &s.q,
            q_next: &q_next,
            anchor: &up.anchor,
            xtq_k: &s.xtq,
            xtq_next: &xtq_next,
            xp_next: &up.xp,
        });

        s.p_prev = std::mem::replace(&mut s.p, up.p_next);
        s.q_prev = std::mem::replace(&mut s.q, q_next);
        s.xtq_prev = std::mem::replace(&mut s.xtq, xtq_next);
        dq_prev_sq = dq_sq;

        if delta_c < cfg.tol {
            return Ok(finish(s, trace, k + 1, true));
        }
    }
    Ok(finish(s, trace, cfg.max_iter, false))
}

fn finish(s: State, trace: IterateTrace, iterations: usize, converged: bool) -> SolveResult {
    SolveResult {
        p_final: s.p,
        q_final: StiefelPoint::from_polar(s.q),
        trace,
        iterations,
        converged,
        termination_reason: if converged {
            TerminationReason::Converged
        } else {
            TerminationReason::MaxIterations
        },
    }
}
