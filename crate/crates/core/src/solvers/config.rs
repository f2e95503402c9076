use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, DataMatrix};

/// Relative tolerance of the `‖X‖` estimate used by theorem-mode bounds.
pub const NORM_REL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pame,
    Pam,
    Fpm,
    Pdcae,
    Ipalm,
    Gipalm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Pame,
        Method::Pam,
        Method::Fpm,
        Method::Pdcae,
        Method::Ipalm,
        Method::Gipalm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pame => "pame",
            Method::Pam => "pam",
            Method::Fpm => "fpm",
            Method::Pdcae => "pdcae",
            Method::Ipalm => "ipalm",
            Method::Gipalm => "gipalm",
        }
    }

    /// Whether `cfg.gamma` drives this method's extrapolation.
    pub fn uses_gamma_schedule(self) -> bool {
        self == Method::Pame
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// A step-size or extrapolation sequence. Per-iteration lists repeat their
/// last entry past the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    PerIteration(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerIteration(v) => v[k.min(v.len() - 1)],
        }
    }

    /// `(min, max)` over iterations `0..horizon`.
    pub fn range(&self, horizon: usize) -> (f64, f64) {
        match self {
            Schedule::Constant(v) => (*v, *v),
            Schedule::PerIteration(v) => {
                let take = horizon.clamp(1, v.len());
                v[..take]
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
            }
        }
    }

    fn validate(&self, name: &str, allow_zero: bool) -> Result<()> {
        let values: &[f64] = match self {
            Schedule::Constant(v) => std::slice::from_ref(v),
            Schedule::PerIteration(v) => v,
        };
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("{name} schedule is empty")));
        }
        for &v in values {
            let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
            if !ok {
                return Err(Error::InvalidConfig(format!("{name} has invalid entry {v}")));
            }
        }
        Ok(())
    }
}

impl From<f64> for Schedule {
    fn from(v: f64) -> Self {
        Schedule::Constant(v)
    }
}

/// Extrapolation settings for the inertial baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    /// Fixed restart interval of the pDCAe momentum sequence.
    pub restart_interval: usize,
    pub gipalm_gamma_p: f64,
    pub gipalm_gamma_q: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            restart_interval: 10,
            gipalm_gamma_p: 0.5,
            gipalm_gamma_q: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub alpha: Schedule,
    pub beta: Schedule,
    pub gamma: Schedule,
    /// Lower bound `α_*` on the `P` step sizes; defaults to the smallest scheduled value.
    pub alpha_star: Option<f64>,
    /// `β_*` with `β_k ≥ 3β_*/2`; defaults to two thirds of the smallest scheduled value.
    pub beta_star: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub theorem_mode: bool,
    pub method_params: MethodParams,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            method,
            alpha: Schedule::Constant(1e-5),
            beta: Schedule::Constant(if method == Method::Pdcae { 1.0 } else { 1e3 }),
            gamma: Schedule::Constant(if method == Method::Pame { 1.0 } else { 0.0 }),
            alpha_star: None,
            beta_star: None,
            max_iter: 1000,
            tol: 1e-8,
            seed: 0,
            theorem_mode: false,
            method_params: MethodParams::default(),
        }
    }

    pub fn with_steps(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = Schedule::Constant(alpha);
        self.beta = Schedule::Constant(beta);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Schedule::Constant(gamma);
        self
    }

    pub fn with_tol(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_theorem_mode(mut self, on: bool) -> Self {
        self.theorem_mode = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha", false)?;
        self.beta.validate("beta", false)?;
        self.gamma.validate("gamma", true)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.method_params.restart_interval == 0 {
            return Err(Error::InvalidConfig("restart_interval must be at least 1".into()));
        }
        for (name, v) in [
            ("alpha_star", self.alpha_star),
            ("beta_star", self.beta_star),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Extrapolation parameter actually used at iteration `k` by PAMe/PAM.
    pub fn gamma_at(&self, k: usize) -> f64 {
        if self.method.uses_gamma_schedule() {
            self.gamma.at(k)
        } else {
            0.0
        }
    }

    pub fn alpha_lower(&self) -> f64 {
        self.alpha_star.unwrap_or_else(|| self.alpha.range(self.max_iter).0)
    }

    /// `β_*` used by the potential `Ψ_{β_*}`; zero for FPM, which has no `Q` step size.
    pub fn beta_lower(&self) -> f64 {
        if self.method == Method::Fpm {
            return 0.0;
        }
        self.beta_star
            .unwrap_or_else(|| 2.0 * self.beta.range(self.max_iter).0 / 3.0)
    }

    /// Checks the step-size and extrapolation conditions of the linear
    /// convergence theorem and returns the derived constants.
    pub fn theorem_bounds(&self, x: &DataMatrix) -> Result<TheoremBounds> {
        self.validate()?;
        if !matches!(self.method, Method::Pame | Method::Pam) {
            return Err(Error::TheoremCondition(format!(
                "theorem mode applies to pame and pam only, not {}",
                self.method
            )));
        }
        let horizon = self.max_iter;
        let (alpha_min, alpha_sup) = self.alpha.range(horizon);
        let (beta_min, beta_sup) = self.beta.range(horizon);
        let gamma_sup = if self.method == Method::Pam {
            0.0
        } else {
            self.gamma.range(horizon).1
        };
        let alpha_star = self.alpha_lower();
        let beta_star = self.beta_lower();

        if alpha_star > alpha_min {
            return Err(Error::TheoremCondition(format!(
                "(i) alpha_* <= alpha_k fails: alpha_* = {alpha_star:e} > min alpha_k = {alpha_min:e}"
            )));
        }
        if 1.5 * beta_star > beta_min * (1.0 + 1e-12) {
            return Err(Error::TheoremCondition(format!(
                "(ii) 3 beta_*/2 <= beta_k fails: 3 beta_*/2 = {:e} > min beta_k = {beta_min:e}",
                1.5 * beta_star
            )));
        }
        let s = spectral_norm(x, NORM_REL_TOL)?;
        let x_norm = s * (1.0 + NORM_REL_TOL);
        let gamma_bound = if x_norm == 0.0 {
            1.0
        } else {
            (alpha_star * beta_star / (2.0 * x_norm * x_norm)).min(1.0)
        };
        if gamma_sup >= gamma_bound {
            return Err(Error::TheoremCondition(format!(
                "(iii) gamma_k < gamma* = min{{1, alpha_* beta_* / (2 ||X||^2)}} fails: \
                 gamma_k = {gamma_sup} >= gamma* = {gamma_bound:e} (||X|| <= {x_norm:e})"
            )));
        }
        let gamma_term = if self.method == Method::Pam { 0.0 } else { gamma_bound };
        let kappa1 = (alpha_star * (1.0 - gamma_term) / 2.0).min(beta_star / 4.0);
        let kappa2 = (3.0 * alpha_sup * alpha_sup)
            .max((beta_sup - beta_star).powi(2) + beta_star * beta_star + 3.0 * x_norm * x_norm)
            .sqrt();
        Ok(TheoremBounds {
            alpha_star,
            alpha_sup,
            beta_star,
            beta_sup,
            gamma_sup,
            gamma_bound,
            x_norm,
            kappa1,
            kappa2,
        })
    }
}

/// Constants of the convergence theorem for one configuration and data matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremBounds {
    pub alpha_star: f64,
    pub alpha_sup: f64,
    pub beta_star: f64,
    pub beta_sup: f64,
    /// Largest extrapolation parameter used.
    pub gamma_sup: f64,
    /// `γ* = min{1, α_*β_*/(2‖X‖²)}`.
    pub gamma_bound: f64,
    /// Upper estimate of `‖X‖`.
    pub x_norm: f64,
    /// Sufficient-decrease constant `min{α_*(1−γ*)/2, β_*/4}`, with `γ* = 0` for PAM.
    pub kappa1: f64,
    /// Relative-error constant `(max{3α*², (β*−β_*)² + β_*² + 3‖X‖²})^{1/2}`.
    pub kappa2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    #[test]
    fn schedule_repeats_last_entry() {
        let s = Schedule::PerIteration(vec![3.0, 1.0, 2.0]);
        assert_eq!(s.at(0), 3.0);
        assert_eq!(s.at(10), 2.0);
        assert_eq!(s.range(2), (1.0, 3.0));
        assert_eq!(Schedule::Constant(0.5).range(100), (0.5, 0.5));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svd".parse::<Method>().is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        assert!(SolverConfig::new(Method::Pame).validate().is_ok());
        assert!(SolverConfig::new(Method::Pame).with_steps(0.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(Method::Pame).with_gamma(-0.1).validate().is_err());
        assert!(SolverConfig::new(Method::Pame).with_tol(0.0, 10).validate().is_err());
    }

    #[test]
    fn theorem_bounds_constants() {
        let x = DataMatrix::Dense(Mat::diag(&[2.0, 1.0]));
        let cfg = SolverConfig::new(Method::Pame)
            .with_steps(1.0, 12.0)
            .with_gamma(0.5)
            .with_theorem_mode(true);
        let b = cfg.theorem_bounds(&x).unwrap();
        // β_* = 8, γ* = min{1, 8/(2·4)} = 1 up to the norm inflation.
        assert_eq!(b.beta_star, 8.0);
        assert!(b.gamma_bound < 1.0 && b.gamma_bound > 1.0 - 1e-5);
        assert!((b.kappa1 - (1.0 - b.gamma_bound) / 2.0).abs() < 1e-15);
        let expected_k2 = ((16.0f64 + 64.0 + 3.0 * b.x_norm * b.x_norm).max(3.0)).sqrt();
        assert!((b.kappa2 - expected_k2).abs() < 1e-12);
    }

    #[test]
    fn theorem_mode_names_the_violated_condition() {
        let x = DataMatrix::Dense(Mat::diag(&[10.0, 1.0]));
        let cfg = SolverConfig::new(Method::Pame)
            .with_steps(1e-2, 3.0)
            .with_gamma(0.9)
            .with_theorem_mode(true);
        let err = cfg.theorem_bounds(&x).unwrap_err();
        assert!(err.to_string().contains("(iii)"), "{err}");

        let mut cfg = SolverConfig::new(Method::Pam).with_steps(1.0, 3.0);
        cfg.beta_star = Some(2.5);
        let err = cfg.theorem_bounds(&x).unwrap_err();
        assert!(err.to_string().contains("(ii)"), "{err}");

        let mut cfg = SolverConfig::new(Method::Pam).with_steps(1.0, 3.0);
        cfg.alpha_star = Some(2.0);
        let err = cfg.theorem_bounds(&x).unwrap_err();
        assert!(err.to_string().contains("(i)"), "{err}");

        let cfg = SolverConfig::new(Method::Pam).with_steps(1.0, 12.0);
        assert_eq!(cfg.theorem_bounds(&x).unwrap().kappa1, 0.5);

        let cfg = SolverConfig::new(Method::Fpm);
        assert!(matches!(cfg.theorem_bounds(&x), Err(Error::TheoremCondition(_))));
    }
}
