use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use l1pca::data::{
    gen_fixed_effect, read_dense, read_sparse_labeled, write_dense, write_sparse_labeled, write_trace,
    FixedEffectSpec, TraceFormat, SCHEMA_VERSION,
};
use l1pca::eval::{choose_k_by_variance, kmeans_accuracy, tev, DEFAULT_RESTARTS};
use l1pca::linalg::{spectral_norm, CscMatrix, DataMatrix, Mat};
use l1pca::model::{objective_l1, ProblemInstance};
use l1pca::solvers::{initial_point, run_comparison, solve as run_solver, Schedule, NORM_REL_TOL};
use l1pca::verify::{
    critical_set_separation_probe, criticality_report, decrease_and_error_audit, enumerate_oracle,
    error_bound_probe, gaussian_data, kl_ratio_probe, oracle_agreement_probe, sandwich_probe,
    ProbeReport,
};
use l1pca::{Error, Method, SolveResult, SolverConfig};

use crate::args::{
    ClusterArgs, CompareArgs, GenerateArgs, MatrixFormat, SolveArgs, SolverFlags, Suite,
    TraceFormatArg, VerifyArgs,
};
use crate::{CliError, Outcome};

const KL_RADII: [f64; 4] = [0.3, 0.1, 0.03, 0.01];
const SEPARATION_FLOOR: f64 = 2.0 - 1e-9;

fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn parse_method(s: Option<&str>) -> Result<Method, CliError> {
    s.unwrap_or("pame").parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--{flag} must be a comma-separated list of numbers")))
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn load_data(path: &Path, features: Option<usize>) -> Result<(DataMatrix, Option<Vec<i64>>), CliError> {
    if path.extension().is_some_and(|e| e == "bin") {
        Ok((DataMatrix::Dense(read_dense(path)?), None))
    } else {
        let data = read_sparse_labeled(path, features)?;
        Ok((DataMatrix::Sparse(data.x), Some(data.labels)))
    }
}

fn load_instance(input: Option<&Path>, k: Option<usize>, features: Option<usize>) -> Result<ProblemInstance, CliError> {
    let (x, labels) = load_data(require(input, "input")?, features)?;
    let inst = ProblemInstance::new(x, require(k, "K")?)?;
    Ok(match labels {
        Some(l) => inst.with_labels(l)?,
        None => inst,
    })
}

fn solver_config(method: Method, flags: &SolverFlags, seed: u64) -> SolverConfig {
    let mut cfg = SolverConfig::new(method).with_seed(seed);
    if let Some(a) = flags.alpha {
        cfg.alpha = Schedule::Constant(a);
    }
    if let Some(b) = flags.beta {
        cfg.beta = Schedule::Constant(b);
    }
    if let Some(g) = flags.gamma {
        cfg.gamma = Schedule::Constant(g);
    }
    cfg.alpha_star = flags.alpha_star.or(cfg.alpha_star);
    cfg.beta_star = flags.beta_star.or(cfg.beta_star);
    cfg.tol = flags.tol.unwrap_or(cfg.tol);
    cfg.max_iter = flags.max_iter.unwrap_or(cfg.max_iter);
    cfg.theorem_mode = flags.theorem_mode.unwrap_or(false);
    cfg
}

fn result_summary(inst: &ProblemInstance, cfg: &SolverConfig, res: &SolveResult) -> Result<Value, CliError> {
    let tev_value = match tev(&inst.x, &res.q_final) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let criticality = criticality_report(&inst.x, &res.p_final, &res.q_final, cfg.alpha_lower())?;
    Ok(json!({
        "method": cfg.method,
        "iterations": res.iterations,
        "converged": res.converged,
        "termination_reason": res.termination_reason,
        "objective_l1": objective_l1(&inst.x, &res.q_final)?,
        "h_value": res.trace.last().map(|r| r.h_value),
        "tev": tev_value,
        "criticality": criticality,
    }))
}

pub fn generate(a: GenerateArgs) -> Result<Outcome, CliError> {
    let spec = FixedEffectSpec {
        n: require(a.n, "n")?,
        d: require(a.d, "d")?,
        k: require(a.k, "K")?,
        sigma: require(a.sigma, "sigma")?,
        seed: a.seed.unwrap_or(0),
    };
    let out = require(a.out, "out")?;
    let inst = gen_fixed_effect(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&out)?;
    let x = inst.x.to_dense();
    let x_path = match a.format.unwrap_or(MatrixFormat::Dense) {
        MatrixFormat::Dense => {
            let p = out.join("X.bin");
            write_dense(&p, &x)?;
            p
        }
        MatrixFormat::Sparse => {
            let p = out.join("X.txt");
            write_sparse_labeled(&p, &CscMatrix::from_dense(&x), &vec![0; spec.n])?;
            p
        }
    };
    let (u_path, z_path) = (out.join("U.bin"), out.join("Z.bin"));
    write_dense(&u_path, inst.u.as_mat())?;
    write_dense(&z_path, &inst.z)?;
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "generate",
        "spec": spec,
        "x_frob_norm": x.frob_norm(),
        "files": { "X": x_path, "U": u_path, "Z": z_path },
    });
    emit(&summary, Some(&out.join("summary.json")))?;
    Ok(Outcome::Done)
}

pub fn solve(a: SolveArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(a.input.as_deref(), a.k, a.features)?;
    let method = parse_method(a.method.as_deref())?;
    let seed = a.seed.unwrap_or(0);
    let cfg = solver_config(method, &a.solver, seed);
    let bounds = if cfg.theorem_mode { Some(cfg.theorem_bounds(&inst.x)?) } else { None };
    let (p0, q0) = initial_point(&inst, seed)?;
    let format = match a.trace_format.unwrap_or(TraceFormatArg::Csv) {
        TraceFormatArg::Csv => TraceFormat::Csv,
        TraceFormatArg::Json => TraceFormat::Json,
    };
    let trace_path = |dir: &PathBuf| dir.join(if format == TraceFormat::Csv { "trace.csv" } else { "trace.json" });
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }

    let res = match run_solver(&inst, &cfg, &p0, &q0) {
        Ok(r) => r,
        Err(e) => {
            if let (Error::Diverged { trace, .. }, Some(dir)) = (&e, &a.out) {
                write_trace(trace, trace_path(dir), format)?;
            }
            return Err(e.into());
        }
    };
    let mut report = result_summary(&inst, &cfg, &res)?;
    report["schema_version"] = json!(SCHEMA_VERSION);
    report["command"] = json!("solve");
    report["config"] = serde_json::to_value(&cfg)?;
    report["theorem_bounds"] = serde_json::to_value(&bounds)?;
    if let Some(dir) = &a.out {
        let (t, q, p) = (trace_path(dir), dir.join("Q.bin"), dir.join("P.bin"));
        write_trace(&res.trace, &t, format)?;
        write_dense(&q, &res.q_final)?;
        write_dense(&p, &res.p_final)?;
        report["files"] = json!({ "trace": t, "Q": q, "P": p });
    }
    emit(&report, a.out.as_ref().map(|d| d.join("result.json")).as_deref())?;
    Ok(if res.converged { Outcome::Done } else { Outcome::NotConverged })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn compare(a: CompareArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(a.input.as_deref(), a.k, a.features)?;
    let seed = a.seed.unwrap_or(0);
    let list = require(a.methods.as_deref(), "methods")?;
    let methods: Vec<Method> = if list.trim().eq_ignore_ascii_case("all") {
        Method::ALL.to_vec()
    } else {
        list.split(',').map(|m| parse_method(Some(m))).collect::<Result<_, _>>()?
    };
    let mut configs: Vec<SolverConfig> = methods.iter().map(|&m| solver_config(m, &a.solver, seed)).collect();
    configs.sort_by_key(|c| c.method.name());
    let results = run_comparison(&inst, &configs, seed)?;

    let mut out = String::from("method,iterations,objective_l1,tev,converged,error\n");
    for (cfg, res) in configs.iter().zip(results) {
        let row = match res.and_then(|r| {
            let obj = objective_l1(&inst.x, &r.q_final)?;
            let t = tev(&inst.x, &r.q_final).map_or(String::new(), |v| format!("{v:.16e}"));
            Ok(format!("{},{obj:.16e},{t},{},", r.iterations, r.converged))
        }) {
            Ok(fields) => fields,
            Err(e) => format!(",,,false,{}", csv_field(&e.to_string())),
        };
        writeln!(out, "{},{row}", cfg.method).expect("string write");
    }
    match &a.out {
        Some(p) => fs::write(p, &out)?,
        None => print!("{out}"),
    }
    Ok(Outcome::Done)
}

fn diag_matrix(sv: &[f64], d: usize, k: usize) -> Mat {
    Mat::from_fn(d, k, |i, j| if i == j && i < sv.len() { sv[i] } else { 0.0 })
}

fn signs(s: Option<&str>, len: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    match s {
        Some(s) => parse_list(s, flag),
        None => Ok(vec![1.0; len]),
    }
}

fn verify_reports(a: &VerifyArgs, suite: Suite) -> Result<Vec<ProbeReport>, CliError> {
    let seed = a.seed.unwrap_or(0);
    match suite {
        Suite::Sandwich => {
            let dims: Vec<(usize, usize)> = match (a.d, a.k) {
                (Some(d), Some(k)) => vec![(d, k)],
                _ => [2, 5, 20].iter().flat_map(|&d| [1, 2, 5].map(|k| (d, k))).collect(),
            };
            Ok(vec![sandwich_probe(&dims, a.samples.unwrap_or(1000), seed)?])
        }
        Suite::CriticalSets => {
            let sv = parse_list(a.singular_values.as_deref().unwrap_or("1"), "singular-values")?;
            let (d, k) = (a.d.unwrap_or(sv.len()), a.k.unwrap_or(sv.len()));
            let mat = diag_matrix(&sv, d, k);
            let rank = sv.iter().filter(|&&s| s != 0.0).count();
            let q = signs(a.q.as_deref(), rank, "q")?;
            let q_prime = match a.q_prime.as_deref() {
                Some(s) => parse_list(s, "q-prime")?,
                None => {
                    let mut v = q.clone();
                    if let Some(first) = v.first_mut() {
                        *first = -*first;
                    }
                    v
                }
            };
            let samples = a.samples.unwrap_or(100);
            let min_dist = critical_set_separation_probe(&mat, &q, &q_prime, samples, seed)?;
            let mut rep = ProbeReport::new(
                "critical-sets",
                json!({ "singular_values": sv, "d": d, "K": k, "q": q, "q_prime": q_prime, "seed": seed }),
            );
            rep.sample_count = samples;
            rep.min_ratio = Some(min_dist);
            rep.pass = min_dist >= SEPARATION_FLOOR;
            rep.violation_count = usize::from(!rep.pass);
            Ok(vec![rep])
        }
        Suite::ErrorBound => {
            let mat = match a.singular_values.as_deref() {
                Some(s) => {
                    let sv = parse_list(s, "singular-values")?;
                    diag_matrix(&sv, a.d.unwrap_or(sv.len()), a.k.unwrap_or(sv.len()))
                }
                None => gaussian_data(a.d.unwrap_or(5), a.k.unwrap_or(1), seed).to_dense(),
            };
            let rank = (0..mat.cols().min(mat.rows())).filter(|&i| mat.col(i).iter().any(|&v| v != 0.0)).count();
            let q = signs(a.q.as_deref(), rank, "q")?;
            let samples = a.samples.unwrap_or(1000);
            Ok(vec![error_bound_probe(&mat, &q, samples, a.radius.unwrap_or(0.9), seed)?])
        }
        Suite::Kl => {
            let (n, d, k) = (a.n.unwrap_or(3), a.d.unwrap_or(4), a.k.unwrap_or(2));
            let samples = a.samples.unwrap_or(200);
            (0..a.instances.unwrap_or(1) as u64)
                .map(|i| {
                    let x = gaussian_data(d, n, seed.wrapping_add(i));
                    let oracle = enumerate_oracle(&x, k)?;
                    let probe = kl_ratio_probe(&x, &oracle.q_best, &KL_RADII, samples, seed.wrapping_add(i))?;
                    Ok(probe.report(
                        "kl",
                        json!({ "n": n, "d": d, "K": k, "instance": i, "radii": KL_RADII, "samples": samples }),
                    ))
                })
                .collect()
        }
        Suite::Audit => {
            let spec = FixedEffectSpec {
                n: a.n.unwrap_or(100),
                d: a.d.unwrap_or(40),
                k: a.k.unwrap_or(5),
                sigma: a.sigma.unwrap_or(0.5),
                seed,
            };
            let fx = gen_fixed_effect(&spec)?;
            let inst = ProblemInstance::new(fx.x, spec.k)?;
            let s = spectral_norm(&inst.x, NORM_REL_TOL)?;
            let mut flags = a.solver.clone();
            flags.alpha = flags.alpha.or(Some(1.0));
            flags.beta = flags.beta.or(Some(1.5 * s * s));
            flags.gamma = flags.gamma.or(Some(0.3));
            flags.theorem_mode = Some(true);
            let cfg = solver_config(parse_method(a.method.as_deref())?, &flags, seed);
            let (p0, q0) = initial_point(&inst, seed)?;
            let (_, audit) = decrease_and_error_audit(&inst, &cfg, &p0, &q0)?;
            Ok(vec![audit.probe_report()])
        }
        Suite::Oracle => {
            let (n, d, k) = (a.n.unwrap_or(3), a.d.unwrap_or(4), a.k.unwrap_or(2));
            let mut flags = a.solver.clone();
            flags.alpha = flags.alpha.or(Some(1e-5));
            flags.beta = flags.beta.or(Some(10.0));
            flags.gamma = flags.gamma.or(Some(0.5));
            flags.tol = flags.tol.or(Some(1e-12));
            flags.max_iter = flags.max_iter.or(Some(20_000));
            let cfg = solver_config(parse_method(a.method.as_deref())?, &flags, seed);
            let instances = a.instances.unwrap_or(10);
            let restarts = a.restarts.unwrap_or(20);
            Ok(vec![oracle_agreement_probe(n, d, k, instances, restarts, &cfg, seed)?])
        }
    }
}

pub fn verify(a: VerifyArgs) -> Result<Outcome, CliError> {
    let suite = require(a.suite, "suite")?;
    let reports = verify_reports(&a, suite)?;
    let pass = reports.iter().all(|r| r.pass);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "suite": suite,
        "pass": pass,
        "reports": reports,
    });
    emit(&doc, a.out.as_deref())?;
    Ok(if pass { Outcome::Done } else { Outcome::VerifyFailed })
}

pub fn cluster(a: ClusterArgs) -> Result<Outcome, CliError> {
    let (x, labels) = load_data(require(a.input.as_deref(), "input")?, a.features)?;
    let labels = labels.ok_or_else(|| CliError::Usage("cluster needs a labeled sparse text input".into()))?;
    let k = match (a.auto_k, a.k) {
        (Some(t), _) => choose_k_by_variance(&x, t)?.min(x.rows().min(x.cols())),
        (None, Some(k)) => k,
        (None, None) => return Err(CliError::Usage("give --K or --auto-K".into())),
    };
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let clusters = a.clusters.unwrap_or(distinct.len());
    let inst = ProblemInstance::new(x, k)?.with_labels(labels.clone())?;
    let seed = a.seed.unwrap_or(0);
    let cfg = solver_config(parse_method(a.method.as_deref())?, &a.solver, seed);
    let (p0, q0) = initial_point(&inst, seed)?;
    let res = run_solver(&inst, &cfg, &p0, &q0)?;
    let restarts = a.restarts.unwrap_or(DEFAULT_RESTARTS);
    let acc = kmeans_accuracy(&inst.x, &res.q_final, &labels, clusters, restarts, seed)?;
    let mut report = result_summary(&inst, &cfg, &res)?;
    report["schema_version"] = json!(SCHEMA_VERSION);
    report["command"] = json!("cluster");
    report["K"] = json!(k);
    report["clusters"] = json!(clusters);
    report["restarts"] = json!(restarts);
    report["accuracy"] = json!(acc.accuracy);
    report["wcss"] = json!(acc.wcss);
    report["degenerate"] = json!(acc.degenerate);
    emit(&report, a.out.as_deref())?;
    Ok(if res.converged { Outcome::Done } else { Outcome::NotConverged })
}
