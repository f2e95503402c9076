use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "l1pca", version, about = "L1-norm principal component analysis")]
pub struct Cli {
    /// JSON file with settings for the subcommand; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic fixed-effect instance.
    Generate(GenerateArgs),
    /// Run one solver and export its trace and result.
    Solve(SolveArgs),
    /// Run several solvers from a shared start point.
    Compare(CompareArgs),
    /// Run a numerical verification suite.
    Verify(VerifyArgs),
    /// Solve, project, cluster and score against labels.
    Cluster(ClusterArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Suite {
    Sandwich,
    CriticalSets,
    ErrorBound,
    Kl,
    Audit,
    Oracle,
}

/// Step sizes and stopping rule shared by the solver commands.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Extrapolation parameter (PAMe).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha_star: Option<f64>,
    #[arg(long)]
    pub beta_star: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Enforce the step-size and extrapolation conditions of the convergence theorem.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub theorem_mode: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Standard deviation of the Laplace noise.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveArgs {
    /// Data matrix: `.bin` dense binary, anything else sparse labeled text.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Feature count for sparse text input.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    /// Start-point seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the trace, result and final `Q`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub trace_format: Option<TraceFormatArg>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    /// Comma-separated methods, or `all`.
    #[arg(long)]
    pub methods: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sampling radius for the error-bound suite.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Comma-separated singular values of `A`.
    #[arg(long)]
    pub singular_values: Option<String>,
    /// Comma-separated ±1 signs selecting a critical set.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub q_prime: Option<String>,
    /// Number of random instances for the oracle and kl suites.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Solver restarts per oracle instance.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    /// Report destination in addition to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterArgs {
    /// Sparse labeled text file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Choose `K` by captured variance with this threshold.
    #[arg(long = "auto-K", num_args = 0..=1, default_missing_value = "0.8", value_name = "THRESHOLD")]
    #[serde(rename = "auto_K")]
    pub auto_k: Option<f64>,
    #[arg(long)]
    pub features: Option<usize>,
    /// Number of clusters; defaults to the number of distinct labels.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverFlags,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays the flags that were given on top of the config file.
pub fn merge_with_file<T>(flags: T, file: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(path) = file else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut base: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(CliError::Usage(format!("config {} must hold a JSON object", path.display()))),
        Err(e) => return Err(CliError::Usage(format!("config {}: {e}", path.display()))),
    };
    let known = match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    if let Some(bad) = base.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("unknown key '{bad}' in config {}", path.display())));
    }
    if let Ok(Value::Object(given)) = serde_json::to_value(&flags) {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}
