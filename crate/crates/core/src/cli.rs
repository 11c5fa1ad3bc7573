//! Command-line front end: `analyze`, `simulate` and `validate`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
//! error. Messages go to standard error; reports go to files (`validate`
//! prints its diagnostics to standard output).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{estimate, EstimatorConfig};
use crate::data::{impute_missing, ingest_reader, TrialDataset};
use crate::error::{Error, ErrorKind, Result};
use crate::estimators::{ContrastKind, Diagnostics, PiSpec};
use crate::simulation::{run_monte_carlo, write_replicate_csv, SimulationSpec, SCHEMA_VERSION};

/// A pre-specified analysis: which file columns to use and how to estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisPlan {
    pub outcome: String,
    pub arm: String,
    pub covariates: Vec<String>,
    /// Mean-impute missing covariates and add missingness indicators.
    #[serde(default)]
    pub impute_missing: bool,
    pub config: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub method: String,
    pub contrast: ContrastKind,
    pub theta_hat: f64,
    pub mu1_hat: f64,
    pub mu0_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerArm<T> {
    pub arm1: T,
    pub arm0: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub plan: AnalysisPlan,
    pub plan_sha256: String,
    pub data_sha256: String,
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub estimate: EstimateSummary,
    pub selected_covariates: PerArm<Option<Vec<String>>>,
    pub model_columns: PerArm<Vec<String>>,
    pub fold_seed: Option<u64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityCheck {
    pub n: usize,
    pub candidate_terms: usize,
    /// `sqrt(n) / ln(max(p, n))`; supports larger than this are flagged.
    pub support_bound: f64,
    pub exceeded_by_full_model: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub schema_version: String,
    pub valid: bool,
    pub plan_sha256: String,
    pub positivity_bounds: (f64, f64),
    pub ultra_sparsity: Option<SparsityCheck>,
    pub warnings: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_config_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))
}

fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::config(what, e.to_string()))
}

fn write_json<T: Serialize>(value: &T, out: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(out, text)?;
    Ok(())
}

fn load_dataset(plan: &AnalysisPlan, bytes: &[u8]) -> Result<TrialDataset> {
    let d = ingest_reader(bytes, &plan.outcome, &plan.arm, &plan.covariates)?;
    if plan.impute_missing {
        impute_missing(&d)
    } else {
        d.ensure_complete()?;
        Ok(d)
    }
}

pub fn cmd_analyze(data: &Path, plan_path: &Path, out: &Path) -> Result<AnalysisReport> {
    let plan_bytes = read_config_file(plan_path)?;
    let plan: AnalysisPlan = parse_json(&plan_bytes, "plan")?;
    plan.config.validate()?;
    let data_bytes = std::fs::read(data)?;
    let d = load_dataset(&plan, &data_bytes)?;
    let r = estimate(&d, &plan.config)?;
    let diag = r.diagnostics;
    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION.to_string(),
        plan_sha256: sha256_hex(&plan_bytes),
        data_sha256: sha256_hex(&data_bytes),
        n: d.n(),
        n_treated: d.arm_size(1),
        n_control: d.arm_size(0),
        estimate: EstimateSummary {
            method: r.method,
            contrast: diag.contrast,
            theta_hat: r.theta_hat,
            mu1_hat: r.mu1_hat,
            mu0_hat: r.mu0_hat,
            se: r.se,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
        },
        selected_covariates: PerArm {
            arm1: diag.selection_arm1.as_ref().map(|s| s.selected_columns.clone()),
            arm0: diag.selection_arm0.as_ref().map(|s| s.selected_columns.clone()),
        },
        model_columns: PerArm {
            arm1: diag.model_columns_arm1.clone(),
            arm0: diag.model_columns_arm0.clone(),
        },
        fold_seed: diag.fold_plan.as_ref().map(|f| f.seed),
        diagnostics: diag,
        plan,
    };
    write_json(&report, out)?;
    Ok(report)
}

pub fn cmd_simulate(spec_path: &Path, out: &Path, threads: Option<usize>, replicates_csv: Option<&Path>) -> Result<()> {
    let spec: SimulationSpec = parse_json(&read_config_file(spec_path)?, "spec")?;
    let run = run_monte_carlo(&spec, threads)?;
    write_json(&run.report, out)?;
    if let Some(path) = replicates_csv {
        write_replicate_csv(&run.records, std::fs::File::create(path)?)?;
    }
    Ok(())
}

/// Check a plan without estimating. With data, also checks that every named
/// column exists and reports the ultra-sparsity bound for its size.
pub fn cmd_validate(plan_path: &Path, data: Option<&Path>) -> Result<ValidationReport> {
    let plan_bytes = read_config_file(plan_path)?;
    let plan: AnalysisPlan = parse_json(&plan_bytes, "plan")?;
    let mut warnings = plan.config.validate()?;
    let ultra_sparsity = match data {
        None => None,
        Some(path) => {
            let d = load_dataset(&plan, &std::fs::read(path)?)?;
            let names = plan.config.features.expanded_names(d.column_names())?;
            if let PiSpec::Parametric { columns } = &plan.config.pi {
                if let Some(c) = columns.iter().find(|c| !names.contains(c)) {
                    return Err(Error::config("pi.columns", format!("{c:?} is not an expanded covariate")));
                }
            }
            let n = d.n();
            let bound = (n as f64).sqrt() / (names.len().max(n) as f64).ln();
            let exceeded = names.len() as f64 > bound;
            if exceeded {
                warnings.push(format!(
                    "{} candidate terms exceed the ultra-sparsity bound {bound:.2}; rely on selection to keep the support small",
                    names.len()
                ));
            }
            Some(SparsityCheck {
                n,
                candidate_terms: names.len(),
                support_bound: bound,
                exceeded_by_full_model: exceeded,
            })
        }
    };
    Ok(ValidationReport {
        schema_version: SCHEMA_VERSION.to_string(),
        valid: true,
        plan_sha256: sha256_hex(&plan_bytes),
        positivity_bounds: (crate::estimators::RHO, 1.0 - crate::estimators::RHO),
        ultra_sparsity,
        warnings,
    })
}

#[derive(Debug, Parser)]
#[command(name = "trialcraft", version, about = "Covariate-adjusted treatment effect estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the treatment effect in a CSV file under a JSON plan.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment described by a JSON spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "TRIALCRAFT_THREADS")]
        threads: Option<usize>,
        /// Also write per-replicate estimates as CSV.
        #[arg(long)]
        replicates_csv: Option<PathBuf>,
    },
    /// Check a plan for consistency, positivity and sparsity.
    Validate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Estimation => 4,
    }
}

/// Parse arguments, run the command, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Analyze { data, plan, out } => cmd_analyze(&data, &plan, &out).map(|_| ()),
        Command::Simulate {
            spec,
            out,
            threads,
            replicates_csv,
        } => cmd_simulate(&spec, &out, threads, replicates_csv.as_deref()),
        Command::Validate { plan, data } => cmd_validate(&plan, data.as_deref()).and_then(|report| {
            let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
            println!("{text}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("trialcraft: {e}");
            exit_code(&e)
        }
    }
}
