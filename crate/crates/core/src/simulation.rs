//! Data-generating processes and the Monte Carlo harness.
//!
//! Replicate `r` draws its data from a ChaCha stream keyed by
//! `SHA-256(master_seed || r)`, and results are aggregated in replicate order,
//! so a report depends only on its inputs and never on the thread count.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{estimate, EstimatorConfig, EstimatorId};
use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::estimators::{ContrastKind, PiSpec};
use crate::glm::GlmFamily;
use crate::linalg::{expit, mean, sample_variance};
use crate::variance::Z_975;

pub const SCHEMA_VERSION: &str = "1";
pub const MIN_REPLICATES: usize = 100;
/// Draws used by the plug-in oracle for true effects without a closed form.
pub const ORACLE_DRAWS: usize = 10_000_000;
const ORACLE_SEED: u64 = 0x7472_6961_6c5f_7468;

/// Coefficient on the misspecified terms of the quadratic mechanism.
pub const QUADRATIC_WEIGHT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

impl OutcomeKind {
    pub fn family(self) -> GlmFamily {
        match self {
            OutcomeKind::Continuous => GlmFamily::Gaussian,
            OutcomeKind::Binary => GlmFamily::Binomial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// `m_z(x) = a_z + (x_1 + .. + x_k)/sqrt(k)` with `k = min(p, 3)`.
    Linear,
    /// Linear plus `w (x_1^2 - 1) + w x_1 x_2`.
    Quadratic,
    /// The linear signal with no arm effect at all.
    NullEffect,
    /// Strongly prognostic, curved `x_1` with an arm-by-`x_1` interaction.
    PsInformative,
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub pi: f64,
    pub outcome_kind: OutcomeKind,
    pub mechanism: Mechanism,
    /// Arm-1 shift of the regression (linear predictor scale for binary).
    pub effect_size: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    Analytic,
    Registry,
    Oracle,
    Supplied,
}

/// Plug-in oracle values (10^7 draws, seed `ORACLE_SEED`) for binary
/// mechanisms: (mechanism, effect size, active covariates, theta).
const THETA_REGISTRY: &[(Mechanism, f64, usize, f64)] = &[
    (Mechanism::Linear, 0.5, 3, 0.10202347215307085),
    (Mechanism::Linear, 1.0, 3, 0.19673402237887821),
    (Mechanism::Quadratic, 0.5, 3, 0.09475948785268176),
    (Mechanism::Quadratic, 1.0, 3, 0.18832873123983002),
    (Mechanism::PsInformative, 0.5, 3, 0.07089538921303845),
    (Mechanism::PsInformative, 1.0, 3, 0.14985703516356222),
];

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: String| Err(Error::config(format!("dgp.{f}"), m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return field("name", format!("{:?} is not an identifier", self.name));
        }
        if self.n < 4 {
            return field("n", format!("{} is too small to populate both arms", self.n));
        }
        if self.p == 0 {
            return field("p", "at least one covariate is required".into());
        }
        if !(0.05..=0.95).contains(&self.pi) {
            return field("pi", format!("{} lies outside [0.05, 0.95]", self.pi));
        }
        if !self.effect_size.is_finite() {
            return field("effect_size", "must be finite".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return field("noise_sd", "must be finite and non-negative".into());
        }
        if self.mechanism == Mechanism::Quadratic && self.p < 2 {
            return field("p", "the quadratic mechanism needs at least 2 covariates".into());
        }
        if self.mechanism == Mechanism::NullEffect && self.effect_size != 0.0 {
            return field("effect_size", "must be 0 under the null mechanism".into());
        }
        if let Some(t) = self.true_theta {
            if !t.is_finite() {
                return field("true_theta", "must be finite".into());
            }
            if let Some(a) = self.analytic_theta() {
                if (t - a).abs() > 1e-12 {
                    return field("true_theta", format!("{t} contradicts the mechanism, which implies {a}"));
                }
            }
        }
        Ok(())
    }

    /// Number of leading covariates the regression depends on.
    pub fn active_covariates(&self) -> usize {
        self.p.min(3)
    }

    /// `m_z(x)` for one covariate row.
    pub fn regression(&self, x: &[f64], z: u8) -> f64 {
        let k = self.active_covariates();
        let shift = if z == 1 { self.effect_size } else { 0.0 };
        let linear = x[..k].iter().sum::<f64>() / (k as f64).sqrt();
        match self.mechanism {
            Mechanism::Linear => shift + linear,
            Mechanism::NullEffect => linear,
            Mechanism::Quadratic => {
                shift + linear + QUADRATIC_WEIGHT * (x[0] * x[0] - 1.0) + QUADRATIC_WEIGHT * x[0] * x[1]
            }
            Mechanism::PsInformative => {
                let rest: f64 = x[1..k].iter().sum();
                shift + 1.5 * x[0] + 0.5 * (x[0] * x[0] - 1.0) + 0.5 * z as f64 * x[0] + 0.25 * rest
            }
        }
    }

    pub fn mean_outcome(&self, x: &[f64], z: u8) -> f64 {
        let m = self.regression(x, z);
        match self.outcome_kind {
            OutcomeKind::Continuous => m,
            OutcomeKind::Binary => expit(m),
        }
    }

    /// Closed-form effect where one exists: every continuous mechanism has
    /// mean-zero covariate terms, and the null has no effect on any scale.
    pub fn analytic_theta(&self) -> Option<f64> {
        match (self.mechanism, self.outcome_kind) {
            (Mechanism::NullEffect, _) => Some(0.0),
            (_, OutcomeKind::Continuous) => Some(self.effect_size),
            (_, OutcomeKind::Binary) => None,
        }
    }

    fn registry_theta(&self) -> Option<f64> {
        THETA_REGISTRY
            .iter()
            .find(|(m, e, k, _)| *m == self.mechanism && *e == self.effect_size && *k == self.active_covariates())
            .map(|entry| entry.3)
    }

    /// The true effect and where it came from.
    pub fn resolve_true_theta(&self) -> Result<(f64, ThetaSource)> {
        self.validate()?;
        if let Some(t) = self.analytic_theta() {
            return Ok((t, ThetaSource::Analytic));
        }
        if let Some(t) = self.true_theta {
            return Ok((t, ThetaSource::Supplied));
        }
        if let Some(t) = self.registry_theta() {
            return Ok((t, ThetaSource::Registry));
        }
        Ok((plug_in_theta(self, ORACLE_DRAWS, ORACLE_SEED), ThetaSource::Oracle))
    }
}

/// Brute-force `E[mean_outcome(X, 1) - mean_outcome(X, 0)]` over `draws`
/// standard normal covariate vectors.
pub fn plug_in_theta(spec: &DgpSpec, draws: usize, seed: u64) -> f64 {
    let k = spec.active_covariates();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = vec![0.0; k];
    let mut total = 0.0;
    for _ in 0..draws {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        total += spec.mean_outcome(&x, 1) - spec.mean_outcome(&x, 0);
    }
    total / draws as f64
}

/// One simulated trial: iid standard normal covariates, simple
/// randomization independent of them, then outcomes from the mechanism.
pub fn generate_dataset(spec: &DgpSpec, seed: u64) -> Result<TrialDataset> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (n, p) = (spec.n, spec.p);
    let mut rows = vec![0.0; n * p];
    for v in rows.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let z: Vec<u8> = (0..n).map(|_| rng.random_bool(spec.pi) as u8).collect();
    let y = (0..n)
        .map(|i| {
            let row = &rows[i * p..(i + 1) * p];
            let m = spec.regression(row, z[i]);
            match spec.outcome_kind {
                OutcomeKind::Continuous => m + spec.noise_sd * rng.sample::<f64, _>(StandardNormal),
                OutcomeKind::Binary => rng.random_bool(expit(m)) as u8 as f64,
            }
        })
        .collect();
    let x = DMatrix::from_row_slice(n, p, &rows);
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    TrialDataset::new(y, z, x, names)
}

/// Seed of replicate `r`: the first 8 bytes of `SHA-256(master || r)`,
/// both little-endian.
pub fn replicate_seed(master_seed: u64, replicate: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((replicate as u64).to_le_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub replicates: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mc_se_of_bias: f64,
    pub empirical_sd: f64,
    pub mean_estimated_se: f64,
    pub coverage_95: f64,
    pub rejection_rate: f64,
    /// `mean_estimated_se / empirical_sd`.
    pub se_calibration: f64,
}

/// Summaries of replicate estimates against the truth. Intervals are
/// `estimate +/- 1.96 se`.
pub fn compute_metrics(estimates: &[f64], ses: &[f64], true_theta: f64) -> Result<Metrics> {
    if estimates.len() != ses.len() {
        return Err(Error::LengthMismatch(format!(
            "{} estimates but {} standard errors",
            estimates.len(),
            ses.len()
        )));
    }
    if estimates.len() < 2 {
        return Err(Error::LengthMismatch("at least 2 replicates are required".into()));
    }
    let r = estimates.len();
    let m = mean(estimates);
    let sd = sample_variance(estimates).sqrt();
    let mean_se = mean(ses);
    let mut covered = 0usize;
    let mut rejected = 0usize;
    for (&t, &s) in estimates.iter().zip(ses) {
        let half = Z_975 * s;
        if (t - true_theta).abs() <= half {
            covered += 1;
        }
        if t.abs() > half {
            rejected += 1;
        }
    }
    Ok(Metrics {
        replicates: r,
        mean_estimate: m,
        bias: m - true_theta,
        mc_se_of_bias: sd / (r as f64).sqrt(),
        empirical_sd: sd,
        mean_estimated_se: mean_se,
        coverage_95: covered as f64 / r as f64,
        rejection_rate: rejected as f64 / r as f64,
        se_calibration: mean_se / sd,
    })
}

/// `Var(unadjusted) / Var(adjusted)` over paired replicates.
pub fn relative_efficiency(adjusted: &[f64], unadjusted: &[f64]) -> Result<f64> {
    if adjusted.len() != unadjusted.len() {
        return Err(Error::LengthMismatch(format!(
            "{} adjusted but {} unadjusted estimates",
            adjusted.len(),
            unadjusted.len()
        )));
    }
    if adjusted.len() < 2 {
        return Err(Error::LengthMismatch("at least 2 replicates are required".into()));
    }
    Ok(sample_variance(unadjusted) / sample_variance(adjusted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedEstimator {
    pub label: String,
    pub config: EstimatorConfig,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub dgp: DgpSpec,
    pub estimators: Vec<NamedEstimator>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Also run the unadjusted estimator on every replicate, for relative
    /// efficiency.
    #[serde(default = "default_true")]
    pub compare_unadjusted: bool,
}

pub const UNADJUSTED_LABEL: &str = "unadjusted_reference";

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replicates < MIN_REPLICATES {
            return Err(Error::config(
                "replicates",
                format!("{} is below the minimum of {MIN_REPLICATES}", self.replicates),
            ));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "at least one estimator is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in self.estimators.iter().enumerate() {
            if e.label.is_empty() || e.label == UNADJUSTED_LABEL || !seen.insert(e.label.as_str()) {
                return Err(Error::config(format!("estimators[{i}].label"), format!("{:?} is empty, reserved or repeated", e.label)));
            }
            if e.config.contrast != ContrastKind::RiskDifference {
                return Err(Error::config(
                    format!("estimators[{i}].config.contrast"),
                    "the harness scores estimates against the mean difference only",
                ));
            }
            e.config.validate().map_err(|err| match err {
                Error::Config { field, message } => Error::config(format!("estimators[{i}].config.{field}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    fn unadjusted_config(&self) -> EstimatorConfig {
        EstimatorConfig::new(EstimatorId::Unadjusted, self.dgp.outcome_kind.family(), PiSpec::EstimatedOverall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub label: String,
    pub config: EstimatorConfig,
    pub metrics: Metrics,
    pub relative_efficiency_vs_unadjusted: Option<f64>,
    pub failures: usize,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema_version: String,
    pub dgp: DgpSpec,
    pub true_theta: f64,
    pub true_theta_source: ThetaSource,
    pub replicates: usize,
    pub master_seed: u64,
    pub unadjusted: Option<EstimatorReport>,
    pub estimators: Vec<EstimatorReport>,
    pub seed_log: Vec<u64>,
}

/// One estimator's outcome on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub label: String,
    pub theta_hat: Option<f64>,
    pub se: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub report: MonteCarloReport,
    pub records: Vec<ReplicateRecord>,
}

type Outcome = std::result::Result<(f64, f64), String>;

fn run_replicate(spec: &SimulationSpec, configs: &[EstimatorConfig], seed: u64) -> Vec<Outcome> {
    let d = match generate_dataset(&spec.dgp, seed) {
        Ok(d) => d,
        Err(e) => return vec![Err(format!("data generation: {e}")); configs.len()],
    };
    configs
        .iter()
        .map(|cfg| {
            let mut cfg = cfg.clone();
            cfg.seed ^= seed;
            estimate(&d, &cfg).map(|r| (r.theta_hat, r.se)).map_err(|e| e.to_string())
        })
        .collect()
}

struct Column<'a> {
    label: &'a str,
    config: &'a EstimatorConfig,
    outcomes: Vec<&'a Outcome>,
}

fn summarize(col: &Column, theta: f64, reference: Option<&Column>) -> Result<EstimatorReport> {
    let total = col.outcomes.len();
    let failed: Vec<&String> = col.outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let first = failed.first().map(|s| s.to_string());
    if failed.len() * 100 > total {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total,
            first: format!("{}: {}", col.label, first.unwrap_or_default()),
        });
    }
    let ok: Vec<(f64, f64)> = col.outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let est: Vec<f64> = ok.iter().map(|o| o.0).collect();
    let ses: Vec<f64> = ok.iter().map(|o| o.1).collect();
    let metrics = compute_metrics(&est, &ses, theta)?;
    let re = match reference {
        Some(refc) => {
            let (a, u): (Vec<f64>, Vec<f64>) = col
                .outcomes
                .iter()
                .zip(&refc.outcomes)
                .filter_map(|(a, u)| Some((a.as_ref().ok()?.0, u.as_ref().ok()?.0)))
                .unzip();
            Some(relative_efficiency(&a, &u)?)
        }
        None => None,
    };
    Ok(EstimatorReport {
        label: col.label.to_string(),
        config: col.config.clone(),
        metrics,
        relative_efficiency_vs_unadjusted: re,
        failures: failed.len(),
        first_failure: first,
    })
}

/// Run every configured estimator on `spec.replicates` simulated trials.
/// `threads = None` or `Some(0)` lets the pool pick.
pub fn run_monte_carlo(spec: &SimulationSpec, threads: Option<usize>) -> Result<MonteCarloRun> {
    spec.validate()?;
    let (theta, source) = spec.dgp.resolve_true_theta()?;
    let mut configs: Vec<EstimatorConfig> = spec.estimators.iter().map(|e| e.config.clone()).collect();
    let mut labels: Vec<&str> = spec.estimators.iter().map(|e| e.label.as_str()).collect();
    let unadjusted = spec.unadjusted_config();
    if spec.compare_unadjusted {
        configs.push(unadjusted.clone());
        labels.push(UNADJUSTED_LABEL);
    }

    let seeds: Vec<u64> = (0..spec.replicates).map(|r| replicate_seed(spec.master_seed, r)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let outcomes: Vec<Vec<Outcome>> =
        pool.install(|| seeds.par_iter().map(|&s| run_replicate(spec, &configs, s)).collect());

    let columns: Vec<Column> = (0..configs.len())
        .map(|j| Column {
            label: labels[j],
            config: &configs[j],
            outcomes: outcomes.iter().map(|row| &row[j]).collect(),
        })
        .collect();
    let (reference, adjusted) = if spec.compare_unadjusted {
        let (a, r) = columns.split_at(columns.len() - 1);
        (Some(&r[0]), a)
    } else {
        (None, &columns[..])
    };
    let estimators = adjusted
        .iter()
        .map(|c| summarize(c, theta, reference))
        .collect::<Result<Vec<_>>>()?;
    let unadjusted_report = reference.map(|c| summarize(c, theta, None)).transpose()?;

    let mut records = Vec::with_capacity(spec.replicates * configs.len());
    for (r, row) in outcomes.iter().enumerate() {
        for (j, o) in row.iter().enumerate() {
            records.push(ReplicateRecord {
                replicate: r,
                seed: seeds[r],
                label: labels[j].to_string(),
                theta_hat: o.as_ref().ok().map(|v| v.0),
                se: o.as_ref().ok().map(|v| v.1),
                error: o.as_ref().err().cloned(),
            });
        }
    }
    let report = MonteCarloReport {
        schema_version: SCHEMA_VERSION.to_string(),
        dgp: spec.dgp.clone(),
        true_theta: theta,
        true_theta_source: source,
        replicates: spec.replicates,
        master_seed: spec.master_seed,
        unadjusted: unadjusted_report,
        estimators,
        seed_log: seeds,
    };
    Ok(MonteCarloRun { report, records })
}

/// Per-replicate estimates as CSV, one row per replicate and estimator.
pub fn write_replicate_csv<W: Write>(records: &[ReplicateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["replicate", "seed", "label", "theta_hat", "se", "error"]).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for rec in records {
        w.write_record([
            rec.replicate.to_string(),
            rec.seed.to_string(),
            rec.label.clone(),
            opt(rec.theta_hat),
            opt(rec.se),
            rec.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
