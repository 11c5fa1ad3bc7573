//! Point estimators of `theta = E(Y | Z = 1) - E(Y | Z = 0)`. Each returns
//! per-participant contributions for both arm means so standard errors and
//! contrasts are computed the same way everywhere.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{gather, select_rows, FoldPlan, TrialDataset};
use crate::error::{Error, Result};
use crate::glm::{clamp_probabilities, fit_ml, fit_ml_no_intercept, GlmFamily, GlmFit};
use crate::learners::Learner;
use crate::linalg::mean;
use crate::selection::{
    post_selection_refit, post_selection_refit_least_squares, select, SelectionResult, Selector, SubsetModel,
};
use crate::variance::{
    aipw_contributions, crossfit_contributions, fold_treated_fraction, parametric_ps_contributions,
    small_sample_factor, strong_null_contributions, ArmContributions, FoldPi, FoldPropensity, Z_975,
};

/// Positivity bound on any randomization probability.
pub const RHO: f64 = 0.01;
pub const PS_CLAMP: (f64, f64) = (0.01, 0.99);
pub const TMLE_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);

/// How the randomization probability enters the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PiSpec {
    Known { pi: f64 },
    EstimatedOverall,
    EstimatedPerFold,
    /// Logistic model of Z on these columns, pre-specified.
    Parametric { columns: Vec<String> },
}

impl PiSpec {
    pub fn check_positivity(&self) -> Result<()> {
        if let PiSpec::Known { pi } = *self {
            if !(RHO..=1.0 - RHO).contains(&pi) {
                return Err(Error::config(
                    "pi.pi",
                    format!("known probability {pi} violates positivity: must lie in [{RHO}, {}]", 1.0 - RHO),
                ));
            }
        }
        Ok(())
    }

    fn mode(&self) -> &'static str {
        match self {
            PiSpec::Known { .. } => "known",
            PiSpec::EstimatedOverall => "estimated_overall",
            PiSpec::EstimatedPerFold => "estimated_per_fold",
            PiSpec::Parametric { .. } => "parametric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    #[default]
    RiskDifference,
    LogRiskRatio,
    LogOddsRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub selection_arm1: Option<SelectionResult>,
    pub selection_arm0: Option<SelectionResult>,
    /// Columns of the final outcome model per arm, forced columns included.
    pub model_columns_arm1: Vec<String>,
    pub model_columns_arm0: Vec<String>,
    pub fold_plan: Option<FoldPlan>,
    /// Overall, known, per-fold, or per-fold mean fitted probabilities.
    pub pi_hat: Vec<f64>,
    pub pi_mode: String,
    pub clamped_predictions: usize,
    pub clamped_propensities: usize,
    /// TMLE fluctuation parameters (arm 1, arm 0).
    pub epsilon: Option<(f64, f64)>,
    pub fold_theta: Vec<f64>,
    pub variance_inflation: f64,
    pub contrast: ContrastKind,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    fn new(pi_mode: &str) -> Self {
        Self {
            selection_arm1: None,
            selection_arm0: None,
            model_columns_arm1: Vec::new(),
            model_columns_arm0: Vec::new(),
            fold_plan: None,
            pi_hat: Vec::new(),
            pi_mode: pi_mode.to_string(),
            clamped_predictions: 0,
            clamped_propensities: 0,
            epsilon: None,
            fold_theta: Vec::new(),
            variance_inflation: 1.0,
            contrast: ContrastKind::RiskDifference,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub mu1_hat: f64,
    pub mu0_hat: f64,
    /// Centered contributions for each arm mean.
    pub if_mu1: Vec<f64>,
    pub if_mu0: Vec<f64>,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: String,
    /// Predictions entering the estimator: updated for TMLE, out-of-fold for
    /// cross-fitting, the pooled model twice for the strong null.
    pub yhat1: Vec<f64>,
    pub yhat0: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    pub fn z_statistic(&self) -> f64 {
        self.theta_hat / self.se
    }

    pub fn covers(&self, theta: f64) -> bool {
        self.ci_low <= theta && theta <= self.ci_high
    }

    pub fn rejects_zero(&self) -> bool {
        !self.covers(0.0)
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: &str,
    mu1_hat: f64,
    mu0_hat: f64,
    contributions: ArmContributions,
    yhat1: Vec<f64>,
    yhat0: Vec<f64>,
    mut diagnostics: Diagnostics,
    inflation: f64,
) -> EstimateResult {
    let se = contributions.se() * inflation.sqrt();
    let (if_mu1, if_mu0) = contributions.into_centered();
    let theta_hat = mu1_hat - mu0_hat;
    diagnostics.variance_inflation = inflation;
    EstimateResult {
        theta_hat,
        mu1_hat,
        mu0_hat,
        if_mu1,
        if_mu0,
        se,
        ci_low: theta_hat - Z_975 * se,
        ci_high: theta_hat + Z_975 * se,
        method: method.to_string(),
        yhat1,
        yhat0,
        diagnostics,
    }
}

/// Options shared by the estimators that fit per-arm GLMs on the full data.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustOptions {
    pub selector: Selector,
    pub forced: Vec<String>,
    /// Fit Step 1b by least squares and use the explicit AIPW form.
    pub eem: bool,
    pub small_sample_correction: bool,
    /// Weight the Step 1b refit by the inverse fitted propensity.
    pub weights_from_ps: bool,
    pub seed: u64,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        Self {
            selector: Selector::None,
            forced: Vec::new(),
            eem: false,
            small_sample_correction: false,
            weights_from_ps: false,
            seed: 0,
        }
    }
}

pub fn overall_pi(d: &TrialDataset) -> f64 {
    d.arm_size(1) as f64 / d.n() as f64
}

fn resolve_columns(d: &TrialDataset, names: &[String]) -> Result<Vec<usize>> {
    names.iter().map(|n| d.column_index(n)).collect()
}

/// Probability used by a non-split estimator.
enum ResolvedPi {
    Known(f64),
    Overall(f64),
    Pointwise(PropensityFit),
}

impl ResolvedPi {
    fn values(&self, n: usize) -> Vec<f64> {
        match self {
            ResolvedPi::Known(p) | ResolvedPi::Overall(p) => vec![*p; n],
            ResolvedPi::Pointwise(ps) => ps.p_hat.clone(),
        }
    }

    fn summary(&self) -> Vec<f64> {
        match self {
            ResolvedPi::Known(p) | ResolvedPi::Overall(p) => vec![*p],
            ResolvedPi::Pointwise(ps) => vec![mean(&ps.p_hat)],
        }
    }
}

fn resolve_pi(d: &TrialDataset, pi: &PiSpec, method: &str, allow_parametric: bool) -> Result<ResolvedPi> {
    pi.check_positivity()?;
    match pi {
        PiSpec::Known { pi } => Ok(ResolvedPi::Known(*pi)),
        PiSpec::EstimatedOverall => Ok(ResolvedPi::Overall(overall_pi(d))),
        PiSpec::Parametric { columns } if allow_parametric => Ok(ResolvedPi::Pointwise(fit_propensity(d, columns)?)),
        other => Err(Error::config(
            "pi.mode",
            format!("{method} does not support probability mode {:?}", other.mode()),
        )),
    }
}

/// Difference in arm means.
pub fn estimate_unadjusted(d: &TrialDataset, pi: &PiSpec) -> Result<EstimateResult> {
    let rp = resolve_pi(d, pi, "unadjusted", false)?;
    let mut diag = Diagnostics::new(pi.mode());
    diag.pi_hat = rp.summary();
    let arm_mean = |a: u8| mean(&gather(d.y(), &d.arm_rows(a)));
    let (m1, m0) = (arm_mean(1), arm_mean(0));
    let yhat1 = vec![m1; d.n()];
    let yhat0 = vec![m0; d.n()];
    let c = aipw_contributions(d, &yhat1, &yhat0, &rp.values(d.n()));
    Ok(finish("unadjusted", m1, m0, c, yhat1, yhat0, diag, 1.0))
}

struct ArmFit {
    selection: SelectionResult,
    model: SubsetModel,
}

#[allow(clippy::too_many_arguments)]
fn fit_arm(
    d: &TrialDataset,
    arm: u8,
    family: GlmFamily,
    selector: &Selector,
    forced: &[usize],
    weights: Option<&[f64]>,
    least_squares: bool,
    seed: u64,
) -> Result<ArmFit> {
    let rows = d.arm_rows(arm);
    let x = select_rows(d.x(), &rows);
    let y = gather(d.y(), &rows);
    let w = weights.map(|w| gather(w, &rows));
    let names = d.column_names();
    let selection = select(&x, &y, family, selector, seed, None, names)?;
    let model = if least_squares {
        post_selection_refit_least_squares(&x, &y, family, &selection, forced, w.as_deref(), names)?
    } else {
        post_selection_refit(&x, &y, family, &selection, forced, w.as_deref(), names)?
    };
    Ok(ArmFit { selection, model })
}

fn inverse_ps_weights(d: &TrialDataset, p: &[f64]) -> Vec<f64> {
    d.z()
        .iter()
        .zip(p)
        .map(|(&z, &p)| if z == 1 { 1.0 / p } else { 1.0 / (1.0 - p) })
        .collect()
}

fn inflation(d: &TrialDataset, enabled: bool, p1: usize, p0: usize) -> Result<f64> {
    if enabled {
        small_sample_factor(d.arm_size(0), p0, d.arm_size(1), p1)
    } else {
        Ok(1.0)
    }
}

/// Per-arm fits for standardization, data-adaptive and TMLE estimators.
struct ArmModels {
    fit1: ArmFit,
    fit0: ArmFit,
    pi: ResolvedPi,
    diag: Diagnostics,
}

fn fit_arm_models(d: &TrialDataset, family: GlmFamily, pi: &PiSpec, opts: &AdjustOptions, method: &str, weighted: bool) -> Result<ArmModels> {
    d.ensure_complete()?;
    let parametric = matches!(pi, PiSpec::Parametric { .. });
    if opts.eem && parametric {
        return Err(Error::config("eem", "least-squares fitting cannot be combined with a parametric propensity score"));
    }
    if opts.weights_from_ps && !parametric {
        return Err(Error::config("weights_from_ps", "requires pi.mode = parametric"));
    }
    let rp = resolve_pi(d, pi, method, true)?;
    let forced = resolve_columns(d, &opts.forced)?;
    let mut diag = Diagnostics::new(pi.mode());
    diag.pi_hat = rp.summary();
    let weights = match (&rp, weighted && opts.weights_from_ps) {
        (ResolvedPi::Pointwise(ps), true) => {
            diag.clamped_propensities = ps.clamped;
            diag.warnings.push(
                "inverse-propensity weighted refit: standard errors assume the propensity model form is correct"
                    .into(),
            );
            Some(inverse_ps_weights(d, &ps.p_hat))
        }
        (ResolvedPi::Pointwise(ps), false) => {
            diag.clamped_propensities = ps.clamped;
            None
        }
        _ => None,
    };
    let fit1 = fit_arm(d, 1, family, &opts.selector, &forced, weights.as_deref(), opts.eem, opts.seed)?;
    let fit0 = fit_arm(d, 0, family, &opts.selector, &forced, weights.as_deref(), opts.eem, opts.seed)?;
    for (arm, fit) in [(1, &fit1), (0, &fit0)] {
        diag.warnings.extend(fit.selection.warnings.iter().map(|w| format!("arm {arm}: {w}")));
    }
    diag.model_columns_arm1 = fit1.model.fit.column_names.clone();
    diag.model_columns_arm0 = fit0.model.fit.column_names.clone();
    if opts.selector != Selector::None {
        diag.selection_arm1 = Some(fit1.selection.clone());
        diag.selection_arm0 = Some(fit0.selection.clone());
    }
    Ok(ArmModels { fit1, fit0, pi: rp, diag })
}

/// Per-arm Step 1a selection and Step 1b refit, then standardization over all
/// participants. With `eem` the refit minimizes squared error and the point
/// estimate is the AIPW form.
pub fn estimate_data_adaptive(d: &TrialDataset, family: GlmFamily, pi: &PiSpec, opts: &AdjustOptions) -> Result<EstimateResult> {
    estimate_with_arm_models(d, family, pi, opts, "data_adaptive")
}

/// Standardization with every covariate in both arm models.
pub fn estimate_standardization(d: &TrialDataset, family: GlmFamily, pi: &PiSpec, opts: &AdjustOptions) -> Result<EstimateResult> {
    if opts.selector != Selector::None {
        return Err(Error::config("selection", "standardization adjusts for every covariate; use data_adaptive to select"));
    }
    estimate_with_arm_models(d, family, pi, opts, "standardization")
}

fn estimate_with_arm_models(
    d: &TrialDataset,
    family: GlmFamily,
    pi: &PiSpec,
    opts: &AdjustOptions,
    method: &str,
) -> Result<EstimateResult> {
    let ArmModels { fit1, fit0, pi: rp, diag } = fit_arm_models(d, family, pi, opts, method, true)?;
    let yhat1 = fit1.model.predict(d.x())?;
    let yhat0 = fit0.model.predict(d.x())?;
    let c = aipw_contributions(d, &yhat1, &yhat0, &rp.values(d.n()));
    let (mu1, mu0) = if opts.eem {
        (mean(&c.mu1), mean(&c.mu0))
    } else {
        (mean(&yhat1), mean(&yhat0))
    };
    let infl = inflation(d, opts.small_sample_correction, fit1.model.n_slopes(), fit0.model.n_slopes())?;
    Ok(finish(method, mu1, mu0, c, yhat1, yhat0, diag, infl))
}

/// One-parameter fluctuation of initial predictions among `rows`. Without a
/// clever covariate the update is an intercept on the offset `g(init)`;
/// with one it is a slope on that covariate and no intercept. Returns the
/// fitted parameter and updated predictions for every participant.
pub fn tmle_update(
    init: &[f64],
    rows: &[usize],
    y: &[f64],
    family: GlmFamily,
    clever: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let offset: Vec<f64> = init.iter().map(|&m| family.link(m)).collect();
    let yr = gather(y, rows);
    let off = gather(&offset, rows);
    let eps = match clever {
        None => fit_ml(&DMatrix::zeros(rows.len(), 0), &yr, family, None, Some(&off))?.coefficients[0],
        Some(h) => {
            let hx = DMatrix::from_iterator(rows.len(), 1, rows.iter().map(|&i| h[i]));
            fit_ml_no_intercept(&hx, &yr, family, None, Some(&off))?.coefficients[0]
        }
    };
    let updated = offset
        .iter()
        .enumerate()
        .map(|(i, &o)| family.inverse_link(o + eps * clever.map_or(1.0, |h| h[i])))
        .collect();
    Ok((eps, updated))
}

fn clamp_initial(family: GlmFamily, p: &mut [f64]) -> usize {
    match family {
        GlmFamily::Binomial => clamp_probabilities(p, TMLE_CLAMP.0, TMLE_CLAMP.1),
        GlmFamily::Gaussian => 0,
    }
}

/// Targeted update of the Step 1a/1b predictions. With a parametric
/// propensity the update uses the clever covariate `1/p` (arm 1) or
/// `1/(1-p)` (arm 0).
pub fn estimate_tmle(d: &TrialDataset, family: GlmFamily, pi: &PiSpec, opts: &AdjustOptions) -> Result<EstimateResult> {
    let ArmModels { fit1, fit0, pi: rp, mut diag } = fit_arm_models(d, family, pi, opts, "tmle", false)?;
    let mut init1 = fit1.model.predict(d.x())?;
    let mut init0 = fit0.model.predict(d.x())?;
    diag.clamped_predictions = clamp_initial(family, &mut init1) + clamp_initial(family, &mut init0);
    let (h1, h0) = match &rp {
        ResolvedPi::Pointwise(ps) => (
            Some(ps.p_hat.iter().map(|p| 1.0 / p).collect::<Vec<_>>()),
            Some(ps.p_hat.iter().map(|p| 1.0 / (1.0 - p)).collect::<Vec<_>>()),
        ),
        _ => (None, None),
    };
    let (e1, yhat1) = tmle_update(&init1, &d.arm_rows(1), d.y(), family, h1.as_deref())?;
    let (e0, yhat0) = tmle_update(&init0, &d.arm_rows(0), d.y(), family, h0.as_deref())?;
    diag.epsilon = Some((e1, e0));
    let c = aipw_contributions(d, &yhat1, &yhat0, &rp.values(d.n()));
    let infl = inflation(d, opts.small_sample_correction, fit1.model.n_slopes(), fit0.model.n_slopes())?;
    Ok(finish("tmle", mean(&yhat1), mean(&yhat0), c, yhat1, yhat0, diag, infl))
}

pub const MAX_FOLDS: usize = 10;

fn check_fold_plan(d: &TrialDataset, folds: &FoldPlan) -> Result<()> {
    if !(2..=MAX_FOLDS).contains(&folds.k) {
        return Err(Error::config("folds.k", format!("K = {} must lie in [2, {MAX_FOLDS}]", folds.k)));
    }
    if folds.n() != d.n() {
        return Err(Error::LengthMismatch(format!("fold plan covers {} rows, dataset has {}", folds.n(), d.n())));
    }
    Ok(())
}

/// Stream key for the learner trained on fold `k`'s complement in `arm`.
fn learner_seed(seed: u64, k: usize, arm: u8) -> u64 {
    seed ^ (2 * k as u64 + arm as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Out-of-fold predictions under each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    pub yhat1: Vec<f64>,
    pub yhat0: Vec<f64>,
    pub clamped: usize,
}

/// For each fold, train one learner per arm on the complement and predict the
/// fold. Only complement rows reach the learner.
pub fn out_of_fold_predictions(
    d: &TrialDataset,
    learner: &dyn Learner,
    folds: &FoldPlan,
    family: GlmFamily,
    seed: u64,
) -> Result<OutOfFold> {
    d.ensure_complete()?;
    check_fold_plan(d, folds)?;
    let n = d.n();
    let mut yhat1 = vec![0.0; n];
    let mut yhat0 = vec![0.0; n];
    let mut clamped = 0;
    for k in 0..folds.k {
        let test = folds.fold(k);
        let train = folds.complement(k);
        let xt = select_rows(d.x(), &test);
        for arm in [1u8, 0] {
            let rows: Vec<usize> = train.iter().copied().filter(|&i| d.z()[i] == arm).collect();
            if rows.is_empty() {
                return Err(Error::DegenerateFold {
                    fold: k,
                    pi: fold_treated_fraction(d, &train),
                });
            }
            let model = learner.train(
                &select_rows(d.x(), &rows),
                &gather(d.y(), &rows),
                family,
                None,
                learner_seed(seed, k, arm),
            )?;
            let (pred, c) = model.predict_counted(&xt)?;
            clamped += c;
            let target = if arm == 1 { &mut yhat1 } else { &mut yhat0 };
            for (&i, p) in test.iter().zip(pred) {
                target[i] = p;
            }
        }
    }
    Ok(OutOfFold { yhat1, yhat0, clamped })
}

/// Cross-fit AIPW. Per-fold probabilities add the fold-mean correction terms;
/// a known probability drops them. A parametric spec dispatches to
/// [`estimate_crossfit_aipw_parametric_ps`].
pub fn estimate_crossfit_aipw(
    d: &TrialDataset,
    learner: &dyn Learner,
    folds: &FoldPlan,
    pi: &PiSpec,
    family: GlmFamily,
    seed: u64,
) -> Result<EstimateResult> {
    pi.check_positivity()?;
    let fold_pi = match pi {
        PiSpec::Known { pi } => FoldPi::Known(*pi),
        PiSpec::EstimatedPerFold => FoldPi::Estimated,
        PiSpec::Parametric { columns } => {
            return estimate_crossfit_aipw_parametric_ps(d, learner, folds, columns, family, seed)
        }
        PiSpec::EstimatedOverall => {
            return Err(Error::config(
                "pi.mode",
                "crossfit_aipw estimates the probability within each fold; use estimated_per_fold or known",
            ))
        }
    };
    check_fold_plan(d, folds)?;
    if fold_pi == FoldPi::Estimated {
        for k in 0..folds.k {
            let p = fold_treated_fraction(d, &folds.fold(k));
            if p <= 0.0 || p >= 1.0 {
                return Err(Error::DegenerateFold { fold: k, pi: p });
            }
        }
    }
    let oof = out_of_fold_predictions(d, learner, folds, family, seed)?;
    let parts = crossfit_contributions(&oof.yhat1, &oof.yhat0, d, folds, fold_pi)?;
    let mut diag = Diagnostics::new(pi.mode());
    diag.pi_hat = parts.pi.clone();
    diag.fold_plan = Some(folds.clone());
    diag.fold_theta = parts.fold_theta.clone();
    diag.clamped_predictions = oof.clamped;
    Ok(finish(
        "crossfit_aipw",
        parts.mu1_hat,
        parts.mu0_hat,
        parts.contributions,
        oof.yhat1,
        oof.yhat0,
        diag,
        1.0,
    ))
}

/// Cross-validated TMLE: out-of-fold initial predictions and one pooled
/// fluctuation per arm.
pub fn estimate_cvtmle(
    d: &TrialDataset,
    learner: &dyn Learner,
    folds: &FoldPlan,
    family: GlmFamily,
    pi: &PiSpec,
    seed: u64,
) -> Result<EstimateResult> {
    let rp = resolve_pi(d, pi, "cvtmle", false)?;
    let mut oof = out_of_fold_predictions(d, learner, folds, family, seed)?;
    let mut diag = Diagnostics::new(pi.mode());
    diag.pi_hat = rp.summary();
    diag.fold_plan = Some(folds.clone());
    diag.clamped_predictions =
        oof.clamped + clamp_initial(family, &mut oof.yhat1) + clamp_initial(family, &mut oof.yhat0);
    let (e1, yhat1) = tmle_update(&oof.yhat1, &d.arm_rows(1), d.y(), family, None)?;
    let (e0, yhat0) = tmle_update(&oof.yhat0, &d.arm_rows(0), d.y(), family, None)?;
    diag.epsilon = Some((e1, e0));
    let mut fold_mu1 = Vec::with_capacity(folds.k);
    let mut fold_mu0 = Vec::with_capacity(folds.k);
    for k in 0..folds.k {
        let rows = folds.fold(k);
        fold_mu1.push(mean(&gather(&yhat1, &rows)));
        fold_mu0.push(mean(&gather(&yhat0, &rows)));
    }
    diag.fold_theta = fold_mu1.iter().zip(&fold_mu0).map(|(a, b)| a - b).collect();
    let c = aipw_contributions(d, &yhat1, &yhat0, &rp.values(d.n()));
    Ok(finish("cvtmle", mean(&fold_mu1), mean(&fold_mu0), c, yhat1, yhat0, diag, 1.0))
}

/// Test of the strong null with one pooled covariate-only model fitted on all
/// participants, no sample splitting.
pub fn estimate_strong_null(
    d: &TrialDataset,
    learner: &dyn Learner,
    family: GlmFamily,
    pi: &PiSpec,
    seed: u64,
) -> Result<EstimateResult> {
    d.ensure_complete()?;
    let rp = resolve_pi(d, pi, "strong_null", false)?;
    let (p, known) = match rp {
        ResolvedPi::Known(p) => (p, true),
        ResolvedPi::Overall(p) => (p, false),
        ResolvedPi::Pointwise(_) => unreachable!("parametric mode rejected above"),
    };
    let model = learner.train(d.x(), d.y(), family, None, seed)?;
    let (h, clamped) = model.predict_counted(d.x())?;
    let parts = strong_null_contributions(&h, d, p, known)?;
    let mut diag = Diagnostics::new(pi.mode());
    diag.pi_hat = vec![p];
    diag.clamped_predictions = clamped;
    Ok(finish(
        "strong_null",
        parts.mu1_hat,
        parts.mu0_hat,
        parts.contributions,
        h.clone(),
        h,
        diag,
        1.0,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub fit: GlmFit,
    /// Fitted probabilities clamped to `[0.01, 0.99]`.
    pub p_hat: Vec<f64>,
    pub clamped: usize,
}

/// Logistic model of the arm on pre-specified columns, with intercept.
pub fn fit_propensity(d: &TrialDataset, ps_columns: &[String]) -> Result<PropensityFit> {
    let cols = resolve_columns(d, ps_columns)?;
    let x = crate::data::select_cols(d.x(), &cols);
    let rows: Vec<usize> = (0..d.n()).collect();
    let mut ps = fit_propensity_rows(&x, d.z(), &rows)?;
    ps.fit.column_names = ps_columns.to_vec();
    Ok(ps)
}

fn fit_propensity_rows(x: &DMatrix<f64>, z: &[u8], rows: &[usize]) -> Result<PropensityFit> {
    let xr = select_rows(x, rows);
    let zr: Vec<f64> = rows.iter().map(|&i| z[i] as f64).collect();
    let fit = fit_ml(&xr, &zr, GlmFamily::Binomial, None, None)?;
    let mut p_hat = crate::glm::predict(&fit, &xr, None)?;
    let clamped = clamp_probabilities(&mut p_hat, PS_CLAMP.0, PS_CLAMP.1);
    Ok(PropensityFit { fit, p_hat, clamped })
}

/// Cross-fit AIPW with a logistic propensity fitted on each fold's own rows
/// and the score-corrected influence function.
pub fn estimate_crossfit_aipw_parametric_ps(
    d: &TrialDataset,
    learner: &dyn Learner,
    folds: &FoldPlan,
    ps_columns: &[String],
    family: GlmFamily,
    seed: u64,
) -> Result<EstimateResult> {
    d.ensure_complete()?;
    check_fold_plan(d, folds)?;
    let cols = resolve_columns(d, ps_columns)?;
    let xps = crate::data::select_cols(d.x(), &cols);
    let n = d.n();
    let design = DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { xps[(i, j - 1)] });
    let mut p_hat = vec![0.0; n];
    let mut clamped_ps = 0;
    for k in 0..folds.k {
        let rows = folds.fold(k);
        let p = fold_treated_fraction(d, &rows);
        if p <= 0.0 || p >= 1.0 {
            return Err(Error::DegenerateFold { fold: k, pi: p });
        }
        let ps = fit_propensity_rows(&xps, d.z(), &rows)?;
        clamped_ps += ps.clamped;
        for (&i, v) in rows.iter().zip(ps.p_hat) {
            p_hat[i] = v;
        }
    }
    let oof = out_of_fold_predictions(d, learner, folds, family, seed)?;
    let fp = FoldPropensity {
        folds,
        design: &design,
        p_hat: &p_hat,
    };
    let parts = parametric_ps_contributions(&oof.yhat1, &oof.yhat0, d, &fp)?;
    let mut diag = Diagnostics::new("parametric");
    diag.pi_hat = parts.pi.clone();
    diag.fold_plan = Some(folds.clone());
    diag.fold_theta = parts.fold_theta.clone();
    diag.clamped_predictions = oof.clamped;
    diag.clamped_propensities = clamped_ps;
    Ok(finish(
        "crossfit_aipw_parametric_ps",
        parts.mu1_hat,
        parts.mu0_hat,
        parts.contributions,
        oof.yhat1,
        oof.yhat0,
        diag,
        1.0,
    ))
}

/// Re-express the result on another contrast scale by the delta method. The
/// arm means and their contributions are mapped through the same link, so
/// `theta_hat = mu1_hat - mu0_hat` still holds on the new scale.
pub fn transform_contrast(r: &EstimateResult, kind: ContrastKind) -> Result<EstimateResult> {
    let (m1, m0) = (r.mu1_hat, r.mu0_hat);
    type Scalar = fn(f64) -> f64;
    let (g, dg): (Scalar, Scalar) = match kind {
        ContrastKind::RiskDifference => return Ok(r.clone()),
        ContrastKind::LogRiskRatio => {
            if !(m1 > 0.0 && m0 > 0.0) {
                return Err(Error::DomainError(format!("log risk ratio needs positive means, got {m1} and {m0}")));
            }
            (f64::ln, |m| 1.0 / m)
        }
        ContrastKind::LogOddsRatio => {
            if !(m1 > 0.0 && m1 < 1.0 && m0 > 0.0 && m0 < 1.0) {
                return Err(Error::DomainError(format!("log odds ratio needs means in (0, 1), got {m1} and {m0}")));
            }
            (|m| (m / (1.0 - m)).ln(), |m| 1.0 / (m * (1.0 - m)))
        }
    };
    let c = ArmContributions {
        mu1: r.if_mu1.iter().map(|v| v * dg(m1)).collect(),
        mu0: r.if_mu0.iter().map(|v| v * dg(m0)).collect(),
    };
    let mut diag = r.diagnostics.clone();
    diag.contrast = kind;
    Ok(finish(
        &r.method,
        g(m1),
        g(m0),
        c,
        r.yhat1.clone(),
        r.yhat0.clone(),
        diag,
        r.diagnostics.variance_inflation,
    ))
}

/// The AIPW form `mean[Z/p (Y - Yhat1) + Yhat1] - mean[(1-Z)/(1-p)(Y - Yhat0) + Yhat0]`.
pub fn aipw_theta(d: &TrialDataset, yhat1: &[f64], yhat0: &[f64], pi: f64) -> f64 {
    let c = aipw_contributions(d, yhat1, yhat0, &vec![pi; d.n()]);
    mean(&c.mu1) - mean(&c.mu0)
}
