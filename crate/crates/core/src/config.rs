//! Serializable estimator configuration shared by analysis plans and
//! simulation specs, and the dispatcher that runs it.

use serde::{Deserialize, Serialize};

use crate::data::{expand_features, make_folds, FeatureExpansion, FoldPlan, TrialDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_crossfit_aipw, estimate_cvtmle, estimate_data_adaptive, estimate_standardization,
    estimate_strong_null, estimate_tmle, estimate_unadjusted, transform_contrast, AdjustOptions, ContrastKind,
    EstimateResult, PiSpec, MAX_FOLDS,
};
use crate::glm::GlmFamily;
use crate::learners::{Learner, LearnerId};
use crate::selection::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Unadjusted,
    Standardization,
    DataAdaptive,
    CrossfitAipw,
    Tmle,
    Cvtmle,
    StrongNull,
}

impl EstimatorId {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Unadjusted => "unadjusted",
            EstimatorId::Standardization => "standardization",
            EstimatorId::DataAdaptive => "data_adaptive",
            EstimatorId::CrossfitAipw => "crossfit_aipw",
            EstimatorId::Tmle => "tmle",
            EstimatorId::Cvtmle => "cvtmle",
            EstimatorId::StrongNull => "strong_null",
        }
    }

    fn uses_learner(self) -> bool {
        matches!(self, EstimatorId::CrossfitAipw | EstimatorId::Cvtmle | EstimatorId::StrongNull)
    }

    fn uses_folds(self) -> bool {
        matches!(self, EstimatorId::CrossfitAipw | EstimatorId::Cvtmle)
    }

    fn fits_arm_glms(self) -> bool {
        matches!(self, EstimatorId::Standardization | EstimatorId::DataAdaptive | EstimatorId::Tmle)
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    #[serde(default = "default_true")]
    pub stratified: bool,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: 5, stratified: true }
    }
}

/// Everything needed to reproduce one estimate from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub estimator: EstimatorId,
    pub family: GlmFamily,
    pub pi: PiSpec,
    pub seed: u64,
    #[serde(default)]
    pub features: FeatureExpansion,
    /// Step 1a procedure; required for data_adaptive and tmle.
    #[serde(default)]
    pub selection: Option<Selector>,
    #[serde(default)]
    pub learner: Option<LearnerId>,
    #[serde(default)]
    pub folds: FoldConfig,
    #[serde(default)]
    pub eem: bool,
    #[serde(default)]
    pub small_sample_correction: bool,
    #[serde(default)]
    pub weights_from_ps: bool,
    #[serde(default)]
    pub contrast: ContrastKind,
}

impl EstimatorConfig {
    pub fn new(estimator: EstimatorId, family: GlmFamily, pi: PiSpec) -> Self {
        Self {
            estimator,
            family,
            pi,
            seed: 0,
            features: FeatureExpansion::identity(),
            selection: None,
            learner: None,
            folds: FoldConfig::default(),
            eem: false,
            small_sample_correction: false,
            weights_from_ps: false,
            contrast: ContrastKind::RiskDifference,
        }
    }

    pub fn with_learner(mut self, learner: LearnerId) -> Self {
        self.learner = Some(learner);
        self
    }

    pub fn with_selection(mut self, selection: Selector) -> Self {
        self.selection = Some(selection);
        self
    }

    pub fn with_folds(mut self, k: usize, stratified: bool) -> Self {
        self.folds = FoldConfig { k, stratified };
        self
    }

    /// Consistency checks that need no data. Returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let est = self.estimator;
        let name = est.as_str();
        self.pi.check_positivity()?;
        if self.features.polynomial_degree < 1 {
            return Err(Error::config("features.polynomial_degree", "must be at least 1"));
        }
        let parametric = matches!(self.pi, PiSpec::Parametric { .. });
        let pi_ok = match (&self.pi, est) {
            (PiSpec::Known { .. }, _) => true,
            (PiSpec::EstimatedOverall, e) => e != EstimatorId::CrossfitAipw,
            (PiSpec::EstimatedPerFold, e) => e == EstimatorId::CrossfitAipw,
            (PiSpec::Parametric { .. }, e) => matches!(
                e,
                EstimatorId::Standardization | EstimatorId::DataAdaptive | EstimatorId::Tmle | EstimatorId::CrossfitAipw
            ),
        };
        if !pi_ok {
            return Err(Error::config("pi.mode", format!("{name} does not support this probability mode")));
        }
        if self.eem && parametric {
            return Err(Error::config(
                "eem",
                "least-squares (EEM) fitting cannot be combined with a parametric propensity score",
            ));
        }
        if self.eem && !est.fits_arm_glms() {
            return Err(Error::config("eem", format!("{name} has no Step 1b fit to switch to least squares")));
        }
        if self.weights_from_ps {
            if !matches!(est, EstimatorId::Standardization | EstimatorId::DataAdaptive) {
                return Err(Error::config("weights_from_ps", format!("not used by {name}")));
            }
            if !parametric {
                return Err(Error::config("weights_from_ps", "requires pi.mode = parametric"));
            }
        } else if parametric && matches!(est, EstimatorId::Standardization | EstimatorId::DataAdaptive) {
            return Err(Error::config(
                "weights_from_ps",
                "a parametric propensity for standardization or data_adaptive requires weights_from_ps = true",
            ));
        }
        match (est, &self.selection) {
            (EstimatorId::DataAdaptive | EstimatorId::Tmle, None) => {
                return Err(Error::config("selection", format!("{name} requires a pre-specified selection method")))
            }
            (EstimatorId::DataAdaptive | EstimatorId::Tmle, Some(_)) => {}
            (EstimatorId::Standardization, None | Some(Selector::None)) => {}
            (_, Some(_)) => return Err(Error::config("selection", format!("not used by {name}"))),
            (_, None) => {}
        }
        if let Some(Selector::LassoCv { k_cv, .. }) = &self.selection {
            if *k_cv < 2 {
                return Err(Error::config("selection.k_cv", "cross-validation needs at least 2 folds"));
            }
        }
        match (est.uses_learner(), self.learner) {
            (true, None) => return Err(Error::config("learner", format!("{name} requires a learner"))),
            (false, Some(_)) => return Err(Error::config("learner", format!("not used by {name}"))),
            _ => {}
        }
        if (est.uses_folds() || (est == EstimatorId::CrossfitAipw && parametric))
            && !(2..=MAX_FOLDS).contains(&self.folds.k)
        {
            return Err(Error::config(
                "folds.k",
                format!("K = {} must lie in [2, {MAX_FOLDS}]", self.folds.k),
            ));
        }
        if self.small_sample_correction && !est.fits_arm_glms() && est != EstimatorId::Unadjusted {
            warnings.push(format!("small-sample correction is defined as 1 for {name}"));
        }
        if self.weights_from_ps {
            warnings.push("inverse-propensity weighted refit: validity relies on the propensity model form".into());
        }
        Ok(warnings)
    }

    pub fn fold_plan(&self, d: &TrialDataset) -> Result<FoldPlan> {
        make_folds(d.n(), self.folds.k, d.z(), self.seed, self.folds.stratified)
    }

    fn adjust_options(&self) -> AdjustOptions {
        AdjustOptions {
            selector: self.selection.clone().unwrap_or(Selector::None),
            forced: self.features.forced_columns.clone(),
            eem: self.eem,
            small_sample_correction: self.small_sample_correction,
            weights_from_ps: self.weights_from_ps,
            seed: self.seed,
        }
    }
}

/// Expand features, run the configured estimator, and map to the contrast scale.
pub fn estimate(d: &TrialDataset, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    let warnings = cfg.validate()?;
    let d = expand_features(d, &cfg.features)?;
    let learner = || -> Box<dyn Learner> { cfg.learner.expect("validated").build() };
    let mut r = match cfg.estimator {
        EstimatorId::Unadjusted => estimate_unadjusted(&d, &cfg.pi)?,
        EstimatorId::Standardization => estimate_standardization(&d, cfg.family, &cfg.pi, &cfg.adjust_options())?,
        EstimatorId::DataAdaptive => estimate_data_adaptive(&d, cfg.family, &cfg.pi, &cfg.adjust_options())?,
        EstimatorId::Tmle => estimate_tmle(&d, cfg.family, &cfg.pi, &cfg.adjust_options())?,
        EstimatorId::CrossfitAipw => {
            let folds = cfg.fold_plan(&d)?;
            estimate_crossfit_aipw(&d, learner().as_ref(), &folds, &cfg.pi, cfg.family, cfg.seed)?
        }
        EstimatorId::Cvtmle => {
            let folds = cfg.fold_plan(&d)?;
            estimate_cvtmle(&d, learner().as_ref(), &folds, cfg.family, &cfg.pi, cfg.seed)?
        }
        EstimatorId::StrongNull => estimate_strong_null(&d, learner().as_ref(), cfg.family, &cfg.pi, cfg.seed)?,
    };
    r.diagnostics.warnings.extend(warnings);
    transform_contrast(&r, cfg.contrast)
}
