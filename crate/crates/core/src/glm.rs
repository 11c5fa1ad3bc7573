//! Canonical-link GLMs (gaussian/identity, binomial/logit) fitted by IRLS.
//!
//! A maximum-likelihood fit with an intercept solves the weighted score
//! equations `sum_i w_i c_ij (y_i - mu_i) = 0` for every design column,
//! including the constant one. Within a single arm that intercept equation is
//! exactly "predictions sum to the observed outcomes", which the standardization
//! estimators rely on. [`score_residual`] exposes the left-hand side.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expit, logit, solve_spd};

const MAX_ITER: usize = 100;
const DEVIANCE_TOL: f64 = 1e-10;
const SEPARATION_COEF: f64 = 30.0;
const START_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    #[serde(alias = "gaussian_identity")]
    Gaussian,
    #[serde(alias = "binomial_logit")]
    Binomial,
}

impl GlmFamily {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => mu,
            GlmFamily::Binomial => logit(mu),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => eta,
            GlmFamily::Binomial => expit(eta),
        }
    }

    /// d mu / d eta, which for canonical links is also the variance function.
    pub fn mu_eta(self, mu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 1.0,
            GlmFamily::Binomial => mu * (1.0 - mu),
        }
    }

    pub fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => (y - mu) * (y - mu),
            GlmFamily::Binomial => {
                let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
                2.0 * (term(y, mu) + term(1.0 - y, 1.0 - mu))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Binomial => "binomial",
        }
    }
}

/// How the coefficients were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaximumLikelihood,
    /// Least squares on the response scale. The score equations, and with them
    /// prediction unbiasedness, are not guaranteed for the binomial family.
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: GlmFamily,
    /// Intercept first when `intercept` is set, then one per column.
    pub coefficients: Vec<f64>,
    pub column_names: Vec<String>,
    pub intercept: bool,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    pub fitted_with_weights: bool,
    pub fitted_with_offset: bool,
    pub objective: Objective,
}

impl GlmFit {
    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    /// Number of non-intercept parameters.
    pub fn n_slopes(&self) -> usize {
        self.n_columns()
    }

    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.coefficients[0]
        } else {
            0.0
        }
    }

    fn slopes(&self) -> &[f64] {
        if self.intercept {
            &self.coefficients[1..]
        } else {
            &self.coefficients
        }
    }

    pub fn linear_predictor(&self, x: &DMatrix<f64>, offset: Option<&[f64]>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_columns() {
            return Err(Error::DimensionMismatch(format!(
                "fit has {} columns, matrix has {}",
                self.n_columns(),
                x.ncols()
            )));
        }
        check_len("offset", offset, x.nrows())?;
        let slopes = self.slopes();
        Ok((0..x.nrows())
            .map(|i| {
                let mut eta = self.intercept_value();
                for (j, b) in slopes.iter().enumerate() {
                    eta += b * x[(i, j)];
                }
                eta + offset.map_or(0.0, |o| o[i])
            })
            .collect())
    }
}

fn check_len(what: &str, v: Option<&[f64]>, n: usize) -> Result<()> {
    match v {
        Some(v) if v.len() != n => Err(Error::DimensionMismatch(format!(
            "{what} has length {}, expected {n}",
            v.len()
        ))),
        _ => Ok(()),
    }
}

fn validate_inputs(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<()> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch(format!("x has {} rows, y has {n}", x.nrows())));
    }
    if n == 0 {
        return Err(Error::InvalidData("no rows to fit".into()));
    }
    check_len("weights", weights, n)?;
    check_len("offset", offset, n)?;
    if let Some(w) = weights {
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) || w.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidData("weights must be finite, non-negative and not all zero".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::MissingCovariates);
    }
    if family == GlmFamily::Binomial && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidData("binomial outcomes must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Design matrix with an optional leading column of ones.
fn design(x: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
    if intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    }
}

fn weight(weights: Option<&[f64]>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w[i])
}

struct IrlsState {
    beta: DVector<f64>,
    mu: Vec<f64>,
    deviance: f64,
}

fn evaluate(
    family: GlmFamily,
    xd: &DMatrix<f64>,
    beta: &DVector<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> (Vec<f64>, f64) {
    let eta = xd * beta;
    let mut dev = 0.0;
    let mu: Vec<f64> = (0..y.len())
        .map(|i| {
            let m = family.inverse_link(eta[i] + offset.map_or(0.0, |o| o[i]));
            dev += weight(weights, i) * family.unit_deviance(y[i], m);
            m
        })
        .collect();
    (mu, dev)
}

/// One Newton step for the log-likelihood: `(X'WX)^{-1} X' w (y - mu)`.
fn newton_direction(
    family: GlmFamily,
    xd: &DMatrix<f64>,
    y: &[f64],
    mu: &[f64],
    weights: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let q = xd.ncols();
    let mut info = DMatrix::zeros(q, q);
    let mut score = DVector::zeros(q);
    for i in 0..y.len() {
        let w = weight(weights, i);
        if w == 0.0 {
            continue;
        }
        let v = w * family.mu_eta(mu[i]);
        let r = w * (y[i] - mu[i]);
        let row = xd.row(i);
        for a in 0..q {
            score[a] += row[a] * r;
            let va = v * row[a];
            for b in 0..=a {
                info[(a, b)] += va * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    solve_spd(&info, &score)
}

fn irls(
    family: GlmFamily,
    xd: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
    intercept: bool,
) -> Result<(IrlsState, bool, usize)> {
    let n = y.len();
    let q = xd.ncols();
    let mut beta = DVector::zeros(q);
    if intercept {
        let wsum: f64 = (0..n).map(|i| weight(weights, i)).sum();
        let ybar = (0..n).map(|i| weight(weights, i) * y[i]).sum::<f64>() / wsum;
        let obar = offset.map_or(0.0, |o| (0..n).map(|i| weight(weights, i) * o[i]).sum::<f64>() / wsum);
        let start = match family {
            GlmFamily::Gaussian => ybar,
            GlmFamily::Binomial => logit(ybar.clamp(START_CLAMP, 1.0 - START_CLAMP)),
        };
        beta[0] = start - obar;
    }
    let (mu, deviance) = evaluate(family, xd, &beta, y, weights, offset);
    let mut state = IrlsState { beta, mu, deviance };
    let mut converged = false;
    let mut iterations = 0;
    let max_coef = |b: &DVector<f64>| b.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    while iterations < MAX_ITER {
        iterations += 1;
        let step = match newton_direction(family, xd, y, &state.mu, weights) {
            Ok(s) => s,
            Err(e) => {
                if family == GlmFamily::Binomial && max_coef(&state.beta) > SEPARATION_COEF {
                    return Err(Error::Separation {
                        max_coef: max_coef(&state.beta),
                    });
                }
                return Err(e);
            }
        };
        // Step halving guards against overshooting on the binomial likelihood.
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &state.beta + &step * scale;
            let (mu, dev) = evaluate(family, xd, &cand, y, weights, offset);
            if dev.is_finite() && dev <= state.deviance * (1.0 + 1e-12) + 1e-12 {
                accepted = Some(IrlsState { beta: cand, mu, deviance: dev });
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            // No descent possible: the current point is already optimal to
            // machine precision.
            converged = true;
            break;
        };
        let change = (next.deviance - state.deviance).abs() / (next.deviance.abs() + 0.1);
        state = next;
        if change < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }

    if converged {
        // Polish: a final Newton step drives the score to rounding level.
        if let Ok(step) = newton_direction(family, xd, y, &state.mu, weights) {
            let cand = &state.beta + step;
            let (mu, dev) = evaluate(family, xd, &cand, y, weights, offset);
            if dev.is_finite() && dev <= state.deviance * (1.0 + 1e-9) + 1e-12 {
                state = IrlsState { beta: cand, mu, deviance: dev };
            }
        }
    }

    if family == GlmFamily::Binomial && max_coef(&state.beta) > SEPARATION_COEF {
        let extreme = state.mu.iter().any(|&m| m.min(1.0 - m) < 1e-9);
        if !converged || extreme {
            return Err(Error::Separation {
                max_coef: max_coef(&state.beta),
            });
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "IRLS".into(),
            iterations,
        });
    }
    Ok((state, converged, iterations))
}

fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn fit_ml_impl(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
    intercept: bool,
) -> Result<GlmFit> {
    validate_inputs(x, y, family, weights, offset)?;
    if !intercept && x.ncols() == 0 {
        return Err(Error::InvalidData("model has no parameters".into()));
    }
    let xd = design(x, intercept);
    let (state, converged, iterations) = irls(family, &xd, y, weights, offset, intercept)?;
    Ok(GlmFit {
        family,
        coefficients: state.beta.iter().copied().collect(),
        column_names: default_names(x.ncols()),
        intercept,
        converged,
        iterations,
        deviance: state.deviance,
        fitted_with_weights: weights.is_some(),
        fitted_with_offset: offset.is_some(),
        objective: Objective::MaximumLikelihood,
    })
}

/// Maximum-likelihood fit with intercept.
pub fn fit_ml(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<GlmFit> {
    fit_ml_impl(x, y, family, weights, offset, true)
}

/// Maximum-likelihood fit without intercept; used for clever-covariate updates.
pub fn fit_ml_no_intercept(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<GlmFit> {
    fit_ml_impl(x, y, family, weights, offset, false)
}

/// Same as [`fit_ml`] but labels the columns.
pub fn fit_ml_named(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<GlmFit> {
    let mut fit = fit_ml(x, y, family, weights, None)?;
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch("column names".into()));
    }
    fit.column_names = names.to_vec();
    Ok(fit)
}

/// Response-scale predictions `g^{-1}(b0 + x b + offset)`.
pub fn predict(fit: &GlmFit, x: &DMatrix<f64>, offset: Option<&[f64]>) -> Result<Vec<f64>> {
    Ok(fit
        .linear_predictor(x, offset)?
        .into_iter()
        .map(|eta| fit.family.inverse_link(eta))
        .collect())
}

/// Weighted score equations `sum_i w_i c_ij (y_i - mu_i)`, intercept first.
pub fn score_residual(
    fit: &GlmFit,
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    offset: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch("y and x rows differ".into()));
    }
    check_len("weights", weights, y.len())?;
    let mu = predict(fit, x, offset)?;
    let mut out = Vec::with_capacity(fit.coefficients.len());
    let resid: Vec<f64> = (0..y.len()).map(|i| weight(weights, i) * (y[i] - mu[i])).collect();
    if fit.intercept {
        out.push(resid.iter().sum());
    }
    for j in 0..x.ncols() {
        out.push((0..y.len()).map(|i| x[(i, j)] * resid[i]).sum());
    }
    Ok(out)
}

/// Minimize `sum_i w_i (y_i - g^{-1}(b0 + x_i b))^2` by damped Gauss-Newton.
/// For the gaussian family this is the maximum-likelihood fit.
pub fn fit_least_squares(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    weights: Option<&[f64]>,
) -> Result<GlmFit> {
    if family == GlmFamily::Gaussian {
        let mut fit = fit_ml(x, y, family, weights, None)?;
        fit.objective = Objective::LeastSquares;
        return Ok(fit);
    }
    validate_inputs(x, y, family, weights, None)?;
    let xd = design(x, true);
    let n = y.len();
    let q = xd.ncols();

    let start = match fit_ml(x, y, family, weights, None) {
        Ok(f) => DVector::from_vec(f.coefficients),
        Err(Error::Separation { .. }) | Err(Error::NonConvergence { .. }) => {
            let mut b = DVector::zeros(q);
            b[0] = logit(crate::linalg::mean(y).clamp(START_CLAMP, 1.0 - START_CLAMP));
            b
        }
        Err(e) => return Err(e),
    };

    let sse = |beta: &DVector<f64>| -> (Vec<f64>, f64) {
        let eta = &xd * beta;
        let mu: Vec<f64> = eta.iter().map(|&e| expit(e)).collect();
        let s = (0..n).map(|i| weight(weights, i) * (y[i] - mu[i]).powi(2)).sum();
        (mu, s)
    };

    let mut beta = start;
    let (mut mu, mut obj) = sse(&beta);
    let mut damping: f64 = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < 500 {
        iterations += 1;
        let mut jtj: DMatrix<f64> = DMatrix::zeros(q, q);
        let mut grad: DVector<f64> = DVector::zeros(q);
        for i in 0..n {
            let w = weight(weights, i);
            let d = mu[i] * (1.0 - mu[i]);
            let row = xd.row(i);
            for a in 0..q {
                grad[a] += w * d * row[a] * (y[i] - mu[i]);
                for b in 0..q {
                    jtj[(a, b)] += w * d * d * row[a] * row[b];
                }
            }
        }
        let gmax = grad.iter().fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()));
        if gmax <= 1e-12 * n as f64 {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut m = jtj.clone();
            for a in 0..q {
                m[(a, a)] += damping * jtj[(a, a)].max(1e-12);
            }
            let step = match solve_spd(&m, &grad) {
                Ok(s) => s,
                Err(_) => {
                    damping *= 10.0;
                    continue;
                }
            };
            let cand = &beta + &step;
            let (cmu, cobj) = sse(&cand);
            if cobj.is_finite() && cobj <= obj {
                let rel = (obj - cobj) / (obj + 1e-300);
                beta = cand;
                mu = cmu;
                obj = cobj;
                damping = (damping * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-15 {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            // Cannot decrease further: stationary to working precision.
            converged = gmax <= 1e-6 * n as f64;
            break;
        }
        if converged {
            break;
        }
    }
    if !converged {
        if beta.iter().any(|b| b.abs() > SEPARATION_COEF) {
            return Err(Error::Separation {
                max_coef: beta.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            });
        }
        return Err(Error::NonConvergence {
            what: "least-squares GLM".into(),
            iterations,
        });
    }
    let deviance = (0..n)
        .map(|i| weight(weights, i) * family.unit_deviance(y[i], mu[i]))
        .sum();
    Ok(GlmFit {
        family,
        coefficients: beta.iter().copied().collect(),
        column_names: default_names(x.ncols()),
        intercept: true,
        converged,
        iterations,
        deviance,
        fitted_with_weights: weights.is_some(),
        fitted_with_offset: false,
        objective: Objective::LeastSquares,
    })
}

/// Clamp probabilities into `[lo, hi]`, returning how many were moved.
pub fn clamp_probabilities(p: &mut [f64], lo: f64, hi: f64) -> usize {
    let mut count = 0;
    for v in p.iter_mut() {
        let c = v.clamp(lo, hi);
        if c != *v {
            count += 1;
            *v = c;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        // minimizes f on [a, b]
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        while (b - a).abs() > 1e-12 {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        (a + b) / 2.0
    }

    #[test]
    fn gaussian_intercept_only_is_mean() {
        let x = DMatrix::zeros(3, 0);
        let fit = fit_ml(&x, &[1.0, 2.0, 3.0], GlmFamily::Gaussian, None, None).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn saturated_two_group_logistic() {
        // group x=0: 1 of 2 successes; group x=1: 2 of 3 successes
        let x = col(&[0.0, 0.0, 1.0, 1.0, 1.0]);
        let y = [0.0, 1.0, 0.0, 1.0, 1.0];
        let fit = fit_ml(&x, &y, GlmFamily::Binomial, None, None).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-9);
        assert!((fit.coefficients[1] - 2f64.ln()).abs() < 1e-9);

        // oracle: profile likelihood maximized by nested golden-section search
        let nll = |b0: f64, b1: f64| -> f64 {
            (0..5)
                .map(|i| {
                    let p = expit(b0 + b1 * x[(i, 0)]);
                    -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
                })
                .sum()
        };
        let profile = |b1: f64| nll(golden_section(|b0| nll(b0, b1), -10.0, 10.0), b1);
        let b1 = golden_section(profile, -10.0, 10.0);
        let b0 = golden_section(|b0| nll(b0, b1), -10.0, 10.0);
        assert!((fit.coefficients[1] - b1).abs() < 1e-6);
        assert!((fit.coefficients[0] - b0).abs() < 1e-6);
    }

    #[test]
    fn perfect_separation_is_reported() {
        let x = col(&[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            fit_ml(&x, &y, GlmFamily::Binomial, None, None),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 5.0, 5.0]);
        assert!(matches!(
            fit_ml(&x, &[1.0, 0.0, 2.0, 3.0], GlmFamily::Gaussian, None, None),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn prediction_examples() {
        let fit = GlmFit {
            family: GlmFamily::Gaussian,
            coefficients: vec![1.0, 2.0],
            column_names: vec!["a".into()],
            intercept: true,
            converged: true,
            iterations: 1,
            deviance: 0.0,
            fitted_with_weights: false,
            fitted_with_offset: false,
            objective: Objective::MaximumLikelihood,
        };
        assert_eq!(predict(&fit, &col(&[3.0]), None).unwrap(), vec![7.0]);
        assert!(matches!(
            predict(&fit, &DMatrix::zeros(1, 2), None),
            Err(Error::DimensionMismatch(_))
        ));
        let logit0 = GlmFit {
            family: GlmFamily::Binomial,
            coefficients: vec![0.0, 0.0],
            ..fit
        };
        assert_eq!(predict(&logit0, &col(&[-4.0, 9.0]), None).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn least_squares_examples() {
        let x = DMatrix::zeros(3, 0);
        let fit = fit_least_squares(&x, &[0.0, 1.0, 1.0], GlmFamily::Binomial, None).unwrap();
        let sse = |b: f64| {
            let p = expit(b);
            p * p + 2.0 * (1.0 - p) * (1.0 - p)
        };
        let oracle = golden_section(sse, -10.0, 10.0);
        assert!((fit.coefficients[0] - logit(2.0 / 3.0)).abs() < 1e-8);
        assert!((fit.coefficients[0] - oracle).abs() < 1e-6);

        // Gaussian delegates to the ML fit.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|v| 2.0 * v + rng.random::<f64>()).collect();
        let a = fit_ml(&col(&xs), &ys, GlmFamily::Gaussian, None, None).unwrap();
        let b = fit_least_squares(&col(&xs), &ys, GlmFamily::Gaussian, None).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn least_squares_beats_ml_on_mse_and_breaks_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|&v| if rng.random::<f64>() < expit(-1.0 + 1.5 * v * v) { 1.0 } else { 0.0 })
            .collect();
        let x = col(&xs);
        let ml = fit_ml(&x, &y, GlmFamily::Binomial, None, None).unwrap();
        let ls = fit_least_squares(&x, &y, GlmFamily::Binomial, None).unwrap();
        let mse = |f: &GlmFit| {
            let p = predict(f, &x, None).unwrap();
            p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64
        };
        assert!(mse(&ls) <= mse(&ml) + 1e-15);
        let s = score_residual(&ls, &x, &y, None, None).unwrap();
        assert!(s[0].abs() > 1e-6, "least-squares intercept score {}", s[0]);
    }

    #[test]
    fn zero_weight_rows_do_not_contribute() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 1.0, 1.0, 0.0];
        let w = [1.0, 1.0, 1.0, 0.0];
        let fit = fit_ml(&x.rows(0, 3).into_owned(), &y[..3], GlmFamily::Gaussian, None, None).unwrap();
        let with = score_residual(&fit, &x, &y, Some(&w), None).unwrap();
        let without = score_residual(&fit, &x.rows(0, 3).into_owned(), &y[..3], None, None).unwrap();
        assert_eq!(with, without);
    }

    fn random_problem(seed: u64, family: GlmFamily) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 40 + (seed % 60) as usize;
        let p = 1 + (seed % 3) as usize;
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = (0..n)
            .map(|i| {
                let eta = 0.3 + x.row(i).sum();
                match family {
                    GlmFamily::Gaussian => eta + rng.random::<f64>() - 0.5,
                    GlmFamily::Binomial => {
                        if rng.random::<f64>() < expit(eta) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect();
        let w = (0..n).map(|_| 0.5 + rng.random::<f64>()).collect();
        (x, y, w)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn ml_score_is_zero(seed in 0u64..10_000, binomial in any::<bool>(), weighted in any::<bool>()) {
            let family = if binomial { GlmFamily::Binomial } else { GlmFamily::Gaussian };
            let (x, y, w) = random_problem(seed, family);
            let w = weighted.then_some(w);
            let fit = fit_ml(&x, &y, family, w.as_deref(), None).unwrap();
            let s = score_residual(&fit, &x, &y, w.as_deref(), None).unwrap();
            let n = y.len() as f64;
            prop_assert!(s.iter().all(|v| v.abs() <= 1e-8 * n), "{:?}", s);
        }

        #[test]
        fn gaussian_shift_moves_only_intercept(seed in 0u64..10_000, c in -50.0f64..50.0) {
            let (x, y, _) = random_problem(seed, GlmFamily::Gaussian);
            let a = fit_ml(&x, &y, GlmFamily::Gaussian, None, None).unwrap();
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            let b = fit_ml(&x, &shifted, GlmFamily::Gaussian, None, None).unwrap();
            prop_assert!((b.coefficients[0] - a.coefficients[0] - c).abs() < 1e-9);
            for j in 1..a.coefficients.len() {
                prop_assert!((b.coefficients[j] - a.coefficients[j]).abs() < 1e-9);
            }
        }
    }
}
