//! Data-adaptive covariate selection (cross-validated lasso, forward AIC) and
//! the unpenalized refit on the selected support.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{gather, make_folds, select_cols, select_rows};
use crate::error::{Error, Result};
use crate::glm::{self, fit_least_squares, fit_ml, GlmFamily, GlmFit};
use crate::linalg::{expit, logit};

const CD_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100_000;
const MAX_OUTER: usize = 200;
const PATH_LENGTH: usize = 100;
const PATH_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    LassoCv,
    StepwiseAic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Largest penalty within one standard error of the minimum CV error.
    #[default]
    OneSe,
    Min,
}

/// A fully specified selection procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Selector {
    LassoCv {
        k_cv: usize,
        #[serde(default)]
        lambda_rule: LambdaRule,
    },
    StepwiseAic {
        #[serde(default)]
        max_terms: Option<usize>,
    },
    None,
}

impl Selector {
    pub fn lasso_default() -> Self {
        Selector::LassoCv {
            k_cv: 5,
            lambda_rule: LambdaRule::OneSe,
        }
    }

    pub fn method(&self) -> SelectionMethod {
        match self {
            Selector::LassoCv { .. } => SelectionMethod::LassoCv,
            Selector::StepwiseAic { .. } => SelectionMethod::StepwiseAic,
            Selector::None => SelectionMethod::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub cv_error: f64,
    pub cv_se: f64,
    /// Training deviance of the full-data fit at this penalty.
    pub deviance: f64,
    pub nonzero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected_columns: Vec<String>,
    /// Indices into the candidate matrix, ascending.
    pub selected_indices: Vec<usize>,
    pub method: SelectionMethod,
    pub path_diagnostics: Vec<PathPoint>,
    pub chosen_lambda: Option<f64>,
    /// Candidates dropped because they have no variation in the fitting rows.
    pub excluded_constant: Vec<String>,
    pub warnings: Vec<String>,
}

impl SelectionResult {
    pub fn empty(method: SelectionMethod) -> Self {
        Self {
            selected_columns: Vec::new(),
            selected_indices: Vec::new(),
            method,
            path_diagnostics: Vec::new(),
            chosen_lambda: None,
            excluded_constant: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Every candidate kept, used for `Selector::None`.
    pub fn all(names: &[String]) -> Self {
        Self {
            selected_columns: names.to_vec(),
            selected_indices: (0..names.len()).collect(),
            ..Self::empty(SelectionMethod::None)
        }
    }
}

/// Lasso solution on the original covariate scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Coefficients of the unit-variance columns; the penalty applies to these.
    pub standardized: Vec<f64>,
    pub lambda: f64,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .collect()
    }

    pub fn predict(&self, family: GlmFamily, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let eta = self.intercept
                    + (0..x.ncols()).map(|j| self.coefficients[j] * x[(i, j)]).sum::<f64>();
                family.inverse_link(eta)
            })
            .collect()
    }
}

/// Weighted, centered and unit-variance design shared by the coordinate solvers.
struct Standardized {
    n: usize,
    /// Column-major standardized values; zero-variance columns are all zero.
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    sds: Vec<f64>,
    /// Weights rescaled to sum to `n`.
    w: Vec<f64>,
}

impl Standardized {
    fn new(x: &DMatrix<f64>, weights: Option<&[f64]>) -> Self {
        let n = x.nrows();
        let w: Vec<f64> = match weights {
            Some(w) => {
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v * n as f64 / s).collect()
            }
            None => vec![1.0; n],
        };
        let mut cols = Vec::with_capacity(x.ncols());
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let m = (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / n as f64;
            let var = (0..n).map(|i| w[i] * (x[(i, j)] - m).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            let keep = sd > 1e-12 * (1.0 + m.abs());
            cols.push(if keep {
                (0..n).map(|i| (x[(i, j)] - m) / sd).collect()
            } else {
                vec![0.0; n]
            });
            means.push(m);
            sds.push(if keep { sd } else { 0.0 });
        }
        Self { n, cols, means, sds, w }
    }

    fn active(&self, j: usize) -> bool {
        self.sds[j] > 0.0
    }

    fn wmean(&self, y: &[f64]) -> f64 {
        (0..self.n).map(|i| self.w[i] * y[i]).sum::<f64>() / self.n as f64
    }

    fn lambda_max(&self, y: &[f64]) -> f64 {
        let ybar = self.wmean(y);
        (0..self.cols.len())
            .map(|j| {
                let g: f64 = (0..self.n)
                    .map(|i| self.w[i] * self.cols[j][i] * (y[i] - ybar))
                    .sum::<f64>()
                    / self.n as f64;
                g.abs()
            })
            .fold(0.0, f64::max)
    }

    fn to_original(&self, b0: f64, b: &[f64], lambda: f64, sweeps: usize) -> LassoFit {
        let mut intercept = b0;
        let coefficients: Vec<f64> = (0..b.len())
            .map(|j| {
                if b[j] == 0.0 || !self.active(j) {
                    0.0
                } else {
                    intercept -= b[j] * self.means[j] / self.sds[j];
                    b[j] / self.sds[j]
                }
            })
            .collect();
        LassoFit {
            intercept,
            coefficients,
            standardized: b.to_vec(),
            lambda,
            sweeps,
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Weighted least-squares coordinate descent on standardized columns for
/// `(1/2n) sum v_i (t_i - b0 - x_i b)^2 + lambda |b|_1`. `v` already includes
/// the prior weights. Updates `b0`, `b` in place; returns sweeps used.
fn cd_weighted(
    s: &Standardized,
    v: &[f64],
    target: &[f64],
    lambda: f64,
    b0: &mut f64,
    b: &mut [f64],
    tol: f64,
) -> Result<usize> {
    let n = s.n;
    let p = b.len();
    let nf = n as f64;
    let vsum: f64 = v.iter().sum();
    let denom: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| v[i] * s.cols[j][i] * s.cols[j][i]).sum::<f64>() / nf)
        .collect();
    let mut r: Vec<f64> = (0..n)
        .map(|i| target[i] - *b0 - (0..p).map(|j| s.cols[j][i] * b[j]).sum::<f64>())
        .collect();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        let shift = (0..n).map(|i| v[i] * r[i]).sum::<f64>() / vsum;
        if shift != 0.0 {
            *b0 += shift;
            for ri in r.iter_mut() {
                *ri -= shift;
            }
            max_change = max_change.max(shift.abs());
        }
        for j in 0..p {
            if !s.active(j) || denom[j] <= 0.0 {
                b[j] = 0.0;
                continue;
            }
            let col = &s.cols[j];
            let rho = (0..n).map(|i| v[i] * col[i] * r[i]).sum::<f64>() / nf + denom[j] * b[j];
            let new = soft_threshold(rho, lambda) / denom[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for i in 0..n {
                    r[i] -= col[i] * delta;
                }
                b[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            return Ok(sweeps);
        }
    }
    Err(Error::NonConvergence {
        what: "lasso coordinate descent".into(),
        iterations: sweeps,
    })
}

fn penalized_binomial_objective(s: &Standardized, y: &[f64], b0: f64, b: &[f64], lambda: f64) -> f64 {
    let n = s.n;
    let nll: f64 = (0..n)
        .map(|i| {
            let eta = b0 + (0..b.len()).map(|j| s.cols[j][i] * b[j]).sum::<f64>();
            let log1pe = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            s.w[i] * (log1pe - y[i] * eta)
        })
        .sum();
    nll / n as f64 + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Solve at one penalty starting from `(b0, b)`.
fn solve_at(
    s: &Standardized,
    y: &[f64],
    family: GlmFamily,
    lambda: f64,
    b0: &mut f64,
    b: &mut [f64],
) -> Result<usize> {
    match family {
        GlmFamily::Gaussian => cd_weighted(s, &s.w, y, lambda, b0, b, CD_TOL),
        GlmFamily::Binomial => {
            let n = s.n;
            let mut total = 0;
            let mut obj = penalized_binomial_objective(s, y, *b0, b, lambda);
            for _ in 0..MAX_OUTER {
                let eta: Vec<f64> = (0..n)
                    .map(|i| *b0 + (0..b.len()).map(|j| s.cols[j][i] * b[j]).sum::<f64>())
                    .collect();
                let mut v = Vec::with_capacity(n);
                let mut t = Vec::with_capacity(n);
                for i in 0..n {
                    let mu = expit(eta[i]);
                    let d = (mu * (1.0 - mu)).max(1e-10);
                    v.push(s.w[i] * d);
                    t.push(eta[i] + (y[i] - mu) / d);
                }
                let (old0, old) = (*b0, b.to_vec());
                let (mut n0, mut nb) = (*b0, b.to_vec());
                total += cd_weighted(s, &v, &t, lambda, &mut n0, &mut nb, CD_TOL * 0.1)?;
                // Backtrack along the proximal Newton direction if needed.
                let mut step = 1.0;
                let mut new_obj = penalized_binomial_objective(s, y, n0, &nb, lambda);
                while new_obj > obj + 1e-15 * obj.abs().max(1.0) && step > 1e-6 {
                    step *= 0.5;
                    n0 = old0 + step * (n0 - old0);
                    for j in 0..nb.len() {
                        nb[j] = old[j] + step * (nb[j] - old[j]);
                    }
                    new_obj = penalized_binomial_objective(s, y, n0, &nb, lambda);
                }
                let change = nb
                    .iter()
                    .zip(&old)
                    .map(|(a, c)| (a - c).abs())
                    .fold((n0 - old0).abs(), f64::max);
                *b0 = n0;
                b.copy_from_slice(&nb);
                obj = new_obj;
                if change < CD_TOL {
                    return Ok(total);
                }
            }
            Err(Error::NonConvergence {
                what: "binomial lasso".into(),
                iterations: MAX_OUTER,
            })
        }
    }
}

fn initial_intercept(s: &Standardized, y: &[f64], family: GlmFamily) -> f64 {
    let ybar = s.wmean(y);
    match family {
        GlmFamily::Gaussian => ybar,
        GlmFamily::Binomial => logit(ybar.clamp(1e-6, 1.0 - 1e-6)),
    }
}

fn check_lasso_inputs(x: &DMatrix<f64>, y: &[f64], family: GlmFamily, weights: Option<&[f64]>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch("x rows and y differ".into()));
    }
    if weights.is_some_and(|w| w.len() != y.len()) {
        return Err(Error::DimensionMismatch("weights".into()));
    }
    if family == GlmFamily::Binomial && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidData("binomial outcomes must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Binomial outcome without variation: the penalized solution is intercept-only
/// with a divergent intercept, reported at the start clamp.
fn is_degenerate_binomial(y: &[f64], family: GlmFamily) -> bool {
    family == GlmFamily::Binomial && (y.iter().all(|&v| v == 0.0) || y.iter().all(|&v| v == 1.0))
}

/// Minimize `(1/2n) sum w (y - b0 - x b)^2` (gaussian) or `(1/n)` times the
/// weighted negative log-likelihood (binomial), plus `lambda * |b|_1` on the
/// unit-variance scale. The intercept is unpenalized.
pub fn lasso_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    lambda: f64,
    weights: Option<&[f64]>,
) -> Result<LassoFit> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::config("lambda", "must be non-negative"));
    }
    check_lasso_inputs(x, y, family, weights)?;
    let s = Standardized::new(x, weights);
    let mut b0 = initial_intercept(&s, y, family);
    let mut b = vec![0.0; x.ncols()];
    if is_degenerate_binomial(y, family) {
        return Ok(s.to_original(b0, &b, lambda, 0));
    }
    let sweeps = solve_at(&s, y, family, lambda, &mut b0, &mut b)?;
    Ok(s.to_original(b0, &b, lambda, sweeps))
}

/// Smallest penalty at which every non-intercept coefficient is zero.
pub fn lambda_max(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> f64 {
    Standardized::new(x, weights).lambda_max(y)
}

/// Log-spaced grid from `lambda_max` down to `1e-4 * lambda_max`.
pub fn lambda_grid(lmax: f64) -> Vec<f64> {
    if lmax <= 0.0 {
        return vec![0.0];
    }
    (0..PATH_LENGTH)
        .map(|k| lmax * PATH_RATIO.powf(k as f64 / (PATH_LENGTH - 1) as f64))
        .collect()
}

/// Warm-started solutions along `lambdas`. Stops early (returning the prefix)
/// if a penalty fails to converge after at least one success.
pub fn lasso_path(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    lambdas: &[f64],
    weights: Option<&[f64]>,
) -> Result<Vec<LassoFit>> {
    check_lasso_inputs(x, y, family, weights)?;
    let s = Standardized::new(x, weights);
    let mut b0 = initial_intercept(&s, y, family);
    let mut b = vec![0.0; x.ncols()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if is_degenerate_binomial(y, family) {
            out.push(s.to_original(b0, &b, lambda, 0));
            continue;
        }
        match solve_at(&s, y, family, lambda, &mut b0, &mut b) {
            Ok(sweeps) => out.push(s.to_original(b0, &b, lambda, sweeps)),
            Err(e) if out.is_empty() => return Err(e),
            Err(_) => break,
        }
    }
    Ok(out)
}

fn prediction_loss(family: GlmFamily, y: &[f64], mu: &[f64], w: Option<&[f64]>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        let wi = w.map_or(1.0, |w| w[i]);
        let m = match family {
            GlmFamily::Gaussian => mu[i],
            GlmFamily::Binomial => mu[i].clamp(1e-12, 1.0 - 1e-12),
        };
        num += wi * family.unit_deviance(y[i], m);
        den += wi;
    }
    num / den
}

fn training_deviance(family: GlmFamily, fit: &LassoFit, x: &DMatrix<f64>, y: &[f64], w: Option<&[f64]>) -> f64 {
    let mu = fit.predict(family, x);
    prediction_loss(family, y, &mu, w) * y.len() as f64
}

/// Warn when the support is larger than the ultra-sparse regime suggests.
pub fn sparsity_warning(selected: usize, n: usize, p: usize) -> Option<String> {
    let bound = (n as f64).sqrt() / (p.max(n) as f64).ln();
    (selected as f64 > bound).then(|| {
        format!("selected {selected} terms exceeds sqrt(n)/log(max(p, n)) = {bound:.2}")
    })
}

/// Lasso over a 100-point path with `k_cv`-fold cross-validation; returns the
/// support at the penalty picked by `rule`.
#[allow(clippy::too_many_arguments)]
pub fn lasso_cv(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    k_cv: usize,
    rule: LambdaRule,
    seed: u64,
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<SelectionResult> {
    if k_cv < 2 {
        return Err(Error::config("k_cv", "cross-validation needs at least 2 folds"));
    }
    check_lasso_inputs(x, y, family, weights)?;
    let n = y.len();
    let s = Standardized::new(x, weights);
    let excluded_constant: Vec<String> = (0..x.ncols())
        .filter(|&j| !s.active(j))
        .map(|j| names[j].clone())
        .collect();
    let lmax = s.lambda_max(y);
    let grid = lambda_grid(lmax);

    let full = lasso_path(x, y, family, &grid, weights)?;
    let mut usable = full.len();

    let folds = make_folds(n, k_cv.min(n), &vec![0; n], seed, false)?;
    let mut fold_losses: Vec<Vec<f64>> = Vec::with_capacity(k_cv);
    for f in 0..folds.k {
        let train = folds.complement(f);
        let test = folds.fold(f);
        let xt = select_rows(x, &train);
        let yt = gather(y, &train);
        let wt = weights.map(|w| gather(w, &train));
        let xv = select_rows(x, &test);
        let yv = gather(y, &test);
        let wv = weights.map(|w| gather(w, &test));
        let path = lasso_path(&xt, &yt, family, &grid[..usable], wt.as_deref())?;
        usable = usable.min(path.len());
        fold_losses.push(
            path.iter()
                .map(|fit| prediction_loss(family, &yv, &fit.predict(family, &xv), wv.as_deref()))
                .collect(),
        );
    }

    let kf = fold_losses.len() as f64;
    let mut diagnostics = Vec::with_capacity(usable);
    for t in 0..usable {
        let losses: Vec<f64> = fold_losses.iter().map(|l| l[t]).collect();
        let m = losses.iter().sum::<f64>() / kf;
        let var = losses.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (kf - 1.0);
        diagnostics.push(PathPoint {
            lambda: grid[t],
            cv_error: m,
            cv_se: (var / kf).sqrt(),
            deviance: training_deviance(family, &full[t], x, y, weights),
            nonzero: full[t].support().len(),
        });
    }
    let best = (0..usable)
        .min_by(|&a, &b| diagnostics[a].cv_error.total_cmp(&diagnostics[b].cv_error))
        .unwrap_or(0);
    let chosen = match rule {
        LambdaRule::Min => best,
        LambdaRule::OneSe => {
            let threshold = diagnostics[best].cv_error + diagnostics[best].cv_se;
            (0..=best)
                .find(|&t| diagnostics[t].cv_error <= threshold)
                .unwrap_or(best)
        }
    };
    let support = full[chosen].support();
    let mut warnings = Vec::new();
    if let Some(w) = sparsity_warning(support.len(), n, x.ncols()) {
        warnings.push(w);
    }
    Ok(SelectionResult {
        selected_columns: support.iter().map(|&j| names[j].clone()).collect(),
        selected_indices: support,
        method: SelectionMethod::LassoCv,
        path_diagnostics: diagnostics,
        chosen_lambda: Some(grid[chosen]),
        excluded_constant,
        warnings,
    })
}

fn aic(family: GlmFamily, fit: &GlmFit, y: &[f64], w: Option<&[f64]>) -> f64 {
    let k = fit.coefficients.len() as f64;
    match family {
        GlmFamily::Binomial => fit.deviance + 2.0 * k,
        GlmFamily::Gaussian => {
            // -2 log-likelihood with the dispersion profiled out, up to a constant.
            let n = w.map_or(y.len() as f64, |w| w.iter().sum());
            let ybar = w.map_or_else(
                || y.iter().sum::<f64>() / y.len() as f64,
                |w| y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / n,
            );
            let tss: f64 = (0..y.len())
                .map(|i| w.map_or(1.0, |w| w[i]) * (y[i] - ybar).powi(2))
                .sum();
            let rss = fit.deviance.max(f64::EPSILON * tss).max(f64::MIN_POSITIVE);
            n * (rss / n).ln() + 2.0 * k
        }
    }
}

/// Forward selection by AIC. Candidates that cause separation or a singular
/// design at a step are skipped for that step. Ties go to the lower index.
pub fn stepwise_aic(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    max_terms: usize,
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<SelectionResult> {
    if max_terms > x.ncols() {
        return Err(Error::config("max_terms", format!("{max_terms} exceeds {} candidates", x.ncols())));
    }
    let s = Standardized::new(x, weights);
    let excluded_constant: Vec<String> = (0..x.ncols())
        .filter(|&j| !s.active(j))
        .map(|j| names[j].clone())
        .collect();
    let mut selected: Vec<usize> = Vec::new();
    let base = fit_ml(&select_cols(x, &selected), y, family, weights, None)?;
    let mut current = aic(family, &base, y, weights);
    while selected.len() < max_terms {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..x.ncols() {
            if selected.contains(&j) || !s.active(j) {
                continue;
            }
            let mut cols = selected.clone();
            cols.push(j);
            let fit = match fit_ml(&select_cols(x, &cols), y, family, weights, None) {
                Ok(f) => f,
                Err(Error::Separation { .. }) | Err(Error::Singular(_)) | Err(Error::NonConvergence { .. }) => continue,
                Err(e) => return Err(e),
            };
            let a = aic(family, &fit, y, weights);
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((j, a));
            }
        }
        match best {
            Some((j, a)) if a < current => {
                selected.push(j);
                current = a;
            }
            _ => break,
        }
    }
    selected.sort_unstable();
    let mut warnings = Vec::new();
    if let Some(w) = sparsity_warning(selected.len(), y.len(), x.ncols()) {
        warnings.push(w);
    }
    Ok(SelectionResult {
        selected_columns: selected.iter().map(|&j| names[j].clone()).collect(),
        selected_indices: selected,
        method: SelectionMethod::StepwiseAic,
        path_diagnostics: Vec::new(),
        chosen_lambda: None,
        excluded_constant,
        warnings,
    })
}

/// Run the configured selector on the fitting rows.
pub fn select(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    selector: &Selector,
    seed: u64,
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<SelectionResult> {
    match selector {
        Selector::LassoCv { k_cv, lambda_rule } => {
            lasso_cv(x, y, family, *k_cv, *lambda_rule, seed, weights, names)
        }
        Selector::StepwiseAic { max_terms } => {
            stepwise_aic(x, y, family, max_terms.unwrap_or(x.ncols()), weights, names)
        }
        Selector::None => Ok(SelectionResult::all(names)),
    }
}

/// Unpenalized GLM on a column subset of a wider candidate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetModel {
    pub columns: Vec<usize>,
    pub fit: GlmFit,
}

impl SubsetModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        glm::predict(&self.fit, &select_cols(x, &self.columns), None)
    }

    /// Non-intercept parameter count.
    pub fn n_slopes(&self) -> usize {
        self.columns.len()
    }
}

/// Selected columns followed by forced columns not already selected.
pub fn refit_columns(selected: &SelectionResult, forced: &[usize]) -> Vec<usize> {
    let mut cols = selected.selected_indices.clone();
    for &f in forced {
        if !cols.contains(&f) {
            cols.push(f);
        }
    }
    cols
}

/// Maximum-likelihood refit with intercept on `selected ∪ forced`.
pub fn post_selection_refit(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    selected: &SelectionResult,
    forced: &[usize],
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<SubsetModel> {
    refit_on(x, y, family, refit_columns(selected, forced), weights, names, false)
}

/// Same support logic, fitted by least squares on the response scale.
pub fn post_selection_refit_least_squares(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    selected: &SelectionResult,
    forced: &[usize],
    weights: Option<&[f64]>,
    names: &[String],
) -> Result<SubsetModel> {
    refit_on(x, y, family, refit_columns(selected, forced), weights, names, true)
}

fn refit_on(
    x: &DMatrix<f64>,
    y: &[f64],
    family: GlmFamily,
    columns: Vec<usize>,
    weights: Option<&[f64]>,
    names: &[String],
    least_squares: bool,
) -> Result<SubsetModel> {
    let sub = select_cols(x, &columns);
    let mut fit = if least_squares {
        fit_least_squares(&sub, y, family, weights)?
    } else {
        fit_ml(&sub, y, family, weights, None)?
    };
    fit.column_names = columns.iter().map(|&j| names[j].clone()).collect();
    Ok(SubsetModel { columns, fit })
}
