//! Outcome learners for the cross-fitting and strong-null estimators.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{gather, make_folds, select_rows};
use crate::error::{Error, Result};
use crate::glm::{fit_ml, predict, GlmFamily, GlmFit};
use crate::linalg::solve_spd;
use crate::selection::{lasso_cv, post_selection_refit, LambdaRule, SubsetModel};

/// A trained prediction rule. Predictions are on the outcome scale.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn family(&self) -> GlmFamily;

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>>;

    /// Predictions with binomial outputs clamped to `[0, 1]`, plus the number
    /// of values that needed clamping.
    fn predict_counted(&self, x: &DMatrix<f64>) -> Result<(Vec<f64>, usize)> {
        let mut p = self.predict_raw(x)?;
        let mut clamped = 0;
        if self.family() == GlmFamily::Binomial {
            for v in p.iter_mut() {
                if *v < 0.0 || *v > 1.0 {
                    *v = v.clamp(0.0, 1.0);
                    clamped += 1;
                }
            }
        }
        Ok((p, clamped))
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.predict_counted(x)?.0)
    }
}

/// Training sees only the rows it is handed.
pub trait Learner: Send + Sync {
    fn name(&self) -> &'static str;

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        seed: u64,
    ) -> Result<Box<dyn Predictor>>;
}

/// Learner identifiers accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerId {
    PostLasso,
    Ridge,
    Knn,
    Constant,
    WrongModel,
}

impl LearnerId {
    pub fn build(self) -> Box<dyn Learner> {
        match self {
            LearnerId::PostLasso => Box::new(PostLasso::default()),
            LearnerId::Ridge => Box::new(Ridge::default()),
            LearnerId::Knn => Box::new(Knn::default()),
            LearnerId::Constant => Box::new(Constant),
            LearnerId::WrongModel => Box::new(WrongModel),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::config("learner", format!("unknown learner {s:?}")))
    }
}

fn check_training(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch("x rows and y differ".into()));
    }
    if y.is_empty() {
        return Err(Error::InvalidData("no training rows".into()));
    }
    if weights.is_some_and(|w| w.len() != y.len()) {
        return Err(Error::DimensionMismatch("weights".into()));
    }
    Ok(())
}

fn weighted_mean(y: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        Some(w) => y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>(),
        None => y.iter().sum::<f64>() / y.len() as f64,
    }
}

/// Lasso with cross-validated penalty, then an unpenalized refit on the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostLasso {
    pub k_cv: usize,
    pub rule: LambdaRule,
}

impl Default for PostLasso {
    fn default() -> Self {
        Self {
            k_cv: 5,
            rule: LambdaRule::OneSe,
        }
    }
}

#[derive(Debug, Clone)]
struct SubsetPredictor {
    family: GlmFamily,
    model: SubsetModel,
}

impl Predictor for SubsetPredictor {
    fn family(&self) -> GlmFamily {
        self.family
    }

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.model.predict(x)
    }
}

impl Learner for PostLasso {
    fn name(&self) -> &'static str {
        "post_lasso"
    }

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        check_training(x, y, weights)?;
        let names: Vec<String> = (0..x.ncols()).map(|j| format!("c{j}")).collect();
        let k = self.k_cv.min(y.len());
        let sel = lasso_cv(x, y, family, k, self.rule, seed, weights, &names)?;
        let model = post_selection_refit(x, y, family, &sel, &[], weights, &names)?;
        Ok(Box::new(SubsetPredictor { family, model }))
    }
}

/// Linear ridge regression on standardized columns, penalty chosen by
/// cross-validated squared error over a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub lambda_grid: Vec<f64>,
    pub k_cv: usize,
}

impl Default for Ridge {
    fn default() -> Self {
        Self {
            lambda_grid: (-4..=4).map(|e| 10f64.powi(e)).collect(),
            k_cv: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    family: GlmFamily,
}

impl Predictor for RidgeFit {
    fn family(&self) -> GlmFamily {
        self.family
    }

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch("ridge columns".into()));
        }
        Ok((0..x.nrows())
            .map(|i| self.intercept + (0..x.ncols()).map(|j| self.coefficients[j] * x[(i, j)]).sum::<f64>())
            .collect())
    }
}

/// Minimize `(1/2n) sum w (y - b0 - x~ b)^2 + (lambda/2) |b|^2` with `x~` the
/// weighted-standardized columns; coefficients are returned on the raw scale.
pub fn ridge_fit(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>, lambda: f64) -> Result<RidgeFit> {
    check_training(x, y, weights)?;
    let n = y.len();
    let p = x.ncols();
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; n], |w| w.to_vec());
    let wsum: f64 = w.iter().sum();
    let ybar = weighted_mean(y, Some(&w));
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        means[j] = (0..n).map(|i| w[i] * x[(i, j)]).sum::<f64>() / wsum;
        let var = (0..n).map(|i| w[i] * (x[(i, j)] - means[j]).powi(2)).sum::<f64>() / wsum;
        sds[j] = var.sqrt();
    }
    let active: Vec<usize> = (0..p).filter(|&j| sds[j] > 1e-12 * (1.0 + means[j].abs())).collect();
    let q = active.len();
    let xs = DMatrix::from_fn(n, q, |i, a| {
        let j = active[a];
        (x[(i, j)] - means[j]) / sds[j]
    });
    let mut gram = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    for i in 0..n {
        for a in 0..q {
            rhs[a] += w[i] * xs[(i, a)] * (y[i] - ybar) / wsum;
            for b in 0..q {
                gram[(a, b)] += w[i] * xs[(i, a)] * xs[(i, b)] / wsum;
            }
        }
    }
    for a in 0..q {
        gram[(a, a)] += lambda;
    }
    let b = if q == 0 { DVector::zeros(0) } else { solve_spd(&gram, &rhs)? };
    let mut coefficients = vec![0.0; p];
    let mut intercept = ybar;
    for (a, &j) in active.iter().enumerate() {
        coefficients[j] = b[a] / sds[j];
        intercept -= coefficients[j] * means[j];
    }
    Ok(RidgeFit {
        intercept,
        coefficients,
        lambda,
        family: GlmFamily::Gaussian,
    })
}

impl Learner for Ridge {
    fn name(&self) -> &'static str {
        "ridge"
    }

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        check_training(x, y, weights)?;
        let n = y.len();
        let k = self.k_cv.min(n);
        let lambda = if self.lambda_grid.len() == 1 || k < 2 {
            self.lambda_grid[0]
        } else {
            let folds = make_folds(n, k, &vec![0; n], seed, false)?;
            let mut best = (f64::INFINITY, self.lambda_grid[0]);
            for &lambda in &self.lambda_grid {
                let mut sse = 0.0;
                for f in 0..folds.k {
                    let train = folds.complement(f);
                    let test = folds.fold(f);
                    let wt = weights.map(|w| gather(w, &train));
                    let fit = ridge_fit(&select_rows(x, &train), &gather(y, &train), wt.as_deref(), lambda)?;
                    let pred = fit.predict_raw(&select_rows(x, &test))?;
                    sse += test
                        .iter()
                        .zip(&pred)
                        .map(|(&i, p)| weights.map_or(1.0, |w| w[i]) * (y[i] - p).powi(2))
                        .sum::<f64>();
                }
                if sse < best.0 {
                    best = (sse, lambda);
                }
            }
            best.1
        };
        let mut fit = ridge_fit(x, y, weights, lambda)?;
        fit.family = family;
        Ok(Box::new(fit))
    }
}

/// k-nearest-neighbour regression on training-standardized columns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Knn {
    /// Defaults to `ceil(sqrt(n_train))`.
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct KnnPredictor {
    family: GlmFamily,
    k: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Standardized training rows, row-major.
    train: Vec<Vec<f64>>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl KnnPredictor {
    fn standardize(&self, x: &DMatrix<f64>, i: usize) -> Vec<f64> {
        (0..self.means.len())
            .map(|j| (x[(i, j)] - self.means[j]) * self.scales[j])
            .collect()
    }
}

impl Predictor for KnnPredictor {
    fn family(&self) -> GlmFamily {
        self.family
    }

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch("knn columns".into()));
        }
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        let mut out = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let q = self.standardize(x, i);
            dist.clear();
            for (t, row) in self.train.iter().enumerate() {
                let d2: f64 = row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                dist.push((d2, t));
            }
            let k = self.k;
            if k < dist.len() {
                dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            }
            let (num, den) = dist[..k]
                .iter()
                .fold((0.0, 0.0), |(s, w), &(_, t)| (s + self.w[t] * self.y[t], w + self.w[t]));
            out.push(num / den);
        }
        Ok(out)
    }
}

impl Knn {
    pub fn fit(&self, x: &DMatrix<f64>, y: &[f64], family: GlmFamily, weights: Option<&[f64]>) -> Result<KnnPredictor> {
        check_training(x, y, weights)?;
        let n = y.len();
        let k = self.k.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).clamp(1, n);
        let p = x.ncols();
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let m = x.column(j).sum() / n as f64;
            let sd = (x.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            means[j] = m;
            scales[j] = if sd > 1e-12 * (1.0 + m.abs()) { 1.0 / sd } else { 0.0 };
        }
        let mut pred = KnnPredictor {
            family,
            k,
            means,
            scales,
            train: Vec::with_capacity(n),
            y: y.to_vec(),
            w: weights.map_or_else(|| vec![1.0; n], |w| w.to_vec()),
        };
        pred.train = (0..n).map(|i| pred.standardize(x, i)).collect();
        Ok(pred)
    }
}

impl Learner for Knn {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        _seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(self.fit(x, y, family, weights)?))
    }
}

/// Predicts the training mean regardless of covariates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPredictor {
    pub family: GlmFamily,
    pub value: f64,
}

impl Predictor for ConstantPredictor {
    fn family(&self) -> GlmFamily {
        self.family
    }

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(vec![self.value; x.nrows()])
    }
}

impl Learner for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        _seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        check_training(x, y, weights)?;
        Ok(Box::new(ConstantPredictor {
            family,
            value: weighted_mean(y, weights),
        }))
    }
}

/// Main-effects canonical GLM on every column, whatever the true mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrongModel;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmPredictor {
    pub fit: GlmFit,
}

impl Predictor for GlmPredictor {
    fn family(&self) -> GlmFamily {
        self.fit.family
    }

    fn predict_raw(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        predict(&self.fit, x, None)
    }
}

impl Learner for WrongModel {
    fn name(&self) -> &'static str {
        "wrong_model"
    }

    fn train(
        &self,
        x: &DMatrix<f64>,
        y: &[f64],
        family: GlmFamily,
        weights: Option<&[f64]>,
        _seed: u64,
    ) -> Result<Box<dyn Predictor>> {
        check_training(x, y, weights)?;
        Ok(Box::new(GlmPredictor {
            fit: fit_ml(x, y, family, weights, None)?,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn linear(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| rng.sample(StandardNormal));
        let y = (0..n)
            .map(|i| 1.0 + x[(i, 0)] - 0.5 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        (x, y)
    }

    fn quadratic(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: DMatrix<f64> = DMatrix::from_fn(n, 2, |_, _| rng.sample(StandardNormal));
        let y = (0..n)
            .map(|i| x[(i, 0)].powi(2) + x[(i, 0)] * x[(i, 1)] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (x, y)
    }

    fn mse(p: &dyn Predictor, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let pred = p.predict(x).unwrap();
        y.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn post_lasso_beats_constant_out_of_sample() {
        let (x, y) = linear(500, 1);
        let (xt, yt) = linear(500, 2);
        let a = PostLasso::default().train(&x, &y, GlmFamily::Gaussian, None, 3).unwrap();
        let b = Constant.train(&x, &y, GlmFamily::Gaussian, None, 3).unwrap();
        assert!(mse(a.as_ref(), &xt, &yt) < mse(b.as_ref(), &xt, &yt));
        let again = PostLasso::default().train(&x, &y, GlmFamily::Gaussian, None, 3).unwrap();
        assert_eq!(a.predict(&xt).unwrap(), again.predict(&xt).unwrap());
    }

    #[test]
    fn post_lasso_empty_model_predicts_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(40, 1, |_, _| rng.sample(StandardNormal));
        let y: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
        let l = PostLasso { k_cv: 5, rule: LambdaRule::OneSe };
        let p = l.train(&x, &y, GlmFamily::Gaussian, None, 7).unwrap();
        let ybar = y.iter().sum::<f64>() / 40.0;
        let pred = p.predict(&x).unwrap();
        // pinned: the one-SE rule keeps the empty model on this draw
        assert!(pred.iter().all(|v| (v - ybar).abs() < 1e-12));
    }

    #[test]
    fn ridge_limits_and_normal_equations() {
        let (x, y) = linear(30, 4);
        let r = ridge_fit(&x, &y, None, 0.0).unwrap();
        let m = fit_ml(&x, &y, GlmFamily::Gaussian, None, None).unwrap();
        assert!((r.intercept - m.coefficients[0]).abs() < 1e-8);
        for j in 0..4 {
            assert!((r.coefficients[j] - m.coefficients[j + 1]).abs() < 1e-8);
        }
        let big = ridge_fit(&x, &y, None, 1e12).unwrap();
        let ybar = y.iter().sum::<f64>() / 30.0;
        assert!(big.predict_raw(&x).unwrap().iter().all(|v| (v - ybar).abs() < 1e-9));

        // 5x2 hand problem: oracle solves (Xc'Xc/n + lambda D) b = Xc'yc/n on the
        // raw scale, D = diag(population variances).
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, 1.0, 4.0, 3.0, 5.0, 2.0]);
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let lambda = 0.5;
        let fit = ridge_fit(&x, &y, None, lambda).unwrap();
        let xm = [3.0, 1.4];
        let ym = 3.0;
        let mut s = [[0.0; 2]; 2];
        let mut r = [0.0; 2];
        for i in 0..5 {
            for a in 0..2 {
                r[a] += (x[(i, a)] - xm[a]) * (y[i] - ym) / 5.0;
                for b in 0..2 {
                    s[a][b] += (x[(i, a)] - xm[a]) * (x[(i, b)] - xm[b]) / 5.0;
                }
            }
        }
        let m = [[s[0][0] * (1.0 + lambda), s[0][1]], [s[1][0], s[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let b0 = (m[1][1] * r[0] - m[0][1] * r[1]) / det;
        let b1 = (m[0][0] * r[1] - m[1][0] * r[0]) / det;
        assert!((fit.coefficients[0] - b0).abs() < 1e-12);
        assert!((fit.coefficients[1] - b1).abs() < 1e-12);
        assert!((fit.intercept - (ym - b0 * xm[0] - b1 * xm[1])).abs() < 1e-12);
    }

    #[test]
    fn knn_examples() {
        let (x, y) = linear(12, 5);
        let all = Knn { k: Some(12) }.fit(&x, &y, GlmFamily::Gaussian, None).unwrap();
        let ybar = y.iter().sum::<f64>() / 12.0;
        assert!(all.predict(&x).unwrap().iter().all(|v| (v - ybar).abs() < 1e-12));
        let one = Knn { k: Some(1) }.fit(&x, &y, GlmFamily::Gaussian, None).unwrap();
        assert_eq!(one.predict(&x).unwrap(), y);

        // six points on a line; standardized distance is proportional to raw.
        let x = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 2.0, 3.0, 4.0, 10.0]);
        let y = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let knn = Knn { k: Some(2) }.fit(&x, &y, GlmFamily::Gaussian, None).unwrap();
        let q = DMatrix::from_column_slice(3, 1, &[2.5, 1.5, 9.0]);
        let pred = knn.predict(&q).unwrap();
        // exhaustive oracle with lower-index tie breaking
        for (r, &v) in [2.5f64, 1.5, 9.0].iter().enumerate() {
            let mut idx: Vec<usize> = (0..6).collect();
            idx.sort_by(|&a, &b| (x[(a, 0)] - v).abs().total_cmp(&(x[(b, 0)] - v).abs()).then(a.cmp(&b)));
            let want = (y[idx[0]] + y[idx[1]]) / 2.0;
            assert!((pred[r] - want).abs() < 1e-12, "{r}");
        }
        assert_eq!(pred, vec![6.0, 3.0, 24.0]);
    }

    #[test]
    fn constant_learner() {
        let (x, y) = linear(20, 6);
        let p = Constant.train(&x, &y, GlmFamily::Gaussian, None, 0).unwrap();
        let ybar = y.iter().sum::<f64>() / 20.0;
        assert!(p.predict(&x).unwrap().iter().all(|&v| v == ybar));
        let yb: Vec<f64> = (0..20).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let p = Constant.train(&x, &yb, GlmFamily::Binomial, None, 0).unwrap();
        assert!(p.predict(&x).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn wrong_model_on_quadratic_truth() {
        let (x, y) = quadratic(400, 8);
        let (xt, yt) = quadratic(400, 9);
        let wrong = WrongModel.train(&x, &y, GlmFamily::Gaussian, None, 0).unwrap();
        let expanded = |x: &DMatrix<f64>| {
            DMatrix::from_fn(x.nrows(), 4, |i, j| match j {
                0 | 1 => x[(i, j)],
                2 => x[(i, 0)].powi(2),
                _ => x[(i, 0)] * x[(i, 1)],
            })
        };
        let oracle = WrongModel.train(&expanded(&x), &y, GlmFamily::Gaussian, None, 0).unwrap();
        assert!(mse(wrong.as_ref(), &xt, &yt) > mse(oracle.as_ref(), &expanded(&xt), &yt));
        let again = WrongModel.train(&x, &y, GlmFamily::Gaussian, None, 0).unwrap();
        assert_eq!(wrong.predict(&xt).unwrap(), again.predict(&xt).unwrap());

        // on a linear truth the main-effects fit tracks post-lasso closely
        let (x, y) = linear(500, 10);
        let (xt, yt) = linear(500, 11);
        let w = WrongModel.train(&x, &y, GlmFamily::Gaussian, None, 0).unwrap();
        let l = PostLasso::default().train(&x, &y, GlmFamily::Gaussian, None, 0).unwrap();
        assert!((mse(w.as_ref(), &xt, &yt) / mse(l.as_ref(), &xt, &yt) - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_learner_on_binary_outcome_is_clamped() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let p = Ridge { lambda_grid: vec![0.0], k_cv: 5 }
            .train(&x, &y, GlmFamily::Binomial, None, 0)
            .unwrap();
        let far = DMatrix::from_column_slice(2, 1, &[-50.0, 50.0]);
        let (pred, clamped) = p.predict_counted(&far).unwrap();
        assert_eq!(pred, vec![0.0, 1.0]);
        assert_eq!(clamped, 2);
    }

    #[test]
    fn identifiers_round_trip() {
        for id in ["post_lasso", "ridge", "knn", "constant", "wrong_model"] {
            assert_eq!(LearnerId::parse(id).unwrap().build().name(), id);
        }
        assert!(LearnerId::parse("forest").is_err());
    }
}
