//! Influence-function standard errors. Every estimator reduces to a pair of
//! per-participant contribution vectors, one per arm mean.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{FoldPlan, TrialDataset};
use crate::error::{Error, Result};
use crate::linalg::{mean, sample_variance, solve_spd};

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959964;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceVector {
    pub values: Vec<f64>,
    pub centered: bool,
}

impl InfluenceVector {
    pub fn centered(mut values: Vec<f64>) -> Self {
        let m = mean(&values);
        for v in values.iter_mut() {
            *v -= m;
        }
        Self {
            values,
            centered: true,
        }
    }

    /// `sqrt(sample variance / n)`.
    pub fn se(&self) -> f64 {
        (sample_variance(&self.values) / self.values.len() as f64).sqrt()
    }
}

/// Uncentered contributions for `mu1` and `mu0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmContributions {
    pub mu1: Vec<f64>,
    pub mu0: Vec<f64>,
}

impl ArmContributions {
    pub fn difference(&self) -> InfluenceVector {
        InfluenceVector::centered(self.mu1.iter().zip(&self.mu0).map(|(a, b)| a - b).collect())
    }

    pub fn se(&self) -> f64 {
        self.difference().se()
    }

    pub fn into_centered(self) -> (Vec<f64>, Vec<f64>) {
        (
            InfluenceVector::centered(self.mu1).values,
            InfluenceVector::centered(self.mu0).values,
        )
    }
}

/// Standard error of `mu1 - mu0` from per-arm contributions.
pub fn se_of_difference(if_mu1: &[f64], if_mu0: &[f64]) -> f64 {
    InfluenceVector::centered(if_mu1.iter().zip(if_mu0).map(|(a, b)| a - b).collect()).se()
}

pub fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi < 1.0 {
        Ok(())
    } else {
        Err(Error::DegeneratePi(pi))
    }
}

fn check_lengths(d: &TrialDataset, yhat1: &[f64], yhat0: &[f64]) -> Result<()> {
    if yhat1.len() != d.n() || yhat0.len() != d.n() {
        return Err(Error::LengthMismatch(format!(
            "predictions have lengths {} and {}, dataset has {} rows",
            yhat1.len(),
            yhat0.len(),
            d.n()
        )));
    }
    Ok(())
}

/// `Z/p (Y - Yhat1) + Yhat1` and `(1-Z)/(1-p) (Y - Yhat0) + Yhat0` with a
/// per-participant probability.
pub fn aipw_contributions(d: &TrialDataset, yhat1: &[f64], yhat0: &[f64], pi: &[f64]) -> ArmContributions {
    let (y, z) = (d.y(), d.z());
    let mut mu1 = Vec::with_capacity(d.n());
    let mut mu0 = Vec::with_capacity(d.n());
    for i in 0..d.n() {
        let zi = z[i] as f64;
        mu1.push(zi / pi[i] * (y[i] - yhat1[i]) + yhat1[i]);
        mu0.push((1.0 - zi) / (1.0 - pi[i]) * (y[i] - yhat0[i]) + yhat0[i]);
    }
    ArmContributions { mu1, mu0 }
}

/// Plain AIPW influence values with a single probability.
pub fn if_variance_simple(yhat1: &[f64], yhat0: &[f64], d: &TrialDataset, pi_hat: f64) -> Result<(f64, InfluenceVector)> {
    check_pi(pi_hat)?;
    check_lengths(d, yhat1, yhat0)?;
    let iv = aipw_contributions(d, yhat1, yhat0, &vec![pi_hat; d.n()]).difference();
    Ok((iv.se(), iv))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FoldPi {
    Known(f64),
    /// Treated fraction of each fold, with the matching correction terms.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossfitParts {
    pub contributions: ArmContributions,
    /// Average over folds of the fold means.
    pub mu1_hat: f64,
    pub mu0_hat: f64,
    pub fold_theta: Vec<f64>,
    pub pi: Vec<f64>,
}

pub fn fold_treated_fraction(d: &TrialDataset, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| d.z()[i] as f64).sum::<f64>() / rows.len() as f64
}

/// Cross-fit AIPW contributions. With an estimated probability, participant
/// `i` in fold `k` gets `-c1_k (Z_i - pi_k)` on the arm-1 value and
/// `+c0_k (Z_i - pi_k)` on the arm-0 value, where `c_z` are fold means of the
/// inverse-weighted residuals divided by the squared probability.
pub fn crossfit_contributions(
    yhat1: &[f64],
    yhat0: &[f64],
    d: &TrialDataset,
    folds: &FoldPlan,
    pi: FoldPi,
) -> Result<CrossfitParts> {
    check_lengths(d, yhat1, yhat0)?;
    if folds.n() != d.n() {
        return Err(Error::LengthMismatch("fold plan and dataset differ in size".into()));
    }
    let (y, z) = (d.y(), d.z());
    let n = d.n();
    let mut mu1 = vec![0.0; n];
    let mut mu0 = vec![0.0; n];
    let mut fold_mu1 = Vec::with_capacity(folds.k);
    let mut fold_mu0 = Vec::with_capacity(folds.k);
    let mut pis = Vec::with_capacity(folds.k);
    for k in 0..folds.k {
        let rows = folds.fold(k);
        let p = match pi {
            FoldPi::Known(p) => {
                check_pi(p)?;
                p
            }
            FoldPi::Estimated => {
                let p = fold_treated_fraction(d, &rows);
                if p <= 0.0 || p >= 1.0 {
                    return Err(Error::DegenerateFold { fold: k, pi: p });
                }
                p
            }
        };
        pis.push(p);
        let m = rows.len() as f64;
        let (mut s1, mut s0, mut r1, mut r0) = (0.0, 0.0, 0.0, 0.0);
        for &i in &rows {
            let zi = z[i] as f64;
            let v1 = zi / p * (y[i] - yhat1[i]) + yhat1[i];
            let v0 = (1.0 - zi) / (1.0 - p) * (y[i] - yhat0[i]) + yhat0[i];
            mu1[i] = v1;
            mu0[i] = v0;
            s1 += v1;
            s0 += v0;
            r1 += zi * (y[i] - yhat1[i]);
            r0 += (1.0 - zi) * (y[i] - yhat0[i]);
        }
        fold_mu1.push(s1 / m);
        fold_mu0.push(s0 / m);
        if pi == FoldPi::Estimated {
            let c1 = r1 / m / (p * p);
            let c0 = r0 / m / ((1.0 - p) * (1.0 - p));
            for &i in &rows {
                let dz = z[i] as f64 - p;
                mu1[i] -= c1 * dz;
                mu0[i] += c0 * dz;
            }
        }
    }
    Ok(CrossfitParts {
        contributions: ArmContributions { mu1, mu0 },
        mu1_hat: mean(&fold_mu1),
        mu0_hat: mean(&fold_mu0),
        fold_theta: fold_mu1.iter().zip(&fold_mu0).map(|(a, b)| a - b).collect(),
        pi: pis,
    })
}

pub fn if_variance_crossfit(
    yhat1: &[f64],
    yhat0: &[f64],
    d: &TrialDataset,
    folds: &FoldPlan,
    pi: FoldPi,
) -> Result<(f64, InfluenceVector)> {
    let iv = crossfit_contributions(yhat1, yhat0, d, folds, pi)?.contributions.difference();
    Ok((iv.se(), iv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongNullParts {
    pub contributions: ArmContributions,
    pub mu1_hat: f64,
    pub mu0_hat: f64,
}

/// Pooled-model contributions. With an estimated probability the arm-1 value
/// carries `-M1 (Z - pi)` and the arm-0 value `+M0 (Z - pi)`, with
/// `M1 = mean(Z (Y - h)) / pi^2` and `M0 = mean((1-Z)(Y - h)) / (1-pi)^2`.
pub fn strong_null_contributions(h: &[f64], d: &TrialDataset, pi: f64, known: bool) -> Result<StrongNullParts> {
    check_pi(pi)?;
    check_lengths(d, h, h)?;
    let base = aipw_contributions(d, h, h, &vec![pi; d.n()]);
    let mu1_hat = mean(&base.mu1);
    let mu0_hat = mean(&base.mu0);
    let ArmContributions { mut mu1, mut mu0 } = base;
    if !known {
        let (y, z) = (d.y(), d.z());
        let n = d.n() as f64;
        let m1 = (0..d.n()).map(|i| z[i] as f64 * (y[i] - h[i])).sum::<f64>() / n / (pi * pi);
        let m0 = (0..d.n()).map(|i| (1.0 - z[i] as f64) * (y[i] - h[i])).sum::<f64>() / n / ((1.0 - pi) * (1.0 - pi));
        for i in 0..d.n() {
            let dz = z[i] as f64 - pi;
            mu1[i] -= m1 * dz;
            mu0[i] += m0 * dz;
        }
    }
    Ok(StrongNullParts {
        contributions: ArmContributions { mu1, mu0 },
        mu1_hat,
        mu0_hat,
    })
}

pub fn if_variance_strong_null(h: &[f64], d: &TrialDataset, pi: f64, known: bool) -> Result<(f64, InfluenceVector)> {
    let iv = strong_null_contributions(h, d, pi, known)?.contributions.difference();
    Ok((iv.se(), iv))
}

/// Logistic propensity model fitted separately within each fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPropensity<'a> {
    pub folds: &'a FoldPlan,
    /// Propensity design with a leading intercept column, all `n` rows.
    pub design: &'a DMatrix<f64>,
    /// Fitted probabilities from the fold's own model.
    pub p_hat: &'a [f64],
}

/// Cross-fit AIPW with a pointwise propensity and the score correction
/// `c1' A^-1 s_i` (arm 1) and `-c0' A^-1 s_i` (arm 0), with `c`, `A` fold means.
pub fn parametric_ps_contributions(
    yhat1: &[f64],
    yhat0: &[f64],
    d: &TrialDataset,
    ps: &FoldPropensity<'_>,
) -> Result<CrossfitParts> {
    check_lengths(d, yhat1, yhat0)?;
    let (y, z) = (d.y(), d.z());
    let n = d.n();
    let q = ps.design.ncols();
    if ps.design.nrows() != n || ps.p_hat.len() != n {
        return Err(Error::LengthMismatch("propensity design or probabilities".into()));
    }
    let mut mu1 = vec![0.0; n];
    let mut mu0 = vec![0.0; n];
    let mut fold_mu1 = Vec::with_capacity(ps.folds.k);
    let mut fold_mu0 = Vec::with_capacity(ps.folds.k);
    let mut pis = Vec::with_capacity(ps.folds.k);
    for k in 0..ps.folds.k {
        let rows = ps.folds.fold(k);
        let m = rows.len() as f64;
        let mut neg_a = DMatrix::<f64>::zeros(q, q);
        let mut c1 = DVector::<f64>::zeros(q);
        let mut c0 = DVector::<f64>::zeros(q);
        let (mut s1, mut s0) = (0.0, 0.0);
        for &i in &rows {
            let p = ps.p_hat[i];
            check_pi(p)?;
            let zi = z[i] as f64;
            let v1 = zi / p * (y[i] - yhat1[i]) + yhat1[i];
            let v0 = (1.0 - zi) / (1.0 - p) * (y[i] - yhat0[i]) + yhat0[i];
            mu1[i] = v1;
            mu0[i] = v0;
            s1 += v1;
            s0 += v0;
            let w1 = zi * (y[i] - yhat1[i]) * (1.0 - p) / p;
            let w0 = (1.0 - zi) * (y[i] - yhat0[i]) * p / (1.0 - p);
            let pq = p * (1.0 - p);
            for a in 0..q {
                let xa = ps.design[(i, a)];
                c1[a] += w1 * xa;
                c0[a] += w0 * xa;
                for b in 0..q {
                    neg_a[(a, b)] += pq * xa * ps.design[(i, b)];
                }
            }
        }
        neg_a /= m;
        c1 /= m;
        c0 /= m;
        // c' A^-1 s = -(neg_a^-1 c)' s
        let g1 = solve_spd(&neg_a, &c1)?;
        let g0 = solve_spd(&neg_a, &c0)?;
        for &i in &rows {
            let r = z[i] as f64 - ps.p_hat[i];
            let (mut t1, mut t0) = (0.0, 0.0);
            for a in 0..q {
                t1 += g1[a] * ps.design[(i, a)] * r;
                t0 += g0[a] * ps.design[(i, a)] * r;
            }
            mu1[i] -= t1;
            mu0[i] += t0;
        }
        fold_mu1.push(s1 / m);
        fold_mu0.push(s0 / m);
        pis.push(rows.iter().map(|&i| ps.p_hat[i]).sum::<f64>() / m);
    }
    Ok(CrossfitParts {
        contributions: ArmContributions { mu1, mu0 },
        mu1_hat: mean(&fold_mu1),
        mu0_hat: mean(&fold_mu0),
        fold_theta: fold_mu1.iter().zip(&fold_mu0).map(|(a, b)| a - b).collect(),
        pi: pis,
    })
}

pub fn if_variance_parametric_ps(
    yhat1: &[f64],
    yhat0: &[f64],
    d: &TrialDataset,
    ps: &FoldPropensity<'_>,
) -> Result<(f64, InfluenceVector)> {
    let iv = parametric_ps_contributions(yhat1, yhat0, d, ps)?.contributions.difference();
    Ok((iv.se(), iv))
}

/// Variance inflation `[(n0-p0-1)^-1 + (n1-p1-1)^-1] / [(n0-1)^-1 + (n1-1)^-1]`,
/// where `p_z` counts the non-intercept parameters of the arm-`z` model.
pub fn small_sample_factor(n0: usize, p0: usize, n1: usize, p1: usize) -> Result<f64> {
    if n0 < p0 + 2 || n1 < p1 + 2 {
        return Err(Error::DomainError(format!(
            "small-sample factor needs n_z > p_z + 1 (n0 = {n0}, p0 = {p0}, n1 = {n1}, p1 = {p1})"
        )));
    }
    let inv = |v: usize| 1.0 / v as f64;
    Ok((inv(n0 - p0 - 1) + inv(n1 - p1 - 1)) / (inv(n0 - 1) + inv(n1 - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dataset(n: usize, seed: u64) -> TrialDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = DMatrix::from_fn(n, 1, |_, _| rng.sample(StandardNormal));
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * z[i] as f64 + x[(i, 0)] + rng.sample::<f64, _>(StandardNormal) * (1.0 + z[i] as f64))
            .collect();
        TrialDataset::new(y, z, x, vec!["x1".into()]).unwrap()
    }

    fn arm_means(d: &TrialDataset) -> (Vec<f64>, Vec<f64>) {
        let m = |a: u8| {
            let r = d.arm_rows(a);
            r.iter().map(|&i| d.y()[i]).sum::<f64>() / r.len() as f64
        };
        (vec![m(1); d.n()], vec![m(0); d.n()])
    }

    #[test]
    fn arm_means_match_two_sample_formula() {
        let d = dataset(200, 1);
        let (h1, h0) = arm_means(&d);
        let pi = d.arm_size(1) as f64 / 200.0;
        let (se, iv) = if_variance_simple(&h1, &h0, &d, pi).unwrap();
        assert!(iv.centered && mean(&iv.values).abs() < 1e-12);
        let arm = |a: u8| d.arm_rows(a).iter().map(|&i| d.y()[i]).collect::<Vec<_>>();
        let (y1, y0) = (arm(1), arm(0));
        let oracle = sample_variance(&y1) / y1.len() as f64 + sample_variance(&y0) / y0.len() as f64;
        assert!((se * se / oracle - 1.0).abs() < 0.02, "{} vs {}", se * se, oracle);
    }

    #[test]
    fn degenerate_inputs() {
        let d = dataset(20, 2);
        let c = d.with_outcomes(vec![3.0; 20]).unwrap();
        let (h1, h0) = arm_means(&c);
        assert_eq!(if_variance_simple(&h1, &h0, &c, 0.5).unwrap().0, 0.0);
        assert!(matches!(if_variance_simple(&h1, &h0, &c, 1.0), Err(Error::DegeneratePi(_))));

        // outcomes exactly linear in Z with perfect predictions
        let y: Vec<f64> = d.z().iter().map(|&z| 2.0 + 0.7 * z as f64).collect();
        let e = d.with_outcomes(y).unwrap();
        let (se, _) = if_variance_simple(&[2.7; 20], &[2.0; 20], &e, 0.5).unwrap();
        assert!(se < 1e-14);

        let h: Vec<f64> = d.y().to_vec();
        assert!(if_variance_strong_null(&h, &d, 0.5, false).unwrap().0 < 1e-14);
    }

    #[test]
    fn crossfit_known_pi_is_piecewise_simple() {
        let d = dataset(40, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h1: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let h0: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let folds = make_folds(40, 4, d.z(), 1, true).unwrap();
        let (se, iv) = if_variance_crossfit(&h1, &h0, &d, &folds, FoldPi::Known(0.4)).unwrap();
        let (se2, iv2) = if_variance_simple(&h1, &h0, &d, 0.4).unwrap();
        assert!((se - se2).abs() < 1e-14);
        assert_eq!(iv.values, iv2.values);
    }

    #[test]
    fn correction_terms_sum_to_zero_per_fold() {
        let d = dataset(37, 4);
        let h1 = vec![1.3; 37];
        let h0 = vec![0.8; 37];
        let folds = make_folds(37, 3, d.z(), 9, false).unwrap();
        let with = crossfit_contributions(&h1, &h0, &d, &folds, FoldPi::Estimated).unwrap();
        for k in 0..3 {
            let rows = folds.fold(k);
            let p = fold_treated_fraction(&d, &rows);
            let plain = aipw_contributions(&d, &h1, &h0, &vec![p; 37]);
            let diff1: f64 = rows.iter().map(|&i| with.contributions.mu1[i] - plain.mu1[i]).sum();
            let diff0: f64 = rows.iter().map(|&i| with.contributions.mu0[i] - plain.mu0[i]).sum();
            assert!(diff1.abs() < 1e-12 && diff0.abs() < 1e-12);
        }
    }

    #[test]
    fn strong_null_matches_pooled_z_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 400;
        let z: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.15 * z[i] as f64 + rng.sample::<f64, _>(StandardNormal)).collect();
        let d = TrialDataset::new(y.clone(), z, DMatrix::zeros(n, 0), vec![]).unwrap();
        let ybar = mean(&y);
        let parts = strong_null_contributions(&vec![ybar; n], &d, 0.5, false).unwrap();
        let theta = parts.mu1_hat - parts.mu0_hat;
        let stat = theta / parts.contributions.se();
        let pooled = sample_variance(&y);
        let arm = |a: u8| d.arm_rows(a).iter().map(|&i| y[i]).sum::<f64>() / (n / 2) as f64;
        let z_test = (arm(1) - arm(0)) / (pooled * (4.0 / n as f64)).sqrt();
        assert!((stat / z_test - 1.0).abs() < 0.02, "{stat} vs {z_test}");
    }

    #[test]
    fn intercept_only_propensity_reduces_to_fold_correction() {
        let d = dataset(60, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h1: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        let h0: Vec<f64> = (0..60).map(|_| rng.sample(StandardNormal)).collect();
        let folds = make_folds(60, 3, d.z(), 3, false).unwrap();
        let design = DMatrix::from_element(60, 1, 1.0);
        let mut p_hat = vec![0.0; 60];
        for k in 0..3 {
            let rows = folds.fold(k);
            let p = fold_treated_fraction(&d, &rows);
            for &i in &rows {
                p_hat[i] = p;
            }
        }
        let ps = FoldPropensity { folds: &folds, design: &design, p_hat: &p_hat };
        let a = parametric_ps_contributions(&h1, &h0, &d, &ps).unwrap();
        let b = crossfit_contributions(&h1, &h0, &d, &folds, FoldPi::Estimated).unwrap();
        for i in 0..60 {
            assert!((a.contributions.mu1[i] - b.contributions.mu1[i]).abs() < 1e-10);
            assert!((a.contributions.mu0[i] - b.contributions.mu0[i]).abs() < 1e-10);
        }
        assert!((a.contributions.se() - b.contributions.se()).abs() < 1e-8);
    }

    #[test]
    fn small_sample_factor_examples() {
        assert_eq!(small_sample_factor(10, 0, 10, 0).unwrap(), 1.0);
        let f = small_sample_factor(11, 2, 21, 3).unwrap();
        assert!((f - (1.0 / 8.0 + 1.0 / 17.0) / (1.0 / 10.0 + 1.0 / 20.0)).abs() < 1e-15);
        assert!(small_sample_factor(3, 2, 10, 0).is_err());
    }

    proptest! {
        #[test]
        fn se_scales_with_outcome(c in -5.0f64..5.0, seed in 0u64..1000) {
            prop_assume!(c.abs() > 1e-3);
            let d = dataset(30, seed);
            let (h1, h0) = arm_means(&d);
            let scaled = d.with_outcomes(d.y().iter().map(|v| v * c).collect()).unwrap();
            let s1: Vec<f64> = h1.iter().map(|v| v * c).collect();
            let s0: Vec<f64> = h0.iter().map(|v| v * c).collect();
            let a = if_variance_simple(&h1, &h0, &d, 0.5).unwrap().0;
            let b = if_variance_simple(&s1, &s0, &scaled, 0.5).unwrap().0;
            prop_assert!((b - c.abs() * a).abs() <= 1e-10 * (1.0 + b));
            let folds = make_folds(30, 3, d.z(), seed, true).unwrap();
            let a = if_variance_crossfit(&h1, &h0, &d, &folds, FoldPi::Estimated).unwrap().0;
            let b = if_variance_crossfit(&s1, &s0, &scaled, &folds, FoldPi::Estimated).unwrap().0;
            prop_assert!((b - c.abs() * a).abs() <= 1e-10 * (1.0 + b));
            prop_assert!(a > 0.0);
        }
    }
}
