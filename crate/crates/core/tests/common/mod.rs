#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trialcraft::data::TrialDataset;
use trialcraft::linalg::expit;

pub fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Linear-in-covariates trial with roughly balanced arms.
pub fn gaussian_trial(n: usize, p: usize, seed: u64) -> TrialDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let mut z: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    z[0] = 1;
    z[1] = 0;
    let y = (0..n)
        .map(|i| {
            let lin: f64 = (0..p).map(|j| x[(i, j)] / (j + 1) as f64).sum();
            0.5 * z[i] as f64 + lin + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    TrialDataset::new(y, z, x, names(p)).unwrap()
}

pub fn binary_trial(n: usize, p: usize, seed: u64) -> TrialDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let mut z: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    z[0] = 1;
    z[1] = 0;
    let y = (0..n)
        .map(|i| {
            let lin: f64 = (0..p).map(|j| 0.8 * x[(i, j)] / (j + 1) as f64).sum();
            rng.random_bool(expit(-0.2 + 0.6 * z[i] as f64 + lin)) as u8 as f64
        })
        .collect();
    TrialDataset::new(y, z, x, names(p)).unwrap()
}

pub fn swap_arms(d: &TrialDataset) -> TrialDataset {
    d.with_arms(d.z().iter().map(|&z| 1 - z).collect()).unwrap()
}
