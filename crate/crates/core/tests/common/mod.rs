#![allow(dead_code)]

use nearstat::data::{preprocess, synth_dataset, Preprocess};
use nearstat::linalg::DenseMatrix;
use nearstat::objective::{make_logistic, make_quadratic, make_quadratic_row_blocks};
use nearstat::{Logistic, Quadratic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| gaussian_vec(rng, d)).collect()
}

/// `MᵀM/r` for a Gaussian `r × d` matrix with `r` random in `[1, 2d]`, so
/// singular instances show up too.
pub fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DenseMatrix {
    let r = rng.random_range(1..=2 * d);
    let m = gaussian_rows(rng, r, d);
    DenseMatrix::gram(&m, d).scaled(1.0 / r as f64)
}

/// Single-component quadratic with `b` in the range of `A`.
pub fn random_quadratic(seed: u64, d: usize) -> Quadratic {
    let mut rng = rng(seed);
    let a = random_psd(&mut rng, d);
    let c = gaussian_vec(&mut rng, d);
    let b = a.mul_vec(&c);
    make_quadratic(a, b).unwrap()
}

/// Least squares split into `n` row blocks.
pub fn random_finite_sum_quadratic(seed: u64, d: usize, n: usize, rows: usize) -> Quadratic {
    let mut rng = rng(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let m: Vec<Vec<f64>> = gaussian_rows(&mut rng, rows, d)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v * scale).collect())
        .collect();
    let c = gaussian_vec(&mut rng, rows);
    let mut b = vec![0.0; d];
    for (row, ci) in m.iter().zip(&c) {
        for (bj, mj) in b.iter_mut().zip(row) {
            *bj += ci * mj;
        }
    }
    make_quadratic_row_blocks(&m, b, n).unwrap()
}

/// Bias-augmented, normalized synthetic logistic instance.
pub fn random_logistic(seed: u64, n: usize, d: usize) -> Logistic {
    let raw = synth_dataset(seed, n, d, 1.0).unwrap();
    make_logistic(&preprocess(&raw, Preprocess::default())).unwrap()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
