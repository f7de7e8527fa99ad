//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensorsynth::{CpModel, DenseTensor, Shape, TuckerModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every multi-index of `dims` in row-major order, by odometer.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx = vec![0; dims.len()];
    loop {
        out.push(idx.clone());
        let mut n = dims.len();
        loop {
            if n == 0 {
                return out;
            }
            n -= 1;
            idx[n] += 1;
            if idx[n] < dims[n] {
                break;
            }
            idx[n] = 0;
        }
    }
}

/// `X[i] = sum_r lambda_r * prod_n U_n[i_n, r]`, one entry at a time.
pub fn cp_oracle(factors: &[DMatrix<f64>], lambda: &[f64]) -> Vec<f64> {
    let dims: Vec<usize> = factors.iter().map(|u| u.nrows()).collect();
    all_indices(&dims)
        .iter()
        .map(|i| {
            (0..lambda.len())
                .map(|r| {
                    let mut p = lambda[r];
                    for (n, u) in factors.iter().enumerate() {
                        p *= u[(i[n], r)];
                    }
                    p
                })
                .sum()
        })
        .collect()
}

/// `X[i] = sum_j G[j] * prod_n U_n[i_n, j_n]`, one entry at a time.
pub fn tucker_oracle(factors: &[DMatrix<f64>], core: &DenseTensor) -> Vec<f64> {
    let dims: Vec<usize> = factors.iter().map(|u| u.nrows()).collect();
    let core_idx = all_indices(core.shape().dims());
    all_indices(&dims)
        .iter()
        .map(|i| {
            core_idx
                .iter()
                .map(|j| {
                    let mut p = core.get(j);
                    for (n, u) in factors.iter().enumerate() {
                        p *= u[(i[n], j[n])];
                    }
                    p
                })
                .sum()
        })
        .collect()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
}

pub fn random_dims(rng: &mut impl Rng) -> Vec<usize> {
    let order = rng.random_range(2..=4);
    (0..order).map(|_| rng.random_range(1..=6)).collect()
}

pub fn random_cp(rng: &mut impl Rng) -> CpModel {
    let dims = random_dims(rng);
    let rank = rng.random_range(1..=4);
    let factors = dims.iter().map(|&d| random_matrix(d, rank, rng)).collect();
    let lambda = (0..rank).map(|_| rng.random_range(-3.0..3.0)).collect();
    CpModel::new(factors, lambda).unwrap()
}

pub fn random_tucker(rng: &mut impl Rng) -> TuckerModel {
    let dims = random_dims(rng);
    let ranks: Vec<usize> = dims.iter().map(|_| rng.random_range(1..=4)).collect();
    let factors = dims
        .iter()
        .zip(&ranks)
        .map(|(&d, &r)| random_matrix(d, r, rng))
        .collect();
    let shape = Shape::new(ranks).unwrap();
    let values = (0..shape.numel())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    TuckerModel::new(factors, DenseTensor::new(shape, values).unwrap()).unwrap()
}

/// Tucker model with `G[r, .., r] = lambda_r` and zeros elsewhere.
pub fn superdiagonal(cp: &CpModel) -> TuckerModel {
    let order = cp.factors().len();
    let rank = cp.rank();
    let shape = Shape::new(vec![rank; order]).unwrap();
    let mut core = DenseTensor::zeros(shape);
    for (r, &l) in cp.lambda().iter().enumerate() {
        core.set(&vec![r; order], l);
    }
    TuckerModel::new(cp.factors().to_vec(), core).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    pearson(&xs[..xs.len() - 1], &xs[1..])
}

pub fn column(m: &DMatrix<f64>, c: usize) -> Vec<f64> {
    m.column(c).iter().copied().collect()
}
