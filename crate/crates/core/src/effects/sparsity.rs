//! Random removal of non-zeros and Gamma-Poisson count tensors.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::factors::{choose_sorted, gen_gamma, gen_weights, GammaParams, WeightsSpec};
use crate::rng::RngStream;
use crate::tensor::{cp_reconstruct, to_sparse, CpModel, DenseTensor, Shape, SparseTensor};

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::param("drop_fraction", "must lie in [0, 1)"));
    }
    Ok(())
}

/// Zeroes exactly `round(f * nnz)` uniformly chosen non-zero entries.
///
/// Returns the sparsified tensor, its coordinate view and the sorted linear
/// positions that were zeroed.
pub fn sparsify_tensor(
    t: &DenseTensor,
    drop_fraction: f64,
    stream: &RngStream,
) -> Result<(DenseTensor, SparseTensor, Vec<usize>)> {
    check_fraction(drop_fraction)?;
    let nonzero: Vec<usize> = t
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(at, _)| at)
        .collect();
    let count = (drop_fraction * nonzero.len() as f64).round() as usize;
    let dropped = choose_sorted(&nonzero, count, &mut stream.rng());
    let mut out = t.clone();
    let values = out.values_mut();
    for &at in &dropped {
        values[at] = 0.0;
    }
    let view = to_sparse(&out, 0.0);
    Ok((out, view, dropped))
}

/// Sparsified factors and the zeroed `[mode, row, column]` positions.
pub type SparsifiedFactors = (Vec<DMatrix<f64>>, Vec<[usize; 3]>);

/// Per-factor sparsification; factor `n` draws from `stream.index(n)`.
///
/// Returns the zeroed entries as `[mode, row, column]`.
pub fn sparsify_factors(
    factors: &[DMatrix<f64>],
    drop_fraction: f64,
    stream: &RngStream,
) -> Result<SparsifiedFactors> {
    check_fraction(drop_fraction)?;
    let mut touched = Vec::new();
    let mut out = Vec::with_capacity(factors.len());
    for (n, u) in factors.iter().enumerate() {
        // Row-major enumeration so positions read naturally in the manifest.
        let cols = u.ncols();
        let nonzero: Vec<usize> = (0..u.len())
            .filter(|&at| u[(at / cols, at % cols)] != 0.0)
            .collect();
        let count = (drop_fraction * nonzero.len() as f64).round() as usize;
        let dropped = choose_sorted(&nonzero, count, &mut stream.index(n).rng());
        let mut v = u.clone();
        for at in dropped {
            let (r, c) = (at / cols, at % cols);
            v[(r, c)] = 0.0;
            touched.push([n, r, c]);
        }
        out.push(v);
    }
    Ok((out, touched))
}

/// Replaces every entry by a `Poisson(rate)` draw. Rates must be finite and
/// non-negative; zero rates yield zero counts.
pub fn sample_poisson(rates: &DenseTensor, stream: &RngStream) -> Result<DenseTensor> {
    let mut rng = stream.rng();
    let mut counts = Vec::with_capacity(rates.numel());
    for (at, &rate) in rates.values().iter().enumerate() {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::Numerical(format!(
                "Poisson rate {rate} at position {at} is not a finite non-negative number"
            )));
        }
        counts.push(if rate == 0.0 {
            0.0
        } else {
            Poisson::new(rate)
                .map_err(|e| Error::Numerical(format!("Poisson rate {rate}: {e}")))?
                .sample(&mut rng)
        });
    }
    DenseTensor::new(rates.shape().clone(), counts)
}

/// Sparse count tensor: gamma factors, CP rate tensor, Poisson sampling.
///
/// Returns the non-zero counts and the ground-truth rate model.
pub fn gen_poisson_count(
    shape: &Shape,
    rank: usize,
    gamma: &GammaParams,
    weights: &WeightsSpec,
    stream: &RngStream,
) -> Result<(SparseTensor, CpModel)> {
    let factors = shape
        .dims()
        .iter()
        .enumerate()
        .map(|(n, &rows)| gen_gamma(rows, rank, gamma, &stream.child("factor").index(n)))
        .collect::<Result<Vec<_>>>()?;
    let lambda = gen_weights(weights, rank, &stream.child("lambda"))?;
    let model = CpModel::new(factors, lambda)?;
    let rates = cp_reconstruct(&model);
    let counts = sample_poisson(&rates, &stream.child("counts"))?;
    Ok((to_sparse(&counts, 0.0), model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(values: Vec<f64>) -> DenseTensor {
        let n = values.len();
        DenseTensor::new(Shape::new(vec![1, n]).unwrap(), values).unwrap()
    }

    #[test]
    fn zero_fraction_keeps_everything() {
        let t = dense(vec![1.0, 0.0, 3.0]);
        let (out, view, dropped) = sparsify_tensor(&t, 0.0, &RngStream::new(1)).unwrap();
        assert_eq!(out, t);
        assert_eq!(view.nnz(), 2);
        assert!(dropped.is_empty());
    }

    #[test]
    fn half_of_thousand() {
        let t = dense((1..=1000).map(|v| v as f64).collect());
        let (out, view, dropped) = sparsify_tensor(&t, 0.5, &RngStream::new(1)).unwrap();
        assert_eq!(out.nnz(), 500);
        assert_eq!(view.nnz(), 500);
        assert_eq!(dropped.len(), 500);
        for (a, b) in out.values().iter().zip(t.values()) {
            assert!(*a == 0.0 || a == b);
        }
    }

    #[test]
    fn fraction_validated() {
        let t = dense(vec![1.0]);
        assert!(sparsify_tensor(&t, 1.0, &RngStream::new(1)).is_err());
        assert!(sparsify_tensor(&t, -0.1, &RngStream::new(1)).is_err());
    }

    #[test]
    fn factor_sparsity_counts_per_mode() {
        let a = DMatrix::from_element(10, 2, 1.0);
        let b = DMatrix::from_fn(4, 2, |i, _| if i == 0 { 0.0 } else { 2.0 });
        let (out, touched) = sparsify_factors(&[a, b], 0.5, &RngStream::new(3)).unwrap();
        assert_eq!(out[0].iter().filter(|v| **v != 0.0).count(), 10);
        assert_eq!(out[1].iter().filter(|v| **v != 0.0).count(), 3);
        assert_eq!(touched.len(), 13);
        assert!(touched.iter().all(|&[m, r, _]| m != 1 || r != 0));
    }

    #[test]
    fn zero_rates_give_empty_counts() {
        let shape = Shape::new(vec![3, 2, 2]).unwrap();
        let zero = WeightsSpec::Custom {
            values: vec![0.0; 2],
        };
        let (counts, model) = gen_poisson_count(
            &shape,
            2,
            &GammaParams::default(),
            &zero,
            &RngStream::new(9),
        )
        .unwrap();
        assert_eq!(counts.nnz(), 0);
        assert_eq!(model.rank(), 2);
    }

    #[test]
    fn counts_are_non_negative_integers() {
        let shape = Shape::new(vec![6, 5, 4]).unwrap();
        let gamma = GammaParams {
            mu: 2.0,
            sigma2: 0.1,
            theta: 1.0,
        };
        let (counts, _) =
            gen_poisson_count(&shape, 3, &gamma, &WeightsSpec::Ones, &RngStream::new(9)).unwrap();
        assert!(counts.nnz() > 0);
        assert!(counts
            .entries()
            .iter()
            .all(|(_, v)| *v > 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(matches!(
            sample_poisson(&dense(vec![1.0, -0.5]), &RngStream::new(1)),
            Err(Error::Numerical(_))
        ));
        assert!(sample_poisson(&dense(vec![f64::NAN]), &RngStream::new(1)).is_err());
    }
}
