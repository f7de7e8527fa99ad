//! Non-negativity, column congruence/correlation, tensor normalization and
//! CP sign fixing.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factors::{gen_orthogonal, gen_standard_normal};
use crate::rng::RngStream;
use crate::tensor::{frobenius_norm, CpModel, DenseTensor};

/// Elementwise absolute value of every factor; returns the number of flipped entries.
pub fn nonneg_factors(factors: &[DMatrix<f64>]) -> (Vec<DMatrix<f64>>, usize) {
    let mut flipped = 0;
    let out = factors
        .iter()
        .map(|u| {
            flipped += u.iter().filter(|v| **v < 0.0).count();
            u.map(f64::abs)
        })
        .collect();
    (out, flipped)
}

/// Clamps negative tensor entries to zero.
///
/// Clamping rather than `abs`: a reconstructed tensor entry has no sign
/// structure that reflecting it would preserve.
pub fn nonneg_tensor(t: &DenseTensor) -> (DenseTensor, usize) {
    let mut out = t.clone();
    let mut clamped = 0;
    for v in out.values_mut() {
        if *v < 0.0 {
            *v = 0.0;
            clamped += 1;
        }
    }
    (out, clamped)
}

/// Lower Cholesky factor of `K = (1 - c) I + c 11^T` (size `rank`).
///
/// `K` has eigenvalues `1 - c` and `1 + (rank - 1) c`, so it is positive
/// definite exactly when `-1/(rank - 1) < c < 1`.
pub fn compound_symmetric_cholesky(rank: usize, c: f64) -> Result<DMatrix<f64>> {
    if !c.is_finite() || c >= 1.0 || c <= -1.0 {
        return Err(Error::param(
            "c",
            format!("{c} must lie in (-1, 1) for K = (1-c)I + c*11^T to be positive definite"),
        ));
    }
    if rank >= 2 && 1.0 + (rank as f64 - 1.0) * c <= 0.0 {
        return Err(Error::param(
            "c",
            format!(
                "{c} <= -1/(R-1) = {} for R = {rank}: K is not positive definite",
                -1.0 / (rank as f64 - 1.0)
            ),
        ));
    }
    let k = DMatrix::from_fn(rank, rank, |i, j| if i == j { 1.0 } else { c });
    k.cholesky().map(|ch| ch.l()).ok_or_else(|| {
        Error::param(
            "c",
            format!("Cholesky of K failed for c = {c}: not positive definite"),
        )
    })
}

/// Unit-norm columns whose pairwise cosines all equal `c`: `U^T U = K`.
///
/// `U = Q L^T` with `Q` Haar-orthonormal and `L = chol(K)`.
pub fn impose_congruence(
    rows: usize,
    rank: usize,
    c: f64,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if rows < rank {
        return Err(Error::Shape(format!(
            "congruence factors need rows >= columns, got {rows} x {rank}"
        )));
    }
    let l = compound_symmetric_cholesky(rank, c)?;
    let q = gen_orthogonal(rows, rank, stream)?;
    Ok(q * l.transpose())
}

/// Jointly Gaussian columns with population pairwise correlation `c`: `U = Z L^T`.
pub fn impose_correlation(
    rows: usize,
    rank: usize,
    c: f64,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if rows < 2 {
        return Err(Error::Shape(
            "correlated factors need at least 2 rows".into(),
        ));
    }
    let l = compound_symmetric_cholesky(rank, c)?;
    let z = gen_standard_normal(rows, rank, stream);
    Ok(z * l.transpose())
}

/// Scales the tensor to unit Frobenius norm; returns the applied scale.
pub fn normalize_tensor(t: &DenseTensor) -> Result<(DenseTensor, f64)> {
    let norm = frobenius_norm(t);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical(format!(
            "cannot normalize a tensor of norm {norm}"
        )));
    }
    let scale = 1.0 / norm;
    let mut out = t.clone();
    out.values_mut().iter_mut().for_each(|v| *v *= scale);
    Ok((out, scale))
}

fn leading_entry(u: &DMatrix<f64>, r: usize) -> f64 {
    let mut best = u[(0, r)];
    for &v in u.column(r).iter() {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    best
}

/// Makes the largest-magnitude entry of every factor column non-negative.
///
/// Flips in the first `N - 1` modes are compensated by flipping the same
/// column of the last mode; a still negative-led last column is flipped
/// together with `lambda_r`. Sign flips are exact, so the reconstruction is
/// bit-identical.
pub fn sign_fix(model: &CpModel) -> CpModel {
    let (mut factors, mut lambda) = model.clone().into_parts();
    let last = factors.len() - 1;
    for (r, l) in lambda.iter_mut().enumerate() {
        let (head, tail) = factors.split_at_mut(last);
        let last_factor = &mut tail[0];
        for u in head {
            if leading_entry(u, r) < 0.0 {
                u.column_mut(r).neg_mut();
                last_factor.column_mut(r).neg_mut();
            }
        }
        if leading_entry(last_factor, r) < 0.0 {
            last_factor.column_mut(r).neg_mut();
            *l = -*l;
        }
    }
    CpModel::new(factors, lambda).expect("sign flips keep the model shape")
}
