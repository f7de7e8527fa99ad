//! Tensor containers and exact multilinear reconstruction.
//!
//! All dense data is stored row-major: the last mode varies fastest. The
//! linear index of `(i1, .., iN)` is `sum_n i_n * stride_n` with
//! `stride_N = 1` and `stride_n = stride_{n+1} * I_{n+1}`.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mode sizes `(I1, .., IN)` of a tensor of order `N >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape(format!(
                "tensor order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(n) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Shape(format!("mode {n} has size 0")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Shape(format!("element count of {dims:?} overflows usize")))?;
        Ok(Shape(dims))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for n in (0..self.0.len() - 1).rev() {
            strides[n] = strides[n + 1] * self.0[n + 1];
        }
        strides
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.len() == self.0.len() && index.iter().zip(&self.0).all(|(&i, &d)| i < d)
    }

    /// Row-major linear position of a multi-index. Panics when out of bounds.
    pub fn linear(&self, index: &[usize]) -> usize {
        assert!(
            self.contains(index),
            "index {index:?} out of bounds for shape {:?}",
            self.0
        );
        index.iter().zip(self.strides()).map(|(&i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut linear: usize) -> Vec<usize> {
        let mut index = vec![0; self.0.len()];
        for n in (0..self.0.len()).rev() {
            index[n] = linear % self.0[n];
            linear /= self.0[n];
        }
        index
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.0
    }
}

/// Dense N-way array of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.numel() {
            return Err(Error::Structural(format!(
                "shape {:?} needs {} values, got {}",
                shape.dims(),
                shape.numel(),
                values.len()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let values = vec![0.0; shape.numel()];
        DenseTensor { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.shape.linear(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let at = self.shape.linear(index);
        self.values[at] = value;
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Coordinate-list tensor: distinct in-bounds index tuples with non-zero values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    shape: Shape,
    entries: Vec<(Vec<usize>, f64)>,
}

impl SparseTensor {
    pub fn new(shape: Shape, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (index, value) in &entries {
            if !shape.contains(index) {
                return Err(Error::Structural(format!(
                    "sparse index {index:?} outside shape {:?}",
                    shape.dims()
                )));
            }
            if *value == 0.0 {
                return Err(Error::Structural(format!(
                    "sparse entry {index:?} stores an explicit zero"
                )));
            }
            if !seen.insert(index.as_slice()) {
                return Err(Error::Structural(format!(
                    "duplicate sparse index {index:?}"
                )));
            }
        }
        Ok(SparseTensor { shape, entries })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn entries(&self) -> &[(Vec<usize>, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn density(&self) -> f64 {
        self.entries.len() as f64 / self.shape.numel() as f64
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut dense = DenseTensor::zeros(self.shape.clone());
        for (index, value) in &self.entries {
            dense.set(index, *value);
        }
        dense
    }
}

/// Entries with `|value| > zero_tol`, in row-major order.
pub fn to_sparse(t: &DenseTensor, zero_tol: f64) -> SparseTensor {
    let entries = t
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > zero_tol)
        .map(|(at, v)| (t.shape.unravel(at), *v))
        .collect();
    SparseTensor {
        shape: t.shape.clone(),
        entries,
    }
}

/// Rank-R CP model: factor matrices sharing R columns plus weights `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    factors: Vec<DMatrix<f64>>,
    lambda: Vec<f64>,
}

impl CpModel {
    pub fn new(factors: Vec<DMatrix<f64>>, lambda: Vec<f64>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::Structural(format!(
                "CP model needs at least 2 factors, got {}",
                factors.len()
            )));
        }
        let rank = lambda.len();
        if rank == 0 {
            return Err(Error::Structural("CP rank must be at least 1".into()));
        }
        for (n, u) in factors.iter().enumerate() {
            if u.ncols() != rank {
                return Err(Error::Structural(format!(
                    "factor {n} has {} columns, lambda has {rank}",
                    u.ncols()
                )));
            }
            if u.nrows() == 0 {
                return Err(Error::Structural(format!("factor {n} has no rows")));
            }
        }
        Ok(CpModel { factors, lambda })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|u| u.nrows()).collect())
            .expect("factor row counts are validated at construction")
    }

    pub fn into_parts(self) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        (self.factors, self.lambda)
    }
}

/// Tucker model: factor `n` has `R_n` columns matching core mode `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerModel {
    factors: Vec<DMatrix<f64>>,
    core: DenseTensor,
}

impl TuckerModel {
    pub fn new(factors: Vec<DMatrix<f64>>, core: DenseTensor) -> Result<Self> {
        if factors.len() != core.shape().order() {
            return Err(Error::Structural(format!(
                "{} factors for a core of order {}",
                factors.len(),
                core.shape().order()
            )));
        }
        for (n, (u, &r)) in factors.iter().zip(core.shape().dims()).enumerate() {
            if u.ncols() != r {
                return Err(Error::Structural(format!(
                    "factor {n} has {} columns, core mode {n} has size {r}",
                    u.ncols()
                )));
            }
            if u.nrows() == 0 {
                return Err(Error::Structural(format!("factor {n} has no rows")));
            }
        }
        Ok(TuckerModel { factors, core })
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.shape().dims()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|u| u.nrows()).collect())
            .expect("factor row counts are validated at construction")
    }

    pub fn into_parts(self) -> (Vec<DMatrix<f64>>, DenseTensor) {
        (self.factors, self.core)
    }
}

/// Ground-truth structure behind a generated tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Cp(CpModel),
    Tucker(TuckerModel),
}

impl Model {
    pub fn factors(&self) -> &[DMatrix<f64>] {
        match self {
            Model::Cp(m) => m.factors(),
            Model::Tucker(m) => m.factors(),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Model::Cp(m) => m.shape(),
            Model::Tucker(m) => m.shape(),
        }
    }

    pub fn reconstruct(&self) -> DenseTensor {
        match self {
            Model::Cp(m) => cp_reconstruct(m),
            Model::Tucker(m) => tucker_reconstruct(m),
        }
    }
}

/// Adds `scale * (c_1 o c_2 o .. o c_N)` into `out`.
///
/// The product for each entry is evaluated left to right
/// (`scale * c_1[i1] * c_2[i2] * ..`) so every caller shares one rounding order.
fn accumulate_outer(out: &mut [f64], columns: &[Vec<f64>], scale: f64) {
    fn recurse(out: &mut [f64], columns: &[Vec<f64>], prefix: f64) {
        let (head, rest) = columns.split_first().expect("at least one mode");
        if rest.is_empty() {
            for (slot, &u) in out.iter_mut().zip(head) {
                *slot += prefix * u;
            }
            return;
        }
        let block = out.len() / head.len();
        for (chunk, &u) in out.chunks_mut(block).zip(head) {
            recurse(chunk, rest, prefix * u);
        }
    }
    recurse(out, columns, scale);
}

fn column(u: &DMatrix<f64>, r: usize) -> Vec<f64> {
    u.column(r).iter().copied().collect()
}

/// `x[i1..iN] = sum_r lambda_r * prod_n U_n[i_n, r]`, summed with `r` outermost.
pub fn cp_reconstruct(model: &CpModel) -> DenseTensor {
    let shape = model.shape();
    let mut values = vec![0.0; shape.numel()];
    for (r, &weight) in model.lambda.iter().enumerate() {
        let columns: Vec<Vec<f64>> = model.factors.iter().map(|u| column(u, r)).collect();
        accumulate_outer(&mut values, &columns, weight);
    }
    DenseTensor { shape, values }
}

/// Full multilinear product of the core with every factor.
///
/// Core entries are visited in row-major order; exact zeros are skipped, so a
/// superdiagonal core reproduces [`cp_reconstruct`] bit for bit.
pub fn tucker_reconstruct(model: &TuckerModel) -> DenseTensor {
    let shape = model.shape();
    let mut values = vec![0.0; shape.numel()];
    let core_shape = model.core.shape();
    for (at, &g) in model.core.values.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let ranks = core_shape.unravel(at);
        let columns: Vec<Vec<f64>> = model
            .factors
            .iter()
            .zip(&ranks)
            .map(|(u, &r)| column(u, r))
            .collect();
        accumulate_outer(&mut values, &columns, g);
    }
    DenseTensor { shape, values }
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescales every factor column to unit Euclidean norm and folds the norms into lambda.
pub fn normalize_cp(model: &CpModel) -> Result<CpModel> {
    let mut lambda = model.lambda.clone();
    let mut factors = model.factors.clone();
    for (n, u) in factors.iter_mut().enumerate() {
        for (r, l) in lambda.iter_mut().enumerate() {
            let norm = u.column(r).norm();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "column {r} of factor {n} is all zero"
                )));
            }
            u.column_mut(r).unscale_mut(norm);
            *l *= norm;
        }
    }
    CpModel::new(factors, lambda)
}
