//! Post-generation transformations: change points, anomalies, noise,
//! constraints and sparsity.
//!
//! Every operation returns, next to its output, what it touched and what it
//! achieved so the pipeline can log it into the manifest.

pub mod anomaly;
pub mod change_point;
pub mod constraints;
pub mod noise;
pub mod sparsity;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use anomaly::{inject_anomaly, AnomalyRecord, AnomalySpec};
pub use change_point::{apply_change_point, ChangeKind, ChangePointSpec};
pub use constraints::{
    impose_congruence, impose_correlation, nonneg_factors, nonneg_tensor, normalize_tensor,
    sign_fix,
};
pub use noise::{add_awgn, add_factor_noise, add_sparse_noise, NoiseRecord};
pub use sparsity::{gen_poisson_count, sample_poisson, sparsify_factors, sparsify_tensor};

use crate::tensor::Shape;

/// Coordinates an effect modified.
///
/// Tensor positions are row-major linear indices; factor positions are
/// `[mode, row, column]`. All indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Touched {
    /// Rows `rows[0]..=rows[1]` of one factor column.
    FactorRows {
        mode: usize,
        column: usize,
        rows: [usize; 2],
    },
    FactorEntries {
        entries: Vec<[usize; 3]>,
    },
    /// Every entry of the listed factors.
    Factors {
        modes: Vec<usize>,
    },
    /// Half-open range `[a, b)` per tensor mode.
    Block {
        ranges: Vec<[usize; 2]>,
    },
    TensorEntries {
        positions: Vec<usize>,
    },
    /// Every tensor entry.
    Tensor,
    /// The entries satisfying a value predicate on the input, e.g. `value < 0`.
    Where {
        target: String,
        condition: String,
    },
    /// Model parameters only; the reconstruction is unchanged.
    Model,
}

impl Touched {
    /// Explicit tensor positions, when the record enumerates them.
    pub fn tensor_positions(&self, shape: &Shape) -> Option<BTreeSet<usize>> {
        match self {
            Touched::TensorEntries { positions } => Some(positions.iter().copied().collect()),
            Touched::Block { ranges } => {
                let mut out = BTreeSet::new();
                let lo: Vec<usize> = ranges.iter().map(|r| r[0]).collect();
                let dims: Vec<usize> = ranges.iter().map(|r| r[1] - r[0]).collect();
                let block = Shape::new(dims).ok()?;
                for at in 0..block.numel() {
                    let idx: Vec<usize> = block
                        .unravel(at)
                        .iter()
                        .zip(&lo)
                        .map(|(i, o)| i + o)
                        .collect();
                    out.insert(shape.linear(&idx));
                }
                Some(out)
            }
            Touched::Tensor => Some((0..shape.numel()).collect()),
            _ => None,
        }
    }

    /// Explicit factor positions `[mode, row, column]`, when enumerable.
    pub fn factor_positions(&self, factor_dims: &[(usize, usize)]) -> Option<BTreeSet<[usize; 3]>> {
        match self {
            Touched::FactorRows { mode, column, rows } => {
                Some((rows[0]..=rows[1]).map(|r| [*mode, r, *column]).collect())
            }
            Touched::FactorEntries { entries } => Some(entries.iter().copied().collect()),
            Touched::Factors { modes } => {
                let mut out = BTreeSet::new();
                for &m in modes {
                    let (rows, cols) = factor_dims[m];
                    for r in 0..rows {
                        for c in 0..cols {
                            out.insert([m, r, c]);
                        }
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }
}
