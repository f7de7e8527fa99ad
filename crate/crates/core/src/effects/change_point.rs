use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Additive level change on rows `start..=end` of one temporal column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangePointSpec {
    pub column: usize,
    pub start: usize,
    pub end: usize,
    /// Offset added inside the window; defaults to 3 sample standard
    /// deviations of the column when absent.
    #[serde(default)]
    pub magnitude: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    /// `start == end`
    SingularOutlier,
    /// Window reaches the last time step.
    StructuralShift,
    TemporaryChange,
}

impl ChangePointSpec {
    pub fn validate(&self, len: usize, cols: usize) -> Result<()> {
        if self.column >= cols {
            return Err(Error::param(
                "column",
                format!(
                    "column {} out of range for {cols} temporal components",
                    self.column
                ),
            ));
        }
        if self.start > self.end {
            return Err(Error::param(
                "start",
                format!("start {} is after end {}", self.start, self.end),
            ));
        }
        if self.end >= len {
            return Err(Error::param(
                "end",
                format!("end {} out of range for {len} time steps", self.end),
            ));
        }
        if let Some(m) = self.magnitude {
            if !m.is_finite() {
                return Err(Error::param("magnitude", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn kind(&self, len: usize) -> ChangeKind {
        if self.start == self.end {
            ChangeKind::SingularOutlier
        } else if self.end == len - 1 {
            ChangeKind::StructuralShift
        } else {
            ChangeKind::TemporaryChange
        }
    }
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Adds the (resolved) magnitude to the window of the temporal factor.
///
/// Returns the modified factor, the magnitude actually used and the change
/// classification.
pub fn apply_change_point(
    factor: &DMatrix<f64>,
    spec: &ChangePointSpec,
) -> Result<(DMatrix<f64>, f64, ChangeKind)> {
    spec.validate(factor.nrows(), factor.ncols())?;
    let magnitude = match spec.magnitude {
        Some(m) => m,
        None => {
            let col: Vec<f64> = factor.column(spec.column).iter().copied().collect();
            3.0 * sample_std(&col)
        }
    };
    let mut out = factor.clone();
    if magnitude != 0.0 {
        for t in spec.start..=spec.end {
            out[(t, spec.column)] += magnitude;
        }
    }
    Ok((out, magnitude, spec.kind(factor.nrows())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factor() -> DMatrix<f64> {
        DMatrix::from_fn(100, 2, |t, c| ((t * 7 + c * 3) % 11) as f64 / 11.0)
    }

    fn spec(start: usize, end: usize, magnitude: Option<f64>) -> ChangePointSpec {
        ChangePointSpec {
            column: 1,
            start,
            end,
            magnitude,
        }
    }

    #[test]
    fn structural_shift_offsets_second_half() {
        let f = factor();
        let (out, m, kind) = apply_change_point(&f, &spec(50, 99, Some(2.5))).unwrap();
        assert_eq!((m, kind), (2.5, ChangeKind::StructuralShift));
        for t in 0..100 {
            assert_eq!(out[(t, 0)], f[(t, 0)]);
            let expected = if t >= 50 { f[(t, 1)] + 2.5 } else { f[(t, 1)] };
            assert_eq!(out[(t, 1)], expected);
        }
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let f = factor();
        let (out, _, kind) = apply_change_point(&f, &spec(19, 24, Some(0.0))).unwrap();
        assert_eq!(out, f);
        assert_eq!(kind, ChangeKind::TemporaryChange);
    }

    #[test]
    fn singular_outlier_touches_one_entry() {
        let f = factor();
        let (out, _, kind) = apply_change_point(&f, &spec(7, 7, Some(5.0))).unwrap();
        assert_eq!(kind, ChangeKind::SingularOutlier);
        let diffs: Vec<_> = f
            .iter()
            .zip(out.iter())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| (i, b - a))
            .collect();
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].0, 100 + 7);
        assert!((diffs[0].1 - 5.0).abs() < 1e-15);
    }

    #[test]
    fn default_magnitude_is_three_sample_std() {
        let f = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let s = ChangePointSpec {
            column: 0,
            start: 3,
            end: 3,
            magnitude: None,
        };
        let (_, m, _) = apply_change_point(&f, &s).unwrap();
        assert!((m - 3.0 * (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_rejected() {
        let f = factor();
        assert!(apply_change_point(&f, &spec(10, 100, None)).is_err());
        assert!(apply_change_point(&f, &spec(20, 10, None)).is_err());
        let mut s = spec(0, 0, None);
        s.column = 2;
        assert!(apply_change_point(&f, &s).is_err());
    }
}
