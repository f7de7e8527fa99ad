//! Anomaly injection: overwrite a contiguous block with a small CP tensor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{gen_weights, nest, FactorSpec, WeightsSpec};
use crate::rng::RngStream;
use crate::tensor::{cp_reconstruct, frobenius_norm, CpModel, DenseTensor, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySpec {
    /// Half-open `[a, b)` per mode.
    pub block: Vec<[usize; 2]>,
    pub rank: usize,
    /// Target ratio `||new block||_F / ||replaced block||_F`.
    pub amplitude: f64,
    #[serde(default = "AnomalySpec::default_generator")]
    pub generator: FactorSpec,
    #[serde(default = "AnomalySpec::default_weights")]
    pub weights: WeightsSpec,
}

impl AnomalySpec {
    fn default_generator() -> FactorSpec {
        FactorSpec::Uniform
    }

    fn default_weights() -> WeightsSpec {
        WeightsSpec::Ones
    }

    pub fn validate(&self, host: &Shape) -> Result<()> {
        if self.block.len() != host.order() {
            return Err(Error::param(
                "block",
                format!("expected {} ranges, got {}", host.order(), self.block.len()),
            ));
        }
        for (n, (&[a, b], &d)) in self.block.iter().zip(host.dims()).enumerate() {
            if a >= b {
                return Err(Error::param(
                    format!("block[{n}]"),
                    format!("range [{a}, {b}) is empty"),
                ));
            }
            if b > d {
                return Err(Error::param(
                    format!("block[{n}]"),
                    format!("range [{a}, {b}) exceeds mode size {d}"),
                ));
            }
        }
        if self.rank == 0 {
            return Err(Error::param("rank", "must be at least 1"));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param("amplitude", "must be positive and finite"));
        }
        for (n, &[a, b]) in self.block.iter().enumerate() {
            self.generator
                .validate(b - a, self.rank)
                .map_err(|e| nest(nest(e, &format!("[mode {n}]")), "generator"))?;
        }
        Ok(())
    }

    pub fn block_shape(&self) -> Result<Shape> {
        Shape::new(
            self.block
                .iter()
                .map(|r| r[1].saturating_sub(r[0]))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub replaced_norm: f64,
    pub target_norm: f64,
    pub injected_norm: f64,
    /// True when the replaced block was all zero and the target fell back to
    /// the host's average energy over the block volume.
    pub used_host_fallback: bool,
}

fn block_positions(host: &Shape, block: &[[usize; 2]]) -> Vec<usize> {
    let lo: Vec<usize> = block.iter().map(|r| r[0]).collect();
    let dims: Shape =
        Shape::new(block.iter().map(|r| r[1] - r[0]).collect()).expect("validated block");
    (0..dims.numel())
        .map(|at| {
            let idx: Vec<usize> = dims
                .unravel(at)
                .iter()
                .zip(&lo)
                .map(|(i, o)| i + o)
                .collect();
            host.linear(&idx)
        })
        .collect()
}

/// Generates a rank-`r_a` CP tensor of the block's shape, rescales it to
/// `amplitude * ||replaced block||_F` and writes it over the block.
///
/// When the replaced block is all zero the target becomes
/// `amplitude * ||host||_F * sqrt(block volume / host volume)`. A generated
/// tensor of zero norm (e.g. zero weights) is written unscaled, zeroing the block.
pub fn inject_anomaly(
    host: &DenseTensor,
    spec: &AnomalySpec,
    stream: &RngStream,
) -> Result<(DenseTensor, AnomalyRecord)> {
    spec.validate(host.shape())?;
    let block_shape = spec.block_shape()?;
    let factors = block_shape
        .dims()
        .iter()
        .enumerate()
        .map(|(n, &rows)| {
            spec.generator
                .generate(rows, spec.rank, &stream.child("factor").index(n))
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda = gen_weights(&spec.weights, spec.rank, &stream.child("lambda"))?;
    let mut anomaly = cp_reconstruct(&CpModel::new(factors, lambda)?);

    let positions = block_positions(host.shape(), &spec.block);
    let replaced_norm = positions
        .iter()
        .map(|&at| host.values()[at].powi(2))
        .sum::<f64>()
        .sqrt();
    let used_host_fallback = replaced_norm == 0.0;
    let target_norm = if used_host_fallback {
        spec.amplitude
            * frobenius_norm(host)
            * (block_shape.numel() as f64 / host.numel() as f64).sqrt()
    } else {
        spec.amplitude * replaced_norm
    };
    let generated_norm = frobenius_norm(&anomaly);
    if generated_norm > 0.0 {
        let scale = target_norm / generated_norm;
        anomaly.values_mut().iter_mut().for_each(|v| *v *= scale);
    }

    let mut out = host.clone();
    let values = out.values_mut();
    for (&at, &v) in positions.iter().zip(anomaly.values()) {
        values[at] = v;
    }
    Ok((
        out,
        AnomalyRecord {
            replaced_norm,
            target_norm,
            injected_norm: frobenius_norm(&anomaly),
            used_host_fallback,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn host() -> DenseTensor {
        let shape = Shape::new(vec![5, 6, 4]).unwrap();
        let values = (0..shape.numel())
            .map(|v| ((v * 37) % 17) as f64 - 8.0)
            .collect();
        DenseTensor::new(shape, values).unwrap()
    }

    fn spec(amplitude: f64) -> AnomalySpec {
        AnomalySpec {
            block: vec![[1, 3], [2, 5], [0, 2]],
            rank: 2,
            amplitude,
            generator: FactorSpec::Uniform,
            weights: WeightsSpec::Ones,
        }
    }

    #[test]
    fn zero_weights_zero_the_block() {
        let h = host();
        let mut s = spec(1.0);
        s.weights = WeightsSpec::Custom {
            values: vec![0.0, 0.0],
        };
        let (out, rec) = inject_anomaly(&h, &s, &RngStream::new(1)).unwrap();
        let inside: std::collections::HashSet<usize> =
            block_positions(h.shape(), &s.block).into_iter().collect();
        for at in 0..h.numel() {
            if inside.contains(&at) {
                assert_eq!(out.values()[at], 0.0);
            } else {
                assert_eq!(out.values()[at].to_bits(), h.values()[at].to_bits());
            }
        }
        assert_eq!(rec.injected_norm, 0.0);
    }

    #[test]
    fn unit_amplitude_matches_energy() {
        let (_, rec) = inject_anomaly(&host(), &spec(1.0), &RngStream::new(2)).unwrap();
        assert!((rec.injected_norm / rec.replaced_norm - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn zero_block_uses_host_energy() {
        let mut h = host();
        let s = spec(2.0);
        for at in block_positions(h.shape(), &s.block) {
            h.values_mut()[at] = 0.0;
        }
        let (_, rec) = inject_anomaly(&h, &s, &RngStream::new(3)).unwrap();
        assert!(rec.used_host_fallback);
        let expected = 2.0 * frobenius_norm(&h) * (12.0f64 / 120.0).sqrt();
        assert!((rec.injected_norm - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn invalid_blocks_rejected() {
        let mut s = spec(1.0);
        s.block[1] = [3, 3];
        assert!(inject_anomaly(&host(), &s, &RngStream::new(1)).is_err());
        let mut s = spec(1.0);
        s.block[2] = [2, 5];
        assert!(inject_anomaly(&host(), &s, &RngStream::new(1)).is_err());
        assert!(inject_anomaly(&host(), &spec(0.0), &RngStream::new(1)).is_err());
    }
}
