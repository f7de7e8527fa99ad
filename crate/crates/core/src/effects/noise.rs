//! Gaussian noise on the tensor (dense or on a random subset) and on factors.
//!
//! SNR calibration uses the measured signal power `P = ||X||_F^2 / numel`
//! and `sigma = sqrt(P / 10^(snr_db / 10))`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::choose_sorted;
use crate::rng::RngStream;
use crate::tensor::{frobenius_norm, DenseTensor};

/// Calibration results of a tensor noise stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub snr_db: f64,
    pub sigma: f64,
    pub signal_power: f64,
    /// `10 log10(P_signal / P_noise)` measured over the noisy positions;
    /// `None` when no noise was drawn.
    pub achieved_snr_db: Option<f64>,
}

fn calibrate(t: &DenseTensor, snr_db: f64) -> Result<(f64, f64)> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::param(
            "snr_db",
            format!("{snr_db} is not a usable SNR"),
        ));
    }
    let norm = frobenius_norm(t);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numerical(format!(
            "cannot calibrate SNR against a tensor of norm {norm}"
        )));
    }
    let power = norm * norm / t.numel() as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    Ok((power, sigma))
}

fn achieved(power: f64, noise: &[f64]) -> f64 {
    let noise_power = noise.iter().map(|v| v * v).sum::<f64>() / noise.len().max(1) as f64;
    10.0 * (power / noise_power).log10()
}

/// Dense additive white Gaussian noise at `snr_db`. `+inf` is a no-op.
pub fn add_awgn(
    t: &DenseTensor,
    snr_db: f64,
    stream: &RngStream,
) -> Result<(DenseTensor, NoiseRecord)> {
    let (power, sigma) = calibrate(t, snr_db)?;
    let mut out = t.clone();
    if snr_db == f64::INFINITY {
        return Ok((
            out,
            NoiseRecord {
                snr_db,
                sigma: 0.0,
                signal_power: power,
                achieved_snr_db: None,
            },
        ));
    }
    let mut rng = stream.rng();
    let noise: Vec<f64> = (0..t.numel())
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    for (v, n) in out.values_mut().iter_mut().zip(&noise) {
        *v += n;
    }
    Ok((
        out,
        NoiseRecord {
            snr_db,
            sigma,
            signal_power: power,
            achieved_snr_db: Some(achieved(power, &noise)),
        },
    ))
}

/// Noise at `snr_db` (sigma from the whole tensor's power) added to exactly
/// `round(density * numel)` uniformly chosen positions.
///
/// Returns the sorted linear positions that received noise.
pub fn add_sparse_noise(
    t: &DenseTensor,
    snr_db: f64,
    density: f64,
    stream: &RngStream,
) -> Result<(DenseTensor, NoiseRecord, Vec<usize>)> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::param("density", "must lie in (0, 1]"));
    }
    let (power, sigma) = calibrate(t, snr_db)?;
    let count = (density * t.numel() as f64).round() as usize;
    let all: Vec<usize> = (0..t.numel()).collect();
    let positions = choose_sorted(&all, count, &mut stream.child("positions").rng());
    let mut out = t.clone();
    if snr_db == f64::INFINITY {
        return Ok((
            out,
            NoiseRecord {
                snr_db,
                sigma: 0.0,
                signal_power: power,
                achieved_snr_db: None,
            },
            Vec::new(),
        ));
    }
    let mut rng = stream.child("values").rng();
    let noise: Vec<f64> = positions
        .iter()
        .map(|_| sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let values = out.values_mut();
    for (&at, n) in positions.iter().zip(&noise) {
        values[at] += n;
    }
    Ok((
        out,
        NoiseRecord {
            snr_db,
            sigma,
            signal_power: power,
            achieved_snr_db: Some(achieved(power, &noise)),
        },
        positions,
    ))
}

/// `U + sigma_f * N(0, 1)` per factor with `sigma_f = eta * ||U||_F / sqrt(numel(U))`.
///
/// Mode `n` draws from `stream.index(n)`. Returns the per-mode `sigma_f`.
pub fn add_factor_noise(
    factors: &[DMatrix<f64>],
    eta: f64,
    stream: &RngStream,
) -> Result<(Vec<DMatrix<f64>>, Vec<f64>)> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", "must be non-negative and finite"));
    }
    let mut sigmas = Vec::with_capacity(factors.len());
    let mut out = Vec::with_capacity(factors.len());
    for (n, u) in factors.iter().enumerate() {
        let sigma = eta * u.norm() / (u.len() as f64).sqrt();
        sigmas.push(sigma);
        if sigma == 0.0 {
            out.push(u.clone());
            continue;
        }
        let mut rng = stream.index(n).rng();
        out.push(u.map(|v| v + sigma * Distribution::<f64>::sample(&StandardNormal, &mut rng)));
    }
    Ok((out, sigmas))
}
