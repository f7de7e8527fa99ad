//! Random non-temporal factor matrices and CP/Tucker weight vectors.
//!
//! Column `c` of every column-wise generator draws from `stream.index(c)`,
//! so the same column of two matrices generated from one stream is identical
//! regardless of how many columns were requested.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::effects::constraints::{
    compound_symmetric_cholesky, impose_congruence, impose_correlation,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::temporal::{
    gen_periodic, gen_seasonal_columns, gen_streaming, SeasonalSpec, StreamSpec, WaveSpec,
};

/// Parameters of the gamma factor generator.
///
/// `sigma2` is the variance of the normal distribution the per-column shape
/// parameter is drawn from. Some descriptions of this generator quote the
/// same 0.1 default without saying whether it is a variance or a standard
/// deviation; here it is always a variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaParams {
    #[serde(default = "GammaParams::default_mu")]
    pub mu: f64,
    #[serde(default = "GammaParams::default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "GammaParams::default_theta")]
    pub theta: f64,
}

impl GammaParams {
    fn default_mu() -> f64 {
        0.1
    }
    fn default_sigma2() -> f64 {
        0.1
    }
    fn default_theta() -> f64 {
        0.01
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::param(
                "theta",
                "gamma scale must be positive and finite",
            ));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param(
                "sigma2",
                "variance must be non-negative and finite",
            ));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        if self.mu == 0.0 && self.sigma2 == 0.0 {
            return Err(Error::param(
                "sigma2",
                "mu = 0 with zero variance can never produce a positive shape",
            ));
        }
        Ok(())
    }
}

impl Default for GammaParams {
    fn default() -> Self {
        GammaParams {
            mu: Self::default_mu(),
            sigma2: Self::default_sigma2(),
            theta: Self::default_theta(),
        }
    }
}

fn gamma_column(rows: usize, shape: f64, theta: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let dist = Gamma::new(shape, theta)
        .map_err(|e| Error::param("theta", format!("gamma({shape}, {theta}): {e}")))?;
    Ok((0..rows).map(|_| dist.sample(rng)).collect())
}

/// Gamma factors: column `r` draws `k_r = |N(mu, sigma2)|` once, then fills
/// the column with i.i.d. `Gamma(shape = k_r, scale = theta)`.
pub fn gen_gamma(
    rows: usize,
    cols: usize,
    params: &GammaParams,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let shape_dist = Normal::new(params.mu, params.sigma2.sqrt())
        .map_err(|e| Error::param("sigma2", e.to_string()))?;
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let mut rng = stream.index(c).rng();
        let k = loop {
            let k: f64 = shape_dist.sample(&mut rng).abs();
            if k > 0.0 {
                break k;
            }
        };
        let col = gamma_column(rows, k, params.theta, &mut rng)?;
        m.column_mut(c).copy_from_slice(&col);
    }
    Ok(m)
}

/// Gamma factors with a fixed shape parameter for every column.
pub fn gen_gamma_fixed_shape(
    rows: usize,
    cols: usize,
    shape: f64,
    theta: f64,
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::param(
            "shape",
            "gamma shape must be positive and finite",
        ));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::param(
            "theta",
            "gamma scale must be positive and finite",
        ));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let col = gamma_column(rows, shape, theta, &mut stream.index(c).rng())?;
        m.column_mut(c).copy_from_slice(&col);
    }
    Ok(m)
}

/// Column `r` i.i.d. `N(mus[r], sigmas[r]^2)`.
///
/// With all means 0 and all deviations 1 this is the standard-normal
/// (`randn`) generator; see [`gen_standard_normal`].
pub fn gen_multi_normal(
    rows: usize,
    cols: usize,
    mus: &[f64],
    sigmas: &[f64],
    stream: &RngStream,
) -> Result<DMatrix<f64>> {
    if mus.len() != cols {
        return Err(Error::param(
            "mus",
            format!("expected {cols} means, got {}", mus.len()),
        ));
    }
    if sigmas.len() != cols {
        return Err(Error::param(
            "sigmas",
            format!("expected {cols} deviations, got {}", sigmas.len()),
        ));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        if sigmas[c] < 0.0 {
            return Err(Error::param(
                "sigmas",
                format!("column {c}: deviation {} is negative", sigmas[c]),
            ));
        }
        let dist = Normal::new(mus[c], sigmas[c]).map_err(|_| {
            Error::param(
                "sigmas",
                format!("column {c}: deviation {} is invalid", sigmas[c]),
            )
        })?;
        if !(sigmas[c].is_finite() && mus[c].is_finite()) {
            return Err(Error::param(
                "sigmas",
                format!("column {c}: parameters must be finite"),
            ));
        }
        let mut rng = stream.index(c).rng();
        for r in 0..rows {
            m[(r, c)] = dist.sample(&mut rng);
        }
    }
    Ok(m)
}

pub fn gen_standard_normal(rows: usize, cols: usize, stream: &RngStream) -> DMatrix<f64> {
    gen_multi_normal(rows, cols, &vec![0.0; cols], &vec![1.0; cols], stream)
        .expect("standard normal parameters are valid")
}

/// i.i.d. `Uniform[0, 1)` entries.
pub fn gen_uniform(rows: usize, cols: usize, stream: &RngStream) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let mut rng = stream.index(c).rng();
        for r in 0..rows {
            m[(r, c)] = rng.random::<f64>();
        }
    }
    m
}

/// Haar-distributed matrix with orthonormal columns.
///
/// QR of a standard Gaussian matrix, with column `j` of `Q` multiplied by the
/// sign of `R[j, j]` (zero counts as positive).
pub fn gen_orthogonal(rows: usize, cols: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    if rows < cols {
        return Err(Error::Shape(format!(
            "orthogonal factors need rows >= cols, got {rows} x {cols}"
        )));
    }
    let z = gen_standard_normal(rows, cols, stream);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Non-negative matrix whose columns each sum to one.
pub fn gen_stochastic(rows: usize, cols: usize, stream: &RngStream) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let mut rng = stream.index(c).rng();
        let mut col: Vec<f64> = (0..rows).map(|_| rng.random::<f64>()).collect();
        // An all-zero draw has probability zero; keep drawing from the same stream.
        while col.iter().all(|&v| v == 0.0) {
            col.iter_mut().for_each(|v| *v = rng.random::<f64>());
        }
        let sum: f64 = col.iter().sum();
        for (r, v) in col.into_iter().enumerate() {
            m[(r, c)] = v / sum;
        }
    }
    m
}

/// One-hot rows: each row has a single 1 in a uniformly chosen column.
pub fn gen_binary(rows: usize, cols: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    if cols == 0 {
        return Err(Error::param(
            "cols",
            "binary factors need at least one column",
        ));
    }
    let mut rng = stream.rng();
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        m[(r, rng.random_range(0..cols))] = 1.0;
    }
    Ok(m)
}

/// How CP weights or the flattened Tucker core are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsSpec {
    Ones,
    #[serde(alias = "rand")]
    Uniform,
    #[serde(alias = "randn")]
    Normal,
    Custom {
        values: Vec<f64>,
    },
}

/// Weight vector of `length` entries.
///
/// For a Tucker core the caller reshapes the vector row-major into
/// `(R1, .., RN)`.
pub fn gen_weights(spec: &WeightsSpec, length: usize, stream: &RngStream) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::param("length", "weight vector must be non-empty"));
    }
    let mut rng = stream.rng();
    Ok(match spec {
        WeightsSpec::Ones => vec![1.0; length],
        WeightsSpec::Uniform => (0..length).map(|_| rng.random::<f64>()).collect(),
        WeightsSpec::Normal => (0..length)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
        WeightsSpec::Custom { values } => {
            if values.len() != length {
                return Err(Error::param(
                    "values",
                    format!("expected {length} custom weights, got {}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("values", "custom weights must be finite"));
            }
            values.clone()
        }
    })
}

/// Generator for one factor matrix, as written in configs and manifests.
///
/// The temporal methods (`periodic`, `seasonal`, `streaming`) are only valid
/// on the declared temporal mode; `congruence` and `correlation` only on the
/// others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Gamma {
        #[serde(default = "GammaParams::default_mu")]
        mu: f64,
        #[serde(default = "GammaParams::default_sigma2")]
        sigma2: f64,
        #[serde(default = "GammaParams::default_theta")]
        theta: f64,
    },
    /// Empty `mus`/`sigmas` mean 0 and 1 for every column.
    #[serde(alias = "randn")]
    MultiNormal {
        #[serde(default)]
        mus: Vec<f64>,
        #[serde(default)]
        sigmas: Vec<f64>,
    },
    #[serde(alias = "rand")]
    Uniform,
    Orthogonal,
    Stochastic,
    Binary,
    Congruence {
        c: f64,
    },
    Correlation {
        c: f64,
    },
    Periodic {
        waves: Vec<WaveSpec>,
    },
    Seasonal {
        seasons: Vec<SeasonalSpec>,
    },
    Streaming(StreamSpec),
}

impl FactorSpec {
    pub fn standard_normal() -> Self {
        FactorSpec::MultiNormal {
            mus: Vec::new(),
            sigmas: Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FactorSpec::Gamma { .. } => "gamma",
            FactorSpec::MultiNormal { .. } => "multi_normal",
            FactorSpec::Uniform => "uniform",
            FactorSpec::Orthogonal => "orthogonal",
            FactorSpec::Stochastic => "stochastic",
            FactorSpec::Binary => "binary",
            FactorSpec::Congruence { .. } => "congruence",
            FactorSpec::Correlation { .. } => "correlation",
            FactorSpec::Periodic { .. } => "periodic",
            FactorSpec::Seasonal { .. } => "seasonal",
            FactorSpec::Streaming(_) => "streaming",
        }
    }

    pub fn is_temporal(&self) -> bool {
        matches!(
            self,
            FactorSpec::Periodic { .. } | FactorSpec::Seasonal { .. } | FactorSpec::Streaming(_)
        )
    }

    pub fn is_constraint(&self) -> bool {
        matches!(
            self,
            FactorSpec::Congruence { .. } | FactorSpec::Correlation { .. }
        )
    }

    /// Fills implicit defaults that depend on the column count, so the spec
    /// is self-describing once stored.
    pub fn materialize(&mut self, cols: usize) {
        match self {
            FactorSpec::MultiNormal { mus, sigmas } => {
                if mus.is_empty() {
                    *mus = vec![0.0; cols];
                }
                if sigmas.is_empty() {
                    *sigmas = vec![1.0; cols];
                }
            }
            FactorSpec::Streaming(s) => s.init.materialize(cols),
            _ => {}
        }
    }

    /// Checks parameters against a `rows x cols` target. Errors name the
    /// offending field relative to this spec.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::param(
                "method",
                "factor needs at least one row and column",
            ));
        }
        match self {
            FactorSpec::Gamma { mu, sigma2, theta } => GammaParams {
                mu: *mu,
                sigma2: *sigma2,
                theta: *theta,
            }
            .validate(),
            FactorSpec::MultiNormal { mus, sigmas } => {
                if !mus.is_empty() && mus.len() != cols {
                    return Err(Error::param(
                        "mus",
                        format!("expected {cols} means, got {}", mus.len()),
                    ));
                }
                if !sigmas.is_empty() && sigmas.len() != cols {
                    return Err(Error::param(
                        "sigmas",
                        format!("expected {cols} deviations, got {}", sigmas.len()),
                    ));
                }
                if mus.iter().any(|m| !m.is_finite()) {
                    return Err(Error::param("mus", "means must be finite"));
                }
                if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::param(
                        "sigmas",
                        "deviations must be non-negative and finite",
                    ));
                }
                Ok(())
            }
            FactorSpec::Uniform | FactorSpec::Stochastic | FactorSpec::Binary => Ok(()),
            FactorSpec::Orthogonal => {
                if rows < cols {
                    return Err(Error::param(
                        "method",
                        format!("orthogonal factors require rows >= cols, got {rows} x {cols}"),
                    ));
                }
                Ok(())
            }
            FactorSpec::Congruence { c } => {
                if rows < cols {
                    return Err(Error::param(
                        "method",
                        format!("congruence factors require rows >= cols, got {rows} x {cols}"),
                    ));
                }
                compound_symmetric_cholesky(cols, *c).map(|_| ())
            }
            FactorSpec::Correlation { c } => {
                if rows < 2 {
                    return Err(Error::param(
                        "method",
                        "correlated factors need at least 2 rows",
                    ));
                }
                compound_symmetric_cholesky(cols, *c).map(|_| ())
            }
            FactorSpec::Periodic { waves } => {
                if rows < 2 {
                    return Err(Error::param(
                        "waves",
                        "periodic factors need at least 2 time steps",
                    ));
                }
                if waves.len() != cols {
                    return Err(Error::param(
                        "waves",
                        format!("expected one wave per column ({cols}), got {}", waves.len()),
                    ));
                }
                for (i, w) in waves.iter().enumerate() {
                    w.validate().map_err(|e| nest(e, &format!("waves[{i}]")))?;
                }
                Ok(())
            }
            FactorSpec::Seasonal { seasons } => {
                if seasons.len() != cols {
                    return Err(Error::param(
                        "seasons",
                        format!(
                            "expected one season per column ({cols}), got {}",
                            seasons.len()
                        ),
                    ));
                }
                for (i, s) in seasons.iter().enumerate() {
                    s.validate(rows)
                        .map_err(|e| nest(e, &format!("seasons[{i}]")))?;
                }
                Ok(())
            }
            FactorSpec::Streaming(s) => {
                s.validate()?;
                s.init.validate(1, cols).map_err(|e| nest(e, "init"))
            }
        }
    }

    pub fn generate(&self, rows: usize, cols: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
        self.validate(rows, cols)?;
        match self {
            FactorSpec::Gamma { mu, sigma2, theta } => gen_gamma(
                rows,
                cols,
                &GammaParams {
                    mu: *mu,
                    sigma2: *sigma2,
                    theta: *theta,
                },
                stream,
            ),
            FactorSpec::MultiNormal { mus, sigmas } => {
                let mus = if mus.is_empty() {
                    vec![0.0; cols]
                } else {
                    mus.clone()
                };
                let sigmas = if sigmas.is_empty() {
                    vec![1.0; cols]
                } else {
                    sigmas.clone()
                };
                gen_multi_normal(rows, cols, &mus, &sigmas, stream)
            }
            FactorSpec::Uniform => Ok(gen_uniform(rows, cols, stream)),
            FactorSpec::Orthogonal => gen_orthogonal(rows, cols, stream),
            FactorSpec::Stochastic => Ok(gen_stochastic(rows, cols, stream)),
            FactorSpec::Binary => gen_binary(rows, cols, stream),
            FactorSpec::Congruence { c } => impose_congruence(rows, cols, *c, stream),
            FactorSpec::Correlation { c } => impose_correlation(rows, cols, *c, stream),
            FactorSpec::Periodic { waves } => gen_periodic(rows, waves),
            FactorSpec::Seasonal { seasons } => gen_seasonal_columns(rows, seasons),
            FactorSpec::Streaming(s) => gen_streaming(rows, cols, s, stream),
        }
    }
}

/// Prefixes the field path of a parameter error.
pub(crate) fn nest(err: Error, prefix: &str) -> Error {
    match err {
        Error::Parameter { field, reason } => Error::Parameter {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Picks `count` distinct positions out of `candidates` uniformly, returned sorted.
pub(crate) fn choose_sorted(candidates: &[usize], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();
    picked
}
