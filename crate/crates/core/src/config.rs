//! Declarative dataset recipes (JSON) and their validation.
//!
//! A config describes one dataset: shape, model, one generator per mode,
//! an ordered effect list, output options and the seed. Loading fills every
//! default explicitly, so a stored config is a complete recipe on its own.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::effects::{AnomalySpec, ChangePointSpec};
use crate::error::{Error, Result};
use crate::factors::{FactorSpec, WeightsSpec};
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Cp {
        rank: usize,
        #[serde(default = "default_lambda")]
        weights: WeightsSpec,
    },
    Tucker {
        ranks: Vec<usize>,
        /// Vector of length `prod(ranks)`, reshaped row-major into the core.
        #[serde(default = "default_core")]
        core: WeightsSpec,
    },
}

fn default_lambda() -> WeightsSpec {
    WeightsSpec::Ones
}

fn default_core() -> WeightsSpec {
    WeightsSpec::Normal
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Cp {
            rank: 2,
            weights: default_lambda(),
        }
    }
}

impl ModelSpec {
    /// Column count of the factor for `mode`.
    pub fn columns(&self, mode: usize) -> usize {
        match self {
            ModelSpec::Cp { rank, .. } => *rank,
            ModelSpec::Tucker { ranks, .. } => ranks.get(mode).copied().unwrap_or(0),
        }
    }

    pub fn ranks(&self, order: usize) -> Vec<usize> {
        (0..order).map(|n| self.columns(n)).collect()
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ModelSpec::Cp { .. } => "cp",
            ModelSpec::Tucker { .. } => "tucker",
        }
    }
}

/// One stage of the effect pipeline.
///
/// Factor-stage effects act on the model before reconstruction and must
/// precede every tensor-stage effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectSpec {
    ChangePoint(ChangePointSpec),
    FactorNoise { eta: f64 },
    NonnegFactors,
    SparsifyFactors { drop_fraction: f64 },
    NormalizeCp,
    SignFix,
    Anomaly(AnomalySpec),
    Awgn { snr_db: f64 },
    SparseNoise { snr_db: f64, density: f64 },
    NonnegTensor,
    NormalizeTensor,
    SparsifyTensor { drop_fraction: f64 },
    PoissonCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Factors,
    Tensor,
}

impl EffectSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EffectSpec::ChangePoint(_) => "change_point",
            EffectSpec::FactorNoise { .. } => "factor_noise",
            EffectSpec::NonnegFactors => "nonneg_factors",
            EffectSpec::SparsifyFactors { .. } => "sparsify_factors",
            EffectSpec::NormalizeCp => "normalize_cp",
            EffectSpec::SignFix => "sign_fix",
            EffectSpec::Anomaly(_) => "anomaly",
            EffectSpec::Awgn { .. } => "awgn",
            EffectSpec::SparseNoise { .. } => "sparse_noise",
            EffectSpec::NonnegTensor => "nonneg_tensor",
            EffectSpec::NormalizeTensor => "normalize_tensor",
            EffectSpec::SparsifyTensor { .. } => "sparsify_tensor",
            EffectSpec::PoissonCounts => "poisson_counts",
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            EffectSpec::ChangePoint(_)
            | EffectSpec::FactorNoise { .. }
            | EffectSpec::NonnegFactors
            | EffectSpec::SparsifyFactors { .. }
            | EffectSpec::NormalizeCp
            | EffectSpec::SignFix => Stage::Factors,
            _ => Stage::Tensor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Hdf5,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Hdf5 => "h5",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_format")]
    pub format: Format,
    /// Data file path; defaults to `tensor.<ext>` for the chosen format.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_storage")]
    pub storage: Storage,
    #[serde(default)]
    pub overwrite: bool,
}

fn default_format() -> Format {
    Format::Hdf5
}

fn default_storage() -> Storage {
    Storage::Dense
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            format: default_format(),
            path: None,
            storage: default_storage(),
            overwrite: false,
        }
    }
}

impl OutputSpec {
    pub fn resolved_path(&self) -> PathBuf {
        self.path
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("tensor.{}", self.format.extension())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub model: ModelSpec,
    /// One generator per mode. A single object in the JSON applies to all modes.
    pub factors: Vec<FactorSpec>,
    #[serde(default)]
    pub temporal_mode: Option<usize>,
    #[serde(default)]
    pub effects: Vec<EffectSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Reads, validates and materializes a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<GenConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GenConfig::from_json_str(&text)
}

fn rebase(err: Error, prefix: &str) -> Error {
    match err {
        Error::Parameter { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        Error::Shape(reason) | Error::Structural(reason) => Error::config(prefix, reason),
        other => other,
    }
}

impl GenConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        // A single generator object stands for "the same generator on every mode".
        if let Some(obj) = value.as_object_mut() {
            let order = obj.get("shape").and_then(Value::as_array).map(Vec::len);
            if let (Some(order), Some(Value::Object(_))) = (order, obj.get("factors")) {
                let single = obj["factors"].clone();
                obj.insert("factors".into(), Value::Array(vec![single; order]));
            }
        }
        let mut config: GenConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "<document>".to_string()
            } else {
                path
            };
            Error::config(field, e.into_inner().to_string())
        })?;
        config.validate()?;
        config.materialize();
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Writes every implicit default into the config.
    pub fn materialize(&mut self) {
        for (n, spec) in self.factors.iter_mut().enumerate() {
            spec.materialize(self.model.columns(n));
        }
        if self.output.path.is_none() {
            self.output.path = Some(self.output.resolved_path());
        }
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.shape.clone()).map_err(|e| rebase(e, "shape"))
    }

    /// Schema-level and semantic checks. Errors carry the JSON path of the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        let order = shape.order();

        match &self.model {
            ModelSpec::Cp { rank, weights } => {
                if *rank == 0 {
                    return Err(Error::config("model.rank", "rank must be at least 1"));
                }
                validate_weights(weights, *rank, "model.weights")?;
            }
            ModelSpec::Tucker { ranks, core } => {
                if ranks.len() != order {
                    return Err(Error::config(
                        "model.ranks",
                        format!("expected {order} ranks, got {}", ranks.len()),
                    ));
                }
                if let Some(n) = ranks.iter().position(|&r| r == 0) {
                    return Err(Error::config(
                        format!("model.ranks[{n}]"),
                        "rank must be at least 1",
                    ));
                }
                let len = ranks
                    .iter()
                    .try_fold(1usize, |acc, &r| acc.checked_mul(r))
                    .ok_or_else(|| Error::config("model.ranks", "core size overflows"))?;
                validate_weights(core, len, "model.core")?;
            }
        }

        if self.factors.len() != order {
            return Err(Error::config(
                "factors",
                format!(
                    "expected one generator per mode ({order}), got {}",
                    self.factors.len()
                ),
            ));
        }
        if let Some(t) = self.temporal_mode {
            if t >= order {
                return Err(Error::config(
                    "temporal_mode",
                    format!("mode {t} does not exist in an order-{order} tensor"),
                ));
            }
        }
        for (n, spec) in self.factors.iter().enumerate() {
            let field = format!("factors[{n}]");
            let is_temporal_mode = self.temporal_mode == Some(n);
            if spec.is_temporal() && !is_temporal_mode {
                return Err(Error::config(
                    format!("{field}.method"),
                    format!(
                        "temporal generator `{}` is only allowed on the declared temporal_mode",
                        spec.name()
                    ),
                ));
            }
            if spec.is_constraint() && is_temporal_mode {
                return Err(Error::config(
                    format!("{field}.method"),
                    format!(
                        "`{}` constraints apply to non-temporal modes only",
                        spec.name()
                    ),
                ));
            }
            spec.validate(shape.dims()[n], self.model.columns(n))
                .map_err(|e| rebase(e, &field))?;
        }

        let mut seen_tensor_stage = false;
        for (i, effect) in self.effects.iter().enumerate() {
            let field = format!("effects[{i}]");
            match effect.stage() {
                Stage::Tensor => seen_tensor_stage = true,
                Stage::Factors if seen_tensor_stage => {
                    return Err(Error::config(
                        format!("{field}.kind"),
                        format!(
                            "factor-stage effect `{}` must come before every tensor-stage effect",
                            effect.name()
                        ),
                    ));
                }
                Stage::Factors => {}
            }
            self.validate_effect(effect, &shape)
                .map_err(|e| rebase(e, &field))?;
        }
        Ok(())
    }

    fn validate_effect(&self, effect: &EffectSpec, shape: &Shape) -> Result<()> {
        match effect {
            EffectSpec::ChangePoint(cp) => {
                let t = self.temporal_mode.ok_or_else(|| {
                    Error::param("kind", "change points need a declared temporal_mode")
                })?;
                cp.validate(shape.dims()[t], self.model.columns(t))
            }
            EffectSpec::FactorNoise { eta } => {
                if !(*eta >= 0.0 && eta.is_finite()) {
                    return Err(Error::param("eta", "must be non-negative and finite"));
                }
                Ok(())
            }
            EffectSpec::SparsifyFactors { drop_fraction }
            | EffectSpec::SparsifyTensor { drop_fraction } => {
                if !(0.0..1.0).contains(drop_fraction) {
                    return Err(Error::param("drop_fraction", "must lie in [0, 1)"));
                }
                Ok(())
            }
            EffectSpec::NormalizeCp | EffectSpec::SignFix => {
                if !matches!(self.model, ModelSpec::Cp { .. }) {
                    return Err(Error::param(
                        "kind",
                        format!("`{}` applies to CP models only", effect.name()),
                    ));
                }
                Ok(())
            }
            EffectSpec::Anomaly(spec) => spec.validate(shape),
            EffectSpec::Awgn { snr_db } => check_snr(*snr_db),
            EffectSpec::SparseNoise { snr_db, density } => {
                check_snr(*snr_db)?;
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(Error::param("density", "must lie in (0, 1]"));
                }
                Ok(())
            }
            EffectSpec::NonnegFactors
            | EffectSpec::NonnegTensor
            | EffectSpec::NormalizeTensor
            | EffectSpec::PoissonCounts => Ok(()),
        }
    }
}

fn check_snr(snr_db: f64) -> Result<()> {
    if !snr_db.is_finite() {
        return Err(Error::param(
            "snr_db",
            "must be finite (omit the effect to disable noise)",
        ));
    }
    Ok(())
}

fn validate_weights(spec: &WeightsSpec, len: usize, field: &str) -> Result<()> {
    if let WeightsSpec::Custom { values } = spec {
        if values.len() != len {
            return Err(Error::config(
                format!("{field}.values"),
                format!("expected {len} values, got {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(
                format!("{field}.values"),
                "values must be finite",
            ));
        }
    }
    Ok(())
}
