//! Ground-truth manifest and the dataset bundle that carries it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{GenConfig, Stage, Storage};
use crate::effects::Touched;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{DenseTensor, Model, Shape, SparseTensor};

/// Layout revision of every file this crate writes.
pub const FORMAT_VERSION: &str = "tensorsynth/1";

/// One applied effect, in application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectLogEntry {
    /// Position in the config's effect list.
    pub index: usize,
    pub kind: String,
    pub stage: Stage,
    pub params: Value,
    pub touched: Touched,
    /// Measured results: sigma, norms, resolved magnitudes, counts.
    pub achieved: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexBase {
    pub csv: u8,
    pub hdf5: u8,
}

impl Default for IndexBase {
    fn default() -> Self {
        IndexBase { csv: 1, hdf5: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub rng: String,
    pub seed: u64,
    pub shape: Vec<usize>,
    pub storage: Storage,
    /// `cp`, `tucker`, or absent for a bare tensor.
    pub model_type: Option<String>,
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub index_base: IndexBase,
    /// The fully materialized recipe; replaying it reproduces the dataset.
    pub config: Option<GenConfig>,
    /// Command-line values that replaced config values.
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default)]
    pub effects: Vec<EffectLogEntry>,
    /// SHA-256 of the tensor payload, see [`TensorData::checksum`].
    pub checksum: Option<String>,
    /// RFC 3339 export time; omitted unless requested so outputs stay reproducible.
    #[serde(default)]
    pub exported_at: Option<String>,
}

impl Manifest {
    /// Manifest for a tensor that did not come out of the generation pipeline.
    pub fn bare(tensor: &TensorData, model: Option<&Model>) -> Self {
        let (model_type, ranks) = match model {
            Some(Model::Cp(m)) => (Some("cp".to_string()), vec![m.rank(); m.factors().len()]),
            Some(Model::Tucker(m)) => (Some("tucker".to_string()), m.ranks().to_vec()),
            None => (None, Vec::new()),
        };
        Manifest {
            format_version: FORMAT_VERSION.to_string(),
            rng: rng::ALGORITHM.to_string(),
            seed: 0,
            shape: tensor.shape().dims().to_vec(),
            storage: tensor.storage(),
            model_type,
            ranks,
            index_base: IndexBase::default(),
            config: None,
            overrides: BTreeMap::new(),
            effects: Vec::new(),
            checksum: Some(tensor.checksum()),
            exported_at: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::format("manifest", format!("invalid JSON: {e}")))?;
        let version = value
            .get("format_version")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::format("manifest", "missing format_version"))?;
        check_version(version)?;
        serde_json::from_value(value).map_err(|e| Error::format("manifest", e.to_string()))
    }
}

pub(crate) fn check_version(found: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Version {
            found: found.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Dense(DenseTensor),
    Sparse(SparseTensor),
}

impl TensorData {
    pub fn shape(&self) -> &Shape {
        match self {
            TensorData::Dense(t) => t.shape(),
            TensorData::Sparse(t) => t.shape(),
        }
    }

    pub fn storage(&self) -> Storage {
        match self {
            TensorData::Dense(_) => Storage::Dense,
            TensorData::Sparse(_) => Storage::Sparse,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            TensorData::Dense(t) => t.nnz(),
            TensorData::Sparse(t) => t.nnz(),
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        match self {
            TensorData::Dense(t) => t.clone(),
            TensorData::Sparse(t) => t.to_dense(),
        }
    }

    /// Hex SHA-256 over storage kind, shape and the exact bits of every
    /// stored value (and index, for sparse data), little-endian.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        let dims = self.shape().dims();
        match self {
            TensorData::Dense(t) => {
                h.update(b"dense");
                dims.iter()
                    .for_each(|&d| h.update((d as u64).to_le_bytes()));
                t.values()
                    .iter()
                    .for_each(|v| h.update(v.to_bits().to_le_bytes()));
            }
            TensorData::Sparse(t) => {
                h.update(b"sparse");
                dims.iter()
                    .for_each(|&d| h.update((d as u64).to_le_bytes()));
                for (index, v) in t.entries() {
                    index
                        .iter()
                        .for_each(|&i| h.update((i as u64).to_le_bytes()));
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A tensor with its optional ground-truth model and manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tensor: TensorData,
    pub model: Option<Model>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Wraps an ad-hoc tensor and model with a bare manifest.
    pub fn bare(tensor: TensorData, model: Option<Model>) -> Self {
        let manifest = Manifest::bare(&tensor, model.as_ref());
        Dataset {
            tensor,
            model,
            manifest,
        }
    }
}
