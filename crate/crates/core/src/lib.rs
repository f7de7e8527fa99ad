//! Deterministic generator of synthetic tensor datasets with CP or Tucker
//! ground truth, temporal factors, injected effects and file export.

pub mod config;
pub mod effects;
pub mod error;
pub mod factors;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod rng;
pub mod temporal;
pub mod tensor;

pub use config::{load_config, GenConfig};
pub use error::{Error, ErrorKind, Result};
pub use manifest::{Dataset, Manifest, TensorData, FORMAT_VERSION};
pub use pipeline::{generate, replay};
pub use rng::RngStream;
pub use tensor::{
    cp_reconstruct, frobenius_norm, normalize_cp, to_sparse, tucker_reconstruct, CpModel,
    DenseTensor, Model, Shape, SparseTensor, TuckerModel,
};
