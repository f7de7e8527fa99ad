//! CSV and HDF5 export/import of datasets.
//!
//! CSV data files use 1-based coordinates (`i1,..,iN,value`); HDF5 sparse
//! coordinates are 0-based. Both bases are also recorded in the manifest.

mod csv;
mod hdf5;

use std::path::{Path, PathBuf};

pub use self::csv::{export_csv, import_csv};
pub use self::hdf5::{export_hdf5, import_hdf5};

use crate::config::Format;
use crate::error::{Error, Result};
use crate::manifest::{Dataset, Manifest, TensorData};
use crate::tensor::Model;

/// Dense CSV exports above this many entries log a warning.
pub const DENSE_CSV_WARN_ENTRIES: usize = 10_000_000;

const HDF5_SIGNATURE: &[u8; 8] = b"\x89HDF\r\n\x1a\n";

/// What an import recovered. The manifest is absent for degraded files.
#[derive(Debug, Clone, PartialEq)]
pub struct Imported {
    pub tensor: TensorData,
    pub model: Option<Model>,
    pub manifest: Option<Manifest>,
}

impl Imported {
    pub fn into_dataset(self) -> Option<Dataset> {
        let manifest = self.manifest?;
        Some(Dataset {
            tensor: self.tensor,
            model: self.model,
            manifest,
        })
    }
}

pub fn export(
    dataset: &Dataset,
    path: &Path,
    format: Format,
    overwrite: bool,
) -> Result<Vec<PathBuf>> {
    match format {
        Format::Csv => export_csv(dataset, path, overwrite),
        Format::Hdf5 => export_hdf5(dataset, path, overwrite),
    }
}

/// Detects the format from the file signature and reads it back.
pub fn import_dataset(path: impl AsRef<Path>) -> Result<Imported> {
    let path = path.as_ref();
    let mut head = [0u8; 8];
    let is_hdf5 = {
        use std::io::Read;
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        matches!(f.read_exact(&mut head), Ok(())) && &head == HDF5_SIGNATURE
    };
    if is_hdf5 {
        import_hdf5(path)
    } else if matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("h5" | "hdf5")
    ) {
        Err(Error::format(path, "missing HDF5 signature"))
    } else {
        import_csv(path)
    }
}

pub(crate) fn ensure_writable(paths: &[PathBuf], overwrite: bool) -> Result<()> {
    if !overwrite {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::Collision(p.clone()));
        }
    }
    Ok(())
}

/// Manifest written next to the data, with a checksum of exactly what is stored.
pub(crate) fn manifest_for_export(dataset: &Dataset) -> Manifest {
    let mut m = dataset.manifest.clone();
    m.shape = dataset.tensor.shape().dims().to_vec();
    m.storage = dataset.tensor.storage();
    m.checksum = Some(dataset.tensor.checksum());
    m
}

/// Cross-checks an imported payload against its manifest.
pub(crate) fn verify(path: &Path, tensor: &TensorData, manifest: &Manifest) -> Result<()> {
    if manifest.shape != tensor.shape().dims() {
        return Err(Error::format(
            path,
            format!(
                "manifest shape {:?} disagrees with data shape {:?}",
                manifest.shape,
                tensor.shape().dims()
            ),
        ));
    }
    if let Some(expected) = &manifest.checksum {
        let found = tensor.checksum();
        if &found != expected {
            return Err(Error::format(
                path,
                format!("checksum mismatch: manifest {expected}, data {found}"),
            ));
        }
    }
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
