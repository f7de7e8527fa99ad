//! HDF5 layout.
//!
//! - `/tensor`: N-d `f64` (dense storage)
//! - `/sparse/coords`: `nnz x N` `i64`, 0-based, attribute `index_base = 0`
//! - `/sparse/values`: `nnz` `f64`
//! - `/model/factors/mode<n>`: factor `n` (1-based name), row-major `rows x R`
//! - `/model/lambda` or `/model/core`
//! - `/meta/manifest`: the manifest as a JSON string
//!
//! Root attributes: `format_version`, `seed`, `shape`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdf5::types::VarLenUnicode;
use hdf5::{File, Group};
use nalgebra::DMatrix;

use super::{ensure_writable, manifest_for_export, verify, Imported};
use crate::error::{Error, Result};
use crate::manifest::{check_version, Dataset, Manifest, TensorData};
use crate::tensor::{CpModel, DenseTensor, Model, Shape, SparseTensor, TuckerModel};

fn text(s: &str) -> VarLenUnicode {
    VarLenUnicode::from_str(s).expect("no interior NUL")
}

fn write_array(group: &Group, name: &str, dims: &[usize], values: &[f64]) -> hdf5::Result<()> {
    let ds = group.new_dataset::<f64>().shape(dims).create(name)?;
    if !values.is_empty() {
        ds.write_raw(values)?;
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn write_file(dataset: &Dataset, path: &Path) -> hdf5::Result<()> {
    let file = File::with_options()
        .with_fcpl(|p| p.obj_track_times(false))
        .create(path)?;
    let manifest = manifest_for_export(dataset);
    let dims: Vec<u64> = manifest.shape.iter().map(|&d| d as u64).collect();

    file.new_attr::<VarLenUnicode>()
        .create("format_version")?
        .write_scalar(&text(&manifest.format_version))?;
    file.new_attr::<u64>()
        .create("seed")?
        .write_scalar(&manifest.seed)?;
    file.new_attr::<u64>()
        .shape([dims.len()])
        .create("shape")?
        .write_raw(&dims)?;

    match &dataset.tensor {
        TensorData::Dense(t) => write_array(&file, "tensor", t.shape().dims(), t.values())?,
        TensorData::Sparse(t) => {
            let g = file.create_group("sparse")?;
            let order = t.shape().order();
            let coords: Vec<i64> = t
                .entries()
                .iter()
                .flat_map(|(i, _)| i.iter().map(|&x| x as i64))
                .collect();
            let ds = g
                .new_dataset::<i64>()
                .shape([t.nnz(), order])
                .create("coords")?;
            if !coords.is_empty() {
                ds.write_raw(&coords)?;
            }
            ds.new_attr::<u8>()
                .create("index_base")?
                .write_scalar(&0u8)?;
            let values: Vec<f64> = t.entries().iter().map(|(_, v)| *v).collect();
            write_array(&g, "values", &[t.nnz()], &values)?;
        }
    }

    if let Some(model) = &dataset.model {
        let g = file.create_group("model")?;
        let fg = g.create_group("factors")?;
        for (n, u) in model.factors().iter().enumerate() {
            write_array(
                &fg,
                &format!("mode{}", n + 1),
                &[u.nrows(), u.ncols()],
                &row_major(u),
            )?;
        }
        match model {
            Model::Cp(m) => write_array(&g, "lambda", &[m.rank()], m.lambda())?,
            Model::Tucker(m) => {
                write_array(&g, "core", m.core().shape().dims(), m.core().values())?
            }
        }
    }

    let meta = file.create_group("meta")?;
    meta.new_dataset::<VarLenUnicode>()
        .create("manifest")?
        .write_scalar(&text(&manifest.to_json()))?;
    file.flush()?;
    Ok(())
}

/// Writes a single `.h5` file; returns its path.
pub fn export_hdf5(dataset: &Dataset, path: &Path, overwrite: bool) -> Result<Vec<PathBuf>> {
    let paths = vec![path.to_path_buf()];
    ensure_writable(&paths, overwrite)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_file(dataset, path)
        .map_err(|e| Error::format(path, format!("HDF5 write failed: {e}")))?;
    Ok(paths)
}

fn read_matrix(group: &Group, name: &str) -> std::result::Result<DMatrix<f64>, String> {
    let ds = group.dataset(name).map_err(|e| e.to_string())?;
    let shape = ds.shape();
    if shape.len() != 2 {
        return Err(format!("{name}: expected a 2-d dataset, found {shape:?}"));
    }
    let values: Vec<f64> = ds.read_raw().map_err(|e| e.to_string())?;
    Ok(DMatrix::from_row_slice(shape[0], shape[1], &values))
}

fn read_dense(group: &Group, name: &str) -> std::result::Result<DenseTensor, String> {
    let ds = group.dataset(name).map_err(|e| e.to_string())?;
    let shape = Shape::new(ds.shape()).map_err(|e| e.to_string())?;
    let values: Vec<f64> = if shape.numel() == 0 {
        Vec::new()
    } else {
        ds.read_raw().map_err(|e| e.to_string())?
    };
    DenseTensor::new(shape, values).map_err(|e| e.to_string())
}

fn read_file(path: &Path) -> std::result::Result<Result<Imported>, String> {
    let file = File::open(path).map_err(|e| e.to_string())?;
    let version: VarLenUnicode = file
        .attr("format_version")
        .and_then(|a| a.read_scalar())
        .map_err(|_| "missing format_version attribute".to_string())?;
    if let Err(e) = check_version(version.as_str()) {
        return Ok(Err(e));
    }

    let manifest = if file.link_exists("meta") {
        let meta = file.group("meta").map_err(|e| e.to_string())?;
        let json: VarLenUnicode = meta
            .dataset("manifest")
            .and_then(|d| d.read_scalar())
            .map_err(|e| e.to_string())?;
        match Manifest::from_json(json.as_str()) {
            Ok(m) => Some(m),
            Err(Error::Format { reason, .. }) => return Err(reason),
            Err(e) => return Ok(Err(e)),
        }
    } else {
        log::warn!("{} has no manifest", path.display());
        None
    };

    let tensor = if file.link_exists("tensor") {
        TensorData::Dense(read_dense(&file, "tensor")?)
    } else if file.link_exists("sparse") {
        let g = file.group("sparse").map_err(|e| e.to_string())?;
        let dims: Vec<u64> = file
            .attr("shape")
            .and_then(|a| a.read_raw())
            .map_err(|e| format!("shape attribute: {e}"))?;
        let shape =
            Shape::new(dims.iter().map(|&d| d as usize).collect()).map_err(|e| e.to_string())?;
        let coords_ds = g.dataset("coords").map_err(|e| e.to_string())?;
        let cshape = coords_ds.shape();
        if cshape.len() != 2 || cshape[1] != shape.order() {
            return Err(format!("sparse/coords has shape {cshape:?}"));
        }
        let nnz = cshape[0];
        let (coords, values): (Vec<i64>, Vec<f64>) = if nnz == 0 {
            (Vec::new(), Vec::new())
        } else {
            let c = coords_ds.read_raw().map_err(|e| e.to_string())?;
            let v = g
                .dataset("values")
                .and_then(|d| d.read_raw())
                .map_err(|e| e.to_string())?;
            (c, v)
        };
        if values.len() != nnz {
            return Err(format!("{nnz} coordinates but {} values", values.len()));
        }
        let mut entries = Vec::with_capacity(nnz);
        for (k, v) in values.into_iter().enumerate() {
            let row = &coords[k * shape.order()..(k + 1) * shape.order()];
            if row.iter().any(|&i| i < 0) {
                return Err(format!("negative coordinate in row {k}"));
            }
            entries.push((row.iter().map(|&i| i as usize).collect(), v));
        }
        TensorData::Sparse(SparseTensor::new(shape, entries).map_err(|e| e.to_string())?)
    } else {
        return Err("neither /tensor nor /sparse present".into());
    };

    if let Some(m) = &manifest {
        if m.storage != tensor.storage() {
            return Err(format!("manifest says {:?} storage", m.storage));
        }
    }

    let model = if file.link_exists("model") {
        let g = file.group("model").map_err(|e| e.to_string())?;
        let fg = g.group("factors").map_err(|e| e.to_string())?;
        let factors = (1..=tensor.shape().order())
            .map(|n| read_matrix(&fg, &format!("mode{n}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let model = if g.link_exists("lambda") {
            let lambda: Vec<f64> = g
                .dataset("lambda")
                .and_then(|d| d.read_raw())
                .map_err(|e| e.to_string())?;
            Model::Cp(CpModel::new(factors, lambda).map_err(|e| e.to_string())?)
        } else if g.link_exists("core") {
            let core = read_dense(&g, "core")?;
            Model::Tucker(TuckerModel::new(factors, core).map_err(|e| e.to_string())?)
        } else {
            return Err("model group has neither lambda nor core".into());
        };
        Some(model)
    } else {
        None
    };

    if let Some(m) = &manifest {
        if let Err(e) = verify(path, &tensor, m) {
            return Ok(Err(e));
        }
    }
    Ok(Ok(Imported {
        tensor,
        model,
        manifest,
    }))
}

pub fn import_hdf5(path: &Path) -> Result<Imported> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    read_file(path).map_err(|reason| Error::format(path, reason))?
}
