//! Coordinate CSV layout.
//!
//! For a data file `<stem>.csv`:
//! - `<stem>.csv`: header `i1,..,iN,value`, one 1-based row per stored entry
//!   (every entry for dense data, non-zeros for sparse data)
//! - `<stem>.mode<n>.csv`: factor `n` (1-based), one matrix row per line
//! - `<stem>.lambda.csv`: CP weights, one per line
//! - `<stem>.core.csv`: Tucker core in coordinate form, header `r1,..,rN,value`
//! - `<stem>.manifest.json`

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::DMatrix;

use super::{
    ensure_writable, format_f64, manifest_for_export, verify, Imported, DENSE_CSV_WARN_ENTRIES,
};
use crate::config::Storage;
use crate::error::{Error, Result};
use crate::manifest::{Dataset, Manifest, TensorData};
use crate::tensor::{CpModel, DenseTensor, Model, Shape, SparseTensor, TuckerModel};

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub(crate) fn mode_path(path: &Path, mode: usize) -> PathBuf {
    sibling(path, &format!("mode{}.csv", mode + 1))
}

pub(crate) fn manifest_path(path: &Path) -> PathBuf {
    sibling(path, "manifest.json")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn coordinate_header(prefix: char, order: usize) -> String {
    let mut cols: Vec<String> = (1..=order).map(|n| format!("{prefix}{n}")).collect();
    cols.push("value".into());
    cols.join(",")
}

fn write_coordinates<'a>(
    path: &Path,
    prefix: char,
    order: usize,
    rows: impl Iterator<Item = (Vec<usize>, f64)> + 'a,
) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", coordinate_header(prefix, order)).map_err(io)?;
    for (index, value) in rows {
        let mut line: Vec<String> = index.iter().map(|i| (i + 1).to_string()).collect();
        line.push(format_f64(value));
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn dense_rows(t: &DenseTensor) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
    t.values()
        .iter()
        .enumerate()
        .map(move |(at, &v)| (t.shape().unravel(at), v))
}

/// Writes the data file and its siblings; returns every path written.
pub fn export_csv(dataset: &Dataset, path: &Path, overwrite: bool) -> Result<Vec<PathBuf>> {
    let order = dataset.tensor.shape().order();
    let mut paths = vec![path.to_path_buf()];
    if let Some(model) = &dataset.model {
        paths.extend((0..model.factors().len()).map(|n| mode_path(path, n)));
        paths.push(match model {
            Model::Cp(_) => sibling(path, "lambda.csv"),
            Model::Tucker(_) => sibling(path, "core.csv"),
        });
    }
    paths.push(manifest_path(path));
    ensure_writable(&paths, overwrite)?;

    match &dataset.tensor {
        TensorData::Dense(t) => {
            if t.numel() > DENSE_CSV_WARN_ENTRIES {
                warn!(
                    "writing {} dense entries as CSV; HDF5 is far more compact at this size",
                    t.numel()
                );
            }
            write_coordinates(path, 'i', order, dense_rows(t))?;
        }
        TensorData::Sparse(t) => {
            write_coordinates(path, 'i', order, t.entries().iter().cloned())?;
        }
    }
    if let Some(model) = &dataset.model {
        for (n, u) in model.factors().iter().enumerate() {
            write_matrix(&mode_path(path, n), u)?;
        }
        match model {
            Model::Cp(m) => {
                let lambda = DMatrix::from_column_slice(m.rank(), 1, m.lambda());
                write_matrix(&sibling(path, "lambda.csv"), &lambda)?;
            }
            Model::Tucker(m) => {
                let core = m.core();
                write_coordinates(
                    &sibling(path, "core.csv"),
                    'r',
                    core.shape().order(),
                    dense_rows(core),
                )?;
            }
        }
    }
    let manifest = manifest_for_export(dataset);
    let mpath = manifest_path(path);
    fs::write(&mpath, manifest.to_json()).map_err(|e| Error::io(&mpath, e))?;
    Ok(paths)
}

type Coordinates = Vec<(Vec<usize>, f64)>;

fn read_coordinates(path: &Path, prefix: char) -> Result<(usize, Coordinates)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file, expected a header"))?;
    let fields: Vec<&str> = header.split(',').collect();
    let order = fields.len().saturating_sub(1);
    if order < 2 || header != coordinate_header(prefix, order) {
        return Err(Error::format(
            path,
            format!("unexpected header `{header}`, expected `{prefix}1,..,{prefix}N,value`"),
        ));
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = k + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != order + 1 {
            return Err(Error::format(
                path,
                format!(
                    "line {line_no}: expected {} fields, found {}",
                    order + 1,
                    parts.len()
                ),
            ));
        }
        let mut index = Vec::with_capacity(order);
        for p in &parts[..order] {
            let i: usize = p
                .parse()
                .map_err(|_| Error::format(path, format!("line {line_no}: bad index `{p}`")))?;
            if i == 0 {
                return Err(Error::format(
                    path,
                    format!("line {line_no}: index 0 found, CSV coordinates are 1-based"),
                ));
            }
            index.push(i - 1);
        }
        let value: f64 = parts[order].parse().map_err(|_| {
            Error::format(
                path,
                format!("line {line_no}: bad value `{}`", parts[order]),
            )
        })?;
        if !value.is_finite() {
            return Err(Error::format(
                path,
                format!("line {line_no}: non-finite value"),
            ));
        }
        rows.push((index, value));
    }
    Ok((order, rows))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let row = line
            .split(',')
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", k + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(
                    path,
                    format!(
                        "line {}: expected {} columns, found {}",
                        k + 1,
                        first.len(),
                        row.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, "empty matrix file"));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn assemble_dense(path: &Path, shape: Shape, rows: Coordinates) -> Result<DenseTensor> {
    let mut values = vec![0.0; shape.numel()];
    let mut seen = vec![false; shape.numel()];
    for (index, v) in rows {
        if !shape.contains(&index) {
            return Err(Error::format(
                path,
                format!("index {index:?} outside shape {:?}", shape.dims()),
            ));
        }
        let at = shape.linear(&index);
        if std::mem::replace(&mut seen[at], true) {
            return Err(Error::format(path, format!("duplicate entry at {index:?}")));
        }
        values[at] = v;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::format(
            path,
            format!("dense data is missing entry {:?}", shape.unravel(missing)),
        ));
    }
    DenseTensor::new(shape, values)
}

fn infer_shape(path: &Path, order: usize, rows: &Coordinates) -> Result<Shape> {
    if rows.is_empty() {
        return Err(Error::format(
            path,
            "no entries and no manifest: shape unknown",
        ));
    }
    let dims = (0..order)
        .map(|n| rows.iter().map(|(i, _)| i[n] + 1).max().unwrap_or(1))
        .collect();
    Shape::new(dims).map_err(|e| Error::format(path, e.to_string()))
}

pub fn import_csv(path: &Path) -> Result<Imported> {
    let mpath = manifest_path(path);
    let manifest = if mpath.exists() {
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        Some(Manifest::from_json(&text).map_err(|e| match e {
            Error::Format { reason, .. } => Error::format(&mpath, reason),
            other => other,
        })?)
    } else {
        warn!(
            "{} has no manifest; shape and storage are inferred",
            path.display()
        );
        None
    };

    let (order, rows) = read_coordinates(path, 'i')?;
    let shape = match &manifest {
        Some(m) => Shape::new(m.shape.clone()).map_err(|e| Error::format(&mpath, e.to_string()))?,
        None => infer_shape(path, order, &rows)?,
    };
    if shape.order() != order {
        return Err(Error::format(
            path,
            format!(
                "data has {order} index columns, shape has {} modes",
                shape.order()
            ),
        ));
    }
    let storage = match &manifest {
        Some(m) => m.storage,
        None if rows.len() == shape.numel() => Storage::Dense,
        None => Storage::Sparse,
    };
    let tensor = match storage {
        Storage::Dense => TensorData::Dense(assemble_dense(path, shape, rows)?),
        Storage::Sparse => TensorData::Sparse(
            SparseTensor::new(shape, rows).map_err(|e| Error::format(path, e.to_string()))?,
        ),
    };

    let model = if mode_path(path, 0).exists() {
        let factors = (0..order)
            .map(|n| read_matrix(&mode_path(path, n)))
            .collect::<Result<Vec<_>>>()?;
        let lambda_path = sibling(path, "lambda.csv");
        let core_path = sibling(path, "core.csv");
        let model = if lambda_path.exists() {
            let lambda = read_matrix(&lambda_path)?;
            if lambda.ncols() != 1 {
                return Err(Error::format(&lambda_path, "expected one weight per line"));
            }
            Model::Cp(
                CpModel::new(factors, lambda.iter().copied().collect())
                    .map_err(|e| Error::format(&lambda_path, e.to_string()))?,
            )
        } else if core_path.exists() {
            let ranks: Vec<usize> = factors.iter().map(|u| u.ncols()).collect();
            let core_shape =
                Shape::new(ranks).map_err(|e| Error::format(&core_path, e.to_string()))?;
            let (_, core_rows) = read_coordinates(&core_path, 'r')?;
            let core = assemble_dense(&core_path, core_shape, core_rows)?;
            Model::Tucker(
                TuckerModel::new(factors, core)
                    .map_err(|e| Error::format(&core_path, e.to_string()))?,
            )
        } else {
            return Err(Error::format(
                path,
                "factor files present but no lambda or core file",
            ));
        };
        Some(model)
    } else {
        None
    };

    if let Some(m) = &manifest {
        verify(path, &tensor, m)?;
    }
    Ok(Imported {
        tensor,
        model,
        manifest,
    })
}
