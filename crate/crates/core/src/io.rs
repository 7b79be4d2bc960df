//! On-disk layout of instances and estimates.
//!
//! Matrices are headerless row-major CSV; vectors are a single column.
//! Values use the shortest decimal that parses back to the same `f64`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bias::{BiasModel, BiasSpec};
use crate::error::{Error, Result};
use crate::generative::{GenerativeInstance, RecoveryInstance};

pub const MANIFEST: &str = "instance.json";

pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format_f64(*x)))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Single-column file with empty fields for missing values.
pub fn write_optional_vector(path: &Path, v: &[Option<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for x in v {
        w.write_record([x.map(format_f64).unwrap_or_default()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    cols.unwrap()
                ),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                reason: format!("row {}, column {}: `{field}` is not a number", i + 1, j + 1),
            })?;
            values.push(x);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("expected one column, found {}", m.ncols()),
        });
    }
    Ok(m.column(0).into_owned())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Contents of `instance.json`; fields that do not apply are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub d: usize,
    pub n: Option<usize>,
    pub k: usize,
    pub s: Option<usize>,
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
    pub bias: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Representation(GenerativeInstance),
    Recovery(RecoveryInstance),
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn save_representation(dir: &Path, inst: &GenerativeInstance) -> Result<()> {
    create_dir(dir)?;
    write_matrix(&dir.join("a.csv"), &inst.a)?;
    write_matrix(&dir.join("c.csv"), &inst.c)?;
    write_vector(&dir.join("b.csv"), &inst.b)?;
    write_matrix(&dir.join("m.csv"), &inst.m)?;
    write_matrix(&dir.join("y.csv"), &inst.y)?;
    let manifest = Manifest {
        d: inst.d(),
        n: Some(inst.n()),
        k: inst.k(),
        s: None,
        gamma: Some(inst.gamma),
        nu: finite(inst.realized_nu),
        delta: None,
        seed: inst.seed,
        bias: inst.bias.to_string(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn save_recovery(dir: &Path, inst: &RecoveryInstance) -> Result<()> {
    create_dir(dir)?;
    write_matrix(&dir.join("a.csv"), &inst.a)?;
    write_vector(&dir.join("c_star.csv"), &inst.c_star)?;
    write_vector(&dir.join("b.csv"), &inst.b)?;
    write_vector(&dir.join("e_star.csv"), &inst.e_star)?;
    write_vector(&dir.join("w.csv"), &inst.w)?;
    write_vector(&dir.join("v.csv"), &inst.v)?;
    let manifest = Manifest {
        d: inst.d(),
        n: None,
        k: inst.k(),
        s: Some(inst.s),
        gamma: None,
        nu: None,
        delta: Some(inst.delta),
        seed: inst.seed,
        bias: inst.bias.to_string(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        reason: e.to_string(),
    })
}

fn missing(dir: &Path, key: &str) -> Error {
    Error::Parse {
        path: dir.join(MANIFEST),
        reason: format!("`{key}` is required for this instance type"),
    }
}

fn parse_bias<T: std::str::FromStr<Err = Error>>(dir: &Path, text: &str) -> Result<T> {
    text.parse().map_err(|e: Error| Error::Parse {
        path: dir.join(MANIFEST),
        reason: e.to_string(),
    })
}

fn check_shape(path: &Path, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            reason: format!("shape {got:?} does not match the manifest's {want:?}"),
        });
    }
    Ok(())
}

/// Loads either instance type; the presence of `y.csv` or `v.csv` decides
/// which.
pub fn load_instance(dir: &Path) -> Result<Instance> {
    let manifest = read_manifest(dir)?;
    let (d, k) = (manifest.d, manifest.k);
    let load_m = |name: &str, shape: (usize, usize)| -> Result<DMatrix<f64>> {
        let path = dir.join(name);
        let m = read_matrix(&path)?;
        check_shape(&path, m.shape(), shape)?;
        Ok(m)
    };
    let load_v = |name: &str, len: usize| -> Result<DVector<f64>> {
        let path = dir.join(name);
        let v = read_vector(&path)?;
        check_shape(&path, (v.len(), 1), (len, 1))?;
        Ok(v)
    };

    if dir.join("y.csv").exists() {
        let n = manifest.n.ok_or_else(|| missing(dir, "n"))?;
        let gamma = manifest.gamma.ok_or_else(|| missing(dir, "gamma"))?;
        let bias: BiasModel = parse_bias(dir, &manifest.bias)?;
        Ok(Instance::Representation(GenerativeInstance {
            a: load_m("a.csv", (d, k))?,
            c: load_m("c.csv", (k, n))?,
            b: load_v("b.csv", d)?,
            m: load_m("m.csv", (d, n))?,
            y: load_m("y.csv", (d, n))?,
            gamma,
            realized_nu: manifest.nu.unwrap_or(f64::INFINITY),
            bias,
            seed: manifest.seed,
        }))
    } else if dir.join("v.csv").exists() {
        let bias: BiasSpec = parse_bias(dir, &manifest.bias)?;
        Ok(Instance::Recovery(RecoveryInstance {
            a: load_m("a.csv", (d, k))?,
            c_star: load_v("c_star.csv", k)?,
            b: load_v("b.csv", d)?,
            e_star: load_v("e_star.csv", d)?,
            w: load_v("w.csv", d)?,
            v: load_v("v.csv", d)?,
            s: manifest.s.ok_or_else(|| missing(dir, "s"))?,
            delta: manifest.delta.ok_or_else(|| missing(dir, "delta"))?,
            bias,
            seed: manifest.seed,
        }))
    } else {
        Err(Error::Parse {
            path: dir.to_path_buf(),
            reason: "neither y.csv nor v.csv present".into(),
        })
    }
}
